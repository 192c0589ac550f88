//! Truncated Taylor-series arithmetic.
//!
//! A [`Jet`] stores the coefficients `c_k = f^(k)(x0)/k!` of a function's
//! Taylor expansion at a point, up to order [`JET_ORDER`]. Propagating jets
//! through the closed-form bump profiles yields derivatives of any order up
//! to the cap at machine accuracy, with none of the cancellation noise of
//! finite differences.

/// Highest derivative order carried by a jet.
pub const JET_ORDER: usize = 10;
const LEN: usize = JET_ORDER + 1;

/// Taylor coefficients `[f, f', f''/2!, ..., f^(10)/10!]` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    c: [f64; LEN],
}

impl Jet {
    pub fn constant(v: f64) -> Jet {
        let mut c = [0.0; LEN];
        c[0] = v;
        Jet { c }
    }

    /// The identity function `t` expanded at `t = x`.
    pub fn variable(x: f64) -> Jet {
        let mut c = [0.0; LEN];
        c[0] = x;
        c[1] = 1.0;
        Jet { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `k`-th derivative (not divided by `k!`).
    pub fn derivative(&self, k: usize) -> f64 {
        assert!(k <= JET_ORDER, "jet carries derivatives up to {JET_ORDER}");
        let mut fact = 1.0;
        for i in 1..=k {
            fact *= i as f64;
        }
        self.c[k] * fact
    }

    /// `k`-th Taylor coefficient, i.e. `f^(k)/k!`.
    pub fn coeff(&self, k: usize) -> f64 {
        assert!(k <= JET_ORDER);
        self.c[k]
    }

    /// Rewrites the jet under the substitution `u = s * x`: coefficient `k`
    /// picks up a factor `s^k`. This is composition with a linear map, the
    /// only reparametrization the cutoff construction needs.
    pub fn rescale_argument(&self, s: f64) -> Jet {
        let mut c = [0.0; LEN];
        let mut pw = 1.0;
        for k in 0..LEN {
            c[k] = self.c[k] * pw;
            pw *= s;
        }
        Jet { c }
    }

    pub fn add(&self, rhs: &Jet) -> Jet {
        let mut c = [0.0; LEN];
        for k in 0..LEN {
            c[k] = self.c[k] + rhs.c[k];
        }
        Jet { c }
    }

    pub fn sub(&self, rhs: &Jet) -> Jet {
        let mut c = [0.0; LEN];
        for k in 0..LEN {
            c[k] = self.c[k] - rhs.c[k];
        }
        Jet { c }
    }

    pub fn neg(&self) -> Jet {
        let mut c = [0.0; LEN];
        for k in 0..LEN {
            c[k] = -self.c[k];
        }
        Jet { c }
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut c = [0.0; LEN];
        for k in 0..LEN {
            c[k] = self.c[k] * s;
        }
        Jet { c }
    }

    pub fn mul(&self, rhs: &Jet) -> Jet {
        let mut c = [0.0; LEN];
        for i in 0..LEN {
            if self.c[i] == 0.0 {
                continue;
            }
            for j in 0..LEN - i {
                c[i + j] += self.c[i] * rhs.c[j];
            }
        }
        Jet { c }
    }

    /// Multiplicative inverse; requires a nonzero value part.
    pub fn recip(&self) -> Jet {
        assert!(self.c[0] != 0.0, "jet reciprocal at zero");
        let mut c = [0.0; LEN];
        c[0] = 1.0 / self.c[0];
        for k in 1..LEN {
            let mut acc = 0.0;
            for i in 1..=k {
                acc += self.c[i] * c[k - i];
            }
            c[k] = -acc / self.c[0];
        }
        Jet { c }
    }

    pub fn div(&self, rhs: &Jet) -> Jet {
        self.mul(&rhs.recip())
    }

    /// Exponential, via the recurrence `(e^f)' = f' e^f`.
    pub fn exp(&self) -> Jet {
        let mut c = [0.0; LEN];
        c[0] = self.c[0].exp();
        for k in 1..LEN {
            let mut acc = 0.0;
            for i in 1..=k {
                acc += (i as f64) * self.c[i] * c[k - i];
            }
            c[k] = acc / k as f64;
        }
        Jet { c }
    }
}
