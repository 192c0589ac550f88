//! Exact floating-point accumulation.
//!
//! Sums a sequence of doubles with no rounding error in the accumulation
//! itself: partial sums are kept as a list of non-overlapping components
//! (Shewchuk's growing expansion), and the final collapse rounds the exact
//! total to the nearest double, with the half-ulp tie handled against the
//! next component so the result is the correctly rounded exact sum.
//!
//! The payoff is order independence: any permutation of the same inputs
//! produces the bitwise-identical result, which is what lets structurally
//! different evaluations of the same term multiset compare equal to zero
//! error rather than to a tolerance.

/// Running exact sum. Push values with [`ExactSum::add`], read the correctly
/// rounded total with [`ExactSum::value`].
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        ExactSum::default()
    }

    pub fn add(&mut self, x: f64) {
        let mut x = x;
        let mut out = 0;
        for i in 0..self.partials.len() {
            let y = self.partials[i];
            let hi = x + y;
            let lo = if x.abs() < y.abs() {
                x - (hi - y)
            } else {
                y - (hi - x)
            };
            if lo != 0.0 {
                self.partials[out] = lo;
                out += 1;
            }
            x = hi;
        }
        self.partials.truncate(out);
        self.partials.push(x);
    }

    /// Correctly rounded value of the exact total.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        if p.is_empty() {
            return 0.0;
        }
        let mut n = p.len();
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // A half-ulp residue ties the rounding; the sign of the next lower
        // partial breaks it toward the exact total.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

/// One-shot correctly rounded sum.
pub fn exact_total(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = ExactSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}
