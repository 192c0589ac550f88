//! Multiplier symbols: closed forms, tabulated data, and dyadic scale sums,
//! combined as products of factors over coordinate subsets.
//!
//! A `SymbolExpr` of arity `n` is a finite product of factors, each reading
//! only the coordinates in its subset of `{1..n}`. The factor kinds:
//!
//! * closed form: a named expression from a small registry;
//! * tabulated: values over a cube of integer mode tuples, nearest lookup;
//! * scale sum: `sum_k prod_i atom_i(xi)` over one or two dyadic scale
//!   indices, where each atom evaluates a bump-family member (or one of its
//!   Taylor-expansion fragments) at a linear combination of the factor's
//!   coordinates.
//!
//! Scale sums evaluate through exact accumulation of their term lists, so
//! two symbols whose terms form the same multiset produce bitwise-identical
//! values. That is what turns "the case split partitions the scale pairs"
//! into an equality with error exactly zero rather than a tolerance.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bump::FamilyShape;
use crate::error::{Error, Result};
use crate::exactsum::exact_total;
use crate::jet::JET_ORDER;

/// Which scale index of the enclosing sum an atom reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleVar {
    K1,
    K2,
}

/// Functional form of one atom, before and after Taylor surgery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum AtomForm {
    /// The family member itself.
    Plain,
    /// Member value times `(-u)^power`, `u` the atom's argument; carries the
    /// monomial that Taylor expansion moves onto the small-scale factor.
    Monomial { power: u32 },
    /// `member^(order)(u) / order!`.
    DerivFactorial { order: u32 },
    /// Taylor polynomial of the member about `b = base . xi`, degree `order`,
    /// evaluated at the atom's argument.
    TaylorPartial { order: u32, base: Vec<f64> },
    /// Member minus its Taylor polynomial about `b = base . xi`.
    TaylorRemainder { order: u32, base: Vec<f64> },
}

/// One multiplicative atom of a scale-sum product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleAtom {
    pub shape: FamilyShape,
    pub scale: ScaleVar,
    /// Evaluated at scale `k + shift`.
    pub shift: i32,
    /// Argument `u = sum_i coeffs[i] * xi_i` over the factor's coordinates.
    pub coeffs: Vec<f64>,
    pub form: AtomForm,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn dot(c: &[f64], xs: &[f64]) -> f64 {
    c.iter().zip(xs).map(|(a, b)| a * b).sum()
}

impl ScaleAtom {
    pub fn plain(shape: FamilyShape, scale: ScaleVar, coeffs: Vec<f64>) -> Self {
        ScaleAtom {
            shape,
            scale,
            shift: 0,
            coeffs,
            form: AtomForm::Plain,
        }
    }

    fn taylor_partial(&self, k: i32, order: u32, b: f64, u: f64) -> f64 {
        let mut acc = 0.0;
        let d = u - b;
        let mut pw = 1.0;
        for l in 0..=order {
            acc += self.shape.hat_deriv(k, l as usize, b) / factorial(l) * pw;
            pw *= d;
        }
        acc
    }

    pub fn eval(&self, k1: i32, k2: i32, xs: &[f64]) -> f64 {
        let u = dot(&self.coeffs, xs);
        let k = match self.scale {
            ScaleVar::K1 => k1,
            ScaleVar::K2 => k2,
        } + self.shift;
        match &self.form {
            AtomForm::Plain => self.shape.hat(k, u),
            AtomForm::Monomial { power } => self.shape.hat(k, u) * (-u).powi(*power as i32),
            AtomForm::DerivFactorial { order } => {
                self.shape.hat_deriv(k, *order as usize, u) / factorial(*order)
            }
            AtomForm::TaylorPartial { order, base } => {
                self.taylor_partial(k, *order, dot(base, xs), u)
            }
            AtomForm::TaylorRemainder { order, base } => {
                self.shape.hat(k, u) - self.taylor_partial(k, *order, dot(base, xs), u)
            }
        }
    }

    fn validate(&self, subset_len: usize, has_second: bool) -> Result<()> {
        FamilyShape::new(self.shape.kind, self.shape.profile, self.shape.widen)?;
        if self.coeffs.len() != subset_len {
            return Err(Error::InvalidInput(format!(
                "atom has {} coefficients for a factor of {} coordinates",
                self.coeffs.len(),
                subset_len
            )));
        }
        if !self.coeffs.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("atom coefficients".into()));
        }
        if self.scale == ScaleVar::K2 && !has_second {
            return Err(Error::InvalidInput(
                "atom reads scale index 2 but the sum has a single index".into(),
            ));
        }
        let order = match &self.form {
            AtomForm::DerivFactorial { order } => *order,
            AtomForm::TaylorPartial { order, base } | AtomForm::TaylorRemainder { order, base } => {
                if base.len() != subset_len {
                    return Err(Error::InvalidInput(
                        "Taylor base point dimension mismatch".into(),
                    ));
                }
                *order
            }
            _ => 0,
        };
        if order as usize > JET_ORDER {
            return Err(Error::InvalidInput(format!(
                "derivative order {order} exceeds the profile's jet order {JET_ORDER}"
            )));
        }
        Ok(())
    }
}

/// Relation the second scale index must bear to the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    /// No constraint.
    All,
    /// `|k1 - k2| <= gap`.
    Diag,
    /// `k2 - k1 > gap` (first index far below the second).
    FirstBelow,
    /// `k1 - k2 > gap`.
    SecondBelow,
    /// `k2 - k1 == gap`.
    ExactGap,
}

/// Range and constraint for the second scale index of a double sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecondIndex {
    pub k_lo: i32,
    pub k_hi: i32,
    pub kind: PairKind,
    pub gap: i32,
}

/// `sum_{k1 (,k2)} sum_products prod_atoms atom(k1, k2, xi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSum {
    pub k_lo: i32,
    pub k_hi: i32,
    pub second: Option<SecondIndex>,
    pub products: Vec<Vec<ScaleAtom>>,
}

fn pair_allowed(kind: PairKind, gap: i32, k1: i32, k2: i32) -> bool {
    match kind {
        PairKind::All => true,
        PairKind::Diag => (k1 - k2).abs() <= gap,
        PairKind::FirstBelow => k2 - k1 > gap,
        PairKind::SecondBelow => k1 - k2 > gap,
        PairKind::ExactGap => k2 - k1 == gap,
    }
}

impl ScaleSum {
    /// The admissible scale tuples, second component mirroring the first
    /// for single-index sums.
    pub fn pairs(&self) -> Vec<(i32, i32)> {
        let mut out = Vec::new();
        for k1 in self.k_lo..=self.k_hi {
            match &self.second {
                None => out.push((k1, k1)),
                Some(s) => {
                    for k2 in s.k_lo..=s.k_hi {
                        if pair_allowed(s.kind, s.gap, k1, k2) {
                            out.push((k1, k2));
                        }
                    }
                }
            }
        }
        out
    }

    /// All product terms at `xs`, one per (scale tuple, product); the
    /// symbol's value is the exact sum of this list.
    pub fn eval_terms(&self, xs: &[f64]) -> Vec<f64> {
        let pairs = self.pairs();
        let mut out = Vec::with_capacity(pairs.len() * self.products.len());
        for (k1, k2) in pairs {
            for product in &self.products {
                let mut t = 1.0;
                for atom in product {
                    t *= atom.eval(k1, k2, xs);
                }
                out.push(t);
            }
        }
        out
    }

    pub fn eval(&self, xs: &[f64]) -> f64 {
        exact_total(self.eval_terms(xs))
    }

    fn validate(&self, subset_len: usize) -> Result<()> {
        if self.k_lo > self.k_hi {
            return Err(Error::InvalidInput("empty first scale range".into()));
        }
        if let Some(s) = &self.second {
            if s.k_lo > s.k_hi {
                return Err(Error::InvalidInput("empty second scale range".into()));
            }
        }
        for product in &self.products {
            if product.is_empty() {
                return Err(Error::InvalidInput("empty atom product".into()));
            }
            for atom in product {
                atom.validate(subset_len, self.second.is_some())?;
            }
        }
        Ok(())
    }
}

/// One factor of a symbol product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    ClosedForm {
        name: String,
        #[serde(default)]
        params: Vec<f64>,
    },
    Tabulated {
        dim: usize,
        j_min: i64,
        j_max: i64,
        /// Frequency spacing of the table; lookup rounds `xi / step`.
        step: f64,
        /// Row-major over the cube `[j_min, j_max]^dim`.
        values: Vec<f64>,
    },
    ScaleSum(ScaleSum),
}

impl Factor {
    pub fn one() -> Factor {
        Factor::ClosedForm {
            name: "one".into(),
            params: vec![],
        }
    }

    pub fn constant(c: f64) -> Factor {
        Factor::ClosedForm {
            name: "constant".into(),
            params: vec![c],
        }
    }

    /// Samples a function of the subset coordinates into a tabulated factor.
    pub fn tabulate(
        dim: usize,
        j_min: i64,
        j_max: i64,
        step: f64,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Factor> {
        if j_min > j_max || step <= 0.0 || !step.is_finite() || dim == 0 {
            return Err(Error::InvalidInput("bad tabulation geometry".into()));
        }
        let width = (j_max - j_min + 1) as usize;
        let count = width.pow(dim as u32);
        let mut values = Vec::with_capacity(count);
        let mut idx = vec![0usize; dim];
        let mut xs = vec![0.0f64; dim];
        for flat in 0..count {
            let mut rem = flat;
            for d in (0..dim).rev() {
                idx[d] = rem % width;
                rem /= width;
            }
            for d in 0..dim {
                xs[d] = (j_min + idx[d] as i64) as f64 * step;
            }
            values.push(f(&xs));
        }
        Ok(Factor::Tabulated {
            dim,
            j_min,
            j_max,
            step,
            values,
        })
    }

    fn validate(&self, subset_len: usize) -> Result<()> {
        match self {
            Factor::ClosedForm { name, params } => {
                let expected = match name.as_str() {
                    "one" | "riesz_ratio" => 0,
                    "constant" | "smooth_order" => 1,
                    _ => {
                        return Err(Error::InvalidInput(format!(
                            "unknown closed-form symbol '{name}'"
                        )))
                    }
                };
                if params.len() != expected {
                    return Err(Error::InvalidInput(format!(
                        "closed form '{name}' takes {expected} parameter(s), got {}",
                        params.len()
                    )));
                }
                if !params.iter().all(|p| p.is_finite()) {
                    return Err(Error::NonFinite(format!("parameters of '{name}'")));
                }
                Ok(())
            }
            Factor::Tabulated {
                dim,
                j_min,
                j_max,
                step,
                values,
            } => {
                if *dim != subset_len {
                    return Err(Error::InvalidInput(format!(
                        "tabulated factor of dimension {dim} on a subset of {subset_len}"
                    )));
                }
                if j_min > j_max || *step <= 0.0 || !step.is_finite() {
                    return Err(Error::InvalidInput("bad tabulation geometry".into()));
                }
                let width = (j_max - j_min + 1) as usize;
                if values.len() != width.pow(*dim as u32) {
                    return Err(Error::InvalidInput(format!(
                        "table holds {} values, expected {}",
                        values.len(),
                        width.pow(*dim as u32)
                    )));
                }
                if !values.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite("table values".into()));
                }
                Ok(())
            }
            Factor::ScaleSum(s) => s.validate(subset_len),
        }
    }

    pub fn eval(&self, xs: &[f64]) -> f64 {
        match self {
            Factor::ClosedForm { name, params } => match name.as_str() {
                "one" => 1.0,
                "constant" => params[0],
                "riesz_ratio" => {
                    let denom: f64 = xs.iter().map(|x| x * x).sum();
                    if denom == 0.0 {
                        0.0
                    } else {
                        xs[0] * xs[0] / denom
                    }
                }
                "smooth_order" => {
                    let r2: f64 = xs.iter().map(|x| x * x).sum();
                    (r2 / (1.0 + r2)).powf(params[0] / 2.0)
                }
                _ => unreachable!("validated at construction"),
            },
            Factor::Tabulated {
                dim,
                j_min,
                j_max,
                step,
                values,
            } => {
                let width = (j_max - j_min + 1) as usize;
                let mut flat = 0usize;
                for d in 0..*dim {
                    let j = (xs[d] / step).round() as i64;
                    if j < *j_min || j > *j_max {
                        return 0.0;
                    }
                    flat = flat * width + (j - j_min) as usize;
                }
                values[flat]
            }
            Factor::ScaleSum(s) => s.eval(xs),
        }
    }

    pub fn eval_terms(&self, xs: &[f64]) -> Vec<f64> {
        match self {
            Factor::ScaleSum(s) => s.eval_terms(xs),
            other => vec![other.eval(xs)],
        }
    }
}

/// A factor together with the 1-based coordinate subset it reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolFactor {
    pub subset: Vec<usize>,
    #[serde(flatten)]
    pub factor: Factor,
}

/// Product of factors over coordinate subsets; the multiplier symbols of
/// every operator in this crate that carries one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolExpr {
    arity: usize,
    factors: Vec<SymbolFactor>,
}

impl SymbolExpr {
    pub fn new(arity: usize, factors: Vec<SymbolFactor>) -> Result<Self> {
        if arity == 0 {
            return Err(Error::InvalidInput("symbol arity must be positive".into()));
        }
        if factors.is_empty() {
            return Err(Error::InvalidInput(
                "a symbol needs at least one factor".into(),
            ));
        }
        for f in &factors {
            if f.subset.is_empty() {
                return Err(Error::InvalidInput("factor subset is empty".into()));
            }
            if f.subset.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(
                    "factor subset must be strictly increasing".into(),
                ));
            }
            if *f.subset.last().unwrap() > arity {
                return Err(Error::InvalidInput(format!(
                    "subset {:?} exceeds arity {arity}",
                    f.subset
                )));
            }
            f.factor.validate(f.subset.len())?;
        }
        Ok(SymbolExpr { arity, factors })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn factors(&self) -> &[SymbolFactor] {
        &self.factors
    }

    fn check_point(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.arity {
            return Err(Error::InvalidInput(format!(
                "symbol of arity {} evaluated at a point of dimension {}",
                self.arity,
                xi.len()
            )));
        }
        if !xi.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("evaluation point".into()));
        }
        Ok(())
    }

    fn projected(&self, f: &SymbolFactor, xi: &[f64], buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(f.subset.iter().map(|&i| xi[i - 1]));
    }

    pub fn eval_real(&self, xi: &[f64]) -> Result<f64> {
        self.check_point(xi)?;
        let mut buf = Vec::new();
        let mut v = 1.0;
        for f in &self.factors {
            self.projected(f, xi, &mut buf);
            v *= f.factor.eval(&buf);
        }
        Ok(v)
    }

    pub fn eval(&self, xi: &[f64]) -> Result<Complex64> {
        Ok(Complex64::new(self.eval_real(xi)?, 0.0))
    }

    /// Term list whose exact sum is the symbol's value: the cross product of
    /// the factors' term lists. Intended for multiset comparisons between
    /// structurally different builds of the same symbol.
    pub fn eval_terms(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_point(xi)?;
        let mut buf = Vec::new();
        let mut terms = vec![1.0f64];
        for f in &self.factors {
            self.projected(f, xi, &mut buf);
            let fterms = f.factor.eval_terms(&buf);
            let mut next = Vec::with_capacity(terms.len() * fterms.len());
            for &t in &terms {
                for &ft in &fterms {
                    next.push(t * ft);
                }
            }
            terms = next;
        }
        Ok(terms)
    }
}

/// Builds the product symbol from `(subset, factor)` pairs.
pub fn build_flag_symbol(arity: usize, factors: Vec<(Vec<usize>, Factor)>) -> Result<SymbolExpr> {
    SymbolExpr::new(
        arity,
        factors
            .into_iter()
            .map(|(subset, factor)| SymbolFactor { subset, factor })
            .collect(),
    )
}

/// The tensor kernel `sum_k prod_j member_j_k(xi_j)` as a single scale-sum
/// factor over all coordinates. Families must share one scale range.
pub fn tensor_kernel_symbol(families: &[crate::bump::BumpFamily]) -> Result<SymbolExpr> {
    if families.is_empty() {
        return Err(Error::InvalidInput("no families given".into()));
    }
    let (k_lo, k_hi) = (families[0].k_lo(), families[0].k_hi());
    for f in families {
        if (f.k_lo(), f.k_hi()) != (k_lo, k_hi) {
            return Err(Error::InvalidInput(format!(
                "families must share one scale range; got [{}, {}] vs [{k_lo}, {k_hi}]",
                f.k_lo(),
                f.k_hi()
            )));
        }
    }
    let n = families.len();
    let atoms: Vec<ScaleAtom> = families
        .iter()
        .enumerate()
        .map(|(i, fam)| {
            let mut coeffs = vec![0.0; n];
            coeffs[i] = 1.0;
            ScaleAtom::plain(fam.shape(), ScaleVar::K1, coeffs)
        })
        .collect();
    build_flag_symbol(
        n,
        vec![(
            (1..=n).collect(),
            Factor::ScaleSum(ScaleSum {
                k_lo,
                k_hi,
                second: None,
                products: vec![atoms],
            }),
        )],
    )
}

/// Worst observed `|d^alpha m(xi)| * |xi|^|alpha|` per multi-index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MihlinReport {
    pub max_order: usize,
    pub sample_count: usize,
    pub entries: Vec<MihlinEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MihlinEntry {
    pub alpha: Vec<u32>,
    pub sup_scaled: f64,
}

impl MihlinReport {
    pub fn entry(&self, alpha: &[u32]) -> Option<&MihlinEntry> {
        self.entries.iter().find(|e| e.alpha == alpha)
    }
}

fn multi_indices(n: usize, max_total: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fn rec(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, left: usize) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for a in 0..=left {
            cur[pos] = a as u32;
            rec(out, cur, pos + 1, left - a);
        }
        cur[pos] = 0;
    }
    for total in 0..=max_total {
        let before = out.len();
        rec(&mut out, &mut cur, 0, total);
        // keep only the indices of exactly this total
        let mut kept: Vec<Vec<u32>> = out
            .drain(before..)
            .filter(|a| a.iter().sum::<u32>() as usize == total)
            .collect();
        kept.sort();
        out.extend(kept);
    }
    out
}

fn iterated_diff(m: &SymbolExpr, alpha: &mut [u32], xi: &mut [f64], h: f64) -> Result<f64> {
    match alpha.iter().position(|&a| a > 0) {
        None => m.eval_real(xi),
        Some(i) => {
            alpha[i] -= 1;
            xi[i] += h;
            let plus = iterated_diff(m, alpha, xi, h);
            xi[i] -= 2.0 * h;
            let minus = iterated_diff(m, alpha, xi, h);
            xi[i] += h;
            alpha[i] += 1;
            Ok((plus? - minus?) / (2.0 * h))
        }
    }
}

/// Checks the derivative-decay condition by iterated central differences
/// with step `1e-3 * |xi|` at each sample.
pub fn mihlin_report(
    m: &SymbolExpr,
    max_order: usize,
    samples: &[Vec<f64>],
) -> Result<MihlinReport> {
    if max_order > 4 {
        return Err(Error::InvalidInput(
            "derivative checks are limited to total order 4".into(),
        ));
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("no sample points".into()));
    }
    let alphas = multi_indices(m.arity(), max_order);
    let mut sups = vec![0.0f64; alphas.len()];
    for sample in samples {
        if sample.len() != m.arity() {
            return Err(Error::InvalidInput("sample dimension mismatch".into()));
        }
        let norm = sample.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidInput(
                "samples must avoid the origin, where the symbol class is singular".into(),
            ));
        }
        let h = 1e-3 * norm;
        let mut xi = sample.clone();
        for (ai, alpha) in alphas.iter().enumerate() {
            let total: u32 = alpha.iter().sum();
            let mut a = alpha.clone();
            let d = iterated_diff(m, &mut a, &mut xi, h)?;
            let scaled = d.abs() * norm.powi(total as i32);
            if !scaled.is_finite() {
                return Err(Error::NonFinite(format!(
                    "derivative estimate at alpha {alpha:?}"
                )));
            }
            if scaled > sups[ai] {
                sups[ai] = scaled;
            }
        }
    }
    Ok(MihlinReport {
        max_order,
        sample_count: samples.len(),
        entries: alphas
            .into_iter()
            .zip(sups)
            .map(|(alpha, sup_scaled)| MihlinEntry { alpha, sup_scaled })
            .collect(),
    })
}
