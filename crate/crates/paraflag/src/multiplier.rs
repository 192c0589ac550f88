//! Multilinear multiplier operators by direct frequency summation, the
//! two-scale product decomposition, the paraproduct, its commutation with
//! fractional derivatives, and the triple-product split whose far
//! off-diagonal part is a genuine flag paraproduct.
//!
//! The direct sum is the module's oracle: every fast per-scale path
//! elsewhere is checked against [`apply_multiplier`] on small grids. It is
//! O(N^n), so budgets are enforced rather than discovered by waiting.

use num_complex::Complex64;

use crate::bump::{profile_value, BumpFamily, BumpKind, FamilyShape, ProfileKind};
use crate::error::{Error, Result};
use crate::grid::{
    forward_transform, fractional_derivative, inverse_transform, Grid, SampledFunction, Spectrum,
};
use crate::littlewood::{apply_frequency_symbol, project};
use crate::symbol::{build_flag_symbol, Factor, ScaleAtom, ScaleSum, ScaleVar, SymbolExpr};

/// Relative coefficient-product threshold below which a tuple that would
/// alias is ignored instead of rejected; transform round-off sits far
/// beneath it, genuine spectral content far above.
const ALIAS_TOLERANCE: f64 = 1e-12;

/// Direct evaluation of `T(x) = sum_(j1..jn) m(j/l) prod F_i(j_i)
/// e^(2 pi i x (sum j_i) / l)`, normalized so that `m = 1` returns the
/// pointwise product of the inputs.
pub fn apply_multiplier(m: &SymbolExpr, fs: &[&SampledFunction]) -> Result<SampledFunction> {
    let n = fs.len();
    if n == 0 {
        return Err(Error::InvalidInput("no input functions".into()));
    }
    if m.arity() != n {
        return Err(Error::InvalidInput(format!(
            "symbol arity {} applied to {n} functions",
            m.arity()
        )));
    }
    let grid = *fs[0].grid();
    for f in fs {
        grid.check_same(f.grid(), "multiplier input")?;
    }
    let budget = match n {
        1 => 4096,
        2 => 256,
        3 => 64,
        _ => {
            return Err(Error::Budget(format!(
                "direct summation supports up to 3 inputs, got {n}"
            )))
        }
    };
    if grid.len() > budget {
        return Err(Error::Budget(format!(
            "direct summation at arity {n} is limited to {budget} points, grid has {}",
            grid.len()
        )));
    }
    let spectra: Vec<Spectrum> = fs
        .iter()
        .map(|f| forward_transform(f))
        .collect::<Result<_>>()?;
    let supports: Vec<Vec<(i64, Complex64)>> = spectra
        .iter()
        .map(|s| {
            grid.modes()
                .map(|j| (j, s.coeff(j)))
                .filter(|(_, c)| c.norm_sqr() > 0.0)
                .collect()
        })
        .collect();
    let threshold = ALIAS_TOLERANCE
        * spectra
            .iter()
            .map(|s| s.max_abs())
            .product::<f64>();
    let l = grid.period();
    let norm = l.powi(1 - n as i32);
    let mut out = Spectrum::zero(grid);
    let mut tuple = vec![(0i64, Complex64::new(0.0, 0.0)); n];
    let mut freqs = vec![0.0f64; n];
    eval_tuples(
        m, &supports, &mut tuple, &mut freqs, 0, &grid, l, norm, threshold, &mut out,
    )?;
    inverse_transform(&out)
}

#[allow(clippy::too_many_arguments)]
fn eval_tuples(
    m: &SymbolExpr,
    supports: &[Vec<(i64, Complex64)>],
    tuple: &mut [(i64, Complex64)],
    freqs: &mut [f64],
    depth: usize,
    grid: &Grid,
    l: f64,
    norm: f64,
    threshold: f64,
    out: &mut Spectrum,
) -> Result<()> {
    if depth == supports.len() {
        let sym = m.eval(freqs)?;
        if sym.norm_sqr() == 0.0 {
            return Ok(());
        }
        let mut coeff = sym;
        let mut j_sum = 0i64;
        for (j, c) in tuple.iter() {
            coeff *= c;
            j_sum += j;
        }
        if j_sum < grid.mode_min() || j_sum > grid.mode_max() {
            if coeff.norm() > threshold {
                return Err(Error::Aliasing(format!(
                    "mode tuple {:?} sums to {j_sum}, outside the representable band \
                     [{}, {}], with significant weight {:.3e}",
                    tuple.iter().map(|(j, _)| *j).collect::<Vec<_>>(),
                    grid.mode_min(),
                    grid.mode_max(),
                    coeff.norm()
                )));
            }
            return Ok(());
        }
        out.set_coeff(j_sum, out.coeff(j_sum) + coeff * norm);
        return Ok(());
    }
    for &(j, c) in &supports[depth] {
        tuple[depth] = (j, c);
        freqs[depth] = j as f64 / l;
        eval_tuples(
            m, supports, tuple, freqs, depth + 1, grid, l, norm, threshold, out,
        )?;
    }
    Ok(())
}

/// The two-scale split of a pointwise product into near-diagonal,
/// low-high, and high-low parts.
#[derive(Debug, Clone)]
pub struct ProductParts {
    /// Scale pairs within the gap, plus all low-cap cross terms.
    pub diag: SampledFunction,
    /// First factor at the strictly lower scale.
    pub low_high: SampledFunction,
    /// Second factor at the strictly lower scale.
    pub high_low: SampledFunction,
}

impl ProductParts {
    pub fn total(&self) -> Result<SampledFunction> {
        self.diag.add(&self.low_high)?.add(&self.high_low)
    }
}

fn low_cap(f: &SampledFunction, fam: &BumpFamily) -> Result<SampledFunction> {
    let scale = ((fam.k_lo() - 1) as f64).exp2();
    apply_frequency_symbol(f, |xi| profile_value(ProfileKind::SmoothCutoff, xi / scale))
}

/// Splits `f * g` over scale pairs of one annulus family: `diag` collects
/// `|k1 - k2| <= gap` plus every term involving the low-frequency cap,
/// `low_high` the pairs with `k2 - k1 > gap`, `high_low` symmetrically.
/// The three parts sum to `f g` exactly on the family's covered band.
pub fn decompose_product(
    f: &SampledFunction,
    g: &SampledFunction,
    fam: &BumpFamily,
    gap: i32,
) -> Result<ProductParts> {
    f.grid().check_same(g.grid(), "product factor")?;
    if fam.kind() != BumpKind::Psi {
        return Err(Error::InvalidInput(
            "product decomposition projects along an annulus (psi) family".into(),
        ));
    }
    if gap < 0 {
        return Err(Error::InvalidInput("scale gap must be nonnegative".into()));
    }
    let ks: Vec<i32> = fam.scales().collect();
    let pf: Vec<SampledFunction> = ks
        .iter()
        .map(|&k| project(f, fam, k))
        .collect::<Result<_>>()?;
    let pg: Vec<SampledFunction> = ks
        .iter()
        .map(|&k| project(g, fam, k))
        .collect::<Result<_>>()?;
    let f_low = low_cap(f, fam)?;
    let g_low = low_cap(g, fam)?;

    let mut diag = f_low.pointwise_mul(g)?;
    diag.accumulate(&f.pointwise_mul(&g_low)?)?;
    diag.accumulate(&f_low.pointwise_mul(&g_low)?.scale(Complex64::new(-1.0, 0.0)))?;
    let mut low_high = SampledFunction::zero(*f.grid());
    let mut high_low = SampledFunction::zero(*f.grid());
    for (i1, _) in ks.iter().enumerate() {
        for (i2, _) in ks.iter().enumerate() {
            if (ks[i1] - ks[i2]).abs() <= gap {
                diag.accumulate(&pf[i1].pointwise_mul(&pg[i2])?)?;
            }
        }
    }
    // Off-diagonal pairs enumerated low-scale-major in both parts, so the
    // two accumulations see mirror-image term sequences and f = g gives
    // bitwise-equal outputs.
    for (lo, _) in ks.iter().enumerate() {
        for (hi, _) in ks.iter().enumerate() {
            if ks[hi] - ks[lo] > gap {
                low_high.accumulate(&pf[lo].pointwise_mul(&pg[hi])?)?;
                high_low.accumulate(&pf[hi].pointwise_mul(&pg[lo])?)?;
            }
        }
    }
    Ok(ProductParts {
        diag,
        low_high,
        high_low,
    })
}

/// The three families a paraproduct reads: ball filters for the first slot,
/// annulus filters for the second, and a widened annulus for the output.
#[derive(Debug, Clone)]
pub struct PiFamilies {
    phi: BumpFamily,
    psi: BumpFamily,
    out: BumpFamily,
}

impl PiFamilies {
    pub fn new(phi: BumpFamily, psi: BumpFamily, out: BumpFamily) -> Result<Self> {
        if phi.kind() != BumpKind::Phi || psi.kind() != BumpKind::Psi || out.kind() != BumpKind::Psi
        {
            return Err(Error::InvalidInput(
                "paraproduct families must be (phi, psi, psi)".into(),
            ));
        }
        let range = (phi.k_lo(), phi.k_hi());
        if (psi.k_lo(), psi.k_hi()) != range || (out.k_lo(), out.k_hi()) != range {
            return Err(Error::InvalidInput(
                "paraproduct families must share one scale range".into(),
            ));
        }
        Ok(PiFamilies { phi, psi, out })
    }

    /// Plain ball and annulus families plus a one-octave-widened output
    /// family on `[k_lo, k_hi]`.
    pub fn standard(grid: &Grid, k_lo: i32, k_hi: i32) -> Result<Self> {
        let phi = BumpFamily::build(BumpKind::Phi, k_lo, k_hi, grid)?;
        let psi = BumpFamily::build(BumpKind::Psi, k_lo, k_hi, grid)?;
        let wide = FamilyShape::new(BumpKind::Psi, ProfileKind::SmoothCutoff, 1)?;
        let out = BumpFamily::build_shaped(wide, k_lo, k_hi, grid)?;
        Ok(PiFamilies { phi, psi, out })
    }

    pub fn phi(&self) -> &BumpFamily {
        &self.phi
    }

    pub fn psi(&self) -> &BumpFamily {
        &self.psi
    }

    pub fn out(&self) -> &BumpFamily {
        &self.out
    }

    pub fn scales(&self) -> impl Iterator<Item = i32> {
        self.phi.scales()
    }
}

/// `pi(f, g) = sum_k [(f * phi_k)(g * psi_k)] * out_k`, evaluated scale by
/// scale on the Fourier side; its symbol is exactly
/// `sum_k phi_k(xi1) psi_k(xi2) out_k(xi1 + xi2)`.
pub fn paraproduct_pi(
    f: &SampledFunction,
    g: &SampledFunction,
    fams: &PiFamilies,
) -> Result<SampledFunction> {
    f.grid().check_same(g.grid(), "paraproduct input")?;
    let mut acc = SampledFunction::zero(*f.grid());
    for k in fams.scales() {
        let low = project(f, &fams.phi, k)?;
        let band = project(g, &fams.psi, k)?;
        let piece = apply_frequency_symbol(&low.pointwise_mul(&band)?, |xi| {
            fams.out.shape().hat(k, xi)
        })?;
        acc.accumulate(&piece)?;
    }
    Ok(acc)
}

/// Like [`paraproduct_pi`] but with per-scale symbol modifications on the
/// annulus and output filters; `inner(k, xi)` and `outer(k, xi)` replace
/// the plain member values.
fn paraproduct_modified(
    f: &SampledFunction,
    g: &SampledFunction,
    fams: &PiFamilies,
    inner: impl Fn(i32, f64) -> f64,
    outer: impl Fn(i32, f64) -> f64,
) -> Result<SampledFunction> {
    let mut acc = SampledFunction::zero(*f.grid());
    for k in fams.scales() {
        let low = project(f, &fams.phi, k)?;
        let band = apply_frequency_symbol(g, |xi| inner(k, xi))?;
        let piece = apply_frequency_symbol(&low.pointwise_mul(&band)?, |xi| outer(k, xi))?;
        acc.accumulate(&piece)?;
    }
    Ok(acc)
}

/// Checks the derivative-commutation identity: the fractional derivative of
/// `pi(f, g)` against the rebalanced paraproduct applied to `(f, D^alpha g)`,
/// where the annulus filter absorbs `(|xi| 2^-k)^-alpha` and the output
/// filter emits `(|xi| 2^-k)^alpha`. The two symbols agree identically, so
/// the returned relative sup-norm error is pure floating-point noise.
pub fn verify_commutation(
    f: &SampledFunction,
    g: &SampledFunction,
    alpha: f64,
    fams: &PiFamilies,
) -> Result<f64> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "commutation check needs alpha >= 0, got {alpha}"
        )));
    }
    f.grid().check_same(g.grid(), "commutation input")?;
    let lhs = fractional_derivative(&paraproduct_pi(f, g, fams)?, alpha)?;
    let dg = fractional_derivative(g, alpha)?;
    let psi_shape = fams.psi.shape();
    let out_shape = fams.out.shape();
    let rhs = paraproduct_modified(
        f,
        &dg,
        fams,
        |k, xi| {
            let h = psi_shape.hat(k, xi);
            if h == 0.0 {
                0.0
            } else {
                h * (xi.abs() * (-k as f64).exp2()).powf(-alpha)
            }
        },
        |k, xi| {
            let h = out_shape.hat(k, xi);
            if h == 0.0 {
                0.0
            } else {
                h * (xi.abs() * (-k as f64).exp2()).powf(alpha)
            }
        },
    )?;
    let diff = lhs.sub(&rhs)?.max_abs();
    let denom = lhs.max_abs();
    Ok(if denom == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / denom
    })
}

/// Split of `pi(f, g) * h` into coarse, near-diagonal, and flag parts.
#[derive(Debug, Clone)]
pub struct TripleParts {
    /// `h` far coarser than the paraproduct piece.
    pub a: SampledFunction,
    /// Complement; concentrated near the scale diagonal.
    pub b: SampledFunction,
    /// `h` far finer: the flag paraproduct, defined by `c_symbol`.
    pub c: SampledFunction,
    /// The factored two-scale-sum symbol that `c` realizes.
    pub c_symbol: SymbolExpr,
}

/// Builds the factored symbol of the flag part: a scale sum
/// `sum_k2 phi_k2(xi1) psi_k2(xi2)` times
/// `sum_k3 phi_(k3-gap)(xi2) psi_k3(xi3)`.
pub fn flag_part_symbol(fams: &PiFamilies, gap: i32) -> Result<SymbolExpr> {
    let phi = fams.phi.shape();
    let psi = fams.psi.shape();
    let (k_lo, k_hi) = (fams.phi.k_lo(), fams.phi.k_hi());
    let a = Factor::ScaleSum(ScaleSum {
        k_lo,
        k_hi,
        second: None,
        products: vec![vec![
            ScaleAtom::plain(phi, ScaleVar::K1, vec![1.0, 0.0]),
            ScaleAtom::plain(psi, ScaleVar::K1, vec![0.0, 1.0]),
        ]],
    });
    let shifted_phi = ScaleAtom {
        shape: phi,
        scale: ScaleVar::K1,
        shift: -gap,
        coeffs: vec![1.0, 0.0],
        form: crate::symbol::AtomForm::Plain,
    };
    let b = Factor::ScaleSum(ScaleSum {
        k_lo,
        k_hi,
        second: None,
        products: vec![vec![
            shifted_phi,
            ScaleAtom::plain(psi, ScaleVar::K1, vec![0.0, 1.0]),
        ]],
    });
    build_flag_symbol(3, vec![(vec![1, 2], a), (vec![2, 3], b)])
}

/// Splits `pi(f, g) * h` by the relation between the paraproduct scale and
/// `h`'s scale. Part `a` pairs each paraproduct piece with `h` capped more
/// than `gap` octaves below it; part `c` is the flag paraproduct defined by
/// [`flag_part_symbol`]; part `b` is the exact complement, so the three sum
/// to `pi(f, g) * h` identically.
pub fn decompose_triple_product(
    f: &SampledFunction,
    g: &SampledFunction,
    h: &SampledFunction,
    fams: &PiFamilies,
    gap: i32,
) -> Result<TripleParts> {
    f.grid().check_same(g.grid(), "triple product input")?;
    f.grid().check_same(h.grid(), "triple product input")?;
    if gap < 1 {
        return Err(Error::InvalidInput(
            "triple split needs a positive scale gap".into(),
        ));
    }
    let grid = *f.grid();
    let (k_lo, k_hi) = (fams.phi.k_lo(), fams.phi.k_hi());
    let psi_shape = fams.psi.shape();
    let phi_shape = fams.phi.shape();

    let pi_full = paraproduct_pi(f, g, fams)?;
    let product = pi_full.pointwise_mul(h)?;

    // a: per paraproduct scale k2, h capped at scale k2 - gap (clamped to
    // the family's low cap at the bottom).
    let mut a = SampledFunction::zero(grid);
    for k2 in fams.scales() {
        let low = project(f, &fams.phi, k2)?;
        let band = project(g, &fams.psi, k2)?;
        let piece = apply_frequency_symbol(&low.pointwise_mul(&band)?, |xi| {
            fams.out.shape().hat(k2, xi)
        })?;
        let cap_scale = ((k2 - gap).clamp(k_lo - 1, k_hi) as f64).exp2();
        let h_capped = apply_frequency_symbol(h, |xi| {
            profile_value(ProfileKind::SmoothCutoff, xi / cap_scale)
        })?;
        a.accumulate(&piece.pointwise_mul(&h_capped)?)?;
    }

    // c: the flag paraproduct, evaluated per (k2, k3) on the Fourier side
    // exactly as its factored symbol dictates.
    let mut c = SampledFunction::zero(grid);
    for k3 in fams.scales() {
        let h_band = project(h, &fams.psi, k3)?;
        let tilde_scale = k3 - gap;
        let mut inner = SampledFunction::zero(grid);
        for k2 in fams.scales() {
            let low = project(f, &fams.phi, k2)?;
            let band = apply_frequency_symbol(g, |xi| {
                psi_shape.hat(k2, xi) * phi_shape.hat(tilde_scale, xi)
            })?;
            inner.accumulate(&low.pointwise_mul(&band)?)?;
        }
        c.accumulate(&inner.pointwise_mul(&h_band)?)?;
    }

    let b = product.sub(&a)?.sub(&c)?;
    Ok(TripleParts {
        a,
        b,
        c,
        c_symbol: flag_part_symbol(fams, gap)?,
    })
}
