//! Littlewood-Paley projections, the square function, the dyadic maximal
//! function, and reconstruction from an annulus family.
//!
//! Projections are realized on the Fourier side: convolving with a family
//! member is multiplication of the spectrum by `psi_k(j/l)`, which keeps the
//! support statements exact at every grid mode. With the Riemann-sum
//! transform convention the spectral product agrees with the Riemann-sum
//! circular convolution exactly, so either picture can serve as the oracle
//! for the other.

use num_complex::Complex64;

use crate::bump::{BumpFamily, BumpKind};
use crate::error::{Error, Result};
use crate::grid::{forward_transform, inverse_transform, SampledFunction};

/// Multiplies the spectrum of `f` by a real symbol of the physical
/// frequency `j / l` and transforms back.
pub fn apply_frequency_symbol(
    f: &SampledFunction,
    symbol: impl Fn(f64) -> f64,
) -> Result<SampledFunction> {
    let mut spec = forward_transform(f)?;
    let l = f.grid().period();
    spec.multiply_modes(|j| Complex64::new(symbol(j as f64 / l), 0.0));
    inverse_transform(&spec)
}

/// Band projection `f * psi_k` (or ball projection for a Phi family).
pub fn project(f: &SampledFunction, fam: &BumpFamily, k: i32) -> Result<SampledFunction> {
    if !fam.contains_scale(k) {
        return Err(Error::InvalidInput(format!(
            "scale {k} outside family range [{}, {}]",
            fam.k_lo(),
            fam.k_hi()
        )));
    }
    apply_frequency_symbol(f, |xi| fam.shape().hat(k, xi))
}

/// Pointwise `(sum_k |f * psi_k|^2)^(1/2)` over the family's scales.
/// Output is real and nonnegative.
pub fn square_function(f: &SampledFunction, fam: &BumpFamily) -> Result<SampledFunction> {
    if fam.kind() != BumpKind::Psi {
        return Err(Error::InvalidInput(
            "square function requires an annulus (psi) family".into(),
        ));
    }
    let n = f.grid().len();
    let mut sums = vec![0.0f64; n];
    for k in fam.scales() {
        let piece = project(f, fam, k)?;
        for (acc, v) in sums.iter_mut().zip(piece.samples()) {
            *acc += v.norm_sqr();
        }
    }
    SampledFunction::new(
        *f.grid(),
        sums.into_iter()
            .map(|s| Complex64::new(s.sqrt(), 0.0))
            .collect(),
    )
}

/// Dyadic maximal function: at each sample, the largest periodic average of
/// `|f|` over windows of radius `l * 2^(-s)`, `s = 0 .. log2(n)`. A window
/// of radius `r` collects the samples at periodic distance strictly less
/// than `r`, so the tightest window is the sample's own cell and the output
/// dominates `|f|` pointwise. The unrestricted sup over all radii exceeds
/// this dyadic version by at most a factor 2.
pub fn maximal_function(f: &SampledFunction) -> Result<SampledFunction> {
    let n = f.grid().len();
    let abs: Vec<f64> = f.samples().iter().map(|v| v.norm()).collect();
    // prefix[i] = sum of abs[0..i]; circular windows read two spans.
    let mut prefix = vec![0.0f64; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + abs[i];
    }
    let total = prefix[n];
    let span_sum = |a: i64, b: i64| -> f64 {
        // sum of abs[m mod n] for m in [a, b] inclusive, b - a + 1 <= n
        let len = b - a + 1;
        debug_assert!(len >= 1 && len <= n as i64);
        let a_mod = a.rem_euclid(n as i64) as usize;
        let b_mod = b.rem_euclid(n as i64) as usize;
        if a_mod <= b_mod {
            prefix[b_mod + 1] - prefix[a_mod]
        } else {
            (total - prefix[a_mod]) + prefix[b_mod + 1]
        }
    };
    let levels = n.trailing_zeros();
    let mut best = vec![0.0f64; n];
    for s in 0..=levels {
        // radius l * 2^(-s) covers samples within w - 1 steps, w = n / 2^s.
        let w = (n >> s) as i64;
        for (m, slot) in best.iter_mut().enumerate() {
            // The singleton window reads the sample directly so the output
            // dominates |f| exactly, free of prefix-sum rounding.
            let avg = if w == 1 {
                abs[m]
            } else if 2 * w - 1 >= n as i64 {
                total / n as f64
            } else {
                span_sum(m as i64 - (w - 1), m as i64 + (w - 1)) / (2 * w - 1) as f64
            };
            if avg > *slot {
                *slot = avg;
            }
        }
    }
    SampledFunction::new(
        *f.grid(),
        best.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
    )
}

/// Sum of all band projections, `sum_k f * psi_k`. Equals `f` exactly on
/// modes inside the telescoped flat region.
pub fn reconstruct(f: &SampledFunction, fam: &BumpFamily) -> Result<SampledFunction> {
    if fam.kind() != BumpKind::Psi {
        return Err(Error::InvalidInput(
            "reconstruction sums an annulus (psi) family".into(),
        ));
    }
    let mut out = SampledFunction::zero(*f.grid());
    for k in fam.scales() {
        out.accumulate(&project(f, fam, k)?)?;
    }
    Ok(out)
}
