//! Periodic grids, sampled functions, spectra, and the transform pair.
//!
//! All functions live on the circle of circumference `l`, sampled at the
//! `n` points `x_m = m*l/n`. Spectra hold the modes `j` with
//! `-n/2 <= j < n/2`, using the Riemann-sum normalization
//! `F(j) = (l/n) * sum_m f(x_m) e^{-2 pi i j x_m / l}`,
//! so `F(j)` approximates the integral `int f e^{-2 pi i j x / l} dx` and
//! grid refinement of a fixed smooth function leaves `F(j)` fixed.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// A uniform periodic grid: `n` samples (power of two, at least 8) on a
/// circle of circumference `l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    l: f64,
}

impl Grid {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "grid size must be a power of two >= 8, got {n}"
            )));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid period must be finite and positive, got {l}"
            )));
        }
        Ok(Grid { n, l })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.l
    }

    /// Sample point `x_m = m*l/n`.
    pub fn point(&self, m: usize) -> f64 {
        (m as f64) * self.l / (self.n as f64)
    }

    /// Cell width `l/n`.
    pub fn spacing(&self) -> f64 {
        self.l / self.n as f64
    }

    /// Smallest representable mode, `-n/2`.
    pub fn mode_min(&self) -> i64 {
        -((self.n / 2) as i64)
    }

    /// Largest representable mode, `n/2 - 1`.
    pub fn mode_max(&self) -> i64 {
        (self.n / 2) as i64 - 1
    }

    /// Iterator over all representable modes in increasing order.
    pub fn modes(&self) -> impl Iterator<Item = i64> {
        self.mode_min()..=self.mode_max()
    }

    pub fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.n, self.l, other.n, other.l
            )));
        }
        Ok(())
    }
}

fn check_finite(values: &[Complex64], what: &str) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::NonFinite(format!("{what}[{i}] = {v}")));
        }
    }
    Ok(())
}

/// Complex samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Grid,
    samples: Vec<Complex64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "sample count {} does not match grid size {}",
                samples.len(),
                grid.len()
            )));
        }
        check_finite(&samples, "sample")?;
        Ok(SampledFunction { grid, samples })
    }

    pub fn zero(grid: Grid) -> Self {
        SampledFunction {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let samples = (0..grid.len()).map(|m| f(grid.point(m))).collect();
        SampledFunction::new(grid, samples)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    /// Pointwise product on a shared grid.
    pub fn pointwise_mul(&self, other: &SampledFunction) -> Result<SampledFunction> {
        self.grid.check_same(&other.grid, "pointwise_mul")?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b)
            .collect();
        Ok(SampledFunction {
            grid: self.grid,
            samples,
        })
    }

    pub fn add(&self, other: &SampledFunction) -> Result<SampledFunction> {
        self.grid.check_same(&other.grid, "add")?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + b)
            .collect();
        Ok(SampledFunction {
            grid: self.grid,
            samples,
        })
    }

    pub fn sub(&self, other: &SampledFunction) -> Result<SampledFunction> {
        self.grid.check_same(&other.grid, "sub")?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a - b)
            .collect();
        Ok(SampledFunction {
            grid: self.grid,
            samples,
        })
    }

    pub fn scale(&self, c: Complex64) -> SampledFunction {
        SampledFunction {
            grid: self.grid,
            samples: self.samples.iter().map(|v| v * c).collect(),
        }
    }

    /// Largest sample magnitude.
    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// In-place accumulate `self += other`, grids already checked by caller.
    pub fn accumulate(&mut self, other: &SampledFunction) -> Result<()> {
        self.grid.check_same(&other.grid, "accumulate")?;
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            *a += b;
        }
        Ok(())
    }
}

/// Fourier data of a function on a [`Grid`]: one coefficient per mode
/// `j in [-n/2, n/2)`, stored in increasing mode order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "coefficient count {} does not match grid size {}",
                coeffs.len(),
                grid.len()
            )));
        }
        check_finite(&coeffs, "coefficient")?;
        Ok(Spectrum { grid, coeffs })
    }

    pub fn zero(grid: Grid) -> Self {
        Spectrum {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn index(&self, j: i64) -> usize {
        debug_assert!(j >= self.grid.mode_min() && j <= self.grid.mode_max());
        (j + (self.grid.len() / 2) as i64) as usize
    }

    /// Coefficient of mode `j`; zero outside the representable band is the
    /// caller's business, so out-of-band access panics in debug builds.
    pub fn coeff(&self, j: i64) -> Complex64 {
        self.coeffs[self.index(j)]
    }

    pub fn set_coeff(&mut self, j: i64, value: Complex64) {
        let idx = self.index(j);
        self.coeffs[idx] = value;
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Physical frequency of mode `j`, namely `j / l`.
    pub fn frequency(&self, j: i64) -> f64 {
        j as f64 / self.grid.period()
    }

    /// Applies a mode-indexed multiplier in place.
    pub fn multiply_modes(&mut self, mult: impl Fn(i64) -> Complex64) {
        let grid = self.grid;
        for j in grid.modes() {
            let idx = self.index(j);
            self.coeffs[idx] *= mult(j);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

fn plan(n: usize, forward: bool) -> Arc<dyn rustfft::Fft<f64>> {
    let mut planner = FftPlanner::new();
    if forward {
        planner.plan_fft_forward(n)
    } else {
        planner.plan_fft_inverse(n)
    }
}

/// Forward transform: `F(j) = (l/n) * sum_m f(x_m) e^{-2 pi i j x_m / l}`.
pub fn forward_transform(f: &SampledFunction) -> Result<Spectrum> {
    let grid = *f.grid();
    let n = grid.len();
    let mut buf = f.samples().to_vec();
    plan(n, true).process(&mut buf);
    let scale = grid.period() / n as f64;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for (bin, value) in buf.iter().enumerate() {
        let j = if bin < n / 2 {
            bin as i64
        } else {
            bin as i64 - n as i64
        };
        coeffs[(j + (n / 2) as i64) as usize] = value * scale;
    }
    Spectrum::new(grid, coeffs)
}

/// Inverse transform: `f(x_m) = (1/l) * sum_j F(j) e^{2 pi i j x_m / l}`.
pub fn inverse_transform(spec: &Spectrum) -> Result<SampledFunction> {
    let grid = *spec.grid();
    let n = grid.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for j in grid.modes() {
        let bin = if j >= 0 { j as usize } else { (j + n as i64) as usize };
        buf[bin] = spec.coeff(j);
    }
    plan(n, false).process(&mut buf);
    let scale = 1.0 / grid.period();
    let samples = buf.into_iter().map(|v| v * scale).collect();
    SampledFunction::new(grid, samples)
}

/// `L^p` quasi-norm `((l/n) * sum |f(x_m)|^p)^(1/p)`; `p = inf` gives the
/// sample maximum. Valid for every `p > 0`, including the quasi-norm range
/// `p < 1`.
pub fn lp_norm(f: &SampledFunction, p: f64) -> Result<f64> {
    if p.is_nan() || p <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "Lp exponent must be positive (or infinity), got {p}"
        )));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let w = f.grid().spacing();
    let sum: f64 = f.samples().iter().map(|v| v.norm().powf(p)).sum();
    Ok((w * sum).powf(1.0 / p))
}

/// Bilinear pairing `(l/n) * sum f(x_m) g(x_m)`, without conjugation; the
/// Riemann sum of `integral f g`. Symmetric, so dual rearrangements of
/// packet sums agree to rounding.
pub fn pairing(f: &SampledFunction, g: &SampledFunction) -> Result<Complex64> {
    f.grid().check_same(g.grid(), "pairing")?;
    let w = f.grid().spacing();
    let sum: Complex64 = f
        .samples()
        .iter()
        .zip(g.samples())
        .map(|(a, b)| a * b)
        .sum();
    Ok(sum * w)
}

/// Fractional derivative `D^alpha`: multiplies mode `j` by `|j/l|^alpha`.
/// `alpha = 0` is the identity; `alpha > 0` annihilates the mean;
/// `alpha < 0` is rejected.
pub fn fractional_derivative(f: &SampledFunction, alpha: f64) -> Result<SampledFunction> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidInput(format!(
            "derivative order must be finite and nonnegative, got {alpha}"
        )));
    }
    if alpha == 0.0 {
        return Ok(f.clone());
    }
    let mut spec = forward_transform(f)?;
    let l = f.grid().period();
    spec.multiply_modes(|j| {
        if j == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new((j as f64 / l).abs().powf(alpha), 0.0)
        }
    });
    inverse_transform(&spec)
}

/// Samples the pure oscillation `e^{2 pi i j x / l}`.
pub fn pure_mode(grid: Grid, j: i64, amplitude: Complex64) -> Result<SampledFunction> {
    if j < grid.mode_min() || j > grid.mode_max() {
        return Err(Error::InvalidInput(format!(
            "mode {j} outside representable band [{}, {}]",
            grid.mode_min(),
            grid.mode_max()
        )));
    }
    let l = grid.period();
    SampledFunction::from_fn(grid, |x| {
        amplitude * Complex64::from_polar(1.0, 2.0 * PI * j as f64 * x / l)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> Grid {
        Grid::new(n, 1.0).unwrap()
    }

    /// Direct quadratic-cost evaluation of the analysis sum, used as the
    /// independent oracle for the FFT path.
    fn dft_oracle(f: &SampledFunction) -> Vec<Complex64> {
        let grid = f.grid();
        let n = grid.len();
        let l = grid.period();
        grid.modes()
            .map(|j| {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..n {
                    let phase = -2.0 * PI * (j as f64) * grid.point(m) / l;
                    acc += f.samples()[m] * Complex64::from_polar(1.0, phase);
                }
                acc * (l / n as f64)
            })
            .collect()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::new(7, 1.0).is_err());
        assert!(Grid::new(48, 1.0).is_err());
        assert!(Grid::new(4, 1.0).is_err());
        assert!(Grid::new(64, 0.0).is_err());
        assert!(Grid::new(64, f64::NAN).is_err());
        assert!(Grid::new(64, 1.0).is_ok());
    }

    #[test]
    fn forward_matches_direct_sum_oracle() {
        let grid = Grid::new(64, 2.0).unwrap();
        let f = SampledFunction::from_fn(grid, |x| {
            Complex64::new((2.0 * PI * x).sin() + 0.3 * (6.0 * PI * x).cos(), 0.25 * x)
        })
        .unwrap();
        let spec = forward_transform(&f).unwrap();
        let oracle = dft_oracle(&f);
        for (idx, j) in grid.modes().enumerate() {
            let err = (spec.coeff(j) - oracle[idx]).norm();
            assert!(err < 1e-12, "mode {j}: err {err}");
        }
    }

    #[test]
    fn pure_mode_transforms_to_single_coefficient() {
        let grid = unit_grid(32);
        let f = pure_mode(grid, 5, Complex64::new(1.0, 0.0)).unwrap();
        let spec = forward_transform(&f).unwrap();
        for j in grid.modes() {
            let expect = if j == 5 { grid.period() } else { 0.0 };
            assert!(
                (spec.coeff(j) - Complex64::new(expect, 0.0)).norm() < 1e-12,
                "mode {j}"
            );
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let grid = Grid::new(128, 3.0).unwrap();
        let f = SampledFunction::from_fn(grid, |x| {
            Complex64::new((-((x - 1.2) * 3.0).powi(2)).exp(), (2.0 * x).sin())
        })
        .unwrap();
        let back = inverse_transform(&forward_transform(&f).unwrap()).unwrap();
        let err = back.sub(&f).unwrap().max_abs();
        assert!(err < 1e-12, "round-trip error {err}");
    }

    #[test]
    fn parseval_holds_with_period_factor() {
        for l in [1.0, 3.0] {
            let grid = Grid::new(64, l).unwrap();
            let f = SampledFunction::from_fn(grid, |x| {
                Complex64::new((2.0 * PI * x / l).cos(), 0.5 * (4.0 * PI * x / l).sin())
            })
            .unwrap();
            let spec = forward_transform(&f).unwrap();
            let lhs = lp_norm(&f, 2.0).unwrap().powi(2);
            let rhs: f64 = spec.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() / l;
            assert!(
                (lhs - rhs).abs() <= 1e-10 * lhs.max(1.0),
                "l={l}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn lp_norm_indicator_quasinorm() {
        let grid = unit_grid(64);
        let f = SampledFunction::from_fn(grid, |x| {
            Complex64::new(if x < 0.5 { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let got = lp_norm(&f, 2.0 / 3.0).unwrap();
        let expect = 0.5f64.powf(1.5);
        assert!((got - expect).abs() < 1e-14);
        assert_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 1.0);
        assert!(lp_norm(&f, 0.0).is_err());
        assert!(lp_norm(&f, -1.0).is_err());
        assert!(lp_norm(&f, f64::NAN).is_err());
    }

    #[test]
    fn fractional_derivative_kills_constants_and_composes() {
        let grid = unit_grid(64);
        let one = SampledFunction::from_fn(grid, |_| Complex64::new(1.0, 0.0)).unwrap();
        let d = fractional_derivative(&one, 0.5).unwrap();
        assert!(d.max_abs() < 1e-13);

        let f = SampledFunction::from_fn(grid, |x| {
            Complex64::new((2.0 * PI * 3.0 * x).cos(), (2.0 * PI * 5.0 * x).sin())
        })
        .unwrap();
        let a = fractional_derivative(&fractional_derivative(&f, 0.7).unwrap(), 0.8).unwrap();
        let b = fractional_derivative(&f, 1.5).unwrap();
        let err = a.sub(&b).unwrap().max_abs();
        assert!(err < 1e-10 * b.max_abs(), "composition error {err}");

        assert!(fractional_derivative(&f, -0.5).is_err());
        let id = fractional_derivative(&f, 0.0).unwrap();
        assert_eq!(id, f);
    }

    #[test]
    fn second_derivative_matches_symbol_on_pure_mode() {
        let grid = unit_grid(32);
        let f = pure_mode(grid, 4, Complex64::new(1.0, 0.0)).unwrap();
        let d2 = fractional_derivative(&f, 2.0).unwrap();
        let expect = f.scale(Complex64::new(16.0, 0.0));
        let err = d2.sub(&expect).unwrap().max_abs();
        assert!(err < 1e-10, "err {err}");
    }
}
