//! Deterministic test-function generation from JSON-serializable specs.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{inverse_transform, Grid, SampledFunction, Spectrum};

/// Menu of reproducible input functions. Serialized with a `kind` tag, e.g.
/// `{"kind":"gaussian","center":0.5,"width":0.1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    /// Periodized Gaussian bump `sum_m exp(-((x-center-m*l)/width)^2 / 2)`.
    Gaussian { center: f64, width: f64 },
    /// Gaussian bump carried to frequency `mode`.
    ModulatedBump { center: f64, width: f64, mode: i64 },
    /// Independent unit-disc coefficients on the signed mode range
    /// `[j_min, j_max]`, all other modes exactly zero.
    RandomBandlimited { j_min: i64, j_max: i64 },
    /// Characteristic function of `[a, b)`.
    Indicator { a: f64, b: f64 },
}

fn periodized_gaussian(grid: Grid, center: f64, width: f64) -> SampledFunction {
    let l = grid.period();
    let samples = (0..grid.len())
        .map(|m| {
            let x = grid.point(m);
            let mut v = 0.0;
            for image in -4i32..=4 {
                let dx = x - center - image as f64 * l;
                v += (-dx * dx / (2.0 * width * width)).exp();
            }
            Complex64::new(v, 0.0)
        })
        .collect();
    SampledFunction::new(grid, samples).expect("gaussian samples are finite")
}

/// Draws a point of the closed unit disc by rejection from the square.
fn unit_disc(rng: &mut ChaCha8Rng) -> Complex64 {
    loop {
        let re: f64 = rng.gen_range(-1.0..=1.0);
        let im: f64 = rng.gen_range(-1.0..=1.0);
        if re * re + im * im <= 1.0 {
            return Complex64::new(re, im);
        }
    }
}

/// Materializes `spec` on `grid`. The same `(spec, grid, seed)` triple
/// always produces identical samples.
pub fn make_function(spec: &FunctionSpec, grid: Grid, seed: u64) -> Result<SampledFunction> {
    match spec {
        FunctionSpec::Gaussian { center, width } => {
            if !(width.is_finite() && *width > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "gaussian width must be positive, got {width}"
                )));
            }
            if !center.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "gaussian center must be finite, got {center}"
                )));
            }
            Ok(periodized_gaussian(grid, *center, *width))
        }
        FunctionSpec::ModulatedBump {
            center,
            width,
            mode,
        } => {
            if !(width.is_finite() && *width > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "bump width must be positive, got {width}"
                )));
            }
            if *mode < grid.mode_min() || *mode > grid.mode_max() {
                return Err(Error::InvalidInput(format!(
                    "bump mode {mode} outside representable band [{}, {}]",
                    grid.mode_min(),
                    grid.mode_max()
                )));
            }
            let bump = periodized_gaussian(grid, *center, *width);
            let l = grid.period();
            let phase = |x: f64| {
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * *mode as f64 * x / l)
            };
            let samples = bump
                .samples()
                .iter()
                .enumerate()
                .map(|(m, v)| v * phase(grid.point(m)))
                .collect();
            SampledFunction::new(grid, samples)
        }
        FunctionSpec::RandomBandlimited { j_min, j_max } => {
            if j_min > j_max {
                return Err(Error::InvalidInput(format!(
                    "band [{j_min}, {j_max}] is empty (j_min must not exceed j_max)"
                )));
            }
            if *j_min < grid.mode_min() || *j_max > grid.mode_max() {
                return Err(Error::InvalidInput(format!(
                    "band [{j_min}, {j_max}] outside representable band [{}, {}]",
                    grid.mode_min(),
                    grid.mode_max()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut spec_out = Spectrum::zero(grid);
            for j in *j_min..=*j_max {
                spec_out.set_coeff(j, unit_disc(&mut rng));
            }
            inverse_transform(&spec_out)
        }
        FunctionSpec::Indicator { a, b } => {
            let l = grid.period();
            if !(a.is_finite() && b.is_finite() && 0.0 <= *a && a < b && *b <= l) {
                return Err(Error::InvalidInput(format!(
                    "indicator needs 0 <= a < b <= period, got a={a}, b={b}, period={l}"
                )));
            }
            let (a, b) = (*a, *b);
            SampledFunction::from_fn(grid, |x| {
                Complex64::new(if a <= x && x < b { 1.0 } else { 0.0 }, 0.0)
            })
        }
    }
}

/// Sum of `count` random Gaussian bumps with seeded centers, widths, and
/// complex amplitudes; the staple input for the ratio experiments.
pub fn gaussian_mix(grid: Grid, count: usize, seed: u64) -> Result<SampledFunction> {
    if count == 0 {
        return Err(Error::InvalidInput("gaussian mix needs count >= 1".into()));
    }
    let l = grid.period();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SampledFunction::zero(grid);
    for _ in 0..count {
        let center = rng.gen_range(0.0..l);
        let width = rng.gen_range(0.05..0.15) * l;
        let amp = unit_disc(&mut rng) + Complex64::new(0.25, 0.0);
        let bump = periodized_gaussian(grid, center, width).scale(amp);
        out.accumulate(&bump)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::forward_transform;

    fn unit_grid(n: usize) -> Grid {
        Grid::new(n, 1.0).unwrap()
    }

    #[test]
    fn gaussian_is_real_positive_peaked_at_center() {
        let grid = unit_grid(128);
        let spec = FunctionSpec::Gaussian {
            center: 0.5,
            width: 0.1,
        };
        let f = make_function(&spec, grid, 0).unwrap();
        let mut best = (0usize, 0.0f64);
        for (m, v) in f.samples().iter().enumerate() {
            assert_eq!(v.im, 0.0);
            assert!(v.re > 0.0);
            if v.re > best.1 {
                best = (m, v.re);
            }
        }
        assert_eq!(grid.point(best.0), 0.5);
    }

    #[test]
    fn random_bandlimited_modes_vanish_outside_band() {
        let grid = unit_grid(64);
        let spec = FunctionSpec::RandomBandlimited { j_min: 1, j_max: 8 };
        let f = make_function(&spec, grid, 42).unwrap();
        let coeffs = forward_transform(&f).unwrap();
        for j in grid.modes() {
            if (1..=8).contains(&j) {
                assert!(coeffs.coeff(j).norm() <= 1.0 + 1e-12);
            } else {
                assert!(
                    coeffs.coeff(j).norm() < 1e-13,
                    "mode {j} should be silent, got {}",
                    coeffs.coeff(j).norm()
                );
            }
        }
    }

    #[test]
    fn same_seed_reproduces_samples() {
        let grid = unit_grid(64);
        let spec = FunctionSpec::RandomBandlimited {
            j_min: -8,
            j_max: 8,
        };
        let a = make_function(&spec, grid, 7).unwrap();
        let b = make_function(&spec, grid, 7).unwrap();
        assert_eq!(a, b);
        let c = make_function(&spec, grid, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn validation_names_the_offending_field() {
        let grid = unit_grid(64);
        let err = make_function(
            &FunctionSpec::Gaussian {
                center: 0.5,
                width: -1.0,
            },
            grid,
            0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("width"));
        let err = make_function(&FunctionSpec::RandomBandlimited { j_min: 5, j_max: 2 }, grid, 0)
            .unwrap_err();
        assert!(err.to_string().contains("j_min"));
        let err = make_function(&FunctionSpec::Indicator { a: 0.9, b: 0.2 }, grid, 0).unwrap_err();
        assert!(err.to_string().contains("a="));
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = FunctionSpec::Gaussian {
            center: 0.5,
            width: 0.1,
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"gaussian\""));
        let back: FunctionSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);

        let parsed: FunctionSpec =
            serde_json::from_str("{\"kind\":\"random_bandlimited\",\"j_min\":1,\"j_max\":8}")
                .unwrap();
        assert_eq!(parsed, FunctionSpec::RandomBandlimited { j_min: 1, j_max: 8 });
    }
}
