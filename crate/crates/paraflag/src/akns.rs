//! Coupled first-order systems `u' = i lambda D u + N(x) u` with constant
//! distinct real diagonal `D` and zero-diagonal coupling `N`: fixed-step
//! integration, the unimodular gauge substitution, explicit iterated
//! simplex integrals for triangular couplings, and the ordered-frequency
//! multilinear form on periodic grids.
//!
//! Coupling entries are closed-form profiles evaluated anywhere on the
//! line, with a uniform quadrature grid over `[-x_max, x_max]` attached to
//! the configuration for the simplex integrals. Quadrature is cumulative
//! trapezoid, so a depth-`k` simplex integral costs `k` passes over the
//! grid instead of a `k`-dimensional sum.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{forward_transform, SampledFunction};

const DEFAULT_X_MAX: f64 = 8.0;
const DEFAULT_QUAD_LEN: usize = 4096;
/// Fewest integration points per period of the fastest diagonal phase.
const POINTS_PER_PERIOD: f64 = 8.0;
/// Centered-difference residual allowed when checking `v' = W v`.
const GAUGE_RESIDUAL_TOLERANCE: f64 = 1e-6;

fn default_x_max() -> f64 {
    DEFAULT_X_MAX
}

fn default_quad_len() -> usize {
    DEFAULT_QUAD_LEN
}

/// One closed-form coupling entry profile.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum EntryProfile {
    /// `(re + i im) exp(-((x - center) / width)^2)`.
    Gaussian { re: f64, im: f64, center: f64, width: f64 },
    /// `(re + i im) exp(1 - 1/(1 - t^2))` on `|t| < 1`, `t = (x - center)/width`.
    SmoothBump { re: f64, im: f64, center: f64, width: f64 },
    Constant { re: f64, im: f64 },
}

impl EntryProfile {
    pub fn value(&self, x: f64) -> Complex64 {
        match self {
            EntryProfile::Gaussian { re, im, center, width } => {
                let t = (x - center) / width;
                Complex64::new(*re, *im) * (-t * t).exp()
            }
            EntryProfile::SmoothBump { re, im, center, width } => {
                let t = (x - center) / width;
                if t.abs() >= 1.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(*re, *im) * (1.0 - 1.0 / (1.0 - t * t)).exp()
                }
            }
            EntryProfile::Constant { re, im } => Complex64::new(*re, *im),
        }
    }

    fn validate(&self) -> Result<()> {
        let (amp, width) = match self {
            EntryProfile::Gaussian { re, im, width, center }
            | EntryProfile::SmoothBump { re, im, width, center } => {
                if !center.is_finite() {
                    return Err(Error::InvalidInput("entry center must be finite".into()));
                }
                (Complex64::new(*re, *im), *width)
            }
            EntryProfile::Constant { re, im } => (Complex64::new(*re, *im), 1.0),
        };
        if !amp.re.is_finite() || !amp.im.is_finite() {
            return Err(Error::InvalidInput("entry amplitude must be finite".into()));
        }
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::InvalidInput("entry width must be positive".into()));
        }
        Ok(())
    }
}

/// One off-diagonal coupling entry (1-based positions are not used here;
/// `row` and `col` index components from 0).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CouplingEntry {
    pub row: usize,
    pub col: usize,
    #[serde(flatten)]
    pub profile: EntryProfile,
}

/// A coupled system: diagonal entries `d`, spectral parameter `lambda`,
/// coupling entries, and the quadrature grid geometry.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AknsConfig {
    pub d: Vec<f64>,
    pub lambda: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_quad_len")]
    pub quad_len: usize,
    #[serde(default)]
    pub entries: Vec<CouplingEntry>,
}

impl AknsConfig {
    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n < 2 {
            return Err(Error::InvalidInput("system needs at least two components".into()));
        }
        for &dk in &self.d {
            if !dk.is_finite() {
                return Err(Error::InvalidInput("diagonal entries must be finite".into()));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if self.d[i] == self.d[j] {
                    return Err(Error::InvalidInput(
                        "diagonal entries must be pairwise distinct".into(),
                    ));
                }
            }
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidInput("lambda must be finite".into()));
        }
        if !(self.x_max > 0.0) || !self.x_max.is_finite() {
            return Err(Error::InvalidInput("x_max must be positive".into()));
        }
        if self.quad_len < 16 || self.quad_len > (1 << 24) {
            return Err(Error::InvalidInput(
                "quadrature grid needs between 16 and 2^24 points".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.entries {
            if e.row >= n || e.col >= n {
                return Err(Error::InvalidInput("entry position out of range".into()));
            }
            if e.row == e.col {
                return Err(Error::InvalidInput("diagonal coupling entries must stay zero".into()));
            }
            if !seen.insert((e.row, e.col)) {
                return Err(Error::InvalidInput(format!(
                    "duplicate coupling entry at ({}, {})",
                    e.row, e.col
                )));
            }
            e.profile.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: AknsConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("bad system config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidInput(format!("config serialization failed: {e}")))
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        AknsConfig { lambda, ..self.clone() }
    }

    /// Spacing of the attached quadrature grid.
    pub fn spacing(&self) -> f64 {
        2.0 * self.x_max / (self.quad_len - 1) as f64
    }

    /// The quadrature nodes, uniform and inclusive over `[-x_max, x_max]`.
    pub fn points(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.quad_len).map(|m| -self.x_max + m as f64 * h).collect()
    }

    pub fn entry_at(&self, row: usize, col: usize, x: f64) -> Complex64 {
        self.entries
            .iter()
            .filter(|e| e.row == row && e.col == col)
            .map(|e| e.profile.value(x))
            .sum()
    }

    /// One coupling entry sampled on the quadrature nodes.
    pub fn sample_entry(&self, row: usize, col: usize) -> Vec<Complex64> {
        self.points().iter().map(|&x| self.entry_at(row, col, x)).collect()
    }

    pub fn is_strictly_upper(&self) -> bool {
        self.entries.iter().all(|e| e.row < e.col)
    }

    /// Right side `i lambda D u + N(x) u` written into `out`.
    fn apply_system(&self, x: f64, u: &[Complex64], out: &mut [Complex64]) {
        for (row, slot) in out.iter_mut().enumerate() {
            *slot = Complex64::new(0.0, self.lambda * self.d[row]) * u[row];
        }
        for e in &self.entries {
            out[e.row] += e.profile.value(x) * u[e.col];
        }
    }
}

/// A fixed-step solution record.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub xs: Vec<f64>,
    /// One state vector per node.
    pub states: Vec<Vec<Complex64>>,
    pub step: f64,
}

/// Classical fixed-step fourth-order integration of the system from
/// `(x0, u0)` to `x1`. The step is shrunk to divide the span evenly. Steps
/// that leave fewer than eight points per period of the fastest diagonal
/// phase, or that undersample the attached quadrature grid, are rejected.
pub fn integrate(
    cfg: &AknsConfig,
    u0: &[Complex64],
    x0: f64,
    x1: f64,
    h: f64,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cfg.n();
    if u0.len() != n {
        return Err(Error::InvalidInput("initial state has the wrong dimension".into()));
    }
    if u0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("initial state".into()));
    }
    if !x0.is_finite() || !x1.is_finite() || x1 <= x0 {
        return Err(Error::InvalidInput("need a forward span x0 < x1".into()));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    let max_d = cfg.d.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if cfg.lambda != 0.0 && max_d > 0.0 {
        let limit = std::f64::consts::TAU / (POINTS_PER_PERIOD * cfg.lambda.abs() * max_d);
        if h > limit {
            return Err(Error::InvalidInput(format!(
                "step {h:.3e} resolves fewer than {POINTS_PER_PERIOD} points per diagonal \
                 phase period (limit {limit:.3e})"
            )));
        }
    }
    if h > cfg.spacing() * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "step {h:.3e} is coarser than the entry sampling grid ({:.3e})",
            cfg.spacing()
        )));
    }

    let steps = (((x1 - x0) / h) - 1e-9).ceil().max(1.0) as usize;
    let h = (x1 - x0) / steps as f64;
    let mut xs = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut u = u0.to_vec();
    xs.push(x0);
    states.push(u.clone());
    let mut k1 = vec![Complex64::default(); n];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    for m in 0..steps {
        let x = x0 + m as f64 * h;
        cfg.apply_system(x, &u, &mut k1);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * h * k1[i];
        }
        cfg.apply_system(x + 0.5 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * h * k2[i];
        }
        cfg.apply_system(x + 0.5 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = u[i] + h * k3[i];
        }
        cfg.apply_system(x + h, &tmp, &mut k4);
        for i in 0..n {
            u[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        xs.push(x0 + (m + 1) as f64 * h);
        states.push(u.clone());
    }
    Ok(Trajectory { xs, states, step: h })
}

/// The gauge substitution `v_k = e^{-i lambda d_k x} u_k` together with
/// the transformed coupling `w_lm(x) = a_lm(x) e^{i lambda (d_l - d_m) x}`
/// sampled along the trajectory, and the largest centered-difference
/// residual of `v' = W v` over interior nodes.
#[derive(Debug, Clone)]
pub struct GaugeData {
    pub v: Trajectory,
    /// `w[l][m]` sampled on the trajectory nodes.
    pub w: Vec<Vec<Vec<Complex64>>>,
    pub max_residual: f64,
}

pub fn gauge_transform(traj: &Trajectory, cfg: &AknsConfig) -> Result<GaugeData> {
    cfg.validate()?;
    let n = cfg.n();
    if traj.states.is_empty()
        || traj.states.len() != traj.xs.len()
        || traj.states.iter().any(|s| s.len() != n)
    {
        return Err(Error::InvalidInput("trajectory does not match the system size".into()));
    }
    let len = traj.xs.len();
    let mut v = Vec::with_capacity(len);
    for (x, state) in traj.xs.iter().zip(&traj.states) {
        let row: Vec<Complex64> = state
            .iter()
            .enumerate()
            .map(|(k, &u)| Complex64::from_polar(1.0, -cfg.lambda * cfg.d[k] * x) * u)
            .collect();
        v.push(row);
    }
    let mut w = vec![vec![vec![Complex64::default(); len]; n]; n];
    for l in 0..n {
        for m in 0..n {
            if l == m {
                continue;
            }
            // differentiating e^{-i lambda d_l x} u_l leaves the entry
            // a_lm against e^{i lambda (d_m - d_l) x}
            let phase = cfg.lambda * (cfg.d[m] - cfg.d[l]);
            for (idx, &x) in traj.xs.iter().enumerate() {
                w[l][m][idx] =
                    cfg.entry_at(l, m, x) * Complex64::from_polar(1.0, phase * x);
            }
        }
    }
    let mut max_residual = 0.0f64;
    for idx in 1..len.saturating_sub(1) {
        for l in 0..n {
            let dv = (v[idx + 1][l] - v[idx - 1][l]) / (2.0 * traj.step);
            let mut rhs = Complex64::default();
            for m in 0..n {
                rhs += w[l][m][idx] * v[idx][m];
            }
            max_residual = max_residual.max((dv - rhs).norm());
        }
    }
    if max_residual > GAUGE_RESIDUAL_TOLERANCE {
        return Err(Error::InternalCheck(format!(
            "gauge residual {max_residual:.3e} exceeds {GAUGE_RESIDUAL_TOLERANCE:.0e}; \
             the trajectory step is too coarse for the transformed system"
        )));
    }
    Ok(GaugeData { v: Trajectory { xs: traj.xs.clone(), states: v, step: traj.step }, w, max_residual })
}

/// Cumulative simplex integral over the uniform inclusive grid on
/// `[-x_max, x_max]`: node `m` holds the integral over
/// `x_1 < ... < x_k <` node `m` of `prod f_j(x_j) e^{i lambda hash_j x_j}`,
/// built by `k` cumulative trapezoid passes.
pub fn iterated_integral_profile(
    fs: &[&[Complex64]],
    hashes: &[f64],
    lambda: f64,
    x_max: f64,
) -> Result<Vec<Complex64>> {
    if fs.is_empty() || fs.len() != hashes.len() {
        return Err(Error::InvalidInput(
            "need one frequency difference per integrand factor".into(),
        ));
    }
    if !(x_max > 0.0) || !x_max.is_finite() || !lambda.is_finite() {
        return Err(Error::InvalidInput("bad quadrature geometry".into()));
    }
    if hashes.iter().any(|h| !h.is_finite()) {
        return Err(Error::InvalidInput("frequency differences must be finite".into()));
    }
    let len = fs[0].len();
    if len < 2 || fs.iter().any(|f| f.len() != len) {
        return Err(Error::InvalidInput("integrand samplings must agree".into()));
    }
    let spacing = 2.0 * x_max / (len - 1) as f64;
    let mut prev: Option<Vec<Complex64>> = None;
    for (f, &hash) in fs.iter().zip(hashes) {
        let mut integrand = Vec::with_capacity(len);
        for (m, &value) in f.iter().enumerate() {
            let x = -x_max + m as f64 * spacing;
            let mut g = value * Complex64::from_polar(1.0, lambda * hash * x);
            if let Some(p) = &prev {
                g *= p[m];
            }
            integrand.push(g);
        }
        let mut cum = Vec::with_capacity(len);
        let mut acc = Complex64::default();
        cum.push(acc);
        for m in 1..len {
            acc += 0.5 * spacing * (integrand[m - 1] + integrand[m]);
            cum.push(acc);
        }
        prev = Some(cum);
    }
    Ok(prev.expect("at least one factor"))
}

/// The simplex integral up to `x`, linearly interpolated between
/// quadrature nodes.
pub fn iterated_integral(
    fs: &[&[Complex64]],
    hashes: &[f64],
    lambda: f64,
    x_max: f64,
    x: f64,
) -> Result<Complex64> {
    let profile = iterated_integral_profile(fs, hashes, lambda, x_max)?;
    if !x.is_finite() || x.abs() > x_max * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(
            "evaluation point lies outside the quadrature span".into(),
        ));
    }
    let spacing = 2.0 * x_max / (profile.len() - 1) as f64;
    let pos = ((x + x_max) / spacing).clamp(0.0, (profile.len() - 1) as f64);
    let idx = (pos.floor() as usize).min(profile.len() - 2);
    let frac = pos - idx as f64;
    Ok(profile[idx] * (1.0 - frac) + profile[idx + 1] * frac)
}

/// Explicit solution of the gauge-transformed system for strictly upper
/// triangular couplings of size 2 or 3, as sums of simplex integrals of
/// the entries against the diagonal-difference phases. Returns each
/// component sampled on the quadrature nodes, starting from `v0` at
/// `-x_max`. Larger sizes are not validated here and are rejected.
pub fn upper_triangular_closed_form(
    cfg: &AknsConfig,
    v0: &[Complex64],
) -> Result<Vec<Vec<Complex64>>> {
    cfg.validate()?;
    let n = cfg.n();
    if v0.len() != n {
        return Err(Error::InvalidInput("initial state has the wrong dimension".into()));
    }
    if !cfg.is_strictly_upper() {
        return Err(Error::InvalidInput(
            "closed form requires a strictly upper triangular coupling".into(),
        ));
    }
    if n > 3 {
        return Err(Error::InvalidInput(
            "closed form is validated for sizes 2 and 3 only".into(),
        ));
    }
    let len = cfg.quad_len;
    let lam = cfg.lambda;
    let xm = cfg.x_max;
    let d = &cfg.d;
    let constant = |z: Complex64| vec![z; len];
    match n {
        2 => {
            let a12 = cfg.sample_entry(0, 1);
            let c12 = iterated_integral_profile(&[&a12], &[d[1] - d[0]], lam, xm)?;
            let v1 = c12.iter().map(|&c| v0[0] + v0[1] * c).collect();
            Ok(vec![v1, constant(v0[1])])
        }
        3 => {
            let a12 = cfg.sample_entry(0, 1);
            let a13 = cfg.sample_entry(0, 2);
            let a23 = cfg.sample_entry(1, 2);
            let c12 = iterated_integral_profile(&[&a12], &[d[1] - d[0]], lam, xm)?;
            let c13 = iterated_integral_profile(&[&a13], &[d[2] - d[0]], lam, xm)?;
            let c23 = iterated_integral_profile(&[&a23], &[d[2] - d[1]], lam, xm)?;
            // the double integral pairs the inner a23 at the earlier point
            // with a12 at the later one
            let c23_12 = iterated_integral_profile(
                &[&a23, &a12],
                &[d[2] - d[1], d[1] - d[0]],
                lam,
                xm,
            )?;
            let v2: Vec<Complex64> = c23.iter().map(|&c| v0[1] + v0[2] * c).collect();
            let v1 = (0..len)
                .map(|m| v0[0] + v0[1] * c12[m] + v0[2] * (c13[m] + c23_12[m]))
                .collect();
            Ok(vec![v1, v2, constant(v0[2])])
        }
        _ => unreachable!("size checked above"),
    }
}

/// `sum over j_1 < ... < j_k of prod F_i(j_i) e^{2 pi i x sum hash_i j_i / l}`
/// tabulated on the input grid's sample points. The frequency combination
/// need not be a grid mode, so the output is a sampled function, not a
/// spectrum. Budgets match the direct multiplier summation.
pub fn ordered_frequency_form(
    fs: &[&SampledFunction],
    hashes: &[f64],
) -> Result<SampledFunction> {
    let k = fs.len();
    if k == 0 || k != hashes.len() {
        return Err(Error::InvalidInput(
            "need one frequency weight per input function".into(),
        ));
    }
    if k > 3 {
        return Err(Error::InvalidInput(
            "ordered form is validated for up to three functions".into(),
        ));
    }
    for &h in hashes {
        if h == 0.0 || !h.is_finite() {
            return Err(Error::InvalidInput("frequency weights must be nonzero".into()));
        }
    }
    let grid = *fs[0].grid();
    for f in fs {
        grid.check_same(f.grid(), "ordered form input")?;
    }
    let budget = match k {
        1 => 4096,
        2 => 256,
        _ => 64,
    };
    if grid.len() > budget {
        return Err(Error::Budget(format!(
            "{k} ordered factors allow at most {budget} grid points, got {}",
            grid.len()
        )));
    }
    let spectra = fs
        .iter()
        .map(|f| forward_transform(f))
        .collect::<Result<Vec<_>>>()?;
    let l = grid.period();
    // with the Riemann-sum transform normalization, each coefficient sum
    // carries 1/l so that a unit frequency weight reproduces the function
    let norm = l.powi(-(k as i32));
    let mut samples = Vec::with_capacity(grid.len());
    for m in 0..grid.len() {
        let x = m as f64 * grid.spacing();
        let factor = |slot: usize, j: i64| -> Complex64 {
            spectra[slot].coeff(j)
                * Complex64::from_polar(1.0, std::f64::consts::TAU * x * hashes[slot] * j as f64 / l)
        };
        let mut total = Complex64::default();
        match k {
            1 => {
                for j in grid.modes() {
                    total += factor(0, j);
                }
            }
            2 => {
                let mut c1 = Complex64::default();
                for j in grid.modes() {
                    total += factor(1, j) * c1;
                    c1 += factor(0, j);
                }
            }
            _ => {
                let mut c1 = Complex64::default();
                let mut c2 = Complex64::default();
                for j in grid.modes() {
                    total += factor(2, j) * c2;
                    c2 += factor(1, j) * c1;
                    c1 += factor(0, j);
                }
            }
        }
        samples.push(total * norm);
    }
    SampledFunction::new(grid, samples)
}

/// One row of a spectral-parameter sweep: componentwise sup of `|u_k|`
/// along the integrated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub lambda: f64,
    pub component: usize,
    pub sup_norm: f64,
}

/// Integrates the system over the full quadrature span for each spectral
/// parameter and reports componentwise sup norms, parameter-major.
pub fn lambda_scan(
    cfg: &AknsConfig,
    lambdas: &[f64],
    u0: &[Complex64],
    h: f64,
) -> Result<Vec<ScanRow>> {
    if lambdas.is_empty() {
        return Err(Error::InvalidInput("empty parameter grid".into()));
    }
    let mut rows = Vec::with_capacity(lambdas.len() * cfg.n());
    for &lambda in lambdas {
        if !lambda.is_finite() {
            return Err(Error::InvalidInput("parameters must be finite".into()));
        }
        let scan_cfg = cfg.with_lambda(lambda);
        let traj = integrate(&scan_cfg, u0, -cfg.x_max, cfg.x_max, h)?;
        for component in 0..cfg.n() {
            let sup_norm = traj
                .states
                .iter()
                .map(|s| s[component].norm())
                .fold(0.0f64, f64::max);
            rows.push(ScanRow { lambda, component, sup_norm });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcgen::{make_function, FunctionSpec};
    use crate::grid::{lp_norm, Grid};

    fn free_config(d: Vec<f64>, lambda: f64) -> AknsConfig {
        AknsConfig { d, lambda, x_max: 8.0, quad_len: 4096, entries: vec![] }
    }

    fn gaussian_entry(row: usize, col: usize, re: f64, im: f64, center: f64) -> CouplingEntry {
        CouplingEntry {
            row,
            col,
            profile: EntryProfile::Gaussian { re, im, center, width: 1.0 },
        }
    }

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn decoupled_system_rotates_each_phase() {
        let cfg = free_config(vec![1.0, -1.0], std::f64::consts::PI);
        let u0 = [one(), one()];
        let traj = integrate(&cfg, &u0, 0.0, 1.0, 1e-3).unwrap();
        let end = traj.states.last().unwrap();
        assert!((end[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-8);
        assert!((end[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn zero_parameter_nilpotent_coupling_is_affine() {
        let c = Complex64::new(0.4, -0.7);
        let cfg = AknsConfig {
            d: vec![1.0, -1.0],
            lambda: 0.0,
            x_max: 8.0,
            quad_len: 4096,
            entries: vec![CouplingEntry {
                row: 0,
                col: 1,
                profile: EntryProfile::Constant { re: c.re, im: c.im },
            }],
        };
        let u0 = [Complex64::new(0.3, 0.2), Complex64::new(-0.5, 0.8)];
        let traj = integrate(&cfg, &u0, 0.0, 1.0, 1e-3).unwrap();
        let end = traj.states.last().unwrap();
        // u' = N u with constant nilpotent N: u(x) = (I + x N) u0
        assert!((end[0] - (u0[0] + c * u0[1])).norm() < 1e-8);
        assert!((end[1] - u0[1]).norm() < 1e-12);
    }

    #[test]
    fn halving_the_step_cuts_the_error_sixteenfold() {
        let cfg = AknsConfig {
            d: vec![1.0, -1.0],
            lambda: 1.0,
            x_max: 8.0,
            quad_len: 512,
            entries: vec![
                gaussian_entry(0, 1, 0.9, 0.2, 0.3),
                gaussian_entry(1, 0, -0.4, 0.6, -0.5),
            ],
        };
        let u0 = [one(), Complex64::new(0.2, -0.1)];
        let end = |h: f64| -> Vec<Complex64> {
            integrate(&cfg, &u0, -2.0, 2.0, h).unwrap().states.last().unwrap().clone()
        };
        let coarse = end(0.02);
        let medium = end(0.01);
        let fine = end(0.005);
        let d1: f64 = coarse.iter().zip(&medium).map(|(a, b)| (a - b).norm()).sum();
        let d2: f64 = medium.iter().zip(&fine).map(|(a, b)| (a - b).norm()).sum();
        let ratio = d1 / d2;
        assert!((10.0..26.0).contains(&ratio), "convergence ratio {ratio}");
    }

    #[test]
    fn integrate_rejects_bad_steps() {
        let cfg = free_config(vec![2.0, -2.0], 10.0);
        let u0 = [one(), one()];
        // more than 2 pi / (8 lambda max|d|) = pi/80
        assert!(integrate(&cfg, &u0, 0.0, 1.0, 0.05).is_err());
        // coarser than the quadrature spacing
        let coarse = AknsConfig { quad_len: 64, ..free_config(vec![1.0, -1.0], 0.0) };
        assert!(integrate(&coarse, &u0, 0.0, 1.0, 0.5).is_err());
        assert!(integrate(&cfg, &u0, 0.0, 1.0, -0.1).is_err());
        assert!(integrate(&cfg, &u0, 1.0, 0.0, 1e-3).is_err());
        assert!(integrate(&cfg, &[one()], 0.0, 1.0, 1e-3).is_err());
    }

    #[test]
    fn gauge_fixes_free_systems_and_preserves_magnitudes() {
        let cfg = free_config(vec![0.5, -1.5], 2.0);
        let u0 = [Complex64::new(0.6, 0.3), Complex64::new(-0.2, 0.9)];
        let traj = integrate(&cfg, &u0, -1.0, 1.0, 1e-3).unwrap();
        let gauge = gauge_transform(&traj, &cfg).unwrap();
        let v0 = &gauge.v.states[0];
        for (state, u_state) in gauge.v.states.iter().zip(&traj.states) {
            for k in 0..2 {
                assert!((state[k] - v0[k]).norm() < 1e-8, "v not constant");
                assert!(
                    (state[k].norm() - u_state[k].norm()).abs() < 1e-14,
                    "magnitude broken"
                );
            }
        }
    }

    #[test]
    fn gauge_residual_check_passes_for_smooth_coupling() {
        let cfg = AknsConfig {
            d: vec![1.2, 0.1, -0.9],
            lambda: 1.0,
            x_max: 8.0,
            quad_len: 16384,
            entries: vec![
                gaussian_entry(0, 1, 0.5, 0.1, 0.0),
                gaussian_entry(1, 2, -0.3, 0.4, 0.5),
                gaussian_entry(2, 0, 0.2, -0.2, -0.7),
            ],
        };
        let u0 = [one(), Complex64::new(0.1, 0.4), Complex64::new(-0.3, 0.2)];
        let traj = integrate(&cfg, &u0, -2.0, 2.0, 5e-4).unwrap();
        let gauge = gauge_transform(&traj, &cfg).unwrap();
        assert!(gauge.max_residual < 1e-6, "residual {}", gauge.max_residual);
    }

    #[test]
    fn single_gaussian_simplex_integral_is_the_full_integral() {
        let width = 1.3;
        let cfg = free_config(vec![1.0, -1.0], 0.0);
        let pts = cfg.points();
        let f: Vec<Complex64> = pts
            .iter()
            .map(|&x| Complex64::new((-(x / width) * (x / width)).exp(), 0.0))
            .collect();
        let total = iterated_integral(&[&f], &[1.0], 0.0, cfg.x_max, cfg.x_max).unwrap();
        let expect = width * std::f64::consts::PI.sqrt();
        assert!((total.re - expect).abs() < 1e-5);
        assert!(total.im.abs() < 1e-14);
    }

    #[test]
    fn simplex_halves_match_the_full_square() {
        let cfg = free_config(vec![1.0, -1.0], 0.0);
        let pts = cfg.points();
        let f: Vec<Complex64> = pts
            .iter()
            .map(|&x| Complex64::new((-x * x).exp(), 0.2 * (-(x - 0.4) * (x - 0.4)).exp()))
            .collect();
        let g: Vec<Complex64> = pts
            .iter()
            .map(|&x| Complex64::new(0.3 * (-(x + 0.6) * (x + 0.6)).exp(), -0.5 * (-x * x).exp()))
            .collect();
        let total_f = iterated_integral(&[&f], &[1.0], 0.0, cfg.x_max, cfg.x_max).unwrap();
        let total_g = iterated_integral(&[&g], &[1.0], 0.0, cfg.x_max, cfg.x_max).unwrap();
        let fg = iterated_integral(&[&f, &g], &[1.0, 1.0], 0.0, cfg.x_max, cfg.x_max).unwrap();
        let gf = iterated_integral(&[&g, &f], &[1.0, 1.0], 0.0, cfg.x_max, cfg.x_max).unwrap();
        assert!((fg + gf - total_f * total_g).norm() < 1e-5);
        // equal factors: the simplex is exactly half the square
        let ff = iterated_integral(&[&f, &f], &[1.0, 1.0], 0.0, cfg.x_max, cfg.x_max).unwrap();
        assert!((ff - 0.5 * total_f * total_f).norm() < 1e-5);
    }

    #[test]
    fn simplex_integral_is_multilinear() {
        let cfg = free_config(vec![1.0, -1.0], 0.7);
        let pts = cfg.points();
        let f: Vec<Complex64> =
            pts.iter().map(|&x| Complex64::new((-x * x).exp(), 0.1 * x.sin())).collect();
        let f2: Vec<Complex64> = pts
            .iter()
            .map(|&x| Complex64::new(0.4 * (-(x - 1.0) * (x - 1.0)).exp(), 0.3))
            .collect();
        let g: Vec<Complex64> =
            pts.iter().map(|&x| Complex64::new(x.cos(), -0.2 * (-x * x).exp())).collect();
        let alpha = Complex64::new(0.7, -0.4);
        let mix: Vec<Complex64> =
            f.iter().zip(&f2).map(|(&a, &b)| alpha * a + b).collect();
        let hashes = [1.0, -0.4];
        let at = |ff: &[Complex64], gg: &[Complex64]| {
            iterated_integral(&[ff, gg], &hashes, cfg.lambda, cfg.x_max, 3.0).unwrap()
        };
        let lhs = at(&mix, &g);
        let rhs = alpha * at(&f, &g) + at(&f2, &g);
        assert!((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
        let mix_g: Vec<Complex64> =
            g.iter().zip(&f2).map(|(&a, &b)| alpha * a + b).collect();
        let lhs2 = at(&f, &mix_g);
        let rhs2 = alpha * at(&f, &g) + at(&f, &f2);
        assert!((lhs2 - rhs2).norm() < 1e-10 * (1.0 + rhs2.norm()));
    }

    fn compare_closed_form(cfg: &AknsConfig, u0: &[Complex64], tol: f64) {
        let h = cfg.spacing();
        let traj = integrate(cfg, u0, -cfg.x_max, cfg.x_max, h).unwrap();
        assert_eq!(traj.xs.len(), cfg.quad_len);
        let v0: Vec<Complex64> = u0
            .iter()
            .enumerate()
            .map(|(k, &u)| Complex64::from_polar(1.0, cfg.lambda * cfg.d[k] * cfg.x_max) * u)
            .collect();
        let v = upper_triangular_closed_form(cfg, &v0).unwrap();
        let mut worst = 0.0f64;
        for (idx, &x) in traj.xs.iter().enumerate() {
            for k in 0..cfg.n() {
                let u_closed =
                    Complex64::from_polar(1.0, cfg.lambda * cfg.d[k] * x) * v[k][idx];
                worst = worst.max((u_closed - traj.states[idx][k]).norm());
            }
        }
        assert!(worst < tol, "closed form deviates by {worst:.3e}");
    }

    #[test]
    fn triangular_two_by_two_matches_the_integrator() {
        let cfg = AknsConfig {
            d: vec![1.0, -1.0],
            lambda: 1.0,
            x_max: 4.0,
            quad_len: 16384,
            entries: vec![CouplingEntry {
                row: 0,
                col: 1,
                profile: EntryProfile::SmoothBump { re: 0.8, im: 0.3, center: 0.0, width: 3.0 },
            }],
        };
        let u0 = [Complex64::new(0.3, 0.1), Complex64::new(0.9, -0.2)];
        compare_closed_form(&cfg, &u0, 1e-6);
    }

    #[test]
    fn triangular_three_by_three_matches_the_integrator() {
        let cfg = AknsConfig {
            d: vec![1.5, 0.2, -1.1],
            lambda: 1.0,
            x_max: 4.0,
            quad_len: 16384,
            entries: vec![
                CouplingEntry {
                    row: 0,
                    col: 1,
                    profile: EntryProfile::SmoothBump { re: 0.6, im: -0.2, center: 0.4, width: 2.5 },
                },
                CouplingEntry {
                    row: 0,
                    col: 2,
                    profile: EntryProfile::SmoothBump { re: -0.3, im: 0.5, center: -0.6, width: 2.0 },
                },
                CouplingEntry {
                    row: 1,
                    col: 2,
                    profile: EntryProfile::SmoothBump { re: 0.4, im: 0.4, center: 0.0, width: 3.0 },
                },
            ],
        };
        let u0 = [
            Complex64::new(0.2, 0.5),
            Complex64::new(-0.4, 0.1),
            Complex64::new(0.7, 0.3),
        ];
        compare_closed_form(&cfg, &u0, 1e-6);
    }

    #[test]
    fn closed_form_rejects_non_triangular_and_large_systems() {
        let mut cfg = AknsConfig {
            d: vec![1.0, -1.0],
            lambda: 1.0,
            x_max: 4.0,
            quad_len: 1024,
            entries: vec![gaussian_entry(1, 0, 0.5, 0.0, 0.0)],
        };
        let v0 = [one(), one()];
        assert!(upper_triangular_closed_form(&cfg, &v0).is_err());
        cfg.entries = vec![gaussian_entry(0, 1, 0.5, 0.0, 0.0)];
        assert!(upper_triangular_closed_form(&cfg, &v0).is_ok());
        let big = AknsConfig {
            d: vec![2.0, 1.0, -1.0, -2.0],
            lambda: 1.0,
            x_max: 4.0,
            quad_len: 1024,
            entries: vec![gaussian_entry(0, 3, 0.5, 0.0, 0.0)],
        };
        let v0_big = [one(), one(), one(), one()];
        assert!(upper_triangular_closed_form(&big, &v0_big).is_err());
    }

    #[test]
    fn ordered_form_with_one_function_is_a_dilation() {
        // a non-unit period pins the tabulation normalization
        let grid = Grid::new(128, 2.0).unwrap();
        let f = make_function(
            &FunctionSpec::RandomBandlimited { j_min: -10, j_max: 10 },
            grid,
            77,
        )
        .unwrap();
        let out = ordered_frequency_form(&[&f], &[2.0]).unwrap();
        let n = grid.len();
        let mut worst = 0.0f64;
        for m in 0..n {
            let expect = f.samples()[(2 * m) % n];
            worst = worst.max((out.samples()[m] - expect).norm());
        }
        assert!(worst < 1e-12);
        // bounded by the total coefficient mass
        let spectrum = forward_transform(&f).unwrap();
        let mass: f64 = grid.modes().map(|j| spectrum.coeff(j).norm()).sum();
        assert!(out.max_abs() <= mass / grid.period() + 1e-12);
        // substitution rule: an integer dilation preserves the mean square
        let d2 = (lp_norm(&out, 2.0).unwrap() - lp_norm(&f, 2.0).unwrap()).abs();
        assert!(d2 < 1e-8);
    }

    #[test]
    fn ordered_form_factors_when_supports_are_separated() {
        let grid = Grid::new(64, 1.0).unwrap();
        let low = make_function(
            &FunctionSpec::RandomBandlimited { j_min: -8, j_max: -1 },
            grid,
            3,
        )
        .unwrap();
        let high = make_function(
            &FunctionSpec::RandomBandlimited { j_min: 3, j_max: 9 },
            grid,
            4,
        )
        .unwrap();
        let out = ordered_frequency_form(&[&low, &high], &[1.0, 3.0]).unwrap();
        let n = grid.len();
        let mut worst = 0.0f64;
        for m in 0..n {
            let expect = low.samples()[m] * high.samples()[(3 * m) % n];
            worst = worst.max((out.samples()[m] - expect).norm());
        }
        assert!(worst < 1e-12, "worst {worst:.3e}");
    }

    #[test]
    fn ordered_form_matches_brute_force() {
        let grid = Grid::new(64, 1.0).unwrap();
        let f = make_function(
            &FunctionSpec::RandomBandlimited { j_min: -12, j_max: 12 },
            grid,
            8,
        )
        .unwrap();
        let g = make_function(
            &FunctionSpec::RandomBandlimited { j_min: -12, j_max: 12 },
            grid,
            9,
        )
        .unwrap();
        let hashes = [1.0, std::f64::consts::SQRT_2];
        let out = ordered_frequency_form(&[&f, &g], &hashes).unwrap();
        let sf = forward_transform(&f).unwrap();
        let sg = forward_transform(&g).unwrap();
        let l = grid.period();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for m in 0..grid.len() {
            let x = m as f64 * grid.spacing();
            let mut brute = Complex64::default();
            for j1 in grid.modes() {
                for j2 in (j1 + 1)..=grid.mode_max() {
                    let phase = std::f64::consts::TAU * x
                        * (hashes[0] * j1 as f64 + hashes[1] * j2 as f64)
                        / l;
                    brute += sf.coeff(j1) * sg.coeff(j2) * Complex64::from_polar(1.0, phase);
                }
            }
            brute /= l * l;
            worst = worst.max((out.samples()[m] - brute).norm());
            scale = scale.max(brute.norm());
        }
        assert!(worst < 1e-9 * scale.max(1.0), "worst {worst:.3e}");
    }

    #[test]
    fn ordered_form_matches_brute_force_for_three_factors() {
        let grid = Grid::new(32, 1.0).unwrap();
        let spec = FunctionSpec::RandomBandlimited { j_min: -9, j_max: 9 };
        let f = make_function(&spec, grid, 21).unwrap();
        let g = make_function(&spec, grid, 22).unwrap();
        let h = make_function(&spec, grid, 23).unwrap();
        let hashes = [2.0, -1.0, 0.5];
        let out = ordered_frequency_form(&[&f, &g, &h], &hashes).unwrap();
        let spectra = [
            forward_transform(&f).unwrap(),
            forward_transform(&g).unwrap(),
            forward_transform(&h).unwrap(),
        ];
        let l = grid.period();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for m in 0..grid.len() {
            let x = m as f64 * grid.spacing();
            let mut brute = Complex64::default();
            for j1 in grid.modes() {
                for j2 in (j1 + 1)..=grid.mode_max() {
                    for j3 in (j2 + 1)..=grid.mode_max() {
                        let phase = std::f64::consts::TAU * x
                            * (hashes[0] * j1 as f64
                                + hashes[1] * j2 as f64
                                + hashes[2] * j3 as f64)
                            / l;
                        brute += spectra[0].coeff(j1)
                            * spectra[1].coeff(j2)
                            * spectra[2].coeff(j3)
                            * Complex64::from_polar(1.0, phase);
                    }
                }
            }
            brute /= l * l * l;
            worst = worst.max((out.samples()[m] - brute).norm());
            scale = scale.max(brute.norm());
        }
        assert!(worst < 1e-9 * scale.max(1.0), "worst {worst:.3e}");
    }

    #[test]
    fn ordered_form_rejections() {
        let grid = Grid::new(64, 1.0).unwrap();
        let f = make_function(
            &FunctionSpec::RandomBandlimited { j_min: -4, j_max: 4 },
            grid,
            1,
        )
        .unwrap();
        assert!(ordered_frequency_form(&[], &[]).is_err());
        assert!(ordered_frequency_form(&[&f], &[0.0]).is_err());
        assert!(ordered_frequency_form(&[&f, &f, &f, &f], &[1.0; 4]).is_err());
        let big = Grid::new(512, 1.0).unwrap();
        let fb = make_function(
            &FunctionSpec::RandomBandlimited { j_min: -4, j_max: 4 },
            big,
            2,
        )
        .unwrap();
        assert!(matches!(
            ordered_frequency_form(&[&fb, &fb], &[1.0, 2.0]),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn parameter_scan_is_flat_for_free_systems() {
        let cfg = free_config(vec![1.0, -0.5], 0.0);
        let u0 = [Complex64::new(0.8, 0.1), Complex64::new(-0.2, 0.4)];
        let lambdas = [0.0, 0.3, 1.0, 5.0];
        let rows = lambda_scan(&cfg, &lambdas, &u0, 2e-3).unwrap();
        assert_eq!(rows.len(), lambdas.len() * 2);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.lambda, lambdas[i / 2]);
            assert_eq!(row.component, i % 2);
            assert!((row.sup_norm - u0[i % 2].norm()).abs() < 1e-8);
        }
    }

    #[test]
    fn parameter_scan_agrees_with_the_closed_form_sup() {
        let cfg = AknsConfig {
            d: vec![1.0, -1.0],
            lambda: 0.0,
            x_max: 4.0,
            quad_len: 8192,
            entries: vec![CouplingEntry {
                row: 0,
                col: 1,
                profile: EntryProfile::SmoothBump { re: 0.7, im: -0.4, center: 0.2, width: 2.0 },
            }],
        };
        let u0 = [Complex64::new(0.4, 0.3), Complex64::new(0.6, -0.5)];
        let lambdas = [0.5, 2.0];
        let rows = lambda_scan(&cfg, &lambdas, &u0, cfg.spacing()).unwrap();
        for &lambda in &lambdas {
            let scan_cfg = cfg.with_lambda(lambda);
            let v0: Vec<Complex64> = u0
                .iter()
                .enumerate()
                .map(|(k, &u)| {
                    Complex64::from_polar(1.0, lambda * scan_cfg.d[k] * scan_cfg.x_max) * u
                })
                .collect();
            let v = upper_triangular_closed_form(&scan_cfg, &v0).unwrap();
            for component in 0..2 {
                // the gauge factor is unimodular, so sup |u| = sup |v|
                let sup_closed =
                    v[component].iter().map(|z| z.norm()).fold(0.0f64, f64::max);
                let row = rows
                    .iter()
                    .find(|r| r.lambda == lambda && r.component == component)
                    .unwrap();
                assert!(
                    (row.sup_norm - sup_closed).abs() < 1e-5,
                    "lambda {lambda} component {component}: {} vs {sup_closed}",
                    row.sup_norm
                );
            }
        }
    }

    #[test]
    fn config_json_round_trips_and_validates() {
        let cfg = AknsConfig {
            d: vec![1.0, -1.0],
            lambda: 2.5,
            x_max: 6.0,
            quad_len: 2048,
            entries: vec![gaussian_entry(0, 1, 0.5, -0.25, 0.75)],
        };
        let text = cfg.to_json().unwrap();
        let back = AknsConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
        // defaults fill in when geometry is omitted
        let minimal = r#"{"d": [1.0, -1.0], "lambda": 0.5,
            "entries": [{"row": 0, "col": 1, "shape": "gaussian",
                         "re": 1.0, "im": 0.0, "center": 0.0, "width": 1.0}]}"#;
        let parsed = AknsConfig::from_json(minimal).unwrap();
        assert_eq!(parsed.x_max, DEFAULT_X_MAX);
        assert_eq!(parsed.quad_len, DEFAULT_QUAD_LEN);
        for bad in [
            r#"{"d": [1.0, 1.0], "lambda": 0.5, "entries": []}"#,
            r#"{"d": [1.0, -1.0], "lambda": 0.5,
                "entries": [{"row": 0, "col": 0, "shape": "constant", "re": 1.0, "im": 0.0}]}"#,
            r#"{"d": [1.0, -1.0], "lambda": 0.5,
                "entries": [{"row": 0, "col": 1, "shape": "gaussian",
                             "re": 1.0, "im": 0.0, "center": 0.0, "width": -1.0}]}"#,
            r#"{"d": [1.0], "lambda": 0.5, "entries": []}"#,
        ] {
            assert!(AknsConfig::from_json(bad).is_err(), "{bad}");
        }
        let dup = AknsConfig {
            entries: vec![
                gaussian_entry(0, 1, 1.0, 0.0, 0.0),
                gaussian_entry(0, 1, 2.0, 0.0, 0.0),
            ],
            ..cfg
        };
        assert!(dup.validate().is_err());
    }
}
