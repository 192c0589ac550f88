//! Smooth frequency cutoffs and the dyadic bump families built from them.
//!
//! The base profile is the even cutoff `theta(xi)`: identically 1 on
//! `[-1, 1]`, supported in `[-2, 2]`, glued with the smooth step
//! `s(t) = e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)})`. An annulus (Psi) family
//! member at scale `k` is `theta(xi/2^k) - theta(xi/2^(k-1))`, supported on
//! `2^(k-1) <= |xi| <= 2^(k+1)`; a ball (Phi) member is `theta(xi/2^k)`.
//!
//! Two extras beyond the plain construction:
//! * `widen`: pushes the transition regions out by whole octaves, so a
//!   widened annulus member is identically 1 where the plain one lives.
//! * a curved ball profile `theta(xi) * exp(-xi^2)`, which has the same
//!   support but genuine variation across its ball. Ball factors that are
//!   flat near the origin make every Taylor correction in the flag-kernel
//!   reduction vanish identically, so the curved profile is what gives the
//!   expansion content to measure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::jet::Jet;

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, strictly increasing between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let g = 1.0 / t - 1.0 / (1.0 - t);
    if g > 700.0 {
        0.0
    } else if g < -700.0 {
        1.0
    } else {
        1.0 / (1.0 + g.exp())
    }
}

fn smooth_step_jet(t: f64) -> Jet {
    if t <= 0.0 {
        return Jet::constant(0.0);
    }
    if t >= 1.0 {
        return Jet::constant(1.0);
    }
    let tv = Jet::variable(t);
    let g = tv.recip().sub(&Jet::constant(1.0).sub(&tv).recip());
    if g.value() > 700.0 {
        return Jet::constant(0.0);
    }
    if g.value() < -700.0 {
        return Jet::constant(1.0);
    }
    Jet::constant(1.0).add(&g.exp()).recip()
}

/// Fourier-side profile of a family member before dilation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// The flat-topped cutoff `theta`.
    SmoothCutoff,
    /// `theta(xi) * exp(-xi^2)`: same support, nowhere locally constant.
    CurvedBump,
}

/// Ball (low-pass) or annulus (band-pass) member geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpKind {
    Psi,
    Phi,
}

fn cutoff_jet(xi: f64) -> Jet {
    let a = xi.abs();
    let base = if a <= 1.0 {
        Jet::constant(1.0)
    } else if a >= 2.0 {
        Jet::constant(0.0)
    } else {
        // theta = s(2 - |xi|) on the transition; t = 2 - a has slope -1 in a.
        smooth_step_jet(2.0 - a).rescale_argument(-1.0)
    };
    if xi < 0.0 {
        base.rescale_argument(-1.0)
    } else {
        base
    }
}

/// Value and derivatives (to jet order) of the chosen profile at `xi`.
pub fn profile_jet(profile: ProfileKind, xi: f64) -> Jet {
    match profile {
        ProfileKind::SmoothCutoff => cutoff_jet(xi),
        ProfileKind::CurvedBump => {
            let x = Jet::variable(xi);
            let gauss = x.mul(&x).neg().exp();
            cutoff_jet(xi).mul(&gauss)
        }
    }
}

/// Profile value at `xi` (cheap path, no jet arithmetic).
pub fn profile_value(profile: ProfileKind, xi: f64) -> f64 {
    match profile {
        ProfileKind::SmoothCutoff => {
            let a = xi.abs();
            if a <= 1.0 {
                1.0
            } else if a >= 2.0 {
                0.0
            } else {
                smooth_step(2.0 - a)
            }
        }
        ProfileKind::CurvedBump => {
            profile_value(ProfileKind::SmoothCutoff, xi) * (-xi * xi).exp()
        }
    }
}

/// `l`-th derivative of the profile at `xi`.
pub fn profile_deriv(profile: ProfileKind, l: usize, xi: f64) -> f64 {
    if l == 0 {
        profile_value(profile, xi)
    } else {
        profile_jet(profile, xi).derivative(l)
    }
}

/// Dilation-covariant description of one bump family: geometry, profile,
/// and widening in octaves. Grid-free; scale `k` produces a function of the
/// physical frequency `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyShape {
    pub kind: BumpKind,
    pub profile: ProfileKind,
    pub widen: u32,
}

impl FamilyShape {
    pub fn new(kind: BumpKind, profile: ProfileKind, widen: u32) -> Result<Self> {
        if kind == BumpKind::Psi && profile == ProfileKind::CurvedBump {
            return Err(Error::InvalidInput(
                "annulus members require the flat-topped cutoff profile; the curved \
                 profile does not vanish near zero frequency"
                    .into(),
            ));
        }
        Ok(FamilyShape {
            kind,
            profile,
            widen,
        })
    }

    pub fn plain(kind: BumpKind) -> Self {
        FamilyShape {
            kind,
            profile: ProfileKind::SmoothCutoff,
            widen: 0,
        }
    }

    fn outer_scale(&self, k: i32) -> f64 {
        ((k + self.widen as i32) as f64).exp2()
    }

    fn inner_scale(&self, k: i32) -> f64 {
        ((k - 1 - self.widen as i32) as f64).exp2()
    }

    /// Member value at scale `k`, physical frequency `xi`.
    pub fn hat(&self, k: i32, xi: f64) -> f64 {
        match self.kind {
            BumpKind::Phi => profile_value(self.profile, xi / self.outer_scale(k)),
            BumpKind::Psi => {
                profile_value(self.profile, xi / self.outer_scale(k))
                    - profile_value(self.profile, xi / self.inner_scale(k))
            }
        }
    }

    /// `l`-th derivative in `xi` of the member at scale `k`.
    pub fn hat_deriv(&self, k: i32, l: usize, xi: f64) -> f64 {
        if l == 0 {
            return self.hat(k, xi);
        }
        match self.kind {
            BumpKind::Phi => {
                let s = self.outer_scale(k);
                profile_deriv(self.profile, l, xi / s) / s.powi(l as i32)
            }
            BumpKind::Psi => {
                let so = self.outer_scale(k);
                let si = self.inner_scale(k);
                profile_deriv(self.profile, l, xi / so) / so.powi(l as i32)
                    - profile_deriv(self.profile, l, xi / si) / si.powi(l as i32)
            }
        }
    }

    /// Support of the member at scale `k` as an interval in `|xi|`
    /// (lower bound 0 for ball members).
    pub fn support(&self, k: i32) -> (f64, f64) {
        let hi = 2.0 * self.outer_scale(k);
        match self.kind {
            BumpKind::Phi => (0.0, hi),
            BumpKind::Psi => (self.inner_scale(k), hi),
        }
    }

    /// Largest `|xi|` carried by the member at scale `k`.
    pub fn support_radius(&self, k: i32) -> f64 {
        self.support(k).1
    }
}

/// A validated family: shape plus an inclusive scale range `[k_lo, k_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpFamily {
    shape: FamilyShape,
    k_lo: i32,
    k_hi: i32,
}

impl BumpFamily {
    /// Standard construction: plain cutoff profile, no widening. The top
    /// scale's support must fit strictly inside the Nyquist band,
    /// `2^(k_hi+1) < n / (2 l)`.
    pub fn build(kind: BumpKind, k_lo: i32, k_hi: i32, grid: &Grid) -> Result<Self> {
        Self::build_shaped(FamilyShape::plain(kind), k_lo, k_hi, grid)
    }

    /// General construction for widened or curved shapes; same range and
    /// Nyquist validation against the widened support.
    pub fn build_shaped(shape: FamilyShape, k_lo: i32, k_hi: i32, grid: &Grid) -> Result<Self> {
        FamilyShape::new(shape.kind, shape.profile, shape.widen)?;
        if k_lo > k_hi {
            return Err(Error::InvalidInput(format!(
                "scale range [{k_lo}, {k_hi}] is empty"
            )));
        }
        let nyquist = grid.len() as f64 / (2.0 * grid.period());
        let top = shape.support_radius(k_hi);
        if top >= nyquist {
            return Err(Error::Aliasing(format!(
                "top scale support reaches |xi| = {top}, but the grid resolves only \
                 |xi| < {nyquist}"
            )));
        }
        Ok(BumpFamily { shape, k_lo, k_hi })
    }

    /// Grid-free construction for symbol work, where members are evaluated
    /// at arbitrary real frequencies rather than applied to sampled data.
    pub fn unchecked(shape: FamilyShape, k_lo: i32, k_hi: i32) -> Result<Self> {
        FamilyShape::new(shape.kind, shape.profile, shape.widen)?;
        if k_lo > k_hi {
            return Err(Error::InvalidInput(format!(
                "scale range [{k_lo}, {k_hi}] is empty"
            )));
        }
        Ok(BumpFamily { shape, k_lo, k_hi })
    }

    pub fn shape(&self) -> FamilyShape {
        self.shape
    }

    pub fn kind(&self) -> BumpKind {
        self.shape.kind
    }

    pub fn k_lo(&self) -> i32 {
        self.k_lo
    }

    pub fn k_hi(&self) -> i32 {
        self.k_hi
    }

    pub fn scales(&self) -> impl Iterator<Item = i32> {
        self.k_lo..=self.k_hi
    }

    pub fn contains_scale(&self, k: i32) -> bool {
        (self.k_lo..=self.k_hi).contains(&k)
    }

    pub fn hat(&self, k: i32, xi: f64) -> Result<f64> {
        if !self.contains_scale(k) {
            return Err(Error::InvalidInput(format!(
                "scale {k} outside family range [{}, {}]",
                self.k_lo, self.k_hi
            )));
        }
        Ok(self.shape.hat(k, xi))
    }

    /// Sum of all annulus members, in the telescoped closed form
    /// `theta(xi / 2^(k_hi+w)) - theta(xi / 2^(k_lo-1-w))`.
    pub fn telescoped_sum(&self, xi: f64) -> Result<f64> {
        if self.shape.kind != BumpKind::Psi {
            return Err(Error::InvalidInput(
                "telescoped sum is defined for annulus families".into(),
            ));
        }
        Ok(
            profile_value(self.shape.profile, xi / self.shape.outer_scale(self.k_hi))
                - profile_value(self.shape.profile, xi / self.shape.inner_scale(self.k_lo)),
        )
    }
}

/// JSON shorthand `{"kind":"psi","k_min":2,"k_max":5}` for a plain family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: BumpKind,
    pub k_min: i32,
    pub k_max: i32,
}

impl FamilySpec {
    pub fn build(&self, grid: &Grid) -> Result<BumpFamily> {
        BumpFamily::build(self.kind, self.k_min, self.k_max, grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_endpoints_and_monotonicity() {
        assert_eq!(smooth_step(-0.5), 0.0);
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert_eq!(smooth_step(2.0), 1.0);
        let mut prev = 0.0;
        for i in 1..100 {
            let v = smooth_step(i as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cutoff_support_is_exact() {
        for xi in [0.0, 0.25, 0.5, 1.0, -1.0, -0.99] {
            assert_eq!(profile_value(ProfileKind::SmoothCutoff, xi), 1.0, "xi={xi}");
        }
        for xi in [2.0, 2.5, -2.0, -17.0] {
            assert_eq!(profile_value(ProfileKind::SmoothCutoff, xi), 0.0, "xi={xi}");
        }
        for xi in [1.2, 1.5, -1.5, 1.8] {
            let v = profile_value(ProfileKind::SmoothCutoff, xi);
            assert!(v > 0.0 && v < 1.0, "xi={xi}: {v}");
        }
    }

    #[test]
    fn cutoff_is_even_and_derivatives_flip_sign() {
        for xi in [1.3, 1.7, 0.4, 2.6] {
            assert_eq!(
                profile_value(ProfileKind::SmoothCutoff, xi),
                profile_value(ProfileKind::SmoothCutoff, -xi)
            );
            for l in 1..=6 {
                let plus = profile_deriv(ProfileKind::SmoothCutoff, l, xi);
                let minus = profile_deriv(ProfileKind::SmoothCutoff, l, -xi);
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                assert!(
                    (plus - sign * minus).abs() <= 1e-12 * plus.abs().max(1.0),
                    "l={l}, xi={xi}: {plus} vs {minus}"
                );
            }
        }
    }

    #[test]
    fn profile_derivatives_match_finite_differences() {
        for profile in [ProfileKind::SmoothCutoff, ProfileKind::CurvedBump] {
            for xi in [0.3, 1.4, 1.8, -1.6] {
                let h = 1e-5;
                let fd1 = (profile_value(profile, xi + h) - profile_value(profile, xi - h))
                    / (2.0 * h);
                let d1 = profile_deriv(profile, 1, xi);
                assert!(
                    (fd1 - d1).abs() < 1e-7 * d1.abs().max(1.0),
                    "{profile:?} xi={xi}: {fd1} vs {d1}"
                );
                let fd2 = (profile_value(profile, xi + h) - 2.0 * profile_value(profile, xi)
                    + profile_value(profile, xi - h))
                    / (h * h);
                let d2 = profile_deriv(profile, 2, xi);
                assert!(
                    (fd2 - d2).abs() < 1e-4 * d2.abs().max(1.0),
                    "{profile:?} xi={xi}: {fd2} vs {d2}"
                );
            }
        }
    }

    #[test]
    fn cutoff_derivatives_vanish_on_flat_regions() {
        for l in 1..=8 {
            for xi in [0.0, 0.7, -0.9, 2.3, -4.0] {
                assert_eq!(profile_deriv(ProfileKind::SmoothCutoff, l, xi), 0.0);
            }
        }
    }

    #[test]
    fn curved_profile_varies_on_the_ball() {
        let v0 = profile_value(ProfileKind::CurvedBump, 0.0);
        let v1 = profile_value(ProfileKind::CurvedBump, 0.5);
        assert_eq!(v0, 1.0);
        assert!(v1 < 1.0 && v1 > 0.0);
        assert!(profile_deriv(ProfileKind::CurvedBump, 1, 0.5) != 0.0);
    }

    #[test]
    fn psi_support_and_flat_octave() {
        let shape = FamilyShape::plain(BumpKind::Psi);
        let k = 3;
        // support (2^(k-1), 2^(k+1)) = (4, 16)
        assert_eq!(shape.hat(k, 3.99), 0.0);
        assert_eq!(shape.hat(k, 4.0), 0.0);
        assert_eq!(shape.hat(k, 16.0), 0.0);
        assert_eq!(shape.hat(k, 17.0), 0.0);
        assert_eq!(shape.hat(k, 8.0), 1.0);
        assert!(shape.hat(k, 6.0) > 0.0);
        assert!(shape.hat(k, 12.0) > 0.0);
        assert!(shape.hat(k, -8.0) == 1.0);
    }

    #[test]
    fn widened_member_is_flat_on_plain_support() {
        let plain = FamilyShape::plain(BumpKind::Psi);
        let wide = FamilyShape::new(BumpKind::Psi, ProfileKind::SmoothCutoff, 1).unwrap();
        let k = 3;
        // Wide support: (2^(k-2), 2^(k+2)) = (2, 32), flat on [4, 16].
        assert_eq!(wide.hat(k, 2.0), 0.0);
        assert_eq!(wide.hat(k, 32.0), 0.0);
        for xi in [4.0, 5.5, 8.0, 12.0, 16.0] {
            assert_eq!(wide.hat(k, xi), 1.0, "xi={xi}");
            let _ = plain;
        }
    }

    #[test]
    fn phi_flat_ball_and_support() {
        let shape = FamilyShape::plain(BumpKind::Phi);
        let k = 2;
        for xi in [0.0, 1.0, 3.0, 4.0, -4.0] {
            assert_eq!(shape.hat(k, xi), 1.0, "xi={xi}");
        }
        assert_eq!(shape.hat(k, 8.0), 0.0);
        assert!(shape.hat(k, 6.0) > 0.0 && shape.hat(k, 6.0) < 1.0);
    }

    #[test]
    fn telescoping_sum_equals_closed_form() {
        let grid = Grid::new(256, 1.0).unwrap();
        let fam = BumpFamily::build(BumpKind::Psi, 2, 5, &grid).unwrap();
        for j in 1..=60 {
            let xi = j as f64;
            let direct: f64 = fam.scales().map(|k| fam.shape().hat(k, xi)).sum();
            let closed = fam.telescoped_sum(xi).unwrap();
            assert!(
                (direct - closed).abs() <= 4.0 * f64::EPSILON,
                "xi={xi}: {direct} vs {closed}"
            );
            if (4.0..=32.0).contains(&xi) {
                assert!((direct - 1.0).abs() <= 4.0 * f64::EPSILON, "xi={xi}");
            }
        }
    }

    #[test]
    fn nyquist_validation_rejects_oversized_scales() {
        let grid = Grid::new(64, 1.0).unwrap();
        // Needs 2^(k_hi+1) < 32, so k_hi <= 3.
        assert!(BumpFamily::build(BumpKind::Psi, 1, 3, &grid).is_ok());
        assert!(BumpFamily::build(BumpKind::Psi, 1, 4, &grid).is_err());
        assert!(BumpFamily::build(BumpKind::Psi, 4, 2, &grid).is_err());
        // Widening eats one octave of headroom.
        let wide = FamilyShape::new(BumpKind::Psi, ProfileKind::SmoothCutoff, 1).unwrap();
        assert!(BumpFamily::build_shaped(wide, 1, 3, &grid).is_err());
        assert!(BumpFamily::build_shaped(wide, 1, 2, &grid).is_ok());
    }

    #[test]
    fn curved_annulus_is_rejected() {
        assert!(FamilyShape::new(BumpKind::Psi, ProfileKind::CurvedBump, 0).is_err());
        assert!(FamilyShape::new(BumpKind::Phi, ProfileKind::CurvedBump, 0).is_ok());
    }

    #[test]
    fn scaled_derivative_chain_rule() {
        let shape = FamilyShape::plain(BumpKind::Phi);
        let k = 3;
        let xi = 12.0; // transition region: 8 < xi < 16
        let d1 = shape.hat_deriv(k, 1, xi);
        let h = 1e-5;
        let fd = (shape.hat(k, xi + h) - shape.hat(k, xi - h)) / (2.0 * h);
        assert!((d1 - fd).abs() < 1e-7 * fd.abs().max(1e-3), "{d1} vs {fd}");
    }

    #[test]
    fn family_spec_round_trips() {
        let spec: FamilySpec =
            serde_json::from_str("{\"kind\":\"psi\",\"k_min\":2,\"k_max\":5}").unwrap();
        assert_eq!(spec.kind, BumpKind::Psi);
        let grid = Grid::new(256, 1.0).unwrap();
        let fam = spec.build(&grid).unwrap();
        assert_eq!((fam.k_lo(), fam.k_hi()), (2, 5));
    }
}
