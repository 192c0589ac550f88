//! JSON experiment configs: one struct per subcommand, each with a
//! `validate` step that separates hard errors (malformed grids, broken
//! Hölder scaling) from theorem-range violations, which are allowed only
//! when the config opts into exploratory mode and are then labeled in
//! every output row.

use std::fmt;
use std::path::Path;

use paraflag::{AknsConfig, BumpKind, Error, Grid, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Slack allowed in the Hölder bookkeeping `sum 1/p_i = 1/p`.
pub const HOLDER_TOLERANCE: f64 = 1e-12;

/// A Lebesgue exponent; JSON accepts a positive number or the string
/// `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "exponent must be positive or \"inf\", got {value}"
            )));
        }
        Ok(Exponent(value))
    }

    pub fn infinity() -> Self {
        Exponent(f64::INFINITY)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `1/p`, with `1/inf = 0` exactly.
    pub fn reciprocal(self) -> f64 {
        if self.0.is_infinite() {
            0.0
        } else {
            1.0 / self.0
        }
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// Strict theorem range `1 < p < inf`.
    pub fn in_open_range(self) -> bool {
        self.0 > 1.0 && self.0.is_finite()
    }

    /// Relaxed range `1 < p <= inf`.
    pub fn in_closed_range(self) -> bool {
        self.0 > 1.0
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            ser.serialize_str("inf")
        } else {
            ser.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Word(String),
        }
        match Repr::deserialize(de)? {
            Repr::Number(v) => Exponent::new(v).map_err(serde::de::Error::custom),
            Repr::Word(w) if w == "inf" => Ok(Exponent::infinity()),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "unknown exponent word {w:?}; only \"inf\" is accepted"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    #[serde(default = "default_period")]
    pub period: f64,
}

fn default_period() -> f64 {
    1.0
}

impl GridSpec {
    pub fn to_grid(self) -> Result<Grid> {
        Grid::new(self.n, self.period)
    }
}

fn check_holder(parts: &[Exponent], whole: Exponent, label: &str) -> Result<()> {
    let sum: f64 = parts.iter().map(|e| e.reciprocal()).sum();
    if (sum - whole.reciprocal()).abs() > HOLDER_TOLERANCE {
        return Err(Error::InvalidInput(format!(
            "{label}: reciprocals sum to {sum}, config demands {}",
            whole.reciprocal()
        )));
    }
    Ok(())
}

fn check_band(grid: &GridSpec, band: i64, rungs: u32) -> Result<()> {
    if band < 1 {
        return Err(Error::InvalidInput(format!(
            "band must be at least 1, got {band}"
        )));
    }
    let reach = band << rungs;
    let mode_max = (grid.n as i64 - 1) / 2;
    if reach > mode_max {
        return Err(Error::InvalidInput(format!(
            "band {band} dilated {rungs} rungs reaches mode {reach}, past the grid's band edge {mode_max}"
        )));
    }
    Ok(())
}

/// Outcome of validation: whether the run as configured leaves the
/// theorem's exponent range (and is therefore labeled in every row).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RangeCheck {
    pub exploratory: bool,
}

fn gate_exploratory(out_of_range: bool, allowed: bool, what: &str) -> Result<RangeCheck> {
    if out_of_range && !allowed {
        return Err(Error::InvalidInput(format!(
            "{what} lies outside the theorem range; set \"exploratory\": true to run it anyway"
        )));
    }
    Ok(RangeCheck {
        exploratory: out_of_range,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KatoPonceConfig {
    pub grid: GridSpec,
    pub alpha: f64,
    pub p: Exponent,
    pub p1: Exponent,
    pub q1: Exponent,
    pub p2: Exponent,
    pub q2: Exponent,
    pub band: i64,
    #[serde(default)]
    pub rung: u32,
    pub trials: u32,
    pub seed: u64,
    #[serde(default)]
    pub exploratory: bool,
}

impl KatoPonceConfig {
    pub fn validate(&self) -> Result<RangeCheck> {
        self.grid.to_grid()?;
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "derivative order alpha must be finite and nonnegative, got {}",
                self.alpha
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("trial count must be positive".into()));
        }
        check_band(&self.grid, self.band, self.rung)?;
        check_holder(&[self.p1, self.q1], self.p, "first Kato-Ponce term")?;
        check_holder(&[self.p2, self.q2], self.p, "second Kato-Ponce term")?;
        let in_range = [self.p1, self.q1, self.p2, self.q2]
            .iter()
            .all(|e| e.in_closed_range());
        gate_exploratory(!in_range, self.exploratory, "an inner exponent")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrandLeibnitzConfig {
    pub grid: GridSpec,
    pub alpha: f64,
    pub beta: f64,
    pub p: Exponent,
    pub p1: Exponent,
    pub q1: Exponent,
    pub r1: Exponent,
    pub p2: Exponent,
    pub q2: Exponent,
    pub r2: Exponent,
    pub p3: Exponent,
    pub q3: Exponent,
    pub r3: Exponent,
    pub p4: Exponent,
    pub q4: Exponent,
    pub r4: Exponent,
    pub band: i64,
    #[serde(default)]
    pub rung: u32,
    pub trials: u32,
    pub seed: u64,
    #[serde(default)]
    pub exploratory: bool,
}

impl GrandLeibnitzConfig {
    pub fn term_exponents(&self) -> [[Exponent; 3]; 4] {
        [
            [self.p1, self.q1, self.r1],
            [self.p2, self.q2, self.r2],
            [self.p3, self.q3, self.r3],
            [self.p4, self.q4, self.r4],
        ]
    }

    pub fn validate(&self) -> Result<RangeCheck> {
        self.grid.to_grid()?;
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "derivative order {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("trial count must be positive".into()));
        }
        check_band(&self.grid, self.band, self.rung)?;
        for (i, term) in self.term_exponents().iter().enumerate() {
            check_holder(term, self.p, &format!("majorant term {}", i + 1))?;
        }
        let in_range = self
            .term_exponents()
            .iter()
            .flatten()
            .all(|e| e.in_open_range());
        gate_exploratory(!in_range, self.exploratory, "an inner exponent")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepOperator {
    Tab,
    Nls,
    Paraproduct,
}

impl SweepOperator {
    pub fn arity(self) -> usize {
        match self {
            SweepOperator::Paraproduct => 2,
            _ => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepOperator::Tab => "tab",
            SweepOperator::Nls => "nls",
            SweepOperator::Paraproduct => "paraproduct",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormSweepConfig {
    pub grid: GridSpec,
    pub operator: SweepOperator,
    pub p: Exponent,
    pub inputs: Vec<Exponent>,
    pub k_lo: i32,
    pub k_hi: i32,
    pub band: i64,
    #[serde(default = "default_rungs")]
    pub rungs: u32,
    pub trials: u32,
    pub seed: u64,
    #[serde(default)]
    pub exploratory: bool,
}

fn default_rungs() -> u32 {
    4
}

impl NormSweepConfig {
    pub fn validate(&self) -> Result<RangeCheck> {
        let grid = self.grid.to_grid()?;
        if self.trials == 0 {
            return Err(Error::InvalidInput("trial count must be positive".into()));
        }
        if self.inputs.len() != self.operator.arity() {
            return Err(Error::InvalidInput(format!(
                "operator {} takes {} inputs, config lists {} exponents",
                self.operator.name(),
                self.operator.arity(),
                self.inputs.len()
            )));
        }
        if self.k_lo > self.k_hi {
            return Err(Error::InvalidInput(format!(
                "empty scale range [{}, {}]",
                self.k_lo, self.k_hi
            )));
        }
        // The widest filter in play reaches 2^(k_hi+2); it must fit the
        // representable band, physical frequency n / (2 period).
        let reach = (self.k_hi + 2) as f64;
        let edge = grid.len() as f64 / (2.0 * grid.period());
        if reach.exp2() >= edge {
            return Err(Error::InvalidInput(format!(
                "top scale {} puts filters past the grid's frequency edge {edge}",
                self.k_hi
            )));
        }
        check_band(&self.grid, self.band, self.rungs)?;
        check_holder(&self.inputs, self.p, "input exponents")?;
        let in_range = self.inputs.iter().all(|e| e.in_open_range());
        gate_exploratory(!in_range, self.exploratory, "an input exponent")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelBoundConfig {
    #[serde(default = "default_period")]
    pub period: f64,
    pub sizes: Vec<usize>,
    #[serde(default = "default_max_scale")]
    pub max_scale: u32,
    #[serde(default = "default_tag")]
    pub tag: String,
    pub trials: u32,
    pub seed: u64,
}

fn default_max_scale() -> u32 {
    4
}

fn default_tag() -> String {
    "phi".into()
}

impl ModelBoundConfig {
    pub fn tag_kind(&self) -> Result<BumpKind> {
        match self.tag.as_str() {
            "phi" => Ok(BumpKind::Phi),
            "psi" => Ok(BumpKind::Psi),
            other => Err(Error::InvalidInput(format!(
                "tree tag must be \"phi\" or \"psi\", got {other:?}"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::InvalidInput(format!(
                "period must be positive, got {}",
                self.period
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("trial count must be positive".into()));
        }
        if self.sizes.is_empty() {
            return Err(Error::InvalidInput("no tree sizes listed".into()));
        }
        for &s in &self.sizes {
            let room = 1usize << (self.max_scale + 1);
            if s == 0 || s > room.saturating_sub(1) {
                return Err(Error::InvalidInput(format!(
                    "tree size {s} does not fit in scales 0..={}",
                    self.max_scale
                )));
            }
        }
        if self.max_scale > 16 {
            return Err(Error::InvalidInput(format!(
                "max scale {} is past any sensible tree depth",
                self.max_scale
            )));
        }
        self.tag_kind().map(|_| ())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AknsScanConfig {
    pub system: AknsConfig,
    pub lambdas: Vec<f64>,
    /// Initial state as `[re, im]` pairs, one per component.
    pub u0: Vec<[f64; 2]>,
    pub step: f64,
}

impl AknsScanConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.lambdas.is_empty() {
            return Err(Error::InvalidInput("no spectral parameters listed".into()));
        }
        if self.lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("spectral parameter".into()));
        }
        if self.u0.len() != self.system.n() {
            return Err(Error::InvalidInput(format!(
                "initial state has {} components, system has {}",
                self.u0.len(),
                self.system.n()
            )));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidInput(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecomposeConfig {
    pub grid: GridSpec,
    pub k_lo: i32,
    pub k_hi: i32,
    pub gap: i32,
    pub band: i64,
    pub trials: u32,
    pub seed: u64,
}

impl DecomposeConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.to_grid()?;
        if self.trials == 0 {
            return Err(Error::InvalidInput("trial count must be positive".into()));
        }
        if self.k_lo > self.k_hi {
            return Err(Error::InvalidInput(format!(
                "empty scale range [{}, {}]",
                self.k_lo, self.k_hi
            )));
        }
        if self.gap < 1 {
            return Err(Error::InvalidInput(format!(
                "scale gap must be at least 1, got {}",
                self.gap
            )));
        }
        check_band(&self.grid, self.band, 0)
    }
}

/// Reads and parses a config file; a missing or unreadable file reports
/// the path it tried.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::InvalidInput(format!("cannot read config {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text).map_err(|e| {
        Error::InvalidInput(format!("config {} does not parse: {e}", path.display()))
    })
}
