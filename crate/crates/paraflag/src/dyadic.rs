//! Dyadic intervals of the unit period and coefficient trees indexed by
//! them. Interval combinatorics (nesting, disjointness, splitting) is done
//! on the integer pair (scale, position), so it is exact; physical
//! endpoints and lengths are produced on demand for a given period and are
//! themselves exact, being small multiples of powers of two.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bump::BumpKind;
use crate::error::{Error, Result};

/// Deepest admissible scale; positions then still fit comfortably in the
/// integer-exact range of both u64 and f64.
pub const MAX_SCALE: u32 = 40;

/// The interval `[n 2^-k L, (n+1) 2^-k L)` of one period, stored as the
/// integer pair `(k, n)` with `0 <= n < 2^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    k: u32,
    n: u64,
}

impl DyadicInterval {
    pub fn new(k: u32, n: u64) -> Result<Self> {
        if k > MAX_SCALE {
            return Err(Error::InvalidInput(format!(
                "dyadic scale {k} exceeds the supported depth {MAX_SCALE}"
            )));
        }
        if n >= 1u64 << k {
            return Err(Error::InvalidInput(format!(
                "dyadic position {n} outside [0, 2^{k})"
            )));
        }
        Ok(DyadicInterval { k, n })
    }

    /// The whole period `[0, L)`.
    pub fn root() -> Self {
        DyadicInterval { k: 0, n: 0 }
    }

    pub fn scale(&self) -> u32 {
        self.k
    }

    pub fn position(&self) -> u64 {
        self.n
    }

    /// `|I| = 2^-k L`.
    pub fn length(&self, period: f64) -> f64 {
        period * (-(self.k as f64)).exp2()
    }

    pub fn start(&self, period: f64) -> f64 {
        self.n as f64 * self.length(period)
    }

    pub fn end(&self, period: f64) -> f64 {
        (self.n + 1) as f64 * self.length(period)
    }

    /// Whether `other` is contained in `self` (not necessarily strictly).
    pub fn contains(&self, other: &DyadicInterval) -> bool {
        other.k >= self.k && (other.n >> (other.k - self.k)) == self.n
    }

    pub fn is_disjoint(&self, other: &DyadicInterval) -> bool {
        !self.contains(other) && !other.contains(self)
    }

    pub fn parent(&self) -> Option<DyadicInterval> {
        if self.k == 0 {
            None
        } else {
            Some(DyadicInterval {
                k: self.k - 1,
                n: self.n >> 1,
            })
        }
    }

    /// The two children one scale deeper.
    pub fn split(&self) -> Result<(DyadicInterval, DyadicInterval)> {
        if self.k == MAX_SCALE {
            return Err(Error::InvalidInput(format!(
                "cannot split below scale {MAX_SCALE}"
            )));
        }
        Ok((
            DyadicInterval {
                k: self.k + 1,
                n: 2 * self.n,
            },
            DyadicInterval {
                k: self.k + 1,
                n: 2 * self.n + 1,
            },
        ))
    }
}

/// One serialized tree entry; the tag is repeated per record so a fixture
/// file is self-describing line by line.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TreeEntry {
    k: u32,
    n: u64,
    re: f64,
    im: f64,
    tag: BumpKind,
}

/// Complex coefficients indexed by dyadic intervals, all carrying one
/// ball/annulus type tag; the indexed family a tree of wave-packet inner
/// products forms. Iteration order is (scale, position), so every
/// aggregate computed from a tree is reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTree {
    entries: BTreeMap<DyadicInterval, Complex64>,
    tag: BumpKind,
    period: f64,
}

impl CoefficientTree {
    pub fn new(tag: BumpKind, period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tree period must be positive, got {period}"
            )));
        }
        Ok(CoefficientTree {
            entries: BTreeMap::new(),
            tag,
            period,
        })
    }

    pub fn insert(&mut self, interval: DyadicInterval, value: Complex64) -> Result<()> {
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::NonFinite(format!(
                "coefficient at ({}, {})",
                interval.scale(),
                interval.position()
            )));
        }
        self.entries.insert(interval, value);
        Ok(())
    }

    pub fn tag(&self) -> BumpKind {
        self.tag
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, interval: &DyadicInterval) -> Option<Complex64> {
        self.entries.get(interval).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&DyadicInterval, &Complex64)> {
        self.entries.iter()
    }

    pub fn intervals(&self) -> impl Iterator<Item = &DyadicInterval> {
        self.entries.keys()
    }

    /// Entrywise scaling; sizes and energies are 1-homogeneous under it.
    pub fn scaled(&self, c: Complex64) -> CoefficientTree {
        CoefficientTree {
            entries: self
                .entries
                .iter()
                .map(|(i, v)| (*i, c * v))
                .collect(),
            tag: self.tag,
            period: self.period,
        }
    }

    /// Fixture form: a JSON array of `{"k":..,"n":..,"re":..,"im":..,"tag":..}`
    /// records in tree order.
    pub fn to_json(&self) -> Result<String> {
        let records: Vec<TreeEntry> = self
            .entries
            .iter()
            .map(|(i, v)| TreeEntry {
                k: i.scale(),
                n: i.position(),
                re: v.re,
                im: v.im,
                tag: self.tag,
            })
            .collect();
        serde_json::to_string(&records).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn from_json(text: &str, period: f64) -> Result<CoefficientTree> {
        let records: Vec<TreeEntry> =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let tag = match records.first() {
            Some(r) => r.tag,
            None => {
                return Err(Error::InvalidInput(
                    "tree fixture holds no entries".into(),
                ))
            }
        };
        let mut tree = CoefficientTree::new(tag, period)?;
        for r in &records {
            if r.tag != tag {
                return Err(Error::InvalidInput(
                    "tree fixture mixes phi and psi tags".into(),
                ));
            }
            tree.insert(DyadicInterval::new(r.k, r.n)?, Complex64::new(r.re, r.im))?;
        }
        Ok(tree)
    }
}
