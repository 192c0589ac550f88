//! Wave packets adapted to dyadic intervals, and the packet collections
//! the dyadic model operators run over.
//!
//! A packet for the interval `I = [n 2^-k L, (n+1) 2^-k L)` is built on the
//! Fourier side: a smooth cutoff envelope of width `2^k` modes (so spatial
//! width `~|I|`) centered at mode 0 (ball tag) or mode `4 * 2^k` (annulus
//! tag, keeping the spectrum away from 0), carried to the interval's center
//! by a phase. The sampled realization is normalized to unit L2 norm; the
//! stored spectrum keeps its constructed zeros exact.

use num_complex::Complex64;

use crate::bump::{profile_value, BumpKind, ProfileKind};
use crate::dyadic::{CoefficientTree, DyadicInterval};
use crate::error::{Error, Result};
use crate::grid::{inverse_transform, lp_norm, pairing, Grid, SampledFunction, Spectrum};

/// Annulus-tagged packets sit at this multiple of their envelope width.
const PSI_CENTER_WIDTHS: i64 = 4;

/// An L2-normalized bump adapted to one dyadic interval.
#[derive(Debug, Clone)]
pub struct WavePacket {
    interval: DyadicInterval,
    tag: BumpKind,
    omega: i64,
    spectrum: Spectrum,
    samples: SampledFunction,
}

impl WavePacket {
    pub fn new(grid: &Grid, interval: DyadicInterval, tag: BumpKind) -> Result<Self> {
        let k = interval.scale();
        let width = 1i64 << k;
        let omega = match tag {
            BumpKind::Phi => 0,
            BumpKind::Psi => PSI_CENTER_WIDTHS * width,
        };
        let reach = omega + 2 * width;
        if reach > grid.mode_max() {
            return Err(Error::InvalidInput(format!(
                "packet at scale {k} reaches mode {reach}, beyond the grid's {}",
                grid.mode_max()
            )));
        }
        let l = grid.period();
        let center = interval.start(l) + 0.5 * interval.length(l);
        let mut spectrum = Spectrum::zero(*grid);
        for j in grid.modes() {
            let envelope =
                profile_value(ProfileKind::SmoothCutoff, (j - omega) as f64 / width as f64);
            if envelope == 0.0 {
                continue;
            }
            let phase = Complex64::from_polar(
                1.0,
                -2.0 * std::f64::consts::PI * j as f64 * center / l,
            );
            spectrum.set_coeff(j, envelope * phase);
        }
        let raw = inverse_transform(&spectrum)?;
        let norm = lp_norm(&raw, 2.0)?;
        if norm == 0.0 {
            return Err(Error::InternalCheck("packet with no mass".into()));
        }
        let scale = Complex64::new(1.0 / norm, 0.0);
        let samples = raw.scale(scale);
        spectrum.multiply_modes(|_| scale);
        Ok(WavePacket {
            interval,
            tag,
            omega,
            spectrum,
            samples,
        })
    }

    pub fn interval(&self) -> DyadicInterval {
        self.interval
    }

    pub fn tag(&self) -> BumpKind {
        self.tag
    }

    /// Center frequency in mode units.
    pub fn omega(&self) -> i64 {
        self.omega
    }

    pub fn function(&self) -> &SampledFunction {
        &self.samples
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }
}

/// One packet triple per dyadic interval, with a fixed slot-to-tag
/// assignment. At least two of the three slots must be annulus-tagged.
#[derive(Debug, Clone)]
pub struct PacketSet {
    grid: Grid,
    tags: [BumpKind; 3],
    intervals: Vec<DyadicInterval>,
    triples: Vec<[WavePacket; 3]>,
}

impl PacketSet {
    pub fn new(grid: &Grid, intervals: &[DyadicInterval], tags: [BumpKind; 3]) -> Result<Self> {
        let psi_count = tags.iter().filter(|t| **t == BumpKind::Psi).count();
        if psi_count < 2 {
            return Err(Error::InvalidInput(format!(
                "packet triples need at least two annulus tags, got {psi_count}"
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for i in intervals {
            if !seen.insert(*i) {
                return Err(Error::InvalidInput(format!(
                    "duplicate interval ({}, {}) in packet set",
                    i.scale(),
                    i.position()
                )));
            }
        }
        let mut triples = Vec::with_capacity(intervals.len());
        for i in intervals {
            triples.push([
                WavePacket::new(grid, *i, tags[0])?,
                WavePacket::new(grid, *i, tags[1])?,
                WavePacket::new(grid, *i, tags[2])?,
            ]);
        }
        Ok(PacketSet {
            grid: *grid,
            tags,
            intervals: intervals.to_vec(),
            triples,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn tags(&self) -> [BumpKind; 3] {
        self.tags
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DyadicInterval, &[WavePacket; 3])> {
        self.intervals.iter().zip(&self.triples)
    }

    /// The coefficient tree `interval -> <f, packet_slot>` of one slot.
    pub fn coefficients(&self, f: &SampledFunction, slot: usize) -> Result<CoefficientTree> {
        if slot >= 3 {
            return Err(Error::InvalidInput(format!(
                "packet slot {slot} out of range"
            )));
        }
        let mut tree = CoefficientTree::new(self.tags[slot], self.grid.period())?;
        for (interval, triple) in self.iter() {
            tree.insert(*interval, pairing(f, triple[slot].function())?)?;
        }
        Ok(tree)
    }
}
