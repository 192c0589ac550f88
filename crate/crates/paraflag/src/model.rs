//! The dyadic model operators the Taylor reduction produces, and the
//! 4-linear form they pair into.
//!
//! Both operators run over two packet collections: an outer one on fine
//! intervals `I` and an inner one on coarse intervals `J`. The inner sum
//! composes a bilinear function `B_I(f, g)` from the coarse packets; the
//! full operator admits every strictly coarser `J`, the single-gap variant
//! only `|J| = 2^gap |I|`. All pairings are the bilinear grid quadrature,
//! so the form's two groupings (by `I` and by `J`) are the same finite sum
//! rearranged, and the form asserts their agreement on every call.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{pairing, Grid, SampledFunction};
use crate::packets::PacketSet;

/// The fine (outer) and coarse (inner) packet collections of one model
/// operator.
#[derive(Debug, Clone)]
pub struct ModelPackets {
    fine: PacketSet,
    coarse: PacketSet,
}

impl ModelPackets {
    pub fn new(fine: PacketSet, coarse: PacketSet) -> Result<Self> {
        fine.grid().check_same(coarse.grid(), "packet collections")?;
        Ok(ModelPackets { fine, coarse })
    }

    pub fn fine(&self) -> &PacketSet {
        &self.fine
    }

    pub fn coarse(&self) -> &PacketSet {
        &self.coarse
    }

    pub fn grid(&self) -> &Grid {
        self.fine.grid()
    }
}

fn check_inputs(packets: &ModelPackets, fs: &[&SampledFunction]) -> Result<()> {
    for f in fs {
        packets.grid().check_same(f.grid(), "model operator input")?;
    }
    Ok(())
}

/// Shared body of the model operators: `admit(k_fine, k_coarse)` selects
/// which coarse scales feed each fine interval's inner sum.
fn model_op_filtered(
    packets: &ModelPackets,
    f: &SampledFunction,
    g: &SampledFunction,
    h: &SampledFunction,
    admit: impl Fn(u32, u32) -> bool,
) -> Result<SampledFunction> {
    check_inputs(packets, &[f, g, h])?;
    let grid = *packets.grid();
    let l = grid.period();
    let mut coarse_terms = Vec::with_capacity(packets.coarse.len());
    for (j, triple) in packets.coarse.iter() {
        let coef = pairing(f, triple[0].function())? * pairing(g, triple[1].function())?
            / j.length(l).sqrt();
        coarse_terms.push((j.scale(), coef, triple[2].function()));
    }
    let mut out = SampledFunction::zero(grid);
    for (i, triple) in packets.fine.iter() {
        let mut inner = SampledFunction::zero(grid);
        let mut populated = false;
        for (k_coarse, coef, phi3) in &coarse_terms {
            if admit(i.scale(), *k_coarse) {
                inner.accumulate(&phi3.scale(*coef))?;
                populated = true;
            }
        }
        if !populated {
            continue;
        }
        let weight = pairing(&inner, triple[0].function())? * pairing(h, triple[1].function())?
            / i.length(l).sqrt();
        out.accumulate(&triple[2].function().scale(weight))?;
    }
    Ok(out)
}

/// The full model operator: every coarse interval strictly longer than the
/// fine one feeds its inner sum. Empty packet collections give zero.
pub fn model_op_24(
    packets: &ModelPackets,
    f: &SampledFunction,
    g: &SampledFunction,
    h: &SampledFunction,
) -> Result<SampledFunction> {
    model_op_filtered(packets, f, g, h, |k_fine, k_coarse| k_coarse < k_fine)
}

/// The single-gap model operator: the inner sum keeps only coarse
/// intervals exactly `gap` dyadic scales longer. A gap beyond the
/// available span gives zero; summing over all gaps recovers the full
/// operator.
pub fn model_op_25(
    gap: u32,
    packets: &ModelPackets,
    f: &SampledFunction,
    g: &SampledFunction,
    h: &SampledFunction,
) -> Result<SampledFunction> {
    if gap == 0 {
        return Err(Error::InvalidInput(
            "single-gap model operator needs a positive scale gap".into(),
        ));
    }
    model_op_filtered(packets, f, g, h, |k_fine, k_coarse| k_coarse + gap == k_fine)
}

/// The 4-linear form of the full model operator, computed grouped by fine
/// intervals and again grouped by coarse intervals; disagreement beyond
/// rounding signals an indexing or quadrature bug and is returned as an
/// internal-consistency error.
pub fn four_linear_form(
    packets: &ModelPackets,
    f: &SampledFunction,
    g: &SampledFunction,
    h: &SampledFunction,
    k: &SampledFunction,
) -> Result<Complex64> {
    check_inputs(packets, &[f, g, h, k])?;
    let grid = *packets.grid();
    let l = grid.period();

    let mut primal = Complex64::new(0.0, 0.0);
    for (i, triple) in packets.fine.iter() {
        let mut inner = SampledFunction::zero(grid);
        for (j, jt) in packets.coarse.iter() {
            if j.scale() < i.scale() {
                let coef = pairing(f, jt[0].function())? * pairing(g, jt[1].function())?
                    / j.length(l).sqrt();
                inner.accumulate(&jt[2].function().scale(coef))?;
            }
        }
        primal += pairing(&inner, triple[0].function())?
            * pairing(h, triple[1].function())?
            * pairing(k, triple[2].function())?
            / i.length(l).sqrt();
    }

    let mut dual = Complex64::new(0.0, 0.0);
    for (j, jt) in packets.coarse.iter() {
        let mut inner = SampledFunction::zero(grid);
        for (i, it) in packets.fine.iter() {
            if j.scale() < i.scale() {
                let coef = pairing(h, it[1].function())? * pairing(k, it[2].function())?
                    / i.length(l).sqrt();
                inner.accumulate(&it[0].function().scale(coef))?;
            }
        }
        dual += pairing(f, jt[0].function())?
            * pairing(g, jt[1].function())?
            * pairing(&inner, jt[2].function())?
            / j.length(l).sqrt();
    }

    let drift = (primal - dual).norm();
    if drift > 1e-10 * (1.0 + primal.norm()) {
        return Err(Error::InternalCheck(format!(
            "form groupings disagree by {drift:.3e}"
        )));
    }
    Ok(primal)
}
