//! Size and energy functionals on coefficient trees, and the interpolated
//! size-energy bound check for the 4-linear form.
//!
//! The ball-tag size is a plain normalized sup. The annulus-tag size of a
//! candidate interval is the weak-L1 norm of a local square function: a
//! piecewise-constant function on the fragments of the nesting forest of
//! tree intervals inside the candidate, whose squared value on a fragment
//! is the ancestor-chain sum of |a|^2/|interval|. Energy maximizes
//! threshold times total length over disjoint qualifying subcollections;
//! thresholds range over the attained local values, so the result is
//! 1-homogeneous in the coefficients and matches brute-force search over
//! disjoint subcollections exactly, not merely up to a dyadic rounding of
//! the threshold.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::bump::BumpKind;
use crate::dyadic::{CoefficientTree, DyadicInterval};
use crate::error::{Error, Result};
use crate::exactsum::exact_total;

/// Local size of one candidate interval: the tree's size over the
/// singleton collection holding it.
fn local_size(tree: &CoefficientTree, j: &DyadicInterval) -> f64 {
    let l = tree.period();
    match tree.tag() {
        BumpKind::Phi => tree
            .get(j)
            .map(|a| a.norm() / j.length(l).sqrt())
            .unwrap_or(0.0),
        BumpKind::Psi => {
            let nodes: Vec<(DyadicInterval, f64)> = tree
                .entries()
                .filter(|(i, _)| j.contains(i))
                .map(|(i, a)| (*i, a.norm_sqr() / i.length(l)))
                .collect();
            if nodes.is_empty() {
                return 0.0;
            }
            let index: BTreeMap<DyadicInterval, usize> = nodes
                .iter()
                .enumerate()
                .map(|(idx, (i, _))| (*i, idx))
                .collect();
            // Tree order puts ancestors first, so cumulative weights are
            // complete by the time a descendant reads them.
            let mut cum = vec![0.0; nodes.len()];
            let mut child_len = vec![0.0; nodes.len()];
            for idx in 0..nodes.len() {
                let (i, w) = nodes[idx];
                let mut up = i.parent();
                let mut ancestor = None;
                while let Some(p) = up {
                    if p.scale() < j.scale() {
                        break;
                    }
                    if let Some(&pi) = index.get(&p) {
                        ancestor = Some(pi);
                        break;
                    }
                    up = p.parent();
                }
                cum[idx] = w + ancestor.map(|pi| cum[pi]).unwrap_or(0.0);
                if let Some(pi) = ancestor {
                    child_len[pi] += i.length(l);
                }
            }
            let mut pieces: Vec<(f64, f64)> = nodes
                .iter()
                .enumerate()
                .map(|(idx, (i, _))| (cum[idx].sqrt(), i.length(l) - child_len[idx]))
                .filter(|&(v, m)| v > 0.0 && m > 0.0)
                .collect();
            pieces.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            let mut above = 0.0;
            let mut weak = 0.0f64;
            for &(v, m) in &pieces {
                above += m;
                weak = weak.max(v * above);
            }
            weak / j.length(l)
        }
    }
}

/// Size of the tree over a candidate collection: the sup of local sizes.
/// For a ball-tagged tree this is `sup |a_J| / |J|^(1/2)`; for an
/// annulus-tagged tree each candidate contributes its normalized local
/// weak-L1 square-function norm.
pub fn size(tree: &CoefficientTree, collection: &[DyadicInterval]) -> Result<f64> {
    if tree.is_empty() {
        return Err(Error::InvalidInput("size of an empty tree".into()));
    }
    Ok(collection
        .iter()
        .map(|j| local_size(tree, j))
        .fold(0.0, f64::max))
}

/// Energy: the best value of `threshold * total length` over disjoint
/// subcollections of the tree's intervals whose local size meets the
/// threshold. At a fixed threshold the optimum is the set of maximal
/// qualifying intervals, and only attained local sizes can be optimal
/// thresholds, so the search is finite.
pub fn energy(tree: &CoefficientTree) -> Result<f64> {
    if tree.is_empty() {
        return Err(Error::InvalidInput("energy of an empty tree".into()));
    }
    let l = tree.period();
    let intervals: Vec<DyadicInterval> = tree.intervals().copied().collect();
    let locals: Vec<f64> = intervals.iter().map(|j| local_size(tree, j)).collect();
    let mut best = 0.0f64;
    for &t in locals.iter().filter(|&&t| t > 0.0) {
        let qualifying: Vec<&DyadicInterval> = intervals
            .iter()
            .zip(&locals)
            .filter(|&(_, &q)| q >= t)
            .map(|(j, _)| j)
            .collect();
        let lengths: Vec<f64> = qualifying
            .iter()
            .filter(|j| {
                !qualifying
                    .iter()
                    .any(|other| *other != **j && other.contains(j))
            })
            .map(|j| j.length(l))
            .collect();
        best = best.max(t * exact_total(lengths));
    }
    Ok(best)
}

/// Ratio of `|lambda|` to the interpolated size-energy product
/// `prod_i size_i^(1-theta_i) energy_i^(theta_i)`, sizes taken over each
/// tree's own interval collection. Zero lambda gives ratio zero by
/// convention, before the trees are inspected.
pub fn check_size_energy(
    lambda: Complex64,
    trees: [&CoefficientTree; 3],
    theta: [f64; 3],
) -> Result<f64> {
    if !lambda.re.is_finite() || !lambda.im.is_finite() {
        return Err(Error::NonFinite("form value".into()));
    }
    for t in theta {
        if !(t >= 0.0 && t < 1.0) {
            return Err(Error::InvalidInput(format!(
                "interpolation weights must lie in [0, 1), got {t}"
            )));
        }
    }
    if (theta.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(
            "interpolation weights must sum to 1".into(),
        ));
    }
    if lambda.norm() == 0.0 {
        return Ok(0.0);
    }
    let mut denom = 1.0;
    for (tree, t) in trees.iter().zip(theta) {
        let collection: Vec<DyadicInterval> = tree.intervals().copied().collect();
        let s = size(tree, &collection)?;
        let e = energy(tree)?;
        denom *= s.powf(1.0 - t) * e.powf(t);
    }
    if denom == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(lambda.norm() / denom)
}
