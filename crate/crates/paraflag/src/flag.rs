//! The two theorem-level flag paraproducts, the three-way scale-case split
//! of their symbols, and the Taylor reduction of the far-off-diagonal case
//! to single-gap model symbols.
//!
//! A flag symbol here is a product of two scale-sum families placed on
//! overlapping coordinate subsets: `a(xi1, xi2) b(xi2, xi3)` for the
//! two-factor form and `a(xi1, xi2) b(xi1, xi2, xi3)` for the three-factor
//! form. The fast evaluator runs over scale pairs `(k1, k2)` and realizes
//! each tensor product as per-coordinate spectral filters. The scale split
//! merges the two sums into one two-index sum and constrains the pair
//! relation, so the three cases partition the full sum term by term. The
//! Taylor step rewrites each ball factor of the wide-gap case about the
//! sum `xi1 + xi2`, leaving derivative-at-sum factors, monomials carried
//! by the small-scale atoms, and one explicit remainder symbol.

use crate::bump::{BumpKind, FamilyShape, ProfileKind};
use crate::error::{Error, Result};
use crate::grid::SampledFunction;
use crate::littlewood::apply_frequency_symbol;
use crate::symbol::{
    build_flag_symbol, AtomForm, Factor, PairKind, ScaleAtom, ScaleSum, ScaleVar, SecondIndex,
    SymbolExpr,
};

/// Placement of the second factor: sharing one coordinate with the first
/// (the two-factor theorem's operator) or all of them (the three-factor
/// scattering operator's).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlagForm {
    Tab,
    Nls,
}

enum TensorInput<'a> {
    Unit,
    Sum(&'a ScaleSum),
}

/// Accepts a symbol usable by the fast path: one factor over all
/// coordinates that is either the unit or a single-index scale sum of
/// plain one-coordinate atoms.
fn extract_tensor(sym: &SymbolExpr) -> Result<TensorInput<'_>> {
    if sym.factors().len() != 1 {
        return Err(Error::InvalidInput(
            "fast flag evaluation needs a single-factor symbol".into(),
        ));
    }
    let f = &sym.factors()[0];
    if f.subset.len() != sym.arity() {
        return Err(Error::InvalidInput(
            "fast flag evaluation needs the factor to read every coordinate".into(),
        ));
    }
    match &f.factor {
        Factor::ClosedForm { name, .. } if name == "one" => Ok(TensorInput::Unit),
        Factor::ScaleSum(s) => {
            if s.second.is_some() {
                return Err(Error::InvalidInput(
                    "fast flag evaluation takes single-index scale sums".into(),
                ));
            }
            for product in &s.products {
                for atom in product {
                    if atom.form != AtomForm::Plain {
                        return Err(Error::InvalidInput(
                            "fast flag evaluation takes plain family members".into(),
                        ));
                    }
                    if atom.coeffs.iter().filter(|c| **c != 0.0).count() != 1 {
                        return Err(Error::InvalidInput(
                            "fast flag evaluation takes one-coordinate atoms".into(),
                        ));
                    }
                }
            }
            Ok(TensorInput::Sum(s))
        }
        _ => Err(Error::InvalidInput(
            "flag factors must be scale sums (or the unit)".into(),
        )),
    }
}

fn tensor_layers<'a>(t: &'a TensorInput<'a>) -> Vec<(i32, &'a [ScaleAtom])> {
    match t {
        TensorInput::Unit => vec![(0, &[][..])],
        TensorInput::Sum(s) => {
            let mut out = Vec::new();
            for k in s.k_lo..=s.k_hi {
                for product in &s.products {
                    out.push((k, product.as_slice()));
                }
            }
            out
        }
    }
}

fn one_hot(atom: &ScaleAtom) -> Option<(usize, f64)> {
    let mut hits = atom
        .coeffs
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| (c != 0.0).then_some((i, c)));
    let first = hits.next()?;
    hits.next().is_none().then_some(first)
}

/// Applies `sum_(k1,k2) prod_c filters_c` by filtering each input on the
/// Fourier side and multiplying pointwise, one scale pair at a time.
fn scale_pair_apply(
    a: &TensorInput,
    a_map: &[usize],
    b: &TensorInput,
    b_map: &[usize],
    fs: [&SampledFunction; 3],
) -> Result<SampledFunction> {
    let grid = *fs[0].grid();
    for f in &fs {
        grid.check_same(f.grid(), "flag operator input")?;
    }
    let mut out = SampledFunction::zero(grid);
    for (ka, pa) in tensor_layers(a) {
        for (kb, pb) in tensor_layers(b) {
            let mut filters: [Vec<(FamilyShape, i32, f64)>; 3] =
                [Vec::new(), Vec::new(), Vec::new()];
            for atom in pa {
                let (local, w) = one_hot(atom).expect("validated one-coordinate atom");
                filters[a_map[local]].push((atom.shape, ka + atom.shift, w));
            }
            for atom in pb {
                let (local, w) = one_hot(atom).expect("validated one-coordinate atom");
                filters[b_map[local]].push((atom.shape, kb + atom.shift, w));
            }
            let mut piece: Option<SampledFunction> = None;
            for (c, f) in fs.iter().enumerate() {
                let filtered = if filters[c].is_empty() {
                    (*f).clone()
                } else {
                    let list = filters[c].clone();
                    apply_frequency_symbol(f, move |xi| {
                        list.iter().map(|(shape, k, w)| shape.hat(*k, w * xi)).product()
                    })?
                };
                piece = Some(match piece {
                    None => filtered,
                    Some(p) => p.pointwise_mul(&filtered)?,
                });
            }
            out.accumulate(&piece.expect("three inputs"))?;
        }
    }
    Ok(out)
}

/// The two-factor flag operator, symbol `a(xi1, xi2) b(xi2, xi3)`.
pub fn apply_flag_tab(
    a: &SymbolExpr,
    b: &SymbolExpr,
    f1: &SampledFunction,
    f2: &SampledFunction,
    f3: &SampledFunction,
) -> Result<SampledFunction> {
    if a.arity() != 2 || b.arity() != 2 {
        return Err(Error::InvalidInput(
            "two-factor flag symbols have arity (2, 2)".into(),
        ));
    }
    scale_pair_apply(&extract_tensor(a)?, &[0, 1], &extract_tensor(b)?, &[1, 2], [f1, f2, f3])
}

/// The three-factor flag operator, symbol `a(xi1, xi2) b(xi1, xi2, xi3)`.
pub fn apply_flag_nls(
    a: &SymbolExpr,
    b: &SymbolExpr,
    f1: &SampledFunction,
    f2: &SampledFunction,
    f3: &SampledFunction,
) -> Result<SampledFunction> {
    if a.arity() != 2 || b.arity() != 3 {
        return Err(Error::InvalidInput(
            "three-factor flag symbols have arity (2, 3)".into(),
        ));
    }
    scale_pair_apply(
        &extract_tensor(a)?,
        &[0, 1],
        &extract_tensor(b)?,
        &[0, 1, 2],
        [f1, f2, f3],
    )
}

fn single_factor(sym: &SymbolExpr) -> Result<&Factor> {
    if sym.factors().len() != 1 {
        return Err(Error::InvalidInput("expected a single-factor symbol".into()));
    }
    Ok(&sym.factors()[0].factor)
}

/// The arity-3 product symbol the two-factor operator realizes; feeds the
/// direct-summation oracle.
pub fn combined_tab_symbol(a: &SymbolExpr, b: &SymbolExpr) -> Result<SymbolExpr> {
    build_flag_symbol(
        3,
        vec![
            (vec![1, 2], single_factor(a)?.clone()),
            (vec![2, 3], single_factor(b)?.clone()),
        ],
    )
}

/// The arity-3 product symbol of the three-factor operator.
pub fn combined_nls_symbol(a: &SymbolExpr, b: &SymbolExpr) -> Result<SymbolExpr> {
    build_flag_symbol(
        3,
        vec![
            (vec![1, 2], single_factor(a)?.clone()),
            (vec![1, 2, 3], single_factor(b)?.clone()),
        ],
    )
}

/// The two-factor theorem's concrete families on `[k_lo, k_hi]`: a ball
/// and an annulus member for the first factor, and for the second a curved
/// ball (so Taylor expansion sees nonvanishing derivatives) with an
/// annulus member.
pub fn standard_tab_symbols(k_lo: i32, k_hi: i32) -> Result<(SymbolExpr, SymbolExpr)> {
    if k_lo > k_hi {
        return Err(Error::InvalidInput("empty scale range".into()));
    }
    let phi = FamilyShape::plain(BumpKind::Phi);
    let psi = FamilyShape::plain(BumpKind::Psi);
    let curved = FamilyShape::new(BumpKind::Phi, ProfileKind::CurvedBump, 0)?;
    let a = ScaleSum {
        k_lo,
        k_hi,
        second: None,
        products: vec![vec![
            ScaleAtom::plain(phi, ScaleVar::K1, vec![1.0, 0.0]),
            ScaleAtom::plain(psi, ScaleVar::K1, vec![0.0, 1.0]),
        ]],
    };
    let b = ScaleSum {
        k_lo,
        k_hi,
        second: None,
        products: vec![vec![
            ScaleAtom::plain(curved, ScaleVar::K1, vec![1.0, 0.0]),
            ScaleAtom::plain(psi, ScaleVar::K1, vec![0.0, 1.0]),
        ]],
    };
    Ok((
        build_flag_symbol(2, vec![(vec![1, 2], Factor::ScaleSum(a))])?,
        build_flag_symbol(2, vec![(vec![1, 2], Factor::ScaleSum(b))])?,
    ))
}

/// The three-factor theorem's concrete families: two annulus members for
/// the first factor (the combination whose wide-gap second case dies by
/// support), and two curved balls with an annulus member for the second.
pub fn standard_nls_symbols(k_lo: i32, k_hi: i32) -> Result<(SymbolExpr, SymbolExpr)> {
    if k_lo > k_hi {
        return Err(Error::InvalidInput("empty scale range".into()));
    }
    let psi = FamilyShape::plain(BumpKind::Psi);
    let curved = FamilyShape::new(BumpKind::Phi, ProfileKind::CurvedBump, 0)?;
    let a = ScaleSum {
        k_lo,
        k_hi,
        second: None,
        products: vec![vec![
            ScaleAtom::plain(psi, ScaleVar::K1, vec![1.0, 0.0]),
            ScaleAtom::plain(psi, ScaleVar::K1, vec![0.0, 1.0]),
        ]],
    };
    let b = ScaleSum {
        k_lo,
        k_hi,
        second: None,
        products: vec![vec![
            ScaleAtom::plain(curved, ScaleVar::K1, vec![1.0, 0.0, 0.0]),
            ScaleAtom::plain(curved, ScaleVar::K1, vec![0.0, 1.0, 0.0]),
            ScaleAtom::plain(psi, ScaleVar::K1, vec![0.0, 0.0, 1.0]),
        ]],
    };
    Ok((
        build_flag_symbol(2, vec![(vec![1, 2], Factor::ScaleSum(a))])?,
        build_flag_symbol(3, vec![(vec![1, 2, 3], Factor::ScaleSum(b))])?,
    ))
}

/// The merged two-index sum and its three scale-relation restrictions.
#[derive(Debug, Clone)]
pub struct ScaleCases {
    /// The unrestricted merged sum; equals the product symbol `a b`.
    pub all: SymbolExpr,
    /// Scale pairs with `|k1 - k2| <= gap`.
    pub diag: SymbolExpr,
    /// `k2 - k1 > gap`: the first factor far below the second.
    pub first_below: SymbolExpr,
    /// `k1 - k2 > gap`.
    pub second_below: SymbolExpr,
}

fn require_sum(t: TensorInput<'_>) -> Result<&ScaleSum> {
    match t {
        TensorInput::Sum(s) => Ok(s),
        TensorInput::Unit => Err(Error::InvalidInput(
            "scale-case split needs scale-sum factors on both sides".into(),
        )),
    }
}

fn pad_atom(atom: &ScaleAtom, map: &[usize], scale: ScaleVar) -> ScaleAtom {
    let mut coeffs = vec![0.0; 3];
    for (local, &c) in atom.coeffs.iter().enumerate() {
        coeffs[map[local]] = c;
    }
    ScaleAtom {
        shape: atom.shape,
        scale,
        shift: atom.shift,
        coeffs,
        form: atom.form.clone(),
    }
}

/// Splits the product of two scale-sum families into near-diagonal and the
/// two wide-gap scale cases. The three parts' term multisets partition the
/// merged sum's, so their exact sums reproduce the product with error
/// exactly zero.
pub fn split_scale_cases(
    a: &SymbolExpr,
    b: &SymbolExpr,
    form: FlagForm,
    gap: i32,
) -> Result<ScaleCases> {
    if gap < 0 {
        return Err(Error::InvalidInput("scale gap must be nonnegative".into()));
    }
    if a.arity() != 2 {
        return Err(Error::InvalidInput("first flag factor has arity 2".into()));
    }
    let b_arity = match form {
        FlagForm::Tab => 2,
        FlagForm::Nls => 3,
    };
    if b.arity() != b_arity {
        return Err(Error::InvalidInput(format!(
            "second flag factor has arity {b_arity} for this form"
        )));
    }
    let sa = require_sum(extract_tensor(a)?)?;
    let sb = require_sum(extract_tensor(b)?)?;
    let a_map = [0usize, 1];
    let b_map: &[usize] = match form {
        FlagForm::Tab => &[1, 2],
        FlagForm::Nls => &[0, 1, 2],
    };
    let mut products = Vec::with_capacity(sa.products.len() * sb.products.len());
    for pa in &sa.products {
        for pb in &sb.products {
            let mut merged: Vec<ScaleAtom> = pa
                .iter()
                .map(|atom| pad_atom(atom, &a_map, ScaleVar::K1))
                .collect();
            merged.extend(pb.iter().map(|atom| pad_atom(atom, b_map, ScaleVar::K2)));
            products.push(merged);
        }
    }
    let with_kind = |kind: PairKind| -> Result<SymbolExpr> {
        build_flag_symbol(
            3,
            vec![(
                vec![1, 2, 3],
                Factor::ScaleSum(ScaleSum {
                    k_lo: sa.k_lo,
                    k_hi: sa.k_hi,
                    second: Some(SecondIndex {
                        k_lo: sb.k_lo,
                        k_hi: sb.k_hi,
                        kind,
                        gap,
                    }),
                    products: products.clone(),
                }),
            )],
        )
    };
    Ok(ScaleCases {
        all: with_kind(PairKind::All)?,
        diag: with_kind(PairKind::Diag)?,
        first_below: with_kind(PairKind::FirstBelow)?,
        second_below: with_kind(PairKind::SecondBelow)?,
    })
}

/// One term of the Taylor reduction: derivative orders of the two possible
/// expansions, the scale gap it lives at, and the dyadic weight
/// `2^(-gap (l + l_tilde))` that bounds it.
#[derive(Debug, Clone)]
pub struct TaylorTerm {
    pub l: u32,
    pub l_tilde: u32,
    pub gap: i32,
    pub weight: f64,
    pub symbol: SymbolExpr,
}

struct CaseSum<'a> {
    sum: &'a ScaleSum,
    second: SecondIndex,
}

fn unwrap_first_below(case_symbol: &SymbolExpr) -> Result<CaseSum<'_>> {
    if case_symbol.arity() != 3 {
        return Err(Error::InvalidInput("case symbols have arity 3".into()));
    }
    let sum = match single_factor(case_symbol)? {
        Factor::ScaleSum(s) => s,
        _ => {
            return Err(Error::InvalidInput(
                "Taylor reduction needs a scale-sum case symbol".into(),
            ))
        }
    };
    let second = sum.second.ok_or_else(|| {
        Error::InvalidInput("Taylor reduction needs a two-index scale sum".into())
    })?;
    if second.kind != PairKind::FirstBelow {
        return Err(Error::InvalidInput(
            "Taylor reduction applies to the case with the first scale far below".into(),
        ));
    }
    Ok(CaseSum { sum, second })
}

/// Positions of the expandable ball atoms (scale index 2, plain, ball
/// shaped, reading one of the first two coordinates with unit weight) and
/// their monomial targets (the scale-index-1 atom on the complementary
/// coordinate) within one product.
fn expansion_sites(product: &[ScaleAtom]) -> Result<Vec<(usize, usize, usize)>> {
    let mut sites = Vec::new();
    for (pos, atom) in product.iter().enumerate() {
        if atom.scale != ScaleVar::K2
            || atom.form != AtomForm::Plain
            || atom.shape.kind != BumpKind::Phi
        {
            continue;
        }
        let Some((coord, w)) = one_hot(atom) else {
            continue;
        };
        if coord > 1 {
            continue;
        }
        if w != 1.0 {
            return Err(Error::InvalidInput(
                "expandable ball atoms must read a coordinate with unit weight".into(),
            ));
        }
        let partner = 1 - coord;
        let mut targets = product.iter().enumerate().filter(|(_, other)| {
            other.scale == ScaleVar::K1
                && other.form == AtomForm::Plain
                && one_hot(other).map(|(c, _)| c) == Some(partner)
        });
        let (target, target_atom) = targets.next().ok_or_else(|| {
            Error::InvalidInput(format!(
                "no small-scale atom on coordinate {partner} to carry the monomial"
            ))
        })?;
        if targets.next().is_some() {
            return Err(Error::InvalidInput(format!(
                "ambiguous monomial target on coordinate {partner}"
            )));
        }
        if one_hot(target_atom).expect("filtered one-coordinate atom").1 != 1.0 {
            return Err(Error::InvalidInput(
                "monomial targets must read their coordinate with unit weight".into(),
            ));
        }
        sites.push((pos, target, coord));
    }
    if sites.is_empty() {
        return Err(Error::InvalidInput(
            "case symbol has no expandable ball factor".into(),
        ));
    }
    if sites.len() > 2 {
        return Err(Error::InvalidInput(
            "more than two expandable ball factors".into(),
        ));
    }
    if sites.len() == 2 && sites[0].2 == sites[1].2 {
        return Err(Error::InvalidInput(
            "two expandable ball factors on the same coordinate".into(),
        ));
    }
    Ok(sites)
}

const SUM_BASE: [f64; 3] = [1.0, 1.0, 0.0];

fn deriv_atom(atom: &ScaleAtom, order: u32) -> ScaleAtom {
    ScaleAtom {
        shape: atom.shape,
        scale: atom.scale,
        shift: atom.shift,
        coeffs: SUM_BASE.to_vec(),
        form: AtomForm::DerivFactorial { order },
    }
}

fn monomial_atom(atom: &ScaleAtom, power: u32) -> ScaleAtom {
    ScaleAtom {
        form: AtomForm::Monomial { power },
        ..atom.clone()
    }
}

fn taylored_atom(atom: &ScaleAtom, order: u32, remainder: bool) -> ScaleAtom {
    ScaleAtom {
        shape: atom.shape,
        scale: atom.scale,
        shift: atom.shift,
        coeffs: atom.coeffs.clone(),
        form: if remainder {
            AtomForm::TaylorRemainder {
                order,
                base: SUM_BASE.to_vec(),
            }
        } else {
            AtomForm::TaylorPartial {
                order,
                base: SUM_BASE.to_vec(),
            }
        },
    }
}

fn case_with(
    case: &CaseSum<'_>,
    kind_gap: Option<i32>,
    products: Vec<Vec<ScaleAtom>>,
) -> Result<SymbolExpr> {
    let second = match kind_gap {
        Some(g) => SecondIndex {
            kind: PairKind::ExactGap,
            gap: g,
            ..case.second
        },
        None => case.second,
    };
    build_flag_symbol(
        3,
        vec![(
            vec![1, 2, 3],
            Factor::ScaleSum(ScaleSum {
                k_lo: case.sum.k_lo,
                k_hi: case.sum.k_hi,
                second: Some(second),
                products,
            }),
        )],
    )
}

/// Expands every scale-index-2 ball factor of the wide-gap case about the
/// frequency sum `xi1 + xi2` to order `m`, one term per derivative orders
/// and scale gap, plus one remainder symbol that restores the case
/// exactly. Orders beyond the tabulated profile derivatives are rejected.
pub fn taylor_reduce(case_symbol: &SymbolExpr, m: u32) -> Result<(Vec<TaylorTerm>, SymbolExpr)> {
    if m > 8 {
        return Err(Error::InvalidInput(format!(
            "Taylor order {m} exceeds the tabulated derivative order 8"
        )));
    }
    let case = unwrap_first_below(case_symbol)?;
    let sites: Vec<Vec<(usize, usize, usize)>> = case
        .sum
        .products
        .iter()
        .map(|p| expansion_sites(p))
        .collect::<Result<_>>()?;
    let site_count = sites[0].len();
    if sites.iter().any(|s| s.len() != site_count) {
        return Err(Error::InvalidInput(
            "products disagree on the number of expandable ball factors".into(),
        ));
    }
    let orders: Vec<(u32, u32)> = if site_count == 2 {
        (0..=m)
            .flat_map(|l| (0..=m).map(move |lt| (l, lt)))
            .collect()
    } else {
        (0..=m).map(|l| (l, 0)).collect()
    };

    let min_gap = case.second.gap + 1;
    let max_gap = case.second.k_hi - case.sum.k_lo;
    let mut terms = Vec::new();
    for gap in min_gap..=max_gap {
        for &(l, l_tilde) in &orders {
            let mut products = Vec::with_capacity(case.sum.products.len());
            for (product, psites) in case.sum.products.iter().zip(&sites) {
                let mut modified = product.clone();
                for &(pos, target, coord) in psites {
                    // expanding the ball on xi2 leaves the monomial in
                    // -xi1 (order l); the ball on xi1, in -xi2 (l_tilde)
                    let order = if site_count == 1 || coord == 1 { l } else { l_tilde };
                    modified[pos] = deriv_atom(&product[pos], order);
                    modified[target] = monomial_atom(&product[target], order);
                }
                products.push(modified);
            }
            terms.push(TaylorTerm {
                l,
                l_tilde,
                gap,
                weight: (-(gap as f64) * (l + l_tilde) as f64).exp2(),
                symbol: case_with(&case, Some(gap), products)?,
            });
        }
    }

    let mut rem_products = Vec::new();
    for (product, psites) in case.sum.products.iter().zip(&sites) {
        match psites.as_slice() {
            [(pos, _, _)] => {
                let mut p = product.clone();
                p[*pos] = taylored_atom(&product[*pos], m, true);
                rem_products.push(p);
            }
            [(pos1, _, _), (pos2, _, _)] => {
                let mut first = product.clone();
                first[*pos1] = taylored_atom(&product[*pos1], m, true);
                rem_products.push(first);
                let mut second = product.clone();
                second[*pos1] = taylored_atom(&product[*pos1], m, false);
                second[*pos2] = taylored_atom(&product[*pos2], m, true);
                rem_products.push(second);
            }
            _ => unreachable!("site count validated"),
        }
    }
    let remainder = case_with(&case, None, rem_products)?;
    Ok((terms, remainder))
}

/// Restricts a two-index scale-sum symbol to pairs at one exact gap
/// `k2 - k1`; used to examine the reduction gap by gap.
pub fn restrict_gap(symbol: &SymbolExpr, gap: i32) -> Result<SymbolExpr> {
    let sum = match single_factor(symbol)? {
        Factor::ScaleSum(s) => s,
        _ => {
            return Err(Error::InvalidInput(
                "gap restriction needs a scale-sum symbol".into(),
            ))
        }
    };
    let second = sum
        .second
        .ok_or_else(|| Error::InvalidInput("gap restriction needs a two-index sum".into()))?;
    build_flag_symbol(
        symbol.arity(),
        vec![(
            symbol.factors()[0].subset.clone(),
            Factor::ScaleSum(ScaleSum {
                k_lo: sum.k_lo,
                k_hi: sum.k_hi,
                second: Some(SecondIndex {
                    kind: PairKind::ExactGap,
                    gap,
                    ..second
                }),
                products: sum.products.clone(),
            }),
        )],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactsum::exact_total;
    use crate::funcgen::{make_function, FunctionSpec};
    use crate::grid::Grid;
    use crate::multiplier::apply_multiplier;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn band(grid: Grid, seed: u64) -> SampledFunction {
        make_function(
            &FunctionSpec::RandomBandlimited { j_min: -5, j_max: 5 },
            grid,
            seed,
        )
        .unwrap()
    }

    fn unit(arity: usize) -> SymbolExpr {
        build_flag_symbol(arity, vec![((1..=arity).collect(), Factor::one())]).unwrap()
    }

    fn random_triples(count: usize, span: f64, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                [
                    rng.gen_range(-span..span),
                    rng.gen_range(-span..span),
                    rng.gen_range(-span..span),
                ]
            })
            .collect()
    }

    #[test]
    fn unit_first_factor_multiplies_pointwise() {
        let g = Grid::new(64, 1.0).unwrap();
        let (_, b) = standard_tab_symbols(0, 2).unwrap();
        let f1 = band(g, 1);
        let f2 = band(g, 2);
        let f3 = band(g, 3);
        let out = apply_flag_tab(&unit(2), &b, &f1, &f2, &f3).unwrap();
        // b alone, applied to (f2, f3) on its own coordinates
        let sum = single_factor(&b).unwrap();
        let sum = match sum {
            Factor::ScaleSum(s) => s,
            _ => unreachable!(),
        };
        let mut expect = SampledFunction::zero(g);
        for k in sum.k_lo..=sum.k_hi {
            let u = apply_frequency_symbol(&f2, |xi| sum.products[0][0].shape.hat(k, xi)).unwrap();
            let v = apply_frequency_symbol(&f3, |xi| sum.products[0][1].shape.hat(k, xi)).unwrap();
            expect
                .accumulate(&f1.pointwise_mul(&u.pointwise_mul(&v).unwrap()).unwrap())
                .unwrap();
        }
        let scale = expect.max_abs().max(1e-30);
        assert!(out.sub(&expect).unwrap().max_abs() / scale < 1e-12);
    }

    #[test]
    fn unit_second_factor_multiplies_pointwise() {
        let g = Grid::new(64, 1.0).unwrap();
        let (a, _) = standard_tab_symbols(0, 2).unwrap();
        let f1 = band(g, 4);
        let f2 = band(g, 5);
        let f3 = band(g, 6);
        let out = apply_flag_tab(&a, &unit(2), &f1, &f2, &f3).unwrap();
        let sum = match single_factor(&a).unwrap() {
            Factor::ScaleSum(s) => s,
            _ => unreachable!(),
        };
        let mut pair = SampledFunction::zero(g);
        for k in sum.k_lo..=sum.k_hi {
            let u = apply_frequency_symbol(&f1, |xi| sum.products[0][0].shape.hat(k, xi)).unwrap();
            let v = apply_frequency_symbol(&f2, |xi| sum.products[0][1].shape.hat(k, xi)).unwrap();
            pair.accumulate(&u.pointwise_mul(&v).unwrap()).unwrap();
        }
        let expect = pair.pointwise_mul(&f3).unwrap();
        let scale = expect.max_abs().max(1e-30);
        assert!(out.sub(&expect).unwrap().max_abs() / scale < 1e-12);
    }

    #[test]
    fn unit_second_factor_nls_gives_the_pair_operator() {
        let g = Grid::new(64, 1.0).unwrap();
        let (a, _) = standard_nls_symbols(0, 2).unwrap();
        let f1 = band(g, 7);
        let f2 = band(g, 8);
        let f3 = band(g, 9);
        let tab_way = apply_flag_tab(&a, &unit(2), &f1, &f2, &f3).unwrap();
        let nls_way = apply_flag_nls(&a, &unit(3), &f1, &f2, &f3).unwrap();
        assert!(nls_way.sub(&tab_way).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn two_factor_fast_path_matches_direct_summation() {
        let g = Grid::new(32, 1.0).unwrap();
        let (a, b) = standard_tab_symbols(0, 2).unwrap();
        let symbol = combined_tab_symbol(&a, &b).unwrap();
        for seed in [10u64, 20, 30] {
            let f1 = band(g, seed);
            let f2 = band(g, seed + 1);
            let f3 = band(g, seed + 2);
            let fast = apply_flag_tab(&a, &b, &f1, &f2, &f3).unwrap();
            let direct = apply_multiplier(&symbol, &[&f1, &f2, &f3]).unwrap();
            let scale = direct.max_abs().max(1e-30);
            assert!(
                fast.sub(&direct).unwrap().max_abs() / scale < 1e-9,
                "seed {seed}"
            );
        }
    }

    #[test]
    fn three_factor_fast_path_matches_direct_summation() {
        let g = Grid::new(32, 1.0).unwrap();
        let (a, b) = standard_nls_symbols(0, 2).unwrap();
        let symbol = combined_nls_symbol(&a, &b).unwrap();
        for seed in [40u64, 50, 60] {
            let f1 = band(g, seed);
            let f2 = band(g, seed + 1);
            let f3 = band(g, seed + 2);
            let fast = apply_flag_nls(&a, &b, &f1, &f2, &f3).unwrap();
            let direct = apply_multiplier(&symbol, &[&f1, &f2, &f3]).unwrap();
            let scale = direct.max_abs().max(1e-30);
            assert!(
                fast.sub(&direct).unwrap().max_abs() / scale < 1e-9,
                "seed {seed}"
            );
        }
    }

    #[test]
    fn scale_cases_partition_the_term_multiset() {
        for (form, (a, b)) in [
            (FlagForm::Tab, standard_tab_symbols(0, 5).unwrap()),
            (FlagForm::Nls, standard_nls_symbols(0, 5).unwrap()),
        ] {
            for gap in [1, 2] {
                let cases = split_scale_cases(&a, &b, form, gap).unwrap();
                for point in random_triples(50, 40.0, 99) {
                    let full = exact_total(cases.all.eval_terms(&point).unwrap());
                    let mut parts = cases.diag.eval_terms(&point).unwrap();
                    parts.extend(cases.first_below.eval_terms(&point).unwrap());
                    parts.extend(cases.second_below.eval_terms(&point).unwrap());
                    assert_eq!(full, exact_total(parts), "{form:?} gap {gap} {point:?}");
                }
            }
        }
    }

    #[test]
    fn merged_sum_evaluates_as_the_product_of_factors() {
        let (a, b) = standard_tab_symbols(0, 4).unwrap();
        let cases = split_scale_cases(&a, &b, FlagForm::Tab, 2).unwrap();
        for point in random_triples(50, 30.0, 5) {
            let merged = cases.all.eval_real(&point).unwrap();
            let product = a.eval_real(&point[..2]).unwrap()
                * b.eval_real(&point[1..]).unwrap();
            assert!((merged - product).abs() < 1e-12 * (1.0 + product.abs()));
        }
    }

    #[test]
    fn split_rejects_symbols_without_scale_structure() {
        let (a, b) = standard_tab_symbols(0, 3).unwrap();
        assert!(split_scale_cases(&unit(2), &b, FlagForm::Tab, 2).is_err());
        assert!(split_scale_cases(&a, &unit(2), FlagForm::Tab, 2).is_err());
        let tab_factor = build_flag_symbol(
            2,
            vec![(
                vec![1, 2],
                Factor::tabulate(2, -2, 2, 1.0, |_| 1.0).unwrap(),
            )],
        )
        .unwrap();
        assert!(split_scale_cases(&a, &tab_factor, FlagForm::Tab, 2).is_err());
    }

    #[test]
    fn wide_gap_second_case_dies_by_support_overlap() {
        // second factor's ball at k2 covers |xi| <= 2^(k2+1); the first
        // factor's annulus at k1 starts above 2^(k1-1): empty once
        // k1 - k2 >= 2, which the gap guarantees
        let (a, b) = standard_tab_symbols(0, 6).unwrap();
        let cases = split_scale_cases(&a, &b, FlagForm::Tab, 2).unwrap();
        for point in random_triples(200, 100.0, 7) {
            assert_eq!(cases.second_below.eval_real(&point).unwrap(), 0.0);
        }
        let psi = FamilyShape::plain(BumpKind::Psi);
        let curved = FamilyShape::new(BumpKind::Phi, ProfileKind::CurvedBump, 0).unwrap();
        for k1 in 2..=6 {
            for k2 in 0..=(k1 - 2) {
                for step in 1..400 {
                    let xi = step as f64 * 0.5;
                    assert_eq!(psi.hat(k1, xi) * curved.hat(k2, xi), 0.0, "{k1} {k2} {xi}");
                }
            }
        }
    }

    #[test]
    fn three_factor_wide_gap_second_case_is_impossible() {
        let (a, b) = standard_nls_symbols(0, 6).unwrap();
        for gap in [1, 2] {
            let cases = split_scale_cases(&a, &b, FlagForm::Nls, gap).unwrap();
            for point in random_triples(200, 100.0, 11) {
                assert_eq!(cases.second_below.eval_real(&point).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn taylor_terms_and_remainder_restore_the_case() {
        let (a, b) = standard_tab_symbols(0, 5).unwrap();
        let cases = split_scale_cases(&a, &b, FlagForm::Tab, 1).unwrap();
        for m in [0u32, 2] {
            let (terms, remainder) = taylor_reduce(&cases.first_below, m).unwrap();
            for point in random_triples(100, 40.0, 13 + m as u64) {
                let case_value = cases.first_below.eval_real(&point).unwrap();
                let mut rebuilt = remainder.eval_real(&point).unwrap();
                for t in &terms {
                    rebuilt += t.symbol.eval_real(&point).unwrap();
                }
                assert!(
                    (case_value - rebuilt).abs() < 1e-10,
                    "m={m} {point:?}: {case_value} vs {rebuilt}"
                );
            }
        }
    }

    #[test]
    fn three_factor_taylor_reduction_restores_the_case() {
        let (a, b) = standard_nls_symbols(0, 4).unwrap();
        let cases = split_scale_cases(&a, &b, FlagForm::Nls, 1).unwrap();
        let (terms, remainder) = taylor_reduce(&cases.first_below, 1).unwrap();
        // gaps 2..=4, orders (l, lt) in {0,1}^2
        assert_eq!(terms.len(), 3 * 4);
        for t in &terms {
            assert_eq!(t.weight, (-(t.gap as f64) * (t.l + t.l_tilde) as f64).exp2());
        }
        for point in random_triples(100, 30.0, 17) {
            let case_value = cases.first_below.eval_real(&point).unwrap();
            let mut rebuilt = remainder.eval_real(&point).unwrap();
            for t in &terms {
                rebuilt += t.symbol.eval_real(&point).unwrap();
            }
            assert!(
                (case_value - rebuilt).abs() < 1e-10,
                "{point:?}: {case_value} vs {rebuilt}"
            );
        }
    }

    #[test]
    fn order_zero_reduction_has_one_term_per_gap_with_flag_structure() {
        let (a, b) = standard_tab_symbols(0, 5).unwrap();
        let cases = split_scale_cases(&a, &b, FlagForm::Tab, 1).unwrap();
        let (terms, _) = taylor_reduce(&cases.first_below, 0).unwrap();
        // gaps 2..=5
        assert_eq!(terms.len(), 4);
        for t in &terms {
            assert_eq!((t.l, t.l_tilde), (0, 0));
            assert_eq!(t.weight, 1.0);
            // the expanded atom now reads xi1 + xi2 at the coarse scale
            let sum = match single_factor(&t.symbol).unwrap() {
                Factor::ScaleSum(s) => s,
                _ => unreachable!(),
            };
            let deriv = sum.products[0]
                .iter()
                .find(|atom| matches!(atom.form, AtomForm::DerivFactorial { .. }))
                .unwrap();
            assert_eq!(deriv.coeffs, vec![1.0, 1.0, 0.0]);
            assert_eq!(deriv.scale, ScaleVar::K2);
            assert_eq!(sum.second.unwrap().kind, PairKind::ExactGap);
        }
    }

    #[test]
    fn taylor_rejects_bad_inputs() {
        let (a, b) = standard_tab_symbols(0, 4).unwrap();
        let cases = split_scale_cases(&a, &b, FlagForm::Tab, 1).unwrap();
        assert!(taylor_reduce(&cases.first_below, 9).is_err());
        assert!(taylor_reduce(&cases.diag, 2).is_err());
        assert!(taylor_reduce(&unit(3), 2).is_err());
    }

    #[test]
    fn remainder_shrinks_as_the_gap_widens() {
        let (a, b) = standard_tab_symbols(0, 8).unwrap();
        let cases = split_scale_cases(&a, &b, FlagForm::Tab, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for m in [0u32, 2] {
            let (_, remainder) = taylor_reduce(&cases.first_below, m).unwrap();
            let mut sup_at = |gap: i32| -> f64 {
                let restricted = restrict_gap(&remainder, gap).unwrap();
                let mut sup = 0.0f64;
                for _ in 0..400 {
                    let k1 = rng.gen_range(0..=(8 - gap));
                    let scale1 = (k1 as f64).exp2();
                    let scale2 = ((k1 + gap) as f64).exp2();
                    let point = [
                        rng.gen_range(-2.0..2.0) * scale1,
                        rng.gen_range(-2.0..2.0) * scale2,
                        rng.gen_range(-2.0..2.0) * scale2,
                    ];
                    sup = sup.max(restricted.eval_real(&point).unwrap().abs());
                }
                sup
            };
            let near = sup_at(2);
            let far = sup_at(5);
            assert!(
                far <= near * (-(3.0) * (m as f64 + 1.0)).exp2() * 8.0,
                "m={m}: sup at gap 5 = {far:.3e}, at gap 2 = {near:.3e}"
            );
        }
    }
}
