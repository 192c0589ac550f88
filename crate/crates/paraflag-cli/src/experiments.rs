//! Experiment drivers behind the CLI subcommands.
//!
//! Each driver turns a validated config into per-trial rows. Trials run
//! concurrently; every trial derives its inputs from `(seed, trial)`
//! alone and rows are assembled in trial order afterwards, so the output
//! is identical however the work is scheduled.

use num_complex::Complex64;
use paraflag::{
    apply_flag_nls, apply_flag_tab, build_flag_symbol, check_size_energy, combined_tab_symbol,
    decompose_product, decompose_triple_product, forward_transform, fractional_derivative,
    inverse_transform, lambda_scan, lp_norm, make_function, paraproduct_pi, pure_mode,
    standard_nls_symbols, standard_tab_symbols, BumpFamily, BumpKind, CoefficientTree,
    DyadicInterval, Error, Factor, FunctionSpec, Grid, PiFamilies, Result, SampledFunction,
    ScanRow, Spectrum, SymbolExpr,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{
    AknsScanConfig, DecomposeConfig, Exponent, GrandLeibnitzConfig, KatoPonceConfig,
    ModelBoundConfig, NormSweepConfig, SweepOperator,
};
use crate::report::{fmt_float, max, median, Csv};

/// The three interpolation weights the model-bound experiment reports.
pub const MODEL_THETAS: [[f64; 3]; 3] = [
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
];

pub const NORM_SWEEP_HEADER: [&str; 3] = ["trial", "scale", "ratio"];

fn trial_seed(seed: u64, trial: u32, slot: u64) -> u64 {
    seed ^ (trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ slot.wrapping_mul(0xd1b5_4a32_d192_ed03)
}

fn random_band(grid: Grid, band: i64, seed: u64) -> Result<SampledFunction> {
    make_function(
        &FunctionSpec::RandomBandlimited {
            j_min: -band,
            j_max: band,
        },
        grid,
        seed,
    )
}

/// Spectral dilation by `2^rung`: coefficient at mode `j` moves to mode
/// `2^rung j`, sampling `f(2^rung x)`.
pub fn dilate(f: &SampledFunction, rung: u32) -> Result<SampledFunction> {
    if rung == 0 {
        return Ok(f.clone());
    }
    let spec = forward_transform(f)?;
    let grid = *f.grid();
    // The transform of a nominally band-limited signal carries rounding
    // dust at every mode; dust stays behind, substance must fit.
    let dust = 1e-12 * spec.max_abs();
    let mut out = Spectrum::zero(grid);
    for j in grid.modes() {
        let c = spec.coeff(j);
        let jj = j << rung;
        if jj < grid.mode_min() || jj > grid.mode_max() {
            if c.norm() > dust {
                return Err(Error::InvalidInput(format!(
                    "dilation rung {rung} pushes mode {j} to {jj}, outside the band"
                )));
            }
            continue;
        }
        out.set_coeff(jj, c);
    }
    inverse_transform(&out)
}

/// Runs `run(0..trials)` on a small thread pool and returns the results
/// in trial order.
pub fn parallel_trials<R, F>(trials: u32, run: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(u32) -> Result<R> + Sync,
{
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(trials.max(1) as usize)
        .min(8);
    if workers <= 1 {
        return (0..trials).map(run).collect();
    }
    let run = &run;
    let mut tagged: Vec<(u32, R)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers as u32)
            .map(|w| {
                scope.spawn(move || -> Result<Vec<(u32, R)>> {
                    (w..trials)
                        .step_by(workers)
                        .map(|t| Ok((t, run(t)?)))
                        .collect()
                })
            })
            .collect();
        let mut all = Vec::with_capacity(trials as usize);
        for h in handles {
            all.extend(h.join().expect("trial worker panicked")?);
        }
        Ok::<_, Error>(all)
    })?;
    tagged.sort_by_key(|(t, _)| *t);
    Ok(tagged.into_iter().map(|(_, r)| r).collect())
}

#[derive(Debug, Clone, Copy)]
pub struct TrialOutcome {
    pub trial: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub exploratory: bool,
}

#[derive(Debug, Clone)]
pub struct RatioReport {
    pub rows: Vec<TrialOutcome>,
    pub max_ratio: f64,
    pub median_ratio: f64,
}

impl RatioReport {
    fn new(rows: Vec<TrialOutcome>) -> Self {
        let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
        RatioReport {
            max_ratio: max(&ratios),
            median_ratio: median(&ratios),
            rows,
        }
    }

    pub fn csv(&self) -> Csv {
        let mut csv = Csv::new(&["trial", "lhs", "rhs", "ratio", "exploratory"]);
        for r in &self.rows {
            csv.push(vec![
                r.trial.to_string(),
                fmt_float(r.lhs),
                fmt_float(r.rhs),
                fmt_float(r.ratio),
                r.exploratory.to_string(),
            ]);
        }
        csv
    }

    pub fn stats(&self) -> serde_json::Value {
        json!({
            "trials": self.rows.len(),
            "max_ratio": self.max_ratio,
            "median_ratio": self.median_ratio,
        })
    }
}

fn ratio_of(lhs: f64, rhs: f64) -> Result<f64> {
    if rhs == 0.0 {
        if lhs == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::InternalCheck(format!(
            "majorant vanished against a nonzero left side {lhs}"
        )));
    }
    Ok(lhs / rhs)
}

/// One Kato-Ponce comparison: `lhs = |D^a(fg)|_p` against the two-term
/// majorant with inner exponents `(p1, q1, p2, q2)`.
pub fn kato_ponce_ratio(
    f: &SampledFunction,
    g: &SampledFunction,
    alpha: f64,
    p: Exponent,
    inner: [Exponent; 4],
) -> Result<(f64, f64, f64)> {
    let product = f.pointwise_mul(g)?;
    let lhs = lp_norm(&fractional_derivative(&product, alpha)?, p.value())?;
    let rhs = lp_norm(&fractional_derivative(f, alpha)?, inner[0].value())?
        * lp_norm(g, inner[1].value())?
        + lp_norm(f, inner[2].value())? * lp_norm(&fractional_derivative(g, alpha)?, inner[3].value())?;
    let ratio = ratio_of(lhs, rhs)?;
    Ok((lhs, rhs, ratio))
}

pub fn run_kato_ponce(cfg: &KatoPonceConfig) -> Result<RatioReport> {
    let check = cfg.validate()?;
    let grid = cfg.grid.to_grid()?;
    let rows = parallel_trials(cfg.trials, |t| {
        let f = dilate(&random_band(grid, cfg.band, trial_seed(cfg.seed, t, 0))?, cfg.rung)?;
        let g = dilate(&random_band(grid, cfg.band, trial_seed(cfg.seed, t, 1))?, cfg.rung)?;
        let (lhs, rhs, ratio) =
            kato_ponce_ratio(&f, &g, cfg.alpha, cfg.p, [cfg.p1, cfg.q1, cfg.p2, cfg.q2])?;
        Ok(TrialOutcome {
            trial: t,
            lhs,
            rhs,
            ratio,
            exploratory: check.exploratory,
        })
    })?;
    Ok(RatioReport::new(rows))
}

/// One grand-Leibnitz comparison: `lhs = |D^a(D^b(fg) h)|_p` against the
/// four-term majorant.
pub fn grand_leibnitz_ratio(
    f: &SampledFunction,
    g: &SampledFunction,
    h: &SampledFunction,
    alpha: f64,
    beta: f64,
    p: Exponent,
    terms: [[Exponent; 3]; 4],
) -> Result<(f64, f64, f64)> {
    let inner = fractional_derivative(&f.pointwise_mul(g)?, beta)?;
    let lhs = lp_norm(
        &fractional_derivative(&inner.pointwise_mul(h)?, alpha)?,
        p.value(),
    )?;
    let ab = alpha + beta;
    let t1 = lp_norm(&fractional_derivative(f, ab)?, terms[0][0].value())?
        * lp_norm(g, terms[0][1].value())?
        * lp_norm(h, terms[0][2].value())?;
    let t2 = lp_norm(f, terms[1][0].value())?
        * lp_norm(&fractional_derivative(g, ab)?, terms[1][1].value())?
        * lp_norm(h, terms[1][2].value())?;
    let t3 = lp_norm(&fractional_derivative(f, beta)?, terms[2][0].value())?
        * lp_norm(g, terms[2][1].value())?
        * lp_norm(&fractional_derivative(h, alpha)?, terms[2][2].value())?;
    let t4 = lp_norm(f, terms[3][0].value())?
        * lp_norm(&fractional_derivative(g, beta)?, terms[3][1].value())?
        * lp_norm(&fractional_derivative(h, alpha)?, terms[3][2].value())?;
    let rhs = t1 + t2 + t3 + t4;
    let ratio = ratio_of(lhs, rhs)?;
    Ok((lhs, rhs, ratio))
}

pub fn run_grand_leibnitz(cfg: &GrandLeibnitzConfig) -> Result<RatioReport> {
    let check = cfg.validate()?;
    let grid = cfg.grid.to_grid()?;
    let terms = cfg.term_exponents();
    let rows = parallel_trials(cfg.trials, |t| {
        let f = dilate(&random_band(grid, cfg.band, trial_seed(cfg.seed, t, 0))?, cfg.rung)?;
        let g = dilate(&random_band(grid, cfg.band, trial_seed(cfg.seed, t, 1))?, cfg.rung)?;
        let h = dilate(&random_band(grid, cfg.band, trial_seed(cfg.seed, t, 2))?, cfg.rung)?;
        let (lhs, rhs, ratio) =
            grand_leibnitz_ratio(&f, &g, &h, cfg.alpha, cfg.beta, cfg.p, terms)?;
        Ok(TrialOutcome {
            trial: t,
            lhs,
            rhs,
            ratio,
            exploratory: check.exploratory,
        })
    })?;
    Ok(RatioReport::new(rows))
}

#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub trial: u32,
    pub rung: u32,
    pub ratio: f64,
    pub exploratory: bool,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Max ratio per dilation rung, index `s = 0..=rungs`.
    pub max_per_rung: Vec<f64>,
    pub exploratory: bool,
}

impl SweepReport {
    pub fn csv(&self) -> Csv {
        let mut csv = if self.exploratory {
            Csv::new(&["trial", "scale", "ratio", "exploratory"])
        } else {
            Csv::new(&NORM_SWEEP_HEADER)
        };
        for r in &self.rows {
            let mut cells = vec![r.trial.to_string(), r.rung.to_string(), fmt_float(r.ratio)];
            if self.exploratory {
                cells.push(r.exploratory.to_string());
            }
            csv.push(cells);
        }
        csv
    }

    pub fn stats(&self) -> serde_json::Value {
        json!({
            "rows": self.rows.len(),
            "max_ratio_per_rung": self.max_per_rung,
            "max_ratio": max(&self.max_per_rung),
        })
    }
}

enum SweepOp {
    Tab(SymbolExpr, SymbolExpr),
    Nls(SymbolExpr, SymbolExpr),
    Paraproduct(PiFamilies),
}

impl SweepOp {
    fn apply(&self, fs: &[SampledFunction]) -> Result<SampledFunction> {
        match self {
            SweepOp::Tab(a, b) => apply_flag_tab(a, b, &fs[0], &fs[1], &fs[2]),
            SweepOp::Nls(a, b) => apply_flag_nls(a, b, &fs[0], &fs[1], &fs[2]),
            SweepOp::Paraproduct(fams) => paraproduct_pi(&fs[0], &fs[1], fams),
        }
    }
}

pub fn run_norm_sweep(cfg: &NormSweepConfig) -> Result<SweepReport> {
    let check = cfg.validate()?;
    let grid = cfg.grid.to_grid()?;
    let op = match cfg.operator {
        SweepOperator::Tab => {
            let (a, b) = standard_tab_symbols(cfg.k_lo, cfg.k_hi)?;
            SweepOp::Tab(a, b)
        }
        SweepOperator::Nls => {
            let (a, b) = standard_nls_symbols(cfg.k_lo, cfg.k_hi)?;
            SweepOp::Nls(a, b)
        }
        SweepOperator::Paraproduct => {
            SweepOp::Paraproduct(PiFamilies::standard(&grid, cfg.k_lo, cfg.k_hi)?)
        }
    };
    let arity = cfg.operator.arity();
    let op = &op;
    let per_trial = parallel_trials(cfg.trials, move |t| {
        let mut rows = Vec::with_capacity(cfg.rungs as usize + 1);
        for rung in 0..=cfg.rungs {
            let fs: Vec<SampledFunction> = (0..arity)
                .map(|slot| {
                    dilate(
                        &random_band(grid, cfg.band, trial_seed(cfg.seed, t, slot as u64))?,
                        rung,
                    )
                })
                .collect::<Result<_>>()?;
            let image = op.apply(&fs)?;
            let num = lp_norm(&image, cfg.p.value())?;
            let mut den = 1.0;
            for (f, e) in fs.iter().zip(&cfg.inputs) {
                den *= lp_norm(f, e.value())?;
            }
            rows.push(SweepRow {
                trial: t,
                rung,
                ratio: ratio_of(num, den)?,
                exploratory: check.exploratory,
            });
        }
        Ok(rows)
    })?;
    let rows: Vec<SweepRow> = per_trial.into_iter().flatten().collect();
    let max_per_rung = (0..=cfg.rungs)
        .map(|s| {
            max(&rows
                .iter()
                .filter(|r| r.rung == s)
                .map(|r| r.ratio)
                .collect::<Vec<_>>())
        })
        .collect();
    Ok(SweepReport {
        rows,
        max_per_rung,
        exploratory: check.exploratory,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ModelRow {
    pub trial: u32,
    pub size: usize,
    pub theta_index: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct ModelReport {
    pub rows: Vec<ModelRow>,
}

impl ModelReport {
    pub fn csv(&self) -> Csv {
        let mut csv = Csv::new(&["trial", "size", "theta_index", "ratio"]);
        for r in &self.rows {
            csv.push(vec![
                r.trial.to_string(),
                r.size.to_string(),
                r.theta_index.to_string(),
                fmt_float(r.ratio),
            ]);
        }
        csv
    }

    pub fn max_ratio(&self, size: usize, theta_index: usize) -> f64 {
        max(&self
            .rows
            .iter()
            .filter(|r| r.size == size && r.theta_index == theta_index)
            .map(|r| r.ratio)
            .collect::<Vec<_>>())
    }

    pub fn stats(&self, cfg: &ModelBoundConfig) -> serde_json::Value {
        let per: Vec<serde_json::Value> = cfg
            .sizes
            .iter()
            .flat_map(|&size| {
                MODEL_THETAS.iter().enumerate().map(move |(ti, theta)| {
                    json!({
                        "size": size,
                        "theta": theta,
                        "max_ratio": self.max_ratio(size, ti),
                    })
                })
            })
            .collect();
        json!({ "rows": self.rows.len(), "max_ratio_by_case": per })
    }
}

/// A collection of distinct dyadic intervals with scales up to
/// `max_scale`, in draw order.
fn random_collection(
    rng: &mut ChaCha8Rng,
    count: usize,
    max_scale: u32,
) -> Result<Vec<DyadicInterval>> {
    let mut out: Vec<DyadicInterval> = Vec::with_capacity(count);
    while out.len() < count {
        let k = rng.gen_range(0..=max_scale);
        let n = rng.gen_range(0..(1u64 << k));
        let j = DyadicInterval::new(k, n)?;
        if !out.contains(&j) {
            out.push(j);
        }
    }
    Ok(out)
}

fn random_coefficient(rng: &mut ChaCha8Rng) -> Complex64 {
    let mag = rng.gen_range(-3.0..3.0f64).exp2();
    Complex64::new(
        rng.gen_range(-1.0..1.0f64) * mag,
        rng.gen_range(-1.0..1.0f64) * mag,
    )
}

/// The discrete trilinear form `sum_J |J|^(-1/2) a1_J a2_J a3_J` of three
/// trees sharing the collection `js`.
pub fn tree_form_value(
    js: &[DyadicInterval],
    trees: [&CoefficientTree; 3],
    period: f64,
) -> Complex64 {
    let mut lambda = Complex64::new(0.0, 0.0);
    for j in js {
        let a1 = trees[0].get(j).unwrap_or_default();
        let a2 = trees[1].get(j).unwrap_or_default();
        let a3 = trees[2].get(j).unwrap_or_default();
        lambda += a1 * a2 * a3 / j.length(period).sqrt();
    }
    lambda
}

pub fn run_model_bound(cfg: &ModelBoundConfig) -> Result<ModelReport> {
    cfg.validate()?;
    let tag = cfg.tag_kind()?;
    let sizes = cfg.sizes.clone();
    let per_trial = parallel_trials(cfg.trials, move |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, t, 7));
        let mut rows = Vec::with_capacity(sizes.len() * MODEL_THETAS.len());
        for &size in &sizes {
            let js = random_collection(&mut rng, size, cfg.max_scale)?;
            let mut trees = Vec::with_capacity(3);
            for _ in 0..3 {
                let mut tree = CoefficientTree::new(tag, cfg.period)?;
                for &j in &js {
                    tree.insert(j, random_coefficient(&mut rng))?;
                }
                trees.push(tree);
            }
            let lambda = tree_form_value(&js, [&trees[0], &trees[1], &trees[2]], cfg.period);
            for (ti, &theta) in MODEL_THETAS.iter().enumerate() {
                let ratio =
                    check_size_energy(lambda, [&trees[0], &trees[1], &trees[2]], theta)?;
                rows.push(ModelRow {
                    trial: t,
                    size,
                    theta_index: ti,
                    ratio,
                });
            }
        }
        Ok(rows)
    })?;
    Ok(ModelReport {
        rows: per_trial.into_iter().flatten().collect(),
    })
}

pub fn run_akns_scan(cfg: &AknsScanConfig) -> Result<Vec<ScanRow>> {
    cfg.validate()?;
    let u0: Vec<Complex64> = cfg
        .u0
        .iter()
        .map(|[re, im]| Complex64::new(*re, *im))
        .collect();
    lambda_scan(&cfg.system, &cfg.lambdas, &u0, cfg.step)
}

pub fn akns_csv(rows: &[ScanRow]) -> Csv {
    let mut csv = Csv::new(&["lambda", "component", "sup_norm"]);
    for r in rows {
        csv.push(vec![
            fmt_float(r.lambda),
            r.component.to_string(),
            fmt_float(r.sup_norm),
        ]);
    }
    csv
}

#[derive(Debug, Clone)]
pub struct DecomposeRow {
    pub trial: u32,
    pub quantity: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct DecomposeReport {
    pub rows: Vec<DecomposeRow>,
    pub max_product_residual: f64,
    pub max_triple_residual: f64,
}

impl DecomposeReport {
    pub fn csv(&self) -> Csv {
        let mut csv = Csv::new(&["trial", "quantity", "value"]);
        for r in &self.rows {
            csv.push(vec![
                r.trial.to_string(),
                r.quantity.to_string(),
                fmt_float(r.value),
            ]);
        }
        csv
    }

    pub fn stats(&self) -> serde_json::Value {
        json!({
            "rows": self.rows.len(),
            "max_product_residual": self.max_product_residual,
            "max_triple_residual": self.max_triple_residual,
        })
    }
}

fn sup_residual(truth: &SampledFunction, approx: &SampledFunction) -> Result<f64> {
    let scale = truth.max_abs().max(1e-300);
    Ok(truth.sub(approx)?.max_abs() / scale)
}

pub fn run_decompose(cfg: &DecomposeConfig) -> Result<DecomposeReport> {
    cfg.validate()?;
    let grid = cfg.grid.to_grid()?;
    let psi = BumpFamily::build(BumpKind::Psi, cfg.k_lo, cfg.k_hi, &grid)?;
    let fams = PiFamilies::standard(&grid, cfg.k_lo, cfg.k_hi)?;
    let psi = &psi;
    let fams = &fams;
    let per_trial = parallel_trials(cfg.trials, move |t| {
        let f = random_band(grid, cfg.band, trial_seed(cfg.seed, t, 0))?;
        let g = random_band(grid, cfg.band, trial_seed(cfg.seed, t, 1))?;
        let h = random_band(grid, cfg.band, trial_seed(cfg.seed, t, 2))?;

        let product = f.pointwise_mul(&g)?;
        let parts = decompose_product(&f, &g, psi, cfg.gap)?;
        let two_total = parts.total()?;
        // The triple split decomposes the paraproduct of the first two
        // factors times the third.
        let triple_truth = paraproduct_pi(&f, &g, fams)?.pointwise_mul(&h)?;
        let triple = decompose_triple_product(&f, &g, &h, fams, cfg.gap)?;
        let triple_total = triple.a.add(&triple.b)?.add(&triple.c)?;

        Ok(vec![
            DecomposeRow {
                trial: t,
                quantity: "product_residual",
                value: sup_residual(&product, &two_total)?,
            },
            DecomposeRow {
                trial: t,
                quantity: "diag_sup",
                value: parts.diag.max_abs(),
            },
            DecomposeRow {
                trial: t,
                quantity: "low_high_sup",
                value: parts.low_high.max_abs(),
            },
            DecomposeRow {
                trial: t,
                quantity: "high_low_sup",
                value: parts.high_low.max_abs(),
            },
            DecomposeRow {
                trial: t,
                quantity: "triple_residual",
                value: sup_residual(&triple_truth, &triple_total)?,
            },
            DecomposeRow {
                trial: t,
                quantity: "coarse_sup",
                value: triple.a.max_abs(),
            },
            DecomposeRow {
                trial: t,
                quantity: "diagonal_sup",
                value: triple.b.max_abs(),
            },
            DecomposeRow {
                trial: t,
                quantity: "flag_sup",
                value: triple.c.max_abs(),
            },
        ])
    })?;
    let rows: Vec<DecomposeRow> = per_trial.into_iter().flatten().collect();
    let residual_max = |name: &str| {
        max(&rows
            .iter()
            .filter(|r| r.quantity == name)
            .map(|r| r.value)
            .collect::<Vec<_>>())
    };
    Ok(DecomposeReport {
        max_product_residual: residual_max("product_residual"),
        max_triple_residual: residual_max("triple_residual"),
        rows,
    })
}

fn constant_one(grid: Grid) -> SampledFunction {
    SampledFunction::from_fn(grid, |_| Complex64::new(1.0, 0.0)).expect("finite constant")
}

/// The closed-form checks: identities that hold exactly (or to stated
/// slack) whatever the random inputs. Any failure is an internal error.
pub fn self_test(quiet: bool) -> Result<()> {
    let pass = |name: &str, ok: bool, detail: String| -> Result<()> {
        if !quiet {
            println!("self-test {name}: {} ({detail})", if ok { "ok" } else { "FAIL" });
        }
        if ok {
            Ok(())
        } else {
            Err(Error::InternalCheck(format!("self-test {name}: {detail}")))
        }
    };
    let grid = Grid::new(64, 1.0)?;
    let two = Exponent::new(2.0)?;
    let inf = Exponent::infinity();

    // Doubled-term Kato-Ponce at order zero: both majorant terms coincide,
    // so the ratio is exactly one half by Cauchy-Schwarz with equality.
    let f = random_band(grid, 8, 41)?;
    let (_, _, ratio) = kato_ponce_ratio(&f, &f, 0.0, two, [
        Exponent::new(4.0)?,
        Exponent::new(4.0)?,
        Exponent::new(4.0)?,
        Exponent::new(4.0)?,
    ])?;
    pass(
        "kato_doubled_term",
        ratio <= 0.5 + 1e-12,
        format!("ratio {ratio}, bound 0.5"),
    )?;

    // Unit second factor: the derivative of a constant vanishes, the
    // first majorant term is the left side itself.
    let g = constant_one(grid);
    let (_, _, ratio) = kato_ponce_ratio(&f, &g, 0.5, two, [two, inf, two, inf])?;
    pass(
        "kato_unit_factor",
        (ratio - 1.0).abs() <= 1e-12,
        format!("ratio {ratio}, expected 1"),
    )?;

    // Matched-exponent trilinear Holder at derivative order zero.
    let three = Exponent::new(3.0)?;
    let one = Exponent::new(1.0)?;
    let g = random_band(grid, 8, 42)?;
    let h = random_band(grid, 8, 43)?;
    let matched = [[three; 3]; 4];
    let (_, _, ratio) = grand_leibnitz_ratio(&f, &g, &h, 0.0, 0.0, one, matched)?;
    pass(
        "grand_matched_holder",
        ratio <=  1.0 + 1e-12,
        format!("ratio {ratio}, bound 1"),
    )?;

    // Unit third factor degenerates the grand rule to Kato-Ponce at the
    // combined order.
    let ones = constant_one(grid);
    let degenerate = [[two, two, inf]; 4];
    let (_, _, gl) = grand_leibnitz_ratio(&f, &g, &ones, 0.5, 0.5, one, degenerate)?;
    let (_, _, kp) = kato_ponce_ratio(&f, &g, 1.0, one, [two, two, two, two])?;
    pass(
        "grand_unit_third_degenerates",
        (gl - kp).abs() <= 1e-12 * kp.max(1.0),
        format!("grand {gl} vs two-term {kp}"),
    )?;

    // Unit flag symbol: the operator is the pointwise product, bounded by
    // Holder at matched exponents.
    let unit = build_flag_symbol(2, vec![(vec![1, 2], Factor::one())])?;
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let f1 = random_band(grid, 8, 100 + seed)?;
        let f2 = random_band(grid, 8, 200 + seed)?;
        let f3 = random_band(grid, 8, 300 + seed)?;
        let image = apply_flag_tab(&unit, &unit, &f1, &f2, &f3)?;
        let den = lp_norm(&f1, 3.0)? * lp_norm(&f2, 3.0)? * lp_norm(&f3, 3.0)?;
        worst = worst.max(ratio_of(lp_norm(&image, 1.0)?, den)?);
    }
    pass(
        "sweep_unit_symbol_holder",
        worst <= 1.0 + 1e-12,
        format!("max ratio {worst}, bound 1"),
    )?;

    // Single-mode inputs: the sweep ratio is the symbol magnitude at the
    // mode triple.
    let (a, b) = standard_tab_symbols(0, 2)?;
    let combined = combined_tab_symbol(&a, &b)?;
    let amp = Complex64::new(0.7, -0.2);
    let f1 = pure_mode(grid, 1, amp)?;
    let f2 = pure_mode(grid, 3, amp)?;
    let f3 = pure_mode(grid, 2, amp)?;
    let image = apply_flag_tab(&a, &b, &f1, &f2, &f3)?;
    let den = lp_norm(&f1, 3.0)? * lp_norm(&f2, 3.0)? * lp_norm(&f3, 3.0)?;
    let ratio = ratio_of(lp_norm(&image, 1.0)?, den)?;
    let predicted = combined.eval_real(&[1.0, 3.0, 2.0])?.abs();
    pass(
        "sweep_single_mode_closed_form",
        predicted > 0.01 && (ratio - predicted).abs() <= 1e-10 * predicted.max(1.0),
        format!("ratio {ratio} vs symbol magnitude {predicted}"),
    )?;

    // Empty trees carry a zero form value, ratio exactly zero.
    let empty = CoefficientTree::new(BumpKind::Phi, 1.0)?;
    let ratio = check_size_energy(
        Complex64::new(0.0, 0.0),
        [&empty, &empty, &empty],
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    )?;
    pass(
        "model_empty_trees",
        ratio == 0.0,
        format!("ratio {ratio}, expected 0"),
    )?;

    // A single shared interval makes the interpolated bound an identity.
    let j = DyadicInterval::new(2, 1)?;
    let coeffs = [
        Complex64::new(0.3, -0.4),
        Complex64::new(-1.2, 0.1),
        Complex64::new(0.05, 0.95),
    ];
    let mut singles = Vec::with_capacity(3);
    for c in coeffs {
        let mut tree = CoefficientTree::new(BumpKind::Phi, 1.0)?;
        tree.insert(j, c)?;
        singles.push(tree);
    }
    let lambda = tree_form_value(&[j], [&singles[0], &singles[1], &singles[2]], 1.0);
    let ratio = check_size_energy(
        lambda,
        [&singles[0], &singles[1], &singles[2]],
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    )?;
    pass(
        "model_single_interval",
        (ratio - 1.0).abs() <= 1e-10,
        format!("ratio {ratio}, expected 1"),
    )?;

    // Emission format: 17 significant digits, reparsing restores the bits.
    let x = 2.0 / 3.0;
    let reparsed: f64 = fmt_float(x).parse().unwrap_or(f64::NAN);
    pass(
        "csv_float_format",
        fmt_float(1.0) == "1.0000000000000000e0" && reparsed == x,
        format!("1.0 prints as {}", fmt_float(1.0)),
    )?;

    Ok(())
}
