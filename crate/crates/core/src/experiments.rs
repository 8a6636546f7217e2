//! Config-driven experiment harness: recovery curves over a sample-size
//! control parameter and head-to-head comparisons with the convex baselines.
//! Output is a deterministic CSV (trial rows in (cell, trial, method) order,
//! followed by per-cell aggregates).

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{self, BaselineParams, Method};
use crate::exact::{candidate_count, solve_exact};
use crate::generators::{generate, ModelSpec};
use crate::instance::{metrics, objective, top_sigma, MetricsRow, SparseSignVector, ZERO_TOL};
use crate::linalg::Vector;
use crate::rng::SplitMix64;
use crate::sdp::{extract_rank_one, solve_sdp, PolytopeMethod, SolverParams, Status};
use crate::{Result, SilsError};

pub const CSV_COLUMNS: &str =
    "model,n,d,sigma,rho,c,trial,method,recovered_any,recovered_truth,nonzeros,tpr,pred_err,succ_rate,objective,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Recovery,
    Comparison,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MethodKind {
    Sdp,
    Lasso,
    Dantzig,
    Exact,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Sdp => "sdp",
            MethodKind::Lasso => "lasso",
            MethodKind::Dantzig => "dantzig",
            MethodKind::Exact => "exact",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "sdp" => MethodKind::Sdp,
            "lasso" => MethodKind::Lasso,
            "dantzig" => MethodKind::Dantzig,
            "exact" => MethodKind::Exact,
            _ => return None,
        })
    }
}

/// How Lasso / Dantzig parameters are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRule {
    /// k-fold cross-validation over the default grids.
    Cv,
    /// λ = 2√(ln d/n), η = 2ϱ(5/4 + √ln d).
    Paper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: u8,
    pub d: Vec<usize>,
    pub sigma: Vec<usize>,
    pub rho: Vec<f64>,
    /// Control parameters; n follows the model's sample-size rule.
    pub c: Vec<f64>,
    /// Explicit sample sizes (alternative to `c`).
    pub n: Vec<usize>,
    pub trials: usize,
    pub methods: Vec<MethodKind>,
    pub seed: u64,
    pub output: Option<String>,
    pub param_rule: ParamRule,
    pub cv_folds: usize,
    pub model2_c: f64,
    pub model2_c_prime: f64,
    pub model2_c_dprime: f64,
    /// Brute-force verification runs when C(d,σ)·2^σ is at most this.
    pub exact_budget: f64,
    /// Record wall-clock times (makes the CSV non-reproducible).
    pub timing: bool,
    pub solver: SolverParams,
    pub baseline: BaselineParams,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, model: u8) -> Self {
        let spec = ModelSpec::new(2, 1, 2, 1, 0.0, 0);
        Self {
            kind,
            model,
            d: vec![40],
            sigma: vec![2],
            rho: vec![0.5],
            c: Vec::new(),
            n: Vec::new(),
            trials: 50,
            methods: match kind {
                ExperimentKind::Recovery => vec![MethodKind::Sdp],
                ExperimentKind::Comparison => vec![MethodKind::Sdp, MethodKind::Lasso, MethodKind::Dantzig],
            },
            seed: 0,
            output: None,
            param_rule: if model == 3 { ParamRule::Paper } else { ParamRule::Cv },
            cv_folds: 10,
            model2_c: spec.c,
            model2_c_prime: spec.c_prime,
            model2_c_dprime: spec.c_dprime,
            exact_budget: 1e6,
            timing: false,
            solver: SolverParams::default(),
            baseline: BaselineParams::default(),
        }
    }

    /// Flat `key = value` text; grid keys (`d`, `sigma`, `rho`, `c`, `n`,
    /// `methods`) may repeat or hold comma-separated lists. `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(SilsError::Parse { line: i + 1, msg: format!("expected key = value, got '{line}'") })?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let kind = match pairs.iter().rev().find(|(_, k, _)| k == "experiment").map(|(l, _, v)| (*l, v.as_str())) {
            None | Some((_, "recovery")) => ExperimentKind::Recovery,
            Some((_, "comparison")) => ExperimentKind::Comparison,
            Some((line, v)) => return Err(SilsError::Parse { line, msg: format!("unknown experiment '{v}'") }),
        };
        let model = match pairs.iter().rev().find(|(_, k, _)| k == "model") {
            None => 3,
            Some((line, _, v)) => v.parse().map_err(|_| SilsError::Parse { line: *line, msg: format!("bad model '{v}'") })?,
        };
        let mut cfg = Self::new(kind, model);
        let mut grids_seen: Vec<&str> = Vec::new();
        for (line, key, value) in &pairs {
            let line = *line;
            let bad = |what: &str| SilsError::Parse { line, msg: format!("bad {what} '{value}'") };
            let list = || value.split(',').map(str::trim).filter(|s| !s.is_empty());
            macro_rules! grid {
                ($field:ident, $ty:ty) => {{
                    if !grids_seen.contains(&stringify!($field)) {
                        cfg.$field.clear();
                        grids_seen.push(stringify!($field));
                    }
                    for item in list() {
                        cfg.$field.push(item.parse::<$ty>().map_err(|_| bad(stringify!($field)))?);
                    }
                }};
            }
            match key.as_str() {
                "experiment" | "model" => {}
                "d" => grid!(d, usize),
                "sigma" => grid!(sigma, usize),
                "rho" => grid!(rho, f64),
                "c" => grid!(c, f64),
                "n" => grid!(n, usize),
                "methods" | "method" => {
                    if !grids_seen.contains(&"methods") {
                        cfg.methods.clear();
                        grids_seen.push("methods");
                    }
                    for item in list() {
                        cfg.methods.push(MethodKind::parse(item).ok_or_else(|| bad("method"))?);
                    }
                }
                "trials" => cfg.trials = value.parse().map_err(|_| bad("trials"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "output" => cfg.output = Some(value.clone()),
                "param_rule" => {
                    cfg.param_rule = match value.as_str() {
                        "cv" => ParamRule::Cv,
                        "paper" => ParamRule::Paper,
                        _ => return Err(bad("param_rule")),
                    }
                }
                "cv_folds" => cfg.cv_folds = value.parse().map_err(|_| bad("cv_folds"))?,
                "model2_c" => cfg.model2_c = value.parse().map_err(|_| bad("model2_c"))?,
                "model2_c_prime" => cfg.model2_c_prime = value.parse().map_err(|_| bad("model2_c_prime"))?,
                "model2_c_dprime" => cfg.model2_c_dprime = value.parse().map_err(|_| bad("model2_c_dprime"))?,
                "exact_budget" => cfg.exact_budget = value.parse().map_err(|_| bad("exact_budget"))?,
                "timing" => cfg.timing = value.parse().map_err(|_| bad("timing"))?,
                "sdp_rho" => cfg.solver.rho = value.parse().map_err(|_| bad("sdp_rho"))?,
                "sdp_max_iter" => cfg.solver.max_iter = value.parse().map_err(|_| bad("sdp_max_iter"))?,
                "sdp_feas_tol" => cfg.solver.feas_tol = value.parse().map_err(|_| bad("sdp_feas_tol"))?,
                "sdp_opt_tol" => cfg.solver.opt_tol = value.parse().map_err(|_| bad("sdp_opt_tol"))?,
                "rank_one_tol" => cfg.solver.rank_one_tol = value.parse().map_err(|_| bad("rank_one_tol"))?,
                "polytope" => {
                    cfg.solver.polytope = match value.as_str() {
                        "exact" => PolytopeMethod::Exact,
                        "dykstra" => PolytopeMethod::Dykstra,
                        _ => return Err(bad("polytope")),
                    }
                }
                _ => return Err(SilsError::Parse { line, msg: format!("unknown key '{key}'") }),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(SilsError::InvalidParam(m.into()));
        if !(1..=3).contains(&self.model) {
            return err("model must be 1, 2 or 3");
        }
        if self.trials == 0 {
            return err("trials must be ≥ 1");
        }
        if self.methods.is_empty() {
            return err("method list is empty");
        }
        if self.d.is_empty() || self.sigma.is_empty() || self.rho.is_empty() {
            return err("d, sigma and rho grids must be non-empty");
        }
        match (self.c.is_empty(), self.n.is_empty()) {
            (true, true) => return err("give a control-parameter grid (c) or sample sizes (n)"),
            (false, false) => return err("give either c or n, not both"),
            _ => {}
        }
        if self.c.iter().any(|&c| !(c > 0.0)) || self.n.contains(&0) {
            return err("c must be positive and n ≥ 1");
        }
        if self.rho.iter().any(|&r| !(r >= 0.0)) {
            return err("rho must be ≥ 0");
        }
        if self.cv_folds < 2 {
            return err("cv_folds must be ≥ 2");
        }
        self.solver.validate()
    }

    /// Sample size for control parameter c: ⌈c·d·ln d⌉ (Model 1),
    /// ⌈c·ϱ²σ²·ln d⌉ (Model 2), ⌈c(σ² + ϱ²)·ln d⌉ (Model 3); at least 1.
    pub fn sample_size(&self, c: f64, d: usize, sigma: usize, rho: f64) -> usize {
        let ln_d = (d as f64).ln();
        let s = sigma as f64;
        let raw = match self.model {
            1 => c * d as f64 * ln_d,
            2 => c * rho * rho * s * s * ln_d,
            _ => c * (s * s + rho * rho) * ln_d,
        };
        (raw.ceil() as usize).max(1)
    }

    fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &d in &self.d {
            for &sigma in &self.sigma {
                for &rho in &self.rho {
                    if self.c.is_empty() {
                        out.extend(self.n.iter().map(|&n| Cell { n, d, sigma, rho, c: None }));
                    } else {
                        out.extend(
                            self.c.iter().map(|&c| Cell { n: self.sample_size(c, d, sigma, rho), d, sigma, rho, c: Some(c) }),
                        );
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    n: usize,
    d: usize,
    sigma: usize,
    rho: f64,
    c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub model: u8,
    pub n: usize,
    pub d: usize,
    pub sigma: usize,
    pub rho: f64,
    pub c: Option<f64>,
    pub trial: usize,
    pub method: MethodKind,
    /// SDP: the relaxation solved SILS (rank-one extraction, confirmed by
    /// brute force when affordable). Exact: always true. Baselines: None.
    pub recovered_any: Option<bool>,
    /// The method's sparse sign estimate equals x* (the sign pattern of the
    /// σ largest |z*ᵢ|).
    pub recovered_truth: Option<bool>,
    pub metrics: Option<MetricsRow>,
    pub objective: f64,
    pub wall_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ExperimentRecord>,
    pub csv: String,
}

/// Independent seed for (cell, trial); every method of a trial sees the
/// same instance.
pub fn trial_seed(seed: u64, cell: usize, trial: usize) -> u64 {
    SplitMix64::new(seed.wrapping_add(((cell as u64) << 32) | trial as u64)).next_u64()
}

fn truth_sign(z_star: &Vector, sigma: usize) -> SparseSignVector {
    let mut x = vec![0i8; z_star.len()];
    for i in top_sigma(z_star, sigma) {
        x[i] = if z_star[i] > 0.0 { 1 } else if z_star[i] < 0.0 { -1 } else { 0 };
    }
    SparseSignVector::new(x).expect("entries are in {-1, 0, 1}")
}

fn run_trial(cfg: &ExperimentConfig, cell_idx: usize, cell: &Cell, trial: usize) -> Vec<ExperimentRecord> {
    let mut spec = ModelSpec::new(cfg.model, cell.n, cell.d, cell.sigma, cell.rho, trial_seed(cfg.seed, cell_idx, trial));
    spec.c = cfg.model2_c;
    spec.c_prime = cfg.model2_c_prime;
    spec.c_dprime = cfg.model2_c_dprime;
    let blank = |method| ExperimentRecord {
        model: cfg.model,
        n: cell.n,
        d: cell.d,
        sigma: cell.sigma,
        rho: cell.rho,
        c: cell.c,
        trial,
        method,
        recovered_any: None,
        recovered_truth: None,
        metrics: None,
        objective: f64::NAN,
        wall_ms: 0.0,
        error: None,
    };
    let (inst, truth) = match generate(&spec) {
        Ok(v) => v,
        Err(e) => {
            return cfg
                .methods
                .iter()
                .map(|&m| ExperimentRecord { error: Some(e.to_string()), ..blank(m) })
                .collect()
        }
    };
    let x_star = truth_sign(&truth.z_star, cell.sigma);
    let exact_ok = candidate_count(cell.d, cell.sigma) <= cfg.exact_budget;

    cfg.methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let mut rec = blank(method);
            let outcome: Result<()> = (|| {
                let z = match method {
                    MethodKind::Sdp => {
                        let sol = solve_sdp(&inst, &cfg.solver)?;
                        rec.objective = sol.objective;
                        let x = if sol.status == Status::Converged {
                            extract_rank_one(&sol.w, &inst, sol.objective, &cfg.solver)
                        } else {
                            None
                        };
                        let solved = match (&x, exact_ok) {
                            (Some(x), true) => {
                                let ex = solve_exact(&inst, 1e-9)?;
                                (objective(&inst, &x.to_vector())? - ex.best_value).abs() <= 1e-5
                            }
                            (Some(_), false) => true,
                            (None, _) => false,
                        };
                        rec.recovered_any = Some(solved);
                        rec.recovered_truth = Some(x.as_ref() == Some(&x_star));
                        match x {
                            Some(x) => x.to_vector(),
                            None => Vector::from_iterator(cell.d, (1..=cell.d).map(|i| sol.w[(i, 0)])),
                        }
                    }
                    MethodKind::Exact => {
                        if !exact_ok {
                            return Err(SilsError::Budget(candidate_count(cell.d, cell.sigma)));
                        }
                        let ex = solve_exact(&inst, 1e-9)?;
                        rec.objective = ex.best_value;
                        rec.recovered_any = Some(true);
                        rec.recovered_truth = Some(ex.best_x == x_star);
                        ex.best_x.to_vector()
                    }
                    MethodKind::Lasso | MethodKind::Dantzig => {
                        let m = if method == MethodKind::Lasso { Method::Lasso } else { Method::Dantzig };
                        let res = match cfg.param_rule {
                            ParamRule::Paper => {
                                let p = match m {
                                    Method::Lasso => baselines::lasso_paper_lambda(cell.n, cell.d),
                                    Method::Dantzig => baselines::dantzig_paper_eta(cell.rho, cell.d),
                                };
                                baselines::fit(&inst.m, &inst.b, m, p, &cfg.baseline)?
                            }
                            ParamRule::Cv => {
                                let grid = match m {
                                    Method::Lasso => baselines::lasso_cv_grid(&inst.m, &inst.b),
                                    Method::Dantzig => baselines::dantzig_cv_grid(&inst.m, &inst.b),
                                };
                                let folds = cfg.cv_folds.min(cell.n);
                                if folds < 2 {
                                    return Err(SilsError::InvalidParam("too few rows for cross-validation".into()));
                                }
                                baselines::cross_validate(&inst.m, &inst.b, m, &grid, folds, spec.seed, &cfg.baseline)?
                            }
                        };
                        rec.objective = res.objective_or_l1;
                        rec.recovered_truth = Some(SparseSignVector::sign_pattern(&res.z, ZERO_TOL) == x_star);
                        res.z
                    }
                };
                rec.metrics = Some(metrics(&z, &truth, &inst.m, cell.sigma)?);
                Ok(())
            })();
            if let Err(e) = outcome {
                rec.error = Some(e.to_string());
            }
            if cfg.timing {
                rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
            }
            rec
        })
        .collect()
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>> {
    match std::env::var("SILS_THREADS") {
        Ok(v) => {
            let k: usize = v
                .trim()
                .parse()
                .map_err(|_| SilsError::InvalidParam(format!("SILS_THREADS must be a positive integer, got '{v}'")))?;
            if k == 0 {
                return Err(SilsError::InvalidParam("SILS_THREADS must be ≥ 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map(Some)
                .map_err(|e| SilsError::InvalidParam(format!("thread pool: {e}")))
        }
        Err(_) => Ok(None),
    }
}

fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let cells = cfg.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..cfg.trials).map(move |t| (c, t))).collect();
    let work = || -> Vec<Vec<ExperimentRecord>> {
        jobs.par_iter().map(|&(c, t)| run_trial(cfg, c, &cells[c], t)).collect()
    };
    let records: Vec<ExperimentRecord> = match thread_pool()? {
        Some(pool) => pool.install(work),
        None => work(),
    }
    .into_iter()
    .flatten()
    .collect();
    let csv = render_csv(&records, &cells, &cfg.methods, cfg.model);
    Ok(ExperimentOutput { records, csv })
}

/// Recovery-probability curve over the control-parameter (or n) grid.
pub fn run_recovery_curve(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run(cfg)
}

/// SDP against Lasso / Dantzig on the same instances.
pub fn run_comparison(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run(cfg)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.kind {
        ExperimentKind::Recovery => run_recovery_curve(cfg),
        ExperimentKind::Comparison => run_comparison(cfg),
    }
}

/// Decimal with 10 significant digits, trailing zeros trimmed; scientific
/// notation outside [1e-5, 1e10).
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.9e}");
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-5..10).contains(&exp) {
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        return format!("{mant}e{exp}");
    }
    let decimals = (9 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn fmt_flag(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "1",
        Some(false) => "0",
        None => "NA",
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_else(|| "NA".into())
}

/// Numeric fields in CSV order from `recovered_any` to `wall_ms`.
fn numeric_fields(r: &ExperimentRecord) -> [Option<f64>; 8] {
    let flag = |b: Option<bool>| b.map(|v| if v { 1.0 } else { 0.0 });
    let m = r.metrics.as_ref();
    [
        flag(r.recovered_any),
        flag(r.recovered_truth),
        m.map(|m| m.nonzeros as f64),
        m.map(|m| m.tpr),
        m.map(|m| m.prediction_error),
        m.map(|m| m.successful_recovery_rate),
        if r.objective.is_nan() { None } else { Some(r.objective) },
        Some(r.wall_ms),
    ]
}

fn render_csv(records: &[ExperimentRecord], cells: &[Cell], methods: &[MethodKind], model: u8) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# columns: {CSV_COLUMNS}; trial rows first, then per-(cell, method) rows with trial = mean|min|max over successful trials; NA = not applicable or failed"
    );
    let _ = writeln!(out, "{CSV_COLUMNS}");
    let prefix = |model: u8, n: usize, d: usize, sigma: usize, rho: f64, c: Option<f64>| {
        format!("{model},{n},{d},{sigma},{},{}", fmt_sig(rho), fmt_opt(c))
    };
    for r in records {
        let f = numeric_fields(r);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            prefix(r.model, r.n, r.d, r.sigma, r.rho, r.c),
            r.trial,
            r.method.name(),
            fmt_flag(r.recovered_any),
            fmt_flag(r.recovered_truth),
            fmt_opt(f[2]),
            fmt_opt(f[3]),
            fmt_opt(f[4]),
            fmt_opt(f[5]),
            fmt_opt(f[6]),
            fmt_sig(r.wall_ms),
        );
    }
    for cell in cells {
        for &method in methods {
            let rows: Vec<&ExperimentRecord> = records
                .iter()
                .filter(|r| r.method == method && r.n == cell.n && r.d == cell.d && r.sigma == cell.sigma && r.rho == cell.rho && r.c == cell.c)
                .collect();
            for (label, agg) in [("mean", 0usize), ("min", 1), ("max", 2)] {
                let cols: Vec<String> = (0..8)
                    .map(|k| {
                        let vals: Vec<f64> = rows.iter().filter_map(|r| numeric_fields(r)[k]).collect();
                        if vals.is_empty() {
                            return "NA".into();
                        }
                        fmt_sig(match agg {
                            0 => vals.iter().sum::<f64>() / vals.len() as f64,
                            1 => vals.iter().copied().fold(f64::INFINITY, f64::min),
                            _ => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                        })
                    })
                    .collect();
                let _ = writeln!(
                    out,
                    "{},{label},{},{}",
                    prefix(model, cell.n, cell.d, cell.sigma, cell.rho, cell.c),
                    method.name(),
                    cols.join(",")
                );
            }
        }
    }
    out
}

/// Mean of `field` over a method's successful trial records.
pub fn mean_of(records: &[ExperimentRecord], method: MethodKind, field: impl Fn(&ExperimentRecord) -> Option<f64>) -> f64 {
    let vals: Vec<f64> = records.iter().filter(|r| r.method == method).filter_map(field).collect();
    if vals.is_empty() {
        f64::NAN
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}
