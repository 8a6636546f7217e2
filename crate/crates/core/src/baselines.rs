//! Convex baselines: Lasso by cyclic coordinate descent and the Dantzig
//! selector as a linear program, plus k-fold cross-validation and the fixed
//! parameter rules used for the Model 3 comparison.

use rayon::prelude::*;

use crate::linalg::{Mat, Vector};
use crate::rng::SplitMix64;
use crate::{Result, SilsError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineParams {
    pub max_sweeps: usize,
    /// Coordinate descent stops once no coordinate moves by more than this.
    pub cd_tol: f64,
    pub kkt_tol: f64,
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_pivots: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self { max_sweeps: 100_000, cd_tol: 1e-8, kkt_tol: 1e-6, feas_tol: 1e-7, gap_tol: 1e-6, max_pivots: 50_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lasso,
    Dantzig,
}

impl std::str::FromStr for Method {
    type Err = SilsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(Method::Lasso),
            "dantzig" => Ok(Method::Dantzig),
            _ => Err(SilsError::InvalidParam(format!("unknown method '{s}' (lasso|dantzig)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub z: Vector,
    /// Lasso objective, or ‖z‖₁ for the Dantzig selector.
    pub objective_or_l1: f64,
    /// Lasso: subgradient-condition violation. Dantzig: certified ℓ₁ duality gap.
    pub kkt_violation: f64,
    /// Dantzig: max(‖Mᵀ(Mz − b)‖∞ − η, 0). Zero for Lasso.
    pub constraint_residual: f64,
    pub parameter: f64,
    pub cv_trace: Option<Vec<(f64, f64)>>,
    /// Lasso objective after every sweep (empty for Dantzig).
    pub objective_history: Vec<f64>,
}

fn check_dims(m: &Mat, b: &Vector) -> Result<()> {
    if m.nrows() != b.len() {
        return Err(SilsError::Dimension(format!("M has {} rows, b has {}", m.nrows(), b.len())));
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(SilsError::Dimension("empty design".into()));
    }
    Ok(())
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

fn lasso_objective(r: &Vector, z: &Vector, lambda: f64) -> f64 {
    r.norm_squared() / (2.0 * r.len() as f64) + lambda * z.lp_norm(1)
}

/// Subgradient-condition violation of (1/2n)‖Mz − b‖² + λ‖z‖₁ at z.
pub fn lasso_kkt_violation(m: &Mat, b: &Vector, z: &Vector, lambda: f64) -> f64 {
    let n = m.nrows() as f64;
    let g = m.transpose() * (m * z - b) / n;
    g.iter()
        .zip(z.iter())
        .map(|(&gj, &zj)| if zj == 0.0 { (gj.abs() - lambda).max(0.0) } else { (gj + lambda * zj.signum()).abs() })
        .fold(0.0, f64::max)
}

/// Smallest λ for which z = 0 is optimal: ‖Mᵀb/n‖∞.
pub fn lasso_lambda_max(m: &Mat, b: &Vector) -> f64 {
    (m.transpose() * b / m.nrows() as f64).amax()
}

pub fn lasso(m: &Mat, b: &Vector, lambda: f64, params: &BaselineParams) -> Result<BaselineResult> {
    lasso_warm(m, b, lambda, None, params)
}

/// Coordinate descent started from `init` (zero when absent).
pub fn lasso_warm(
    m: &Mat,
    b: &Vector,
    lambda: f64,
    init: Option<&Vector>,
    params: &BaselineParams,
) -> Result<BaselineResult> {
    check_dims(m, b)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(SilsError::InvalidParam(format!("λ must be finite and ≥ 0, got {lambda}")));
    }
    let (n, d) = (m.nrows(), m.ncols());
    let nf = n as f64;
    let col_sq: Vec<f64> = m.column_iter().map(|c| c.norm_squared() / nf).collect();
    let mut z = match init {
        Some(z0) if z0.len() == d => z0.clone(),
        Some(_) => return Err(SilsError::Dimension("warm start has the wrong length".into())),
        None => Vector::zeros(d),
    };
    // Full-shrinkage regime: exact zero without iterating.
    if init.is_none() && lambda >= lasso_lambda_max(m, b) {
        let r = -b;
        let obj = lasso_objective(&r, &z, lambda);
        return Ok(BaselineResult {
            kkt_violation: lasso_kkt_violation(m, b, &z, lambda),
            z,
            objective_or_l1: obj,
            constraint_residual: 0.0,
            parameter: lambda,
            cv_trace: None,
            objective_history: vec![obj],
        });
    }
    let mut r = m * &z - b;
    let mut history = Vec::new();
    for sweep in 0..params.max_sweeps {
        let mut max_change = 0.0f64;
        for j in 0..d {
            let a = col_sq[j];
            if a == 0.0 {
                if z[j] != 0.0 {
                    z[j] = 0.0;
                }
                continue;
            }
            let col = m.column(j);
            let old = z[j];
            let rho = a * old - col.dot(&r) / nf;
            let new = soft(rho, lambda) / a;
            let delta = new - old;
            if delta != 0.0 {
                r.axpy(delta, &col, 1.0);
                z[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if sweep % 64 == 63 {
            r = m * &z - b;
        }
        history.push(lasso_objective(&r, &z, lambda));
        if max_change < params.cd_tol {
            let kkt = lasso_kkt_violation(m, b, &z, lambda);
            if kkt <= params.kkt_tol {
                r = m * &z - b;
                return Ok(BaselineResult {
                    objective_or_l1: lasso_objective(&r, &z, lambda),
                    z,
                    kkt_violation: kkt,
                    constraint_residual: 0.0,
                    parameter: lambda,
                    cv_trace: None,
                    objective_history: history,
                });
            }
        }
    }
    Err(SilsError::Numeric(format!("lasso did not converge in {} sweeps", params.max_sweeps)))
}

/// Solution of min cᵀx s.t. Ax = b, x ≥ 0 (b ≥ 0 required).
#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: Vector,
    /// Simplex multipliers y = B⁻ᵀc_B for the equality rows.
    pub y: Vector,
}

/// Two-phase dense tableau simplex; Bland's rule takes over during
/// degenerate stalls to rule out cycling. The final basis is
/// re-solved from the original data to strip accumulated pivoting error.
pub(crate) fn simplex(a: &Mat, b: &Vector, c: &Vector, max_pivots: usize) -> Result<LpSolution> {
    let (rows, cols) = a.shape();
    if b.iter().any(|&v| v < 0.0) {
        return Err(SilsError::InvalidParam("simplex expects b ≥ 0".into()));
    }
    // Reuse unit columns as the starting basis; artificials elsewhere.
    let mut basis: Vec<Option<usize>> = vec![None; rows];
    for j in 0..cols {
        let col = a.column(j);
        let nz: Vec<usize> = (0..rows).filter(|&i| col[i] != 0.0).collect();
        if nz.len() == 1 && col[nz[0]] == 1.0 && basis[nz[0]].is_none() {
            basis[nz[0]] = Some(j);
        }
    }
    let art_rows: Vec<usize> = (0..rows).filter(|&i| basis[i].is_none()).collect();
    let total = cols + art_rows.len();
    // Tableau: rows × (total + 1), last column is the RHS.
    let mut t = Mat::zeros(rows, total + 1);
    t.view_mut((0, 0), (rows, cols)).copy_from(a);
    t.set_column(total, b);
    let mut bas = vec![0usize; rows];
    for (k, &i) in art_rows.iter().enumerate() {
        t[(i, cols + k)] = 1.0;
        basis[i] = Some(cols + k);
    }
    for i in 0..rows {
        bas[i] = basis[i].expect("every row has a basic column");
    }
    let scale = 1.0 + a.amax();
    let tol = 1e-11 * scale;
    let mut pivots = 0usize;

    let t0 = t.clone();

    let run = |t: &mut Mat, bas: &mut Vec<usize>, cost: &Vector, allowed: usize, pivots: &mut usize| -> Result<()> {
        let mut degenerate_streak = 0usize;
        loop {
            let mut is_basic = vec![false; total];
            for &j in bas.iter() {
                is_basic[j] = true;
            }
            let cb: Vec<f64> = bas.iter().map(|&j| cost[j]).collect();
            let mut rcs: Vec<(usize, f64)> = (0..allowed)
                .filter(|&j| !is_basic[j])
                .map(|j| (j, cost[j] - (0..rows).map(|i| cb[i] * t[(i, j)]).sum::<f64>()))
                .filter(|&(_, rc)| rc < -1e-10)
                .collect();
            // Steepest reduced cost normally; Bland's lowest index once a
            // run of degenerate pivots suggests stalling.
            let bland = degenerate_streak > 32;
            if !bland {
                rcs.sort_by(|a, b| a.1.total_cmp(&b.1));
            }
            // A "ray" whose reduced cost is negative only at roundoff level
            // is skipped rather than reported as unbounded.
            let mut choice = None;
            for &(j, rc) in &rcs {
                match ratio_test(t, bas, j, total, tol) {
                    Some(r) => {
                        choice = Some((r, j));
                        break;
                    }
                    None if rc < -1e-7 => return Err(SilsError::Numeric("linear program is unbounded".into())),
                    None => {}
                }
            }
            let Some((r, j)) = choice else { return Ok(()) };
            if t[(r, total)] <= tol {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            pivot(t, r, j);
            bas[r] = j;
            *pivots += 1;
            if *pivots % 64 == 0 {
                reinvert(t, &t0, bas);
            }
            if *pivots > max_pivots {
                return Err(SilsError::Numeric(format!("simplex exceeded {max_pivots} pivots")));
            }
        }
    };

    if !art_rows.is_empty() {
        let mut phase1 = Vector::zeros(total);
        for k in 0..art_rows.len() {
            phase1[cols + k] = 1.0;
        }
        run(&mut t, &mut bas, &phase1, total, &mut pivots)?;
        let infeas: f64 = (0..rows).filter(|&i| bas[i] >= cols).map(|i| t[(i, total)]).sum();
        if infeas > 1e-9 * (1.0 + b.amax()) {
            return Err(SilsError::Numeric(format!("linear program infeasible (phase-1 value {infeas:.3e})")));
        }
        // Drive zero-level artificials out where a structural pivot exists.
        for i in 0..rows {
            if bas[i] >= cols {
                if let Some(j) = (0..cols).find(|&j| !bas.contains(&j) && t[(i, j)].abs() > 1e-9 * scale) {
                    pivot(&mut t, i, j);
                    bas[i] = j;
                }
            }
        }
    }
    let mut cost = Vector::zeros(total);
    cost.rows_mut(0, cols).copy_from(c);
    run(&mut t, &mut bas, &cost, cols, &mut pivots)?;

    // Refine: solve B x_B = b and Bᵀy = c_B from the original columns.
    let mut bmat = Mat::zeros(rows, rows);
    let mut cb = Vector::zeros(rows);
    for (k, &j) in bas.iter().enumerate() {
        if j < cols {
            bmat.set_column(k, &a.column(j));
            cb[k] = c[j];
        } else {
            bmat[(art_rows[j - cols], k)] = 1.0;
        }
    }
    let lu = bmat.clone().lu();
    let xb = lu.solve(b).ok_or_else(|| SilsError::Numeric("singular simplex basis".into()))?;
    let y = bmat
        .transpose()
        .lu()
        .solve(&cb)
        .ok_or_else(|| SilsError::Numeric("singular simplex basis".into()))?;
    let mut x = Vector::zeros(cols);
    for (k, &j) in bas.iter().enumerate() {
        if j < cols {
            x[j] = xb[k].max(0.0);
        }
    }
    Ok(LpSolution { x, y })
}

/// Minimum-ratio row for entering column j; ties go to the lowest basic index.
fn ratio_test(t: &Mat, bas: &[usize], j: usize, rhs: usize, tol: f64) -> Option<usize> {
    let mut leave: Option<(usize, f64)> = None;
    for i in 0..t.nrows() {
        let p = t[(i, j)];
        if p > tol {
            let ratio = t[(i, rhs)] / p;
            leave = match leave {
                None => Some((i, ratio)),
                Some((li, lr)) => {
                    let eps = 1e-12 * (1.0 + lr.abs());
                    if ratio < lr - eps || (ratio <= lr + eps && bas[i] < bas[li]) {
                        Some((i, ratio))
                    } else {
                        Some((li, lr))
                    }
                }
            };
        }
    }
    leave.map(|(i, _)| i)
}

/// Rebuild the tableau as B⁻¹·T₀ from the current basis.
fn reinvert(t: &mut Mat, t0: &Mat, bas: &[usize]) {
    let rows = t0.nrows();
    let mut bmat = Mat::zeros(rows, rows);
    for (k, &j) in bas.iter().enumerate() {
        bmat.set_column(k, &t0.column(j));
    }
    if let Some(fresh) = bmat.lu().solve(t0) {
        if fresh.iter().all(|v| v.is_finite()) {
            *t = fresh;
        }
    }
}

fn pivot(t: &mut Mat, r: usize, j: usize) {
    let p = t[(r, j)];
    let mut row = t.row(r).into_owned();
    row /= p;
    t.set_row(r, &row);
    for i in 0..t.nrows() {
        if i != r {
            let f = t[(i, j)];
            if f != 0.0 {
                for k in 0..t.ncols() {
                    t[(i, k)] -= f * row[k];
                }
                t[(i, j)] = 0.0;
            }
        }
    }
}

/// min ‖z‖₁ s.t. ‖Mᵀ(Mz − b)‖∞ ≤ η, as an LP over z = z⁺ − z⁻ with slacks.
/// The reported gap is ‖z‖₁ minus the objective of a dual-feasible point
/// built from the simplex multipliers.
pub fn dantzig(m: &Mat, b: &Vector, eta: f64, params: &BaselineParams) -> Result<BaselineResult> {
    check_dims(m, b)?;
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(SilsError::InvalidParam(format!("η must be finite and ≥ 0, got {eta}")));
    }
    let d = m.ncols();
    let g = m.transpose() * m;
    let c = m.transpose() * b;
    // Rows:  G(z⁺ − z⁻) + s₁ = c + η,   −G(z⁺ − z⁻) + s₂ = η − c.
    let rows = 2 * d;
    let cols = 4 * d;
    let mut a = Mat::zeros(rows, cols);
    let mut rhs = Vector::zeros(rows);
    let mut flip = vec![1.0; rows];
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] = g[(i, j)];
            a[(i, d + j)] = -g[(i, j)];
            a[(d + i, j)] = -g[(i, j)];
            a[(d + i, d + j)] = g[(i, j)];
        }
        a[(i, 2 * d + i)] = 1.0;
        a[(d + i, 3 * d + i)] = 1.0;
        rhs[i] = c[i] + eta;
        rhs[d + i] = eta - c[i];
    }
    for i in 0..rows {
        if rhs[i] < 0.0 {
            flip[i] = -1.0;
            let neg = -a.row(i).into_owned();
            a.set_row(i, &neg);
            rhs[i] = -rhs[i];
        }
    }
    let mut cost = Vector::zeros(cols);
    cost.rows_mut(0, 2 * d).fill(1.0);
    let lp = simplex(&a, &rhs, &cost, params.max_pivots)?;
    let z = Vector::from_iterator(d, (0..d).map(|j| lp.x[j] - lp.x[d + j]));
    let l1 = z.lp_norm(1);
    let resid = ((&g * &z - &c).amax() - eta).max(0.0);

    // Multipliers of the ≤ rows: α = −flip ⊙ y, clamped and scaled to be
    // dual feasible (‖G(α − β)‖∞ ≤ 1).
    let alpha = Vector::from_iterator(d, (0..d).map(|i| (-flip[i] * lp.y[i]).max(0.0)));
    let beta = Vector::from_iterator(d, (0..d).map(|i| (-flip[d + i] * lp.y[d + i]).max(0.0)));
    let w = &alpha - &beta;
    let s = (&g * &w).amax().max(1.0);
    let dual = (-c.dot(&w) - eta * (alpha.sum() + beta.sum())) / s;
    let gap = (l1 - dual).max(0.0);
    if resid > params.feas_tol * (1.0 + c.amax()) {
        return Err(SilsError::Numeric(format!("Dantzig solution violates the constraint by {resid:.3e}")));
    }
    Ok(BaselineResult {
        z,
        objective_or_l1: l1,
        kkt_violation: gap,
        constraint_residual: resid,
        parameter: eta,
        cv_trace: None,
        objective_history: Vec::new(),
    })
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| {
            let t = k as f64 / (points - 1) as f64;
            (lo.ln() + t * (hi.ln() - lo.ln())).exp()
        })
        .collect()
}

/// 20 log-spaced λ in [10⁻³, 1]·‖Mᵀb/n‖∞.
pub fn lasso_cv_grid(m: &Mat, b: &Vector) -> Vec<f64> {
    let top = lasso_lambda_max(m, b);
    log_grid(1e-3 * top, top, 20)
}

/// 20 log-spaced η in [10⁻², 2]·‖Mᵀb‖∞.
pub fn dantzig_cv_grid(m: &Mat, b: &Vector) -> Vec<f64> {
    let top = (m.transpose() * b).amax();
    log_grid(1e-2 * top, 2.0 * top, 20)
}

/// λ = 2√(ln d / n).
pub fn lasso_paper_lambda(n: usize, d: usize) -> f64 {
    2.0 * ((d as f64).ln() / n as f64).sqrt()
}

/// η = 2ϱ(5/4 + √ln d).
pub fn dantzig_paper_eta(rho: f64, d: usize) -> f64 {
    2.0 * rho * (1.25 + (d as f64).ln().sqrt())
}

pub fn fit(m: &Mat, b: &Vector, method: Method, param: f64, params: &BaselineParams) -> Result<BaselineResult> {
    match method {
        Method::Lasso => lasso(m, b, param, params),
        Method::Dantzig => dantzig(m, b, param, params),
    }
}

fn select_rows(m: &Mat, b: &Vector, idx: &[usize]) -> (Mat, Vector) {
    (m.select_rows(idx), b.select_rows(idx))
}

/// k-fold cross-validation over `grid`. Rows are assigned to folds by a
/// seeded shuffle; the parameter with the smallest mean held-out
/// (1/n)‖Mz − b‖² wins (ties → larger parameter) and is refit on all rows.
/// The Dantzig constraint scales with the row count, so η is rescaled by
/// n_train/n inside each fold.
pub fn cross_validate(
    m: &Mat,
    b: &Vector,
    method: Method,
    grid: &[f64],
    folds: usize,
    seed: u64,
    params: &BaselineParams,
) -> Result<BaselineResult> {
    check_dims(m, b)?;
    if grid.is_empty() {
        return Err(SilsError::InvalidParam("empty parameter grid".into()));
    }
    let n = m.nrows();
    if folds < 2 || n < folds {
        return Err(SilsError::InvalidParam(format!("need 2 ≤ folds ≤ n, got folds={folds}, n={n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let mut assignment = vec![0usize; n];
    for (pos, &row) in order.iter().enumerate() {
        assignment[row] = pos % folds;
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|k| {
            let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == k).collect();
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != k).collect();
            (train, test)
        })
        .collect();

    // Lasso folds walk the grid from large to small λ with warm starts.
    let mut sorted: Vec<usize> = (0..grid.len()).collect();
    sorted.sort_by(|&i, &j| grid[j].total_cmp(&grid[i]));
    let fold_errors: Vec<Vec<f64>> = splits
        .par_iter()
        .map(|(train, test)| -> Result<Vec<f64>> {
            let (mt, bt) = select_rows(m, b, train);
            let (mv, bv) = select_rows(m, b, test);
            let mut errs = vec![0.0; grid.len()];
            let mut warm: Option<Vector> = None;
            for &gi in &sorted {
                let z = match method {
                    Method::Lasso => {
                        let r = lasso_warm(&mt, &bt, grid[gi], warm.as_ref(), params)?;
                        warm = Some(r.z.clone());
                        r.z
                    }
                    Method::Dantzig => dantzig(&mt, &bt, grid[gi] * train.len() as f64 / n as f64, params)?.z,
                };
                errs[gi] = (&mv * &z - &bv).norm_squared() / test.len() as f64;
            }
            Ok(errs)
        })
        .collect::<Result<_>>()?;
    let trace: Vec<(f64, f64)> = (0..grid.len())
        .map(|gi| (grid[gi], fold_errors.iter().map(|e| e[gi]).sum::<f64>() / folds as f64))
        .collect();
    let mut best = 0;
    for gi in 1..grid.len() {
        let (p, e) = trace[gi];
        let (bp, be) = trace[best];
        if e < be || (e == be && p > bp) {
            best = gi;
        }
    }
    let mut res = fit(m, b, method, grid[best], params)?;
    res.cv_trace = Some(trace);
    Ok(res)
}
