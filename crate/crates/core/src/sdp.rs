//! The ℓ₁-augmented SDP relaxation
//!
//! ```text
//! minimise tr(CW)  s.t.  W ⪰ 0, W₁₁ = 1, tr(W_x) = σ, 1ᵀ|W_x|1 ≤ σ², diag(W_x) ≤ 1
//! ```
//!
//! with C = (1/n)AᵀA, A = (−b M), solved by two-block ADMM: a PSD projection
//! and a Dykstra projection onto the polyhedral constraints.

use crate::instance::{gram_lift, objective, SilsInstance, SparseSignVector};
use crate::linalg::{self, Mat};
use crate::{Result, SilsError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub rho: f64,
    pub max_iter: usize,
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub dykstra_max_iter: usize,
    pub dykstra_tol: f64,
    pub rank_one_tol: f64,
    pub rounding_residue: f64,
    pub polytope: PolytopeMethod,
}

/// How the Z-update projects onto the polyhedral constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolytopeMethod {
    /// Closed-form optimality conditions with two scalar multipliers.
    Exact,
    /// Dykstra's cyclic projections (bounded by `dykstra_max_iter`).
    Dykstra,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iter: 20_000,
            feas_tol: 1e-7,
            opt_tol: 1e-6,
            dykstra_max_iter: 500,
            dykstra_tol: 1e-10,
            rank_one_tol: 1e-6,
            rounding_residue: 0.1,
            polytope: PolytopeMethod::Exact,
        }
    }
}

impl SolverParams {
    /// `key = value` lines (`#` comments) overriding the defaults. Keys:
    /// rho, max_iter, feas_tol, opt_tol, dykstra_max_iter, dykstra_tol,
    /// rank_one_tol, rounding_residue, polytope (exact | dykstra).
    pub fn parse_config(text: &str) -> Result<Self> {
        let mut p = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| SilsError::Parse { line: i + 1, msg };
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got '{line}'")))?;
            let (k, v) = (k.trim(), v.trim());
            let f = || v.parse::<f64>().map_err(|_| err(format!("bad value for {k}: '{v}'")));
            let u = || v.parse::<usize>().map_err(|_| err(format!("bad value for {k}: '{v}'")));
            match k {
                "rho" => p.rho = f()?,
                "max_iter" => p.max_iter = u()?,
                "feas_tol" => p.feas_tol = f()?,
                "opt_tol" => p.opt_tol = f()?,
                "dykstra_max_iter" => p.dykstra_max_iter = u()?,
                "dykstra_tol" => p.dykstra_tol = f()?,
                "rank_one_tol" => p.rank_one_tol = f()?,
                "rounding_residue" => p.rounding_residue = f()?,
                "polytope" => {
                    p.polytope = match v {
                        "exact" => PolytopeMethod::Exact,
                        "dykstra" => PolytopeMethod::Dykstra,
                        _ => return Err(err(format!("unknown polytope method '{v}'"))),
                    }
                }
                _ => return Err(err(format!("unknown solver key '{k}'"))),
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [self.rho, self.feas_tol, self.opt_tol, self.dykstra_tol, self.rank_one_tol, self.rounding_residue];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.max_iter == 0 || self.dykstra_max_iter == 0 {
            return Err(SilsError::InvalidParam("solver parameters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub w: Mat,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: Status,
    /// max(primal, dual) residual after every iteration.
    pub residual_history: Vec<f64>,
    /// Number of polytope projections that hit the Dykstra iteration cap.
    pub dykstra_cap_hits: usize,
}

/// Euclidean projection onto {v : ‖v‖₁ ≤ radius} by the sort-based simplex method.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - radius) / (k + 1) as f64;
        if uk > t {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|&x| x.signum() * (x.abs() - theta).max(0.0)).collect()
}

fn project_first_entry(w: &mut Mat) {
    w[(0, 0)] = 1.0;
}

fn project_trace(w: &mut Mat, sigma: f64) {
    let d = w.nrows() - 1;
    let tr: f64 = (1..=d).map(|i| w[(i, i)]).sum();
    let shift = (sigma - tr) / d as f64;
    for i in 1..=d {
        w[(i, i)] += shift;
    }
}

fn project_diag_box(w: &mut Mat) {
    for i in 1..w.nrows() {
        if w[(i, i)] > 1.0 {
            w[(i, i)] = 1.0;
        }
    }
}

fn project_l1_block(w: &mut Mat, radius: f64) {
    let d = w.nrows() - 1;
    let block: Vec<f64> = w.view((1, 1), (d, d)).iter().copied().collect();
    let p = project_l1_ball(&block, radius);
    let pm = Mat::from_column_slice(d, d, &p);
    let sym = linalg::symmetrize(&pm);
    w.view_mut((1, 1), (d, d)).copy_from(&sym);
}

/// Result of a polytope projection.
#[derive(Debug, Clone)]
pub struct PolytopeProjection {
    pub w: Mat,
    pub iterations: usize,
    pub converged: bool,
}

/// Dykstra's cycle over {W₁₁ = 1}, {tr W_x = σ}, {diag W_x ≤ 1} and the
/// ℓ₁ ball of radius σ² on vec(W_x).
pub fn project_polytope(sym: &Mat, sigma: usize, params: &SolverParams) -> PolytopeProjection {
    let dim = sym.nrows();
    let s = sigma as f64;
    let mut x = sym.clone();
    let mut incr: Vec<Mat> = (0..4).map(|_| Mat::zeros(dim, dim)).collect();
    for it in 1..=params.dykstra_max_iter {
        let start = x.clone();
        for (k, inc) in incr.iter_mut().enumerate() {
            let y = &x + &*inc;
            let mut p = y.clone();
            match k {
                0 => project_first_entry(&mut p),
                1 => project_trace(&mut p, s),
                2 => project_diag_box(&mut p),
                _ => project_l1_block(&mut p, s * s),
            }
            *inc = y - &p;
            x = p;
        }
        if (&x - &start).norm() < params.dykstra_tol {
            return PolytopeProjection { w: x, iterations: it, converged: true };
        }
    }
    PolytopeProjection { w: x, iterations: params.dykstra_max_iter, converged: false }
}

#[inline]
fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Diagonal of the KKT solution for thresholds (ν, τ).
fn diag_entry(v: f64, nu: f64, tau: f64) -> f64 {
    soft(v + nu, tau).min(1.0)
}

/// The trace multiplier ν(τ): Σᵢ min(1, soft(vᵢ + ν, τ)) = σ.
fn trace_multiplier(diag: &[f64], sigma: f64, tau: f64) -> f64 {
    let vmax = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let vmin = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (tau - vmax, 1.0 + tau - vmin);
    let f = |nu: f64| diag.iter().map(|&v| diag_entry(v, nu, tau)).sum::<f64>();
    // f is nondecreasing and linear between the kinks −τ − vᵢ, τ − vᵢ and
    // 1 + τ − vᵢ: binary-search the kinks for the piece where f crosses σ.
    let mut kinks: Vec<f64> = diag
        .iter()
        .flat_map(|&v| [-tau - v, tau - v, 1.0 + tau - v])
        .filter(|&k| k > lo && k < hi)
        .collect();
    kinks.sort_unstable_by(f64::total_cmp);
    let (mut a, mut b) = (0usize, kinks.len());
    while a < b {
        let m = (a + b) / 2;
        if f(kinks[m]) < sigma {
            a = m + 1;
        } else {
            b = m;
        }
    }
    if a > 0 {
        lo = kinks[a - 1];
    }
    if a < kinks.len() {
        hi = kinks[a];
    }
    // f is piecewise linear: solve exactly on the piece containing the bracket.
    let mid = 0.5 * (lo + hi);
    let (mut fixed, mut slope) = (0.0, 0.0);
    for &v in diag {
        let u = v + mid;
        if u - tau >= 1.0 {
            fixed += 1.0;
        } else if u > tau {
            fixed += v - tau;
            slope += 1.0;
        } else if u < -tau {
            fixed += v + tau;
            slope += 1.0;
        }
    }
    if slope > 0.0 {
        let nu = (sigma - fixed) / slope;
        if nu >= lo - 1e-12 * (1.0 + lo.abs()) && nu <= hi + 1e-12 * (1.0 + hi.abs()) {
            return nu;
        }
    }
    mid
}

fn kkt_point(v: &Mat, sigma: f64, tau: f64) -> (Mat, f64) {
    let d = v.nrows();
    let diag: Vec<f64> = (0..d).map(|i| v[(i, i)]).collect();
    let nu = trace_multiplier(&diag, sigma, tau);
    let mut w = Mat::zeros(d, d);
    let mut l1 = 0.0;
    for j in 0..d {
        for i in 0..d {
            let e = if i == j { diag_entry(v[(i, i)], nu, tau) } else { soft(v[(i, j)], tau) };
            w[(i, j)] = e;
            l1 += e.abs();
        }
    }
    (w, l1)
}

/// Exact Euclidean projection onto the polytope via its optimality
/// conditions: off-diagonals of W_x are soft(V, τ), diagonals are
/// min(1, soft(V + ν, τ)), with ν fixing the trace and τ ≥ 0 the ℓ₁ budget.
/// The ℓ₁ mass is nonincreasing in τ once ν is eliminated, so τ is found by
/// a bracketed root search. The first row/column off the corner is unconstrained.
pub fn project_polytope_exact(sym: &Mat, sigma: usize) -> Mat {
    let dim = sym.nrows();
    let d = dim - 1;
    let s = sigma as f64;
    let radius = s * s;
    let v = linalg::symmetrize(&sym.view((1, 1), (d, d)).into_owned());
    let (mut wx, l1) = kkt_point(&v, s, 0.0);
    if l1 > radius {
        // ℓ₁ mass as a function of τ without materialising W: the
        // off-diagonal part is Σ (|vᵢⱼ| − τ)₊, read off sorted magnitudes.
        let diag: Vec<f64> = (0..d).map(|i| v[(i, i)]).collect();
        let mut off: Vec<f64> = (0..d)
            .flat_map(|j| (0..d).filter(move |&i| i != j).map(move |i| (i, j)))
            .map(|(i, j)| v[(i, j)].abs())
            .collect();
        off.sort_unstable_by(|a, b| b.total_cmp(a));
        let mut prefix = Vec::with_capacity(off.len() + 1);
        prefix.push(0.0);
        for &a in &off {
            prefix.push(prefix.last().unwrap() + a);
        }
        let mass = |tau: f64| {
            let k = off.partition_point(|&a| a > tau);
            let nu = trace_multiplier(&diag, s, tau);
            prefix[k] - k as f64 * tau + diag.iter().map(|&x| diag_entry(x, nu, tau).abs()).sum::<f64>()
        };
        let mut lo = 0.0;
        let mut hi = 1.0 + 2.0 * linalg::max_norm(&v);
        while mass(hi) > radius {
            lo = hi;
            hi *= 2.0;
        }
        // Illinois-modified regula falsi on the monotone, piecewise-linear
        // excess mass(τ) − σ², keeping the bracket [lo, hi].
        let (mut f_lo, mut f_hi) = (mass(lo) - radius, mass(hi) - radius);
        let mut side = 0i8;
        for _ in 0..200 {
            if hi - lo <= 1e-15 * hi || f_hi.abs() <= 1e-14 * radius {
                break;
            }
            let mut t = hi - f_hi * (hi - lo) / (f_hi - f_lo);
            if !(t > lo && t < hi) {
                t = 0.5 * (lo + hi);
            }
            let f = mass(t) - radius;
            if f > 0.0 {
                lo = t;
                f_lo = f;
                if side == -1 {
                    f_hi *= 0.5;
                }
                side = -1;
            } else {
                hi = t;
                f_hi = f;
                if side == 1 {
                    f_lo *= 0.5;
                }
                side = 1;
            }
        }
        wx = kkt_point(&v, s, hi).0;
    }
    let mut out = linalg::symmetrize(sym);
    out[(0, 0)] = 1.0;
    out.view_mut((1, 1), (d, d)).copy_from(&wx);
    out
}

/// Largest violation of the four polyhedral constraints (0 when feasible).
pub fn polytope_violation(w: &Mat, sigma: usize) -> f64 {
    let d = w.nrows() - 1;
    let s = sigma as f64;
    let tr: f64 = (1..=d).map(|i| w[(i, i)]).sum();
    let l1: f64 = w.view((1, 1), (d, d)).iter().map(|v| v.abs()).sum();
    let diag = (1..=d).map(|i| w[(i, i)] - 1.0).fold(0.0f64, f64::max);
    (w[(0, 0)] - 1.0).abs().max((tr - s).abs()).max((l1 - s * s).max(0.0)).max(diag)
}

/// W = (1, xᵀ)ᵀ(1, xᵀ).
pub fn lift(x: &SparseSignVector) -> Mat {
    let d = x.len();
    let mut w = linalg::Vector::zeros(d + 1);
    w[0] = 1.0;
    for (i, &v) in x.entries().iter().enumerate() {
        w[i + 1] = v as f64;
    }
    &w * w.transpose()
}

fn trace_product(a: &Mat, b: &Mat) -> f64 {
    a.component_mul(b).sum()
}

pub fn solve_sdp(inst: &SilsInstance, params: &SolverParams) -> Result<SdpSolution> {
    params.validate()?;
    let d = inst.d();
    let c = gram_lift(inst);
    if c.iter().any(|v| !v.is_finite()) {
        return Err(SilsError::Numeric("non-finite cost matrix".into()));
    }
    let dim = d + 1;
    let mut z = Mat::zeros(dim, dim);
    z[(0, 0)] = 1.0;
    for i in 1..dim {
        z[(i, i)] = inst.sigma as f64 / d as f64;
    }
    let mut u = Mat::zeros(dim, dim);
    let mut rho = params.rho;
    let mut history = Vec::new();
    let mut cap_hits = 0;
    let (mut r, mut s) = (f64::INFINITY, f64::INFINITY);
    let mut status = Status::MaxIter;
    let mut iterations = params.max_iter;

    for k in 1..=params.max_iter {
        let x = linalg::project_psd(&(&z - &u - &c / rho))?;
        let v = &x + &u;
        let z_new = match params.polytope {
            PolytopeMethod::Exact => project_polytope_exact(&v, inst.sigma),
            PolytopeMethod::Dykstra => {
                let proj = project_polytope(&v, inst.sigma, params);
                if !proj.converged {
                    cap_hits += 1;
                }
                proj.w
            }
        };
        r = (&x - &z_new).norm();
        s = rho * (&z_new - &z).norm();
        u += &x - &z_new;
        z = z_new;
        history.push(r.max(s));
        if !u.iter().all(|v| v.is_finite()) || u.norm() > 1e14 {
            status = Status::Infeasible;
            iterations = k;
            break;
        }
        if r <= params.feas_tol && s <= params.feas_tol {
            status = Status::Converged;
            iterations = k;
            break;
        }
        if k % 100 == 0 {
            if r > 10.0 * s {
                rho *= 2.0;
                u /= 2.0;
            } else if s > 10.0 * r {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }
    let objective = trace_product(&c, &z);
    Ok(SdpSolution {
        w: z,
        objective,
        primal_residual: r,
        dual_residual: s,
        iterations,
        status,
        residual_history: history,
        dykstra_cap_hits: cap_hits,
    })
}

/// Rank-one test plus rounding of the first column. Returns the rounded
/// sign vector only when every check passes.
pub fn extract_rank_one(
    w: &Mat,
    inst: &SilsInstance,
    sdp_objective: f64,
    params: &SolverParams,
) -> Option<SparseSignVector> {
    let d = inst.d();
    if w.nrows() != d + 1 || w.ncols() != d + 1 {
        return None;
    }
    let vals = linalg::eigvals(w).ok()?;
    let l1 = vals[d];
    let l2 = if d >= 1 { vals[d - 1] } else { 0.0 };
    if !(l1 > 0.0) || l2 / l1 > params.rank_one_tol {
        return None;
    }
    let col: Vec<f64> = (1..=d).map(|i| w[(i, 0)]).collect();
    if col.iter().any(|&v| (v - v.round().clamp(-1.0, 1.0)).abs() > params.rounding_residue) {
        return None;
    }
    let x = SparseSignVector::from_reals(&col).ok()?;
    if x.nnz() != inst.sigma {
        return None;
    }
    let val = objective(inst, &x.to_vector()).ok()?;
    if (val - sdp_objective).abs() > 10.0 * params.opt_tol {
        return None;
    }
    Some(x)
}
