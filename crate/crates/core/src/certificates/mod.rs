//! Dual certificates for the SDP relaxation and checkers for the families of
//! sufficient recovery conditions.
//!
//! Naming follows the usual conventions: G = MᵀM/n, y* = −Mᵀb/n,
//! Y₁₁ = −(y*_S)ᵀx*_S, H = Y_x − y*y*ᵀ/Y₁₁, S = supp(x*) and S^c its
//! complement. Blocks are written `g_cs` for G_{S^c,S} and so on.

mod model2;
mod theorems;

pub use model2::{model2_default_choice, model2_theta_decomposition, Model2Decomposition};
pub use theorems::{
    check_cor_low_coherence, check_thm_general, check_thm_sparse, check_thm_sparse_recovery,
    check_thm_stochastic, fn_gradient, fn_value, theta_sparse_recovery, StochasticParams,
};

use crate::instance::{SilsInstance, SparseSignVector};
use crate::linalg::{self, Mat, Vector};
use crate::{Result, SilsError};

/// Slack for "≥ 0" and "⪰ 0" checks.
pub const SLACK: f64 = 1e-9;
/// Relative eigenvalue cutoff of the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-10;

pub const DELTA_GRID: [f64; 7] = [0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0];
pub const MU2_GRID_POINTS: usize = 20;

/// 20 equispaced μ₂ values on [−λ − 2, −λ + δ].
pub fn mu2_grid(lambda_min: f64, delta: f64) -> Vec<f64> {
    let (lo, hi) = (-lambda_min - 2.0, -lambda_min + delta);
    let k = MU2_GRID_POINTS - 1;
    (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    A,
    B,
    C,
    D,
    E,
    F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
}

impl Condition {
    /// Passes when margin ≥ −1e-9.
    pub fn nonneg(name: &str, margin: f64) -> Self {
        Self { name: name.into(), pass: margin >= -SLACK, margin }
    }

    /// Passes when margin > 1e-9.
    pub fn strict(name: &str, margin: f64) -> Self {
        Self { name: name.into(), pass: margin > SLACK, margin }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub delta: f64,
    pub mu2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub theorem: Theorem,
    /// Conditions at the witness, or at the best (largest minimum margin)
    /// grid point when no witness exists.
    pub conditions: Vec<Condition>,
    pub witness: Option<Witness>,
    pub grid_size: usize,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.witness.is_some()
    }

    pub fn margin(&self, name: &str) -> Option<f64> {
        self.conditions.iter().find(|c| c.name == name).map(|c| c.margin)
    }

    pub(crate) fn failed(theorem: Theorem, note: String) -> Self {
        Self { theorem, conditions: Vec::new(), witness: None, grid_size: 0, notes: vec![note] }
    }

    /// Plain-text rendering: one `name pass margin` line per condition.
    pub fn render(&self) -> String {
        let mut out = format!("theorem {:?}\npassed {}\ngrid_points {}\n", self.theorem, self.passed(), self.grid_size);
        if let Some(w) = &self.witness {
            out.push_str(&format!("witness delta={:.10e} mu2={:.10e}\n", w.delta, w.mu2));
        }
        for c in &self.conditions {
            out.push_str(&format!("{} {} {:.10e}\n", c.name, if c.pass { "pass" } else { "FAIL" }, c.margin));
        }
        for n in &self.notes {
            out.push_str(&format!("note {n}\n"));
        }
        out
    }
}

fn min_margin(conds: &[Condition]) -> f64 {
    conds.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min)
}

/// Grid reduction: the passing point with the largest minimum margin (ties
/// by grid order); otherwise the best failing point without a witness.
pub(crate) fn select_witness(
    theorem: Theorem,
    points: Vec<(f64, f64, Vec<Condition>)>,
    notes: Vec<String>,
) -> ConditionReport {
    let grid_size = points.len();
    let mut best_pass: Option<(f64, usize)> = None;
    let mut best_any: Option<(f64, usize)> = None;
    for (k, (_, _, conds)) in points.iter().enumerate() {
        let m = min_margin(conds);
        let m = if m.is_nan() { f64::NEG_INFINITY } else { m };
        if best_any.map_or(true, |(b, _)| m > b) {
            best_any = Some((m, k));
        }
        if conds.iter().all(|c| c.pass) && best_pass.map_or(true, |(b, _)| m > b) {
            best_pass = Some((m, k));
        }
    }
    match (best_pass, best_any) {
        (Some((_, k)), _) => {
            let (delta, mu2, conds) = points[k].clone();
            ConditionReport { theorem, conditions: conds, witness: Some(Witness { delta, mu2 }), grid_size, notes }
        }
        (None, Some((_, k))) => {
            ConditionReport { theorem, conditions: points[k].2.clone(), witness: None, grid_size, notes }
        }
        (None, None) => ConditionReport { theorem, conditions: Vec::new(), witness: None, grid_size, notes },
    }
}

/// Quantities shared by every construction.
#[derive(Debug, Clone)]
pub(crate) struct Ctx {
    pub sigma: usize,
    pub s: Vec<usize>,
    pub sc: Vec<usize>,
    pub g: Mat,
    pub y: Vector,
    pub x_s: Vector,
    pub y_s: Vector,
    pub y_c: Vector,
    pub y11: f64,
    pub g_ss: Mat,
    pub g_cs: Mat,
    pub g_cc: Mat,
    pub lam_min_gss: f64,
    /// cos²θ = Y₁₁² / (σ‖y*_S‖²).
    pub cos2: f64,
}

impl Ctx {
    pub fn new(inst: &SilsInstance, x: &SparseSignVector) -> Result<Self> {
        let d = inst.d();
        if x.len() != d {
            return Err(SilsError::Dimension(format!("x* has {} entries, d = {d}", x.len())));
        }
        if x.nnz() != inst.sigma {
            return Err(SilsError::InvalidParam(format!("‖x*‖₀ = {} but sigma = {}", x.nnz(), inst.sigma)));
        }
        let g = inst.gram();
        let y = -(inst.m.transpose() * &inst.b) / inst.n() as f64;
        Self::from_parts(g, y, x)
    }

    pub fn from_parts(g: Mat, y: Vector, x: &SparseSignVector) -> Result<Self> {
        let d = g.nrows();
        let s = x.support();
        let sc = linalg::complement(&s, d);
        let sigma = s.len();
        let x_s = linalg::sub_vector(&x.to_vector(), &s);
        let y_s = linalg::sub_vector(&y, &s);
        let y_c = linalg::sub_vector(&y, &sc);
        let y11 = -y_s.dot(&x_s);
        if !(y11 > 0.0) {
            return Err(SilsError::Precondition(format!(
                "Y11 = {y11:.6e} ≤ 0: no certificate can exist (y*_S not negatively aligned with x*_S)"
            )));
        }
        let g_ss = linalg::sub_matrix(&g, &s, &s);
        let g_cs = linalg::sub_matrix(&g, &sc, &s);
        let g_cc = linalg::sub_matrix(&g, &sc, &sc);
        let lam_min_gss = linalg::lambda_min(&g_ss)?;
        let cos2 = (y11 * y11 / (sigma as f64 * y_s.norm_squared())).min(1.0);
        Ok(Self { sigma, s, sc, g, y, x_s, y_s, y_c, y11, g_ss, g_cs, g_cc, lam_min_gss, cos2 })
    }

    pub fn dc(&self) -> usize {
        self.sc.len()
    }

    /// min_{i∈S} [−y* − G_SS x*_S]ᵢ / x*ᵢ.
    pub fn min_ratio(&self) -> f64 {
        let r = -&self.y_s - &self.g_ss * &self.x_s;
        (0..self.sigma).map(|i| r[i] / self.x_s[i]).fold(f64::INFINITY, f64::min)
    }

    pub fn mu3(&self, delta: f64) -> f64 {
        (self.lam_min_gss - delta + self.min_ratio()) / self.sigma as f64
    }

    pub fn h0(&self) -> Mat {
        Mat::identity(self.sigma, self.sigma) - &self.x_s * self.x_s.transpose() / self.sigma as f64
    }

    /// P = G_{S,S^c} − y*_S y*_{S^c}ᵀ / Y₁₁.
    pub fn p_mat(&self) -> Mat {
        self.g_cs.transpose() - &self.y_s * self.y_c.transpose() / self.y11
    }

    /// Θ = G_{S^c,S^c} + μ₂I − y_c y_cᵀ/Y₁₁ − Pᵀ(1/δ)H⁰P.
    pub fn theta(&self, delta: f64, mu2: f64) -> Mat {
        let p = self.p_mat();
        &self.g_cc + Mat::identity(self.dc(), self.dc()) * mu2
            - &self.y_c * self.y_c.transpose() / self.y11
            - p.transpose() * self.h0() * &p / delta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualData {
    pub support: Vec<usize>,
    pub y_star: Vector,
    pub y11_star: f64,
    pub theta: f64,
    pub mu3_star: f64,
    pub delta: f64,
    pub mu2_star: f64,
}

fn dual_from_ctx(ctx: &Ctx, delta: f64, mu2: f64) -> DualData {
    let cos = (ctx.y11 / (ctx.sigma as f64).sqrt() / ctx.y_s.norm()).clamp(-1.0, 1.0);
    DualData {
        support: ctx.s.clone(),
        y_star: ctx.y.clone(),
        y11_star: ctx.y11,
        theta: cos.acos(),
        mu3_star: ctx.mu3(delta),
        delta,
        mu2_star: mu2,
    }
}

/// θ is reported as arccos(Y₁₁/(√σ‖y*_S‖)) ∈ [0, π/2): the angle between
/// −y*_S and x*_S (only cos²θ enters any condition).
pub fn dual_data(inst: &SilsInstance, x_star: &SparseSignVector, delta: f64, mu2_star: f64) -> Result<DualData> {
    let ctx = Ctx::new(inst, x_star)?;
    Ok(dual_from_ctx(&ctx, delta, mu2_star))
}

fn p_from_ctx(ctx: &Ctx, d: usize, mu3: f64, mu2: f64) -> Vector {
    let rhs = -(&ctx.g_ss * &ctx.x_s) - &ctx.x_s * (ctx.sigma as f64 * mu3) - &ctx.y_s - &ctx.x_s * mu2;
    let mut p = Vector::zeros(d);
    for (k, &i) in ctx.s.iter().enumerate() {
        p[i] = rhs[k] / ctx.x_s[k];
    }
    p
}

/// p*ᵢ = [−G_SS x* − σμ₃x* − y*_S − μ₂x*]ᵢ / x*ᵢ on S, zero elsewhere.
pub fn build_p_star(dual: &DualData, inst: &SilsInstance, x_star: &SparseSignVector) -> Result<Vector> {
    let ctx = Ctx::new(inst, x_star)?;
    Ok(p_from_ctx(&ctx, inst.d(), dual.mu3_star, dual.mu2_star))
}

#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub dual: DualData,
    pub p_star: Vector,
    pub yx_star: Mat,
    pub h: Mat,
    pub nu: f64,
    pub conditions: Vec<Condition>,
}

impl DualCertificate {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }
}

/// (Y_x)_{S,S} = G_SS + μ₃x*x*ᵀ + diag(p*_S + μ₂), i.e. the subgradient
/// condition on the support holds by construction.
fn yx_support_block(ctx: &Ctx, p: &Vector, mu3: f64, mu2: f64) -> Mat {
    let p_s = linalg::sub_vector(p, &ctx.s);
    let mut blk = &ctx.g_ss + &ctx.x_s * ctx.x_s.transpose() * mu3;
    for i in 0..ctx.sigma {
        blk[(i, i)] += p_s[i] + mu2;
    }
    blk
}

fn assemble(ctx: &Ctx, d: usize, yx_ss: &Mat, yx_cs: &Mat, yx_cc: &Mat) -> Mat {
    let mut yx = Mat::zeros(d, d);
    linalg::set_block(&mut yx, &ctx.s, &ctx.s, yx_ss);
    linalg::set_block(&mut yx, &ctx.sc, &ctx.s, yx_cs);
    linalg::set_block(&mut yx, &ctx.s, &ctx.sc, &yx_cs.transpose());
    linalg::set_block(&mut yx, &ctx.sc, &ctx.sc, yx_cc);
    linalg::symmetrize(&yx)
}

fn finish_certificate(ctx: &Ctx, inst: &SilsInstance, x: &SparseSignVector, dual: DualData, p: Vector, yx: Mat, nu: f64) -> Result<DualCertificate> {
    let h = &yx - &ctx.y * ctx.y.transpose() / ctx.y11;
    let mut cert = DualCertificate { dual, p_star: p, yx_star: yx, h, nu, conditions: Vec::new() };
    cert.conditions = check_certificate(&cert, inst, x)?.conditions;
    Ok(cert)
}

/// Certificate along the general (dense-noise) route: requires B1–B2 at
/// (δ, μ₂); ν is the B2 slack.
pub fn build_certificate_general(
    inst: &SilsInstance,
    x_star: &SparseSignVector,
    delta: f64,
    mu2_star: f64,
) -> Result<DualCertificate> {
    let ctx = Ctx::new(inst, x_star)?;
    let conds = theorems::b_conditions(&ctx, delta, mu2_star);
    if let Some(bad) = conds.iter().find(|c| !c.pass) {
        return Err(SilsError::Precondition(format!(
            "B-conditions fail at delta={delta}, mu2={mu2_star}: {} margin {:.3e}",
            bad.name, bad.margin
        )));
    }
    let nu = conds.iter().find(|c| c.name == "B2").map(|c| c.margin).unwrap_or(0.0);
    let d = inst.d();
    let dual = dual_from_ctx(&ctx, delta, mu2_star);
    let p = p_from_ctx(&ctx, d, dual.mu3_star, mu2_star);
    let yx_ss = yx_support_block(&ctx, &p, dual.mu3_star, mu2_star);
    let yx_cs = -(&ctx.y_c * ctx.x_s.transpose()) / ctx.sigma as f64;
    let h_ss = &yx_ss - &ctx.y_s * ctx.y_s.transpose() / ctx.y11;
    let h_cs = &yx_cs - &ctx.y_c * ctx.y_s.transpose() / ctx.y11;
    let pinv = linalg::pinv_sym(&h_ss, PINV_CUTOFF)?;
    let dc = ctx.dc();
    let yx_cc = Mat::identity(dc, dc) * nu + &ctx.y_c * ctx.y_c.transpose() / ctx.y11 + &h_cs * pinv * h_cs.transpose();
    let yx = assemble(&ctx, d, &yx_ss, &yx_cs, &yx_cc);
    finish_certificate(&ctx, inst, x_star, dual, p, yx, nu)
}

/// Θ of the sparse-noise route at (δ, μ₂).
pub fn theta_matrix(inst: &SilsInstance, x_star: &SparseSignVector, delta: f64, mu2_star: f64) -> Result<Mat> {
    Ok(Ctx::new(inst, x_star)?.theta(delta, mu2_star))
}

/// Checks a decomposition Θ = Θ₁ + Θ₂ against A2: Θ₁ ≻ 0 with ‖Θ₂‖max ≤ μ₃,
/// or Θ₁ ⪰ 0 with ‖Θ₂‖max < μ₃. Returns (reconstruction residual, A2 margin).
pub(crate) fn decomposition_margin(theta: &Mat, t1: &Mat, t2: &Mat, mu3: f64) -> Result<(f64, f64)> {
    let resid = (t1 + t2 - theta).norm();
    let lmin = linalg::lambda_min(t1)?;
    let bound = mu3 - linalg::max_norm(t2);
    // Either alternative, folded into one margin that is > SLACK exactly when
    // its strict part exceeds SLACK and its non-strict part is ≥ −SLACK.
    let alt1 = lmin.min(bound + 2.0 * SLACK);
    let alt2 = (lmin + 2.0 * SLACK).min(bound);
    Ok((resid, alt1.max(alt2)))
}

/// Certificate along the sparse-noise route, given Θ = Θ₁ + Θ₂.
pub fn build_certificate_sparse(
    inst: &SilsInstance,
    x_star: &SparseSignVector,
    delta: f64,
    mu2_star: f64,
    theta1: &Mat,
    theta2: &Mat,
) -> Result<DualCertificate> {
    let ctx = Ctx::new(inst, x_star)?;
    let dc = ctx.dc();
    if theta1.shape() != (dc, dc) || theta2.shape() != (dc, dc) {
        return Err(SilsError::Dimension(format!("Θ blocks must be {dc}x{dc}")));
    }
    let theta = ctx.theta(delta, mu2_star);
    let mu3 = ctx.mu3(delta);
    let (resid, margin) = decomposition_margin(&theta, theta1, theta2, mu3)?;
    if resid > 1e-8 {
        return Err(SilsError::Precondition(format!("Θ₁ + Θ₂ differs from Θ by {resid:.3e} (Frobenius)")));
    }
    if margin <= SLACK {
        return Err(SilsError::Precondition(format!("decomposition violates A2 (margin {margin:.3e})")));
    }
    let nu = mu3 - linalg::max_norm(theta2);
    let d = inst.d();
    let dual = dual_from_ctx(&ctx, delta, mu2_star);
    let p = p_from_ctx(&ctx, d, mu3, mu2_star);
    let yx_ss = yx_support_block(&ctx, &p, mu3, mu2_star);
    let r = (&ctx.g_cs * &ctx.x_s + &ctx.y_c) / ctx.sigma as f64;
    let yx_cs = &ctx.g_cs - &r * ctx.x_s.transpose();
    let pm = ctx.p_mat();
    let yx_cc = theta1 + Mat::identity(dc, dc) * nu + &ctx.y_c * ctx.y_c.transpose() / ctx.y11
        + pm.transpose() * ctx.h0() * &pm / delta;
    let yx = assemble(&ctx, d, &yx_ss, &yx_cs, &yx_cc);
    finish_certificate(&ctx, inst, x_star, dual, p, yx, nu)
}

/// Which construction produced a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    General,
    Sparse,
}

/// Scans the (δ, μ₂) grid, building the general-route certificate and the
/// sparse-route one (with the automatic Θ split) wherever their
/// preconditions hold, and keeps the passing certificate with the largest
/// minimum margin.
pub fn search_certificate(
    inst: &SilsInstance,
    x_star: &SparseSignVector,
    deltas: &[f64],
    mu2s: Option<&[f64]>,
) -> Result<(ConditionReport, Option<(Route, DualCertificate)>)> {
    let ctx = match Ctx::new(inst, x_star) {
        Ok(c) => c,
        Err(SilsError::Precondition(m)) => return Ok((ConditionReport::failed(Theorem::F, m), None)),
        Err(e) => return Err(e),
    };
    let mut found: Vec<(f64, f64, Route, DualCertificate)> = Vec::new();
    for (delta, mu2) in theorems::grid(deltas, mu2s, ctx.lam_min_gss) {
        if let Ok(c) = build_certificate_general(inst, x_star, delta, mu2) {
            found.push((delta, mu2, Route::General, c));
        }
        let theta = ctx.theta(delta, mu2);
        let (t1, t2) = theorems::auto_decomposition(&theta)?;
        if let Ok(c) = build_certificate_sparse(inst, x_star, delta, mu2, &t1, &t2) {
            found.push((delta, mu2, Route::Sparse, c));
        }
    }
    let points = found.iter().map(|(d, m, _, c)| (*d, *m, c.conditions.clone())).collect();
    let notes = vec![format!("{} constructible certificates", found.len())];
    let mut report = select_witness(Theorem::F, points, notes);
    let chosen = found
        .into_iter()
        .find(|(d, m, _, c)| {
            report.witness.as_ref().is_some_and(|w| w.delta == *d && w.mu2 == *m) && c.conditions == report.conditions
        })
        .map(|(_, _, r, c)| (r, c));
    if let Some((route, _)) = &chosen {
        report.notes.push(format!("route {route:?}"));
    }
    Ok((report, chosen))
}

/// Second-smallest eigenvalue (`+∞` below dimension 2).
fn lambda2(a: &Mat) -> Result<f64> {
    let v = linalg::eigvals(a)?;
    Ok(if v.len() < 2 { f64::INFINITY } else { v[1] })
}

/// Evaluates F1–F4, λ₂(H_SS) ≥ δ, p* ≥ 0, μ₃ ≥ 0 and the uniqueness test λ₂(H) > 0.
pub fn check_certificate(cert: &DualCertificate, inst: &SilsInstance, x_star: &SparseSignVector) -> Result<ConditionReport> {
    let ctx = Ctx::new(inst, x_star)?;
    let (s, sc) = (&ctx.s, &ctx.sc);
    let h = &cert.h;
    let h_ss = linalg::sub_matrix(h, s, s);
    let h_cs = linalg::sub_matrix(h, sc, s);
    let h_cc = linalg::sub_matrix(h, sc, sc);
    let pinv = linalg::pinv_sym(&h_ss, PINV_CUTOFF)?;
    let schur = &h_cc - &h_cs * pinv * h_cs.transpose();
    let f1 = linalg::lambda_min(&schur)?;
    let f2 = -linalg::inf_norm_vec(&(&h_cs * &ctx.x_s));
    let diff = &ctx.g - &cert.yx_star;
    let mu3 = cert.dual.mu3_star;
    let f3 = mu3 - linalg::max_norm(&linalg::sub_matrix(&diff, sc, s));
    let mut dcc = linalg::sub_matrix(&diff, sc, sc);
    for i in 0..sc.len() {
        dcc[(i, i)] += cert.dual.mu2_star;
    }
    let f4 = mu3 - linalg::max_norm(&dcc);
    let p_min = s.iter().map(|&i| cert.p_star[i]).fold(f64::INFINITY, f64::min);
    let conditions = vec![
        Condition::nonneg("F1", f1),
        Condition::nonneg("F2", f2),
        Condition::nonneg("F3", f3),
        Condition::nonneg("F4", f4),
        Condition::nonneg("lambda2_HSS", lambda2(&h_ss)? - cert.dual.delta),
        Condition::nonneg("p_nonneg", p_min),
        Condition::nonneg("mu3_nonneg", mu3),
        Condition::strict("lambda2H", lambda2(h)?),
    ];
    let all = conditions.iter().all(|c| c.pass);
    Ok(ConditionReport {
        theorem: Theorem::F,
        conditions,
        witness: all.then(|| Witness { delta: cert.dual.delta, mu2: cert.dual.mu2_star }),
        grid_size: 1,
        notes: Vec::new(),
    })
}
