//! Explicit Θ = Θ₁ + Θ₂ split for Model 2 instances, built from the
//! M = M₁ + M₂ decomposition retained by the generator.
//!
//! Every S^c column of M₁ is the same vector, so with N = (M₂ᵀM₁)_{S^c,S}/n
//! and e = (Mᵀε)_{S^c}/n the Gram blocks collapse to
//!   (M₁ᵀM₁)_{S^c,S}/n = 1uᵀ,  (M₁ᵀM₁)_{S^c,S^c}/n = c₁11ᵀ,  (M₁ᵀM₂)_{S^c,S^c}/n = 1vᵀ.
//! The cross terms with e carry a minus sign; Θ₂ collects every piece that is
//! small in max-norm.

use super::{Ctx, Theorem};
use crate::instance::{GroundTruth, SilsInstance, SparseSignVector};
use crate::linalg::{self, Mat, Vector};
use crate::{Result, SilsError};

/// c̃ and č: the two small slack constants.
const SMALL_C: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct Model2Decomposition {
    pub theta1: Mat,
    pub theta2: Mat,
    pub c_bar: f64,
    pub c_hat: f64,
    pub c_tilde: f64,
    pub c_check: f64,
    /// ‖Θ₁ + Θ₂ − Θ‖_F.
    pub residual: f64,
    pub theta1_lambda_min: f64,
    pub theta2_max: f64,
    pub mu3: f64,
    pub valid: bool,
}

impl Model2Decomposition {
    pub fn render(&self) -> String {
        format!(
            "theorem {:?} model-2 decomposition: valid {}\n  c_bar {:.6e} c_hat {:.6e} c_tilde {:.6e} c_check {:.6e}\n  residual {:.3e} lambda_min(Theta1) {:.6e} max|Theta2| {:.6e} mu3 {:.6e}\n",
            Theorem::E,
            self.valid,
            self.c_bar,
            self.c_hat,
            self.c_tilde,
            self.c_check,
            self.residual,
            self.theta1_lambda_min,
            self.theta2_max,
            self.mu3
        )
    }
}

/// δ = 1 + max(λmin(G_SS) − 1 − c″, 0) and μ₂ = −c″.
pub fn model2_default_choice(inst: &SilsInstance, truth: &GroundTruth) -> Result<(f64, f64)> {
    let split = truth
        .split
        .as_ref()
        .ok_or_else(|| SilsError::Precondition("instance carries no Model 2 split".into()))?;
    let s: Vec<usize> = (0..inst.d()).filter(|&i| truth.z_star[i] != 0.0).collect();
    let lam = linalg::lambda_min(&linalg::sub_matrix(&inst.gram(), &s, &s))?;
    Ok((1.0 + (lam - 1.0 - split.c_dprime).max(0.0), -split.c_dprime))
}

fn outer(a: &Vector, b: &Vector) -> Mat {
    a * b.transpose()
}

pub fn model2_theta_decomposition(
    inst: &SilsInstance,
    truth: &GroundTruth,
    delta: f64,
    mu2: f64,
    c8: f64,
) -> Result<Model2Decomposition> {
    let split = truth
        .split
        .as_ref()
        .ok_or_else(|| SilsError::Precondition("instance carries no Model 2 split".into()))?;
    let x = SparseSignVector::from_reals(truth.z_star.as_slice())?;
    let ctx = Ctx::new(inst, &x)?;
    let (n, d, sigma) = (inst.n() as f64, inst.d(), ctx.sigma);
    if ctx.dc() == 0 {
        return Err(SilsError::Precondition("Model 2 decomposition needs σ < d".into()));
    }
    if (&split.m1 + &split.m2 - &inst.m).amax() > 1e-12 * (1.0 + inst.m.amax()) {
        return Err(SilsError::Precondition("M₁ + M₂ does not reproduce M".into()));
    }
    let m1_c = split.m1.select_columns(&ctx.sc);
    let col0 = m1_c.column(0).into_owned();
    if m1_c.column_iter().any(|c| (c - &col0).amax() > 1e-9 * (1.0 + col0.amax())) {
        return Err(SilsError::Precondition("S^c columns of M₁ are not identical".into()));
    }
    let m1_s = split.m1.select_columns(&ctx.s);
    let m2_c = split.m2.select_columns(&ctx.sc);
    let u: Vector = m1_s.transpose() * &col0 / n;
    let v: Vector = m2_c.transpose() * &col0 / n;
    let c1 = col0.norm_squared() / n;
    let nmat: Mat = m2_c.transpose() * &m1_s / n;
    let g2cc: Mat = m2_c.transpose() * &m2_c / n;

    let y11 = ctx.y11;
    let z = &ctx.x_s;
    let ys = &ctx.y_s;
    let h0 = ctx.h0();
    let k = Mat::identity(sigma, sigma) + z * ys.transpose() / y11;
    let b = &k * &h0 * k.transpose() / delta + z * z.transpose() / y11;
    let e = linalg::sub_vector(&(inst.m.transpose() * &truth.eps), &ctx.sc) / n;
    let dc = ctx.dc();
    let ones = Vector::from_element(dc, 1.0);

    let c_tilde = SMALL_C;
    let c_check = SMALL_C;
    let c_hat = u.dot(&(&b * &u));
    let c_bar = split.c_prime * sigma as f64 - c_hat - c8 * sigma as f64 * ((d as f64).ln() / n).sqrt() - c_tilde - c_check;
    if !(c_bar > 0.0) {
        return Err(SilsError::Precondition(format!(
            "decomposition unavailable: c̄ = {c_bar:.6e} ≤ 0 at (n, σ, d) = ({}, {sigma}, {d})",
            inst.n()
        )));
    }

    let uz = u.dot(z);
    let nz = &nmat * z;
    let nbu = &nmat * (&b * &u);
    let kh0y = &k * &h0 * ys;
    let q = ys.dot(&(&h0 * ys));

    let t2a = -outer(&e, &e) / y11;
    let w_b = &ones * c_tilde.sqrt() - &e * (uz / (y11 * c_tilde.sqrt()));
    let t1b = outer(&w_b, &w_b);
    let t2b = -(outer(&e, &nz) + outer(&nz, &e)) / y11 - outer(&e, &e) * (uz * uz / (y11 * y11 * c_tilde));
    let gk = &ctx.g_cs * &kh0y;
    let t2c = -(outer(&gk, &e) + outer(&e, &gk)) / (delta * y11);
    let t2d = -outer(&e, &e) * (q / (delta * y11 * y11));
    let w_e = &ones * c_bar.sqrt() - &nbu / c_bar.sqrt();
    let t1e = outer(&ones, &ones) * (c_hat - u.dot(&(&b * &u))) + outer(&w_e, &w_e);
    let t2e = -outer(&nbu, &nbu) / c_bar - &nmat * &b * nmat.transpose();
    let w_f = &ones * c_check.sqrt() + &v / c_check.sqrt();
    let t1f = outer(&ones, &ones) * (c1 - (c_bar + c_hat + c_tilde + c_check)) + outer(&w_f, &w_f);
    let t2f = -outer(&v, &v) / c_check + g2cc + Mat::identity(dc, dc) * mu2;

    let theta1 = linalg::symmetrize(&(t1b + t1e + t1f));
    let theta2 = linalg::symmetrize(&(t2a + t2b + t2c + t2d + t2e + t2f));
    let theta = ctx.theta(delta, mu2);
    let residual = (&theta1 + &theta2 - &theta).norm();
    let theta1_lambda_min = linalg::lambda_min(&theta1)?;
    let theta2_max = linalg::max_norm(&theta2);
    let mu3 = ctx.mu3(delta);
    let valid = theta1_lambda_min >= -1e-9 && residual <= 1e-8 && theta2_max <= mu3;
    Ok(Model2Decomposition {
        theta1,
        theta2,
        c_bar,
        c_hat,
        c_tilde,
        c_check,
        residual,
        theta1_lambda_min,
        theta2_max,
        mu3,
        valid,
    })
}
