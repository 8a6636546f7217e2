//! Synthetic instances from the three linear-model families.
//!
//! Stream layout per instance: design-matrix Gaussians (row-major; Model 2
//! draws Y′ then Y″), then the signs of z* in index order, then the noise.
//! Only the Gaussian member of each sub-Gaussian family is generated.

use crate::instance::{GroundTruth, Model2Split, SilsInstance};
use crate::linalg::{self, Mat, Vector};
use crate::rng::SplitMix64;
use crate::{Result, SilsError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub model_id: u8,
    pub n: usize,
    pub d: usize,
    pub sigma: usize,
    pub noise_param: f64,
    pub c: f64,
    pub c_prime: f64,
    pub c_dprime: f64,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(model_id: u8, n: usize, d: usize, sigma: usize, noise_param: f64, seed: u64) -> Self {
        Self { model_id, n, d, sigma, noise_param, c: 1.2, c_prime: 1.05, c_dprime: 1.0, seed }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.sigma == 0 || self.sigma > self.d {
            return Err(SilsError::InvalidParam(format!(
                "need n, d ≥ 1 and 1 ≤ sigma ≤ d (n={}, d={}, sigma={})",
                self.n, self.d, self.sigma
            )));
        }
        if !(self.noise_param >= 0.0 && self.noise_param.is_finite()) {
            return Err(SilsError::InvalidParam("noise parameter must be finite and ≥ 0".into()));
        }
        match self.model_id {
            1 | 3 => Ok(()),
            2 => {
                if self.sigma >= self.d {
                    return Err(SilsError::InvalidParam("Model 2 needs sigma < d".into()));
                }
                if !(self.c > 1.0 && self.c_prime > 1.0 && self.c_dprime > 0.0) {
                    return Err(SilsError::InvalidParam("Model 2 needs c > 1, c' > 1, c'' > 0".into()));
                }
                Ok(())
            }
            m => Err(SilsError::InvalidParam(format!("unknown model {m}"))),
        }
    }
}

pub fn generate(spec: &ModelSpec) -> Result<(SilsInstance, GroundTruth)> {
    match spec.model_id {
        1 => gen_model1(spec),
        2 => gen_model2(spec),
        3 => gen_model3(spec),
        m => Err(SilsError::InvalidParam(format!("unknown model {m}"))),
    }
}

fn gaussian_matrix(rng: &mut SplitMix64, rows: usize, cols: usize) -> Mat {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.next_gaussian()).collect();
    Mat::from_row_slice(rows, cols, &data)
}

fn finish(
    rng: &mut SplitMix64,
    m: Mat,
    z_star: Vector,
    spec: &ModelSpec,
    cov: Mat,
    split: Option<Model2Split>,
) -> Result<(SilsInstance, GroundTruth)> {
    let noise = Vector::from_iterator(spec.n, (0..spec.n).map(|_| spec.noise_param * rng.next_gaussian()));
    let mz = &m * &z_star;
    let b = &mz + &noise;
    // Store ε as b − Mz* so the model identity holds bit-for-bit.
    let eps = &b - &mz;
    let inst = SilsInstance::new(m, b, spec.sigma)?;
    Ok((inst, GroundTruth { z_star, eps, cov: Some(cov), noise_param: spec.noise_param, split }))
}

/// Model 1: i.i.d. N(0,1) design, |z*ᵢ| = 2 on the first σ indices and 1 elsewhere.
pub fn gen_model1(spec: &ModelSpec) -> Result<(SilsInstance, GroundTruth)> {
    if spec.model_id != 1 {
        return Err(SilsError::InvalidParam("gen_model1 called with another model id".into()));
    }
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let m = gaussian_matrix(&mut rng, spec.n, spec.d);
    let z = Vector::from_iterator(
        spec.d,
        (0..spec.d).map(|i| rng.next_sign() * if i < spec.sigma { 2.0 } else { 1.0 }),
    );
    finish(&mut rng, m, z, spec, Mat::identity(spec.d, spec.d), None)
}

/// Model 3: i.i.d. N(0,1) design, z* = (a, 0) with a ∈ {±1}^σ.
pub fn gen_model3(spec: &ModelSpec) -> Result<(SilsInstance, GroundTruth)> {
    if spec.model_id != 3 {
        return Err(SilsError::InvalidParam("gen_model3 called with another model id".into()));
    }
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let m = gaussian_matrix(&mut rng, spec.n, spec.d);
    let z = signed_head(&mut rng, spec.d, spec.sigma);
    finish(&mut rng, m, z, spec, Mat::identity(spec.d, spec.d), None)
}

fn signed_head(rng: &mut SplitMix64, d: usize, sigma: usize) -> Vector {
    let mut z = Vector::zeros(d);
    for i in 0..sigma {
        z[i] = rng.next_sign();
    }
    z
}

/// The Model 2 covariance Σ = [[cI, 11ᵀ], [11ᵀ, c′σ11ᵀ + c″I]].
pub fn model2_cov(d: usize, sigma: usize, c: f64, c_prime: f64, c_dprime: f64) -> Mat {
    let mut s = model2_cov_low_rank(d, sigma, c, c_prime);
    for i in sigma..d {
        s[(i, i)] += c_dprime;
    }
    s
}

/// Σ₁: Σ without the c″I term of the bottom-right block.
pub fn model2_cov_low_rank(d: usize, sigma: usize, c: f64, c_prime: f64) -> Mat {
    Mat::from_fn(d, d, |i, j| match (i < sigma, j < sigma) {
        (true, true) => {
            if i == j {
                c
            } else {
                0.0
            }
        }
        (true, false) | (false, true) => 1.0,
        (false, false) => c_prime * sigma as f64,
    })
}

/// Model 2: rows N(0, Σ) realised as M = Y′Σ₁^{1/2} + Y″Σ₂^{1/2} with
/// Σ₂^{1/2} = diag(0, √c″ I); z* = (a, 0) with a ∈ {±1}^σ. The two summands
/// are kept in the ground truth.
pub fn gen_model2(spec: &ModelSpec) -> Result<(SilsInstance, GroundTruth)> {
    if spec.model_id != 2 {
        return Err(SilsError::InvalidParam("gen_model2 called with another model id".into()));
    }
    spec.validate()?;
    let (n, d, sigma) = (spec.n, spec.d, spec.sigma);
    let cov = model2_cov(d, sigma, spec.c, spec.c_prime, spec.c_dprime);
    if linalg::lambda_min(&cov)? < -1e-10 {
        return Err(SilsError::InvalidParam("Model 2 covariance is not PSD".into()));
    }
    let root1 = linalg::psd_sqrt(&model2_cov_low_rank(d, sigma, spec.c, spec.c_prime), 1e-10)?;

    let mut rng = SplitMix64::new(spec.seed);
    let y1 = gaussian_matrix(&mut rng, n, d);
    let y2 = gaussian_matrix(&mut rng, n, d - sigma);
    let m1 = y1 * &root1;
    let mut m2 = Mat::zeros(n, d);
    m2.view_mut((0, sigma), (n, d - sigma)).copy_from(&(y2 * spec.c_dprime.sqrt()));
    let m = &m1 + &m2;
    let z = signed_head(&mut rng, d, sigma);
    let split = Model2Split { m1, m2, c: spec.c, c_prime: spec.c_prime, c_dprime: spec.c_dprime };
    finish(&mut rng, m, z, spec, cov, Some(split))
}

pub fn psd_sqrt(s: &Mat, tol: f64) -> Result<Mat> {
    linalg::psd_sqrt(s, tol)
}
