//! Problem data, objective evaluation, matrix utilities, metrics and the
//! instance text format.

use std::fmt::Write as _;

use crate::linalg::{self, Mat, Vector};
use crate::{Result, SilsError};

/// Entries with |zᵢ| above this count as nonzero in continuous outputs.
pub const ZERO_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SilsInstance {
    pub m: Mat,
    pub b: Vector,
    pub sigma: usize,
}

impl SilsInstance {
    pub fn new(m: Mat, b: Vector, sigma: usize) -> Result<Self> {
        let (n, d) = m.shape();
        if n == 0 || d == 0 {
            return Err(SilsError::InvalidInstance("M must be non-empty".into()));
        }
        if b.len() != n {
            return Err(SilsError::Dimension(format!("b has {} entries, M has {} rows", b.len(), n)));
        }
        if sigma == 0 || sigma > d {
            return Err(SilsError::InvalidInstance(format!("sigma={sigma} outside 1..={d}")));
        }
        if m.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(SilsError::InvalidInstance("non-finite entry".into()));
        }
        Ok(Self { m, b, sigma })
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn d(&self) -> usize {
        self.m.ncols()
    }

    /// G = MᵀM/n.
    pub fn gram(&self) -> Mat {
        self.m.transpose() * &self.m / self.n() as f64
    }
}

/// Data attached to instances drawn from the linear model b = Mz* + ε.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub z_star: Vector,
    pub eps: Vector,
    pub cov: Option<Mat>,
    pub noise_param: f64,
    /// Model 2 only: the two independent summands of M.
    pub split: Option<Model2Split>,
}

/// M = M₁ + M₂ with M₁ᵀ = Σ₁^{1/2}Y′ and M₂ᵀ = Σ₂^{1/2}Y″, plus the model constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Model2Split {
    pub m1: Mat,
    pub m2: Mat,
    pub c: f64,
    pub c_prime: f64,
    pub c_dprime: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SparseSignVector {
    x: Vec<i8>,
}

impl SparseSignVector {
    pub fn new(x: Vec<i8>) -> Result<Self> {
        if x.iter().any(|v| !(-1..=1).contains(v)) {
            return Err(SilsError::InvalidParam("sign vector entries must lie in {-1,0,1}".into()));
        }
        Ok(Self { x })
    }

    /// Rounds a real vector entrywise (must already be within 0.5 of {−1,0,1}).
    pub fn from_reals(v: &[f64]) -> Result<Self> {
        Self::new(v.iter().map(|&t| t.round().clamp(-1.0, 1.0) as i8).collect())
    }

    /// Signs of the nonzeros of `z` (|zᵢ| > tol).
    pub fn sign_pattern(z: &Vector, tol: f64) -> Self {
        Self {
            x: z.iter()
                .map(|&t| if t > tol { 1 } else if t < -tol { -1 } else { 0 })
                .collect(),
        }
    }

    pub fn entries(&self) -> &[i8] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.x.len()).filter(|&i| self.x[i] != 0).collect()
    }

    pub fn nnz(&self) -> usize {
        self.x.iter().filter(|&&v| v != 0).count()
    }

    pub fn to_vector(&self) -> Vector {
        Vector::from_iterator(self.x.len(), self.x.iter().map(|&v| v as f64))
    }

    pub fn neg(&self) -> Self {
        Self { x: self.x.iter().map(|v| -v).collect() }
    }
}

/// (1/n)‖Mx − b‖².
pub fn objective(inst: &SilsInstance, x: &Vector) -> Result<f64> {
    if x.len() != inst.d() {
        return Err(SilsError::Dimension(format!("x has {} entries, d = {}", x.len(), inst.d())));
    }
    let r = &inst.m * x - &inst.b;
    Ok(r.norm_squared() / inst.n() as f64)
}

/// (1/n)AᵀA for A = (−b  M).
pub fn gram_lift(inst: &SilsInstance) -> Mat {
    let (n, d) = inst.m.shape();
    let mut a = Mat::zeros(n, d + 1);
    a.set_column(0, &(-&inst.b));
    a.view_mut((0, 1), (n, d)).copy_from(&inst.m);
    let c = a.transpose() * &a / n as f64;
    linalg::symmetrize(&c)
}

/// max_{i≠j} |ψᵢⱼ| / √(ψᵢᵢψⱼⱼ), with 0/0 = 0.
pub fn coherence(psi: &Mat) -> Result<f64> {
    let d = psi.nrows();
    if d != psi.ncols() {
        return Err(SilsError::Dimension(format!("coherence of {}x{}", d, psi.ncols())));
    }
    let mut best = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let num = psi[(i, j)].abs();
            let den = (psi[(i, i)] * psi[(j, j)]).max(0.0).sqrt();
            let r = if num == 0.0 {
                0.0
            } else if den == 0.0 {
                f64::INFINITY
            } else {
                num / den
            };
            best = best.max(r);
        }
    }
    Ok(best)
}

/// ‖P‖_{∞→∞}: the maximum absolute row sum.
pub fn inf_op_norm(p: &Mat) -> f64 {
    p.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub nonzeros: usize,
    pub tpr: f64,
    pub prediction_error: f64,
    pub successful_recovery_rate: f64,
    /// Present when a covariance is known and ϱ > 0.
    pub snr: Option<f64>,
}

/// Indices of the σ largest |zᵢ|, ties to the lower index, returned ascending.
pub fn top_sigma(z: &Vector, sigma: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..z.len()).collect();
    idx.sort_by(|&i, &j| z[j].abs().total_cmp(&z[i].abs()).then(i.cmp(&j)));
    let mut top: Vec<usize> = idx.into_iter().take(sigma).collect();
    top.sort_unstable();
    top
}

pub fn support_of(z: &Vector, tol: f64) -> Vec<usize> {
    (0..z.len()).filter(|&i| z[i].abs() > tol).collect()
}

pub fn metrics(z: &Vector, truth: &GroundTruth, m: &Mat, sigma: usize) -> Result<MetricsRow> {
    let d = m.ncols();
    if z.len() != d || truth.z_star.len() != d {
        return Err(SilsError::Dimension("metrics: z, z* and M disagree".into()));
    }
    let s_true = support_of(&truth.z_star, 0.0);
    if s_true.is_empty() {
        return Err(SilsError::InvalidParam("metrics: z* has empty support".into()));
    }
    let s_hat = support_of(z, ZERO_TOL);
    let hits = s_hat.iter().filter(|i| s_true.contains(i)).count();
    let top = top_sigma(z, sigma);
    // Zero entries never count: with fewer than σ nonzeros the remaining
    // slots of S_max are ties, and breaking them by index would credit the
    // lowest indices for free.
    let top_hits = top.iter().filter(|&&i| z[i].abs() > ZERO_TOL && s_true.contains(&i)).count();

    let mz = m * &truth.z_star;
    let denom = mz.norm_squared();
    if denom == 0.0 {
        return Err(SilsError::Numeric("prediction error undefined: Mz* = 0".into()));
    }
    let prediction_error = (m * (z - &truth.z_star)).norm_squared() / denom;

    let snr = match &truth.cov {
        Some(cov) if truth.noise_param > 0.0 => {
            let root = linalg::psd_sqrt(cov, 1e-10)?;
            let zs = linalg::sub_vector(&truth.z_star, &s_true);
            let cols = linalg::sub_matrix(&root, &(0..d).collect::<Vec<_>>(), &s_true);
            Some((cols * zs).norm_squared() / truth.noise_param.powi(2))
        }
        _ => None,
    };
    Ok(MetricsRow {
        nonzeros: s_hat.len(),
        tpr: hits as f64 / s_true.len() as f64,
        prediction_error,
        successful_recovery_rate: top_hits as f64 / s_true.len() as f64,
        snr,
    })
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_row<'a>(out: &mut String, it: impl Iterator<Item = &'a f64>) {
    let row: Vec<String> = it.map(|&v| fmt_f64(v)).collect();
    out.push_str(&row.join(" "));
    out.push('\n');
}

fn push_matrix(out: &mut String, m: &Mat) {
    for r in 0..m.nrows() {
        push_row(out, m.row(r).iter());
    }
}

/// Serialises an instance (and optional ground truth). Floats use 17
/// significant digits so parsing round-trips bit-identically.
pub fn write_instance(inst: &SilsInstance, truth: Option<&GroundTruth>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", inst.n(), inst.d(), inst.sigma);
    push_matrix(&mut out, &inst.m);
    push_row(&mut out, inst.b.iter());
    if let Some(t) = truth {
        out.push_str("#z_star\n");
        push_row(&mut out, t.z_star.iter());
        out.push_str("#eps\n");
        push_row(&mut out, t.eps.iter());
        if let Some(cov) = &t.cov {
            out.push_str("#cov\n");
            push_matrix(&mut out, cov);
        }
        out.push_str("#noise_param\n");
        let _ = writeln!(out, "{}", fmt_f64(t.noise_param));
        if let Some(sp) = &t.split {
            out.push_str("#model2\n");
            push_row(&mut out, [sp.c, sp.c_prime, sp.c_dprime].iter());
            out.push_str("#m1\n");
            push_matrix(&mut out, &sp.m1);
            out.push_str("#m2\n");
            push_matrix(&mut out, &sp.m2);
        }
    }
    out
}

struct Lines<'a> {
    it: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn next_data(&mut self) -> Result<(usize, &'a str)> {
        for (i, l) in self.it.by_ref() {
            let t = l.trim();
            if !t.is_empty() {
                return Ok((i + 1, t));
            }
        }
        Err(SilsError::Parse { line: 0, msg: "unexpected end of input".into() })
    }

    fn floats(&mut self, expect: usize) -> Result<Vec<f64>> {
        let (ln, l) = self.next_data()?;
        let v = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| SilsError::Parse { line: ln, msg: format!("{t:?}: {e}") }))
            .collect::<Result<Vec<f64>>>()?;
        if v.len() != expect {
            return Err(SilsError::Parse { line: ln, msg: format!("expected {expect} values, found {}", v.len()) });
        }
        Ok(v)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Mat> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.floats(cols)?);
        }
        Ok(Mat::from_row_slice(rows, cols, &data))
    }
}

pub fn parse_instance(text: &str) -> Result<(SilsInstance, Option<GroundTruth>)> {
    let mut lines = Lines { it: text.lines().enumerate().peekable() };
    let (ln, header) = lines.next_data()?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| SilsError::Parse { line: ln, msg: format!("{t:?}: {e}") }))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(SilsError::Parse { line: ln, msg: "header must be `n d sigma`".into() });
    }
    let (n, d, sigma) = (dims[0], dims[1], dims[2]);
    let m = lines.matrix(n, d)?;
    let b = Vector::from_vec(lines.floats(n)?);
    let inst = SilsInstance::new(m, b, sigma)?;

    let mut z_star = None;
    let mut eps = None;
    let mut cov = None;
    let mut noise_param = 0.0;
    let mut consts = None;
    let mut m1 = None;
    let mut m2 = None;
    while let Ok((ln, tag)) = lines.next_data() {
        match tag {
            "#z_star" => z_star = Some(Vector::from_vec(lines.floats(d)?)),
            "#eps" => eps = Some(Vector::from_vec(lines.floats(n)?)),
            "#cov" => cov = Some(lines.matrix(d, d)?),
            "#noise_param" => noise_param = lines.floats(1)?[0],
            "#model2" => consts = Some(lines.floats(3)?),
            "#m1" => m1 = Some(lines.matrix(n, d)?),
            "#m2" => m2 = Some(lines.matrix(n, d)?),
            other => return Err(SilsError::Parse { line: ln, msg: format!("unknown section {other:?}") }),
        }
    }
    let truth = match (z_star, eps) {
        (Some(z_star), Some(eps)) => {
            let split = match (consts, m1, m2) {
                (Some(c), Some(m1), Some(m2)) => Some(Model2Split { m1, m2, c: c[0], c_prime: c[1], c_dprime: c[2] }),
                (None, None, None) => None,
                _ => return Err(SilsError::Parse { line: 0, msg: "incomplete Model 2 split sections".into() }),
            };
            Some(GroundTruth { z_star, eps, cov, noise_param, split })
        }
        (None, None) => None,
        _ => return Err(SilsError::Parse { line: 0, msg: "#z_star and #eps must appear together".into() }),
    };
    Ok((inst, truth))
}

/// Reads a whitespace-separated real vector (used for x* files).
pub fn parse_vector(text: &str) -> Result<Vector> {
    let v = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| SilsError::Parse { line: 0, msg: format!("{t:?}: {e}") }))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Vector::from_vec(v))
}
