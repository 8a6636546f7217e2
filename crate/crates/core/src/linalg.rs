//! Small dense helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Result, SilsError};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Symmetric eigendecomposition with eigenvalues sorted ascending
/// (eigenvectors are the matching columns).
pub fn eigh(a: &Mat) -> Result<(Vector, Mat)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(SilsError::Dimension(format!("eigh on {}x{}", n, a.ncols())));
    }
    if n == 0 {
        return Ok((Vector::zeros(0), Mat::zeros(0, 0)));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(SilsError::Numeric("non-finite entry in eigendecomposition".into()));
    }
    let sym = symmetrize(a);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = Mat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok((vals, vecs))
}

/// Ascending eigenvalues only.
pub fn eigvals(a: &Mat) -> Result<Vector> {
    if a.nrows() == 0 {
        return Ok(Vector::zeros(0));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(SilsError::Numeric("non-finite entry in eigendecomposition".into()));
    }
    let mut v: Vec<f64> = symmetrize(a).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|x, y| x.total_cmp(y));
    Ok(Vector::from_vec(v))
}

/// Smallest eigenvalue; `+∞` for the empty matrix so that vacuous PSD checks pass.
pub fn lambda_min(a: &Mat) -> Result<f64> {
    let v = eigvals(a)?;
    Ok(if v.is_empty() { f64::INFINITY } else { v[0] })
}

pub fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Entrywise max-abs ("max norm"); zero for empty matrices.
pub fn max_norm(a: &Mat) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn inf_norm_vec(v: &Vector) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub_matrix(a: &Mat, rows: &[usize], cols: &[usize]) -> Mat {
    Mat::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

pub fn sub_vector(v: &Vector, idx: &[usize]) -> Vector {
    Vector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Writes `block` into `a` at the given row/column index sets.
pub fn set_block(a: &mut Mat, rows: &[usize], cols: &[usize], block: &Mat) {
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            a[(r, c)] = block[(i, j)];
        }
    }
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix; eigenvalues with
/// |λ| ≤ `rel_cutoff`·max|λ| are treated as zero.
pub fn pinv_sym(a: &Mat, rel_cutoff: f64) -> Result<Mat> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let (vals, vecs) = eigh(a)?;
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = rel_cutoff * scale;
    let mut out = Mat::zeros(n, n);
    for k in 0..n {
        if vals[k].abs() > cut && scale > 0.0 {
            let q = vecs.column(k);
            out += (q * q.transpose()) / vals[k];
        }
    }
    Ok(out)
}

/// Rebuilds V·diag(f(λ))·Vᵀ.
pub fn spectral_map(vals: &Vector, vecs: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let mut scaled = vecs.clone();
    for k in 0..vals.len() {
        let s = f(vals[k]);
        scaled.column_mut(k).scale_mut(s);
    }
    let out = scaled * vecs.transpose();
    symmetrize(&out)
}

/// Frobenius-nearest PSD matrix: clamp negative eigenvalues at zero.
pub fn project_psd(a: &Mat) -> Result<Mat> {
    let (vals, vecs) = eigh(a)?;
    Ok(spectral_map(&vals, &vecs, |l| l.max(0.0)))
}

/// Symmetric PSD square root; eigenvalues in [−tol, tol] are treated as zero.
pub fn psd_sqrt(s: &Mat, tol: f64) -> Result<Mat> {
    let (vals, vecs) = eigh(s)?;
    if let Some(&lmin) = vals.iter().next() {
        if lmin < -tol {
            return Err(SilsError::InvalidParam(format!(
                "matrix not PSD: smallest eigenvalue {lmin:.3e} below -{tol:.1e}"
            )));
        }
    }
    // Eigenvalues within roundoff of zero are dropped: √(1e-15) would
    // otherwise leak ~3e-8 of null-space noise into the root.
    Ok(spectral_map(&vals, &vecs, |l| if l <= tol { 0.0 } else { l.sqrt() }))
}

/// Index complement of `s` in `0..d` (ascending).
pub fn complement(s: &[usize], d: usize) -> Vec<usize> {
    let mut mark = vec![false; d];
    for &i in s {
        mark[i] = true;
    }
    (0..d).filter(|&i| !mark[i]).collect()
}
