use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are discarded.
pub const SVD_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub x: DVector<f64>,
    /// `σ_max / σ_min` over the retained singular values.
    pub kappa: f64,
    pub rank: usize,
}

/// Minimum-norm least-squares solution through a truncated SVD.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LeastSquares> {
    if a.nrows() != b.len() {
        return Err(Error::Dimension { expected: a.nrows(), got: b.len() });
    }
    if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares input"));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s));
    if smax == 0.0 {
        return Err(Error::Degenerate("operator is identically zero"));
    }
    let cut = SVD_CUTOFF * smax;
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested Vᵀ");
    let mut x = DVector::zeros(a.ncols());
    let mut smin = smax;
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut {
            let coef = u.column(k).dot(b) / s;
            x.axpy(coef, &vt.row(k).transpose(), 1.0);
            smin = smin.min(s);
            rank += 1;
        }
    }
    Ok(LeastSquares { x, kappa: smax / smin, rank })
}

/// Condition estimate with the same truncation rule as [`lstsq`].
pub fn condition(a: &DMatrix<f64>) -> f64 {
    let s = a.singular_values();
    let smax = s.iter().fold(0.0_f64, |m, &v| m.max(v));
    if smax == 0.0 || !smax.is_finite() {
        return f64::INFINITY;
    }
    let smin = s.iter().filter(|&&v| v > SVD_CUTOFF * smax).fold(smax, |m, &v| m.min(v));
    smax / smin
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v))
}

/// Largest entrywise asymmetry relative to the largest entry.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    (a - a.transpose()).amax() / scale
}
