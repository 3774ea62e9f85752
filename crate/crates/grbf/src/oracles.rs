//! Closed-form expectations of quadratic forms under a Gaussian. These are
//! derived independently of the moment/tensor route and serve as cross-checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::Gaussian;

fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

fn check_matrix(g: &Gaussian, a: &DMatrix<f64>) -> Result<()> {
    let d = g.dim();
    if a.nrows() != d || a.ncols() != d {
        return Err(Error::Shape(format!("expected {d}x{d}, got {}x{}", a.nrows(), a.ncols())));
    }
    Ok(())
}

fn check_vectors(g: &Gaussian, vs: &[&DVector<f64>]) -> Result<()> {
    for v in vs {
        if v.len() != g.dim() {
            return Err(Error::Dimension { expected: g.dim(), got: v.len() });
        }
    }
    Ok(())
}

/// `E[(x−b)ᵀ A (x−a)] = ⟨C, A⟩ + (m−b)ᵀ A (m−a)`.
pub fn oracle_quadratic(g: &Gaussian, a_mat: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    check_matrix(g, a_mat)?;
    check_vectors(g, &[a, b])?;
    let m = g.mean();
    Ok(frob(g.cov(), a_mat) + (m - b).dot(&(a_mat * (m - a))))
}

/// `E[(xᵀAx) x] = ⟨A, C⟩ m + C(A + Aᵀ) m + (mᵀAm) m`.
pub fn oracle_triform(g: &Gaussian, a_mat: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_matrix(g, a_mat)?;
    let m = g.mean();
    let c = g.cov();
    Ok(m * frob(a_mat, c) + c * (a_mat + a_mat.transpose()) * m + m * m.dot(&(a_mat * m)))
}

/// `E[(yᵀAy)(yᵀBy)] = ⟨A + Aᵀ, B⟩ + tr A · tr B` for `y ~ N(0, I)`.
pub fn oracle_mean0_quadprod(a_mat: &DMatrix<f64>, b_mat: &DMatrix<f64>) -> f64 {
    frob(&(a_mat + a_mat.transpose()), b_mat) + a_mat.trace() * b_mat.trace()
}

/// `E[(xᵀAx)(xᵀBx)]` for `x ~ N(m, C)`.
pub fn oracle_quadprod(g: &Gaussian, a_mat: &DMatrix<f64>, b_mat: &DMatrix<f64>) -> Result<f64> {
    check_matrix(g, a_mat)?;
    check_matrix(g, b_mat)?;
    let m = g.mean();
    let c = g.cov();
    let asym = a_mat + a_mat.transpose();
    let bsym = b_mat + b_mat.transpose();
    Ok(frob(&(&asym * c), &(c * b_mat))
        + m.dot(&(&asym * c * &bsym * m))
        + (m.dot(&(a_mat * m)) + frob(a_mat, c)) * (m.dot(&(b_mat * m)) + frob(b_mat, c)))
}

/// `E[(x−c)ᵀA(x−a) · (x−d)ᵀB(x−b)]` by the six-term closed form.
#[allow(clippy::too_many_arguments)]
pub fn oracle_biquadratic(
    g: &Gaussian,
    a_mat: &DMatrix<f64>,
    b_mat: &DMatrix<f64>,
    a: &DVector<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    d: &DVector<f64>,
) -> Result<f64> {
    check_matrix(g, a_mat)?;
    check_matrix(g, b_mat)?;
    check_vectors(g, &[a, b, c, d])?;
    let m = g.mean();
    let cov = g.cov();
    let (ma, mb, mc, md) = (m - a, m - b, m - c, m - d);
    let qa = mc.dot(&(a_mat * &ma));
    let qb = md.dot(&(b_mat * &mb));
    let ta = frob(a_mat, cov);
    let tb = frob(b_mat, cov);
    let va = a_mat * &ma + a_mat.transpose() * &mc;
    let vb = b_mat * &mb + b_mat.transpose() * &md;
    Ok(frob(&((a_mat + a_mat.transpose()) * cov), &(cov * b_mat))
        + ta * tb
        + qa * qb
        + qa * tb
        + qb * ta
        + va.dot(&(cov * vb)))
}
