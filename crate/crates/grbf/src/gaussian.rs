//! Normalized Gaussian densities and their products.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// A normalized Gaussian density `N(m, C)` with its factorization cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_det: f64,
}

fn check_symmetric(c: &DMatrix<f64>) -> Result<()> {
    if !c.is_square() {
        return Err(Error::Shape(format!("covariance is {}x{}", c.nrows(), c.ncols())));
    }
    let scale = c.amax().max(f64::MIN_POSITIVE);
    for i in 0..c.nrows() {
        for j in 0..i {
            if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::NotSpd);
            }
        }
    }
    Ok(())
}

/// Lower Cholesky factor, rejecting pivots below `1e-12 · max diag`.
fn cholesky(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = c.nrows();
    let tol = 1e-12 * (0..n).fold(0.0_f64, |m, i| m.max(c[(i, i)]));
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = c[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tol) || !d.is_finite() {
            return Err(Error::NotSpd);
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = c[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Inverse of `L Lᵀ` from its lower factor.
fn inverse_from_chol(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("factor has a zero pivot");
    symmetrized(linv.transpose() * linv)
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() {
            return Err(Error::Dimension { expected: mean.len(), got: cov.nrows() });
        }
        if mean.is_empty() {
            return Err(Error::Empty("mean"));
        }
        check_symmetric(&cov)?;
        let cov = symmetrized(cov);
        let chol = cholesky(&cov)?;
        let precision = inverse_from_chol(&chol);
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self { mean, cov, chol, precision, log_det })
    }

    /// Builds the Gaussian from its mean and a lower-triangular covariance factor.
    pub fn from_factor(mean: DVector<f64>, factor: DMatrix<f64>) -> Result<Self> {
        let lower = factor.lower_triangle();
        Self::new(mean, &lower * lower.transpose())
    }

    pub fn from_precision(mean: DVector<f64>, precision: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&precision)?;
        let pl = cholesky(&symmetrized(precision))?;
        Self::new(mean, inverse_from_chol(&pl))
    }

    /// `N(m, σ² I)`.
    pub fn isotropic(mean: &[f64], sigma: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(DVector::from_column_slice(mean), DMatrix::identity(d, d) * (sigma * sigma))
    }

    pub fn standard(d: usize) -> Self {
        Self::isotropic(&vec![0.0; d], 1.0).expect("identity covariance")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower factor `S` with `S Sᵀ = C`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// `log φ(x)` without allocation.
    pub fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        // Forward substitution y = S⁻¹(x − m), accumulated into |y|².
        let mut y = [0.0_f64; 16];
        let mut heap;
        let y: &mut [f64] = if d <= 16 {
            &mut y[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut q = 0.0;
        for i in 0..d {
            let mut s = x[i] - self.mean[i];
            for k in 0..i {
                s -= self.chol[(i, k)] * y[k];
            }
            y[i] = s / self.chol[(i, i)];
            q += y[i] * y[i];
        }
        -0.5 * (q + d as f64 * LN_2PI + self.log_det)
    }

    /// `φ` at every column of `points` (shape `d × K`).
    pub fn density_columns(&self, points: &DMatrix<f64>) -> Result<DVector<f64>> {
        if points.nrows() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: points.nrows() });
        }
        let d = self.dim();
        let linv = self
            .chol
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .ok_or(Error::NotSpd)?;
        // S⁻¹(x − m) = S⁻¹x − S⁻¹m as one matrix product.
        let y = &linv * points;
        let lm = &linv * &self.mean;
        let shift = -0.5 * (d as f64 * LN_2PI + self.log_det);
        let lm = lm.as_slice();
        Ok(DVector::from_iterator(
            y.ncols(),
            y.as_slice().chunks_exact(d).map(|c| {
                let q: f64 = c.iter().zip(lm).map(|(a, b)| (a - b) * (a - b)).sum();
                (shift - 0.5 * q).exp()
            }),
        ))
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.log_density_unchecked(x))
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    /// The polynomial factor `p(x) = −C⁻¹(x − m)` of the gradient `∇φ = φ·p`.
    pub fn score(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_point(x)?;
        let r = DVector::from_column_slice(x) - &self.mean;
        Ok(-(&self.precision * r))
    }

    pub fn grad_density(&self, x: &[f64]) -> Result<DVector<f64>> {
        let p = self.score(x)?;
        Ok(p * self.density(x)?)
    }
}

/// `exp(log_z) · g`, the result of multiplying Gaussian densities.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGaussian {
    pub log_z: f64,
    pub g: Gaussian,
}

impl WeightedGaussian {
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok((self.log_z + self.g.log_density(x)?).exp())
    }
}

/// `log N(x; 0, C)` for a covariance given directly.
fn log_normal_at(r: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let l = cholesky(cov)?;
    let y = l
        .clone()
        .solve_lower_triangular(r)
        .ok_or(Error::NotSpd)?;
    let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(-0.5 * (y.norm_squared() + r.len() as f64 * LN_2PI + log_det))
}

/// Multiplies two densities: `φ₁φ₂ = N(m₁; m₂, C₁+C₂) · N(m, C)` with `C⁻¹ = C₁⁻¹ + C₂⁻¹`.
pub fn product_pair(a: &Gaussian, b: &Gaussian) -> Result<WeightedGaussian> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension { expected: a.dim(), got: b.dim() });
    }
    let log_z = log_normal_at(&(a.mean() - b.mean()), &(a.cov() + b.cov()))?;
    let p = a.precision() + b.precision();
    let pl = cholesky(&symmetrized(p)).map_err(|_| Error::NotSpd)?;
    let cov = inverse_from_chol(&pl);
    let h = a.precision() * a.mean() + b.precision() * b.mean();
    let mean = &cov * h;
    Ok(WeightedGaussian { log_z, g: Gaussian::new(mean, cov)? })
}

/// Product of `n ≥ 1` densities, folded pairwise with the weight kept in log domain.
pub fn product(gs: &[&Gaussian]) -> Result<WeightedGaussian> {
    let (first, rest) = gs.split_first().ok_or(Error::Empty("product of zero Gaussians"))?;
    let mut acc = WeightedGaussian { log_z: 0.0, g: (*first).clone() };
    for g in rest {
        let step = product_pair(&acc.g, g)?;
        acc = WeightedGaussian { log_z: acc.log_z + step.log_z, g: step.g };
    }
    Ok(acc)
}
