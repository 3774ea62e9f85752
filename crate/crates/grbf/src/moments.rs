//! Gaussian tensor moments and the exact integrals of density products times
//! outer products of density gradients.

use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::gaussian::{product, Gaussian};
use crate::tensor::DenseTensor;

static SIGN_MUTATION: AtomicBool = AtomicBool::new(false);

/// Drops the alternating sign in the subset expansion of [`integral_moment`].
/// Only the self-test uses this, to prove the duality check catches it.
#[doc(hidden)]
pub fn set_sign_mutation(on: bool) {
    SIGN_MUTATION.store(on, Ordering::SeqCst);
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Number of pairings contributing `m^{⊗(k−2j)} ⊗ C^{⊗j}` to the k-th moment.
pub fn moment_coefficient(k: usize, j: usize) -> f64 {
    binomial(k, 2 * j) * factorial(2 * j) / (factorial(j) * 2f64.powi(j as i32))
}

/// `E[X^{⊗k}]` for `X ~ N(m, C)`.
pub fn tensor_moment(g: &Gaussian, k: usize) -> DenseTensor {
    let m = g.mean().as_slice();
    let c = DenseTensor::from_matrix(g.cov());
    let d = g.dim();
    let mut out = if k == 0 { DenseTensor::scalar(0.0) } else { DenseTensor::zeros(vec![d; k]) };
    for j in 0..=k / 2 {
        let mut t = DenseTensor::outer_power(m, k - 2 * j);
        for _ in 0..j {
            t = t.outer(&c);
        }
        let t = if j == 0 { t } else { t.symmetrize().expect("equal extents") };
        out.axpy(moment_coefficient(k, j), &t).expect("same shape");
    }
    out
}

fn check_dims(phis: &[&Gaussian], grads: &[&Gaussian]) -> Result<usize> {
    let first = phis
        .iter()
        .chain(grads)
        .next()
        .ok_or(Error::Empty("integral needs at least one Gaussian"))?;
    let d = first.dim();
    for g in phis.iter().chain(grads) {
        if g.dim() != d {
            return Err(Error::Dimension { expected: d, got: g.dim() });
        }
    }
    Ok(d)
}

/// `⊗_b C_b⁻¹` with modes interleaved as `(i₁, k₁, i₂, k₂, ...)`.
fn precision_outer(grads: &[&Gaussian]) -> DenseTensor {
    grads.iter().fold(DenseTensor::scalar(1.0), |t, g| {
        t.outer(&DenseTensor::from_matrix(g.precision()))
    })
}

/// `∫ Π φ_a · ⊗_b ∇φ_b` by expanding `⊗_b (m_b − x)` over subsets of the
/// gradient slots and taking Gaussian moments of the product density.
pub fn integral_moment(phis: &[&Gaussian], grads: &[&Gaussian]) -> Result<DenseTensor> {
    let d = check_dims(phis, grads)?;
    let all: Vec<&Gaussian> = phis.iter().chain(grads).copied().collect();
    let w = product(&all)?;
    let beta = grads.len();
    if beta == 0 {
        return Ok(DenseTensor::scalar(w.z()));
    }
    let moments: Vec<DenseTensor> = (0..=beta).map(|k| tensor_moment(&w.g, k)).collect();
    let mutate = SIGN_MUTATION.load(Ordering::Relaxed);
    let mut expansion = DenseTensor::zeros(vec![d; beta]);
    for mask in 0..(1usize << beta) {
        let chosen: Vec<usize> = (0..beta).filter(|b| mask >> b & 1 == 1).collect();
        let rest: Vec<usize> = (0..beta).filter(|b| mask >> b & 1 == 0).collect();
        let mut t = chosen.iter().fold(DenseTensor::scalar(1.0), |t, &b| {
            t.outer(&DenseTensor::from_vector(grads[b].mean().as_slice()))
        });
        t = t.outer(&moments[rest.len()]);
        // Mode q of `t` belongs to slot order[q]; invert that to place slots in order.
        let order: Vec<usize> = chosen.iter().chain(&rest).copied().collect();
        let mut perm = vec![0; beta];
        for (q, &slot) in order.iter().enumerate() {
            perm[slot] = q;
        }
        let t = t.permute_modes(&perm)?;
        let sign = if mutate || rest.len() % 2 == 0 { 1.0 } else { -1.0 };
        expansion.axpy(sign, &t)?;
    }
    let out = DenseTensor::contract_even(&precision_outer(grads), &expansion)?;
    Ok(out.scaled(w.z()))
}

/// Gauss–Hermite nodes and weights for the weight function `e^{-x²}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermiteRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.len() - 1
    }
}

/// Golub–Welsch: eigenvalues of the Jacobi matrix of the Hermite recurrence.
pub fn hermite_rule(n: usize) -> GaussHermiteRule {
    let n = n.max(1);
    let mut j = DMatrix::zeros(n, n);
    for i in 1..n {
        let b = (i as f64 / 2.0).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], sqrt_pi * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // The tridiagonal matrix is symmetric about zero; enforce it exactly.
    for k in 0..n / 2 {
        let x = 0.5 * (pairs[n - 1 - k].0 - pairs[k].0);
        let w = 0.5 * (pairs[n - 1 - k].1 + pairs[k].1);
        pairs[k] = (-x, w);
        pairs[n - 1 - k] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    GaussHermiteRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Nodes per dimension needed for a degree-`beta` polynomial.
pub fn hermite_points_for(beta: usize) -> usize {
    beta / 2 + 1
}

/// Same integral as [`integral_moment`], evaluated with a tensor-product
/// Gauss–Hermite rule after the change of variables `x = √2·S·y + m`.
pub fn integral_gh(phis: &[&Gaussian], grads: &[&Gaussian], rule: &GaussHermiteRule) -> Result<DenseTensor> {
    let d = check_dims(phis, grads)?;
    let beta = grads.len();
    if rule.is_empty() || rule.exact_degree() < beta {
        return Err(Error::Config(format!(
            "a {}-point rule cannot integrate degree {beta}",
            rule.len()
        )));
    }
    let all: Vec<&Gaussian> = phis.iter().chain(grads).copied().collect();
    let w = product(&all)?;
    if beta == 0 {
        return Ok(DenseTensor::scalar(w.z()));
    }
    let s = w.g.chol() * std::f64::consts::SQRT_2;
    let n = rule.len();
    let mut out = DenseTensor::zeros(vec![d; beta]);
    let mut digits = vec![0usize; d];
    let total = n.pow(d as u32);
    for _ in 0..total {
        let y = DVector::from_iterator(d, digits.iter().map(|&k| rule.nodes[k]));
        let weight: f64 = digits.iter().map(|&k| rule.weights[k]).product();
        let x = &s * y + w.g.mean();
        let mut t = DenseTensor::scalar(weight);
        for g in grads {
            let v = g.precision() * (g.mean() - &x);
            t = t.outer(&DenseTensor::from_vector(v.as_slice()));
        }
        out.add_assign(&t)?;
        for k in (0..d).rev() {
            digits[k] += 1;
            if digits[k] < n {
                break;
            }
            digits[k] = 0;
        }
    }
    Ok(out.scaled(w.z() * std::f64::consts::PI.powf(-(d as f64) / 2.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrigKind {
    Sin,
    Cos,
}

/// `∫ sin(kx) φ(x) dx` or `∫ cos(kx) φ(x) dx` for a one-dimensional Gaussian.
pub fn trig_integral(kind: TrigKind, k: f64, g: &Gaussian) -> Result<f64> {
    if g.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: g.dim() });
    }
    let mu = g.mean()[0];
    let var = g.cov()[(0, 0)];
    let damp = (-0.5 * k * k * var).exp();
    Ok(match kind {
        TrigKind::Sin => (k * mu).sin() * damp,
        TrigKind::Cos => (k * mu).cos() * damp,
    })
}
