//! Sparse multivariate polynomials and their exact Gaussian expectations.

use std::collections::{BTreeMap, HashMap};
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::gaussian::Gaussian;

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    /// The coordinate `x_i`.
    pub fn var(dim: usize, i: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = 1;
        let mut p = Self::zero(dim);
        p.add_term(e, 1.0);
        p
    }

    /// `aᵀx + b`.
    pub fn affine(a: &[f64], b: f64) -> Self {
        let dim = a.len();
        let mut p = Self::constant(dim, b);
        for (i, &ai) in a.iter().enumerate() {
            p = p + Self::var(dim, i) * ai;
        }
        p
    }

    /// Univariate polynomial from coefficients `c₀ + c₁x + ...`.
    pub fn univariate(coeffs: &[f64]) -> Self {
        let mut p = Self::zero(1);
        for (k, &c) in coeffs.iter().enumerate() {
            p.add_term(vec![k as u32], c);
        }
        p
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: f64) {
        assert_eq!(exps.len(), self.dim, "monomial dimension");
        if c == 0.0 {
            return;
        }
        let e = self.terms.entry(exps).or_insert(0.0);
        *e += c;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, &c)| (e.as_slice(), c))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= s;
        }
        out
    }

    /// `E[p(X)]` for `X ~ g`, through the recursion
    /// `E[x_k q] = m_k E[q] + Σ_j C_kj E[∂_j q]` on monomials.
    pub fn gaussian_expectation(&self, g: &Gaussian) -> Result<f64> {
        if g.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: g.dim() });
        }
        let mut memo = HashMap::new();
        let mean = g.mean().as_slice();
        let cov = g.cov();
        let mut total = 0.0;
        let mut e = vec![0; self.dim];
        for (exps, c) in &self.terms {
            e.copy_from_slice(exps);
            total += c * monomial_moment(&mut e, mean, cov, &mut memo);
        }
        Ok(total)
    }
}

fn monomial_moment(e: &mut [u32], mean: &[f64], cov: &nalgebra::DMatrix<f64>, memo: &mut HashMap<Vec<u32>, f64>) -> f64 {
    let Some(k) = e.iter().position(|&v| v > 0) else {
        return 1.0;
    };
    if let Some(&v) = memo.get(&*e) {
        return v;
    }
    let key = e.to_vec();
    e[k] -= 1;
    let mut v = mean[k] * monomial_moment(e, mean, cov, memo);
    for j in 0..e.len() {
        let c = cov[(k, j)];
        if e[j] > 0 && c != 0.0 {
            let times = e[j] as f64;
            e[j] -= 1;
            v += c * times * monomial_moment(e, mean, cov, memo);
            e[j] += 1;
        }
    }
    e[k] += 1;
    memo.insert(key, v);
    v
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(mut self, rhs: Polynomial) -> Polynomial {
        assert_eq!(self.dim, rhs.dim, "polynomial dimension");
        for (e, c) in rhs.terms {
            self.add_term(e, c);
        }
        self
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: Polynomial) -> Polynomial {
        self + (-rhs)
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Polynomial {
    type Output = Polynomial;
    fn mul(self, s: f64) -> Polynomial {
        self.scale(s)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.dim, rhs.dim, "polynomial dimension");
        let mut out = Polynomial::zero(self.dim);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        &self * &rhs
    }
}
