//! Descriptors for forcing terms and boundary data.

use std::fmt;
use std::sync::Arc;

use crate::gaussian::Gaussian;
use crate::moments::TrigKind;
use crate::poly::Polynomial;

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// `scale · p(x) · N(x; gaussian)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyGaussianTerm {
    pub scale: f64,
    pub gaussian: Gaussian,
    pub poly: Polynomial,
}

impl PolyGaussianTerm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.scale * self.poly.eval(x) * self.gaussian.log_density_unchecked(x).exp()
    }
}

/// `amplitude · sin(kx)` or `amplitude · cos(kx)`, one-dimensional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigTerm {
    pub kind: TrigKind,
    pub amplitude: f64,
    pub k: f64,
}

impl TrigTerm {
    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude
            * match self.kind {
                TrigKind::Sin => (self.k * x).sin(),
                TrigKind::Cos => (self.k * x).cos(),
            }
    }
}

/// A forcing known only pointwise; projected in L² from seeded samples on a box.
#[derive(Clone)]
pub struct SampledForcing {
    pub f: ScalarField,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points: usize,
    pub seed: u64,
}

impl fmt::Debug for SampledForcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledForcing")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("points", &self.points)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Forcing {
    Zero,
    PolyGaussian(Vec<PolyGaussianTerm>),
    Trig(Vec<TrigTerm>),
    Sampled(SampledForcing),
}

impl Forcing {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::PolyGaussian(terms) => terms.iter().map(|t| t.eval(x)).sum(),
            Forcing::Trig(terms) => terms.iter().map(|t| t.eval(x[0])).sum(),
            Forcing::Sampled(s) => (s.f)(x),
        }
    }
}

/// `scale · N(x; gaussian) · (p₁(x), ..., p_d(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPolyGaussian {
    pub scale: f64,
    pub gaussian: Gaussian,
    pub components: Vec<Polynomial>,
}

#[derive(Debug, Clone)]
pub enum VectorForcing {
    Zero,
    PolyGaussian(Vec<VectorPolyGaussian>),
}

impl VectorForcing {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        if let VectorForcing::PolyGaussian(terms) = self {
            for t in terms {
                let w = t.scale * t.gaussian.log_density_unchecked(x).exp();
                for (o, p) in out.iter_mut().zip(&t.components) {
                    *o += w * p.eval(x);
                }
            }
        }
        out
    }
}
