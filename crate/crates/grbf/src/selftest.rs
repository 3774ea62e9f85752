//! Randomized invariant suites run by the `selftest` command.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::gaussian::{product, Gaussian};
use crate::moments::{hermite_points_for, hermite_rule, integral_gh, integral_moment};
use crate::tensor::DenseTensor;
use crate::whitney::{m1_entry, oneform_oracle, Basis, Domain};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SelftestReport {
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn ok(&self) -> bool {
        self.suites.iter().all(|s| s.failed == 0)
    }
}

pub fn random_gaussian(rng: &mut ChaCha8Rng, d: usize) -> Gaussian {
    let mean = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = DMatrix::from_fn(d, d, |_, _| 0.4 * rng.sample::<f64, _>(StandardNormal));
    let cov = &a * a.transpose() + DMatrix::identity(d, d) * 0.5;
    Gaussian::new(mean, (&cov + cov.transpose()) * 0.5).expect("random covariance is SPD")
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> DenseTensor {
    let n = shape.iter().product();
    DenseTensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("shape and data agree")
}

fn run(name: &'static str, cases: usize, mut check: impl FnMut(usize) -> Result<bool>) -> SuiteResult {
    let mut passed = 0;
    for k in 0..cases {
        if matches!(check(k), Ok(true)) {
            passed += 1;
        }
    }
    SuiteResult { name, passed, failed: cases - passed }
}

fn tensor_suite(rng: &mut ChaCha8Rng) -> SuiteResult {
    run("tensor", 40, |k| {
        let d = 1 + k % 3;
        let t = random_tensor(rng, vec![d; 3]);
        let s = t.symmetrize()?;
        let idem = s.symmetrize()?.rel_diff(&s) < 1e-12;
        let a = random_tensor(rng, vec![d, 2, d, 3]);
        let b = random_tensor(rng, vec![2, 3]);
        let c = DenseTensor::contract_even(&a, &b)?;
        let mut ok = true;
        for i in 0..d {
            for j in 0..d {
                let mut v = 0.0;
                for p in 0..2 {
                    for q in 0..3 {
                        v += a.get(&[i, p, j, q]) * b.get(&[p, q]);
                    }
                }
                ok &= (c.get(&[i, j]) - v).abs() < 1e-12;
            }
        }
        Ok(idem && ok)
    })
}

fn duality_suite(rng: &mut ChaCha8Rng) -> SuiteResult {
    run("moment_duality", 60, |k| {
        let d = 1 + k % 2;
        let alpha = 1 + k % 3;
        let beta = (k / 3) % 4;
        let phis: Vec<Gaussian> = (0..alpha).map(|_| random_gaussian(rng, d)).collect();
        let grads: Vec<Gaussian> = (0..beta).map(|_| random_gaussian(rng, d)).collect();
        let pr: Vec<&Gaussian> = phis.iter().collect();
        let gr: Vec<&Gaussian> = grads.iter().collect();
        let exact = integral_moment(&pr, &gr)?;
        let gh = integral_gh(&pr, &gr, &hermite_rule(hermite_points_for(beta)))?;
        Ok(exact.rel_diff(&gh) < 1e-9)
    })
}

fn product_suite(rng: &mut ChaCha8Rng) -> SuiteResult {
    run("products", 40, |k| {
        let d = 1 + k % 3;
        let gs: Vec<Gaussian> = (0..2 + k % 3).map(|_| random_gaussian(rng, d)).collect();
        let refs: Vec<&Gaussian> = gs.iter().collect();
        let w = product(&refs)?;
        let x: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let direct: f64 = gs.iter().map(|g| g.log_density_unchecked(&x)).sum();
        let folded = w.log_z + w.g.log_density(&x)?;
        Ok((direct - folded).abs() < 1e-10 * (1.0 + direct.abs()))
    })
}

fn whitney_suite(rng: &mut ChaCha8Rng) -> SuiteResult {
    run("one_form_mass", 20, |_| {
        let gs: Vec<Gaussian> = (0..3).map(|_| random_gaussian(rng, 2)).collect();
        let b = Basis::new(gs, Domain::Unbounded { dim: 2 })?;
        let m = m1_entry(&b, (0, 1), (1, 2))?;
        let o = oneform_oracle(&b, (0, 1), (1, 2))?;
        let swapped = m1_entry(&b, (1, 0), (1, 2))?;
        Ok((m - o).abs() <= 1e-10 * (1.0 + o.abs()) && (swapped + m).abs() <= 1e-12 * (1.0 + m.abs()))
    })
}

/// Runs every suite with a fixed seed.
pub fn run_all(seed: u64) -> SelftestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SelftestReport {
        suites: vec![
            tensor_suite(&mut rng),
            duality_suite(&mut rng),
            product_suite(&mut rng),
            whitney_suite(&mut rng),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass() {
        let r = run_all(7);
        for s in &r.suites {
            assert_eq!(s.failed, 0, "{s:?}");
        }
    }
}
