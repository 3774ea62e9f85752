//! The four manufactured benchmark problems.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::forcing::{Forcing, PolyGaussianTerm, ScalarField, TrigTerm, VectorField, VectorForcing, VectorPolyGaussian};
use crate::galerkin::{build_mixed_darcy, build_poisson, mse, relative_mse, solve, AssembledSystem, Solution};
use crate::gaussian::Gaussian;
use crate::moments::TrigKind;
use crate::poly::Polynomial;
use crate::whitney::{default_gamma, estimate_gamma, Basis, Domain};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaRule {
    /// No boundary term (unbounded domains).
    Off,
    /// `γ = 16N`.
    SixteenN,
    Fixed(f64),
    /// Largest generalized eigenvalue of the stiffness/boundary pencil.
    Estimate,
}

/// How the untrained Gaussians are placed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitRule {
    /// Means equispaced on `[lo, hi]` (on the diagonal `[lo·1, hi·1]` when
    /// `d > 1`), isotropic with `σ = (hi − lo)/N`.
    Spaced { lo: f64, hi: f64 },
    /// Means drawn from a seeded standard normal, covariance `σ²I`.
    Normal { sigma: f64 },
}

#[derive(Clone)]
pub struct MixedData {
    pub g_descriptor: VectorForcing,
    pub exact_field: VectorField,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub id: u8,
    pub dim: usize,
    pub domain: Domain,
    pub forcing: Forcing,
    pub exact: ScalarField,
    pub boundary: Option<ScalarField>,
    pub mixed: Option<MixedData>,
    pub sample_lo: f64,
    pub sample_hi: f64,
    pub sample_count: usize,
    pub gamma: GammaRule,
    pub init: InitRule,
    pub lr: f64,
    pub steps: usize,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("sample", &(self.sample_lo, self.sample_hi, self.sample_count))
            .field("gamma", &self.gamma)
            .field("init", &self.init)
            .finish_non_exhaustive()
    }
}

fn sum_poly(d: usize) -> Polynomial {
    Polynomial::affine(&vec![1.0; d], 0.0)
}

fn square_norm_poly(d: usize) -> Polynomial {
    (0..d).fold(Polynomial::zero(d), |acc, i| acc + Polynomial::var(d, i) * Polynomial::var(d, i))
}

/// `−Δu` for `u = e^{−|x|²/2} Σ x_i(2 − x_i)`, as `(2π)^{d/2} N(0, I) · p(x)`.
fn bump_forcing(d: usize) -> Forcing {
    let s = sum_poly(d);
    let r2 = square_norm_poly(d);
    let p = Polynomial::constant(d, 2.0 * d as f64) + s.clone() * 4.0 - r2.clone() * 4.0
        - (s * 2.0 - r2.clone()) * (r2 - Polynomial::constant(d, d as f64));
    Forcing::PolyGaussian(vec![PolyGaussianTerm {
        scale: (2.0 * PI).powf(d as f64 / 2.0),
        gaussian: Gaussian::standard(d),
        poly: p,
    }])
}

fn bump_solution() -> ScalarField {
    Arc::new(|x: &[f64]| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (-0.5 * r2).exp() * x.iter().map(|v| v * (2.0 - v)).sum::<f64>()
    })
}

/// Unbounded 1-D Poisson with `u = x(2 − x)e^{−x²/2}`.
pub fn problem1() -> ProblemSpec {
    ProblemSpec {
        id: 1,
        dim: 1,
        domain: Domain::Unbounded { dim: 1 },
        forcing: bump_forcing(1),
        exact: bump_solution(),
        boundary: None,
        mixed: None,
        sample_lo: -6.0,
        sample_hi: 6.0,
        sample_count: 4096,
        gamma: GammaRule::Off,
        init: InitRule::Spaced { lo: -6.0, hi: 6.0 },
        lr: 0.01,
        steps: 1000,
    }
}

/// Poisson on `[−1, 1]` with `u = sin(3πx)`, boundary imposed by penalty.
pub fn problem2() -> ProblemSpec {
    let k = 3.0 * PI;
    ProblemSpec {
        id: 2,
        dim: 1,
        domain: Domain::interval(-1.0, 1.0),
        forcing: Forcing::Trig(vec![TrigTerm { kind: TrigKind::Sin, amplitude: k * k, k }]),
        exact: Arc::new(move |x: &[f64]| (k * x[0]).sin()),
        boundary: Some(Arc::new(move |x: &[f64]| (k * x[0]).sin())),
        mixed: None,
        sample_lo: -1.0,
        sample_hi: 1.0,
        sample_count: 4096,
        gamma: GammaRule::SixteenN,
        init: InitRule::Spaced { lo: -2.0, hi: 2.0 },
        lr: 0.01,
        steps: 1000,
    }
}

/// Unbounded 8-D Poisson with `u = e^{−|x|²/2} Σ x_i(2 − x_i)`. `full` selects
/// 65536 samples and 10K steps; otherwise 4096 samples and 2000 steps.
pub fn problem3(full: bool) -> ProblemSpec {
    let d = 8;
    ProblemSpec {
        id: 3,
        dim: d,
        domain: Domain::Unbounded { dim: d },
        forcing: bump_forcing(d),
        exact: bump_solution(),
        boundary: None,
        mixed: None,
        sample_lo: -2.0,
        sample_hi: 2.0,
        sample_count: if full { 65536 } else { 4096 },
        gamma: GammaRule::Off,
        init: InitRule::Spaced { lo: -2.0, hi: 2.0 },
        lr: 0.05,
        steps: if full { 10_000 } else { 2000 },
    }
}

/// Centre of the Problem 4 data.
const P4_CENTER: f64 = 0.5;

/// `e^{−|x − ½·1|²}` written as `π^{3/2} N(½·1, ½I)`.
fn p4_gaussian() -> (f64, Gaussian) {
    let g = Gaussian::isotropic(&[P4_CENTER; 3], std::f64::consts::FRAC_1_SQRT_2).expect("isotropic");
    (PI.powf(1.5), g)
}

/// Mixed Darcy on R³: `F − ∇u = G`, `∇·F = f` with `G = e^{−|x−½·1|²}·1`,
/// `f = ∇·G`, exact pair `(u, F) = (0, G)`.
pub fn problem4() -> ProblemSpec {
    let d = 3;
    let (scale, g) = p4_gaussian();
    let g_descriptor = VectorForcing::PolyGaussian(vec![VectorPolyGaussian {
        scale,
        gaussian: g.clone(),
        components: vec![Polynomial::constant(d, 1.0); d],
    }]);
    let forcing = Forcing::PolyGaussian(vec![PolyGaussianTerm {
        scale,
        gaussian: g,
        poly: Polynomial::affine(&[-2.0; 3], 3.0),
    }]);
    let exact_field: VectorField = Arc::new(|x: &[f64]| {
        let r2: f64 = x.iter().map(|v| (v - P4_CENTER).powi(2)).sum();
        vec![(-r2).exp(); x.len()]
    });
    ProblemSpec {
        id: 4,
        dim: d,
        domain: Domain::Unbounded { dim: d },
        forcing,
        exact: Arc::new(|_: &[f64]| 0.0),
        boundary: None,
        mixed: Some(MixedData { g_descriptor, exact_field }),
        sample_lo: -2.0,
        sample_hi: 3.0,
        sample_count: 4096,
        gamma: GammaRule::Off,
        init: InitRule::Normal { sigma: 1.0 },
        lr: 0.01,
        steps: 1000,
    }
}

pub fn problem(id: u8, full: bool) -> Result<ProblemSpec> {
    match id {
        1 => Ok(problem1()),
        2 => Ok(problem2()),
        3 => Ok(problem3(full)),
        4 => Ok(problem4()),
        _ => Err(Error::Config(format!("unknown problem {id}"))),
    }
}

/// Seeded samples on the problem's sampling cube with exact values.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// Exact vector field at the points, for mixed problems.
    pub fields: Option<Vec<Vec<f64>>>,
}

pub fn sample_data(spec: &ProblemSpec, count: usize, seed: u64) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::Empty("sample count"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = spec.sample_hi - spec.sample_lo;
    let points: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..spec.dim).map(|_| spec.sample_lo + w * rng.random::<f64>()).collect())
        .collect();
    let values = points.iter().map(|x| (spec.exact)(x)).collect();
    let fields = spec.mixed.as_ref().map(|m| points.iter().map(|x| (m.exact_field)(x)).collect());
    Ok(Dataset { points, values, fields })
}

/// Equispaced points including both ends; the midpoint when `n = 1`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Isotropic Gaussians with means equispaced on `[lo, hi]` (along the diagonal
/// for `d > 1`) and `σ = (hi − lo)/N`.
pub fn spaced_gaussians(d: usize, lo: f64, hi: f64, n: usize) -> Result<Vec<Gaussian>> {
    if n == 0 {
        return Err(Error::Empty("basis size"));
    }
    let sigma = (hi - lo) / n as f64;
    linspace(lo, hi, n).into_iter().map(|t| Gaussian::isotropic(&vec![t; d], sigma)).collect()
}

/// Gaussians with standard-normal means (seeded) and covariance `σ²I`.
pub fn normal_gaussians(d: usize, n: usize, sigma: f64, seed: u64) -> Result<Vec<Gaussian>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let m: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            Gaussian::isotropic(&m, sigma)
        })
        .collect()
}

/// The untrained basis of size `n` for a problem.
pub fn init_basis(spec: &ProblemSpec, n: usize, seed: u64) -> Result<Basis> {
    let gs = match spec.init {
        InitRule::Spaced { lo, hi } => spaced_gaussians(spec.dim, lo, hi, n)?,
        InitRule::Normal { sigma } => normal_gaussians(spec.dim, n, sigma, seed)?,
    };
    Basis::new(gs, spec.domain.clone())
}

pub fn gamma_for(spec: &ProblemSpec, basis: &Basis, seed: u64) -> Result<f64> {
    Ok(match spec.gamma {
        GammaRule::Off => 0.0,
        GammaRule::SixteenN => default_gamma(basis.len()),
        GammaRule::Fixed(g) => g,
        GammaRule::Estimate => estimate_gamma(basis, seed)?,
    })
}

/// Assembles the problem's system on a basis.
pub fn assemble(spec: &ProblemSpec, basis: &Basis, gamma: f64, seed: u64) -> Result<AssembledSystem> {
    match &spec.mixed {
        Some(m) => build_mixed_darcy(basis, &m.g_descriptor, &spec.forcing),
        None => build_poisson(basis, gamma, &spec.forcing, spec.boundary.as_ref(), seed),
    }
}

/// Errors of a mixed solution: plain mean square of `u_h` (the exact `u` is
/// 0), relative MSE of `F_h` against `G`, and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedErrors {
    pub mse_u: f64,
    pub mse_f: f64,
    pub total: f64,
}

pub fn mixed_errors(solution: &Solution, data: &Dataset) -> Result<MixedErrors> {
    let fields = data.fields.as_ref().ok_or(Error::Config("dataset has no vector field".into()))?;
    let mut pred_u = Vec::with_capacity(data.points.len());
    let mut pred_f = Vec::with_capacity(data.points.len() * 3);
    let mut truth_f = Vec::with_capacity(data.points.len() * 3);
    for (x, f) in data.points.iter().zip(fields) {
        pred_u.push(solution.eval(x)?);
        pred_f.extend(solution.eval_field(x)?.iter());
        truth_f.extend_from_slice(f);
    }
    let mse_u = mse(&pred_u, &data.values)?;
    let mse_f = relative_mse(&pred_f, &truth_f)?;
    Ok(MixedErrors { mse_u, mse_f, total: mse_u + mse_f })
}

/// Relative MSE of a scalar solution on a dataset.
pub fn scalar_error(solution: &Solution, data: &Dataset) -> Result<f64> {
    let pred: Vec<f64> = data.points.iter().map(|x| solution.eval(x)).collect::<Result<_>>()?;
    relative_mse(&pred, &data.values)
}

/// One untrained solve: assemble, solve, report the error on `data`.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub n: usize,
    pub gamma: f64,
    pub kappa: f64,
    pub rel_mse: f64,
    pub mixed: Option<MixedErrors>,
    pub solution: Solution,
}

pub fn solve_on(spec: &ProblemSpec, basis: &Basis, data: &Dataset, seed: u64) -> Result<SolveReport> {
    let gamma = gamma_for(spec, basis, seed)?;
    let sys = assemble(spec, basis, gamma, seed)?;
    let solution = solve(&sys)?;
    let (rel_mse, mixed) = if spec.mixed.is_some() {
        let e = mixed_errors(&solution, data)?;
        (e.total, Some(e))
    } else {
        (scalar_error(&solution, data)?, None)
    };
    Ok(SolveReport { n: basis.gaussians().len(), gamma, kappa: sys.kappa, rel_mse, mixed, solution })
}

/// Problem 4 basis holding `N(0, I)` and `N(1, I)`, in which `G` is exact.
pub fn exact_pair_basis() -> Result<Basis> {
    let d = 3;
    let eye = DMatrix::identity(d, d);
    Basis::new(
        vec![
            Gaussian::new(DVector::zeros(d), eye.clone())?,
            Gaussian::new(DVector::from_element(d, 1.0), eye)?,
        ],
        Domain::Unbounded { dim: d },
    )
}
