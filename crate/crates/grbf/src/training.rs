//! Training the basis: means and covariances are moved by gradient descent on
//! the data misfit, with the Galerkin solve as an equality constraint.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::galerkin::Solution;
use crate::gaussian::{product, Gaussian};
use crate::linalg::lstsq;
use crate::optim::{Adam, Lbfgs};
use crate::problems::{gamma_for, solve_on, Dataset, ProblemSpec};
use crate::whitney::{project_forcing, Basis, BOUNDARY_SAMPLES};

/// Per-Gaussian parameters flattened into one vector: the mean, then the
/// lower-triangular covariance factor row by row with its diagonal stored as a
/// logarithm. The isotropic variant stores only `log σ` after the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaParams {
    pub dim: usize,
    pub isotropic: bool,
    pub values: Vec<f64>,
}

impl ThetaParams {
    pub fn per_gaussian(dim: usize, isotropic: bool) -> usize {
        dim + if isotropic { 1 } else { dim * (dim + 1) / 2 }
    }

    pub fn stride(&self) -> usize {
        Self::per_gaussian(self.dim, self.isotropic)
    }

    pub fn count(&self) -> usize {
        self.values.len() / self.stride()
    }

    pub fn pack(gaussians: &[Gaussian], isotropic: bool) -> Result<Self> {
        let dim = gaussians.first().ok_or(Error::Empty("no Gaussians to pack"))?.dim();
        let mut values = Vec::with_capacity(gaussians.len() * Self::per_gaussian(dim, isotropic));
        for g in gaussians {
            if g.dim() != dim {
                return Err(Error::Dimension { expected: dim, got: g.dim() });
            }
            values.extend(g.mean().iter());
            if isotropic {
                values.push(0.5 * (g.cov().trace() / dim as f64).ln());
            } else {
                let l = g.chol();
                for i in 0..dim {
                    for j in 0..i {
                        values.push(l[(i, j)]);
                    }
                    values.push(l[(i, i)].ln());
                }
            }
        }
        Ok(Self { dim, isotropic, values })
    }

    /// Gaussian `k` from an explicit parameter slice.
    pub fn gaussian_from(dim: usize, isotropic: bool, p: &[f64]) -> Result<Gaussian> {
        let mean = DVector::from_column_slice(&p[..dim]);
        if isotropic {
            let s = p[dim].exp();
            return Gaussian::new(mean, DMatrix::identity(dim, dim) * (s * s));
        }
        let mut l = DMatrix::zeros(dim, dim);
        let mut k = dim;
        for i in 0..dim {
            for j in 0..i {
                l[(i, j)] = p[k];
                k += 1;
            }
            l[(i, i)] = p[k].exp();
            k += 1;
        }
        if p[dim..].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance parameters"));
        }
        Gaussian::from_factor(mean, l)
    }

    pub fn gaussian(&self, k: usize) -> Result<Gaussian> {
        let s = self.stride();
        Self::gaussian_from(self.dim, self.isotropic, &self.values[k * s..(k + 1) * s])
    }

    pub fn unpack(&self) -> Result<Vec<Gaussian>> {
        (0..self.count()).map(|k| self.gaussian(k)).collect()
    }
}

/// Largest distance from a probe grid on the box `[lo, hi]` to the nearest
/// point of `points`. `resolution` probes per axis; the grid includes the box
/// faces, so in several dimensions this approximates the supremum from below.
pub fn fill_distance(points: &[Vec<f64>], lo: &[f64], hi: &[f64], resolution: usize) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("fill distance of no points"));
    }
    let d = lo.len();
    let r = resolution.max(2);
    let total = r.checked_pow(d as u32).ok_or(Error::Config("probe grid too large".into()))?;
    let mut digits = vec![0usize; d];
    let mut worst = 0.0_f64;
    let mut probe = vec![0.0; d];
    for _ in 0..total {
        for k in 0..d {
            probe[k] = lo[k] + (hi[k] - lo[k]) * digits[k] as f64 / (r - 1) as f64;
        }
        let near = points
            .iter()
            .map(|p| p.iter().zip(&probe).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(near.sqrt());
        for k in (0..d).rev() {
            digits[k] += 1;
            if digits[k] < r {
                break;
            }
            digits[k] = 0;
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Adam,
    Lbfgs,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub optimizer: Optimizer,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Stop once the loss falls below `κ · stop_factor`.
    pub stop_factor: f64,
    /// Condition number above which a rising loss ends training.
    pub kappa_limit: f64,
    pub seed: u64,
    pub fd_step: f64,
    pub isotropic: bool,
    pub lbfgs_history: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            lr: 0.01,
            optimizer: Optimizer::Adam,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            stop_factor: 1e-15,
            kappa_limit: 1e12,
            seed: 0,
            fd_step: 1e-6,
            isotropic: false,
            lbfgs_history: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::Config("finite-difference step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxSteps,
    /// Loss fell below `κ · stop_factor`.
    Converged,
    /// Loss rose while the system's condition number exceeded the limit.
    Conditioning,
    NonFinite,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::MaxSteps => "max_steps",
            StopReason::Converged => "converged",
            StopReason::Conditioning => "conditioning",
            StopReason::NonFinite => "non_finite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub records: Vec<StepRecord>,
    pub stop: StopReason,
    pub initial_loss: f64,
    pub best_loss: f64,
    pub best_theta: ThetaParams,
    pub solution: Solution,
    pub seconds: f64,
}

/// Boundary quadrature frozen for a training run.
#[derive(Debug, Clone)]
struct BoundaryRule {
    points: DMatrix<f64>,
    weights: Vec<f64>,
    g: Vec<f64>,
}

/// Loss evaluation state for a scalar Poisson problem. Perturbing one
/// Gaussian only touches one column of the data matrix, one row/column of the
/// operator and one forcing entry, which keeps finite differences cheap.
#[derive(Debug, Clone)]
struct PoissonState {
    gaussians: Vec<Gaussian>,
    phi: DMatrix<f64>,
    stiff: DMatrix<f64>,
    proj: DVector<f64>,
    bvals: DMatrix<f64>,
}

/// A training problem: the spec, the data, and the fixed penalty/boundary rule.
pub struct TrainProblem<'a> {
    pub spec: &'a ProblemSpec,
    pub data: &'a Dataset,
    pub initial: Basis,
    pub gamma: f64,
    pub seed: u64,
    boundary: Option<BoundaryRule>,
    truth_sq: f64,
    /// Data points as the columns of a `d × K` matrix.
    cloud: DMatrix<f64>,
}

fn columns<'p>(points: impl Iterator<Item = &'p Vec<f64>>, d: usize) -> DMatrix<f64> {
    let flat: Vec<f64> = points.flatten().copied().collect();
    DMatrix::from_vec(d, flat.len() / d, flat)
}

/// `∫∇φ_i·∇φ_j = z(⟨C, C_i⁻¹C_j⁻¹⟩ + (m − m_i)ᵀC_i⁻¹C_j⁻¹(m − m_j))` for the
/// product density `N(m, C)`.
pub fn grad_dot_grad(a: &Gaussian, b: &Gaussian) -> Result<f64> {
    let w = product(&[a, b])?;
    let pp = a.precision() * b.precision();
    let m = w.g.mean();
    let quad = (m - a.mean()).dot(&(&pp * (m - b.mean())));
    Ok(w.z() * (w.g.cov().component_mul(&pp).sum() + quad))
}

impl<'a> TrainProblem<'a> {
    pub fn new(spec: &'a ProblemSpec, initial: Basis, data: &'a Dataset, seed: u64) -> Result<Self> {
        if data.points.is_empty() {
            return Err(Error::Empty("training data"));
        }
        let gamma = gamma_for(spec, &initial, seed)?;
        let boundary = if gamma > 0.0 {
            let pts = initial.domain().sample_boundary(BOUNDARY_SAMPLES, seed)?;
            let g = pts.iter().map(|(x, _)| spec.boundary.as_ref().map_or(0.0, |g| g(x))).collect();
            Some(BoundaryRule {
                weights: pts.iter().map(|p| p.1).collect(),
                points: columns(pts.iter().map(|p| &p.0), spec.dim),
                g,
            })
        } else {
            None
        };
        let truth_sq = data.values.iter().map(|v| v * v).sum();
        let cloud = columns(data.points.iter(), spec.dim);
        Ok(Self { spec, data, initial, gamma, seed, boundary, truth_sq, cloud })
    }

    fn structured(&self) -> bool {
        self.spec.mixed.is_none() && !self.initial.include_constant()
    }

    fn column(&self, g: &Gaussian) -> Result<DVector<f64>> {
        g.density_columns(&self.cloud)
    }

    fn boundary_column(&self, g: &Gaussian) -> Result<DVector<f64>> {
        match &self.boundary {
            Some(b) => g.density_columns(&b.points),
            None => Ok(DVector::zeros(0)),
        }
    }

    fn single_projection(&self, g: &Gaussian) -> Result<f64> {
        let b = Basis::new(vec![g.clone()], self.initial.domain().clone())?;
        Ok(project_forcing(&b, &self.spec.forcing)?[0])
    }

    fn state(&self, gaussians: Vec<Gaussian>) -> Result<PoissonState> {
        let n = gaussians.len();
        let mut phi = DMatrix::zeros(self.data.points.len(), n);
        let nb = self.boundary.as_ref().map_or(0, |b| b.points.ncols());
        let mut bvals = DMatrix::zeros(nb, n);
        let mut stiff = DMatrix::zeros(n, n);
        let mut proj = DVector::zeros(n);
        for (k, g) in gaussians.iter().enumerate() {
            phi.set_column(k, &self.column(g)?);
            if nb > 0 {
                bvals.set_column(k, &self.boundary_column(g)?);
            }
            proj[k] = self.single_projection(g)?;
            for j in 0..=k {
                let v = grad_dot_grad(g, &gaussians[j])?;
                stiff[(k, j)] = v;
                stiff[(j, k)] = v;
            }
        }
        Ok(PoissonState { gaussians, phi, stiff, proj, bvals })
    }

    /// Solve and misfit for an assembled state.
    fn misfit(&self, s: &PoissonState) -> Result<(f64, DVector<f64>, f64, usize)> {
        let mut l = s.stiff.clone();
        let mut f = s.proj.clone();
        if let Some(b) = &self.boundary {
            let wb = DMatrix::from_diagonal(&DVector::from_column_slice(&b.weights));
            let bt = s.bvals.transpose();
            l += (&bt * &wb * &s.bvals) * self.gamma;
            let gw: DVector<f64> = DVector::from_iterator(b.g.len(), b.g.iter().zip(&b.weights).map(|(g, w)| g * w));
            f += (bt * gw) * self.gamma;
        }
        let ls = lstsq(&l, &f)?;
        let pred = &s.phi * &ls.x;
        let num: f64 = pred.iter().zip(&self.data.values).map(|(p, t)| (p - t) * (p - t)).sum();
        Ok((num / self.truth_sq, ls.x, ls.kappa, ls.rank))
    }

    /// Misfit after replacing Gaussian `k` in `base`.
    fn perturbed(&self, base: &PoissonState, k: usize, g: Gaussian) -> Result<f64> {
        let mut s = base.clone();
        s.phi.set_column(k, &self.column(&g)?);
        if self.boundary.is_some() {
            s.bvals.set_column(k, &self.boundary_column(&g)?);
        }
        s.proj[k] = self.single_projection(&g)?;
        for j in 0..s.gaussians.len() {
            let v = if j == k { grad_dot_grad(&g, &g)? } else { grad_dot_grad(&g, &s.gaussians[j])? };
            s.stiff[(k, j)] = v;
            s.stiff[(j, k)] = v;
        }
        s.gaussians[k] = g;
        Ok(self.misfit(&s)?.0)
    }

    /// Unpack θ, assemble, solve, and measure the data misfit (for the mixed
    /// problem, the sum of the u and F errors).
    pub fn loss(&self, theta: &ThetaParams) -> Result<(f64, Solution, f64)> {
        let basis = self.initial.with_gaussians(theta.unpack()?)?;
        if self.structured() {
            let s = self.state(basis.gaussians().to_vec())?;
            let (loss, coeffs, kappa, rank) = self.misfit(&s)?;
            let sol = Solution { basis, zero: coeffs, one: None, kappa, rank };
            return Ok((loss, sol, kappa));
        }
        let r = solve_on(self.spec, &basis, self.data, self.seed)?;
        Ok((r.rel_mse, r.solution.clone(), r.kappa))
    }

    /// Central differences with step `fd_step·(1 + |θ_k|)`. Returns the loss
    /// and κ at θ along with the gradient.
    pub fn gradient(&self, theta: &ThetaParams, fd_step: f64) -> Result<(f64, f64, Vec<f64>)> {
        if !(fd_step > 0.0) {
            return Err(Error::Config("finite-difference step must be positive".into()));
        }
        if !self.structured() {
            let (loss, _, kappa) = self.loss(theta)?;
            let grad = central_gradient(&theta.values, fd_step, |v| {
                let t = ThetaParams { values: v.to_vec(), ..theta.clone() };
                Ok(self.loss(&t)?.0)
            })?;
            return Ok((loss, kappa, grad));
        }
        let stride = theta.stride();
        let mut grad = vec![0.0; theta.values.len()];
        let base = self.state(theta.unpack()?)?;
        let (loss, _, kappa, _) = self.misfit(&base)?;
        for k in 0..theta.values.len() {
            let gk = k / stride;
            let mut p = theta.values[gk * stride..(gk + 1) * stride].to_vec();
            let off = k - gk * stride;
            let h = fd_step * (1.0 + theta.values[k].abs());
            p[off] = theta.values[k] + h;
            let up = self.perturbed(&base, gk, ThetaParams::gaussian_from(theta.dim, theta.isotropic, &p)?)?;
            p[off] = theta.values[k] - h;
            let down = self.perturbed(&base, gk, ThetaParams::gaussian_from(theta.dim, theta.isotropic, &p)?)?;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFinite("loss at a perturbed point"));
            }
            grad[k] = (up - down) / (2.0 * h);
        }
        Ok((loss, kappa, grad))
    }
}

/// Central differences of `f` at `x` with step `fd_step·(1 + |x_k|)`.
pub fn central_gradient(x: &[f64], fd_step: f64, mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<Vec<f64>> {
    if !(fd_step > 0.0) {
        return Err(Error::Config("finite-difference step must be positive".into()));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let h = fd_step * (1.0 + x[k].abs());
        probe[k] = x[k] + h;
        let up = f(&probe)?;
        probe[k] = x[k] - h;
        let down = f(&probe)?;
        probe[k] = x[k];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite("loss at a perturbed point"));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Runs the optimizer from the problem's initial basis and returns the best
/// parameters seen, never worse than the starting point.
pub fn train(config: &TrainConfig, problem: &TrainProblem<'_>) -> Result<TrainTrace> {
    config.validate()?;
    let start = Instant::now();
    let mut theta = ThetaParams::pack(problem.initial.gaussians(), config.isotropic)?;
    let mut records = Vec::with_capacity(config.steps);
    let mut best_theta = theta.clone();
    let mut best_loss = f64::INFINITY;
    let mut initial_loss = f64::NAN;
    let mut stop = StopReason::MaxSteps;
    let mut adam = Adam::new(theta.values.len(), config.lr, config.beta1, config.beta2, config.eps);
    let mut lbfgs = Lbfgs::new(config.lbfgs_history);
    let mut cached: Option<(f64, f64, Vec<f64>)> = None;

    for step in 0..config.steps {
        let (loss, kappa, grad) = match cached.take() {
            Some(c) => c,
            None => match problem.gradient(&theta, config.fd_step) {
                Ok(v) => v,
                Err(_) if step > 0 => {
                    stop = StopReason::NonFinite;
                    break;
                }
                Err(e) => return Err(e),
            },
        };
        if step == 0 {
            initial_loss = loss;
        }
        records.push(StepRecord { step, loss, kappa });
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            stop = StopReason::NonFinite;
            break;
        }
        if loss < best_loss {
            best_loss = loss;
            best_theta = theta.clone();
        } else if kappa > config.kappa_limit {
            stop = StopReason::Conditioning;
            break;
        }
        if loss < kappa * config.stop_factor {
            stop = StopReason::Converged;
            break;
        }
        match config.optimizer {
            Optimizer::Adam => adam.step(&mut theta.values, &grad),
            Optimizer::Lbfgs => {
                let dir = if lbfgs.is_empty() {
                    let gn = grad.iter().map(|g| g * g).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                    grad.iter().map(|g| -config.lr * g / gn).collect()
                } else {
                    lbfgs.direction(&grad)
                };
                let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
                let mut alpha = 1.0;
                let mut accepted = None;
                for _ in 0..30 {
                    let mut t = theta.clone();
                    for (v, d) in t.values.iter_mut().zip(&dir) {
                        *v += alpha * d;
                    }
                    if let Ok(next) = problem.gradient(&t, config.fd_step) {
                        if next.0.is_finite() && next.0 <= loss + 1e-4 * alpha * slope {
                            accepted = Some((t, next));
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                let Some((t, next)) = accepted else {
                    break;
                };
                let s: Vec<f64> = t.values.iter().zip(&theta.values).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = next.2.iter().zip(&grad).map(|(a, b)| a - b).collect();
                lbfgs.update(s, y);
                theta = t;
                cached = Some(next);
            }
        }
    }
    if stop == StopReason::MaxSteps {
        if let Ok((loss, _, _)) = problem.loss(&theta) {
            if loss.is_finite() && loss < best_loss {
                best_loss = loss;
                best_theta = theta.clone();
            }
        }
    }
    let (best_loss, solution, _) = problem.loss(&best_theta).map(|(l, s, k)| (l.min(best_loss), s, k))?;
    Ok(TrainTrace {
        records,
        stop,
        initial_loss,
        best_loss,
        best_theta,
        solution,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_unpack_round_trip() {
        let g = Gaussian::new(
            DVector::from_vec(vec![0.5, -1.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.7]),
        )
        .unwrap();
        let t = ThetaParams::pack(std::slice::from_ref(&g), false).unwrap();
        assert_eq!(t.values.len(), 5);
        let back = t.unpack().unwrap();
        assert!((back[0].cov() - g.cov()).amax() < 1e-14);
        assert_eq!(back[0].mean(), g.mean());
        let iso = ThetaParams::pack(&[Gaussian::isotropic(&[1.0, 2.0], 0.3).unwrap()], true).unwrap();
        assert_eq!(iso.values.len(), 3);
        assert!((iso.unpack().unwrap()[0].cov()[(1, 1)] - 0.09).abs() < 1e-15);
    }

    #[test]
    fn fill_distance_examples() {
        let pts = vec![vec![0.25], vec![0.75]];
        assert!((fill_distance(&pts, &[0.0], &[1.0], 1025).unwrap() - 0.25).abs() < 1e-12);
        let c = vec![vec![0.5, 0.5]];
        let h = fill_distance(&c, &[0.0, 0.0], &[1.0, 1.0], 33).unwrap();
        assert!((h - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(fill_distance(&[], &[0.0], &[1.0], 10).is_err());
    }

    #[test]
    fn config_validation() {
        let c = TrainConfig { steps: 0, ..TrainConfig::default() };
        assert!(c.validate().is_err());
        let c = TrainConfig { lr: 0.0, ..TrainConfig::default() };
        assert!(c.validate().is_err());
    }
}
