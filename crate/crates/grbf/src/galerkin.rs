//! Poisson and mixed Darcy systems, their least-squares solve, and evaluation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::forcing::{Forcing, ScalarField, VectorForcing};
use crate::linalg::{condition, lstsq};
use crate::whitney::{
    assemble_boundary, assemble_d0, assemble_m1, assemble_s0, project_forcing, project_vector_forcing, Basis,
    BOUNDARY_SAMPLES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Poisson,
    MixedDarcy,
}

#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub l: DMatrix<f64>,
    pub f: DVector<f64>,
    pub kappa: f64,
    pub kind: SystemKind,
    pub gamma: f64,
    pub basis: Basis,
}

/// Coefficients of the discrete solution.
#[derive(Debug, Clone)]
pub struct Solution {
    pub basis: Basis,
    /// One coefficient per 0-form.
    pub zero: DVector<f64>,
    /// One coefficient per 1-form pair `i < j`, for mixed systems.
    pub one: Option<DVector<f64>>,
    pub kappa: f64,
    pub rank: usize,
}

/// `L = S⁰ + γB`, `F = ⟨f, φ⟩ + γ b(g)`. With `γ = 0` this is the plain
/// Galerkin system on all of space.
pub fn build_poisson(
    basis: &Basis,
    gamma: f64,
    f: &Forcing,
    g: Option<&ScalarField>,
    seed: u64,
) -> Result<AssembledSystem> {
    if !(gamma >= 0.0) {
        return Err(Error::Config(format!("penalty must be nonnegative, got {gamma}")));
    }
    let mut l = assemble_s0(basis)?.values;
    let mut rhs = project_forcing(basis, f)?;
    if gamma > 0.0 {
        if !basis.domain().is_bounded() {
            return Err(Error::Unbounded);
        }
        let (b, bg) = assemble_boundary(basis, g, BOUNDARY_SAMPLES, seed)?;
        l += b * gamma;
        rhs += bg * gamma;
    }
    let kappa = condition(&l);
    Ok(AssembledSystem { l, f: rhs, kappa, kind: SystemKind::Poisson, gamma, basis: basis.clone() })
}

/// Mixed system in the unknowns `(F̂ over pairs, û over 0-forms)`:
/// `M¹F̂ − D⁰ᵀû = ⟨G, ψ⟩` and `−D⁰F̂ = ⟨f, φ⟩`, the second row coming from
/// `∫(∇·F)v = −∫F·∇v` on all of space.
pub fn build_mixed_darcy(basis: &Basis, g_field: &VectorForcing, f: &Forcing) -> Result<AssembledSystem> {
    if basis.dim() != 3 {
        return Err(Error::Dimension { expected: 3, got: basis.dim() });
    }
    let m1 = assemble_m1(basis)?.values;
    let d0 = assemble_d0(basis)?.values;
    let p = m1.nrows();
    let n = d0.nrows();
    let mut l = DMatrix::zeros(p + n, p + n);
    l.view_mut((0, 0), (p, p)).copy_from(&m1);
    l.view_mut((0, p), (p, n)).copy_from(&(-d0.transpose()));
    l.view_mut((p, 0), (n, p)).copy_from(&(-&d0));
    let mut rhs = DVector::zeros(p + n);
    rhs.rows_mut(0, p).copy_from(&project_vector_forcing(basis, g_field)?);
    rhs.rows_mut(p, n).copy_from(&project_forcing(basis, f)?);
    let kappa = condition(&l);
    Ok(AssembledSystem { l, f: rhs, kappa, kind: SystemKind::MixedDarcy, gamma: 0.0, basis: basis.clone() })
}

/// Minimum-norm least-squares solve with relative cutoff `1e-14·σ_max`.
pub fn solve(system: &AssembledSystem) -> Result<Solution> {
    let ls = lstsq(&system.l, &system.f)?;
    let n = system.basis.len();
    let (zero, one) = match system.kind {
        SystemKind::Poisson => (ls.x, None),
        SystemKind::MixedDarcy => {
            let p = ls.x.len() - n;
            (ls.x.rows(p, n).into_owned(), Some(ls.x.rows(0, p).into_owned()))
        }
    };
    Ok(Solution { basis: system.basis.clone(), zero, one, kappa: ls.kappa, rank: ls.rank })
}

impl Solution {
    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.basis.dim() {
            return Err(Error::Dimension { expected: self.basis.dim(), got: x.len() });
        }
        Ok(())
    }

    /// `u_h(x) = Σ c_i φ_i(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok((0..self.basis.len()).map(|i| self.zero[i] * self.basis.value(i, x)).sum())
    }

    /// `F_h(x) = Σ c_ij ψ_ij(x)`; zero when there is no 1-form block.
    pub fn eval_field(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check(x)?;
        let mut out = DVector::zeros(x.len());
        if let Some(one) = &self.one {
            for (c, ij) in one.iter().zip(self.basis.pairs()) {
                out.axpy(*c, &self.basis.one_form(ij[0], ij[1], x), 1.0);
            }
        }
        Ok(out)
    }
}

pub fn evaluate(solution: &Solution, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points.iter().map(|x| solution.eval(x)).collect()
}

pub fn evaluate_field(solution: &Solution, points: &[Vec<f64>]) -> Result<Vec<DVector<f64>>> {
    points.iter().map(|x| solution.eval_field(x)).collect()
}

/// `‖pred − truth‖² / ‖truth‖²`.
pub fn relative_mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension { expected: truth.len(), got: pred.len() });
    }
    let den: f64 = truth.iter().map(|t| t * t).sum();
    if den == 0.0 {
        return Err(Error::ZeroTruth);
    }
    let num: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(num / den)
}

/// Plain mean square of `pred − truth`, for references that vanish.
pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension { expected: truth.len(), got: pred.len() });
    }
    if pred.is_empty() {
        return Err(Error::Empty("mse of no values"));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Gaussian;
    use crate::whitney::Domain;

    #[test]
    fn relative_mse_examples() {
        let t = [1.0, -2.0, 3.0];
        assert_eq!(relative_mse(&t, &t).unwrap(), 0.0);
        assert_eq!(relative_mse(&[0.0; 3], &t).unwrap(), 1.0);
        let p: Vec<f64> = t.iter().map(|v| v * 1.1).collect();
        assert!((relative_mse(&p, &t).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(relative_mse(&[1.0], &[0.0]), Err(Error::ZeroTruth));
    }

    #[test]
    fn homogeneous_poisson_has_zero_solution() {
        let b = Basis::new(
            vec![Gaussian::isotropic(&[-1.0], 1.0).unwrap(), Gaussian::isotropic(&[1.0], 1.0).unwrap()],
            Domain::Unbounded { dim: 1 },
        )
        .unwrap();
        let sys = build_poisson(&b, 0.0, &Forcing::Zero, None, 0).unwrap();
        let sol = solve(&sys).unwrap();
        assert_eq!(sol.zero.norm(), 0.0);
        assert!(build_poisson(&b, 1.0, &Forcing::Zero, None, 0).is_err());
    }

    #[test]
    fn evaluation_at_mode() {
        let g = Gaussian::isotropic(&[0.5], 0.5).unwrap();
        let b = Basis::new(vec![g.clone()], Domain::Unbounded { dim: 1 }).unwrap();
        let sol = Solution { basis: b, zero: DVector::from_vec(vec![1.0]), one: None, kappa: 1.0, rank: 1 };
        assert_eq!(sol.eval(&[0.5]).unwrap(), g.density(&[0.5]).unwrap());
        assert!(sol.eval(&[0.5, 0.0]).is_err());
    }
}
