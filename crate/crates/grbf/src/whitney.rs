//! Whitney-form matrices built from Gaussian 0-forms.
//!
//! 0-form indices run over the basis with the constant form ψ₀ first when it
//! is present. 1-forms are `ψ_ij = φ_i∇φ_j − φ_j∇φ_i` over pairs `i < j`, and
//! 2-forms (three dimensions only) are `ψ_ijk = Σ_cyc φ_i ∇φ_j × ∇φ_k`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forcing::{Forcing, ScalarField, VectorForcing};
use crate::gaussian::{product, Gaussian};
use crate::linalg::lstsq;
use crate::moments::{integral_moment, trig_integral};
use crate::oracles::{oracle_biquadratic, oracle_quadratic};
use crate::poly::Polynomial;
use crate::tensor::DenseTensor;

/// Default number of Monte Carlo samples on the boundary.
pub const BOUNDARY_SAMPLES: usize = 1024;

pub type BoundarySampler = Arc<dyn Fn(usize, u64) -> Vec<(Vec<f64>, f64)> + Send + Sync>;

#[derive(Clone)]
pub enum Domain {
    Unbounded { dim: usize },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Any bounded region, described by its volume and a seeded sampler of
    /// `(point, surface weight)` pairs on its boundary.
    Custom { dim: usize, volume: f64, sampler: BoundarySampler },
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Unbounded { dim } => write!(f, "Unbounded(d={dim})"),
            Domain::Box { lo, hi } => write!(f, "Box({lo:?}, {hi:?})"),
            Domain::Custom { dim, volume, .. } => write!(f, "Custom(d={dim}, vol={volume})"),
        }
    }
}

impl Domain {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Domain::Box { lo: vec![lo], hi: vec![hi] }
    }

    pub fn cube(d: usize, lo: f64, hi: f64) -> Self {
        Domain::Box { lo: vec![lo; d], hi: vec![hi; d] }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Unbounded { dim } | Domain::Custom { dim, .. } => *dim,
            Domain::Box { lo, .. } => lo.len(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Domain::Unbounded { .. })
    }

    pub fn volume(&self) -> Option<f64> {
        match self {
            Domain::Unbounded { .. } => None,
            Domain::Box { lo, hi } => Some(lo.iter().zip(hi).map(|(a, b)| b - a).product()),
            Domain::Custom { volume, .. } => Some(*volume),
        }
    }

    /// Boundary quadrature points with surface weights. An interval's boundary
    /// is its two endpoints with unit weight, so the sum there is exact.
    pub fn sample_boundary(&self, n: usize, seed: u64) -> Result<Vec<(Vec<f64>, f64)>> {
        match self {
            Domain::Unbounded { .. } => Err(Error::Unbounded),
            Domain::Custom { sampler, .. } => Ok(sampler(n, seed)),
            Domain::Box { lo, hi } if lo.len() == 1 => Ok(vec![(vec![lo[0]], 1.0), (vec![hi[0]], 1.0)]),
            Domain::Box { lo, hi } => {
                let d = lo.len();
                let widths: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| b - a).collect();
                // Face k (both sides) has area Π_{l≠k} width_l.
                let areas: Vec<f64> = (0..d)
                    .map(|k| (0..d).filter(|&l| l != k).map(|l| widths[l]).product())
                    .collect();
                let total = 2.0 * areas.iter().sum::<f64>();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let weight = total / n.max(1) as f64;
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    let mut t = rng.random::<f64>() * total / 2.0;
                    let mut face = d - 1;
                    for (k, &a) in areas.iter().enumerate() {
                        if t < a {
                            face = k;
                            break;
                        }
                        t -= a;
                    }
                    let mut x: Vec<f64> = (0..d).map(|l| lo[l] + widths[l] * rng.random::<f64>()).collect();
                    x[face] = if rng.random::<bool>() { hi[face] } else { lo[face] };
                    out.push((x, weight));
                }
                Ok(out)
            }
        }
    }
}

/// A 0-form slot: the constant ψ₀ or one of the Gaussians.
#[derive(Debug, Clone, Copy)]
pub enum Slot<'a> {
    Constant,
    Gaussian(&'a Gaussian),
}

#[derive(Debug, Clone)]
pub struct Basis {
    gaussians: Vec<Gaussian>,
    include_constant: bool,
    domain: Domain,
}

impl Basis {
    pub fn new(gaussians: Vec<Gaussian>, domain: Domain) -> Result<Self> {
        let d = domain.dim();
        if let Some(g) = gaussians.iter().find(|g| g.dim() != d) {
            return Err(Error::Dimension { expected: d, got: g.dim() });
        }
        Ok(Self { gaussians, include_constant: false, domain })
    }

    /// Adds the constant 0-form ψ₀, which is only integrable on bounded domains.
    pub fn with_constant(gaussians: Vec<Gaussian>, domain: Domain) -> Result<Self> {
        if !domain.is_bounded() {
            return Err(Error::Unbounded);
        }
        let mut b = Self::new(gaussians, domain)?;
        b.include_constant = true;
        Ok(b)
    }

    pub fn gaussians(&self) -> &[Gaussian] {
        &self.gaussians
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn include_constant(&self) -> bool {
        self.include_constant
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Number of 0-forms, counting ψ₀.
    pub fn len(&self) -> usize {
        self.gaussians.len() + usize::from(self.include_constant)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slot(&self, i: usize) -> Slot<'_> {
        match (self.include_constant, i) {
            (true, 0) => Slot::Constant,
            (true, k) => Slot::Gaussian(&self.gaussians[k - 1]),
            (false, k) => Slot::Gaussian(&self.gaussians[k]),
        }
    }

    /// The same basis with a different list of Gaussians.
    pub fn with_gaussians(&self, gaussians: Vec<Gaussian>) -> Result<Self> {
        let mut b = Self::new(gaussians, self.domain.clone())?;
        b.include_constant = self.include_constant;
        Ok(b)
    }

    pub fn pairs(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(vec![i, j]);
            }
        }
        out
    }

    pub fn triples(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    out.push(vec![i, j, k]);
                }
            }
        }
        out
    }

    pub fn value(&self, i: usize, x: &[f64]) -> f64 {
        match self.slot(i) {
            Slot::Constant => 1.0,
            Slot::Gaussian(g) => g.log_density_unchecked(x).exp(),
        }
    }

    pub fn gradient(&self, i: usize, x: &[f64]) -> DVector<f64> {
        match self.slot(i) {
            Slot::Constant => DVector::zeros(x.len()),
            Slot::Gaussian(g) => g.grad_density(x).expect("checked dimension"),
        }
    }

    /// `ψ_ij(x) = φ_i∇φ_j − φ_j∇φ_i`.
    pub fn one_form(&self, i: usize, j: usize, x: &[f64]) -> DVector<f64> {
        self.gradient(j, x) * self.value(i, x) - self.gradient(i, x) * self.value(j, x)
    }

    /// `ψ_ijk(x) = Σ_cyc φ_i ∇φ_j × ∇φ_k`, three dimensions only.
    pub fn two_form(&self, i: usize, j: usize, k: usize, x: &[f64]) -> DVector<f64> {
        let (gi, gj, gk) = (self.gradient(i, x), self.gradient(j, x), self.gradient(k, x));
        gj.cross(&gk) * self.value(i, x) + gk.cross(&gi) * self.value(j, x) + gi.cross(&gj) * self.value(k, x)
    }

    fn check_indices(&self, idx: &[usize]) -> Result<()> {
        match idx.iter().find(|&&i| i >= self.len()) {
            Some(&i) => Err(Error::Shape(format!("0-form index {i} out of range {}", self.len()))),
            None => Ok(()),
        }
    }

    /// `∫ Π_a φ_{phis[a]} ⊗_b ∇φ_{grads[b]}` over 0-form indices. ψ₀ drops
    /// out of density slots and zeroes gradient slots; `∫ψ₀ = Vol(Ω)`.
    pub fn integral(&self, phis: &[usize], grads: &[usize]) -> Result<DenseTensor> {
        self.check_indices(phis)?;
        self.check_indices(grads)?;
        let d = self.dim();
        let mut gs = Vec::with_capacity(grads.len());
        for &b in grads {
            match self.slot(b) {
                Slot::Constant => return Ok(DenseTensor::zeros(vec![d; grads.len()])),
                Slot::Gaussian(g) => gs.push(g),
            }
        }
        let ps: Vec<&Gaussian> = phis
            .iter()
            .filter_map(|&a| match self.slot(a) {
                Slot::Constant => None,
                Slot::Gaussian(g) => Some(g),
            })
            .collect();
        if ps.is_empty() && gs.is_empty() {
            return Ok(DenseTensor::scalar(self.domain.volume().ok_or(Error::Unbounded)?));
        }
        integral_moment(&ps, &gs)
    }

    /// Product density of the non-constant slots, or `None` when all are ψ₀.
    fn slot_product(&self, idx: &[usize]) -> Result<Option<crate::gaussian::WeightedGaussian>> {
        let gs: Vec<&Gaussian> = idx
            .iter()
            .filter_map(|&a| match self.slot(a) {
                Slot::Constant => None,
                Slot::Gaussian(g) => Some(g),
            })
            .collect();
        if gs.is_empty() {
            return Ok(None);
        }
        product(&gs).map(Some)
    }

    /// Precision and mean of a slot; both zero for ψ₀.
    fn slot_affine(&self, i: usize) -> (DMatrix<f64>, DVector<f64>) {
        let d = self.dim();
        match self.slot(i) {
            Slot::Constant => (DMatrix::zeros(d, d), DVector::zeros(d)),
            Slot::Gaussian(g) => (g.precision().clone(), g.mean().clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    M0,
    S0,
    D0,
    M1,
    D1,
    M2,
    M1Hat,
    D0Hat,
}

/// An assembled matrix with the multi-index labelling its rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FormMatrix {
    pub kind: FormKind,
    pub rows: Vec<Vec<usize>>,
    pub cols: Vec<Vec<usize>>,
    pub values: DMatrix<f64>,
}

impl FormMatrix {
    fn build(
        kind: FormKind,
        rows: Vec<Vec<usize>>,
        cols: Vec<Vec<usize>>,
        symmetric: bool,
        mut entry: impl FnMut(&[usize], &[usize]) -> Result<f64>,
    ) -> Result<Self> {
        let mut values = DMatrix::zeros(rows.len(), cols.len());
        for (r, ri) in rows.iter().enumerate() {
            let start = if symmetric { r } else { 0 };
            for c in start..cols.len() {
                let v = entry(ri, &cols[c])?;
                values[(r, c)] = v;
                if symmetric {
                    values[(c, r)] = v;
                }
            }
        }
        Ok(Self { kind, rows, cols, values })
    }

    pub fn row_of(&self, idx: &[usize]) -> Option<usize> {
        self.rows.iter().position(|r| r == idx)
    }

    pub fn col_of(&self, idx: &[usize]) -> Option<usize> {
        self.cols.iter().position(|c| c == idx)
    }

    /// Entry addressed by multi-indices in any order, using antisymmetry
    /// of the form indices; repeated indices give 0.
    pub fn entry(&self, row: &[usize], col: &[usize]) -> Option<f64> {
        let (rs, r) = sort_with_sign(row);
        let (cs, c) = sort_with_sign(col);
        if rs == 0.0 || cs == 0.0 {
            return Some(0.0);
        }
        Some(rs * cs * self.values[(self.row_of(&r)?, self.col_of(&c)?)])
    }
}

/// Sorts indices, returning the permutation sign (0 on a repeat).
pub fn sort_with_sign(idx: &[usize]) -> (f64, Vec<usize>) {
    let mut v = idx.to_vec();
    let mut sign = 1.0;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            } else if v[j] == v[j + 1] {
                return (0.0, v);
            }
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return (0.0, v);
    }
    (sign, v)
}

fn singles(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|i| vec![i]).collect()
}

fn require_3d(basis: &Basis) -> Result<()> {
    if basis.dim() != 3 {
        return Err(Error::Dimension { expected: 3, got: basis.dim() });
    }
    Ok(())
}

/// `M⁰_ij = ∫ φ_i φ_j`.
pub fn m0_entry(basis: &Basis, i: usize, j: usize) -> Result<f64> {
    Ok(basis.integral(&[i, j], &[])?.value())
}

/// `S⁰_ij = tr ∫ ∇φ_i ⊗ ∇φ_j`.
pub fn s0_entry(basis: &Basis, i: usize, j: usize) -> Result<f64> {
    basis.integral(&[], &[i, j])?.trace()
}

/// `D⁰_{i,ab} = ⟨∇φ_i, ψ_ab⟩ = tr(I_{a,bi} − I_{b,ai})`.
pub fn d0_entry(basis: &Basis, i: usize, a: usize, b: usize) -> Result<f64> {
    let (sign, ab) = sort_with_sign(&[a, b]);
    if sign == 0.0 {
        return Ok(0.0);
    }
    if sign < 0.0 {
        return Ok(-d0_entry(basis, i, ab[0], ab[1])?);
    }
    Ok(basis.integral(&[a], &[b, i])?.trace()? - basis.integral(&[b], &[a, i])?.trace()?)
}

/// `M¹_{ij,ab} = ⟨ψ_ij, ψ_ab⟩`. Every entry function evaluates on sorted
/// indices and applies the permutation sign, so antisymmetry is exact.
pub fn m1_entry(basis: &Basis, (i, j): (usize, usize), (a, b): (usize, usize)) -> Result<f64> {
    let (s1, r) = sort_with_sign(&[i, j]);
    let (s2, c) = sort_with_sign(&[a, b]);
    if s1 * s2 == 0.0 {
        return Ok(0.0);
    }
    if (r[0], r[1], c[0], c[1]) != (i, j, a, b) {
        return Ok(s1 * s2 * m1_entry(basis, (r[0], r[1]), (c[0], c[1]))?);
    }
    let t = |p: [usize; 2], g: [usize; 2]| -> Result<f64> { basis.integral(&p, &g)?.trace() };
    Ok(t([i, a], [j, b])? - t([i, b], [j, a])? - t([j, a], [i, b])? + t([j, b], [i, a])?)
}

fn cyclic(t: (usize, usize, usize)) -> [(usize, usize, usize); 3] {
    let (i, j, k) = t;
    [(i, j, k), (j, k, i), (k, i, j)]
}

/// `M²_{ijk,abc} = ⟨ψ_ijk, ψ_abc⟩`, three dimensions.
pub fn m2_entry(basis: &Basis, ijk: (usize, usize, usize), abc: (usize, usize, usize)) -> Result<f64> {
    require_3d(basis)?;
    let (s1, r) = sort_with_sign(&[ijk.0, ijk.1, ijk.2]);
    let (s2, c) = sort_with_sign(&[abc.0, abc.1, abc.2]);
    if s1 * s2 == 0.0 {
        return Ok(0.0);
    }
    if (r[0], r[1], r[2]) != ijk || (c[0], c[1], c[2]) != abc {
        return Ok(s1 * s2 * m2_entry(basis, (r[0], r[1], r[2]), (c[0], c[1], c[2]))?);
    }
    let mut total = 0.0;
    for (i, j, k) in cyclic(ijk) {
        for (a, b, c) in cyclic(abc) {
            total += basis.integral(&[i, a], &[j, b, k, c])?.double_trace()?
                - basis.integral(&[i, a], &[j, c, k, b])?.double_trace()?;
        }
    }
    Ok(total)
}

/// `D¹_{ij,abc} = ⟨∇×ψ_ij, ψ_abc⟩` with `∇×ψ_ij = 2∇φ_i×∇φ_j`, three dimensions.
pub fn d1_entry(basis: &Basis, (i, j): (usize, usize), abc: (usize, usize, usize)) -> Result<f64> {
    require_3d(basis)?;
    let (s1, r) = sort_with_sign(&[i, j]);
    let (s2, c) = sort_with_sign(&[abc.0, abc.1, abc.2]);
    if s1 * s2 == 0.0 {
        return Ok(0.0);
    }
    if (r[0], r[1]) != (i, j) || (c[0], c[1], c[2]) != abc {
        return Ok(s1 * s2 * d1_entry(basis, (r[0], r[1]), (c[0], c[1], c[2]))?);
    }
    let mut total = 0.0;
    for (a, b, c) in cyclic(abc) {
        total += basis.integral(&[a], &[i, b, j, c])?.double_trace()?
            - basis.integral(&[a], &[i, c, j, b])?.double_trace()?;
    }
    Ok(2.0 * total)
}

pub fn assemble_m0(basis: &Basis) -> Result<FormMatrix> {
    let idx = singles(basis.len());
    FormMatrix::build(FormKind::M0, idx.clone(), idx, true, |r, c| m0_entry(basis, r[0], c[0]))
}

pub fn assemble_s0(basis: &Basis) -> Result<FormMatrix> {
    let idx = singles(basis.len());
    FormMatrix::build(FormKind::S0, idx.clone(), idx, true, |r, c| s0_entry(basis, r[0], c[0]))
}

/// Rows are 0-forms, columns are 1-form pairs.
pub fn assemble_d0(basis: &Basis) -> Result<FormMatrix> {
    FormMatrix::build(FormKind::D0, singles(basis.len()), basis.pairs(), false, |r, c| {
        d0_entry(basis, r[0], c[0], c[1])
    })
}

pub fn assemble_m1(basis: &Basis) -> Result<FormMatrix> {
    let p = basis.pairs();
    FormMatrix::build(FormKind::M1, p.clone(), p, true, |r, c| m1_entry(basis, (r[0], r[1]), (c[0], c[1])))
}

pub fn assemble_m2(basis: &Basis) -> Result<FormMatrix> {
    require_3d(basis)?;
    let t = basis.triples();
    FormMatrix::build(FormKind::M2, t.clone(), t, true, |r, c| {
        m2_entry(basis, (r[0], r[1], r[2]), (c[0], c[1], c[2]))
    })
}

/// Rows are 1-form pairs, columns are 2-form triples.
pub fn assemble_d1(basis: &Basis) -> Result<FormMatrix> {
    require_3d(basis)?;
    FormMatrix::build(FormKind::D1, basis.pairs(), basis.triples(), false, |r, c| {
        d1_entry(basis, (r[0], r[1]), (c[0], c[1], c[2]))
    })
}

/// 1-form mass and 0→1 mixed matrices over the gradients `ψ_{0i} = ∇φ_i`
/// together with the Gaussian pairs: `M̂¹ = [[S⁰, D⁰], [D⁰ᵀ, M¹]]`, `D̂⁰ = [S⁰ D⁰]`.
/// The blocks are indexed by the Gaussians alone (ψ₀ is absorbed into the
/// gradient block).
pub fn assemble_augmented(basis: &Basis) -> Result<(FormMatrix, FormMatrix)> {
    if !basis.include_constant() {
        return Err(Error::Config("augmented blocks need the constant form".into()));
    }
    let plain = Basis::new(basis.gaussians().to_vec(), basis.domain().clone())?;
    let s0 = assemble_s0(&plain)?;
    let d0 = assemble_d0(&plain)?;
    let m1 = assemble_m1(&plain)?;
    let n = s0.values.nrows();
    let p = m1.values.nrows();
    let mut hat = DMatrix::zeros(n + p, n + p);
    hat.view_mut((0, 0), (n, n)).copy_from(&s0.values);
    hat.view_mut((0, n), (n, p)).copy_from(&d0.values);
    hat.view_mut((n, 0), (p, n)).copy_from(&d0.values.transpose());
    hat.view_mut((n, n), (p, p)).copy_from(&m1.values);
    // Labels in the full (ψ₀-first) index space: gradient rows are (0, i).
    let relabel = |v: &Vec<usize>| v.iter().map(|k| k + 1).collect::<Vec<_>>();
    let mut labels: Vec<Vec<usize>> = (0..n).map(|i| vec![0, i + 1]).collect();
    labels.extend(m1.rows.iter().map(relabel));
    let m1hat = FormMatrix { kind: FormKind::M1Hat, rows: labels.clone(), cols: labels, values: hat };
    let mut d0hat_vals = DMatrix::zeros(n, n + p);
    d0hat_vals.view_mut((0, 0), (n, n)).copy_from(&s0.values);
    d0hat_vals.view_mut((0, n), (n, p)).copy_from(&d0.values);
    let d0hat = FormMatrix {
        kind: FormKind::D0Hat,
        rows: s0.rows.iter().map(relabel).collect(),
        cols: m1hat.cols.clone(),
        values: d0hat_vals,
    };
    Ok((m1hat, d0hat))
}

/// `M¹` entry from the closed quadratic-form expectation, independent of the
/// tensor route.
pub fn oneform_oracle(basis: &Basis, (i, j): (usize, usize), (a, b): (usize, usize)) -> Result<f64> {
    basis.check_indices(&[i, j, a, b])?;
    if i == j || a == b {
        return Ok(0.0);
    }
    let w = basis
        .slot_product(&[i, j, a, b])?
        .ok_or(Error::Config("one-form of two constants".into()))?;
    let e = |p: usize, q: usize| -> Result<f64> {
        let (pp, mp) = basis.slot_affine(p);
        let (pq, mq) = basis.slot_affine(q);
        oracle_quadratic(&w.g, &(pp * pq), &mq, &mp)
    };
    Ok(w.z() * (e(i, a)? - e(i, b)? - e(j, a)? + e(j, b)?))
}

/// `M²` entry as `z Σ_cyc Σ_cyc (T_iajb − T_jaib)` with `T` from the
/// biquadratic expectation.
pub fn twoform_oracle(basis: &Basis, ijk: (usize, usize, usize), abc: (usize, usize, usize)) -> Result<f64> {
    require_3d(basis)?;
    let all = [ijk.0, ijk.1, ijk.2, abc.0, abc.1, abc.2];
    basis.check_indices(&all)?;
    if sort_with_sign(&[ijk.0, ijk.1, ijk.2]).0 == 0.0 || sort_with_sign(&[abc.0, abc.1, abc.2]).0 == 0.0 {
        return Ok(0.0);
    }
    let w = basis.slot_product(&all)?.ok_or(Error::Config("two-form of constants".into()))?;
    let t = |i: usize, a: usize, j: usize, b: usize| -> Result<f64> {
        let (pi, mi) = basis.slot_affine(i);
        let (pa, ma) = basis.slot_affine(a);
        let (pj, mj) = basis.slot_affine(j);
        let (pb, mb) = basis.slot_affine(b);
        oracle_biquadratic(&w.g, &(pi * pa), &(pj * pb), &ma, &mb, &mi, &mj)
    };
    let mut total = 0.0;
    for (i, j, _) in cyclic(ijk) {
        for (a, b, _) in cyclic(abc) {
            total += t(i, a, j, b)? - t(j, a, i, b)?;
        }
    }
    Ok(w.z() * total)
}

/// `B_ij ≈ ∫_Γ φ_iφ_j` and `b_i ≈ ∫_Γ g φ_i` by seeded boundary quadrature.
pub fn assemble_boundary(
    basis: &Basis,
    g: Option<&ScalarField>,
    n_samples: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let pts = basis.domain().sample_boundary(n_samples, seed)?;
    let n = basis.len();
    let mut bmat = DMatrix::zeros(n, n);
    let mut bvec = DVector::zeros(n);
    let mut vals = vec![0.0; n];
    for (x, w) in &pts {
        for (i, v) in vals.iter_mut().enumerate() {
            *v = basis.value(i, x);
        }
        let gx = g.map_or(0.0, |g| g(x));
        for i in 0..n {
            bvec[i] += w * gx * vals[i];
            for j in 0..n {
                bmat[(i, j)] += w * vals[i] * vals[j];
            }
        }
    }
    Ok((bmat, bvec))
}

/// Default penalty, `γ = 16N`.
pub fn default_gamma(n: usize) -> f64 {
    16.0 * n as f64
}

/// Largest generalized eigenvalue of `S⁰ v = λ B v` on the range of `B`,
/// falling back to `16N` when `B` vanishes.
pub fn estimate_gamma(basis: &Basis, seed: u64) -> Result<f64> {
    let s0 = assemble_s0(basis)?.values;
    let (b, _) = assemble_boundary(basis, None, BOUNDARY_SAMPLES, seed)?;
    let eig = nalgebra::SymmetricEigen::new(b);
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v));
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k] > 1e-12 * lmax && lmax > 1e-300)
        .collect();
    if keep.is_empty() {
        return Ok(default_gamma(basis.len()));
    }
    let n = s0.nrows();
    let mut w = DMatrix::zeros(n, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        w.set_column(c, &(eig.eigenvectors.column(k) / eig.eigenvalues[k].sqrt()));
    }
    let reduced = w.transpose() * s0 * &w;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    Ok(nalgebra::SymmetricEigen::new(reduced).eigenvalues.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)))
}

/// `F_i = ⟨f, φ_i⟩`, exact for analytic descriptors and an L² projection for
/// sampled ones. On ψ₀ the pairing is the whole-space integral of `f`.
pub fn project_forcing(basis: &Basis, f: &Forcing) -> Result<DVector<f64>> {
    let n = basis.len();
    let d = basis.dim();
    match f {
        Forcing::Zero => Ok(DVector::zeros(n)),
        Forcing::PolyGaussian(terms) => {
            let mut out = DVector::zeros(n);
            for t in terms {
                if t.gaussian.dim() != d || t.poly.dim() != d {
                    return Err(Error::Dimension { expected: d, got: t.gaussian.dim() });
                }
                for i in 0..n {
                    out[i] += poly_gaussian_pairing(basis, i, t.scale, &t.gaussian, &t.poly)?;
                }
            }
            Ok(out)
        }
        Forcing::Trig(terms) => {
            if d != 1 {
                return Err(Error::Dimension { expected: 1, got: d });
            }
            let mut out = DVector::zeros(n);
            for i in 0..n {
                let Slot::Gaussian(g) = basis.slot(i) else {
                    return Err(Error::Config("trigonometric forcing is not integrable against ψ₀".into()));
                };
                for t in terms {
                    out[i] += t.amplitude * trig_integral(t.kind, t.k, g)?;
                }
            }
            Ok(out)
        }
        Forcing::Sampled(s) => {
            if s.lo.len() != d || s.hi.len() != d {
                return Err(Error::Dimension { expected: d, got: s.lo.len() });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            let k = s.points.max(1);
            let mut phi = DMatrix::zeros(k, n);
            let mut rhs = DVector::zeros(k);
            for r in 0..k {
                let x: Vec<f64> = (0..d).map(|l| s.lo[l] + (s.hi[l] - s.lo[l]) * rng.random::<f64>()).collect();
                for i in 0..n {
                    phi[(r, i)] = basis.value(i, &x);
                }
                rhs[r] = (s.f)(&x);
            }
            let c = lstsq(&phi, &rhs)?.x;
            Ok(assemble_m0(basis)?.values * c)
        }
    }
}

/// `scale ∫ p(x) N(x; g) φ_i(x) dx`.
fn poly_gaussian_pairing(basis: &Basis, i: usize, scale: f64, g: &Gaussian, p: &Polynomial) -> Result<f64> {
    match basis.slot(i) {
        Slot::Constant => Ok(scale * p.gaussian_expectation(g)?),
        Slot::Gaussian(phi) => {
            let w = product(&[g, phi])?;
            Ok(scale * w.z() * p.gaussian_expectation(&w.g)?)
        }
    }
}

/// Polynomial vector `C_a⁻¹(x − m_a)`, zero for ψ₀.
fn residual_poly(basis: &Basis, a: usize) -> Vec<Polynomial> {
    let d = basis.dim();
    let (p, m) = basis.slot_affine(a);
    let pm = &p * &m;
    (0..d)
        .map(|k| Polynomial::affine(p.row(k).transpose().as_slice(), -pm[k]))
        .collect()
}

/// `⟨G, ψ_ab⟩` for every pair `a < b`, in [`Basis::pairs`] order.
pub fn project_vector_forcing(basis: &Basis, field: &VectorForcing) -> Result<DVector<f64>> {
    let pairs = basis.pairs();
    let mut out = DVector::zeros(pairs.len());
    let VectorForcing::PolyGaussian(terms) = field else {
        return Ok(out);
    };
    let d = basis.dim();
    for t in terms {
        if t.gaussian.dim() != d || t.components.len() != d {
            return Err(Error::Dimension { expected: d, got: t.components.len() });
        }
        for (r, ab) in pairs.iter().enumerate() {
            let (a, b) = (ab[0], ab[1]);
            // ψ_ab = φ_aφ_b (C_a⁻¹(x−m_a) − C_b⁻¹(x−m_b)).
            let ra = residual_poly(basis, a);
            let rb = residual_poly(basis, b);
            let mut q = Polynomial::zero(d);
            for k in 0..d {
                q = q + &t.components[k] * &(ra[k].clone() - rb[k].clone());
            }
            let mut gs: Vec<&Gaussian> = vec![&t.gaussian];
            for s in [a, b] {
                if let Slot::Gaussian(g) = basis.slot(s) {
                    gs.push(g);
                }
            }
            let w = product(&gs)?;
            out[r] += t.scale * w.z() * q.gaussian_expectation(&w.g)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    fn pair_1d() -> Basis {
        Basis::new(
            vec![Gaussian::standard(1), Gaussian::isotropic(&[2.0], 1.0).unwrap()],
            Domain::Unbounded { dim: 1 },
        )
        .unwrap()
    }

    #[test]
    fn m0_small_values() {
        let m0 = assemble_m0(&pair_1d()).unwrap().values;
        assert_relative_eq!(m0[(0, 0)], 0.5 / SQRT_PI, max_relative = 1e-14);
        assert_relative_eq!(m0[(0, 1)], (-1.0f64).exp() / (2.0 * SQRT_PI), max_relative = 1e-13);
        let b = Basis::with_constant(vec![Gaussian::standard(1)], Domain::interval(-1.0, 1.0)).unwrap();
        let m0 = assemble_m0(&b).unwrap().values;
        assert_eq!(m0[(0, 0)], 2.0);
        assert_relative_eq!(m0[(0, 1)], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn s0_small_values_and_constant_row() {
        let b = Basis::with_constant(vec![Gaussian::standard(1)], Domain::interval(-1.0, 1.0)).unwrap();
        let s0 = assemble_s0(&b).unwrap().values;
        assert_relative_eq!(s0[(1, 1)], 0.25 / SQRT_PI, max_relative = 1e-14);
        assert_eq!(s0[(0, 0)], 0.0);
        assert_eq!(s0[(0, 1)], 0.0);
    }

    #[test]
    fn constant_needs_bounded_domain() {
        assert_eq!(
            Basis::with_constant(vec![Gaussian::standard(1)], Domain::Unbounded { dim: 1 }).unwrap_err(),
            Error::Unbounded
        );
    }

    #[test]
    fn sort_sign() {
        assert_eq!(sort_with_sign(&[2, 1]), (-1.0, vec![1, 2]));
        assert_eq!(sort_with_sign(&[3, 1, 2]), (1.0, vec![1, 2, 3]));
        assert_eq!(sort_with_sign(&[1, 1]).0, 0.0);
    }

    #[test]
    fn interval_boundary_is_exact() {
        let b = Basis::new(
            vec![Gaussian::isotropic(&[0.3], 0.5).unwrap(), Gaussian::isotropic(&[-0.8], 0.7).unwrap()],
            Domain::interval(-1.0, 1.0),
        )
        .unwrap();
        let (bm, bv) = assemble_boundary(&b, None, 10, 3).unwrap();
        let phi = |i: usize, x: f64| b.value(i, &[x]);
        for i in 0..2 {
            for j in 0..2 {
                let e = phi(i, -1.0) * phi(j, -1.0) + phi(i, 1.0) * phi(j, 1.0);
                assert_relative_eq!(bm[(i, j)], e, max_relative = 1e-15);
            }
        }
        assert_eq!(bv.norm(), 0.0);
    }

    #[test]
    fn gamma_single_function_ratio() {
        let g = Gaussian::isotropic(&[0.2], 0.6).unwrap();
        let b = Basis::new(vec![g], Domain::interval(-1.0, 1.0)).unwrap();
        let s = s0_entry(&b, 0, 0).unwrap();
        let (bm, _) = assemble_boundary(&b, None, 1, 0).unwrap();
        assert_relative_eq!(estimate_gamma(&b, 0).unwrap(), s / bm[(0, 0)], max_relative = 1e-12);
        assert_eq!(default_gamma(32), 512.0);
    }

    #[test]
    fn forcing_equal_to_basis_function_gives_mass_column() {
        let b = pair_1d();
        let f = Forcing::PolyGaussian(vec![crate::forcing::PolyGaussianTerm {
            scale: 1.0,
            gaussian: b.gaussians()[1].clone(),
            poly: Polynomial::constant(1, 1.0),
        }]);
        let fv = project_forcing(&b, &f).unwrap();
        let m0 = assemble_m0(&b).unwrap().values;
        for i in 0..2 {
            assert_relative_eq!(fv[i], m0[(i, 1)], max_relative = 1e-14);
        }
    }
}
