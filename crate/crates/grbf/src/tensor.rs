//! Dense row-major tensors, only as much algebra as the moment formulas need.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    strides: Vec<usize>,
    data: Vec<f64>,
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

/// All permutations of `0..p`, in lexicographic order.
pub fn permutations(p: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(p), &mut vec![false; p], &mut out);
    out
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::Shape(format!("zero extent in {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        let strides = row_major_strides(&shape);
        Ok(Self { shape, strides, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self::new(shape, vec![0.0; len]).expect("zeros with a zero extent")
    }

    /// Order-0 tensor holding one value.
    pub fn scalar(v: f64) -> Self {
        Self { shape: Vec::new(), strides: Vec::new(), data: vec![v] }
    }

    pub fn from_vector(v: &[f64]) -> Self {
        Self::new(vec![v.len()], v.to_vec()).expect("empty vector")
    }

    pub fn from_matrix(m: &nalgebra::DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self::new(vec![m.nrows(), m.ncols()], data).expect("empty matrix")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    /// Value of an order-0 tensor (or the first entry of any tensor).
    pub fn value(&self) -> f64 {
        self.data[0]
    }

    fn unravel(&self, mut flat: usize, idx: &mut [usize]) {
        for k in 0..self.shape.len() {
            idx[k] = flat / self.strides[k];
            flat %= self.strides[k];
        }
    }

    /// `v ⊗ v ⊗ ... ⊗ v` with `k` factors.
    pub fn outer_power(v: &[f64], k: usize) -> Self {
        let mut t = Self::scalar(1.0);
        for _ in 0..k {
            t = t.outer(&Self::from_vector(v));
        }
        t
    }

    pub fn outer(&self, other: &Self) -> Self {
        let mut shape = self.shape.clone();
        shape.extend_from_slice(&other.shape);
        let mut data = Vec::with_capacity(self.data.len() * other.data.len());
        for &a in &self.data {
            for &b in &other.data {
                data.push(a * b);
            }
        }
        let strides = row_major_strides(&shape);
        Self { shape, strides, data }
    }

    /// Reorders modes: mode `p` of the result is mode `perm[p]` of `self`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<Self> {
        let p = self.order();
        let mut seen = vec![false; p];
        if perm.len() != p || perm.iter().any(|&k| k >= p || std::mem::replace(&mut seen[k], true)) {
            return Err(Error::Shape(format!("{perm:?} is not a permutation of {p} modes")));
        }
        let shape: Vec<usize> = perm.iter().map(|&k| self.shape[k]).collect();
        let src_strides: Vec<usize> = perm.iter().map(|&k| self.strides[k]).collect();
        let mut out = Self::zeros(shape);
        let mut idx = vec![0; p];
        for flat in 0..out.data.len() {
            out.unravel(flat, &mut idx);
            let src: usize = idx.iter().zip(&src_strides).map(|(i, s)| i * s).sum();
            out.data[flat] = self.data[src];
        }
        Ok(out)
    }

    /// Average of the tensor over all permutations of its modes.
    pub fn symmetrize(&self) -> Result<Self> {
        let p = self.order();
        if p <= 1 {
            return Ok(self.clone());
        }
        if self.shape.iter().any(|&e| e != self.shape[0]) {
            return Err(Error::Shape(format!("cannot symmetrize shape {:?}", self.shape)));
        }
        let perms = permutations(p);
        let mut out = Self::zeros(self.shape.clone());
        for perm in &perms {
            out.add_assign(&self.permute_modes(perm)?)?;
        }
        out.scale_mut(1.0 / perms.len() as f64);
        Ok(out)
    }

    /// Contracts the even-position modes of `a` against `b`:
    /// `out[i1,i3,..] = Σ a[i1,j2,i3,j4,..] · b[j2,j4,..]`.
    pub fn contract_even(a: &Self, b: &Self) -> Result<Self> {
        let order = a.order();
        if order % 2 != 0 {
            return Err(Error::Shape(format!("contract_even needs an even order, got {order}")));
        }
        let p = order / 2;
        let even: Vec<usize> = (0..p).map(|k| a.shape[2 * k + 1]).collect();
        if b.shape != even {
            return Err(Error::Shape(format!(
                "second operand has shape {:?}, expected {even:?}",
                b.shape
            )));
        }
        let odd: Vec<usize> = (0..p).map(|k| a.shape[2 * k]).collect();
        let mut out = if p == 0 { Self::scalar(0.0) } else { Self::zeros(odd) };
        let mut idx = vec![0; order];
        for flat in 0..a.data.len() {
            a.unravel(flat, &mut idx);
            let mut o = 0;
            let mut bo = 0;
            for k in 0..p {
                o += idx[2 * k] * out.strides[k];
                bo += idx[2 * k + 1] * b.strides[k];
            }
            out.data[o] += a.data[flat] * b.data[bo];
        }
        Ok(out)
    }

    /// Sums the diagonal over modes `i` and `j`, removing both.
    pub fn partial_trace(&self, i: usize, j: usize) -> Result<Self> {
        let p = self.order();
        if i == j || i >= p || j >= p {
            return Err(Error::Shape(format!("bad trace modes ({i}, {j}) for order {p}")));
        }
        if self.shape[i] != self.shape[j] {
            return Err(Error::Shape(format!(
                "trace modes have extents {} and {}",
                self.shape[i], self.shape[j]
            )));
        }
        let keep: Vec<usize> = (0..p).filter(|&k| k != i && k != j).collect();
        let shape: Vec<usize> = keep.iter().map(|&k| self.shape[k]).collect();
        let mut out = if shape.is_empty() { Self::scalar(0.0) } else { Self::zeros(shape) };
        let mut oidx = vec![0; keep.len()];
        let mut sidx = vec![0; p];
        for flat in 0..out.data.len() {
            out.unravel(flat, &mut oidx);
            for (slot, &k) in keep.iter().enumerate() {
                sidx[k] = oidx[slot];
            }
            let mut acc = 0.0;
            for t in 0..self.shape[i] {
                sidx[i] = t;
                sidx[j] = t;
                acc += self.get(&sidx);
            }
            out.data[flat] = acc;
        }
        Ok(out)
    }

    /// Full contraction of an order-4 tensor as `tr₁₂ tr₃₄`.
    pub fn double_trace(&self) -> Result<f64> {
        Ok(self.partial_trace(2, 3)?.partial_trace(0, 1)?.value())
    }

    /// Trace of an order-2 tensor.
    pub fn trace(&self) -> Result<f64> {
        Ok(self.partial_trace(0, 1)?.value())
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale_mut(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.scale_mut(s);
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest entrywise difference relative to the larger max-norm (absolute below 1).
    pub fn rel_diff(&self, other: &Self) -> f64 {
        let scale = self.max_abs().max(other.max_abs()).max(1.0);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
            / scale
    }
}
