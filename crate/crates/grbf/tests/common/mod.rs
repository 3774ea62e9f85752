#![allow(dead_code)]

use grbf::tensor::DenseTensor;
use grbf::Gaussian;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn rotation(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| normal(rng));
    a.qr().q()
}

/// SPD matrix with eigenvalues in `[lo, lo·cond]`.
pub fn spd(rng: &mut ChaCha8Rng, d: usize, lo: f64, cond: f64) -> DMatrix<f64> {
    let q = rotation(rng, d);
    let ev = DVector::from_fn(d, |_, _| lo * cond.powf(rng.random::<f64>()));
    let m = &q * DMatrix::from_diagonal(&ev) * q.transpose();
    (&m + m.transpose()) * 0.5
}

pub fn gaussian(rng: &mut ChaCha8Rng, d: usize, spread: f64, lo: f64, cond: f64) -> Gaussian {
    let m = DVector::from_fn(d, |_, _| spread * normal(rng));
    Gaussian::new(m, spd(rng, d, lo, cond)).unwrap()
}

pub fn vector(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| normal(rng))
}

pub fn matrix(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| normal(rng))
}

/// Largest entrywise difference over the larger max-norm.
pub fn max_rel(a: &DenseTensor, b: &DenseTensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let scale = a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE);
    a.data().iter().zip(b.data()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    // Split first so narrow features are not missed by the top-level estimate.
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            rec(f, lo, hi, fa, fm, fb, simpson(fa, fm, fb, lo, hi), tol / pieces as f64, 40)
        })
        .sum()
}

/// Trapezoid rule on the cube `[−l, l]^d` with `n` nodes per axis. For smooth,
/// fast-decaying integrands it converges geometrically.
pub fn trapezoid_cube(d: usize, l: f64, n: usize, f: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let h = 2.0 * l / (n - 1) as f64;
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..d {
            x[k] = -l + h * idx[k] as f64;
            if idx[k] == 0 || idx[k] == n - 1 {
                w *= 0.5;
            }
        }
        total += w * f(&x);
        let mut k = d;
        loop {
            if k == 0 {
                return total * h.powi(d as i32);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Mean and standard error of `samples` draws of `f(x)`, `x ~ g`.
pub fn monte_carlo(g: &Gaussian, samples: usize, seed: u64, f: &mut dyn FnMut(&DVector<f64>) -> f64) -> (f64, f64) {
    let mut r = rng(seed);
    let d = g.dim();
    let l = g.chol().clone();
    let (mut s, mut s2) = (0.0, 0.0);
    let mut z = DVector::zeros(d);
    for _ in 0..samples {
        for k in 0..d {
            z[k] = normal(&mut r);
        }
        let x = g.mean() + &l * &z;
        let v = f(&x);
        s += v;
        s2 += v * v;
    }
    let n = samples as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}
