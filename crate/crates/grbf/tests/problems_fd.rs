mod common;

use common::{adaptive_simpson, rng};
use grbf::problems::{exact_pair_basis, init_basis, problem, problem1, problem2, problem3, problem4, sample_data, ProblemSpec};
use grbf::whitney::project_forcing;
use rand::Rng;

const H: f64 = 1e-3;

/// Fourth-order five-point second derivative along axis `k`.
fn second_diff(u: &dyn Fn(&[f64]) -> f64, x: &[f64], k: usize) -> f64 {
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[k] += s * H;
        u(&y)
    };
    (-at(2.0) + 16.0 * at(1.0) - 30.0 * at(0.0) + 16.0 * at(-1.0) - at(-2.0)) / (12.0 * H * H)
}

fn random_point(r: &mut impl Rng, spec: &ProblemSpec) -> Vec<f64> {
    (0..spec.dim).map(|_| r.random_range(spec.sample_lo..spec.sample_hi)).collect()
}

fn max_poisson_residual(spec: &ProblemSpec, seed: u64) -> f64 {
    let mut r = rng(seed);
    let u = |x: &[f64]| (spec.exact)(x);
    (0..100)
        .map(|_| {
            let x = random_point(&mut r, spec);
            let lap: f64 = (0..spec.dim).map(|k| second_diff(&u, &x, k)).sum();
            (-lap - spec.forcing.eval(&x)).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn problem1_satisfies_poisson() {
    assert!(max_poisson_residual(&problem1(), 1) <= 1e-4);
}

#[test]
fn problem2_satisfies_poisson() {
    let p = problem2();
    assert!(max_poisson_residual(&p, 2) <= 1e-4);
    let g = p.boundary.as_ref().unwrap();
    assert!(g(&[1.0]).abs() < 1e-14 && g(&[-1.0]).abs() < 1e-14);
    let k2 = 9.0 * std::f64::consts::PI.powi(2);
    assert!((p.forcing.eval(&[1.0 / 6.0]) - k2).abs() < 1e-12 * k2);
}

#[test]
fn problem3_satisfies_poisson() {
    let p = problem3(false);
    assert!(max_poisson_residual(&p, 3) <= 1e-3);
    assert_eq!((p.exact)(&[0.0; 8]), 0.0);
    let mut e1 = [0.0; 8];
    e1[0] = 1.0;
    assert!(((p.exact)(&e1) - (-0.5f64).exp()).abs() < 1e-15);
}

#[test]
fn problem4_divergence_matches_forcing() {
    let p = problem4();
    let m = p.mixed.as_ref().unwrap();
    let mut r = rng(4);
    for _ in 0..100 {
        let x = random_point(&mut r, &p);
        let mut div = 0.0;
        for k in 0..3 {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[k] += H;
            b[k] -= H;
            div += ((m.exact_field)(&a)[k] - (m.exact_field)(&b)[k]) / (2.0 * H);
        }
        assert!((div - p.forcing.eval(&x)).abs() <= 1e-4);
        // The closed-form descriptor and the evaluator describe the same G.
        let g = m.g_descriptor.eval(&x);
        let e = (m.exact_field)(&x);
        for k in 0..3 {
            assert!((g[k] - e[k]).abs() < 1e-14);
        }
    }
    assert!(p.forcing.eval(&[0.5; 3]).abs() < 1e-14);
    assert_eq!((m.exact_field)(&[0.5; 3]), vec![1.0; 3]);
}

#[test]
fn problem2_projection_matches_quadrature() {
    let p = problem2();
    let basis = init_basis(&p, 16, 0).unwrap();
    let proj = project_forcing(&basis, &p.forcing).unwrap();
    for (i, g) in basis.gaussians().iter().enumerate() {
        let (m, s) = (g.mean()[0], g.cov()[(0, 0)].sqrt());
        let f = |x: f64| p.forcing.eval(&[x]) * basis.value(i, &[x]);
        let q = adaptive_simpson(&f, m - 14.0 * s, m + 14.0 * s, 1e-13);
        assert!((proj[i] - q).abs() <= 1e-10 * (1.0 + q.abs()), "{i}: {} vs {q}", proj[i]);
    }
}

#[test]
fn sample_data_is_deterministic_and_exact() {
    for id in 1..=4 {
        let p = problem(id, false).unwrap();
        let a = sample_data(&p, 64, 11).unwrap();
        let b = sample_data(&p, 64, 11).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.values, b.values);
        for (x, v) in a.points.iter().zip(&a.values) {
            assert_eq!(*v, (p.exact)(x));
            assert!(x.iter().all(|c| (p.sample_lo..=p.sample_hi).contains(c)));
        }
        assert_eq!(a.fields.is_some(), p.mixed.is_some());
        assert_ne!(sample_data(&p, 64, 12).unwrap().points, a.points);
    }
    assert!(sample_data(&problem1(), 0, 0).is_err());
}

#[test]
fn sample_mean_is_near_region_centre() {
    for id in 1..=4 {
        let p = problem(id, false).unwrap();
        let k = 4096;
        let data = sample_data(&p, k, 5).unwrap();
        let centre = 0.5 * (p.sample_lo + p.sample_hi);
        let sd = (p.sample_hi - p.sample_lo) / 12f64.sqrt() / (k as f64).sqrt();
        for axis in 0..p.dim {
            let mean = data.points.iter().map(|x| x[axis]).sum::<f64>() / k as f64;
            assert!((mean - centre).abs() <= 3.5 * sd, "problem {id} axis {axis}: {mean}");
        }
    }
}

#[test]
fn initial_bases_follow_their_rules() {
    let b = init_basis(&problem1(), 8, 0).unwrap();
    assert_eq!(b.len(), 8);
    for g in b.gaussians() {
        assert!((g.cov()[(0, 0)] - 1.5f64.powi(2)).abs() < 1e-14);
    }
    assert_eq!(b.gaussians()[0].mean()[0], -6.0);
    assert_eq!(b.gaussians()[7].mean()[0], 6.0);
    let b = init_basis(&problem2(), 32, 0).unwrap();
    assert!((b.gaussians()[0].cov()[(0, 0)] - 0.125f64.powi(2)).abs() < 1e-15);
    let b = init_basis(&problem1(), 1, 0).unwrap();
    assert_eq!(b.gaussians()[0].mean()[0], 0.0);
    // Random initialization is seeded.
    let p4 = problem4();
    let a = init_basis(&p4, 8, 3).unwrap();
    let c = init_basis(&p4, 8, 3).unwrap();
    for (x, y) in a.gaussians().iter().zip(c.gaussians()) {
        assert_eq!(x.mean(), y.mean());
    }
    assert_eq!(exact_pair_basis().unwrap().len(), 2);
}
