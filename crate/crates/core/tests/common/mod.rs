#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use mafr::nalgebra::{DMatrix, SymmetricEigen};
use mafr::{
    BasisSystem, FpcaOptions, FunctionalDataSet, ObservationGrid, PcaDecomposition, Retention,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Half-hourly times `0.25, 0.75, …, 23.75`.
pub fn half_hours() -> Vec<f64> {
    (0..48).map(|p| 0.25 + 0.5 * p as f64).collect()
}

/// Synthetic daily load curves: a two-peak base profile plus random smooth
/// modes and a little measurement noise.
pub fn demand_curves(days: usize, seed: u64) -> ObservationGrid {
    let t = half_hours();
    let mut r = rng(seed);
    let bump = |x: f64, c: f64, w: f64| (-(x - c).powi(2) / (2.0 * w * w)).exp();
    let modes: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(move |x| bump(x, 18.5, 1.5)),
        Box::new(move |x| bump(x, 8.0, 1.2)),
        Box::new(|x| (x - 12.0) / 12.0),
        Box::new(|x| (2.0 * PI * x / 24.0).sin()),
        Box::new(move |x| bump(x, 13.0, 2.5)),
        Box::new(|x| (4.0 * PI * x / 24.0).cos()),
    ];
    let scales = [1.0, 0.6, 0.4, 0.25, 0.15, 0.1];
    let mut values = DMatrix::zeros(days, t.len());
    for d in 0..days {
        let amps: Vec<f64> = scales.iter().map(|s| s * normal(&mut r)).collect();
        for (p, &x) in t.iter().enumerate() {
            let base = 3.0 + 0.8 * bump(x, 8.0, 1.5) + 1.2 * bump(x, 18.5, 2.0);
            let v: f64 = modes.iter().zip(&amps).map(|(m, a)| a * m(x)).sum();
            values[(d, p)] = base + v + 0.01 * normal(&mut r);
        }
    }
    let ids = (0..days).map(|d| format!("day{d:03}")).collect();
    ObservationGrid::new(t, values, ids).expect("valid grid")
}

/// Wide layout: `date,t1,…` header, one row per curve.
pub fn write_wide_csv(path: &Path, grid: &ObservationGrid) {
    let mut s = String::from("date");
    for t in grid.points() {
        s.push_str(&format!(",{t}"));
    }
    s.push('\n');
    for (i, id) in grid.curve_ids().iter().enumerate() {
        s.push_str(id);
        for v in grid.values().row(i).iter() {
            s.push_str(&format!(",{v:.17e}"));
        }
        s.push('\n');
    }
    std::fs::write(path, s).expect("write csv");
}

/// Random dataset with decaying column scales so component variances are
/// well separated.
pub fn random_dataset(r: &mut ChaCha8Rng, basis: &BasisSystem, n: usize) -> FunctionalDataSet {
    let k = basis.size();
    let scale: Vec<f64> = (0..k)
        .map(|j| (0.5 + r.random::<f64>()) * 0.8f64.powi(j as i32))
        .collect();
    let c = DMatrix::from_fn(n, k, |_, j| scale[j] * normal(r));
    FunctionalDataSet::with_default_ids(basis.clone(), c).expect("dataset")
}

pub fn random_pca(
    r: &mut ChaCha8Rng,
    basis: &BasisSystem,
    n: usize,
    kr: usize,
) -> PcaDecomposition {
    let data = random_dataset(r, basis, n);
    mafr::fpca(&data, &FpcaOptions::retain(Retention::Count(kr))).expect("fpca")
}

/// Gauss-Legendre nodes and weights on [-1, 1] from the Jacobi matrix.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let j = DMatrix::from_fn(m, m, |a, b| {
        if a.abs_diff(b) == 1 {
            let k = a.max(b) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Composite Gauss-Legendre rule on `[lo, hi]` split at `breaks`.
pub fn composite_rule(breaks: &[f64], m: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(m);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let half = 0.5 * (b - a);
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(a + half * (xi + 1.0));
            weights.push(half * wi);
        }
    }
    (nodes, weights)
}

/// Sines of the principal angles between the row spans of `a` and `b`
/// under the inner product `w`, for equal-dimensional spans.
pub fn principal_angle_sines(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &DMatrix<f64>) -> Vec<f64> {
    let orth = |m: &DMatrix<f64>| {
        let g = m * w * m.transpose();
        let l = g.cholesky().expect("independent rows").l();
        l.try_inverse().expect("invertible") * m
    };
    let qa = orth(a);
    let qb = orth(b);
    let proj = (&qb * w * qa.transpose()) * &qa;
    let resid = &qb - proj;
    let s = &resid * w * resid.transpose();
    let e = SymmetricEigen::new((&s + s.transpose()) * 0.5);
    e.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect()
}

/// Fourier function `j` (stored scaling) and its derivatives on `[0, 1]`,
/// evaluated directly.
pub fn fourier_derivative(j: usize, d: usize, t: f64) -> f64 {
    if j == 0 {
        return if d == 0 { 1.0 } else { 0.0 };
    }
    let w = 2.0 * PI * j.div_ceil(2) as f64;
    let phase = if j % 2 == 1 { 0.0 } else { PI / 2.0 };
    w.powi(d as i32) * (w * t + phase + d as f64 * PI / 2.0).sin()
}
