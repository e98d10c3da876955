//! Numerical inner products of real functions on an interval.
//!
//! Two fixed rules are provided: composite Simpson on an odd number of
//! equally spaced nodes, and Gauss-Legendre with nodes found by Newton
//! iteration on the Legendre polynomial. Gram and penalty matrices that lack
//! closed forms are assembled from these rules as `Aᵀ diag(w) B`, where the
//! columns of `A`, `B` hold function values at the nodes.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::Interval;
use crate::error::{Error, Result};

/// Default node count for composite Simpson.
pub const DEFAULT_SIMPSON_POINTS: usize = 501;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureKind {
    CompositeSimpson,
    GaussLegendre,
}

/// A rule kind and resolution, not yet bound to an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub kind: QuadratureKind,
    pub num_points: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            kind: QuadratureKind::CompositeSimpson,
            num_points: DEFAULT_SIMPSON_POINTS,
        }
    }
}

impl QuadratureSpec {
    pub fn simpson(num_points: usize) -> Self {
        QuadratureSpec {
            kind: QuadratureKind::CompositeSimpson,
            num_points,
        }
    }

    pub fn gauss_legendre(num_points: usize) -> Self {
        QuadratureSpec {
            kind: QuadratureKind::GaussLegendre,
            num_points,
        }
    }

    pub fn rule(&self, interval: Interval) -> Result<QuadratureRule> {
        QuadratureRule::new(self.kind, self.num_points, interval)
    }
}

/// Nodes and weights of a quadrature rule on a fixed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    kind: QuadratureKind,
    interval: Interval,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(kind: QuadratureKind, num_points: usize, interval: Interval) -> Result<Self> {
        let (nodes, weights) = match kind {
            QuadratureKind::CompositeSimpson => simpson_nodes(num_points, interval)?,
            QuadratureKind::GaussLegendre => gauss_legendre_nodes(num_points, interval)?,
        };
        Ok(QuadratureRule {
            kind,
            interval,
            nodes,
            weights,
        })
    }

    pub fn simpson(num_points: usize, interval: Interval) -> Result<Self> {
        Self::new(QuadratureKind::CompositeSimpson, num_points, interval)
    }

    pub fn gauss_legendre(num_points: usize, interval: Interval) -> Result<Self> {
        Self::new(QuadratureKind::GaussLegendre, num_points, interval)
    }

    /// Concatenates Gauss-Legendre rules on each consecutive pair of
    /// `breakpoints`. Used for piecewise-polynomial integrands.
    pub fn piecewise_gauss_legendre(breakpoints: &[f64], points_per_piece: usize) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::Parameter(
                "piecewise rule needs at least two breakpoints".into(),
            ));
        }
        let mut nodes = Vec::with_capacity((breakpoints.len() - 1) * points_per_piece);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for pair in breakpoints.windows(2) {
            if pair[1] <= pair[0] {
                continue;
            }
            let (n, w) = gauss_legendre_nodes(points_per_piece, Interval::new(pair[0], pair[1])?)?;
            nodes.extend(n);
            weights.extend(w);
        }
        let interval = Interval::new(breakpoints[0], breakpoints[breakpoints.len() - 1])?;
        Ok(QuadratureRule {
            kind: QuadratureKind::GaussLegendre,
            interval,
            nodes,
            weights,
        })
    }

    pub fn kind(&self) -> QuadratureKind {
        self.kind
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(t);
            if !v.is_finite() {
                return Err(Error::Evaluation { t });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// `Σ_p w_p a(p, i) b(p, j)` for node-value matrices `a` (nodes × m) and
    /// `b` (nodes × k).
    pub fn weighted_cross(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.nodes.len();
        if a.nrows() != n || b.nrows() != n {
            return Err(Error::Parameter(format!(
                "node-value matrices must have {n} rows (got {} and {})",
                a.nrows(),
                b.nrows()
            )));
        }
        for (p, &t) in self.nodes.iter().enumerate() {
            if a.row(p)
                .iter()
                .chain(b.row(p).iter())
                .any(|v| !v.is_finite())
            {
                return Err(Error::Evaluation { t });
            }
        }
        let mut weighted = a.clone();
        for (p, &w) in self.weights.iter().enumerate() {
            weighted.row_mut(p).scale_mut(w);
        }
        Ok(weighted.transpose() * b)
    }

    /// Self inner products of node values, symmetrized.
    pub fn weighted_gram(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let g = self.weighted_cross(a, a)?;
        Ok(symmetrize(&g))
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Matrix of `∫ f_i g_j` over the rule's interval.
pub fn inner_product_matrix(
    rule: &QuadratureRule,
    fs: &[&dyn Fn(f64) -> f64],
    gs: &[&dyn Fn(f64) -> f64],
) -> Result<DMatrix<f64>> {
    let a = node_values(rule, fs);
    let b = node_values(rule, gs);
    rule.weighted_cross(&a, &b)
}

/// Matrix of `∫ f_i f_j`, symmetrized by averaging with its transpose.
pub fn self_inner_product_matrix(
    rule: &QuadratureRule,
    fs: &[&dyn Fn(f64) -> f64],
) -> Result<DMatrix<f64>> {
    let a = node_values(rule, fs);
    rule.weighted_gram(&a)
}

fn node_values(rule: &QuadratureRule, fs: &[&dyn Fn(f64) -> f64]) -> DMatrix<f64> {
    DMatrix::from_fn(rule.nodes.len(), fs.len(), |p, i| fs[i](rule.nodes[p]))
}

fn simpson_nodes(num_points: usize, interval: Interval) -> Result<(Vec<f64>, Vec<f64>)> {
    if num_points < 3 || num_points.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "composite Simpson needs an odd number of points >= 3 (got {num_points})"
        )));
    }
    let h = interval.length() / (num_points - 1) as f64;
    let nodes = (0..num_points)
        .map(|i| {
            if i == num_points - 1 {
                interval.hi
            } else {
                interval.lo + i as f64 * h
            }
        })
        .collect();
    let weights = (0..num_points)
        .map(|i| {
            let c = if i == 0 || i == num_points - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    Ok((nodes, weights))
}

fn gauss_legendre_nodes(num_points: usize, interval: Interval) -> Result<(Vec<f64>, Vec<f64>)> {
    if num_points == 0 {
        return Err(Error::Parameter(
            "Gauss-Legendre needs at least one point".into(),
        ));
    }
    let n = num_points;
    let half = interval.length() / 2.0;
    let mid = (interval.lo + interval.hi) / 2.0;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Roots of P_n, largest first.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[n - 1 - i] = mid + half * x;
        weights[i] = w * half;
        weights[n - 1 - i] = w * half;
    }
    if n % 2 == 1 {
        nodes[n / 2] = mid;
    }
    Ok((nodes, weights))
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
