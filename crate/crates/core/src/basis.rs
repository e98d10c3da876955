//! Basis systems (Fourier, B-spline) and their Gram matrices.
//!
//! Fourier bases use the enumeration constant, sin₁, cos₁, sin₂, cos₂, …
//! in the shifted variable `s = t − lo`:
//!
//! * column 0: `1`
//! * column `2i − 1`: `sin(2π i s / period)`
//! * column `2i`: `cos(2π i s / period)`
//!
//! The functions are stored unnormalized; [`BasisSystem::orthonormal_scaling`]
//! gives the factors that make them orthonormal in L².
//!
//! B-splines of order `m` use a clamped knot vector (`lo` and `hi` repeated
//! `m` times around the interior knots), so the basis has
//! `interior + m` functions and is a partition of unity on the interval.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldo::LinearDifferentialOperator;
use crate::quadrature::{QuadratureRule, QuadratureSpec};

/// Gauss-Legendre points per knot span for B-spline Gram matrices.
const BSPLINE_POINTS_PER_SPAN: usize = 8;

/// Relative slack allowed when checking that a point lies in the interval.
const DOMAIN_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::Parameter(format!(
                "interval [{lo}, {hi}] must be finite with lo < hi"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }

    /// Clamps `t` into the interval if it lies within rounding distance,
    /// otherwise reports a domain error.
    pub fn check(&self, t: f64) -> Result<f64> {
        let slack = DOMAIN_SLACK * self.length();
        if t.is_finite() && t >= self.lo - slack && t <= self.hi + slack {
            Ok(t.clamp(self.lo, self.hi))
        } else {
            Err(Error::Domain {
                point: t,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    /// `n` equally spaced points including both end points.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![self.lo],
            _ => {
                let h = self.length() / (n - 1) as f64;
                (0..n)
                    .map(|i| {
                        if i == n - 1 {
                            self.hi
                        } else {
                            self.lo + i as f64 * h
                        }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BasisKind {
    Fourier {
        period: f64,
    },
    BSpline {
        order: usize,
        interior_knots: Vec<f64>,
    },
}

/// An ordered set of basis functions on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSystem {
    kind: BasisKind,
    interval: Interval,
    size: usize,
    /// Full clamped knot vector (B-spline only).
    knots: Vec<f64>,
}

impl BasisSystem {
    /// Fourier basis whose period is the interval length.
    pub fn fourier(interval: Interval, size: usize) -> Result<Self> {
        Self::fourier_with_period(interval, size, interval.length())
    }

    pub fn fourier_with_period(interval: Interval, size: usize, period: f64) -> Result<Self> {
        if size == 0 {
            return Err(Error::Parameter(
                "Fourier basis size must be positive".into(),
            ));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Parameter(format!(
                "Fourier period must be positive (got {period})"
            )));
        }
        Ok(BasisSystem {
            kind: BasisKind::Fourier { period },
            interval,
            size,
            knots: Vec::new(),
        })
    }

    /// B-spline basis of the given order over explicit interior knots.
    pub fn bspline(interval: Interval, order: usize, interior_knots: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::Parameter("B-spline order must be at least 1".into()));
        }
        for w in interior_knots.windows(2) {
            if w[1] < w[0] {
                return Err(Error::Parameter(
                    "interior knots must be nondecreasing".into(),
                ));
            }
        }
        if interior_knots
            .iter()
            .any(|&k| !(k > interval.lo && k < interval.hi))
        {
            return Err(Error::Parameter(
                "interior knots must lie strictly inside the interval".into(),
            ));
        }
        let mut knots = Vec::with_capacity(interior_knots.len() + 2 * order);
        knots.extend(std::iter::repeat_n(interval.lo, order));
        knots.extend(interior_knots.iter().copied());
        knots.extend(std::iter::repeat_n(interval.hi, order));
        let size = interior_knots.len() + order;
        Ok(BasisSystem {
            kind: BasisKind::BSpline {
                order,
                interior_knots,
            },
            interval,
            size,
            knots,
        })
    }

    /// B-spline basis with `num_basis` functions and equally spaced interior knots.
    pub fn bspline_uniform(interval: Interval, order: usize, num_basis: usize) -> Result<Self> {
        if num_basis < order {
            return Err(Error::Parameter(format!(
                "B-spline basis of order {order} needs at least {order} functions (got {num_basis})"
            )));
        }
        let n_interior = num_basis - order;
        let h = interval.length() / (n_interior + 1) as f64;
        let interior = (1..=n_interior)
            .map(|i| interval.lo + i as f64 * h)
            .collect();
        Self::bspline(interval, order, interior)
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Highest derivative order the basis can evaluate, if bounded.
    pub fn max_derivative(&self) -> Option<usize> {
        match &self.kind {
            BasisKind::Fourier { .. } => None,
            BasisKind::BSpline { order, .. } => Some(order - 1),
        }
    }

    pub(crate) fn check_derivative(&self, derivative: usize) -> Result<()> {
        match self.kind {
            BasisKind::BSpline { order, .. } if derivative >= order => {
                Err(Error::UnsupportedDerivative {
                    requested: derivative,
                    order,
                })
            }
            _ => Ok(()),
        }
    }

    /// Distinct knots, or the interval end points for Fourier bases.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            BasisKind::Fourier { .. } => vec![self.interval.lo, self.interval.hi],
            BasisKind::BSpline { .. } => {
                let mut b = self.knots.clone();
                b.dedup();
                b
            }
        }
    }

    /// Matrix of `derivative`-th derivatives, one row per point and one
    /// column per basis function.
    pub fn evaluate(&self, points: &[f64], derivative: usize) -> Result<DMatrix<f64>> {
        self.check_derivative(derivative)?;
        let mut out = DMatrix::zeros(points.len(), self.size);
        let mut row = vec![0.0; self.size];
        for (p, &t) in points.iter().enumerate() {
            let t = self.interval.check(t)?;
            self.evaluate_into(t, derivative, &mut row);
            for (j, v) in row.iter().enumerate() {
                out[(p, j)] = *v;
            }
        }
        Ok(out)
    }

    /// Writes all basis values at `t` into `out`. `t` must already be in range
    /// and the derivative order supported.
    fn evaluate_into(&self, t: f64, derivative: usize, out: &mut [f64]) {
        match &self.kind {
            BasisKind::Fourier { period } => {
                fourier_row(t - self.interval.lo, *period, derivative, out)
            }
            BasisKind::BSpline { order, .. } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let degree = order - 1;
                let span = find_span(&self.knots, self.size, degree, t);
                let ders = derivative_basis_functions(&self.knots, span, t, degree, derivative);
                for (r, v) in ders[derivative].iter().enumerate() {
                    out[span - degree + r] = *v;
                }
            }
        }
    }

    /// Gram matrix `∫ (L f_i)(L f_j)` with the default quadrature.
    pub fn gram_matrix(&self, op: &LinearDifferentialOperator) -> Result<DMatrix<f64>> {
        self.gram_matrix_with(op, &QuadratureSpec::default())
    }

    /// Gram matrix `∫ (L f_i)(L f_j)`. Fourier bases with constant-coefficient
    /// operators over whole periods use closed forms; B-splines integrate each
    /// knot span with Gauss-Legendre; everything else uses `quad`.
    pub fn gram_matrix_with(
        &self,
        op: &LinearDifferentialOperator,
        quad: &QuadratureSpec,
    ) -> Result<DMatrix<f64>> {
        self.check_derivative(op.order())?;
        if let Some(constants) = op.constant_coefficients() {
            if let Some(g) = self.fourier_closed_form_gram(&constants) {
                return Ok(g);
            }
        }
        let rule = self.gram_rule(quad)?;
        let values = op.apply_to_basis(self, rule.nodes())?;
        rule.weighted_gram(&values)
    }

    /// Quadrature rule used for Gram matrices that lack a closed form.
    pub fn gram_rule(&self, quad: &QuadratureSpec) -> Result<QuadratureRule> {
        match &self.kind {
            BasisKind::BSpline { order, .. } => QuadratureRule::piecewise_gauss_legendre(
                &self.breakpoints(),
                (*order).max(BSPLINE_POINTS_PER_SPAN),
            ),
            BasisKind::Fourier { .. } => quad.rule(self.interval),
        }
    }

    /// Closed-form Fourier Gram for an operator with constant coefficients
    /// (`full[j]` multiplies `D^j`, last entry is the leading 1).
    fn fourier_closed_form_gram(&self, full: &[f64]) -> Option<DMatrix<f64>> {
        let BasisKind::Fourier { period } = self.kind else {
            return None;
        };
        let len = self.interval.length();
        let cycles = len / period;
        if (cycles - cycles.round()).abs() > 1e-9 * cycles.max(1.0) || cycles.round() < 1.0 {
            return None;
        }
        let mut g = DMatrix::zeros(self.size, self.size);
        g[(0, 0)] = full[0] * full[0] * len;
        for j in 1..self.size {
            let freq = j.div_ceil(2) as f64;
            let omega = 2.0 * PI * freq / period;
            // L sin(ωs) = α sin(ωs) + β cos(ωs); L cos(ωs) = α cos(ωs) − β sin(ωs)
            let (mut alpha, mut beta) = (0.0, 0.0);
            let mut pow = 1.0;
            for (d, a) in full.iter().enumerate() {
                match d % 4 {
                    0 => alpha += a * pow,
                    1 => beta += a * pow,
                    2 => alpha -= a * pow,
                    _ => beta -= a * pow,
                }
                pow *= omega;
            }
            g[(j, j)] = (alpha * alpha + beta * beta) * len / 2.0;
        }
        Some(g)
    }

    /// Scaling `c` with `∫ (c_i f_i)(c_j f_j) = δ_ij`. Only defined when the
    /// L² Gram matrix is diagonal.
    pub fn orthonormal_scaling(&self) -> Result<DVector<f64>> {
        if matches!(self.kind, BasisKind::BSpline { .. }) && self.size > 1 {
            return Err(Error::UnsupportedBasis);
        }
        let g = self.gram_matrix(&LinearDifferentialOperator::identity())?;
        let max_diag = g.diagonal().max();
        for i in 0..self.size {
            for j in 0..self.size {
                if i != j && g[(i, j)].abs() > 1e-10 * max_diag {
                    return Err(Error::UnsupportedBasis);
                }
            }
        }
        Ok(g.diagonal().map(|d| 1.0 / d.sqrt()))
    }

    /// Serializable description of this basis.
    pub fn spec(&self) -> BasisSpec {
        let interval = [self.interval.lo, self.interval.hi];
        match &self.kind {
            BasisKind::Fourier { period } => BasisSpec::Fourier {
                interval,
                size: self.size,
                period: Some(*period),
            },
            BasisKind::BSpline {
                order,
                interior_knots,
            } => BasisSpec::Bspline {
                interval,
                order: *order,
                num_basis: Some(self.size),
                knots: Some(interior_knots.clone()),
            },
        }
    }
}

/// JSON form of a basis, e.g. `{"kind":"fourier","interval":[0,1],"size":25}`
/// or `{"kind":"bspline","interval":[0,24],"order":4,"num_basis":30}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BasisSpec {
    Fourier {
        interval: [f64; 2],
        size: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
    },
    Bspline {
        interval: [f64; 2],
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        num_basis: Option<usize>,
        /// Interior knots; overrides `num_basis` when present.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        knots: Option<Vec<f64>>,
    },
}

fn default_order() -> usize {
    4
}

impl BasisSpec {
    pub fn build(&self) -> Result<BasisSystem> {
        match self {
            BasisSpec::Fourier {
                interval,
                size,
                period,
            } => {
                let iv = Interval::new(interval[0], interval[1])?;
                BasisSystem::fourier_with_period(iv, *size, period.unwrap_or(iv.length()))
            }
            BasisSpec::Bspline {
                interval,
                order,
                num_basis,
                knots,
            } => {
                let iv = Interval::new(interval[0], interval[1])?;
                let basis = match (knots, num_basis) {
                    (Some(k), _) => BasisSystem::bspline(iv, *order, k.clone())?,
                    (None, Some(n)) => BasisSystem::bspline_uniform(iv, *order, *n)?,
                    (None, None) => {
                        return Err(Error::Parameter(
                            "bspline basis needs `num_basis` or `knots`".into(),
                        ))
                    }
                };
                if let (Some(_), Some(n)) = (knots, num_basis) {
                    if *n != basis.size() {
                        return Err(Error::Parameter(format!(
                            "bspline `num_basis` {n} disagrees with knots ({} functions)",
                            basis.size()
                        )));
                    }
                }
                Ok(basis)
            }
        }
    }
}

fn fourier_row(s: f64, period: f64, derivative: usize, out: &mut [f64]) {
    out[0] = if derivative == 0 { 1.0 } else { 0.0 };
    let mut j = 1;
    let mut freq = 1;
    while j < out.len() {
        let omega = 2.0 * PI * freq as f64 / period;
        let (sn, cs) = (omega * s).sin_cos();
        let scale = omega.powi(derivative as i32);
        // d^d/ds^d sin(ωs) = ω^d sin(ωs + dπ/2)
        let (dsin, dcos) = match derivative % 4 {
            0 => (sn, cs),
            1 => (cs, -sn),
            2 => (-sn, -cs),
            _ => (-cs, sn),
        };
        out[j] = scale * dsin;
        if j + 1 < out.len() {
            out[j + 1] = scale * dcos;
        }
        j += 2;
        freq += 1;
    }
}

/// Knot span index `i` with `knots[i] <= t < knots[i + 1]`, using the last
/// non-empty span at the right end point.
fn find_span(knots: &[f64], n_basis: usize, degree: usize, t: f64) -> usize {
    if t >= knots[n_basis] {
        return n_basis - 1;
    }
    if t <= knots[degree] {
        return degree;
    }
    let (mut low, mut high) = (degree, n_basis);
    let mut mid = (low + high) / 2;
    while t < knots[mid] || t >= knots[mid + 1] {
        if t < knots[mid] {
            high = mid;
        } else {
            low = mid;
        }
        mid = (low + high) / 2;
    }
    mid
}

/// Nonzero basis functions on `span` and their derivatives up to `n_der`
/// (Piegl & Tiller's triangular scheme). `ders[k][r]` is the `k`-th
/// derivative of function `span − degree + r`.
fn derivative_basis_functions(
    knots: &[f64],
    span: usize,
    t: f64,
    degree: usize,
    n_der: usize,
) -> Vec<Vec<f64>> {
    let p = degree;
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut ders = vec![vec![0.0; p + 1]; n_der + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=n_der.min(p) {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                let rk = rk as usize;
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize {
                k - 1
            } else {
                p - r
            };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for (k, row) in ders.iter_mut().enumerate().take(n_der.min(p) + 1).skip(1) {
        for v in row.iter_mut() {
            *v *= factor;
        }
        factor *= (p - k) as f64;
    }
    ders
}
