//! Monic linear differential operators `L = D^k + Σ_{j<k} a_j(t) D^j`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::BasisSystem;
use crate::error::{Error, Result};

/// Coefficient `a_j` of a lower-order derivative term.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Coefficient {
    pub fn function<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Coefficient::Function(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Function(f) => f(t),
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "{c}"),
            Coefficient::Function(_) => f.write_str("<fn>"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LinearDifferentialOperator {
    /// `a_0 … a_{k−1}`; the leading coefficient of `D^k` is 1.
    coefficients: Vec<Coefficient>,
}

impl LinearDifferentialOperator {
    pub fn with_coefficients(coefficients: Vec<Coefficient>) -> Self {
        LinearDifferentialOperator { coefficients }
    }

    pub fn constant(coefficients: Vec<f64>) -> Self {
        Self::with_coefficients(
            coefficients
                .into_iter()
                .map(Coefficient::Constant)
                .collect(),
        )
    }

    /// `L x = x`.
    pub fn identity() -> Self {
        Self::with_coefficients(Vec::new())
    }

    /// `D^k`.
    pub fn derivative(k: usize) -> Self {
        Self::constant(vec![0.0; k])
    }

    pub fn first_derivative() -> Self {
        Self::derivative(1)
    }

    pub fn second_derivative() -> Self {
        Self::derivative(2)
    }

    /// `D³ + ω² D` with `ω = 2π / period`; annihilates constants and
    /// sinusoids of the given period.
    pub fn harmonic_acceleration(period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Parameter(format!(
                "harmonic acceleration period must be positive (got {period})"
            )));
        }
        let omega = 2.0 * PI / period;
        Ok(Self::constant(vec![0.0, omega * omega, 0.0]))
    }

    /// Leading derivative order `k`.
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[Coefficient] {
        &self.coefficients
    }

    /// `[a_0, …, a_{k−1}, 1]` when every coefficient is constant.
    pub fn constant_coefficients(&self) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(self.order() + 1);
        for c in &self.coefficients {
            match c {
                Coefficient::Constant(v) => out.push(*v),
                Coefficient::Function(_) => return None,
            }
        }
        out.push(1.0);
        Some(out)
    }

    /// `(L f_j)(t)` for every basis function: rows are points, columns are
    /// basis functions.
    pub fn apply_to_basis(&self, basis: &BasisSystem, points: &[f64]) -> Result<DMatrix<f64>> {
        let k = self.order();
        let mut out = basis.evaluate(points, k)?;
        for (j, coef) in self.coefficients.iter().enumerate() {
            if let Coefficient::Constant(c) = coef {
                if *c == 0.0 {
                    continue;
                }
            }
            let dj = basis.evaluate(points, j)?;
            for (p, &t) in points.iter().enumerate() {
                let a = coef.at(t);
                for col in 0..basis.size() {
                    out[(p, col)] += a * dj[(p, col)];
                }
            }
        }
        Ok(out)
    }

    /// `(L x)(t)` at each point for `x = Σ coefs_j f_j`.
    pub fn apply(&self, basis: &BasisSystem, coefs: &[f64], points: &[f64]) -> Result<Vec<f64>> {
        if coefs.len() != basis.size() {
            return Err(Error::Parameter(format!(
                "expected {} coefficients, got {}",
                basis.size(),
                coefs.len()
            )));
        }
        let m = self.apply_to_basis(basis, points)?;
        Ok((0..points.len())
            .map(|p| m.row(p).iter().zip(coefs).map(|(a, b)| a * b).sum())
            .collect())
    }
}

/// Parses `d1`, `d2`, `harmonic:<period>`, or `custom:<json list>` where the
/// list holds constant coefficients `a_0 … a_{k−1}`.
impl FromStr for LinearDifferentialOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "d0" | "identity" => return Ok(Self::identity()),
            "d1" => return Ok(Self::first_derivative()),
            "d2" => return Ok(Self::second_derivative()),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("harmonic:") {
            let period: f64 = rest
                .trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("bad harmonic period `{rest}`")))?;
            return Self::harmonic_acceleration(period);
        }
        if let Some(rest) = s.strip_prefix("custom:") {
            let coefs: Vec<f64> = serde_json::from_str(rest)
                .map_err(|e| Error::Parameter(format!("bad custom operator `{rest}`: {e}")))?;
            if coefs.iter().any(|c| !c.is_finite()) {
                return Err(Error::Parameter(
                    "custom operator coefficients must be finite".into(),
                ));
            }
            return Ok(Self::constant(coefs));
        }
        Err(Error::Parameter(format!(
            "unknown penalty `{s}` (expected d1, d2, harmonic:<period> or custom:<json>)"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Interval;
    use crate::quadrature::QuadratureRule;

    fn fourier(size: usize) -> BasisSystem {
        BasisSystem::fourier(Interval::new(0.0, 1.0).unwrap(), size).unwrap()
    }

    fn unit_vec(k: usize, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; k];
        v[j] = 1.0;
        v
    }

    #[test]
    fn first_derivative_kills_constants() {
        let b = fourier(5);
        let pts = Interval::new(0.0, 1.0).unwrap().grid(11);
        let out = LinearDifferentialOperator::first_derivative()
            .apply(&b, &unit_vec(5, 0), &pts)
            .unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn second_derivative_of_sine() {
        let b = fourier(3);
        let pts = Interval::new(0.0, 1.0).unwrap().grid(17);
        let out = LinearDifferentialOperator::second_derivative()
            .apply(&b, &unit_vec(3, 1), &pts)
            .unwrap();
        for (t, v) in pts.iter().zip(out) {
            let want = -(2.0 * PI).powi(2) * (2.0 * PI * t).sin();
            assert!((v - want).abs() < 1e-10);
        }
    }

    #[test]
    fn harmonic_null_space() {
        // symbolic: D³ sin(ωt) = −ω³ cos(ωt), ω² D sin(ωt) = ω³ cos(ωt); sum is 0
        let b = fourier(5);
        let op = LinearDifferentialOperator::harmonic_acceleration(1.0).unwrap();
        let pts = Interval::new(0.0, 1.0).unwrap().grid(101);
        for j in 0..3 {
            let out = op.apply(&b, &unit_vec(5, j), &pts).unwrap();
            assert!(out.iter().all(|v| v.abs() < 1e-8), "column {j}");
        }
        // sin(4πt) is outside the null space
        let rule = QuadratureRule::simpson(501, Interval::new(0.0, 1.0).unwrap()).unwrap();
        let norm = rule
            .integrate(|t| op.apply(&b, &unit_vec(5, 3), &[t]).unwrap()[0].powi(2))
            .unwrap();
        assert!(norm > 1.0);
    }

    #[test]
    fn harmonic_rejects_bad_period() {
        assert!(LinearDifferentialOperator::harmonic_acceleration(0.0).is_err());
        assert!(LinearDifferentialOperator::harmonic_acceleration(-2.0).is_err());
    }

    #[test]
    fn harmonic_penalty_null_space_relative() {
        let iv = Interval::new(0.0, 3.0).unwrap();
        let b = BasisSystem::fourier(iv, 5).unwrap();
        let op = LinearDifferentialOperator::harmonic_acceleration(3.0).unwrap();
        let g = b.gram_matrix(&op).unwrap();
        let rough = g[(3, 3)];
        for j in 0..3 {
            assert!(g[(j, j)] < 1e-8 * rough);
        }
        // and through quadrature with a function-valued zero coefficient
        let omega = 2.0 * PI / 3.0;
        let op_fn = LinearDifferentialOperator::with_coefficients(vec![
            Coefficient::Constant(0.0),
            Coefficient::function(move |_| omega * omega),
            Coefficient::Constant(0.0),
        ]);
        let gq = b.gram_matrix(&op_fn).unwrap();
        for j in 0..3 {
            assert!(gq[(j, j)] < 1e-8 * gq[(3, 3)]);
        }
    }

    #[test]
    fn unsupported_derivative_propagates() {
        let b = BasisSystem::bspline_uniform(Interval::new(0.0, 1.0).unwrap(), 3, 6).unwrap();
        let op = LinearDifferentialOperator::harmonic_acceleration(1.0).unwrap();
        assert!(matches!(
            op.apply(&b, &[0.0; 6], &[0.5]),
            Err(Error::UnsupportedDerivative { .. })
        ));
    }

    #[test]
    fn parses_penalty_names() {
        assert_eq!(
            "d1".parse::<LinearDifferentialOperator>().unwrap().order(),
            1
        );
        assert_eq!(
            "d2".parse::<LinearDifferentialOperator>().unwrap().order(),
            2
        );
        let h: LinearDifferentialOperator = "harmonic:1".parse().unwrap();
        let c = h.constant_coefficients().unwrap();
        assert!((c[1] - 4.0 * PI * PI).abs() < 1e-12);
        let lit: LinearDifferentialOperator = "custom:[0, -0.159, 0]".parse().unwrap();
        assert_eq!(
            lit.constant_coefficients().unwrap(),
            vec![0.0, -0.159, 0.0, 1.0]
        );
        assert!("harmonic:x".parse::<LinearDifferentialOperator>().is_err());
        assert!("d7x".parse::<LinearDifferentialOperator>().is_err());
    }

    proptest::proptest! {
        #[test]
        fn apply_is_linear(
            c1 in proptest::collection::vec(-3.0f64..3.0, 7),
            c2 in proptest::collection::vec(-3.0f64..3.0, 7),
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
        ) {
            let basis = fourier(7);
            let op = LinearDifferentialOperator::harmonic_acceleration(1.0).unwrap();
            let pts = Interval::new(0.0, 1.0).unwrap().grid(13);
            let mix: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| a * x + b * y).collect();
            let lhs = op.apply(&basis, &mix, &pts).unwrap();
            let r1 = op.apply(&basis, &c1, &pts).unwrap();
            let r2 = op.apply(&basis, &c2, &pts).unwrap();
            let scale = r1.iter().chain(&r2).fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..pts.len() {
                proptest::prop_assert!((lhs[i] - (a * r1[i] + b * r2[i])).abs() < 1e-12 * scale);
            }
        }
    }
}
