//! Discrete observations, functional datasets, and penalized least-squares
//! fitting of curves onto a basis.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::basis::BasisSystem;
use crate::error::{Error, Result};
use crate::ldo::LinearDifferentialOperator;
use crate::quadrature::QuadratureSpec;

/// Below this ratio of smallest to largest Cholesky pivot (squared) the
/// normal equations are treated as singular.
const PIVOT_RATIO_FLOOR: f64 = 1e-14;

/// Curves observed on a common, strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationGrid {
    points: Vec<f64>,
    /// One row per curve, one column per grid point.
    values: DMatrix<f64>,
    curve_ids: Vec<String>,
}

impl ObservationGrid {
    pub fn new(points: Vec<f64>, values: DMatrix<f64>, curve_ids: Vec<String>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Parameter(
                "observation grid needs at least two points".into(),
            ));
        }
        if points
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
            || points.iter().any(|p| !p.is_finite())
        {
            return Err(Error::Parameter(
                "grid points must be finite and strictly increasing".into(),
            ));
        }
        if values.ncols() != points.len() {
            return Err(Error::Parameter(format!(
                "values have {} columns but the grid has {} points",
                values.ncols(),
                points.len()
            )));
        }
        if curve_ids.len() != values.nrows() {
            return Err(Error::Parameter(format!(
                "{} curve ids for {} curves",
                curve_ids.len(),
                values.nrows()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("observations must be finite".into()));
        }
        Ok(ObservationGrid {
            points,
            values,
            curve_ids,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn curve_ids(&self) -> &[String] {
        &self.curve_ids
    }

    pub fn num_curves(&self) -> usize {
        self.values.nrows()
    }
}

/// `n` curves as an `n × K` coefficient matrix over a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDataSet {
    basis: BasisSystem,
    coefficients: DMatrix<f64>,
    curve_ids: Vec<String>,
}

impl FunctionalDataSet {
    pub fn new(
        basis: BasisSystem,
        coefficients: DMatrix<f64>,
        curve_ids: Vec<String>,
    ) -> Result<Self> {
        if coefficients.ncols() != basis.size() {
            return Err(Error::Parameter(format!(
                "coefficient matrix has {} columns but the basis has {} functions",
                coefficients.ncols(),
                basis.size()
            )));
        }
        if curve_ids.len() != coefficients.nrows() {
            return Err(Error::Parameter(format!(
                "{} curve ids for {} curves",
                curve_ids.len(),
                coefficients.nrows()
            )));
        }
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("coefficients must be finite".into()));
        }
        Ok(FunctionalDataSet {
            basis,
            coefficients,
            curve_ids,
        })
    }

    /// Dataset with curve ids `0, 1, …`.
    pub fn with_default_ids(basis: BasisSystem, coefficients: DMatrix<f64>) -> Result<Self> {
        let ids = (0..coefficients.nrows()).map(|i| i.to_string()).collect();
        Self::new(basis, coefficients, ids)
    }

    pub fn basis(&self) -> &BasisSystem {
        &self.basis
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn curve_ids(&self) -> &[String] {
        &self.curve_ids
    }

    pub fn num_curves(&self) -> usize {
        self.coefficients.nrows()
    }

    /// `x_i(t_p)` for every curve and point.
    pub fn evaluate(&self, points: &[f64]) -> Result<DMatrix<f64>> {
        let phi = self.basis.evaluate(points, 0)?;
        Ok(&self.coefficients * phi.transpose())
    }

    /// Subtracts the column-mean coefficient vector.
    pub fn center(&self) -> (FunctionalDataSet, DVector<f64>) {
        let n = self.num_curves();
        let k = self.basis.size();
        if n == 0 {
            return (self.clone(), DVector::zeros(k));
        }
        let mean = DVector::from_fn(k, |j, _| self.coefficients.column(j).mean());
        let mut centered = self.coefficients.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        (
            FunctionalDataSet {
                basis: self.basis.clone(),
                coefficients: centered,
                curve_ids: self.curve_ids.clone(),
            },
            mean,
        )
    }
}

/// Roughness penalty `lambda · ∫ (L x)²` added to a least-squares fit.
#[derive(Debug, Clone)]
pub struct SmoothingPenalty {
    pub operator: LinearDifferentialOperator,
    pub lambda: f64,
}

/// Fits every curve of `grid` onto `basis` by (penalized) least squares.
pub fn fit(
    grid: &ObservationGrid,
    basis: &BasisSystem,
    penalty: Option<&SmoothingPenalty>,
) -> Result<FunctionalDataSet> {
    fit_with(grid, basis, penalty, &QuadratureSpec::default())
}

/// Minimizes `Σ_p (y_p − x(t_p))² + λ ∫ (L x)²` per curve. All curves share
/// one factorization of `ΦᵀΦ + λR`.
pub fn fit_with(
    grid: &ObservationGrid,
    basis: &BasisSystem,
    penalty: Option<&SmoothingPenalty>,
    quad: &QuadratureSpec,
) -> Result<FunctionalDataSet> {
    let k = basis.size();
    let lambda = penalty.map_or(0.0, |p| p.lambda);
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!(
            "lambda must be finite and >= 0 (got {lambda})"
        )));
    }
    if lambda == 0.0 && grid.points().len() < k {
        return Err(Error::Fit(format!(
            "rank-deficient design: {} observation points for {k} basis functions and no penalty",
            grid.points().len()
        )));
    }
    let phi = basis.evaluate(grid.points(), 0)?;
    let mut normal = phi.transpose() * &phi;
    if let Some(p) = penalty.filter(|p| p.lambda > 0.0) {
        let r = basis.gram_matrix_with(&p.operator, quad)?;
        normal += r * p.lambda;
    }
    let normal = (&normal + normal.transpose()) * 0.5;

    let chol = Cholesky::new(normal).ok_or_else(|| {
        Error::Fit("normal equations are not positive definite (singular design)".into())
    })?;
    let diag = chol.l_dirty().diagonal();
    let (dmin, dmax) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(v.abs()), hi.max(v.abs()))
    });
    if (dmin / dmax).powi(2) < PIVOT_RATIO_FLOOR {
        return Err(Error::Fit(format!(
            "normal equations are numerically singular (pivot ratio {:.3e}); \
             some basis functions are not determined by the data",
            (dmin / dmax).powi(2)
        )));
    }
    let rhs = phi.transpose() * grid.values().transpose();
    let coefs = chol.solve(&rhs).transpose();
    FunctionalDataSet::new(basis.clone(), coefs, grid.curve_ids().to_vec())
}

/// `Σ_p (y_p − x(t_p))² + λ ∫ (L x)²` for one curve's coefficients.
pub fn penalized_objective(
    points: &[f64],
    values: &[f64],
    basis: &BasisSystem,
    coefs: &DVector<f64>,
    penalty: Option<&SmoothingPenalty>,
) -> Result<f64> {
    let phi = basis.evaluate(points, 0)?;
    let fitted = &phi * coefs;
    let sse: f64 = fitted
        .iter()
        .zip(values)
        .map(|(f, y)| (y - f).powi(2))
        .sum();
    let pen = match penalty {
        Some(p) if p.lambda > 0.0 => {
            let r = basis.gram_matrix(&p.operator)?;
            p.lambda * (coefs.transpose() * r * coefs)[(0, 0)]
        }
        _ => 0.0,
    };
    Ok(sse + pen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Interval;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    fn grid_from(data: &FunctionalDataSet, points: Vec<f64>) -> ObservationGrid {
        let values = data.evaluate(&points).unwrap();
        ObservationGrid::new(points, values, data.curve_ids().to_vec()).unwrap()
    }

    fn random_dataset(basis: BasisSystem, n: usize, seed: u64) -> FunctionalDataSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = basis.size();
        let c = DMatrix::from_fn(n, k, |_, _| rng.random_range(-2.0..2.0));
        FunctionalDataSet::with_default_ids(basis, c).unwrap()
    }

    #[test]
    fn exact_expansion_round_trip() {
        let basis = BasisSystem::fourier(unit(), 11).unwrap();
        let data = random_dataset(basis.clone(), 6, 1);
        let points: Vec<f64> = unit().grid(40);
        let fitted = fit(&grid_from(&data, points), &basis, None).unwrap();
        assert!((fitted.coefficients() - data.coefficients()).abs().max() < 1e-8);
    }

    #[test]
    fn constant_curve_projects_onto_constant() {
        let basis = BasisSystem::fourier(unit(), 7).unwrap();
        // half-open grid so the periodic end point is not double counted
        let points: Vec<f64> = (0..48).map(|i| i as f64 / 48.0).collect();
        let values = DMatrix::from_element(1, points.len(), 5.0);
        let grid = ObservationGrid::new(points, values, vec!["a".into()]).unwrap();
        let fitted = fit(&grid, &basis, None).unwrap();
        assert!((fitted.coefficients()[(0, 0)] - 5.0).abs() < 1e-10);
        for j in 1..7 {
            assert!(fitted.coefficients()[(0, j)].abs() < 1e-10);
        }
    }

    #[test]
    fn huge_lambda_shrinks_toward_null_space() {
        let iv = Interval::new(0.0, 24.0).unwrap();
        let basis = BasisSystem::bspline_uniform(iv, 4, 20).unwrap();
        let points = iv.grid(48);
        let values = DMatrix::from_fn(3, points.len(), |i, p| {
            (points[p] / 3.0 + i as f64).sin() * 10.0 + points[p]
        });
        let ids = (0..3).map(|i| i.to_string()).collect();
        let grid = ObservationGrid::new(points, values, ids).unwrap();
        let d2 = LinearDifferentialOperator::second_derivative();
        let r = basis.gram_matrix(&d2).unwrap();
        let raw = fit(&grid, &basis, None).unwrap();
        let pen = SmoothingPenalty {
            operator: d2,
            lambda: 1e12,
        };
        let smooth = fit(&grid, &basis, Some(&pen)).unwrap();
        for i in 0..3 {
            let c0 = raw.coefficients().row(i).transpose();
            let c1 = smooth.coefficients().row(i).transpose();
            let f0 = (c0.transpose() * &r * &c0)[(0, 0)];
            let f1 = (c1.transpose() * &r * &c1)[(0, 0)];
            assert!(f1 < 1e-6 * f0, "curve {i}: {f1} vs {f0}");
        }
    }

    #[test]
    fn penalized_fit_not_worse_than_alternatives() {
        let iv = Interval::new(0.0, 24.0).unwrap();
        let basis = BasisSystem::bspline_uniform(iv, 4, 15).unwrap();
        let points = iv.grid(48);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let values = DMatrix::from_fn(4, points.len(), |_, p| {
            (points[p] / 4.0).cos() + rng.random_range(-0.3..0.3)
        });
        let ids = (0..4).map(|i| i.to_string()).collect();
        let grid = ObservationGrid::new(points.clone(), values.clone(), ids).unwrap();
        let pen = SmoothingPenalty {
            operator: LinearDifferentialOperator::second_derivative(),
            lambda: 2.5,
        };
        let smooth = fit(&grid, &basis, Some(&pen)).unwrap();
        let raw = fit(&grid, &basis, None).unwrap();
        for i in 0..4 {
            let y: Vec<f64> = values.row(i).iter().copied().collect();
            let obj =
                |c: &DVector<f64>| penalized_objective(&points, &y, &basis, c, Some(&pen)).unwrap();
            let at_fit = obj(&smooth.coefficients().row(i).transpose());
            let at_raw = obj(&raw.coefficients().row(i).transpose());
            let at_zero = obj(&DVector::zeros(basis.size()));
            assert!(at_fit <= at_raw + 1e-9 * at_raw.abs());
            assert!(at_fit <= at_zero);
        }
    }

    #[test]
    fn too_few_points_is_rank_deficient() {
        let basis = BasisSystem::fourier(unit(), 9).unwrap();
        let grid =
            ObservationGrid::new(unit().grid(5), DMatrix::zeros(1, 5), vec!["x".into()]).unwrap();
        let err = fit(&grid, &basis, None).unwrap_err();
        assert!(
            matches!(err, Error::Fit(ref m) if m.contains("rank-deficient")),
            "{err}"
        );
    }

    #[test]
    fn uncovered_bspline_is_singular() {
        // all observations in the first half leave right-hand splines undetermined
        let iv = Interval::new(0.0, 1.0).unwrap();
        let basis = BasisSystem::bspline_uniform(iv, 4, 10).unwrap();
        let points: Vec<f64> = (0..30).map(|i| i as f64 / 70.0).collect();
        let grid = ObservationGrid::new(points, DMatrix::zeros(1, 30), vec!["x".into()]).unwrap();
        assert!(matches!(fit(&grid, &basis, None), Err(Error::Fit(_))));
    }

    #[test]
    fn evaluate_curves_cases() {
        let basis = BasisSystem::fourier(unit(), 5).unwrap();
        let mut c = DMatrix::zeros(1, 5);
        c[(0, 0)] = 1.0;
        let ones = FunctionalDataSet::with_default_ids(basis.clone(), c).unwrap();
        let pts = unit().grid(9);
        assert!(ones.evaluate(&pts).unwrap().iter().all(|v| *v == 1.0));

        let a = random_dataset(basis.clone(), 3, 7);
        let b = random_dataset(basis.clone(), 3, 8);
        let sum = FunctionalDataSet::with_default_ids(basis, a.coefficients() + b.coefficients())
            .unwrap();
        let lhs = sum.evaluate(&pts).unwrap();
        let rhs = a.evaluate(&pts).unwrap() + b.evaluate(&pts).unwrap();
        assert!((lhs - rhs).abs().max() < 1e-12);
        assert!(matches!(a.evaluate(&[2.0]), Err(Error::Domain { .. })));
    }

    #[test]
    fn center_cases() {
        let basis = BasisSystem::fourier(unit(), 5).unwrap();
        let data = random_dataset(basis.clone(), 9, 3);
        let (centered, mean) = data.center();
        for j in 0..5 {
            assert!(centered.coefficients().column(j).mean().abs() < 1e-12);
        }
        let (again, zero) = centered.center();
        assert!(zero.abs().max() < 1e-12);
        assert!((again.coefficients() - centered.coefficients()).abs().max() < 1e-12);

        let single = random_dataset(basis, 1, 4);
        let (c1, m1) = single.center();
        assert!(c1.coefficients().iter().all(|v| *v == 0.0));
        assert_eq!(m1.transpose(), single.coefficients().row(0).into_owned());
        assert_eq!(mean.len(), 5);
    }

    #[test]
    fn grid_validation() {
        assert!(ObservationGrid::new(vec![0.0], DMatrix::zeros(1, 1), vec!["a".into()]).is_err());
        assert!(
            ObservationGrid::new(vec![0.0, 0.0], DMatrix::zeros(1, 2), vec!["a".into()]).is_err()
        );
        let mut v = DMatrix::zeros(1, 2);
        v[(0, 1)] = f64::INFINITY;
        assert!(ObservationGrid::new(vec![0.0, 1.0], v, vec!["a".into()]).is_err());
    }
}
