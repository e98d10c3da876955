//! Functional principal components of a basis-expanded dataset.
//!
//! With coefficient covariance `C` and L² Gram matrix `W` of the basis, the
//! components solve the symmetric eigenproblem of `W^{1/2} C W^{1/2}`; the
//! component coefficient vectors are `W^{−1/2} v_j`, so they are orthonormal
//! in L² and the eigenvalues are the score variances.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::BasisSystem;
use crate::error::{Error, Result};
use crate::ldo::LinearDifferentialOperator;
use crate::linalg::{apply_sign_convention, sym_eigen, sym_sqrt_inv_sqrt, EigenOrder};
use crate::quadrature::QuadratureSpec;
use crate::smoothing::FunctionalDataSet;

/// Relative eigenvalue floor for `W^{1/2}`.
const GRAM_FLOOR: f64 = 1e-12;

/// Default retained variance fraction.
pub const DEFAULT_RETAIN_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Retention {
    Count(usize),
    Fraction(f64),
}

impl Default for Retention {
    fn default() -> Self {
        Retention::Fraction(DEFAULT_RETAIN_FRACTION)
    }
}

impl std::str::FromStr for Retention {
    type Err = Error;

    /// `0.99` is a fraction, `5` is a count.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(k) = s.parse::<usize>() {
            return Ok(Retention::Count(k));
        }
        s.parse::<f64>()
            .map(Retention::Fraction)
            .map_err(|_| Error::Parameter(format!("bad retention `{s}` (count or fraction)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpcaOptions {
    pub retain: Retention,
    pub center: bool,
    pub quadrature: QuadratureSpec,
}

impl Default for FpcaOptions {
    fn default() -> Self {
        FpcaOptions {
            retain: Retention::default(),
            center: true,
            quadrature: QuadratureSpec::default(),
        }
    }
}

impl FpcaOptions {
    pub fn retain(retain: Retention) -> Self {
        FpcaOptions {
            retain,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaDecomposition {
    basis: BasisSystem,
    /// L² Gram matrix of the basis.
    gram: DMatrix<f64>,
    /// `K_r × K` basis coefficients of the retained components.
    components: DMatrix<f64>,
    /// `n × K_r`.
    scores: DMatrix<f64>,
    variances: DVector<f64>,
    /// All `K` eigenvalues, descending.
    eigenvalues: DVector<f64>,
    variance_fraction_retained: f64,
    mean: DVector<f64>,
    curve_ids: Vec<String>,
}

impl PcaDecomposition {
    /// Assembles a decomposition from parts. Used to rebuild saved results
    /// and to construct synthetic decompositions.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        basis: BasisSystem,
        gram: DMatrix<f64>,
        components: DMatrix<f64>,
        scores: DMatrix<f64>,
        variances: DVector<f64>,
        all_eigenvalues: DVector<f64>,
        mean: DVector<f64>,
        curve_ids: Vec<String>,
    ) -> Result<Self> {
        let k = basis.size();
        let kr = components.nrows();
        if components.ncols() != k || gram.shape() != (k, k) || mean.len() != k {
            return Err(Error::Parameter(
                "component/gram/mean sizes disagree with basis".into(),
            ));
        }
        if scores.ncols() != kr || variances.len() != kr || curve_ids.len() != scores.nrows() {
            return Err(Error::Parameter(
                "score/variance sizes disagree with components".into(),
            ));
        }
        if all_eigenvalues.len() < kr {
            return Err(Error::Parameter(
                "fewer eigenvalues than retained components".into(),
            ));
        }
        let total = all_eigenvalues.sum();
        let kept = variances.sum();
        Ok(PcaDecomposition {
            basis,
            gram,
            components,
            scores,
            variances,
            eigenvalues: all_eigenvalues,
            variance_fraction_retained: if total > 0.0 { kept / total } else { 1.0 },
            mean,
            curve_ids,
        })
    }

    pub fn basis(&self) -> &BasisSystem {
        &self.basis
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    pub fn variances(&self) -> &DVector<f64> {
        &self.variances
    }

    pub fn all_eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn variance_fraction_retained(&self) -> f64 {
        self.variance_fraction_retained
    }

    pub fn mean_coefficients(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn curve_ids(&self) -> &[String] {
        &self.curve_ids
    }

    pub fn num_components(&self) -> usize {
        self.components.nrows()
    }

    /// Keeps only the leading `k` components.
    pub fn truncate(&self, k: usize) -> Result<PcaDecomposition> {
        if k == 0 || k > self.num_components() {
            return Err(Error::Parameter(format!(
                "cannot keep {k} of {} components",
                self.num_components()
            )));
        }
        let total = self.eigenvalues.sum();
        let kept = self.variances.rows(0, k).sum();
        Ok(PcaDecomposition {
            components: self.components.rows(0, k).into_owned(),
            scores: self.scores.columns(0, k).into_owned(),
            variances: self.variances.rows(0, k).into_owned(),
            variance_fraction_retained: if total > 0.0 { kept / total } else { 1.0 },
            ..self.clone()
        })
    }

    /// Component function values, one row per component.
    pub fn evaluate_components(&self, points: &[f64]) -> Result<DMatrix<f64>> {
        Ok(&self.components * self.basis.evaluate(points, 0)?.transpose())
    }

    /// Scores `∫ (x_i − x̄) φ_j` of any dataset on the same basis.
    pub fn project(&self, data: &FunctionalDataSet) -> Result<DMatrix<f64>> {
        if data.basis() != &self.basis {
            return Err(Error::Parameter(
                "dataset basis differs from decomposition basis".into(),
            ));
        }
        let mut centered = data.coefficients().clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * &self.gram * self.components.transpose())
    }

    /// Curves rebuilt from the mean plus the leading `num_components`
    /// score-weighted components.
    pub fn reconstruct(&self, num_components: usize) -> Result<FunctionalDataSet> {
        if num_components > self.num_components() {
            return Err(Error::Parameter(format!(
                "cannot reconstruct from {num_components} of {} components",
                self.num_components()
            )));
        }
        let n = self.scores.nrows();
        let mut coefs = DMatrix::from_fn(n, self.basis.size(), |_, j| self.mean[j]);
        if num_components > 0 {
            coefs +=
                self.scores.columns(0, num_components) * self.components.rows(0, num_components);
        }
        FunctionalDataSet::new(self.basis.clone(), coefs, self.curve_ids.clone())
    }

    /// Roughness `∫ (L φ_j)²` of each retained component.
    pub fn roughness(&self, op: &LinearDifferentialOperator) -> Result<DVector<f64>> {
        crate::mafr::roughness_profile(&self.components, &self.basis, op)
    }
}

/// Functional PCA of `data`.
pub fn fpca(data: &FunctionalDataSet, options: &FpcaOptions) -> Result<PcaDecomposition> {
    let n = data.num_curves();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "fPCA needs at least 2 curves (got {n})"
        )));
    }
    let basis = data.basis();
    let k = basis.size();
    match options.retain {
        Retention::Count(c) if c == 0 || c > k => {
            return Err(Error::Parameter(format!(
                "retain count must be in 1..={k} (got {c})"
            )));
        }
        Retention::Fraction(q) if !(q > 0.0 && q <= 1.0) => {
            return Err(Error::Parameter(format!(
                "retain fraction must be in (0, 1] (got {q})"
            )));
        }
        _ => {}
    }

    let (centered, mean) = if options.center {
        data.center()
    } else {
        (data.clone(), DVector::zeros(k))
    };
    let x = centered.coefficients();
    let cov = (x.transpose() * x) / (n - 1) as f64;

    let gram =
        basis.gram_matrix_with(&LinearDifferentialOperator::identity(), &options.quadrature)?;
    let (w_half, w_inv_half) = sym_sqrt_inv_sqrt(&gram, GRAM_FLOOR).map_err(|e| match e {
        Error::Degenerate(_) => Error::BasisConditioning,
        other => other,
    })?;
    let whitened = &w_half * cov * &w_half;
    let eig = sym_eigen(&whitened, EigenOrder::Descending)?;
    let eigenvalues = eig.eigenvalues.map(|l| l.max(0.0));

    let total: f64 = eigenvalues.sum();
    let kr = match options.retain {
        Retention::Count(c) => c,
        Retention::Fraction(q) => retained_count(eigenvalues.as_slice(), q),
    };

    let mut components = DMatrix::zeros(kr, k);
    for j in 0..kr {
        let mut coef = (&w_inv_half * eig.eigenvectors.column(j)).into_owned();
        apply_sign_convention(coef.as_mut_slice());
        components.set_row(j, &coef.transpose());
    }
    let scores = x * &gram * components.transpose();
    let variances = eigenvalues.rows(0, kr).into_owned();
    let kept: f64 = variances.sum();

    Ok(PcaDecomposition {
        basis: basis.clone(),
        gram,
        components,
        scores,
        variances,
        eigenvalues,
        variance_fraction_retained: if total > 0.0 { kept / total } else { 1.0 },
        mean,
        curve_ids: data.curve_ids().to_vec(),
    })
}

/// Smallest `k` whose leading eigenvalues reach fraction `q` of the total.
/// A zero total retains one component.
pub fn retained_count(descending: &[f64], q: f64) -> usize {
    let total: f64 = descending.iter().sum();
    if total <= 0.0 {
        return 1;
    }
    let target = q * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    for (i, l) in descending.iter().enumerate() {
        acc += l;
        if acc >= target {
            return i + 1;
        }
    }
    descending.len()
}
