//! Maximal autocorrelation factor rotation of a retained component subspace.
//!
//! For retained components `φ` and a roughness operator `L`, the penalty
//! matrix `P_ij = ∫ (Lφ_i)(Lφ_j)` is eigendecomposed as `P = U D Uᵀ`. The
//! rotated components are `ψ = Uᵀ φ`, the rotated scores `t_i = Uᵀ s_i`, and
//! their covariance `Uᵀ Σ U`. Because `φ` is orthonormal, `ψ_j` minimizes
//! `∫ (L b·φ)²` over unit `b` orthogonal to the earlier directions.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::BasisSystem;
use crate::error::{Error, Result};
use crate::fpca::PcaDecomposition;
use crate::ldo::LinearDifferentialOperator;
use crate::linalg::{sym_eigen, EigenOrder};
use crate::quadrature::{symmetrize, QuadratureSpec};

/// Relative tolerance for grouping equal penalty eigenvalues.
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;

/// Order of rotated components by penalty eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotationOrder {
    /// Ascending roughness: the smoothest component comes first.
    #[default]
    SmoothFirst,
    /// Descending roughness.
    RoughFirst,
}

impl FromStr for RotationOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "smooth-first" => Ok(RotationOrder::SmoothFirst),
            "rough-first" => Ok(RotationOrder::RoughFirst),
            other => Err(Error::Parameter(format!(
                "unknown ordering `{other}` (smooth-first | rough-first)"
            ))),
        }
    }
}

impl RotationOrder {
    fn eigen_order(self) -> EigenOrder {
        match self {
            RotationOrder::SmoothFirst => EigenOrder::Ascending,
            RotationOrder::RoughFirst => EigenOrder::Descending,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MafrRotation {
    basis: BasisSystem,
    /// `U`; column `j` gives the weights of `ψ_j` on the original components.
    rotation: DMatrix<f64>,
    penalty_eigenvalues: DVector<f64>,
    /// `K_r × K` basis coefficients of `ψ`.
    rotated_components: DMatrix<f64>,
    /// `n × K_r`, row `i` is `t_i = Uᵀ s_i`.
    rotated_scores: DMatrix<f64>,
    rotated_score_covariance: DMatrix<f64>,
    ordering: RotationOrder,
}

impl MafrRotation {
    pub fn basis(&self) -> &BasisSystem {
        &self.basis
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn penalty_eigenvalues(&self) -> &DVector<f64> {
        &self.penalty_eigenvalues
    }

    pub fn rotated_components(&self) -> &DMatrix<f64> {
        &self.rotated_components
    }

    pub fn rotated_scores(&self) -> &DMatrix<f64> {
        &self.rotated_scores
    }

    pub fn rotated_score_covariance(&self) -> &DMatrix<f64> {
        &self.rotated_score_covariance
    }

    /// Diagonal of `Uᵀ Σ U`.
    pub fn rotated_variances(&self) -> DVector<f64> {
        self.rotated_score_covariance.diagonal()
    }

    pub fn ordering(&self) -> RotationOrder {
        self.ordering
    }

    pub fn num_components(&self) -> usize {
        self.rotation.ncols()
    }

    pub fn evaluate_components(&self, points: &[f64]) -> Result<DMatrix<f64>> {
        Ok(&self.rotated_components * self.basis.evaluate(points, 0)?.transpose())
    }

    /// `∫ (L ψ_j)²` per rotated component.
    pub fn roughness(&self, op: &LinearDifferentialOperator) -> Result<DVector<f64>> {
        roughness_profile(&self.rotated_components, &self.basis, op)
    }

    /// Index ranges of consecutive penalty eigenvalues that agree within
    /// `rel_tol · max |λ|`. Vectors inside one group are determined only up
    /// to a rotation of the group.
    pub fn eigen_groups(&self, rel_tol: f64) -> Vec<std::ops::Range<usize>> {
        eigen_groups(self.penalty_eigenvalues.as_slice(), rel_tol)
    }
}

pub(crate) fn eigen_groups(values: &[f64], rel_tol: f64) -> Vec<std::ops::Range<usize>> {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = rel_tol * scale;
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || (values[i] - values[i - 1]).abs() > tol {
            groups.push(start..i);
            start = i;
        }
    }
    groups
}

/// `P_ij = ∫ (L φ_i)(L φ_j)` with the default quadrature.
pub fn penalty_matrix(
    pca: &PcaDecomposition,
    op: &LinearDifferentialOperator,
) -> Result<DMatrix<f64>> {
    penalty_matrix_with(pca, op, &QuadratureSpec::default())
}

/// `P = A G Aᵀ`, where `A` holds the component coefficients and `G` is the
/// basis Gram matrix under `op`.
pub fn penalty_matrix_with(
    pca: &PcaDecomposition,
    op: &LinearDifferentialOperator,
    quad: &QuadratureSpec,
) -> Result<DMatrix<f64>> {
    let g = pca.basis().gram_matrix_with(op, quad)?;
    let a = pca.components();
    Ok(symmetrize(&(a * g * a.transpose())))
}

/// Rotation by the eigenvectors of the penalty matrix for `op`.
pub fn rotate(
    pca: &PcaDecomposition,
    op: &LinearDifferentialOperator,
    ordering: RotationOrder,
) -> Result<MafrRotation> {
    let p = penalty_matrix(pca, op)?;
    rotate_with_penalty(pca, &p, ordering)
}

/// Rotation by the eigenvectors of a precomputed penalty matrix.
pub fn rotate_with_penalty(
    pca: &PcaDecomposition,
    penalty: &DMatrix<f64>,
    ordering: RotationOrder,
) -> Result<MafrRotation> {
    check_penalty_shape(pca, penalty)?;
    let eig = sym_eigen(penalty, ordering.eigen_order())?;
    assemble(pca, eig.eigenvectors, eig.eigenvalues, ordering)
}

/// Joint rotation for weights `w`: eigenvectors of `W^{1/2} P W^{1/2}`
/// with `W = diag(w)`. Equal weights reproduce [`rotate`] with eigenvalues
/// scaled by the weight.
pub fn joint_rotate(
    pca: &PcaDecomposition,
    op: &LinearDifferentialOperator,
    weights: &[f64],
    ordering: RotationOrder,
) -> Result<MafrRotation> {
    let p = penalty_matrix(pca, op)?;
    joint_rotate_with_penalty(pca, &p, weights, ordering)
}

pub fn joint_rotate_with_penalty(
    pca: &PcaDecomposition,
    penalty: &DMatrix<f64>,
    weights: &[f64],
    ordering: RotationOrder,
) -> Result<MafrRotation> {
    check_penalty_shape(pca, penalty)?;
    let kr = pca.num_components();
    if weights.len() != kr {
        return Err(Error::Parameter(format!(
            "expected {kr} weights, got {}",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::Parameter(format!(
            "weights must be positive (got {w})"
        )));
    }
    let half = DVector::from_iterator(kr, weights.iter().map(|w| w.sqrt()));
    let weighted = DMatrix::from_fn(kr, kr, |i, j| half[i] * penalty[(i, j)] * half[j]);
    let eig = sym_eigen(&weighted, ordering.eigen_order())?;
    assemble(pca, eig.eigenvectors, eig.eigenvalues, ordering)
}

fn check_penalty_shape(pca: &PcaDecomposition, penalty: &DMatrix<f64>) -> Result<()> {
    let kr = pca.num_components();
    if kr == 0 {
        return Err(Error::Parameter(
            "rotation needs at least one component".into(),
        ));
    }
    if penalty.shape() != (kr, kr) {
        return Err(Error::Parameter(format!(
            "penalty matrix is {}x{} but {kr} components are retained",
            penalty.nrows(),
            penalty.ncols()
        )));
    }
    Ok(())
}

fn assemble(
    pca: &PcaDecomposition,
    rotation: DMatrix<f64>,
    penalty_eigenvalues: DVector<f64>,
    ordering: RotationOrder,
) -> Result<MafrRotation> {
    let rotated_components = rotation.transpose() * pca.components();
    let rotated_scores = pca.scores() * &rotation;
    let sigma = DMatrix::from_diagonal(pca.variances());
    let rotated_score_covariance = symmetrize(&(rotation.transpose() * sigma * &rotation));
    Ok(MafrRotation {
        basis: pca.basis().clone(),
        rotation,
        penalty_eigenvalues,
        rotated_components,
        rotated_scores,
        rotated_score_covariance,
        ordering,
    })
}

/// `∫ (L f_j)²` for each row `f_j` of a component coefficient matrix.
pub fn roughness_profile(
    components: &DMatrix<f64>,
    basis: &BasisSystem,
    op: &LinearDifferentialOperator,
) -> Result<DVector<f64>> {
    let g = basis.gram_matrix(op)?;
    let p = components * g * components.transpose();
    Ok(p.diagonal())
}
