//! Synthetic Fourier-coefficient datasets.
//!
//! Curve `i` is `Σ_j c_ij g_j(t)` on `[0, 1]`, where `g_j` are the Fourier
//! functions (orthonormalized by default) and `c_ij` are independent centered
//! normals whose scale decays as `exp(−j · scale_decay)`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSystem, Interval};
use crate::error::{Error, Result};
use crate::smoothing::FunctionalDataSet;

/// Whether `exp(−j · decay)` is the standard deviation or the variance of
/// coefficient `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleInterpretation {
    #[default]
    StdDev,
    Variance,
}

/// Which Fourier functions the drawn coefficients multiply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisScaling {
    /// Unit-L² functions `1, √2 sin, √2 cos, …`.
    #[default]
    Orthonormal,
    /// The stored functions `1, sin, cos, …`.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub num_curves: usize,
    pub num_basis: usize,
    pub scale_decay: f64,
    pub scale_interpretation: ScaleInterpretation,
    pub basis_scaling: BasisScaling,
    pub seed: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            num_curves: 100,
            num_basis: 25,
            scale_decay: 0.25,
            scale_interpretation: ScaleInterpretation::StdDev,
            basis_scaling: BasisScaling::Orthonormal,
            seed: 0,
        }
    }
}

impl SimulationSpec {
    pub fn with_seed(seed: u64) -> Self {
        SimulationSpec {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_curves == 0 {
            return Err(Error::Parameter("num_curves must be positive".into()));
        }
        if self.num_basis == 0 || self.num_basis.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "num_basis must be a positive odd integer (got {})",
                self.num_basis
            )));
        }
        if !(self.scale_decay.is_finite() && self.scale_decay > 0.0) {
            return Err(Error::Parameter(format!(
                "scale_decay must be positive (got {})",
                self.scale_decay
            )));
        }
        Ok(())
    }

    /// Standard deviation of coefficient `j`.
    pub fn coefficient_sd(&self, j: usize) -> f64 {
        let s = (-(j as f64) * self.scale_decay).exp();
        match self.scale_interpretation {
            ScaleInterpretation::StdDev => s,
            ScaleInterpretation::Variance => s.sqrt(),
        }
    }

    pub fn basis(&self) -> Result<BasisSystem> {
        BasisSystem::fourier(Interval::new(0.0, 1.0)?, self.num_basis)
    }
}

/// Model coefficients `c_ij`, drawn row by row from a ChaCha8 stream.
pub fn draw_coefficients(spec: &SimulationSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sds: Vec<f64> = (0..spec.num_basis)
        .map(|j| spec.coefficient_sd(j))
        .collect();
    let mut c = DMatrix::zeros(spec.num_curves, spec.num_basis);
    for i in 0..spec.num_curves {
        for (j, sd) in sds.iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            c[(i, j)] = sd * z;
        }
    }
    Ok(c)
}

/// The simulated dataset, expressed on the stored (unnormalized) Fourier basis.
pub fn simulate(spec: &SimulationSpec) -> Result<FunctionalDataSet> {
    let basis = spec.basis()?;
    let mut c = draw_coefficients(spec)?;
    if spec.basis_scaling == BasisScaling::Orthonormal {
        let scale = basis.orthonormal_scaling()?;
        for (j, s) in scale.iter().enumerate() {
            c.column_mut(j).scale_mut(*s);
        }
    }
    FunctionalDataSet::with_default_ids(basis, c)
}
