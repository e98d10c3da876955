//! Maximal autocorrelation factor rotation (MAFR) for functional principal
//! components.
//!
//! The crate covers the whole path from discrete curves to rotated
//! components:
//!
//! * [`basis`]: Fourier and B-spline systems, derivatives, Gram matrices
//! * [`quadrature`]: Simpson and Gauss-Legendre rules
//! * [`ldo`]: linear differential operators used as roughness measures
//! * [`smoothing`]: penalized least-squares fits onto a basis
//! * [`fpca`]: functional principal components
//! * [`mafr`]: the smoothness-ordering rotation of a retained subspace
//! * [`simulate`]: synthetic Fourier datasets
//! * [`pipeline`]: CSV input/output and the end-to-end workflow behind the CLI

pub mod basis;
pub mod error;
pub mod fpca;
pub mod io;
pub mod ldo;
pub mod linalg;
pub mod mafr;
pub mod pipeline;
pub mod quadrature;
pub mod simulate;
pub mod smoothing;

pub use nalgebra;

pub use basis::{BasisSpec, BasisSystem, Interval};
pub use error::{Error, Result};
pub use fpca::{fpca, FpcaOptions, PcaDecomposition, Retention};
pub use ldo::LinearDifferentialOperator;
pub use mafr::{joint_rotate, penalty_matrix, rotate, MafrRotation, RotationOrder};
pub use simulate::{simulate, SimulationSpec};
pub use smoothing::{fit, FunctionalDataSet, ObservationGrid, SmoothingPenalty};
