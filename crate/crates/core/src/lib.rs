//! Fractional s-perimeters of N-clusters on uniform grids.
//!
//! Sets are unions of closed grid cells. The kernel module turns |x-y|^{-n-s} into exact
//! cell-pair weights, the energy module evaluates interaction energies and perimeters, the
//! solver minimizes the cluster energy under volume constraints, the lemmas module audits the
//! quantitative lemmas of the regularity theory and the extension module evaluates the
//! weighted half-space extension and its monotonicity quantity.

pub mod domain;
pub mod energy;
pub mod error;
pub mod extension;
pub mod kernel;
pub mod lemmas;
pub(crate) mod quad;
pub mod scalar;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Domain = domain::DomainSpec<f64>;
pub type Grid = domain::LabelGrid<f64>;
pub type Soft = domain::SoftCluster<f64>;
pub type Kernel = kernel::KernelTensor<f64>;

pub type DomainF32 = domain::DomainSpec<f32>;
pub type GridF32 = domain::LabelGrid<f32>;
pub type KernelF32 = kernel::KernelTensor<f32>;
