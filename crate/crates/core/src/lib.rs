//! Wrinkled graph surfaces with prescribed boundary and small Steklov eigenvalues.
//!
//! The crate is split along the computation:
//!
//! - [`geometry`]: the flat chart, the cutoff/sawtooth building blocks, the region
//!   partition and the wrinkle deformation and test function as exact scalar fields.
//! - [`quadrature`] and [`energy`]: kink-aware product quadrature, the graph Dirichlet
//!   energy identity and the region-by-region Rayleigh quotient terms.
//! - [`mesh`]: layered, kink-aligned triangulations of the chart half-disk and the unit
//!   disk, and their lifts to graph surfaces.
//! - [`solver`]: P1 assembly on a lifted surface, Schur reduction to the discrete
//!   Dirichlet-to-Neumann operator and the Steklov spectrum.
//! - [`diagnostics`]: volume, intrinsic diameter and collar checks.
//! - [`harness`]: the named experiments and their CSV/JSON artifacts.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the `parallel`
//! feature is enabled and plain iterators otherwise.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod energy;
pub mod geometry;
pub mod harness;
pub mod mesh;
pub mod par;
pub mod quadrature;
pub mod solver;

use thiserror::Error;

pub use energy::EnergyBreakdown;
pub use geometry::{DeformationParams, Region, ScalarField};
pub use mesh::{LiftedSurface, TriMesh};
pub use solver::SteklovSpectrum;

/// Top-level error for the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Energy(#[from] energy::EnergyError),
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Diagnostics(#[from] diagnostics::DiagnosticsError),
    #[error(transparent)]
    Harness(#[from] harness::HarnessError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
