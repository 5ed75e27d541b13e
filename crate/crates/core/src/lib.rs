//! Gaussian-beam tomography toolkit.
//!
//! Builds Gaussian beams along geodesics of smooth 2D metrics, drives a
//! finite-difference wave solver with their boundary traces, and reproduces
//! the recovery of geodesic line integrals of a time-dependent potential
//! from Dirichlet-to-Neumann boundary data, including the error-function
//! minimization behind the Hölder-type stability estimate.
//!
//! The numerical core is generic over the scalar type (`f32`/`f64` through
//! `num-traits`); the aliases below pin the production `f64` instantiation.

pub mod beam;
pub mod config;
pub mod error;
pub mod fermi;
pub mod geometry;
pub mod linalg;
pub mod num;
pub mod ray;
pub mod report;
pub mod stability;
pub mod transform;
pub mod wavesolver;

pub use error::{Error, Result};
pub use num::{lit, Cplx, Real};

/// Production scalar.
pub type R64 = f64;

pub type MetricField64 = geometry::MetricField<R64>;
pub type Domain64 = geometry::Domain<R64>;
pub type PotentialField64 = geometry::PotentialField<R64>;
pub type Bicharacteristic64 = ray::Bicharacteristic<R64>;
pub type GaussianBeam64 = beam::GaussianBeam<R64>;
pub type PhaseJet64 = beam::PhaseJet<R64>;
pub type CutoffSpec64 = beam::CutoffSpec<R64>;
pub type SpaceTimeGrid64 = wavesolver::SpaceTimeGrid<R64>;
pub type DnTrace64 = wavesolver::DnTrace<R64>;
pub type HFunction64 = stability::HFunction<R64>;
pub type FermiChart64 = fermi::FermiChart<R64>;
pub type RunConfig64 = config::RunConfig;
