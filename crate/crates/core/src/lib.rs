//! Two-species nonlocal interaction dynamics on finite weighted graphs.
//!
//! The crate is organised around a dense [`FiniteGraph`], a [`KernelSet`]
//! holding the three interaction matrices, and the upwind dynamics in
//! [`dynamics`]. [`twopoint`] has the closed-form analysis of the two-vertex
//! graph and [`scenarios`] bundles the reference experiments.

pub mod dynamics;
pub mod error;
pub mod graph;
pub mod kernels;
pub mod scenarios;
pub mod twopoint;

pub use dynamics::{
    DynamicsParams, IntegrateOptions, Mobility, Trajectory, TrajectoryPoint,
};
pub use error::{Error, Result};
pub use graph::{EtaRule, FiniteGraph, FluxField, Norm, SpeciesState};
pub use kernels::{AggregationReport, KernelForm, KernelSet, KernelSpec};
pub use scenarios::Scenario;
pub use twopoint::{Stability, StateTag, TwoPointClassification, TwoPointProblem};
