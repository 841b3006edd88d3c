//! Adaptive multiresolution lattice Boltzmann schemes on dyadic meshes.
// `!(x >= 0.0)` style checks reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod lbm;
pub mod mesh;
pub mod models;
pub mod multiresolution;
pub mod quadrature;
pub mod simulation;

pub use adaptive::{AdaptiveState, CollisionMode};
pub use config::{Grid, RunConfig, SchemeKind};
pub use diagnostics::{DecayField, LinearFit, Sweep, SweepRow};
pub use error::{MrError, Result};
pub use lbm::{SchemeSpec, UniformState};
pub use mesh::{BoundaryMode, CellIndex, MeshGeometry, MeshTree};
pub use models::{InitialDatum, ScalarFlux, ScalarTest};
pub use multiresolution::{DetailField, LeafField, PredictionSpec, ThresholdPolicy};
pub use simulation::{run, RunOptions, RunResult, StepRecord};
