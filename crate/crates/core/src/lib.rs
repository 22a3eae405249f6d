//! Core types and numerics for turning design requirements into optimization
//! formulations and scoring them against reference rankings of test curves.
//!
//! The numerical core is generic over the scalar type ([`Scalar`], implemented
//! for `f32` and `f64`). The `f64` instantiations are re-exported at the crate
//! root as plain aliases, which is what the pipeline and CLI use.

pub mod formulation;
pub mod instance;
pub mod ranking;
pub mod requirement;
pub mod scalar;
pub mod scoring;
pub mod synthbench;

pub use formulation::{
    parse_formulation, print_formulation, Aggregator, EmptyBandPolicy, EvalError, EvalOptions, FormulationError,
    ItemKind, Metric,
};
pub use ranking::{FrontAssignment, RankError, Ranking};
pub use requirement::{Comparator, Direction, MetricId};
pub use scalar::Scalar;
pub use scoring::{AlignmentReport, ItemAlignment, QualityScore, ScoreError};

pub type Band = formulation::Band<f64>;
pub type Expr = formulation::Expr<f64>;
pub type FormulationItem = formulation::FormulationItem<f64>;
pub type Formulation = formulation::Formulation<f64>;
pub type TestInstance = instance::TestInstance<f64>;
pub type DesignIntent = requirement::DesignIntent<f64>;
pub type Requirement = requirement::Requirement<f64>;
pub type RequirementSet = requirement::RequirementSet<f64>;
pub type ObjectiveMatrix = ranking::ObjectiveMatrix<f64>;

pub type Band32 = formulation::Band<f32>;
pub type Formulation32 = formulation::Formulation<f32>;
pub type TestInstance32 = instance::TestInstance<f32>;
