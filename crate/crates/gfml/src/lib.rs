//! Genetic-fuzzy toolkit for Go win-rate prediction: FML controller
//! parsing/serialization, Mamdani inference with centroid defuzzification,
//! per-move dataset handling, real-coded GA tuning of trapezoid membership
//! parameters, and a future-state rollout harness with a tic-tac-toe
//! minimax reference provider.

pub mod dataset;
pub mod fml;
pub mod ga;
pub mod inference;
pub mod model;
pub mod rollout;
pub mod synthetic;
pub mod ttt;

pub use dataset::{Dataset, GameRecord, Side, TrainingView};
pub use fml::{parse_fml, serialize_fml, FmlDocument, ParseDiagnostic};
pub use ga::{evolve, EvolutionConfig, EvolutionReport};
pub use inference::{infer, InferenceResult, InputVector};
pub use model::{
    build_full_grid_rule_base, build_master_controller, build_master_knowledge_base,
    validate_controller, DefaultConsequentMap, FuzzyController, FuzzyTerm, FuzzyVariable, Rule,
    TrapezoidShape,
};
