//! Causal model auditing primitives.
//!
//! The crate is `no_std` with `alloc`. It holds everything that is a pure
//! function of its inputs: the versioned causal graph and its refinements,
//! PC discovery and Gaussian BIC scoring, the two LLM prompt batteries, the
//! rule-based response parser, chart data models with an SVG renderer, and
//! the rating accuracy statistics. IO, the LLM gateway and the HTTP service
//! live in the `causal-audit` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod accuracy;
pub mod bic;
pub mod chart;
pub mod dataset;
pub mod graph;
mod linalg;
mod math;
pub mod parser;
pub mod pc;
pub mod prompt;
pub mod stats;
pub mod text;

pub use accuracy::{accuracy_report, AccuracyError, AccuracyReport, AccuracyRow, GroupStats};
pub use bic::{bic_graph, bic_node, BicError, BicReport};
pub use dataset::{Dataset, DatasetError};
pub use graph::{
    replay, CausalGraph, Edge, GraphError, Orientation, Provenance, Refinement, RefinementOp,
    VarId, Variable, VariableKind,
};
pub use parser::{
    extract_entities, extract_rating, normalize_entity_name, parse_environment, EntityKind,
    EntityMention, EnvironmentResult, ParserConfig, RelationRating, Sign, Strength,
};
pub use pc::{pc_discover, pc_discover_columns, Discovery, PcOptions, SepSetTable};
pub use prompt::{
    render_debate, render_environment, render_environment_battery, Battery, Combo,
    DebatePromptSet, EnvironmentOptions, Level, PromptError, PromptId, RenderedPrompt,
    TEMPLATE_VERSION,
};
pub use stats::{fisher_z_independent, normal_quantile, partial_correlation};
