//! Answering simple and complex natural-language questions over a single table.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`question::formulate`] turns a raw question into a token sequence annotated with the
//!    table schema and column/value mentions.
//! 2. [`decompose::resolve`] splits complex questions into simple ones, recursively.
//! 3. [`search::answer`] beam-searches the space of data facts for each simple question.
//! 4. [`chart::build_chart`] and [`chart::layout`] render the ranked facts as an annotated
//!    dashboard.
//!
//! [`pipeline::Engine`] wires the stages together.

pub mod chart;
pub mod corpus;
pub mod decompose;
pub mod fact;
pub mod fixtures;
pub mod metrics;
pub mod pipeline;
pub mod question;
pub mod render;
pub mod schema;
pub mod search;
pub mod similarity;
pub mod stats;
pub mod table;
pub mod text;

pub use chart::{ChartSpec, Dashboard};
pub use decompose::{DecompositionTree, Decomposer, RuleDecomposer};
pub use fact::{Agg, DataFact, FactResult, FactType, Measure};
pub use pipeline::{AskResponse, Engine};
pub use question::{FormulatedQuestion, QuestionClass};
pub use search::{ScoredFact, SearchConfig};
pub use similarity::{ReferenceProvider, SimilarityProvider};
pub use table::{ColumnType, DataTable, Filter, Subspace};

/// Scalar used for table values and scores.
pub type Real = f64;

/// Version tag carried by every JSON document the engine emits.
pub const SCHEMA_VERSION: &str = "1.0";
