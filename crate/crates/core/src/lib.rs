//! Query-driven knowledge base completion.
//!
//! A query `<subject, relation, ?>` is answered by expanding the relation's
//! Horn rules into path types over two modalities (stored facts and a
//! question-answering provider), traversing them into a per-query graph and
//! scoring each candidate by the weighted sum of its path instances.

pub mod answer_source;
pub mod baselines;
pub mod error;
pub mod eval_harness;
pub mod kb_store;
pub mod mkg_builder;
pub mod parallel;
pub mod path_fusion;
pub mod rule_catalog;
pub mod weight_learning;

pub use answer_source::{AnswerProvider, FixtureProvider, ProbeSession, QaAnswer};
pub use error::{BaselineError, EvalError, IngestError, ProviderError, TrainError};
pub use eval_harness::{average_precision, EvalQuery, Method, Ranker};
pub use kb_store::{Fact, FactStore, FactView, MaskedView};
pub use mkg_builder::{build_graph, Modality, MultimodalKnowledgeGraph, PathInstance, PathType, QueryConfig};
pub use path_fusion::{complete, score_answers, ScoredAnswer, WeightTable};
pub use rule_catalog::{Literal, Rule};
