//! Goal-driven, context-aware next-service recommendation.
//!
//! The pipeline has four stages:
//!
//! 1. [`corpus`] loads services and mashups and expands mashups into
//!    training / testing instances.
//! 2. [`semantic`] trains a PV-DM paragraph-vector model over every service
//!    description and mashup goal, giving the frozen semantic matrix.
//! 3. [`trainer`] learns the auxiliary matrix, the attention vector and the
//!    output weights with goal-exclusionary negative sampling; [`model`]
//!    holds those parameters and does inference.
//! 4. [`evaluator`] computes REC@K / MRR under the leave-last-out and
//!    stepwise protocols.
//!
//! [`checkpoint`] persists trained models and [`synthetic`] writes
//! planted-structure corpora for end-to-end testing.

pub mod checkpoint;
pub mod corpus;
pub mod error;
pub mod evaluator;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod seed;
pub mod semantic;
pub mod synthetic;
pub mod text;
pub mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use corpus::{
    expand_incremental, expand_leave_one_out, load_corpus, split_corpus, Corpus, CorpusFormat,
    Mashup, Service, TrainingInstance,
};
pub use error::{Error, Result};
pub use evaluator::{
    compare_ablation, evaluate, evaluate_stepwise, mrr, rec_at_k, AblationDelta, EvalConfig,
    EvalReport, Ranker,
};
pub use model::{ComposerContext, ContextEmbedding, ModelParams, Recommendation};
pub use pipeline::fit;
pub use semantic::{cosine_similarity, PvdmConfig, SemanticSpace};
pub use synthetic::SyntheticConfig;
pub use text::normalize_text;
pub use trainer::{train, ExpansionMode, Hyperparams, TrainingReport};
