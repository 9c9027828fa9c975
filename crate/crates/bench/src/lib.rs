//! Benchmarks for the recommender core.
//!
//! Fixtures are deterministic so runs are comparable across machines.

use std::sync::Arc;

use goalrec_core::trainer::init_params;
use goalrec_core::{Hyperparams, ModelParams, PvdmConfig, SemanticSpace};

/// A smooth, seed-free pseudo-random value in [-1, 1].
fn wave(i: usize, j: usize) -> f64 {
    ((i as f64 * 12.9898 + j as f64 * 78.233).sin() * 43_758.545_3).fract()
}

/// Semantic space of `services` vectors of dimension `dim`, without a lexicon.
pub fn semantic_space(services: usize, dim: usize) -> SemanticSpace {
    let ids = (0..services).map(|i| format!("s{i}")).collect();
    let vectors = (0..services * dim).map(|x| wave(x / dim, x % dim)).collect();
    SemanticSpace::from_parts(dim, ids, vectors, None, PvdmConfig::default()).expect("valid space")
}

/// Freshly initialised model over [`semantic_space`].
pub fn model(services: usize, dim: usize, attention: bool) -> ModelParams {
    let hp = Hyperparams {
        dim,
        attention_enabled: attention,
        ..Hyperparams::default()
    };
    init_params(Arc::new(semantic_space(services, dim)), &hp).expect("valid hyperparameters")
}

/// Goal vector of dimension `dim`.
pub fn goal(dim: usize) -> Vec<f64> {
    (0..dim).map(|j| wave(usize::MAX / 2, j)).collect()
}
