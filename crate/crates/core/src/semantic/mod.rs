//! Frozen semantic vectors for services and mashup goals.
//!
//! Vectors come either from the built-in PV-DM trainer ([`train_semantic`])
//! or from an external word2vec-text style file ([`import_vectors`]).

mod pvdm;
mod vectors;

use std::collections::HashMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::Mashup;
use crate::linalg::{dot, norm};
use crate::seed;

pub use pvdm::{train_semantic, Lexicon};
pub use vectors::{export_vectors, import_vectors};

/// PV-DM hyperparameters. Context is the average of the paragraph vector
/// and the window words, so every vector stays at the model dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvdmConfig {
    pub window: usize,
    pub epochs: usize,
    pub inner_negatives: usize,
    pub learning_rate_start: f64,
    pub learning_rate_end: f64,
    pub min_token_count: usize,
    pub seed: u64,
    /// Gradient steps used when inferring a vector for unseen text.
    pub infer_steps: usize,
}

impl Default for PvdmConfig {
    fn default() -> Self {
        Self {
            window: 5,
            epochs: 40,
            inner_negatives: 5,
            learning_rate_start: 0.025,
            learning_rate_end: 0.0001,
            min_token_count: 1,
            seed: 0,
            infer_steps: 50,
        }
    }
}

impl PvdmConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let positive = [
            ("window", self.window),
            ("epochs", self.epochs),
            ("inner_negatives", self.inner_negatives),
            ("infer_steps", self.infer_steps),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(crate::Error::InvalidConfig(format!("pvdm {name} must be positive")));
            }
        }
        if !(self.learning_rate_start > 0.0 && self.learning_rate_end > 0.0) {
            return Err(crate::Error::InvalidConfig("pvdm learning rates must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SemanticSpace {
    dim: usize,
    service_ids: Vec<String>,
    /// `|S| × d`, row-major.
    service_vectors: Vec<f64>,
    lexicon: Option<Lexicon>,
    /// Goal vectors supplied from a vector file, keyed by mashup id.
    goal_vectors: HashMap<String, Vec<f64>>,
    config: PvdmConfig,
}

impl SemanticSpace {
    pub fn from_parts(
        dim: usize,
        service_ids: Vec<String>,
        service_vectors: Vec<f64>,
        lexicon: Option<Lexicon>,
        config: PvdmConfig,
    ) -> crate::Result<Self> {
        if dim == 0 {
            return Err(crate::Error::InvalidConfig("dimension must be positive".into()));
        }
        if service_vectors.len() != service_ids.len() * dim {
            return Err(crate::Error::DimensionMismatch {
                expected: service_ids.len() * dim,
                actual: service_vectors.len(),
            });
        }
        if let Some(lex) = &lexicon {
            if lex.dim() != dim {
                return Err(crate::Error::DimensionMismatch {
                    expected: dim,
                    actual: lex.dim(),
                });
            }
        }
        Ok(Self {
            dim,
            service_ids,
            service_vectors,
            lexicon,
            goal_vectors: HashMap::new(),
            config,
        })
    }

    pub(crate) fn with_goal_vectors(mut self, goals: HashMap<String, Vec<f64>>) -> Self {
        self.goal_vectors = goals;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_services(&self) -> usize {
        self.service_ids.len()
    }

    pub fn service_ids(&self) -> &[String] {
        &self.service_ids
    }

    pub fn service_vector(&self, position: usize) -> &[f64] {
        &self.service_vectors[position * self.dim..(position + 1) * self.dim]
    }

    pub fn service_matrix(&self) -> &[f64] {
        &self.service_vectors
    }

    pub fn lexicon(&self) -> Option<&Lexicon> {
        self.lexicon.as_ref()
    }

    pub fn config(&self) -> &PvdmConfig {
        &self.config
    }

    pub fn imported_goals(&self) -> &HashMap<String, Vec<f64>> {
        &self.goal_vectors
    }

    pub fn imported_goal(&self, mashup_id: &str) -> Option<&[f64]> {
        self.goal_vectors.get(mashup_id).map(Vec::as_slice)
    }

    /// Infers a paragraph vector for `goal_text` with word and output
    /// vectors frozen. Seeded from the config seed and the text itself, so
    /// the same text always yields the same vector. Text with no known
    /// tokens, or a space without a lexicon, yields the zero vector.
    pub fn infer_goal_vector(&self, goal_text: &str, steps: usize) -> Vec<f64> {
        match &self.lexicon {
            Some(lex) => {
                let seed = seed::mix(self.config.seed, seed::hash_str(goal_text));
                lex.infer(goal_text, steps, &self.config, seed)
            }
            None => {
                warn!("no word vectors available; goal text falls back to the zero vector");
                vec![0.0; self.dim]
            }
        }
    }

    /// Goal vector for a known mashup: an imported vector when present,
    /// otherwise inference over its goal text.
    pub fn goal_vector(&self, mashup: &Mashup) -> Vec<f64> {
        if let Some(v) = self.imported_goal(&mashup.id) {
            return v.to_vec();
        }
        self.infer_goal_vector(&mashup.goal_text, self.config.infer_steps)
    }
}

/// `u·v / (‖u‖‖v‖)`, defined as 0 when either vector is zero.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> f64 {
    let denom = norm(u) * norm(v);
    if denom == 0.0 {
        return 0.0;
    }
    (dot(u, v) / denom).clamp(-1.0, 1.0)
}
