//! Trainable parameters and inference.
//!
//! Every item (service or goal) is represented by the fusion of its frozen
//! semantic vector and a learned auxiliary vector. Selected services are
//! weighted by a softmax over `fused · A`; the goal enters unweighted:
//!
//! ```text
//! E^C = F_goal + Σ_k w_k F_k      w = softmax_k(F_k · A)
//! v(n) = E^C · W_n                p(n) = softmax_n(v(n)) over all services
//! ```

use std::collections::HashSet;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, softmax};
use crate::semantic::SemanticSpace;

/// Element-wise sum of a semantic and an auxiliary vector.
pub fn fuse(semantic: &[f64], auxiliary: &[f64]) -> Result<Vec<f64>> {
    if semantic.len() != auxiliary.len() {
        return Err(Error::DimensionMismatch {
            expected: semantic.len(),
            actual: auxiliary.len(),
        });
    }
    Ok(semantic.iter().zip(auxiliary).map(|(s, x)| s + x).collect())
}

fn fuse_into(semantic: &[f64], auxiliary: &[f64], out: &mut [f64]) {
    for ((o, s), x) in out.iter_mut().zip(semantic).zip(auxiliary) {
        *o = s + x;
    }
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    dim: usize,
    services: usize,
    /// `(|S|+1) × d` auxiliary matrix; the last row is the shared goal offset.
    aux: Vec<f64>,
    attention: Vec<f64>,
    /// Output weights stored column-contiguous: service `n`'s column is
    /// `out[n*d..(n+1)*d]`.
    out: Vec<f64>,
    semantic: Arc<SemanticSpace>,
    attention_enabled: bool,
}

/// Goal vector plus the services selected so far, in selection order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposerContext {
    pub goal_semantic: Vec<f64>,
    pub selected: Vec<usize>,
}

impl ComposerContext {
    pub fn new(goal_semantic: Vec<f64>, selected: Vec<usize>) -> Self {
        Self {
            goal_semantic,
            selected,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextEmbedding {
    pub vector: Vec<f64>,
    /// `(position, weight)` in selection order; empty at cold start.
    pub attention: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Recommendation {
    pub position: usize,
    pub probability: f64,
    /// 1-based.
    pub rank: usize,
}

/// Intermediate values of one context embedding, reused by the trainer's
/// backward pass.
#[derive(Debug, Clone)]
pub(crate) struct Forward {
    pub fused: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// `Σ_k w_k F_k`
    pub weighted_mean: Vec<f64>,
    pub context: Vec<f64>,
}

impl ModelParams {
    pub fn new(
        semantic: Arc<SemanticSpace>,
        aux: Vec<f64>,
        attention: Vec<f64>,
        out: Vec<f64>,
        attention_enabled: bool,
    ) -> Result<Self> {
        let d = semantic.dim();
        let n = semantic.num_services();
        for (expected, actual) in [((n + 1) * d, aux.len()), (d, attention.len()), (n * d, out.len())] {
            if expected != actual {
                return Err(Error::DimensionMismatch { expected, actual });
            }
        }
        Ok(Self {
            dim: d,
            services: n,
            aux,
            attention,
            out,
            semantic,
            attention_enabled,
        })
    }

    pub fn zeros(semantic: Arc<SemanticSpace>, attention_enabled: bool) -> Self {
        let (d, n) = (semantic.dim(), semantic.num_services());
        Self::new(semantic, vec![0.0; (n + 1) * d], vec![0.0; d], vec![0.0; n * d], attention_enabled)
            .expect("shapes are consistent by construction")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_services(&self) -> usize {
        self.services
    }

    pub fn goal_row(&self) -> usize {
        self.services
    }

    pub fn semantic(&self) -> &SemanticSpace {
        &self.semantic
    }

    pub fn semantic_arc(&self) -> Arc<SemanticSpace> {
        Arc::clone(&self.semantic)
    }

    pub fn attention_enabled(&self) -> bool {
        self.attention_enabled
    }

    pub fn aux_row(&self, row: usize) -> &[f64] {
        &self.aux[row * self.dim..(row + 1) * self.dim]
    }

    pub fn out_column(&self, service: usize) -> &[f64] {
        &self.out[service * self.dim..(service + 1) * self.dim]
    }

    pub fn attention_vector(&self) -> &[f64] {
        &self.attention
    }

    pub fn aux_matrix(&self) -> &[f64] {
        &self.aux
    }

    pub fn out_matrix(&self) -> &[f64] {
        &self.out
    }

    pub fn aux_matrix_mut(&mut self) -> &mut [f64] {
        &mut self.aux
    }

    pub fn attention_vector_mut(&mut self) -> &mut [f64] {
        &mut self.attention
    }

    pub fn out_matrix_mut(&mut self) -> &mut [f64] {
        &mut self.out
    }

    pub(crate) fn aux_row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.aux[row * self.dim..(row + 1) * self.dim]
    }

    pub(crate) fn out_column_mut(&mut self, service: usize) -> &mut [f64] {
        &mut self.out[service * self.dim..(service + 1) * self.dim]
    }

    pub fn fused(&self, position: usize) -> Vec<f64> {
        let mut f = vec![0.0; self.dim];
        fuse_into(self.semantic.service_vector(position), self.aux_row(position), &mut f);
        f
    }

    pub fn fused_goal(&self, goal_semantic: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.dim];
        fuse_into(goal_semantic, self.aux_row(self.goal_row()), &mut f);
        f
    }

    fn validate_context(&self, ctx: &ComposerContext) -> Result<()> {
        if ctx.goal_semantic.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: ctx.goal_semantic.len(),
            });
        }
        let mut seen = HashSet::with_capacity(ctx.selected.len());
        for &p in &ctx.selected {
            if p >= self.services {
                return Err(Error::PositionOutOfRange {
                    position: p,
                    services: self.services,
                });
            }
            if !seen.insert(p) {
                return Err(Error::DuplicateSelection(p));
            }
        }
        Ok(())
    }

    /// `Λ(k) = F_k · A` for each selected service.
    pub fn attention_logits(&self, selected: &[usize]) -> Vec<f64> {
        selected.iter().map(|&k| dot(&self.fused(k), &self.attention)).collect()
    }

    fn weights_for(&self, fused: &[Vec<f64>]) -> Vec<f64> {
        if self.attention_enabled {
            let logits: Vec<f64> = fused.iter().map(|f| dot(f, &self.attention)).collect();
            softmax(&logits)
        } else {
            vec![1.0 / fused.len() as f64; fused.len()]
        }
    }

    /// Softmax of the attention logits over the selected services only
    /// (uniform when attention is disabled).
    pub fn attention_weights(&self, ctx: &ComposerContext) -> Result<Vec<(usize, f64)>> {
        self.validate_context(ctx)?;
        if ctx.selected.is_empty() {
            return Err(Error::EmptySelection);
        }
        let fused: Vec<Vec<f64>> = ctx.selected.iter().map(|&k| self.fused(k)).collect();
        Ok(ctx.selected.iter().copied().zip(self.weights_for(&fused)).collect())
    }

    pub(crate) fn forward(&self, goal_semantic: &[f64], selected: &[usize]) -> Forward {
        let mut context = self.fused_goal(goal_semantic);
        let fused: Vec<Vec<f64>> = selected.iter().map(|&k| self.fused(k)).collect();
        let mut weighted_mean = vec![0.0; self.dim];
        let weights = if fused.is_empty() {
            Vec::new()
        } else {
            let w = self.weights_for(&fused);
            for (wk, f) in w.iter().zip(&fused) {
                axpy(*wk, f, &mut weighted_mean);
            }
            axpy(1.0, &weighted_mean, &mut context);
            w
        };
        Forward {
            fused,
            weights,
            weighted_mean,
            context,
        }
    }

    pub fn embed_context(&self, ctx: &ComposerContext) -> Result<ContextEmbedding> {
        self.validate_context(ctx)?;
        let fwd = self.forward(&ctx.goal_semantic, &ctx.selected);
        Ok(ContextEmbedding {
            vector: fwd.context,
            attention: ctx.selected.iter().copied().zip(fwd.weights).collect(),
        })
    }

    pub fn score(&self, embedding: &ContextEmbedding, candidate: usize) -> Result<f64> {
        if candidate >= self.services {
            return Err(Error::PositionOutOfRange {
                position: candidate,
                services: self.services,
            });
        }
        Ok(dot(&embedding.vector, self.out_column(candidate)))
    }

    pub fn scores(&self, embedding: &ContextEmbedding) -> Vec<f64> {
        (0..self.services)
            .map(|n| dot(&embedding.vector, self.out_column(n)))
            .collect()
    }

    /// Softmax of the scores over every service.
    pub fn predict_distribution(&self, embedding: &ContextEmbedding) -> Vec<f64> {
        softmax(&self.scores(embedding))
    }

    /// All `candidates` except selected services, ordered by probability
    /// descending with ties broken by ascending position.
    pub fn rank_candidates(
        &self,
        ctx: &ComposerContext,
        candidates: &[usize],
    ) -> Result<Vec<(usize, f64)>> {
        let embedding = self.embed_context(ctx)?;
        let probs = self.predict_distribution(&embedding);
        let selected: HashSet<usize> = ctx.selected.iter().copied().collect();
        let mut seen = HashSet::with_capacity(candidates.len());
        let mut ranked = Vec::with_capacity(candidates.len());
        for &c in candidates {
            if c >= self.services {
                return Err(Error::PositionOutOfRange {
                    position: c,
                    services: self.services,
                });
            }
            if !selected.contains(&c) && seen.insert(c) {
                ranked.push((c, probs[c]));
            }
        }
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(ranked)
    }

    /// Top `k` of `candidates`, selected services excluded.
    pub fn recommend(
        &self,
        ctx: &ComposerContext,
        k: usize,
        candidates: &[usize],
    ) -> Result<Vec<Recommendation>> {
        let mut ranked = self.rank_candidates(ctx, candidates)?;
        ranked.truncate(k);
        Ok(ranked
            .into_iter()
            .enumerate()
            .map(|(i, (position, probability))| Recommendation {
                position,
                probability,
                rank: i + 1,
            })
            .collect())
    }
}
