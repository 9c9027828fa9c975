//! Stochastic gradient ascent on the negative-sampled objective
//!
//! ```text
//! L = Σ_{h∈G} log σ(v(h)) + Σ_{h∈N} log σ(−v(h))
//! ```
//!
//! with negatives chosen once per mashup as the fraction `r` of non-member
//! services least cosine-similar to the mashup goal.

use std::sync::Arc;
use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{expand_incremental_with, expand_leave_one_out, Mashup, TrainingInstance};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, sigmoid};
use crate::model::ModelParams;
use crate::seed;
use crate::semantic::{cosine_similarity, SemanticSpace};

const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpansionMode {
    #[default]
    LeaveOneOut,
    Incremental,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub dim: usize,
    pub learning_rate: f64,
    pub negative_ratio: f64,
    pub max_epochs: usize,
    pub convergence_epsilon: f64,
    pub init_scale: f64,
    pub seed: u64,
    pub attention_enabled: bool,
    pub expansion: ExpansionMode,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            dim: 100,
            learning_rate: 0.001,
            negative_ratio: 0.2,
            max_epochs: 100,
            convergence_epsilon: 1e-4,
            init_scale: 0.1,
            seed: 0,
            attention_enabled: true,
            expansion: ExpansionMode::LeaveOneOut,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.dim == 0 {
            return bad("dimension must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be a non-negative finite number");
        }
        if !(self.negative_ratio > 0.0 && self.negative_ratio <= 1.0) {
            return bad("negative ratio must lie in (0, 1]");
        }
        if self.max_epochs == 0 {
            return bad("max epochs must be positive");
        }
        if self.convergence_epsilon.is_nan() || self.convergence_epsilon <= 0.0 {
            return bad("convergence epsilon must be positive");
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init scale must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: Vec<EpochRecord>,
    pub converged: bool,
    pub attention_enabled: bool,
    pub expansion: ExpansionMode,
    pub instances_per_epoch: usize,
    pub wall_seconds: f64,
}

impl TrainingReport {
    pub fn objectives(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.objective).collect()
    }

    /// One JSON object per epoch followed by a summary record.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::json!({ "type": "epoch", "epoch": e.epoch, "objective": e.objective, "seconds": e.seconds }).to_string());
            out.push('\n');
        }
        let summary = serde_json::json!({
            "type": "summary",
            "epochs": self.epochs.len(),
            "converged": self.converged,
            "attention_enabled": self.attention_enabled,
            "ablation_arm": if self.attention_enabled { "attention" } else { "uniform" },
            "expansion": self.expansion,
            "instances_per_epoch": self.instances_per_epoch,
            "wall_seconds": self.wall_seconds,
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}

/// Fills the auxiliary matrix, attention vector and output weights i.i.d.
/// uniform in `[-init_scale, init_scale]`.
pub fn init_params(semantic: Arc<SemanticSpace>, hp: &Hyperparams) -> Result<ModelParams> {
    hp.validate()?;
    if semantic.dim() != hp.dim {
        return Err(Error::DimensionMismatch {
            expected: hp.dim,
            actual: semantic.dim(),
        });
    }
    let mut params = ModelParams::zeros(semantic, hp.attention_enabled);
    if hp.init_scale > 0.0 {
        let mut rng = seed::rng(hp.seed, "init");
        let s = hp.init_scale;
        for x in params.aux_matrix_mut() {
            *x = rng.gen_range(-s..=s);
        }
        for x in params.attention_vector_mut() {
            *x = rng.gen_range(-s..=s);
        }
        for x in params.out_matrix_mut() {
            *x = rng.gen_range(-s..=s);
        }
    }
    Ok(params)
}

pub fn negative_count(pool: usize, ratio: f64) -> usize {
    ((ratio * pool as f64).floor() as usize).max(1).min(pool)
}

/// Goal-exclusionary negatives: non-member services sorted by cosine to the
/// goal ascending (ties by position), first `max(1, ⌊r·|pool|⌋)` kept.
pub fn sample_negatives(
    semantic: &SemanticSpace,
    goal_vector: &[f64],
    mashup_services: &[usize],
    ratio: f64,
) -> Result<Vec<usize>> {
    let mut pool: Vec<(usize, f64)> = (0..semantic.num_services())
        .filter(|p| !mashup_services.contains(p))
        .map(|p| (p, cosine_similarity(semantic.service_vector(p), goal_vector)))
        .collect();
    if pool.is_empty() {
        return Err(Error::EmptyNegativePool);
    }
    let count = negative_count(pool.len(), ratio);
    pool.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(pool.into_iter().take(count).map(|(p, _)| p).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceGradients {
    /// `∂L/∂W_h` for every `h` in ground truth ∪ negatives.
    pub out: Vec<(usize, Vec<f64>)>,
    /// `∂L/∂A`; `None` when attention is disabled or fewer than two
    /// services are selected (the gradient is identically zero then).
    pub attention: Option<Vec<f64>>,
    /// `∂L/∂X_k` for selected services followed by the goal row.
    pub aux: Vec<(usize, Vec<f64>)>,
}

fn labelled(instance: &TrainingInstance) -> impl Iterator<Item = (usize, f64)> + '_ {
    instance
        .ground_truth
        .iter()
        .map(|&h| (h, 1.0))
        .chain(instance.negatives.iter().map(|&h| (h, 0.0)))
}

fn objective_from_scores(params: &ModelParams, context: &[f64], instance: &TrainingInstance) -> f64 {
    labelled(instance)
        .map(|(h, label)| {
            let v = dot(context, params.out_column(h));
            let p = if label == 1.0 { sigmoid(v) } else { sigmoid(-v) };
            p.max(LOG_FLOOR).ln()
        })
        .sum()
}

pub fn instance_objective(params: &ModelParams, instance: &TrainingInstance, goal_vector: &[f64]) -> f64 {
    let fwd = params.forward(goal_vector, &instance.context);
    objective_from_scores(params, &fwd.context, instance)
}

/// Objective and analytic gradients at the current parameters.
///
/// With `g_h = l(h) − σ(v(h))` and `u = Σ_h g_h W_h = ∂L/∂E^C`:
///
/// ```text
/// ∂L/∂W_h    = g_h E^C
/// ∂L/∂X_goal = u
/// ∂L/∂Λ_k    = w_k (F_k − M)·u             M = Σ_j w_j F_j
/// ∂L/∂A      = Σ_k ∂L/∂Λ_k F_k
/// ∂L/∂X_k    = w_k u + ∂L/∂Λ_k A
/// ```
pub fn instance_gradients(
    params: &ModelParams,
    instance: &TrainingInstance,
    goal_vector: &[f64],
) -> (f64, InstanceGradients) {
    let d = params.dim();
    let fwd = params.forward(goal_vector, &instance.context);
    let objective = objective_from_scores(params, &fwd.context, instance);

    let mut upstream = vec![0.0; d];
    let mut out = Vec::with_capacity(instance.ground_truth.len() + instance.negatives.len());
    for (h, label) in labelled(instance) {
        let column = params.out_column(h);
        let g = label - sigmoid(dot(&fwd.context, column));
        axpy(g, column, &mut upstream);
        out.push((h, fwd.context.iter().map(|c| g * c).collect()));
    }

    let use_attention = params.attention_enabled() && instance.context.len() >= 2;
    let mut aux = Vec::with_capacity(instance.context.len() + 1);
    let mut attention = use_attention.then(|| vec![0.0; d]);
    for (i, &k) in instance.context.iter().enumerate() {
        let w = fwd.weights[i];
        let mut grad: Vec<f64> = upstream.iter().map(|u| w * u).collect();
        if let Some(grad_a) = attention.as_mut() {
            let centred: Vec<f64> = fwd.fused[i].iter().zip(&fwd.weighted_mean).map(|(f, m)| f - m).collect();
            let d_logit = w * dot(&centred, &upstream);
            axpy(d_logit, &fwd.fused[i], grad_a);
            axpy(d_logit, params.attention_vector(), &mut grad);
        }
        aux.push((k, grad));
    }
    aux.push((params.goal_row(), upstream));

    (objective, InstanceGradients { out, attention, aux })
}

/// One synchronous ascent step: gradients from the pre-update parameters,
/// then `θ ← θ + η ∂L/∂θ`. Returns the pre-update objective.
pub fn train_step(
    params: &mut ModelParams,
    instance: &TrainingInstance,
    goal_vector: &[f64],
    learning_rate: f64,
) -> f64 {
    let (objective, grads) = instance_gradients(params, instance, goal_vector);
    for (h, g) in &grads.out {
        axpy(learning_rate, g, params.out_column_mut(*h));
    }
    if let Some(g) = &grads.attention {
        axpy(learning_rate, g, params.attention_vector_mut());
    }
    for (k, g) in &grads.aux {
        axpy(learning_rate, g, params.aux_row_mut(*k));
    }
    objective
}

struct PreparedMashup<'a> {
    mashup: &'a Mashup,
    goal: Vec<f64>,
    negatives: Vec<usize>,
}

/// Learns the auxiliary matrix, attention vector and output weights over
/// `train_set`. Stops when the relative change of the epoch objective drops
/// below `convergence_epsilon` or after `max_epochs`.
pub fn train(
    train_set: &[Mashup],
    semantic: Arc<SemanticSpace>,
    hp: &Hyperparams,
) -> Result<(ModelParams, TrainingReport)> {
    if train_set.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    let started = Instant::now();
    let mut params = init_params(Arc::clone(&semantic), hp)?;

    // Goal vectors and negatives depend only on the frozen semantic space.
    let prepared: Vec<PreparedMashup> = train_set
        .iter()
        .map(|m| {
            let goal = semantic.goal_vector(m);
            let negatives = sample_negatives(&semantic, &goal, &m.services, hp.negative_ratio)?;
            Ok(PreparedMashup { mashup: m, goal, negatives })
        })
        .collect::<Result<_>>()?;
    let loo: Vec<Vec<TrainingInstance>> = prepared
        .iter()
        .map(|p| with_negatives(expand_leave_one_out(p.mashup), &p.negatives))
        .collect();

    let mut rng = seed::rng(hp.seed, "train/order");
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut epochs = Vec::new();
    let mut converged = false;
    let mut instances_per_epoch = 0;
    for epoch in 0..hp.max_epochs {
        let t0 = Instant::now();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut count = 0;
        for &i in &order {
            let p = &prepared[i];
            let incremental;
            let instances: &[TrainingInstance] = match hp.expansion {
                ExpansionMode::LeaveOneOut => &loo[i],
                ExpansionMode::Incremental => {
                    incremental = with_negatives(expand_incremental_with(p.mashup, &mut rng), &p.negatives);
                    &incremental
                }
            };
            for inst in instances {
                let l = train_step(&mut params, inst, &p.goal, hp.learning_rate);
                if !l.is_finite() {
                    return Err(Error::NonFiniteObjective {
                        mashup: inst.mashup_id.clone(),
                        step: inst.step,
                    });
                }
                total += l;
                count += 1;
            }
        }
        instances_per_epoch = count;
        debug!("epoch {epoch}: L = {total:.6}");
        epochs.push(EpochRecord {
            epoch,
            objective: total,
            seconds: t0.elapsed().as_secs_f64(),
        });
        if let [.., prev, last] = epochs.as_slice() {
            let rel = (last.objective - prev.objective).abs() / prev.objective.abs().max(f64::MIN_POSITIVE);
            if rel < hp.convergence_epsilon {
                converged = true;
                break;
            }
        }
    }
    info!(
        "trained {} epochs ({}converged), final L = {:.4}",
        epochs.len(),
        if converged { "" } else { "not " },
        epochs.last().map_or(0.0, |e| e.objective)
    );
    let report = TrainingReport {
        epochs,
        converged,
        attention_enabled: hp.attention_enabled,
        expansion: hp.expansion,
        instances_per_epoch,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((params, report))
}

fn with_negatives(mut instances: Vec<TrainingInstance>, negatives: &[usize]) -> Vec<TrainingInstance> {
    for inst in &mut instances {
        inst.negatives = negatives.to_vec();
    }
    instances
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::PvdmConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space_from(vectors: Vec<f64>, dim: usize) -> Arc<SemanticSpace> {
        let n = vectors.len() / dim;
        Arc::new(
            SemanticSpace::from_parts(dim, (0..n).map(|i| format!("s{i}")).collect(), vectors, None, PvdmConfig::default())
                .unwrap(),
        )
    }

    fn instance(context: Vec<usize>, truth: Vec<usize>, negatives: Vec<usize>) -> TrainingInstance {
        TrainingInstance {
            mashup_id: "m".into(),
            step: 0,
            context,
            ground_truth: truth,
            negatives,
        }
    }

    #[test]
    fn init_shapes_seed_and_zero_scale() {
        let sem = space_from(vec![0.5; 5 * 4], 4);
        let hp = Hyperparams { dim: 4, seed: 3, ..Default::default() };
        let a = init_params(Arc::clone(&sem), &hp).unwrap();
        let b = init_params(Arc::clone(&sem), &hp).unwrap();
        assert_eq!(a.aux_matrix().len(), 6 * 4);
        assert_eq!(a.attention_vector().len(), 4);
        assert_eq!(a.out_matrix().len(), 4 * 5);
        assert_eq!(a.aux_matrix(), b.aux_matrix());
        assert_eq!(a.out_matrix(), b.out_matrix());
        assert!(a.aux_matrix().iter().all(|x| x.abs() <= 0.1));

        let z = init_params(Arc::clone(&sem), &Hyperparams { init_scale: 0.0, ..hp.clone() }).unwrap();
        assert!(z.aux_matrix().iter().chain(z.attention_vector()).chain(z.out_matrix()).all(|&x| x == 0.0));

        assert!(init_params(sem, &Hyperparams { dim: 3, ..hp }).is_err());
    }

    #[test]
    fn negatives_hand_example() {
        // pool of 4 with cosine (0.9, 0.1, 0.5, -0.2) to goal = e1 → positions 3 then 1
        let sim = [0.9f64, 0.1, 0.5, -0.2];
        let mut vecs = Vec::new();
        for s in sim {
            vecs.extend([s, (1.0 - s * s).sqrt()]);
        }
        vecs.extend([1.0, 0.0]); // position 4 belongs to the mashup
        let sem = space_from(vecs, 2);
        let neg = sample_negatives(&sem, &[1.0, 0.0], &[4], 0.5).unwrap();
        assert_eq!(neg, vec![3, 1]);
    }

    #[test]
    fn negative_counts() {
        assert_eq!(negative_count(660, 0.2), 132);
        assert_eq!(negative_count(3, 0.2), 1);
        assert_eq!(negative_count(10, 1.0), 10);
        let sem = space_from(vec![1.0; 3], 1);
        assert!(matches!(sample_negatives(&sem, &[1.0], &[0, 1, 2], 0.2), Err(Error::EmptyNegativePool)));
    }

    #[test]
    fn objective_at_zero_scores() {
        let sem = space_from(vec![0.3; 5 * 3], 3);
        let params = ModelParams::zeros(sem, true);
        let inst = instance(vec![0, 1], vec![2], vec![3, 4]);
        let l = instance_objective(&params, &inst, &[1.0, 2.0, 3.0]);
        assert!((l - 3.0 * 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn objective_approaches_zero_for_confident_truth() {
        let sem = space_from(vec![0.0; 2], 1);
        let mut params = ModelParams::zeros(sem, true);
        params.out_matrix_mut()[0] = 50.0;
        let l = instance_objective(&params, &instance(vec![], vec![0], vec![]), &[1.0]);
        assert!(l <= 0.0 && l > -1e-20);
    }

    #[test]
    fn gradients_vanish_at_saturation() {
        // σ(v) == l(h) exactly in f64 once |v| is large enough.
        let sem = space_from(vec![0.0; 3], 1);
        let mut params = ModelParams::zeros(sem, true);
        params.out_matrix_mut().copy_from_slice(&[1000.0, -1000.0, 0.0]);
        let (_, g) = instance_gradients(&params, &instance(vec![2], vec![0], vec![1]), &[1.0]);
        assert!(g.out.iter().all(|(_, v)| v.iter().all(|&x| x == 0.0)));
        assert!(g.aux.iter().all(|(_, v)| v.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn singleton_context_has_no_attention_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sem = space_from((0..5 * 4).map(|_| rng.gen_range(-1.0..1.0)).collect(), 4);
        let params = init_params(sem, &Hyperparams { dim: 4, init_scale: 0.5, seed: 1, ..Default::default() }).unwrap();
        let inst = instance(vec![1], vec![2], vec![0, 4]);
        let goal = [0.1, 0.2, -0.3, 0.4];
        let (_, g) = instance_gradients(&params, &inst, &goal);
        assert!(g.attention.is_none());
        // X gradient of the single service equals Σ g_h W_h
        let fwd = params.forward(&goal, &inst.context);
        let mut expected = vec![0.0; 4];
        for (h, label) in [(2, 1.0), (0, 0.0), (4, 0.0)] {
            let gh = label - sigmoid(dot(&fwd.context, params.out_column(h)));
            axpy(gh, params.out_column(h), &mut expected);
        }
        assert_eq!(g.aux[0].0, 1);
        for (a, b) in g.aux[0].1.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sem = space_from((0..6 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect(), 3);
        let mut params = init_params(sem, &Hyperparams { dim: 3, seed: 4, ..Default::default() }).unwrap();
        let before = params.clone();
        for _ in 0..5 {
            train_step(&mut params, &instance(vec![0, 1], vec![2], vec![4, 5]), &[0.2, 0.1, 0.0], 0.0);
        }
        assert_eq!(params.aux_matrix(), before.aux_matrix());
        assert_eq!(params.attention_vector(), before.attention_vector());
        assert_eq!(params.out_matrix(), before.out_matrix());
    }

    #[test]
    fn hyperparam_validation() {
        assert!(Hyperparams::default().validate().is_ok());
        assert!(Hyperparams { negative_ratio: 0.0, ..Default::default() }.validate().is_err());
        assert!(Hyperparams { negative_ratio: 1.5, ..Default::default() }.validate().is_err());
        assert!(Hyperparams { max_epochs: 0, ..Default::default() }.validate().is_err());
        assert!(Hyperparams { learning_rate: -1.0, ..Default::default() }.validate().is_err());
    }
}
