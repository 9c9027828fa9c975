//! Leave-last-out and stepwise evaluation.

mod metrics;
mod rankers;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{expand_incremental, expand_leave_one_out, Corpus, Mashup, TrainingInstance};
use crate::error::{Error, Result};
use crate::seed;

pub use metrics::{mrr, rec_at_k};
pub use rankers::{OracleRanker, PopularityRanker, RandomRanker, Ranker};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub k_values: Vec<usize>,
    pub temporal_filter: bool,
    pub stepwise: bool,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k_values: vec![3, 5, 10, 20],
            temporal_filter: true,
            stepwise: false,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() || self.k_values[0] == 0 {
            return Err(Error::InvalidConfig("k values must be positive and non-empty".into()));
        }
        if self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("k values must be ascending and distinct".into()));
        }
        Ok(())
    }
}

/// Mean metrics over a set of instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub k_values: Vec<usize>,
    pub rec_at_k: Vec<f64>,
    pub mrr: f64,
    pub instances: usize,
}

impl MetricSummary {
    pub fn rec(&self, k: usize) -> Option<f64> {
        self.k_values.iter().position(|&x| x == k).map(|i| self.rec_at_k[i])
    }
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    rec: Vec<f64>,
    mrr: f64,
    n: usize,
}

impl Accumulator {
    fn new(ks: usize) -> Self {
        Self {
            rec: vec![0.0; ks],
            mrr: 0.0,
            n: 0,
        }
    }

    fn add(&mut self, ranking: &[usize], truth: &[usize], ks: &[usize]) -> Result<()> {
        for (acc, &k) in self.rec.iter_mut().zip(ks) {
            *acc += rec_at_k(ranking, truth, k)?;
        }
        self.mrr += mrr(ranking, truth)?;
        self.n += 1;
        Ok(())
    }

    fn summary(&self, ks: &[usize]) -> MetricSummary {
        let n = self.n.max(1) as f64;
        MetricSummary {
            k_values: ks.to_vec(),
            rec_at_k: self.rec.iter().map(|r| r / n).collect(),
            mrr: self.mrr / n,
            instances: self.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub metrics: MetricSummary,
}

/// Mashups with the same number of services, evaluated at every creation
/// step `t = 0..size-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCurve {
    pub size: usize,
    pub mashups: usize,
    pub steps: Vec<StepMetrics>,
}

impl GroupCurve {
    pub fn to_csv(&self) -> String {
        let ks = self.steps.first().map(|s| s.metrics.k_values.clone()).unwrap_or_default();
        let mut out = String::from("step,instances");
        for k in &ks {
            let _ = write!(out, ",rec@{k}");
        }
        out.push_str(",mrr\n");
        for s in &self.steps {
            let _ = write!(out, "{},{}", s.step, s.metrics.instances);
            for r in &s.metrics.rec_at_k {
                let _ = write!(out, ",{r:.6}");
            }
            let _ = writeln!(out, ",{:.6}", s.metrics.mrr);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: MetricSummary,
    pub skipped: usize,
    pub stepwise: Option<Vec<GroupCurve>>,
}

impl EvalReport {
    pub fn k_values(&self) -> &[usize] {
        &self.overall.k_values
    }

    pub fn rec(&self, k: usize) -> Option<f64> {
        self.overall.rec(k)
    }

    pub fn mrr(&self) -> f64 {
        self.overall.mrr
    }

    pub fn instances(&self) -> usize {
        self.overall.instances
    }

    pub fn table_header(&self) -> String {
        let mut out = format!("{:<12}", "Method");
        for k in self.k_values() {
            let _ = write!(out, " {:>8}", format!("REC@{k}"));
        }
        let _ = write!(out, " {:>8}", "MRR");
        out
    }

    pub fn table_row(&self, label: &str) -> String {
        let mut out = format!("{label:<12}");
        for r in &self.overall.rec_at_k {
            let _ = write!(out, " {r:>8.4}");
        }
        let _ = write!(out, " {:>8.4}", self.overall.mrr);
        out
    }

    /// One record per metric plus a summary line.
    pub fn to_jsonl(&self, label: &str) -> String {
        let mut out = String::new();
        for (k, r) in self.overall.k_values.iter().zip(&self.overall.rec_at_k) {
            let rec = serde_json::json!({ "method": label, "metric": format!("REC@{k}"), "value": r });
            let _ = writeln!(out, "{rec}");
        }
        let _ = writeln!(out, "{}", serde_json::json!({ "method": label, "metric": "MRR", "value": self.overall.mrr }));
        let _ = writeln!(
            out,
            "{}",
            serde_json::json!({ "method": label, "instances": self.overall.instances, "skipped": self.skipped })
        );
        out
    }
}

/// Services a mashup may be recommended: everything, minus services
/// submitted after the mashup when the temporal filter is on.
fn candidate_pool(corpus: &Corpus, mashup: &Mashup, temporal: bool) -> Vec<usize> {
    (0..corpus.num_services())
        .filter(|&p| {
            if !temporal {
                return true;
            }
            match (mashup.submitted_at, corpus.service(p).submitted_at) {
                (Some(m), Some(s)) => s <= m,
                _ => true,
            }
        })
        .collect()
}

fn check_temporal(corpus: &Corpus, config: &EvalConfig) -> bool {
    if config.temporal_filter && !corpus.has_timestamps() {
        warn!("temporal filter requested but the corpus carries no timestamps; filter disabled");
        return false;
    }
    config.temporal_filter
}

fn score_instances<R: Ranker>(
    ranker: &R,
    goal: &R::Goal,
    pool: &[usize],
    instances: &[TrainingInstance],
    ks: &[usize],
    acc: &mut Accumulator,
    skipped: &mut usize,
) {
    for inst in instances {
        let outcome = ranker
            .rank(goal, &inst.context, pool)
            .and_then(|ranking| acc.add(&ranking, &inst.ground_truth, ks));
        if let Err(e) = outcome {
            warn!("skipping mashup `{}` step {}: {e}", inst.mashup_id, inst.step);
            *skipped += 1;
        }
    }
}

/// Leave-last-out evaluation: every test mashup is expanded leave-one-out
/// and each instance ranks all unselected candidates.
pub fn evaluate<R: Ranker>(
    ranker: &R,
    corpus: &Corpus,
    test: &[Mashup],
    config: &EvalConfig,
) -> Result<EvalReport> {
    config.validate()?;
    let temporal = check_temporal(corpus, config);
    let ks = &config.k_values;
    let mut acc = Accumulator::new(ks.len());
    let mut skipped = 0;
    for m in test {
        let goal = ranker.prepare(m);
        let pool = candidate_pool(corpus, m, temporal);
        score_instances(ranker, &goal, &pool, &expand_leave_one_out(m), ks, &mut acc, &mut skipped);
    }
    let stepwise = if config.stepwise {
        Some(evaluate_stepwise(ranker, corpus, test, config)?)
    } else {
        None
    };
    Ok(EvalReport {
        overall: acc.summary(ks),
        skipped,
        stepwise,
    })
}

/// Groups test mashups by size and evaluates each creation step with
/// incrementally built contexts.
pub fn evaluate_stepwise<R: Ranker>(
    ranker: &R,
    corpus: &Corpus,
    test: &[Mashup],
    config: &EvalConfig,
) -> Result<Vec<GroupCurve>> {
    config.validate()?;
    let temporal = check_temporal(corpus, config);
    let ks = &config.k_values;
    let mut groups: BTreeMap<usize, Vec<&Mashup>> = BTreeMap::new();
    for m in test {
        groups.entry(m.services.len()).or_default().push(m);
    }
    let mut curves = Vec::with_capacity(groups.len());
    for (size, members) in groups {
        let mut per_step: Vec<Accumulator> = (0..size).map(|_| Accumulator::new(ks.len())).collect();
        let mut skipped = 0;
        for m in &members {
            let goal = ranker.prepare(m);
            let pool = candidate_pool(corpus, m, temporal);
            let steps = expand_incremental(m, seed::mix(config.seed, 0x5EED));
            for (t, inst) in steps.iter().enumerate() {
                score_instances(ranker, &goal, &pool, std::slice::from_ref(inst), ks, &mut per_step[t], &mut skipped);
            }
        }
        curves.push(GroupCurve {
            size,
            mashups: members.len(),
            steps: per_step
                .iter()
                .enumerate()
                .map(|(step, a)| StepMetrics {
                    step,
                    metrics: a.summary(ks),
                })
                .collect(),
        });
    }
    Ok(curves)
}

/// Relative improvement `(attention − uniform) / uniform` per metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationDelta {
    pub k_values: Vec<usize>,
    pub rec_at_k: Vec<f64>,
    pub mrr: f64,
}

fn relative(attention: f64, uniform: f64) -> f64 {
    if uniform == 0.0 {
        if attention == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (attention - uniform) / uniform
    }
}

pub fn compare_ablation(attention: &EvalReport, uniform: &EvalReport) -> Result<AblationDelta> {
    if attention.instances() != uniform.instances() {
        return Err(Error::IncomparableReports(format!(
            "{} vs {} instances",
            attention.instances(),
            uniform.instances()
        )));
    }
    if attention.k_values() != uniform.k_values() {
        return Err(Error::IncomparableReports("different k values".into()));
    }
    Ok(AblationDelta {
        k_values: attention.k_values().to_vec(),
        rec_at_k: attention
            .overall
            .rec_at_k
            .iter()
            .zip(&uniform.overall.rec_at_k)
            .map(|(a, u)| relative(*a, *u))
            .collect(),
        mrr: relative(attention.mrr(), uniform.mrr()),
    })
}
