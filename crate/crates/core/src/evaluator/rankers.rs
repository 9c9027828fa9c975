//! Ranking back-ends for the evaluation harness: the trained model plus
//! popularity and uniform-random reference scorers.

use std::collections::HashSet;

use rand::seq::SliceRandom;

use crate::corpus::Mashup;
use crate::error::Result;
use crate::model::{ComposerContext, ModelParams};
use crate::seed;

/// Something that orders candidate services for a partially built mashup.
pub trait Ranker {
    /// Per-mashup state computed once (e.g. the inferred goal vector).
    type Goal;

    fn prepare(&self, mashup: &Mashup) -> Self::Goal;

    /// `candidates` minus `selected`, most preferred first.
    fn rank(&self, goal: &Self::Goal, selected: &[usize], candidates: &[usize]) -> Result<Vec<usize>>;
}

impl Ranker for ModelParams {
    type Goal = Vec<f64>;

    fn prepare(&self, mashup: &Mashup) -> Vec<f64> {
        self.semantic().goal_vector(mashup)
    }

    fn rank(&self, goal: &Vec<f64>, selected: &[usize], candidates: &[usize]) -> Result<Vec<usize>> {
        let ctx = ComposerContext::new(goal.clone(), selected.to_vec());
        Ok(self.rank_candidates(&ctx, candidates)?.into_iter().map(|(p, _)| p).collect())
    }
}

fn unselected<'a>(selected: &'a [usize], candidates: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
    let mut seen = HashSet::new();
    candidates
        .iter()
        .copied()
        .filter(move |c| !selected.contains(c) && seen.insert(*c))
}

/// Ranks by how many training mashups use each service.
#[derive(Debug, Clone)]
pub struct PopularityRanker {
    counts: Vec<usize>,
}

impl PopularityRanker {
    pub fn fit(num_services: usize, train: &[Mashup]) -> Self {
        let mut counts = vec![0; num_services];
        for m in train {
            for &s in &m.services {
                counts[s] += 1;
            }
        }
        Self { counts }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
}

impl Ranker for PopularityRanker {
    type Goal = ();

    fn prepare(&self, _: &Mashup) {}

    fn rank(&self, _: &(), selected: &[usize], candidates: &[usize]) -> Result<Vec<usize>> {
        let mut ranked: Vec<usize> = unselected(selected, candidates).collect();
        ranked.sort_by(|&a, &b| self.counts[b].cmp(&self.counts[a]).then(a.cmp(&b)));
        Ok(ranked)
    }
}

/// Uniformly random order, seeded per (mashup, selection) so evaluation
/// stays reproducible.
#[derive(Debug, Clone, Copy)]
pub struct RandomRanker {
    pub seed: u64,
}

impl Ranker for RandomRanker {
    type Goal = u64;

    fn prepare(&self, mashup: &Mashup) -> u64 {
        seed::mix(self.seed, seed::hash_str(&mashup.id))
    }

    fn rank(&self, goal: &u64, selected: &[usize], candidates: &[usize]) -> Result<Vec<usize>> {
        let tag = selected.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",");
        let mut rng = seed::rng(*goal, &tag);
        let mut ranked: Vec<usize> = unselected(selected, candidates).collect();
        ranked.shuffle(&mut rng);
        Ok(ranked)
    }
}

/// Diagnostic ranker that places the mashup's own unselected services
/// first. Only meaningful as an upper bound.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleRanker;

impl Ranker for OracleRanker {
    type Goal = Vec<usize>;

    fn prepare(&self, mashup: &Mashup) -> Vec<usize> {
        mashup.services.clone()
    }

    fn rank(&self, members: &Vec<usize>, selected: &[usize], candidates: &[usize]) -> Result<Vec<usize>> {
        let mut ranked: Vec<usize> = unselected(selected, candidates).collect();
        ranked.sort_by_key(|c| (!members.contains(c), *c));
        Ok(ranked)
    }
}
