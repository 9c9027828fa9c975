//! Planted-structure corpus generator.
//!
//! Services are split into groups with disjoint vocabularies. Each mashup
//! picks one group and draws its services from it, so co-occurrence and
//! text both carry the group signal. Groups can be bundled into domains:
//! goal text then names every group of the domain, leaving the selected
//! services to disambiguate. Optional noise services with generic text are
//! injected one per mashup.

use chrono::{Days, NaiveDate};
use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, MashupRecord, Service};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub services: usize,
    pub groups: usize,
    pub mashups: usize,
    pub per_mashup: usize,
    pub seed: u64,
    pub groups_per_domain: usize,
    pub noise_services: usize,
    /// Tokens in each group's vocabulary.
    pub vocab_per_group: usize,
    /// Group tokens per service description.
    pub words_per_service: usize,
    /// Group tokens contributed to each goal.
    pub goal_words_per_group: usize,
    pub dated: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            services: 60,
            groups: 12,
            mashups: 300,
            per_mashup: 3,
            seed: 0,
            groups_per_domain: 1,
            noise_services: 0,
            vocab_per_group: 8,
            words_per_service: 4,
            goal_words_per_group: 4,
            dated: false,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.groups == 0 || self.services < self.groups {
            return bad(format!("need 1 ≤ groups ≤ services (got {} groups, {} services)", self.groups, self.services));
        }
        if self.mashups == 0 {
            return bad("mashups must be positive".into());
        }
        let smallest = self.services / self.groups;
        if self.per_mashup < 2 || self.per_mashup > smallest {
            return bad(format!(
                "per-mashup must be in 2..={smallest} (smallest group has {smallest} services)"
            ));
        }
        if self.groups_per_domain == 0 || self.groups_per_domain > self.groups {
            return bad("groups-per-domain must be in 1..=groups".into());
        }
        if self.vocab_per_group == 0 || self.words_per_service == 0 || self.words_per_service > self.vocab_per_group {
            return bad("need 1 ≤ words-per-service ≤ vocab-per-group".into());
        }
        if self.goal_words_per_group == 0 || self.goal_words_per_group > self.vocab_per_group {
            return bad("need 1 ≤ goal-words-per-group ≤ vocab-per-group".into());
        }
        Ok(())
    }

    pub fn group_of(&self, service: usize) -> usize {
        service % self.groups
    }

    pub fn domain_of(&self, group: usize) -> usize {
        group / self.groups_per_domain
    }
}

/// Token `j` of group `g`; plain letters and digits so normalization keeps
/// it intact.
pub fn group_token(g: usize, j: usize) -> String {
    format!("g{g}t{j}")
}

fn noise_token(j: usize) -> String {
    format!("zq{j}")
}

const NOISE_VOCAB: usize = 12;

fn base_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2010, 1, 1).expect("valid date")
}

pub fn generate(config: &SyntheticConfig) -> Result<(Vec<Service>, Vec<MashupRecord>)> {
    config.validate()?;
    let mut rng = seed::rng(config.seed, "synthetic");
    let date = |days: usize| config.dated.then(|| base_date() + Days::new(days as u64));

    let mut services = Vec::with_capacity(config.services + config.noise_services);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); config.groups];
    for i in 0..config.services {
        let g = config.group_of(i);
        members[g].push(i);
        let mut words = vec![group_token(g, 0)];
        words.extend((1..config.vocab_per_group).choose_multiple(&mut rng, config.words_per_service - 1).into_iter().map(|j| group_token(g, j)));
        words.shuffle(&mut rng);
        services.push(Service {
            id: format!("svc{i:03}"),
            name: format!("Service {i}"),
            description: words.join(" "),
            submitted_at: date(i),
        });
    }
    for j in 0..config.noise_services {
        let words: Vec<String> = (0..NOISE_VOCAB).choose_multiple(&mut rng, 4).into_iter().map(noise_token).collect();
        services.push(Service {
            id: format!("noise{j:03}"),
            name: format!("Utility {j}"),
            description: words.join(" "),
            submitted_at: date(config.services + j),
        });
    }

    let last_service_day = services.len();
    let mut mashups = Vec::with_capacity(config.mashups);
    for m in 0..config.mashups {
        let g = rng.gen_range(0..config.groups);
        let mut ids: Vec<String> = members[g]
            .choose_multiple(&mut rng, config.per_mashup)
            .map(|&i| services[i].id.clone())
            .collect();
        if config.noise_services > 0 {
            let j = rng.gen_range(0..config.noise_services);
            let at = rng.gen_range(0..=ids.len());
            ids.insert(at, services[config.services + j].id.clone());
        }
        let domain = config.domain_of(g);
        let mut words: Vec<String> = (0..config.groups)
            .filter(|&h| config.domain_of(h) == domain)
            .flat_map(|h| (0..config.goal_words_per_group).map(move |j| group_token(h, j)))
            .collect();
        words.shuffle(&mut rng);
        let offset = rng.gen_range(0..30);
        mashups.push(MashupRecord {
            id: format!("mash{m:04}"),
            name: format!("Mashup {m}"),
            description: words.join(" "),
            service_ids: ids,
            submitted_at: date(last_service_day + offset),
        });
    }
    Ok((services, mashups))
}

pub fn generate_corpus(config: &SyntheticConfig) -> Result<Corpus> {
    let (services, mashups) = generate(config)?;
    Corpus::new(services, mashups)
}

pub fn write_synthetic(dir: &std::path::Path, config: &SyntheticConfig) -> Result<()> {
    let (services, mashups) = generate(config)?;
    crate::corpus::write_jsonl(dir, &services, &mashups)
}
