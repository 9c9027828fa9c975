//! Service / mashup repository and instance expansion.
//!
//! A corpus lives in a directory with two line-delimited JSON files,
//! `services.jsonl` and `mashups.jsonl`. Services receive dense positions
//! `0..|S|` in file order; position `|S|` is the goal row shared by every
//! parameter matrix.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::{info, warn};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::text::normalize_text;

pub const SERVICES_FILE: &str = "services.jsonl";
pub const MASHUPS_FILE: &str = "mashups.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    /// `services.jsonl` + `mashups.jsonl` in one directory.
    #[default]
    JsonLines,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Service {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submitted_at: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mashup {
    pub id: String,
    pub name: String,
    pub goal_text: String,
    pub service_ids: Vec<String>,
    pub submitted_at: Option<NaiveDate>,
    /// Dense positions of `service_ids`, same order.
    pub services: Vec<usize>,
}

/// On-disk form of a mashup; `description` carries the goal text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MashupRecord {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub description: String,
    pub service_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submitted_at: Option<NaiveDate>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub services: Vec<Service>,
    pub mashups: Vec<Mashup>,
    index: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus from already-validated records. Mashups with fewer
    /// than two distinct known services are dropped.
    pub fn new(services: Vec<Service>, records: Vec<MashupRecord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(services.len());
        for (pos, s) in services.iter().enumerate() {
            if index.insert(s.id.clone(), pos).is_some() {
                return Err(Error::DuplicateId {
                    kind: "service",
                    id: s.id.clone(),
                });
            }
        }
        let mut seen = HashSet::new();
        let mut mashups = Vec::with_capacity(records.len());
        for rec in records {
            if !seen.insert(rec.id.clone()) {
                return Err(Error::DuplicateId {
                    kind: "mashup",
                    id: rec.id,
                });
            }
            let mut ids = Vec::with_capacity(rec.service_ids.len());
            let mut positions = Vec::with_capacity(rec.service_ids.len());
            for sid in rec.service_ids {
                let pos = *index.get(&sid).ok_or_else(|| Error::DanglingService {
                    mashup: rec.id.clone(),
                    service: sid.clone(),
                })?;
                if positions.contains(&pos) {
                    warn!("mashup `{}` lists service `{sid}` twice; keeping one", rec.id);
                    continue;
                }
                ids.push(sid);
                positions.push(pos);
            }
            if positions.len() < 2 {
                continue;
            }
            mashups.push(Mashup {
                id: rec.id,
                name: rec.name,
                goal_text: rec.description,
                service_ids: ids,
                submitted_at: rec.submitted_at,
                services: positions,
            });
        }
        Ok(Corpus {
            services,
            mashups,
            index,
        })
    }

    pub fn num_services(&self) -> usize {
        self.services.len()
    }

    /// Row index of the shared goal entry in the auxiliary matrix.
    pub fn goal_row(&self) -> usize {
        self.services.len()
    }

    pub fn position(&self, service_id: &str) -> Option<usize> {
        self.index.get(service_id).copied()
    }

    pub fn service(&self, position: usize) -> &Service {
        &self.services[position]
    }

    pub fn mashup(&self, id: &str) -> Option<&Mashup> {
        self.mashups.iter().find(|m| m.id == id)
    }

    pub fn service_ids(&self) -> impl Iterator<Item = &str> {
        self.services.iter().map(|s| s.id.as_str())
    }

    pub fn has_timestamps(&self) -> bool {
        self.services.iter().any(|s| s.submitted_at.is_some())
            && self.mashups.iter().any(|m| m.submitted_at.is_some())
    }

    pub fn mean_services_per_mashup(&self) -> f64 {
        if self.mashups.is_empty() {
            return 0.0;
        }
        let total: usize = self.mashups.iter().map(|m| m.services.len()).sum();
        total as f64 / self.mashups.len() as f64
    }

    /// Same service table, restricted to `mashups` (e.g. a training split).
    pub fn with_mashups(&self, mashups: &[Mashup]) -> Corpus {
        Corpus {
            services: self.services.clone(),
            mashups: mashups.to_vec(),
            index: self.index.clone(),
        }
    }

    /// Writes the corpus back out in the JSON-lines layout.
    pub fn write_jsonl(&self, dir: &Path) -> Result<()> {
        let records: Vec<MashupRecord> = self.mashups.iter().map(Mashup::to_record).collect();
        write_jsonl(dir, &self.services, &records)
    }
}

impl Mashup {
    pub fn to_record(&self) -> MashupRecord {
        MashupRecord {
            id: self.id.clone(),
            name: self.name.clone(),
            description: self.goal_text.clone(),
            service_ids: self.service_ids.clone(),
            submitted_at: self.submitted_at,
        }
    }
}

pub fn write_jsonl(dir: &Path, services: &[Service], mashups: &[MashupRecord]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_lines(&dir.join(SERVICES_FILE), services)?;
    write_lines(&dir.join(MASHUPS_FILE), mashups)
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.push(b'\n');
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            file: path.to_path_buf(),
            line: i + 1,
            record: record_id(&line),
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Best-effort id extraction so malformed-record errors can name the record.
fn record_id(line: &str) -> Option<String> {
    let value: serde_json::Value = serde_json::from_str(line).ok()?;
    value.get("id")?.as_str().map(str::to_string)
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let CorpusFormat::JsonLines = format;
    let dir: PathBuf = path.to_path_buf();
    let raw_services: Vec<Service> = read_lines(&dir.join(SERVICES_FILE))?;
    let raw_mashups: Vec<MashupRecord> = read_lines(&dir.join(MASHUPS_FILE))?;

    let mut rejected = HashSet::new();
    let mut services = Vec::with_capacity(raw_services.len());
    for s in raw_services {
        if normalize_text(&s.description).is_empty() {
            warn!("service `{}` has no usable description; rejected", s.id);
            rejected.insert(s.id);
        } else {
            services.push(s);
        }
    }
    let loaded = raw_mashups.len();
    let mashups = raw_mashups
        .into_iter()
        .map(|mut m| {
            m.service_ids.retain(|id| !rejected.contains(id));
            m
        })
        .collect();
    let corpus = Corpus::new(services, mashups)?;
    info!(
        "loaded {} services, {} mashups ({} dropped), {:.2} services/mashup",
        corpus.services.len(),
        corpus.mashups.len(),
        loaded - corpus.mashups.len(),
        corpus.mean_services_per_mashup()
    );
    Ok(corpus)
}

/// Seeded random partition into `⌊fraction·|M|⌋` training mashups and the
/// remainder for testing.
pub fn split_corpus(
    corpus: &Corpus,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<Mashup>, Vec<Mashup>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    let n = corpus.mashups.len();
    if n < 2 {
        return Err(Error::InvalidSplit(format!("need at least 2 mashups, have {n}")));
    }
    let n_train = (train_fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidSplit(format!(
            "fraction {train_fraction} of {n} mashups leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed, "split"));
    let pick = |idx: &[usize]| idx.iter().map(|&i| corpus.mashups[i].clone()).collect();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

/// One decision point of a mashup: the services chosen so far (the goal is
/// implicit), the services still to come, and the sampled negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingInstance {
    pub mashup_id: String,
    pub step: usize,
    pub context: Vec<usize>,
    pub ground_truth: Vec<usize>,
    pub negatives: Vec<usize>,
}

/// Leave-one-out: each service in turn is the ground truth, the rest form
/// the context. `step` is the index of the held-out service.
pub fn expand_leave_one_out(mashup: &Mashup) -> Vec<TrainingInstance> {
    (0..mashup.services.len())
        .map(|k| TrainingInstance {
            mashup_id: mashup.id.clone(),
            step: k,
            context: mashup
                .services
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, &s)| s)
                .collect(),
            ground_truth: vec![mashup.services[k]],
            negatives: Vec::new(),
        })
        .collect()
}

/// Incremental creation: step `t` has `t` selected services, each step adds
/// one service drawn uniformly from the previous step's ground truth.
pub fn expand_incremental(mashup: &Mashup, seed: u64) -> Vec<TrainingInstance> {
    let mut rng = seed::rng(seed, &format!("incremental/{}", mashup.id));
    expand_incremental_with(mashup, &mut rng)
}

pub(crate) fn expand_incremental_with<R: Rng>(mashup: &Mashup, rng: &mut R) -> Vec<TrainingInstance> {
    let mut context = Vec::with_capacity(mashup.services.len());
    let mut remaining = mashup.services.clone();
    let mut out = Vec::with_capacity(mashup.services.len());
    for t in 0..mashup.services.len() {
        if t > 0 {
            let pick = rng.gen_range(0..remaining.len());
            context.push(remaining.remove(pick));
        }
        out.push(TrainingInstance {
            mashup_id: mashup.id.clone(),
            step: t,
            context: context.clone(),
            ground_truth: remaining.clone(),
            negatives: Vec::new(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn svc(id: &str, desc: &str) -> Service {
        Service {
            id: id.into(),
            name: id.into(),
            description: desc.into(),
            submitted_at: None,
        }
    }

    fn rec(id: &str, services: &[&str]) -> MashupRecord {
        MashupRecord {
            id: id.into(),
            name: id.into(),
            description: format!("goal of {id}"),
            service_ids: services.iter().map(|s| s.to_string()).collect(),
            submitted_at: None,
        }
    }

    fn three_service_corpus() -> Corpus {
        Corpus::new(
            vec![svc("a", "maps api"), svc("b", "photo sharing"), svc("c", "weather data")],
            vec![rec("m1", &["a", "b", "c"]), rec("m2", &["a", "c"])],
        )
        .unwrap()
    }

    fn mashup_of(services: Vec<usize>) -> Mashup {
        Mashup {
            id: "m".into(),
            name: "m".into(),
            goal_text: "goal".into(),
            service_ids: services.iter().map(|s| s.to_string()).collect(),
            submitted_at: None,
            services,
        }
    }

    #[test]
    fn dense_positions_and_goal_row() {
        let c = three_service_corpus();
        let positions: Vec<_> = ["a", "b", "c"].iter().map(|id| c.position(id).unwrap()).collect();
        assert_eq!(positions, vec![0, 1, 2]);
        assert_eq!(c.goal_row(), 3);
        assert_eq!(c.mashups.len(), 2);
    }

    #[test]
    fn single_service_mashups_are_dropped() {
        let c = Corpus::new(vec![svc("a", "maps")], vec![rec("m", &["a"])]).unwrap();
        assert!(c.mashups.is_empty());
        // duplicates collapse before the size filter
        let c = Corpus::new(vec![svc("a", "maps")], vec![rec("m", &["a", "a"])]).unwrap();
        assert!(c.mashups.is_empty());
    }

    #[test]
    fn dangling_reference_is_an_error() {
        let err = Corpus::new(vec![svc("a", "maps")], vec![rec("m", &["a", "zzz"])]).unwrap_err();
        assert!(matches!(err, Error::DanglingService { ref service, .. } if service == "zzz"));
    }

    #[test]
    fn load_reports_line_and_id_of_bad_record() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join(SERVICES_FILE),
            "{\"id\":\"a\",\"description\":\"maps\"}\n{\"id\":\"b\",\"description\":7}\n",
        )
        .unwrap();
        std::fs::write(dir.path().join(MASHUPS_FILE), "").unwrap();
        let err = load_corpus(dir.path(), CorpusFormat::JsonLines).unwrap_err();
        match err {
            Error::MalformedRecord { line, record, .. } => {
                assert_eq!(line, 2);
                assert_eq!(record.as_deref(), Some("b"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_rejects_services_without_description() {
        let dir = tempfile::tempdir().unwrap();
        write_jsonl(
            dir.path(),
            &[svc("a", "maps"), svc("b", "the of and"), svc("c", "weather")],
            &[rec("m1", &["a", "b"]), rec("m2", &["a", "b", "c"])],
        )
        .unwrap();
        let c = load_corpus(dir.path(), CorpusFormat::JsonLines).unwrap();
        assert_eq!(c.num_services(), 2);
        assert_eq!(c.mashups.len(), 1);
        assert_eq!(c.mashups[0].service_ids, vec!["a", "c"]);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let services: Vec<_> = (0..4).map(|i| svc(&format!("s{i}"), "maps data")).collect();
        let records: Vec<_> = (0..1553).map(|i| rec(&format!("m{i}"), &["s0", "s1"])).collect();
        let c = Corpus::new(services, records).unwrap();
        let (train, test) = split_corpus(&c, 0.8, 3).unwrap();
        assert_eq!((train.len(), test.len()), (1242, 311));
        let (train2, _) = split_corpus(&c, 0.8, 3).unwrap();
        assert_eq!(train, train2);
        let ids: HashSet<_> = train.iter().map(|m| &m.id).collect();
        assert!(test.iter().all(|m| !ids.contains(&m.id)));
    }

    #[test]
    fn split_two_mashups_in_half() {
        let (train, test) = split_corpus(&three_service_corpus(), 0.5, 0).unwrap();
        assert_eq!((train.len(), test.len()), (1, 1));
    }

    #[test]
    fn split_rejects_bad_inputs() {
        let c = three_service_corpus();
        assert!(split_corpus(&c, 0.0, 0).is_err());
        assert!(split_corpus(&c, 1.0, 0).is_err());
        let single = Corpus::new(c.services.clone(), vec![rec("m", &["a", "b"])]).unwrap();
        assert!(split_corpus(&single, 0.5, 0).is_err());
    }

    #[test]
    fn different_seeds_give_different_partitions() {
        let services: Vec<_> = (0..2).map(|i| svc(&format!("s{i}"), "maps")).collect();
        let records: Vec<_> = (0..20).map(|i| rec(&format!("m{i}"), &["s0", "s1"])).collect();
        let c = Corpus::new(services, records).unwrap();
        let partitions: HashSet<Vec<String>> = (0..5)
            .map(|s| {
                let (mut train, _) = split_corpus(&c, 0.8, s).unwrap();
                train.sort_by(|a, b| a.id.cmp(&b.id));
                train.into_iter().map(|m| m.id).collect()
            })
            .collect();
        assert!(partitions.len() > 1);
    }

    #[test]
    fn leave_one_out_of_three() {
        let inst = expand_leave_one_out(&mashup_of(vec![0, 1, 2]));
        let pairs: Vec<_> = inst.iter().map(|i| (i.context.clone(), i.ground_truth.clone())).collect();
        assert_eq!(
            pairs,
            vec![(vec![1, 2], vec![0]), (vec![0, 2], vec![1]), (vec![0, 1], vec![2])]
        );
        let two = expand_leave_one_out(&mashup_of(vec![4, 7]));
        assert_eq!(two.len(), 2);
        assert!(two.iter().all(|i| i.context.len() == 1));
    }

    #[test]
    fn incremental_is_seeded() {
        let m = mashup_of(vec![0, 1, 2]);
        assert_eq!(expand_incremental(&m, 11), expand_incremental(&m, 11));
        let steps = expand_incremental(&m, 11);
        assert!(steps[0].context.is_empty());
        assert_eq!(steps[0].ground_truth, vec![0, 1, 2]);
    }

    proptest! {
        #[test]
        fn expansions_respect_set_identities(n in 2usize..9, seed in any::<u64>()) {
            let m = mashup_of((0..n).map(|i| i * 3).collect());
            let all: HashSet<usize> = m.services.iter().copied().collect();

            let loo = expand_leave_one_out(&m);
            prop_assert_eq!(loo.len(), n);
            let truths: HashSet<usize> = loo.iter().map(|i| i.ground_truth[0]).collect();
            prop_assert_eq!(&truths, &all);

            let inc = expand_incremental(&m, seed);
            prop_assert_eq!(inc.len(), n);
            for (t, inst) in inc.iter().enumerate() {
                prop_assert_eq!(inst.context.len(), t);
                prop_assert_eq!(inst.ground_truth.len(), n - t);
                let ctx: HashSet<usize> = inst.context.iter().copied().collect();
                let gt: HashSet<usize> = inst.ground_truth.iter().copied().collect();
                prop_assert!(ctx.is_disjoint(&gt));
                prop_assert_eq!(&ctx | &gt, all.clone());
                if t > 0 {
                    prop_assert_eq!(&inst.context[..t - 1], &inc[t - 1].context[..]);
                    prop_assert!(inc[t - 1].ground_truth.contains(&inst.context[t - 1]));
                }
            }
            for inst in loo {
                let ctx: HashSet<usize> = inst.context.iter().copied().collect();
                prop_assert!(!ctx.contains(&inst.ground_truth[0]));
            }
        }
    }
}
