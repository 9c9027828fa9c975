//! Distributed-memory paragraph vectors (PV-DM) with negative sampling.
//!
//! For every token position the paragraph vector and the surrounding window
//! words are averaged into a hidden vector `h`, which predicts the centre
//! word against `inner_negatives` noise words drawn from the unigram^0.75
//! distribution. The error signal is applied to the paragraph vector and to
//! every window word, as in word2vec CBOW.

use std::collections::HashMap;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PvdmConfig, SemanticSpace};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, sigmoid};
use crate::seed;
use crate::text::normalize_text;

/// Vocabulary plus the word-level PV-DM weights needed to infer vectors for
/// unseen text.
#[derive(Debug, Clone)]
pub struct Lexicon {
    dim: usize,
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    /// `V × d` input word vectors.
    word_vectors: Vec<f64>,
    /// `V × d` output (prediction) vectors.
    output_vectors: Vec<f64>,
    /// Cumulative unigram^0.75 weights, normalized to end at 1.
    noise_cdf: Vec<f64>,
}

impl Lexicon {
    pub fn from_parts(
        dim: usize,
        words: Vec<String>,
        counts: Vec<u64>,
        word_vectors: Vec<f64>,
        output_vectors: Vec<f64>,
    ) -> Result<Self> {
        let v = words.len();
        if counts.len() != v {
            return Err(Error::DimensionMismatch {
                expected: v,
                actual: counts.len(),
            });
        }
        for m in [&word_vectors, &output_vectors] {
            if m.len() != v * dim {
                return Err(Error::DimensionMismatch {
                    expected: v * dim,
                    actual: m.len(),
                });
            }
        }
        if v == 0 {
            return Err(Error::EmptyVocabulary);
        }
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let noise_cdf = noise_cdf(&counts);
        Ok(Self {
            dim,
            words,
            counts,
            index,
            word_vectors,
            output_vectors,
            noise_cdf,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn word_vectors(&self) -> &[f64] {
        &self.word_vectors
    }

    pub fn output_vectors(&self) -> &[f64] {
        &self.output_vectors
    }

    pub fn word_vector(&self, word: &str) -> Option<&[f64]> {
        let i = *self.index.get(word)?;
        Some(&self.word_vectors[i * self.dim..(i + 1) * self.dim])
    }

    fn encode(&self, text: &str) -> Vec<usize> {
        normalize_text(text)
            .iter()
            .filter_map(|t| self.index.get(t.as_str()).copied())
            .collect()
    }

    fn sample_noise(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.gen();
        self.noise_cdf.partition_point(|&c| c <= u).min(self.words.len() - 1)
    }

    /// Gradient-descends a fresh paragraph vector for `text`, all word-level
    /// weights frozen.
    pub fn infer(&self, text: &str, steps: usize, config: &PvdmConfig, seed: u64) -> Vec<f64> {
        let tokens = self.encode(text);
        if tokens.is_empty() {
            if !text.trim().is_empty() {
                warn!("goal text has no in-vocabulary tokens; using the zero vector");
            }
            return vec![0.0; self.dim];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut paragraph = init_vector(self.dim, &mut rng);
        let mut frozen = Frozen(self);
        for step in 0..steps {
            let lr = schedule(config, step, steps);
            document_pass(&mut frozen, &mut paragraph, &tokens, config, lr, &mut rng);
        }
        paragraph
    }
}

/// Weight access for one PV-DM pass: training writes word and output
/// vectors back, inference leaves them untouched.
trait PassWeights {
    fn lexicon(&self) -> &Lexicon;
    fn update_output(&mut self, word: usize, g: f64, hidden: &[f64]);
    fn update_word(&mut self, word: usize, error: &[f64]);
}

struct Learnable<'a>(&'a mut Lexicon);
struct Frozen<'a>(&'a Lexicon);

impl PassWeights for Learnable<'_> {
    fn lexicon(&self) -> &Lexicon {
        self.0
    }

    fn update_output(&mut self, word: usize, g: f64, hidden: &[f64]) {
        let d = self.0.dim;
        axpy(g, hidden, &mut self.0.output_vectors[word * d..(word + 1) * d]);
    }

    fn update_word(&mut self, word: usize, error: &[f64]) {
        let d = self.0.dim;
        axpy(1.0, error, &mut self.0.word_vectors[word * d..(word + 1) * d]);
    }
}

impl PassWeights for Frozen<'_> {
    fn lexicon(&self) -> &Lexicon {
        self.0
    }

    fn update_output(&mut self, _: usize, _: f64, _: &[f64]) {}

    fn update_word(&mut self, _: usize, _: &[f64]) {}
}

/// One pass over `tokens`, always updating `paragraph`.
fn document_pass<W: PassWeights>(
    weights: &mut W,
    paragraph: &mut [f64],
    tokens: &[usize],
    config: &PvdmConfig,
    lr: f64,
    rng: &mut ChaCha8Rng,
) {
    let d = weights.lexicon().dim;
    let window = config.window;
    let mut hidden = vec![0.0; d];
    let mut error = vec![0.0; d];
    for (pos, &center) in tokens.iter().enumerate() {
        let lo = pos.saturating_sub(window);
        let hi = (pos + window + 1).min(tokens.len());
        let neighbours = || (lo..hi).filter(move |&j| j != pos).map(|j| tokens[j]);

        let lex = weights.lexicon();
        hidden.copy_from_slice(paragraph);
        let mut count = 1usize;
        for w in neighbours() {
            axpy(1.0, &lex.word_vectors[w * d..(w + 1) * d], &mut hidden);
            count += 1;
        }
        let inv = 1.0 / count as f64;
        hidden.iter_mut().for_each(|h| *h *= inv);
        error.iter_mut().for_each(|e| *e = 0.0);

        for k in 0..=config.inner_negatives {
            let (target, label) = if k == 0 {
                (center, 1.0)
            } else {
                let t = weights.lexicon().sample_noise(rng);
                if t == center {
                    continue;
                }
                (t, 0.0)
            };
            let out = &weights.lexicon().output_vectors[target * d..(target + 1) * d];
            let g = lr * (label - sigmoid(dot(&hidden, out)));
            axpy(g, out, &mut error);
            weights.update_output(target, g, &hidden);
        }

        axpy(1.0, &error, paragraph);
        for w in neighbours() {
            weights.update_word(w, &error);
        }
    }
}

fn noise_cdf(counts: &[u64]) -> Vec<f64> {
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect()
}

fn init_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let bound = 0.5 / dim as f64;
    (0..dim).map(|_| rng.gen_range(-bound..bound)).collect()
}

/// Linear decay from the start to the end learning rate.
fn schedule(config: &PvdmConfig, done: usize, total: usize) -> f64 {
    let progress = if total <= 1 { 0.0 } else { done as f64 / (total - 1) as f64 };
    config.learning_rate_start + (config.learning_rate_end - config.learning_rate_start) * progress
}

/// Trains PV-DM over every service description and mashup goal of `corpus`
/// (one shared vocabulary) and returns the service rows as the semantic
/// matrix. Single-threaded and bit-reproducible under `config.seed`.
pub fn train_semantic(corpus: &Corpus, dim: usize, config: &PvdmConfig) -> Result<SemanticSpace> {
    config.validate()?;
    if dim == 0 {
        return Err(Error::InvalidConfig("dimension must be positive".into()));
    }
    let texts: Vec<Vec<String>> = corpus
        .services
        .iter()
        .map(|s| normalize_text(&s.description))
        .chain(corpus.mashups.iter().map(|m| normalize_text(&m.goal_text)))
        .collect();

    let mut order = Vec::new();
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for tok in texts.iter().flatten() {
        let c = counts.entry(tok.as_str()).or_insert(0);
        if *c == 0 {
            order.push(tok.as_str());
        }
        *c += 1;
    }
    let min = config.min_token_count.max(1) as u64;
    let words: Vec<String> = order
        .into_iter()
        .filter(|w| counts[w] >= min)
        .map(str::to_string)
        .collect();
    if words.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let word_counts: Vec<u64> = words.iter().map(|w| counts[w.as_str()]).collect();

    let mut rng = seed::rng(config.seed, "pvdm/train");
    let v = words.len();
    let word_vectors: Vec<f64> = (0..v).flat_map(|_| init_vector(dim, &mut rng)).collect();
    let mut lexicon = Lexicon::from_parts(dim, words, word_counts, word_vectors, vec![0.0; v * dim])?;

    let docs: Vec<Vec<usize>> = texts
        .iter()
        .map(|t| t.iter().filter_map(|w| lexicon.index.get(w.as_str()).copied()).collect())
        .collect();
    let mut paragraphs: Vec<Vec<f64>> = docs.iter().map(|_| init_vector(dim, &mut rng)).collect();

    for epoch in 0..config.epochs {
        let lr = schedule(config, epoch, config.epochs);
        for (doc, paragraph) in docs.iter().zip(paragraphs.iter_mut()) {
            if doc.is_empty() {
                continue;
            }
            document_pass(&mut Learnable(&mut lexicon), paragraph, doc, config, lr, &mut rng);
        }
        debug!("pvdm epoch {epoch} lr {lr:.5}");
    }

    let n = corpus.num_services();
    let service_vectors: Vec<f64> = paragraphs.into_iter().take(n).flatten().collect();
    SemanticSpace::from_parts(
        dim,
        corpus.services.iter().map(|s| s.id.clone()).collect(),
        service_vectors,
        Some(lexicon),
        config.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{MashupRecord, Service};
    use crate::semantic::cosine_similarity;

    const TOPICS: [&[&str]; 3] = [
        &["weather", "forecast", "rain", "temperature", "climate", "storm", "wind"],
        &["photo", "image", "camera", "gallery", "picture", "album", "lens"],
        &["payment", "invoice", "bank", "credit", "money", "billing", "wallet"],
    ];

    fn toy_corpus() -> Corpus {
        let mut services = Vec::new();
        for (t, words) in TOPICS.iter().enumerate() {
            for i in 0..4 {
                let desc: Vec<&str> = (0..5).map(|k| words[(i + k * 2) % words.len()]).collect();
                services.push(Service {
                    id: format!("t{t}s{i}"),
                    name: String::new(),
                    description: desc.join(" "),
                    submitted_at: None,
                });
            }
        }
        let mashups = (0..3)
            .map(|t| MashupRecord {
                id: format!("m{t}"),
                name: String::new(),
                description: TOPICS[t][..4].join(" "),
                service_ids: vec![format!("t{t}s0"), format!("t{t}s1")],
                submitted_at: None,
            })
            .collect();
        Corpus::new(services, mashups).unwrap()
    }

    fn config() -> PvdmConfig {
        PvdmConfig {
            epochs: 100,
            seed: 5,
            ..PvdmConfig::default()
        }
    }

    #[test]
    fn topics_cluster() {
        let corpus = toy_corpus();
        let space = train_semantic(&corpus, 16, &config()).unwrap();
        let topic = |p: usize| p / 4;
        let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0, 0.0, 0);
        for a in 0..12 {
            for b in (a + 1)..12 {
                let c = cosine_similarity(space.service_vector(a), space.service_vector(b));
                if topic(a) == topic(b) {
                    intra += c;
                    ni += 1;
                } else {
                    inter += c;
                    nx += 1;
                }
            }
        }
        let (intra, inter) = (intra / ni as f64, inter / nx as f64);
        assert!(intra > inter, "intra {intra} inter {inter}");
        for p in 0..12 {
            let v = space.service_vector(p);
            assert!((cosine_similarity(v, v) - 1.0).abs() < 1e-12);
            assert!(v.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = toy_corpus();
        let a = train_semantic(&corpus, 8, &config()).unwrap();
        let b = train_semantic(&corpus, 8, &config()).unwrap();
        assert_eq!(a.service_matrix(), b.service_matrix());
    }

    #[test]
    fn inferring_a_training_description_finds_its_service() {
        let corpus = toy_corpus();
        let space = train_semantic(&corpus, 16, &config()).unwrap();
        for target in [0usize, 5, 10] {
            let text = &corpus.services[target].description;
            let v = space.infer_goal_vector(text, 200);
            let best = (0..12)
                .max_by(|&a, &b| {
                    cosine_similarity(&v, space.service_vector(a))
                        .total_cmp(&cosine_similarity(&v, space.service_vector(b)))
                })
                .unwrap();
            assert_eq!(best / 4, target / 4, "service {target} inferred nearest {best}");
        }
    }

    #[test]
    fn inference_fallbacks_and_determinism() {
        let corpus = toy_corpus();
        let space = train_semantic(&corpus, 8, &config()).unwrap();
        assert_eq!(space.infer_goal_vector("", 50), vec![0.0; 8]);
        assert_eq!(space.infer_goal_vector("zzzz qqqq", 50), vec![0.0; 8]);
        let a = space.infer_goal_vector("rain forecast", 50);
        let b = space.infer_goal_vector("rain forecast", 50);
        assert_eq!(a, b);
        assert!(a.iter().any(|x| *x != 0.0));
    }

    #[test]
    fn empty_vocabulary_is_rejected() {
        let corpus = Corpus::new(Vec::new(), Vec::new()).unwrap();
        assert!(matches!(
            train_semantic(&corpus, 4, &PvdmConfig::default()),
            Err(Error::EmptyVocabulary)
        ));
    }
}
