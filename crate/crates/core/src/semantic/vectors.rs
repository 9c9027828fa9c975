//! word2vec-text vector files: a `<count> <d>` header followed by one
//! `<id> <c1> ... <cd>` line per item.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use super::{PvdmConfig, SemanticSpace};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Reads service vectors (and optional per-mashup goal vectors) from a
/// vector file. Every service in `corpus` must be present. Ids matching
/// neither a service nor a mashup are ignored with a warning.
pub fn import_vectors(path: &Path, corpus: &Corpus) -> Result<SemanticSpace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::VectorFormat("empty file".into()))?;
    let mut parts = header.split_whitespace();
    let parse_usize = |s: Option<&str>| -> Result<usize> {
        s.and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::VectorFormat(format!("bad header `{header}`")))
    };
    let count = parse_usize(parts.next())?;
    let dim = parse_usize(parts.next())?;
    if dim == 0 {
        return Err(Error::VectorFormat("dimension must be positive".into()));
    }

    let mut rows: HashMap<String, Vec<f64>> = HashMap::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let mut fields = line.split_whitespace();
        let id = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::VectorFormat(format!("line {}: {e}", i + 2)))?;
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::VectorFormat(format!("line {}: non-finite component", i + 2)));
        }
        rows.insert(id, values);
    }
    if rows.len() != count {
        warn!("vector header announces {count} rows, file has {}", rows.len());
    }

    let missing: Vec<String> = corpus
        .service_ids()
        .filter(|id| !rows.contains_key(*id))
        .map(str::to_string)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingVectors(missing));
    }
    let mut service_vectors = Vec::with_capacity(corpus.num_services() * dim);
    for id in corpus.service_ids() {
        service_vectors.extend_from_slice(&rows.remove(id).expect("checked above"));
    }
    let mut goals = HashMap::new();
    for m in &corpus.mashups {
        if let Some(v) = rows.remove(&m.id) {
            goals.insert(m.id.clone(), v);
        }
    }
    if !rows.is_empty() {
        warn!("{} vector rows match no service or mashup", rows.len());
    }
    Ok(SemanticSpace::from_parts(
        dim,
        corpus.service_ids().map(str::to_string).collect(),
        service_vectors,
        None,
        PvdmConfig::default(),
    )?
    .with_goal_vectors(goals))
}

/// Writes the service vectors of `space`, plus `extra` rows (for example
/// inferred goal vectors keyed by mashup id).
pub fn export_vectors(path: &Path, space: &SemanticSpace, extra: &[(String, Vec<f64>)]) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", space.num_services() + extra.len(), space.dim());
    let rows = space
        .service_ids()
        .iter()
        .enumerate()
        .map(|(p, id)| (id.as_str(), space.service_vector(p)))
        .chain(extra.iter().map(|(id, v)| (id.as_str(), v.as_slice())));
    for (id, v) in rows {
        out.push_str(id);
        for x in v {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
