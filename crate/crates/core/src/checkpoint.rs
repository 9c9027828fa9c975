//! Versioned binary checkpoint.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic "GOALREC\0" | version u32 | flags u32 | d u32 | |S| u32
//! pvdm config: u32 length + JSON bytes
//! service ids: |S| × (u32 length + UTF-8)
//! E^S  |S| × d       f32 row-major
//! E^X  (|S|+1) × d   f32 row-major, last row is the goal offset
//! A    d             f32
//! E^W  d × |S|       f32 row-major
//! [flags & LEXICON]  V u32, V × (u32 length + UTF-8), V × u64 counts,
//!                    word vectors V × d f32, output vectors V × d f32
//! [flags & GOALS]    G u32, G × (u32 length + UTF-8 mashup id, d × f32)
//! ```

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::semantic::{Lexicon, PvdmConfig, SemanticSpace};

const MAGIC: &[u8; 8] = b"GOALREC\0";
const VERSION: u32 = 1;
const FLAG_ATTENTION: u32 = 1;
const FLAG_LEXICON: u32 = 1 << 1;
const FLAG_GOALS: u32 = 1 << 2;

/// A loaded model plus the SHA-256 of the bytes it was read from.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub hash: String,
}

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("value {v} exceeds u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_str(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    put_u32(buf, s.len())?;
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

fn put_floats(buf: &mut Vec<u8>, xs: &[f64]) {
    for &x in xs {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
}

/// Serializes `params` to checkpoint bytes.
pub fn encode(params: &ModelParams) -> Result<Vec<u8>> {
    let sem = params.semantic();
    let (d, n) = (params.dim(), params.num_services());
    let lexicon = sem.lexicon();
    let goals = sem.imported_goals();
    let mut flags = 0;
    if params.attention_enabled() {
        flags |= FLAG_ATTENTION;
    }
    if lexicon.is_some() {
        flags |= FLAG_LEXICON;
    }
    if !goals.is_empty() {
        flags |= FLAG_GOALS;
    }

    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&flags.to_le_bytes());
    put_u32(&mut buf, d)?;
    put_u32(&mut buf, n)?;
    put_str(&mut buf, &serde_json::to_string(sem.config())?)?;
    for id in sem.service_ids() {
        put_str(&mut buf, id)?;
    }
    put_floats(&mut buf, sem.service_matrix());
    put_floats(&mut buf, params.aux_matrix());
    put_floats(&mut buf, params.attention_vector());
    // stored column-per-service in memory; written row-per-dimension
    let out = params.out_matrix();
    for i in 0..d {
        for s in 0..n {
            buf.extend_from_slice(&(out[s * d + i] as f32).to_le_bytes());
        }
    }
    if let Some(lex) = lexicon {
        put_u32(&mut buf, lex.len())?;
        for w in lex.words() {
            put_str(&mut buf, w)?;
        }
        for &c in lex.counts() {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        put_floats(&mut buf, lex.word_vectors());
        put_floats(&mut buf, lex.output_vectors());
    }
    if !goals.is_empty() {
        let mut ids: Vec<&String> = goals.keys().collect();
        ids.sort();
        put_u32(&mut buf, ids.len())?;
        for id in ids {
            put_str(&mut buf, id)?;
            put_floats(&mut buf, &goals[id]);
        }
    }
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated at byte {} (wanted {n} more)", self.at))
        })?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Checkpoint(format!("invalid UTF-8: {e}")))
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::Checkpoint("matrix too large".into()))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect())
    }
}

/// Parses checkpoint bytes back into model parameters.
pub fn decode(bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(MAGIC.len()).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}, expected {VERSION}")));
    }
    let flags = r.u32()?;
    let d = r.len()?;
    let n = r.len()?;
    let config: PvdmConfig = serde_json::from_str(&r.string()?)?;
    let ids = (0..n).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
    let service_vectors = r.floats(n * d)?;
    let aux = r.floats((n + 1) * d)?;
    let attention = r.floats(d)?;
    let rows = r.floats(d * n)?;
    let mut out = vec![0.0; n * d];
    for i in 0..d {
        for s in 0..n {
            out[s * d + i] = rows[i * n + s];
        }
    }
    let lexicon = if flags & FLAG_LEXICON != 0 {
        let v = r.len()?;
        let words = (0..v).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        let counts = (0..v).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let wv = r.floats(v * d)?;
        let ov = r.floats(v * d)?;
        Some(Lexicon::from_parts(d, words, counts, wv, ov)?)
    } else {
        None
    };
    let mut goals = HashMap::new();
    if flags & FLAG_GOALS != 0 {
        for _ in 0..r.len()? {
            let id = r.string()?;
            goals.insert(id, r.floats(d)?);
        }
    }
    if r.at != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.at)));
    }
    let semantic = SemanticSpace::from_parts(d, ids, service_vectors, lexicon, config)?.with_goal_vectors(goals);
    ModelParams::new(Arc::new(semantic), aux, attention, out, flags & FLAG_ATTENTION != 0)
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the checkpoint and returns its SHA-256 (hex).
pub fn save_checkpoint(path: &Path, params: &ModelParams) -> Result<String> {
    let bytes = encode(params)?;
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(hash_bytes(&bytes))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let params = decode(&bytes)?;
    Ok(Checkpoint {
        params,
        hash: hash_bytes(&bytes),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_params(with_lexicon: bool) -> ModelParams {
        let mut rng = crate::seed::rng(3, "ckpt");
        let (d, n) = (4, 3);
        let mut v = |len: usize| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let lex = with_lexicon.then(|| {
            Lexicon::from_parts(d, vec!["map".into(), "photo".into()], vec![3, 1], v(2 * d), v(2 * d)).unwrap()
        });
        let ids = vec!["a".into(), "b".into(), "c".into()];
        let sem = SemanticSpace::from_parts(d, ids, v(n * d), lex, PvdmConfig::default()).unwrap();
        let sem = if with_lexicon {
            sem
        } else {
            sem.with_goal_vectors(HashMap::from([("m1".to_string(), v(d))]))
        };
        ModelParams::new(Arc::new(sem), v((n + 1) * d), v(d), v(n * d), with_lexicon).unwrap()
    }

    fn assert_f32_close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert_eq!(*x as f32 as f64, *y);
        }
    }

    #[test]
    fn round_trip_preserves_everything() {
        for lex in [true, false] {
            let p = random_params(lex);
            let bytes = encode(&p).unwrap();
            let q = decode(&bytes).unwrap();
            assert_eq!(q.dim(), 4);
            assert_eq!(q.num_services(), 3);
            assert_eq!(q.attention_enabled(), lex);
            assert_eq!(q.semantic().service_ids(), p.semantic().service_ids());
            assert_f32_close(p.semantic().service_matrix(), q.semantic().service_matrix());
            assert_f32_close(p.aux_matrix(), q.aux_matrix());
            assert_f32_close(p.attention_vector(), q.attention_vector());
            assert_f32_close(p.out_matrix(), q.out_matrix());
            assert_eq!(q.semantic().lexicon().is_some(), lex);
            assert_eq!(q.semantic().imported_goal("m1").is_some(), !lex);
            // re-encoding a decoded checkpoint is lossless
            assert_eq!(encode(&q).unwrap(), bytes);
        }
    }

    #[test]
    fn out_matrix_is_written_dimension_major() {
        let p = random_params(false);
        let bytes = encode(&p).unwrap();
        let (d, n) = (4, 3);
        let floats = n * d + (n + 1) * d + d + d * n;
        let start = bytes.len() - floats * 4 - (4 + 4 + 2 + d * 4);
        let out_start = start + (n * d + (n + 1) * d + d) * 4;
        let read = |i: usize| f32::from_le_bytes(bytes[out_start + 4 * i..out_start + 4 * i + 4].try_into().unwrap());
        // row 1 (dimension 1), column 2 (service c)
        assert_eq!(read(n + 2) as f64, p.out_column(2)[1] as f32 as f64);
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let bytes = encode(&random_params(true)).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Checkpoint(m)) if m.contains("magic")));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(decode(&bad), Err(Error::Checkpoint(m)) if m.contains("version")));
        assert!(decode(&bytes[..bytes.len() - 3]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(decode(&long).is_err());
    }

    #[test]
    fn file_round_trip_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let p = random_params(true);
        let h = save_checkpoint(&path, &p).unwrap();
        let c = load_checkpoint(&path).unwrap();
        assert_eq!(c.hash, h);
        assert_eq!(h.len(), 64);
    }
}
