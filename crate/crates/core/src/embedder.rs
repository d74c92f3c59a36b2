//! Text embedding providers.
//!
//! Two providers ship: a signed feature-hashing bag-of-tokens embedder that
//! needs no model weights, and an exact-lookup table of vectors exported
//! offline from any external encoder.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::ops::Deref;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::{fnv1a, hash_str, mix64};

pub const DEFAULT_DIM: usize = 768;
/// Literal separator between query and candidate texts.
pub const SEP: &str = "[SEP]";

/// Dense vector with its L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
    norm: f64,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        let norm = l2_norm(&values);
        Embedding { values, norm }
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

impl Deref for Embedding {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Cosine similarity; zero when either side is the zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Lowercased alphanumeric runs. The literal `[SEP]` marker is kept as its
/// own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for (i, piece) in text.split(SEP).enumerate() {
        if i > 0 {
            tokens.push(SEP.to_owned());
        }
        tokens.extend(
            piece
                .split(|c: char| !c.is_alphanumeric())
                .filter(|t| !t.is_empty())
                .map(str::to_lowercase),
        );
    }
    tokens
}

/// Signed feature hashing with `ln(1 + count)` weights, L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl HashedEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashedEmbedder { dim, seed }
    }

    pub fn embed(&self, text: &str) -> Embedding {
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokenize(text) {
            *counts.entry(t).or_insert(0) += 1;
        }
        let mut v = vec![0.0; self.dim];
        for (token, count) in &counts {
            let h = hash_str(token, self.seed);
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[bucket] += sign * f64::from(*count).ln_1p();
        }
        let n = l2_norm(&v);
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
        Embedding::new(v)
    }
}

/// Exact-lookup table of precomputed vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputedEmbedder {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
    fingerprint: u64,
}

impl PrecomputedEmbedder {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn embed(&self, text: &str) -> Result<Embedding> {
        self.table
            .get(text)
            .map(|v| Embedding::new(v.clone()))
            .ok_or_else(|| Error::unknown("embedding key", text))
    }
}

/// Load `key<TAB>f1 f2 … fD` records.
pub fn load_precomputed(path: impl AsRef<Path>) -> Result<PrecomputedEmbedder> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dim = None;
    let mut table = HashMap::new();
    let mut fingerprint = 0u64;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let (key, rest) = line
            .split_once('\t')
            .ok_or_else(|| err("expected `key<TAB>values`".into()))?;
        let values = rest
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(format!("bad component `{t}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None if values.is_empty() => return Err(err("empty vector".into())),
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(err(format!("dimension {} differs from {d}", values.len())))
            }
            _ => {}
        }
        if table.contains_key(key) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                line: line_no,
                id: key.to_owned(),
            });
        }
        fingerprint = mix64(fingerprint ^ fnv1a(line.as_bytes()));
        table.insert(key.to_owned(), values);
    }
    let dim = dim.ok_or_else(|| Error::invalid(format!("{} contains no embeddings", path.display())))?;
    Ok(PrecomputedEmbedder {
        dim,
        table,
        fingerprint,
    })
}

/// Serializable provider selection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderConfig {
    Hashed {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    Precomputed { path: PathBuf },
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Hashed {
            dim: DEFAULT_DIM,
            seed: 0,
        }
    }
}

impl EmbedderConfig {
    pub fn build(&self) -> Result<EmbeddingProvider> {
        match self {
            EmbedderConfig::Hashed { dim, seed } => {
                if *dim == 0 {
                    return Err(Error::invalid("embedding dimension must be positive"));
                }
                Ok(EmbeddingProvider::Hashed(HashedEmbedder::new(*dim, *seed)))
            }
            EmbedderConfig::Precomputed { path } => Ok(EmbeddingProvider::Precomputed(load_precomputed(path)?)),
        }
    }
}

/// The embedder used by every pipeline stage. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingProvider {
    Hashed(HashedEmbedder),
    Precomputed(PrecomputedEmbedder),
}

impl EmbeddingProvider {
    pub fn hashed(dim: usize, seed: u64) -> Self {
        EmbeddingProvider::Hashed(HashedEmbedder::new(dim, seed))
    }

    pub fn dim(&self) -> usize {
        match self {
            EmbeddingProvider::Hashed(h) => h.dim,
            EmbeddingProvider::Precomputed(p) => p.dim,
        }
    }

    pub fn embed(&self, text: &str) -> Result<Embedding> {
        match self {
            EmbeddingProvider::Hashed(h) => Ok(h.embed(text)),
            EmbeddingProvider::Precomputed(p) => p.embed(text),
        }
    }

    /// Identifies the provider configuration; stored in index files.
    pub fn fingerprint(&self) -> u64 {
        match self {
            EmbeddingProvider::Hashed(h) => mix64(mix64(h.dim as u64) ^ h.seed ^ 0x4841_5348),
            EmbeddingProvider::Precomputed(p) => p.fingerprint,
        }
    }
}
