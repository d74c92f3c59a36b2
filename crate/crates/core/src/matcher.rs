//! Approximate title → paper-id resolution.
//!
//! Candidate generation uses MinHash signatures over character shingles,
//! banded into an LSH table; candidates are then verified with a
//! longest-common-substring similarity and accepted above a threshold.
//!
//! For a signature of `H = bands × rows` slots, two titles with Jaccard
//! similarity `J` collide in at least one band with probability
//! `1 - (1 - J^rows)^bands`.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::hashing::{fnv1a, mix64};

pub const DEFAULT_SHINGLE: usize = 3;
pub const DEFAULT_NUM_HASHES: usize = 128;
pub const DEFAULT_BANDS: usize = 32;
pub const DEFAULT_ROWS: usize = 4;
pub const DEFAULT_CANDIDATES: usize = 100;
pub const DEFAULT_THRESHOLD: f64 = 0.9;

/// Lowercase, collapse whitespace runs to one space, trim.
pub fn normalize_title(title: &str) -> String {
    title
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub type ShingleSet = BTreeSet<String>;

/// Character k-grams of the normalized title. Titles shorter than `k`
/// produce a single whole-string shingle; empty titles produce nothing.
pub fn shingle(title: &str, k: usize) -> ShingleSet {
    assert!(k >= 1, "shingle width must be positive");
    let chars: Vec<char> = normalize_title(title).chars().collect();
    if chars.is_empty() {
        return ShingleSet::new();
    }
    if chars.len() < k {
        return std::iter::once(chars.iter().collect()).collect();
    }
    chars.windows(k).map(|w| w.iter().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub values: Vec<u64>,
    pub seed: u64,
}

impl MinHashSignature {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fraction of slots where both signatures agree.
    pub fn agreement(&self, other: &MinHashSignature) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        let eq = self.values.iter().zip(&other.values).filter(|(a, b)| a == b).count();
        eq as f64 / self.len() as f64
    }
}

/// Family of `num_hashes` seeded hash functions.
#[derive(Debug, Clone)]
pub struct MinHasher {
    slot_keys: Vec<u64>,
    seed: u64,
}

impl MinHasher {
    pub fn new(num_hashes: usize, seed: u64) -> Self {
        assert!(num_hashes >= 1, "need at least one hash function");
        let slot_keys = (0..num_hashes as u64)
            .map(|h| mix64(seed ^ mix64(h.wrapping_mul(0x9e37_79b9_7f4a_7c15))))
            .collect();
        MinHasher { slot_keys, seed }
    }

    pub fn num_hashes(&self) -> usize {
        self.slot_keys.len()
    }

    pub fn sign(&self, set: &ShingleSet) -> Result<MinHashSignature> {
        if set.is_empty() {
            return Err(Error::invalid("cannot compute a MinHash signature of an empty set"));
        }
        let mut values = vec![u64::MAX; self.slot_keys.len()];
        for s in set {
            let base = fnv1a(s.as_bytes());
            for (slot, &key) in values.iter_mut().zip(&self.slot_keys) {
                let h = mix64(base ^ key);
                if h < *slot {
                    *slot = h;
                }
            }
        }
        Ok(MinHashSignature {
            values,
            seed: self.seed,
        })
    }
}

/// Convenience wrapper over [`MinHasher::sign`].
pub fn minhash_signature(set: &ShingleSet, num_hashes: usize, seed: u64) -> Result<MinHashSignature> {
    MinHasher::new(num_hashes, seed).sign(set)
}

/// Exact Jaccard similarity of two sets.
pub fn jaccard(a: &ShingleSet, b: &ShingleSet) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LshParams {
    pub shingle: usize,
    pub bands: usize,
    pub rows: usize,
    pub seed: u64,
}

impl Default for LshParams {
    fn default() -> Self {
        LshParams {
            shingle: DEFAULT_SHINGLE,
            bands: DEFAULT_BANDS,
            rows: DEFAULT_ROWS,
            seed: crate::corpus::DEFAULT_SEED,
        }
    }
}

/// Banded MinHash index over titles.
#[derive(Debug, Clone)]
pub struct LshIndex {
    params: LshParams,
    hasher: MinHasher,
    ids: Vec<String>,
    titles: Vec<String>,
    /// One table per band: band hash → document positions.
    buckets: Vec<HashMap<u64, Vec<usize>>>,
}

impl LshIndex {
    pub fn new(params: LshParams) -> Self {
        assert!(params.bands >= 1 && params.rows >= 1);
        LshIndex {
            hasher: MinHasher::new(params.bands * params.rows, params.seed),
            params,
            ids: Vec::new(),
            titles: Vec::new(),
            buckets: vec![HashMap::new(); params.bands],
        }
    }

    pub fn from_corpus(corpus: &Corpus, params: LshParams) -> Self {
        let mut idx = LshIndex::new(params);
        for p in corpus.iter() {
            idx.insert(&p.id, &p.title);
        }
        idx
    }

    pub fn params(&self) -> &LshParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn title(&self, pos: usize) -> &str {
        &self.titles[pos]
    }

    pub fn id(&self, pos: usize) -> &str {
        &self.ids[pos]
    }

    fn band_keys(&self, sig: &MinHashSignature) -> Vec<u64> {
        sig.values
            .chunks(self.params.rows)
            .enumerate()
            .map(|(band, rows)| {
                rows.iter()
                    .fold(mix64(band as u64), |acc, &v| mix64(acc ^ v))
            })
            .collect()
    }

    fn signature(&self, title: &str) -> Option<MinHashSignature> {
        self.hasher.sign(&shingle(title, self.params.shingle)).ok()
    }

    /// Index a title. Titles with no shingles are stored but never bucketed.
    pub fn insert(&mut self, id: &str, title: &str) {
        let pos = self.ids.len();
        self.ids.push(id.to_owned());
        self.titles.push(title.to_owned());
        if let Some(sig) = self.signature(title) {
            for (band, key) in self.band_keys(&sig).into_iter().enumerate() {
                self.buckets[band].entry(key).or_default().push(pos);
            }
        }
    }

    /// Positions sharing at least one band bucket with `title`, with the
    /// number of shared bands.
    pub fn shared_bands(&self, title: &str) -> Vec<(usize, usize)> {
        let Some(sig) = self.signature(title) else {
            return Vec::new();
        };
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for (band, key) in self.band_keys(&sig).into_iter().enumerate() {
            if let Some(hits) = self.buckets[band].get(&key) {
                for &pos in hits {
                    *counts.entry(pos).or_insert(0) += 1;
                }
            }
        }
        counts.into_iter().collect()
    }

    /// Candidate positions ranked by shared band count (desc), then id.
    pub fn query_positions(&self, title: &str, limit: usize) -> Vec<usize> {
        let mut hits = self.shared_bands(title);
        hits.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| self.ids[a.0].cmp(&self.ids[b.0])));
        hits.truncate(limit);
        hits.into_iter().map(|(pos, _)| pos).collect()
    }

    /// Bucket membership check for a stored position, used by tests.
    pub fn shares_band(&self, title: &str, pos: usize) -> bool {
        let Some(sig) = self.signature(title) else {
            return false;
        };
        self.band_keys(&sig)
            .into_iter()
            .enumerate()
            .any(|(band, key)| self.buckets[band].get(&key).is_some_and(|v| v.contains(&pos)))
    }
}

/// Candidate ids for a title, best first.
pub fn lsh_query(index: &LshIndex, title: &str, limit: usize) -> Vec<String> {
    index
        .query_positions(title, limit)
        .into_iter()
        .map(|p| index.id(p).to_owned())
        .collect()
}

/// Longest common contiguous substring length, in chars.
pub fn longest_common_substring(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for &ca in a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// LCS length over the longer normalized string. Two empty strings are
/// identical by convention.
pub fn lcs_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = normalize_title(a).chars().collect();
    let b: Vec<char> = normalize_title(b).chars().collect();
    let denom = a.len().max(b.len());
    if denom == 0 {
        return 1.0;
    }
    longest_common_substring(&a, &b) as f64 / denom as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TitleMatch {
    pub id: String,
    pub similarity: f64,
}

/// Best-scoring candidate among `candidates` (positions into `index`) if it
/// clears `threshold`. Ties go to the smallest id.
fn best_above(index: &LshIndex, title: &str, candidates: impl IntoIterator<Item = usize>, threshold: f64) -> Option<TitleMatch> {
    let mut best: Option<TitleMatch> = None;
    for pos in candidates {
        let sim = lcs_similarity(title, index.title(pos));
        let id = index.id(pos);
        let better = match &best {
            None => true,
            Some(b) => sim > b.similarity || (sim == b.similarity && id < b.id.as_str()),
        };
        if better {
            best = Some(TitleMatch {
                id: id.to_owned(),
                similarity: sim,
            });
        }
    }
    best.filter(|m| m.similarity >= threshold)
}

/// Resolve a (possibly noisy) title to an indexed paper id.
pub fn match_title(title: &str, index: &LshIndex, limit: usize, threshold: f64) -> Option<TitleMatch> {
    best_above(index, title, index.query_positions(title, limit), threshold)
}

/// Exhaustive LCS scan over every indexed title. Slow reference path.
pub fn match_title_exhaustive(title: &str, index: &LshIndex, threshold: f64) -> Option<TitleMatch> {
    best_above(index, title, 0..index.len(), threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> ShingleSet {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn shingle_examples() {
        assert_eq!(shingle("abcd", 3), set(&["abc", "bcd"]));
        assert_eq!(shingle("AB  cd", 3), set(&["ab ", "b c", " cd"]));
        assert_eq!(shingle("ab", 3), set(&["ab"]));
        assert!(shingle("   ", 3).is_empty());
    }

    #[test]
    fn signature_deterministic_and_rejects_empty() {
        let s = shingle("hyperbolic citation ranking", 3);
        let a = minhash_signature(&s, 128, 7).unwrap();
        assert_eq!(a, minhash_signature(&s, 128, 7).unwrap());
        assert_eq!(a.len(), 128);
        assert!(minhash_signature(&ShingleSet::new(), 128, 7).is_err());
    }

    #[test]
    fn lcs_examples() {
        assert_eq!(lcs_similarity("abcde", "abcde"), 1.0);
        assert!((lcs_similarity("abcde", "abcxy") - 0.6).abs() < 1e-15);
        assert_eq!(lcs_similarity("abc", "xyz"), 0.0);
        assert_eq!(lcs_similarity("", ""), 1.0);
        assert_eq!(lcs_similarity("abc", ""), 0.0);
        assert_eq!(lcs_similarity("The  Title", "the title"), 1.0);
    }

    #[test]
    fn exact_title_query_ranks_first() {
        let mut idx = LshIndex::new(LshParams::default());
        idx.insert("p1", "Graph neural networks for citation recommendation");
        idx.insert("p2", "Hyperbolic embeddings of hierarchical taxonomies");
        idx.insert("p3", "Graph neural networks for citation prediction");
        let got = lsh_query(&idx, "Graph neural networks for citation recommendation", 100);
        assert_eq!(got[0], "p1");
        let m = match_title("graph neural networks for citation recommendation", &idx, 100, 0.9).unwrap();
        assert_eq!(m.id, "p1");
        assert_eq!(m.similarity, 1.0);
        assert!(lsh_query(&idx, "qqqqqqqqqq", 100).is_empty());
    }

    #[test]
    fn below_threshold_is_none() {
        let mut idx = LshIndex::new(LshParams::default());
        // 17 of 20 chars shared contiguously: 0.85
        idx.insert("p", "abcdefghijklmnopqrst");
        let q = "abcdefghijklmnopqxyz";
        assert!((lcs_similarity(q, idx.title(0)) - 0.85).abs() < 1e-12);
        assert!(match_title_exhaustive(q, &idx, 0.9).is_none());
        assert!(match_title(q, &idx, 100, 0.9).is_none());
    }
}
