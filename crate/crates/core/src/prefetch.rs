//! First-stage retrieval: dense cosine prefetch over the whole corpus, and
//! the BM25 lexical baseline.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedder::{l2_norm, tokenize, EmbeddingProvider};
use crate::error::{Error, Result};

pub const DEFAULT_PREFETCH: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredId {
    pub id: String,
    pub score: f64,
}

/// Descending score, then ascending id.
pub fn rank_order(a: &ScoredId, b: &ScoredId) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id))
}

/// Ordered `(id, score)` list with non-increasing scores and distinct ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub items: Vec<ScoredId>,
}

impl CandidateList {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|s| s.id.as_str())
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|s| s.id == id)
    }
}

fn top_k(mut scored: Vec<ScoredId>, k: usize) -> CandidateList {
    if k < scored.len() {
        scored.select_nth_unstable_by(k, rank_order);
        scored.truncate(k);
    }
    scored.sort_by(rank_order);
    CandidateList { items: scored }
}

/// Document embeddings, one row per paper, rows in ascending id order.
/// Stored as `f32` so an index read back from disk is bit-identical to the
/// one that was written.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    dim: usize,
    ids: Vec<String>,
    rows: Vec<f32>,
    norms: Vec<f64>,
    fingerprint: u64,
}

const INDEX_MAGIC: &[u8; 4] = b"CRIX";
const INDEX_VERSION: u32 = 1;

impl DenseIndex {
    fn from_rows(dim: usize, ids: Vec<String>, rows: Vec<f32>, fingerprint: u64) -> Self {
        let norms = rows
            .chunks(dim.max(1))
            .map(|r| r.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt())
            .collect();
        DenseIndex {
            dim,
            ids,
            rows,
            norms,
            fingerprint,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// Cosine similarity of `query` against every row, in row order.
    pub fn cosine_scores(&self, query: &[f64]) -> Result<Vec<f64>> {
        if query.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: query.len(),
            });
        }
        let qn = l2_norm(query);
        Ok((0..self.len())
            .map(|i| {
                let dn = self.norms[i];
                if qn == 0.0 || dn == 0.0 {
                    return 0.0;
                }
                let d: f64 = self.row(i).iter().zip(query).map(|(&x, &q)| f64::from(x) * q).sum();
                d / (qn * dn)
            })
            .collect())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(INDEX_MAGIC).map_err(io)?;
        w.write_all(&INDEX_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&self.fingerprint.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.dim as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.ids.len() as u32).to_le_bytes()).map_err(io)?;
        for id in &self.ids {
            w.write_all(&(id.len() as u32).to_le_bytes()).map_err(io)?;
            w.write_all(id.as_bytes()).map_err(io)?;
        }
        for x in &self.rows {
            w.write_all(&x.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
            .read_to_end(&mut buf)
            .map_err(|e| Error::io(path, e))?;
        let bad = |message: &str| Error::Format {
            path: path.to_path_buf(),
            message: message.to_owned(),
        };
        let mut cur = ByteCursor::new(&buf);
        if cur.take(4).ok_or_else(|| bad("truncated header"))? != INDEX_MAGIC {
            return Err(bad("not an index file"));
        }
        let version = cur.u32().ok_or_else(|| bad("truncated header"))?;
        if version != INDEX_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let fingerprint = cur.u64().ok_or_else(|| bad("truncated header"))?;
        let dim = cur.u32().ok_or_else(|| bad("truncated header"))? as usize;
        let n = cur.u32().ok_or_else(|| bad("truncated header"))? as usize;
        let mut ids = Vec::with_capacity(n);
        for _ in 0..n {
            let len = cur.u32().ok_or_else(|| bad("truncated id table"))? as usize;
            let bytes = cur.take(len).ok_or_else(|| bad("truncated id table"))?;
            ids.push(String::from_utf8(bytes.to_vec()).map_err(|_| bad("id is not utf-8"))?);
        }
        let mut rows = Vec::with_capacity(n * dim);
        for _ in 0..n * dim {
            let b = cur.take(4).ok_or_else(|| bad("truncated matrix"))?;
            rows.push(f32::from_le_bytes(b.try_into().unwrap()));
        }
        if !cur.is_at_end() {
            return Err(bad("trailing bytes"));
        }
        Ok(DenseIndex::from_rows(dim, ids, rows, fingerprint))
    }
}

pub(crate) struct ByteCursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        ByteCursor { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    pub(crate) fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    pub(crate) fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn is_at_end(&self) -> bool {
        self.pos == self.buf.len()
    }
}

/// Embed `title abstract` of every paper.
pub fn build_dense_index(corpus: &Corpus, provider: &EmbeddingProvider) -> Result<DenseIndex> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot index an empty corpus"));
    }
    let mut papers: Vec<_> = corpus.iter().collect();
    papers.sort_by(|a, b| a.id.cmp(&b.id));
    let dim = provider.dim();
    let mut rows = Vec::with_capacity(papers.len() * dim);
    for p in &papers {
        let e = provider.embed(&p.document_text())?;
        rows.extend(e.iter().map(|&x| x as f32));
    }
    Ok(DenseIndex::from_rows(
        dim,
        papers.iter().map(|p| p.id.clone()).collect(),
        rows,
        provider.fingerprint(),
    ))
}

/// Top-`m` papers by cosine similarity to an already embedded query.
pub fn prefetch_embedding(query: &[f64], index: &DenseIndex, m: usize, exclude: Option<&str>) -> Result<CandidateList> {
    let scores = index.cosine_scores(query)?;
    let eligible = index.len() - usize::from(exclude.is_some_and(|x| index.ids.binary_search_by(|id| id.as_str().cmp(x)).is_ok()));
    if m > eligible {
        warn!("prefetch size {m} exceeds the {eligible} eligible papers; returning the full ranking");
    }
    let scored = index
        .ids
        .iter()
        .zip(scores)
        .filter(|(id, _)| Some(id.as_str()) != exclude)
        .map(|(id, score)| ScoredId { id: id.clone(), score })
        .collect();
    Ok(top_k(scored, m))
}

/// Embed `query_text` and prefetch the top `m` papers, never returning `exclude`.
pub fn prefetch(
    query_text: &str,
    provider: &EmbeddingProvider,
    index: &DenseIndex,
    m: usize,
    exclude: Option<&str>,
) -> Result<CandidateList> {
    if provider.fingerprint() != index.fingerprint() {
        return Err(Error::invalid("index was built with a different embedding provider"));
    }
    let q = provider.embed(query_text)?;
    prefetch_embedding(&q, index, m, exclude)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if self.k1 < 0.0 || !(0.0..=1.0).contains(&self.b) {
            return Err(Error::invalid(format!("bm25 parameters out of range: {self:?}")));
        }
        Ok(())
    }
}

/// Inverted index over `title abstract` tokens.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    ids: Vec<String>,
    doc_len: Vec<usize>,
    avgdl: f64,
    postings: HashMap<String, Vec<(usize, u32)>>,
}

impl Bm25Index {
    pub fn build(corpus: &Corpus) -> Self {
        let mut papers: Vec<_> = corpus.iter().collect();
        papers.sort_by(|a, b| a.id.cmp(&b.id));
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(papers.len());
        for (d, p) in papers.iter().enumerate() {
            let tokens = tokenize(&p.document_text());
            doc_len.push(tokens.len());
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_insert(0) += 1;
            }
            for (t, c) in tf {
                postings.entry(t).or_default().push((d, c));
            }
        }
        let avgdl = if papers.is_empty() {
            0.0
        } else {
            doc_len.iter().sum::<usize>() as f64 / papers.len() as f64
        };
        Bm25Index {
            ids: papers.iter().map(|p| p.id.clone()).collect(),
            doc_len,
            avgdl,
            postings,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        bm25_idf(self.ids.len(), self.document_frequency(term))
    }

    /// Score of every document, in ascending id order.
    pub fn scores(&self, query_text: &str, params: &Bm25Params) -> Vec<f64> {
        let mut scores = vec![0.0; self.ids.len()];
        let terms: BTreeSet<String> = tokenize(query_text).into_iter().collect();
        for t in &terms {
            let Some(plist) = self.postings.get(t) else {
                continue;
            };
            let idf = self.idf(t);
            for &(d, tf) in plist {
                scores[d] += bm25_term(idf, f64::from(tf), self.doc_len[d] as f64, self.avgdl, params);
            }
        }
        scores
    }
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`, never negative.
pub fn bm25_idf(n_docs: usize, df: usize) -> f64 {
    let n = n_docs as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

fn bm25_term(idf: f64, tf: f64, dl: f64, avgdl: f64, p: &Bm25Params) -> f64 {
    let norm = if avgdl > 0.0 { dl / avgdl } else { 0.0 };
    idf * (tf * (p.k1 + 1.0)) / (tf + p.k1 * (1.0 - p.b + p.b * norm))
}

/// Top-`k` documents by BM25.
pub fn bm25_rank(query_text: &str, index: &Bm25Index, params: &Bm25Params, k: usize, exclude: Option<&str>) -> CandidateList {
    let scored = index
        .ids
        .iter()
        .zip(index.scores(query_text, params))
        .filter(|(id, _)| Some(id.as_str()) != exclude)
        .map(|(id, score)| ScoredId { id: id.clone(), score })
        .collect();
    top_k(scored, k)
}
