//! Corpus records, JSON-lines ingestion, splitting and the citation graph.
//!
//! Papers and citation contexts are read from JSON-lines files. Contexts that
//! point outside the corpus are dropped and counted, never silently kept. The
//! citation graph collapses parallel edges (several contexts linking the same
//! pair) into one directed edge; the contexts themselves are kept as separate
//! records for training and evaluation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::derive_seed;

/// Default seed for splitting and every other seeded consumer.
pub const DEFAULT_SEED: u64 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paper {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pub_date: Option<String>,
    /// Pass-through metadata (authors, submitters, comments, ...).
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Paper {
    pub fn new(id: impl Into<String>, title: impl Into<String>, abstract_text: impl Into<String>) -> Self {
        Paper {
            id: id.into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
            category: None,
            pub_date: None,
            extra: BTreeMap::new(),
        }
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = Some(category.into());
        self
    }

    /// Document text used for dense and lexical indexing: title, space, abstract.
    pub fn document_text(&self) -> String {
        format!("{} {}", self.title, self.abstract_text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationContext {
    pub context_id: String,
    pub citing_id: String,
    pub cited_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section_heading: Option<String>,
}

/// Papers keyed by id, in file order.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    papers: Vec<Paper>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn from_papers(papers: Vec<Paper>) -> Result<Self> {
        let mut corpus = Corpus::default();
        for p in papers {
            corpus.insert(p)?;
        }
        Ok(corpus)
    }

    fn insert(&mut self, paper: Paper) -> Result<()> {
        if paper.id.is_empty() {
            return Err(Error::invalid("paper id must be non-empty"));
        }
        if self.by_id.contains_key(&paper.id) {
            return Err(Error::invalid(format!("duplicate paper id `{}`", paper.id)));
        }
        self.by_id.insert(paper.id.clone(), self.papers.len());
        self.papers.push(paper);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Paper> {
        self.by_id.get(id).map(|&i| &self.papers[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn papers(&self) -> &[Paper] {
        &self.papers
    }

    pub fn iter(&self) -> impl Iterator<Item = &Paper> {
        self.papers.iter()
    }

    /// Distinct categories present in the corpus.
    pub fn categories(&self) -> BTreeSet<&str> {
        self.papers.iter().filter_map(|p| p.category.as_deref()).collect()
    }

    pub fn category_histogram(&self) -> BTreeMap<String, usize> {
        let mut hist = BTreeMap::new();
        for p in &self.papers {
            if let Some(c) = &p.category {
                *hist.entry(c.clone()).or_insert(0) += 1;
            }
        }
        hist
    }
}

fn valid_date(s: &str) -> bool {
    // YYYY, YYYY-MM or YYYY-MM-DD
    let parts: Vec<&str> = s.split('-').collect();
    let widths = [4usize, 2, 2];
    !parts.is_empty()
        && parts.len() <= 3
        && parts
            .iter()
            .zip(widths)
            .all(|(p, w)| p.len() == w && p.bytes().all(|b| b.is_ascii_digit()))
}

fn read_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file).lines().enumerate().map(|(i, l)| (i + 1, l)))
}

/// Load papers from a JSON-lines file. Blank lines are skipped.
pub fn load_papers(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let mut corpus = Corpus::default();
    for (line_no, line) in read_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let paper: Paper = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if paper.id.is_empty() {
            return Err(parse_err("empty paper id".into()));
        }
        if let Some(d) = &paper.pub_date {
            if !valid_date(d) {
                return Err(parse_err(format!("pub_date `{d}` is not an ISO-8601 date")));
            }
        }
        if corpus.contains(&paper.id) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                line: line_no,
                id: paper.id,
            });
        }
        corpus.insert(paper)?;
    }
    Ok(corpus)
}

/// Contexts that survived validation, with counts of what was dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextSet {
    pub contexts: Vec<CitationContext>,
    pub dropped_unknown_cited: usize,
    pub dropped_unknown_citing: usize,
    /// Self-citations and empty texts.
    pub dropped_invalid: usize,
}

impl ContextSet {
    pub fn dropped(&self) -> usize {
        self.dropped_unknown_cited + self.dropped_unknown_citing + self.dropped_invalid
    }
}

/// Filter raw contexts against a corpus.
pub fn filter_contexts(raw: Vec<CitationContext>, corpus: &Corpus) -> ContextSet {
    let mut set = ContextSet::default();
    for ctx in raw {
        if ctx.citing_id == ctx.cited_id || ctx.text.trim().is_empty() {
            set.dropped_invalid += 1;
        } else if !corpus.contains(&ctx.cited_id) {
            set.dropped_unknown_cited += 1;
        } else if !corpus.contains(&ctx.citing_id) {
            set.dropped_unknown_citing += 1;
        } else {
            set.contexts.push(ctx);
        }
    }
    set
}

/// Load citation contexts and keep only those resolvable against `corpus`.
pub fn load_contexts(path: impl AsRef<Path>, corpus: &Corpus) -> Result<ContextSet> {
    let path = path.as_ref();
    let mut raw = Vec::new();
    let mut seen = HashSet::new();
    for (line_no, line) in read_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ctx: CitationContext = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(ctx.context_id.clone()) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                line: line_no,
                id: ctx.context_id,
            });
        }
        raw.push(ctx);
    }
    let set = filter_contexts(raw, corpus);
    if set.dropped() > 0 {
        warn!(
            "{}: dropped {} contexts ({} unknown cited, {} unknown citing, {} self-citing or empty)",
            path.display(),
            set.dropped(),
            set.dropped_unknown_cited,
            set.dropped_unknown_citing,
            set.dropped_invalid
        );
    }
    Ok(set)
}

/// Write records as JSON lines.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::invalid(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Directed citation graph (citing → cited) over paper ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CitationGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
}

impl CitationGraph {
    /// Build from explicit edges. Self-loops are rejected, duplicates collapse.
    pub fn from_edges<'a, I>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let edges: Vec<(&str, &str)> = edges.into_iter().collect();
        let mut names: BTreeSet<&str> = BTreeSet::new();
        for &(u, v) in &edges {
            if u == v {
                return Err(Error::invalid(format!("self-loop on `{u}`")));
            }
            names.insert(u);
            names.insert(v);
        }
        let ids: Vec<String> = names.into_iter().map(str::to_owned).collect();
        let index: HashMap<String, usize> =
            ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let mut out = vec![Vec::new(); ids.len()];
        let mut inc = vec![Vec::new(); ids.len()];
        for (u, v) in edges {
            out[index[u]].push(index[v]);
            inc[index[v]].push(index[u]);
        }
        for adj in out.iter_mut().chain(inc.iter_mut()) {
            adj.sort_unstable();
            adj.dedup();
        }
        Ok(CitationGraph { ids, index, out, inc })
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    /// Number of distinct directed edges.
    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Node ids in ascending order.
    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.ids.iter().map(String::as_str)
    }

    /// Out-neighbours (papers cited by `id`) in ascending id order, or
    /// `None` when `id` is not a node.
    pub fn out_neighbors(&self, id: &str) -> Option<impl Iterator<Item = &str> + '_> {
        let i = *self.index.get(id)?;
        Some(self.out[i].iter().map(move |&j| self.ids[j].as_str()))
    }

    /// In-neighbours (papers citing `id`).
    pub fn in_neighbors(&self, id: &str) -> Option<impl Iterator<Item = &str> + '_> {
        let i = *self.index.get(id)?;
        Some(self.inc[i].iter().map(move |&j| self.ids[j].as_str()))
    }

    pub fn in_degree(&self, id: &str) -> usize {
        self.index.get(id).map_or(0, |&i| self.inc[i].len())
    }

    /// All directed edges, sorted.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        let mut e = Vec::with_capacity(self.edge_count());
        for (u, adj) in self.out.iter().enumerate() {
            for &v in adj {
                e.push((self.ids[u].as_str(), self.ids[v].as_str()));
            }
        }
        e
    }

    /// Sorted neighbour lists of the undirected projection, indexed like `nodes()`.
    pub fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        self.out
            .iter()
            .zip(&self.inc)
            .map(|(o, i)| {
                let mut n: Vec<usize> = o.iter().chain(i).copied().collect();
                n.sort_unstable();
                n.dedup();
                n
            })
            .collect()
    }
}

/// One directed edge per distinct (citing, cited) pair.
pub fn build_citation_graph(contexts: &[CitationContext]) -> Result<CitationGraph> {
    CitationGraph::from_edges(contexts.iter().map(|c| (c.citing_id.as_str(), c.cited_id.as_str())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.8,
            val: 0.1,
            test: 0.1,
            seed: DEFAULT_SEED,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::invalid(format!("{name} fraction {f} outside [0, 1]")));
            }
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<CitationContext>,
    pub val: Vec<CitationContext>,
    pub test: Vec<CitationContext>,
}

/// Random split at context granularity. Train and validation sizes are
/// floored, the test split takes the remainder. Each part keeps input order.
pub fn split_contexts(contexts: &[CitationContext], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let n = contexts.len();
    // The small slack absorbs binary representation error (0.29 * 100 = 28.999...).
    let n_train = ((spec.train * n as f64) + 1e-9).floor() as usize;
    let n_val = (((spec.val * n as f64) + 1e-9).floor() as usize).min(n - n_train);

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "split"));
    order.shuffle(&mut rng);

    let take = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| contexts[i].clone()).collect::<Vec<_>>()
    };
    Ok(Split {
        train: take(&order[..n_train]),
        val: take(&order[n_train..n_train + n_val]),
        test: take(&order[n_train + n_val..]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub directed_edges: usize,
    pub undirected_edges: usize,
    pub avg_local_clustering: f64,
    pub avg_degree: f64,
    pub category_histogram: BTreeMap<String, usize>,
}

/// Local clustering coefficient of every node on the undirected projection.
/// Nodes with degree below two have coefficient zero.
pub fn local_clustering(graph: &CitationGraph) -> Vec<f64> {
    let adj = graph.undirected_adjacency();
    adj.iter()
        .map(|nbrs| {
            let k = nbrs.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (a, &u) in nbrs.iter().enumerate() {
                for &w in &nbrs[a + 1..] {
                    if adj[u].binary_search(&w).is_ok() {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .collect()
}

/// Average local clustering and average undirected degree, plus the
/// category histogram of `corpus`.
pub fn graph_stats(graph: &CitationGraph, corpus: &Corpus) -> GraphStats {
    let n = graph.node_count();
    let undirected_edges = graph.undirected_adjacency().iter().map(Vec::len).sum::<usize>() / 2;
    let (avg_local_clustering, avg_degree) = if n == 0 {
        (0.0, 0.0)
    } else {
        (
            local_clustering(graph).iter().sum::<f64>() / n as f64,
            2.0 * undirected_edges as f64 / n as f64,
        )
    };
    GraphStats {
        nodes: n,
        directed_edges: graph.edge_count(),
        undirected_edges,
        avg_local_clustering,
        avg_degree,
        category_histogram: corpus.category_histogram(),
    }
}

/// Dataset summary row: context counts per split, papers, LCC and degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub name: String,
    pub train_contexts: usize,
    pub val_contexts: usize,
    pub test_contexts: usize,
    pub total_contexts: usize,
    pub papers: usize,
    pub lcc: f64,
    pub deg: f64,
    pub graph: GraphStats,
}

impl DatasetStats {
    pub fn new(name: impl Into<String>, split: &Split, corpus: &Corpus, graph: &CitationGraph) -> Self {
        let graph = graph_stats(graph, corpus);
        DatasetStats {
            name: name.into(),
            train_contexts: split.train.len(),
            val_contexts: split.val.len(),
            test_contexts: split.test.len(),
            total_contexts: split.train.len() + split.val.len() + split.test.len(),
            papers: corpus.len(),
            lcc: graph.avg_local_clustering,
            deg: graph.avg_degree,
            graph,
        }
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:>10} {:>8} {:>8} {:>10} {:>9} {:>7} {:>7}",
            "Dataset", "Train", "Val", "Test", "Total", "Papers", "LCC", "Deg"
        )?;
        writeln!(
            f,
            "{:<12} {:>10} {:>8} {:>8} {:>10} {:>9} {:>7.3} {:>7.2}",
            self.name,
            self.train_contexts,
            self.val_contexts,
            self.test_contexts,
            self.total_contexts,
            self.papers,
            self.lcc,
            self.deg
        )?;
        if !self.graph.category_histogram.is_empty() {
            writeln!(f, "categories:")?;
            for (c, n) in &self.graph.category_histogram {
                writeln!(f, "  {c:<10} {n}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(id: &str, a: &str, b: &str) -> CitationContext {
        CitationContext {
            context_id: id.into(),
            citing_id: a.into(),
            cited_id: b.into(),
            text: format!("{a} cites {b}"),
            section_heading: None,
        }
    }

    fn write_tmp(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn load_three_papers() {
        let f = write_tmp(&[
            r#"{"id":"a","title":"A","abstract":"x","category":"cs.CV"}"#,
            r#"{"id":"b","title":"B","abstract":"y","category":"cs.LG","pub_date":"2020-01-02"}"#,
            r#"{"id":"c","title":"C","abstract":"z","authors":["someone"]}"#,
        ]);
        let c = load_papers(f.path()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.get("c").unwrap().extra["authors"][0], "someone");
    }

    #[test]
    fn duplicate_id_names_second_line() {
        let f = write_tmp(&[
            r#"{"id":"a","title":"A","abstract":""}"#,
            r#"{"id":"d","title":"D","abstract":""}"#,
            r#"{"id":"b","title":"B","abstract":""}"#,
            r#"{"id":"c","title":"C","abstract":""}"#,
            r#"{"id":"d","title":"D2","abstract":""}"#,
        ]);
        match load_papers(f.path()) {
            Err(Error::DuplicateId { line, id, .. }) => {
                assert_eq!(line, 5);
                assert_eq!(id, "d");
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write_tmp(&[r#"{"id":"a","title":"A","abstract":""}"#, "{not json"]);
        match load_papers(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let f = write_tmp(&[]);
        assert!(load_papers(f.path()).unwrap().is_empty());
    }

    #[test]
    fn bad_date_rejected() {
        let f = write_tmp(&[r#"{"id":"a","title":"A","abstract":"","pub_date":"yesterday"}"#]);
        assert!(matches!(load_papers(f.path()), Err(Error::Parse { line: 1, .. })));
    }

    fn small_corpus(ids: &[&str]) -> Corpus {
        Corpus::from_papers(ids.iter().map(|i| Paper::new(*i, *i, "")).collect()).unwrap()
    }

    #[test]
    fn unknown_cited_dropped_and_counted() {
        let corpus = small_corpus(&["a", "b", "c"]);
        let mut raw: Vec<_> = (0..8).map(|i| ctx(&format!("k{i}"), "a", "b")).collect();
        raw.push(ctx("x1", "a", "zz"));
        raw.push(ctx("x2", "b", "yy"));
        let set = filter_contexts(raw, &corpus);
        assert_eq!(set.contexts.len(), 8);
        assert_eq!(set.dropped_unknown_cited, 2);
    }

    #[test]
    fn self_citation_dropped() {
        let corpus = small_corpus(&["a"]);
        let set = filter_contexts(vec![ctx("k", "a", "a")], &corpus);
        assert!(set.contexts.is_empty());
        assert_eq!(set.dropped_invalid, 1);
        assert!(filter_contexts(vec![], &corpus).contexts.is_empty());
    }

    #[test]
    fn load_contexts_from_file() {
        let corpus = small_corpus(&["a", "b"]);
        let f = write_tmp(&[
            r#"{"context_id":"1","citing_id":"a","cited_id":"b","text":"see [b]","section_heading":"Intro"}"#,
            r#"{"context_id":"2","citing_id":"a","cited_id":"q","text":"see [q]"}"#,
        ]);
        let set = load_contexts(f.path(), &corpus).unwrap();
        assert_eq!(set.contexts.len(), 1);
        assert_eq!(set.contexts[0].section_heading.as_deref(), Some("Intro"));
        assert_eq!(set.dropped_unknown_cited, 1);
    }

    #[test]
    fn graph_dedups_parallel_edges() {
        let g = build_citation_graph(&[ctx("1", "a", "b"), ctx("2", "a", "b"), ctx("3", "a", "c")]).unwrap();
        assert_eq!(g.edges(), vec![("a", "b"), ("a", "c")]);
        assert_eq!(g.node_count(), 3);
        assert_eq!(build_citation_graph(&[]).unwrap().node_count(), 0);
    }

    #[test]
    fn chain_out_neighbors() {
        let g = build_citation_graph(&[ctx("1", "a", "b"), ctx("2", "b", "c")]).unwrap();
        let out = |u| g.out_neighbors(u).unwrap().collect::<Vec<_>>();
        assert_eq!(out("a"), vec!["b"]);
        assert_eq!(out("b"), vec!["c"]);
        assert!(out("c").is_empty());
        assert!(g.out_neighbors("zz").is_none());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let contexts: Vec<_> = (0..100).map(|i| ctx(&i.to_string(), "a", "b")).collect();
        let spec = SplitSpec::default();
        let s = split_contexts(&contexts, &spec).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (80, 10, 10));
        assert_eq!(s, split_contexts(&contexts, &spec).unwrap());

        let all_train = SplitSpec { train: 1.0, val: 0.0, test: 0.0, seed: 3 };
        let s = split_contexts(&contexts, &all_train).unwrap();
        assert_eq!(s.train.len(), 100);

        let bad = SplitSpec { train: 0.5, val: 0.1, test: 0.1, seed: 3 };
        assert!(split_contexts(&contexts, &bad).is_err());
    }

    #[test]
    fn triangle_and_star_clustering() {
        let corpus = Corpus::default();
        let tri = CitationGraph::from_edges([("a", "b"), ("b", "c"), ("c", "a")]).unwrap();
        let s = graph_stats(&tri, &corpus);
        assert_eq!(s.avg_local_clustering, 1.0);
        assert_eq!(s.avg_degree, 2.0);

        let star = CitationGraph::from_edges([("h", "a"), ("h", "b"), ("h", "c"), ("h", "d")]).unwrap();
        assert_eq!(graph_stats(&star, &corpus).avg_local_clustering, 0.0);

        let empty = graph_stats(&CitationGraph::default(), &corpus);
        assert_eq!((empty.avg_local_clustering, empty.avg_degree), (0.0, 0.0));
    }

    #[test]
    fn reciprocal_edges_count_once_undirected() {
        let g = CitationGraph::from_edges([("a", "b"), ("b", "a")]).unwrap();
        let s = graph_stats(&g, &Corpus::default());
        assert_eq!(s.undirected_edges, 1);
        assert_eq!(s.directed_edges, 2);
        assert_eq!(s.avg_degree, 1.0);
    }
}
