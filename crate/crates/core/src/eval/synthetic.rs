//! Deterministic clustered corpus for desk-scale experiments.
//!
//! Papers are generated in publication order and assigned round-robin to
//! clusters. Every cluster has its own vocabulary and arXiv category. A
//! paper cites earlier papers, mostly from its own cluster, with
//! preferential attachment on in-degree. With probability `chain_prob` a
//! reference is instead taken from the references of an already chosen
//! reference, so ego networks of cited papers tend to contain further gold
//! papers. Each paper carries a unique signature word in its title and
//! abstract; citation contexts mention a few words of the cited paper and
//! sometimes its signature.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_jsonl, CitationContext, Paper, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::hashing::derive_seed;
use crate::taxonomy::{Taxonomy, TaxonomyMapping};

/// Categories assigned to clusters, in order.
pub const CLUSTER_CATEGORIES: [&str; 12] = [
    "cs.CV", "cs.CL", "cs.IR", "cs.CR", "cs.DB", "cs.RO", "cs.NI", "cs.DS", "cs.LG", "cs.PL", "cs.SE", "cs.GR",
];

const SECTIONS: [&str; 4] = ["Introduction", "Related Work", "Method", "Experiments"];
const CONSONANTS: &[u8] = b"bcdfghklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_clusters: usize,
    pub papers_per_cluster: usize,
    pub vocab_per_cluster: usize,
    /// Words shared by every cluster.
    pub shared_vocab: usize,
    /// Probability that a fresh reference stays inside the citing cluster.
    pub intra_cluster_prob: f64,
    pub refs_per_paper: usize,
    /// Probability that a reference is drawn from a chosen reference's own references.
    pub chain_prob: f64,
    /// Probability that a context names the cited paper's signature word.
    pub signature_prob: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_clusters: 4,
            papers_per_cluster: 50,
            vocab_per_cluster: 60,
            shared_vocab: 40,
            intra_cluster_prob: 0.9,
            refs_per_paper: 6,
            chain_prob: 0.4,
            signature_prob: 0.3,
            seed: DEFAULT_SEED,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("intra_cluster_prob", self.intra_cluster_prob),
            ("chain_prob", self.chain_prob),
            ("signature_prob", self.signature_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.n_clusters == 0 || self.n_clusters > CLUSTER_CATEGORIES.len() {
            return Err(Error::invalid(format!(
                "n_clusters must lie in 1..={}, got {}",
                CLUSTER_CATEGORIES.len(),
                self.n_clusters
            )));
        }
        if self.papers_per_cluster < 2 || self.vocab_per_cluster == 0 || self.shared_vocab == 0 {
            return Err(Error::invalid("need at least 2 papers per cluster and non-empty vocabularies"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub papers: Vec<Paper>,
    pub contexts: Vec<CitationContext>,
    pub taxonomy: Taxonomy,
}

/// Paths written by [`write_synthetic`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticFiles {
    pub papers: PathBuf,
    pub contexts: PathBuf,
    pub mapping: PathBuf,
    pub acm_tree: PathBuf,
}

/// Pronounceable words, unique across all calls sharing `seen`.
fn fresh_words<R: Rng>(n: usize, syllables: usize, seen: &mut BTreeSet<String>, rng: &mut R) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w: String = (0..syllables)
            .flat_map(|_| {
                [
                    CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char,
                    VOWELS[rng.gen_range(0..VOWELS.len())] as char,
                ]
            })
            .collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn pick<'a, R: Rng>(words: &'a [String], rng: &mut R) -> &'a str {
    &words[rng.gen_range(0..words.len())]
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let builtin = Taxonomy::builtin();
    let categories = &CLUSTER_CATEGORIES[..spec.n_clusters];

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "synthetic"));
    let mut seen = BTreeSet::new();
    let shared = fresh_words(spec.shared_vocab, 2, &mut seen, &mut rng);
    let vocab: Vec<Vec<String>> = (0..spec.n_clusters)
        .map(|_| fresh_words(spec.vocab_per_cluster, 3, &mut seen, &mut rng))
        .collect();

    let n = spec.n_clusters * spec.papers_per_cluster;
    let signatures = fresh_words(n, 4, &mut seen, &mut rng);
    let cluster_of = |t: usize| t % spec.n_clusters;

    // Topic words per paper, reused by contexts that cite it.
    let mut topics: Vec<Vec<String>> = Vec::with_capacity(n);
    let mut papers = Vec::with_capacity(n);
    for (t, sig) in signatures.iter().enumerate() {
        let k = cluster_of(t);
        let topic: Vec<String> = (0..5).map(|_| pick(&vocab[k], &mut rng).to_owned()).collect();
        let title = format!("{} {} {}", topic[..3].join(" "), sig, topic[3..].join(" "));
        let mut words: Vec<String> = topic.clone();
        words.push(sig.clone());
        for _ in 0..20 {
            let w = if rng.gen_bool(0.7) { pick(&vocab[k], &mut rng) } else { pick(&shared, &mut rng) };
            words.push(w.to_owned());
        }
        words.push(sig.clone());
        words[..].shuffle(&mut rng);
        let mut p = Paper::new(format!("syn{t:04}"), title, words.join(" ")).with_category(categories[k]);
        p.pub_date = Some(format!("{}-{:02}", 2000 + t * 20 / n, t % 12 + 1));
        papers.push(p);
        topics.push(topic);
    }

    let mut refs: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut in_degree = vec![0usize; n];
    let mut contexts = Vec::new();
    for t in 1..n {
        let k = cluster_of(t);
        let mut chosen: Vec<usize> = Vec::new();
        let mut attempts = 0;
        while chosen.len() < spec.refs_per_paper.min(t) && attempts < 8 * spec.refs_per_paper {
            attempts += 1;
            let from_chain = !chosen.is_empty() && rng.gen_bool(spec.chain_prob);
            let target = if from_chain {
                let r = chosen[rng.gen_range(0..chosen.len())];
                let options: Vec<usize> = refs[r].iter().copied().filter(|v| !chosen.contains(v)).collect();
                options.choose(&mut rng).copied()
            } else {
                let cluster = if spec.n_clusters == 1 || rng.gen_bool(spec.intra_cluster_prob) {
                    k
                } else {
                    let other = rng.gen_range(0..spec.n_clusters - 1);
                    if other >= k {
                        other + 1
                    } else {
                        other
                    }
                };
                let options: Vec<usize> = (0..t).filter(|&v| cluster_of(v) == cluster && !chosen.contains(&v)).collect();
                options.choose_weighted(&mut rng, |&v| (in_degree[v] + 1) as f64).ok().copied()
            };
            if let Some(v) = target {
                chosen.push(v);
            }
        }
        for &v in &chosen {
            in_degree[v] += 1;
            let mut words: Vec<&str> = Vec::new();
            words.extend((0..4).map(|_| topics[v][rng.gen_range(0..topics[v].len())].as_str()));
            words.extend((0..3).map(|_| pick(&vocab[k], &mut rng)));
            words.extend((0..2).map(|_| pick(&shared, &mut rng)));
            if rng.gen_bool(spec.signature_prob) {
                words.push(&signatures[v]);
            }
            words.shuffle(&mut rng);
            contexts.push(CitationContext {
                context_id: format!("ctx{:05}", contexts.len()),
                citing_id: papers[t].id.clone(),
                cited_id: papers[v].id.clone(),
                text: words.join(" "),
                section_heading: Some(SECTIONS[rng.gen_range(0..SECTIONS.len())].to_owned()),
            });
        }
        refs[t] = chosen;
    }

    let classes = categories
        .iter()
        .map(|c| ((*c).to_owned(), builtin.mapping.classes[*c].clone()))
        .collect();
    Ok(SyntheticData {
        papers,
        contexts,
        taxonomy: Taxonomy {
            mapping: TaxonomyMapping { classes },
            tree: builtin.tree,
        },
    })
}

/// Write `papers.jsonl`, `contexts.jsonl`, `mapping.json` and
/// `acm_tree.json` into `dir`.
pub fn write_synthetic(data: &SyntheticData, dir: impl AsRef<Path>) -> Result<SyntheticFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = SyntheticFiles {
        papers: dir.join("papers.jsonl"),
        contexts: dir.join("contexts.jsonl"),
        mapping: dir.join("mapping.json"),
        acm_tree: dir.join("acm_tree.json"),
    };
    write_jsonl(&files.papers, &data.papers)?;
    write_jsonl(&files.contexts, &data.contexts)?;
    let json = |v: serde_json::Result<String>| v.map_err(|e| Error::invalid(e.to_string()));
    let mapping = json(serde_json::to_string_pretty(&data.taxonomy.mapping.classes))?;
    let tree = json(serde_json::to_string_pretty(&data.taxonomy.tree))?;
    fs::write(&files.mapping, mapping + "\n").map_err(|e| Error::io(&files.mapping, e))?;
    fs::write(&files.acm_tree, tree + "\n").map_err(|e| Error::io(&files.acm_tree, e))?;
    Ok(files)
}
