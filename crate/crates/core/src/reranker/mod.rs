//! Final-stage scoring.
//!
//! A candidate's recommendation score combines two signals:
//!
//! * text relevance: the embedding of `query [SEP] candidate` text;
//! * taxonomy relevance: the separation between the query's and the
//!   candidate's fused class vectors after both pass through the shared
//!   projection network `h`.
//!
//! The concatenation `[e_tr, s]` goes through the scoring head `g` and a
//! sigmoid, `R = σ(g([e_tr, s]))`. Training minimises the triplet hinge
//! `max(R(q, c⁻) − R(q, c⁺) + margin, 0)`.

mod checkpoint;
mod train;

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CitationContext, Corpus, Paper};
use crate::embedder::{Embedding, EmbeddingProvider, SEP};
use crate::enricher::EnrichedList;
use crate::error::{Error, Result};
use crate::hashing::derive_seed;
use crate::hypermath::{separation_of_outputs, GeometryMode, ProjectionNet, TwoLayerNet};
use crate::prefetch::{rank_order, ScoredId};
use crate::taxonomy::FusedClassEmbeddings;

pub use checkpoint::{encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use train::{batch_loss_and_grad, train, Gradients, PreparedTriplet, TrainConfig, TrainReport};

pub const DEFAULT_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Dimension of fused class vectors (input of `h`).
    pub fused_dim: usize,
    /// Hidden width of `h`.
    pub proj_hidden: usize,
    /// Output dimension of `h`.
    pub proj_dim: usize,
    /// Dimension of the text-relevance embedding.
    pub text_dim: usize,
    /// Hidden width of `g`.
    pub score_hidden: usize,
    pub margin: f64,
    pub geometry: GeometryMode,
    pub use_taxonomy: bool,
    pub use_section: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            fused_dim: 768,
            proj_hidden: 512,
            proj_dim: 512,
            text_dim: 768,
            score_hidden: 128,
            margin: DEFAULT_MARGIN,
            geometry: GeometryMode::PaperAtan,
            use_taxonomy: true,
            use_section: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::invalid(format!("margin must be positive, got {}", self.margin)));
        }
        let dims = [self.fused_dim, self.proj_hidden, self.proj_dim, self.text_dim, self.score_hidden];
        if dims.contains(&0) {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        Ok(())
    }
}

/// Projection network `h`, scoring head `g` and scoring options.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankerModel {
    pub h: ProjectionNet,
    pub g: TwoLayerNet,
    pub margin: f64,
    pub geometry: GeometryMode,
    pub use_taxonomy: bool,
    pub use_section: bool,
}

impl RerankerModel {
    /// Uniform fan-in initialisation from a seed.
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "reranker-init"));
        Ok(RerankerModel {
            h: TwoLayerNet::init_uniform(config.fused_dim, config.proj_hidden, config.proj_dim, &mut rng),
            g: TwoLayerNet::init_uniform(config.text_dim + 1, config.score_hidden, 1, &mut rng),
            margin: config.margin,
            geometry: config.geometry,
            use_taxonomy: config.use_taxonomy,
            use_section: config.use_section,
        })
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            fused_dim: self.h.input,
            proj_hidden: self.h.hidden,
            proj_dim: self.h.output,
            text_dim: self.g.input - 1,
            score_hidden: self.g.hidden,
            margin: self.margin,
            geometry: self.geometry,
            use_taxonomy: self.use_taxonomy,
            use_section: self.use_section,
        }
    }

    pub fn param_count(&self) -> usize {
        self.h.param_count() + self.g.param_count()
    }

    /// All parameter tensors: `h` then `g`, each in declaration order.
    pub fn tensors(&self) -> [&Vec<f64>; 8] {
        let [a, b, c, d] = self.h.tensors();
        let [e, f, g, h] = self.g.tensors();
        [a, b, c, d, e, f, g, h]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 8] {
        let [a, b, c, d] = self.h.tensors_mut();
        let [e, f, g, h] = self.g.tensors_mut();
        [a, b, c, d, e, f, g, h]
    }
}

/// Everything known about the citing side of a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryBundle {
    pub context: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub category: Option<String>,
    #[serde(default)]
    pub section_heading: Option<String>,
    /// Id of the citing paper when it is part of the corpus; excluded from results.
    #[serde(default)]
    pub citing_id: Option<String>,
}

impl QueryBundle {
    pub fn from_context(ctx: &CitationContext, corpus: &Corpus) -> Result<Self> {
        let citing = corpus
            .get(&ctx.citing_id)
            .ok_or_else(|| Error::unknown("paper", &ctx.citing_id))?;
        Ok(QueryBundle {
            context: ctx.text.clone(),
            title: citing.title.clone(),
            abstract_text: citing.abstract_text.clone(),
            category: citing.category.clone(),
            section_heading: ctx.section_heading.clone(),
            citing_id: Some(ctx.citing_id.clone()),
        })
    }

    /// Context, title and abstract, optionally led by the section heading.
    pub fn query_text(&self, with_section: bool) -> String {
        let mut s = String::new();
        if with_section {
            if let Some(h) = &self.section_heading {
                s.push_str(h);
                s.push(' ');
            }
        }
        s.push_str(&self.context);
        s.push(' ');
        s.push_str(&self.title);
        s.push(' ');
        s.push_str(&self.abstract_text);
        s
    }

    pub fn exclude_id(&self) -> Option<&str> {
        self.citing_id.as_deref()
    }
}

/// Text fed to the embedder for a (query, candidate) pair.
pub fn joint_text(q: &QueryBundle, c: &Paper, with_section: bool) -> String {
    format!("{} {SEP} {} {}", q.query_text(with_section), c.title, c.abstract_text)
}

/// Joint embedding of `query [SEP] candidate title abstract`.
pub fn text_relevance(q: &QueryBundle, c: &Paper, provider: &EmbeddingProvider, with_section: bool) -> Result<Embedding> {
    provider.embed(&joint_text(q, c, with_section))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `max(r_neg − r_pos + margin, 0)`.
pub fn triplet_loss(r_pos: f64, r_neg: f64, margin: f64) -> f64 {
    (r_neg - r_pos + margin).max(0.0)
}

pub(crate) fn fused_vector<'a>(fused: &'a FusedClassEmbeddings, category: Option<&str>) -> Result<&'a [f64]> {
    let c = category.ok_or_else(|| Error::invalid("taxonomy scoring needs a category on both sides"))?;
    fused.get(c).ok_or_else(|| Error::unknown("category", c))
}

/// Caches `h(fused[category])` across the candidates of one query.
pub struct Scorer<'a> {
    model: &'a RerankerModel,
    fused: &'a FusedClassEmbeddings,
    provider: &'a EmbeddingProvider,
    projected: HashMap<String, Vec<f64>>,
}

impl<'a> Scorer<'a> {
    pub fn new(model: &'a RerankerModel, fused: &'a FusedClassEmbeddings, provider: &'a EmbeddingProvider) -> Self {
        Scorer {
            model,
            fused,
            provider,
            projected: HashMap::new(),
        }
    }

    fn project(&mut self, category: Option<&str>) -> Result<Vec<f64>> {
        let v = fused_vector(self.fused, category)?;
        let key = category.unwrap_or_default();
        if let Some(u) = self.projected.get(key) {
            return Ok(u.clone());
        }
        let u = self.model.h.forward(v)?;
        self.projected.insert(key.to_owned(), u.clone());
        Ok(u)
    }

    /// Taxonomy separation feature (0 when taxonomy is disabled).
    pub fn separation(&mut self, q: &QueryBundle, c: &Paper) -> Result<f64> {
        if !self.model.use_taxonomy {
            return Ok(0.0);
        }
        let uq = self.project(q.category.as_deref())?;
        let uc = self.project(c.category.as_deref())?;
        separation_of_outputs(&uq, &uc, self.model.geometry)
    }

    pub fn score(&mut self, q: &QueryBundle, c: &Paper) -> Result<f64> {
        let s = self.separation(q, c)?;
        let e = text_relevance(q, c, self.provider, self.model.use_section)?;
        score_features(self.model, &e, s)
    }
}

/// `σ(g([e_tr, s]))`.
pub fn score_features(model: &RerankerModel, e_tr: &[f64], s: f64) -> Result<f64> {
    let mut feature = Vec::with_capacity(e_tr.len() + 1);
    feature.extend_from_slice(e_tr);
    feature.push(s);
    let logit = model.g.forward(&feature)?[0];
    Ok(sigmoid(logit))
}

/// Recommendation score of candidate `c` for query `q`.
pub fn score(model: &RerankerModel, q: &QueryBundle, c: &Paper, fused: &FusedClassEmbeddings, provider: &EmbeddingProvider) -> Result<f64> {
    Scorer::new(model, fused, provider).score(q, c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub query: QueryBundle,
    pub positive: String,
    pub negative: String,
}

/// `n_neg` distinct negatives drawn uniformly from `candidates \ {gold}`.
pub fn mine_negatives<'a, R: Rng>(candidates: impl IntoIterator<Item = &'a str>, gold: &str, n_neg: usize, rng: &mut R) -> Vec<String> {
    let eligible: Vec<&str> = candidates.into_iter().filter(|c| *c != gold).collect();
    if eligible.is_empty() {
        log::warn!("no negatives available for gold `{gold}`");
        return Vec::new();
    }
    let n = n_neg.min(eligible.len());
    sample(rng, eligible.len(), n).into_iter().map(|i| eligible[i].to_owned()).collect()
}

pub fn mine_triplets<'a, R: Rng>(q: &QueryBundle, candidates: impl IntoIterator<Item = &'a str>, gold: &str, n_neg: usize, rng: &mut R) -> Vec<Triplet> {
    mine_negatives(candidates, gold, n_neg, rng)
        .into_iter()
        .map(|negative| Triplet {
            query: q.clone(),
            positive: gold.to_owned(),
            negative,
        })
        .collect()
}

/// Final ranking: descending score, ties by ascending id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub items: Vec<ScoredId>,
}

impl RankedList {
    pub fn from_scored(mut items: Vec<ScoredId>) -> Self {
        items.sort_by(rank_order);
        RankedList { items }
    }

    /// Wrap an already ordered list of ids with synthetic decreasing scores.
    pub fn from_ids<S: AsRef<str>>(ids: &[S]) -> Self {
        let n = ids.len() as f64;
        RankedList {
            items: ids
                .iter()
                .enumerate()
                .map(|(i, id)| ScoredId {
                    id: id.as_ref().to_owned(),
                    score: (n - i as f64) / (n + 1.0),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// 1-based rank of `id`.
    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|s| s.id == id).map(|p| p + 1)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|s| s.id.as_str())
    }
}

/// Score every enriched candidate and sort.
pub fn rerank(
    model: &RerankerModel,
    q: &QueryBundle,
    enriched: &EnrichedList,
    corpus: &Corpus,
    fused: &FusedClassEmbeddings,
    provider: &EmbeddingProvider,
) -> Result<RankedList> {
    // Project every class once up front so the parallel part is read-only.
    let mut scorer = Scorer::new(model, fused, provider);
    let papers: Vec<&Paper> = enriched
        .ids()
        .map(|id| corpus.get(id).ok_or_else(|| Error::unknown("paper", id)))
        .collect::<Result<_>>()?;
    let seps: Vec<f64> = papers.iter().map(|c| scorer.separation(q, c)).collect::<Result<_>>()?;
    let scored: Vec<ScoredId> = papers
        .par_iter()
        .zip(seps.par_iter())
        .map(|(c, &s)| {
            let e = text_relevance(q, c, provider, model.use_section)?;
            Ok(ScoredId {
                id: c.id.clone(),
                score: score_features(model, &e, s)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RankedList::from_scored(scored))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enricher::{EnrichedItem, Origin};
    use crate::taxonomy::FusionMode;
    use std::collections::BTreeMap;

    fn small_config() -> ModelConfig {
        ModelConfig {
            fused_dim: 8,
            proj_hidden: 6,
            proj_dim: 4,
            text_dim: 16,
            score_hidden: 5,
            ..ModelConfig::default()
        }
    }

    fn fused() -> FusedClassEmbeddings {
        let mut vectors = BTreeMap::new();
        vectors.insert("cs.A".to_string(), (0..8).map(|i| i as f64 * 0.1).collect());
        vectors.insert("cs.B".to_string(), (0..8).map(|i| 0.5 - i as f64 * 0.07).collect());
        FusedClassEmbeddings {
            mode: FusionMode::Vector,
            dim: 8,
            vectors,
        }
    }

    fn query() -> QueryBundle {
        QueryBundle {
            context: "we follow prior work on graph ranking".into(),
            title: "ranking papers".into(),
            abstract_text: "a study".into(),
            category: Some("cs.A".into()),
            section_heading: Some("Related Work".into()),
            citing_id: Some("q".into()),
        }
    }

    #[test]
    fn zero_head_scores_half() {
        let mut m = RerankerModel::new(&small_config(), 1).unwrap();
        m.g = TwoLayerNet::zeros(17, 5, 1);
        let p = EmbeddingProvider::hashed(16, 0);
        let c = Paper::new("c", "graph ranking", "x").with_category("cs.B");
        assert_eq!(score(&m, &query(), &c, &fused(), &p).unwrap(), 0.5);
    }

    #[test]
    fn scores_in_open_interval_and_unknown_category_errors() {
        let m = RerankerModel::new(&small_config(), 1).unwrap();
        let p = EmbeddingProvider::hashed(16, 0);
        let c = Paper::new("c", "graph ranking", "x").with_category("cs.B");
        let r = score(&m, &query(), &c, &fused(), &p).unwrap();
        assert!(r > 0.0 && r < 1.0);
        let bad = Paper::new("c", "t", "a").with_category("cs.ZZ");
        assert!(matches!(score(&m, &query(), &bad, &fused(), &p), Err(Error::Unknown { .. })));
    }

    #[test]
    fn no_taxonomy_ignores_fused_contents() {
        let mut cfg = small_config();
        cfg.use_taxonomy = false;
        let m = RerankerModel::new(&cfg, 1).unwrap();
        let p = EmbeddingProvider::hashed(16, 0);
        let c = Paper::new("c", "graph ranking", "x").with_category("cs.B");
        let mut other = fused();
        other.vectors.values_mut().for_each(|v| v.iter_mut().for_each(|x| *x = -3.0 * *x + 1.0));
        assert_eq!(score(&m, &query(), &c, &fused(), &p).unwrap(), score(&m, &query(), &c, &other, &p).unwrap());
    }

    #[test]
    fn section_heading_toggle() {
        let q = query();
        assert!(q.query_text(true).starts_with("Related Work we follow"));
        assert!(q.query_text(false).starts_with("we follow"));
    }

    #[test]
    fn text_relevance_shape_and_bag_symmetry() {
        let p = EmbeddingProvider::hashed(16, 0);
        let q = query();
        let c = Paper::new("c", "graph ranking", "x");
        let e = text_relevance(&q, &c, &p, false).unwrap();
        assert_eq!(e.len(), 16);
        assert_eq!(e, text_relevance(&q, &c, &p, false).unwrap());

        // Same token bag on both sides of [SEP] in swapped roles.
        let q2 = QueryBundle {
            context: "alpha".into(),
            title: "beta".into(),
            abstract_text: String::new(),
            category: None,
            section_heading: None,
            citing_id: None,
        };
        let c2 = Paper::new("x", "gamma", "delta");
        let q3 = QueryBundle {
            context: "gamma".into(),
            title: "delta".into(),
            ..q2.clone()
        };
        let c3 = Paper::new("y", "alpha", "beta");
        assert_eq!(text_relevance(&q2, &c2, &p, false).unwrap(), text_relevance(&q3, &c3, &p, false).unwrap());
    }

    #[test]
    fn triplet_loss_examples() {
        assert_eq!(triplet_loss(0.9, 0.1, 0.1), 0.0);
        assert!((triplet_loss(0.4, 0.4, 0.1) - 0.1).abs() < 1e-15);
        assert!((triplet_loss(0.3, 0.5, 0.1) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn mining_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(mine_negatives(["g"], "g", 3, &mut rng).is_empty());
        let cands: Vec<String> = (0..10).map(|i| format!("p{i}")).chain(["g".to_string()]).collect();
        let negs = mine_negatives(cands.iter().map(String::as_str), "g", 3, &mut rng);
        assert_eq!(negs.len(), 3);
        assert!(!negs.contains(&"g".to_string()));
        let mut uniq = negs.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 3);

        let a = mine_triplets(&query(), cands.iter().map(String::as_str), "g", 4, &mut ChaCha8Rng::seed_from_u64(9));
        let b = mine_triplets(&query(), cands.iter().map(String::as_str), "g", 4, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn rerank_single_and_sorted() {
        let m = RerankerModel::new(&small_config(), 3).unwrap();
        let p = EmbeddingProvider::hashed(16, 0);
        let corpus = Corpus::from_papers(
            (0..6)
                .map(|i| Paper::new(format!("p{i}"), format!("title {i}"), "graph ranking").with_category(if i % 2 == 0 { "cs.A" } else { "cs.B" }))
                .collect(),
        )
        .unwrap();
        let item = |id: &str| EnrichedItem {
            id: id.into(),
            frequency: 1,
            origin: Origin::Prefetched,
            prefetch_rank: None,
        };
        let one = EnrichedList { items: vec![item("p3")] };
        let r = rerank(&m, &query(), &one, &corpus, &fused(), &p).unwrap();
        assert_eq!(r.rank_of("p3"), Some(1));

        let all = EnrichedList {
            items: (0..6).map(|i| item(&format!("p{i}"))).collect(),
        };
        let r = rerank(&m, &query(), &all, &corpus, &fused(), &p).unwrap();
        assert!(r.items.windows(2).all(|w| w[0].score >= w[1].score));
        assert_eq!(r, rerank(&m, &query(), &all, &corpus, &fused(), &p).unwrap());
    }
}
