//! The three-stage recommendation pipeline and its baselines.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::corpus::{CitationGraph, Corpus};
use crate::embedder::EmbeddingProvider;
use crate::enricher::{enrich, EnrichedList, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::prefetch::{bm25_rank, build_dense_index, prefetch, Bm25Index, Bm25Params, CandidateList, DenseIndex, DEFAULT_PREFETCH};
use crate::reranker::{rerank, QueryBundle, RankedList, RerankerModel};
use crate::taxonomy::FusedClassEmbeddings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Candidates returned by the prefetcher.
    pub prefetch_m: usize,
    /// Length of the enriched list.
    pub enrich_cap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            prefetch_m: DEFAULT_PREFETCH,
            enrich_cap: DEFAULT_CAP,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prefetch_m == 0 || self.enrich_cap == 0 {
            return Err(Error::invalid("prefetch size and enrich cap must be positive"));
        }
        Ok(())
    }
}

/// Read-only state shared by training and inference.
#[derive(Debug)]
pub struct PipelineResources {
    pub corpus: Corpus,
    pub provider: EmbeddingProvider,
    pub index: DenseIndex,
    /// Citation graph used for enrichment; built from training contexts only.
    pub graph: CitationGraph,
    pub fused: FusedClassEmbeddings,
}

impl PipelineResources {
    pub fn new(corpus: Corpus, provider: EmbeddingProvider, graph: CitationGraph, fused: FusedClassEmbeddings) -> Result<Self> {
        let index = build_dense_index(&corpus, &provider)?;
        Ok(PipelineResources {
            corpus,
            provider,
            index,
            graph,
            fused,
        })
    }

    /// Use an index read from disk. It must come from the same provider and
    /// cover exactly the corpus.
    pub fn with_index(
        corpus: Corpus,
        provider: EmbeddingProvider,
        index: DenseIndex,
        graph: CitationGraph,
        fused: FusedClassEmbeddings,
    ) -> Result<Self> {
        if index.fingerprint() != provider.fingerprint() || index.dim() != provider.dim() {
            return Err(Error::invalid("index was built with a different embedding provider"));
        }
        let mut ids: Vec<&str> = corpus.iter().map(|p| p.id.as_str()).collect();
        ids.sort_unstable();
        if !ids.iter().copied().eq(index.ids().iter().map(String::as_str)) {
            return Err(Error::invalid("index does not cover the current corpus; rebuild it"));
        }
        Ok(PipelineResources {
            corpus,
            provider,
            index,
            graph,
            fused,
        })
    }

    /// Dense prefetch for a query, excluding the citing paper.
    pub fn prefetch(&self, q: &QueryBundle, m: usize) -> Result<CandidateList> {
        prefetch(&q.query_text(false), &self.provider, &self.index, m, q.exclude_id())
    }

    pub fn enrich(&self, candidates: &CandidateList, cap: usize, exclude: Option<&str>) -> EnrichedList {
        enrich(candidates, &self.graph, cap, exclude)
    }
}

/// Anything that turns a query into a ranked list of paper ids.
pub trait Ranker: Sync {
    fn rank(&self, q: &QueryBundle) -> Result<RankedList>;
}

/// Dense prefetch ranking on its own.
pub struct PrefetchRanker<'a> {
    pub resources: &'a PipelineResources,
    pub m: usize,
}

impl Ranker for PrefetchRanker<'_> {
    fn rank(&self, q: &QueryBundle) -> Result<RankedList> {
        Ok(RankedList::from_scored(self.resources.prefetch(q, self.m)?.items))
    }
}

/// BM25 over `title abstract`.
pub struct Bm25Ranker<'a> {
    pub index: &'a Bm25Index,
    pub params: Bm25Params,
    pub k: usize,
}

impl Ranker for Bm25Ranker<'_> {
    fn rank(&self, q: &QueryBundle) -> Result<RankedList> {
        Ok(RankedList::from_scored(
            bm25_rank(&q.query_text(false), self.index, &self.params, self.k, q.exclude_id()).items,
        ))
    }
}

/// Prefetch, enrich (unless disabled), rerank.
pub struct Pipeline<'a> {
    pub resources: &'a PipelineResources,
    pub model: &'a RerankerModel,
    pub config: PipelineConfig,
    pub symbiosis: bool,
    enrich_calls: AtomicUsize,
}

impl<'a> Pipeline<'a> {
    pub fn new(resources: &'a PipelineResources, model: &'a RerankerModel, config: PipelineConfig, symbiosis: bool) -> Self {
        Pipeline {
            resources,
            model,
            config,
            symbiosis,
            enrich_calls: AtomicUsize::new(0),
        }
    }

    /// Number of enricher invocations so far.
    pub fn enrich_calls(&self) -> usize {
        self.enrich_calls.load(Ordering::Relaxed)
    }

    pub fn candidates(&self, q: &QueryBundle) -> Result<EnrichedList> {
        let prefetched = self.resources.prefetch(q, self.config.prefetch_m)?;
        if !self.symbiosis {
            return Ok(EnrichedList::from_candidates(&prefetched));
        }
        self.enrich_calls.fetch_add(1, Ordering::Relaxed);
        Ok(self.resources.enrich(&prefetched, self.config.enrich_cap, q.exclude_id()))
    }
}

impl Ranker for Pipeline<'_> {
    fn rank(&self, q: &QueryBundle) -> Result<RankedList> {
        let enriched = self.candidates(q)?;
        let r = &self.resources;
        rerank(self.model, q, &enriched, &r.corpus, &r.fused, &r.provider)
    }
}
