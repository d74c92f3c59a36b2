//! Evaluation harness: metrics over test contexts, ablations, and the
//! synthetic corpus used for desk-scale experiments.

mod metrics;
pub mod synthetic;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CitationContext, Corpus};
use crate::error::{Error, Result};
use crate::hypermath::GeometryMode;
use crate::pipeline::{Bm25Ranker, Pipeline, PipelineConfig, PipelineResources, PrefetchRanker, Ranker};
use crate::prefetch::{Bm25Index, Bm25Params};
use crate::reranker::{train, ModelConfig, QueryBundle, RerankerModel, TrainConfig, TrainReport};

pub use metrics::{mrr, ndcg_at_10, recall_at_k, MetricReport, QueryMetrics, RECALL_KS};

/// Per-query metrics in context order.
pub fn evaluate_queries(ranker: &dyn Ranker, contexts: &[CitationContext], corpus: &Corpus) -> Result<Vec<QueryMetrics>> {
    if contexts.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty test set"));
    }
    contexts
        .par_iter()
        .map(|ctx| {
            let q = QueryBundle::from_context(ctx, corpus)?;
            Ok(QueryMetrics::compute(&ranker.rank(&q)?, &ctx.cited_id))
        })
        .collect()
}

/// Mean metrics of `ranker` over `contexts`, one query per context.
pub fn evaluate(ranker: &dyn Ranker, contexts: &[CitationContext], corpus: &Corpus) -> Result<MetricReport> {
    Ok(MetricReport::aggregate(&evaluate_queries(ranker, contexts, corpus)?))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    /// Skip the enricher; rerank the prefetched list directly.
    pub no_symbiosis: bool,
    /// Feed a constant 0 in place of the taxonomy separation.
    pub no_taxonomy: bool,
    /// Euclidean distance instead of the hyperbolic separation.
    pub euclidean: bool,
    /// Prepend the section heading to the citation context.
    pub with_section: bool,
}

impl AblationConfig {
    /// Apply the model-affecting flags to `base`.
    pub fn model_config(&self, base: &ModelConfig) -> ModelConfig {
        let mut cfg = *base;
        if self.no_taxonomy {
            cfg.use_taxonomy = false;
        }
        if self.euclidean {
            cfg.geometry = GeometryMode::Euclidean;
        }
        if self.with_section {
            cfg.use_section = true;
        }
        cfg
    }

    /// Whether a checkpoint was trained under the model-affecting flags.
    pub fn matches_model(&self, model: &RerankerModel) -> bool {
        model.use_taxonomy != self.no_taxonomy
            && (model.geometry == GeometryMode::Euclidean) == self.euclidean
            && model.use_section == self.with_section
    }
}

impl FromStr for AblationConfig {
    type Err = Error;

    /// Comma-separated flag names; the empty string is the full pipeline.
    fn from_str(s: &str) -> Result<Self> {
        let mut cfg = AblationConfig::default();
        for flag in s.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            match flag {
                "no_symbiosis" => cfg.no_symbiosis = true,
                "no_taxonomy" => cfg.no_taxonomy = true,
                "euclidean" => cfg.euclidean = true,
                "with_section" => cfg.with_section = true,
                other => return Err(Error::invalid(format!("unknown ablation flag `{other}`"))),
            }
        }
        Ok(cfg)
    }
}

impl fmt::Display for AblationConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.no_symbiosis, "no_symbiosis"),
            (self.no_taxonomy, "no_taxonomy"),
            (self.euclidean, "euclidean"),
            (self.with_section, "with_section"),
        ]
        .into_iter()
        .filter_map(|(on, n)| on.then_some(n))
        .collect();
        if names.is_empty() {
            f.write_str("full")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub report: MetricReport,
    /// Loss trace of the model behind this row, when one was trained.
    pub train: Option<TrainReport>,
}

/// Settings shared by every variant of an ablation study.
#[derive(Debug, Clone, Copy)]
pub struct Experiment<'a> {
    pub resources: &'a PipelineResources,
    pub train_contexts: &'a [CitationContext],
    pub test_contexts: &'a [CitationContext],
    pub model: ModelConfig,
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
}

impl Experiment<'_> {
    pub fn train_model(&self, ablation: &AblationConfig) -> Result<(RerankerModel, TrainReport)> {
        let mut model = RerankerModel::new(&ablation.model_config(&self.model), self.train.seed)?;
        let report = train(&mut model, self.train_contexts, self.resources, &self.pipeline, &self.train)?;
        Ok((model, report))
    }

    pub fn evaluate_model(&self, model: &RerankerModel, ablation: &AblationConfig) -> Result<MetricReport> {
        let p = Pipeline::new(self.resources, model, self.pipeline, !ablation.no_symbiosis);
        evaluate(&p, self.test_contexts, &self.resources.corpus)
    }

    pub fn prefetch_only(&self) -> Result<MetricReport> {
        let r = PrefetchRanker {
            resources: self.resources,
            m: self.pipeline.prefetch_m,
        };
        evaluate(&r, self.test_contexts, &self.resources.corpus)
    }

    pub fn bm25(&self) -> Result<MetricReport> {
        let index = Bm25Index::build(&self.resources.corpus);
        let r = Bm25Ranker {
            index: &index,
            params: Bm25Params::default(),
            k: self.pipeline.prefetch_m,
        };
        evaluate(&r, self.test_contexts, &self.resources.corpus)
    }

    /// Baselines, the full pipeline and one single-flag ablation per row.
    /// `no_symbiosis` reuses the full model because enrichment only changes
    /// the inference-time candidate pool.
    pub fn ablation_suite(&self) -> Result<Vec<AblationRow>> {
        let mut rows = vec![
            AblationRow {
                name: "bm25".into(),
                report: self.bm25()?,
                train: None,
            },
            AblationRow {
                name: "prefetch_only".into(),
                report: self.prefetch_only()?,
                train: None,
            },
        ];
        let full = AblationConfig::default();
        let (model, report) = self.train_model(&full)?;
        rows.push(AblationRow {
            name: full.to_string(),
            report: self.evaluate_model(&model, &full)?,
            train: Some(report),
        });
        let no_sym = AblationConfig {
            no_symbiosis: true,
            ..full
        };
        rows.push(AblationRow {
            name: no_sym.to_string(),
            report: self.evaluate_model(&model, &no_sym)?,
            train: None,
        });
        for ablation in [
            AblationConfig {
                no_taxonomy: true,
                ..full
            },
            AblationConfig { euclidean: true, ..full },
            AblationConfig {
                with_section: true,
                ..full
            },
        ] {
            let (model, report) = self.train_model(&ablation)?;
            rows.push(AblationRow {
                name: ablation.to_string(),
                report: self.evaluate_model(&model, &ablation)?,
                train: Some(report),
            });
        }
        Ok(rows)
    }
}

/// Aligned text table of ablation rows.
pub fn format_table(rows: &[AblationRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(8);
    let mut out = format!("{:<width$} {}\n", "variant", MetricReport::header());
    for r in rows {
        out.push_str(&format!("{:<width$} {}\n", r.name, r.report));
    }
    out
}
