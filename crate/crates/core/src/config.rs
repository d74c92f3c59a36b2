//! Run configuration: one JSON file describing inputs, artifacts and every
//! hyperparameter. A single seed drives all randomness.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{SplitSpec, DEFAULT_SEED};
use crate::embedder::EmbedderConfig;
use crate::error::{Error, Result};
use crate::eval::AblationConfig;
use crate::pipeline::PipelineConfig;
use crate::reranker::{ModelConfig, TrainConfig};
use crate::taxonomy::FusionMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Raw papers JSONL, read by `ingest`.
    pub papers: PathBuf,
    /// Raw citation contexts JSONL, read by `ingest`.
    pub contexts: PathBuf,
    /// Taxonomy mapping; the built-in one when absent.
    pub mapping: Option<PathBuf>,
    pub acm_tree: Option<PathBuf>,
    /// Directory holding every derived artifact.
    pub work_dir: PathBuf,
    pub index: Option<PathBuf>,
    pub fused: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub embedder: EmbedderConfig,
    /// Candidates returned by the prefetcher.
    pub prefetch_m: usize,
    /// Length of the enriched candidate list.
    pub enrich_cap: usize,
    pub fusion: FusionMode,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitFractions,
    pub ablation: AblationConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        let s = SplitSpec::default();
        SplitFractions {
            train: s.train,
            val: s.val,
            test: s.test,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            papers: "papers.jsonl".into(),
            contexts: "contexts.jsonl".into(),
            mapping: None,
            acm_tree: None,
            work_dir: "work".into(),
            index: None,
            fused: None,
            checkpoint: None,
            embedder: EmbedderConfig::default(),
            prefetch_m: PipelineConfig::default().prefetch_m,
            enrich_cap: PipelineConfig::default().enrich_cap,
            fusion: FusionMode::Vector,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split: SplitFractions::default(),
            ablation: AblationConfig::default(),
            seed: DEFAULT_SEED,
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// The desk-scale synthetic experiment. The candidate pool is scaled to a
    /// 200-paper corpus and the learning rate raised for plain SGD on under
    /// a thousand training contexts. Inputs sit next to the config file.
    pub fn standard_synthetic() -> Self {
        RunConfig {
            mapping: Some("mapping.json".into()),
            acm_tree: Some("acm_tree.json".into()),
            prefetch_m: 20,
            enrich_cap: 60,
            train: TrainConfig {
                lr: 0.05,
                ..TrainConfig::default()
            },
            ..RunConfig::default()
        }
    }

    /// Parse a config file. Relative paths are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        rebase(base, &mut self.papers);
        rebase(base, &mut self.contexts);
        rebase(base, &mut self.work_dir);
        for p in [&mut self.mapping, &mut self.acm_tree, &mut self.index, &mut self.fused, &mut self.checkpoint]
            .into_iter()
            .flatten()
        {
            rebase(base, p);
        }
        if let EmbedderConfig::Precomputed { path } = &mut self.embedder {
            rebase(base, path);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline().validate()?;
        self.split_spec().validate()?;
        self.model.validate()?;
        let t = &self.train;
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", t.lr)));
        }
        if !(t.weight_decay >= 0.0 && t.weight_decay.is_finite()) {
            return Err(Error::invalid(format!("weight decay must be non-negative, got {}", t.weight_decay)));
        }
        if t.batch_size == 0 || t.n_neg == 0 {
            return Err(Error::invalid("batch size and negatives per query must be positive"));
        }
        if self.mapping.is_some() != self.acm_tree.is_some() {
            return Err(Error::invalid("mapping and acm_tree must be given together"));
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            prefetch_m: self.prefetch_m,
            enrich_cap: self.enrich_cap,
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train: self.split.train,
            val: self.split.val,
            test: self.split.test,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train
        }
    }

    /// Model shape with input widths tied to the embedder dimension and the
    /// ablation flags applied.
    pub fn model_config(&self, embed_dim: usize) -> ModelConfig {
        let mut m = self.ablation.model_config(&self.model);
        m.fused_dim = embed_dim;
        m.text_dim = embed_dim;
        m
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.work_dir.join("corpus")
    }

    /// Validated papers written by `ingest`.
    pub fn bundle_papers(&self) -> PathBuf {
        self.corpus_dir().join("papers.jsonl")
    }

    /// Validated contexts written by `ingest`.
    pub fn bundle_contexts(&self) -> PathBuf {
        self.corpus_dir().join("contexts.jsonl")
    }

    pub fn index_path(&self) -> PathBuf {
        self.index.clone().unwrap_or_else(|| self.work_dir.join("index.crix"))
    }

    pub fn fused_path(&self) -> PathBuf {
        self.fused.clone().unwrap_or_else(|| self.work_dir.join("fused.json"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.work_dir.join("model.ckpt"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_uses_defaults_and_rebases() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        fs::write(&p, r#"{"prefetch_m": 20, "train": {"lr": 0.05}, "seed": 7}"#).unwrap();
        let cfg = RunConfig::load(&p).unwrap();
        assert_eq!(cfg.prefetch_m, 20);
        assert_eq!(cfg.enrich_cap, 300);
        assert_eq!(cfg.train.lr, 0.05);
        assert_eq!(cfg.train.epochs, 20);
        assert_eq!(cfg.train_config().seed, 7);
        assert_eq!(cfg.split_spec().seed, 7);
        assert_eq!(cfg.papers, dir.path().join("papers.jsonl"));
        assert_eq!(cfg.checkpoint_path(), dir.path().join("work").join("model.ckpt"));
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_fields_and_bad_values_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        fs::write(&p, r#"{"prefech_m": 20}"#).unwrap();
        assert!(RunConfig::load(&p).is_err());
        let cfg = RunConfig {
            train: TrainConfig {
                lr: -1.0,
                ..TrainConfig::default()
            },
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_roundtrip() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }
}
