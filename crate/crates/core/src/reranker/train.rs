//! Triplet-loss training with hand-derived gradients.
//!
//! Backpropagation runs through the scoring head, the concatenated
//! separation feature, the separation itself (Möbius addition and ball
//! projection in hyperbolic modes) and the projection network. Fused class
//! vectors stay frozen. Within a minibatch the projection network is run once
//! per distinct category and its upstream gradients are summed per category
//! before a single backward pass.

use std::collections::HashMap;

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fused_vector, mine_negatives, sigmoid, text_relevance, QueryBundle, RerankerModel};
use crate::corpus::{CitationContext, Paper};
use crate::embedder::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::hashing::derive_seed;
use crate::hypermath::{separation_with_grad, ForwardTrace, TwoLayerNet};
use crate::pipeline::{PipelineConfig, PipelineResources};
use crate::taxonomy::FusedClassEmbeddings;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub n_neg: usize,
    /// Sample negatives from the enriched list instead of the prefetched one.
    pub enrich_negatives: bool,
    /// Set from the run seed, never read from config files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            lr: 1e-3,
            weight_decay: 1e-5,
            batch_size: 32,
            n_neg: 4,
            enrich_negatives: false,
            seed: crate::corpus::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean triplet loss per epoch, measured before each minibatch update.
    pub epoch_losses: Vec<f64>,
    pub triplets_per_epoch: Vec<usize>,
}

/// One training example: query, cited paper, sampled negative.
#[derive(Debug, Clone, Copy)]
pub struct PreparedTriplet<'a> {
    pub query: &'a QueryBundle,
    pub positive: &'a Paper,
    pub negative: &'a Paper,
}

/// Gradients with the same shapes as the model's networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub h: TwoLayerNet,
    pub g: TwoLayerNet,
}

impl Gradients {
    pub fn zeros_like(model: &RerankerModel) -> Self {
        Gradients {
            h: TwoLayerNet::zeros(model.h.input, model.h.hidden, model.h.output),
            g: TwoLayerNet::zeros(model.g.input, model.g.hidden, model.g.output),
        }
    }

    pub fn tensors(&self) -> [&Vec<f64>; 8] {
        let [a, b, c, d] = self.h.tensors();
        let [e, f, g, h] = self.g.tensors();
        [a, b, c, d, e, f, g, h]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 8] {
        let [a, b, c, d] = self.h.tensors_mut();
        let [e, f, g, h] = self.g.tensors_mut();
        [a, b, c, d, e, f, g, h]
    }

    fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= k);
        }
    }
}

struct Side {
    feature: Vec<f64>,
    trace: ForwardTrace,
    r: f64,
    /// ∂s/∂u_q and ∂s/∂u_c, when taxonomy is on.
    sep_grads: Option<(Vec<f64>, Vec<f64>)>,
}

struct Projected<'a> {
    input: &'a [f64],
    trace: ForwardTrace,
    upstream: Vec<f64>,
}

fn forward_side<'a>(
    model: &RerankerModel,
    q: &QueryBundle,
    c: &Paper,
    provider: &EmbeddingProvider,
    projected: &HashMap<&'a str, Projected<'a>>,
) -> Result<Side> {
    let mut feature = text_relevance(q, c, provider, model.use_section)?.into_vec();
    let (s, sep_grads) = if model.use_taxonomy {
        let uq = &projected[q.category.as_deref().unwrap_or_default()].trace.output;
        let uc = &projected[c.category.as_deref().unwrap_or_default()].trace.output;
        let (s, gq, gc) = separation_with_grad(uq, uc, model.geometry)?;
        (s, Some((gq, gc)))
    } else {
        (0.0, None)
    };
    feature.push(s);
    let trace = model.g.forward_trace(&feature)?;
    let r = sigmoid(trace.output[0]);
    Ok(Side {
        feature,
        trace,
        r,
        sep_grads,
    })
}

/// Mean triplet loss over `batch` and its gradient with respect to every
/// model parameter (weight decay excluded).
pub fn batch_loss_and_grad(
    model: &RerankerModel,
    batch: &[PreparedTriplet<'_>],
    fused: &FusedClassEmbeddings,
    provider: &EmbeddingProvider,
) -> Result<(f64, Gradients)> {
    let mut grad = Gradients::zeros_like(model);
    if batch.is_empty() {
        return Ok((0.0, grad));
    }
    let mut projected: HashMap<&str, Projected> = HashMap::new();
    if model.use_taxonomy {
        for t in batch {
            for cat in [&t.query.category, &t.positive.category, &t.negative.category] {
                let key = cat.as_deref().unwrap_or_default();
                if !projected.contains_key(key) {
                    let input = fused_vector(fused, cat.as_deref())?;
                    let trace = model.h.forward_trace(input)?;
                    projected.insert(
                        key,
                        Projected {
                            input,
                            trace,
                            upstream: vec![0.0; model.h.output],
                        },
                    );
                }
            }
        }
    }

    let mut total = 0.0;
    for t in batch {
        let pos = forward_side(model, t.query, t.positive, provider, &projected)?;
        let neg = forward_side(model, t.query, t.negative, provider, &projected)?;
        let loss = neg.r - pos.r + model.margin;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite triplet loss (r+ = {}, r- = {})", pos.r, neg.r)));
        }
        if loss <= 0.0 {
            continue;
        }
        total += loss;
        for (side, cand, d_r) in [(&pos, t.positive, -1.0), (&neg, t.negative, 1.0)] {
            let d_logit = d_r * side.r * (1.0 - side.r);
            let g_feat = model
                .g
                .backward(&side.feature, &side.trace, &[d_logit], &mut grad.g, model.use_taxonomy);
            if let (Some(g_feat), Some((gq, gc))) = (g_feat, &side.sep_grads) {
                let ds = *g_feat.last().unwrap();
                let qk = t.query.category.as_deref().unwrap_or_default();
                let ck = cand.category.as_deref().unwrap_or_default();
                let up = &mut projected.get_mut(qk).unwrap().upstream;
                up.iter_mut().zip(gq).for_each(|(u, g)| *u += ds * g);
                let up = &mut projected.get_mut(ck).unwrap().upstream;
                up.iter_mut().zip(gc).for_each(|(u, g)| *u += ds * g);
            }
        }
    }
    let mut keys: Vec<&&str> = projected.keys().collect();
    keys.sort();
    for k in keys {
        let p = &projected[*k];
        if p.upstream.iter().any(|&g| g != 0.0) {
            model.h.backward(p.input, &p.trace, &p.upstream, &mut grad.h, false);
        }
    }
    let n = batch.len() as f64;
    grad.scale(1.0 / n);
    Ok((total / n, grad))
}

fn sgd_step(model: &mut RerankerModel, grad: &Gradients, lr: f64, weight_decay: f64) {
    for (w, g) in model.tensors_mut().into_iter().zip(grad.tensors()) {
        w.iter_mut().zip(g).for_each(|(w, g)| *w -= lr * (g + weight_decay * *w));
    }
}

/// Train `model` in place on `contexts`. Candidates come from the prefetcher
/// (optionally enriched); the cited paper is always the positive.
pub fn train(
    model: &mut RerankerModel,
    contexts: &[CitationContext],
    resources: &PipelineResources,
    pipeline: &PipelineConfig,
    config: &TrainConfig,
) -> Result<TrainReport> {
    let mut report = TrainReport::default();
    if config.epochs == 0 || contexts.is_empty() {
        return Ok(report);
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let corpus = &resources.corpus;
    let queries: Vec<QueryBundle> = contexts
        .iter()
        .map(|c| QueryBundle::from_context(c, corpus))
        .collect::<Result<_>>()?;
    let candidates: Vec<Vec<String>> = queries
        .par_iter()
        .map(|q| {
            let list = resources.prefetch(q, pipeline.prefetch_m)?;
            Ok(if config.enrich_negatives {
                resources.enrich(&list, pipeline.enrich_cap, q.exclude_id()).ids().map(str::to_owned).collect()
            } else {
                list.ids().map(str::to_owned).collect()
            })
        })
        .collect::<Result<_>>()?;
    let positives: Vec<&Paper> = contexts
        .iter()
        .map(|c| corpus.get(&c.cited_id).ok_or_else(|| Error::unknown("paper", &c.cited_id)))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "triplets"));
    for epoch in 0..config.epochs {
        let mut triplets: Vec<PreparedTriplet> = Vec::new();
        for (i, ctx) in contexts.iter().enumerate() {
            for neg in mine_negatives(candidates[i].iter().map(String::as_str), &ctx.cited_id, config.n_neg, &mut rng) {
                triplets.push(PreparedTriplet {
                    query: &queries[i],
                    positive: positives[i],
                    negative: corpus.get(&neg).ok_or_else(|| Error::unknown("paper", &neg))?,
                });
            }
        }
        triplets.shuffle(&mut rng);
        let mut sum = 0.0;
        for batch in triplets.chunks(config.batch_size) {
            let (loss, grad) = batch_loss_and_grad(model, batch, &resources.fused, &resources.provider)?;
            sum += loss * batch.len() as f64;
            sgd_step(model, &grad, config.lr, config.weight_decay);
        }
        let mean = if triplets.is_empty() { 0.0 } else { sum / triplets.len() as f64 };
        if !mean.is_finite() || model.tensors().iter().any(|t| t.iter().any(|w| !w.is_finite())) {
            return Err(Error::Numeric(format!("training diverged at epoch {epoch}")));
        }
        debug!("epoch {epoch}: {} triplets, mean loss {mean:.6}", triplets.len());
        report.epoch_losses.push(mean);
        report.triplets_per_epoch.push(triplets.len());
    }
    Ok(report)
}
