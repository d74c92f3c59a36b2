//! Single-gold ranking metrics. A gold id missing from the list scores 0.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::reranker::RankedList;

pub const RECALL_KS: [usize; 4] = [5, 10, 20, 50];

pub fn recall_at_k(ranked: &RankedList, gold: &str, k: usize) -> f64 {
    match ranked.rank_of(gold) {
        Some(r) if r <= k => 1.0,
        _ => 0.0,
    }
}

pub fn mrr(ranked: &RankedList, gold: &str) -> f64 {
    ranked.rank_of(gold).map_or(0.0, |r| 1.0 / r as f64)
}

/// `1 / log₂(1 + rank)` inside the top 10; the ideal DCG is 1.
pub fn ndcg_at_10(ranked: &RankedList, gold: &str) -> f64 {
    match ranked.rank_of(gold) {
        Some(r) if r <= 10 => 1.0 / ((1 + r) as f64).log2(),
        _ => 0.0,
    }
}

/// Per-query metrics, in the order recall@{5,10,20,50}, ndcg@10, mrr.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub rank: Option<usize>,
    pub recall: [f64; 4],
    pub ndcg10: f64,
    pub mrr: f64,
}

impl QueryMetrics {
    pub fn compute(ranked: &RankedList, gold: &str) -> Self {
        QueryMetrics {
            rank: ranked.rank_of(gold),
            recall: RECALL_KS.map(|k| recall_at_k(ranked, gold, k)),
            ndcg10: ndcg_at_10(ranked, gold),
            mrr: mrr(ranked, gold),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "recall@5")]
    pub recall5: f64,
    #[serde(rename = "recall@10")]
    pub recall10: f64,
    #[serde(rename = "recall@20")]
    pub recall20: f64,
    #[serde(rename = "recall@50")]
    pub recall50: f64,
    #[serde(rename = "ndcg@10")]
    pub ndcg10: f64,
    pub mrr: f64,
    pub queries: usize,
}

impl MetricReport {
    /// Mean over `per_query`, summed in slice order.
    pub fn aggregate(per_query: &[QueryMetrics]) -> Self {
        let n = per_query.len();
        if n == 0 {
            return MetricReport::default();
        }
        let mut sums = [0.0; 6];
        for q in per_query {
            for (s, v) in sums.iter_mut().zip(q.recall.iter().chain([&q.ndcg10, &q.mrr])) {
                *s += v;
            }
        }
        let m = sums.map(|s| s / n as f64);
        MetricReport {
            recall5: m[0],
            recall10: m[1],
            recall20: m[2],
            recall50: m[3],
            ndcg10: m[4],
            mrr: m[5],
            queries: n,
        }
    }

    pub fn header() -> &'static str {
        "    R@5    R@10    R@20    R@50    NDCG     MRR       n"
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7}",
            self.recall5, self.recall10, self.recall20, self.recall50, self.ndcg10, self.mrr, self.queries
        )
    }
}
