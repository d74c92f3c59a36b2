//! Invariants checked over generated inputs.

mod common;

use std::collections::BTreeSet;

use citerec::corpus::{split_contexts, CitationContext, SplitSpec};
use citerec::embedder::l2_norm;
use citerec::enricher::enrich;
use citerec::eval::QueryMetrics;
use citerec::hypermath::{mobius_add, separation, GeometryMode};
use citerec::reranker::{triplet_loss, RankedList};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ball_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0f64..1.0, d), 0.0f64..0.9).prop_map(|(v, r)| {
        let n = l2_norm(&v);
        if n == 0.0 {
            v
        } else {
            v.iter().map(|x| x * r / n).collect()
        }
    })
}

proptest! {
    #[test]
    fn triplet_loss_is_non_negative(p in 0.0f64..1.0, n in 0.0f64..1.0, m in 0.0f64..1.0) {
        let l = triplet_loss(p, n, m);
        prop_assert!(l >= 0.0);
        prop_assert!(l >= n - p + m);
    }

    #[test]
    fn ranking_metrics_bounded_and_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ids, gold) = random_ranking(&mut rng);
        let m = QueryMetrics::compute(&RankedList::from_ids(&ids), &gold);
        prop_assert!(m.recall.windows(2).all(|w| w[0] <= w[1]));
        for v in m.recall.iter().chain([&m.ndcg10, &m.mrr]) {
            prop_assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn mobius_identities((a, b) in (2usize..10).prop_flat_map(|d| (ball_point(d), ball_point(d)))) {
        let zero = vec![0.0; a.len()];
        let a0 = mobius_add(&a, &zero).unwrap();
        prop_assert!(a0.iter().zip(&a).all(|(x, y)| (x - y).abs() <= 1e-12));
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        prop_assert!(l2_norm(&mobius_add(&neg, &a).unwrap()) <= 1e-12);
        prop_assert!(l2_norm(&mobius_add(&a, &b).unwrap()) < 1.0);
        for mode in [GeometryMode::PaperAtan, GeometryMode::Artanh, GeometryMode::Euclidean] {
            let s1 = separation(&a, &b, mode).unwrap();
            let s2 = separation(&b, &a, mode).unwrap();
            prop_assert!(s1 >= 0.0);
            prop_assert!((s1 - s2).abs() <= 1e-10);
        }
    }

    #[test]
    fn enrich_respects_cap_and_exclusion(seed in any::<u64>(), cap in 1usize..40, m in 1usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = random_edges(40, 0.05, &mut rng);
        let g = graph_of(&edges);
        let cands: Vec<String> = (0..m).map(|i| node((i * 7 + seed as usize % 40) % 40)).collect::<BTreeSet<_>>().into_iter().collect();
        let exclude = node(seed as usize % 40);
        let out = enrich(&candidate_list(&cands), &g, cap, Some(&exclude));
        prop_assert!(out.len() <= cap);
        let ids: BTreeSet<&str> = out.ids().collect();
        prop_assert_eq!(ids.len(), out.len());
        prop_assert!(!ids.contains(exclude.as_str()));
        prop_assert!(out.items.windows(2).all(|w| w[0].frequency >= w[1].frequency));
    }

    #[test]
    fn split_partitions_contexts(n in 0usize..300, seed in any::<u64>()) {
        let contexts: Vec<CitationContext> = (0..n)
            .map(|i| CitationContext {
                context_id: format!("c{i}"),
                citing_id: "a".into(),
                cited_id: "b".into(),
                text: String::new(),
                section_heading: None,
            })
            .collect();
        let spec = SplitSpec { seed, ..SplitSpec::default() };
        let s = split_contexts(&contexts, &spec).unwrap();
        prop_assert_eq!(s.train.len(), (0.8 * n as f64 + 1e-9).floor() as usize);
        prop_assert_eq!(s.val.len(), (0.1 * n as f64 + 1e-9).floor() as usize);
        prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), n);
        let all: BTreeSet<&str> = s.train.iter().chain(&s.val).chain(&s.test).map(|c| c.context_id.as_str()).collect();
        prop_assert_eq!(all.len(), n);
    }

    #[test]
    fn ranked_list_sorted(scores in prop::collection::vec(-5.0f64..5.0, 0..40)) {
        let items = scores
            .iter()
            .enumerate()
            .map(|(i, &score)| citerec::prefetch::ScoredId { id: format!("x{i}"), score })
            .collect();
        let r = RankedList::from_scored(items);
        prop_assert!(r.items.windows(2).all(|w| w[0].score > w[1].score || (w[0].score == w[1].score && w[0].id < w[1].id)));
    }
}
