//! Naive reference implementations shared by the integration tests. Each one
//! recomputes a quantity by the most direct route available, sharing no code
//! with the library beyond plain data types.

#![allow(dead_code)]

use std::collections::BTreeSet;

use citerec::corpus::CitationGraph;
use citerec::prefetch::{CandidateList, ScoredId};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn node(i: usize) -> String {
    format!("n{i:03}")
}

/// Random directed edge list over `n` nodes without self loops. Every node
/// gets at least one edge so that it shows up in the graph.
pub fn random_edges<R: Rng>(n: usize, p: f64, rng: &mut R) -> Vec<(String, String)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(p) {
                edges.push((node(u), node(v)));
            }
        }
    }
    for u in 0..n {
        let v = (u + 1) % n;
        edges.push((node(u), node(v)));
    }
    edges
}

pub fn graph_of(edges: &[(String, String)]) -> CitationGraph {
    CitationGraph::from_edges(edges.iter().map(|(u, v)| (u.as_str(), v.as_str()))).unwrap()
}

/// Local clustering by enumerating every unordered neighbour pair of every
/// node against a dense adjacency matrix. Nodes are in ascending id order.
pub fn clustering_oracle(edges: &[(String, String)]) -> Vec<f64> {
    let names: BTreeSet<&str> = edges.iter().flat_map(|(u, v)| [u.as_str(), v.as_str()]).collect();
    let names: Vec<&str> = names.into_iter().collect();
    let n = names.len();
    let pos = |s: &str| names.iter().position(|x| *x == s).unwrap();
    let mut adj = vec![vec![false; n]; n];
    for (u, v) in edges {
        let (a, b) = (pos(u), pos(v));
        adj[a][b] = true;
        adj[b][a] = true;
    }
    (0..n)
        .map(|i| {
            let nbrs: Vec<usize> = (0..n).filter(|&j| j != i && adj[i][j]).collect();
            let k = nbrs.len();
            if k < 2 {
                return 0.0;
            }
            let mut closed = 0usize;
            for a in 0..k {
                for b in a + 1..k {
                    if adj[nbrs[a]][nbrs[b]] {
                        closed += 1;
                    }
                }
            }
            closed as f64 / (k * (k - 1) / 2) as f64
        })
        .collect()
}

/// `(id, frequency, prefetch position)` triples of the enriched list, built
/// with nested loops over the raw edge list.
pub fn enrich_oracle(candidates: &[String], edges: &[(String, String)], cap: usize, exclude: Option<&str>) -> Vec<(String, usize, Option<usize>)> {
    let mut multiset: Vec<String> = Vec::new();
    for c in candidates {
        multiset.push(c.clone());
        let mut cited: Vec<&String> = edges.iter().filter(|(u, _)| u == c).map(|(_, v)| v).collect();
        cited.sort();
        cited.dedup();
        multiset.extend(cited.into_iter().cloned());
    }
    let mut distinct: Vec<String> = multiset.clone();
    distinct.sort();
    distinct.dedup();
    let mut rows: Vec<(String, usize, Option<usize>)> = distinct
        .into_iter()
        .filter(|id| Some(id.as_str()) != exclude)
        .map(|id| {
            let f = multiset.iter().filter(|x| **x == id).count();
            let r = candidates.iter().position(|c| *c == id);
            (id, f, r)
        })
        .collect();
    rows.sort_by(|a, b| {
        let ra = a.2.unwrap_or(usize::MAX);
        let rb = b.2.unwrap_or(usize::MAX);
        b.1.cmp(&a.1).then(ra.cmp(&rb)).then(a.0.cmp(&b.0))
    });
    rows.truncate(cap);
    rows
}

pub fn candidate_list(ids: &[String]) -> CandidateList {
    let n = ids.len() as f64;
    CandidateList {
        items: ids
            .iter()
            .enumerate()
            .map(|(i, id)| ScoredId {
                id: id.clone(),
                score: 1.0 - i as f64 / n,
            })
            .collect(),
    }
}

/// Random ranked list over ids `d0..d{len}` with the gold either placed at
/// a random position or left out.
pub fn random_ranking<R: Rng>(rng: &mut R) -> (Vec<String>, String) {
    let len = rng.gen_range(0..80);
    let mut ids: Vec<String> = (0..len).map(|i| format!("d{i}")).collect();
    ids.shuffle(rng);
    let gold = if len > 0 && rng.gen_bool(0.7) {
        ids[rng.gen_range(0..len)].clone()
    } else {
        "gold-absent".to_owned()
    };
    (ids, gold)
}

/// `(R@5, R@10, R@20, R@50, NDCG@10, MRR)` by a linear scan.
pub fn metric_oracle(ids: &[String], gold: &str) -> [f64; 6] {
    let mut rank = 0;
    for (i, id) in ids.iter().enumerate() {
        if id == gold {
            rank = i + 1;
            break;
        }
    }
    if rank == 0 {
        return [0.0; 6];
    }
    let hit = |k: usize| if rank <= k { 1.0 } else { 0.0 };
    let ndcg = if rank <= 10 { 1.0 / ((rank + 1) as f64).log2() } else { 0.0 };
    [hit(5), hit(10), hit(20), hit(50), ndcg, 1.0 / rank as f64]
}

/// Dense propagation `Z ← (1−α)·Â·Z + α·Z₀` with `Â = D^{-1/2}(A+I)D^{-1/2}`,
/// as explicit matrix products. Returns the final `Z` and every step's
/// Frobenius change.
pub fn dense_propagation(adj: &[Vec<bool>], z0: &[Vec<f64>], alpha: f64, iters: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = adj.len();
    let d = z0[0].len();
    let deg: Vec<f64> = (0..n)
        .map(|i| 1.0 + (0..n).filter(|&j| j != i && adj[i][j]).count() as f64)
        .collect();
    let mut a_hat = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j || adj[i][j] {
                a_hat[i][j] = 1.0 / (deg[i].sqrt() * deg[j].sqrt());
            }
        }
    }
    let mut z = z0.to_vec();
    let mut deltas = Vec::new();
    for _ in 0..iters {
        let mut next = vec![vec![0.0; d]; n];
        for i in 0..n {
            for c in 0..d {
                let mut s = 0.0;
                for j in 0..n {
                    s += a_hat[i][j] * z[j][c];
                }
                next[i][c] = (1.0 - alpha) * s + alpha * z0[i][c];
            }
        }
        let mut sq = 0.0;
        for i in 0..n {
            for c in 0..d {
                sq += (next[i][c] - z[i][c]).powi(2);
            }
        }
        deltas.push(sq.sqrt());
        z = next;
    }
    (z, deltas)
}

/// Two-layer tanh network evaluated from its raw row-major weights.
pub fn dense_mlp(w1: &[f64], b1: &[f64], w2: &[f64], b2: &[f64], x: &[f64]) -> Vec<f64> {
    let hidden = b1.len();
    let input = x.len();
    let mut h = vec![0.0; hidden];
    for k in 0..hidden {
        let mut s = b1[k];
        for i in 0..input {
            s += w1[k * input + i] * x[i];
        }
        h[k] = s.tanh();
    }
    (0..b2.len())
        .map(|o| {
            let mut s = b2[o];
            for k in 0..hidden {
                s += w2[o * hidden + k] * h[k];
            }
            s
        })
        .collect()
}

/// Scalar Möbius addition, written out term by term.
pub fn mobius_1d(a: f64, b: f64) -> f64 {
    ((1.0 + 2.0 * a * b + b * b) * a + (1.0 - a * a) * b) / (1.0 + 2.0 * a * b + a * a * b * b)
}
