//! Candidate-list enrichment through outgoing citation neighbourhoods.
//!
//! Every prefetched candidate contributes itself and the papers it cites.
//! The union is counted as a multiset, so a paper cited by several
//! candidates (or itself prefetched and cited) gets a higher frequency.
//! The list is ordered by that frequency and capped.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::CitationGraph;
use crate::error::{Error, Result};
use crate::prefetch::CandidateList;

pub const DEFAULT_CAP: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Prefetched,
    Ego,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichedItem {
    pub id: String,
    pub frequency: usize,
    pub origin: Origin,
    /// Position in the prefetched list, for prefetched ids.
    pub prefetch_rank: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichedList {
    pub items: Vec<EnrichedItem>,
}

impl EnrichedList {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.id.as_str())
    }

    /// Unenriched pass-through of a prefetched list, each with frequency one.
    pub fn from_candidates(candidates: &CandidateList) -> Self {
        EnrichedList {
            items: candidates
                .ids()
                .enumerate()
                .map(|(rank, id)| EnrichedItem {
                    id: id.to_owned(),
                    frequency: 1,
                    origin: Origin::Prefetched,
                    prefetch_rank: Some(rank),
                })
                .collect(),
        }
    }
}

/// Papers cited by `u`. Incoming neighbours are never included.
pub fn ego_out(graph: &CitationGraph, u: &str) -> Result<BTreeSet<String>> {
    graph
        .out_neighbors(u)
        .map(|it| it.map(str::to_owned).collect())
        .ok_or_else(|| Error::unknown("graph node", u))
}

/// Enrich `candidates` with their outgoing ego networks and keep the `cap`
/// most frequent ids. Candidates absent from the graph cite nothing.
/// `exclude` (the querying paper) never appears in the output.
pub fn enrich(candidates: &CandidateList, graph: &CitationGraph, cap: usize, exclude: Option<&str>) -> EnrichedList {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    let mut rank: BTreeMap<&str, usize> = BTreeMap::new();
    for (r, c) in candidates.ids().enumerate() {
        *freq.entry(c).or_insert(0) += 1;
        rank.entry(c).or_insert(r);
        if let Some(out) = graph.out_neighbors(c) {
            for v in out {
                *freq.entry(v).or_insert(0) += 1;
            }
        }
    }
    let mut items: Vec<EnrichedItem> = freq
        .into_iter()
        .filter(|(id, _)| Some(*id) != exclude)
        .map(|(id, frequency)| {
            let prefetch_rank = rank.get(id).copied();
            EnrichedItem {
                id: id.to_owned(),
                frequency,
                origin: if prefetch_rank.is_some() { Origin::Prefetched } else { Origin::Ego },
                prefetch_rank,
            }
        })
        .collect();
    items.sort_by(|a, b| {
        b.frequency
            .cmp(&a.frequency)
            .then_with(|| a.prefetch_rank.unwrap_or(usize::MAX).cmp(&b.prefetch_rank.unwrap_or(usize::MAX)))
            .then_with(|| a.id.cmp(&b.id))
    });
    items.truncate(cap);
    EnrichedList { items }
}
