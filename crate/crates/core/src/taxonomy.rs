//! Fusion of the flat arXiv class list into the hierarchical ACM taxonomy.
//!
//! Each arXiv class maps to one or more ACM nodes. Two fusion modes produce
//! one dense vector per arXiv class:
//!
//! * vector fusion: mean of the class-name embedding and the embeddings of
//!   its mapped ACM node names;
//! * graph fusion: the arXiv classes are injected into the ACM tree and node
//!   embeddings are smoothed with personalized-PageRank style propagation
//!   `Z ← (1 − α)·Â·Z + α·Z⁰`, `Â = D̃^{-1/2}(A + I)D̃^{-1/2}`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedder::EmbeddingProvider;
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_ITERS: usize = 10;

/// Mapping shipped with the crate.
pub const BUILTIN_MAPPING: &str = include_str!("../data/mapping.json");
pub const BUILTIN_ACM_TREE: &str = include_str!("../data/acm_tree.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcmNode {
    pub name: String,
    #[serde(default)]
    pub parent: Option<String>,
}

/// ACM node id → node, a rooted forest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AcmTree {
    pub nodes: BTreeMap<String, AcmNode>,
}

impl AcmTree {
    pub fn validate(&self) -> Result<()> {
        for (id, node) in &self.nodes {
            if let Some(p) = &node.parent {
                if !self.nodes.contains_key(p) {
                    return Err(Error::invalid(format!("ACM node `{id}` has unknown parent `{p}`")));
                }
            }
        }
        // Walk up from every node; a path longer than the node count is a cycle.
        for start in self.nodes.keys() {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = &self.nodes[cur].parent {
                steps += 1;
                if steps > self.nodes.len() {
                    return Err(Error::invalid(format!("cycle in ACM tree through `{start}`")));
                }
                cur = p;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArxivClass {
    pub name: String,
    pub acm: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ClassEntry {
    Ids(Vec<String>),
    Named { name: String, acm: Vec<String> },
}

/// arXiv class label → mapped ACM node ids, with display names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyMapping {
    pub classes: BTreeMap<String, ArxivClass>,
}

impl TaxonomyMapping {
    pub fn get(&self, class: &str) -> Option<&ArxivClass> {
        self.classes.get(class)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Every category in `categories` must have an entry.
    pub fn check_covers<'a>(&self, categories: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for c in categories {
            if !self.classes.contains_key(c) {
                return Err(Error::unknown("arXiv class", c));
            }
        }
        Ok(())
    }
}

/// A validated mapping together with its ACM tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    pub mapping: TaxonomyMapping,
    pub tree: AcmTree,
}

impl Taxonomy {
    /// Parse and validate mapping and tree JSON documents. A mapping value
    /// is either a list of ACM ids (the label doubles as display name) or
    /// `{"name": ..., "acm": [...]}`.
    pub fn from_json(mapping_json: &str, tree_json: &str) -> Result<Self> {
        let raw: BTreeMap<String, ClassEntry> =
            serde_json::from_str(mapping_json).map_err(|e| Error::invalid(format!("mapping: {e}")))?;
        let tree: AcmTree = serde_json::from_str(tree_json).map_err(|e| Error::invalid(format!("ACM tree: {e}")))?;
        tree.validate()?;
        if raw.is_empty() {
            return Err(Error::invalid("taxonomy mapping is empty"));
        }
        let mut classes = BTreeMap::new();
        for (label, entry) in raw {
            let class = match entry {
                ClassEntry::Ids(acm) => ArxivClass { name: label.clone(), acm },
                ClassEntry::Named { name, acm } => ArxivClass { name, acm },
            };
            if class.acm.is_empty() {
                return Err(Error::invalid(format!("class `{label}` maps to no ACM node")));
            }
            for id in &class.acm {
                if !tree.nodes.contains_key(id) {
                    return Err(Error::invalid(format!("class `{label}` references unknown ACM node `{id}`")));
                }
            }
            classes.insert(label, class);
        }
        Ok(Taxonomy {
            mapping: TaxonomyMapping { classes },
            tree,
        })
    }

    pub fn builtin() -> Self {
        Taxonomy::from_json(BUILTIN_MAPPING, BUILTIN_ACM_TREE).expect("shipped taxonomy is valid")
    }
}

/// Load `mapping.json` and `acm_tree.json`.
pub fn load_mapping(mapping_path: impl AsRef<Path>, tree_path: impl AsRef<Path>) -> Result<Taxonomy> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
    Taxonomy::from_json(&read(mapping_path.as_ref())?, &read(tree_path.as_ref())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    Vector,
    Graph,
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vector" => Ok(FusionMode::Vector),
            "graph" => Ok(FusionMode::Graph),
            other => Err(Error::invalid(format!("unknown fusion mode `{other}`"))),
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::Vector => "vector",
            FusionMode::Graph => "graph",
        })
    }
}

/// One vector per arXiv class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedClassEmbeddings {
    pub mode: FusionMode,
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl FusedClassEmbeddings {
    pub fn get(&self, class: &str) -> Option<&[f64]> {
        self.vectors.get(class).map(Vec::as_slice)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).map_err(|e| Error::invalid(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let fused: FusedClassEmbeddings = serde_json::from_str(&s).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if let Some((c, v)) = fused.vectors.iter().find(|(_, v)| v.len() != fused.dim || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("class `{c}` has a vector of length {} or non-finite values", v.len()),
            });
        }
        Ok(fused)
    }
}

/// Mean of the class-name embedding and its mapped ACM node-name embeddings.
pub fn vector_fusion(taxonomy: &Taxonomy, provider: &EmbeddingProvider) -> Result<FusedClassEmbeddings> {
    let dim = provider.dim();
    let mut vectors = BTreeMap::new();
    for (label, class) in &taxonomy.mapping.classes {
        let mut acc = provider.embed(&class.name)?.into_vec();
        for id in &class.acm {
            let e = provider.embed(&taxonomy.tree.nodes[id].name)?;
            acc.iter_mut().zip(e.iter()).for_each(|(a, x)| *a += x);
        }
        let n = (1 + class.acm.len()) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        vectors.insert(label.clone(), acc);
    }
    Ok(FusedClassEmbeddings {
        mode: FusionMode::Vector,
        dim,
        vectors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Acm,
    Arxiv,
}

/// ACM nodes plus injected arXiv class nodes, with symmetric links.
#[derive(Debug, Clone, PartialEq)]
pub struct TaxonomyGraph {
    pub ids: Vec<String>,
    pub kinds: Vec<NodeKind>,
    /// Sorted neighbour lists (no self entries).
    pub neighbors: Vec<Vec<usize>>,
    pub init: Vec<Vec<f64>>,
}

impl TaxonomyGraph {
    /// Build from explicit nodes and undirected links. Each link becomes a
    /// pair of directed edges.
    pub fn new(nodes: Vec<(String, NodeKind, Vec<f64>)>, links: &[(usize, usize)]) -> Result<Self> {
        let n = nodes.len();
        let mut neighbors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(a, b) in links {
            if a >= n || b >= n {
                return Err(Error::invalid(format!("link ({a}, {b}) out of range for {n} nodes")));
            }
            if a != b {
                neighbors[a].insert(b);
                neighbors[b].insert(a);
            }
        }
        let (mut ids, mut kinds, mut init) = (Vec::new(), Vec::new(), Vec::new());
        for (id, kind, v) in nodes {
            ids.push(id);
            kinds.push(kind);
            init.push(v);
        }
        Ok(TaxonomyGraph {
            ids,
            kinds,
            neighbors: neighbors.into_iter().map(|s| s.into_iter().collect()).collect(),
            init,
        })
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn directed_edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }
}

/// Inject arXiv classes into the ACM tree. ACM nodes come first (ascending
/// id), then arXiv classes (ascending label).
pub fn build_fusion_graph(taxonomy: &Taxonomy, provider: &EmbeddingProvider) -> Result<TaxonomyGraph> {
    let mut nodes = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (id, node) in &taxonomy.tree.nodes {
        index.insert(id, nodes.len());
        nodes.push((id.clone(), NodeKind::Acm, provider.embed(&node.name)?.into_vec()));
    }
    let mut links = Vec::new();
    for (id, node) in &taxonomy.tree.nodes {
        if let Some(p) = &node.parent {
            links.push((index[p.as_str()], index[id.as_str()]));
        }
    }
    for (label, class) in &taxonomy.mapping.classes {
        let me = nodes.len();
        nodes.push((label.clone(), NodeKind::Arxiv, provider.embed(&class.name)?.into_vec()));
        for id in &class.acm {
            links.push((me, index[id.as_str()]));
        }
    }
    TaxonomyGraph::new(nodes, &links)
}

/// Propagate for `iters` steps and return every node's final row, together
/// with `‖Z^{k+1} − Z^k‖_F` for each step.
pub fn propagate(graph: &TaxonomyGraph, alpha: f64, iters: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let n = graph.node_count();
    let inv_sqrt_deg: Vec<f64> = graph.neighbors.iter().map(|nb| 1.0 / ((nb.len() + 1) as f64).sqrt()).collect();
    let z0 = &graph.init;
    let mut z = z0.clone();
    let mut deltas = Vec::with_capacity(iters);
    for _ in 0..iters {
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            // Self loop first, then neighbours in ascending order.
            let mut row: Vec<f64> = z[i].iter().map(|x| x * inv_sqrt_deg[i] * inv_sqrt_deg[i]).collect();
            for &j in &graph.neighbors[i] {
                let w = inv_sqrt_deg[i] * inv_sqrt_deg[j];
                row.iter_mut().zip(&z[j]).for_each(|(r, x)| *r += w * x);
            }
            row.iter_mut()
                .zip(&z0[i])
                .for_each(|(r, x0)| *r = (1.0 - alpha) * *r + alpha * x0);
            next.push(row);
        }
        let delta = next
            .iter()
            .zip(&z)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)))
            .sum::<f64>()
            .sqrt();
        deltas.push(delta);
        z = next;
    }
    Ok((z, deltas))
}

/// Fused class vectors: the propagated rows of the arXiv nodes.
pub fn graph_fusion(graph: &TaxonomyGraph, alpha: f64, iters: usize) -> Result<FusedClassEmbeddings> {
    let (z, _) = propagate(graph, alpha, iters)?;
    let dim = graph.init.first().map_or(0, Vec::len);
    let vectors = graph
        .ids
        .iter()
        .zip(&graph.kinds)
        .zip(z)
        .filter(|((_, k), _)| **k == NodeKind::Arxiv)
        .map(|((id, _), row)| (id.clone(), row))
        .collect();
    Ok(FusedClassEmbeddings {
        mode: FusionMode::Graph,
        dim,
        vectors,
    })
}

/// Run either fusion mode with default propagation settings.
pub fn fuse(taxonomy: &Taxonomy, provider: &EmbeddingProvider, mode: FusionMode) -> Result<FusedClassEmbeddings> {
    match mode {
        FusionMode::Vector => vector_fusion(taxonomy, provider),
        FusionMode::Graph => graph_fusion(&build_fusion_graph(taxonomy, provider)?, DEFAULT_ALPHA, DEFAULT_ITERS),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::l2_norm;

    #[test]
    fn builtin_cs_cv_mapping() {
        let t = Taxonomy::builtin();
        assert_eq!(t.mapping.get("cs.CV").unwrap().acm, vec!["I.2.10", "I.4", "I.5"]);
        assert_eq!(t.tree.nodes["I.4"].name, "Image Processing and Computer Vision");
        assert_eq!(t.mapping.get("cs.CV").unwrap().name, "Computer Vision");
    }

    #[test]
    fn dangling_reference_rejected() {
        let err = Taxonomy::from_json(r#"{"cs.X": ["Z.9"]}"#, r#"{"A": {"name": "a"}}"#).unwrap_err();
        assert!(err.to_string().contains("cs.X"));
        assert!(err.to_string().contains("Z.9"));
    }

    #[test]
    fn empty_mapping_and_cycles_rejected() {
        assert!(Taxonomy::from_json("{}", r#"{"A": {"name": "a"}}"#).is_err());
        let cyc = r#"{"A": {"name": "a", "parent": "B"}, "B": {"name": "b", "parent": "A"}}"#;
        assert!(Taxonomy::from_json(r#"{"cs.X": ["A"]}"#, cyc).is_err());
        assert!(Taxonomy::from_json(r#"{"cs.X": []}"#, r#"{"A": {"name": "a"}}"#).is_err());
    }

    #[test]
    fn same_name_fuses_to_itself() {
        let t = Taxonomy::from_json(r#"{"cs.X": {"name": "Learning", "acm": ["I.2.6"]}}"#, r#"{"I.2.6": {"name": "Learning"}}"#).unwrap();
        let p = EmbeddingProvider::hashed(64, 0);
        let fused = vector_fusion(&t, &p).unwrap();
        assert_eq!(fused.get("cs.X").unwrap(), &*p.embed("Learning").unwrap());
    }

    #[test]
    fn single_link_graph() {
        let t = Taxonomy::from_json(r#"{"cs.X": ["A"]}"#, r#"{"A": {"name": "a"}}"#).unwrap();
        let g = build_fusion_graph(&t, &EmbeddingProvider::hashed(8, 0)).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.directed_edge_count(), 2);
    }

    #[test]
    fn builtin_graph_shape() {
        let t = Taxonomy::builtin();
        let g = build_fusion_graph(&t, &EmbeddingProvider::hashed(16, 0)).unwrap();
        assert_eq!(g.node_count(), t.tree.nodes.len() + t.mapping.len());
        let cv = g.index_of("cs.CV").unwrap();
        let acm_nbrs = g.neighbors[cv].iter().filter(|&&j| g.kinds[j] == NodeKind::Acm).count();
        assert_eq!(acm_nbrs, 3);
    }

    #[test]
    fn alpha_one_returns_init() {
        let t = Taxonomy::builtin();
        let g = build_fusion_graph(&t, &EmbeddingProvider::hashed(16, 0)).unwrap();
        let fused = graph_fusion(&g, 1.0, 10).unwrap();
        for (label, v) in &fused.vectors {
            assert_eq!(v, &g.init[g.index_of(label).unwrap()]);
        }
        assert!(propagate(&g, 0.0, 1).is_err());
    }

    #[test]
    fn isolated_node_unchanged() {
        let g = TaxonomyGraph::new(
            vec![
                ("a".into(), NodeKind::Arxiv, vec![1.0, -2.0]),
                ("b".into(), NodeKind::Acm, vec![0.5, 0.5]),
                ("c".into(), NodeKind::Acm, vec![3.0, 1.0]),
            ],
            &[(1, 2)],
        )
        .unwrap();
        for alpha in [0.1, 0.5, 0.9] {
            let (z, _) = propagate(&g, alpha, 7).unwrap();
            assert_eq!(z[0], vec![1.0, -2.0]);
        }
    }

    #[test]
    fn vector_fusion_norm_bounded() {
        let t = Taxonomy::builtin();
        let p = EmbeddingProvider::hashed(128, 0);
        let fused = vector_fusion(&t, &p).unwrap();
        for v in fused.vectors.values() {
            assert!(l2_norm(v) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn fused_file_roundtrip() {
        let fused = fuse(&Taxonomy::builtin(), &EmbeddingProvider::hashed(16, 2), FusionMode::Graph).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        fused.write(f.path()).unwrap();
        assert_eq!(FusedClassEmbeddings::read(f.path()).unwrap(), fused);
    }
}
