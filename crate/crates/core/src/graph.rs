//! Heterogeneous drug/gene graph.
//!
//! Nodes are typed as drugs or genes and drug nodes always occupy the first
//! `m` indices. Edges are undirected, deduplicated and never connect two
//! drugs. Adjacency is stored in CSR form with sorted neighbor lists.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Drug,
    Gene,
}

impl NodeKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "drug" => Ok(NodeKind::Drug),
            "gene" => Ok(NodeKind::Gene),
            other => Err(Error::UnknownNodeType(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Drug => "drug",
            NodeKind::Gene => "gene",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRef {
    pub id: String,
    pub kind: NodeKind,
    pub index: usize,
}

/// One row of the edge table: `node_1,type_1,node_2,type_2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub node_1: String,
    pub type_1: String,
    pub node_2: String,
    pub type_2: String,
}

impl EdgeRow {
    pub fn new(node_1: &str, type_1: &str, node_2: &str, type_2: &str) -> Self {
        Self {
            node_1: node_1.to_string(),
            type_1: type_1.to_string(),
            node_2: node_2.to_string(),
            type_2: type_2.to_string(),
        }
    }
}

/// Immutable heterogeneous graph. Safe to share across threads.
#[derive(Debug, Clone)]
pub struct HeteroGraph {
    nodes: Vec<NodeRef>,
    index_of: HashMap<String, usize>,
    drug_count: usize,
    /// Each undirected edge once, as `(u, v)` with `u < v`, sorted.
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl HeteroGraph {
    /// Builds the graph from edge rows.
    ///
    /// Indices are assigned by first appearance within each kind, with all
    /// drugs placed before all genes. Duplicate edges collapse.
    pub fn from_rows(rows: &[EdgeRow]) -> Result<Self> {
        Self::from_parts(&[], rows)
    }

    /// Like [`HeteroGraph::from_rows`], but registers `declared` nodes first.
    /// Declared nodes without edges become isolated nodes.
    pub fn from_parts(declared: &[(&str, NodeKind)], rows: &[EdgeRow]) -> Result<Self> {
        if rows.is_empty() && declared.is_empty() {
            return Err(Error::EmptyInput);
        }

        let mut kinds: HashMap<&str, NodeKind> = HashMap::new();
        let mut drugs: Vec<&str> = Vec::new();
        let mut genes: Vec<&str> = Vec::new();
        for &(id, kind) in declared {
            match kinds.get(id) {
                Some(&seen) if seen != kind => {
                    return Err(Error::ConflictingNodeType { id: id.to_string() })
                }
                Some(_) => {}
                None => {
                    kinds.insert(id, kind);
                    match kind {
                        NodeKind::Drug => drugs.push(id),
                        NodeKind::Gene => genes.push(id),
                    }
                }
            }
        }
        for row in rows {
            let k1 = NodeKind::parse(&row.type_1)?;
            let k2 = NodeKind::parse(&row.type_2)?;
            if row.node_1 == row.node_2 {
                return Err(Error::SelfLoop(row.node_1.clone()));
            }
            if k1 == NodeKind::Drug && k2 == NodeKind::Drug {
                return Err(Error::DrugDrugEdge(row.node_1.clone(), row.node_2.clone()));
            }
            for (id, kind) in [(row.node_1.as_str(), k1), (row.node_2.as_str(), k2)] {
                match kinds.get(id) {
                    Some(&seen) if seen != kind => {
                        return Err(Error::ConflictingNodeType { id: id.to_string() })
                    }
                    Some(_) => {}
                    None => {
                        kinds.insert(id, kind);
                        match kind {
                            NodeKind::Drug => drugs.push(id),
                            NodeKind::Gene => genes.push(id),
                        }
                    }
                }
            }
        }

        let drug_count = drugs.len();
        let nodes: Vec<NodeRef> = drugs
            .iter()
            .map(|id| (id, NodeKind::Drug))
            .chain(genes.iter().map(|id| (id, NodeKind::Gene)))
            .enumerate()
            .map(|(index, (id, kind))| NodeRef {
                id: id.to_string(),
                kind,
                index,
            })
            .collect();
        let index_of: HashMap<String, usize> =
            nodes.iter().map(|n| (n.id.clone(), n.index)).collect();

        let mut edges: Vec<(usize, usize)> = rows
            .iter()
            .map(|row| {
                let a = index_of[&row.node_1];
                let b = index_of[&row.node_2];
                (a.min(b), a.max(b))
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();

        let n = nodes.len();
        let mut degree = vec![0usize; n];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; edges.len() * 2];
        for &(u, v) in &edges {
            neighbors[cursor[u]] = v;
            cursor[u] += 1;
        }
        for &(u, v) in &edges {
            neighbors[cursor[v]] = u;
            cursor[v] += 1;
        }
        for u in 0..n {
            neighbors[offsets[u]..offsets[u + 1]].sort_unstable();
        }

        Ok(Self {
            nodes,
            index_of,
            drug_count,
            edges,
            offsets,
            neighbors,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn drug_count(&self) -> usize {
        self.drug_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[NodeRef] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &NodeRef {
        &self.nodes[index]
    }

    pub fn drugs(&self) -> &[NodeRef] {
        &self.nodes[..self.drug_count]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index_of.get(id).copied()
    }

    pub fn degree(&self, index: usize) -> usize {
        self.offsets[index + 1] - self.offsets[index]
    }

    pub fn neighbors(&self, index: usize) -> &[usize] {
        &self.neighbors[self.offsets[index]..self.offsets[index + 1]]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Resolves `id` to a drug index.
    pub fn drug_index(&self, id: &str) -> Result<usize> {
        match self.index_of(id) {
            Some(i) if self.nodes[i].kind == NodeKind::Drug => Ok(i),
            _ => Err(Error::UnknownDrug(id.to_string())),
        }
    }

    pub fn normalized(&self) -> NormalizedAdjacency<'_> {
        NormalizedAdjacency { graph: self }
    }

    /// Validates a labeled drug-pair table against this graph.
    ///
    /// Unordered duplicates with the same label collapse to their first
    /// occurrence; duplicates with different labels are an error.
    pub fn validate_targets(&self, rows: &[TargetRow]) -> Result<TargetTable> {
        let mut seen: HashMap<(usize, usize), u8> = HashMap::new();
        let mut pairs = Vec::new();
        for row in rows {
            let a = self.resolve_pair_member(&row.drug_1)?;
            let b = self.resolve_pair_member(&row.drug_2)?;
            if row.label > 1 {
                return Err(Error::InvalidLabel(row.label.to_string()));
            }
            let key = (a.min(b), a.max(b));
            match seen.get(&key) {
                Some(&label) if label != row.label => {
                    return Err(Error::ConflictingDuplicateLabel(
                        row.drug_1.clone(),
                        row.drug_2.clone(),
                    ))
                }
                Some(_) => {}
                None => {
                    seen.insert(key, row.label);
                    pairs.push(row.clone());
                }
            }
        }
        Ok(TargetTable { pairs })
    }

    fn resolve_pair_member(&self, id: &str) -> Result<usize> {
        match self.index_of(id) {
            None => Err(Error::UnknownDrug(id.to_string())),
            Some(i) if self.nodes[i].kind != NodeKind::Drug => {
                Err(Error::NonDrugNodeInPair(id.to_string()))
            }
            Some(i) => Ok(i),
        }
    }
}

/// Column-stochastic view `A D^-1` of a [`HeteroGraph`].
///
/// Column `v` sends `1 / degree(v)` to each neighbor of `v`. Isolated nodes
/// keep their mass (identity column).
#[derive(Debug, Clone, Copy)]
pub struct NormalizedAdjacency<'a> {
    graph: &'a HeteroGraph,
}

impl<'a> NormalizedAdjacency<'a> {
    pub fn graph(&self) -> &'a HeteroGraph {
        self.graph
    }

    pub fn dim(&self) -> usize {
        self.graph.node_count()
    }

    /// Returns `Ã x`.
    pub fn multiply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        let mut out = vec![0.0; n];
        self.multiply_into(x, &mut out);
        Ok(out)
    }

    /// Writes `Ã x` into `out`. Both slices must have length `n`.
    ///
    /// Mass is pushed from sources in ascending index order so every output
    /// entry is summed in the same order on every run.
    pub(crate) fn multiply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert!(x.iter().all(|v| v.is_finite()));
        out.iter_mut().for_each(|o| *o = 0.0);
        for (v, &mass) in x.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let nbrs = self.graph.neighbors(v);
            if nbrs.is_empty() {
                out[v] += mass;
                continue;
            }
            let share = mass / nbrs.len() as f64;
            for &u in nbrs {
                out[u] += share;
            }
        }
    }
}

/// One row of the target table: `drug_1,drug_2,label`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetRow {
    pub drug_1: String,
    pub drug_2: String,
    pub label: u8,
}

impl TargetRow {
    pub fn new(drug_1: &str, drug_2: &str, label: u8) -> Self {
        Self {
            drug_1: drug_1.to_string(),
            drug_2: drug_2.to_string(),
            label,
        }
    }
}

/// Target pairs that passed [`HeteroGraph::validate_targets`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetTable {
    pub pairs: Vec<TargetRow>,
}

impl TargetTable {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.pairs.iter().filter(|p| p.label == 1).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> HeteroGraph {
        HeteroGraph::from_rows(&[
            EdgeRow::new("g0", "gene", "g1", "gene"),
            EdgeRow::new("g0", "gene", "g2", "gene"),
            EdgeRow::new("d0", "drug", "g0", "gene"),
        ])
        .unwrap()
    }

    fn unit(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn ingest_small_graph() {
        let g = HeteroGraph::from_rows(&[
            EdgeRow::new("d1", "drug", "g1", "gene"),
            EdgeRow::new("g1", "gene", "g2", "gene"),
        ])
        .unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.drug_count(), 1);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.node(0).id, "d1");
        assert_eq!(g.node(1).id, "g1");
    }

    #[test]
    fn drugs_come_first_in_first_seen_order() {
        let g = HeteroGraph::from_rows(&[
            EdgeRow::new("g1", "gene", "g2", "gene"),
            EdgeRow::new("g2", "gene", "dB", "drug"),
            EdgeRow::new("dA", "drug", "g1", "gene"),
        ])
        .unwrap();
        let ids: Vec<_> = g.nodes().iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["dB", "dA", "g1", "g2"]);
        assert_eq!(g.drug_count(), 2);
        for (i, n) in g.nodes().iter().enumerate() {
            assert_eq!(n.index, i);
        }
    }

    #[test]
    fn rejects_drug_drug_edge() {
        let err = HeteroGraph::from_rows(&[EdgeRow::new("d1", "drug", "d2", "drug")]).unwrap_err();
        assert!(matches!(err, Error::DrugDrugEdge(..)));
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(
            HeteroGraph::from_rows(&[EdgeRow::new("d1", "Drug", "g1", "gene")]),
            Err(Error::UnknownNodeType(t)) if t == "Drug"
        ));
        assert!(matches!(
            HeteroGraph::from_rows(&[EdgeRow::new("g1", "gene", "g1", "gene")]),
            Err(Error::SelfLoop(_))
        ));
        assert!(matches!(HeteroGraph::from_rows(&[]), Err(Error::EmptyInput)));
        assert!(matches!(
            HeteroGraph::from_rows(&[
                EdgeRow::new("x", "drug", "g1", "gene"),
                EdgeRow::new("x", "gene", "g2", "gene"),
            ]),
            Err(Error::ConflictingNodeType { .. })
        ));
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = HeteroGraph::from_rows(&[
            EdgeRow::new("d1", "drug", "g1", "gene"),
            EdgeRow::new("d1", "drug", "g1", "gene"),
            EdgeRow::new("g1", "gene", "d1", "drug"),
        ])
        .unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.degree(0), 1);
        assert!(g.has_edge(0, 1) && g.has_edge(1, 0));
    }

    #[test]
    fn star_multiply_spreads_evenly() {
        let g = star();
        let a = g.normalized();
        let g0 = g.index_of("g0").unwrap();
        let out = a.multiply(&unit(4, g0)).unwrap();
        for id in ["g1", "g2", "d0"] {
            assert!((out[g.index_of(id).unwrap()] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(out[g0], 0.0);
    }

    #[test]
    fn single_neighbor_moves_all_mass() {
        let g = star();
        let d0 = g.index_of("d0").unwrap();
        let out = g.normalized().multiply(&unit(4, d0)).unwrap();
        assert_eq!(out, unit(4, g.index_of("g0").unwrap()));
    }

    #[test]
    fn isolated_node_keeps_mass() {
        let g = HeteroGraph::from_parts(
            &[("lonely", NodeKind::Gene)],
            &[EdgeRow::new("d0", "drug", "g0", "gene")],
        )
        .unwrap();
        let v = g.index_of("lonely").unwrap();
        assert_eq!(g.degree(v), 0);
        assert_eq!(g.normalized().multiply(&unit(3, v)).unwrap(), unit(3, v));
    }

    #[test]
    fn multiply_checks_length() {
        let g = star();
        assert!(matches!(
            g.normalized().multiply(&[1.0]),
            Err(Error::DimensionMismatch { expected: 4, actual: 1 })
        ));
    }

    #[test]
    fn targets_validate() {
        let g = HeteroGraph::from_rows(&[
            EdgeRow::new("d1", "drug", "g1", "gene"),
            EdgeRow::new("d2", "drug", "g1", "gene"),
        ])
        .unwrap();
        let t = g.validate_targets(&[TargetRow::new("d1", "d2", 1)]).unwrap();
        assert_eq!(t.len(), 1);

        assert!(matches!(
            g.validate_targets(&[TargetRow::new("d1", "g1", 0)]),
            Err(Error::NonDrugNodeInPair(id)) if id == "g1"
        ));
        assert!(matches!(
            g.validate_targets(&[TargetRow::new("d1", "d9", 0)]),
            Err(Error::UnknownDrug(_))
        ));
        assert!(matches!(
            g.validate_targets(&[TargetRow::new("d1", "d2", 1), TargetRow::new("d2", "d1", 0)]),
            Err(Error::ConflictingDuplicateLabel(..))
        ));
        let t = g
            .validate_targets(&[TargetRow::new("d1", "d2", 1), TargetRow::new("d2", "d1", 1)])
            .unwrap();
        assert_eq!(t.pairs, vec![TargetRow::new("d1", "d2", 1)]);
    }
}
