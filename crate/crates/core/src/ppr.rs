//! Truncated personalized PageRank for drug sources, and top-k pruning.
//!
//! For a drug `d` the score column is
//!
//! ```text
//! x_d = sum_{r=0}^{t-1} a (1-a)^r Ã^r e_d + (1-a)^t Ã^t e_d
//! ```
//!
//! evaluated with `t` sparse multiplications into a dense accumulator. The
//! weights telescope to one, so every column of a column-stochastic `Ã` sums
//! to one.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{HeteroGraph, NormalizedAdjacency};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PprConfig {
    /// Return probability.
    pub alpha: f64,
    pub iterations: usize,
    pub top_k: usize,
}

impl Default for PprConfig {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            iterations: 25,
            top_k: 50,
        }
    }
}

impl PprConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Dense PPR scores, one length-`n` column per drug.
#[derive(Debug, Clone, PartialEq)]
pub struct PprMatrix {
    node_count: usize,
    /// Column-major: column `d` is `data[d * n..(d + 1) * n]`.
    data: Vec<f64>,
}

impl PprMatrix {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn drug_count(&self) -> usize {
        self.data.len().checked_div(self.node_count).unwrap_or(0)
    }

    pub fn column(&self, drug: usize) -> &[f64] {
        &self.data[drug * self.node_count..(drug + 1) * self.node_count]
    }

    pub fn get(&self, node: usize, drug: usize) -> f64 {
        self.data[drug * self.node_count + node]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.node_count)
    }
}

/// Row-sparse `m x n` matrix holding at most `k` entries per drug row.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedPprMatrix {
    col_count: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl PrunedPprMatrix {
    /// Builds a matrix from explicit rows. Entries must be sorted by column,
    /// unique, inside `0..col_count` and finite non-negative.
    pub fn from_rows(col_count: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        for row in &rows {
            for w in row.windows(2) {
                if w[0].0 >= w[1].0 {
                    return Err(Error::InvalidConfig(
                        "sparse row entries must be sorted and unique".into(),
                    ));
                }
            }
            if let Some(&(j, _)) = row.last() {
                if j >= col_count {
                    return Err(Error::DimensionMismatch {
                        expected: col_count,
                        actual: j + 1,
                    });
                }
            }
            if row.iter().any(|&(_, s)| !s.is_finite() || s < 0.0) {
                return Err(Error::InvalidConfig(
                    "sparse scores must be finite and non-negative".into(),
                ));
            }
        }
        Ok(Self { col_count, rows })
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn col_count(&self) -> usize {
        self.col_count
    }

    pub fn row(&self, drug: usize) -> &[(usize, f64)] {
        &self.rows[drug]
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn sum(&self) -> f64 {
        self.rows.iter().flatten().map(|&(_, s)| s).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; self.col_count];
                for &(j, s) in row {
                    dense[j] = s;
                }
                dense
            })
            .collect()
    }

    /// Applies top-k pruning again to every row.
    pub fn prune(&self, k: usize) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|row| top_k_entries(row.clone(), k))
            .collect();
        Self {
            col_count: self.col_count,
            rows,
        }
    }
}

/// Computes the full dense PPR matrix for every drug.
///
/// Columns are independent and computed in parallel; the result does not
/// depend on the number of worker threads.
pub fn compute_ppr(adj: &NormalizedAdjacency<'_>, cfg: &PprConfig) -> Result<PprMatrix> {
    check_inputs(adj, cfg)?;
    let n = adj.dim();
    let columns: Vec<Vec<f64>> = (0..adj.graph().drug_count())
        .into_par_iter()
        .map(|d| ppr_column(adj, cfg, d))
        .collect();
    Ok(PprMatrix {
        node_count: n,
        data: columns.concat(),
    })
}

/// Computes and prunes drug rows without materializing the dense matrix.
pub fn compute_pruned(adj: &NormalizedAdjacency<'_>, cfg: &PprConfig) -> Result<PrunedPprMatrix> {
    check_inputs(adj, cfg)?;
    let rows = (0..adj.graph().drug_count())
        .into_par_iter()
        .map(|d| prune_scores(&ppr_column(adj, cfg, d), cfg.top_k))
        .collect();
    Ok(PrunedPprMatrix {
        col_count: adj.dim(),
        rows,
    })
}

/// Pruned PPR row for a single drug, identified by id.
pub fn ppr_row_query(
    graph: &HeteroGraph,
    cfg: &PprConfig,
    drug_id: &str,
) -> Result<Vec<(usize, f64)>> {
    cfg.validate()?;
    let drug = graph.drug_index(drug_id)?;
    let column = ppr_column(&graph.normalized(), cfg, drug);
    Ok(prune_scores(&column, cfg.top_k))
}

/// Keeps the `k` largest entries of every drug column.
pub fn prune(x: &PprMatrix, k: usize) -> PrunedPprMatrix {
    PrunedPprMatrix {
        col_count: x.node_count,
        rows: x.columns().map(|c| prune_scores(c, k)).collect(),
    }
}

/// Top-k of a dense score vector as `(index, score)` sorted by index.
/// Ties at the k-th score go to the smaller index; zeros are never kept.
pub fn prune_scores(scores: &[f64], k: usize) -> Vec<(usize, f64)> {
    let entries = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s != 0.0)
        .map(|(j, &s)| (j, s))
        .collect();
    top_k_entries(entries, k)
}

fn top_k_entries(mut entries: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    entries.retain(|&(_, s)| s != 0.0);
    if k == 0 {
        return Vec::new();
    }
    if entries.len() > k {
        entries.select_nth_unstable_by(k - 1, rank_order);
        entries.truncate(k);
    }
    entries.sort_unstable_by_key(|&(j, _)| j);
    entries
}

/// Descending score, then ascending index. A total order, so selection is
/// deterministic.
fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

fn check_inputs(adj: &NormalizedAdjacency<'_>, cfg: &PprConfig) -> Result<()> {
    cfg.validate()?;
    if adj.graph().drug_count() == 0 {
        return Err(Error::InvalidConfig("graph contains no drug nodes".into()));
    }
    Ok(())
}

fn ppr_column(adj: &NormalizedAdjacency<'_>, cfg: &PprConfig, drug: usize) -> Vec<f64> {
    let n = adj.dim();
    let alpha = cfg.alpha;
    let mut walk = vec![0.0; n];
    walk[drug] = 1.0;
    let mut next = vec![0.0; n];
    let mut acc = vec![0.0; n];
    // (1 - alpha)^r
    let mut decay = 1.0;
    for _ in 0..cfg.iterations {
        let w = alpha * decay;
        if w != 0.0 {
            for (a, &p) in acc.iter_mut().zip(&walk) {
                *a += w * p;
            }
        }
        adj.multiply_into(&walk, &mut next);
        std::mem::swap(&mut walk, &mut next);
        decay *= 1.0 - alpha;
    }
    if decay != 0.0 {
        for (a, &p) in acc.iter_mut().zip(&walk) {
            *a += decay * p;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeRow, NodeKind};

    fn pair_graph() -> HeteroGraph {
        HeteroGraph::from_rows(&[EdgeRow::new("d", "drug", "g", "gene")]).unwrap()
    }

    fn cfg(alpha: f64, iterations: usize, top_k: usize) -> PprConfig {
        PprConfig {
            alpha,
            iterations,
            top_k,
        }
    }

    #[test]
    fn two_node_one_step() {
        // Dense evaluation: Ã = [[0,1],[1,0]], x = 0.7 e_d + 0.3 Ã e_d.
        let g = pair_graph();
        let x = compute_ppr(&g.normalized(), &cfg(0.7, 1, 1)).unwrap();
        assert!((x.get(0, 0) - 0.7).abs() < 1e-15);
        assert!((x.get(1, 0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn alpha_one_is_indicator() {
        let g = HeteroGraph::from_rows(&[
            EdgeRow::new("d1", "drug", "g1", "gene"),
            EdgeRow::new("d2", "drug", "g1", "gene"),
            EdgeRow::new("g1", "gene", "g2", "gene"),
        ])
        .unwrap();
        for t in [1, 5, 25] {
            let x = compute_ppr(&g.normalized(), &cfg(1.0, t, 3)).unwrap();
            for d in 0..2 {
                for v in 0..4 {
                    assert_eq!(x.get(v, d), if v == d { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn isolated_drug_stays_home() {
        let g = HeteroGraph::from_parts(
            &[("lonely", NodeKind::Drug)],
            &[EdgeRow::new("d", "drug", "g", "gene")],
        )
        .unwrap();
        let lonely = g.index_of("lonely").unwrap();
        for alpha in [0.0, 0.3, 1.0] {
            let x = compute_ppr(&g.normalized(), &cfg(alpha, 7, 2)).unwrap();
            let col = x.column(lonely);
            for (v, &s) in col.iter().enumerate() {
                let want = if v == lonely { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn prune_keeps_largest() {
        assert_eq!(prune_scores(&[0.5, 0.3, 0.2], 2), vec![(0, 0.5), (1, 0.3)]);
        assert_eq!(prune_scores(&[0.4, 0.3, 0.3], 2), vec![(0, 0.4), (1, 0.3)]);
        assert_eq!(prune_scores(&[0.2, 0.3, 0.3], 1), vec![(1, 0.3)]);
        assert_eq!(
            prune_scores(&[0.0, 0.3, 0.0, 0.1], 10),
            vec![(1, 0.3), (3, 0.1)]
        );
    }

    #[test]
    fn row_query_matches_pruned_matrix() {
        let g = pair_graph();
        let c = cfg(0.7, 1, 1);
        assert_eq!(ppr_row_query(&g, &c, "d").unwrap(), vec![(0, 0.7)]);
        let c = cfg(0.7, 1, 5);
        assert_eq!(ppr_row_query(&g, &c, "d").unwrap().len(), 2);
        assert!(matches!(
            ppr_row_query(&g, &c, "g"),
            Err(Error::UnknownDrug(_))
        ));
    }

    #[test]
    fn streaming_equals_dense_then_prune() {
        let g = HeteroGraph::from_rows(&[
            EdgeRow::new("d1", "drug", "g1", "gene"),
            EdgeRow::new("d2", "drug", "g2", "gene"),
            EdgeRow::new("g1", "gene", "g2", "gene"),
            EdgeRow::new("g2", "gene", "g3", "gene"),
        ])
        .unwrap();
        let c = cfg(0.3, 6, 3);
        let a = g.normalized();
        assert_eq!(
            compute_pruned(&a, &c).unwrap(),
            prune(&compute_ppr(&a, &c).unwrap(), 3)
        );
    }

    #[test]
    fn config_validation() {
        assert!(cfg(1.5, 1, 1).validate().is_err());
        assert!(cfg(0.5, 0, 1).validate().is_err());
        assert!(cfg(0.5, 1, 0).validate().is_err());
        assert!(PprConfig::default().validate().is_ok());
    }

    #[test]
    fn from_rows_checks_layout() {
        assert!(PrunedPprMatrix::from_rows(3, vec![vec![(1, 0.2), (0, 0.1)]]).is_err());
        assert!(PrunedPprMatrix::from_rows(3, vec![vec![(3, 0.2)]]).is_err());
        assert!(PrunedPprMatrix::from_rows(3, vec![vec![(0, -1.0)]]).is_err());
        assert!(PrunedPprMatrix::from_rows(3, vec![vec![(0, 0.1), (2, 0.2)]]).is_ok());
    }
}
