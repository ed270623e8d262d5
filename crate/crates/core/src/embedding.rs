//! Non-negative factorization of the pruned PPR matrix into drug embeddings.
//!
//! Fits `X ≈ H W` with `H` (`m x d`) and `W` (`d x n`) entrywise
//! non-negative, using Lee-Seung multiplicative updates for the Frobenius
//! loss. All accumulations run in a fixed order, so results are bit-identical
//! for a given seed regardless of the rayon pool size.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView1, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ppr::PrunedPprMatrix;
use crate::{Error, Result};

/// Above this many `m * n * d` multiply-adds the objective is computed from
/// the Gram-trace expansion instead of the explicit residual.
const EXACT_OBJECTIVE_LIMIT: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NmfConfig {
    pub dimensions: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub epsilon: f64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self {
            dimensions: 32,
            max_iter: 100,
            seed: 42,
            epsilon: 1e-10,
        }
    }
}

impl NmfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimensions == 0 {
            return Err(Error::InvalidConfig("dimensions must be >= 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// Drug factor, `m x d`.
    pub h: Array2<f64>,
    /// Entity factor, `d x n`.
    pub w: Array2<f64>,
    /// `‖X − HW‖_F` at initialization followed by one value per update
    /// sweep, so its length is `max_iter + 1`.
    pub objective_trace: Vec<f64>,
}

impl Embedding {
    pub fn dimensions(&self) -> usize {
        self.h.ncols()
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }

    /// Pairs each row of `H` with its drug id. `drug_ids` are in drug index
    /// order.
    pub fn drug_vectors(&self, drug_ids: &[String]) -> Result<DrugVectors> {
        DrugVectors::new(drug_ids.to_vec(), self.h.clone())
    }
}

/// Sparse matrix in compressed-row and compressed-column form.
struct SparseBoth {
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
}

impl SparseBoth {
    fn new(x: &PrunedPprMatrix) -> Self {
        let mut cols = vec![Vec::new(); x.col_count()];
        for (i, row) in x.rows().iter().enumerate() {
            for &(j, v) in row {
                cols[j].push((i, v));
            }
        }
        Self {
            rows: x.rows().to_vec(),
            cols,
        }
    }
}

pub fn fit_nmf(x: &PrunedPprMatrix, cfg: &NmfConfig) -> Result<Embedding> {
    fit_nmf_observed(x, cfg, |_, _, _| {})
}

/// Same as [`fit_nmf`], calling `observe(sweep, h, w)` after the
/// initialization (sweep 0) and after every update sweep.
pub fn fit_nmf_observed<F>(x: &PrunedPprMatrix, cfg: &NmfConfig, mut observe: F) -> Result<Embedding>
where
    F: FnMut(usize, &Array2<f64>, &Array2<f64>),
{
    cfg.validate()?;
    let (m, n, d) = (x.row_count(), x.col_count(), cfg.dimensions);
    if m == 0 || n == 0 || x.nnz() == 0 || x.sum() <= 0.0 {
        return Err(Error::EmptyMatrix);
    }
    if d > m {
        log::warn!("embedding dimensions {d} exceed drug count {m}");
    }

    let sparse = SparseBoth::new(x);
    let norm_sq: f64 = x.rows().iter().flatten().map(|&(_, v)| v * v).sum();
    let (mut h, mut w) = initialize(x, cfg);
    let eps = cfg.epsilon;

    let mut trace = Vec::with_capacity(cfg.max_iter + 1);
    trace.push(objective(&sparse, norm_sq, &h, &w));
    observe(0, &h, &w);

    for sweep in 1..=cfg.max_iter {
        // H <- H * (X W^T) / (H W W^T + eps)
        let xwt = sparse_times_dense_t(&sparse.rows, &w, d);
        let wwt = w.dot(&w.t());
        let denom = h.dot(&wwt);
        multiplicative_step(&mut h, &xwt, &denom, eps);

        // W <- W * (H^T X) / (H^T H W + eps)
        let htx = sparse_t_times_dense(&sparse.cols, &h, d);
        let hth = h.t().dot(&h);
        let denom = hth.dot(&w);
        multiplicative_step(&mut w, &htx, &denom, eps);

        trace.push(objective(&sparse, norm_sq, &h, &w));
        observe(sweep, &h, &w);
    }

    Ok(Embedding {
        h,
        w,
        objective_trace: trace,
    })
}

/// Seeded uniform `[0, 1)` entries scaled by `sqrt(mean(X) / d)`, `H` drawn
/// before `W` in row-major order.
fn initialize(x: &PrunedPprMatrix, cfg: &NmfConfig) -> (Array2<f64>, Array2<f64>) {
    let (m, n, d) = (x.row_count(), x.col_count(), cfg.dimensions);
    let mean = x.sum() / (m as f64 * n as f64);
    let scale = (mean / d as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = Array2::from_shape_simple_fn((m, d), || rng.gen::<f64>() * scale);
    let w = Array2::from_shape_simple_fn((d, n), || rng.gen::<f64>() * scale);
    (h, w)
}

fn multiplicative_step(factor: &mut Array2<f64>, numer: &Array2<f64>, denom: &Array2<f64>, eps: f64) {
    Zip::from(factor)
        .and(numer)
        .and(denom)
        .par_for_each(|f, &num, &den| *f *= num / (den + eps));
}

/// `X W^T` for row-sparse `X` (`m x n`) and dense `W` (`d x n`).
fn sparse_times_dense_t(rows: &[Vec<(usize, f64)>], w: &Array2<f64>, d: usize) -> Array2<f64> {
    let wt = w.t().as_standard_layout().into_owned();
    let mut out = Array2::<f64>::zeros((rows.len(), d));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(rows.par_iter())
        .for_each(|(mut dst, row)| {
            for &(j, v) in row {
                dst.scaled_add(v, &wt.row(j));
            }
        });
    out
}

/// `H^T X` for dense `H` (`m x d`) and column-sparse `X` (`m x n`).
fn sparse_t_times_dense(cols: &[Vec<(usize, f64)>], h: &Array2<f64>, d: usize) -> Array2<f64> {
    let mut out_t = Array2::<f64>::zeros((cols.len(), d));
    out_t
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(cols.par_iter())
        .for_each(|(mut dst, col)| {
            for &(i, v) in col {
                dst.scaled_add(v, &h.row(i));
            }
        });
    out_t.reversed_axes().as_standard_layout().into_owned()
}

fn objective(x: &SparseBoth, norm_sq: f64, h: &Array2<f64>, w: &Array2<f64>) -> f64 {
    let (m, d) = h.dim();
    let n = w.ncols();
    if m.saturating_mul(n).saturating_mul(d) <= EXACT_OBJECTIVE_LIMIT {
        exact_objective(x, h, w)
    } else {
        trace_objective(x, norm_sq, h, w)
    }
}

/// Residual norm from compensated dot products, so that fits approaching
/// an exact factorization are not swamped by cancellation.
fn exact_objective(x: &SparseBoth, h: &Array2<f64>, w: &Array2<f64>) -> f64 {
    let wt = w.t();
    let per_row: Vec<(f64, f64)> = h
        .axis_iter(Axis(0))
        .into_par_iter()
        .zip(x.rows.par_iter())
        .map(|(hi, row)| {
            let mut acc = (0.0, 0.0);
            let mut entries = row.iter().peekable();
            for (j, wj) in wt.axis_iter(Axis(0)).enumerate() {
                let target = match entries.peek() {
                    Some(&&(col, v)) if col == j => {
                        entries.next();
                        v
                    }
                    _ => 0.0,
                };
                let diff = compensated_residual(target, hi, wj);
                acc = two_sum_acc(acc, diff * diff);
            }
            acc
        })
        .collect();
    let total = per_row.iter().fold((0.0, 0.0), |acc, &(hi, lo)| two_sum_acc(two_sum_acc(acc, hi), lo));
    (total.0 + total.1).sqrt()
}

/// `target - a·b`, carrying the rounding error of every product and sum.
fn compensated_residual(target: f64, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let (mut s, mut err) = (target, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let p = x * y;
        let p_err = x.mul_add(y, -p);
        let (t, e) = two_sum(s, -p);
        s = t;
        err += e - p_err;
    }
    s + err
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_sum_acc((hi, lo): (f64, f64), x: f64) -> (f64, f64) {
    let (s, e) = two_sum(hi, x);
    (s, lo + e)
}

/// `‖X‖² − 2 Σ_nnz X_ij (HW)_ij + tr((HᵀH)(WWᵀ))`.
fn trace_objective(x: &SparseBoth, norm_sq: f64, h: &Array2<f64>, w: &Array2<f64>) -> f64 {
    let cross: Vec<f64> = x
        .rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let hi = h.row(i);
            row.iter()
                .map(|&(j, v)| v * dot(hi, w.column(j)))
                .sum::<f64>()
        })
        .collect();
    let cross: f64 = cross.iter().sum();
    let hth = h.t().dot(h);
    let wwt = w.dot(&w.t());
    let gram = (&hth * &wwt).sum();
    (norm_sq - 2.0 * cross + gram).max(0.0).sqrt()
}

fn dot(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.dot(&b)
}

/// Drug ids paired with their embedding rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DrugVectors {
    ids: Vec<String>,
    vectors: Array2<f64>,
    index: HashMap<String, usize>,
}

impl DrugVectors {
    pub fn new(ids: Vec<String>, vectors: Array2<f64>) -> Result<Self> {
        if ids.len() != vectors.nrows() {
            return Err(Error::DimensionMismatch {
                expected: vectors.nrows(),
                actual: ids.len(),
            });
        }
        let index: HashMap<String, usize> =
            ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        if index.len() != ids.len() {
            return Err(Error::InvalidConfig("duplicate drug id in embedding".into()));
        }
        Ok(Self {
            ids,
            vectors,
            index,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn dimensions(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<ArrayView1<'_, f64>> {
        self.index
            .get(id)
            .map(|&i| self.vectors.row(i))
            .ok_or_else(|| Error::UnknownDrug(id.to_string()))
    }
}
