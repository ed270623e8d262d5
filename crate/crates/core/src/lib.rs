//! Drug-drug link prediction on heterogeneous drug/gene graphs.
//!
//! The pipeline computes truncated personalized PageRank profiles for every
//! drug node, keeps the top-k entries per drug, factorizes the resulting sparse
//! matrix into non-negative drug embeddings, combines drug vectors into pair
//! features and trains a downstream classifier.
//!
//! ```
//! use pprlink::graph::{EdgeRow, HeteroGraph};
//! use pprlink::ppr::{compute_ppr, prune, PprConfig};
//!
//! let rows = vec![
//!     EdgeRow::new("d1", "drug", "g1", "gene"),
//!     EdgeRow::new("g1", "gene", "g2", "gene"),
//! ];
//! let graph = HeteroGraph::from_rows(&rows).unwrap();
//! let cfg = PprConfig { alpha: 0.7, iterations: 5, top_k: 2 };
//! let scores = compute_ppr(&graph.normalized(), &cfg).unwrap();
//! let pruned = prune(&scores, cfg.top_k);
//! assert_eq!(pruned.row(0).len(), 2);
//! ```

pub mod embedding;
pub mod error;
pub mod graph;
pub mod io;
pub mod learn;
pub mod metrics;
pub mod pairs;
pub mod pipeline;
pub mod ppr;
pub mod synth;

pub use error::{Error, Result};
