//! Planted-community drug/gene graphs with known pair labels.
//!
//! Each community owns a block of genes wired by a random backbone and a
//! block of drugs attached to those genes. A pair of drugs is labeled 1 iff
//! both belong to the same community. `noise` rewires structure across
//! communities: at 0 every drug-gene edge stays inside the community, at 1
//! drug attachments and gene-gene edges ignore community membership.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{EdgeRow, TargetRow};
use crate::{io, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub communities: usize,
    pub drugs_per_community: usize,
    pub genes_per_community: usize,
    /// Chance of each of a drug's `genes_per_community` attachment slots
    /// producing an edge.
    pub drug_gene_prob: f64,
    /// Edge probability between two genes of the same community.
    pub gene_gene_prob: f64,
    pub noise: f64,
    /// Number of labeled pairs; capped at the number of distinct drug pairs.
    pub pair_count: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            communities: 2,
            drugs_per_community: 20,
            genes_per_community: 100,
            drug_gene_prob: 0.1,
            gene_gene_prob: 0.05,
            noise: 0.05,
            pair_count: 2000,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.communities < 2 {
            return Err(Error::InvalidConfig("at least 2 communities required".into()));
        }
        if self.drugs_per_community == 0 || self.genes_per_community == 0 {
            return Err(Error::InvalidConfig(
                "communities need at least one drug and one gene".into(),
            ));
        }
        for (name, p) in [
            ("drug_gene_prob", self.drug_gene_prob),
            ("gene_gene_prob", self.gene_gene_prob),
            ("noise", self.noise),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn drug_count(&self) -> usize {
        self.communities * self.drugs_per_community
    }

    pub fn gene_count(&self) -> usize {
        self.communities * self.genes_per_community
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub edges: Vec<EdgeRow>,
    pub targets: Vec<TargetRow>,
    /// Community of every drug, in drug-id order (`drug_0000`, ...).
    pub drug_community: Vec<usize>,
    /// Community of every gene, in gene-id order.
    pub gene_community: Vec<usize>,
}

impl SyntheticDataset {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        io::write_edges(&dir.join("edges.csv"), &self.edges)?;
        io::write_targets(&dir.join("targets.csv"), &self.targets)
    }

    /// Community of a generated node id.
    pub fn community_of(&self, id: &str) -> Option<usize> {
        let (kind, num) = id.split_once('_')?;
        let i: usize = num.parse().ok()?;
        match kind {
            "drug" => self.drug_community.get(i).copied(),
            "gene" => self.gene_community.get(i).copied(),
            _ => None,
        }
    }
}

pub fn drug_id(i: usize) -> String {
    format!("drug_{i:04}")
}

pub fn gene_id(i: usize) -> String {
    format!("gene_{i:05}")
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gpc = cfg.genes_per_community;
    let dpc = cfg.drugs_per_community;
    let n_genes = cfg.gene_count();
    let n_drugs = cfg.drug_count();
    let gene_community: Vec<usize> = (0..n_genes).map(|g| g / gpc).collect();
    let drug_community: Vec<usize> = (0..n_drugs).map(|d| d / dpc).collect();

    let mut gene_edges = BTreeSet::new();
    for u in 0..n_genes {
        for v in u + 1..n_genes {
            let p = if gene_community[u] == gene_community[v] {
                cfg.gene_gene_prob
            } else {
                cfg.noise * cfg.gene_gene_prob
            };
            if rng.gen::<f64>() < p {
                gene_edges.insert((u, v));
            }
        }
    }

    let mut drug_edges = BTreeSet::new();
    for (d, &c) in drug_community.iter().enumerate() {
        let pick = |rng: &mut ChaCha8Rng| {
            if rng.gen::<f64>() < cfg.noise {
                rng.gen_range(0..n_genes)
            } else {
                c * gpc + rng.gen_range(0..gpc)
            }
        };
        let mut attached = false;
        for _ in 0..gpc {
            if rng.gen::<f64>() < cfg.drug_gene_prob {
                drug_edges.insert((d, pick(&mut rng)));
                attached = true;
            }
        }
        if !attached {
            drug_edges.insert((d, pick(&mut rng)));
        }
    }

    let mut edges: Vec<EdgeRow> = drug_edges
        .iter()
        .map(|&(d, g)| EdgeRow::new(&drug_id(d), "drug", &gene_id(g), "gene"))
        .collect();
    edges.extend(
        gene_edges
            .iter()
            .map(|&(u, v)| EdgeRow::new(&gene_id(u), "gene", &gene_id(v), "gene")),
    );

    let mut pairs: Vec<(usize, usize)> = (0..n_drugs)
        .flat_map(|a| (a + 1..n_drugs).map(move |b| (a, b)))
        .collect();
    pairs.shuffle(&mut rng);
    if cfg.pair_count < pairs.len() {
        pairs.truncate(cfg.pair_count);
    } else if cfg.pair_count > pairs.len() {
        log::warn!(
            "requested {} pairs but only {} distinct drug pairs exist",
            cfg.pair_count,
            pairs.len()
        );
    }
    let targets = pairs
        .iter()
        .map(|&(a, b)| {
            let label = u8::from(drug_community[a] == drug_community[b]);
            TargetRow::new(&drug_id(a), &drug_id(b), label)
        })
        .collect();

    Ok(SyntheticDataset {
        edges,
        targets,
        drug_community,
        gene_community,
    })
}
