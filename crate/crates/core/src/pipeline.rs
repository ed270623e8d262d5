//! End-to-end runs: ingest, PPR, pruning, factorization, pair features,
//! seeded splits, training and evaluation, plus the training-ratio and
//! embedding-dimension sweeps.
//!
//! Replicate `i` uses split seed `base_seed + i`. Every artifact is a pure
//! function of the configuration and input bytes.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::{fit_nmf, DrugVectors, NmfConfig};
use crate::graph::{HeteroGraph, TargetTable};
use crate::learn::{self, ClassifierConfig, ClassifierKind, SplitConfig};
use crate::metrics::{self, MetricsReport};
use crate::pairs::{pair_features, PairFeatureTable, PairOperator};
use crate::ppr::{compute_pruned, PprConfig, PrunedPprMatrix};
use crate::{io, Error};

pub const PPR_FILE: &str = "ppr.csv";
pub const EMBEDDING_FILE: &str = "embedding.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RATIO_SWEEP_FILE: &str = "ratio_sweep.csv";
pub const DIM_SWEEP_FILE: &str = "dim_sweep.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Ingest,
    Targets,
    Ppr,
    Embed,
    Features,
    Split,
    Train,
    Predict,
    Evaluate,
    Write,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Targets => "targets",
            Stage::Ppr => "ppr",
            Stage::Embed => "embed",
            Stage::Features => "features",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Predict => "predict",
            Stage::Evaluate => "evaluate",
            Stage::Write => "write",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An error tagged with the pipeline stage that produced it.
#[derive(Debug, thiserror::Error)]
#[error("stage={stage}: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl PipelineError {
    /// Validation failures (bad inputs or configuration) versus runtime
    /// failures while producing outputs.
    pub fn is_validation(&self) -> bool {
        match self.stage {
            Stage::Config | Stage::Ingest | Stage::Targets => true,
            Stage::Write => false,
            _ => self.source.is_validation(),
        }
    }
}

pub type StageResult<T> = std::result::Result<T, PipelineError>;

/// Tags a library error with the stage that produced it.
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> StageResult<T>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> StageResult<T> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub edges: PathBuf,
    pub targets: PathBuf,
    pub out_dir: PathBuf,
    pub ppr: PprConfig,
    pub nmf: NmfConfig,
    pub operator: PairOperator,
    pub classifier: ClassifierConfig,
    pub split: SplitConfig,
    /// Number of seeded train/test splits; seeds are `split.seed + i`.
    pub replicates: usize,
    pub threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            edges: PathBuf::from("edges.csv"),
            targets: PathBuf::from("targets.csv"),
            out_dir: PathBuf::from("out"),
            ppr: PprConfig::default(),
            nmf: NmfConfig::default(),
            operator: PairOperator::Hadamard,
            classifier: ClassifierConfig::default(),
            split: SplitConfig::default(),
            replicates: 10,
            threshold: metrics::DEFAULT_THRESHOLD,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> crate::Result<()> {
        self.ppr.validate()?;
        self.nmf.validate()?;
        self.classifier.validate()?;
        self.split.validate()?;
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be >= 1".into()));
        }
        Ok(())
    }

    pub fn replicate_seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.replicates as u64).map(|i| self.split.seed.wrapping_add(i))
    }
}

/// Mean and standard error of the headline metrics across replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub auroc: f64,
    pub aupr: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub replicates: Vec<MetricsReport>,
    pub mean: Aggregate,
    pub stderr: Aggregate,
}

impl MetricsSummary {
    pub fn from_reports(replicates: Vec<MetricsReport>) -> Self {
        let (auroc_m, auroc_s) = mean_stderr(replicates.iter().map(|r| r.auroc));
        let (aupr_m, aupr_s) = mean_stderr(replicates.iter().map(|r| r.aupr));
        let (f1_m, f1_s) = mean_stderr(replicates.iter().map(|r| r.f1));
        Self {
            replicates,
            mean: Aggregate {
                auroc: auroc_m,
                aupr: aupr_m,
                f1: f1_m,
            },
            stderr: Aggregate {
                auroc: auroc_s,
                aupr: aupr_s,
                f1: f1_s,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize") + "\n"
    }
}

/// Sample mean and standard error of the mean (zero for a single value, NaN
/// for none).
pub fn mean_stderr(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Intermediate results of the unsupervised stages.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub graph: HeteroGraph,
    pub targets: TargetTable,
    pub pruned: PrunedPprMatrix,
}

impl Prepared {
    pub fn drug_ids(&self) -> Vec<String> {
        self.graph.drugs().iter().map(|n| n.id.clone()).collect()
    }

    pub fn embed(&self, nmf: &NmfConfig) -> StageResult<DrugVectors> {
        let e = fit_nmf(&self.pruned, nmf).at(Stage::Embed)?;
        e.drug_vectors(&self.drug_ids()).at(Stage::Embed)
    }

    pub fn features(&self, vectors: &DrugVectors, op: PairOperator) -> StageResult<PairFeatureTable> {
        pair_features(vectors, &self.targets, op).at(Stage::Features)
    }
}

pub fn load_graph(path: &Path) -> crate::Result<HeteroGraph> {
    HeteroGraph::from_rows(&io::read_edges(path)?)
}

pub fn load_targets(path: &Path, graph: &HeteroGraph) -> crate::Result<TargetTable> {
    graph.validate_targets(&io::read_targets(path)?)
}

/// Ingest and validate inputs, then compute the pruned PPR matrix.
pub fn prepare(cfg: &PipelineConfig) -> StageResult<Prepared> {
    cfg.validate().at(Stage::Config)?;
    let graph = load_graph(&cfg.edges).at(Stage::Ingest)?;
    let targets = load_targets(&cfg.targets, &graph).at(Stage::Targets)?;
    if targets.is_empty() {
        return Err(Error::EmptyTargets).at(Stage::Targets);
    }
    let pruned = compute_pruned(&graph.normalized(), &cfg.ppr).at(Stage::Ppr)?;
    Ok(Prepared {
        graph,
        targets,
        pruned,
    })
}

/// Fits `classifier` on `train` rows and scores it on `test` rows.
pub fn fit_and_score(
    table: &PairFeatureTable,
    train: &[usize],
    test: &[usize],
    classifier: &ClassifierConfig,
    threshold: f64,
) -> StageResult<MetricsReport> {
    let train_table = table.select(train);
    let test_table = table.select(test);
    let model = learn::fit(&train_table, classifier).at(Stage::Train)?;
    let scores = learn::predict_proba(&model, test_table.features.view()).at(Stage::Predict)?;
    metrics::evaluate(&scores, &test_table.labels(), threshold).at(Stage::Evaluate)
}

/// One report per replicate seed, in seed order.
pub fn evaluate_replicates(
    table: &PairFeatureTable,
    cfg: &PipelineConfig,
    classifier: &ClassifierConfig,
) -> StageResult<Vec<MetricsReport>> {
    let labels = table.labels();
    let seeds: Vec<u64> = cfg.replicate_seeds().collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let split = SplitConfig { seed, ..cfg.split };
            let (train, test) = learn::split_indices(&labels, &split).at(Stage::Split)?;
            fit_and_score(table, &train, &test, classifier, cfg.threshold)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub notes: Vec<String>,
}

pub fn sha256_file(path: &Path) -> crate::Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn digest(path: &Path, display: &str) -> crate::Result<FileDigest> {
    Ok(FileDigest {
        path: display.to_string(),
        sha256: sha256_file(path)?,
    })
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub summary: MetricsSummary,
    pub metrics_json: String,
    pub out_dir: PathBuf,
}

/// Runs every stage and writes `ppr.csv`, `embedding.csv`, `features.csv`,
/// `metrics.json` and `manifest.json` into `cfg.out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> StageResult<PipelineOutcome> {
    let prepared = prepare(cfg)?;
    let vectors = prepared.embed(&cfg.nmf)?;
    let table = prepared.features(&vectors, cfg.operator)?;
    let reports = evaluate_replicates(&table, cfg, &cfg.classifier)?;
    let summary = MetricsSummary::from_reports(reports);
    let metrics_json = summary.to_json();

    let out = &cfg.out_dir;
    let write = || -> crate::Result<()> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        io::write_pruned(&out.join(PPR_FILE), &prepared.graph, &prepared.pruned)?;
        io::write_embedding(&out.join(EMBEDDING_FILE), &vectors)?;
        io::write_features(&out.join(FEATURES_FILE), &table)?;
        let metrics_path = out.join(METRICS_FILE);
        std::fs::write(&metrics_path, &metrics_json).map_err(|e| Error::io(&metrics_path, e))?;
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            inputs: vec![
                digest(&cfg.edges, &cfg.edges.display().to_string())?,
                digest(&cfg.targets, &cfg.targets.display().to_string())?,
            ],
            outputs: [PPR_FILE, EMBEDDING_FILE, FEATURES_FILE, METRICS_FILE]
                .iter()
                .map(|name| digest(&out.join(name), name))
                .collect::<crate::Result<_>>()?,
            notes: vec![format!(
                "replicate split seeds are split.seed + i for i in 0..{}",
                cfg.replicates
            )],
        };
        write_json(&out.join(MANIFEST_FILE), &manifest)
    };
    write().at(Stage::Write)?;

    Ok(PipelineOutcome {
        summary,
        metrics_json,
        out_dir: out.clone(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> crate::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One cell of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Training ratio in permille, or embedding dimensions.
    pub setting: usize,
    pub classifier: ClassifierKind,
    /// Training rows per replicate.
    pub train_rows: usize,
    pub replicates_ok: usize,
    pub mean_auroc: f64,
    pub mean_aupr: f64,
    pub auroc_stderr: f64,
    pub aupr_stderr: f64,
    /// First failure message among the replicates, if any failed.
    pub error: Option<String>,
}

impl SweepRow {
    fn from_results(
        setting: usize,
        classifier: ClassifierKind,
        train_rows: usize,
        results: Vec<StageResult<MetricsReport>>,
    ) -> Self {
        let error = results
            .iter()
            .find_map(|r| r.as_ref().err().map(|e| e.to_string()));
        let ok: Vec<MetricsReport> = results.into_iter().filter_map(|r| r.ok()).collect();
        let (mean_auroc, auroc_stderr) = mean_stderr(ok.iter().map(|r| r.auroc));
        let (mean_aupr, aupr_stderr) = mean_stderr(ok.iter().map(|r| r.aupr));
        Self {
            setting,
            classifier,
            train_rows,
            replicates_ok: ok.len(),
            mean_auroc,
            mean_aupr,
            auroc_stderr,
            aupr_stderr,
            error,
        }
    }
}

const SWEPT: [ClassifierKind; 2] = [ClassifierKind::Gbm, ClassifierKind::LogReg];

/// Trains on `ratio`‰ of all pairs, drawn from the training side of each
/// replicate split, and evaluates on that split's fixed test side.
pub fn run_ratio_sweep(cfg: &PipelineConfig, ratios: &[usize]) -> StageResult<Vec<SweepRow>> {
    if ratios.is_empty() || ratios.iter().any(|&r| r == 0 || r >= 1000) {
        return Err(Error::InvalidConfig(
            "ratios must be permille values in (0, 1000)".into(),
        ))
        .at(Stage::Config);
    }
    let prepared = prepare(cfg)?;
    let vectors = prepared.embed(&cfg.nmf)?;
    let table = prepared.features(&vectors, cfg.operator)?;
    ratio_sweep_on(&table, cfg, ratios)
}

/// Ratio sweep over an existing feature table.
pub fn ratio_sweep_on(
    table: &PairFeatureTable,
    cfg: &PipelineConfig,
    ratios: &[usize],
) -> StageResult<Vec<SweepRow>> {
    let labels = table.labels();
    let splits: Vec<(u64, Vec<usize>, Vec<usize>)> = cfg
        .replicate_seeds()
        .map(|seed| {
            let split = SplitConfig { seed, ..cfg.split };
            learn::split_indices(&labels, &split).map(|(tr, te)| (seed, tr, te))
        })
        .collect::<crate::Result<_>>()
        .at(Stage::Split)?;

    let mut rows = Vec::new();
    for &ratio in ratios {
        let wanted = ((ratio as f64) * table.len() as f64 / 1000.0).round() as usize;
        for kind in SWEPT {
            let classifier = cfg.classifier.with_kind(kind);
            let mut train_rows = 0;
            let results: Vec<StageResult<MetricsReport>> = splits
                .par_iter()
                .map(|(seed, train, test)| {
                    let count = wanted.min(train.len());
                    let sub = learn::subsample(train, count, *seed);
                    if sub.is_empty() {
                        return Err(Error::DegenerateSplit("empty training subsample".into()))
                            .at(Stage::Split);
                    }
                    fit_and_score(table, &sub, test, &classifier, cfg.threshold)
                })
                .collect();
            if let Some((_, train, _)) = splits.first() {
                train_rows = wanted.min(train.len());
            }
            rows.push(SweepRow::from_results(ratio, kind, train_rows, results));
        }
    }
    Ok(rows)
}

/// Refits the embedding at each dimension count and evaluates both
/// classifiers on the replicate splits.
pub fn run_dimension_sweep(cfg: &PipelineConfig, dims: &[usize]) -> StageResult<Vec<SweepRow>> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidConfig("dimensions must be positive".into())).at(Stage::Config);
    }
    let prepared = prepare(cfg)?;
    let labels = prepared.targets.pairs.iter().map(|p| p.label).collect::<Vec<_>>();
    let splits: Vec<(Vec<usize>, Vec<usize>)> = cfg
        .replicate_seeds()
        .map(|seed| learn::split_indices(&labels, &SplitConfig { seed, ..cfg.split }))
        .collect::<crate::Result<_>>()
        .at(Stage::Split)?;

    let mut rows = Vec::new();
    for &d in dims {
        let nmf = NmfConfig {
            dimensions: d,
            ..cfg.nmf
        };
        let vectors = prepared.embed(&nmf)?;
        let table = prepared.features(&vectors, cfg.operator)?;
        for kind in SWEPT {
            let classifier = cfg.classifier.with_kind(kind);
            let results: Vec<StageResult<MetricsReport>> = splits
                .par_iter()
                .map(|(train, test)| fit_and_score(&table, train, test, &classifier, cfg.threshold))
                .collect();
            let train_rows = splits.first().map_or(0, |(t, _)| t.len());
            rows.push(SweepRow::from_results(d, kind, train_rows, results));
        }
    }
    Ok(rows)
}

/// Writes sweep rows as CSV; `setting_name` labels the first column.
pub fn write_sweep(path: &Path, setting_name: &str, rows: &[SweepRow]) -> crate::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        setting_name,
        "classifier",
        "train_rows",
        "replicates_ok",
        "mean_auroc",
        "mean_aupr",
        "auroc_stderr",
        "aupr_stderr",
        "error",
    ])?;
    for r in rows {
        w.write_record([
            r.setting.to_string(),
            r.classifier.to_string(),
            r.train_rows.to_string(),
            r.replicates_ok.to_string(),
            io::format_f64(r.mean_auroc),
            io::format_f64(r.mean_aupr),
            io::format_f64(r.auroc_stderr),
            io::format_f64(r.aupr_stderr),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
