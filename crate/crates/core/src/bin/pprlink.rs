//! Command-line driver for the drug-pair link prediction pipeline.
//!
//! Exit codes: 0 on success, 1 for invalid inputs or configuration, 2 for
//! runtime failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use pprlink::embedding::fit_nmf;
use pprlink::learn::{self, ClassifierKind, SplitConfig, TrainedModel};
use pprlink::pairs::{pair_features, PairFeatureTable, PairOperator};
use pprlink::pipeline::{
    self, AtStage, PipelineConfig, Stage, StageResult, DIM_SWEEP_FILE,
    EMBEDDING_FILE, FEATURES_FILE, METRICS_FILE, PPR_FILE, RATIO_SWEEP_FILE,
};
use pprlink::ppr::{compute_pruned, ppr_row_query};
use pprlink::synth::{generate_synthetic, SynthConfig};
use pprlink::{io, metrics, Error};

const MODEL_FILE: &str = "model.json";
const EVAL_FILE: &str = "eval.json";

#[derive(Parser, Debug)]
#[command(name = "pprlink", version, about = "Drug-pair link prediction from pruned PPR embeddings")]
struct Cli {
    /// JSON configuration file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for splits, factorization and synthetic data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores). Does not affect results.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    flags: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true)]
    edges: Option<PathBuf>,
    #[arg(long, global = true)]
    targets: Option<PathBuf>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// PPR propagation steps.
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[arg(long, global = true)]
    top_k: Option<usize>,
    #[arg(long, global = true)]
    dimensions: Option<usize>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true, value_parser = parse_operator)]
    operator: Option<PairOperator>,
    #[arg(long, global = true, value_parser = parse_classifier)]
    classifier: Option<ClassifierKind>,
    /// Learning rate of the selected classifier.
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    #[arg(long, global = true)]
    n_estimators: Option<usize>,
    #[arg(long, global = true)]
    max_depth: Option<usize>,
    #[arg(long, global = true)]
    min_samples_leaf: Option<usize>,
    /// Logistic regression gradient steps.
    #[arg(long, global = true)]
    lr_iterations: Option<usize>,
    #[arg(long, global = true)]
    l2: Option<f64>,
    #[arg(long, global = true)]
    train_fraction: Option<f64>,
    #[arg(long, global = true)]
    replicates: Option<usize>,
    #[arg(long, global = true)]
    threshold: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that the edge and target files are well formed.
    Validate,
    /// Compute the pruned PPR matrix, or print one drug's row.
    Ppr {
        #[arg(long)]
        drug: Option<String>,
    },
    /// Factorize the pruned PPR matrix into drug embeddings.
    Embed {
        /// Reuse a pruned PPR CSV instead of recomputing it.
        #[arg(long)]
        ppr: Option<PathBuf>,
    },
    /// Build pair features from drug embeddings.
    Features {
        /// Reuse an embedding CSV instead of recomputing it.
        #[arg(long)]
        embedding: Option<PathBuf>,
    },
    /// Train a classifier on the training side of the seeded split.
    Train {
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Score a trained model on the test side of its split.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Run every stage over all replicate seeds.
    Pipeline,
    /// Vary the training-set size (permille of all pairs).
    SweepRatio {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9")]
        ratios: Vec<usize>,
    },
    /// Vary the embedding dimension.
    SweepDim {
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64,128")]
        dims: Vec<usize>,
    },
    /// Write a planted-community dataset.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    communities: Option<usize>,
    #[arg(long)]
    drugs_per_community: Option<usize>,
    #[arg(long)]
    genes_per_community: Option<usize>,
    #[arg(long)]
    drug_gene_prob: Option<f64>,
    #[arg(long)]
    gene_gene_prob: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    pair_count: Option<usize>,
}

fn parse_operator(s: &str) -> Result<PairOperator, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_classifier(s: &str) -> Result<ClassifierKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Configuration file layout: pipeline fields at the top level plus an
/// optional `synth` section.
#[derive(Debug, Default, Serialize, Deserialize)]
struct FileConfig {
    #[serde(flatten)]
    pipeline: PipelineConfig,
    #[serde(default)]
    synth: SynthConfig,
}

/// A trained model together with the split it was trained on.
#[derive(Debug, Serialize, Deserialize)]
struct SavedModel {
    split: SplitConfig,
    model: TrainedModel,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage_error { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> StageResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
            .at(Stage::Config)?;
    }
    let (cfg, mut synth) = resolve(&cli).at(Stage::Config)?;
    let out = cfg.out_dir.clone();

    match cli.command {
        Command::Validate => {
            let graph = pipeline::load_graph(&cfg.edges).at(Stage::Ingest)?;
            let targets = pipeline::load_targets(&cfg.targets, &graph).at(Stage::Targets)?;
            let summary = serde_json::json!({
                "nodes": graph.node_count(),
                "drugs": graph.drug_count(),
                "genes": graph.node_count() - graph.drug_count(),
                "edges": graph.edge_count(),
                "pairs": targets.len(),
                "positives": targets.positives(),
            });
            println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
        }
        Command::Ppr { drug } => {
            cfg.ppr.validate().at(Stage::Config)?;
            let graph = pipeline::load_graph(&cfg.edges).at(Stage::Ingest)?;
            if let Some(id) = drug {
                let row = ppr_row_query(&graph, &cfg.ppr, &id).at(Stage::Ppr)?;
                println!("node_id,score");
                for (v, s) in row {
                    println!("{},{}", graph.node(v).id, io::format_f64(s));
                }
            } else {
                let pruned = compute_pruned(&graph.normalized(), &cfg.ppr).at(Stage::Ppr)?;
                create_dir(&out)?;
                io::write_pruned(&out.join(PPR_FILE), &graph, &pruned).at(Stage::Write)?;
                report(&out.join(PPR_FILE));
            }
        }
        Command::Embed { ppr } => {
            cfg.validate().at(Stage::Config)?;
            let graph = pipeline::load_graph(&cfg.edges).at(Stage::Ingest)?;
            let pruned = match ppr {
                Some(p) => io::read_pruned(&p, &graph).at(Stage::Ppr)?,
                None => compute_pruned(&graph.normalized(), &cfg.ppr).at(Stage::Ppr)?,
            };
            let ids: Vec<String> = graph.drugs().iter().map(|n| n.id.clone()).collect();
            let vectors = fit_nmf(&pruned, &cfg.nmf)
                .and_then(|e| e.drug_vectors(&ids))
                .at(Stage::Embed)?;
            create_dir(&out)?;
            io::write_embedding(&out.join(EMBEDDING_FILE), &vectors).at(Stage::Write)?;
            report(&out.join(EMBEDDING_FILE));
        }
        Command::Features { embedding } => {
            let table = build_features(&cfg, embedding.as_deref())?;
            create_dir(&out)?;
            io::write_features(&out.join(FEATURES_FILE), &table).at(Stage::Write)?;
            report(&out.join(FEATURES_FILE));
        }
        Command::Train { features } => {
            let table = load_or_build_features(&cfg, features.as_deref())?;
            let (train, _) = learn::split_indices(&table.labels(), &cfg.split).at(Stage::Split)?;
            let model = learn::fit(&table.select(&train), &cfg.classifier).at(Stage::Train)?;
            let saved = SavedModel {
                split: cfg.split,
                model,
            };
            create_dir(&out)?;
            pipeline::write_json(&out.join(MODEL_FILE), &saved).at(Stage::Write)?;
            report(&out.join(MODEL_FILE));
        }
        Command::Eval { model, features } => {
            let model_path = model.unwrap_or_else(|| out.join(MODEL_FILE));
            let text = std::fs::read_to_string(&model_path)
                .map_err(|e| Error::Malformed {
                    path: model_path.clone(),
                    message: e.to_string(),
                })
                .at(Stage::Predict)?;
            let saved: SavedModel = serde_json::from_str(&text).map_err(Error::from).at(Stage::Predict)?;
            let table = load_or_build_features(&cfg, features.as_deref())?;
            let (_, test) = learn::split_indices(&table.labels(), &saved.split).at(Stage::Split)?;
            let test = table.select(&test);
            let scores = learn::predict_proba(&saved.model, test.features.view()).at(Stage::Predict)?;
            let rep = metrics::evaluate(&scores, &test.labels(), cfg.threshold).at(Stage::Evaluate)?;
            let json = serde_json::to_string_pretty(&rep).expect("json") + "\n";
            create_dir(&out)?;
            let path = out.join(EVAL_FILE);
            std::fs::write(&path, &json).map_err(|e| io_error(&path, e)).at(Stage::Write)?;
            print!("{json}");
        }
        Command::Pipeline => {
            let outcome = pipeline::run_pipeline(&cfg)?;
            print!("{}", outcome.metrics_json);
            log::info!("artifacts in {}", out.join(METRICS_FILE).display());
        }
        Command::SweepRatio { ratios } => {
            let rows = pipeline::run_ratio_sweep(&cfg, &ratios)?;
            create_dir(&out)?;
            let path = out.join(RATIO_SWEEP_FILE);
            pipeline::write_sweep(&path, "ratio_permille", &rows).at(Stage::Write)?;
            print_file(&path)?;
        }
        Command::SweepDim { dims } => {
            let rows = pipeline::run_dimension_sweep(&cfg, &dims)?;
            create_dir(&out)?;
            let path = out.join(DIM_SWEEP_FILE);
            pipeline::write_sweep(&path, "dimensions", &rows).at(Stage::Write)?;
            print_file(&path)?;
        }
        Command::Synth(args) => {
            apply_synth(&mut synth, &args);
            if let Some(seed) = cli.seed {
                synth.seed = seed;
            }
            let data = generate_synthetic(&synth).at(Stage::Config)?;
            data.write(&out).at(Stage::Write)?;
            println!(
                "wrote {} edges and {} pairs to {}",
                data.edges.len(),
                data.targets.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn resolve(cli: &Cli) -> pprlink::Result<(PipelineConfig, SynthConfig)> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            serde_json::from_str::<FileConfig>(&text).map_err(|e| Error::Malformed {
                path: path.clone(),
                message: e.to_string(),
            })?
        }
        None => FileConfig::default(),
    };
    let mut cfg = file.pipeline;
    let f = &cli.flags;
    set(&mut cfg.edges, f.edges.clone());
    set(&mut cfg.targets, f.targets.clone());
    set(&mut cfg.out_dir, cli.out_dir.clone());
    set(&mut cfg.ppr.alpha, f.alpha);
    set(&mut cfg.ppr.iterations, f.iterations);
    set(&mut cfg.ppr.top_k, f.top_k);
    set(&mut cfg.nmf.dimensions, f.dimensions);
    set(&mut cfg.nmf.max_iter, f.max_iter);
    set(&mut cfg.operator, f.operator);
    set(&mut cfg.classifier.kind, f.classifier);
    if let Some(lr) = f.learning_rate {
        match cfg.classifier.kind {
            ClassifierKind::Gbm => cfg.classifier.gbm.learning_rate = lr,
            ClassifierKind::LogReg => cfg.classifier.logreg.learning_rate = lr,
        }
    }
    set(&mut cfg.classifier.gbm.n_estimators, f.n_estimators);
    set(&mut cfg.classifier.gbm.max_depth, f.max_depth);
    set(&mut cfg.classifier.gbm.min_samples_leaf, f.min_samples_leaf);
    set(&mut cfg.classifier.logreg.iterations, f.lr_iterations);
    set(&mut cfg.classifier.logreg.l2, f.l2);
    set(&mut cfg.split.train_fraction, f.train_fraction);
    set(&mut cfg.replicates, f.replicates);
    set(&mut cfg.threshold, f.threshold);
    if let Some(seed) = cli.seed {
        cfg.split.seed = seed;
        cfg.nmf.seed = seed;
    }
    Ok((cfg, file.synth))
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_synth(cfg: &mut SynthConfig, a: &SynthArgs) {
    set(&mut cfg.communities, a.communities);
    set(&mut cfg.drugs_per_community, a.drugs_per_community);
    set(&mut cfg.genes_per_community, a.genes_per_community);
    set(&mut cfg.drug_gene_prob, a.drug_gene_prob);
    set(&mut cfg.gene_gene_prob, a.gene_gene_prob);
    set(&mut cfg.noise, a.noise);
    set(&mut cfg.pair_count, a.pair_count);
}

fn build_features(cfg: &PipelineConfig, embedding: Option<&Path>) -> StageResult<PairFeatureTable> {
    match embedding {
        Some(path) => {
            let graph = pipeline::load_graph(&cfg.edges).at(Stage::Ingest)?;
            let targets = pipeline::load_targets(&cfg.targets, &graph).at(Stage::Targets)?;
            let vectors = io::read_embedding(path).at(Stage::Embed)?;
            pair_features(&vectors, &targets, cfg.operator).at(Stage::Features)
        }
        None => {
            let prepared = pipeline::prepare(cfg)?;
            let vectors = prepared.embed(&cfg.nmf)?;
            prepared.features(&vectors, cfg.operator)
        }
    }
}

fn load_or_build_features(cfg: &PipelineConfig, features: Option<&Path>) -> StageResult<PairFeatureTable> {
    cfg.validate().at(Stage::Config)?;
    match features {
        Some(path) => io::read_features(path).at(Stage::Features),
        None => build_features(cfg, None),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create_dir(dir: &Path) -> StageResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| io_error(dir, e))
        .at(Stage::Write)
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

fn print_file(path: &Path) -> StageResult<()> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| io_error(path, e))
        .at(Stage::Write)?;
    print!("{text}");
    Ok(())
}
