use std::path::Path;

use pprlink::graph::HeteroGraph;
use pprlink::io;
use pprlink::learn::ClassifierKind;
use pprlink::pipeline::{
    prepare, run_dimension_sweep, run_pipeline, run_ratio_sweep, sha256_file, Manifest, PipelineConfig,
};
use pprlink::synth::{generate_synthetic, SynthConfig};

fn planted(dir: &Path, synth: &SynthConfig) -> PipelineConfig {
    generate_synthetic(synth).unwrap().write(dir).unwrap();
    PipelineConfig {
        edges: dir.join("edges.csv"),
        targets: dir.join("targets.csv"),
        out_dir: dir.join("out"),
        ..PipelineConfig::default()
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = planted(dir.path(), &SynthConfig::default());
    let a = run_pipeline(&cfg).unwrap();
    let first = std::fs::read(cfg.out_dir.join("metrics.json")).unwrap();
    let b = run_pipeline(&cfg).unwrap();
    assert_eq!(a.metrics_json, b.metrics_json);
    assert_eq!(first, std::fs::read(cfg.out_dir.join("metrics.json")).unwrap());
    assert!(a.summary.mean.auroc >= 0.9);
}

#[test]
fn manifest_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = planted(dir.path(), &SynthConfig::default());
    run_pipeline(&cfg).unwrap();
    let text = std::fs::read_to_string(cfg.out_dir.join("manifest.json")).unwrap();
    let manifest: Manifest = serde_json::from_str(&text).unwrap();
    for d in &manifest.inputs {
        assert_eq!(d.sha256, sha256_file(Path::new(&d.path)).unwrap());
    }
    assert_eq!(manifest.outputs.len(), 4);

    let mut again = manifest.config.clone();
    again.out_dir = dir.path().join("again");
    run_pipeline(&again).unwrap();
    for d in &manifest.outputs {
        assert_eq!(d.sha256, sha256_file(&again.out_dir.join(&d.path)).unwrap(), "{}", d.path);
    }
}

#[test]
fn artifacts_load_back_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = planted(dir.path(), &SynthConfig::default());
    let prepared = prepare(&cfg).unwrap();
    let vectors = prepared.embed(&cfg.nmf).unwrap();
    let table = prepared.features(&vectors, cfg.operator).unwrap();
    run_pipeline(&cfg).unwrap();

    let graph = HeteroGraph::from_rows(&io::read_edges(&cfg.edges).unwrap()).unwrap();
    let pruned = io::read_pruned(&cfg.out_dir.join("ppr.csv"), &graph).unwrap();
    assert_eq!(pruned, prepared.pruned);
    let loaded = io::read_embedding(&cfg.out_dir.join("embedding.csv")).unwrap();
    assert_eq!(loaded.ids(), vectors.ids());
    assert_eq!(loaded.vectors(), vectors.vectors());
    let features = io::read_features(&cfg.out_dir.join("features.csv")).unwrap();
    assert_eq!(features.pairs, table.pairs);
    assert_eq!(features.features, table.features);
}

#[test]
fn zero_noise_concentrates_ppr_mass() {
    let synth = SynthConfig {
        noise: 0.0,
        ..SynthConfig::default()
    };
    let data = generate_synthetic(&synth).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = planted(dir.path(), &synth);
    let prepared = prepare(&cfg).unwrap();
    let g = &prepared.graph;
    for (d, row) in prepared.pruned.rows().iter().enumerate() {
        let own = data.community_of(&g.node(d).id);
        let total: f64 = row.iter().map(|&(_, v)| v).sum();
        let intra: f64 = row
            .iter()
            .filter(|&&(v, _)| data.community_of(&g.node(v).id) == own)
            .map(|&(_, v)| v)
            .sum();
        assert!(intra >= 0.9 * total, "drug {d}: {intra} of {total}");
    }
}

/// The 800‰ ratio and the default dimension coincide with the default
/// pipeline up to sampling noise.
#[test]
fn sweeps_agree_with_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = planted(dir.path(), &SynthConfig::default());
    let base = run_pipeline(&cfg).unwrap().summary;

    let ratio = run_ratio_sweep(&cfg, &[800]).unwrap();
    let gbm = ratio.iter().find(|r| r.classifier == ClassifierKind::Gbm).unwrap();
    let tol = 2.0 * (gbm.auroc_stderr + base.stderr.auroc) + 1e-12;
    assert!((gbm.mean_auroc - base.mean.auroc).abs() <= tol, "{} vs {}", gbm.mean_auroc, base.mean.auroc);

    let dims = run_dimension_sweep(&cfg, &[32]).unwrap();
    let gbm = dims.iter().find(|r| r.classifier == ClassifierKind::Gbm).unwrap();
    assert!((gbm.mean_auroc - base.mean.auroc).abs() <= 1e-12);
    assert_eq!(gbm.replicates_ok, 10);
}

#[test]
fn tiny_ratios_fail_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = planted(dir.path(), &SynthConfig::default());
    let rows = run_ratio_sweep(&cfg, &[1, 500]).unwrap();
    assert_eq!(rows.len(), 4);
    let tiny = &rows[0];
    assert_eq!(tiny.setting, 1);
    assert_eq!(tiny.replicates_ok, 0);
    assert!(tiny.error.as_deref().unwrap().contains("stage="));
    assert!(rows[2..].iter().all(|r| r.replicates_ok == 10 && r.error.is_none()));
}
