//! End-to-end runs of the experiment pipelines and the torus oracle.

use std::path::Path;
use std::time::Instant;

use perfektor_core::harness::config::sha256_hex;
use perfektor_core::harness::stats::compare_distributions;
use perfektor_core::harness::{run_experiment, torus_long_run, ExperimentConfig, ExperimentKind, OracleParams, RunOptions};
use perfektor_core::rates::{ExampleOneRates, GeometricQ, HeatBathRates, MrfSpecification};
use perfektor_core::{Error, Site, SiteSet};

const SPONTANEOUS: &str = r#"{
    "dimension": 1, "model": "table", "range": 0, "total_rate": 1.0,
    "rates": [[0.2, 0.3, 0.5], [0.2, 0.3, 0.5], [0.2, 0.3, 0.5]]
}"#;

fn config(body: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(body).unwrap()
}

fn with_model(model: &str, rest: &str) -> ExperimentConfig {
    config(&format!(r#"{{ "model": {model} {rest} }}"#))
}

fn run(cfg: ExperimentConfig, kind: ExperimentKind, out: Option<&Path>) -> perfektor_core::harness::ExperimentReport {
    let loaded = cfg.prepare(Path::new("."), sha256_hex(b"test")).unwrap();
    let opts = RunOptions { check: true, out: out.map(Path::to_path_buf) };
    run_experiment(&loaded, kind, &opts).unwrap()
}

#[test]
fn smoke_run_is_fast_and_green() {
    let start = Instant::now();
    let report = run(with_model(SPONTANEOUS, r#", "replicates": 100, "seed": 3"#), ExperimentKind::Sample, None);
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert!(report.passed(), "{:?}", report.assertions);
    assert!(!report.assertions.is_empty());
}

#[test]
fn small_torus_is_a_structured_error() {
    let cfg = with_model(r#"{ "dimension": 1, "model": "heat_bath", "beta": 0.1 }"#, r#", "oracle": { "side": 2 }"#);
    let err = cfg.prepare(Path::new("."), String::new()).err().unwrap();
    assert!(matches!(err, Error::TorusTooSmall { side: 2, range: 1 }));
    assert_eq!(err.kind(), "torus_too_small");
}

#[test]
fn outputs_are_byte_reproducible() {
    let em1 = r#"{ "dimension": 1, "model": "example1", "q0": 0.625, "q_inf": 0.5, "ratio": 0.25 }"#;
    let cases = [
        (with_model(SPONTANEOUS, r#", "sites": [[0], [1]], "replicates": 500, "seed": 1"#), ExperimentKind::Sample),
        (with_model(em1, r#", "sites": [[0], [2]], "horizon": 1.5, "replicates": 300, "seed": 2"#), ExperimentKind::Trajectory),
        (with_model(em1, r#", "replicates": 50, "mutations": 20, "seed": 3"#), ExperimentKind::Finitary),
        (with_model(em1, r#", "replicates": 500, "grid": [0.5, 1.0], "seed": 4"#), ExperimentKind::Sketch),
        (with_model(em1, r#", "replicates": 500, "grid": [1.0, 2.0], "seed": 5"#), ExperimentKind::Couple),
    ];
    for (cfg, kind) in cases {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = run(cfg.clone(), kind, Some(a.path()));
        run(cfg, kind, Some(b.path()));
        assert!(ra.files.iter().any(|f| f.ends_with(".csv")), "{kind:?}");
        for name in &ra.files {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{kind:?} {name}");
        }
        let manifest: serde_json::Value =
            serde_json::from_slice(&std::fs::read(a.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["files"].as_object().unwrap().len() + 1, ra.files.len());
        assert_eq!(manifest["config_sha256"], sha256_hex(b"test"));
    }
}

#[test]
fn decompose_check_on_truncated_example() {
    let cfg = with_model(r#"{ "dimension": 1, "model": "example1", "q0": 0.625, "q_inf": 0.5, "ratio": 0.25, "R": 3 }"#, "");
    let report = run(cfg, ExperimentKind::Decompose, None);
    assert!(report.passed(), "{:?}", report.assertions);
    let alpha = report.summary["alpha"].as_array().unwrap();
    // Truncation at R reads colors up to distance R + 1, and α(R + 1) = M.
    assert_eq!(alpha.len(), 6);
    assert_eq!(alpha[5].as_f64(), Some(1.0));
}

#[test]
fn heat_bath_torus_is_flip_symmetric() {
    let hb = HeatBathRates::new(MrfSpecification::ising(1, 0.1).unwrap());
    let params = OracleParams { side: 32, burn_in: 100.0, thinning: 10.0, samples: 20_000, chains: 4 };
    let counts = torus_long_run(&hb, &params, &[SiteSet::singleton(Site::new([0]))], 21).unwrap();
    let (down, up) = (counts[0][0] as f64, counts[0][1] as f64);
    let n = down + up;
    assert!((up - down).abs() <= 3.0 * n.sqrt(), "{down} vs {up}");
}

#[test]
fn example_torus_is_seed_stable() {
    let rates = ExampleOneRates::new(1, &GeometricQ::reference(), 25).unwrap();
    let params = OracleParams { side: 64, burn_in: 1000.0, thinning: 10.0, samples: 10_000, chains: 4 };
    let f = [SiteSet::singleton(Site::new([0]))];
    let a = torus_long_run(&rates, &params, &f, 1).unwrap();
    let b = torus_long_run(&rates, &params, &f, 2).unwrap();
    assert_ne!(a, b);
    assert!(compare_distributions(&a[0], &b[0]).unwrap().p_value > 0.01);
}
