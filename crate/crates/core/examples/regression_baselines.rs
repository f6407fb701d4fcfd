//! Regenerates the seeded regression fixtures under `tests/fixtures`.
//!
//! Run with `cargo run --release -p srp-core --example regression_baselines`
//! only when a change to the samplers is meant to move the baselines.

use std::path::Path;

use serde_json::json;
use srp_core::experiment::{run_regen, run_tails, ExperimentConfig};

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");

    let tails_cfg = json!({
        "geometry": {"kind": "grid", "rows": 12, "cols": 12},
        "alpha": 1.5,
        "log_mu": 0.970,
        "sampler": {"chains": 4, "sweeps": 25000},
        "seed": 2024,
        "analysis": {"kind": "tails", "ell_max": 20}
    });
    let cfg = ExperimentConfig::from_json(&tails_cfg.to_string()).expect("tails config");
    let s = &run_tails(&cfg).expect("tails run").summaries[0];
    let fixture = json!({"config": tails_cfg, "tail": s.tail, "upper": s.band.iter().map(|b| b.1).collect::<Vec<_>>()});
    std::fs::write(
        dir.join("tails_grid12_alpha1.5.json"),
        serde_json::to_string_pretty(&fixture).unwrap(),
    )
    .unwrap();

    let regen_cfg = json!({
        "model": "open",
        "geometry": {"kind": "cylinder", "n": 32, "d": 2},
        "alpha": 2.0,
        "sampler": {"chains": 8, "sweeps": 1250},
        "seed": 2024,
        "analysis": {"kind": "regen"}
    });
    let cfg = ExperimentConfig::from_json(&regen_cfg.to_string()).expect("regen config");
    let s = &run_regen(&cfg).expect("regen run").summaries[0];
    let quantiles: Vec<(f64, f64)> = s.stats.quantiles.iter().map(|&(q, v)| (q, round3(v))).collect();
    let fixture = json!({"config": regen_cfg, "samples": s.stats.samples, "quantiles": quantiles});
    std::fs::write(
        dir.join("regen_n32_d2_alpha2.json"),
        serde_json::to_string_pretty(&fixture).unwrap(),
    )
    .unwrap();
}
