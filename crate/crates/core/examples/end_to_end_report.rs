//! Explain, evaluate and summarise a scene through the run API, producing the
//! same artifacts as the command-line tool.
//!
//! `cargo run --release --example end_to_end_report [out_dir]`

use std::path::PathBuf;

use boxlens::detector::{SyntheticObject, SyntheticScene};
use boxlens::explain::Method;
use boxlens::reporting::{run_evaluate, run_explain, EvaluateRequest, ExplainRequest, ImageInput, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("boxlens-report"));
    std::fs::create_dir_all(&out)?;
    let scene = SyntheticScene::new(
        64,
        64,
        3,
        0.3,
        vec![
            SyntheticObject::rect(0, [4, 4, 22, 20]),
            SyntheticObject::rect(1, [30, 8, 58, 28]).with_color([0.2, 0.8, 0.3]),
            SyntheticObject::rect(2, [14, 36, 50, 60]).with_color([0.3, 0.4, 0.9]),
        ],
    );
    let scene_path = out.join("scene.json");
    std::fs::write(&scene_path, serde_json::to_string_pretty(&scene)?)?;

    for method in [Method::Drise, Method::Dmfpp] {
        let mut config = RunConfig::default();
        config.threshold = 0.5;
        config.explain.method = method;
        config.explain.masks = 500;
        config.metrics.steps = 25;
        let run_dir = out.join(method.name());
        let manifest = run_explain(&ExplainRequest {
            config: config.clone(),
            detector: format!("synthetic:{}", scene_path.display()).parse()?,
            images: vec![ImageInput {
                id: "scene".into(),
                path: None,
                targets: None,
            }],
            out_dir: run_dir.clone(),
        })?;
        let (report, _) = run_evaluate(&EvaluateRequest {
            config,
            explain_manifest: run_dir.join("manifest.json"),
            detector: None,
            out_dir: run_dir.join("metrics"),
        })?;
        let o = &report.overall;
        println!(
            "{:>6}: {} targets, config {}, deletion {:.3}, d-deletion {:.3}, pointing game {:.2}, EBPG {:.3}",
            method.name(),
            o.count,
            &manifest.config_hash[..12],
            o.deletion.unwrap_or(f64::NAN),
            o.d_deletion.unwrap_or(f64::NAN),
            o.pg.unwrap_or(f64::NAN),
            o.ebpg.unwrap_or(f64::NAN)
        );
    }
    println!("artifacts under {}", out.display());
    Ok(())
}
