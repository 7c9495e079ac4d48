//! Explain each of two same-class objects with D-RISE and check that every
//! map points at its own object.
//!
//! `cargo run --release --example drise_synthetic [out_dir]`

use std::path::PathBuf;

use boxlens::detector::{Detector, SyntheticDetector, SyntheticObject, SyntheticScene};
use boxlens::explain::{explain, ExplainConfig, Method};
use boxlens::metrics::{ebpg, pointing_game};
use boxlens::reporting::render_heatmap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("boxlens-drise"));
    std::fs::create_dir_all(&out)?;
    let scene = SyntheticScene::new(
        64,
        64,
        1,
        0.2,
        vec![
            SyntheticObject::rect(0, [8, 8, 24, 24]),
            SyntheticObject::rect(0, [40, 36, 56, 52]),
        ],
    );
    let det = SyntheticDetector::from_scene(scene)?;
    let img = det.original().clone();
    let targets = det.detect(&img)?;
    let cfg = ExplainConfig {
        method: Method::Drise,
        masks: 1000,
        seed: 7,
        ..Default::default()
    };
    for (i, target) in targets.iter().enumerate() {
        let map = explain(&img, target, &det, &cfg)?;
        let hit = pointing_game(&map, &target.bbox);
        let energy = ebpg(&map.positive_part(), &target.bbox)?;
        println!(
            "target {i} at [{:.0},{:.0},{:.0},{:.0}]: pointing game {}, EBPG {energy:.3}",
            target.bbox.x1,
            target.bbox.y1,
            target.bbox.x2,
            target.bbox.y2,
            if hit { "hit" } else { "miss" }
        );
        render_heatmap(&map, &img, 0.5)?.save_png(out.join(format!("target{i}.png")))?;
    }
    println!("heatmaps written to {}", out.display());
    Ok(())
}
