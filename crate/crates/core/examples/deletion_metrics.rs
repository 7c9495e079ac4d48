//! Score a good and a misleading saliency map with the deletion metrics and
//! their localisation-aware variants.
//!
//! `cargo run --release --example deletion_metrics`

use boxlens::detector::{Detector, SyntheticDetector, SyntheticObject, SyntheticScene};
use boxlens::explain::{explain, ExplainConfig, Method};
use boxlens::metrics::{evaluate_deletion, DeletionSettings, Variant};
use boxlens::saliency::SaliencyMap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
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
    let target = det.detect(&img)?.remove(0);
    let settings = DeletionSettings {
        steps: 50,
        ..Default::default()
    };
    let cfg = settings.for_target(&target);

    let drise = explain(
        &img,
        &target,
        &det,
        &ExplainConfig {
            method: Method::Drise,
            masks: 1000,
            seed: 7,
            ..Default::default()
        },
    )?;
    let rise = explain(
        &img,
        &target,
        &det,
        &ExplainConfig {
            method: Method::Rise,
            masks: 1000,
            seed: 7,
            ..Default::default()
        },
    )?;
    // highlights the other instance instead of the target
    let wrong = SaliencyMap::new(
        64,
        64,
        drise.values().iter().rev().copied().collect(),
        target.clone(),
        "flipped",
    )?;

    println!("{:>8} {:>9} {:>11} {:>10} {:>12}", "map", "deletion", "d-deletion", "min-subset", "d-min-subset");
    for (name, map) in [("d-rise", &drise), ("rise", &rise), ("flipped", &wrong)] {
        let e = evaluate_deletion(&img, map, &det, &cfg)?;
        println!(
            "{name:>8} {:>9.4} {:>11.4} {:>9.1}% {:>11.1}%",
            e.curve(Variant::Plain).auc,
            e.curve(Variant::D).auc,
            e.min_subset(Variant::Plain),
            e.min_subset(Variant::D)
        );
    }
    Ok(())
}
