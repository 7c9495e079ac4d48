//! Occlusion saliency with a sliding window, printed as a coarse text grid.
//!
//! `cargo run --release --example sliding_window`

use boxlens::detector::{Detector, SyntheticDetector, SyntheticObject, SyntheticScene};
use boxlens::explain::{explain, ExplainConfig, Method};
use boxlens::masking::SlidingWindowParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = SyntheticScene::new(
        48,
        32,
        1,
        0.0,
        vec![SyntheticObject::rect(0, [28, 6, 44, 26]).with_color([0.7, 0.7, 0.2])],
    );
    let det = SyntheticDetector::from_scene(scene)?;
    let img = det.original().clone();
    let target = det.detect(&img)?.remove(0);
    let cfg = ExplainConfig {
        method: Method::Dsliding,
        sliding: SlidingWindowParams { window: 8, stride: 4 },
        ..Default::default()
    };
    let map = explain(&img, &target, &det, &cfg)?;
    let (lo, hi) = map.min_max();
    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    for y in (0..map.height()).step_by(2) {
        let row: String = (0..map.width())
            .map(|x| {
                let t = if hi > lo { (map.get(x, y) - lo) / (hi - lo) } else { 0.0 };
                shades[((t * 9.0).round() as usize).min(9)]
            })
            .collect();
        println!("|{row}|");
    }
    Ok(())
}
