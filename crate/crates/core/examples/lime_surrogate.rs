//! Fit a LIME surrogate over superpixels and list the segments that raise the
//! target's score the most.
//!
//! `cargo run --release --example lime_surrogate`

use boxlens::detector::{Detector, SyntheticDetector, SyntheticObject, SyntheticScene};
use boxlens::explain::{explain_lime_detailed, LimeConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = SyntheticScene::new(
        64,
        48,
        2,
        0.1,
        vec![
            SyntheticObject::rect(0, [6, 6, 26, 30]).with_color([0.9, 0.5, 0.1]),
            SyntheticObject::rect(1, [36, 14, 58, 40]).with_color([0.1, 0.6, 0.9]),
        ],
    );
    let det = SyntheticDetector::from_scene(scene)?;
    let img = det.original().clone();
    let target = det.detect(&img)?.remove(0);
    let cfg = LimeConfig {
        segments: 40,
        samples: 500,
        ..Default::default()
    };
    let lime = explain_lime_detailed(&img, &target, &det, &cfg, 3)?;
    let seg = &lime.segmentation;
    let sizes = seg.sizes();
    let mut centroids = vec![(0.0, 0.0); seg.count()];
    for y in 0..seg.height() {
        for x in 0..seg.width() {
            let c = &mut centroids[seg.label(x, y)];
            c.0 += x as f64 / sizes[seg.label(x, y)] as f64;
            c.1 += y as f64 / sizes[seg.label(x, y)] as f64;
        }
    }
    let mut ranked: Vec<usize> = (0..seg.count()).collect();
    ranked.sort_by(|&a, &b| lime.weights[b].total_cmp(&lime.weights[a]));
    println!("{} segments, intercept {:.3}", seg.count(), lime.intercept);
    for &s in ranked.iter().take(5) {
        let (cx, cy) = centroids[s];
        let inside = target.bbox.contains_pixel(cx as usize, cy as usize);
        println!(
            "segment {s:>3}: weight {:+.4}, centroid ({cx:.1}, {cy:.1}){}",
            lime.weights[s],
            if inside { ", inside target" } else { "" }
        );
    }
    Ok(())
}
