//! Generate each mask family and export a few masks as PNG files.
//!
//! `cargo run --example masks_gallery [out_dir]`

use std::path::PathBuf;

use boxlens::detector::{SyntheticObject, SyntheticScene};
use boxlens::masking::{
    gen_mfpp_masks, gen_rise_masks, gen_sliding_window_masks, MaskBatch, MfppParams, RiseParams, SlidingWindowParams,
};

fn describe(name: &str, batch: &MaskBatch) {
    let mean: f64 = batch
        .iter()
        .map(|m| m.data.iter().map(|&v| v as f64).sum::<f64>() / m.data.len() as f64)
        .sum::<f64>()
        / batch.len() as f64;
    println!("{name:>8}: {} masks of {}x{}, mean kept fraction {mean:.3}", batch.len(), batch.width(), batch.height());
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("boxlens-masks"));
    let scene = SyntheticScene::new(
        96,
        64,
        1,
        0.5,
        vec![SyntheticObject::rect(0, [20, 12, 60, 48]).with_color([0.8, 0.3, 0.2])],
    );
    let img = scene.render();

    let rise = gen_rise_masks(64, 96, RiseParams::default(), 8, 1)?;
    let sliding = gen_sliding_window_masks(64, 96, SlidingWindowParams { window: 32, stride: 16 })?;
    let mfpp = gen_mfpp_masks(&img, MfppParams::default(), 8, 1)?;
    describe("rise", &rise);
    describe("sliding", &sliding);
    describe("mfpp", &mfpp);
    if let Some(segs) = mfpp.segmentations() {
        let counts: Vec<usize> = segs.iter().map(|s| s.count()).collect();
        println!("mfpp segment counts per scale: {counts:?}");
    }

    rise.export_png(out.join("rise"))?;
    sliding.export_png(out.join("sliding"))?;
    mfpp.export_png(out.join("mfpp"))?;
    println!("masks written under {}", out.display());
    Ok(())
}
