//! Compare how much saliency energy D-MFPP and D-RISE put inside the target
//! box as the mask budget grows.
//!
//! `cargo run --release --example dmfpp_vs_drise`

use boxlens::detector::{Detector, SyntheticDetector, SyntheticObject, SyntheticScene};
use boxlens::explain::{explain, ExplainConfig, Method};
use boxlens::metrics::ebpg;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = SyntheticScene::new(
        64,
        64,
        1,
        0.0,
        vec![SyntheticObject::rect(0, [20, 24, 36, 40]).with_color([0.9, 0.2, 0.1])],
    );
    let det = SyntheticDetector::from_scene(scene)?;
    let img = det.original().clone();
    let target = det.detect(&img)?.remove(0);
    println!("{:>6} {:>8} {:>8}", "masks", "d-mfpp", "d-rise");
    for masks in [100, 250, 500, 1000, 2000] {
        let score = |method| -> Result<f64, Box<dyn std::error::Error>> {
            let cfg = ExplainConfig {
                method,
                masks,
                seed: 11,
                ..Default::default()
            };
            Ok(ebpg(&explain(&img, &target, &det, &cfg)?.positive_part(), &target.bbox)?)
        };
        println!("{masks:>6} {:>8.4} {:>8.4}", score(Method::Dmfpp)?, score(Method::Drise)?);
    }
    Ok(())
}
