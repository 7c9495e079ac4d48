//! Drive an out-of-process style detector through the line protocol. The
//! server here runs on a thread over OS pipes; a real deployment would spawn
//! it with `ProtocolClient::spawn("python my_detector.py")`.
//!
//! `cargo run --release --example external_detector`

use std::io::BufReader;

use boxlens::detector::protocol::serve;
use boxlens::detector::{ProtocolClient, SyntheticDetector, SyntheticObject, SyntheticScene};
use boxlens::explain::{explain, ExplainConfig, Method};
use boxlens::metrics::pointing_game;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = SyntheticScene::new(
        64,
        64,
        2,
        0.3,
        vec![
            SyntheticObject::rect(0, [6, 10, 26, 30]),
            SyntheticObject::rect(1, [36, 30, 60, 58]).with_color([0.3, 0.9, 0.4]),
        ],
    );
    let local = SyntheticDetector::from_scene(scene)?;
    let img = local.original().clone();

    let (req_r, req_w) = std::io::pipe()?;
    let (resp_r, resp_w) = std::io::pipe()?;
    let server = std::thread::spawn(move || serve(&local, BufReader::new(req_r), resp_w));
    let client = ProtocolClient::from_streams(resp_r, req_w)?;
    println!("handshake: {:?}", client.handshake());

    let detections = client.detect(&img)?;
    let cfg = ExplainConfig {
        method: Method::Drise,
        masks: 500,
        seed: 1,
        ..Default::default()
    };
    for d in &detections {
        // masked images are scored by concurrent requests over the same pipe
        let map = explain(&img, d, &client, &cfg)?;
        println!(
            "class {} objectness {:.2}: pointing game {}",
            d.class_id(),
            d.objectness(),
            if pointing_game(&map, &d.bbox) { "hit" } else { "miss" }
        );
    }
    drop(client);
    server.join().expect("server thread")?;
    Ok(())
}
