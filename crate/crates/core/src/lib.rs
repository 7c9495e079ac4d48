//! Black-box explanations for object detectors.
//!
//! A detector is any [`detector::Detector`]: an in-process implementation,
//! the deterministic [`detector::SyntheticDetector`], or an external process
//! reached through [`detector::ProtocolClient`]. Saliency maps for one
//! detection come from [`explain::explain`] (RISE, D-RISE, D-MFPP,
//! sliding-window occlusion, LIME), and [`metrics`] scores them with the
//! pointing game, EBPG and the deletion / min-subset family including the
//! localisation-aware variants. [`reporting`] and the `boxlens` binary wrap
//! these into reproducible runs.

pub mod cli;
pub mod detection;
pub mod detector;
pub mod explain;
pub mod geometry;
pub mod masking;
pub mod metrics;
pub mod raster;
pub mod reporting;
pub mod saliency;
