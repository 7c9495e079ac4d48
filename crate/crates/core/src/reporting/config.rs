//! Run configuration: a TOML document with `explain`, `metrics` and
//! `heatmap` tables. Every key has a default, so an empty file is valid.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ReportingError;
use crate::explain::{ExplainConfig, Method};
use crate::masking::{MfppParams, RiseParams};
use crate::metrics::DeletionSettings;

pub const SEED_ENV: &str = "BOXLENS_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapSettings {
    /// Overlay opacity in `[0, 1]`.
    pub alpha: f64,
}

impl Default for HeatmapSettings {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Detections on the unperturbed image at or above this objectness are
    /// explained.
    pub threshold: f64,
    pub explain: ExplainConfig,
    pub metrics: DeletionSettings,
    pub heatmap: HeatmapSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            threshold: 0.7,
            explain: ExplainConfig::default(),
            metrics: DeletionSettings::default(),
            heatmap: HeatmapSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ReportingError> {
        toml::from_str(text).map_err(|e| ReportingError::Config(e.message().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReportingError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReportingError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises to toml")
    }

    /// Apply `dotted.key=value`. The value is read as a TOML literal and
    /// falls back to a plain string, so `explain.method=dmfpp` and
    /// `explain.mfpp.scales=[20,40]` both work.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ReportingError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ReportingError::Config(format!("override {assignment:?} is not key=value")))?;
        let key = key.trim();
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));

        let mut doc = toml::Value::try_from(&*self).expect("config serialises to toml");
        let mut node = &mut doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| ReportingError::Config(format!("{key}: {part} is not a table")))?;
            if i + 1 == parts.len() {
                if !table.contains_key(*part) {
                    return Err(ReportingError::Config(format!("unknown config key {key:?}")));
                }
                table.insert(part.to_string(), value);
                break;
            }
            node = table
                .get_mut(*part)
                .ok_or_else(|| ReportingError::Config(format!("unknown config key {key:?}")))?;
        }
        *self = doc
            .try_into()
            .map_err(|e: toml::de::Error| ReportingError::Config(format!("{key}: {}", e.message())))?;
        Ok(())
    }

    /// Seed from `BOXLENS_SEED`, when set.
    pub fn apply_env(&mut self) -> Result<(), ReportingError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.explain.seed = v
                .trim()
                .parse()
                .map_err(|_| ReportingError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ReportingError> {
        let bad = |m: String| Err(ReportingError::Config(m));
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0, 1]", self.threshold));
        }
        let e = &self.explain;
        match e.method {
            Method::Rise | Method::Drise | Method::Dmfpp if e.masks == 0 => {
                return bad("explain.masks must be positive".into());
            }
            Method::Rise | Method::Drise => check_rise(&e.rise)?,
            Method::Dmfpp => check_mfpp(&e.mfpp)?,
            Method::Dsliding => {
                if e.sliding.window == 0 || e.sliding.stride == 0 {
                    return bad("explain.sliding window and stride must be positive".into());
                }
                if e.sliding.stride > e.sliding.window {
                    return bad(format!(
                        "explain.sliding.stride {} exceeds window {}",
                        e.sliding.stride, e.sliding.window
                    ));
                }
            }
            Method::Lime => e.lime.validate().map_err(|err| ReportingError::Config(err.to_string()))?,
        }
        if self.metrics.steps == 0 {
            return bad("metrics.steps must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.metrics.gamma) {
            return bad(format!("metrics.gamma {} outside [0, 1]", self.metrics.gamma));
        }
        if !(0.0..=1.0).contains(&self.heatmap.alpha) {
            return bad(format!("heatmap.alpha {} outside [0, 1]", self.heatmap.alpha));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises to json");
        hex::encode(Sha256::digest(bytes))
    }
}

fn check_rise(p: &RiseParams) -> Result<(), ReportingError> {
    if p.grid_h == 0 || p.grid_w == 0 {
        return Err(ReportingError::Config("explain.rise grid must be positive".into()));
    }
    check_prob("explain.rise.keep_prob", p.keep_prob)
}

fn check_mfpp(p: &MfppParams) -> Result<(), ReportingError> {
    if p.scales.is_empty() || p.scales.contains(&0) || p.scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ReportingError::Config(format!(
            "explain.mfpp.scales must be positive and strictly increasing: {:?}",
            p.scales
        )));
    }
    check_prob("explain.mfpp.keep_prob", p.keep_prob)
}

fn check_prob(key: &str, p: f64) -> Result<(), ReportingError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(ReportingError::Config(format!("{key} must lie in (0, 1), got {p}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_documented_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c.explain.masks, 5000);
        assert_eq!(c.explain.rise.keep_prob, 0.25);
        assert_eq!((c.explain.rise.grid_h, c.explain.rise.grid_w), (16, 16));
        assert_eq!(c.threshold, 0.7);
        assert_eq!(c.metrics.gamma, 0.5);
        assert_eq!(c.metrics.steps, 100);
        assert_eq!(c.explain.lime.segments, 100);
        assert_eq!(c.explain.lime.samples, 1000);
        assert_eq!(c.explain.mfpp.scales, vec![50, 100, 200]);
        c.validate().unwrap();
    }

    #[test]
    fn partial_tables_keep_other_defaults() {
        let c = RunConfig::from_toml_str("[explain]\nmethod = \"dmfpp\"\n[explain.mfpp]\nkeep_prob = 0.4\n").unwrap();
        assert_eq!(c.explain.method, Method::Dmfpp);
        assert_eq!(c.explain.mfpp.keep_prob, 0.4);
        assert_eq!(c.explain.mfpp.scales, vec![50, 100, 200]);
    }

    #[test]
    fn unknown_method_lists_valid_ones() {
        let err = RunConfig::from_toml_str("[explain]\nmethod = \"gradcam\"\n").unwrap_err().to_string();
        for m in Method::ALL {
            assert!(err.contains(m.name()), "{err}");
        }
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(RunConfig::from_toml_str("[explain]\nmask_count = 3\n").is_err());
        let mut c = RunConfig::default();
        assert!(c.apply_override("explain.mask_count=3").is_err());
        assert!(c.apply_override("nonsense").is_err());
    }

    #[test]
    fn overrides() {
        let mut c = RunConfig::default();
        c.apply_override("metrics.gamma=0.9").unwrap();
        c.apply_override("explain.method=lime").unwrap();
        c.apply_override("explain.mfpp.scales=[20, 40]").unwrap();
        c.apply_override("metrics.fill=gray").unwrap();
        assert_eq!(c.metrics.gamma, 0.9);
        assert_eq!(c.explain.method, Method::Lime);
        assert_eq!(c.explain.mfpp.scales, vec![20, 40]);
        assert_eq!(c.metrics.fill, crate::masking::Fill::Gray);
        assert!(c.apply_override("explain.method=gradcam").is_err());
    }

    #[test]
    fn toml_roundtrip_and_hash() {
        let mut c = RunConfig::default();
        c.explain.seed = 42;
        let back = RunConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(RunConfig::default().hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        c.explain.rise.keep_prob = 1.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.explain.method = Method::Dmfpp;
        c.explain.mfpp.scales = vec![100, 50];
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.threshold = 1.5;
        assert!(c.validate().is_err());
    }
}
