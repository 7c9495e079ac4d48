//! A deterministic stand-in detector whose objectness is the visible fraction
//! of each object's evidence pixels. Deletion curves over it can be computed by
//! hand, which is what makes exact metric tests possible.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Detector, DetectorCapabilities, DetectorError};
use crate::detection::Detection;
use crate::geometry::BBox;
use crate::raster::ImageRaster;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticObject {
    pub class_id: usize,
    pub bbox: BBox,
    /// Evidence pixels as `[x, y]`.
    #[serde(default)]
    pub evidence: Vec<[usize; 2]>,
    /// Optional rectangle `[x1, y1, x2, y2)` of additional evidence pixels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_rect: Option<[usize; 4]>,
    /// Colour used by [`SyntheticScene::render`] for the evidence pixels.
    #[serde(default = "white", skip_serializing_if = "is_white")]
    pub color: [f32; 3],
}

fn white() -> [f32; 3] {
    [1.0; 3]
}

fn is_white(c: &[f32; 3]) -> bool {
    *c == white()
}

impl SyntheticObject {
    /// Object whose evidence is every pixel of the integer rectangle `rect`,
    /// with `bbox` equal to that rectangle.
    pub fn rect(class_id: usize, rect: [usize; 4]) -> Self {
        let bbox = BBox::new(rect[0] as f64, rect[1] as f64, rect[2] as f64, rect[3] as f64)
            .expect("rectangle corners must be ordered");
        Self {
            class_id,
            bbox,
            evidence: Vec::new(),
            evidence_rect: Some(rect),
            color: white(),
        }
    }

    pub fn with_color(mut self, color: [f32; 3]) -> Self {
        self.color = color;
        self
    }

    /// All evidence pixels, explicit ones first, deduplicated.
    pub fn evidence_pixels(&self) -> Vec<[usize; 2]> {
        let mut px = self.evidence.clone();
        if let Some([x1, y1, x2, y2]) = self.evidence_rect {
            for y in y1..y2 {
                for x in x1..x2 {
                    px.push([x, y]);
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        px.retain(|p| seen.insert(*p));
        px
    }
}

fn default_true() -> bool {
    true
}

fn default_background() -> f32 {
    0.2
}

/// Declarative ground truth for the synthetic detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub width: usize,
    pub height: usize,
    pub num_classes: usize,
    /// Objects whose visibility falls below this are not reported.
    pub emission_threshold: f64,
    pub objects: Vec<SyntheticObject>,
    /// Emit smoothed one-hot class probability vectors.
    #[serde(default = "default_true")]
    pub class_probs: bool,
    #[serde(default = "default_background")]
    pub background: f32,
}

impl SyntheticScene {
    pub fn new(width: usize, height: usize, num_classes: usize, emission_threshold: f64, objects: Vec<SyntheticObject>) -> Self {
        Self {
            width,
            height,
            num_classes,
            emission_threshold,
            objects,
            class_probs: true,
            background: default_background(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DetectorError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| DetectorError::Scene(format!("{}: {e}", path.display())))?;
        let scene: SyntheticScene =
            serde_json::from_str(&text).map_err(|e| DetectorError::Scene(format!("{}: {e}", path.display())))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        let bad = |m: String| Err(DetectorError::Scene(m));
        if self.width == 0 || self.height == 0 {
            return bad("scene dimensions must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.emission_threshold) {
            return bad(format!("emission_threshold {} outside [0, 1]", self.emission_threshold));
        }
        if self.num_classes == 0 {
            return bad("num_classes must be positive".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.class_id >= self.num_classes {
                return bad(format!("object {i}: class_id {} >= num_classes {}", o.class_id, self.num_classes));
            }
            let px = o.evidence_pixels();
            if px.is_empty() {
                return bad(format!("object {i}: evidence set is empty"));
            }
            if let Some(p) = px.iter().find(|p| p[0] >= self.width || p[1] >= self.height) {
                return bad(format!("object {i}: evidence pixel {p:?} outside {}x{}", self.width, self.height));
            }
        }
        Ok(())
    }

    /// Image with the background value everywhere and each object's colour on
    /// its evidence pixels.
    pub fn render(&self) -> ImageRaster {
        let b = self.background.clamp(0.0, 1.0);
        let mut data = vec![b; self.width * self.height * 3];
        for o in &self.objects {
            for [x, y] in o.evidence_pixels() {
                let i = (y * self.width + x) * 3;
                data[i..i + 3].copy_from_slice(&o.color.map(|c| c.clamp(0.0, 1.0)));
            }
        }
        ImageRaster::new(self.width, self.height, 3, data).expect("rendered raster is valid")
    }

    pub fn capabilities(&self) -> DetectorCapabilities {
        DetectorCapabilities {
            has_class_probs: self.class_probs,
            num_classes: self.num_classes,
            confidence_threshold: self.emission_threshold,
        }
    }

    fn smoothed_probs(&self, class_id: usize) -> Vec<f64> {
        if self.num_classes == 1 {
            return vec![1.0];
        }
        let rest = 0.1 / (self.num_classes - 1) as f64;
        (0..self.num_classes).map(|c| if c == class_id { 0.9 } else { rest }).collect()
    }
}

/// Fraction of evidence luminance still visible, `0/0` counted as 0 and
/// each pixel's ratio clamped to `[0, 1]`.
fn visibility(evidence: &[[usize; 2]], masked: &ImageRaster, original: &ImageRaster) -> f64 {
    let sum: f64 = evidence
        .iter()
        .map(|&[x, y]| {
            let o = original.luminance(x, y);
            if o <= 0.0 {
                0.0
            } else {
                (masked.luminance(x, y) / o).clamp(0.0, 1.0)
            }
        })
        .sum();
    sum / evidence.len() as f64
}

/// One detection per object whose evidence visibility reaches the scene's
/// emission threshold, with objectness equal to that visibility.
pub fn synthetic_detect(
    scene: &SyntheticScene,
    masked: &ImageRaster,
    original: &ImageRaster,
) -> Result<Vec<Detection>, DetectorError> {
    if masked.dims() != original.dims() || masked.dims() != (scene.width, scene.height) {
        return Err(DetectorError::InvalidInput(format!(
            "expected {}x{} images, got {:?} and {:?}",
            scene.width,
            scene.height,
            masked.dims(),
            original.dims()
        )));
    }
    let mut out = Vec::new();
    for o in &scene.objects {
        let v = visibility(&o.evidence_pixels(), masked, original);
        if v < scene.emission_threshold {
            continue;
        }
        let d = if scene.class_probs {
            Detection::with_label_and_probs(o.bbox, v, o.class_id, scene.smoothed_probs(o.class_id))?
        } else {
            Detection::reduced(o.bbox, v, o.class_id)?
        };
        out.push(d);
    }
    Ok(out)
}

/// [`synthetic_detect`] bound to a scene and its unperturbed image.
#[derive(Debug, Clone)]
pub struct SyntheticDetector {
    scene: Arc<SyntheticScene>,
    original: Arc<ImageRaster>,
    evidence: Arc<Vec<Vec<[usize; 2]>>>,
}

impl SyntheticDetector {
    pub fn new(scene: SyntheticScene, original: ImageRaster) -> Result<Self, DetectorError> {
        scene.validate()?;
        if original.dims() != (scene.width, scene.height) {
            return Err(DetectorError::InvalidInput(format!(
                "scene is {}x{} but image is {:?}",
                scene.width,
                scene.height,
                original.dims()
            )));
        }
        let evidence = scene.objects.iter().map(|o| o.evidence_pixels()).collect();
        Ok(Self {
            scene: Arc::new(scene),
            original: Arc::new(original),
            evidence: Arc::new(evidence),
        })
    }

    /// Detector over the scene's own rendering.
    pub fn from_scene(scene: SyntheticScene) -> Result<Self, DetectorError> {
        scene.validate()?;
        let img = scene.render();
        Self::new(scene, img)
    }

    pub fn scene(&self) -> &SyntheticScene {
        &self.scene
    }

    pub fn original(&self) -> &ImageRaster {
        &self.original
    }

    /// Objectness each object would get on `masked`, ignoring the threshold.
    pub fn visibilities(&self, masked: &ImageRaster) -> Vec<f64> {
        self.evidence.iter().map(|ev| visibility(ev, masked, &self.original)).collect()
    }
}

impl Detector for SyntheticDetector {
    fn capabilities(&self) -> DetectorCapabilities {
        self.scene.capabilities()
    }

    fn detect(&self, img: &ImageRaster) -> Result<Vec<Detection>, DetectorError> {
        synthetic_detect(&self.scene, img, &self.original)
    }
}
