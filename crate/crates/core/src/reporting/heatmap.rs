//! Heatmap overlays through a fixed blue-green-red lookup table.

use log::warn;

use super::ReportingError;
use crate::raster::ImageRaster;
use crate::saliency::SaliencyMap;

/// Bumped whenever the table below changes.
pub const LUT_VERSION: u32 = 1;

/// Colour for LUT entry `i`: blue to green over the first half, green to
/// red over the second.
pub fn lut_entry(i: u8) -> [u8; 3] {
    let t = i as f64 / 255.0;
    let (r, g, b) = if t < 0.5 {
        (0.0, 2.0 * t, 1.0 - 2.0 * t)
    } else {
        (2.0 * t - 1.0, 2.0 - 2.0 * t, 0.0)
    };
    let q = |v: f64| (v * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

/// Per-pixel LUT index after min-max normalisation; `None` for a constant map.
pub fn lut_indices(map: &SaliencyMap) -> Option<Vec<u8>> {
    let (lo, hi) = map.min_max();
    let span = hi - lo;
    if span <= 0.0 {
        return None;
    }
    Some(
        map.values()
            .iter()
            .map(|&v| (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect(),
    )
}

/// Blend the coloured map over `base` with opacity `alpha`. A constant map
/// renders as the middle LUT colour.
pub fn render_heatmap(map: &SaliencyMap, base: &ImageRaster, alpha: f64) -> Result<ImageRaster, ReportingError> {
    if map.dims() != base.dims() {
        return Err(ReportingError::Render(format!(
            "map is {:?}, image is {:?}",
            map.dims(),
            base.dims()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ReportingError::Render(format!("alpha {alpha} outside [0, 1]")));
    }
    let idx = lut_indices(map).unwrap_or_else(|| {
        warn!("constant saliency map ({}); rendering a uniform overlay", map.method_tag);
        vec![128; map.values().len()]
    });
    let base = base.to_rgb();
    let a = alpha as f32;
    let (w, h) = base.dims();
    ImageRaster::from_fn(w, h, 3, |x, y| {
        let c = lut_entry(idx[y * w + x]);
        let p = base.pixel(x, y);
        [0, 1, 2].map(|k| (1.0 - a) * p[k] + a * c[k] as f32 / 255.0)
    })
    .map_err(|e| ReportingError::Render(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::Detection;
    use crate::geometry::BBox;

    fn map(w: usize, h: usize, values: Vec<f64>) -> SaliencyMap {
        let t = Detection::reduced(BBox::new(0., 0., 1., 1.).unwrap(), 1.0, 0).unwrap();
        SaliencyMap::new(w, h, values, t, "test").unwrap()
    }

    #[test]
    fn lut_endpoints() {
        assert_eq!(lut_entry(0), [0, 0, 255]);
        assert_eq!(lut_entry(255), [255, 0, 0]);
        assert_eq!(lut_entry(128), [1, 254, 0]);
    }

    #[test]
    fn thirds_select_expected_entries() {
        let m = map(2, 2, vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(lut_indices(&m).unwrap(), vec![0, 85, 170, 255]);
    }

    #[test]
    fn constant_map_is_uniform() {
        let m = map(3, 2, vec![0.4; 6]);
        assert!(lut_indices(&m).is_none());
        let base = ImageRaster::filled(3, 2, 3, 0.0).unwrap();
        let out = render_heatmap(&m, &base, 1.0).unwrap();
        let mid = lut_entry(128).map(|v| v as f32 / 255.0);
        for y in 0..2 {
            for x in 0..3 {
                assert_eq!(out.pixel(x, y), &mid);
            }
        }
    }

    #[test]
    fn hottest_pixel_tracks_brightest() {
        let base = ImageRaster::from_fn(4, 4, 1, |x, y| [((x * 7 + y * 3) % 11) as f32 / 10.0; 3]).unwrap();
        let m = map(4, 4, (0..16).map(|i| base.luminance(i % 4, i / 4)).collect());
        let idx = lut_indices(&m).unwrap();
        let hottest = idx.iter().position(|&v| v == 255).unwrap();
        assert_eq!(hottest, m.argmax());
        let out = render_heatmap(&m, &base, 0.5).unwrap();
        assert_eq!(out.channels(), 3);
    }

    #[test]
    fn alpha_zero_keeps_base() {
        let base = ImageRaster::from_fn(2, 2, 3, |x, y| [x as f32 / 2.0, y as f32 / 2.0, 0.3]).unwrap();
        let m = map(2, 2, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(render_heatmap(&m, &base, 0.0).unwrap(), base);
    }
}
