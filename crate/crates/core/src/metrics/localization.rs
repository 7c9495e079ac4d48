use super::MetricsError;
use crate::geometry::BBox;
use crate::saliency::SaliencyMap;

/// Hit when the first (row-major) maximal pixel has its centre inside `gt_box`.
pub fn pointing_game(map: &SaliencyMap, gt_box: &BBox) -> bool {
    let i = map.argmax();
    gt_box.contains_pixel(i % map.width(), i / map.width())
}

/// Fraction of total saliency mass whose pixel centres lie inside `gt_box`.
pub fn ebpg(map: &SaliencyMap, gt_box: &BBox) -> Result<f64, MetricsError> {
    if map.values().iter().any(|&v| v < 0.0) {
        return Err(MetricsError::NegativeSaliency);
    }
    let w = map.width();
    let mut inside = 0.0;
    let mut total = 0.0;
    for (i, &v) in map.values().iter().enumerate() {
        total += v;
        if gt_box.contains_pixel(i % w, i / w) {
            inside += v;
        }
    }
    if total <= 0.0 {
        return Err(MetricsError::UndefinedEbpg);
    }
    Ok((inside / total).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::Detection;
    use proptest::prelude::*;

    fn map(w: usize, h: usize, values: Vec<f64>) -> SaliencyMap {
        let t = Detection::reduced(BBox::new(0., 0., 1., 1.).unwrap(), 1.0, 0).unwrap();
        SaliencyMap::new(w, h, values, t, "test").unwrap()
    }

    fn delta(idx: usize) -> SaliencyMap {
        let mut v = vec![0.0; 16];
        v[idx] = 1.0;
        map(4, 4, v)
    }

    #[test]
    fn pointing_game_examples() {
        let b = BBox::new(0., 0., 2., 2.).unwrap();
        assert!(pointing_game(&delta(5), &b));
        assert!(!pointing_game(&delta(15), &b));
        assert!(pointing_game(&map(4, 4, vec![0.3; 16]), &b));
        assert!(!pointing_game(&map(4, 4, vec![0.3; 16]), &BBox::new(1., 1., 3., 3.).unwrap()));
    }

    #[test]
    fn ebpg_examples() {
        let quarter = BBox::new(0., 0., 2., 2.).unwrap();
        assert_eq!(ebpg(&map(4, 4, vec![1.0; 16]), &quarter).unwrap(), 0.25);
        assert_eq!(ebpg(&delta(0), &quarter).unwrap(), 1.0);
        // 2-pixel box on a 4x2 map
        let mut v = vec![1.0; 8];
        v[0] = 3.0;
        v[1] = 3.0;
        assert_eq!(ebpg(&map(4, 2, v), &BBox::new(0., 0., 2., 1.).unwrap()).unwrap(), 0.5);
    }

    #[test]
    fn ebpg_errors() {
        let b = BBox::new(0., 0., 2., 2.).unwrap();
        assert!(matches!(ebpg(&map(4, 4, vec![0.0; 16]), &b), Err(MetricsError::UndefinedEbpg)));
        let mut v = vec![1.0; 16];
        v[3] = -0.5;
        assert!(matches!(ebpg(&map(4, 4, v), &b), Err(MetricsError::NegativeSaliency)));
    }

    proptest! {
        #[test]
        fn pg_invariant_under_monotone_transform(
            values in prop::collection::vec(0.0..10.0f64, 24),
            bx in 0.0..6.0f64, by in 0.0..4.0f64, bw in 0.5..6.0f64, bh in 0.5..4.0f64,
        ) {
            let m = map(6, 4, values);
            let b = BBox::new(bx, by, bx + bw, by + bh).unwrap();
            let t = m.map_values(|v| (v * 0.7).exp() - 3.0).unwrap();
            prop_assert_eq!(pointing_game(&m, &b), pointing_game(&t, &b));
        }

        #[test]
        fn ebpg_scale_invariant(
            values in prop::collection::vec(0.01..10.0f64, 24),
            c in 1e-3..1e3f64,
            bx in 0.0..6.0f64, by in 0.0..4.0f64, bw in 0.5..6.0f64, bh in 0.5..4.0f64,
        ) {
            let m = map(6, 4, values);
            let b = BBox::new(bx, by, bx + bw, by + bh).unwrap();
            let s = m.map_values(|v| v * c).unwrap();
            let (e1, e2) = (ebpg(&m, &b).unwrap(), ebpg(&s, &b).unwrap());
            prop_assert!((e1 - e2).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&e1));
        }
    }
}
