//! Annotations derived from the segmentation raster.

use std::collections::BTreeMap;

use crate::scene::Resolution;

/// Tight box `[ymin, xmin, ymax, xmax]` around the pixels labelled `id`,
/// normalised by the image size. Row `r` spans `[r/H, (r+1)/H)`, so the
/// max edges are exclusive and a full-frame mask gives `[0, 0, 1, 1]`.
pub fn compute_bbox_2d(segmentation: &[u32], res: Resolution, id: u32) -> Option<[f64; 4]> {
    let w = res.width as usize;
    let (mut ymin, mut xmin, mut ymax, mut xmax) = (usize::MAX, usize::MAX, 0, 0);
    for (i, _) in segmentation.iter().enumerate().filter(|(_, s)| **s == id) {
        let (y, x) = (i / w, i % w);
        ymin = ymin.min(y);
        xmin = xmin.min(x);
        ymax = ymax.max(y + 1);
        xmax = xmax.max(x + 1);
    }
    if ymin == usize::MAX {
        return None;
    }
    let (h, w) = (res.height as f64, res.width as f64);
    Some([ymin as f64 / h, xmin as f64 / w, ymax as f64 / h, xmax as f64 / w])
}

/// Pixel count per segmentation id, background included.
pub fn segmentation_histogram(segmentation: &[u32]) -> BTreeMap<u32, u64> {
    let mut h = BTreeMap::new();
    for &s in segmentation {
        *h.entry(s).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let res = Resolution::new(8, 8);
        assert_eq!(compute_bbox_2d(&[5; 64], res, 5), Some([0.0, 0.0, 1.0, 1.0]));
        assert_eq!(compute_bbox_2d(&[5; 64], res, 6), None);
        let mut seg = vec![0; 64];
        seg[2 * 8 + 3] = 1;
        assert_eq!(compute_bbox_2d(&seg, res, 1), Some([2.0 / 8.0, 3.0 / 8.0, 3.0 / 8.0, 4.0 / 8.0]));
    }

    #[test]
    fn non_square() {
        let res = Resolution::new(4, 2);
        let seg = [0, 0, 0, 0, 0, 1, 1, 0];
        assert_eq!(compute_bbox_2d(&seg, res, 1), Some([0.5, 0.25, 1.0, 0.75]));
        assert_eq!(segmentation_histogram(&seg), BTreeMap::from([(0, 6), (1, 2)]));
    }

    proptest! {
        #[test]
        fn box_is_tight(w in 1u32..12, h in 1u32..12, seed: u64) {
            let res = Resolution::new(w, h);
            let mut rng = Rng::new(seed);
            let seg: Vec<u32> = (0..res.pixel_count()).map(|_| rng.below(3) as u32).collect();
            for id in 0..3u32 {
                let b = compute_bbox_2d(&seg, res, id);
                let pixels: Vec<(usize, usize)> = seg.iter().enumerate()
                    .filter(|(_, s)| **s == id).map(|(i, _)| (i / w as usize, i % w as usize)).collect();
                prop_assert_eq!(b.is_none(), pixels.is_empty());
                let Some([y0, x0, y1, x1]) = b else { continue };
                let (fh, fw) = (h as f64, w as f64);
                for &(y, x) in &pixels {
                    prop_assert!(y as f64 / fh >= y0 && (y + 1) as f64 / fh <= y1);
                    prop_assert!(x as f64 / fw >= x0 && (x + 1) as f64 / fw <= x1);
                }
                prop_assert!(pixels.iter().any(|p| p.0 as f64 / fh == y0));
                prop_assert!(pixels.iter().any(|p| (p.0 + 1) as f64 / fh == y1));
                prop_assert!(pixels.iter().any(|p| p.1 as f64 / fw == x0));
                prop_assert!(pixels.iter().any(|p| (p.1 + 1) as f64 / fw == x1));
            }
        }
    }
}
