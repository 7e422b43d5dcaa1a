//! Shape and color evaluation metrics.

mod palette;
mod surface;

use std::fmt::Write as _;

pub use palette::{build_palette, color_complexity, ColorPalette, DEFAULT_K, DEFAULT_SEED, DEFAULT_T1, DEFAULT_T2};
pub use surface::{pair_surfaces, surface_psnr, ColorSpace, PSNR_CAP};

use crate::volumes::{Rgb, ShapeVolume};
use crate::{Error, Result};

/// Intersection over union of two binary volumes; 1 when both are empty.
pub fn iou(gt: &ShapeVolume, pred: &ShapeVolume) -> Result<f64> {
    gt.dims().ensure_eq(&pred.dims())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for i in 0..gt.dims().len() {
        let (a, b) = (gt.is_occupied(i), pred.is_occupied(i));
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Full-range BT.601.
pub fn rgb_to_ycbcr([r, g, b]: Rgb) -> [f64; 3] {
    [
        0.299 * r + 0.587 * g + 0.114 * b,
        0.5 - 0.168736 * r - 0.331264 * g + 0.5 * b,
        0.5 + 0.5 * r - 0.418688 * g - 0.081312 * b,
    ]
}

/// Rescales a joint-representation color channel that passed the occupancy
/// threshold `t` back onto `[0, 1]`.
pub fn adjust_joint_color(c_pred: f64, t: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Parameter(format!(
            "joint color threshold must lie in [0, 1), got {t}"
        )));
    }
    Ok(((c_pred - t) / (1.0 - t)).clamp(0.0, 1.0))
}

pub const CSV_HEADER: &str = "id,view,iou,psnr_rgb,psnr_ycbcr,color_complexity";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub id: String,
    pub view: String,
    pub iou: f64,
    pub psnr_rgb: f64,
    pub psnr_ycbcr: f64,
    pub color_complexity: Option<usize>,
}

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        let cc = self
            .color_complexity
            .map(|c| c.to_string())
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.id, self.view, self.iou, self.psnr_rgb, self.psnr_ycbcr, cc
        )
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "iou={}", self.iou).unwrap();
        writeln!(s, "psnr_rgb={}", self.psnr_rgb).unwrap();
        writeln!(s, "psnr_ycbcr={}", self.psnr_ycbcr).unwrap();
        if let Some(c) = self.color_complexity {
            writeln!(s, "color_complexity={c}").unwrap();
        }
        s
    }
}

/// Header plus one line per row.
pub fn to_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volumes::GridDims;
    use proptest::prelude::*;

    #[test]
    fn iou_cases() {
        let dims = GridDims::new(3, 1, 1).unwrap();
        let a = ShapeVolume::ground_truth(dims, vec![1.0, 1.0, 0.0]).unwrap();
        let b = ShapeVolume::ground_truth(dims, vec![0.0, 1.0, 1.0]).unwrap();
        let c = ShapeVolume::ground_truth(dims, vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &c).unwrap(), 0.0);
        assert!((iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let empty = ShapeVolume::empty(dims);
        assert_eq!(iou(&empty, &empty).unwrap(), 1.0);
    }

    #[test]
    fn ycbcr_reference_colors() {
        assert_eq!(rgb_to_ycbcr([0.0; 3]), [0.0, 0.5, 0.5]);
        let w = rgb_to_ycbcr([1.0; 3]);
        for (a, b) in w.iter().zip([1.0, 0.5, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
        let r = rgb_to_ycbcr([1.0, 0.0, 0.0]);
        for (a, b) in r.iter().zip([0.299, 0.331264, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_color_adjustment() {
        assert_eq!(adjust_joint_color(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(adjust_joint_color(1.0, 0.3).unwrap(), 1.0);
        assert!((adjust_joint_color(0.5, 0.25).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(adjust_joint_color(0.1, 0.3).unwrap(), 0.0);
        assert!(adjust_joint_color(0.5, 1.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let row = MetricsRow {
            id: "demo".into(),
            view: "3".into(),
            iou: 1.0,
            psnr_rgb: 99.0,
            psnr_ycbcr: 99.0,
            color_complexity: None,
        };
        assert_eq!(
            to_csv(&[row]),
            "id,view,iou,psnr_rgb,psnr_ycbcr,color_complexity\ndemo,3,1,99,99,\n"
        );
    }

    proptest! {
        #[test]
        fn iou_is_symmetric(a in proptest::collection::vec(any::<bool>(), 27),
                            b in proptest::collection::vec(any::<bool>(), 27)) {
            let dims = GridDims::cube(3).unwrap();
            let va = ShapeVolume::from_occupancy(dims, |c| a[dims.index(c[0], c[1], c[2])]);
            let vb = ShapeVolume::from_occupancy(dims, |c| b[dims.index(c[0], c[1], c[2])]);
            prop_assert_eq!(iou(&va, &vb).unwrap(), iou(&vb, &va).unwrap());
            // Adding a true positive never lowers IoU.
            if let Some(i) = (0..27).find(|&i| a[i] && !b[i]) {
                let mut vc = vb.clone();
                vc.set_occupied(i, true);
                prop_assert!(iou(&va, &vc).unwrap() >= iou(&va, &vb).unwrap());
            }
        }

        #[test]
        fn grays_map_to_neutral_chroma(g in 0.0f64..=1.0) {
            let [y, cb, cr] = rgb_to_ycbcr([g, g, g]);
            prop_assert!((y - g).abs() < 1e-12);
            prop_assert!((cb - 0.5).abs() < 1e-12 && (cr - 0.5).abs() < 1e-12);
        }
    }
}
