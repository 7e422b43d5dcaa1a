use super::rgb_to_ycbcr;
use crate::volumes::{extract_surface, ColorVolume, GridDims, Rgb, ShapeVolume};
use crate::{Error, Result};

/// Value reported when the paired colors match exactly.
pub const PSNR_CAP: f64 = 99.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColorSpace {
    Rgb,
    YCbCr,
}

impl ColorSpace {
    fn convert(self, c: Rgb) -> [f64; 3] {
        match self {
            Self::Rgb => c,
            Self::YCbCr => rgb_to_ycbcr(c),
        }
    }
}

/// Neumaier summation, so long runs of equal errors average exactly.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Nearest ground-truth surface voxel by expanding Chebyshev shells. Ties
/// go to the smallest linear index.
fn nearest_in_shells(dims: &GridDims, is_target: &[bool], from: [usize; 3]) -> Option<usize> {
    let extent = dims.w.max(dims.h).max(dims.d) as i64;
    let (fx, fy, fz) = (from[0] as i64, from[1] as i64, from[2] as i64);
    let mut best: Option<(i64, usize)> = None;
    for r in 0..=extent {
        if let Some((d2, _)) = best {
            // Everything in shell r is at least r away.
            if r * r > d2 {
                break;
            }
        }
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx.abs() != r && dy.abs() != r && dz.abs() != r {
                        continue;
                    }
                    let Some(j) = dims.checked_index(fx + dx, fy + dy, fz + dz) else {
                        continue;
                    };
                    if !is_target[j] {
                        continue;
                    }
                    let d2 = dx * dx + dy * dy + dz * dz;
                    match best {
                        Some((bd, bj)) if (bd, bj) <= (d2, j) => {}
                        _ => best = Some((d2, j)),
                    }
                }
            }
        }
    }
    best.map(|(_, j)| j)
}

/// For each predicted surface voxel (in increasing index order), the ground
/// truth surface voxel it is paired with. A voxel on both surfaces pairs
/// with itself.
pub fn pair_surfaces(gt_shape: &ShapeVolume, pred_shape: &ShapeVolume) -> Result<Vec<(usize, usize)>> {
    gt_shape.dims().ensure_eq(&pred_shape.dims())?;
    let dims = gt_shape.dims();
    let gt_surf = extract_surface(gt_shape);
    let pred_surf = extract_surface(pred_shape);
    if gt_surf.is_empty() || pred_surf.is_empty() {
        return Err(Error::EmptySurface);
    }
    let mut is_gt = vec![false; dims.len()];
    for i in gt_surf.iter() {
        is_gt[i] = true;
    }
    use rayon::prelude::*;
    Ok(pred_surf
        .indices()
        .par_iter()
        .map(|&p| {
            if is_gt[p] {
                (p, p)
            } else {
                (p, nearest_in_shells(&dims, &is_gt, dims.coords(p)).unwrap())
            }
        })
        .collect())
}

/// PSNR (peak 1.0) of predicted surface colors against their paired ground
/// truth surface colors. Pairing is directional, from prediction to ground
/// truth, so swapping the arguments can change the result.
pub fn surface_psnr(
    gt_shape: &ShapeVolume,
    gt_color: &ColorVolume,
    pred_shape: &ShapeVolume,
    pred_color: &ColorVolume,
    space: ColorSpace,
) -> Result<f64> {
    gt_shape.dims().ensure_eq(&gt_color.dims())?;
    pred_shape.dims().ensure_eq(&pred_color.dims())?;
    let pairs = pair_surfaces(gt_shape, pred_shape)?;
    let mut sse = CompensatedSum::default();
    for &(p, g) in &pairs {
        let a = space.convert(pred_color[p]);
        let b = space.convert(gt_color[g]);
        for k in 0..3 {
            sse.add((a[k] - b[k]).powi(2));
        }
    }
    let mse = sse.value() / (3 * pairs.len()) as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((-10.0 * mse.log10()).min(PSNR_CAP))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slab(dims: GridDims, z: usize) -> ShapeVolume {
        ShapeVolume::from_occupancy(dims, |c| c[2] == z && c[0] >= 1 && c[0] < 5)
    }

    #[test]
    fn identical_inputs_hit_the_cap() {
        let dims = GridDims::new(6, 3, 4).unwrap();
        let shape = slab(dims, 1);
        let color = ColorVolume::from_fn(dims, |c| [c[0] as f64 / 6.0, 0.3, 0.9]);
        let p = surface_psnr(&shape, &color, &shape, &color, ColorSpace::Rgb).unwrap();
        assert_eq!(p, PSNR_CAP);
    }

    #[test]
    fn uniform_tenth_error_is_twenty_db() {
        let dims = GridDims::new(6, 3, 4).unwrap();
        let shape = slab(dims, 1);
        let gt = ColorVolume::filled(dims, [0.0; 3]);
        let pred = ColorVolume::filled(dims, [0.1; 3]);
        let p = surface_psnr(&shape, &gt, &shape, &pred, ColorSpace::Rgb).unwrap();
        assert_eq!(p, 20.0);
        let big = GridDims::new(40, 30, 20).unwrap();
        let solid = ShapeVolume::from_occupancy(big, |_| true);
        let p = surface_psnr(
            &solid,
            &ColorVolume::filled(big, [0.0; 3]),
            &solid,
            &ColorVolume::filled(big, [0.1; 3]),
            ColorSpace::Rgb,
        )
        .unwrap();
        assert_eq!(p, 20.0);
    }

    #[test]
    fn shifted_slab_pairs_with_neighbor() {
        let dims = GridDims::new(6, 3, 4).unwrap();
        let gt = slab(dims, 1);
        let pred = slab(dims, 2);
        let pairs = pair_surfaces(&gt, &pred).unwrap();
        for (p, g) in pairs {
            let (cp, cg) = (dims.coords(p), dims.coords(g));
            assert_eq!((cp[0], cp[1], cp[2] - 1), (cg[0], cg[1], cg[2]));
        }
    }

    #[test]
    fn empty_surface_is_an_error() {
        let dims = GridDims::cube(3).unwrap();
        let empty = ShapeVolume::empty(dims);
        let full = ShapeVolume::from_occupancy(dims, |_| true);
        let c = ColorVolume::zeros(dims);
        assert!(surface_psnr(&empty, &c, &full, &c, ColorSpace::Rgb).is_err());
        assert!(surface_psnr(&full, &c, &empty, &c, ColorSpace::YCbCr).is_err());
    }
}
