//! 2D color samplers, blending and test-time weight recalculation.

use rayon::prelude::*;

use crate::volumes::{ColorVolume, FlowVolume, Rgb, SurfaceIndex, Uv, WeightVolume};
use crate::{Error, Result};

/// An RGB view with a foreground mask. Background pixels keep whatever rgb
/// they were stored with; only the mask decides what is foreground.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewImage {
    width: usize,
    height: usize,
    rgb: Vec<Rgb>,
    mask: Vec<bool>,
}

impl ViewImage {
    pub fn new(width: usize, height: usize, rgb: Vec<Rgb>, mask: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter("view must have nonzero size".into()));
        }
        for len in [rgb.len(), mask.len()] {
            if len != width * height {
                return Err(Error::LengthMismatch {
                    expected: width * height,
                    found: len,
                });
            }
        }
        Ok(Self {
            width,
            height,
            rgb,
            mask,
        })
    }

    pub fn filled(width: usize, height: usize, color: Rgb, foreground: bool) -> Result<Self> {
        let n = width * height;
        Self::new(width, height, vec![color; n], vec![foreground; n])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn rgb(&self) -> &[Rgb] {
        &self.rgb
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn pixel(&self, col: usize, row: usize) -> Rgb {
        self.rgb[row * self.width + col]
    }

    #[inline]
    pub fn is_foreground(&self, col: usize, row: usize) -> bool {
        self.mask[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, color: Rgb, foreground: bool) {
        let i = row * self.width + col;
        self.rgb[i] = color;
        self.mask[i] = foreground;
    }

    pub fn check_size(&self, width: usize, height: usize) -> Result<()> {
        if self.width == width && self.height == height {
            Ok(())
        } else {
            Err(Error::ImageSize {
                expected_w: width,
                expected_h: height,
                found_w: self.width,
                found_h: self.height,
            })
        }
    }

    /// Foreground pixels as `(column, row)` in row-major order.
    pub fn foreground_pixels(&self) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|row| (0..self.width).map(move |col| (col, row)))
            .filter(|&(col, row)| self.is_foreground(col, row))
            .collect()
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn clamp_uv(&self, [u, v]: Uv) -> Uv {
        [
            u.clamp(0.0, (self.width - 1) as f64),
            v.clamp(0.0, (self.height - 1) as f64),
        ]
    }

    /// Rounded-nearest pixel of a clamped coordinate.
    pub fn nearest_pixel(&self, uv: Uv) -> (usize, usize) {
        let [u, v] = self.clamp_uv(uv);
        (u.round() as usize, v.round() as usize)
    }
}

/// Bilinear interpolation between the four pixel centers around `uv`, after
/// clamping `uv` to the image.
pub fn bilinear_sample(view: &ViewImage, uv: Uv) -> Rgb {
    let [u, v] = view.clamp_uv(uv);
    let c0 = (u.floor() as usize).min(view.width - 1);
    let r0 = (v.floor() as usize).min(view.height - 1);
    let c1 = (c0 + 1).min(view.width - 1);
    let r1 = (r0 + 1).min(view.height - 1);
    let fu = u - c0 as f64;
    let fv = v - r0 as f64;
    let (p00, p10, p01, p11) = (
        view.pixel(c0, r0),
        view.pixel(c1, r0),
        view.pixel(c0, r1),
        view.pixel(c1, r1),
    );
    std::array::from_fn(|k| {
        let top = p00[k] + (p10[k] - p00[k]) * fu;
        let bottom = p01[k] + (p11[k] - p01[k]) * fu;
        top + (bottom - top) * fv
    })
}

/// Foreground pixels of a view, prepared for repeated nearest queries.
#[derive(Clone, Debug)]
pub struct ForegroundIndex {
    /// Row-major `(column, row)` list; scanning in this order and keeping
    /// strictly smaller distances breaks ties by smallest row, then column.
    pixels: Vec<(usize, usize)>,
}

impl ForegroundIndex {
    pub fn new(view: &ViewImage) -> Result<Self> {
        let pixels = view.foreground_pixels();
        if pixels.is_empty() {
            return Err(Error::EmptyForeground);
        }
        Ok(Self { pixels })
    }

    pub fn nearest(&self, [u, v]: Uv) -> (usize, usize) {
        let mut best = self.pixels[0];
        let mut best_d = f64::INFINITY;
        for &(col, row) in &self.pixels {
            let du = col as f64 - u;
            let dv = row as f64 - v;
            let d = du * du + dv * dv;
            if d < best_d {
                best_d = d;
                best = (col, row);
            }
        }
        best
    }
}

/// Bilinear sample when the rounded pixel of `uv` is foreground, otherwise
/// the exact color of the nearest foreground pixel. Returns the color and
/// the coordinate actually sampled.
pub fn nearest_foreground_sample(view: &ViewImage, uv: Uv) -> Result<(Rgb, Uv)> {
    let index = ForegroundIndex::new(view)?;
    Ok(nearest_foreground_with(view, &index, uv))
}

fn nearest_foreground_with(view: &ViewImage, index: &ForegroundIndex, uv: Uv) -> (Rgb, Uv) {
    let (col, row) = view.nearest_pixel(uv);
    if view.is_foreground(col, row) {
        return (bilinear_sample(view, uv), uv);
    }
    let (col, row) = index.nearest(uv);
    (view.pixel(col, row), [col as f64, row as f64])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMode {
    Bilinear,
    NearestForeground,
}

/// Samples the view at each surface voxel's flow coordinate. Off-surface
/// voxels are left at 0.
pub fn sample_colors(
    view: &ViewImage,
    flow: &FlowVolume,
    surf: &SurfaceIndex,
    mode: SampleMode,
) -> Result<ColorVolume> {
    let index = match mode {
        SampleMode::Bilinear => None,
        SampleMode::NearestForeground => Some(ForegroundIndex::new(view)?),
    };
    let samples: Vec<Rgb> = surf
        .indices()
        .par_iter()
        .map(|&i| match &index {
            None => bilinear_sample(view, flow[i]),
            Some(index) => nearest_foreground_with(view, index, flow[i]).0,
        })
        .collect();
    let mut out = ColorVolume::zeros(flow.dims());
    for (i, c) in surf.iter().zip(samples) {
        out[i] = c;
    }
    Ok(out)
}

/// `w * sampled + (1 - w) * regressed` on surface voxels, 0 elsewhere.
pub fn blend(
    sampled: &ColorVolume,
    regressed: &ColorVolume,
    weights: &WeightVolume,
    surf: &SurfaceIndex,
) -> Result<ColorVolume> {
    let dims = sampled.dims();
    dims.ensure_eq(&regressed.dims())?;
    dims.ensure_eq(&weights.dims())?;
    let mut out = ColorVolume::zeros(dims);
    for i in surf.iter() {
        out[i] = blend_voxel(sampled[i], regressed[i], weights[i]);
    }
    Ok(out)
}

#[inline]
pub fn blend_voxel(sampled: Rgb, regressed: Rgb, w: f64) -> Rgb {
    std::array::from_fn(|k| w * sampled[k] + (1.0 - w) * regressed[k])
}

/// Applies `w / alpha` below `alpha` and saturates to 1 above it.
#[inline]
pub fn recalc_weight(w: f64, alpha: f64) -> f64 {
    if w <= alpha {
        w / alpha
    } else {
        1.0
    }
}

pub fn recalc_weights(weights: &WeightVolume, alpha: f64) -> Result<WeightVolume> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let data = weights
        .as_slice()
        .iter()
        .map(|&w| recalc_weight(w, alpha))
        .collect();
    WeightVolume::from_vec(weights.dims(), data)
}

pub const DEFAULT_ALPHA: f64 = 0.2;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volumes::GridDims;
    use proptest::prelude::*;

    fn gradient_view() -> ViewImage {
        let (w, h) = (5, 4);
        let rgb = (0..w * h)
            .map(|i| {
                let (c, r) = (i % w, i / w);
                [c as f64 / 4.0, r as f64 / 3.0, ((c * 7 + r * 3) % 5) as f64 / 4.0]
            })
            .collect();
        ViewImage::new(w, h, rgb, vec![true; w * h]).unwrap()
    }

    #[test]
    fn integer_coordinates_hit_pixels() {
        let view = gradient_view();
        for r in 0..view.height() {
            for c in 0..view.width() {
                assert_eq!(bilinear_sample(&view, [c as f64, r as f64]), view.pixel(c, r));
            }
        }
    }

    #[test]
    fn constant_image_samples_constant() {
        let view = ViewImage::filled(6, 3, [0.2, 0.4, 0.6], true).unwrap();
        for uv in [[0.3, 1.7], [-4.0, 9.0], [5.0, 2.0], [2.25, 0.5]] {
            let c = bilinear_sample(&view, uv);
            for k in 0..3 {
                assert!((c[k] - [0.2, 0.4, 0.6][k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn midpoint_of_black_and_white() {
        let view =
            ViewImage::new(2, 1, vec![[0.0; 3], [1.0; 3]], vec![true, true]).unwrap();
        assert_eq!(bilinear_sample(&view, [0.5, 0.0]), [0.5; 3]);
    }

    #[test]
    fn nearest_foreground_cases() {
        let mut view = ViewImage::filled(7, 7, [1.0; 3], false).unwrap();
        view.set(3, 3, [0.1, 0.2, 0.3], true);
        let (c, uv) = nearest_foreground_sample(&view, [0.2, 6.0]).unwrap();
        assert_eq!((c, uv), ([0.1, 0.2, 0.3], [3.0, 3.0]));
        // On the foreground pixel itself it is plain bilinear.
        let (c, uv) = nearest_foreground_sample(&view, [3.2, 2.9]).unwrap();
        assert_eq!(c, bilinear_sample(&view, [3.2, 2.9]));
        assert_eq!(uv, [3.2, 2.9]);
    }

    #[test]
    fn equidistant_tie_prefers_smaller_row() {
        let mut view = ViewImage::filled(5, 5, [1.0; 3], false).unwrap();
        view.set(2, 0, [0.0, 0.0, 1.0], true);
        view.set(2, 4, [0.0, 1.0, 0.0], true);
        view.set(0, 2, [1.0, 0.0, 0.0], true);
        view.set(4, 2, [0.5, 0.0, 0.0], true);
        // (2, 2) is 2 px from all four.
        let (c, uv) = nearest_foreground_sample(&view, [2.0, 2.0]).unwrap();
        assert_eq!(uv, [2.0, 0.0]);
        assert_eq!(c, [0.0, 0.0, 1.0]);
        // Same row: the smaller column wins.
        let mut view = ViewImage::filled(5, 1, [1.0; 3], false).unwrap();
        view.set(0, 0, [0.3; 3], true);
        view.set(4, 0, [0.6; 3], true);
        assert_eq!(nearest_foreground_sample(&view, [2.0, 0.0]).unwrap().1, [0.0, 0.0]);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let view = ViewImage::filled(3, 3, [1.0; 3], false).unwrap();
        assert!(matches!(
            nearest_foreground_sample(&view, [1.0, 1.0]),
            Err(Error::EmptyForeground)
        ));
    }

    #[test]
    fn blend_examples() {
        let dims = GridDims::new(1, 1, 1).unwrap();
        let surf = SurfaceIndex::from_sorted(vec![0]).unwrap();
        let s = ColorVolume::filled(dims, [1.0, 0.0, 0.0]);
        let r = ColorVolume::filled(dims, [0.0, 0.0, 1.0]);
        let out = blend(&s, &r, &WeightVolume::filled(dims, 0.5), &surf).unwrap();
        assert_eq!(out[0], [0.5, 0.0, 0.5]);
        assert_eq!(blend(&s, &r, &WeightVolume::filled(dims, 1.0), &surf).unwrap(), s);
        assert_eq!(blend(&s, &r, &WeightVolume::filled(dims, 0.0), &surf).unwrap(), r);
    }

    #[test]
    fn recalc_examples() {
        let dims = GridDims::new(3, 1, 1).unwrap();
        let w = WeightVolume::from_vec(dims, vec![0.1, 0.3, 0.2]).unwrap();
        assert_eq!(recalc_weights(&w, 1.0).unwrap(), w);
        let out = recalc_weights(&w, 0.2).unwrap();
        assert_eq!(out.as_slice(), &[0.5, 1.0, 1.0]);
        assert!(recalc_weights(&w, 0.0).is_err());
        assert!(recalc_weights(&w, 1.1).is_err());
    }

    proptest! {
        #[test]
        fn blend_stays_in_channel_hull(s in proptest::array::uniform3(0.0f64..1.0),
                                       r in proptest::array::uniform3(0.0f64..1.0),
                                       w in 0.0f64..=1.0) {
            let b = blend_voxel(s, r, w);
            for k in 0..3 {
                prop_assert!(b[k] >= s[k].min(r[k]) - 1e-15);
                prop_assert!(b[k] <= s[k].max(r[k]) + 1e-15);
            }
        }

        #[test]
        fn recalc_is_monotone(w1 in 0.0f64..=1.0, w2 in 0.0f64..=1.0,
                              a1 in 0.01f64..=1.0, a2 in 0.01f64..=1.0) {
            let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
            prop_assert!(recalc_weight(lo, a1) <= recalc_weight(hi, a1));
            let (alo, ahi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            prop_assert!(recalc_weight(w1, alo) >= recalc_weight(w1, ahi));
            prop_assert!(recalc_weight(w1, a1) >= w1);
            prop_assert!((0.0..=1.0).contains(&recalc_weight(w1, a1)));
        }

        #[test]
        fn bilinear_is_continuous(seed in any::<u64>(), u in 0.0f64..9.0, v in 0.0f64..6.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rgb = (0..60).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
            let view = ViewImage::new(10, 6, rgb, vec![true; 60]).unwrap();
            let a = bilinear_sample(&view, [u, v]);
            let b = bilinear_sample(&view, [u + 1e-9, v - 1e-9]);
            for k in 0..3 {
                prop_assert!((a[k] - b[k]).abs() < 1e-8);
            }
        }

        #[test]
        fn snapped_colors_come_from_foreground(seed in any::<u64>(), u in -3.0f64..12.0, v in -3.0f64..9.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rgb: Vec<Rgb> = (0..60).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
            let mut mask: Vec<bool> = (0..60).map(|_| rng.gen_bool(0.2)).collect();
            mask[17] = true;
            let view = ViewImage::new(10, 6, rgb.clone(), mask.clone()).unwrap();
            let (c, snapped) = nearest_foreground_sample(&view, [u, v]).unwrap();
            if snapped != [u, v] {
                let col = snapped[0] as usize;
                let row = snapped[1] as usize;
                prop_assert!(mask[row * 10 + col]);
                prop_assert_eq!(c, rgb[row * 10 + col]);
            }
        }
    }
}
