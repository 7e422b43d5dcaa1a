use nalgebra::Vector3;
use rayon::prelude::*;

use crate::camera::{Camera, Intrinsics};
use crate::sampling::ViewImage;
use crate::volumes::{ColorVolume, GridDims, Rgb, ShapeVolume, VoxelFrame};
use crate::{Error, Result};

pub const BACKGROUND: Rgb = [1.0, 1.0, 1.0];

/// Slab intersection of a ray with the grid box. Returns the entry and exit
/// parameters, entry clamped at 0.
fn intersect_box(o: &Vector3<f64>, d: &Vector3<f64>, lo: [f64; 3], hi: [f64; 3]) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for k in 0..3 {
        if d[k] == 0.0 {
            if o[k] < lo[k] || o[k] > hi[k] {
                return None;
            }
            continue;
        }
        let a = (lo[k] - o[k]) / d[k];
        let b = (hi[k] - o[k]) / d[k];
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t0 <= t1).then_some((t0, t1))
}

/// First occupied voxel along the ray, by grid traversal.
fn first_hit(
    dims: &GridDims,
    frame: &VoxelFrame,
    occupied: &[bool],
    o: &Vector3<f64>,
    d: &Vector3<f64>,
) -> Option<usize> {
    let s = frame.voxel_size;
    let n = [dims.w, dims.h, dims.d];
    let lo = frame.origin;
    let hi = std::array::from_fn(|k| lo[k] + n[k] as f64 * s);
    let (t0, t1) = intersect_box(o, d, lo, hi)?;
    let p = o + d * t0;
    let mut cell = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for k in 0..3 {
        let rel = (p[k] - lo[k]) / s;
        cell[k] = (rel.floor() as i64).clamp(0, n[k] as i64 - 1);
        if d[k] > 0.0 {
            step[k] = 1;
            t_max[k] = t0 + ((cell[k] + 1) as f64 * s + lo[k] - p[k]) / d[k];
            t_delta[k] = s / d[k];
        } else if d[k] < 0.0 {
            step[k] = -1;
            t_max[k] = t0 + (cell[k] as f64 * s + lo[k] - p[k]) / d[k];
            t_delta[k] = -s / d[k];
        }
    }
    loop {
        let i = dims.index(cell[0] as usize, cell[1] as usize, cell[2] as usize);
        if occupied[i] {
            return Some(i);
        }
        let k = (0..3)
            .min_by(|&a, &b| t_max[a].partial_cmp(&t_max[b]).unwrap())
            .unwrap();
        if t_max[k] > t1 {
            return None;
        }
        cell[k] += step[k];
        if cell[k] < 0 || cell[k] >= n[k] as i64 {
            return None;
        }
        t_max[k] += t_delta[k];
    }
}

/// Ray casts the voxel scene through every pixel center. Hit pixels take
/// the color of the first occupied voxel; the rest are white background.
pub fn render_view(
    cam: &Camera,
    shape: &ShapeVolume,
    color: &ColorVolume,
    frame: &VoxelFrame,
) -> Result<ViewImage> {
    let dims = shape.dims();
    dims.ensure_eq(&color.dims())?;
    let occupied: Vec<bool> = (0..dims.len()).map(|i| shape.is_occupied(i)).collect();

    let c = cam.center();
    let rel = std::array::from_fn::<f64, 3, _>(|k| (c[k] - frame.origin[k]) / frame.voxel_size);
    if let Some(i) = dims.checked_index(rel[0].floor() as i64, rel[1].floor() as i64, rel[2].floor() as i64) {
        if occupied[i] {
            return Err(Error::CameraInsideVolume {
                coords: dims.coords(i),
            });
        }
    }

    let (w, h) = (cam.img_w(), cam.img_h());
    let pixels: Vec<(Rgb, bool)> = (0..w * h)
        .into_par_iter()
        .map(|p| {
            let (col, row) = (p % w, p / w);
            let (o, d) = cam.pixel_ray(col as f64, row as f64);
            match first_hit(&dims, frame, &occupied, &o, &d) {
                Some(i) => (color[i], true),
                None => (BACKGROUND, false),
            }
        })
        .collect();
    let (rgb, mask) = pixels.into_iter().unzip();
    ViewImage::new(w, h, rgb, mask)
}

/// Focal length that fits the grid's bounding sphere into `fill` of the
/// image width when seen from `radius` away.
pub fn framing_focal(dims: &GridDims, frame: &VoxelFrame, radius: f64, img_size: usize, fill: f64) -> Result<f64> {
    let rho = 0.5 * frame.voxel_size * ((dims.w.pow(2) + dims.h.pow(2) + dims.d.pow(2)) as f64).sqrt();
    if radius <= rho {
        return Err(Error::Parameter(format!(
            "camera radius {radius} must exceed the grid's bounding radius {rho}"
        )));
    }
    Ok(0.5 * fill * img_size as f64 * (radius * radius - rho * rho).sqrt() / rho)
}

/// `n` cameras evenly spaced in azimuth around the grid center, starting on
/// the -z side, all looking at the center. Elevation is in degrees.
pub fn make_azimuth_cameras(
    n: usize,
    elevation_deg: f64,
    radius: f64,
    dims: &GridDims,
    frame: &VoxelFrame,
    intrinsics: Intrinsics,
) -> Result<Vec<Camera>> {
    if n == 0 {
        return Err(Error::Parameter("camera count must be at least 1".into()));
    }
    if elevation_deg.abs() >= 90.0 {
        return Err(Error::Parameter(format!(
            "elevation must lie strictly between -90 and 90 degrees, got {elevation_deg}"
        )));
    }
    let center = frame.grid_center(dims);
    let el = elevation_deg.to_radians();
    (0..n)
        .map(|k| {
            let az = (k as f64 * 360.0 / n as f64).to_radians();
            let eye = [
                center[0] + radius * az.sin() * el.cos(),
                center[1] - radius * el.sin(),
                center[2] - radius * az.cos() * el.cos(),
            ];
            Camera::look_at(intrinsics, eye, center, [0.0, -1.0, 0.0])
        })
        .collect()
}
