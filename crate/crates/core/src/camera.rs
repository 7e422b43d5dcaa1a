//! Pinhole camera, world-to-pixel projection and z-buffer visibility.
//!
//! Pixel coordinates are `(u, v) = (column, row)` with pixel centers on
//! integer coordinates and the origin at the center of the top-left pixel.
//! The camera frame is x right, y down, z forward.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Matrix3x4, Vector3};
use rayon::prelude::*;

use crate::volumes::{ShapeVolume, SurfaceIndex, VoxelFrame};
use crate::{Error, Result};

/// Points closer than this to the camera plane cannot be projected.
pub const EPS_DEPTH: f64 = 1e-6;

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub img_w: usize,
    pub img_h: usize,
}

impl Intrinsics {
    /// Square image with the principal point at the image center.
    pub fn centered(focal: f64, size: usize) -> Self {
        let c = (size as f64 - 1.0) / 2.0;
        Self {
            fx: focal,
            fy: focal,
            cx: c,
            cy: c,
            img_w: size,
            img_h: size,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    /// World-to-camera rotation.
    pub rotation: Matrix3<f64>,
    /// World-to-camera translation.
    pub translation: Vector3<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl Projection {
    pub fn uv(&self) -> [f64; 2] {
        [self.u, self.v]
    }
}

impl Camera {
    pub fn new(
        intrinsics: Intrinsics,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        let Intrinsics { fx, fy, .. } = intrinsics;
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::Parameter(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if intrinsics.img_w == 0 || intrinsics.img_h == 0 {
            return Err(Error::Parameter("image size must be nonzero".into()));
        }
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.amax() >= ORTHONORMAL_TOL || (rotation.determinant() - 1.0).abs() >= ORTHONORMAL_TOL
        {
            return Err(Error::Parameter(
                "rotation must be orthonormal with determinant 1".into(),
            ));
        }
        Ok(Self {
            intrinsics,
            rotation,
            translation,
        })
    }

    /// Camera at `eye` looking at `target`. `up` is the world direction that
    /// should appear upward in the image.
    pub fn look_at(
        intrinsics: Intrinsics,
        eye: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
    ) -> Result<Self> {
        let eye = Vector3::from(eye);
        let forward = (Vector3::from(target) - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Parameter("eye and target coincide".into()))?;
        let down = -Vector3::from(up);
        let right = down
            .cross(&forward)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Parameter("up vector is parallel to the view direction".into()))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[
            right.transpose(),
            down.transpose(),
            forward.transpose(),
        ]);
        let translation = -(rotation * eye);
        Self::new(intrinsics, rotation, translation)
    }

    pub fn img_w(&self) -> usize {
        self.intrinsics.img_w
    }

    pub fn img_h(&self) -> usize {
        self.intrinsics.img_h
    }

    pub fn intrinsic_matrix(&self) -> Matrix3<f64> {
        let Intrinsics { fx, fy, cx, cy, .. } = self.intrinsics;
        Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0)
    }

    /// The 3x4 matrix `K [R | T]`.
    pub fn projection_matrix(&self) -> Matrix3x4<f64> {
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        rt.set_column(3, &self.translation);
        self.intrinsic_matrix() * rt
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera(&self, p: [f64; 3]) -> Vector3<f64> {
        self.rotation * Vector3::from(p) + self.translation
    }

    pub fn project(&self, p: [f64; 3]) -> Result<Projection> {
        let pc = self.to_camera(p);
        if pc.z <= EPS_DEPTH {
            return Err(Error::BehindCamera {
                point: p,
                depth: pc.z,
            });
        }
        let Intrinsics { fx, fy, cx, cy, .. } = self.intrinsics;
        Ok(Projection {
            u: fx * pc.x / pc.z + cx,
            v: fy * pc.y / pc.z + cy,
            depth: pc.z,
        })
    }

    /// World-space ray through pixel coordinate `(u, v)`: origin and
    /// direction with unit camera-frame depth.
    pub fn pixel_ray(&self, u: f64, v: f64) -> (Vector3<f64>, Vector3<f64>) {
        let Intrinsics { fx, fy, cx, cy, .. } = self.intrinsics;
        let dir_cam = Vector3::new((u - cx) / fx, (v - cy) / fy, 1.0);
        (self.center(), self.rotation.transpose() * dir_cam)
    }

    pub fn clamp_uv(&self, [u, v]: [f64; 2]) -> [f64; 2] {
        [
            u.clamp(0.0, (self.img_w() - 1) as f64),
            v.clamp(0.0, (self.img_h() - 1) as f64),
        ]
    }

    /// Nearest pixel `(column, row)` of `uv`, `None` when it falls outside
    /// the image.
    pub fn nearest_pixel(&self, [u, v]: [f64; 2]) -> Option<(usize, usize)> {
        let (col, row) = (u.round(), v.round());
        (col >= 0.0 && row >= 0.0 && col < self.img_w() as f64 && row < self.img_h() as f64)
            .then_some((col as usize, row as usize))
    }

    pub fn to_text(&self) -> String {
        let Intrinsics {
            fx,
            fy,
            cx,
            cy,
            img_w,
            img_h,
        } = self.intrinsics;
        let r = &self.rotation;
        let t = &self.translation;
        let mut s = String::new();
        writeln!(s, "{fx:?} {fy:?} {cx:?} {cy:?}").unwrap();
        let rows: Vec<String> = (0..3)
            .flat_map(|i| (0..3).map(move |j| format!("{:?}", r[(i, j)])))
            .collect();
        writeln!(s, "{}", rows.join(" ")).unwrap();
        writeln!(s, "{:?} {:?} {:?}", t.x, t.y, t.z).unwrap();
        writeln!(s, "{img_w} {img_h}").unwrap();
        s
    }

    /// Parses the four-line camera record written by [`Camera::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        if lines.len() != 4 {
            return Err(Error::format(
                "camera",
                format!("expected 4 records, found {}", lines.len()),
            ));
        }
        let floats = |(line, l): (usize, &str), n: usize| -> Result<Vec<f64>> {
            let vals = l
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::parse(line, format!("{t}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != n {
                return Err(Error::parse(line, format!("expected {n} values, found {}", vals.len())));
            }
            Ok(vals)
        };
        let k = floats(lines[0], 4)?;
        let r = floats(lines[1], 9)?;
        let t = floats(lines[2], 3)?;
        let (line, size) = lines[3];
        let size = size
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| Error::parse(line, format!("{t}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if size.len() != 2 {
            return Err(Error::parse(line, "expected image width and height"));
        }
        Self::new(
            Intrinsics {
                fx: k[0],
                fy: k[1],
                cx: k[2],
                cy: k[3],
                img_w: size[0],
                img_h: size[1],
            },
            Matrix3::from_row_slice(&r),
            Vector3::new(t[0], t[1], t[2]),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_text(&text).map_err(|e| e.in_file(path))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::from(e).in_file(path))
    }
}

/// Projects through an arbitrary 3x4 matrix, dividing by the homogeneous
/// coordinate.
pub fn project_homogeneous(theta: &Matrix3x4<f64>, p: [f64; 3]) -> Result<[f64; 2]> {
    let h = theta * nalgebra::Vector4::new(p[0], p[1], p[2], 1.0);
    if h.z <= EPS_DEPTH {
        return Err(Error::BehindCamera { point: p, depth: h.z });
    }
    Ok([h.x / h.z, h.y / h.z])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Visibility {
    Visible,
    Occluded,
}

/// Visibility of every surface voxel of one view (in surface-index order)
/// plus the depth buffer it was derived from.
#[derive(Clone, Debug)]
pub struct VisibilityMap {
    pub flags: Vec<Visibility>,
    /// Projection of each surface voxel center.
    pub projections: Vec<Projection>,
    /// Row-major `img_w * img_h` buffer; `f64::INFINITY` where nothing landed.
    pub depth: Vec<f64>,
    pub img_w: usize,
    pub img_h: usize,
}

impl VisibilityMap {
    pub fn is_visible(&self, k: usize) -> bool {
        self.flags[k] == Visibility::Visible
    }

    pub fn visible_count(&self) -> usize {
        self.flags.iter().filter(|f| **f == Visibility::Visible).count()
    }

    pub fn buffer_depth(&self, col: usize, row: usize) -> f64 {
        self.depth[row * self.img_w + col]
    }
}

/// Depth tolerance of the visibility test, in voxel units.
pub const VISIBILITY_DEPTH_TOL: f64 = 0.5;

/// Footprint radius of a splatted voxel relative to its projected edge
/// length: half the face diagonal.
pub const SPLAT_RADIUS: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Two-pass z-buffer visibility of surface voxel centers.
///
/// Pass 1 splats every surface voxel into the depth buffer as an ellipse
/// around its projected center, with radius [`SPLAT_RADIUS`] times the
/// projected voxel size, keeping the minimum center depth per pixel. Pass 2
/// marks a voxel visible iff its depth is within half a voxel of the buffer
/// at its nearest pixel. Voxels projecting outside the image are occluded.
pub fn classify_visibility(
    cam: &Camera,
    shape: &ShapeVolume,
    surf: &SurfaceIndex,
    frame: &VoxelFrame,
) -> Result<VisibilityMap> {
    let dims = shape.dims();
    let projections = surf
        .iter()
        .map(|i| {
            let coords = dims.coords(i);
            cam.project(frame.center(coords))
                .map_err(|_| Error::VoxelBehindCamera { index: i, coords })
        })
        .collect::<Result<Vec<_>>>()?;

    let (w, h) = (cam.img_w(), cam.img_h());
    let Intrinsics { fx, fy, .. } = cam.intrinsics;
    let s = frame.voxel_size;

    // Pass 1, parallel over rows: each row takes the min over all splats.
    let mut depth = vec![f64::INFINITY; w * h];
    depth.par_chunks_mut(w).enumerate().for_each(|(row, line)| {
        let rowf = row as f64;
        for p in &projections {
            let ru = SPLAT_RADIUS * fx * s / p.depth;
            let rv = SPLAT_RADIUS * fy * s / p.depth;
            let dv = (rowf - p.v) / rv;
            if dv.abs() <= 1.0 {
                let c0 = (p.u - ru).ceil().max(0.0) as i64;
                let c1 = ((p.u + ru).floor() as i64).min(w as i64 - 1);
                for col in c0..=c1 {
                    let du = (col as f64 - p.u) / ru;
                    if du * du + dv * dv <= 1.0 {
                        let cell = &mut line[col as usize];
                        *cell = cell.min(p.depth);
                    }
                }
            }
            // The nearest pixel always receives the center, however small
            // the footprint.
            if rowf == p.v.round() {
                if let Some((col, _)) = cam.nearest_pixel(p.uv()) {
                    let cell = &mut line[col];
                    *cell = cell.min(p.depth);
                }
            }
        }
    });

    let tol = VISIBILITY_DEPTH_TOL * s;
    let flags = projections
        .iter()
        .map(|p| match cam.nearest_pixel(p.uv()) {
            Some((col, row)) if p.depth <= depth[row * w + col] + tol => Visibility::Visible,
            _ => Visibility::Occluded,
        })
        .collect();

    Ok(VisibilityMap {
        flags,
        projections,
        depth,
        img_w: w,
        img_h: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volumes::{extract_surface, GridDims};

    fn unit_camera() -> Camera {
        Camera::new(
            Intrinsics {
                fx: 1.0,
                fy: 1.0,
                cx: 0.0,
                cy: 0.0,
                img_w: 8,
                img_h: 8,
            },
            Matrix3::identity(),
            Vector3::zeros(),
        )
        .unwrap()
    }

    #[test]
    fn project_examples() {
        let cam = unit_camera();
        let p = cam.project([0.0, 0.0, 1.0]).unwrap();
        assert_eq!((p.u, p.v, p.depth), (0.0, 0.0, 1.0));
        let p = cam.project([1.0, 2.0, 2.0]).unwrap();
        assert_eq!((p.u, p.v, p.depth), (0.5, 1.0, 2.0));

        let cam = Camera::new(
            Intrinsics {
                fx: 100.0,
                fy: 100.0,
                cx: 64.0,
                cy: 64.0,
                img_w: 128,
                img_h: 128,
            },
            Matrix3::identity(),
            Vector3::new(0.0, 0.0, 3.0),
        )
        .unwrap();
        let p = cam.project([0.3, 0.0, 0.0]).unwrap();
        assert!((p.u - 74.0).abs() < 1e-12);
        assert_eq!(p.v, 64.0);
        assert_eq!(p.depth, 3.0);
    }

    #[test]
    fn point_behind_camera_fails() {
        let cam = unit_camera();
        assert!(matches!(
            cam.project([0.0, 0.0, -1.0]),
            Err(Error::BehindCamera { .. })
        ));
        assert!(cam.project([0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn rejects_non_rotation() {
        let intr = unit_camera().intrinsics;
        let scaled = Matrix3::identity() * 2.0;
        assert!(Camera::new(intr, scaled, Vector3::zeros()).is_err());
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Camera::new(intr, reflect, Vector3::zeros()).is_err());
        let mut bad = intr;
        bad.fx = 0.0;
        assert!(Camera::new(bad, Matrix3::identity(), Vector3::zeros()).is_err());
    }

    #[test]
    fn look_at_centers_target() {
        let intr = Intrinsics::centered(50.0, 65);
        let cam = Camera::look_at(intr, [10.0, -3.0, 4.0], [1.0, 2.0, 3.0], [0.0, -1.0, 0.0])
            .unwrap();
        let p = cam.project([1.0, 2.0, 3.0]).unwrap();
        assert!((p.u - 32.0).abs() < 1e-9 && (p.v - 32.0).abs() < 1e-9);
        // World "up" (-y) lands above the target in the image.
        let above = cam.project([1.0, 1.0, 3.0]).unwrap();
        assert!(above.v < 32.0);
    }

    #[test]
    fn text_round_trip() {
        let cam = Camera::look_at(
            Intrinsics::centered(120.0, 128),
            [3.0, -2.0, -40.0],
            [16.0, 16.0, 16.0],
            [0.0, -1.0, 0.0],
        )
        .unwrap();
        let back = Camera::from_text(&cam.to_text()).unwrap();
        assert_eq!(back, cam);
        assert!(Camera::from_text("1 1 0 0\n1 0 0 0 1 0 0 0 1\n0 0 0\n").is_err());
    }

    #[test]
    fn single_voxel_is_visible() {
        let dims = GridDims::cube(4).unwrap();
        let shape = ShapeVolume::from_occupancy(dims, |c| c == [2, 1, 3]);
        let surf = extract_surface(&shape);
        let cam = Camera::look_at(
            Intrinsics::centered(40.0, 32),
            [2.0, 2.0, -20.0],
            [2.0, 2.0, 2.0],
            [0.0, -1.0, 0.0],
        )
        .unwrap();
        let vis = classify_visibility(&cam, &shape, &surf, &VoxelFrame::default()).unwrap();
        assert_eq!(vis.flags, vec![Visibility::Visible]);
    }

    #[test]
    fn same_ray_nearer_wins() {
        let dims = GridDims::new(1, 1, 8).unwrap();
        let shape = ShapeVolume::from_occupancy(dims, |[_, _, z]| z == 1 || z == 6);
        let surf = extract_surface(&shape);
        let cam = Camera::look_at(
            Intrinsics::centered(4.0, 9),
            [0.5, 0.5, -5.0],
            [0.5, 0.5, 4.0],
            [0.0, -1.0, 0.0],
        )
        .unwrap();
        let vis = classify_visibility(&cam, &shape, &surf, &VoxelFrame::default()).unwrap();
        assert_eq!(vis.flags, vec![Visibility::Visible, Visibility::Occluded]);
    }

    #[test]
    fn voxel_behind_camera_is_named() {
        let dims = GridDims::cube(2).unwrap();
        let shape = ShapeVolume::from_occupancy(dims, |_| true);
        let surf = extract_surface(&shape);
        let cam = Camera::look_at(
            Intrinsics::centered(10.0, 16),
            [1.0, 1.0, 1.2],
            [1.0, 1.0, 10.0],
            [0.0, -1.0, 0.0],
        )
        .unwrap();
        let err = classify_visibility(&cam, &shape, &surf, &VoxelFrame::default()).unwrap_err();
        assert!(matches!(err, Error::VoxelBehindCamera { .. }));
    }
}
