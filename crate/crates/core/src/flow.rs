//! Ground-truth 3D-to-2D appearance flow and the flow loss.
//!
//! Visible surface voxels take their projected pixel coordinate. Occluded
//! ones look for the foreground pixel whose color matches theirs and that
//! lies closest to where they project, which makes the flow of a hidden
//! voxel follow its visible, mirror-symmetric counterpart.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::camera::{classify_visibility, Camera, VisibilityMap};
use crate::losses::norm::mean_norm_loss;
use crate::sampling::{ForegroundIndex, ViewImage};
use crate::volumes::{ColorVolume, FlowVolume, Rgb, ShapeVolume, SurfaceIndex, Uv, VoxelFrame};
use crate::{Error, Result};

pub const DEFAULT_DELTA_COLOR: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    /// Maximum RGB distance for a pixel to count as the same color.
    pub delta_color: f64,
    pub frame: VoxelFrame,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            delta_color: DEFAULT_DELTA_COLOR,
            frame: VoxelFrame::default(),
        }
    }
}

fn color_dist(a: Rgb, b: Rgb) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn color_key(c: Rgb) -> [u64; 3] {
    c.map(f64::to_bits)
}

/// Foreground pixels grouped by exact color.
struct ColorGroups {
    groups: Vec<(Rgb, Vec<(usize, usize)>)>,
}

impl ColorGroups {
    fn new(view: &ViewImage) -> Self {
        let mut lookup: HashMap<[u64; 3], usize> = HashMap::new();
        let mut groups: Vec<(Rgb, Vec<(usize, usize)>)> = Vec::new();
        for (col, row) in view.foreground_pixels() {
            let c = view.pixel(col, row);
            let g = *lookup.entry(color_key(c)).or_insert_with(|| {
                groups.push((c, Vec::new()));
                groups.len() - 1
            });
            groups[g].1.push((col, row));
        }
        Self { groups }
    }

    /// Row-major list of foreground pixels within `delta` of `c`.
    fn similar(&self, c: Rgb, delta: f64) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .groups
            .iter()
            .filter(|(g, _)| color_dist(*g, c) <= delta)
            .flat_map(|(_, px)| px.iter().copied())
            .collect();
        out.sort_unstable_by_key(|&(col, row)| (row, col));
        out
    }
}

fn nearest_in(pixels: &[(usize, usize)], [u, v]: Uv) -> (usize, usize) {
    let mut best = pixels[0];
    let mut best_d = f64::INFINITY;
    for &(col, row) in pixels {
        let d = (col as f64 - u).powi(2) + (row as f64 - v).powi(2);
        if d < best_d {
            best_d = d;
            best = (col, row);
        }
    }
    best
}

/// Target flow for surface voxels. See [`target_flow_with_visibility`].
pub fn target_flow(
    cam: &Camera,
    shape: &ShapeVolume,
    color: &ColorVolume,
    surf: &SurfaceIndex,
    view: &ViewImage,
    cfg: &FlowConfig,
) -> Result<FlowVolume> {
    target_flow_with_visibility(cam, shape, color, surf, view, cfg).map(|(f, _)| f)
}

/// Builds the ground-truth flow field and returns the visibility it used.
///
/// * Visible voxels: projected `(u, v)`, clamped to the image.
/// * Occluded voxels: among foreground pixels within `delta_color` of the
///   voxel color, the one closest to the clamped projection. When the pixel
///   under the projection itself qualifies the projection is kept as is.
///   With no similar pixel at all, the nearest foreground pixel is used.
/// * Non-surface voxels: `(0, 0)`.
pub fn target_flow_with_visibility(
    cam: &Camera,
    shape: &ShapeVolume,
    color: &ColorVolume,
    surf: &SurfaceIndex,
    view: &ViewImage,
    cfg: &FlowConfig,
) -> Result<(FlowVolume, VisibilityMap)> {
    shape.require_ground_truth("target flow shape")?;
    shape.dims().ensure_eq(&color.dims())?;
    view.check_size(cam.img_w(), cam.img_h())?;
    if surf.is_empty() {
        return Err(Error::EmptySurface);
    }
    let foreground = ForegroundIndex::new(view)?;
    let vis = classify_visibility(cam, shape, surf, &cfg.frame)?;
    let groups = ColorGroups::new(view);

    // Candidate pixel lists, one per distinct occluded voxel color.
    let mut candidates: HashMap<[u64; 3], Vec<(usize, usize)>> = HashMap::new();
    for (k, i) in surf.iter().enumerate() {
        if !vis.is_visible(k) {
            let c = color[i];
            candidates
                .entry(color_key(c))
                .or_insert_with(|| groups.similar(c, cfg.delta_color));
        }
    }

    let delta = cfg.delta_color;
    let flows: Vec<Uv> = surf
        .indices()
        .par_iter()
        .enumerate()
        .map(|(k, &i)| {
            let projected = cam.clamp_uv(vis.projections[k].uv());
            if vis.is_visible(k) {
                return projected;
            }
            let c = color[i];
            let (col, row) = view.nearest_pixel(projected);
            if view.is_foreground(col, row) && color_dist(view.pixel(col, row), c) <= delta {
                return projected;
            }
            let similar = &candidates[&color_key(c)];
            let (col, row) = if similar.is_empty() {
                foreground.nearest(projected)
            } else {
                nearest_in(similar, projected)
            };
            [col as f64, row as f64]
        })
        .collect();

    let mut out = FlowVolume::zeros(shape.dims());
    for (i, f) in surf.iter().zip(flows) {
        out[i] = f;
    }
    Ok((out, vis))
}

/// Mean Euclidean distance between target and predicted flow over surface
/// voxels, with its gradient with respect to the prediction.
pub fn flow_loss(
    target: &FlowVolume,
    pred: &FlowVolume,
    surf: &SurfaceIndex,
) -> Result<(f64, FlowVolume)> {
    mean_norm_loss(target, pred, surf)
}
