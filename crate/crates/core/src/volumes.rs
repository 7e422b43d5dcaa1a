//! Aligned voxel grids and surface extraction.
//!
//! All volumes share one layout: dense, row-major, with linear index
//! `(z * H + y) * W + x` and channels interleaved per voxel. Shape, color,
//! flow and weight volumes of one scene are aligned, so a linear index
//! addresses the same voxel in each of them.

use std::fmt;

use crate::{Error, Result};

pub type Rgb = [f64; 3];
pub type Uv = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridDims {
    pub w: usize,
    pub h: usize,
    pub d: usize,
}

impl GridDims {
    pub fn new(w: usize, h: usize, d: usize) -> Result<Self> {
        if w == 0 || h == 0 || d == 0 {
            return Err(Error::InvalidDims { w, h, d });
        }
        Ok(Self { w, h, d })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn len(&self) -> usize {
        self.w * self.h * self.d
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.w && y < self.h && z < self.d);
        (z * self.h + y) * self.w + x
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        debug_assert!(i < self.len());
        let x = i % self.w;
        let y = (i / self.w) % self.h;
        let z = i / (self.w * self.h);
        [x, y, z]
    }

    /// Linear index of a signed coordinate, `None` outside the grid.
    #[inline]
    pub fn checked_index(&self, x: i64, y: i64, z: i64) -> Option<usize> {
        if x < 0 || y < 0 || z < 0 {
            return None;
        }
        let (x, y, z) = (x as usize, y as usize, z as usize);
        (x < self.w && y < self.h && z < self.d).then(|| self.index(x, y, z))
    }

    pub fn ensure_eq(&self, other: &GridDims) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DimMismatch {
                expected: *self,
                found: *other,
            })
        }
    }
}

impl fmt::Display for GridDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.w, self.h, self.d)
    }
}

/// Placement of the grid in world space. Voxel `(x, y, z)` has its center at
/// `origin + (x + 0.5, y + 0.5, z + 0.5) * voxel_size`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoxelFrame {
    pub origin: [f64; 3],
    pub voxel_size: f64,
}

impl Default for VoxelFrame {
    fn default() -> Self {
        Self {
            origin: [0.0; 3],
            voxel_size: 1.0,
        }
    }
}

impl VoxelFrame {
    pub fn new(origin: [f64; 3], voxel_size: f64) -> Result<Self> {
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(Error::Parameter(format!(
                "voxel size must be positive, got {voxel_size}"
            )));
        }
        Ok(Self { origin, voxel_size })
    }

    pub fn center(&self, [x, y, z]: [usize; 3]) -> [f64; 3] {
        let s = self.voxel_size;
        [
            self.origin[0] + (x as f64 + 0.5) * s,
            self.origin[1] + (y as f64 + 0.5) * s,
            self.origin[2] + (z as f64 + 0.5) * s,
        ]
    }

    /// World-space center of the whole grid.
    pub fn grid_center(&self, dims: &GridDims) -> [f64; 3] {
        let s = self.voxel_size;
        [
            self.origin[0] + 0.5 * dims.w as f64 * s,
            self.origin[1] + 0.5 * dims.h as f64 * s,
            self.origin[2] + 0.5 * dims.d as f64 * s,
        ]
    }
}

/// Per-voxel element type with a fixed number of `f64` channels.
pub trait Voxel: Copy + Default + Send + Sync + 'static {
    const CHANNELS: usize;
    fn channel(&self, c: usize) -> f64;
    fn from_channels(values: &[f64]) -> Self;
}

impl Voxel for f64 {
    const CHANNELS: usize = 1;
    fn channel(&self, _c: usize) -> f64 {
        *self
    }
    fn from_channels(values: &[f64]) -> Self {
        values[0]
    }
}

impl<const N: usize> Voxel for [f64; N]
where
    [f64; N]: Default,
{
    const CHANNELS: usize = N;
    fn channel(&self, c: usize) -> f64 {
        self[c]
    }
    fn from_channels(values: &[f64]) -> Self {
        let mut out = [0.0; N];
        out.copy_from_slice(&values[..N]);
        out
    }
}

/// Dense voxel grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    dims: GridDims,
    data: Vec<T>,
}

pub type ColorVolume = Grid<Rgb>;
pub type FlowVolume = Grid<Uv>;
pub type WeightVolume = Grid<f64>;
pub type JointVolume = Grid<Rgb>;

impl<T: Voxel> Grid<T> {
    pub fn filled(dims: GridDims, value: T) -> Self {
        Self {
            dims,
            data: vec![value; dims.len()],
        }
    }

    pub fn zeros(dims: GridDims) -> Self {
        Self::filled(dims, T::default())
    }

    pub fn from_vec(dims: GridDims, data: Vec<T>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::LengthMismatch {
                expected: dims.len(),
                found: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: GridDims, mut f: impl FnMut([usize; 3]) -> T) -> Self {
        let data = (0..dims.len()).map(|i| f(dims.coords(i))).collect();
        Self { dims, data }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.dims.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: T) {
        let i = self.dims.index(x, y, z);
        self.data[i] = value;
    }

    /// Channel-interleaved copy of the payload, in linear-index order.
    pub fn to_channels(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len() * T::CHANNELS);
        for v in &self.data {
            for c in 0..T::CHANNELS {
                out.push(v.channel(c));
            }
        }
        out
    }

    pub fn from_channels(dims: GridDims, values: &[f64]) -> Result<Self> {
        if values.len() != dims.len() * T::CHANNELS {
            return Err(Error::LengthMismatch {
                expected: dims.len() * T::CHANNELS,
                found: values.len(),
            });
        }
        let data = values
            .chunks_exact(T::CHANNELS)
            .map(T::from_channels)
            .collect();
        Ok(Self { dims, data })
    }

    /// Fails unless every channel of every voxel lies in `[lo, hi]`.
    pub fn check_range(&self, lo: f64, hi: f64, what: &str) -> Result<()> {
        for (i, v) in self.data.iter().enumerate() {
            for c in 0..T::CHANNELS {
                let x = v.channel(c);
                if !(lo..=hi).contains(&x) {
                    return Err(Error::InvalidVolume(format!(
                        "{what} voxel {i} channel {c} = {x} outside [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl<T> std::ops::Index<usize> for Grid<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T> std::ops::IndexMut<usize> for Grid<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    /// Binary occupancy, every value exactly 0 or 1.
    GroundTruth,
    /// Occupancy probabilities in `[0, 1]`.
    Prediction,
}

/// One-channel occupancy volume.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeVolume {
    grid: Grid<f64>,
    kind: ShapeKind,
}

impl ShapeVolume {
    pub fn new(dims: GridDims, values: Vec<f64>, kind: ShapeKind) -> Result<Self> {
        let grid = Grid::from_vec(dims, values)?;
        Self::from_grid(grid, kind)
    }

    pub fn from_grid(grid: Grid<f64>, kind: ShapeKind) -> Result<Self> {
        match kind {
            ShapeKind::GroundTruth => {
                if let Some((i, v)) = grid
                    .as_slice()
                    .iter()
                    .enumerate()
                    .find(|(_, &v)| v != 0.0 && v != 1.0)
                {
                    return Err(Error::InvalidVolume(format!(
                        "ground-truth occupancy must be 0 or 1, voxel {i} is {v}"
                    )));
                }
            }
            ShapeKind::Prediction => grid.check_range(0.0, 1.0, "predicted occupancy")?,
        }
        Ok(Self { grid, kind })
    }

    pub fn ground_truth(dims: GridDims, values: Vec<f64>) -> Result<Self> {
        Self::new(dims, values, ShapeKind::GroundTruth)
    }

    pub fn prediction(dims: GridDims, values: Vec<f64>) -> Result<Self> {
        Self::new(dims, values, ShapeKind::Prediction)
    }

    pub fn empty(dims: GridDims) -> Self {
        Self {
            grid: Grid::zeros(dims),
            kind: ShapeKind::GroundTruth,
        }
    }

    pub fn from_occupancy(dims: GridDims, occupied: impl Fn([usize; 3]) -> bool) -> Self {
        let grid = Grid::from_fn(dims, |c| if occupied(c) { 1.0 } else { 0.0 });
        Self {
            grid,
            kind: ShapeKind::GroundTruth,
        }
    }

    pub fn dims(&self) -> GridDims {
        self.grid.dims()
    }

    pub fn kind(&self) -> ShapeKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        self.grid.as_slice()
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.grid
    }

    /// Occupancy test for binary volumes (any value of at least 0.5 for
    /// predictions).
    #[inline]
    pub fn is_occupied(&self, i: usize) -> bool {
        self.grid[i] >= 0.5
    }

    pub fn occupied_count(&self) -> usize {
        (0..self.grid.dims().len())
            .filter(|&i| self.is_occupied(i))
            .count()
    }

    pub fn set_occupied(&mut self, i: usize, occupied: bool) {
        debug_assert_eq!(self.kind, ShapeKind::GroundTruth);
        self.grid[i] = if occupied { 1.0 } else { 0.0 };
    }

    pub fn require_ground_truth(&self, what: &str) -> Result<()> {
        match self.kind {
            ShapeKind::GroundTruth => Ok(()),
            ShapeKind::Prediction => Err(Error::InvalidVolume(format!(
                "{what} must be a binary ground-truth volume"
            ))),
        }
    }
}

/// Strictly increasing linear indices of the surface voxels of a shape.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SurfaceIndex {
    indices: Vec<usize>,
}

impl SurfaceIndex {
    pub fn from_sorted(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidVolume(
                "surface indices must be strictly increasing".into(),
            ));
        }
        Ok(Self { indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Position of voxel `i` inside the list.
    pub fn position(&self, i: usize) -> Option<usize> {
        self.indices.binary_search(&i).ok()
    }
}

const NEIGHBORS_6: [[i64; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

/// Occupied voxels with at least one empty 6-neighbor. Neighbors outside the
/// grid count as empty.
pub fn extract_surface(shape: &ShapeVolume) -> SurfaceIndex {
    let dims = shape.dims();
    let indices = (0..dims.len())
        .filter(|&i| shape.is_occupied(i))
        .filter(|&i| {
            let [x, y, z] = dims.coords(i);
            NEIGHBORS_6.iter().any(|[dx, dy, dz]| {
                match dims.checked_index(x as i64 + dx, y as i64 + dy, z as i64 + dz) {
                    Some(j) => !shape.is_occupied(j),
                    None => true,
                }
            })
        })
        .collect();
    SurfaceIndex { indices }
}

pub const DEFAULT_OCCUPANCY_THRESHOLD: f64 = 0.5;

/// Binarizes a prediction: occupied where `pred >= t`.
pub fn threshold_occupancy(pred: &ShapeVolume, t: f64) -> Result<ShapeVolume> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Parameter(format!(
            "occupancy threshold must lie in (0, 1), got {t}"
        )));
    }
    let dims = pred.dims();
    let values = pred
        .values()
        .iter()
        .map(|&v| if v >= t { 1.0 } else { 0.0 })
        .collect();
    ShapeVolume::ground_truth(dims, values)
}

pub const EMPTY_CODE_UNIT: Rgb = [-1.0, -1.0, -1.0];
pub const EMPTY_CODE_HALF: Rgb = [-0.5, -0.5, -0.5];

/// Splits a joint color/shape volume into separate shape and color volumes.
/// A voxel is empty iff it equals `empty_code` exactly; empty voxels get
/// color 0.
pub fn split_joint(joint: &JointVolume, empty_code: Rgb) -> (ShapeVolume, ColorVolume) {
    let dims = joint.dims();
    let mut shape = ShapeVolume::empty(dims);
    let mut color = ColorVolume::zeros(dims);
    for (i, c) in joint.as_slice().iter().enumerate() {
        if *c != empty_code {
            shape.set_occupied(i, true);
            color[i] = *c;
        }
    }
    (shape, color)
}

/// Inverse of [`split_joint`]: occupied voxels carry their color, empty ones
/// the empty code.
pub fn join(shape: &ShapeVolume, color: &ColorVolume, empty_code: Rgb) -> Result<JointVolume> {
    shape.dims().ensure_eq(&color.dims())?;
    let data = (0..shape.dims().len())
        .map(|i| {
            if shape.is_occupied(i) {
                color[i]
            } else {
                empty_code
            }
        })
        .collect();
    JointVolume::from_vec(shape.dims(), data)
}

/// Decodes a predicted joint volume: a voxel is occupied when all of its
/// channels exceed `t`, and occupied colors are rescaled by
/// [`crate::metrics::adjust_joint_color`].
pub fn decode_joint_prediction(joint: &JointVolume, t: f64) -> Result<(ShapeVolume, ColorVolume)> {
    let dims = joint.dims();
    let mut shape = ShapeVolume::empty(dims);
    let mut color = ColorVolume::zeros(dims);
    for (i, c) in joint.as_slice().iter().enumerate() {
        if c.iter().all(|&v| v > t) {
            shape.set_occupied(i, true);
            color[i] = [
                crate::metrics::adjust_joint_color(c[0], t)?,
                crate::metrics::adjust_joint_color(c[1], t)?,
                crate::metrics::adjust_joint_color(c[2], t)?,
            ];
        }
    }
    Ok((shape, color))
}
