//! CVOL: the binary container shared by every volume file.
//!
//! ```text
//! "CVOL" | version u8 = 1 | channels u8 | dtype u8 | reserved u8 = 0
//! W u32 | H u32 | D u32                      (little-endian)
//! W*H*D*channels values, linear-index order, channels interleaved
//! ```
//!
//! dtype 0 stores `f64` little-endian, dtype 1 stores `u8`. `u8` payloads are
//! read back as their integer value; they are used for binary occupancy.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::volumes::{Grid, GridDims, ShapeKind, ShapeVolume, Voxel};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CVOL";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F64 = 0,
    U8 = 1,
}

impl DType {
    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Self::F64),
            1 => Ok(Self::U8),
            _ => Err(Error::format("CVOL", format!("unknown dtype {b}"))),
        }
    }

    fn width(self) -> usize {
        match self {
            Self::F64 => 8,
            Self::U8 => 1,
        }
    }
}

/// A decoded CVOL file before it is given a volume type.
#[derive(Clone, Debug, PartialEq)]
pub struct RawVolume {
    pub dims: GridDims,
    pub channels: u8,
    pub dtype: DType,
    pub values: Vec<f64>,
}

impl RawVolume {
    pub fn encode(&self) -> Result<Vec<u8>> {
        if !(1..=3).contains(&self.channels) {
            return Err(Error::format(
                "CVOL",
                format!("channel count {} not in 1..=3", self.channels),
            ));
        }
        let n = self.dims.len() * self.channels as usize;
        if self.values.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: self.values.len(),
            });
        }
        let mut out = Vec::with_capacity(HEADER_LEN + n * self.dtype.width());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[VERSION, self.channels, self.dtype as u8, 0]);
        for axis in [self.dims.w, self.dims.h, self.dims.d] {
            let axis = u32::try_from(axis)
                .map_err(|_| Error::format("CVOL", format!("axis {axis} exceeds u32")))?;
            out.extend_from_slice(&axis.to_le_bytes());
        }
        match self.dtype {
            DType::F64 => {
                for v in &self.values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            DType::U8 => {
                for &v in &self.values {
                    if !(0.0..=255.0).contains(&v) || v.fract() != 0.0 {
                        return Err(Error::format(
                            "CVOL",
                            format!("value {v} is not representable as u8"),
                        ));
                    }
                    out.push(v as u8);
                }
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format("CVOL", "truncated header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::format("CVOL", "bad magic"));
        }
        if bytes[4] != VERSION {
            return Err(Error::format("CVOL", format!("unsupported version {}", bytes[4])));
        }
        let channels = bytes[5];
        if !(1..=3).contains(&channels) {
            return Err(Error::format("CVOL", format!("channel count {channels}")));
        }
        let dtype = DType::from_byte(bytes[6])?;
        let axis = |k: usize| {
            let o = 8 + 4 * k;
            u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize
        };
        let dims = GridDims::new(axis(0), axis(1), axis(2))?;
        let n = dims.len() * channels as usize;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != n * dtype.width() {
            return Err(Error::format(
                "CVOL",
                format!(
                    "payload is {} bytes, expected {} for {dims} x {channels}",
                    payload.len(),
                    n * dtype.width()
                ),
            ));
        }
        let values = match dtype {
            DType::F64 => payload
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
            DType::U8 => payload.iter().map(|&b| b as f64).collect(),
        };
        Ok(Self {
            dims,
            channels,
            dtype,
            values,
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.encode()?)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::decode(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.encode().map_err(|e| e.in_file(path))?;
        fs::write(path, bytes).map_err(|e| Error::from(e).in_file(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::decode(&bytes).map_err(|e| e.in_file(path))
    }

    pub fn from_grid<T: Voxel>(grid: &Grid<T>) -> Self {
        Self {
            dims: grid.dims(),
            channels: T::CHANNELS as u8,
            dtype: DType::F64,
            values: grid.to_channels(),
        }
    }

    pub fn into_grid<T: Voxel>(self) -> Result<Grid<T>> {
        if self.channels as usize != T::CHANNELS {
            return Err(Error::format(
                "CVOL",
                format!(
                    "expected {} channel(s), file has {}",
                    T::CHANNELS,
                    self.channels
                ),
            ));
        }
        Grid::from_channels(self.dims, &self.values)
    }

    /// Ground-truth shapes are stored as `u8`, predictions as `f64`.
    pub fn from_shape(shape: &ShapeVolume) -> Self {
        let dtype = match shape.kind() {
            ShapeKind::GroundTruth => DType::U8,
            ShapeKind::Prediction => DType::F64,
        };
        Self {
            dims: shape.dims(),
            channels: 1,
            dtype,
            values: shape.values().to_vec(),
        }
    }

    pub fn into_shape(self, kind: ShapeKind) -> Result<ShapeVolume> {
        let grid = self.into_grid::<f64>()?;
        ShapeVolume::from_grid(grid, kind)
    }
}

pub fn save_grid<T: Voxel>(grid: &Grid<T>, path: impl AsRef<Path>) -> Result<()> {
    RawVolume::from_grid(grid).save(path)
}

pub fn load_grid<T: Voxel>(path: impl AsRef<Path>) -> Result<Grid<T>> {
    let path = path.as_ref();
    RawVolume::load(path)?
        .into_grid()
        .map_err(|e| e.in_file(path))
}

pub fn save_shape(shape: &ShapeVolume, path: impl AsRef<Path>) -> Result<()> {
    RawVolume::from_shape(shape).save(path)
}

pub fn load_shape(path: impl AsRef<Path>, kind: ShapeKind) -> Result<ShapeVolume> {
    let path = path.as_ref();
    RawVolume::load(path)?
        .into_shape(kind)
        .map_err(|e| e.in_file(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volumes::FlowVolume;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_exact() {
        let dims = GridDims::new(2, 1, 1).unwrap();
        let shape = ShapeVolume::ground_truth(dims, vec![1.0, 0.0]).unwrap();
        let bytes = RawVolume::from_shape(&shape).encode().unwrap();
        assert_eq!(
            bytes,
            [
                b'C', b'V', b'O', b'L', 1, 1, 1, 0, 2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0
            ]
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RawVolume::decode(b"CVO").is_err());
        let mut bytes = RawVolume::from_grid(&Grid::<f64>::zeros(GridDims::cube(2).unwrap()))
            .encode()
            .unwrap();
        bytes.pop();
        assert!(RawVolume::decode(&bytes).is_err());
        bytes[0] = b'X';
        assert!(RawVolume::decode(&bytes).is_err());
    }

    #[test]
    fn channel_count_is_checked_on_conversion() {
        let raw = RawVolume::from_grid(&FlowVolume::zeros(GridDims::cube(2).unwrap()));
        assert!(raw.into_grid::<[f64; 3]>().is_err());
    }

    proptest! {
        #[test]
        fn flow_round_trip(values in proptest::collection::vec(-1e6f64..1e6, 2 * 12)) {
            let dims = GridDims::new(3, 2, 2).unwrap();
            let flow = FlowVolume::from_channels(dims, &values).unwrap();
            let bytes = RawVolume::from_grid(&flow).encode().unwrap();
            let back: FlowVolume = RawVolume::decode(&bytes).unwrap().into_grid().unwrap();
            prop_assert_eq!(back, flow);
        }
    }
}
