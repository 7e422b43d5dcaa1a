//! Colorful voxel reconstruction from a single view: volumes, cameras,
//! appearance flow, color sampling and blending, training losses and
//! evaluation metrics, plus a synthetic scene generator.

pub mod camera;
pub mod cvol;
mod error;
pub mod flow;
pub mod losses;
pub mod metrics;
pub mod ply;
pub mod pnm;
pub mod sampling;
pub mod synth;
pub mod volumes;

pub use error::{Error, Result};
