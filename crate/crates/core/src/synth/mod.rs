//! Synthetic scenes, rendering and a direct optimization demo.

mod demo;
pub mod presets;
mod render;
mod scene;

pub use demo::{direct_fit_demo, fit_shape, DemoConfig, FitReport};
pub use presets::preset;
pub use render::{framing_focal, make_azimuth_cameras, render_view, BACKGROUND};
pub use scene::{gen_scene, is_x_mirror_symmetric, Paint, Primitive, SceneSpec};
