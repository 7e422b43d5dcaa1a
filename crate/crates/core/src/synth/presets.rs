//! Scenes bundled with the library.

use super::SceneSpec;
use crate::{Error, Result};

pub const CHECKER_CUBE: &str = include_str!("../../scenes/checker_cube.scene");
pub const DEMO: &str = include_str!("../../scenes/demo.scene");
pub const THIN_LEGS: &str = include_str!("../../scenes/thin_legs.scene");
pub const SYMMETRIC: &str = include_str!("../../scenes/symmetric.scene");

pub const NAMES: [&str; 4] = ["checker_cube", "demo", "thin_legs", "symmetric"];

pub fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "checker_cube" => Some(CHECKER_CUBE),
        "demo" => Some(DEMO),
        "thin_legs" => Some(THIN_LEGS),
        "symmetric" => Some(SYMMETRIC),
        _ => None,
    }
}

pub fn preset(name: &str) -> Result<SceneSpec> {
    let text = preset_text(name).ok_or_else(|| {
        Error::Parameter(format!("unknown preset {name:?}; available: {}", NAMES.join(", ")))
    })?;
    SceneSpec::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_scene, is_x_mirror_symmetric};

    #[test]
    fn presets_parse() {
        for name in NAMES {
            let spec = preset(name).unwrap();
            let (shape, _) = gen_scene(&spec, 17).unwrap();
            assert!(shape.occupied_count() > 0, "{name}");
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn symmetric_preset_is_symmetric() {
        let (shape, color) = gen_scene(&preset("symmetric").unwrap(), 17).unwrap();
        assert!(is_x_mirror_symmetric(&shape, &color));
    }
}
