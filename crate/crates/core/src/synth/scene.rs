//! Text scene descriptions rasterized into shape and color volumes.
//!
//! ```text
//! dims 32 32 32
//! voxel_size 1
//! origin 0 0 0
//! box      x0 y0 z0 x1 y1 z1 r g b
//! facebox  x0 y0 z0 x1 y1 z1 (r g b) x6      # -x +x -y +y -z +z
//! checker  x0 y0 z0 x1 y1 z1 cell r1 g1 b1 r2 g2 b2
//! sphere   cx cy cz radius r g b
//! lbracket x0 y0 z0 x1 y1 z1 thickness r g b
//! jitter   amplitude
//! ```
//!
//! Coordinates are in voxel units; a voxel belongs to a primitive when its
//! center `(x + 0.5, y + 0.5, z + 0.5)` does, with boxes half-open. Later
//! primitives overwrite earlier ones. `jitter` adds seeded per-voxel color
//! noise of the given amplitude, rounded to 8-bit levels.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::volumes::{ColorVolume, GridDims, Rgb, ShapeVolume, VoxelFrame};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Paint {
    Solid(Rgb),
    Checker { cell: f64, a: Rgb, b: Rgb },
    /// Colors for the -x, +x, -y, +y, -z, +z faces.
    Faces([Rgb; 6]),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    Box {
        min: [f64; 3],
        max: [f64; 3],
        paint: Paint,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        paint: Paint,
    },
    /// Union of the bar `x < min.x + t` and the bar `y >= max.y - t` inside
    /// the bounding box, extruded along z.
    LBracket {
        min: [f64; 3],
        max: [f64; 3],
        thickness: f64,
        paint: Paint,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub dims: GridDims,
    pub frame: VoxelFrame,
    pub primitives: Vec<Primitive>,
    pub jitter: f64,
}

fn inside_box(p: [f64; 3], min: [f64; 3], max: [f64; 3]) -> bool {
    (0..3).all(|k| p[k] >= min[k] && p[k] < max[k])
}

impl Primitive {
    fn contains(&self, p: [f64; 3]) -> bool {
        match self {
            Self::Box { min, max, .. } => inside_box(p, *min, *max),
            Self::Sphere { center, radius, .. } => {
                (0..3).map(|k| (p[k] - center[k]).powi(2)).sum::<f64>() <= radius * radius
            }
            Self::LBracket {
                min,
                max,
                thickness,
                ..
            } => inside_box(p, *min, *max) && (p[0] < min[0] + thickness || p[1] >= max[1] - thickness),
        }
    }

    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        match self {
            Self::Box { min, max, .. } | Self::LBracket { min, max, .. } => (*min, *max),
            Self::Sphere { center, radius, .. } => (
                center.map(|c| c - radius),
                center.map(|c| c + radius),
            ),
        }
    }

    fn paint(&self) -> &Paint {
        match self {
            Self::Box { paint, .. } | Self::Sphere { paint, .. } | Self::LBracket { paint, .. } => {
                paint
            }
        }
    }

    fn color_at(&self, v: [usize; 3], p: [f64; 3]) -> Rgb {
        let (min, max) = self.bounds();
        match self.paint() {
            Paint::Solid(c) => *c,
            Paint::Checker { cell, a, b } => {
                let parity: i64 = (0..3)
                    .map(|k| ((v[k] as f64 - min[k].floor()) / cell).floor() as i64)
                    .sum();
                if parity.rem_euclid(2) == 0 {
                    *a
                } else {
                    *b
                }
            }
            Paint::Faces(colors) => {
                // Face whose boundary plane is nearest; order breaks ties.
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for k in 0..3 {
                    for (side, d) in [(0, p[k] - min[k]), (1, max[k] - p[k])] {
                        if d < best_d {
                            best_d = d;
                            best = 2 * k + side;
                        }
                    }
                }
                colors[best]
            }
        }
    }
}

fn parse_floats(line: usize, tokens: &[&str], n: usize, what: &str) -> Result<Vec<f64>> {
    if tokens.len() != n {
        return Err(Error::parse(
            line,
            format!("{what} takes {n} values, found {}", tokens.len()),
        ));
    }
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::parse(line, format!("bad number {t:?}")))
        })
        .collect()
}

fn rgb(v: &[f64]) -> Rgb {
    [v[0], v[1], v[2]]
}

impl SceneSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut dims = None;
        let mut frame = VoxelFrame::default();
        let mut primitives = Vec::new();
        let mut jitter = 0.0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = content.split_whitespace().collect();
            let (head, args) = (tokens[0], &tokens[1..]);
            match head {
                "dims" => {
                    let v = parse_floats(line, args, 3, "dims")?;
                    dims = Some(GridDims::new(v[0] as usize, v[1] as usize, v[2] as usize)?);
                }
                "voxel_size" => {
                    let v = parse_floats(line, args, 1, "voxel_size")?;
                    frame = VoxelFrame::new(frame.origin, v[0])?;
                }
                "origin" => {
                    let v = parse_floats(line, args, 3, "origin")?;
                    frame.origin = [v[0], v[1], v[2]];
                }
                "jitter" => jitter = parse_floats(line, args, 1, "jitter")?[0],
                "box" => {
                    let v = parse_floats(line, args, 9, "box")?;
                    primitives.push(Primitive::Box {
                        min: [v[0], v[1], v[2]],
                        max: [v[3], v[4], v[5]],
                        paint: Paint::Solid(rgb(&v[6..])),
                    });
                }
                "facebox" => {
                    let v = parse_floats(line, args, 24, "facebox")?;
                    let faces = std::array::from_fn(|f| rgb(&v[6 + 3 * f..]));
                    primitives.push(Primitive::Box {
                        min: [v[0], v[1], v[2]],
                        max: [v[3], v[4], v[5]],
                        paint: Paint::Faces(faces),
                    });
                }
                "checker" => {
                    let v = parse_floats(line, args, 13, "checker")?;
                    if v[6] <= 0.0 {
                        return Err(Error::parse(line, "checker cell must be positive"));
                    }
                    primitives.push(Primitive::Box {
                        min: [v[0], v[1], v[2]],
                        max: [v[3], v[4], v[5]],
                        paint: Paint::Checker {
                            cell: v[6],
                            a: rgb(&v[7..]),
                            b: rgb(&v[10..]),
                        },
                    });
                }
                "sphere" => {
                    let v = parse_floats(line, args, 7, "sphere")?;
                    primitives.push(Primitive::Sphere {
                        center: [v[0], v[1], v[2]],
                        radius: v[3],
                        paint: Paint::Solid(rgb(&v[4..])),
                    });
                }
                "lbracket" => {
                    let v = parse_floats(line, args, 10, "lbracket")?;
                    primitives.push(Primitive::LBracket {
                        min: [v[0], v[1], v[2]],
                        max: [v[3], v[4], v[5]],
                        thickness: v[6],
                        paint: Paint::Solid(rgb(&v[7..])),
                    });
                }
                other => return Err(Error::parse(line, format!("unknown directive {other:?}"))),
            }
        }
        let dims = dims.ok_or_else(|| Error::parse(0, "missing dims"))?;
        let spec = Self {
            dims,
            frame,
            primitives,
            jitter,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::parse(&text).map_err(|e| e.in_file(path))
    }

    /// Every primitive must fit inside the grid.
    pub fn validate(&self) -> Result<()> {
        let ext = [self.dims.w as f64, self.dims.h as f64, self.dims.d as f64];
        for (n, p) in self.primitives.iter().enumerate() {
            let (min, max) = p.bounds();
            if (0..3).any(|k| min[k] < 0.0 || max[k] > ext[k] || min[k] >= max[k]) {
                return Err(Error::Parameter(format!(
                    "primitive {n} with bounds {min:?}..{max:?} does not fit in {}",
                    self.dims
                )));
            }
        }
        Ok(())
    }
}

/// Rasterizes a scene. Colors of occupied voxels come from the last
/// primitive covering them; empty voxels are black.
pub fn gen_scene(spec: &SceneSpec, seed: u64) -> Result<(ShapeVolume, ColorVolume)> {
    spec.validate()?;
    let dims = spec.dims;
    let mut shape = ShapeVolume::empty(dims);
    let mut color = ColorVolume::zeros(dims);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..dims.len() {
        let v = dims.coords(i);
        let p = v.map(|c| c as f64 + 0.5);
        let Some(prim) = spec.primitives.iter().rev().find(|q| q.contains(p)) else {
            continue;
        };
        shape.set_occupied(i, true);
        let mut c = prim.color_at(v, p);
        if spec.jitter > 0.0 {
            for ch in &mut c {
                let noisy = *ch + rng.gen_range(-spec.jitter..=spec.jitter);
                *ch = (noisy.clamp(0.0, 1.0) * 255.0).round() / 255.0;
            }
        }
        color[i] = c;
    }
    Ok((shape, color))
}

/// True when the volumes equal their mirror image across the x mid-plane.
pub fn is_x_mirror_symmetric(shape: &ShapeVolume, color: &ColorVolume) -> bool {
    let dims = shape.dims();
    (0..dims.len()).all(|i| {
        let [x, y, z] = dims.coords(i);
        let j = dims.index(dims.w - 1 - x, y, z);
        shape.is_occupied(i) == shape.is_occupied(j) && (!shape.is_occupied(i) || color[i] == color[j])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_matches_membership() {
        let spec = SceneSpec::parse("dims 8 6 5\nbox 1 2 0 4 6 3 1 0 0\n").unwrap();
        let (shape, color) = gen_scene(&spec, 0).unwrap();
        let dims = spec.dims;
        for i in 0..dims.len() {
            let [x, y, z] = dims.coords(i);
            let inside = (1..4).contains(&x) && (2..6).contains(&y) && z < 3;
            assert_eq!(shape.is_occupied(i), inside);
            if inside {
                assert_eq!(color[i], [1.0, 0.0, 0.0]);
            }
        }
    }

    #[test]
    fn sphere_volume_is_close_to_analytic() {
        for r in [6.0, 7.5, 9.0] {
            let spec = SceneSpec::parse(&format!("dims 20 20 20\nsphere 10 10 10 {r} 0 1 0\n")).unwrap();
            let (shape, _) = gen_scene(&spec, 0).unwrap();
            let expected = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
            let n = shape.occupied_count() as f64;
            assert!((n - expected).abs() / expected < 0.1, "r={r}: {n} vs {expected}");
        }
    }

    #[test]
    fn checker_alternates() {
        let spec = SceneSpec::parse("dims 4 1 1\nchecker 0 0 0 4 1 1 2 1 1 1 0 0 0\n").unwrap();
        let (_, color) = gen_scene(&spec, 0).unwrap();
        let reds: Vec<f64> = color.as_slice().iter().map(|c| c[0]).collect();
        assert_eq!(reds, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn facebox_colors_faces() {
        let mut line = String::from("dims 5 5 5\nfacebox 0 0 0 5 5 5");
        for f in 0..6 {
            line.push_str(&format!(" {} 0 0", f as f64 / 10.0));
        }
        let (_, color) = gen_scene(&SceneSpec::parse(&line).unwrap(), 0).unwrap();
        let dims = GridDims::cube(5).unwrap();
        assert_eq!(color[dims.index(0, 2, 2)][0], 0.0);
        assert_eq!(color[dims.index(4, 2, 2)][0], 0.1);
        assert_eq!(color[dims.index(2, 2, 4)][0], 0.5);
    }

    #[test]
    fn lbracket_shape() {
        let spec = SceneSpec::parse("dims 4 4 1\nlbracket 0 0 0 4 4 1 1 0 0 1\n").unwrap();
        let (shape, _) = gen_scene(&spec, 0).unwrap();
        // Column x = 0 and row y = 3.
        assert_eq!(shape.occupied_count(), 4 + 3);
    }

    #[test]
    fn mirror_symmetric_spec_is_symmetric() {
        let spec = SceneSpec::parse(
            "dims 10 6 6\nbox 2 1 1 8 5 5 0.2 0.4 0.6\nbox 0 2 2 2 4 4 1 0 0\nbox 8 2 2 10 4 4 1 0 0\n",
        )
        .unwrap();
        let (shape, color) = gen_scene(&spec, 0).unwrap();
        assert!(is_x_mirror_symmetric(&shape, &color));
    }

    #[test]
    fn jitter_is_seeded() {
        let spec = SceneSpec::parse("dims 4 4 4\nbox 0 0 0 4 4 4 0.5 0.5 0.5\njitter 0.1\n").unwrap();
        let a = gen_scene(&spec, 9).unwrap();
        let b = gen_scene(&spec, 9).unwrap();
        let c = gen_scene(&spec, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn rejects_out_of_grid_and_unknown() {
        assert!(SceneSpec::parse("dims 4 4 4\nbox 0 0 0 5 4 4 1 1 1\n").is_err());
        assert!(SceneSpec::parse("dims 4 4 4\ncone 1 2 3\n").is_err());
        assert!(SceneSpec::parse("box 0 0 0 1 1 1 1 1 1\n").is_err());
    }
}
