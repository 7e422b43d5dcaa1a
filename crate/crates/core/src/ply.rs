//! ASCII PLY point export of colored surface voxels.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::pnm::quantize;
use crate::volumes::{extract_surface, ColorVolume, ShapeVolume, VoxelFrame};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlyVertex {
    pub position: [f64; 3],
    pub rgb: [u8; 3],
}

const PROPERTIES: [(&str, &str); 6] = [
    ("float", "x"),
    ("float", "y"),
    ("float", "z"),
    ("uchar", "red"),
    ("uchar", "green"),
    ("uchar", "blue"),
];

/// One vertex per occupied surface voxel, at its world-space center, in
/// increasing linear index order.
pub fn surface_vertices(shape: &ShapeVolume, color: &ColorVolume, frame: &VoxelFrame) -> Result<Vec<PlyVertex>> {
    shape.dims().ensure_eq(&color.dims())?;
    let dims = shape.dims();
    Ok(extract_surface(shape)
        .iter()
        .map(|i| PlyVertex {
            position: frame.center(dims.coords(i)),
            rgb: color[i].map(quantize),
        })
        .collect())
}

pub fn encode_ply(vertices: &[PlyVertex]) -> String {
    let mut s = String::from("ply\nformat ascii 1.0\n");
    writeln!(s, "element vertex {}", vertices.len()).unwrap();
    for (ty, name) in PROPERTIES {
        writeln!(s, "property {ty} {name}").unwrap();
    }
    s.push_str("end_header\n");
    for v in vertices {
        let [x, y, z] = v.position;
        let [r, g, b] = v.rgb;
        writeln!(s, "{x} {y} {z} {r} {g} {b}").unwrap();
    }
    s
}

/// Reads files written by [`encode_ply`]: ASCII, a single vertex element
/// with exactly the x, y, z, red, green, blue properties.
pub fn decode_ply(text: &str) -> Result<Vec<PlyVertex>> {
    let err = |m: String| Error::format("PLY", m);
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(err("missing ply magic line".into()));
    }
    let mut count = None;
    let mut props = Vec::new();
    loop {
        let line = lines.next().ok_or_else(|| err("missing end_header".into()))?.trim();
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", "1.0"] => {}
            ["format", other, ..] => return Err(err(format!("unsupported format {other}"))),
            ["comment", ..] => {}
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| err(format!("bad vertex count {n}")))?)
            }
            ["element", name, ..] => return Err(err(format!("unsupported element {name}"))),
            ["property", ty, name] => props.push((ty.to_string(), name.to_string())),
            _ => return Err(err(format!("unexpected header line {line:?}"))),
        }
    }
    let expected: Vec<(String, String)> = PROPERTIES
        .iter()
        .map(|(t, n)| (t.to_string(), n.to_string()))
        .collect();
    if props != expected {
        return Err(err(format!("unexpected vertex properties {props:?}")));
    }
    let count = count.ok_or_else(|| err("missing vertex element".into()))?;
    let mut out = Vec::with_capacity(count);
    for n in 0..count {
        let line = lines.next().ok_or_else(|| err(format!("expected {count} vertices, found {n}")))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 6 {
            return Err(err(format!("vertex {n} has {} fields", tokens.len())));
        }
        let f = |t: &str| t.parse::<f64>().map_err(|_| err(format!("bad coordinate {t}")));
        let c = |t: &str| t.parse::<u8>().map_err(|_| err(format!("bad color {t}")));
        out.push(PlyVertex {
            position: [f(tokens[0])?, f(tokens[1])?, f(tokens[2])?],
            rgb: [c(tokens[3])?, c(tokens[4])?, c(tokens[5])?],
        });
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(err("trailing data after vertices".into()));
    }
    Ok(out)
}

pub fn save_ply(path: impl AsRef<Path>, vertices: &[PlyVertex]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ply(vertices)).map_err(|e| Error::from(e).in_file(path))
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<Vec<PlyVertex>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    decode_ply(&text).map_err(|e| e.in_file(path))
}
