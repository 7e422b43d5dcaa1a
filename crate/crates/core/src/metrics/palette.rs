//! Dataset color palette and per-view color complexity.
//!
//! The palette is built from the unique 8-bit foreground colors of a whole
//! dataset: rare colors (count below `t1`) are dropped and the rest are
//! clustered with k-means. A view's complexity is the number of palette
//! centers that receive more than `t2` of its foreground pixels.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pnm::quantize;
use crate::sampling::ViewImage;
use crate::volumes::Rgb;
use crate::{Error, Result};

pub const DEFAULT_T1: usize = 50;
pub const DEFAULT_K: usize = 128;
pub const DEFAULT_T2: usize = 5;
pub const DEFAULT_SEED: u64 = 17;

const MAX_ITERS: usize = 100;
const MOVE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct ColorPalette {
    /// Lexicographically sorted.
    pub centers: Vec<Rgb>,
    pub t1: usize,
    pub k: usize,
    pub seed: u64,
}

fn dist2(a: Rgb, b: Rgb) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Index of the closest center; ties go to the lowest index.
fn closest(centers: &[Rgb], c: Rgb) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, &m) in centers.iter().enumerate() {
        let d = dist2(m, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

fn kmeans_pp_init(points: &[Rgb], k: usize, rng: &mut ChaCha8Rng) -> Vec<Rgb> {
    let mut centers = vec![points[rng.gen_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // Every point coincides with a center already.
            rng.gen_range(0..points.len())
        };
        let c = points[next];
        centers.push(c);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, c));
        }
    }
    centers
}

fn lloyd(points: &[Rgb], mut centers: Vec<Rgb>) -> Vec<Rgb> {
    for _ in 0..MAX_ITERS {
        let mut sums = vec![[0.0; 3]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for &p in points {
            let j = closest(&centers, p);
            for k in 0..3 {
                sums[j][k] += p[k];
            }
            counts[j] += 1;
        }
        let mut moved: f64 = 0.0;
        for (j, c) in centers.iter_mut().enumerate() {
            if counts[j] == 0 {
                continue;
            }
            let n = counts[j] as f64;
            let m = sums[j].map(|s| s / n);
            moved = moved.max(dist2(*c, m).sqrt());
            *c = m;
        }
        if moved < MOVE_TOL {
            break;
        }
    }
    centers
}

/// Unique-color histogram over foreground pixels, keyed by 8-bit RGB.
pub fn foreground_histogram<'a>(views: impl IntoIterator<Item = &'a ViewImage>) -> BTreeMap<[u8; 3], usize> {
    let mut hist = BTreeMap::new();
    for view in views {
        for (c, &m) in view.rgb().iter().zip(view.mask()) {
            if m {
                *hist.entry(c.map(quantize)).or_insert(0) += 1;
            }
        }
    }
    hist
}

pub fn build_palette(views: &[ViewImage], t1: usize, k: usize, seed: u64) -> Result<ColorPalette> {
    if k == 0 {
        return Err(Error::Parameter("palette size K must be at least 1".into()));
    }
    let points: Vec<Rgb> = foreground_histogram(views)
        .into_iter()
        .filter(|&(_, count)| count >= t1)
        .map(|(c, _)| c.map(|v| v as f64 / 255.0))
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyPalette);
    }
    let k_eff = k.min(points.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = kmeans_pp_init(&points, k_eff, &mut rng);
    let mut centers = lloyd(&points, init);
    centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ColorPalette {
        centers,
        t1,
        k,
        seed,
    })
}

/// Number of palette centers assigned strictly more than `t2` foreground
/// pixels of `view`.
pub fn color_complexity(view: &ViewImage, palette: &ColorPalette, t2: usize) -> usize {
    if palette.centers.is_empty() {
        return 0;
    }
    let mut counts = vec![0usize; palette.centers.len()];
    for (c, &m) in view.rgb().iter().zip(view.mask()) {
        if m {
            let q = c.map(|v| quantize(v) as f64 / 255.0);
            counts[closest(&palette.centers, q)] += 1;
        }
    }
    counts.iter().filter(|&&n| n > t2).count()
}

impl ColorPalette {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "t1={} k={} seed={}", self.t1, self.k, self.seed).unwrap();
        for c in &self.centers {
            writeln!(s, "{:?} {:?} {:?}", c[0], c[1], c[2]).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::format("palette", "empty file"))?;
        let mut fields = BTreeMap::new();
        for kv in header.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::parse(1, format!("expected key=value, got {kv}")))?;
            let v: u64 = v.parse().map_err(|_| Error::parse(1, format!("bad value {v}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::parse(1, format!("missing {k}")))
        };
        let mut centers = Vec::new();
        for (i, l) in lines {
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::parse(i + 1, format!("bad number {t}"))))
                .collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(Error::parse(i + 1, "expected three channels"));
            }
            centers.push([v[0], v[1], v[2]]);
        }
        Ok(Self {
            centers,
            t1: get("t1")? as usize,
            k: get("k")? as usize,
            seed: get("seed")?,
        })
    }
}
