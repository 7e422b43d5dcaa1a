//! Occupancy losses: MSFCEL and the plain cross-entropy and L2 baselines.
//!
//! MSFCEL averages cross-entropy separately over the unoccupied (FPCE) and
//! occupied (FNCE) voxels of the ground truth and adds their squares, so a
//! sparse volume's few occupied voxels weigh as much as its many empty ones.

use super::{Gradient, LossReport, LossTerm};
use crate::volumes::{Grid, ShapeVolume};
use crate::Result;

/// Log clamp for predicted probabilities.
pub const EPS_CE: f64 = 1e-7;

/// Clamped probability and whether the clamp is inactive (derivative 1).
#[inline]
fn clamp_prob(p: f64) -> (f64, bool) {
    let c = p.clamp(EPS_CE, 1.0 - EPS_CE);
    (c, c == p)
}

/// Binary cross-entropy of one voxel with label `v`, and d/dp.
#[inline]
fn bce(v: f64, p: f64) -> (f64, f64) {
    let (q, free) = clamp_prob(p);
    let value = -(v * q.ln() + (1.0 - v) * (1.0 - q).ln());
    let slope = if free { -v / q + (1.0 - v) / (1.0 - q) } else { 0.0 };
    (value, slope)
}

fn check(gt: &ShapeVolume, pred: &ShapeVolume) -> Result<()> {
    gt.require_ground_truth("loss ground truth")?;
    gt.dims().ensure_eq(&pred.dims())
}

/// FPCE and FNCE of a prediction. Empty classes contribute 0.
pub fn false_cross_entropies(gt: &ShapeVolume, pred: &ShapeVolume) -> Result<(f64, f64)> {
    check(gt, pred)?;
    let (mut neg, mut n) = (0.0, 0usize);
    let (mut pos, mut p) = (0.0, 0usize);
    for (&v, &q) in gt.values().iter().zip(pred.values()) {
        let (ce, _) = bce(v, q);
        if v >= 0.5 {
            pos += ce;
            p += 1;
        } else {
            neg += ce;
            n += 1;
        }
    }
    let fpce = if n == 0 { 0.0 } else { neg / n as f64 };
    let fnce = if p == 0 { 0.0 } else { pos / p as f64 };
    Ok((fpce, fnce))
}

pub fn msfcel(gt: &ShapeVolume, pred: &ShapeVolume) -> Result<LossReport> {
    let (fpce, fnce) = false_cross_entropies(gt, pred)?;
    let occupied = gt.occupied_count();
    let n = gt.dims().len() - occupied;
    let p = occupied;
    let grad: Vec<f64> = gt
        .values()
        .iter()
        .zip(pred.values())
        .map(|(&v, &q)| {
            let (_, slope) = bce(v, q);
            if v >= 0.5 {
                2.0 * fnce * slope / p as f64
            } else {
                2.0 * fpce * slope / n as f64
            }
        })
        .collect();
    Ok(LossReport {
        loss: fpce * fpce + fnce * fnce,
        terms: vec![(LossTerm::Fpce, fpce), (LossTerm::Fnce, fnce)],
        grads: vec![Gradient::Occupancy(Grid::from_vec(gt.dims(), grad)?)],
    })
}

/// Both sides of `FPCE^2 + FNCE^2 = ((FPCE + FNCE)^2 + (FPCE - FNCE)^2) / 2`.
pub fn msfcel_decomposition(gt: &ShapeVolume, pred: &ShapeVolume) -> Result<(f64, f64)> {
    let (fpce, fnce) = false_cross_entropies(gt, pred)?;
    let lhs = fpce * fpce + fnce * fnce;
    let rhs = 0.5 * ((fpce + fnce).powi(2) + (fpce - fnce).powi(2));
    Ok((lhs, rhs))
}

/// Unnormalized binary cross-entropy summed over every voxel.
pub fn cross_entropy_loss(gt: &ShapeVolume, pred: &ShapeVolume) -> Result<LossReport> {
    check(gt, pred)?;
    let mut total = 0.0;
    let grad: Vec<f64> = gt
        .values()
        .iter()
        .zip(pred.values())
        .map(|(&v, &q)| {
            let (ce, slope) = bce(v, q);
            total += ce;
            slope
        })
        .collect();
    Ok(LossReport {
        loss: total,
        terms: Vec::new(),
        grads: vec![Gradient::Occupancy(Grid::from_vec(gt.dims(), grad)?)],
    })
}

/// Sum of squared occupancy errors.
pub fn l2_shape_loss(gt: &ShapeVolume, pred: &ShapeVolume) -> Result<LossReport> {
    check(gt, pred)?;
    let mut total = 0.0;
    let grad: Vec<f64> = gt
        .values()
        .iter()
        .zip(pred.values())
        .map(|(&v, &q)| {
            let d = q - v;
            total += d * d;
            2.0 * d
        })
        .collect();
    Ok(LossReport {
        loss: total,
        terms: Vec::new(),
        grads: vec![Gradient::Occupancy(Grid::from_vec(gt.dims(), grad)?)],
    })
}
