//! Central finite-difference checks of the analytic loss gradients.
//!
//! Coordinates whose analytic derivative is below [`MIN_ANALYTIC`] are not
//! compared relatively, and voxels whose residual norm is below
//! [`KINK_EXCLUSION`] are skipped: the norm losses are not differentiable
//! there and a difference quotient straddling the kink is meaningless.

use rand::Rng;

use super::{
    blend_loss, clr_regress_loss, cross_entropy_loss, l2_shape_loss, msfcel, norm,
    total_color_loss, ColorLossInputs, LossKind, LossReport,
};
use crate::sampling::blend_voxel;
use crate::volumes::{
    ColorVolume, FlowVolume, Grid, GridDims, ShapeVolume, SurfaceIndex, Voxel, WeightVolume,
};
use crate::{Error, Result};

pub const MIN_ANALYTIC: f64 = 1e-8;
pub const KINK_EXCLUSION: f64 = 1e-3;

/// A concrete loss evaluation point.
#[derive(Clone, Debug)]
pub enum LossInstance {
    Shape {
        kind: LossKind,
        gt: ShapeVolume,
        pred: ShapeVolume,
    },
    Flow {
        target: FlowVolume,
        pred: FlowVolume,
        surf: SurfaceIndex,
    },
    ClrRegress {
        gt: ColorVolume,
        pred: ColorVolume,
        surf: SurfaceIndex,
    },
    Blend {
        gt: ColorVolume,
        sampled: ColorVolume,
        regressed: ColorVolume,
        weights: WeightVolume,
        surf: SurfaceIndex,
    },
    Total {
        gt: ColorVolume,
        target_flow: FlowVolume,
        pred_flow: FlowVolume,
        sampled: ColorVolume,
        regressed: ColorVolume,
        weights: WeightVolume,
        surf: SurfaceIndex,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub kind: LossKind,
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|)` over
    /// compared coordinates.
    pub max_rel_err: f64,
    /// Largest `|numeric|` where the analytic derivative is (near) zero.
    pub max_abs_err_flat: f64,
    pub compared: usize,
    pub excluded: usize,
}

fn random_surface(dims: GridDims, rng: &mut impl Rng) -> SurfaceIndex {
    let mut idx: Vec<usize> = (0..dims.len()).filter(|_| rng.gen_bool(0.5)).collect();
    if idx.is_empty() {
        idx.push(rng.gen_range(0..dims.len()));
    }
    SurfaceIndex::from_sorted(idx).unwrap()
}

fn random_colors(dims: GridDims, rng: &mut impl Rng) -> ColorVolume {
    Grid::from_fn(dims, |_| std::array::from_fn(|_| rng.gen_range(0.05..0.95)))
}

/// Offsets `base` by a random vector of norm at least 0.05 on most surface
/// voxels, and leaves every eighth one exactly on target.
fn perturb<const N: usize>(
    base: &Grid<[f64; N]>,
    surf: &SurfaceIndex,
    scale: f64,
    rng: &mut impl Rng,
) -> Grid<[f64; N]>
where
    [f64; N]: Voxel,
{
    let mut out = base.clone();
    for (k, i) in surf.iter().enumerate() {
        if k % 8 == 7 {
            continue;
        }
        loop {
            let d: [f64; N] = std::array::from_fn(|_| rng.gen_range(-scale..scale));
            if d.iter().map(|x| x * x).sum::<f64>().sqrt() >= 0.05 * scale {
                out[i] = std::array::from_fn(|c| base[i][c] + d[c]);
                break;
            }
        }
    }
    out
}

impl LossInstance {
    /// Random interior instance: probabilities in `[0.05, 0.95]`, both
    /// occupancy classes present, weights in `[0.1, 0.9]`.
    pub fn random(kind: LossKind, dims: GridDims, rng: &mut impl Rng) -> Self {
        match kind {
            LossKind::Msfcel | LossKind::CrossEntropy | LossKind::L2 => {
                let n = dims.len();
                let mut labels: Vec<f64> = (0..n)
                    .map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 })
                    .collect();
                if n >= 2 {
                    labels[0] = 1.0;
                    labels[1] = 0.0;
                }
                let pred = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
                Self::Shape {
                    kind,
                    gt: ShapeVolume::ground_truth(dims, labels).unwrap(),
                    pred: ShapeVolume::prediction(dims, pred).unwrap(),
                }
            }
            LossKind::Flow => {
                let surf = random_surface(dims, rng);
                let target =
                    Grid::from_fn(dims, |_| [rng.gen_range(0.0..127.0), rng.gen_range(0.0..127.0)]);
                let pred = perturb(&target, &surf, 4.0, rng);
                Self::Flow { target, pred, surf }
            }
            LossKind::ClrRegress => {
                let surf = random_surface(dims, rng);
                let gt = random_colors(dims, rng);
                let pred = perturb(&gt, &surf, 0.3, rng);
                Self::ClrRegress { gt, pred, surf }
            }
            LossKind::Blend | LossKind::Total => {
                let surf = random_surface(dims, rng);
                let gt = random_colors(dims, rng);
                let sampled = random_colors(dims, rng);
                let regressed = random_colors(dims, rng);
                let weights = Grid::from_fn(dims, |_| rng.gen_range(0.1..0.9));
                if kind == LossKind::Blend {
                    return Self::Blend {
                        gt,
                        sampled,
                        regressed,
                        weights,
                        surf,
                    };
                }
                let target_flow =
                    Grid::from_fn(dims, |_| [rng.gen_range(0.0..127.0), rng.gen_range(0.0..127.0)]);
                let pred_flow = perturb(&target_flow, &surf, 4.0, rng);
                Self::Total {
                    gt,
                    target_flow,
                    pred_flow,
                    sampled,
                    regressed,
                    weights,
                    surf,
                }
            }
        }
    }

    pub fn kind(&self) -> LossKind {
        match self {
            Self::Shape { kind, .. } => *kind,
            Self::Flow { .. } => LossKind::Flow,
            Self::ClrRegress { .. } => LossKind::ClrRegress,
            Self::Blend { .. } => LossKind::Blend,
            Self::Total { .. } => LossKind::Total,
        }
    }

    pub fn evaluate(&self) -> Result<LossReport> {
        match self {
            Self::Shape { kind, gt, pred } => match kind {
                LossKind::Msfcel => msfcel(gt, pred),
                LossKind::CrossEntropy => cross_entropy_loss(gt, pred),
                _ => l2_shape_loss(gt, pred),
            },
            Self::Flow { target, pred, surf } => {
                let (loss, grad) = norm::mean_norm_loss(target, pred, surf)?;
                Ok(LossReport {
                    loss,
                    terms: vec![(super::LossTerm::Flow, loss)],
                    grads: vec![super::Gradient::Flow(grad)],
                })
            }
            Self::ClrRegress { gt, pred, surf } => clr_regress_loss(gt, pred, surf),
            Self::Blend {
                gt,
                sampled,
                regressed,
                weights,
                surf,
            } => blend_loss(gt, sampled, regressed, weights, surf),
            Self::Total {
                gt,
                target_flow,
                pred_flow,
                sampled,
                regressed,
                weights,
                surf,
            } => total_color_loss(&ColorLossInputs {
                gt_color: gt,
                target_flow,
                pred_flow,
                sampled,
                regressed,
                weights,
                surf,
            }),
        }
    }

    /// The differentiated arguments, flattened.
    pub fn params(&self) -> Vec<f64> {
        match self {
            Self::Shape { pred, .. } => pred.values().to_vec(),
            Self::Flow { pred, .. } => pred.to_channels(),
            Self::ClrRegress { pred, .. } => pred.to_channels(),
            Self::Blend { weights, .. } => weights.to_channels(),
            Self::Total {
                pred_flow,
                regressed,
                weights,
                ..
            } => [
                pred_flow.to_channels(),
                regressed.to_channels(),
                weights.to_channels(),
            ]
            .concat(),
        }
    }

    pub fn with_params(&self, p: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            Self::Shape { pred, .. } => {
                *pred = ShapeVolume::prediction(pred.dims(), p.to_vec())?;
            }
            Self::Flow { pred, .. } => *pred = Grid::from_channels(pred.dims(), p)?,
            Self::ClrRegress { pred, .. } => *pred = Grid::from_channels(pred.dims(), p)?,
            Self::Blend { weights, .. } => *weights = Grid::from_channels(weights.dims(), p)?,
            Self::Total {
                pred_flow,
                regressed,
                weights,
                ..
            } => {
                let n = pred_flow.dims().len();
                *pred_flow = Grid::from_channels(pred_flow.dims(), &p[..2 * n])?;
                *regressed = Grid::from_channels(regressed.dims(), &p[2 * n..5 * n])?;
                *weights = Grid::from_channels(weights.dims(), &p[5 * n..])?;
            }
        }
        Ok(out)
    }

    /// Analytic gradient flattened in [`LossInstance::params`] order.
    pub fn analytic(&self, report: &LossReport) -> Vec<f64> {
        match self {
            Self::Shape { .. } => report.occupancy_grad().unwrap().to_channels(),
            Self::Flow { .. } => report.flow_grad().unwrap().to_channels(),
            Self::ClrRegress { .. } => report.regressed_grad().unwrap().to_channels(),
            Self::Blend { .. } => report.weights_grad().unwrap().to_channels(),
            Self::Total { .. } => [
                report.flow_grad().unwrap().to_channels(),
                report.regressed_grad().unwrap().to_channels(),
                report.weights_grad().unwrap().to_channels(),
            ]
            .concat(),
        }
    }

    /// Coordinates sitting on a norm kink, in [`LossInstance::params`] order.
    pub fn kinks(&self) -> Vec<bool> {
        fn near<const N: usize>(a: &Grid<[f64; N]>, b: &Grid<[f64; N]>, i: usize) -> bool
        where
            [f64; N]: Voxel,
        {
            (0..N).map(|k| (a[i][k] - b[i][k]).powi(2)).sum::<f64>().sqrt() < KINK_EXCLUSION
        }
        fn spread(flags: Vec<bool>, channels: usize) -> Vec<bool> {
            flags
                .into_iter()
                .flat_map(|f| std::iter::repeat_n(f, channels))
                .collect()
        }
        let blend_kink = |gt: &ColorVolume, s: &ColorVolume, r: &ColorVolume, w: &WeightVolume| {
            (0..gt.dims().len())
                .map(|i| {
                    let b = blend_voxel(s[i], r[i], w[i]);
                    (0..3).map(|k| (b[k] - gt[i][k]).powi(2)).sum::<f64>().sqrt()
                        < KINK_EXCLUSION
                })
                .collect::<Vec<_>>()
        };
        match self {
            Self::Shape { pred, .. } => vec![false; pred.dims().len()],
            Self::Flow { target, pred, .. } => spread(
                (0..pred.dims().len()).map(|i| near(target, pred, i)).collect(),
                2,
            ),
            Self::ClrRegress { gt, pred, .. } => spread(
                (0..pred.dims().len()).map(|i| near(gt, pred, i)).collect(),
                3,
            ),
            Self::Blend {
                gt,
                sampled,
                regressed,
                weights,
                ..
            } => blend_kink(gt, sampled, regressed, weights),
            Self::Total {
                gt,
                target_flow,
                pred_flow,
                sampled,
                regressed,
                weights,
                ..
            } => {
                let n = gt.dims().len();
                let bk = blend_kink(gt, sampled, regressed, weights);
                let flow = spread((0..n).map(|i| near(target_flow, pred_flow, i)).collect(), 2);
                let reg = spread(
                    (0..n).map(|i| near(gt, regressed, i) || bk[i]).collect(),
                    3,
                );
                [flow, reg, bk].concat()
            }
        }
    }
}

/// Compares the analytic gradient of `instance` against central differences
/// with the given step.
pub fn grad_check(instance: &LossInstance, step: f64) -> Result<GradReport> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Parameter(format!("step must be positive, got {step}")));
    }
    let report = instance.evaluate()?;
    let analytic = instance.analytic(&report);
    let kinks = instance.kinks();
    let base = instance.params();
    let mut probe = base.clone();
    let mut out = GradReport {
        kind: instance.kind(),
        max_rel_err: 0.0,
        max_abs_err_flat: 0.0,
        compared: 0,
        excluded: 0,
    };
    for j in 0..base.len() {
        if kinks[j] {
            out.excluded += 1;
            continue;
        }
        probe[j] = base[j] + step;
        let plus = instance.with_params(&probe)?.evaluate()?.loss;
        probe[j] = base[j] - step;
        let minus = instance.with_params(&probe)?.evaluate()?.loss;
        probe[j] = base[j];
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic[j];
        if a.abs() > MIN_ANALYTIC {
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs());
            out.max_rel_err = out.max_rel_err.max(rel);
            out.compared += 1;
        } else {
            out.max_abs_err_flat = out.max_abs_err_flat.max(numeric.abs());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_kind_passes_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dims = GridDims::cube(3).unwrap();
        for kind in LossKind::ALL {
            let inst = LossInstance::random(kind, dims, &mut rng);
            let r = grad_check(&inst, 1e-5).unwrap();
            assert!(r.compared > 0, "{kind:?}");
            assert!(r.max_rel_err < 1e-4, "{kind:?}: {r:?}");
            assert!(r.max_abs_err_flat < 1e-6, "{kind:?}: {r:?}");
        }
    }

    #[test]
    fn exact_voxels_are_excluded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inst = LossInstance::random(LossKind::Flow, GridDims::cube(4).unwrap(), &mut rng);
        let r = grad_check(&inst, 1e-5).unwrap();
        assert!(r.excluded > 0);
        assert!(r.max_rel_err < 1e-4);
    }

    #[test]
    fn l2_is_exact_to_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = LossInstance::random(LossKind::L2, GridDims::cube(4).unwrap(), &mut rng);
        assert!(grad_check(&inst, 1e-5).unwrap().max_rel_err < 1e-6);
    }

    #[test]
    fn rejects_nonpositive_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let inst = LossInstance::random(LossKind::L2, GridDims::cube(2).unwrap(), &mut rng);
        assert!(grad_check(&inst, 0.0).is_err());
    }
}
