//! Direct optimization of prediction volumes against a synthetic scene.
//!
//! Shape probabilities are parameterized by logits. Every step is scaled per
//! voxel by the size of the set the loss averages it over, so each voxel
//! moves at a rate independent of grid size. Color parameters use an
//! exponentially decaying step because the norm losses have constant-length
//! gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camera::Camera;
use crate::flow::{target_flow, FlowConfig, DEFAULT_DELTA_COLOR};
use crate::losses::{cross_entropy_loss, l2_shape_loss, msfcel, total_color_loss, ColorLossInputs, LossKind, LossTerm};
use crate::pnm::quantize_view;
use crate::sampling::{sample_colors, SampleMode};
use crate::synth::render_view;
use crate::volumes::{
    extract_surface, ColorVolume, FlowVolume, Grid, ShapeVolume, VoxelFrame, WeightVolume,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DemoConfig {
    pub iters: usize,
    pub lr: f64,
    /// One of `Msfcel`, `CrossEntropy` or `L2`.
    pub shape_loss: LossKind,
    /// Per-iteration decay of the color step.
    pub color_decay: f64,
    /// Pixel distance covered by a unit color step on the flow.
    pub flow_step_px: f64,
    /// Half-width of the uniform noise added to the initial flows, in pixels.
    pub flow_noise: f64,
    /// Start the flows at the target instead of the projections.
    pub flow_at_target: bool,
    pub sample_mode: SampleMode,
    pub delta_color: f64,
    pub seed: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            iters: 500,
            lr: 0.5,
            shape_loss: LossKind::Msfcel,
            color_decay: 0.99,
            flow_step_px: 16.0,
            flow_noise: 2.0,
            flow_at_target: false,
            sample_mode: SampleMode::Bilinear,
            delta_color: DEFAULT_DELTA_COLOR,
            seed: 17,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    /// Shape loss before every step plus the final value.
    pub shape_losses: Vec<f64>,
    /// Total color loss, same layout.
    pub color_losses: Vec<f64>,
    /// `[L_flow, L_clr_regress, L_blend]` per entry of `color_losses`.
    pub color_terms: Vec<[f64; 3]>,
    pub pred_shape: ShapeVolume,
    pub flow: FlowVolume,
    pub target_flow: FlowVolume,
    pub regressed: ColorVolume,
    pub weights: WeightVolume,
}

impl FitReport {
    pub fn to_kv(&self) -> String {
        let first = |v: &[f64]| v.first().copied().unwrap_or(f64::NAN);
        let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
        format!(
            "iters={}\nshape_loss_initial={}\nshape_loss_final={}\ncolor_loss_initial={}\ncolor_loss_final={}\n",
            self.shape_losses.len() - 1,
            first(&self.shape_losses),
            last(&self.shape_losses),
            first(&self.color_losses),
            last(&self.color_losses),
        )
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn check_finite(loss: f64, iteration: usize) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Divergence { iteration })
    }
}

/// Gradient descent on shape logits. Returns the loss trajectory and the
/// final prediction.
pub fn fit_shape(gt: &ShapeVolume, cfg: &DemoConfig) -> Result<(Vec<f64>, ShapeVolume)> {
    let dims = gt.dims();
    let occupied = gt.occupied_count();
    let (p_count, n_count) = (occupied as f64, (dims.len() - occupied) as f64);
    let loss_fn = match cfg.shape_loss {
        LossKind::Msfcel => msfcel,
        LossKind::CrossEntropy => cross_entropy_loss,
        LossKind::L2 => l2_shape_loss,
        other => {
            return Err(Error::Parameter(format!(
                "{} is not a shape loss",
                other.name()
            )))
        }
    };
    let scale: Vec<f64> = (0..dims.len())
        .map(|i| match cfg.shape_loss {
            LossKind::Msfcel if gt.is_occupied(i) => p_count,
            LossKind::Msfcel => n_count,
            _ => 1.0,
        })
        .collect();

    let mut logits = vec![0.0f64; dims.len()];
    let mut losses = Vec::with_capacity(cfg.iters + 1);
    let predict = |z: &[f64]| ShapeVolume::prediction(dims, z.iter().map(|&v| sigmoid(v)).collect());
    for it in 0..=cfg.iters {
        if logits.iter().any(|z| z.is_nan()) {
            return Err(Error::Divergence { iteration: it });
        }
        let pred = predict(&logits)?;
        let report = loss_fn(gt, &pred)?;
        losses.push(check_finite(report.loss, it)?);
        if it == cfg.iters {
            return Ok((losses, pred));
        }
        let grad = report.occupancy_grad().unwrap();
        for (i, z) in logits.iter_mut().enumerate() {
            let p = pred.values()[i];
            *z -= cfg.lr * scale[i] * grad[i] * p * (1.0 - p);
        }
    }
    unreachable!()
}

/// Runs both fits. The view is rendered from `cam` and quantized to 8 bits
/// as it would be after a PPM round trip.
pub fn direct_fit_demo(
    shape: &ShapeVolume,
    color: &ColorVolume,
    frame: &VoxelFrame,
    cam: &Camera,
    cfg: &DemoConfig,
) -> Result<FitReport> {
    if cfg.iters == 0 {
        return Err(Error::Parameter("iters must be at least 1".into()));
    }
    if cfg.lr.is_nan() || cfg.lr <= 0.0 {
        return Err(Error::Parameter(format!("lr must be positive, got {}", cfg.lr)));
    }
    shape.require_ground_truth("demo shape")?;
    let (shape_losses, pred_shape) = fit_shape(shape, cfg)?;

    let dims = shape.dims();
    let surf = extract_surface(shape);
    let view = quantize_view(&render_view(cam, shape, color, frame)?);
    let flow_cfg = FlowConfig {
        delta_color: cfg.delta_color,
        frame: *frame,
    };
    let target = target_flow(cam, shape, color, &surf, &view, &flow_cfg)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut flow = FlowVolume::zeros(dims);
    for i in surf.iter() {
        let start = if cfg.flow_at_target {
            target[i]
        } else {
            cam.clamp_uv(cam.project(frame.center(dims.coords(i)))?.uv())
        };
        flow[i] = start.map(|c| {
            if cfg.flow_noise > 0.0 {
                c + rng.gen_range(-cfg.flow_noise..=cfg.flow_noise)
            } else {
                c
            }
        });
    }
    let mut regressed = ColorVolume::filled(dims, [0.5; 3]);
    let mut weights: WeightVolume = Grid::filled(dims, 0.5);
    let s = surf.len() as f64;

    let mut color_losses = Vec::with_capacity(cfg.iters + 1);
    let mut color_terms = Vec::with_capacity(cfg.iters + 1);
    let mut step = cfg.lr;
    for it in 0..=cfg.iters {
        let sampled = sample_colors(&view, &flow, &surf, cfg.sample_mode)?;
        let report = total_color_loss(&ColorLossInputs {
            gt_color: color,
            target_flow: &target,
            pred_flow: &flow,
            sampled: &sampled,
            regressed: &regressed,
            weights: &weights,
            surf: &surf,
        })?;
        color_losses.push(check_finite(report.loss, it)?);
        color_terms.push([
            report.term(LossTerm::Flow).unwrap(),
            report.term(LossTerm::ClrRegress).unwrap(),
            report.term(LossTerm::Blend).unwrap(),
        ]);
        if it == cfg.iters {
            break;
        }
        let (gf, gr, gw) = (
            report.flow_grad().unwrap(),
            report.regressed_grad().unwrap(),
            report.weights_grad().unwrap(),
        );
        for i in surf.iter() {
            for k in 0..2 {
                flow[i][k] -= step * s * cfg.flow_step_px * gf[i][k];
            }
            for k in 0..3 {
                regressed[i][k] = (regressed[i][k] - step * s * gr[i][k]).clamp(0.0, 1.0);
            }
            weights[i] = (weights[i] - step * s * gw[i]).clamp(0.0, 1.0);
        }
        step *= cfg.color_decay;
    }

    Ok(FitReport {
        shape_losses,
        color_losses,
        color_terms,
        pred_shape,
        flow,
        target_flow: target,
        regressed,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;
    use crate::synth::{gen_scene, make_azimuth_cameras, SceneSpec};
    use proptest::prelude::*;

    fn small_scene() -> (ShapeVolume, ColorVolume, VoxelFrame, Camera) {
        let spec = SceneSpec::parse(
            "dims 8 8 8\nbox 2 2 2 6 6 6 0.8 0.2 0.2\nbox 3 3 1 5 5 2 0.2 0.2 0.8\n",
        )
        .unwrap();
        let (shape, color) = gen_scene(&spec, 0).unwrap();
        let cam = make_azimuth_cameras(
            12,
            20.0,
            30.0,
            &spec.dims,
            &spec.frame,
            Intrinsics::centered(120.0, 48),
        )
        .unwrap()
        .remove(1);
        (shape, color, spec.frame, cam)
    }

    #[test]
    fn flows_started_at_target_stay_there() {
        let (shape, color, frame, cam) = small_scene();
        let cfg = DemoConfig {
            iters: 20,
            flow_noise: 0.0,
            flow_at_target: true,
            ..DemoConfig::default()
        };
        let r = direct_fit_demo(&shape, &color, &frame, &cam, &cfg).unwrap();
        assert!(r.color_terms.iter().all(|t| t[0] == 0.0));
        assert_eq!(r.flow, r.target_flow);
    }

    #[test]
    fn weights_rise_where_sampling_is_exact() {
        let (shape, color, frame, cam) = small_scene();
        let cfg = DemoConfig {
            iters: 5,
            flow_noise: 0.0,
            flow_at_target: true,
            ..DemoConfig::default()
        };
        let r = direct_fit_demo(&shape, &color, &frame, &cam, &cfg).unwrap();
        let surf = extract_surface(&shape);
        let view = quantize_view(&render_view(&cam, &shape, &color, &frame).unwrap());
        let sampled = sample_colors(&view, &r.target_flow, &surf, SampleMode::Bilinear).unwrap();
        let mut exact = 0;
        for i in surf.iter() {
            let err: f64 = (0..3).map(|k| (sampled[i][k] - color[i][k]).abs()).sum();
            if err < 1e-9 {
                exact += 1;
                assert!(r.weights[i] > 0.5, "voxel {i}: {}", r.weights[i]);
            }
        }
        assert!(exact > 0);
    }

    #[test]
    fn demo_scene_shape_fit_converges() {
        let spec = crate::synth::preset("demo").unwrap();
        let (shape, _) = gen_scene(&spec, 17).unwrap();
        let cfg = DemoConfig { iters: 200, ..DemoConfig::default() };
        let (losses, _) = fit_shape(&shape, &cfg).unwrap();
        assert!(losses[200] < 0.01 * losses[0], "{} -> {}", losses[0], losses[200]);
    }

    #[test]
    fn rejects_bad_config() {
        let (shape, color, frame, cam) = small_scene();
        for cfg in [
            DemoConfig { iters: 0, ..DemoConfig::default() },
            DemoConfig { lr: 0.0, ..DemoConfig::default() },
            DemoConfig { shape_loss: LossKind::Blend, ..DemoConfig::default() },
        ] {
            assert!(direct_fit_demo(&shape, &color, &frame, &cam, &cfg).is_err());
        }
    }

    #[test]
    fn huge_step_reports_divergence() {
        let (shape, ..) = small_scene();
        let cfg = DemoConfig {
            lr: f64::INFINITY,
            iters: 3,
            ..DemoConfig::default()
        };
        assert!(matches!(fit_shape(&shape, &cfg), Err(Error::Divergence { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn l2_descent_is_monotone(occ in proptest::collection::vec(any::<bool>(), 64), lr in 0.01f64..0.5) {
            let dims = crate::volumes::GridDims::cube(4).unwrap();
            let gt = ShapeVolume::from_occupancy(dims, |c| occ[dims.index(c[0], c[1], c[2])]);
            let cfg = DemoConfig { iters: 60, lr, shape_loss: LossKind::L2, ..DemoConfig::default() };
            let (losses, _) = fit_shape(&gt, &cfg).unwrap();
            for w in losses[10..].windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
            }
        }
    }
}
