//! Surface color losses: regression, blending and their sum with the flow
//! loss.

use super::norm::{mean_norm_loss, EPS_NORM};
use super::{Gradient, LossReport, LossTerm};
use crate::sampling::blend_voxel;
use crate::volumes::{ColorVolume, FlowVolume, SurfaceIndex, WeightVolume};
use crate::{Error, Result};

/// Mean RGB distance between ground truth and regressed colors on the
/// surface.
pub fn clr_regress_loss(
    gt_color: &ColorVolume,
    pred_color: &ColorVolume,
    surf: &SurfaceIndex,
) -> Result<LossReport> {
    let (loss, grad) = mean_norm_loss(gt_color, pred_color, surf)?;
    Ok(LossReport {
        loss,
        terms: vec![(LossTerm::ClrRegress, loss)],
        grads: vec![Gradient::Regressed(grad)],
    })
}

/// Mean RGB distance between ground truth and the blend of sampled and
/// regressed colors. Gradients are reported for the weights and for the
/// regressed colors; sampled colors are treated as constants.
pub fn blend_loss(
    gt_color: &ColorVolume,
    sampled: &ColorVolume,
    regressed: &ColorVolume,
    weights: &WeightVolume,
    surf: &SurfaceIndex,
) -> Result<LossReport> {
    let dims = gt_color.dims();
    dims.ensure_eq(&sampled.dims())?;
    dims.ensure_eq(&regressed.dims())?;
    dims.ensure_eq(&weights.dims())?;
    if surf.is_empty() {
        return Err(Error::EmptySurface);
    }
    let scale = 1.0 / surf.len() as f64;
    let mut grad_w = WeightVolume::zeros(dims);
    let mut grad_r = ColorVolume::zeros(dims);
    let mut total = 0.0;
    for i in surf.iter() {
        let w = weights[i];
        let b = blend_voxel(sampled[i], regressed[i], w);
        let diff: [f64; 3] = std::array::from_fn(|k| b[k] - gt_color[i][k]);
        let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        total += norm;
        if norm > EPS_NORM {
            let unit = diff.map(|d| d / norm);
            grad_w[i] = scale
                * (0..3)
                    .map(|k| unit[k] * (sampled[i][k] - regressed[i][k]))
                    .sum::<f64>();
            grad_r[i] = unit.map(|u| scale * (1.0 - w) * u);
        }
    }
    let loss = total * scale;
    Ok(LossReport {
        loss,
        terms: vec![(LossTerm::Blend, loss)],
        grads: vec![Gradient::Weights(grad_w), Gradient::Regressed(grad_r)],
    })
}

/// Everything the combined color objective reads.
#[derive(Clone, Copy, Debug)]
pub struct ColorLossInputs<'a> {
    pub gt_color: &'a ColorVolume,
    pub target_flow: &'a FlowVolume,
    pub pred_flow: &'a FlowVolume,
    pub sampled: &'a ColorVolume,
    pub regressed: &'a ColorVolume,
    pub weights: &'a WeightVolume,
    pub surf: &'a SurfaceIndex,
}

/// `L_flow + L_clr_regress + L_blend`, with the three terms reported and
/// gradients for flow, regressed colors and weights.
pub fn total_color_loss(inputs: &ColorLossInputs<'_>) -> Result<LossReport> {
    let (flow, flow_grad) = mean_norm_loss(inputs.target_flow, inputs.pred_flow, inputs.surf)?;
    let regress = clr_regress_loss(inputs.gt_color, inputs.regressed, inputs.surf)?;
    let blend = blend_loss(
        inputs.gt_color,
        inputs.sampled,
        inputs.regressed,
        inputs.weights,
        inputs.surf,
    )?;

    let mut grad_r = regress.regressed_grad().unwrap().clone();
    for (g, b) in grad_r
        .as_mut_slice()
        .iter_mut()
        .zip(blend.regressed_grad().unwrap().as_slice())
    {
        for k in 0..3 {
            g[k] += b[k];
        }
    }
    let grad_w = blend.weights_grad().unwrap().clone();

    Ok(LossReport {
        loss: flow + regress.loss + blend.loss,
        terms: vec![
            (LossTerm::Flow, flow),
            (LossTerm::ClrRegress, regress.loss),
            (LossTerm::Blend, blend.loss),
        ],
        grads: vec![
            Gradient::Flow(flow_grad),
            Gradient::Regressed(grad_r),
            Gradient::Weights(grad_w),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volumes::GridDims;

    fn one() -> (GridDims, SurfaceIndex) {
        (
            GridDims::new(1, 1, 1).unwrap(),
            SurfaceIndex::from_sorted(vec![0]).unwrap(),
        )
    }

    #[test]
    fn regress_examples() {
        let (dims, surf) = one();
        let gt = ColorVolume::filled(dims, [1.0, 0.0, 0.0]);
        assert_eq!(clr_regress_loss(&gt, &gt, &surf).unwrap().loss, 0.0);
        let black = ColorVolume::zeros(dims);
        assert_eq!(clr_regress_loss(&gt, &black, &surf).unwrap().loss, 1.0);

        let dims = GridDims::new(4, 1, 1).unwrap();
        let surf = SurfaceIndex::from_sorted(vec![0, 1, 3]).unwrap();
        let gt = ColorVolume::filled(dims, [0.5, 0.2, 0.7]);
        let off = ColorVolume::filled(dims, [0.6, 0.3, 0.8]);
        let l = clr_regress_loss(&gt, &off, &surf).unwrap().loss;
        assert!((l - 0.1 * 3f64.sqrt()).abs() < 1e-12);
        assert!((l - 0.173205).abs() < 1e-6);
        assert!(clr_regress_loss(&gt, &off, &SurfaceIndex::default()).is_err());
    }

    #[test]
    fn blend_examples() {
        let (dims, surf) = one();
        let gt = ColorVolume::filled(dims, [0.2, 0.4, 0.9]);
        let regressed = ColorVolume::filled(dims, [0.5; 3]);
        let r = blend_loss(&gt, &gt, &regressed, &WeightVolume::filled(dims, 1.0), &surf).unwrap();
        assert_eq!(r.loss, 0.0);

        let same = ColorVolume::filled(dims, [0.1, 0.1, 0.1]);
        let a = blend_loss(&gt, &same, &same, &WeightVolume::filled(dims, 0.2), &surf).unwrap();
        let b = blend_loss(&gt, &same, &same, &WeightVolume::filled(dims, 0.9), &surf).unwrap();
        assert_eq!(a.loss, b.loss);
        assert_eq!(a.weights_grad().unwrap()[0], 0.0);
    }

    #[test]
    fn weight_gradient_pushes_toward_exact_source() {
        let (dims, surf) = one();
        let gt = ColorVolume::filled(dims, [0.2, 0.4, 0.9]);
        let wrong = ColorVolume::filled(dims, [0.9, 0.9, 0.1]);
        let r = blend_loss(&gt, &gt, &wrong, &WeightVolume::filled(dims, 0.5), &surf).unwrap();
        // Descending the gradient raises w toward the exact sampled color.
        assert!(r.weights_grad().unwrap()[0] < 0.0);
    }

    #[test]
    fn total_is_sum_of_parts() {
        let dims = GridDims::new(3, 1, 1).unwrap();
        let surf = SurfaceIndex::from_sorted(vec![0, 1, 2]).unwrap();
        // Flow off by 0.5 px, regression off by 0.2 along red, blend off by
        // 0.1 along green.
        let target = FlowVolume::filled(dims, [4.0, 4.0]);
        let pred = FlowVolume::filled(dims, [4.0, 4.5]);
        let gt = ColorVolume::filled(dims, [0.5; 3]);
        let regressed = ColorVolume::filled(dims, [0.7, 0.5, 0.5]);
        let sampled = ColorVolume::filled(dims, [0.5, 0.6, 0.5]);
        let weights = WeightVolume::filled(dims, 1.0);
        let inputs = ColorLossInputs {
            gt_color: &gt,
            target_flow: &target,
            pred_flow: &pred,
            sampled: &sampled,
            regressed: &regressed,
            weights: &weights,
            surf: &surf,
        };
        let r = total_color_loss(&inputs).unwrap();
        assert!((r.term(LossTerm::Flow).unwrap() - 0.5).abs() < 1e-12);
        assert!((r.term(LossTerm::ClrRegress).unwrap() - 0.2).abs() < 1e-12);
        assert!((r.term(LossTerm::Blend).unwrap() - 0.1).abs() < 1e-12);
        assert!((r.loss - 0.8).abs() < 1e-12);

        let parts = mean_norm_loss(&target, &pred, &surf).unwrap().0
            + clr_regress_loss(&gt, &regressed, &surf).unwrap().loss
            + blend_loss(&gt, &sampled, &regressed, &weights, &surf).unwrap().loss;
        assert!((r.loss - parts).abs() <= 1e-12 * parts);

        let perfect = ColorLossInputs {
            pred_flow: &target,
            sampled: &gt,
            regressed: &gt,
            ..inputs
        };
        assert_eq!(total_color_loss(&perfect).unwrap().loss, 0.0);
    }
}
