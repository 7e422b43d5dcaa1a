use crate::volumes::{Grid, SurfaceIndex, Voxel};
use crate::{Error, Result};

/// Norms at or below this get a zero subgradient.
pub const EPS_NORM: f64 = 1e-12;

/// `(1/S) * sum ||target_i - pred_i||_2` over the surface, and its gradient
/// with respect to `pred`. Sums run in surface-index order.
pub fn mean_norm_loss<const N: usize>(
    target: &Grid<[f64; N]>,
    pred: &Grid<[f64; N]>,
    surf: &SurfaceIndex,
) -> Result<(f64, Grid<[f64; N]>)>
where
    [f64; N]: Voxel,
{
    target.dims().ensure_eq(&pred.dims())?;
    if surf.is_empty() {
        return Err(Error::EmptySurface);
    }
    let scale = 1.0 / surf.len() as f64;
    let mut grad = Grid::<[f64; N]>::zeros(pred.dims());
    let mut total = 0.0;
    for i in surf.iter() {
        let diff: [f64; N] = std::array::from_fn(|k| pred[i][k] - target[i][k]);
        let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        total += norm;
        if norm > EPS_NORM {
            grad[i] = diff.map(|d| scale * d / norm);
        }
    }
    Ok((total * scale, grad))
}
