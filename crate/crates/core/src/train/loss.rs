//! Reconstruction and least-squares adversarial objectives with their gradients.

use crate::error::Result;
use crate::image::Image;
use crate::scalar::Scalar;
use crate::scenario::ScenarioMask;

/// Number of pixels the reconstruction loss averages over.
pub fn missing_pixel_count<F: Scalar>(originals: &[Image<F>], masks: &[ScenarioMask]) -> usize {
    originals
        .iter()
        .zip(masks)
        .map(|(o, m)| m.missing_count() * o.plane_len())
        .sum()
}

/// Mean absolute error between `generated` and `originals` over missing channels only.
///
/// Defined as 0 when no channel is missing anywhere in the batch.
pub fn reconstruction_loss<F: Scalar>(
    generated: &[Image<F>],
    originals: &[Image<F>],
    masks: &[ScenarioMask],
) -> Result<f64> {
    let count = missing_pixel_count(originals, masks);
    if count == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for ((g, o), m) in generated.iter().zip(originals).zip(masks) {
        g.ensure_same_shape(o)?;
        for c in m.missing() {
            let c = c.ordinal();
            total += g
                .channel(c)
                .iter()
                .zip(o.channel(c))
                .map(|(&a, &b)| (a - b).abs().as_f64())
                .sum::<f64>();
        }
    }
    Ok(total / count as f64)
}

/// Adds `scale * d|g - o| / dg` on the missing channels of one sample.
pub fn reconstruction_grad_into<F: Scalar>(
    generated: &Image<F>,
    original: &Image<F>,
    mask: ScenarioMask,
    scale: F,
    grad: &mut Image<F>,
) {
    for c in mask.missing() {
        let c = c.ordinal();
        let (g, o) = (generated.channel(c), original.channel(c));
        for ((d, &a), &b) in grad.channel_mut(c).iter_mut().zip(g).zip(o) {
            let diff = a - b;
            let sign = if diff > F::zero() {
                F::one()
            } else if diff < F::zero() {
                -F::one()
            } else {
                F::zero()
            };
            *d = *d + scale * sign;
        }
    }
}

/// Sum of `(score - target)^2` over a score grid.
pub fn squared_error_sum<F: Scalar>(scores: &Image<F>, target: f64) -> f64 {
    scores
        .data()
        .iter()
        .map(|&s| {
            let d = s.as_f64() - target;
            d * d
        })
        .sum()
}

/// Gradient of `scale * sum((score - target)^2)`.
pub fn squared_error_grad<F: Scalar>(scores: &Image<F>, target: f64, scale: f64) -> Image<F> {
    let mut g = scores.clone();
    for v in g.data_mut() {
        *v = F::of(2.0 * scale * (v.as_f64() - target));
    }
    g
}

/// Discriminator objective `0.5·mean((D(real)−1)²) + 0.5·mean(D(fake)²)`.
pub fn discriminator_objective(real_scores: &[f64], fake_scores: &[f64]) -> f64 {
    let mean_sq = |v: &[f64], t: f64| v.iter().map(|s| (s - t) * (s - t)).sum::<f64>() / v.len() as f64;
    0.5 * mean_sq(real_scores, 1.0) + 0.5 * mean_sq(fake_scores, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_mask_has_zero_loss() {
        let g = vec![Image::<f64>::filled(4, 2, 2, 3.0)];
        let o = vec![Image::<f64>::filled(4, 2, 2, 1.0)];
        assert_eq!(reconstruction_loss(&g, &o, &[ScenarioMask::FULL]).unwrap(), 0.0);
        assert_eq!(reconstruction_loss(&o, &o, &["0001".parse().unwrap()]).unwrap(), 0.0);
        // one missing channel off by 2 everywhere
        assert_eq!(reconstruction_loss(&g, &o, &["1110".parse().unwrap()]).unwrap(), 2.0);
    }

    #[test]
    fn equal_scores_closed_form() {
        let s = 0.3;
        assert!((discriminator_objective(&[s], &[s]) - (0.5 * 0.49 + 0.5 * 0.09)).abs() < 1e-15);
    }
}
