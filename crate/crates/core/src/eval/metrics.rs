//! Image quality metrics on single 2-D planes.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// PSNR reported when the error is numerically zero.
pub const PSNR_CAP_DB: f64 = 99.0;
const PSNR_ZERO_MSE: f64 = 1e-12;

/// Gaussian-window SSIM settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

fn same_len<F>(pred: &[F], gt: &[F]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!(
            "prediction has {} values, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    if gt.is_empty() {
        return Err(Error::Shape("empty image".into()));
    }
    Ok(())
}

pub fn mse<F: Scalar>(pred: &[F], gt: &[F]) -> Result<f64> {
    same_len(pred, gt)?;
    let sum: f64 = pred
        .iter()
        .zip(gt)
        .map(|(&p, &g)| {
            let d = p.as_f64() - g.as_f64();
            d * d
        })
        .sum();
    Ok(sum / gt.len() as f64)
}

/// `max(gt) - min(gt)`.
pub fn dynamic_range<F: Scalar>(gt: &[F]) -> f64 {
    let (lo, hi) = gt.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        let v = v.as_f64();
        (lo.min(v), hi.max(v))
    });
    hi - lo
}

pub fn psnr_from_mse(mse: f64, range: f64) -> Result<f64> {
    if !(range > 0.0) {
        return Err(Error::Degenerate(format!("dynamic range {range} is not positive")));
    }
    if mse < PSNR_ZERO_MSE {
        return Ok(PSNR_CAP_DB);
    }
    Ok(10.0 * (range * range / mse).log10())
}

/// PSNR with the dynamic range taken from the ground truth.
pub fn psnr<F: Scalar>(pred: &[F], gt: &[F]) -> Result<f64> {
    let m = mse(pred, gt)?;
    psnr_from_mse(m, dynamic_range(gt))
}

fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let c = (window as f64 - 1.0) / 2.0;
    let k: Vec<f64> = (0..window)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Valid-mode separable filtering of an `h`×`w` plane.
fn filter_valid(x: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        let src = &x[y * w..(y + 1) * w];
        for ox in 0..ow {
            rows[y * ow + ox] = k.iter().zip(&src[ox..ox + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for oy in 0..oh {
        for ox in 0..ow {
            out[oy * ow + ox] = k
                .iter()
                .enumerate()
                .map(|(i, a)| a * rows[(oy + i) * ow + ox])
                .sum();
        }
    }
    out
}

/// Mean SSIM over all fully contained windows, with an explicit dynamic range.
pub fn ssim_with<F: Scalar>(
    pred: &[F],
    gt: &[F],
    h: usize,
    w: usize,
    range: f64,
    params: SsimParams,
) -> Result<f64> {
    same_len(pred, gt)?;
    if gt.len() != h * w {
        return Err(Error::Shape(format!("{} values for a {h}x{w} plane", gt.len())));
    }
    if h < params.window || w < params.window {
        return Err(Error::Shape(format!(
            "{h}x{w} plane is smaller than the {} window",
            params.window
        )));
    }
    if !(range > 0.0) {
        return Err(Error::Degenerate(format!("dynamic range {range} is not positive")));
    }
    let k = gaussian_kernel(params.window, params.sigma);
    let x: Vec<f64> = pred.iter().map(|v| v.as_f64()).collect();
    let y: Vec<f64> = gt.iter().map(|v| v.as_f64()).collect();
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mx = filter_valid(&x, h, w, &k);
    let my = filter_valid(&y, h, w, &k);
    let mxx = filter_valid(&prod(&x, &x), h, w, &k);
    let myy = filter_valid(&prod(&y, &y), h, w, &k);
    let mxy = filter_valid(&prod(&x, &y), h, w, &k);
    let c1 = (params.k1 * range).powi(2);
    let c2 = (params.k2 * range).powi(2);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cxy = mxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

/// SSIM with default parameters and the ground-truth dynamic range.
pub fn ssim<F: Scalar>(pred: &[F], gt: &[F], h: usize, w: usize) -> Result<f64> {
    ssim_with(pred, gt, h, w, dynamic_range(gt), SsimParams::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let gt: Vec<f64> = (0..16).map(|i| i as f64 / 15.0).collect();
        let shifted: Vec<f64> = gt.iter().map(|v| v + 0.1).collect();
        assert!((mse(&shifted, &gt).unwrap() - 0.01).abs() < 1e-15);
        assert!((psnr(&shifted, &gt).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&gt, &gt).unwrap(), PSNR_CAP_DB);
        assert!((psnr_from_mse(4.0, 2.0).unwrap()).abs() < 1e-12);
        assert!(matches!(psnr(&gt, &[0.5; 16]), Err(Error::Degenerate(_))));
        assert!(matches!(mse(&gt, &gt[..3]), Err(Error::Shape(_))));
    }

    #[test]
    fn ssim_identity_and_anticorrelation() {
        let (h, w) = (16, 16);
        let board: Vec<f64> = (0..h * w).map(|i| (((i / w) / 2 + (i % w) / 2) % 2) as f64).collect();
        assert!((ssim(&board, &board, h, w).unwrap() - 1.0).abs() < 1e-9);
        let inverted: Vec<f64> = board.iter().map(|v| 1.0 - v).collect();
        assert!(ssim(&inverted, &board, h, w).unwrap() < 0.0);
        assert!(matches!(ssim(&board[..100], &board[..100], 10, 10), Err(Error::Shape(_))));
    }
}
