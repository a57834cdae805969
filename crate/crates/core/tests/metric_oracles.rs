use std::collections::HashSet;

use mmsynth::eval::{dice, dynamic_range, mse, psnr, psnr_from_mse, ssim, PSNR_CAP_DB};
use mmsynth::rng::stream_rng;
use mmsynth::{Error, Volume};
use rand::Rng;

/// Direct windowed SSIM with a full 2-D Gaussian kernel.
fn ssim_direct(x: &[f64], y: &[f64], h: usize, w: usize, range: f64) -> f64 {
    let n = 11;
    let sigma = 1.5f64;
    let mut k2 = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let (da, db) = (a as f64 - 5.0, b as f64 - 5.0);
            k2[a * n + b] = (-(da * da + db * db) / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = k2.iter().sum();
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let mut acc = 0.0;
    let mut count = 0;
    for i in 0..=h - n {
        for j in 0..=w - n {
            let (mut ux, mut uy, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for a in 0..n {
                for b in 0..n {
                    let g = k2[a * n + b] / total;
                    let p = x[(i + a) * w + j + b];
                    let q = y[(i + a) * w + j + b];
                    ux += g * p;
                    uy += g * q;
                    xx += g * p * p;
                    yy += g * q * q;
                    xy += g * p * q;
                }
            }
            let vx = xx - ux * ux;
            let vy = yy - uy * uy;
            let cxy = xy - ux * uy;
            acc += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2))
                / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    acc / count as f64
}

fn smooth_pair(h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gt = Vec::with_capacity(h * w);
    let mut pred = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            let (fi, fj) = (i as f64, j as f64);
            let g = (0.3 * fi).sin() * (0.2 * fj).cos() + 0.05 * fi;
            gt.push(g);
            pred.push(g + 0.1 * (1.7 * fi + 0.9 * fj).sin());
        }
    }
    (pred, gt)
}

#[test]
fn mse_and_psnr_match_brute_force() {
    let mut rng = stream_rng(11, 1);
    for _ in 0..120 {
        let (h, w) = (rng.gen_range(2..12), rng.gen_range(2..12));
        let gt: Vec<f64> = (0..h * w).map(|_| rng.gen_range(-2.0..3.0)).collect();
        let pred: Vec<f64> = (0..h * w).map(|_| rng.gen_range(-2.0..3.0)).collect();
        let mut sum = 0.0;
        for i in 0..h {
            for j in 0..w {
                let d = pred[i * w + j] - gt[i * w + j];
                sum += d * d;
            }
        }
        let expected = sum / (h * w) as f64;
        let m = mse(&pred, &gt).unwrap();
        assert!((m - expected).abs() <= 1e-12, "{m} vs {expected}");

        let hi = gt.iter().cloned().fold(f64::MIN, f64::max);
        let lo = gt.iter().cloned().fold(f64::MAX, f64::min);
        let expected_psnr = 10.0 * ((hi - lo) * (hi - lo) / expected).log10();
        assert!((psnr(&pred, &gt).unwrap() - expected_psnr).abs() <= 1e-9);
    }
}

#[test]
fn psnr_is_decreasing_in_mse_and_capped() {
    let mut last = f64::INFINITY;
    for k in 1..50 {
        let p = psnr_from_mse(k as f64 * 0.01, 1.0).unwrap();
        assert!(p < last);
        last = p;
    }
    assert_eq!(psnr_from_mse(1e-13, 1.0).unwrap(), PSNR_CAP_DB);
    assert!(matches!(psnr_from_mse(0.1, 0.0), Err(Error::Degenerate(_))));
}

#[test]
fn ssim_matches_direct_window_oracle() {
    let mut rng = stream_rng(12, 1);
    for case in 0..100 {
        let (h, w) = if case % 10 == 0 { (32, 32) } else { (rng.gen_range(11..20), rng.gen_range(11..20)) };
        let gt: Vec<f64> = (0..h * w).map(|_| rng.gen_range(0.0..1.0)).collect();
        let pred: Vec<f64> = gt.iter().map(|v| v + rng.gen_range(-0.3..0.3)).collect();
        let got = ssim(&pred, &gt, h, w).unwrap();
        let want = ssim_direct(&pred, &gt, h, w, dynamic_range(&gt));
        assert!((got - want).abs() <= 1e-6, "case {case}: {got} vs {want}");
    }
}

#[test]
fn ssim_matches_frozen_reference_values() {
    // scikit-image structural_similarity(gaussian_weights=True, sigma=1.5,
    // use_sample_covariance=False, data_range=max-min of gt)
    for (h, w, want_ssim, want_psnr, want_mse) in [
        (32, 32, 0.954750927529414, 32.7419261573274, 0.004998758030593305),
        (24, 40, 0.9548500203026189, 31.107777652765797, 0.005000098501931895),
    ] {
        let (pred, gt) = smooth_pair(h, w);
        assert!((ssim(&pred, &gt, h, w).unwrap() - want_ssim).abs() <= 1e-6);
        assert!((psnr(&pred, &gt).unwrap() - want_psnr).abs() <= 1e-9);
        assert!((mse(&pred, &gt).unwrap() - want_mse).abs() <= 1e-12);
    }
}

#[test]
fn ssim_properties() {
    let (pred, gt) = smooth_pair(24, 24);
    assert!((ssim(&gt, &gt, 24, 24).unwrap() - 1.0).abs() < 1e-9);
    let r = dynamic_range(&gt);
    let shift = |v: &[f64]| v.iter().map(|x| x + 5.0).collect::<Vec<_>>();
    let same = mmsynth::eval::ssim_with(&shift(&gt), &shift(&gt), 24, 24, r, Default::default()).unwrap();
    assert!((same - 1.0).abs() < 1e-9);
    // the luminance term moves with a common offset unless local means agree
    let a = mmsynth::eval::ssim_with(&pred, &gt, 24, 24, r, Default::default()).unwrap();
    let b = mmsynth::eval::ssim_with(&shift(&pred), &shift(&gt), 24, 24, r, Default::default()).unwrap();
    assert!(a <= 1.0 && b <= 1.0);
    assert!((a - b).abs() < 1e-2);
}

#[test]
fn dice_matches_set_counting() {
    let mut rng = stream_rng(13, 1);
    for _ in 0..150 {
        let dims = [rng.gen_range(1..7), rng.gen_range(1..7), rng.gen_range(1..5)];
        let n = dims.iter().product::<usize>();
        let pd = rng.gen_range(0.0..1.0);
        let gd = rng.gen_range(0.0..1.0);
        let p: Vec<bool> = (0..n).map(|_| rng.gen_bool(pd)).collect();
        let g: Vec<bool> = (0..n).map(|_| rng.gen_bool(gd)).collect();
        let ps: HashSet<usize> = (0..n).filter(|&i| p[i]).collect();
        let gs: HashSet<usize> = (0..n).filter(|&i| g[i]).collect();
        let expected = if ps.is_empty() && gs.is_empty() {
            100.0
        } else {
            100.0 * 2.0 * ps.intersection(&gs).count() as f64 / (ps.len() + gs.len()) as f64
        };
        let pv = Volume::from_vec(dims, p).unwrap();
        let gv = Volume::from_vec(dims, g).unwrap();
        assert_eq!(dice(&pv, &gv).unwrap(), expected);
        assert_eq!(dice(&gv, &pv).unwrap(), expected);
    }
}
