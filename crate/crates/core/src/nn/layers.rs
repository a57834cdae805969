//! Single-sample layers with explicit backward passes.
//!
//! Feature maps are [`Image`]s (`channels × height × width`). Every layer is a
//! pure function of its parameters and input, so a batch is processed as
//! independent samples whose parameter gradients are summed afterwards.

use rand::Rng;

use crate::image::Image;
use crate::scalar::Scalar;

use super::params::{Grads, ParamId, ParamSet};

/// Output indices `lo..hi` whose receptive tap `k_off` falls inside the input.
#[inline]
fn valid_range(k_off: usize, pad: usize, stride: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    let lo = if pad > k_off {
        (pad - k_off).div_ceil(stride)
    } else {
        0
    };
    if in_len + pad <= k_off {
        return (0, 0);
    }
    let hi = ((in_len - 1 + pad - k_off) / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<F: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<F>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Self {
        let weight = params.add_normal(
            format!("{name}.weight"),
            vec![out_channels, in_channels, kernel, kernel],
            0.0,
            0.02,
            rng,
        );
        let bias = params.add_constant(format!("{name}.bias"), vec![out_channels], 0.0);
        Self {
            weight,
            bias,
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        }
    }

    pub fn output_len(&self, input: usize) -> usize {
        (input + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn forward<F: Scalar>(&self, p: &ParamSet<F>, x: &Image<F>) -> Image<F> {
        let (cin, h, w) = x.shape();
        assert_eq!(cin, self.in_channels, "conv input channels");
        let (oh, ow) = (self.output_len(h), self.output_len(w));
        let (k, s, pad) = (self.kernel, self.stride, self.padding);
        let wt = p.get(self.weight);
        let bias = p.get(self.bias);
        let mut out = Image::zeros(self.out_channels, oh, ow);
        let xd = x.data();
        let od = out.data_mut();
        for co in 0..self.out_channels {
            let oplane = &mut od[co * oh * ow..(co + 1) * oh * ow];
            oplane.fill(bias[co]);
            for ci in 0..cin {
                let iplane = &xd[ci * h * w..(ci + 1) * h * w];
                for ky in 0..k {
                    let (oy_lo, oy_hi) = valid_range(ky, pad, s, h, oh);
                    for kx in 0..k {
                        let wv = wt[((co * cin + ci) * k + ky) * k + kx];
                        let (ox_lo, ox_hi) = valid_range(kx, pad, s, w, ow);
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        for oy in oy_lo..oy_hi {
                            let iy = oy * s + ky - pad;
                            let irow = &iplane[iy * w..(iy + 1) * w];
                            let orow = &mut oplane[oy * ow + ox_lo..oy * ow + ox_hi];
                            let ix0 = ox_lo * s + kx - pad;
                            if s == 1 {
                                for (o, &i) in orow.iter_mut().zip(&irow[ix0..]) {
                                    *o = *o + wv * i;
                                }
                            } else {
                                for (o, &i) in orow.iter_mut().zip(irow[ix0..].iter().step_by(s)) {
                                    *o = *o + wv * i;
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grads`; returns the input gradient when asked.
    pub fn backward<F: Scalar>(
        &self,
        p: &ParamSet<F>,
        x: &Image<F>,
        gy: &Image<F>,
        grads: Option<&mut Grads<F>>,
        need_input_grad: bool,
    ) -> Option<Image<F>> {
        let (cin, h, w) = x.shape();
        let (_, oh, ow) = gy.shape();
        let (k, s, pad) = (self.kernel, self.stride, self.padding);
        let wt = p.get(self.weight);
        let xd = x.data();
        let gd = gy.data();

        if let Some(grads) = grads {
            {
                let gb = grads.get_mut(self.bias);
                for co in 0..self.out_channels {
                    let sum: F = gd[co * oh * ow..(co + 1) * oh * ow].iter().copied().sum();
                    gb[co] = gb[co] + sum;
                }
            }
            let gw = grads.get_mut(self.weight);
            for co in 0..self.out_channels {
                let gplane = &gd[co * oh * ow..(co + 1) * oh * ow];
                for ci in 0..cin {
                    let iplane = &xd[ci * h * w..(ci + 1) * h * w];
                    for ky in 0..k {
                        let (oy_lo, oy_hi) = valid_range(ky, pad, s, h, oh);
                        for kx in 0..k {
                            let (ox_lo, ox_hi) = valid_range(kx, pad, s, w, ow);
                            if ox_lo >= ox_hi {
                                continue;
                            }
                            let mut acc = F::zero();
                            for oy in oy_lo..oy_hi {
                                let iy = oy * s + ky - pad;
                                let irow = &iplane[iy * w..(iy + 1) * w];
                                let grow = &gplane[oy * ow + ox_lo..oy * ow + ox_hi];
                                let ix0 = ox_lo * s + kx - pad;
                                if s == 1 {
                                    acc = acc
                                        + grow
                                            .iter()
                                            .zip(&irow[ix0..])
                                            .map(|(&g, &i)| g * i)
                                            .sum::<F>();
                                } else {
                                    acc = acc
                                        + grow
                                            .iter()
                                            .zip(irow[ix0..].iter().step_by(s))
                                            .map(|(&g, &i)| g * i)
                                            .sum::<F>();
                                }
                            }
                            let idx = ((co * cin + ci) * k + ky) * k + kx;
                            gw[idx] = gw[idx] + acc;
                        }
                    }
                }
            }
        }

        if !need_input_grad {
            return None;
        }
        let mut gx = Image::zeros(cin, h, w);
        let gxd = gx.data_mut();
        for co in 0..self.out_channels {
            let gplane = &gd[co * oh * ow..(co + 1) * oh * ow];
            for ci in 0..cin {
                let xplane = &mut gxd[ci * h * w..(ci + 1) * h * w];
                for ky in 0..k {
                    let (oy_lo, oy_hi) = valid_range(ky, pad, s, h, oh);
                    for kx in 0..k {
                        let wv = wt[((co * cin + ci) * k + ky) * k + kx];
                        let (ox_lo, ox_hi) = valid_range(kx, pad, s, w, ow);
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        for oy in oy_lo..oy_hi {
                            let iy = oy * s + ky - pad;
                            let ix0 = ox_lo * s + kx - pad;
                            let grow = &gplane[oy * ow + ox_lo..oy * ow + ox_hi];
                            let xrow = &mut xplane[iy * w..(iy + 1) * w];
                            if s == 1 {
                                for (xv, &g) in xrow[ix0..].iter_mut().zip(grow) {
                                    *xv = *xv + wv * g;
                                }
                            } else {
                                for (xv, &g) in xrow[ix0..].iter_mut().step_by(s).zip(grow) {
                                    *xv = *xv + wv * g;
                                }
                            }
                        }
                    }
                }
            }
        }
        Some(gx)
    }
}

/// Per-sample, per-channel normalization with learned scale and shift.
#[derive(Debug, Clone)]
pub struct InstanceNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub channels: usize,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct NormCache<F> {
    xhat: Image<F>,
    inv_std: Vec<F>,
}

impl InstanceNorm {
    pub fn new<F: Scalar>(params: &mut ParamSet<F>, name: &str, channels: usize) -> Self {
        let gamma = params.add_constant(format!("{name}.gamma"), vec![channels], 1.0);
        let beta = params.add_constant(format!("{name}.beta"), vec![channels], 0.0);
        Self {
            gamma,
            beta,
            channels,
            eps: 1e-5,
        }
    }

    pub fn forward<F: Scalar>(&self, p: &ParamSet<F>, x: &Image<F>) -> (Image<F>, NormCache<F>) {
        let (c, _, _) = x.shape();
        let n = F::of(x.plane_len() as f64);
        let eps = F::of(self.eps);
        let gamma = p.get(self.gamma);
        let beta = p.get(self.beta);
        let mut xhat = x.clone();
        let mut y = x.clone();
        let mut inv_std = Vec::with_capacity(c);
        for ch in 0..c {
            let plane = x.channel(ch);
            let mean = plane.iter().copied().sum::<F>() / n;
            let var = plane.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / n;
            let is = F::one() / (var + eps).sqrt();
            inv_std.push(is);
            for ((h, o), &v) in xhat
                .channel_mut(ch)
                .iter_mut()
                .zip(y.channel_mut(ch).iter_mut())
                .zip(plane)
            {
                *h = (v - mean) * is;
                *o = gamma[ch] * *h + beta[ch];
            }
        }
        (y, NormCache { xhat, inv_std })
    }

    pub fn backward<F: Scalar>(
        &self,
        p: &ParamSet<F>,
        cache: &NormCache<F>,
        gy: &Image<F>,
        grads: Option<&mut Grads<F>>,
    ) -> Image<F> {
        let (c, _, _) = gy.shape();
        let n = F::of(gy.plane_len() as f64);
        let gamma = p.get(self.gamma);
        let mut sums = Vec::with_capacity(c);
        for ch in 0..c {
            let g = gy.channel(ch);
            let xh = cache.xhat.channel(ch);
            let sum_g: F = g.iter().copied().sum();
            let sum_gx: F = g.iter().zip(xh).map(|(&a, &b)| a * b).sum();
            sums.push((sum_g, sum_gx));
        }
        if let Some(grads) = grads {
            let gg = grads.get_mut(self.gamma);
            for (ch, &(_, sgx)) in sums.iter().enumerate() {
                gg[ch] = gg[ch] + sgx;
            }
            let gb = grads.get_mut(self.beta);
            for (ch, &(sg, _)) in sums.iter().enumerate() {
                gb[ch] = gb[ch] + sg;
            }
        }
        let mut gx = gy.clone();
        for (ch, &(sg, sgx)) in sums.iter().enumerate() {
            // d xhat = gamma * gy; dx = inv_std / n * (n dxhat - sum dxhat - xhat sum(dxhat xhat))
            let k = gamma[ch] * cache.inv_std[ch] / n;
            let xh = cache.xhat.channel(ch);
            for (o, &h) in gx.channel_mut(ch).iter_mut().zip(xh) {
                *o = k * (n * *o - sg - h * sgx);
            }
        }
        gx
    }
}

pub fn leaky_relu<F: Scalar>(x: &Image<F>, slope: f64) -> Image<F> {
    let s = F::of(slope);
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < F::zero() {
            *v = *v * s;
        }
    }
    y
}

/// Gradient through a leaky ReLU given its pre-activation input.
pub fn leaky_relu_backward<F: Scalar>(pre: &Image<F>, gy: &Image<F>, slope: f64) -> Image<F> {
    let s = F::of(slope);
    let mut g = gy.clone();
    for (gv, &x) in g.data_mut().iter_mut().zip(pre.data()) {
        if x < F::zero() {
            *gv = *gv * s;
        }
    }
    g
}

pub fn upsample2<F: Scalar>(x: &Image<F>) -> Image<F> {
    let (c, h, w) = x.shape();
    Image::from_fn(c, 2 * h, 2 * w, |ch, y, xx| x.get(ch, y / 2, xx / 2))
}

pub fn upsample2_backward<F: Scalar>(gy: &Image<F>) -> Image<F> {
    let (c, h2, w2) = gy.shape();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut g = Image::zeros(c, h, w);
    for ch in 0..c {
        for y in 0..h2 {
            for x in 0..w2 {
                let v = g.get(ch, y / 2, x / 2) + gy.get(ch, y, x);
                g.set(ch, y / 2, x / 2, v);
            }
        }
    }
    g
}

pub fn concat<F: Scalar>(a: &Image<F>, b: &Image<F>) -> Image<F> {
    assert_eq!((a.height(), a.width()), (b.height(), b.width()), "concat spatial");
    let mut data = Vec::with_capacity(a.data().len() + b.data().len());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Image::from_vec(a.channels() + b.channels(), a.height(), a.width(), data).expect("concat shape")
}

/// Splits a channel-concatenated gradient back into its two parts.
pub fn split<F: Scalar>(g: &Image<F>, first_channels: usize) -> (Image<F>, Image<F>) {
    let (c, h, w) = g.shape();
    let cut = first_channels * h * w;
    (
        Image::from_vec(first_channels, h, w, g.data()[..cut].to_vec()).expect("split"),
        Image::from_vec(c - first_channels, h, w, g.data()[cut..].to_vec()).expect("split"),
    )
}

pub fn add_into<F: Scalar>(acc: &mut Image<F>, other: &Image<F>) {
    for (a, &b) in acc.data_mut().iter_mut().zip(other.data()) {
        *a = *a + b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_conv(c: &Conv2d, p: &ParamSet<f64>, x: &Image<f64>) -> Image<f64> {
        let (cin, h, w) = x.shape();
        let (oh, ow) = (c.output_len(h), c.output_len(w));
        let wt = p.get(c.weight);
        let b = p.get(c.bias);
        Image::from_fn(c.out_channels, oh, ow, |co, oy, ox| {
            let mut s = b[co];
            for ci in 0..cin {
                for ky in 0..c.kernel {
                    for kx in 0..c.kernel {
                        let iy = (oy * c.stride + ky) as isize - c.padding as isize;
                        let ix = (ox * c.stride + kx) as isize - c.padding as isize;
                        if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                            s += wt[((co * cin + ci) * c.kernel + ky) * c.kernel + kx]
                                * x.get(ci, iy as usize, ix as usize);
                        }
                    }
                }
            }
            s
        })
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(k, s, pad, h) in &[(3, 1, 1, 7), (4, 2, 1, 8), (1, 1, 0, 5), (3, 1, 1, 1), (4, 2, 1, 2)] {
            let mut p = ParamSet::<f64>::default();
            let conv = Conv2d::new(&mut p, "c", 3, 2, k, s, pad, &mut rng);
            let x = Image::from_fn(3, h, h + 1, |c, y, xx| ((c * 7 + y * 3 + xx) % 5) as f64 - 2.0);
            let got = conv.forward(&p, &x);
            let want = naive_conv(&conv, &p, &x);
            assert_eq!(got.shape(), want.shape());
            for (a, b) in got.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn upsample_backward_is_adjoint() {
        let x = Image::from_fn(2, 3, 4, |c, y, xx| (c + y * xx) as f64);
        let g = Image::from_fn(2, 6, 8, |c, y, xx| (c * 3 + y + 2 * xx) as f64 * 0.1);
        let lhs: f64 = upsample2(&x).data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(upsample2_backward(&g).data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
