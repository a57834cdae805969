use rand::Rng;

use crate::image::Image;
use crate::nn::layers::{leaky_relu, leaky_relu_backward, Conv2d, InstanceNorm, NormCache};
use crate::nn::{Grads, ParamSet};
use crate::scalar::Scalar;

/// Convolution, optional instance normalization, then a (leaky) ReLU.
#[derive(Debug, Clone)]
pub(crate) struct ConvBlock {
    pub conv: Conv2d,
    pub norm: Option<InstanceNorm>,
    /// Negative-side slope; `0.0` is a plain ReLU.
    pub slope: f64,
}

pub(crate) struct BlockTape<F> {
    input: Image<F>,
    norm: Option<NormCache<F>>,
    pre_activation: Image<F>,
}

impl ConvBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new<F: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<F>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        norm: bool,
        slope: f64,
        rng: &mut R,
    ) -> Self {
        let conv = Conv2d::new(params, &format!("{name}.conv"), cin, cout, kernel, stride, padding, rng);
        let norm = norm.then(|| InstanceNorm::new(params, &format!("{name}.norm"), cout));
        Self { conv, norm, slope }
    }

    pub fn forward<F: Scalar>(&self, p: &ParamSet<F>, x: &Image<F>) -> Image<F> {
        let a = self.conv.forward(p, x);
        let n = match &self.norm {
            Some(norm) => norm.forward(p, &a).0,
            None => a,
        };
        leaky_relu(&n, self.slope)
    }

    pub fn forward_tape<F: Scalar>(&self, p: &ParamSet<F>, x: Image<F>) -> (Image<F>, BlockTape<F>) {
        let a = self.conv.forward(p, &x);
        let (n, cache) = match &self.norm {
            Some(norm) => {
                let (n, c) = norm.forward(p, &a);
                (n, Some(c))
            }
            None => (a, None),
        };
        let y = leaky_relu(&n, self.slope);
        (
            y,
            BlockTape {
                input: x,
                norm: cache,
                pre_activation: n,
            },
        )
    }

    pub fn backward<F: Scalar>(
        &self,
        p: &ParamSet<F>,
        tape: &BlockTape<F>,
        gy: &Image<F>,
        mut grads: Option<&mut Grads<F>>,
        need_input_grad: bool,
    ) -> Option<Image<F>> {
        let gn = leaky_relu_backward(&tape.pre_activation, gy, self.slope);
        let ga = match (&self.norm, &tape.norm) {
            (Some(norm), Some(cache)) => norm.backward(p, cache, &gn, grads.as_deref_mut()),
            _ => gn,
        };
        self.conv.backward(p, &tape.input, &ga, grads, need_input_grad)
    }
}
