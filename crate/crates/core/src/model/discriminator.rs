//! Patch discriminator producing a grid of real-valued scores.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::layers::Conv2d;
use crate::nn::{Grads, ParamSet};
use crate::scalar::Scalar;
use crate::scenario::MODALITY_COUNT;

use super::block::{BlockTape, ConvBlock};

/// Four stride-2 4×4 convolutions (widths `w, 2w, 4w, 8w`, normalized from the
/// second level on) followed by a 3×3 scoring convolution.
///
/// Grid side for input side `n` is `n` halved (rounding down) four times,
/// i.e. `n / 16` for multiples of 16.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminatorSpec {
    pub input_channels: usize,
    pub levels: usize,
    pub base_width: usize,
}

impl Default for DiscriminatorSpec {
    fn default() -> Self {
        Self {
            input_channels: MODALITY_COUNT,
            levels: 4,
            base_width: 64,
        }
    }
}

impl DiscriminatorSpec {
    pub fn tiny(base_width: usize) -> Self {
        Self {
            base_width,
            ..Self::default()
        }
    }

    pub fn grid_shape(&self, h: usize, w: usize) -> (usize, usize) {
        (h >> self.levels, w >> self.levels)
    }
}

#[derive(Debug, Clone)]
pub struct Discriminator<F> {
    spec: DiscriminatorSpec,
    params: ParamSet<F>,
    blocks: Vec<ConvBlock>,
    score: Conv2d,
}

pub struct DiscriminatorTape<F> {
    blocks: Vec<BlockTape<F>>,
    score_input: Image<F>,
}

impl<F: Scalar> Discriminator<F> {
    pub fn new<R: Rng + ?Sized>(spec: DiscriminatorSpec, rng: &mut R) -> Result<Self> {
        if spec.levels == 0 || spec.base_width == 0 || spec.input_channels != MODALITY_COUNT {
            return Err(Error::Config(format!("invalid discriminator spec {spec:?}")));
        }
        let mut params = ParamSet::default();
        let mut cin = spec.input_channels;
        let mut blocks = Vec::with_capacity(spec.levels);
        for i in 0..spec.levels {
            let cout = spec.base_width << i.min(3);
            blocks.push(ConvBlock::new(&mut params, &format!("d{i}"), cin, cout, 4, 2, 1, i > 0, 0.2, rng));
            cin = cout;
        }
        let score = Conv2d::new(&mut params, "score", cin, 1, 3, 1, 1, rng);
        Ok(Self {
            spec,
            params,
            blocks,
            score,
        })
    }

    pub fn spec(&self) -> &DiscriminatorSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<F> {
        &mut self.params
    }

    fn check(&self, x: &Image<F>) -> Result<()> {
        if x.channels() != self.spec.input_channels {
            return Err(Error::Shape(format!(
                "discriminator expects {} channels, got {}",
                self.spec.input_channels,
                x.channels()
            )));
        }
        let (gh, gw) = self.spec.grid_shape(x.height(), x.width());
        if gh == 0 || gw == 0 {
            return Err(Error::Shape(format!(
                "{}x{} input is too small for {} levels",
                x.height(),
                x.width(),
                self.spec.levels
            )));
        }
        Ok(())
    }

    /// Score grid of shape `1 × grid_h × grid_w`.
    pub fn discriminate(&self, image: &Image<F>) -> Result<Image<F>> {
        self.check(image)?;
        let mut h = image.clone();
        for b in &self.blocks {
            h = b.forward(&self.params, &h);
        }
        Ok(self.score.forward(&self.params, &h))
    }

    pub fn forward_tape(&self, image: &Image<F>) -> Result<(Image<F>, DiscriminatorTape<F>)> {
        self.check(image)?;
        let mut h = image.clone();
        let mut tapes = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (next, t) = b.forward_tape(&self.params, h);
            tapes.push(t);
            h = next;
        }
        let out = self.score.forward(&self.params, &h);
        Ok((
            out,
            DiscriminatorTape {
                blocks: tapes,
                score_input: h,
            },
        ))
    }

    /// Backpropagates `grad_scores`; parameter gradients go to `grads` when given.
    pub fn backward(
        &self,
        tape: &DiscriminatorTape<F>,
        grad_scores: &Image<F>,
        mut grads: Option<&mut Grads<F>>,
        need_input_grad: bool,
    ) -> Option<Image<F>> {
        let p = &self.params;
        let mut g = self
            .score
            .backward(p, &tape.score_input, grad_scores, grads.as_deref_mut(), true)
            .expect("score input grad");
        for (i, b) in self.blocks.iter().enumerate().rev() {
            let need = i > 0 || need_input_grad;
            match b.backward(p, &tape.blocks[i], &g, grads.as_deref_mut(), need) {
                Some(next) => g = next,
                None => return None,
            }
        }
        Some(g)
    }
}
