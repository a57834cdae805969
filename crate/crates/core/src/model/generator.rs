//! Single multi-output encoder–decoder generator with skip connections.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::layers::{concat, split, upsample2, upsample2_backward, add_into, Conv2d};
use crate::nn::{Grads, ParamSet};
use crate::scalar::Scalar;
use crate::scenario::{ScenarioMask, MODALITY_COUNT};

use super::block::{BlockTape, ConvBlock};

/// Architecture of the generator.
///
/// `depth` counts resolution levels: level 0 runs at full resolution and each
/// further level halves it with a stride-2 convolution, so inputs must be
/// divisible by `2^(depth-1)`. Level `i` has `base_width * 2^min(i,3)` channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub input_channels: usize,
    pub output_channels: usize,
    pub depth: usize,
    pub base_width: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            input_channels: MODALITY_COUNT,
            output_channels: MODALITY_COUNT,
            depth: 5,
            base_width: 64,
        }
    }
}

impl GeneratorSpec {
    pub fn tiny(depth: usize, base_width: usize) -> Self {
        Self {
            depth,
            base_width,
            ..Self::default()
        }
    }

    pub fn width(&self, level: usize) -> usize {
        self.base_width << level.min(3)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 || self.base_width == 0 {
            return Err(Error::Config(format!(
                "generator needs depth >= 2 and base_width >= 1 (got {self:?})"
            )));
        }
        if self.input_channels != MODALITY_COUNT || self.output_channels != MODALITY_COUNT {
            return Err(Error::Config("generator maps 4 channels to 4 channels".into()));
        }
        Ok(())
    }

    pub fn check_input(&self, h: usize, w: usize) -> Result<()> {
        let f = 1usize << (self.depth - 1);
        if h == 0 || w == 0 || h % f != 0 || w % f != 0 {
            return Err(Error::Shape(format!(
                "{h}x{w} input is not divisible by {f} (depth {})",
                self.depth
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Generator<F> {
    spec: GeneratorSpec,
    params: ParamSet<F>,
    stem: ConvBlock,
    /// `downs[i-1]` produces level `i`.
    downs: Vec<ConvBlock>,
    /// `ups[i-1]` maps level `i` up to level `i-1`.
    ups: Vec<ConvBlock>,
    head: Conv2d,
}

/// Intermediate activations of one forward pass, consumed by the backward pass.
pub struct GeneratorTape<F> {
    stem: BlockTape<F>,
    downs: Vec<BlockTape<F>>,
    ups: Vec<BlockTape<F>>,
    head_input: Image<F>,
    skip_widths: Vec<usize>,
}

impl<F: Scalar> Generator<F> {
    pub fn new<R: Rng + ?Sized>(spec: GeneratorSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut params = ParamSet::default();
        let stem = ConvBlock::new(&mut params, "stem", spec.input_channels, spec.width(0), 3, 1, 1, true, 0.2, rng);
        let downs = (1..spec.depth)
            .map(|i| {
                ConvBlock::new(
                    &mut params,
                    &format!("down{i}"),
                    spec.width(i - 1),
                    spec.width(i),
                    4,
                    2,
                    1,
                    true,
                    0.2,
                    rng,
                )
            })
            .collect();
        let ups = (1..spec.depth)
            .map(|i| {
                let cin = if i == spec.depth - 1 {
                    spec.width(i)
                } else {
                    2 * spec.width(i)
                };
                ConvBlock::new(&mut params, &format!("up{i}"), cin, spec.width(i - 1), 3, 1, 1, true, 0.0, rng)
            })
            .collect();
        let head = Conv2d::new(&mut params, "head", 2 * spec.width(0), spec.output_channels, 1, 1, 0, rng);
        Ok(Self {
            spec,
            params,
            stem,
            downs,
            ups,
            head,
        })
    }

    pub fn spec(&self) -> &GeneratorSpec {
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
                "generator expects {} channels, got {}",
                self.spec.input_channels,
                x.channels()
            )));
        }
        self.spec.check_input(x.height(), x.width())
    }

    /// Raw network output for an already-masked input.
    pub fn forward(&self, x: &Image<F>) -> Result<Image<F>> {
        self.check(x)?;
        let p = &self.params;
        let mut skips = vec![self.stem.forward(p, x)];
        for down in &self.downs {
            let next = down.forward(p, skips.last().expect("level"));
            skips.push(next);
        }
        let mut d = skips.pop().expect("bottleneck");
        for (i, up) in self.ups.iter().enumerate().rev() {
            let h = up.forward(p, &upsample2(&d));
            d = concat(&h, &skips[i]);
        }
        Ok(self.head.forward(p, &d))
    }

    pub fn forward_tape(&self, x: &Image<F>) -> Result<(Image<F>, GeneratorTape<F>)> {
        self.check(x)?;
        let p = &self.params;
        let (e0, stem) = self.stem.forward_tape(p, x.clone());
        let mut skips = vec![e0];
        let mut downs = Vec::with_capacity(self.downs.len());
        for down in &self.downs {
            let (next, tape) = down.forward_tape(p, skips.last().expect("level").clone());
            skips.push(next);
            downs.push(tape);
        }
        let mut d = skips.pop().expect("bottleneck");
        let mut ups: Vec<Option<BlockTape<F>>> = (0..self.ups.len()).map(|_| None).collect();
        let mut skip_widths = vec![0; self.ups.len()];
        for (i, up) in self.ups.iter().enumerate().rev() {
            let (h, tape) = up.forward_tape(p, upsample2(&d));
            skip_widths[i] = h.channels();
            d = concat(&h, &skips[i]);
            ups[i] = Some(tape);
        }
        let out = self.head.forward(p, &d);
        Ok((
            out,
            GeneratorTape {
                stem,
                downs,
                ups: ups.into_iter().map(|t| t.expect("tape")).collect(),
                head_input: d,
                skip_widths,
            },
        ))
    }

    /// Accumulates parameter gradients of `sum(grad_out * output)` into `grads`.
    pub fn backward(&self, tape: &GeneratorTape<F>, grad_out: &Image<F>, grads: &mut Grads<F>) {
        let p = &self.params;
        let mut gd = self
            .head
            .backward(p, &tape.head_input, grad_out, Some(grads), true)
            .expect("head input grad");
        let levels = self.ups.len();
        let mut skip_grads: Vec<Option<Image<F>>> = (0..levels).map(|_| None).collect();
        for i in 0..levels {
            let (gh, gskip) = split(&gd, tape.skip_widths[i]);
            skip_grads[i] = Some(gskip);
            let gu = self.ups[i]
                .backward(p, &tape.ups[i], &gh, Some(grads), true)
                .expect("up input grad");
            gd = upsample2_backward(&gu);
        }
        // gd now flows into the deepest encoder level.
        let mut g = gd;
        for i in (0..self.downs.len()).rev() {
            let mut gprev = self.downs[i]
                .backward(p, &tape.downs[i], &g, Some(grads), true)
                .expect("down input grad");
            add_into(&mut gprev, skip_grads[i].as_ref().expect("skip grad"));
            g = gprev;
        }
        self.stem.backward(p, &tape.stem, &g, Some(grads), false);
    }

    /// Synthesizes all four channels from `masked_input` in one forward pass.
    pub fn generate(&self, masked_input: &Image<F>, mask: ScenarioMask) -> Result<Image<F>> {
        if mask.present_count() == 0 {
            return Err(Error::Contract("scenario 0000 has no input modality".into()));
        }
        self.forward(masked_input)
    }
}
