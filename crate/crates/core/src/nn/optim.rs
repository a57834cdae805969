use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::params::{Grads, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adaptive-moment optimizer state for one [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Vec<F>>,
    pub second_moment: Vec<Vec<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(config: AdamConfig, params: &ParamSet<F>) -> Self {
        let zeros = || params.values().iter().map(|v| vec![F::zero(); v.len()]).collect();
        Self {
            config,
            step: 0,
            first_moment: zeros(),
            second_moment: zeros(),
        }
    }

    pub fn update(&mut self, params: &mut ParamSet<F>, grads: &Grads<F>) {
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let b1 = F::of(c.beta1);
        let b2 = F::of(c.beta2);
        let one = F::one();
        let lr = F::of(c.lr);
        let eps = F::of(c.eps);
        let corr1 = F::of(1.0 - c.beta1.powi(t));
        let corr2 = F::of(1.0 - c.beta2.powi(t));
        for (((p, g), m), v) in params
            .values_mut()
            .iter_mut()
            .zip(&grads.0)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            for (((pi, &gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (one - b1) * gi;
                *vi = b2 * *vi + (one - b2) * gi * gi;
                let mhat = *mi / corr1;
                let vhat = *vi / corr2;
                *pi = *pi - lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = ParamSet::<f64>::default();
        let id = p.add("w", vec![2], vec![1.0, -1.0]);
        let mut adam = Adam::new(AdamConfig { lr: 0.1, ..Default::default() }, &p);
        let mut g = p.zero_grads();
        g.get_mut(id).copy_from_slice(&[3.0, -0.5]);
        adam.update(&mut p, &g);
        assert!((p.get(id)[0] - 0.9).abs() < 1e-6);
        assert!((p.get(id)[1] + 0.9).abs() < 1e-6);
    }
}
