use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named, shaped parameter tensors stored as flat vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<F> {
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    values: Vec<Vec<F>>,
}

impl<F: Scalar> Default for ParamSet<F> {
    fn default() -> Self {
        Self {
            names: Vec::new(),
            shapes: Vec::new(),
            values: Vec::new(),
        }
    }
}

impl<F: Scalar> ParamSet<F> {
    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, values: Vec<F>) -> ParamId {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.names.push(name.into());
        self.shapes.push(shape);
        self.values.push(values);
        ParamId(self.values.len() - 1)
    }

    pub fn add_normal<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        mean: f64,
        std: f64,
        rng: &mut R,
    ) -> ParamId {
        let n = shape.iter().product();
        let dist = Normal::new(mean, std).expect("valid normal");
        let values = (0..n).map(|_| F::of(dist.sample(rng))).collect();
        self.add(name, shape, values)
    }

    pub fn add_constant(&mut self, name: impl Into<String>, shape: Vec<usize>, v: f64) -> ParamId {
        let n = shape.iter().product();
        self.add(name, shape, vec![F::of(v); n])
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &[F] {
        &self.values[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn values(&self) -> &[Vec<F>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec<F>] {
        &mut self.values
    }

    pub fn zero_grads(&self) -> Grads<F> {
        Grads(self.values.iter().map(|v| vec![F::zero(); v.len()]).collect())
    }

    /// Replaces values from `(name, shape, data)` triples; names and shapes must match exactly.
    pub fn load(&mut self, tensors: &[(String, Vec<usize>, Vec<f64>)]) -> Result<()> {
        if tensors.len() != self.values.len() {
            return Err(Error::Data(format!(
                "expected {} tensors, found {}",
                self.values.len(),
                tensors.len()
            )));
        }
        for (i, (name, shape, data)) in tensors.iter().enumerate() {
            if name != &self.names[i] || shape != &self.shapes[i] {
                return Err(Error::Data(format!(
                    "tensor {i}: expected {} {:?}, found {name} {shape:?}",
                    self.names[i], self.shapes[i]
                )));
            }
            self.values[i] = data.iter().map(|&v| F::of(v)).collect();
        }
        Ok(())
    }
}

/// Gradient buffers aligned with a [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<F>(pub Vec<Vec<F>>);

impl<F: Scalar> Grads<F> {
    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut [F] {
        &mut self.0[id.0]
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &[F] {
        &self.0[id.0]
    }

    pub fn add_assign(&mut self, other: &Grads<F>) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = *x + *y;
            }
        }
    }

    /// Sums per-sample gradients in slice order.
    pub fn sum_ordered(parts: Vec<Grads<F>>) -> Option<Grads<F>> {
        let mut it = parts.into_iter();
        let mut acc = it.next()?;
        for g in it {
            acc.add_assign(&g);
        }
        Some(acc)
    }
}
