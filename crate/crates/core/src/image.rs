//! Dense multi-channel 2-D images and 3-D volumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Channel-major image, laid out as `[channel][row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<F> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<F>,
}

impl<F: Scalar> Image<F> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![F::zero(); channels * height * width],
        }
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: F) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "buffer of {} values cannot hold {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> F,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[F] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [F] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> F {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: F) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn cast<G: Scalar>(&self) -> Image<G> {
        Image {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| G::of(v.as_f64())).collect(),
        }
    }

    pub fn ensure_same_shape(&self, other: &Image<F>) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}

/// Inclusive voxel-index box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl BoundingBox {
    pub fn extent(&self, axis: usize) -> usize {
        self.max[axis] - self.min[axis] + 1
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Axial projection as a 2-D box in (row, col) = (y, x) image coordinates.
    pub fn axial(&self) -> Box2d {
        Box2d {
            y0: self.min[1],
            y1: self.max[1],
            x0: self.min[0],
            x1: self.max[0],
        }
    }
}

/// Inclusive 2-D box in image (row, col) coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Box2d {
    pub y0: usize,
    pub y1: usize,
    pub x0: usize,
    pub x1: usize,
}

impl Box2d {
    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }
}

/// Scalar volume with NIfTI (Fortran) ordering: `x` varies fastest, then `y`, then `z`.
///
/// An axial slice `z` is therefore one contiguous `dims[0] * dims[1]` block, read
/// as an image with `dims[1]` rows (y) and `dims[0]` columns (x).
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    dims: [usize; 3],
    data: Vec<T>,
}

impl<T: Copy> Volume<T> {
    pub fn new(dims: [usize; 3], fill: T) -> Self {
        Self {
            dims,
            data: vec![fill; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<T>) -> Result<Self> {
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::Shape(format!(
                "buffer of {} voxels cannot hold {dims:?}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: T) {
        let i = self.index(x, y, z);
        self.data[i] = v;
    }

    pub fn slice_len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn axial(&self, z: usize) -> &[T] {
        let n = self.slice_len();
        &self.data[z * n..(z + 1) * n]
    }

    pub fn axial_mut(&mut self, z: usize) -> &mut [T] {
        let n = self.slice_len();
        &mut self.data[z * n..(z + 1) * n]
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(&T) -> U) -> Volume<U> {
        Volume {
            dims: self.dims,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn ensure_same_dims<U>(&self, other: &Volume<U>) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }
}

/// Stacks the axial slice `z` of four volumes into a 4-channel image (rows = y, cols = x).
pub fn stack_axial<F: Scalar>(volumes: &[Volume<F>; 4], z: usize) -> Image<F> {
    let [nx, ny, _] = volumes[0].dims();
    let mut data = Vec::with_capacity(4 * nx * ny);
    for v in volumes {
        data.extend_from_slice(v.axial(z));
    }
    Image::from_vec(4, ny, nx, data).expect("axial stack shape")
}
