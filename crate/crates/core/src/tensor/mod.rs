//! Dense NCHW tensors and the deterministic kernels that operate on them.
//!
//! Everything here works in double precision. Kernels are pure functions; the
//! few that parallelise (convolution) split work over independent output
//! planes so results are bit-identical regardless of thread count.

mod conv;
mod ops;
mod resample;
mod shuffle;

use rand::Rng;

use crate::error::{Error, Result};

pub use conv::{conv2d, Conv2dParams, Padding};
pub use ops::{
    add, avg_pool, concat, concat_dims, global_pool, leaky_relu, max_pool, mul, mul_dims, pool_dims, prelu, relu,
    sigmoid, split, split_dims, PoolStat,
};
pub use resample::{bicubic_downsample, cubic_kernel, interpolate, resize, ResampleMode};
pub use shuffle::{pixel_shuffle, pixel_shuffle_dims, pixel_unshuffle};

/// Four-dimensional shape `(batch, channels, height, width)`.
pub type Dims = [usize; 4];

/// Dense row-major NCHW tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Dims,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Dims, data: Vec<f64>) -> Result<Self> {
        let expected = numel(shape);
        if data.len() != expected {
            return Err(Error::shape("Tensor::new", "data length", expected, data.len()));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Dims) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: Dims, value: f64) -> Self {
        Tensor {
            shape,
            data: vec![value; numel(shape)],
        }
    }

    /// Builds a tensor by evaluating `f(b, c, y, x)` at every position.
    pub fn from_fn(shape: Dims, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let [n, c, h, w] = shape;
        let mut data = Vec::with_capacity(numel(shape));
        for b in 0..n {
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f(b, ch, y, x));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    /// Uniform random values in `[lo, hi)`.
    pub fn random_uniform<R: Rng + ?Sized>(shape: Dims, lo: f64, hi: f64, rng: &mut R) -> Self {
        let data = (0..numel(shape)).map(|_| rng.gen_range(lo..hi)).collect();
        Tensor { shape, data }
    }

    pub fn shape(&self) -> Dims {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        let [_, ch, h, w] = self.shape;
        ((b * ch + c) * h + y) * w + x
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(b, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, y: usize, x: usize, v: f64) {
        let i = self.index(b, c, y, x);
        self.data[i] = v;
    }

    /// Contiguous `h*w` plane for one `(batch, channel)` pair.
    pub fn plane(&self, b: usize, c: usize) -> &[f64] {
        let hw = self.shape[2] * self.shape[3];
        let start = (b * self.shape[1] + c) * hw;
        &self.data[start..start + hw]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshape(self, shape: Dims) -> Result<Tensor> {
        Tensor::new(shape, self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute elementwise difference. Shapes must match.
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::shape(
                "max_abs_diff",
                "shape",
                format!("{:?}", self.shape),
                format!("{:?}", other.shape),
            ));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// `max|self - reference| / max|reference|`, falling back to the absolute
    /// difference when the reference is identically zero.
    pub fn max_rel_diff(&self, reference: &Tensor) -> Result<f64> {
        let diff = self.max_abs_diff(reference)?;
        let scale = reference.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(if scale > 0.0 { diff / scale } else { diff })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn numel(shape: Dims) -> usize {
    shape.iter().product()
}
