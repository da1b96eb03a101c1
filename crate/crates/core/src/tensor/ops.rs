use serde::{Deserialize, Serialize};

use super::{Dims, Tensor};
use crate::error::{Error, Result};

pub fn leaky_relu(input: &Tensor, slope: f64) -> Tensor {
    input.map(|v| if v >= 0.0 { v } else { slope * v })
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

pub fn sigmoid(input: &Tensor) -> Tensor {
    input.map(|v| 1.0 / (1.0 + (-v).exp()))
}

/// Leaky ReLU with one learned slope per channel.
pub fn prelu(input: &Tensor, slopes: &[f64]) -> Result<Tensor> {
    let [n, c, h, w] = input.shape();
    if slopes.len() != c {
        return Err(Error::shape("prelu", "slope count", c, slopes.len()));
    }
    let mut out = input.clone();
    let hw = h * w;
    for b in 0..n {
        for (ch, &a) in slopes.iter().enumerate() {
            let start = (b * c + ch) * hw;
            for v in &mut out.data_mut()[start..start + hw] {
                if *v < 0.0 {
                    *v *= a;
                }
            }
        }
    }
    Ok(out)
}

/// Elementwise sum of one or more same-shaped tensors, accumulated left to right.
pub fn add(inputs: &[&Tensor]) -> Result<Tensor> {
    let (first, rest) = inputs
        .split_first()
        .ok_or_else(|| Error::invalid("add", "needs at least one input"))?;
    let mut out = (*first).clone();
    for t in rest {
        if t.shape() != out.shape() {
            return Err(Error::shape(
                "add",
                "operand shape",
                format!("{:?}", out.shape()),
                format!("{:?}", t.shape()),
            ));
        }
        for (o, v) in out.data_mut().iter_mut().zip(t.data()) {
            *o += v;
        }
    }
    Ok(out)
}

/// Output dims of [`mul`]: equal shapes, or `rhs` broadcast as `(b, c, 1, 1)`.
pub fn mul_dims(lhs: Dims, rhs: Dims) -> Result<Dims> {
    let broadcast = rhs[0] == lhs[0] && rhs[1] == lhs[1] && rhs[2] == 1 && rhs[3] == 1;
    if lhs == rhs || broadcast {
        Ok(lhs)
    } else {
        Err(Error::shape(
            "mul",
            "operand shape",
            format!("{lhs:?} or per-channel (b, c, 1, 1)"),
            format!("{rhs:?}"),
        ))
    }
}

/// Elementwise product; `rhs` may be a per-channel `(b, c, 1, 1)` scale.
pub fn mul(lhs: &Tensor, rhs: &Tensor) -> Result<Tensor> {
    mul_dims(lhs.shape(), rhs.shape())?;
    if lhs.shape() == rhs.shape() {
        let data = lhs.data().iter().zip(rhs.data()).map(|(a, b)| a * b).collect();
        return Tensor::new(lhs.shape(), data);
    }
    let [_, _, h, w] = lhs.shape();
    let hw = h * w;
    let mut out = lhs.clone();
    for (plane, &s) in out.data_mut().chunks_mut(hw.max(1)).zip(rhs.data()) {
        plane.iter_mut().for_each(|v| *v *= s);
    }
    Ok(out)
}

pub fn concat_dims(inputs: &[Dims]) -> Result<Dims> {
    let first = *inputs
        .first()
        .ok_or_else(|| Error::invalid("concat", "needs at least one input"))?;
    let mut c = 0;
    for d in inputs {
        if d[0] != first[0] || d[2] != first[2] || d[3] != first[3] {
            return Err(Error::shape(
                "concat",
                "non-channel dims",
                format!("{first:?}"),
                format!("{d:?}"),
            ));
        }
        c += d[1];
    }
    Ok([first[0], c, first[2], first[3]])
}

/// Channel-axis concatenation.
pub fn concat(inputs: &[&Tensor]) -> Result<Tensor> {
    let dims: Vec<Dims> = inputs.iter().map(|t| t.shape()).collect();
    let out_dims = concat_dims(&dims)?;
    let [n, _, h, w] = out_dims;
    let hw = h * w;
    let mut data = Vec::with_capacity(super::numel(out_dims));
    for b in 0..n {
        for t in inputs {
            let c = t.channels();
            data.extend_from_slice(&t.data()[b * c * hw..(b + 1) * c * hw]);
        }
    }
    Tensor::new(out_dims, data)
}

pub fn split_dims(input: Dims, sizes: &[usize]) -> Result<Vec<Dims>> {
    let total: usize = sizes.iter().sum();
    if total != input[1] {
        return Err(Error::shape("split", "channels (sum of split sizes)", total, input[1]));
    }
    Ok(sizes.iter().map(|&s| [input[0], s, input[2], input[3]]).collect())
}

/// Channel-axis split into consecutive chunks of the given sizes.
pub fn split(input: &Tensor, sizes: &[usize]) -> Result<Vec<Tensor>> {
    let dims = split_dims(input.shape(), sizes)?;
    let [n, c, h, w] = input.shape();
    let hw = h * w;
    let mut outs = Vec::with_capacity(sizes.len());
    let mut offset = 0;
    for (d, &s) in dims.into_iter().zip(sizes) {
        let mut data = Vec::with_capacity(n * s * hw);
        for b in 0..n {
            let start = (b * c + offset) * hw;
            data.extend_from_slice(&input.data()[start..start + s * hw]);
        }
        outs.push(Tensor::new(d, data)?);
        offset += s;
    }
    Ok(outs)
}

pub fn pool_dims(input: Dims, kernel: usize, stride: usize) -> Result<Dims> {
    if kernel == 0 || stride == 0 {
        return Err(Error::invalid("pool", "kernel and stride must be >= 1"));
    }
    let [n, c, h, w] = input;
    if h < kernel || w < kernel {
        return Err(Error::shape(
            "pool",
            "spatial size",
            format!(">= {kernel}"),
            format!("{h}x{w}"),
        ));
    }
    Ok([n, c, (h - kernel) / stride + 1, (w - kernel) / stride + 1])
}

fn pool(
    input: &Tensor,
    kernel: usize,
    stride: usize,
    reduce: impl Fn(&mut dyn Iterator<Item = f64>) -> f64,
) -> Result<Tensor> {
    let out_dims = pool_dims(input.shape(), kernel, stride)?;
    let [n, c, oh, ow] = out_dims;
    let mut out = Tensor::zeros(out_dims);
    for b in 0..n {
        for ch in 0..c {
            let plane = input.plane(b, ch);
            let w = input.width();
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut it = (0..kernel).flat_map(|ky| {
                        let row = (oy * stride + ky) * w + ox * stride;
                        plane[row..row + kernel].iter().copied()
                    });
                    out.set(b, ch, oy, ox, reduce(&mut it));
                }
            }
        }
    }
    Ok(out)
}

/// Unpadded average pooling with a square window.
pub fn avg_pool(input: &Tensor, kernel: usize, stride: usize) -> Result<Tensor> {
    let k2 = (kernel * kernel) as f64;
    pool(input, kernel, stride, |it| it.sum::<f64>() / k2)
}

/// Unpadded max pooling with a square window.
pub fn max_pool(input: &Tensor, kernel: usize, stride: usize) -> Result<Tensor> {
    pool(input, kernel, stride, |it| it.fold(f64::NEG_INFINITY, f64::max))
}

/// Statistic reduced over the spatial axes by [`global_pool`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolStat {
    Mean,
    /// Population standard deviation.
    Std,
    /// Mean plus standard deviation (contrast-aware channel attention).
    MeanStd,
}

/// Reduces each channel plane to a single value, giving `(b, c, 1, 1)`.
pub fn global_pool(input: &Tensor, stat: PoolStat) -> Result<Tensor> {
    let [n, c, h, w] = input.shape();
    if h * w == 0 {
        return Err(Error::shape(
            "global_pool",
            "spatial size",
            ">= 1x1",
            format!("{h}x{w}"),
        ));
    }
    let count = (h * w) as f64;
    let mut out = Tensor::zeros([n, c, 1, 1]);
    for b in 0..n {
        for ch in 0..c {
            let plane = input.plane(b, ch);
            let mean = plane.iter().sum::<f64>() / count;
            let std = || (plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count).sqrt();
            let v = match stat {
                PoolStat::Mean => mean,
                PoolStat::Std => std(),
                PoolStat::MeanStd => mean + std(),
            };
            out.set(b, ch, 0, 0, v);
        }
    }
    Ok(out)
}
