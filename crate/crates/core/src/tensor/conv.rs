use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dims, Tensor};
use crate::error::{Error, Result};

/// Per-side zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Padding {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Padding {
    pub fn uniform(p: usize) -> Self {
        Padding {
            top: p,
            bottom: p,
            left: p,
            right: p,
        }
    }

    /// Padding that keeps spatial size for an odd `kh x kw` kernel at stride 1.
    pub fn same(kh: usize, kw: usize) -> Self {
        Padding {
            top: kh / 2,
            bottom: kh / 2,
            left: kw / 2,
            right: kw / 2,
        }
    }
}

/// Weights, optional bias, and geometry of one 2-D convolution.
///
/// `weight` is laid out `(c_out, c_in / groups, k_h, k_w)`. The kernel is
/// applied as a cross-correlation (no flip).
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2dParams {
    pub weight: Tensor,
    pub bias: Option<Vec<f64>>,
    pub stride: usize,
    pub padding: Padding,
    pub dilation: usize,
    pub groups: usize,
}

impl Conv2dParams {
    /// Zero-initialised parameters with the given geometry.
    pub fn zeros(c_in: usize, c_out: usize, (kh, kw): (usize, usize), bias: bool, padding: Padding) -> Self {
        Conv2dParams {
            weight: Tensor::zeros([c_out, c_in, kh, kw]),
            bias: bias.then(|| vec![0.0; c_out]),
            stride: 1,
            padding,
            dilation: 1,
            groups: 1,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_dilation(mut self, dilation: usize) -> Self {
        self.dilation = dilation;
        self
    }

    /// Sets `groups`, shrinking the weight's input-channel axis accordingly.
    pub fn with_groups(mut self, groups: usize) -> Self {
        let [co, ci, kh, kw] = self.weight.shape();
        let full_in = ci * self.groups;
        self.groups = groups;
        self.weight = Tensor::zeros([co, full_in / groups.max(1), kh, kw]);
        self
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1] * self.groups
    }

    pub fn kernel_size(&self) -> (usize, usize) {
        let s = self.weight.shape();
        (s[2], s[3])
    }

    /// Weight plus bias element count.
    pub fn num_params(&self) -> usize {
        self.weight.numel() + self.bias.as_ref().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let [co, cig, kh, kw] = self.weight.shape();
        if self.groups == 0 {
            return Err(Error::invalid("conv2d", "groups must be >= 1"));
        }
        if co % self.groups != 0 {
            return Err(Error::shape(
                "conv2d",
                "c_out (divisible by groups)",
                format!("multiple of {}", self.groups),
                co,
            ));
        }
        if cig == 0 && co > 0 {
            return Err(Error::shape("conv2d", "c_in / groups", ">= 1", 0));
        }
        if kh == 0 || kw == 0 {
            return Err(Error::shape("conv2d", "kernel size", ">= 1", format!("{kh}x{kw}")));
        }
        if self.stride == 0 {
            return Err(Error::invalid("conv2d", "stride must be >= 1"));
        }
        if self.dilation == 0 {
            return Err(Error::invalid("conv2d", "dilation must be >= 1"));
        }
        if let Some(b) = &self.bias {
            if b.len() != co {
                return Err(Error::shape("conv2d", "bias length", co, b.len()));
            }
        }
        Ok(())
    }

    /// Output spatial size for an `h x w` input.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (kh, kw) = self.kernel_size();
        let span_h = self.dilation * (kh - 1) + 1;
        let span_w = self.dilation * (kw - 1) + 1;
        let ph = h + self.padding.top + self.padding.bottom;
        let pw = w + self.padding.left + self.padding.right;
        if ph < span_h {
            return Err(Error::shape("conv2d", "padded height", format!(">= {span_h}"), ph));
        }
        if pw < span_w {
            return Err(Error::shape("conv2d", "padded width", format!(">= {span_w}"), pw));
        }
        Ok(((ph - span_h) / self.stride + 1, (pw - span_w) / self.stride + 1))
    }

    /// Output dims for a given input, checking the channel count.
    pub fn output_dims(&self, input: Dims) -> Result<Dims> {
        self.validate()?;
        let [n, c, h, w] = input;
        if c != self.in_channels() {
            return Err(Error::shape("conv2d", "input channels", self.in_channels(), c));
        }
        let (oh, ow) = self.output_hw(h, w)?;
        Ok([n, self.out_channels(), oh, ow])
    }
}

/// Range of output columns `ox` for which `ox*stride + offset` lands in `[0, len)`.
fn valid_range(offset: isize, stride: usize, len: usize, out_len: usize) -> (usize, usize) {
    let s = stride as isize;
    let lo = if offset >= 0 { 0 } else { (-offset + s - 1) / s };
    let last = len as isize - 1 - offset;
    if last < 0 {
        return (0, 0);
    }
    let hi = (last / s + 1).min(out_len as isize);
    let lo = lo.min(hi);
    (lo as usize, hi as usize)
}

/// 2-D convolution (cross-correlation) with zero padding.
pub fn conv2d(input: &Tensor, params: &Conv2dParams) -> Result<Tensor> {
    let out_dims = params.output_dims(input.shape())?;
    let [_, c, h, w] = input.shape();
    let [_, co, oh, ow] = out_dims;
    let [_, cig, kh, kw] = params.weight.shape();
    let co_per_group = co / params.groups;
    let weight = params.weight.data();
    let stride = params.stride;
    let dil = params.dilation;
    let pad_t = params.padding.top as isize;
    let pad_l = params.padding.left as isize;

    let mut out = Tensor::zeros(out_dims);
    if oh * ow == 0 {
        return Ok(out);
    }
    out.data_mut()
        .par_chunks_mut(oh * ow)
        .enumerate()
        .for_each(|(plane_idx, plane)| {
            let b = plane_idx / co;
            let o = plane_idx % co;
            let group = o / co_per_group;
            if let Some(bias) = &params.bias {
                plane.fill(bias[o]);
            }
            for ci in 0..cig {
                let ic = group * cig + ci;
                let in_plane = &input.data()[(b * c + ic) * h * w..][..h * w];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = weight[((o * cig + ci) * kh + ky) * kw + kx];
                        let x_off = (kx * dil) as isize - pad_l;
                        let (x_lo, x_hi) = valid_range(x_off, stride, w, ow);
                        if x_lo >= x_hi {
                            continue;
                        }
                        for oy in 0..oh {
                            let iy = (oy * stride + ky * dil) as isize - pad_t;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let in_row = &in_plane[iy as usize * w..][..w];
                            let out_row = &mut plane[oy * ow..][..ow];
                            if stride == 1 {
                                let start = (x_lo as isize + x_off) as usize;
                                let src = &in_row[start..start + (x_hi - x_lo)];
                                for (dst, &s) in out_row[x_lo..x_hi].iter_mut().zip(src) {
                                    *dst += wv * s;
                                }
                            } else {
                                for (ox, dst) in out_row.iter_mut().enumerate().take(x_hi).skip(x_lo) {
                                    let ix = (ox * stride) as isize + x_off;
                                    *dst += wv * in_row[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct nested-loop reference; sums bias last and indexes the padded
    /// input explicitly.
    fn naive_conv(input: &Tensor, p: &Conv2dParams) -> Tensor {
        let [n, _, h, w] = input.shape();
        let [co, cig, kh, kw] = p.weight.shape();
        let (oh, ow) = p.output_hw(h, w).unwrap();
        let cpg = co / p.groups;
        let mut out = Tensor::zeros([n, co, oh, ow]);
        for b in 0..n {
            for o in 0..co {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0.0;
                        for ci in 0..cig {
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let iy = (oy * p.stride + ky * p.dilation) as isize - p.padding.top as isize;
                                    let ix = (ox * p.stride + kx * p.dilation) as isize - p.padding.left as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                        continue;
                                    }
                                    let ic = (o / cpg) * cig + ci;
                                    acc += p.weight.get(o, ci, ky, kx) * input.get(b, ic, iy as usize, ix as usize);
                                }
                            }
                        }
                        if let Some(bias) = &p.bias {
                            acc += bias[o];
                        }
                        out.set(b, o, oy, ox, acc);
                    }
                }
            }
        }
        out
    }

    fn random_params(rng: &mut ChaCha8Rng) -> (Tensor, Conv2dParams) {
        let groups = [1, 2, 4][rng.gen_range(0..3)];
        let c_in = groups * rng.gen_range(1..3);
        let c_out = groups * rng.gen_range(1..3);
        let kernels = [(1, 1), (3, 3), (1, 3), (3, 1), (5, 5), (2, 3)];
        let (kh, kw) = kernels[rng.gen_range(0..kernels.len())];
        let dilation = rng.gen_range(1..3);
        let stride = rng.gen_range(1..3);
        let padding = Padding {
            top: rng.gen_range(0..3),
            bottom: rng.gen_range(0..3),
            left: rng.gen_range(0..3),
            right: rng.gen_range(0..3),
        };
        let h = rng.gen_range(dilation * (kh - 1) + 1..12);
        let w = rng.gen_range(dilation * (kw - 1) + 1..12);
        let mut p = Conv2dParams::zeros(c_in, c_out, (kh, kw), rng.gen_bool(0.5), padding)
            .with_groups(groups)
            .with_stride(stride)
            .with_dilation(dilation);
        let ws = p.weight.shape();
        p.weight = Tensor::random_uniform(ws, -1.0, 1.0, rng);
        if let Some(b) = &mut p.bias {
            b.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        }
        let x = Tensor::random_uniform([rng.gen_range(1..3), c_in, h, w], -1.0, 1.0, rng);
        (x, p)
    }

    #[test]
    fn same_padding_shape() {
        let p = Conv2dParams::zeros(3, 64, (3, 3), true, Padding::uniform(1));
        let y = conv2d(&Tensor::zeros([1, 3, 64, 64]), &p).unwrap();
        assert_eq!(y.shape(), [1, 64, 64, 64]);
    }

    #[test]
    fn identity_1x1_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::random_uniform([2, 1, 5, 7], -3.0, 3.0, &mut rng);
        let mut p = Conv2dParams::zeros(1, 1, (1, 1), true, Padding::default());
        p.weight.data_mut()[0] = 1.0;
        assert_eq!(conv2d(&x, &p).unwrap(), x);
    }

    #[test]
    fn matches_naive_loop_3x3() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Tensor::random_uniform([1, 2, 5, 5], -1.0, 1.0, &mut rng);
        let mut p = Conv2dParams::zeros(2, 2, (3, 3), true, Padding::uniform(1));
        p.weight = Tensor::random_uniform([2, 2, 3, 3], -1.0, 1.0, &mut rng);
        p.bias = Some(vec![0.3, -0.7]);
        let diff = conv2d(&x, &p).unwrap().max_abs_diff(&naive_conv(&x, &p)).unwrap();
        assert!(diff <= 1e-12, "diff {diff}");
    }

    #[test]
    fn matches_naive_loop_random_configs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            let (x, p) = random_params(&mut rng);
            let fast = conv2d(&x, &p).unwrap();
            let slow = naive_conv(&x, &p);
            let diff = fast.max_abs_diff(&slow).unwrap();
            assert!(diff <= 1e-12, "diff {diff} for {p:?}");
        }
    }

    #[test]
    fn linear_in_input_without_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (x, mut p) = random_params(&mut rng);
            p.bias = None;
            let y = Tensor::random_uniform(x.shape(), -1.0, 1.0, &mut rng);
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mix = Tensor::new(
                x.shape(),
                x.data().iter().zip(y.data()).map(|(u, v)| a * u + b * v).collect(),
            )
            .unwrap();
            let lhs = conv2d(&mix, &p).unwrap();
            let cx = conv2d(&x, &p).unwrap();
            let cy = conv2d(&y, &p).unwrap();
            let rhs = Tensor::new(
                cx.shape(),
                cx.data().iter().zip(cy.data()).map(|(u, v)| a * u + b * v).collect(),
            )
            .unwrap();
            assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn channel_mismatch_names_dimension() {
        let p = Conv2dParams::zeros(3, 8, (3, 3), false, Padding::uniform(1));
        let err = conv2d(&Tensor::zeros([1, 4, 8, 8]), &p).unwrap_err();
        assert!(err.to_string().contains("input channels"), "{err}");
    }

    #[test]
    fn rejects_kernel_larger_than_input() {
        let p = Conv2dParams::zeros(1, 1, (5, 5), false, Padding::default());
        let err = conv2d(&Tensor::zeros([1, 1, 3, 3]), &p).unwrap_err();
        assert!(err.to_string().contains("padded height"), "{err}");
    }

    #[test]
    fn deterministic_across_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Tensor::random_uniform([1, 8, 17, 13], -1.0, 1.0, &mut rng);
        let mut p = Conv2dParams::zeros(8, 16, (3, 3), true, Padding::uniform(1));
        p.weight = Tensor::random_uniform([16, 8, 3, 3], -1.0, 1.0, &mut rng);
        let a = conv2d(&x, &p).unwrap();
        let b = conv2d(&x, &p).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
}
