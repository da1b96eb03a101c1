//! Separable resampling: nearest / bilinear / bicubic resize with half-pixel
//! (align-corners = false) sampling, plus antialiased bicubic downsampling.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Keys cubic coefficient.
const CUBIC_A: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    Nearest,
    Bilinear,
    Bicubic,
}

/// Keys cubic convolution kernel with `a = -0.5`, support `[-2, 2]`.
pub fn cubic_kernel(x: f64) -> f64 {
    let a = CUBIC_A;
    let t = x.abs();
    if t <= 1.0 {
        ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
    } else {
        0.0
    }
}

/// Source taps `(index, weight)` for every output position along one axis.
type AxisTaps = Vec<Vec<(usize, f64)>>;

fn resize_taps(in_len: usize, out_len: usize, mode: ResampleMode) -> AxisTaps {
    let ratio = in_len as f64 / out_len as f64;
    let last = in_len - 1;
    (0..out_len)
        .map(|o| match mode {
            ResampleMode::Nearest => {
                let src = ((o as f64 * ratio).floor() as usize).min(last);
                vec![(src, 1.0)]
            }
            ResampleMode::Bilinear => {
                let src = ((o as f64 + 0.5) * ratio - 0.5).max(0.0);
                let i0 = (src.floor() as usize).min(last);
                let i1 = (i0 + 1).min(last);
                let l = src - i0 as f64;
                vec![(i0, 1.0 - l), (i1, l)]
            }
            ResampleMode::Bicubic => {
                let src = (o as f64 + 0.5) * ratio - 0.5;
                let base = src.floor();
                let t = src - base;
                (-1..=2)
                    .map(|k| {
                        let idx = (base as isize + k).clamp(0, last as isize) as usize;
                        (idx, cubic_kernel(t - k as f64))
                    })
                    .collect()
            }
        })
        .collect()
}

/// Mirror an out-of-range index back into `[0, len)` (half-sample symmetric).
fn reflect(mut i: isize, len: usize) -> usize {
    let n = len as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Antialiased bicubic taps for integer downscaling: the kernel is stretched
/// by `factor` and renormalised to sum to one.
fn downsample_taps(in_len: usize, factor: usize) -> AxisTaps {
    let f = factor as f64;
    let radius = 2.0 * f;
    (0..in_len / factor)
        .map(|o| {
            let center = (o as f64 + 0.5) * f - 0.5;
            let lo = (center - radius).ceil() as isize;
            let hi = (center + radius).floor() as isize;
            let mut taps: Vec<(usize, f64)> = (lo..=hi)
                .filter_map(|j| {
                    let wt = cubic_kernel((j as f64 - center) / f);
                    (wt != 0.0).then(|| (reflect(j, in_len), wt))
                })
                .collect();
            let sum: f64 = taps.iter().map(|t| t.1).sum();
            taps.iter_mut().for_each(|t| t.1 /= sum);
            taps
        })
        .collect()
}

fn apply_separable(input: &Tensor, rows: &AxisTaps, cols: &AxisTaps) -> Tensor {
    let [n, c, h, w] = input.shape();
    let (oh, ow) = (rows.len(), cols.len());
    let mut out = Tensor::zeros([n, c, oh, ow]);
    let mut tmp = vec![0.0; h * ow];
    for b in 0..n {
        for ch in 0..c {
            let plane = input.plane(b, ch);
            for y in 0..h {
                let row = &plane[y * w..(y + 1) * w];
                for (x, taps) in cols.iter().enumerate() {
                    tmp[y * ow + x] = taps.iter().map(|&(i, wt)| wt * row[i]).sum();
                }
            }
            for (y, taps) in rows.iter().enumerate() {
                for x in 0..ow {
                    let v = taps.iter().map(|&(i, wt)| wt * tmp[i * ow + x]).sum();
                    out.set(b, ch, y, x, v);
                }
            }
        }
    }
    out
}

/// Resizes to an explicit `(out_h, out_w)`.
pub fn resize(input: &Tensor, out_h: usize, out_w: usize, mode: ResampleMode) -> Result<Tensor> {
    let [_, _, h, w] = input.shape();
    if h == 0 || w == 0 || out_h == 0 || out_w == 0 {
        return Err(Error::shape(
            "resize",
            "spatial size",
            "non-empty",
            format!("{h}x{w} -> {out_h}x{out_w}"),
        ));
    }
    Ok(apply_separable(
        input,
        &resize_taps(h, out_h, mode),
        &resize_taps(w, out_w, mode),
    ))
}

/// Upscales by an integer factor.
pub fn interpolate(input: &Tensor, scale: usize, mode: ResampleMode) -> Result<Tensor> {
    if scale == 0 {
        return Err(Error::invalid("interpolate", "scale must be >= 1"));
    }
    if scale == 1 {
        return Ok(input.clone());
    }
    resize(input, input.height() * scale, input.width() * scale, mode)
}

/// Antialiased bicubic downsampling by an integer factor; both spatial dims
/// must be divisible by `factor`.
pub fn bicubic_downsample(input: &Tensor, factor: usize) -> Result<Tensor> {
    let [_, _, h, w] = input.shape();
    if factor == 0 {
        return Err(Error::invalid("bicubic_downsample", "factor must be >= 1"));
    }
    if h == 0 || w == 0 {
        return Err(Error::shape(
            "bicubic_downsample",
            "spatial size",
            "non-empty",
            format!("{h}x{w}"),
        ));
    }
    if h % factor != 0 {
        return Err(Error::shape(
            "bicubic_downsample",
            "height",
            format!("multiple of {factor}"),
            h,
        ));
    }
    if w % factor != 0 {
        return Err(Error::shape(
            "bicubic_downsample",
            "width",
            format!("multiple of {factor}"),
            w,
        ));
    }
    if factor == 1 {
        return Ok(input.clone());
    }
    Ok(apply_separable(
        input,
        &downsample_taps(h, factor),
        &downsample_taps(w, factor),
    ))
}
