use std::path::Path;

use rayon::prelude::*;

use super::image_io::{ensure_dir, list_pngs, load_png, quantize, save_png};
use crate::error::{Error, Result};
use crate::tensor::{bicubic_downsample, Tensor};

/// Centre crop to the largest size whose sides are multiples of `factor`.
/// An odd surplus leaves the extra row / column on the bottom / right.
pub fn crop_to_multiple(t: &Tensor, factor: usize) -> Result<Tensor> {
    let [n, c, h, w] = t.shape();
    if factor == 0 {
        return Err(Error::invalid("crop_to_multiple", "factor must be >= 1"));
    }
    let (nh, nw) = (h / factor * factor, w / factor * factor);
    if nh == 0 || nw == 0 {
        return Err(Error::Eval(format!(
            "{h}x{w} image is smaller than the x{factor} factor"
        )));
    }
    let (oy, ox) = ((h - nh) / 2, (w - nw) / 2);
    Ok(Tensor::from_fn([n, c, nh, nw], |b, ch, y, x| {
        t.get(b, ch, y + oy, x + ox)
    }))
}

/// HR -> LR: centre crop, antialiased bicubic downsampling, quantisation to
/// 8-bit levels.
pub fn degrade(hr: &Tensor, factor: usize) -> Result<Tensor> {
    let cropped = crop_to_multiple(hr, factor)?;
    Ok(quantize(&bicubic_downsample(&cropped, factor)?))
}

/// Writes a degraded copy of every PNG in `hr_dir` to `out_dir` under the
/// same name. Returns the names written.
pub fn make_lr(hr_dir: &Path, out_dir: &Path, factor: usize) -> Result<Vec<String>> {
    let names = list_pngs(hr_dir)?;
    if names.is_empty() {
        return Err(Error::Eval(format!("no PNG images in {}", hr_dir.display())));
    }
    ensure_dir(out_dir)?;
    names
        .par_iter()
        .map(|name| {
            let hr = load_png(&hr_dir.join(name))?;
            let lr = degrade(&hr, factor).map_err(|e| Error::Eval(format!("{name}: {e}")))?;
            save_png(&out_dir.join(name), &lr)
        })
        .collect::<Result<()>>()?;
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::cubic_kernel;

    #[test]
    fn crop_keeps_centre() {
        let t = Tensor::from_fn([1, 1, 10, 7], |_, _, y, x| (y * 10 + x) as f64);
        let c = crop_to_multiple(&t, 4).unwrap();
        assert_eq!(c.shape(), [1, 1, 8, 4]);
        assert_eq!(c.get(0, 0, 0, 0), 11.0);
        assert!(crop_to_multiple(&t, 11).is_err());
    }

    #[test]
    fn constant_stays_constant() {
        let t = Tensor::full([1, 3, 18, 13], 77.0);
        let lr = degrade(&t, 4).unwrap();
        assert_eq!(lr.shape(), [1, 3, 4, 3]);
        assert!(lr.data().iter().all(|&v| v == 77.0));
    }

    #[test]
    fn impulse_matches_kernel_oracle() {
        // an interior impulse at (yi, xi) lands on output (o) with weight
        // k((yi - centre(o)) / f) / f per axis, centre(o) = (o + 0.5) f - 0.5
        let f = 4usize;
        let (yi, xi) = (13usize, 18usize);
        let mut t = Tensor::zeros([1, 1, 32, 32]);
        t.set(0, 0, yi, xi, 1.0);
        let lr = bicubic_downsample(&t, f).unwrap();
        let w = |i: usize, o: usize| {
            let centre = (o as f64 + 0.5) * f as f64 - 0.5;
            let taps: Vec<f64> = (-10i64..=10)
                .map(|d| cubic_kernel(((centre.floor() as i64 + d) as f64 - centre) / f as f64))
                .collect();
            let norm: f64 = taps.iter().sum();
            cubic_kernel((i as f64 - centre) / f as f64) / norm
        };
        for oy in 2..6 {
            for ox in 3..6 {
                let want = w(yi, oy) * w(xi, ox);
                assert!((lr.get(0, 0, oy, ox) - want).abs() < 1e-12, "({oy},{ox})");
            }
        }
    }

    #[test]
    fn writes_same_names() {
        let hr = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        save_png(&hr.path().join("x.png"), &Tensor::full([1, 3, 9, 8], 10.0)).unwrap();
        let names = make_lr(hr.path(), &out.path().join("lr"), 4).unwrap();
        assert_eq!(names, vec!["x.png"]);
        let lr = load_png(&out.path().join("lr/x.png")).unwrap();
        assert_eq!(lr.shape(), [1, 3, 2, 2]);
    }
}
