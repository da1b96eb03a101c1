use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Rgb, RgbImage};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Reads an 8-bit PNG as a `(1, 3, H, W)` tensor of 0–255 values. Grey and
/// alpha images are converted to RGB.
pub fn load_png(path: &Path) -> Result<Tensor> {
    let img = image::open(path)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.into_raw();
    Ok(Tensor::from_fn([1, 3, h, w], |_, c, y, x| {
        raw[(y * w + x) * 3 + c] as f64
    }))
}

/// Rounds to the nearest integer and clips to `[0, 255]`.
pub fn quantize(t: &Tensor) -> Tensor {
    t.map(|v| v.round().clamp(0.0, 255.0))
}

/// Writes the first image of a `(N, 3, H, W)` tensor as an 8-bit PNG after
/// [`quantize`].
pub fn save_png(path: &Path, t: &Tensor) -> Result<()> {
    let [_, c, h, w] = t.shape();
    if c != 3 {
        return Err(Error::shape("save_png", "channels", 3, c));
    }
    let q = quantize(t);
    let img: RgbImage = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let px = |ch| q.get(0, ch, y as usize, x as usize) as u8;
        Rgb([px(0), px(1), px(2)])
    });
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
}

/// Sorted file names of the `.png` files directly inside `dir`.
pub fn list_pngs(dir: &Path) -> Result<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if Path::new(&name)
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"))
            && entry.path().is_file()
        {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

/// Loads every PNG of `dir` (concurrently), in file-name order.
pub fn load_dir(dir: &Path) -> Result<Vec<(String, Tensor)>> {
    list_pngs(dir)?
        .into_par_iter()
        .map(|name| {
            let t = load_png(&dir.join(&name))?;
            Ok((name, t))
        })
        .collect()
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir.to_path_buf())
}
