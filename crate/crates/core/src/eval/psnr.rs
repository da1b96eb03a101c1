use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::image_io::{list_pngs, load_png, quantize};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Tensor;

/// Boundary discarded on every side before scoring.
pub const DEFAULT_SHAVE: usize = 4;

/// PSNR in dB at 0–255 scale over all channels after cropping `shave`
/// pixels from every side. Identical images give `f64::INFINITY`.
pub fn psnr(sr: &Tensor, gt: &Tensor, shave: usize) -> Result<f64> {
    if sr.shape() != gt.shape() {
        return Err(Error::Eval(format!(
            "psnr: image dims differ: {:?} vs {:?}",
            sr.shape(),
            gt.shape()
        )));
    }
    let [n, c, h, w] = sr.shape();
    if h <= 2 * shave || w <= 2 * shave {
        return Err(Error::Eval(format!(
            "psnr: {h}x{w} image is too small to shave {shave} pixels per side"
        )));
    }
    let mut sse = 0.0;
    for b in 0..n {
        for ch in 0..c {
            let (p, q) = (sr.plane(b, ch), gt.plane(b, ch));
            for y in shave..h - shave {
                let row = y * w;
                for x in shave..w - shave {
                    let d = p[row + x] - q[row + x];
                    sse += d * d;
                }
            }
        }
    }
    let count = (n * c * (h - 2 * shave) * (w - 2 * shave)) as f64;
    let mse = sse / count;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

/// Runs a model on a 0–255 image: scales to `[0, 1]`, executes, scales back,
/// rounds and clips.
pub fn super_resolve(graph: &Graph, lr: &Tensor) -> Result<Tensor> {
    let y = graph.execute(&lr.map(|v| v / 255.0))?;
    Ok(quantize(&y.map(|v| v * 255.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageScore {
    pub name: String,
    pub psnr_db: f64,
}

/// Per-image PSNRs and their mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub images: Vec<ImageScore>,
    pub mean_psnr_db: f64,
}

impl EvalReport {
    fn new(mut images: Vec<ImageScore>) -> Self {
        images.sort_by(|a, b| a.name.cmp(&b.name));
        let mean = images.iter().map(|s| s.psnr_db).sum::<f64>() / images.len() as f64;
        EvalReport {
            images,
            mean_psnr_db: mean,
        }
    }

    /// `filename,psnr_db` rows, name-sorted.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["filename", "psnr_db"])?;
        for s in &self.images {
            w.write_record([s.name.clone(), format_db(s.psnr_db)])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Eval(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8 fields"))
    }
}

pub fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn matched_names(a_dir: &Path, b_dir: &Path) -> Result<Vec<String>> {
    let a = list_pngs(a_dir)?;
    let b = list_pngs(b_dir)?;
    let only_a: Vec<_> = a.iter().filter(|n| !b.contains(n)).cloned().collect();
    let only_b: Vec<_> = b.iter().filter(|n| !a.contains(n)).cloned().collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(Error::Eval(format!(
            "unmatched files: only in {}: [{}]; only in {}: [{}]",
            a_dir.display(),
            only_a.join(", "),
            b_dir.display(),
            only_b.join(", ")
        )));
    }
    if a.is_empty() {
        return Err(Error::Eval(format!("no PNG images in {}", a_dir.display())));
    }
    Ok(a)
}

/// PSNR of every same-named PNG pair in two directories.
pub fn psnr_dirs(sr_dir: &Path, gt_dir: &Path, shave: usize) -> Result<EvalReport> {
    let names = matched_names(sr_dir, gt_dir)?;
    let scores = names
        .into_par_iter()
        .map(|name| {
            let sr = load_png(&sr_dir.join(&name))?;
            let gt = load_png(&gt_dir.join(&name))?;
            let psnr_db = psnr(&sr, &gt, shave).map_err(|e| Error::Eval(format!("{name}: {e}")))?;
            Ok(ImageScore { name, psnr_db })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::new(scores))
}

/// Super-resolves every LR image and scores it against the same-named GT.
pub fn evaluate_model(graph: &Graph, lr_dir: &Path, gt_dir: &Path, shave: usize) -> Result<EvalReport> {
    let names = matched_names(lr_dir, gt_dir)?;
    let scores = names
        .into_par_iter()
        .map(|name| {
            let lr = load_png(&lr_dir.join(&name))?;
            let gt = load_png(&gt_dir.join(&name))?;
            let sr = super_resolve(graph, &lr)?;
            let psnr_db = psnr(&sr, &gt, shave).map_err(|e| Error::Eval(format!("{name}: {e}")))?;
            Ok(ImageScore { name, psnr_db })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::new(scores))
}
