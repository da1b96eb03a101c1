//! IMDN and its asymmetric-convolution variant FIMDN.
//!
//! Both share the information multi-distillation block: three 3x3 convs each
//! followed by a split that keeps `nf/4` "distilled" channels and refines the
//! rest, a final 3x3 producing `nf/4` channels, a 1x1 fusion of the four
//! distilled slices and contrast-aware channel attention (CCA), wrapped in a
//! block residual. The trunk ends in a 3x3 conv with a long skip, followed by
//! a single conv + pixel shuffle(4) reconstruction.

use super::{check, conv1, conv3};
use crate::error::Result;
use crate::graph::{Graph, GraphBuilder, PortRef};
use crate::tensor::{Conv2dParams, Padding, PoolStat};

const SLOPE: f64 = 0.05;
const CCA_REDUCTION: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImdnConfig {
    pub nf: usize,
    pub nb: usize,
}

impl Default for ImdnConfig {
    fn default() -> Self {
        ImdnConfig { nf: 64, nb: 8 }
    }
}

/// Whether the block 3x3 convs carry parallel asymmetric branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacForm {
    /// Each block 3x3 is `3x3 + 1x3 + 3x1` summed by an add node.
    Training,
    /// Each block 3x3 is a single fused kernel.
    Deploy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FimdnConfig {
    pub nf: usize,
    pub nb: usize,
    pub form: CacForm,
}

impl Default for FimdnConfig {
    fn default() -> Self {
        FimdnConfig {
            nf: 64,
            nb: 6,
            form: CacForm::Deploy,
        }
    }
}

pub fn build_imdn(cfg: &ImdnConfig) -> Result<Graph> {
    build("imdn", cfg.nf, cfg.nb, CacForm::Deploy)
}

pub fn build_fimdn(cfg: &FimdnConfig) -> Result<Graph> {
    let name = match cfg.form {
        CacForm::Training => "fimdn-train",
        CacForm::Deploy => "fimdn",
    };
    build(name, cfg.nf, cfg.nb, cfg.form)
}

/// A 3x3 conv, or in training form the `k3x3 + k1x3 + k3x1` site whose sum
/// node carries the id `id`.
fn conv3_site(b: &mut GraphBuilder, id: &str, x: &PortRef, c_in: usize, c_out: usize, form: CacForm) -> PortRef {
    match form {
        CacForm::Deploy => b.conv(id, x, conv3(c_in, c_out)),
        CacForm::Training => {
            let sq = b.conv(&format!("{id}.k3x3"), x, conv3(c_in, c_out));
            let hor = Conv2dParams::zeros(c_in, c_out, (1, 3), true, Padding::same(1, 3));
            let hor = b.conv(&format!("{id}.k1x3"), x, hor);
            let ver = Conv2dParams::zeros(c_in, c_out, (3, 1), true, Padding::same(3, 1));
            let ver = b.conv(&format!("{id}.k3x1"), x, ver);
            b.add(id, &[sq, hor, ver])
        }
    }
}

fn imdb(b: &mut GraphBuilder, p: &str, x: &PortRef, nf: usize, form: CacForm) -> PortRef {
    let d = nf / 4;
    let r = nf - d;
    let mut distilled = Vec::with_capacity(4);
    let mut h = x.clone();
    for (i, c_in) in [(1, nf), (2, r), (3, r)] {
        let t = conv3_site(b, &format!("{p}.c{i}"), &h, c_in, nf, form);
        let t = b.leaky_relu(&format!("{p}.c{i}.act"), &t, SLOPE);
        let parts = b.split(&format!("{p}.c{i}.split"), &t, &[d, r]);
        distilled.push(parts[0].clone());
        h = parts[1].clone();
    }
    distilled.push(conv3_site(b, &format!("{p}.c4"), &h, r, d, form));
    let cat = b.concat(&format!("{p}.cat"), &distilled);
    let fused = b.conv(&format!("{p}.c5"), &cat, conv1(4 * d, nf));
    let att = cca(b, &format!("{p}.cca"), &fused, nf);
    b.add(&format!("{p}.add"), &[x.clone(), att])
}

/// Contrast-aware channel attention: (mean + std) pooling, 1x1 squeeze,
/// ReLU, 1x1 excite, sigmoid, channel-wise scale.
fn cca(b: &mut GraphBuilder, p: &str, x: &PortRef, nf: usize) -> PortRef {
    let mid = nf / CCA_REDUCTION;
    let s = b.global_pool(&format!("{p}.pool"), x, PoolStat::MeanStd);
    let s = b.conv(&format!("{p}.du1"), &s, conv1(nf, mid));
    let s = b.relu(&format!("{p}.relu"), &s);
    let s = b.conv(&format!("{p}.du2"), &s, conv1(mid, nf));
    let s = b.sigmoid(&format!("{p}.sigmoid"), &s);
    b.mul(&format!("{p}.scale"), x, &s)
}

fn build(name: &str, nf: usize, nb: usize, form: CacForm) -> Result<Graph> {
    check(nf.is_multiple_of(4), name, "nf must be divisible by 4")?;
    check(nf >= CCA_REDUCTION, name, "nf must be >= 16 for channel attention")?;
    let mut b = GraphBuilder::new(name, 4);
    let x = b.input(3);
    let head = b.conv("head", &x, conv3(3, nf));
    let mut h = head.clone();
    for i in 0..nb {
        h = imdb(&mut b, &format!("b{i}"), &h, nf, form);
    }
    let t = b.conv("body_tail", &h, conv3(nf, nf));
    let t = b.add("body_skip", &[t, head]);
    let t = b.conv("tail", &t, conv3(nf, 3 * 16));
    let out = b.pixel_shuffle("tail.ps", &t, 4);
    b.finish(out)
}
