use super::{check, conv1, conv3};
use crate::error::Result;
use crate::graph::{Graph, GraphBuilder, PortRef};
use crate::tensor::{Conv2dParams, Padding, ResampleMode};

const SLOPE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RfdnConfig {
    pub nf: usize,
    pub blocks: usize,
}

impl Default for RfdnConfig {
    fn default() -> Self {
        RfdnConfig { nf: 50, blocks: 4 }
    }
}

/// Residual feature distillation network (x4).
pub fn build_rfdn(cfg: &RfdnConfig) -> Result<Graph> {
    let nf = cfg.nf;
    check(nf.is_multiple_of(2) && nf >= 4, "rfdn", "nf must be even and >= 4")?;
    check(cfg.blocks >= 1, "rfdn", "needs at least one block")?;
    let mut b = GraphBuilder::new("rfdn", 4);
    let x = b.input(3);
    let fea = b.conv("fea_conv", &x, conv3(3, nf));
    let mut outs = Vec::with_capacity(cfg.blocks);
    let mut h = fea.clone();
    for i in 0..cfg.blocks {
        h = rfdb(&mut b, &format!("b{i}"), &h, nf);
        outs.push(h.clone());
    }
    let cat = b.concat("cat", &outs);
    let t = b.conv("c", &cat, conv1(cfg.blocks * nf, nf));
    let t = b.leaky_relu("c.act", &t, SLOPE);
    let t = b.conv("lr_conv", &t, conv3(nf, nf));
    let t = b.add("lr_skip", &[t, fea]);
    let t = b.conv("up", &t, conv3(nf, 3 * 16));
    let out = b.pixel_shuffle("up.ps", &t, 4);
    b.finish(out)
}

/// Three stages of {1x1 distillation, shallow residual 3x3 refinement}, a
/// final 3x3 distillation, 1x1 fusion of the concatenated slices and ESA.
fn rfdb(b: &mut GraphBuilder, p: &str, x: &PortRef, nf: usize) -> PortRef {
    let dc = nf / 2;
    let mut distilled = Vec::with_capacity(4);
    let mut h = x.clone();
    for i in 1..=3 {
        let d = b.conv(&format!("{p}.c{i}_d"), &h, conv1(nf, dc));
        distilled.push(b.leaky_relu(&format!("{p}.c{i}_d.act"), &d, SLOPE));
        let r = b.conv(&format!("{p}.c{i}_r"), &h, conv3(nf, nf));
        let r = b.add(&format!("{p}.c{i}_r.skip"), &[r, h.clone()]);
        h = b.leaky_relu(&format!("{p}.c{i}_r.act"), &r, SLOPE);
    }
    let r4 = b.conv(&format!("{p}.c4"), &h, conv3(nf, dc));
    distilled.push(b.leaky_relu(&format!("{p}.c4.act"), &r4, SLOPE));
    let cat = b.concat(&format!("{p}.cat"), &distilled);
    let fused = b.conv(&format!("{p}.c5"), &cat, conv1(4 * dc, nf));
    esa(b, &format!("{p}.esa"), &fused, nf)
}

/// Enhanced spatial attention.
fn esa(b: &mut GraphBuilder, p: &str, x: &PortRef, nf: usize) -> PortRef {
    let f = nf / 4;
    let c1_ = b.conv(&format!("{p}.conv1"), x, conv1(nf, f));
    let strided = Conv2dParams::zeros(f, f, (3, 3), true, Padding::default()).with_stride(2);
    let c1 = b.conv(&format!("{p}.conv2"), &c1_, strided);
    let v = b.max_pool(&format!("{p}.pool"), &c1, 7, 3);
    let v = b.conv(&format!("{p}.conv_max"), &v, conv3(f, f));
    let v = b.relu(&format!("{p}.conv_max.relu"), &v);
    let c3 = b.conv(&format!("{p}.conv3"), &v, conv3(f, f));
    let c3 = b.relu(&format!("{p}.conv3.relu"), &c3);
    let c3 = b.conv(&format!("{p}.conv3_"), &c3, conv3(f, f));
    let c3 = b.resize_like(&format!("{p}.up"), &c3, x, ResampleMode::Bilinear);
    let cf = b.conv(&format!("{p}.conv_f"), &c1_, conv1(f, f));
    let s = b.add(&format!("{p}.sum"), &[c3, cf]);
    let c4 = b.conv(&format!("{p}.conv4"), &s, conv1(f, nf));
    let m = b.sigmoid(&format!("{p}.sigmoid"), &c4);
    b.mul(&format!("{p}.scale"), x, &m)
}
