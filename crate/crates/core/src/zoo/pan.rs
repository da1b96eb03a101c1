use super::{check, conv1, conv3};
use crate::error::Result;
use crate::graph::{Graph, GraphBuilder, PortRef};
use crate::tensor::{Conv2dParams, Padding, ResampleMode};

const SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PanConfig {
    pub nf: usize,
    pub unf: usize,
    pub nb: usize,
}

impl Default for PanConfig {
    fn default() -> Self {
        PanConfig {
            nf: 40,
            unf: 24,
            nb: 16,
        }
    }
}

fn conv3_nb(c_in: usize, c_out: usize) -> Conv2dParams {
    Conv2dParams::zeros(c_in, c_out, (3, 3), false, Padding::uniform(1))
}

fn conv1_nb(c_in: usize, c_out: usize) -> Conv2dParams {
    Conv2dParams::zeros(c_in, c_out, (1, 1), false, Padding::default())
}

/// Pixel attention network (x4).
pub fn build_pan(cfg: &PanConfig) -> Result<Graph> {
    let PanConfig { nf, unf, nb } = *cfg;
    check(nf % 2 == 0 && nf >= 2, "pan", "nf must be even and >= 2")?;
    check(unf > 0, "pan", "unf must be >= 1")?;
    let mut b = GraphBuilder::new("pan", 4);
    let x = b.input(3);
    let fea = b.conv("fea_conv", &x, conv3(3, nf));
    let mut h = fea.clone();
    for i in 0..nb {
        h = scpa(&mut b, &format!("scpa.{i:02}"), &h, nf);
    }
    let t = b.conv("trunk_conv", &h, conv3(nf, nf));
    let mut t = b.add("trunk_skip", &[fea, t]);

    for (i, c_in) in [(1, nf), (2, unf)] {
        t = b.upsample(&format!("up{i}"), &t, 2, ResampleMode::Nearest);
        t = b.conv(&format!("upconv{i}"), &t, conv3(c_in, unf));
        t = pixel_attention(&mut b, &format!("att{i}"), &t, unf);
        t = b.leaky_relu(&format!("att{i}.act"), &t, SLOPE);
        t = b.conv(&format!("hrconv{i}"), &t, conv3(unf, unf));
        t = b.leaky_relu(&format!("hrconv{i}.act"), &t, SLOPE);
    }
    let t = b.conv("conv_last", &t, conv3(unf, 3));
    let base = b.upsample("base", &x, 4, ResampleMode::Bilinear);
    let out = b.add("sum", &[t, base]);
    b.finish(out)
}

/// `x * sigmoid(conv1x1(x))`.
fn pixel_attention(b: &mut GraphBuilder, p: &str, x: &PortRef, c: usize) -> PortRef {
    let a = b.conv(&format!("{p}.conv"), x, conv1(c, c));
    let a = b.sigmoid(&format!("{p}.sigmoid"), &a);
    b.mul(&format!("{p}.scale"), x, &a)
}

/// Self-calibrated block with pixel attention: a plain 3x3 path and a
/// pixel-attention convolution path over half-width features, joined by a
/// 1x1 conv and a residual.
fn scpa(b: &mut GraphBuilder, p: &str, x: &PortRef, nf: usize) -> PortRef {
    let gw = nf / 2;
    let a = b.conv(&format!("{p}.conv1_a"), x, conv1_nb(nf, gw));
    let a = b.leaky_relu(&format!("{p}.conv1_a.act"), &a, SLOPE);
    let a = b.conv(&format!("{p}.k1"), &a, conv3_nb(gw, gw));
    let a = b.leaky_relu(&format!("{p}.k1.act"), &a, SLOPE);

    let z = b.conv(&format!("{p}.conv1_b"), x, conv1_nb(nf, gw));
    let z = b.leaky_relu(&format!("{p}.conv1_b.act"), &z, SLOPE);
    let y = b.conv(&format!("{p}.k2"), &z, conv1(gw, gw));
    let y = b.sigmoid(&format!("{p}.k2.sigmoid"), &y);
    let k3 = b.conv(&format!("{p}.k3"), &z, conv3_nb(gw, gw));
    let z = b.mul(&format!("{p}.pa"), &k3, &y);
    let z = b.conv(&format!("{p}.k4"), &z, conv3_nb(gw, gw));
    let z = b.leaky_relu(&format!("{p}.k4.act"), &z, SLOPE);

    let cat = b.concat(&format!("{p}.cat"), &[a, z]);
    let o = b.conv(&format!("{p}.conv3"), &cat, conv1_nb(nf, nf));
    b.add(&format!("{p}.add"), &[o, x.clone()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ParamBlob;

    #[test]
    fn scpa_block_parameters() {
        let g = build_pan(&PanConfig::default()).unwrap();
        let block: usize = g
            .params()
            .iter()
            .filter(|(k, _)| k.starts_with("scpa.00."))
            .map(|(_, v)| v.num_params())
            .sum();
        // 2 * 40*20 + 3 * 20*20*9 + (20*20 + 20) + 40*40
        assert_eq!(block, 14_420);
        assert_eq!(g.param("scpa.00.k2").map(ParamBlob::num_params), Some(420));
    }

    #[test]
    fn upsampling_path_shapes() {
        let g = build_pan(&PanConfig::default()).unwrap();
        let s = g.infer_shapes([1, 3, 9, 11]).unwrap();
        assert_eq!(s["upconv1"], vec![[1, 24, 18, 22]]);
        assert_eq!(s["hrconv2"], vec![[1, 24, 36, 44]]);
        assert_eq!(s["output"], vec![[1, 3, 36, 44]]);
    }
}
