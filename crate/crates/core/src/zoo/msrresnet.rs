use super::{check, conv3};
use crate::error::Result;
use crate::graph::{Graph, GraphBuilder};
use crate::tensor::ResampleMode;

const SLOPE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MsrResNetConfig {
    pub nf: usize,
    pub nb: usize,
}

impl Default for MsrResNetConfig {
    fn default() -> Self {
        MsrResNetConfig { nf: 64, nb: 16 }
    }
}

/// Modified SRResNet (x4): residual blocks without batch norm, two
/// conv -> pixel shuffle(2) -> leaky ReLU stages, and a bilinear global skip.
pub fn build_msrresnet(cfg: &MsrResNetConfig) -> Result<Graph> {
    check(cfg.nf > 0, "msrresnet", "nf must be >= 1")?;
    let nf = cfg.nf;
    let mut b = GraphBuilder::new("msrresnet", 4);
    let x = b.input(3);

    let fea = b.conv("conv_first", &x, conv3(3, nf));
    let mut h = b.leaky_relu("conv_first.act", &fea, SLOPE);
    for i in 0..cfg.nb {
        let p = format!("body.{i:02}");
        let t = b.conv(&format!("{p}.conv1"), &h, conv3(nf, nf));
        let t = b.leaky_relu(&format!("{p}.act"), &t, SLOPE);
        let t = b.conv(&format!("{p}.conv2"), &t, conv3(nf, nf));
        h = b.add(&format!("{p}.add"), &[h, t]);
    }

    let mut t = h;
    for name in ["upconv1", "upconv2"] {
        t = b.conv(name, &t, conv3(nf, 4 * nf));
        t = b.pixel_shuffle(&format!("{name}.ps"), &t, 2);
        t = b.leaky_relu(&format!("{name}.act"), &t, SLOPE);
    }
    let t = b.conv("hr_conv", &t, conv3(nf, nf));
    let t = b.leaky_relu("hr_conv.act", &t, SLOPE);
    let t = b.conv("conv_last", &t, conv3(nf, 3));

    let base = b.upsample("base", &x, 4, ResampleMode::Bilinear);
    let out = b.add("sum", &[t, base]);
    b.finish(out)
}
