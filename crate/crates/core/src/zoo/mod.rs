//! Parametric builders for the super-resolution model zoo.
//!
//! Builders return graphs with zero-valued parameters; [`init_weights`]
//! fills them deterministically from a seed. [`build`] does both by name.

mod imdn;
mod init;
mod msrresnet;
mod pan;
mod rfdn;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::{Conv2dParams, Padding};

pub use imdn::{build_fimdn, build_imdn, CacForm, FimdnConfig, ImdnConfig};
pub use init::init_weights;
pub use msrresnet::{build_msrresnet, MsrResNetConfig};
pub use pan::{build_pan, PanConfig};
pub use rfdn::{build_rfdn, RfdnConfig};

/// Published efficiency figures for a model at a 256x256 input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub params_m: f64,
    pub flops_g: f64,
    pub activations_m: f64,
}

/// One catalog entry.
#[derive(Debug, Clone, Copy)]
pub struct ModelInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub reference: Option<Reference>,
}

pub const CATALOG: &[ModelInfo] = &[
    ModelInfo {
        name: "msrresnet",
        summary: "MSRResNet baseline: 16 residual blocks, nf=64, two x2 pixel-shuffle stages, bilinear global skip",
        reference: Some(Reference {
            params_m: 1.517,
            flops_g: 166.36,
            activations_m: 292.55,
        }),
    },
    ModelInfo {
        name: "imdn",
        summary: "IMDN: 8 information multi-distillation blocks (64/48/16 split), CCA attention, pixel-shuffle x4",
        reference: Some(Reference {
            params_m: 0.893,
            flops_g: 58.53,
            activations_m: 154.14,
        }),
    },
    ModelInfo {
        name: "rfdn",
        summary: "RFDN: 4 residual feature distillation blocks, nf=50, ESA, global feature aggregation",
        reference: Some(Reference {
            params_m: 0.433,
            flops_g: 27.10,
            activations_m: 112.03,
        }),
    },
    ModelInfo {
        name: "fimdn",
        summary: "FIMDN deploy form: 6 blocks with asymmetric convolutions fused into single 3x3 kernels",
        reference: Some(Reference {
            params_m: 0.687,
            flops_g: 44.98,
            activations_m: 118.49,
        }),
    },
    ModelInfo {
        name: "fimdn-train",
        summary: "FIMDN training form: every block 3x3 conv carries parallel 1x3 and 3x1 branches",
        reference: None,
    },
    ModelInfo {
        name: "pan",
        summary: "PAN: 16 SC-PA blocks (nf=40), two nearest-upsample U-PA stages (unf=24)",
        reference: Some(Reference {
            params_m: 0.272,
            flops_g: 32.19,
            activations_m: 270.53,
        }),
    },
];

pub fn info(name: &str) -> Option<&'static ModelInfo> {
    CATALOG.iter().find(|m| m.name == name)
}

/// Builds a catalog model with default hyperparameters and zero weights.
pub fn build_default(name: &str) -> Result<Graph> {
    match name {
        "msrresnet" => build_msrresnet(&MsrResNetConfig::default()),
        "imdn" => build_imdn(&ImdnConfig::default()),
        "rfdn" => build_rfdn(&RfdnConfig::default()),
        "fimdn" => build_fimdn(&FimdnConfig::default()),
        "fimdn-train" => build_fimdn(&FimdnConfig {
            form: CacForm::Training,
            ..FimdnConfig::default()
        }),
        "pan" => build_pan(&PanConfig::default()),
        other => Err(Error::Spec(format!(
            "unknown model `{other}` (known: {})",
            CATALOG.iter().map(|m| m.name).collect::<Vec<_>>().join(", ")
        ))),
    }
}

/// Builds a catalog model and initialises its weights from `seed`.
pub fn build(name: &str, seed: u64) -> Result<Graph> {
    let mut g = build_default(name)?;
    init_weights(&mut g, seed);
    Ok(g)
}

pub(crate) fn conv3(c_in: usize, c_out: usize) -> Conv2dParams {
    Conv2dParams::zeros(c_in, c_out, (3, 3), true, Padding::uniform(1))
}

pub(crate) fn conv1(c_in: usize, c_out: usize) -> Conv2dParams {
    Conv2dParams::zeros(c_in, c_out, (1, 1), true, Padding::default())
}

pub(crate) fn check(cond: bool, model: &str, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Spec(format!("{model}: {msg}")))
    }
}
