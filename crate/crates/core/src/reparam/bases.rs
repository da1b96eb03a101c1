use crate::error::{Error, Result};
use crate::tensor::{Conv2dParams, Padding, Tensor};

/// `N` same-shaped kernels `k_i` with merge weights `pi_i` and one bias; the
/// effective kernel is `sum_i pi_i * k_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBases {
    bases: Vec<Tensor>,
    merge_weights: Vec<f64>,
    bias: Option<Vec<f64>>,
    padding: Padding,
}

impl KernelBases {
    pub fn new(bases: Vec<Tensor>, merge_weights: Vec<f64>, bias: Option<Vec<f64>>, padding: Padding) -> Result<Self> {
        let bad = |msg: String| {
            Err(Error::InvalidArgument {
                op: "kernel_bases",
                msg,
            })
        };
        let Some(first) = bases.first() else {
            return bad("need at least one kernel base".into());
        };
        if merge_weights.len() != bases.len() {
            return bad(format!(
                "{} bases but {} merge weights",
                bases.len(),
                merge_weights.len()
            ));
        }
        let shape = first.shape();
        if let Some((i, k)) = bases.iter().enumerate().find(|(_, k)| k.shape() != shape) {
            return bad(format!("base {i} has shape {:?}, base 0 has {shape:?}", k.shape()));
        }
        if let Some(b) = &bias {
            if b.len() != shape[0] {
                return bad(format!("bias has {} entries for {} output channels", b.len(), shape[0]));
            }
        }
        Ok(KernelBases {
            bases,
            merge_weights,
            bias,
            padding,
        })
    }

    pub fn bases(&self) -> &[Tensor] {
        &self.bases
    }

    pub fn merge_weights(&self) -> &[f64] {
        &self.merge_weights
    }

    /// The conv each base would define on its own (sharing bias and padding).
    pub fn base_conv(&self, i: usize) -> Conv2dParams {
        Conv2dParams {
            weight: self.bases[i].clone(),
            bias: self.bias.clone(),
            stride: 1,
            padding: self.padding,
            dilation: 1,
            groups: 1,
        }
    }
}

/// Collapses the bases into the single kernel that is kept at inference.
pub fn merge_kernel_bases(kb: &KernelBases) -> Conv2dParams {
    let mut acc = vec![0.0; kb.bases[0].numel()];
    for (k, &pi) in kb.bases.iter().zip(&kb.merge_weights) {
        for (a, &w) in acc.iter_mut().zip(k.data()) {
            *a += pi * w;
        }
    }
    Conv2dParams {
        weight: Tensor::new(kb.bases[0].shape(), acc).expect("same shape as bases"),
        ..kb.base_conv(0)
    }
}
