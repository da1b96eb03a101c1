//! Exact graph transforms: asymmetric-branch (CAC) fusion, kernel-base
//! merging and zero-gate channel pruning.

mod bases;
mod cac;
mod prune;

pub use bases::{merge_kernel_bases, KernelBases};
pub use cac::{fuse_cac, fuse_cac_sites};
pub use prune::{execute_gated, prune_zero_gates, ChannelGates, ConvGates};
