pub mod analysis;
pub mod cli;
pub mod error;
pub mod eval;
pub mod graph;
pub mod reparam;
pub mod stats;
pub mod tensor;
pub mod zoo;

pub use error::{Error, Result};
pub use graph::{Graph, GraphBuilder, NodeKind, ParamBlob, PortRef};
pub use tensor::{Conv2dParams, Dims, Padding, Tensor};
