//! Model-spec files: JSON description of a graph's nodes and parameter
//! geometry, without weight values (those live in a weight file).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Graph, Node, ParamBlob};
use crate::error::{Error, Result};
use crate::tensor::{Conv2dParams, Padding, Tensor};

pub const FORMAT: &str = "effsr-model-spec/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamDecl {
    Conv {
        name: String,
        c_out: usize,
        c_in: usize,
        kernel: [usize; 2],
        bias: bool,
        stride: usize,
        padding: Padding,
        dilation: usize,
        groups: usize,
    },
    Prelu {
        name: String,
        channels: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpecFile {
    pub format: String,
    pub name: String,
    pub scale: usize,
    pub params: Vec<ParamDecl>,
    /// Nodes in canonical topological order.
    pub nodes: Vec<Node>,
}

impl ModelSpecFile {
    pub fn from_graph(graph: &Graph) -> Self {
        let params = graph
            .params()
            .iter()
            .map(|(name, blob)| match blob {
                ParamBlob::Conv(p) => {
                    let (kh, kw) = p.kernel_size();
                    ParamDecl::Conv {
                        name: name.clone(),
                        c_out: p.out_channels(),
                        c_in: p.in_channels(),
                        kernel: [kh, kw],
                        bias: p.bias.is_some(),
                        stride: p.stride,
                        padding: p.padding,
                        dilation: p.dilation,
                        groups: p.groups,
                    }
                }
                ParamBlob::Prelu(s) => ParamDecl::Prelu {
                    name: name.clone(),
                    channels: s.len(),
                },
            })
            .collect();
        let nodes = graph
            .topo_order()
            .iter()
            .map(|id| graph.node(id).unwrap().clone())
            .collect();
        ModelSpecFile {
            format: FORMAT.to_string(),
            name: graph.name().to_string(),
            scale: graph.scale(),
            params,
            nodes,
        }
    }

    /// Builds the graph with zero-valued parameters.
    pub fn into_graph(self) -> Result<Graph> {
        if self.format != FORMAT {
            return Err(Error::Spec(format!(
                "unsupported format `{}` (expected `{FORMAT}`)",
                self.format
            )));
        }
        let mut params = BTreeMap::new();
        for decl in self.params {
            let (name, blob) = match decl {
                ParamDecl::Conv {
                    name,
                    c_out,
                    c_in,
                    kernel: [kh, kw],
                    bias,
                    stride,
                    padding,
                    dilation,
                    groups,
                } => {
                    if groups == 0 || c_in % groups != 0 {
                        return Err(Error::Spec(format!(
                            "blob `{name}`: c_in {c_in} not divisible by groups {groups}"
                        )));
                    }
                    let p = Conv2dParams {
                        weight: Tensor::zeros([c_out, c_in / groups, kh, kw]),
                        bias: bias.then(|| vec![0.0; c_out]),
                        stride,
                        padding,
                        dilation,
                        groups,
                    };
                    (name, ParamBlob::Conv(p))
                }
                ParamDecl::Prelu { name, channels } => (name, ParamBlob::Prelu(vec![0.0; channels])),
            };
            if params.insert(name.clone(), blob).is_some() {
                return Err(Error::Spec(format!("duplicate blob `{name}`")));
            }
        }
        Graph::from_parts(self.name, self.scale, self.nodes, params)
    }
}

pub fn to_json(graph: &Graph) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&ModelSpecFile::from_graph(graph))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<Graph> {
    serde_json::from_str::<ModelSpecFile>(text)?.into_graph()
}

pub fn write_spec(graph: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(graph)?).map_err(|e| Error::io(path, e))
}

pub fn read_spec(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
