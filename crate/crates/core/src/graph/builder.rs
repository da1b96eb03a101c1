use std::collections::BTreeMap;

use super::{Graph, Node, NodeKind, ParamBlob, PortRef};
use crate::error::Result;
use crate::tensor::{Conv2dParams, PoolStat, ResampleMode};

use super::InterpSize;

/// Incremental graph construction. Node ids are caller-chosen; the input node
/// is always `input` and the output node `output`.
#[derive(Debug)]
pub struct GraphBuilder {
    name: String,
    scale: usize,
    nodes: Vec<Node>,
    params: BTreeMap<String, ParamBlob>,
}

impl GraphBuilder {
    pub fn new(name: impl Into<String>, scale: usize) -> Self {
        GraphBuilder {
            name: name.into(),
            scale,
            nodes: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, channels: usize) -> PortRef {
        self.node("input", NodeKind::Input { channels }, &[])
    }

    pub fn node(&mut self, id: impl Into<String>, kind: NodeKind, inputs: &[PortRef]) -> PortRef {
        let id = id.into();
        self.nodes.push(Node {
            id: id.clone(),
            kind,
            inputs: inputs.to_vec(),
        });
        PortRef::new(id)
    }

    /// Conv node owning a blob of the same name.
    pub fn conv(&mut self, id: &str, x: &PortRef, params: Conv2dParams) -> PortRef {
        self.params.insert(id.to_string(), ParamBlob::Conv(params));
        self.conv_shared(id, x, id)
    }

    /// Conv node reusing an existing blob.
    pub fn conv_shared(&mut self, id: &str, x: &PortRef, param: &str) -> PortRef {
        self.node(
            id,
            NodeKind::Conv2d {
                param: param.to_string(),
            },
            std::slice::from_ref(x),
        )
    }

    pub fn prelu(&mut self, id: &str, x: &PortRef, slopes: Vec<f64>) -> PortRef {
        self.params.insert(id.to_string(), ParamBlob::Prelu(slopes));
        self.node(id, NodeKind::Prelu { param: id.to_string() }, std::slice::from_ref(x))
    }

    pub fn leaky_relu(&mut self, id: &str, x: &PortRef, slope: f64) -> PortRef {
        self.node(id, NodeKind::LeakyRelu { slope }, std::slice::from_ref(x))
    }

    pub fn relu(&mut self, id: &str, x: &PortRef) -> PortRef {
        self.node(id, NodeKind::Relu, std::slice::from_ref(x))
    }

    pub fn sigmoid(&mut self, id: &str, x: &PortRef) -> PortRef {
        self.node(id, NodeKind::Sigmoid, std::slice::from_ref(x))
    }

    pub fn add(&mut self, id: &str, xs: &[PortRef]) -> PortRef {
        self.node(id, NodeKind::Add, xs)
    }

    pub fn mul(&mut self, id: &str, a: &PortRef, b: &PortRef) -> PortRef {
        self.node(id, NodeKind::Mul, &[a.clone(), b.clone()])
    }

    pub fn concat(&mut self, id: &str, xs: &[PortRef]) -> PortRef {
        self.node(id, NodeKind::Concat, xs)
    }

    /// Channel split; returns one port per chunk.
    pub fn split(&mut self, id: &str, x: &PortRef, sizes: &[usize]) -> Vec<PortRef> {
        self.node(id, NodeKind::Split { sizes: sizes.to_vec() }, std::slice::from_ref(x));
        (0..sizes.len()).map(|p| PortRef::with_port(id, p)).collect()
    }

    pub fn pixel_shuffle(&mut self, id: &str, x: &PortRef, factor: usize) -> PortRef {
        self.node(id, NodeKind::PixelShuffle { factor }, std::slice::from_ref(x))
    }

    pub fn upsample(&mut self, id: &str, x: &PortRef, scale: usize, mode: ResampleMode) -> PortRef {
        self.node(
            id,
            NodeKind::Interpolate {
                mode,
                size: InterpSize::Scale(scale),
            },
            std::slice::from_ref(x),
        )
    }

    /// Resize `x` to the spatial size of `like`.
    pub fn resize_like(&mut self, id: &str, x: &PortRef, like: &PortRef, mode: ResampleMode) -> PortRef {
        self.node(
            id,
            NodeKind::Interpolate {
                mode,
                size: InterpSize::LikeInput,
            },
            &[x.clone(), like.clone()],
        )
    }

    pub fn max_pool(&mut self, id: &str, x: &PortRef, kernel: usize, stride: usize) -> PortRef {
        self.node(id, NodeKind::MaxPool { kernel, stride }, std::slice::from_ref(x))
    }

    pub fn global_pool(&mut self, id: &str, x: &PortRef, stat: PoolStat) -> PortRef {
        self.node(id, NodeKind::GlobalPool { stat }, std::slice::from_ref(x))
    }

    /// Adds the output node and validates the graph.
    pub fn finish(mut self, out: PortRef) -> Result<Graph> {
        self.node("output", NodeKind::Output, &[out]);
        Graph::from_parts(self.name, self.scale, self.nodes, self.params)
    }
}
