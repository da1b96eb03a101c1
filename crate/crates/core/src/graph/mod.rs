//! Graph IR for image-to-image CNNs: typed nodes, named parameter blobs,
//! shape inference and topological execution.

mod builder;
mod node;
pub mod spec_file;
pub mod weights;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::tensor::{self, Conv2dParams, Dims, Tensor};

pub use builder::GraphBuilder;
pub use node::{InterpSize, Node, NodeKind, PortRef};

/// A named parameter blob.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamBlob {
    Conv(Conv2dParams),
    /// Per-channel PReLU slopes.
    Prelu(Vec<f64>),
}

impl ParamBlob {
    pub fn num_params(&self) -> usize {
        match self {
            ParamBlob::Conv(p) => p.num_params(),
            ParamBlob::Prelu(s) => s.len(),
        }
    }

    pub fn as_conv(&self) -> Option<&Conv2dParams> {
        match self {
            ParamBlob::Conv(p) => Some(p),
            ParamBlob::Prelu(_) => None,
        }
    }

    pub fn as_conv_mut(&mut self) -> Option<&mut Conv2dParams> {
        match self {
            ParamBlob::Conv(p) => Some(p),
            ParamBlob::Prelu(_) => None,
        }
    }
}

/// Single-input, single-output DAG of typed nodes.
///
/// Construct through [`GraphBuilder`] or [`Graph::from_parts`], both of which
/// validate the structural invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    name: String,
    scale: usize,
    nodes: BTreeMap<String, Node>,
    params: BTreeMap<String, ParamBlob>,
    input: String,
    output: String,
    order: Vec<String>,
}

/// Hook invoked around every convolution during [`Graph::execute_with`].
pub trait ExecHook {
    fn conv_input(&self, _node: &str, _input: &mut Tensor) {}
    fn conv_output(&self, _node: &str, _output: &mut Tensor) {}
}

struct NoHook;
impl ExecHook for NoHook {}

/// Output dims per node (one entry per output port).
pub type ShapeMap = BTreeMap<String, Vec<Dims>>;

impl Graph {
    /// Assembles and validates a graph.
    pub fn from_parts(
        name: impl Into<String>,
        scale: usize,
        nodes: impl IntoIterator<Item = Node>,
        params: BTreeMap<String, ParamBlob>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for n in nodes {
            if let Some(prev) = map.insert(n.id.clone(), n) {
                return Err(Error::Graph(format!("duplicate node id `{}`", prev.id)));
            }
        }
        let mut g = Graph {
            name: name.into(),
            scale,
            nodes: map,
            params,
            input: String::new(),
            output: String::new(),
            order: Vec::new(),
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&mut self) -> Result<()> {
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        let mut referenced = BTreeSet::new();
        for n in self.nodes.values() {
            n.kind.validate().map_err(|e| e.at_node(&n.id))?;
            match n.kind {
                NodeKind::Input { .. } => inputs.push(n.id.clone()),
                NodeKind::Output => outputs.push(n.id.clone()),
                _ => {}
            }
            let (lo, hi) = n.kind.arity();
            if n.inputs.len() < lo || n.inputs.len() > hi {
                return Err(Error::Graph(format!(
                    "node `{}` ({}) has {} inputs",
                    n.id,
                    n.kind.name(),
                    n.inputs.len()
                )));
            }
            for e in &n.inputs {
                let src = self
                    .nodes
                    .get(&e.node)
                    .ok_or_else(|| Error::Graph(format!("node `{}` reads unknown node `{}`", n.id, e.node)))?;
                if e.port >= src.kind.num_outputs() {
                    return Err(Error::Graph(format!(
                        "node `{}` reads port {} of `{}` which has {} outputs",
                        n.id,
                        e.port,
                        src.id,
                        src.kind.num_outputs()
                    )));
                }
            }
            if let Some(p) = n.kind.param() {
                let blob = self
                    .params
                    .get(p)
                    .ok_or_else(|| Error::Graph(format!("node `{}` references missing blob `{p}`", n.id)))?;
                let ok = match (&n.kind, blob) {
                    (NodeKind::Conv2d { .. }, ParamBlob::Conv(c)) => {
                        c.validate().map_err(|e| e.at_node(&n.id))?;
                        true
                    }
                    (NodeKind::Prelu { .. }, ParamBlob::Prelu(_)) => true,
                    _ => false,
                };
                if !ok {
                    return Err(Error::Graph(format!(
                        "node `{}` references blob `{p}` of the wrong kind",
                        n.id
                    )));
                }
                referenced.insert(p.to_string());
            }
        }
        if inputs.len() != 1 {
            return Err(Error::Graph(format!(
                "expected exactly one input node, found {inputs:?}"
            )));
        }
        if outputs.len() != 1 {
            return Err(Error::Graph(format!(
                "expected exactly one output node, found {outputs:?}"
            )));
        }
        let unused: Vec<_> = self
            .params
            .keys()
            .filter(|k| !referenced.contains(*k))
            .cloned()
            .collect();
        if !unused.is_empty() {
            return Err(Error::Graph(format!("unreferenced parameter blobs {unused:?}")));
        }
        self.input = inputs.pop().unwrap();
        self.output = outputs.pop().unwrap();
        self.order = self.kahn_order()?;
        Ok(())
    }

    /// Kahn's algorithm, always taking the lexicographically smallest ready node.
    fn kahn_order(&self) -> Result<Vec<String>> {
        let mut indeg: BTreeMap<&str, usize> = BTreeMap::new();
        let mut consumers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for n in self.nodes.values() {
            indeg.entry(&n.id).or_insert(0);
            let unique: BTreeSet<&str> = n.inputs.iter().map(|e| e.node.as_str()).collect();
            *indeg.get_mut(n.id.as_str()).unwrap() += unique.len();
            for src in unique {
                consumers.entry(src).or_default().push(&n.id);
            }
        }
        let mut ready: BTreeSet<&str> = indeg.iter().filter(|(_, &d)| d == 0).map(|(k, _)| *k).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(id) = ready.pop_first() {
            order.push(id.to_string());
            for &c in consumers.get(id).map(Vec::as_slice).unwrap_or(&[]) {
                let d = indeg.get_mut(c).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() != self.nodes.len() {
            let stuck: Vec<_> = indeg
                .iter()
                .filter(|(k, _)| !order.iter().any(|o| o == *k))
                .map(|(k, _)| k.to_string())
                .collect();
            return Err(Error::Graph(format!("graph has a cycle through {stuck:?}")));
        }
        Ok(order)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Designed upscaling factor.
    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn params(&self) -> &BTreeMap<String, ParamBlob> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<&ParamBlob> {
        self.params.get(name)
    }

    /// Mutable access to a blob. Geometry changes are rejected by the next
    /// shape inference, so callers should only touch values.
    pub fn param_mut(&mut self, name: &str) -> Option<&mut ParamBlob> {
        self.params.get_mut(name)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = (&String, &mut ParamBlob)> {
        self.params.iter_mut()
    }

    /// Conv parameters used by a conv node.
    pub fn conv_params(&self, node: &str) -> Option<&Conv2dParams> {
        let p = self.nodes.get(node)?.kind.param()?;
        self.params.get(p)?.as_conv()
    }

    pub fn input_id(&self) -> &str {
        &self.input
    }

    pub fn output_id(&self) -> &str {
        &self.output
    }

    pub fn input_channels(&self) -> usize {
        match self.nodes[&self.input].kind {
            NodeKind::Input { channels } => channels,
            _ => unreachable!(),
        }
    }

    /// Canonical topological order (lexicographic tiebreak on node id).
    pub fn topo_order(&self) -> &[String] {
        &self.order
    }

    /// Ids of nodes reading any output of `id`, in id order.
    pub fn consumers(&self, id: &str) -> Vec<&Node> {
        self.nodes
            .values()
            .filter(|n| n.inputs.iter().any(|e| e.node == id))
            .collect()
    }

    /// Decomposes into nodes and params for graph-to-graph rewrites.
    pub fn into_parts(self) -> (String, usize, BTreeMap<String, Node>, BTreeMap<String, ParamBlob>) {
        (self.name, self.scale, self.nodes, self.params)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Output dims of every node for a given input shape.
    pub fn infer_shapes(&self, input: Dims) -> Result<ShapeMap> {
        let mut shapes: ShapeMap = BTreeMap::new();
        for id in &self.order {
            let n = &self.nodes[id];
            let in_dims: Vec<Dims> = n.inputs.iter().map(|e| shapes[&e.node][e.port]).collect();
            let out = if let NodeKind::Input { channels } = n.kind {
                if input[1] != channels {
                    return Err(Error::ShapeInference {
                        from: "<caller>".into(),
                        to: n.id.clone(),
                        dims: vec![input],
                        msg: format!("input node declares {channels} channels"),
                    });
                }
                if input.contains(&0) {
                    return Err(Error::ShapeInference {
                        from: "<caller>".into(),
                        to: n.id.clone(),
                        dims: vec![input],
                        msg: "input dims must be non-zero".into(),
                    });
                }
                vec![input]
            } else {
                self.node_dims(n, &in_dims).map_err(|e| Error::ShapeInference {
                    from: n.inputs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","),
                    to: n.id.clone(),
                    dims: in_dims.clone(),
                    msg: e.to_string(),
                })?
            };
            shapes.insert(id.clone(), out);
        }
        Ok(shapes)
    }

    fn node_dims(&self, n: &Node, inputs: &[Dims]) -> Result<Vec<Dims>> {
        let one = |d: Dims| Ok(vec![d]);
        match &n.kind {
            NodeKind::Input { .. } => unreachable!(),
            NodeKind::Output | NodeKind::LeakyRelu { .. } | NodeKind::Relu | NodeKind::Sigmoid => one(inputs[0]),
            NodeKind::Prelu { param } => match &self.params[param] {
                ParamBlob::Prelu(s) if s.len() == inputs[0][1] => one(inputs[0]),
                ParamBlob::Prelu(s) => Err(Error::shape("prelu", "slope count", inputs[0][1], s.len())),
                ParamBlob::Conv(_) => unreachable!(),
            },
            NodeKind::Conv2d { param } => one(self.params[param].as_conv().unwrap().output_dims(inputs[0])?),
            NodeKind::PixelShuffle { factor } => one(tensor::pixel_shuffle_dims(inputs[0], *factor)?),
            NodeKind::Interpolate { size, .. } => {
                let [b, c, h, w] = inputs[0];
                match size {
                    InterpSize::Scale(s) => one([b, c, h * s, w * s]),
                    InterpSize::LikeInput => one([b, c, inputs[1][2], inputs[1][3]]),
                }
            }
            NodeKind::Concat => one(tensor::concat_dims(inputs)?),
            NodeKind::Split { sizes } => tensor::split_dims(inputs[0], sizes),
            NodeKind::Add => {
                if let Some(bad) = inputs.iter().find(|d| **d != inputs[0]) {
                    return Err(Error::shape(
                        "add",
                        "operand shape",
                        format!("{:?}", inputs[0]),
                        format!("{bad:?}"),
                    ));
                }
                one(inputs[0])
            }
            NodeKind::Mul => one(tensor::mul_dims(inputs[0], inputs[1])?),
            NodeKind::AvgPool { kernel, stride } | NodeKind::MaxPool { kernel, stride } => {
                one(tensor::pool_dims(inputs[0], *kernel, *stride)?)
            }
            NodeKind::GlobalPool { .. } => {
                let [b, c, _, _] = inputs[0];
                one([b, c, 1, 1])
            }
        }
    }

    fn eval_node(&self, n: &Node, inputs: &[&Tensor], hook: &dyn ExecHook) -> Result<Vec<Tensor>> {
        let one = |t: Tensor| Ok(vec![t]);
        match &n.kind {
            NodeKind::Input { .. } => unreachable!(),
            NodeKind::Output => one(inputs[0].clone()),
            NodeKind::Conv2d { param } => {
                let p = self.params[param].as_conv().unwrap();
                let mut x = inputs[0].clone();
                hook.conv_input(&n.id, &mut x);
                let mut y = tensor::conv2d(&x, p)?;
                hook.conv_output(&n.id, &mut y);
                one(y)
            }
            NodeKind::LeakyRelu { slope } => one(tensor::leaky_relu(inputs[0], *slope)),
            NodeKind::Relu => one(tensor::relu(inputs[0])),
            NodeKind::Prelu { param } => match &self.params[param] {
                ParamBlob::Prelu(s) => one(tensor::prelu(inputs[0], s)?),
                ParamBlob::Conv(_) => unreachable!(),
            },
            NodeKind::Sigmoid => one(tensor::sigmoid(inputs[0])),
            NodeKind::PixelShuffle { factor } => one(tensor::pixel_shuffle(inputs[0], *factor)?),
            NodeKind::Interpolate { mode, size } => match size {
                InterpSize::Scale(s) => one(tensor::interpolate(inputs[0], *s, *mode)?),
                InterpSize::LikeInput => one(tensor::resize(inputs[0], inputs[1].height(), inputs[1].width(), *mode)?),
            },
            NodeKind::Concat => one(tensor::concat(inputs)?),
            NodeKind::Split { sizes } => tensor::split(inputs[0], sizes),
            NodeKind::Add => one(tensor::add(inputs)?),
            NodeKind::Mul => one(tensor::mul(inputs[0], inputs[1])?),
            NodeKind::AvgPool { kernel, stride } => one(tensor::avg_pool(inputs[0], *kernel, *stride)?),
            NodeKind::MaxPool { kernel, stride } => one(tensor::max_pool(inputs[0], *kernel, *stride)?),
            NodeKind::GlobalPool { stat } => one(tensor::global_pool(inputs[0], *stat)?),
        }
    }

    /// Runs the graph in canonical topological order.
    pub fn execute(&self, input: &Tensor) -> Result<Tensor> {
        self.run(input, &self.order, &NoHook)
    }

    /// Runs the graph with a hook around every convolution.
    pub fn execute_with(&self, input: &Tensor, hook: &dyn ExecHook) -> Result<Tensor> {
        self.run(input, &self.order, hook)
    }

    /// Runs the graph in a caller-supplied order, which must be a
    /// topological order covering every node exactly once.
    pub fn execute_in_order(&self, input: &Tensor, order: &[String]) -> Result<Tensor> {
        let mut seen = BTreeSet::new();
        for id in order {
            let n = self
                .nodes
                .get(id)
                .ok_or_else(|| Error::Graph(format!("order names unknown node `{id}`")))?;
            if let Some(e) = n.inputs.iter().find(|e| !seen.contains(&e.node)) {
                return Err(Error::Graph(format!("order runs `{id}` before its input `{}`", e.node)));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::Graph(format!("order repeats `{id}`")));
            }
        }
        if seen.len() != self.nodes.len() {
            return Err(Error::Graph("order does not cover every node".into()));
        }
        self.run(input, order, &NoHook)
    }

    fn run(&self, input: &Tensor, order: &[String], hook: &dyn ExecHook) -> Result<Tensor> {
        self.infer_shapes(input.shape())?;
        // Remaining reads per (node, port) so intermediate tensors can be dropped early.
        let mut pending: HashMap<PortRef, usize> = HashMap::new();
        for n in self.nodes.values() {
            for e in &n.inputs {
                *pending.entry(e.clone()).or_default() += 1;
            }
        }
        let mut values: HashMap<PortRef, Tensor> = HashMap::new();
        for id in order {
            let n = &self.nodes[id];
            let outs = if let NodeKind::Input { .. } = n.kind {
                vec![input.clone()]
            } else if let NodeKind::Output = n.kind {
                let e = &n.inputs[0];
                return Ok(values
                    .remove(e)
                    .unwrap_or_else(|| panic!("value for {e} already released")));
            } else {
                let args: Vec<&Tensor> = n.inputs.iter().map(|e| &values[e]).collect();
                let outs = self.eval_node(n, &args, hook).map_err(|e| e.at_node(id))?;
                for e in &n.inputs {
                    let left = pending.get_mut(e).unwrap();
                    *left -= 1;
                    if *left == 0 {
                        values.remove(e);
                    }
                }
                outs
            };
            for (port, t) in outs.into_iter().enumerate() {
                let key = PortRef::with_port(id.clone(), port);
                if pending.get(&key).copied().unwrap_or(0) > 0 {
                    values.insert(key, t);
                }
            }
        }
        unreachable!("validated graphs always reach their output node")
    }
}
