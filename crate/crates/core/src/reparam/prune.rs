use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ExecHook, Graph, Node, NodeKind, ParamBlob};
use crate::tensor::{Conv2dParams, Tensor};

/// Gates of one conv: `pre` scales input channels, `post` scales output
/// channels (after the bias).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvGates {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post: Option<Vec<f64>>,
}

/// Per-conv channel gates, keyed by conv node id. Serialised as a JSON object
/// `{"node": {"pre": [...], "post": [...]}}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelGates {
    gates: BTreeMap<String, ConvGates>,
}

impl ChannelGates {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_pre(&mut self, node: impl Into<String>, gate: Vec<f64>) -> &mut Self {
        self.gates.entry(node.into()).or_default().pre = Some(gate);
        self
    }

    pub fn set_post(&mut self, node: impl Into<String>, gate: Vec<f64>) -> &mut Self {
        self.gates.entry(node.into()).or_default().post = Some(gate);
        self
    }

    pub fn get(&self, node: &str) -> Option<&ConvGates> {
        self.gates.get(node)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ConvGates)> {
        self.gates.iter()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks that every gate sits on an ungrouped, unshared conv and has the
    /// length of the side it annotates.
    pub fn validate(&self, graph: &Graph) -> Result<()> {
        let users = blob_users(graph);
        for (id, g) in &self.gates {
            let p = graph
                .conv_params(id)
                .ok_or_else(|| Error::Prune(format!("gated node `{id}` is not a conv")))?;
            let blob = graph.node(id).and_then(|n| n.kind.param()).expect("conv has a blob");
            if p.groups != 1 {
                return Err(Error::Prune(format!(
                    "gated conv `{id}` is grouped ({} groups)",
                    p.groups
                )));
            }
            if users[blob] != 1 {
                return Err(Error::Prune(format!(
                    "gated conv `{id}` shares blob `{blob}` with another node"
                )));
            }
            for (side, gate, want) in [("pre", &g.pre, p.in_channels()), ("post", &g.post, p.out_channels())] {
                let Some(gate) = gate else { continue };
                if gate.len() != want {
                    return Err(Error::Prune(format!(
                        "{side}-gate of `{id}` has {} entries, conv has {want} channels",
                        gate.len()
                    )));
                }
                if let Some(v) = gate.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Prune(format!("{side}-gate of `{id}` contains {v}")));
                }
            }
        }
        Ok(())
    }
}

fn blob_users(graph: &Graph) -> BTreeMap<&str, usize> {
    let mut users = BTreeMap::new();
    for n in graph.nodes() {
        if let Some(p) = n.kind.param() {
            *users.entry(p).or_default() += 1;
        }
    }
    users
}

fn scale_channels(t: &mut Tensor, gate: &[f64]) {
    let [n, c, h, w] = t.shape();
    let data = t.data_mut();
    for b in 0..n {
        for (ch, &g) in gate.iter().enumerate().take(c) {
            let at = (b * c + ch) * h * w;
            for v in &mut data[at..at + h * w] {
                *v *= g;
            }
        }
    }
}

struct GateHook<'a>(&'a ChannelGates);

impl ExecHook for GateHook<'_> {
    fn conv_input(&self, node: &str, input: &mut Tensor) {
        if let Some(g) = self.0.get(node).and_then(|g| g.pre.as_deref()) {
            scale_channels(input, g);
        }
    }

    fn conv_output(&self, node: &str, output: &mut Tensor) {
        if let Some(g) = self.0.get(node).and_then(|g| g.post.as_deref()) {
            scale_channels(output, g);
        }
    }
}

/// Runs the graph with gates applied around each gated conv.
pub fn execute_gated(graph: &Graph, gates: &ChannelGates, input: &Tensor) -> Result<Tensor> {
    gates.validate(graph)?;
    graph.execute_with(input, &GateHook(gates))
}

/// Where the output channels of a conv go, up to the next conv(s).
struct Chain {
    /// Zero-preserving activations between the conv and its readers.
    acts: Vec<String>,
    /// Convs that read the channels.
    convs: Vec<String>,
    /// First reader that stops channels from being removed.
    blocker: Option<String>,
}

fn is_passthrough(kind: &NodeKind) -> bool {
    matches!(
        kind,
        NodeKind::Relu | NodeKind::LeakyRelu { .. } | NodeKind::Prelu { .. }
    )
}

fn prunable_conv(graph: &Graph, n: &Node, users: &BTreeMap<&str, usize>) -> bool {
    match (graph.conv_params(&n.id), n.kind.param()) {
        (Some(p), Some(blob)) => p.groups == 1 && users[blob] == 1,
        _ => false,
    }
}

fn chain_of(graph: &Graph, conv: &str, users: &BTreeMap<&str, usize>) -> Chain {
    let mut chain = Chain {
        acts: Vec::new(),
        convs: Vec::new(),
        blocker: None,
    };
    let mut stack = vec![conv.to_string()];
    while let Some(from) = stack.pop() {
        for c in graph.consumers(&from) {
            let edge = format!("edge {from} -> {}", c.id);
            let blocked = match &c.kind {
                k if is_passthrough(k) => {
                    if let Some(blob) = k.param().filter(|b| users[b] != 1) {
                        Some(format!("PReLU `{}` whose slopes `{blob}` are shared ({edge})", c.id))
                    } else {
                        chain.acts.push(c.id.clone());
                        stack.push(c.id.clone());
                        None
                    }
                }
                NodeKind::Conv2d { .. } if prunable_conv(graph, c, users) => {
                    chain.convs.push(c.id.clone());
                    None
                }
                NodeKind::Conv2d { .. } => Some(format!("grouped or shared conv `{}` ({edge})", c.id)),
                NodeKind::Add => Some(format!("residual add `{}` ({edge})", c.id)),
                NodeKind::Output => Some(format!("the graph output ({edge})")),
                k => Some(format!("{} node `{}` ({edge})", k.name(), c.id)),
            };
            if chain.blocker.is_none() {
                chain.blocker = blocked;
            }
        }
    }
    chain.convs.sort();
    chain
}

/// The conv whose output reaches `node`'s input through pass-through
/// activations only.
fn producer_of<'g>(graph: &'g Graph, node: &str) -> &'g Node {
    let mut n = graph.node(node).expect("node exists");
    loop {
        n = graph.node(&n.inputs[0].node).expect("validated edge");
        if !is_passthrough(&n.kind) {
            return n;
        }
    }
}

fn fold_gates(p: &mut Conv2dParams, g: &ConvGates) {
    let [co, ci, kh, kw] = p.weight.shape();
    let k = kh * kw;
    let w = p.weight.data_mut();
    if let Some(pre) = &g.pre {
        for o in 0..co {
            for (i, &s) in pre.iter().enumerate() {
                for v in &mut w[(o * ci + i) * k..(o * ci + i + 1) * k] {
                    *v *= s;
                }
            }
        }
    }
    if let Some(post) = &g.post {
        for (o, &s) in post.iter().enumerate() {
            for v in &mut w[o * ci * k..(o + 1) * ci * k] {
                *v *= s;
            }
        }
        if let Some(b) = &mut p.bias {
            for (v, s) in b.iter_mut().zip(post) {
                *v *= s;
            }
        }
    }
}

fn keep_outputs(p: &Conv2dParams, keep: &[usize]) -> Conv2dParams {
    let [_, ci, kh, kw] = p.weight.shape();
    let row = ci * kh * kw;
    let src = p.weight.data();
    let data = keep
        .iter()
        .flat_map(|&o| src[o * row..(o + 1) * row].iter().copied())
        .collect();
    Conv2dParams {
        weight: Tensor::new([keep.len(), ci, kh, kw], data).expect("sliced rows"),
        bias: p.bias.as_ref().map(|b| keep.iter().map(|&o| b[o]).collect()),
        ..p.clone()
    }
}

fn keep_inputs(p: &Conv2dParams, keep: &[usize]) -> Conv2dParams {
    let [co, ci, kh, kw] = p.weight.shape();
    let k = kh * kw;
    let src = p.weight.data();
    let mut data = Vec::with_capacity(co * keep.len() * k);
    for o in 0..co {
        for &i in keep {
            data.extend_from_slice(&src[(o * ci + i) * k..(o * ci + i + 1) * k]);
        }
    }
    Conv2dParams {
        weight: Tensor::new([co, keep.len(), kh, kw], data).expect("sliced columns"),
        ..p.clone()
    }
}

fn zeros_of(g: Option<&Vec<f64>>) -> BTreeSet<usize> {
    g.map(|g| {
        g.iter()
            .enumerate()
            .filter(|(_, &v)| v == 0.0)
            .map(|(i, _)| i)
            .collect()
    })
    .unwrap_or_default()
}

fn conv_blob<'a>(graph: &'a Graph, id: &str) -> &'a str {
    graph.node(id).and_then(|n| n.kind.param()).expect("conv has a blob")
}

fn conv_mut<'a>(params: &'a mut BTreeMap<String, ParamBlob>, blob: &str) -> &'a mut Conv2dParams {
    params
        .get_mut(blob)
        .and_then(ParamBlob::as_conv_mut)
        .expect("conv blob")
}

/// Folds every gate into its conv and deletes channels whose gate is exactly
/// zero, keeping the executed output identical to [`execute_gated`].
///
/// Output channel `c` of conv `p` is deleted when `p`'s post-gate is zero at
/// `c`, or when every conv reading `p`'s output has a zero pre-gate at `c`.
/// Channels may flow through ReLU / leaky ReLU / PReLU on the way; any other
/// reader (residual add, concat, sigmoid, the graph output, ...) keeps the
/// full width and makes a zero gate on that channel an error.
pub fn prune_zero_gates(graph: &Graph, gates: &ChannelGates) -> Result<Graph> {
    gates.validate(graph)?;
    let users = blob_users(graph);
    let mut params = graph.params().clone();
    for (id, g) in gates.iter() {
        fold_gates(conv_mut(&mut params, conv_blob(graph, id)), g);
    }

    // owner conv -> pre-gated readers that want channels removed
    let mut pre_requests: BTreeMap<String, Vec<(String, BTreeSet<usize>)>> = BTreeMap::new();
    for (id, g) in gates.iter() {
        let zeros = zeros_of(g.pre.as_ref());
        if zeros.is_empty() {
            continue;
        }
        let owner = producer_of(graph, id);
        if !prunable_conv(graph, owner, &users) {
            let c = zeros.first().expect("non-empty");
            return Err(Error::Prune(format!(
                "zero pre-gate on input channel {c} of `{id}` cannot be pruned: the channel is produced by {} node `{}`, not by a prunable conv",
                owner.kind.name(),
                owner.id
            )));
        }
        pre_requests
            .entry(owner.id.clone())
            .or_default()
            .push((id.clone(), zeros));
    }

    let mut owners: BTreeSet<String> = pre_requests.keys().cloned().collect();
    owners.extend(
        gates
            .iter()
            .filter(|(_, g)| !zeros_of(g.post.as_ref()).is_empty())
            .map(|(id, _)| id.clone()),
    );

    for p in owners {
        let chain = chain_of(graph, &p, &users);
        let mut delete = zeros_of(gates.get(&p).and_then(|g| g.post.as_ref()));
        let requests = pre_requests.remove(&p).unwrap_or_default();
        if chain.blocker.is_none() && !chain.convs.is_empty() {
            let unread: BTreeSet<usize> = (0..graph.conv_params(&p).expect("conv").out_channels())
                .filter(|c| {
                    chain.convs.iter().all(|m| {
                        gates
                            .get(m)
                            .and_then(|g| g.pre.as_ref())
                            .is_some_and(|pre| pre[*c] == 0.0)
                    })
                })
                .collect();
            delete.extend(unread);
        }
        if let (Some(&c), Some(blocker)) = (delete.iter().next(), &chain.blocker) {
            return Err(Error::Prune(format!(
                "cannot prune output channel {c} of `{p}`: it feeds {blocker}, which must keep its full width"
            )));
        }
        for (m, zeros) in &requests {
            if let Some(c) = zeros.iter().find(|c| !delete.contains(c)) {
                let why = match &chain.blocker {
                    Some(b) => format!("`{p}` also feeds {b}"),
                    None => format!("another reader of `{p}` still uses it"),
                };
                return Err(Error::Prune(format!(
                    "zero pre-gate on input channel {c} of `{m}` cannot be pruned: {why}"
                )));
            }
        }
        if delete.is_empty() {
            continue;
        }
        let width = graph.conv_params(&p).expect("conv").out_channels();
        let keep: Vec<usize> = (0..width).filter(|c| !delete.contains(c)).collect();
        if keep.is_empty() {
            return Err(Error::Prune(format!("every output channel of `{p}` is gated to zero")));
        }
        let blob = conv_blob(graph, &p);
        let sliced = keep_outputs(conv_mut(&mut params, blob), &keep);
        *conv_mut(&mut params, blob) = sliced;
        for a in &chain.acts {
            if let Some(blob) = graph.node(a).and_then(|n| n.kind.param()) {
                if let Some(ParamBlob::Prelu(s)) = params.get_mut(blob) {
                    *s = keep.iter().map(|&c| s[c]).collect();
                }
            }
        }
        for m in &chain.convs {
            let blob = conv_blob(graph, m);
            let sliced = keep_inputs(conv_mut(&mut params, blob), &keep);
            *conv_mut(&mut params, blob) = sliced;
        }
    }
    Graph::from_parts(graph.name(), graph.scale(), graph.nodes().cloned(), params)
}
