use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{Graph, Node, NodeKind, ParamBlob};
use crate::tensor::{Conv2dParams, Padding, Tensor};

fn geometry_error(msg: String) -> Error {
    Error::InvalidArgument { op: "fuse_cac", msg }
}

fn expect_branch(p: &Conv2dParams, which: &str, k: (usize, usize)) -> Result<()> {
    p.validate()?;
    if p.kernel_size() != k {
        return Err(geometry_error(format!(
            "{which} branch has a {}x{} kernel",
            p.kernel_size().0,
            p.kernel_size().1
        )));
    }
    if p.padding != Padding::same(k.0, k.1) {
        return Err(geometry_error(format!(
            "{which} branch padding {:?} is not same-padding {:?}",
            p.padding,
            Padding::same(k.0, k.1)
        )));
    }
    if p.stride != 1 || p.dilation != 1 {
        return Err(geometry_error(format!(
            "{which} branch must have stride 1 and dilation 1"
        )));
    }
    Ok(())
}

/// Folds parallel `3x3`, `1x3` and `3x1` branches into a single `3x3` conv.
///
/// The side kernels are embedded in the centre row / column of the square
/// kernel and all present biases are summed. The result always carries a
/// bias so its parameter count does not depend on which branches had one.
pub fn fuse_cac(k3x3: &Conv2dParams, k1x3: &Conv2dParams, k3x1: &Conv2dParams) -> Result<Conv2dParams> {
    expect_branch(k3x3, "3x3", (3, 3))?;
    expect_branch(k1x3, "1x3", (1, 3))?;
    expect_branch(k3x1, "3x1", (3, 1))?;
    let (co, ci, g) = (k3x3.out_channels(), k3x3.in_channels(), k3x3.groups);
    for (which, p) in [("1x3", k1x3), ("3x1", k3x1)] {
        if (p.out_channels(), p.in_channels(), p.groups) != (co, ci, g) {
            return Err(geometry_error(format!(
                "{which} branch maps {} -> {} (groups {}), 3x3 maps {ci} -> {co} (groups {g})",
                p.in_channels(),
                p.out_channels(),
                p.groups
            )));
        }
    }
    let cig = ci / g;
    let mut w = k3x3.weight.clone();
    let (hor, ver) = (k1x3.weight.data(), k3x1.weight.data());
    let data = w.data_mut();
    for oc in 0..co {
        for ic in 0..cig {
            let base = (oc * cig + ic) * 9;
            let side = (oc * cig + ic) * 3;
            for t in 0..3 {
                data[base + 3 + t] += hor[side + t];
                data[base + 3 * t + 1] += ver[side + t];
            }
        }
    }
    let mut bias = vec![0.0; co];
    for b in [&k3x3.bias, &k1x3.bias, &k3x1.bias].into_iter().flatten() {
        for (acc, v) in bias.iter_mut().zip(b) {
            *acc += v;
        }
    }
    Ok(Conv2dParams {
        weight: Tensor::new(w.shape(), w.into_data())?,
        bias: Some(bias),
        stride: 1,
        padding: Padding::uniform(1),
        dilation: 1,
        groups: g,
    })
}

/// Rewrites every `Add(conv3x3(x), conv1x3(x), conv3x1(x))` site into one
/// conv named after the add node. Graphs without sites come back unchanged,
/// so the pass is idempotent.
pub fn fuse_cac_sites(graph: &Graph) -> Result<Graph> {
    let mut nodes: BTreeMap<String, Node> = graph.nodes().map(|n| (n.id.clone(), n.clone())).collect();
    let mut params = graph.params().clone();
    let mut users: BTreeMap<&str, usize> = BTreeMap::new();
    for n in graph.nodes() {
        if let Some(p) = n.kind.param() {
            *users.entry(p).or_default() += 1;
        }
    }
    let mut fused_any = false;
    for add in graph
        .nodes()
        .filter(|n| matches!(n.kind, NodeKind::Add) && n.inputs.len() == 3)
    {
        let Some(site) = match_site(graph, add, &users) else {
            continue;
        };
        let [sq, hor, ver] = site;
        let fused = fuse_cac(&conv_of(graph, sq)?, &conv_of(graph, hor)?, &conv_of(graph, ver)?)
            .map_err(|e| e.at_node(&add.id))?;
        let src = graph.node(sq).expect("matched node").inputs[0].clone();
        for id in [sq, hor, ver] {
            let n = nodes.remove(id).expect("matched node");
            params.remove(n.kind.param().expect("conv has a blob"));
        }
        if params.contains_key(&add.id) {
            return Err(Error::Graph(format!(
                "cannot fuse CAC site `{}`: a parameter blob with that name already exists",
                add.id
            )));
        }
        params.insert(add.id.clone(), ParamBlob::Conv(fused));
        nodes.insert(
            add.id.clone(),
            Node {
                id: add.id.clone(),
                kind: NodeKind::Conv2d { param: add.id.clone() },
                inputs: vec![src],
            },
        );
        fused_any = true;
    }
    if !fused_any {
        return Ok(graph.clone());
    }
    let name = graph.name().strip_suffix("-train").unwrap_or(graph.name()).to_string();
    Graph::from_parts(name, graph.scale(), nodes.into_values(), params)
}

fn conv_of(graph: &Graph, id: &str) -> Result<Conv2dParams> {
    graph
        .conv_params(id)
        .cloned()
        .ok_or_else(|| Error::Graph(format!("`{id}` is not a conv")))
}

/// Returns `[3x3, 1x3, 3x1]` node ids when `add` is a CAC site.
fn match_site<'g>(graph: &'g Graph, add: &'g Node, users: &BTreeMap<&str, usize>) -> Option<[&'g str; 3]> {
    let mut by_kernel: BTreeMap<(usize, usize), &str> = BTreeMap::new();
    let mut sources = BTreeSet::new();
    for e in &add.inputs {
        let n = graph.node(&e.node)?;
        let blob = n.kind.param()?;
        let p = graph.conv_params(&n.id)?;
        let sole_consumer = graph.consumers(&n.id).len() == 1;
        if e.port != 0 || !sole_consumer || users[blob] != 1 || p.stride != 1 || p.dilation != 1 {
            return None;
        }
        let k = p.kernel_size();
        if p.padding != Padding::same(k.0, k.1) {
            return None;
        }
        by_kernel.insert(k, &n.id);
        sources.insert(&n.inputs[0]);
    }
    if sources.len() != 1 {
        return None;
    }
    Some([
        by_kernel.get(&(3, 3)).copied()?,
        by_kernel.get(&(1, 3)).copied()?,
        by_kernel.get(&(3, 1)).copied()?,
    ])
}
