#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use effsr::zoo::init_weights;
use effsr::{Conv2dParams, Graph, GraphBuilder, Padding, ParamBlob, PortRef};

pub const NF: usize = 16;
pub const MID: usize = 32;

/// head -> 3 x [a -> act -> b -> +skip] -> tail; block 1 uses PReLU.
pub fn three_block_net(seed: u64) -> Graph {
    let c3 = |i, o| Conv2dParams::zeros(i, o, (3, 3), true, Padding::uniform(1));
    let mut b = GraphBuilder::new("gated", 1);
    let x = b.input(3);
    let mut h = b.conv("head", &x, c3(3, NF));
    for i in 0..3 {
        let t = b.conv(&format!("b{i}.a"), &h, c3(NF, MID));
        let t: PortRef = if i == 1 {
            b.prelu(&format!("b{i}.act"), &t, vec![0.25; MID])
        } else {
            b.leaky_relu(&format!("b{i}.act"), &t, 0.1)
        };
        let t = b.conv(&format!("b{i}.b"), &t, c3(MID, NF));
        h = b.add(&format!("b{i}.add"), &[h, t]);
    }
    let y = b.conv("tail", &h, c3(NF, 3));
    let mut g = b.finish(y).unwrap();
    init_weights(&mut g, seed);
    if let Some(ParamBlob::Prelu(s)) = g.param_mut("b1.act") {
        for (i, v) in s.iter_mut().enumerate() {
            *v = 0.05 * i as f64 - 0.3;
        }
    }
    g
}

/// Kahn's algorithm breaking ties by the *largest* id, the opposite of the
/// graph's own order.
pub fn reverse_tiebreak_order(g: &Graph) -> Vec<String> {
    let mut indeg: BTreeMap<&str, usize> = BTreeMap::new();
    let mut users: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for n in g.nodes() {
        let preds: BTreeSet<&str> = n.inputs.iter().map(|p| p.node.as_str()).collect();
        indeg.insert(&n.id, preds.len());
        for p in preds {
            users.entry(p).or_default().push(&n.id);
        }
    }
    let mut ready: BTreeSet<&str> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&k, _)| k).collect();
    let mut order = Vec::new();
    while let Some(id) = ready.pop_last() {
        order.push(id.to_string());
        for &u in users.get(id).map(Vec::as_slice).unwrap_or(&[]) {
            let d = indeg.get_mut(u).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(u);
            }
        }
    }
    assert_eq!(order.len(), indeg.len(), "graph has a cycle");
    order
}
