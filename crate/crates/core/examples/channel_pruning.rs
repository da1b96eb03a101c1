//! Folds per-channel gates into a small residual network, deletes the
//! channels whose gate is zero, and shows that a channel feeding a residual
//! add cannot be removed.
//!
//!     cargo run --example channel_pruning

use effsr::analysis::count_params;
use effsr::reparam::{execute_gated, prune_zero_gates, ChannelGates};
use effsr::zoo::init_weights;
use effsr::{Conv2dParams, Graph, GraphBuilder, Padding, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn net() -> effsr::Result<Graph> {
    let c3 = |i, o| Conv2dParams::zeros(i, o, (3, 3), true, Padding::uniform(1));
    let mut b = GraphBuilder::new("toy", 1);
    let x = b.input(3);
    let mut h = b.conv("head", &x, c3(3, 16));
    for i in 0..2 {
        let t = b.conv(&format!("b{i}.a"), &h, c3(16, 32));
        let t = b.relu(&format!("b{i}.act"), &t);
        let t = b.conv(&format!("b{i}.b"), &t, c3(32, 16));
        h = b.add(&format!("b{i}.add"), &[h, t]);
    }
    let y = b.conv("tail", &h, c3(16, 3));
    let mut g = b.finish(y)?;
    init_weights(&mut g, 1);
    Ok(g)
}

fn main() -> effsr::Result<()> {
    let g = net()?;
    let mut gate = vec![1.0; 32];
    for c in (0..32).step_by(3) {
        gate[c] = 0.0;
    }
    gate[1] = 0.5; // non-zero gates are folded into the weights
    let mut gates = ChannelGates::new();
    gates.set_post("b0.a", gate.clone()).set_post("b1.a", gate);

    let pruned = prune_zero_gates(&g, &gates)?;
    let x = Tensor::random_uniform([1, 3, 12, 12], 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
    let d = pruned.execute(&x)?.max_abs_diff(&execute_gated(&g, &gates, &x)?)?;
    println!(
        "params {} -> {}; max |pruned - gated| = {d:.2e}",
        count_params(&g),
        count_params(&pruned)
    );
    println!(
        "b0.a now has {} output channels",
        pruned.conv_params("b0.a").unwrap().out_channels()
    );

    let mut bad = ChannelGates::new();
    let mut g16 = vec![1.0; 16];
    g16[0] = 0.0;
    bad.set_post("b1.b", g16);
    match prune_zero_gates(&g, &bad) {
        Err(e) => println!("refused as expected: {e}"),
        Ok(_) => println!("unexpectedly pruned a residual channel"),
    }
    Ok(())
}
