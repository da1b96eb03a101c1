//! Collapses the asymmetric 1x3 / 3x1 training branches of FIMDN into plain
//! 3x3 convolutions and checks the deploy graph computes the same function.
//!
//!     cargo run --release --example cac_fusion

use effsr::analysis::analyze;
use effsr::reparam::fuse_cac_sites;
use effsr::{zoo, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> effsr::Result<()> {
    let train = zoo::build("fimdn-train", 42)?;
    let deploy = fuse_cac_sites(&train)?;

    let dims = [1, 3, 256, 256];
    for g in [&train, &deploy] {
        let r = analyze(g, dims)?;
        println!(
            "{:<12} params {:>8}  flops {:>6.2}G  activations {:>6.2}M  convs {}",
            r.model,
            r.params,
            r.flops_g(),
            r.activations_m(),
            r.conv_layers
        );
    }

    let x = Tensor::random_uniform([1, 3, 32, 32], 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(0));
    let d = deploy.execute(&x)?.max_rel_diff(&train.execute(&x)?)?;
    println!("max relative difference on a 32x32 input: {d:.2e}");
    Ok(())
}
