//! A conv whose kernel is a weighted sum of N bases costs the same as one
//! conv once the bases are merged.
//!
//!     cargo run --example kernel_bases

use effsr::reparam::{merge_kernel_bases, KernelBases};
use effsr::tensor::conv2d;
use effsr::{Padding, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> effsr::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let bases: Vec<Tensor> = (0..4)
        .map(|_| Tensor::random_uniform([8, 4, 3, 3], -1.0, 1.0, &mut rng))
        .collect();
    let kb = KernelBases::new(
        bases,
        vec![0.5, -0.25, 1.0, 0.125],
        Some(vec![0.1; 8]),
        Padding::uniform(1),
    )?;
    let merged = merge_kernel_bases(&kb);

    let x = Tensor::random_uniform([1, 4, 16, 16], -1.0, 1.0, &mut rng);
    // reference: sum of per-base outputs (each without bias) plus the bias once
    let mut acc = Tensor::zeros([1, 8, 16, 16]);
    for (i, &pi) in kb.merge_weights().iter().enumerate() {
        let mut c = kb.base_conv(i);
        c.bias = None;
        let y = conv2d(&x, &c)?;
        acc = Tensor::new(
            acc.shape(),
            acc.data().iter().zip(y.data()).map(|(a, b)| a + pi * b).collect(),
        )?;
    }
    let acc = acc.map(|v| v + 0.1);

    let d = conv2d(&x, &merged)?.max_abs_diff(&acc)?;
    println!(
        "{} bases -> 1 kernel of {} params; max |difference| {d:.2e}",
        kb.bases().len(),
        merged.num_params()
    );
    Ok(())
}
