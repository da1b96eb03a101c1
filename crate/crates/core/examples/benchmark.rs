//! Best-of-trials CPU timing of two zoo models on the same inputs, plus the
//! protocol itself demonstrated against a scripted clock.
//!
//!     cargo run --release --example benchmark

use std::time::Duration;

use effsr::eval::{run_benchmark, BenchmarkConfig, FakeClock, MonotonicClock};
use effsr::{zoo, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> effsr::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let images: Vec<Tensor> = (0..2)
        .map(|_| Tensor::random_uniform([1, 3, 64, 64], 0.0, 255.0, &mut rng))
        .collect();
    let cfg = BenchmarkConfig::default();

    // scripted clock: per-run durations 10, 30 / 20, 20 / 50, 10 ms
    let ms = Duration::from_millis;
    let fake = FakeClock::new(vec![ms(10), ms(30), ms(20), ms(20), ms(50), ms(10)]);
    let r = run_benchmark(&zoo::build_default("pan")?, &images[..], &cfg, &fake)?;
    println!(
        "fake clock: trial means {:?} -> runtime {:.3}s",
        r.trial_means_s, r.runtime_s
    );

    for name in ["rfdn", "msrresnet"] {
        let g = zoo::build(name, 1)?;
        let r = run_benchmark(&g, &images, &cfg, &MonotonicClock::default())?;
        print!("{}", r.to_text());
    }
    Ok(())
}
