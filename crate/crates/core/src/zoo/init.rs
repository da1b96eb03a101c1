use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, ParamBlob};

/// Xavier-uniform weights, fan-in uniform biases, PReLU slopes of 0.25.
///
/// Blobs are visited in name order, so the same seed always yields the same
/// bytes. Every value is rounded through `f32` so `f32` weight files round
/// trip exactly.
pub fn init_weights(graph: &mut Graph, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let round = |v: f64| v as f32 as f64;
    for (_, blob) in graph.params_mut() {
        match blob {
            ParamBlob::Conv(p) => {
                let [co, cig, kh, kw] = p.weight.shape();
                let fan_in = (cig * kh * kw) as f64;
                let fan_out = (co * kh * kw) as f64;
                let bound = (6.0 / (fan_in + fan_out)).sqrt();
                for w in p.weight.data_mut() {
                    *w = round(rng.gen_range(-bound..bound));
                }
                if let Some(b) = &mut p.bias {
                    let bb = 1.0 / fan_in.sqrt();
                    for v in b.iter_mut() {
                        *v = round(rng.gen_range(-bb..bb));
                    }
                }
            }
            ParamBlob::Prelu(s) => s.fill(0.25),
        }
    }
}
