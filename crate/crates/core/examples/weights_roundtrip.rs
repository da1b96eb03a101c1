//! Exports a model to the JSON model-spec plus binary weight file, reads
//! both back, and checks the reloaded graph runs identically.
//!
//!     cargo run --example weights_roundtrip

use effsr::graph::spec_file::{read_spec, write_spec};
use effsr::graph::weights::{load_weights, save_weights, DType};
use effsr::{zoo, Tensor};

fn main() -> effsr::Result<()> {
    let dir = std::env::temp_dir().join("effsr-weights-example");
    std::fs::create_dir_all(&dir).map_err(|e| effsr::Error::Eval(e.to_string()))?;
    let g = zoo::build("pan", 9)?;
    let x = Tensor::full([1, 3, 12, 12], 0.5);
    let want = g.execute(&x)?;

    for dtype in [DType::F64, DType::F32] {
        let (spec, weights) = (dir.join("pan.json"), dir.join(format!("pan-{dtype:?}.weights")));
        write_spec(&g, &spec)?;
        save_weights(&g, &weights, dtype)?;
        let mut back = read_spec(&spec)?;
        load_weights(&mut back, &weights)?;
        let size = std::fs::metadata(&weights).map(|m| m.len()).unwrap_or(0);
        println!(
            "{dtype:?}: {size} bytes, identical graph: {}, max |output diff| {:.2e}",
            back == g,
            back.execute(&x)?.max_abs_diff(&want)?
        );
    }
    Ok(())
}
