//! The evaluation pipeline end to end on synthetic images: degrade HR to LR,
//! super-resolve with a randomly initialised model, and score with PSNR on
//! 8-bit outputs after shaving a 4-pixel border.
//!
//!     cargo run --release --example psnr_protocol

use effsr::eval::{degrade, evaluate_model, format_db, make_lr, psnr, save_png, DEFAULT_SHAVE};
use effsr::{zoo, Tensor};

fn main() -> effsr::Result<()> {
    let dir = std::env::temp_dir().join("effsr-psnr-example");
    let (hr, lr) = (dir.join("hr"), dir.join("lr"));
    std::fs::create_dir_all(&hr).map_err(|e| effsr::Error::Eval(e.to_string()))?;
    for (i, freq) in [0.05, 0.11, 0.2].iter().enumerate() {
        let img = Tensor::from_fn([1, 3, 64, 64], |_, c, y, x| {
            (127.5 + 120.0 * ((x as f64 * freq) + (y as f64 * freq * 0.7) + c as f64).sin()).round()
        });
        save_png(&hr.join(format!("img{i}.png")), &img)?;
    }
    let names = make_lr(&hr, &lr, 4)?;
    println!("degraded {} images to 16x16", names.len());

    // the border shave: images that only differ near the edge score +inf
    let a = Tensor::full([1, 3, 20, 20], 100.0);
    let b = Tensor::from_fn([1, 3, 20, 20], |_, _, y, x| if y < 4 || x >= 16 { 0.0 } else { 100.0 });
    println!("border-only difference: {} dB", format_db(psnr(&a, &b, DEFAULT_SHAVE)?));

    // degrade() is the per-image step behind make_lr()
    let lr0 = degrade(&effsr::eval::load_png(&hr.join("img0.png"))?, 4)?;
    println!("LR image 0 is {:?}", lr0.shape());

    let g = zoo::build("msrresnet", 0)?;
    let r = evaluate_model(&g, &lr, &hr, DEFAULT_SHAVE)?;
    print!("{}", r.to_csv()?);
    println!("mean PSNR of an untrained model: {} dB", format_db(r.mean_psnr_db));
    Ok(())
}
