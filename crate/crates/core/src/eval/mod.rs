//! Challenge measurement protocol: shaved RGB PSNR, best-of-trials runtime,
//! PNG ingestion and bicubic LR generation.

mod bench;
mod degrade;
mod image_io;
mod psnr;

pub use bench::{run_benchmark, BenchmarkConfig, BenchmarkReport, Clock, Environment, FakeClock, MonotonicClock};
pub use degrade::{crop_to_multiple, degrade, make_lr};
pub use image_io::{list_pngs, load_dir, load_png, quantize, save_png};
pub use psnr::{evaluate_model, format_db, psnr, psnr_dirs, super_resolve, EvalReport, ImageScore, DEFAULT_SHAVE};
