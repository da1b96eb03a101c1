//! Builds every catalog model and prints its static efficiency metrics at
//! 256x256 next to the published reference figures.
//!
//!     cargo run --release --example model_zoo_metrics

use effsr::analysis::{analyze, format_reports, ReportFormat};
use effsr::zoo;

fn main() -> effsr::Result<()> {
    let mut reports = Vec::new();
    for m in zoo::CATALOG {
        let g = zoo::build_default(m.name)?;
        let r = analyze(&g, [1, 3, 256, 256])?;
        match m.reference {
            Some(rf) => println!(
                "{:<12} params {:>9} ({:+.2}%)  flops {:>7.2}G ({:+.2}%)  activations {:>7.2}M ({:+.2}%)",
                m.name,
                r.params,
                100.0 * (r.params_m() / rf.params_m - 1.0),
                r.flops_g(),
                100.0 * (r.flops_g() / rf.flops_g - 1.0),
                r.activations_m(),
                100.0 * (r.activations_m() / rf.activations_m - 1.0),
            ),
            None => println!("{:<12} params {:>9}  (no reference figures)", m.name, r.params),
        }
        reports.push(r);
    }
    println!();
    print!("{}", format_reports(&reports, ReportFormat::Markdown)?);
    Ok(())
}
