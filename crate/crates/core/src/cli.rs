//! Command-line front end. [`run`] never exits the process; it returns the
//! exit code so it can be driven from tests.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (unreadable or
//! inconsistent inputs), 3 invariant violation (a transform failed its
//! equivalence check or a pruning constraint was hit).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{analyze, format_reports, ReportFormat};
use crate::error::Error;
use crate::eval::{self, BenchmarkConfig, MonotonicClock, DEFAULT_SHAVE};
use crate::graph::spec_file::{read_spec, write_spec};
use crate::graph::weights::{load_weights, save_weights, DType};
use crate::graph::{Graph, ParamBlob};
use crate::reparam::{execute_gated, fuse_cac_sites, prune_zero_gates, ChannelGates};
use crate::stats::{self, FixtureTable, Metric};
use crate::tensor::{Dims, Tensor};
use crate::zoo;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

/// Relative tolerance for the post-transform equivalence check.
const EQUIV_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(
    name = "effsr",
    version,
    about = "Efficient super-resolution model zoo and efficiency profiler"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
    Md,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => ReportFormat::Text,
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
            Format::Md => ReportFormat::Markdown,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightDType {
    F32,
    F64,
}

impl From<WeightDType> for DType {
    fn from(d: WeightDType) -> Self {
        match d {
            WeightDType::F32 => DType::F32,
            WeightDType::F64 => DType::F64,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricChoice {
    All,
    Params,
    Flops,
    Activations,
    Memory,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the model zoo with default hyperparameters.
    ListModels,
    /// Static efficiency metrics of a zoo model or model-spec file.
    Analyze {
        model: String,
        #[arg(long, default_value = "256x256")]
        input_size: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Best-of-trials CPU runtime over a directory of PNG images.
    Bench {
        model: String,
        #[arg(long)]
        images: PathBuf,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Weight file; zoo models are seeded randomly without one.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// PSNR of same-named PNGs in two directories.
    Psnr {
        #[arg(long)]
        sr: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SHAVE)]
        shave: usize,
        /// Also write per-image results as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Super-resolve an LR directory and score it against GT.
    Eval {
        model: String,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        lr: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SHAVE)]
        shave: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Bicubic-downsample every HR PNG into an LR directory.
    MakeLr {
        #[arg(long)]
        hr: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        factor: usize,
    },
    /// Fuse every asymmetric-convolution site into single 3x3 convs.
    FuseCac {
        spec: PathBuf,
        weights: PathBuf,
        /// Writes PREFIX.json and PREFIX.weights.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fold channel gates into a model and delete zero-gated channels.
    Prune {
        spec: PathBuf,
        weights: PathBuf,
        #[arg(long)]
        gates: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spearman correlation of efficiency metrics with runtime.
    Srocc {
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        metric: MetricChoice,
        /// Also list every candidate row subset and its distance to the
        /// published values.
        #[arg(long)]
        search: bool,
    },
    /// Results table combining published rows with computed zoo models.
    Report {
        /// Comma-separated zoo models to add (default: all).
        #[arg(long)]
        models: Option<String>,
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
    },
    /// Write a model's spec and weights (seeded initialisation).
    ExportWeights {
        model: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "f32")]
        dtype: WeightDType,
    },
    /// Load and validate a spec + weight pair, optionally re-exporting it.
    ImportWeights {
        spec: PathBuf,
        weights: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "f32")]
        dtype: WeightDType,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Prune(_) => Failure::Invariant(e.to_string()),
            e => Failure::Data(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(Error::io("<stdout>", e))
    }
}

type CliResult = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "usage error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
        Err(Failure::Invariant(m)) => {
            let _ = writeln!(err, "invariant violated: {m}");
            EXIT_INVARIANT
        }
    }
}

/// Parses `HxW` into `(1, 3, H, W)`.
pub fn parse_input_size(s: &str) -> Result<Dims, String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("input size `{s}` is not of the form HxW"))?;
    let dim = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad dimension `{v}` in `{s}`"))
    };
    let (h, w) = (dim(h)?, dim(w)?);
    if h == 0 || w == 0 {
        return Err(format!("input size must be positive, got {h}x{w}"));
    }
    Ok([1, 3, h, w])
}

/// A zoo name (zero weights) or a model-spec file path.
fn resolve_model(model: &str) -> Result<Graph, Failure> {
    if zoo::info(model).is_some() {
        return Ok(zoo::build_default(model)?);
    }
    let path = Path::new(model);
    if path.exists() {
        return Ok(read_spec(path)?);
    }
    let known: Vec<&str> = zoo::CATALOG.iter().map(|m| m.name).collect();
    Err(Failure::Usage(format!(
        "`{model}` is neither a zoo model ({}) nor an existing spec file",
        known.join(", ")
    )))
}

fn load_pair(spec: &Path, weights: &Path) -> Result<Graph, Failure> {
    let mut g = read_spec(spec)?;
    load_weights(&mut g, weights)?;
    Ok(g)
}

fn save_pair(g: &Graph, prefix: &Path, dtype: DType) -> Result<(PathBuf, PathBuf), Failure> {
    let spec = prefix.with_extension("json");
    let weights = prefix.with_extension("weights");
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_spec(g, &spec)?;
    save_weights(g, &weights, dtype)?;
    Ok((spec, weights))
}

/// Smallest square input accepted by the graph, used for equivalence checks.
fn probe_input(g: &Graph) -> Result<Tensor, Failure> {
    let c = g.input_channels();
    for side in [16, 24, 32, 48, 64] {
        if g.infer_shapes([1, c, side, side]).is_ok() {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            return Ok(Tensor::random_uniform([1, c, side, side], 0.0, 1.0, &mut rng));
        }
    }
    Err(Failure::Data(Error::Graph(format!(
        "`{}` rejects every probe input size up to 64x64",
        g.name()
    ))))
}

fn check_equivalent(what: &str, want: &Tensor, got: &Tensor) -> CliResult {
    let d = got
        .max_rel_diff(want)
        .map_err(|e| Failure::Invariant(format!("{what}: {e}")))?;
    if d > EQUIV_TOL {
        return Err(Failure::Invariant(format!(
            "{what}: output differs by {d:.3e} (relative), tolerance {EQUIV_TOL:.0e}"
        )));
    }
    Ok(())
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult {
    match cmd {
        Command::ListModels => {
            writeln!(out, "{:<12} {:>10}  summary", "model", "params")?;
            for m in zoo::CATALOG {
                let g = zoo::build_default(m.name)?;
                writeln!(
                    out,
                    "{:<12} {:>10}  {}",
                    m.name,
                    crate::analysis::count_params(&g),
                    m.summary
                )?;
            }
        }
        Command::Analyze {
            model,
            input_size,
            format,
        } => {
            let dims = parse_input_size(&input_size).map_err(Failure::Usage)?;
            let g = resolve_model(&model)?;
            let dims = [1, g.input_channels(), dims[2], dims[3]];
            let r = analyze(&g, dims)?;
            write!(out, "{}", format_reports(&[r], format.into())?)?;
        }
        Command::Bench {
            model,
            images,
            trials,
            warmup,
            threads,
            weights,
            format,
        } => {
            if trials == 0 || threads == 0 {
                return Err(Failure::Usage("--trials and --threads must be >= 1".into()));
            }
            let mut g = resolve_model(&model)?;
            match &weights {
                Some(w) => load_weights(&mut g, w)?,
                None => zoo::init_weights(&mut g, 0),
            }
            let imgs: Vec<Tensor> = eval::load_dir(&images)?.into_iter().map(|(_, t)| t).collect();
            let cfg = BenchmarkConfig {
                trials,
                warmup,
                threads,
            };
            let r = eval::run_benchmark(&g, &imgs, &cfg, &MonotonicClock::default())?;
            match format {
                Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&r).map_err(Error::from)?)?,
                _ => write!(out, "{}", r.to_text())?,
            }
        }
        Command::Psnr { sr, gt, shave, csv } => {
            let r = eval::psnr_dirs(&sr, &gt, shave)?;
            write_eval(out, &r, csv.as_deref())?;
        }
        Command::Eval {
            model,
            weights,
            lr,
            gt,
            shave,
            csv,
        } => {
            let mut g = resolve_model(&model)?;
            load_weights(&mut g, &weights)?;
            let r = eval::evaluate_model(&g, &lr, &gt, shave)?;
            write_eval(out, &r, csv.as_deref())?;
        }
        Command::MakeLr { hr, out: dir, factor } => {
            if factor == 0 {
                return Err(Failure::Usage("--factor must be >= 1".into()));
            }
            let names = eval::make_lr(&hr, &dir, factor)?;
            writeln!(out, "wrote {} LR image(s) to {}", names.len(), dir.display())?;
        }
        Command::FuseCac {
            spec,
            weights,
            out: prefix,
        } => {
            let g = load_pair(&spec, &weights)?;
            let fused = fuse_cac_sites(&g)?;
            let x = probe_input(&g)?;
            check_equivalent("fuse-cac", &g.execute(&x)?, &fused.execute(&x)?)?;
            let before = analyze(&g, x.shape())?;
            let after = analyze(&fused, x.shape())?;
            let (s, w) = save_pair(&fused, &prefix, DType::F64)?;
            writeln!(
                out,
                "fused {} -> {} conv layers, {} -> {} params; wrote {} and {}",
                before.conv_layers,
                after.conv_layers,
                before.params,
                after.params,
                s.display(),
                w.display()
            )?;
        }
        Command::Prune {
            spec,
            weights,
            gates,
            out: prefix,
        } => {
            let g = load_pair(&spec, &weights)?;
            let text = std::fs::read_to_string(&gates).map_err(|e| Error::io(&gates, e))?;
            let gates = ChannelGates::from_json(&text)?;
            let pruned = prune_zero_gates(&g, &gates)?;
            let x = probe_input(&g)?;
            check_equivalent("prune", &execute_gated(&g, &gates, &x)?, &pruned.execute(&x)?)?;
            let (s, w) = save_pair(&pruned, &prefix, DType::F64)?;
            writeln!(
                out,
                "pruned {} -> {} params; wrote {} and {}",
                crate::analysis::count_params(&g),
                crate::analysis::count_params(&pruned),
                s.display(),
                w.display()
            )?;
        }
        Command::Srocc {
            fixture,
            metric,
            search,
        } => {
            let table = match fixture {
                Some(p) => FixtureTable::load(&p)?,
                None => FixtureTable::bundled(),
            };
            let t = stats::runtime_correlations(&table)?;
            let chosen: Vec<Metric> = match metric {
                MetricChoice::All => Metric::PREDICTORS.to_vec(),
                MetricChoice::Params => vec![Metric::Params],
                MetricChoice::Flops => vec![Metric::Flops],
                MetricChoice::Activations => vec![Metric::Activations],
                MetricChoice::Memory => vec![Metric::Memory],
            };
            for m in chosen {
                writeln!(out, "{:<12} {:.4}", m.as_str(), t.get(m).expect("predictor"))?;
            }
            writeln!(
                out,
                "rows: {} (subset {}, complete cases only, '*' entries excluded)",
                t.teams.len(),
                t.subset
            )?;
            if search {
                writeln!(out, "candidate subsets (max |deviation| from published values):")?;
                for (c, d) in stats::search_subsets(&table, &stats::PUBLISHED_SROCC) {
                    let v = c.values();
                    writeln!(
                        out,
                        "  {:<45} n={:<3} {:.4} {:.4} {:.4} {:.4}  max|d|={:.4}",
                        c.subset,
                        c.teams.len(),
                        v[0],
                        v[1],
                        v[2],
                        v[3],
                        d
                    )?;
                }
            }
        }
        Command::Report {
            models,
            fixture,
            format,
        } => {
            let table = match fixture {
                Some(p) => FixtureTable::load(&p)?,
                None => FixtureTable::bundled(),
            };
            let names: Vec<String> = match models {
                Some(s) => s
                    .split(',')
                    .map(|m| m.trim().to_string())
                    .filter(|m| !m.is_empty())
                    .collect(),
                None => zoo::CATALOG.iter().map(|m| m.name.to_string()).collect(),
            };
            let mut reports = Vec::new();
            for n in &names {
                let g = resolve_model(n)?;
                reports.push(analyze(&g, [1, g.input_channels(), 256, 256])?);
            }
            write!(out, "{}", stats::emit_report(&reports, &table, format.into())?)?;
        }
        Command::ExportWeights {
            model,
            out: prefix,
            seed,
            dtype,
        } => {
            let mut g = resolve_model(&model)?;
            zoo::init_weights(&mut g, seed);
            let (s, w) = save_pair(&g, &prefix, dtype.into())?;
            writeln!(out, "wrote {} and {}", s.display(), w.display())?;
        }
        Command::ImportWeights {
            spec,
            weights,
            out: prefix,
            dtype,
        } => {
            let g = load_pair(&spec, &weights)?;
            if let Some(name) = first_non_finite(&g) {
                return Err(Failure::Data(Error::Weights(format!(
                    "blob `{name}` holds non-finite values"
                ))));
            }
            writeln!(
                out,
                "{}: {} blobs, {} params, all finite",
                g.name(),
                g.params().len(),
                crate::analysis::count_params(&g)
            )?;
            if let Some(prefix) = prefix {
                let (s, w) = save_pair(&g, &prefix, dtype.into())?;
                // f64 files must reproduce the graph bit-for-bit
                if matches!(dtype, WeightDType::F64) && load_pair(&s, &w)? != g {
                    return Err(Failure::Invariant("re-exported weights do not round-trip".into()));
                }
                writeln!(out, "wrote {} and {}", s.display(), w.display())?;
            }
        }
    }
    Ok(())
}

fn first_non_finite(g: &Graph) -> Option<&str> {
    g.params().iter().find_map(|(name, blob)| {
        let finite = match blob {
            ParamBlob::Conv(c) => c
                .weight
                .data()
                .iter()
                .chain(c.bias.iter().flatten())
                .all(|v| v.is_finite()),
            ParamBlob::Prelu(a) => a.iter().all(|v| v.is_finite()),
        };
        (!finite).then_some(name.as_str())
    })
}

fn write_eval(out: &mut dyn Write, r: &eval::EvalReport, csv: Option<&Path>) -> CliResult {
    for s in &r.images {
        writeln!(out, "{:<32} {} dB", s.name, eval::format_db(s.psnr_db))?;
    }
    writeln!(
        out,
        "mean ({} images)  {} dB",
        r.images.len(),
        eval::format_db(r.mean_psnr_db)
    )?;
    if let Some(p) = csv {
        std::fs::write(p, r.to_csv()?).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}
