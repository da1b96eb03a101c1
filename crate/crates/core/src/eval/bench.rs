use std::fmt::Write as _;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Tensor;

/// Time source for [`run_benchmark`].
pub trait Clock {
    /// Time elapsed since an arbitrary fixed origin.
    fn now(&self) -> Duration;
}

/// Wall clock backed by [`Instant`].
#[derive(Debug)]
pub struct MonotonicClock {
    origin: Instant,
}

impl Default for MonotonicClock {
    fn default() -> Self {
        MonotonicClock { origin: Instant::now() }
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// Scripted clock for tests: each call advances time by the next step, so a
/// `now()` pair around one run measures exactly one step.
#[derive(Debug)]
pub struct FakeClock {
    state: Mutex<(Duration, Vec<Duration>, usize)>,
}

impl FakeClock {
    /// `steps` are consumed cyclically, one per `now()` call after the first
    /// of each measured pair.
    pub fn new(steps: Vec<Duration>) -> Self {
        assert!(!steps.is_empty(), "fake clock needs at least one step");
        FakeClock {
            state: Mutex::new((Duration::ZERO, steps, 0)),
        }
    }
}

impl Clock for FakeClock {
    fn now(&self) -> Duration {
        let mut s = self.state.lock().expect("fake clock poisoned");
        let (t, steps, calls) = &mut *s;
        // even calls start a measurement, odd calls end it
        if *calls % 2 == 1 {
            *t += steps[(*calls / 2) % steps.len()];
        }
        *calls += 1;
        *t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkConfig {
    pub trials: usize,
    pub warmup: usize,
    pub threads: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            trials: 3,
            warmup: 1,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub threads: usize,
    pub precision: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
    pub available_cpus: usize,
}

impl Environment {
    fn current(threads: usize) -> Self {
        Environment {
            threads,
            precision: "f64",
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            available_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

/// Best-of-trials runtime: each trial averages the per-image time over all
/// images, and the reported runtime is the minimum trial mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub model: String,
    pub images: usize,
    pub warmup: usize,
    pub trial_means_s: Vec<f64>,
    pub runtime_s: f64,
    pub environment: Environment,
}

impl BenchmarkReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model        {}", self.model);
        let _ = writeln!(s, "images       {}", self.images);
        let _ = writeln!(s, "warmup       {}", self.warmup);
        for (i, t) in self.trial_means_s.iter().enumerate() {
            let _ = writeln!(s, "trial {:<6} {:.6} s/image", i + 1, t);
        }
        let _ = writeln!(
            s,
            "runtime      {:.6} s/image (best of {})",
            self.runtime_s,
            self.trial_means_s.len()
        );
        let e = &self.environment;
        let _ = writeln!(s, "[environment]");
        let _ = writeln!(s, "threads      {}", e.threads);
        let _ = writeln!(s, "precision    {}", e.precision);
        let _ = writeln!(s, "os/arch      {}/{}", e.os, e.arch);
        let _ = writeln!(s, "cpus         {}", e.available_cpus);
        s
    }
}

/// Times `graph` on every image (0–255 tensors, scaled to `[0, 1]` before
/// timing) inside a dedicated pool of `cfg.threads` threads.
pub fn run_benchmark(
    graph: &Graph,
    images: &[Tensor],
    cfg: &BenchmarkConfig,
    clock: &dyn Clock,
) -> Result<BenchmarkReport> {
    if images.is_empty() {
        return Err(Error::Eval("benchmark needs at least one image".into()));
    }
    if cfg.trials == 0 {
        return Err(Error::Eval("trials must be >= 1".into()));
    }
    if cfg.threads == 0 {
        return Err(Error::Eval("threads must be >= 1".into()));
    }
    let inputs: Vec<Tensor> = images.iter().map(|t| t.map(|v| v / 255.0)).collect();
    for x in &inputs {
        graph.infer_shapes(x.shape())?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Eval(format!("cannot build thread pool: {e}")))?;
    for _ in 0..cfg.warmup {
        for x in &inputs {
            pool.install(|| graph.execute(x))?;
        }
    }
    let mut trial_means = Vec::with_capacity(cfg.trials);
    for _ in 0..cfg.trials {
        let mut total = Duration::ZERO;
        for x in &inputs {
            let t0 = clock.now();
            pool.install(|| graph.execute(x))?;
            total += clock.now() - t0;
        }
        trial_means.push(total.as_secs_f64() / inputs.len() as f64);
    }
    let runtime = trial_means.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(BenchmarkReport {
        model: graph.name().to_string(),
        images: inputs.len(),
        warmup: cfg.warmup,
        trial_means_s: trial_means,
        runtime_s: runtime,
        environment: Environment::current(cfg.threads),
    })
}
