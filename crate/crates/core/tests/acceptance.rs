//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line (plus a stated line for
//! the one criterion that cannot be reproduced at desk scale).

// `!(x <= tol)` is deliberate: a NaN must fail the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use effsr::analysis::analyze;
use effsr::eval::{psnr, run_benchmark, BenchmarkConfig, FakeClock, MonotonicClock};
use effsr::graph::spec_file;
use effsr::graph::weights::{read_weights, write_weights, DType};
use effsr::reparam::{
    execute_gated, fuse_cac, fuse_cac_sites, merge_kernel_bases, prune_zero_gates, ChannelGates, KernelBases,
};
use effsr::stats::{emit_report, parse_report_csv, rows_to_csv, runtime_correlations, FixtureTable, Metric};
use effsr::tensor::conv2d;
use effsr::{analysis::ReportFormat, zoo, Conv2dParams, Padding, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

/// max |a - b| / max |b|, computed here rather than through the library.
fn rel_err(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let num = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let den = b.data().iter().map(|v| v.abs()).fold(0.0, f64::max);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn max_abs(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = effsr::cli::run(std::iter::once("effsr").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn cli_analyze(model: &str) -> Result<serde_json::Value, String> {
    let (code, out, err) = cli(&["analyze", model, "--format", "json"]);
    ensure!(code == 0, "analyze {model} exited {code}: {err}");
    let v: serde_json::Value = serde_json::from_str(&out).map_err(|e| e.to_string())?;
    Ok(v[0].clone())
}

fn c1_baseline() -> Check {
    let r = cli_analyze("msrresnet")?;
    let params = r["params"].as_u64().unwrap();
    let convs = r["conv_layers"].as_u64().unwrap();
    let flops = r["flops"].as_u64().unwrap() as f64;
    let acts = r["activations"].as_u64().unwrap() as f64;
    ensure!(params == 1_517_571, "params {params} != 1,517,571");
    ensure!(convs == 37, "conv layers {convs} != 37");
    ensure!(
        rel(flops, 166.36e9) <= 0.005,
        "FLOPs {:.2}G off 166.36G by {:.3}%",
        flops / 1e9,
        100.0 * rel(flops, 166.36e9)
    );
    ensure!(
        rel(acts, 292.55e6) <= 0.001,
        "activations {:.2}M off 292.55M",
        acts / 1e6
    );
    let (code, _, _) = cli(&["analyze", "msrresnet", "--input-size", "0x0"]);
    ensure!(code == 1, "--input-size 0x0 exited {code}, want 1");
    Ok(format!(
        "params {params}, convs {convs}, FLOPs {:.2}G ({:+.3}%), activations {:.2}M ({:+.3}%)",
        flops / 1e9,
        100.0 * (flops / 166.36e9 - 1.0),
        acts / 1e6,
        100.0 * (acts / 292.55e6 - 1.0)
    ))
}

fn c2_pan() -> Check {
    let params = cli_analyze("pan")?["params"].as_u64().unwrap();
    ensure!(params == 272_419, "params {params} != 272,419");
    Ok(format!("params {params}"))
}

fn c3_zoo() -> Check {
    let targets = [
        ("rfdn", 0.433e6, 27.10e9, 112.03e6),
        ("fimdn", 0.687e6, 44.98e9, 118.49e6),
        ("imdn", 0.893e6, 58.53e9, 154.14e6),
    ];
    let mut worst: (f64, &str) = (0.0, "");
    for (name, p, f, a) in targets {
        let r = cli_analyze(name)?;
        for (what, got, want) in [
            ("params", r["params"].as_u64().unwrap() as f64, p),
            ("flops", r["flops"].as_u64().unwrap() as f64, f),
            ("activations", r["activations"].as_u64().unwrap() as f64, a),
        ] {
            let d = rel(got, want);
            ensure!(d <= 0.10, "{name} {what} {got} off {want} by {:.1}%", 100.0 * d);
            if d > worst.0 {
                worst = (d, name);
            }
        }
    }
    Ok(format!("worst deviation {:.2}% ({})", 100.0 * worst.0, worst.1))
}

/// Average-rank Spearman, written independently of the library.
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn avg_ranks(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|&a| {
                let below = v.iter().filter(|&&b| b < a).count() as f64;
                let equal = v.iter().filter(|&&b| b == a).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    }
    let (rx, ry) = (avg_ranks(x), avg_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn c4_correlation() -> Check {
    let published = [0.1734, 0.2397, 0.8737, 0.6671];
    let table = FixtureTable::bundled();
    let t = runtime_correlations(&table).map_err(|e| e.to_string())?;
    let rows: Vec<_> = table.rows.iter().filter(|r| table.subset.admits(r)).collect();
    let runtime: Vec<f64> = rows.iter().map(|r| r.runtime_s.unwrap()).collect();
    let mut worst: f64 = 0.0;
    for (m, want) in Metric::PREDICTORS.into_iter().zip(published) {
        let got = t.get(m).unwrap();
        let col: Vec<f64> = rows.iter().map(|r| r.get(m).unwrap()).collect();
        let oracle = spearman(&col, &runtime);
        ensure!((got - oracle).abs() < 1e-12, "{m}: library {got} vs oracle {oracle}");
        ensure!((got - want).abs() <= 0.05, "{m}: {got:.4} vs published {want}");
        worst = worst.max((got - want).abs());
    }
    let (code, out, _) = cli(&["srocc", "--metric", "activations"]);
    ensure!(
        code == 0 && out.contains("0.8737"),
        "srocc --metric activations printed {out:?}"
    );
    ensure!(out.contains("rows: 21"), "row-subset note missing from {out:?}");
    Ok(format!("{} rows, max |deviation| {worst:.1e}", rows.len()))
}

fn random_tensor(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::random_uniform(shape, -1.0, 1.0, rng)
}

fn random_bias(n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    rng.gen_bool(0.5)
        .then(|| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn c5_cac() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let (ci, co) = (rng.gen_range(1..6), rng.gen_range(1..6));
        let (h, w) = (rng.gen_range(3..10), rng.gen_range(3..10));
        let branch = |kh: usize, kw: usize, rng: &mut ChaCha8Rng| Conv2dParams {
            weight: random_tensor([co, ci, kh, kw], rng),
            bias: random_bias(co, rng),
            stride: 1,
            padding: Padding::same(kh, kw),
            dilation: 1,
            groups: 1,
        };
        let (k33, k13, k31) = (branch(3, 3, &mut rng), branch(1, 3, &mut rng), branch(3, 1, &mut rng));
        let fused = fuse_cac(&k33, &k13, &k31).map_err(|e| format!("case {case}: {e}"))?;
        let x = random_tensor([1, ci, h, w], &mut rng);
        let mut want = conv2d(&x, &k33).unwrap();
        for k in [&k13, &k31] {
            let y = conv2d(&x, k).unwrap();
            want = Tensor::new(
                want.shape(),
                want.data().iter().zip(y.data()).map(|(a, b)| a + b).collect(),
            )
            .unwrap();
        }
        let d = rel_err(&conv2d(&x, &fused).unwrap(), &want);
        ensure!(d <= 1e-10, "case {case}: relative error {d:e}");
        worst = worst.max(d);
    }
    let train = zoo::build("fimdn-train", 11).map_err(|e| e.to_string())?;
    let deploy = fuse_cac_sites(&train).map_err(|e| e.to_string())?;
    let x = Tensor::random_uniform([1, 3, 32, 32], 0.0, 1.0, &mut rng);
    let d = rel_err(&deploy.execute(&x).unwrap(), &train.execute(&x).unwrap());
    ensure!(d <= 1e-10, "FIMDN train->deploy relative error {d:e}");
    Ok(format!("100 configs max rel {worst:.1e}; FIMDN graph rel {d:.1e}"))
}

fn c6_bases() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = rng.gen_range(1..=8);
        let (ci, co) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let k = [1, 3, 5][rng.gen_range(0..3)];
        let bases: Vec<Tensor> = (0..n).map(|_| random_tensor([co, ci, k, k], &mut rng)).collect();
        let pi: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let bias = random_bias(co, &mut rng);
        let pad = Padding::same(k, k);
        let kb = KernelBases::new(bases.clone(), pi.clone(), bias.clone(), pad).map_err(|e| e.to_string())?;
        let x = random_tensor([1, ci, rng.gen_range(k..k + 6), rng.gen_range(k..k + 6)], &mut rng);
        // sum_i pi_i * conv(x, k_i) + b
        let mut want = vec![0.0; 0];
        for (kern, p) in bases.iter().zip(&pi) {
            let y = conv2d(
                &x,
                &Conv2dParams {
                    weight: kern.clone(),
                    bias: None,
                    stride: 1,
                    padding: pad,
                    dilation: 1,
                    groups: 1,
                },
            )
            .unwrap();
            if want.is_empty() {
                want = vec![0.0; y.numel()];
            }
            for (a, v) in want.iter_mut().zip(y.data()) {
                *a += p * v;
            }
        }
        let [_, _, oh, ow] = conv2d(&x, &merge_kernel_bases(&kb)).unwrap().shape();
        if let Some(b) = &bias {
            for (i, a) in want.iter_mut().enumerate() {
                *a += b[(i / (oh * ow)) % co];
            }
        }
        let want = Tensor::new([1, co, oh, ow], want).unwrap();
        let d = rel_err(&conv2d(&x, &merge_kernel_bases(&kb)).unwrap(), &want);
        ensure!(d <= 1e-10, "case {case} (N={n}): relative error {d:e}");
        worst = worst.max(d);
    }
    Ok(format!("100 cases max rel {worst:.1e}"))
}

fn c7_prune() -> Check {
    use common::{three_block_net, MID, NF};
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut removed_total = 0;
    for trial in 0..20 {
        let g = three_block_net(trial);
        let mut gates = ChannelGates::new();
        let mut expect_removed = 0u64;
        for i in 0..3 {
            let gate = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                (0..MID)
                    .map(|_| {
                        if rng.gen_bool(0.25) {
                            0.0
                        } else {
                            rng.gen_range(0.5..1.5)
                        }
                    })
                    .collect()
            };
            let (post, pre) = (gate(&mut rng), gate(&mut rng));
            let dead = post.iter().zip(&pre).filter(|(a, b)| **a == 0.0 || **b == 0.0).count() as u64;
            // a row of b{i}.a (+ bias), a column of b{i}.b, and a PReLU slope in block 1
            let per = (NF * 9 + 1 + NF * 9 + usize::from(i == 1)) as u64;
            expect_removed += dead * per;
            gates.set_post(format!("b{i}.a"), post);
            gates.set_pre(format!("b{i}.b"), pre);
        }
        let pruned = prune_zero_gates(&g, &gates).map_err(|e| format!("trial {trial}: {e}"))?;
        let got_removed = effsr::analysis::count_params(&g) - effsr::analysis::count_params(&pruned);
        ensure!(
            got_removed == expect_removed,
            "trial {trial}: removed {got_removed} params, expected {expect_removed}"
        );
        let x = Tensor::random_uniform([1, 3, 9, 8], -1.0, 1.0, &mut rng);
        let d = max_abs(&pruned.execute(&x).unwrap(), &execute_gated(&g, &gates, &x).unwrap());
        ensure!(d <= 1e-12, "trial {trial}: |pruned - gated| = {d:e}");
        worst = worst.max(d);
        removed_total += got_removed;
    }
    let g = three_block_net(99);
    let mut post = vec![1.0; NF];
    post[3] = 0.0;
    let mut gates = ChannelGates::new();
    gates.set_post("b1.b", post);
    match prune_zero_gates(&g, &gates) {
        Err(e) if e.to_string().contains("residual") => {}
        other => return Err(format!("residual-constrained channel was not refused: {other:?}")),
    }
    Ok(format!(
        "20 patterns, {removed_total} params removed, max |d| {worst:.1e}; residual refused"
    ))
}

/// 0-255 PSNR over the shaved interior, independent of the library.
fn psnr_oracle(a: &Tensor, b: &Tensor, shave: usize) -> f64 {
    let [_, c, h, w] = a.shape();
    let (mut sse, mut n) = (0.0, 0usize);
    for ch in 0..c {
        for y in shave..h - shave {
            for x in shave..w - shave {
                sse += (a.get(0, ch, y, x) - b.get(0, ch, y, x)).powi(2);
                n += 1;
            }
        }
    }
    10.0 * (255.0f64.powi(2) / (sse / n as f64)).log10()
}

fn c8_psnr() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let img = |rng: &mut ChaCha8Rng| Tensor::from_fn([1, 3, 20, 17], |_, _, _, _| rng.gen_range(0..=255) as f64);
    let mut worst: f64 = 0.0;
    for pair in 0..10 {
        let (a, b) = (img(&mut rng), img(&mut rng));
        let d = (psnr(&a, &b, 4).unwrap() - psnr_oracle(&a, &b, 4)).abs();
        ensure!(d <= 1e-9, "pair {pair}: {d:e} dB from oracle");
        worst = worst.max(d);
    }
    let black = Tensor::full([1, 3, 16, 16], 0.0);
    let white = Tensor::full([1, 3, 16, 16], 255.0);
    let zero = psnr(&black, &white, 4).unwrap();
    ensure!(zero.abs() < 1e-12, "black vs white gave {zero} dB, want 0");
    let gt = img(&mut rng);
    ensure!(
        psnr(&gt, &gt, 4).unwrap() == f64::INFINITY,
        "identical images are not +inf"
    );
    let border = Tensor::from_fn(gt.shape(), |n, c, y, x| {
        let [_, _, h, w] = gt.shape();
        let inside = (4..h - 4).contains(&y) && (4..w - 4).contains(&x);
        if inside {
            gt.get(n, c, y, x)
        } else {
            255.0 - gt.get(n, c, y, x)
        }
    });
    ensure!(
        psnr(&border, &gt, 4).unwrap() == f64::INFINITY,
        "border-only difference seen with shave 4"
    );
    ensure!(
        psnr(&border, &gt, 3).unwrap().is_finite(),
        "shave 3 should see the border"
    );
    Ok(format!(
        "oracle max |d| {worst:.1e} dB; 0 dB, +inf and shave-4 edges hold"
    ))
}

fn c9_runtime() -> Check {
    // two images, three trials; per-image durations cycle through the steps
    let ms = Duration::from_millis;
    let clock = FakeClock::new(vec![ms(30), ms(50), ms(20), ms(20), ms(40), ms(60)]);
    let imgs = vec![Tensor::full([1, 3, 16, 16], 128.0); 2];
    let g = zoo::build_default("rfdn").map_err(|e| e.to_string())?;
    let cfg = BenchmarkConfig {
        trials: 3,
        warmup: 1,
        threads: 1,
    };
    let r = run_benchmark(&g, &imgs, &cfg, &clock).map_err(|e| e.to_string())?;
    let want_means = [0.040, 0.020, 0.050];
    for (got, want) in r.trial_means_s.iter().zip(want_means) {
        ensure!(
            (got - want).abs() < 1e-12,
            "trial means {:?}, want {want_means:?}",
            r.trial_means_s
        );
    }
    ensure!(
        (r.runtime_s - 0.020).abs() < 1e-12,
        "runtime {} is not the min trial mean",
        r.runtime_s
    );

    let x = vec![Tensor::random_uniform(
        [1, 3, 64, 64],
        0.0,
        255.0,
        &mut ChaCha8Rng::seed_from_u64(9),
    )];
    let time = |name: &str| -> Result<f64, String> {
        let g = zoo::build(name, 1).map_err(|e| e.to_string())?;
        Ok(run_benchmark(&g, &x, &cfg, &MonotonicClock::default())
            .map_err(|e| e.to_string())?
            .runtime_s)
    };
    let (rfdn, msr) = (time("rfdn")?, time("msrresnet")?);
    ensure!(rfdn < msr, "RFDN {rfdn:.3}s is not faster than MSRResNet {msr:.3}s");
    Ok(format!(
        "fake-clock semantics hold; 64x64 1-thread RFDN {rfdn:.3}s < MSRResNet {msr:.3}s"
    ))
}

fn bits(t: &Tensor) -> Vec<u64> {
    t.data().iter().map(|v| v.to_bits()).collect()
}

fn c10_determinism() -> Check {
    let g = zoo::build("rfdn", 10).map_err(|e| e.to_string())?;
    let x = Tensor::random_uniform([1, 3, 24, 24], 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(10));
    let a = bits(&g.execute(&x).unwrap());
    ensure!(a == bits(&g.execute(&x).unwrap()), "two runs differ");
    let order = common::reverse_tiebreak_order(&g);
    ensure!(order != g.topo_order(), "alternative order is not different");
    ensure!(
        a == bits(&g.execute_in_order(&x, &order).unwrap()),
        "alternative topological order differs"
    );
    for threads in [1, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        ensure!(
            a == bits(&pool.install(|| g.execute(&x)).unwrap()),
            "{threads}-thread run differs"
        );
    }

    for dtype in [DType::F32, DType::F64] {
        let mut first = Vec::new();
        write_weights(&g, &mut first, dtype).unwrap();
        let mut back = zoo::build_default("rfdn").unwrap();
        read_weights(&mut back, first.as_slice()).map_err(|e| e.to_string())?;
        let mut second = Vec::new();
        write_weights(&back, &mut second, dtype).unwrap();
        ensure!(
            first == second,
            "{dtype:?} weight file round trip is not byte-identical"
        );
        if matches!(dtype, DType::F64) {
            ensure!(back == g, "f64 weight round trip changed the graph");
        }
    }
    let json = spec_file::to_json(&g).unwrap();
    let again = spec_file::from_json(&json).map_err(|e| e.to_string())?;
    ensure!(
        spec_file::to_json(&again).unwrap() == json,
        "model-spec round trip is not byte-identical"
    );

    let reports: Vec<_> = ["rfdn", "pan"]
        .iter()
        .map(|m| analyze(&zoo::build_default(m).unwrap(), [1, 3, 256, 256]).unwrap())
        .collect();
    let csv = emit_report(&reports, &FixtureTable::bundled(), ReportFormat::Csv).unwrap();
    let rows = parse_report_csv(&csv).map_err(|e| e.to_string())?;
    ensure!(
        rows_to_csv(&rows).unwrap() == csv,
        "CSV report round trip is not byte-identical"
    );
    Ok("bit-identical across runs, orders and thread counts; weights/spec/CSV round trips exact".into())
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn main() {
    let s = Duration::from_secs;
    let criteria = [
        Criterion {
            id: 1,
            name: "baseline exactness",
            budget: s(5),
            run: c1_baseline,
        },
        Criterion {
            id: 2,
            name: "PAN calibration",
            budget: s(5),
            run: c2_pan,
        },
        Criterion {
            id: 3,
            name: "zoo fidelity",
            budget: s(10),
            run: c3_zoo,
        },
        Criterion {
            id: 4,
            name: "runtime correlation table",
            budget: s(1),
            run: c4_correlation,
        },
        Criterion {
            id: 5,
            name: "CAC fusion equivalence",
            budget: s(60),
            run: c5_cac,
        },
        Criterion {
            id: 6,
            name: "kernel-base merge",
            budget: s(30),
            run: c6_bases,
        },
        Criterion {
            id: 7,
            name: "pruning exactness",
            budget: s(30),
            run: c7_prune,
        },
        Criterion {
            id: 8,
            name: "PSNR protocol",
            budget: s(5),
            run: c8_psnr,
        },
        Criterion {
            id: 9,
            name: "runtime protocol",
            budget: s(120),
            run: c9_runtime,
        },
        Criterion {
            id: 10,
            name: "determinism & round trips",
            budget: s(30),
            run: c10_determinism,
        },
    ];
    let mut failed = Vec::new();
    for c in &criteria {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let dt = t0.elapsed();
        let outcome = match outcome {
            Ok(_) if dt > c.budget => Err(format!("took {:.2}s, budget {}s", dt.as_secs_f64(), c.budget.as_secs())),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(e) => ("FAIL", e.as_str()),
        };
        println!(
            "criterion {:>2} {:<27} {tag} ({:.2}s) {detail}",
            c.id,
            c.name,
            dt.as_secs_f64()
        );
        if outcome.is_err() {
            failed.push(c.id);
        }
    }
    println!(
        "criterion 11 {:<27} NOT REPRODUCIBLE (stated): trained-model PSNR needs full training on large corpora; covered structurally by 1-3 and 5-8",
        "trained PSNR"
    );
    if failed.is_empty() {
        println!("acceptance: {}/{} criteria passed", criteria.len(), criteria.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
