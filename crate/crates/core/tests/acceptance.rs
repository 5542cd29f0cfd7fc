//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{exhaustive_budget_optimum, random_dyadic_spec, random_spec, DYADIC};
use gdof_lab::ais::{self, DeterministicInstance};
use gdof_lab::budget::{budget_curve, optimize_allocation};
use gdof_lab::scheme::{build_layout, build_layout_k, estimate_gdof_slope, Message, SimResult};
use gdof_lab::{
    sum_gdof_finite_precision, sum_gdof_k_symmetric, sum_gdof_two_user,
    sum_gdof_two_user_equivalent, BoundedDensitySpec, ChannelSpec2, SymmetricSpecK,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn d_sum(spec: &ChannelSpec2) -> f64 {
    sum_gdof_two_user(spec).unwrap().d_sum
}

fn within(elapsed: Duration, limit_s: u64) -> Outcome {
    if elapsed > Duration::from_secs(limit_s) {
        Err(format!("took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64()))
    } else {
        Ok(format!("{:.1} s", elapsed.as_secs_f64()))
    }
}

fn formula_suite() -> Outcome {
    const N: usize = 100_000;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..N {
        let spec = random_spec(&mut rng, 3.0);
        let gap = (d_sum(&spec) - sum_gdof_two_user_equivalent(&spec).unwrap()).abs();
        worst = worst.max(gap);
    }
    ensure!(worst <= 1e-12, "equivalent forms differ by {worst:e}");

    for _ in 0..N {
        let spec = random_dyadic_spec(&mut rng, 3.0);
        let d = d_sum(&spec);
        let a = spec.alpha;

        // Raising each row's larger CSIT entry changes nothing.
        let mut beta = spec.beta;
        for (k, row) in beta.iter_mut().enumerate() {
            let l = if row[0] <= row[1] { 1 } else { 0 };
            let lo = row[1 - l];
            let units = ((a[k][l] - lo) * DYADIC) as u32;
            row[l] = lo + rng.random_range(0..=units) as f64 / DYADIC;
        }
        let redundant = spec.with_beta(beta).unwrap();
        ensure!(d_sum(&redundant) == d, "redundancy fails for {spec:?} -> {beta:?}");

        let (k, l) = (rng.random_range(0..2), rng.random_range(0..2));
        let mut beta = spec.beta;
        let room = ((a[k][l] - beta[k][l]) * DYADIC) as u32;
        beta[k][l] += rng.random_range(0..=room) as f64 / DYADIC;
        let better = spec.with_beta(beta).unwrap();
        ensure!(d_sum(&better) >= d, "more CSIT lowered the value for {spec:?}");

        let max = a.iter().flatten().cloned().fold(0.0, f64::max);
        let upper = a[0][0].max(a[0][1]) + a[1][0].max(a[1][1]);
        ensure!(max <= d && d <= upper, "sandwich fails for {spec:?}: {d}");
    }
    let time = within(start.elapsed(), 10)?;
    Ok(format!("{N} continuous specs agree to {worst:.1e}; {N} dyadic specs exact; {time}"))
}

fn prior_results() -> Outcome {
    for units in 0..=1024u32 {
        let b = units as f64 / DYADIC;
        let spec = ChannelSpec2::new([[1.0; 2]; 2], [[b; 2]; 2]).unwrap();
        ensure!(d_sum(&spec) == 1.0 + b, "all-ones at beta {b}: {}", d_sum(&spec));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let spec = random_spec(&mut rng, 3.0).with_beta([[0.0; 2]; 2]).unwrap();
        let [[a11, a12], [a21, a22]] = spec.alpha;
        let d1 = a11.max(a12) + (a21 - a11).max(0.0).max((a22 - a12).max(0.0));
        let d2 = a21.max(a22) + (a11 - a21).max(0.0).max((a12 - a22).max(0.0));
        ensure!(d_sum(&spec) == d1.min(d2), "zero-CSIT mismatch for {spec:?}");
        ensure!(sum_gdof_finite_precision(&spec.alpha) == d1.min(d2), "finite-precision mismatch");
    }
    for a in 0..=1024u32 {
        let alpha = a as f64 / DYADIC;
        for b in (0..=a).step_by(7) {
            let beta = b as f64 / DYADIC;
            let two = d_sum(&ChannelSpec2::new([[1.0, alpha], [alpha, 1.0]], [[beta; 2]; 2]).unwrap());
            let k = sum_gdof_k_symmetric(&SymmetricSpecK::new(2, alpha, beta).unwrap()).unwrap();
            ensure!(two == k && k == 2.0 - alpha + beta, "K=2 at ({alpha}, {beta}): {two} vs {k}");
        }
    }
    Ok("1+beta, zero-CSIT form and K=2 agreement all exact".into())
}

fn k_user_endpoints() -> Outcome {
    for k in 2..=16usize {
        let v = |a: f64, b: f64| sum_gdof_k_symmetric(&SymmetricSpecK::new(k, a, b).unwrap()).unwrap();
        ensure!(v(1.0, 1.0) == k as f64, "K={k} perfect CSIT: {}", v(1.0, 1.0));
        ensure!(v(1.0, 0.0) == 1.0, "K={k} no CSIT: {}", v(1.0, 0.0));
        for units in 0..=8 {
            let a = units as f64 / 8.0;
            ensure!(v(a, a) == k as f64, "K={k} alpha=beta={a}: {}", v(a, a));
        }
    }
    Ok("K in 2..=16: (1,1) -> K, (1,0) -> 1, alpha = beta -> K".into())
}

fn budget_optimizer() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let budgets = [0.0, 0.3, 0.7, 1.2, 2.0, 3.0];
    for _ in 0..100 {
        let alpha = [[(); 2].map(|_| rng.random_range(0..=10) as f64 / 10.0), [(); 2].map(|_| rng.random_range(0..=10) as f64 / 10.0)];
        for budget in budgets {
            let reduced = optimize_allocation(&alpha, budget, 0.1).unwrap().achieved;
            let full = exhaustive_budget_optimum(&alpha, budget, 0.1);
            ensure!((reduced - full).abs() <= 1e-9, "{alpha:?} at {budget}: {reduced} vs {full}");
        }
    }

    let grid: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
    let curve = budget_curve(&[[1.0; 2]; 2], &grid, 0.01).unwrap();
    for p in &curve.points {
        let expect = (1.0 + p.budget / 4.0).min(2.0);
        ensure!((p.achieved - expect).abs() <= 0.01, "all-ones at {}: {}", p.budget, p.achieved);
    }

    let alpha = [[1.0, 0.6], [0.4, 1.0]];
    let spacing = 0.04;
    let grid: Vec<f64> = (0..=60).map(|i| i as f64 * spacing).collect();
    let curve = budget_curve(&alpha, &grid, 0.01).unwrap();
    let slopes = curve.slopes();
    let expected_break = 2.0 * (alpha[0][1] - alpha[1][0]);
    let first_drop = slopes.iter().position(|s| *s < 0.5 - 0.05).expect("slope never drops");
    let found = grid[first_drop];
    ensure!((found - expected_break).abs() <= spacing + 1e-9, "breakpoint at {found}, expected {expected_break}");
    for (i, s) in slopes.iter().enumerate() {
        let mid = grid[i] + spacing / 2.0;
        let expect = if mid < expected_break { 0.5 } else if mid < 2.0 { 0.25 } else { 0.0 };
        ensure!((s - expect).abs() <= 0.01 / spacing, "slope {s} at {mid}, expected {expect}");
    }
    ensure!((curve.points.last().unwrap().achieved - 2.0).abs() < 1e-12, "no saturation at 2");
    let time = within(start.elapsed(), 60)?;
    Ok(format!("600 exhaustive comparisons, 1+B/4 curve, breakpoint at {found:.2}; {time}"))
}

const GRID: [f64; 4] = [1e6, 1e8, 1e10, 1e12];
const TRIALS: usize = 200;

fn two_user(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> ChannelSpec2 {
    ChannelSpec2::new(a, b).unwrap()
}

/// Simulates the fixed instance suite once; criteria 5 and 7 both read it.
fn suite() -> Vec<(&'static str, bool, SimResult)> {
    let d = BoundedDensitySpec::default();
    let mut out = Vec::new();
    let two = [
        ("Case1", two_user([[1.0, 0.4], [0.8, 0.5]], [[0.3; 2], [0.3; 2]])),
        ("Case2", two_user([[1.0, 0.8], [0.9, 0.3]], [[0.5; 2], [0.2; 2]])),
        ("Case3", two_user([[1.0, 0.5], [0.3, 0.7]], [[0.4; 2], [0.3; 2]])),
        ("SingleUser", two_user([[1.0; 2], [0.3; 2]], [[0.2; 2], [0.27; 2]])),
    ];
    for (name, spec) in two {
        let layout = build_layout(&spec).unwrap();
        out.push((name, false, estimate_gdof_slope(&layout, &spec, &d, &GRID, TRIALS, 7).unwrap()));
    }
    for (name, k, a, b) in [("K3", 3, 0.6, 0.3), ("K4", 4, 0.8, 0.5)] {
        let spec = SymmetricSpecK::new(k, a, b).unwrap();
        let layout = build_layout_k(&spec).unwrap();
        out.push((name, true, estimate_gdof_slope(&layout, &spec, &d, &GRID, TRIALS, 7).unwrap()));
    }
    out
}

fn achievability(results: &[(&str, bool, SimResult)]) -> Outcome {
    let mut summary = Vec::new();
    for (name, k_user, r) in results {
        for (u, (s, t)) in r.slope_estimates.iter().zip(&r.targets).enumerate() {
            ensure!((s - t).abs() <= 0.1, "{name} user {}: slope {s:.3} vs {t}", u + 1);
        }
        let target: f64 = r.targets.iter().sum();
        if *k_user {
            ensure!((r.sum_slope() - target).abs() <= 0.15, "{name} sum {:.3} vs {target}", r.sum_slope());
        }
        summary.push(format!("{name} sum {:.3}/{target:.2}", r.sum_slope()));
    }

    let ones = two_user([[1.0; 2]; 2], [[0.0; 2]; 2]);
    let layout = build_layout(&ones).unwrap();
    let r = estimate_gdof_slope(&layout, &ones, &BoundedDensitySpec::default(), &GRID, TRIALS, 7).unwrap();
    ensure!((r.sum_slope() - 1.0).abs() <= 0.1, "zero-CSIT collapse: sum {:.3}", r.sum_slope());
    Ok(summary.join(", "))
}

fn sinr_exponents() -> Outcome {
    let d = BoundedDensitySpec::default();
    let grid = [1e8, 1e10, 1e12];
    let spec = two_user([[1.0, 0.5], [0.3, 0.7]], [[0.4; 2], [0.3; 2]]);
    let layout = build_layout(&spec).unwrap();
    let m = layout.m;
    let r = estimate_gdof_slope(&layout, &spec, &d, &grid, TRIALS, 7).unwrap();
    let chain = [(Message::Wc, 0.7 - m), (Message::W1z, m), (Message::W1p, 1.0 - 0.7)];
    let mut got = Vec::new();
    for (msg, expect) in chain {
        let e = r.exponent(msg, 0).and_then(|e| e.sinr_exponent).ok_or(format!("{msg} not measured"))?;
        ensure!((e - expect).abs() <= 0.05, "{msg}: SINR exponent {e:.3} vs {expect:.2}");
        got.push(format!("{e:.3}"));
    }

    let (alpha, beta) = (0.6, 0.3);
    let k = SymmetricSpecK::new(3, alpha, beta).unwrap();
    let layout = build_layout_k(&k).unwrap();
    let r = estimate_gdof_slope(&layout, &k, &d, &grid, TRIALS, 7).unwrap();
    let power = |msg| r.exponent(msg, 0).and_then(|e| e.power_exponent);
    let xc = power(Message::Wc).ok_or("Wc power not measured")?;
    let x1 = power(Message::Wkp(1)).ok_or("W1p power not measured")?;
    ensure!((xc - 1.0).abs() <= 0.05, "K-user common power exponent {xc:.3}");
    ensure!((x1 - (1.0 + beta - alpha)).abs() <= 0.05, "K-user private power exponent {x1:.3}");
    Ok(format!("Case-3 chain ({}); K=3 common {xc:.3}, private {x1:.3}", got.join(", ")))
}

fn zero_forcing(results: &[(&str, bool, SimResult)]) -> Outcome {
    let mut worst_residual = 0.0f64;
    let mut worst_margin = f64::NEG_INFINITY;
    for (name, _, r) in results {
        ensure!(r.max_zf_residual <= 1e-9, "{name}: residual {:e}", r.max_zf_residual);
        worst_residual = worst_residual.max(r.max_zf_residual);
        for l in &r.leakage {
            ensure!(l.measured <= l.designed + 0.05, "{name} {} at rx {}: {:.3} vs {:.3}", l.message, l.receiver, l.measured, l.designed);
            worst_margin = worst_margin.max(l.measured - l.designed);
        }
    }
    Ok(format!("max residual {worst_residual:.1e}, max leakage excess {worst_margin:.3}"))
}

fn ais_lab() -> Outcome {
    let start = Instant::now();
    let d = BoundedDensitySpec::default();
    let instances = [
        ("all-ones", two_user([[1.0; 2]; 2], [[0.0; 2]; 2])),
        ("weak-row", two_user([[1.0; 2], [0.5; 2]], [[0.0; 2]; 2])),
        ("csit-row", two_user([[1.0; 2]; 2], [[0.0; 2], [1.0; 2]])),
    ];
    let mut notes = Vec::new();
    for (i, (name, spec)) in instances.iter().enumerate() {
        let seed = 100 + i as u64;
        let inst = DeterministicInstance::new(spec, 32.0).unwrap();
        let pairs = ais::sample_pairs(&inst, 1000, seed).unwrap();
        for (j, pair) in pairs.iter().enumerate() {
            let est = ais::alignment_probability_mc(*pair, &inst, &d, 1000, seed ^ ((j as u64) << 16)).unwrap();
            ensure!(est.pass, "{name}: {pair:?} estimate {} above bound {:?}", est.estimate, est.bounds);
        }

        let mut checked = 0usize;
        for draw in 0..8u64 {
            let real = inst.draw(&d, seed + draw).unwrap();
            let sets = ais::image_set_sizes(&inst, &real, ais::DEFAULT_CAP).unwrap();
            for pair in ais::aligned_pairs(&sets, 2000) {
                ensure!(ais::interval_condition_check(&pair, &inst, &real, &d), "{name}: interval check fails for {pair:?}");
                checked += 1;
            }
        }

        let stats = ais::expected_size_curve(spec, &[8.0, 16.0, 32.0, 64.0], 64, &d, seed, ais::DEFAULT_CAP).unwrap();
        ensure!(
            stats.fitted_exponent <= stats.bound_exponent + 0.15,
            "{name}: fitted {:.3} above bound {}",
            stats.fitted_exponent,
            stats.bound_exponent
        );
        notes.push(format!("{name} {checked} aligned, exponent {:.3}/{}", stats.fitted_exponent, stats.bound_exponent));
    }
    let time = within(start.elapsed(), 300)?;
    Ok(format!("{}; {time}", notes.join(", ")))
}

fn run_cli(args: &[&str], threads: &str, out: &Path) -> (Vec<u8>, Vec<u8>) {
    let o = Command::new(env!("CARGO_BIN_EXE_gdof-lab"))
        .env("GDOF_LAB_THREADS", threads)
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    (std::fs::read(out).unwrap(), o.stderr)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p.to_str().unwrap().to_string()
    };
    let c2 = write("c2.json", r#"{"alpha":[[1,0.8],[0.9,0.3]],"beta":[[0.5,0.5],[0.2,0.2]]}"#);
    let k3 = write("k3.json", r#"{"K":3,"alpha":0.6,"beta":0.3}"#);
    let weak = write("weak.json", r#"{"alpha":[[1,1],[0.5,0.5]],"beta":[[0,0],[0,0]]}"#);
    let commands: Vec<Vec<&str>> = vec![
        vec!["achieve", "--instance", &c2, "--seed", "3", "--trials", "50"],
        vec!["achieve", "--instance", &k3, "--seed", "3", "--trials", "50", "--format", "json"],
        vec!["sweep", "--axis", "P", "--instance", &c2, "--grid", "1e4,1e6,1e8", "--seed", "9", "--trials", "30"],
        vec!["ais-prob", "--instance", &weak, "--seed", "4", "--p-bar", "16", "--pairs", "50", "--trials", "300"],
        vec!["ais-size", "--instance", &weak, "--seed", "4", "--draws", "8"],
        vec!["ais-size", "--instance", &weak, "--seed", "4", "--draws", "8", "--format", "json"],
    ];
    for (i, cmd) in commands.iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let reference = run_cli(cmd, "1", &out);
        for threads in ["1", "2", "4", "8"] {
            ensure!(run_cli(cmd, threads, &out) == reference, "{} differs with {threads} workers", cmd[0]);
        }
    }
    Ok(format!("{} stochastic commands byte-identical across 1, 2, 4, 8 workers", commands.len()))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        match outcome {
            Ok(msg) => println!("[PASS] criterion {n}: {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("[FAIL] criterion {n}: {name}: {msg}");
            }
        }
    };
    report(1, "formula suite", formula_suite());
    report(2, "prior-result recovery", prior_results());
    report(3, "K-user endpoints", k_user_endpoints());
    report(4, "budget optimizer", budget_optimizer());

    let start = Instant::now();
    let results = suite();
    let time = within(start.elapsed(), 300);
    report(5, "achievability slopes", time.and_then(|t| achievability(&results).map(|m| format!("{m}; {t}"))));
    report(6, "SINR exponents", sinr_exponents());
    report(7, "zero-forcing", zero_forcing(&results));
    report(8, "aligned image sets", ais_lab());
    report(9, "determinism", determinism());

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
