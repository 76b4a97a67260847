//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion. Failures
//! are reported, not fatal, unless `NOTMF_ACCEPTANCE_STRICT=1` is set.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::DMatrix;
use notmf_core::eval::{make_synthetic, score, SyntheticSpec};
use notmf_core::{
    fit, forecast_latent, rolling_forecast, update_coefficients, update_spatial, CgSettings,
    MaskedMatrix, ModelConfig, OperatorFamily, TemporalProblem, VarCoefficients, Variant,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Option<Outcome> {
    Some(Outcome { pass, detail })
}

fn oracle_equivalence() -> Option<Outcome> {
    let mut rng = rng(1001);
    let ms = [0, 1, 3];
    let densities = [0.3, 0.7, 1.0];
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let d = 1 + i % 2;
        let m = ms[(i / 2) % 3];
        let density = densities[i % 3];
        let r = rng.random_range(1..=3);
        let n = rng.random_range(2..=10);
        let t = rng.random_range(d + m + 2..=20);
        let y = random_masked(&mut rng, n, t, density);
        let w = randn(&mut rng, r, n);
        let coeffs = random_coeffs(&mut rng, r, d, 0.3);
        let fam = OperatorFamily::build(d, m, t, false).unwrap();
        let lambda = rng.random_range(0.1..5.0);
        let rho = rng.random_range(0.5..5.0);
        let problem = TemporalProblem::new(&y, &w, &coeffs, &fam, lambda, rho).unwrap();
        let exact = problem.oracle_x().unwrap();
        let settings = CgSettings {
            max_iters: 500,
            tol: 1e-12,
        };
        let cg = problem.cgtf(&DMatrix::zeros(r, t), settings).unwrap().x;
        worst = worst.max(rel(&cg, &exact));
    }
    outcome(
        worst <= 1e-6,
        format!("20 instances, worst relative difference {worst:.2e} (limit 1e-6)"),
    )
}

fn operator_correctness() -> Option<Outcome> {
    let mut rng = rng(1002);
    let mut worst_adj: f64 = 0.0;
    let mut worst_dense: f64 = 0.0;
    for _ in 0..50 {
        let d = rng.random_range(1..=4);
        let m = rng.random_range(0..=6);
        let t = d + m + rng.random_range(2..=15);
        let k = rng.random_range(0..=d);
        let r = rng.random_range(1..=3);
        let fam = OperatorFamily::build(d, m, t, false).unwrap();
        let x = randn(&mut rng, r, t);
        let g = randn(&mut rng, r, fam.out_cols());
        let fwd = fam.apply_psi(&x, k).unwrap();
        let adj = fam.apply_psi_adjoint(&g, k).unwrap();
        let (lhs, rhs) = (fwd.dot(&g), x.dot(&adj));
        worst_adj = worst_adj.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));
        let literal = literal_psi(d, m, t, k);
        let dense_gap = (fam.dense_psi(k).unwrap() - &literal).amax();
        worst_dense = worst_dense
            .max(dense_gap)
            .max(rel(&fwd, &(&x * literal.transpose())));
    }
    outcome(
        worst_adj <= 1e-12 && worst_dense <= 1e-12,
        format!("50 combinations, adjoint gap {worst_adj:.1e}, dense gap {worst_dense:.1e} (limit 1e-12)"),
    )
}

fn monotone_trace() -> Option<Outcome> {
    let syn = make_synthetic(&SyntheticSpec::default()).unwrap();
    let cfg = ModelConfig {
        rank: 4,
        order: 2,
        season: 28,
        outer_iters: 50,
        cg_iters: 5000,
        cg_tol: 1e-13,
        ..ModelConfig::default()
    };
    let model = fit(&syn.observed, &cfg).unwrap();
    let trace = model.objective_trace();
    let violations = trace
        .windows(2)
        .filter(|p| p[1] > p[0] + 1e-9 * p[0])
        .count();
    let worst = trace
        .windows(2)
        .map(|p| (p[1] - p[0]) / p[0])
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        violations == 0 && trace.len() == 50,
        format!(
            "{} iterations, {violations} increases, largest relative step {worst:.2e}",
            trace.len()
        ),
    )
}

fn subproblem_optimality() -> Option<Outcome> {
    let mut rng = rng(1004);
    let mut worst_w: f64 = 0.0;
    let mut worst_a: f64 = 0.0;
    for i in 0..10 {
        let (n, t, r) = (
            rng.random_range(5..30),
            rng.random_range(20..60),
            rng.random_range(1..5),
        );
        let y = random_masked(&mut rng, n, t, 0.3 + 0.07 * i as f64);
        let x = randn(&mut rng, r, t);
        let rho = rng.random_range(0.1..5.0);
        let w = update_spatial(&y, &x, rho).unwrap();
        let resid = y.project(&(y.values() - w.transpose() * &x)).unwrap();
        let grad = -(&x * resid.transpose()) + &w * rho;
        let scale = x.norm() * y.values().norm() + rho * w.norm();
        worst_w = worst_w.max(grad.norm() / scale);

        let d = 1 + i % 3;
        let m = [0, 2, 5][i % 3];
        let first = i % 4 == 3;
        let fam = OperatorFamily::build(d, m, t, first).unwrap();
        for diagonal in [false, true] {
            let c = update_coefficients(&x, &fam, diagonal).unwrap();
            let target = fam.apply_psi(&x, 0).unwrap();
            let lagged: Vec<DMatrix<f64>> =
                (1..=d).map(|k| fam.apply_psi(&x, k).unwrap()).collect();
            let mut e = target.clone();
            for (k, z) in lagged.iter().enumerate() {
                e -= c.block(k + 1) * z;
            }
            let scale = target.norm() * lagged.iter().map(|z| z.norm()).sum::<f64>();
            for z in &lagged {
                let mut g = -(&e * z.transpose());
                if diagonal {
                    g = DMatrix::from_diagonal(&g.diagonal());
                }
                worst_a = worst_a.max(g.norm() / scale.max(f64::MIN_POSITIVE));
            }
        }
    }
    outcome(
        worst_w <= 1e-8 && worst_a <= 1e-8,
        format!("spatial gradient {worst_w:.1e}, coefficient gradient {worst_a:.1e} (scaled, limit 1e-8)"),
    )
}

fn var_recovery() -> Option<Outcome> {
    let a1 = DMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.0, -0.1, 0.3, 0.1, 0.05, 0.0, 0.4]);
    let a2 = DMatrix::from_row_slice(3, 3, &[-0.2, 0.05, 0.0, 0.1, 0.15, -0.05, 0.0, 0.1, -0.1]);
    let mut worst_full: f64 = 0.0;
    for (m, first) in [(0, false), (1, false), (7, false), (4, true)] {
        let x = var_integrated(&[a1.clone(), a2.clone()], m, first, 80, 1005 + m as u64);
        let fam = OperatorFamily::build(2, m, 80, first).unwrap();
        let got = update_coefficients(&x, &fam, false).unwrap();
        let want = VarCoefficients::from_blocks(&[a1.clone(), a2.clone()], false).unwrap();
        worst_full = worst_full.max((got.stacked() - want.stacked()).amax());
    }
    let diag = [
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.6, -0.3, 0.2])),
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-0.2, 0.1, 0.3])),
    ];
    let x = var_integrated(&diag, 5, false, 80, 1006);
    let fam = OperatorFamily::build(2, 5, 80, false).unwrap();
    let got = update_coefficients(&x, &fam, true).unwrap();
    let want = VarCoefficients::from_blocks(&diag, true).unwrap();
    let worst_diag = (got.stacked() - want.stacked()).amax();
    outcome(
        worst_full <= 1e-8 && worst_diag <= 1e-8,
        format!(
            "full max error {worst_full:.1e}, diagonal max error {worst_diag:.1e} (limit 1e-8)"
        ),
    )
}

fn forecast_convention() -> Option<Outcome> {
    let blocks = [
        DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.3]),
        DMatrix::from_row_slice(2, 2, &[-0.2, 0.05, 0.1, 0.15]),
    ];
    let coeffs = VarCoefficients::from_blocks(&blocks, false).unwrap();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (m, first) in [(1, false), (4, false), (7, false), (3, true), (6, true)] {
        let full = var_integrated(&blocks, m, first, 70, 1007 + m as u64);
        for horizon in 1..=m {
            let t = 70 - horizon;
            let past = full.columns(0, t).into_owned();
            let got = forecast_latent(&past, &coeffs, m, horizon, first).unwrap();
            let want = full.columns(t, horizon).into_owned();
            worst = worst.max(rel(&got, &want));
            cases += 1;
        }
    }
    outcome(
        worst <= 1e-8,
        format!("{cases} (m, δ) cases, worst relative error {worst:.1e} (limit 1e-8)"),
    )
}

const TRAIN: usize = 364;
const HORIZON: usize = 7;
const WINDOWS: usize = 8;

fn rolling_mape(syn: &MaskedMatrix, cfg: &ModelConfig) -> (f64, DMatrix<f64>) {
    let truth = syn.columns(TRAIN..TRAIN + HORIZON * WINDOWS).unwrap();
    let out = rolling_forecast(syn, cfg, TRAIN, HORIZON, WINDOWS).unwrap();
    (
        score(&truth, &out.forecast.values).unwrap().mape,
        out.forecast.values,
    )
}

fn bench_config(variant: Variant, season: usize, seed: u64) -> ModelConfig {
    ModelConfig {
        rank: 4,
        order: 2,
        season,
        variant,
        seed,
        ..ModelConfig::default()
    }
}

fn method_ordering() -> Option<Outcome> {
    let mut notmf_wins = 0;
    let mut trmf_not_better = 0;
    let mut rows = Vec::new();
    for seed in 1..=10 {
        let syn = make_synthetic(&SyntheticSpec {
            seed,
            ..SyntheticSpec::default()
        })
        .unwrap()
        .observed;
        let (notmf, _) = rolling_mape(&syn, &bench_config(Variant::Notmf, 28, seed));
        let (tmf, _) = rolling_mape(&syn, &bench_config(Variant::Tmf, 0, seed));
        let (trmf, _) = rolling_mape(&syn, &bench_config(Variant::Trmf, 0, seed));
        notmf_wins += usize::from(notmf < tmf);
        trmf_not_better += usize::from(trmf >= notmf);
        rows.push(format!("{notmf:.2}/{tmf:.2}/{trmf:.2}"));
    }
    outcome(
        notmf_wins >= 8 && trmf_not_better >= 8,
        format!(
            "NoTMF beats TMF {notmf_wins}/10, TRMF not better {trmf_not_better}/10; MAPE notmf/tmf/trmf: {}",
            rows.join(" ")
        ),
    )
}

/// Absolute percentage errors over scoreable test entries, in a fixed order.
fn entry_apes(truth: &MaskedMatrix, predicted: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    for t in 0..truth.n_cols() {
        for &i in truth.column_observed(t).unwrap() {
            let y = truth.values()[(i, t)];
            if y != 0.0 {
                out.push(100.0 * ((y - predicted[(i, t)]) / y).abs());
            }
        }
    }
    out
}

fn cg_sensitivity() -> Option<Outcome> {
    let mut within = 0;
    let mut never_better = 0;
    let mut rows = Vec::new();
    for seed in 1..=10 {
        let syn = make_synthetic(&SyntheticSpec {
            seed,
            ..SyntheticSpec::default()
        })
        .unwrap()
        .observed;
        let truth = syn.columns(TRAIN..TRAIN + HORIZON * WINDOWS).unwrap();
        let run = |cg_iters| {
            let cfg = ModelConfig {
                cg_iters,
                ..bench_config(Variant::Notmf, 28, seed)
            };
            rolling_mape(&syn, &cfg)
        };
        let (m3, f3) = run(3);
        let (m5, _) = run(5);
        let (m15, f15) = run(15);
        within += usize::from((m5 - m15).abs() <= 0.05 * m15);

        // Noise band: two standard errors of the paired per-entry difference.
        let diffs: Vec<f64> = entry_apes(&truth, &f3)
            .iter()
            .zip(entry_apes(&truth, &f15))
            .map(|(a, b)| a - b)
            .collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let noise = 2.0 * (var / n).sqrt();
        never_better += usize::from(m3 >= m15 - noise);
        rows.push(format!("{m3:.3}/{m5:.3}/{m15:.3}±{noise:.3}"));
    }
    outcome(
        within == 10 && never_better == 10,
        format!(
            "n_x=5 within 5% of n_x=15 in {within}/10, n_x=3 not better beyond noise in {never_better}/10; MAPE 3/5/15±noise: {}",
            rows.join(" ")
        ),
    )
}

fn end_to_end_determinism() -> Option<Outcome> {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_notmf");
    let call = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .current_dir(dir.path())
            .env_clear()
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    };
    let rolling = |out: &str| {
        call(&[
            "rolling",
            "--input",
            "data/observed.csv",
            "--out",
            out,
            "--rank",
            "4",
            "--horizon",
            "7",
            "--windows",
            "8",
            "--seed",
            "11",
        ])
    };
    if !(call(&["synth", "--out", "data", "--seed", "11"]) && rolling("a") && rolling("b")) {
        return outcome(false, "a command exited with an error".into());
    }
    let a = std::fs::read(dir.path().join("a/forecast.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/forecast.csv")).unwrap();
    outcome(
        a == b && !a.is_empty(),
        format!("forecast.csv {} bytes, identical: {}", a.len(), a == b),
    )
}

/// Optional check against the NYC Uber movement speed panel. Set
/// `NOTMF_UBER_CSV` to a CSV in the documented layout (one row per road
/// segment, hourly columns, zeros mean missing).
fn uber_reproduction() -> Option<Outcome> {
    let path = std::env::var_os("NOTMF_UBER_CSV")?;
    let path = Path::new(&path);
    if !path.is_file() {
        return None;
    }
    let panel = notmf_cli::load_csv(path, true).unwrap();
    let week = 7 * 24;
    let history = 9 * week;
    if panel.data.n_cols() < history + week {
        return outcome(
            false,
            format!("{} columns, need {}", panel.data.n_cols(), history + week),
        );
    }
    let y = panel.data.columns(0..history + week).unwrap();
    let cfg = ModelConfig {
        rank: 10,
        order: 6,
        season: 168,
        lambda: 1.0,
        rho: 5.0,
        ..ModelConfig::default()
    };
    let out = rolling_forecast(&y, &cfg, history, 1, week).unwrap();
    let r = score(
        &y.columns(history..history + week).unwrap(),
        &out.forecast.values,
    )
    .unwrap();
    outcome(
        (r.mape - 13.39).abs() <= 1.0 && (r.rmse - 2.83).abs() <= 0.3,
        format!(
            "MAPE {:.2} (target 13.39±1.0), RMSE {:.2} (target 2.83±0.3)",
            r.mape, r.rmse
        ),
    )
}

type Check = fn() -> Option<Outcome>;

fn main() {
    let checks: [(&str, Check, Duration); 10] = [
        (
            "oracle equivalence",
            oracle_equivalence,
            Duration::from_secs(5),
        ),
        (
            "operator correctness",
            operator_correctness,
            Duration::from_secs(1),
        ),
        (
            "block-descent monotonicity",
            monotone_trace,
            Duration::from_secs(30),
        ),
        (
            "subproblem optimality",
            subproblem_optimality,
            Duration::MAX,
        ),
        ("VAR recovery", var_recovery, Duration::MAX),
        ("forecast convention", forecast_convention, Duration::MAX),
        ("method ordering", method_ordering, Duration::from_secs(300)),
        (
            "CG-iteration sensitivity",
            cg_sensitivity,
            Duration::from_secs(600),
        ),
        (
            "end-to-end determinism",
            end_to_end_determinism,
            Duration::MAX,
        ),
        (
            "Uber reproduction (optional)",
            uber_reproduction,
            Duration::MAX,
        ),
    ];
    let mut failed = 0;
    for (name, check, limit) in checks {
        let started = Instant::now();
        let result = check();
        let elapsed = started.elapsed();
        match result {
            None => println!("SKIP {name}: dataset not supplied (set NOTMF_UBER_CSV)"),
            Some(o) => {
                let in_time = elapsed <= limit;
                let pass = o.pass && in_time;
                failed += usize::from(!pass);
                let budget = if limit == Duration::MAX {
                    String::new()
                } else {
                    format!(", limit {}s", limit.as_secs())
                };
                let late = if in_time { "" } else { " [over time budget]" };
                println!(
                    "{} {name}: {} ({:.2}s{budget}){late}",
                    if pass { "PASS" } else { "FAIL" },
                    o.detail,
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    println!("{failed} criteria failed");
    let strict = std::env::var("NOTMF_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
