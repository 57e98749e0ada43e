//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use latentcdf::ecdf::raw_gram;
use latentcdf::sim::{median, run_monte_carlo_with, simulate_panel, McRecord, McSettings, SimConfig};
use latentcdf::spectral::{self, build_m, fit_gram, DimRule, SpectralConfig};
use latentcdf::{CenteredGram, CyclePanel, Exec, WeightMeasure};
use nalgebra::DMatrix;
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(out: Outcome, elapsed: Duration, budget: Option<Duration>) -> Outcome {
    match (out, budget) {
        (Ok(d), Some(b)) if elapsed > b => Err(format!("{d}; runtime {elapsed:.1?} exceeds {b:?}")),
        (o, _) => o,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn inner_product_oracle() -> Outcome {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = r.random_range(2..8);
        let q = r.random_range(1..25);
        let ties = r.random_bool(0.3);
        let cycles = random_cycles(&mut r, n, q, ties);
        let panel = CyclePanel::new(cycles.clone()).unwrap();
        for laplace in [false, true] {
            let m = random_measure(&mut r, laplace);
            let gram = raw_gram(&panel, &m, Exec::Sequential);
            for t in 0..n {
                for s in 0..n {
                    worst = worst.max(rel(gram[(t, s)], quadrature_inner(&cycles[t], &cycles[s], &m)));
                }
            }
        }
    }
    check(worst <= 1e-6, format!("max relative error {worst:.2e} over 50 panels x 2 measures"))
}

fn duality_oracle() -> Outcome {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let p = 1 + case % 2;
        let n = r.random_range(6..=30);
        let q = r.random_range(2..=(360 / n).min(20));
        let cycles = simulate_panel(&SimConfig { n, q, seed: 100 + case as u64, ..SimConfig::default() })
            .unwrap()
            .cycles;
        let m = random_measure(&mut r, case % 4 >= 2);
        let panel = CyclePanel::new(cycles.clone()).unwrap();
        let cfg = SpectralConfig { lag: p, dim_rule: DimRule::default() };
        let model = spectral::fit_with(&panel, &m, &cfg, Exec::Sequential).unwrap();
        let oracle = grid_operator_eigenvalues(&cycles, &m, p, 400);
        let top = model.theta[0];
        for (j, &theta) in model.theta.iter().enumerate().filter(|(_, &t)| t > 1e-4 * top) {
            worst = worst.max(rel(theta, oracle[j]));
        }
    }
    check(worst <= 1e-3, format!("max relative eigenvalue gap {worst:.2e} over 20 panels"))
}

fn hand_cases() -> Outcome {
    let m = WeightMeasure::Lebesgue { lower: -1.0, upper: 1.0 };
    let panel = CyclePanel::new(vec![vec![-0.5], vec![0.5]]).unwrap();
    let raw = raw_gram(&panel, &m, Exec::Sequential);
    let mut gaps = vec![(raw.clone() - DMatrix::from_row_slice(2, 2, &[1.5, 0.5, 0.5, 0.5])).amax()];
    let centered = CenteredGram::from_raw(raw);
    gaps.push((centered.entries() - DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25])).amax());

    let g = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
    let gram = CenteredGram::from_raw(g);
    let mmat = build_m(&gram, 1).unwrap();
    gaps.push((mmat - DMatrix::from_row_slice(2, 2, &[5.0, -4.0, -4.0, 5.0]) / 4.0).amax());
    let model = fit_gram(&gram, &SpectralConfig { lag: 1, dim_rule: DimRule::Fixed { d: 2 } }).unwrap();
    gaps.push((model.theta[0] - 2.25).abs().max((model.theta[1] - 0.25).abs()));
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    check(worst <= 1e-12, format!("max deviation {worst:.1e} across n=2 and n=3 cases"))
}

fn mc(n: usize, q: usize, reps: usize) -> Vec<McRecord> {
    let cfg = SimConfig { n, q, ..SimConfig::default() };
    run_monte_carlo_with(&cfg, reps, &McSettings::default(), Exec::Parallel).unwrap()
}

fn ok_records(records: &[McRecord]) -> Vec<&McRecord> {
    records.iter().filter(|r| r.error.is_none()).collect()
}

fn med(records: &[McRecord], f: impl Fn(&McRecord) -> f64) -> f64 {
    median(&ok_records(records).into_iter().map(f).collect::<Vec<_>>())
}

fn eigenvalue_consistency() -> Outcome {
    let records = mc(400, 400, 50);
    let target = SimConfig::default().target_theta();
    let theta = med(&records, |r| r.theta[0]);
    let ratio = med(&records, |r| r.theta[0] / r.theta.get(1).copied().unwrap_or(0.0));
    check(
        rel(theta, target) <= 0.25 && ratio > 5.0,
        format!("median theta_1 {theta:.4e} vs {target:.4e} (rel {:.3}), median ratio {ratio:.1}", rel(theta, target)),
    )
}

/// Monte Carlo runs at q = 200 shared by several criteria.
struct Shared {
    by_n: BTreeMap<usize, Vec<McRecord>>,
}

impl Shared {
    fn new() -> Self {
        let mut by_n = BTreeMap::new();
        for n in [50, 100, 400] {
            by_n.insert(n, mc(n, 200, 50));
        }
        by_n.insert(200, mc(200, 200, 100));
        Self { by_n }
    }

    fn fifty(&self, n: usize) -> &[McRecord] {
        &self.by_n[&n][..50]
    }
}

fn eigenfunction_consistency(s: &Shared) -> Outcome {
    let errs: Vec<f64> = [50, 100, 200].iter().map(|&n| med(s.fifty(n), |r| r.psi_error)).collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    check(
        decreasing && errs[2] < 0.15,
        format!("median psi error at n=50/100/200: {:.4} / {:.4} / {:.4}", errs[0], errs[1], errs[2]),
    )
}

fn score_fidelity(s: &Shared) -> Outcome {
    let hi = med(s.fifty(200), |r| r.score_max_error);
    let lo = med(&mc(200, 100, 50), |r| r.score_max_error);
    check(hi < lo, format!("median max score error q=200 {hi:.4} vs q=100 {lo:.4}"))
}

fn reconstruction() -> Outcome {
    let records = mc(200, 50, 500);
    let ok = ok_records(&records);
    let wins = ok.iter().filter(|r| r.ftilde_error < r.fhat_error).count() as f64 / records.len() as f64;
    let (ft, fh) = (med(&records, |r| r.ftilde_error), med(&records, |r| r.fhat_error));
    check(
        wins >= 0.8 && ft <= 0.7 * fh,
        format!("P(reconstruction closer) {wins:.3}, median errors {ft:.4} vs {fh:.4} (ratio {:.3})", ft / fh),
    )
}

fn dimension_selection(s: &Shared) -> Outcome {
    let records = &s.by_n[&200];
    let hits = records.iter().filter(|r| r.error.is_none() && r.d_hat == 1).count();
    let rate = hits as f64 / records.len() as f64;
    check(rate >= 0.9, format!("d_hat = 1 in {hits} of {} replications", records.len()))
}

fn mean_lln(s: &Shared) -> Outcome {
    let pts: Vec<(f64, f64)> =
        [50, 100, 200, 400].iter().map(|&n| ((n as f64).ln(), med(s.fifty(n), |r| r.mean_error).ln())).collect();
    let k = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k);
    let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / pts.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    check((-0.7..=-0.3).contains(&slope), format!("log-log slope {slope:.3}"))
}

fn time_series_layer() -> Outcome {
    let phi = ar1_recovery(0.5, 10_000, 50);
    let aic = white_noise_aic_rate(500, 100);
    let size = ljung_box_size(1000, 200);
    let power = ljung_box_power_max_p(0.9, 500, 50);
    let (b0, b1) = lad_recovery(5000, 50);
    let dm = dm_size(500, 500);
    let parts = [
        ((0.47..=0.53).contains(&phi), format!("AR(1) median phi {phi:.4}")),
        (aic >= 0.8, format!("AIC picks (0,0) in {:.0}% of white-noise seeds (needs 80%)", aic * 100.0)),
        ((0.02..=0.09).contains(&size), format!("Ljung-Box size {size:.3}")),
        (power < 0.001, format!("Ljung-Box max p under phi=0.9 {power:.1e}")),
        ((b0 - 1.0).abs() <= 0.05 && (b1 - 2.0).abs() <= 0.05, format!("LAD median ({b0:.4}, {b1:.4})")),
        ((0.03..=0.08).contains(&dm), format!("DM size {dm:.3}")),
    ];
    let detail = parts
        .iter()
        .map(|(ok, d)| format!("{}{d}", if *ok { "" } else { "FAILED " }))
        .collect::<Vec<_>>()
        .join("; ");
    check(parts.iter().all(|p| p.0), detail)
}

fn run_bin(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_latentcdf")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn step_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

fn backtest_integrity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let cfg = d.join("run.toml");
    fs::write(&cfg, "p = 1\nn0 = 40\n[sim]\nn = 60\nq = 40\n").unwrap();
    let sim = d.join("sim");
    run_bin(&["simulate", "-c", &p(&cfg), "-o", &p(&sim)])?;
    let data = sim.join("panel.csv");

    // Leakage canary: overwrite the cycle at 0-based index `k`.
    let k = 50;
    let text = fs::read_to_string(&data).unwrap();
    let mut planted = String::new();
    for (i, line) in text.lines().enumerate() {
        let (c, v) = line.split_once(',').unwrap();
        if i > 0 && c.parse::<usize>().unwrap() == k + 1 {
            planted.push_str(&format!("{c},{}\n", 1e6 * v.parse::<f64>().unwrap() + 123.0));
        } else {
            planted.push_str(line);
            planted.push('\n');
        }
    }
    let planted_path = d.join("planted.csv");
    fs::write(&planted_path, planted).unwrap();
    let (a, b) = (d.join("clean"), d.join("planted"));
    run_bin(&["backtest", "-d", &p(&data), "-c", &p(&cfg), "-o", &p(&a)])?;
    run_bin(&["backtest", "-d", &p(&planted_path), "-c", &p(&cfg), "-o", &p(&b)])?;
    let (ra, rb) = (step_rows(&a.join("backtest_steps.csv")), step_rows(&b.join("backtest_steps.csv")));
    let leaked: Vec<usize> = ra
        .iter()
        .zip(&rb)
        .filter(|(x, _)| x[0].parse::<usize>().unwrap() <= k)
        .filter(|(x, y)| [2, 3, 4, 6, 7].iter().any(|&c| x[c] != y[c]))
        .map(|(x, _)| x[0].parse().unwrap())
        .collect();
    let later_changed = ra.last() != rb.last();

    let mut outputs = Vec::new();
    for threads in ["1", "2", "4"] {
        let out = d.join(format!("t{threads}"));
        run_bin(&["--threads", threads, "backtest", "-d", &p(&data), "-c", &p(&cfg), "-o", &p(&out)])?;
        let files: Vec<Vec<u8>> = ["backtest_report.json", "backtest_steps.csv"]
            .iter()
            .map(|f| fs::read(out.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    check(
        leaked.is_empty() && later_changed && identical,
        format!(
            "forecasts at origins <= {k} unchanged by a planted cycle: {} (leaking origins {leaked:?}); \
             reports bit-identical across 1/2/4 threads: {identical}",
            leaked.is_empty() && later_changed
        ),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |num: usize, name: &str, budget: Option<u64>, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        match within_budget(out, elapsed, budget.map(Duration::from_secs)) {
            Ok(d) => println!("PASS criterion {num} ({name}): {d} [{elapsed:.1?}]"),
            Err(d) => {
                failures += 1;
                println!("FAIL criterion {num} ({name}): {d} [{elapsed:.1?}]");
            }
        }
    };

    report(1, "inner-product oracle", Some(10), &inner_product_oracle);
    report(2, "eigen-duality oracle", Some(60), &duality_oracle);
    report(3, "hand-computed Gram and M", None, &hand_cases);
    report(4, "eigenvalue consistency", Some(600), &eigenvalue_consistency);
    let shared = Shared::new();
    report(5, "eigenfunction consistency", None, &|| eigenfunction_consistency(&shared));
    report(6, "score-path fidelity", None, &|| score_fidelity(&shared));
    report(7, "reconstruction improvement", None, &reconstruction);
    report(8, "dimension selection", None, &|| dimension_selection(&shared));
    report(9, "law of large numbers for the mean CDF", None, &|| mean_lln(&shared));
    report(10, "time-series layer", Some(300), &time_series_layer);
    report(11, "backtest integrity", None, &backtest_integrity);

    if failures == 0 {
        println!("all 11 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failures} of 11 criteria failed");
        ExitCode::FAILURE
    }
}
