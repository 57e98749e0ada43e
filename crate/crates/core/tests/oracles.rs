mod common;

use common::*;
use latentcdf::ecdf::raw_gram;
use latentcdf::sim::{simulate_panel, SimConfig};
use latentcdf::spectral::{self, build_m, fit_gram, DimRule, SpectralConfig};
use latentcdf::{CenteredGram, CyclePanel, Exec, WeightMeasure};
use nalgebra::DMatrix;
use rand::Rng;

fn assert_rel(a: f64, b: f64, tol: f64, ctx: &str) {
    assert!((a - b).abs() <= tol * b.abs().max(1e-300), "{ctx}: {a} vs {b}");
}

#[test]
fn closed_form_matches_quadrature() {
    let mut r = rng(1);
    for panel_id in 0..50 {
        let n = r.random_range(2..8);
        let q = r.random_range(1..25);
        let cycles = random_cycles(&mut r, n, q, panel_id % 3 == 0);
        let panel = CyclePanel::new(cycles.clone()).unwrap();
        for laplace in [false, true] {
            let m = random_measure(&mut r, laplace);
            let gram = raw_gram(&panel, &m, Exec::Sequential);
            for t in 0..n {
                for s in 0..n {
                    let oracle = quadrature_inner(&cycles[t], &cycles[s], &m);
                    assert_rel(gram[(t, s)], oracle, 1e-6, &format!("panel {panel_id} {m:?} ({t},{s})"));
                }
            }
        }
    }
}

#[test]
fn single_term_example_by_quadrature() {
    let m = WeightMeasure::Lebesgue { lower: -1.0, upper: 1.0 };
    assert_rel(quadrature_inner(&[-0.5], &[0.5], &m), 0.5, 1e-12, "single term");
    let l = WeightMeasure::Laplace { location: 0.0, scale: 1.0 };
    assert_rel(quad_mass(&l, 1.0, 80.0), 0.5 * (-1.0f64).exp(), 1e-12, "laplace tail");
}

#[test]
fn eigenvalues_match_grid_operator() {
    let mut r = rng(2);
    for case in 0..20 {
        let p = 1 + case % 2;
        let n = r.random_range(6..=30);
        let q = r.random_range(2..=(360 / n).min(20));
        let cfg = SimConfig { n, q, seed: 100 + case as u64, ..SimConfig::default() };
        let cycles = simulate_panel(&cfg).unwrap().cycles;
        let m = random_measure(&mut r, case % 4 >= 2);
        let panel = CyclePanel::new(cycles.clone()).unwrap();
        let scfg = SpectralConfig { lag: p, dim_rule: DimRule::default() };
        let model = spectral::fit_with(&panel, &m, &scfg, Exec::Sequential).unwrap();
        let oracle = grid_operator_eigenvalues(&cycles, &m, p, 400);
        let top = model.theta[0];
        for (j, &theta) in model.theta.iter().enumerate().filter(|(_, &t)| t > 1e-4 * top) {
            assert_rel(theta, oracle[j], 1e-3, &format!("case {case} n={n} q={q} p={p} j={j}"));
        }
    }
}

#[test]
fn hand_gram_cases() {
    let m = WeightMeasure::Lebesgue { lower: -1.0, upper: 1.0 };
    let panel = CyclePanel::new(vec![vec![-0.5], vec![0.5]]).unwrap();
    let raw = raw_gram(&panel, &m, Exec::default());
    let want = DMatrix::from_row_slice(2, 2, &[1.5, 0.5, 0.5, 0.5]);
    assert!((raw.clone() - want).amax() < 1e-12);
    let centered = CenteredGram::from_raw(raw);
    let want = DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]);
    assert!((centered.entries() - want).amax() < 1e-12);

    let g = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
    let gram = CenteredGram::from_raw(g.clone());
    assert!((gram.entries() - &g).amax() < 1e-12);
    let mmat = build_m(&gram, 1).unwrap();
    let want = DMatrix::from_row_slice(2, 2, &[5.0, -4.0, -4.0, 5.0]) / 4.0;
    assert!((mmat.clone() - want).amax() < 1e-12);
    let model = fit_gram(&gram, &SpectralConfig { lag: 1, dim_rule: DimRule::Fixed { d: 2 } }).unwrap();
    assert!((model.theta[0] - 2.25).abs() < 1e-12 && (model.theta[1] - 0.25).abs() < 1e-12);
    assert!((power_iteration(&mmat) - 2.25).abs() < 1e-12);
}

#[test]
fn leading_eigenvalue_matches_power_iteration() {
    let mut r = rng(3);
    for _ in 0..30 {
        let n = r.random_range(4..15);
        let q = r.random_range(1..10);
        let cycles = random_cycles(&mut r, n, q, false);
        let panel = CyclePanel::new(cycles).unwrap();
        let laplace = r.random_bool(0.5);
        let m = random_measure(&mut r, laplace);
        let gram = latentcdf::ecdf::mean_inner_products(&panel, &m);
        for p in 1..=2.min(n - 2) {
            let model = fit_gram(&gram, &SpectralConfig { lag: p, dim_rule: DimRule::default() }).unwrap();
            let oracle = power_iteration(&build_m(&gram, p).unwrap());
            if model.theta[0] > 0.0 && model.theta.get(1).is_none_or(|t2| *t2 < 0.9 * model.theta[0]) {
                assert_rel(model.theta[0], oracle, 1e-8, "power iteration");
            }
        }
    }
}
