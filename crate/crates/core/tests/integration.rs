mod common;

use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use common::ToyMdp;
use infodual::basis::BasisSpec;
use infodual::dual::{
    build_inner_problem, estimate_upper_bounds, exact_upper_bound_by_enumeration, trajectory_for, trajectory_reward,
    DualPenalty, ZeroPenalty,
};
use infodual::lqc::trading_value_recursion;
use infodual::mdp::{optimal_by_enumeration, path_rng, simulate_paths, MdpModel, NoiseModel, SeedStream, CI_95};
use infodual::qp::{QpStatus, SolverOptions};
use infodual::regression::fit_coordinates;
use infodual::trading::{PlqcPolicy, TradingModel, TradingParams, TradingRegressors};
use nalgebra::DVector;

fn model(d: usize, t: usize) -> TradingModel {
    TradingModel::new(TradingParams { num_assets: d, horizon: t, ..Default::default() }).unwrap()
}

fn noise_path(m: &TradingModel, seed: u64, index: u64) -> Vec<DVector<f64>> {
    let mut rng = path_rng(seed, SeedStream::Dual, index);
    (0..m.horizon).map(|_| m.noise().sample(&mut rng)).collect()
}

#[test]
fn inner_problem_dimensions() {
    for (d, t) in [(1, 1), (1, 2), (3, 4), (5, 12)] {
        let m = model(d, t);
        let ip = build_inner_problem(&m, &noise_path(&m, 0, 0), &ZeroPenalty).unwrap();
        assert_eq!(ip.qp.p.nrows(), d * t);
        assert_eq!(ip.qp.g.nrows(), d * (2 * t - 1));
        assert_eq!(ip.qp.a_eq.nrows(), d);
    }
}

#[test]
fn single_period_value_is_forced_liquidation_cost() {
    let m = model(5, 1);
    let expected = -0.5 * (m.x0.transpose() * &m.lambda_matrix * &m.x0)[0];
    for j in 0..5 {
        let sol = build_inner_problem(&m, &noise_path(&m, 3, j), &ZeroPenalty)
            .unwrap()
            .solve(&SolverOptions::default())
            .unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.value - expected).abs() <= 1e-8 * expected.abs(), "{} vs {expected}", sol.value);
        assert!((&sol.actions[0] + &m.x0).amax() <= 1e-6 * m.x0.amax());
    }
}

#[test]
fn two_period_value_matches_grid_search() {
    let m = model(1, 2);
    let x0 = m.x0[0];
    for j in 0..3 {
        let z = noise_path(&m, 7, j);
        let sol = build_inner_problem(&m, &z, &ZeroPenalty).unwrap().solve(&SolverOptions::default()).unwrap();
        let value_of = |a1: f64| {
            let acts = vec![DVector::from_element(1, a1), DVector::from_element(1, -x0 - a1)];
            trajectory_reward(&m, &trajectory_for(&m, &z, &acts).unwrap())
        };
        let (mut lo, mut hi) = (-x0, 0.0);
        for _ in 0..200 {
            let (l, r) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
            if value_of(l) < value_of(r) {
                lo = l;
            } else {
                hi = r;
            }
        }
        let oracle = value_of(0.5 * (lo + hi));
        assert!((sol.value - oracle).abs() <= 1e-4 * oracle.abs().max(1.0), "{} vs {oracle}", sol.value);
    }
}

#[test]
fn second_order_penalty_shifts_values_by_its_constant() {
    let m = model(2, 6);
    let sol = Arc::new(trading_value_recursion(&m).unwrap());
    let paths = simulate_paths(&m, &PlqcPolicy::new(sol.clone(), 2), 4000, 5).unwrap();
    let fit = |order| {
        let basis = BasisSpec::taylor(m.noise(), order).unwrap();
        fit_coordinates(&paths, &basis, Arc::new(TradingRegressors::new(sol.clone(), &m, order).unwrap())).unwrap()
    };
    let (p1, p2) = (fit(1), fit(2));
    let pens: Vec<(&str, &dyn DualPenalty)> = vec![("t1", &p1), ("t2", &p2)];
    let ubs = estimate_upper_bounds(&m, &pens, 10, 5, &SolverOptions::default(), CI_95).unwrap();
    for j in 0..10 {
        let shift = ubs[0].constants[j] - ubs[1].constants[j];
        let diff = ubs[1].values[j] - ubs[0].values[j];
        assert!((diff - shift).abs() <= 1e-6 * ubs[0].values[j].abs().max(1.0), "path {j}: {diff} vs {shift}");
    }
}

#[test]
fn deterministic_noise_closes_the_gap() {
    for atom in [-1.0, 0.0, 1.0] {
        let toy = ToyMdp::with_noise(NoiseModel::uniform_atoms(&[atom]).unwrap());
        let (v0, _) = optimal_by_enumeration(&toy, 0, toy.initial_state().as_view()).unwrap();
        let (ub, _) = exact_upper_bound_by_enumeration(&toy, &ZeroPenalty).unwrap();
        assert!((ub - v0).abs() < 1e-12, "atom {atom}: {ub} vs {v0}");
    }
}

#[test]
fn perfect_information_dominates_the_optimum() {
    let toy = ToyMdp::new();
    let (v0, _) = optimal_by_enumeration(&toy, 0, toy.initial_state().as_view()).unwrap();
    let (ub, _) = exact_upper_bound_by_enumeration(&toy, &ZeroPenalty).unwrap();
    assert!(ub > v0 + 1e-3);
}

const SMALL_CONFIG: &str = r#"
[model]
assets = 1
horizon = 3

[run]
lb_paths = 500
ub_paths = 4
"#;

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_infodual")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn cli_writes_report_and_prints_only_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL_CONFIG);
    let out = dir.path().join("out");
    let o = run_cli(&["run", "--config", &cfg, "--seed", "4", "--out", out.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    let report = Path::new(stdout.trim());
    assert!(report.exists());
    assert!(out.join("run.log").exists());
    let csv = std::fs::read_to_string(report).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().contains(",4,"), "seed column: {csv}");
}

#[test]
fn cli_penalty_override_and_thread_independence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL_CONFIG);
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("out{threads}"));
        let o = run_cli(&[
            "run", "--config", &cfg, "--seed", "2", "--out", out.to_str().unwrap(), "--threads", threads,
            "--penalties", "zero,t2",
        ]);
        assert_eq!(o.status.code(), Some(0));
        reports.push(std::fs::read_to_string(String::from_utf8(o.stdout).unwrap().trim()).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let row = reports[0].lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    let col = |name: &str| infodual::experiment::CSV_COLUMNS.iter().position(|c| *c == name).unwrap();
    assert!(fields[col("ub_t1")].is_empty() && fields[col("ub_t1_hw")].is_empty(), "{row}");
    assert!(!fields[col("ub_t2")].is_empty(), "{row}");
}

#[test]
fn cli_config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let bad = write(dir.path(), "bad.toml", "[run]\nlb_paths = 0\n");
    let unknown = write(dir.path(), "unknown.toml", "[model]\nassetz = 3\n");
    for args in [
        vec!["run", "--config", bad.as_str(), "--seed", "0", "--out", out],
        vec!["run", "--config", unknown.as_str(), "--seed", "0", "--out", out],
        vec!["run", "--config", "/nonexistent.toml", "--seed", "0", "--out", out],
        vec!["run", "--config", bad.as_str(), "--seed", "x", "--out", out],
        vec!["run", "--config", bad.as_str(), "--seed", "0", "--out", out, "--penalties", "t9"],
    ] {
        let o = run_cli(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
    }
}
