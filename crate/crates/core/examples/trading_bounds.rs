//! Full pipeline for one liquidation instance: lower bound, fitted first- and
//! second-order penalties, upper bounds and the duality gap.
use std::sync::Arc;

use infodual::basis::BasisSpec;
use infodual::dual::{duality_gap, estimate_upper_bounds, DualPenalty, ZeroPenalty};
use infodual::lqc::trading_value_recursion;
use infodual::mdp::{estimate_lower_bound, simulate_paths, MdpModel, CI_95};
use infodual::qp::SolverOptions;
use infodual::regression::fit_coordinates;
use infodual::trading::{PlqcPolicy, TradingModel, TradingParams, TradingRegressors};

fn main() -> infodual::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().expect("usage: trading_bounds [D] [T] [M] [L]"));
    let d = args.next().unwrap_or(2);
    let t = args.next().unwrap_or(6);
    let m = args.next().unwrap_or(20_000);
    let l = args.next().unwrap_or(50);

    let model = TradingModel::new(TradingParams { num_assets: d, horizon: t, ..Default::default() })?;
    let sol = Arc::new(trading_value_recursion(&model)?);
    let paths = simulate_paths(&model, &PlqcPolicy::new(sol.clone(), d), m, 0)?;
    let lb = estimate_lower_bound(&paths)?;

    let fit = |order| -> infodual::Result<_> {
        let basis = BasisSpec::taylor(model.noise(), order)?;
        fit_coordinates(&paths, &basis, Arc::new(TradingRegressors::new(sol.clone(), &model, order)?))
    };
    let (first, second) = (fit(1)?, fit(2)?);
    let pens: Vec<(&str, &dyn DualPenalty)> = vec![("zero", &ZeroPenalty), ("t1", &first), ("t2", &second)];
    let ubs = estimate_upper_bounds(&model, &pens, l, 0, &SolverOptions::default(), CI_95)?;

    println!("D = {d}, T = {t}, M = {m}, L = {l}");
    println!("lower      {:>12.1} +/- {:.1}", lb.mean, lb.half_width);
    for ub in &ubs {
        let gap = duality_gap(lb.mean, ub.estimate.mean);
        println!("upper {:4} {:>12.1} +/- {:<8.1} gap {:.1} ({:.2}%)", ub.name, ub.estimate.mean, ub.estimate.half_width, gap.absolute, gap.ratio.map_or(f64::NAN, |r| 100.0 * r));
    }
    Ok(())
}
