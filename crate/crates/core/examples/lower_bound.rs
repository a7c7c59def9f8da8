//! Lower bounds for the liquidation problem from three policies.
use std::sync::Arc;

use infodual::lqc::trading_value_recursion;
use infodual::mdp::{estimate_lower_bound, simulate_paths};
use infodual::trading::{PlqcPolicy, TradingModel, TradingParams, TwapPolicy, UnconstrainedPolicy};

fn main() -> infodual::Result<()> {
    let paths: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let model = TradingModel::new(TradingParams::default())?;
    let sol = Arc::new(trading_value_recursion(&model)?);
    let d = model.num_assets();

    let lb = estimate_lower_bound(&simulate_paths(&model, &TwapPolicy::new(&model), paths, 0)?)?;
    println!("twap          {:>10.1} +/- {:.1}", lb.mean, lb.half_width);
    let lb = estimate_lower_bound(&simulate_paths(&model, &PlqcPolicy::new(sol.clone(), d), paths, 0)?)?;
    println!("plqc          {:>10.1} +/- {:.1}", lb.mean, lb.half_width);

    // The unconstrained rule violates sell-only constraints, so it is
    // evaluated on the relaxed model where its expectation is known.
    let relaxed = TradingModel::new(TradingParams { unconstrained: true, ..TradingParams::default() })?;
    let lb = estimate_lower_bound(&simulate_paths(&relaxed, &UnconstrainedPolicy::new(sol.clone(), d), paths, 0)?)?;
    let f1 = relaxed.f1.clone();
    println!("unconstrained {:>10.1} +/- {:.1}  (closed form {:.1})", lb.mean, lb.half_width, sol.value(1, relaxed.x0.as_view(), f1.as_view()));
    Ok(())
}
