//! Fits second-order monomial penalty coordinates for a scalar LQC problem on
//! simulated paths and compares the resulting upper bound with the exact one.
//!
//! Under the optimal linear rule the action is a multiple of the state, so
//! `[1, x, a]` is collinear and the split between the `x` and `a` coefficients
//! is arbitrary. The training policy adds a deterministic nonlinear dither to
//! make the action vary independently of the state.
use std::sync::Arc;

use infodual::basis::BasisSpec;
use infodual::dual::{estimate_upper_bounds, DualPenalty};
use infodual::lqc::{solve_riccati, LqcExactPenalty, LqcMdp, LqcPolicy, LqcProblem};
use infodual::mdp::{simulate_paths, FnPolicy, MdpModel, Policy, CI_95};
use infodual::qp::SolverOptions;
use infodual::regression::{fit_coordinates, AffineRegressors};
use nalgebra::DVectorView;

fn main() -> infodual::Result<()> {
    let problem = LqcProblem::scalar(0.9, 0.5, 1.0, 0.3, 1.0, 6, 2.0)?;
    let sol = solve_riccati(&problem)?;
    let mdp = LqcMdp::new(problem.clone())?;
    let optimal = LqcPolicy::new(&sol);
    let dithered = FnPolicy::new(|n, x: DVectorView<f64>| optimal.act(n, x).map(|a| a + 0.3 * (3.0 * x[0]).sin()));
    let paths = simulate_paths(&mdp, &dithered, 20_000, 3)?;

    let basis = BasisSpec::taylor(mdp.noise(), 2)?;
    let fitted = fit_coordinates(&paths, &basis, Arc::new(AffineRegressors { state_dim: 1, action_dim: 1 }))?;
    for n in 0..mdp.horizon() {
        let c: Vec<String> = (0..basis.len()).map(|i| format!("{}: {:.4?}", basis.label(i), fitted.coefficients(n, i).as_slice())).collect();
        println!("period {n}  {}", c.join("  "));
    }

    println!("optimal value {:.5}", -sol.value(0, problem.x0.as_view()));
    let exact = LqcExactPenalty::taylor(problem, sol, 2);
    let pens: Vec<(&str, &dyn DualPenalty)> = vec![("fitted", &fitted), ("exact", &exact)];
    for ub in estimate_upper_bounds(&mdp, &pens, 500, 3, &SolverOptions::default(), CI_95)? {
        println!("{:7} upper bound {:.5} +/- {:.5}", ub.name, ub.estimate.mean, ub.estimate.half_width);
    }
    Ok(())
}
