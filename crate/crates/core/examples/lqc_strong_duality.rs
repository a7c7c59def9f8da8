//! Scalar linear-quadratic control: the value-function penalty makes every
//! pathwise inner value equal to the optimal value, while the zero penalty
//! gives a loose upper bound.
use infodual::dual::{estimate_upper_bounds, DualPenalty, ZeroPenalty};
use infodual::lqc::{solve_riccati, LqcExactPenalty, LqcMdp, LqcPolicy, LqcProblem};
use infodual::mdp::{estimate_lower_bound, simulate_paths, CI_95};
use infodual::qp::SolverOptions;
use nalgebra::dvector;

fn main() -> infodual::Result<()> {
    let problem = LqcProblem::scalar(1.0, 1.0, 1.0, 1.0, 0.25, 5, 1.0)?;
    let sol = solve_riccati(&problem)?;
    let v0 = -sol.value(0, dvector![1.0].as_view());
    let mdp = LqcMdp::new(problem.clone())?;

    let lb = estimate_lower_bound(&simulate_paths(&mdp, &LqcPolicy::new(&sol), 20_000, 0)?)?;
    let exact = LqcExactPenalty::new(problem, sol);
    let pens: Vec<(&str, &dyn DualPenalty)> = vec![("zero", &ZeroPenalty), ("exact", &exact)];
    let ubs = estimate_upper_bounds(&mdp, &pens, 200, 0, &SolverOptions::default(), CI_95)?;

    println!("optimal value      {v0:.6}");
    println!("lower bound        {:.6} +/- {:.6}", lb.mean, lb.half_width);
    for ub in &ubs {
        let spread = ub.values.iter().map(|v| (v - v0).abs()).fold(0.0, f64::max);
        println!("upper bound {:6}  {:.6} +/- {:.6}  max |value - V0| {spread:.2e}", ub.name, ub.estimate.mean, ub.estimate.half_width);
    }
    Ok(())
}
