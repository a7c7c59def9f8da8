//! Solves a small box- and equality-constrained QP and prints the KKT residuals.
use infodual::qp::{solve_qp, QpProblem, SolverOptions};
use nalgebra::{dmatrix, dvector};

fn main() -> infodual::Result<()> {
    // min 1/2 x'Px + q'x  s.t.  0 <= x <= 1,  x0 + x1 + x2 = 1.5
    let p = dmatrix![2.0, 0.5, 0.0; 0.5, 1.0, 0.0; 0.0, 0.0, 0.0];
    let q = dvector![-3.0, 1.0, -0.2];
    let mut g = nalgebra::DMatrix::zeros(6, 3);
    let mut h = nalgebra::DVector::zeros(6);
    for i in 0..3 {
        g[(2 * i, i)] = 1.0;
        h[2 * i] = 1.0;
        g[(2 * i + 1, i)] = -1.0;
    }
    let problem = QpProblem::unconstrained(p, q)
        .with_inequalities(g, h)
        .with_equalities(dmatrix![1.0, 1.0, 1.0], dvector![1.5]);
    let sol = solve_qp(&problem, &SolverOptions::default())?;
    println!("status      {:?} after {} iterations", sol.status, sol.iterations);
    println!("x           {:.6?}", sol.x.as_slice());
    println!("objective   {:.8}", sol.objective);
    println!("residuals   {:?}", sol.residuals);
    Ok(())
}
