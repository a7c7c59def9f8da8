mod common;

use common::random_problem;
use infodual::qp::{solve, QpStatus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_problems_reach_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0f64;
    let mut iters = 0;
    for k in 0..1000 {
        let pr = random_problem(&mut rng);
        let sol = solve(&pr).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal, "problem {k}: {:?}", sol.residuals);
        worst = worst.max(sol.residuals.max());
        iters = iters.max(sol.iterations);
    }
    eprintln!("worst residual {worst:.3e}, max iterations {iters}");
    assert!(worst <= 1e-8);
}
