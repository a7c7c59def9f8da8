//! Fixtures shared by the integration and acceptance targets.
#![allow(dead_code)]

use infodual::mdp::{FiniteActionModel, MdpModel, NoiseModel};
use infodual::qp::QpProblem;
use nalgebra::{DMatrix, DVector, DVectorView};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random PSD problem with a known feasible point, box-bounded so it has a minimiser.
pub fn random_problem(rng: &mut ChaCha8Rng) -> QpProblem {
    let n = rng.random_range(2..=10);
    let rank = rng.random_range(0..=n);
    let l = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
    let p = &l * l.transpose();
    let q = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let extra = rng.random_range(0..=n);
    let mut g = DMatrix::zeros(2 * n + extra, n);
    let mut h = DVector::zeros(2 * n + extra);
    for i in 0..n {
        g[(2 * i, i)] = 1.0;
        g[(2 * i + 1, i)] = -1.0;
        h[2 * i] = 3.0;
        h[2 * i + 1] = 3.0;
    }
    for r in 2 * n..2 * n + extra {
        for c in 0..n {
            g[(r, c)] = rng.random_range(-1.0..1.0);
        }
        let slack = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) };
        h[r] = (g.row(r) * &x0)[0] + slack;
    }
    let neq = rng.random_range(0..n.min(3));
    let a = DMatrix::from_fn(neq, n, |_, _| rng.random_range(-1.0..1.0));
    let b = &a * &x0;
    QpProblem::unconstrained(p, q).with_inequalities(g, h).with_equalities(a, b)
}

/// Two periods, noise uniform on {-1, 1}, actions {-1, 0, 1}:
/// `x' = x + a + z`, reward `-|x - 1|/2 - 0.3a^2 + 0.1a`, terminal `-(x - 1)^2`.
pub struct ToyMdp {
    noise: NoiseModel,
}

impl ToyMdp {
    pub fn new() -> Self {
        Self { noise: NoiseModel::uniform_atoms(&[-1.0, 1.0]).unwrap() }
    }
}

impl MdpModel for ToyMdp {
    fn horizon(&self) -> usize {
        2
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn action_dim(&self) -> usize {
        1
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn initial_state(&self) -> DVector<f64> {
        DVector::from_element(1, 0.0)
    }
    fn transition(&self, _n: usize, x: DVectorView<f64>, a: DVectorView<f64>, z: DVectorView<f64>) -> DVector<f64> {
        x + a + z
    }
    fn reward(&self, _n: usize, x: DVectorView<f64>, a: DVectorView<f64>) -> f64 {
        -0.5 * (x[0] - 1.0).abs() - 0.3 * a[0] * a[0] + 0.1 * a[0]
    }
    fn terminal_reward(&self, x: DVectorView<f64>) -> f64 {
        -(x[0] - 1.0).powi(2)
    }
    fn check_action(&self, _n: usize, _x: DVectorView<f64>, a: DVectorView<f64>) -> Result<(), String> {
        if [-1.0, 0.0, 1.0].contains(&a[0]) {
            Ok(())
        } else {
            Err(format!("action {} is not in {{-1, 0, 1}}", a[0]))
        }
    }
}

impl FiniteActionModel for ToyMdp {
    fn actions(&self, _n: usize, _x: DVectorView<f64>) -> Vec<DVector<f64>> {
        [-1.0, 0.0, 1.0].iter().map(|&a| DVector::from_element(1, a)).collect()
    }
}

/// Minimiser of a strictly convex 2-variable QP over `[lo, hi]^2` by nested
/// grid refinement, accurate to about `1e-6`.
pub fn grid_minimiser(p: &DMatrix<f64>, q: &DVector<f64>, lo: f64, hi: f64) -> (f64, f64) {
    let f = |x: f64, y: f64| 0.5 * (p[(0, 0)] * x * x + 2.0 * p[(0, 1)] * x * y + p[(1, 1)] * y * y) + q[0] * x + q[1] * y;
    let (mut cx, mut cy, mut half) = (0.5 * (lo + hi), 0.5 * (lo + hi), 0.5 * (hi - lo));
    for _ in 0..8 {
        let steps = 100;
        let mut best = (f64::INFINITY, cx, cy);
        for i in 0..=steps {
            for j in 0..=steps {
                let x = (cx - half + 2.0 * half * i as f64 / steps as f64).clamp(lo, hi);
                let y = (cy - half + 2.0 * half * j as f64 / steps as f64).clamp(lo, hi);
                let v = f(x, y);
                if v < best.0 {
                    best = (v, x, y);
                }
            }
        }
        cx = best.1;
        cy = best.2;
        half *= 0.1;
    }
    (cx, cy)
}

impl ToyMdp {
    /// Same dynamics and rewards with a different noise law.
    pub fn with_noise(noise: NoiseModel) -> Self {
        Self { noise }
    }
}
