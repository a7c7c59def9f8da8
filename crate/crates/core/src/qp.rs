//! Dense convex quadratic programs
//!
//! ```text
//! minimize   ½ uᵀPu + qᵀu + c0
//! subject to G u <= h,  A u = b
//! ```
//!
//! solved with a Mehrotra predictor-corrector primal-dual interior-point
//! method. Each Newton system is reduced to `[[P + GᵀWG, Aᵀ], [A, 0]]` and
//! solved through a Cholesky factor and the equality Schur complement, with
//! iterative refinement against the unregularized system.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub c0: f64,
}

impl QpProblem {
    /// Unconstrained problem in `n` variables.
    pub fn unconstrained(p: DMatrix<f64>, q: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            p,
            q,
            g: DMatrix::zeros(0, n),
            h: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            c0: 0.0,
        }
    }

    pub fn with_inequalities(mut self, g: DMatrix<f64>, h: DVector<f64>) -> Self {
        self.g = g;
        self.h = h;
        self
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_offset(mut self, c0: f64) -> Self {
        self.c0 = c0;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.q.len()
    }

    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.p * u)) + self.q.dot(u) + self.c0
    }

    fn validate(&self) -> Result<()> {
        let n = self.q.len();
        if self.p.shape() != (n, n) {
            return Err(Error::invalid(format!("P is {:?}, expected {n}x{n}", self.p.shape())));
        }
        if self.g.ncols() != n || self.g.nrows() != self.h.len() {
            return Err(Error::invalid(format!(
                "G is {:?} and h has {} rows; expected {} columns",
                self.g.shape(),
                self.h.len(),
                n
            )));
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return Err(Error::invalid(format!(
                "A_eq is {:?} and b_eq has {} rows; expected {} columns",
                self.a_eq.shape(),
                self.b_eq.len(),
                n
            )));
        }
        let finite = |m: &[f64]| m.iter().all(|v| v.is_finite());
        if !(finite(self.p.as_slice())
            && finite(self.q.as_slice())
            && finite(self.g.as_slice())
            && finite(self.h.as_slice())
            && finite(self.a_eq.as_slice())
            && finite(self.b_eq.as_slice())
            && self.c0.is_finite())
        {
            return Err(Error::invalid("QP data contains non-finite entries"));
        }
        Ok(())
    }

    /// Rejects asymmetric or indefinite `P`.
    pub fn check_convex(&self) -> Result<()> {
        let n = self.q.len();
        if n == 0 {
            return Ok(());
        }
        let scale = self.p.amax().max(1.0);
        let asym = (&self.p - self.p.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NonConvex(format!("P is not symmetric (max asymmetry {asym:.3e})")));
        }
        let eig = self.p.clone().symmetric_eigen();
        let norm = eig.eigenvalues.amax();
        let min = eig.eigenvalues.min();
        if min < -1e-6 * norm {
            return Err(Error::NonConvex(format!(
                "P has eigenvalue {min:.6e} below -1e-6 * ||P|| = {:.6e}",
                -1e-6 * norm
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Inequality multipliers.
    pub z: DVector<f64>,
    /// Equality multipliers.
    pub y: DVector<f64>,
    /// Objective at `x`, including the constant offset.
    pub objective: f64,
    pub status: QpStatus,
    pub residuals: KktResiduals,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200 }
    }
}

/// Infinity norms of primal infeasibility, stationarity (plus multiplier
/// sign violation) and complementarity at `(x, z, y)`.
pub fn kkt_residuals(p: &QpProblem, x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>) -> KktResiduals {
    let slack = &p.h - &p.g * x;
    let ineq = slack.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
    let eq = (&p.a_eq * x - &p.b_eq).amax();
    let stat = (&p.p * x + &p.q + p.g.tr_mul(z) + p.a_eq.tr_mul(y)).amax();
    let sign = z.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
    let comp = z.iter().zip(slack.iter()).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max);
    KktResiduals { primal: ineq.max(eq), dual: stat.max(sign), complementarity: comp }
}

/// Factorization of the reduced Newton matrix `[[H, Aᵀ], [A, 0]]`.
struct ReducedKkt<'a> {
    h_exact: DMatrix<f64>,
    a: &'a DMatrix<f64>,
    h_chol: Cholesky<f64, Dyn>,
    schur: Option<SchurFactor>,
}

enum SchurFactor {
    Chol(Cholesky<f64, Dyn>),
    Lu(nalgebra::LU<f64, Dyn, Dyn>),
}

impl<'a> ReducedKkt<'a> {
    fn new(h_exact: DMatrix<f64>, a: &'a DMatrix<f64>) -> Option<Self> {
        let n = h_exact.nrows();
        let scale = h_exact.diagonal().amax().max(1.0);
        let mut delta = 0.0;
        let h_chol = loop {
            let mut hr = h_exact.clone();
            for i in 0..n {
                hr[(i, i)] += delta;
            }
            if let Some(c) = hr.cholesky() {
                break c;
            }
            delta = if delta == 0.0 { 1e-14 * scale } else { delta * 100.0 };
            if delta > 1e-2 * scale {
                return None;
            }
        };
        let schur = if a.nrows() > 0 {
            let hinv_at = h_chol.solve(&a.transpose());
            let s = a * hinv_at;
            let s_scale = s.diagonal().amax().max(1e-300);
            let mut factor = None;
            let mut eps = 0.0;
            while eps <= 1e-6 * s_scale {
                let mut sr = s.clone();
                for i in 0..sr.nrows() {
                    sr[(i, i)] += eps;
                }
                if let Some(c) = sr.cholesky() {
                    factor = Some(SchurFactor::Chol(c));
                    break;
                }
                eps = if eps == 0.0 { 1e-14 * s_scale } else { eps * 100.0 };
            }
            Some(factor.unwrap_or_else(|| SchurFactor::Lu(s.lu())))
        } else {
            None
        };
        Some(Self { h_exact, a, h_chol, schur })
    }

    fn solve_once(&self, r1: &DVector<f64>, r2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let hinv_r1 = self.h_chol.solve(r1);
        match &self.schur {
            None => (hinv_r1, DVector::zeros(0)),
            Some(s) => {
                // A dx = r2 with dx = H⁻¹(r1 - Aᵀdy)  =>  (A H⁻¹ Aᵀ) dy = A H⁻¹ r1 - r2
                let rhs = self.a * &hinv_r1 - r2;
                let dy = match s {
                    SchurFactor::Chol(c) => c.solve(&rhs),
                    SchurFactor::Lu(lu) => lu.solve(&rhs).unwrap_or_else(|| DVector::zeros(rhs.len())),
                };
                let dx = self.h_chol.solve(&(r1 - self.a.tr_mul(&dy)));
                (dx, dy)
            }
        }
    }

    fn solve(&self, r1: &DVector<f64>, r2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (mut dx, mut dy) = self.solve_once(r1, r2);
        for _ in 0..3 {
            let e1 = r1 - &self.h_exact * &dx - self.a.tr_mul(&dy);
            let e2 = r2 - self.a * &dx;
            if e1.amax().max(e2.amax()) == 0.0 {
                break;
            }
            let (cx, cy) = self.solve_once(&e1, &e2);
            dx += cx;
            dy += cy;
        }
        (dx, dy)
    }
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&x, &d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

/// Solves a convex QP with default options.
pub fn solve(problem: &QpProblem) -> Result<QpSolution> {
    solve_qp(problem, &SolverOptions::default())
}

/// Solves a convex QP. Infeasibility and the iteration cap are reported in the
/// returned status; malformed or non-convex problems are errors.
pub fn solve_qp(problem: &QpProblem, options: &SolverOptions) -> Result<QpSolution> {
    solve_inner(problem, options, None)
}

/// Like [`solve_qp`] but starts from the primal point `start` (multipliers and
/// slacks are re-centred). Results then depend on the previous solve.
pub fn solve_qp_warm(problem: &QpProblem, options: &SolverOptions, start: &DVector<f64>) -> Result<QpSolution> {
    if start.len() != problem.num_vars() {
        return Err(Error::invalid("warm start has the wrong dimension"));
    }
    solve_inner(problem, options, Some(start))
}

fn solve_inner(pr: &QpProblem, options: &SolverOptions, start: Option<&DVector<f64>>) -> Result<QpSolution> {
    pr.validate()?;
    pr.check_convex()?;
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(Error::invalid("solver tolerance must be positive and max_iter at least 1"));
    }
    let n = pr.num_vars();
    let m = pr.h.len();
    let tol = options.tol;

    let finish = |x: DVector<f64>, z: DVector<f64>, y: DVector<f64>, status, iterations| {
        let residuals = kkt_residuals(pr, &x, &z, &y);
        QpSolution { objective: pr.objective(&x), x, z, y, status, residuals, iterations }
    };

    if n == 0 {
        let x = DVector::zeros(0);
        let infeasible = pr.h.iter().any(|&v| v < -tol) || pr.b_eq.amax() > tol;
        let status = if infeasible { QpStatus::Infeasible } else { QpStatus::Optimal };
        return Ok(finish(x, DVector::zeros(m), DVector::zeros(pr.b_eq.len()), status, 0));
    }

    // Starting point: minimise ½xᵀPx + qᵀx + ½‖Gx - h‖² subject to Ax = b.
    let h0 = &pr.p + pr.g.tr_mul(&pr.g);
    let kkt0 = ReducedKkt::new(h0, &pr.a_eq)
        .ok_or_else(|| Error::NonConvex("initial KKT system could not be factored".into()))?;
    let (mut x, mut y) = kkt0.solve(&(-&pr.q + pr.g.tr_mul(&pr.h)), &pr.b_eq);
    if let Some(s0) = start {
        x = s0.clone();
    }
    if m == 0 {
        // Pure equality-constrained QP: a single Newton solve is exact.
        let status = if kkt_residuals(pr, &x, &DVector::zeros(0), &y).max() <= tol {
            QpStatus::Optimal
        } else if (&pr.a_eq * &x - &pr.b_eq).amax() > tol {
            QpStatus::Infeasible
        } else {
            QpStatus::MaxIterations
        };
        return Ok(finish(x, DVector::zeros(0), y, status, 1));
    }
    let mut s = &pr.h - &pr.g * &x;
    let mut z = -s.clone();
    let shift = |v: &mut DVector<f64>| {
        let alpha = -v.min();
        if alpha >= -1e-8 {
            v.add_scalar_mut(1.0 + alpha.max(0.0));
        }
    };
    shift(&mut s);
    shift(&mut z);

    let data_scale = pr.h.amax().max(pr.b_eq.amax()).max(pr.q.amax()).max(1.0);
    let mut best: Option<(f64, DVector<f64>, DVector<f64>, DVector<f64>)> = None;

    for iter in 0..options.max_iter {
        let res = kkt_residuals(pr, &x, &z, &y);
        if res.max() <= tol {
            return Ok(finish(x, z, y, QpStatus::Optimal, iter));
        }
        if best.as_ref().is_none_or(|(r, ..)| res.max() < *r) {
            best = Some((res.max(), x.clone(), z.clone(), y.clone()));
        }
        // Farkas certificate: z >= 0, Gᵀz + Aᵀy = 0, hᵀz + bᵀy < 0.
        let gap_dir = pr.h.dot(&z) + pr.b_eq.dot(&y);
        if gap_dir < 0.0 {
            let cert = (pr.g.tr_mul(&z) + pr.a_eq.tr_mul(&y)).amax();
            if cert <= 1e-8 * -gap_dir && -gap_dir > 1e-6 * data_scale {
                return Ok(finish(x, z, y, QpStatus::Infeasible, iter));
            }
        }

        let r_d = &pr.p * &x + &pr.q + pr.g.tr_mul(&z) + pr.a_eq.tr_mul(&y);
        let r_p = &pr.a_eq * &x - &pr.b_eq;
        let r_g = &pr.g * &x + &s - &pr.h;
        let mu = s.dot(&z) / m as f64;

        let w = z.component_div(&s);
        let mut gw = pr.g.clone();
        for (i, mut row) in gw.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let h_mat = &pr.p + pr.g.tr_mul(&gw);
        let Some(kkt) = ReducedKkt::new(h_mat, &pr.a_eq) else {
            break;
        };

        let direction = |r_sz: &DVector<f64>| {
            // ds = -r_g - G dx;  dz = W G dx + S⁻¹(Z r_g - r_sz)
            let corr = (z.component_mul(&r_g) - r_sz).component_div(&s);
            let rhs1 = -&r_d - pr.g.tr_mul(&corr);
            let (dx, dy) = kkt.solve(&rhs1, &(-&r_p));
            let gdx = &pr.g * &dx;
            let dz = w.component_mul(&gdx) + corr;
            let ds = -&r_g - gdx;
            (dx, ds, dz, dy)
        };

        let sz = s.component_mul(&z);
        let (_, ds_a, dz_a, _) = direction(&sz);
        let alpha_a = max_step(&s, &ds_a).min(max_step(&z, &dz_a)).min(1.0);
        let mu_a = (&s + alpha_a * &ds_a).dot(&(&z + alpha_a * &dz_a)) / m as f64;
        let sigma = (mu_a / mu).powi(3).clamp(0.0, 1.0);
        let r_sz = sz + ds_a.component_mul(&dz_a) - DVector::from_element(m, sigma * mu);
        let (dx, ds, dz, dy) = direction(&r_sz);
        let alpha = (0.99 * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);
        x += alpha * dx;
        s += alpha * ds;
        z += alpha * dz;
        y += alpha * dy;
        if !(x.iter().chain(z.iter()).chain(y.iter()).all(|v| v.is_finite())) {
            break;
        }
    }
    let res = kkt_residuals(pr, &x, &z, &y);
    if res.max() <= tol {
        return Ok(finish(x, z, y, QpStatus::Optimal, options.max_iter));
    }
    let (_, bx, bz, by) = best.expect("at least one iteration ran");
    Ok(finish(bx, bz, by, QpStatus::MaxIterations, options.max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(p: f64, q: f64) -> QpProblem {
        QpProblem::unconstrained(DMatrix::from_element(1, 1, p), DVector::from_element(1, q))
    }

    #[test]
    fn active_lower_bound() {
        // min u² s.t. u >= 1
        let pr = scalar(2.0, 0.0).with_inequalities(DMatrix::from_element(1, 1, -1.0), DVector::from_element(1, -1.0));
        let sol = solve(&pr).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-8);
        assert!((sol.objective - 1.0).abs() < 1e-8);
    }

    #[test]
    fn unconstrained_stationarity() {
        let sol = solve(&scalar(1.0, -1.0)).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.objective + 0.5).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let pr = scalar(1.0, 0.0)
            .with_inequalities(DMatrix::from_column_slice(2, 1, &[1.0, -1.0]), DVector::from_vec(vec![0.0, -1.0]));
        assert_eq!(solve(&pr).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn equality_constrained() {
        // min ½(u1² + u2²) s.t. u1 + u2 = 2
        let pr = QpProblem::unconstrained(DMatrix::identity(2, 2), DVector::zeros(2))
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 2.0))
            .with_offset(3.0);
        let sol = solve(&pr).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-10 && (sol.x[1] - 1.0).abs() < 1e-10);
        assert!((sol.objective - 4.0).abs() < 1e-10);
    }

    #[test]
    fn zero_problem_residuals() {
        let pr = QpProblem::unconstrained(DMatrix::zeros(2, 2), DVector::zeros(2));
        let r = kkt_residuals(&pr, &DVector::zeros(2), &DVector::zeros(0), &DVector::zeros(0));
        assert_eq!(r.max(), 0.0);
    }

    #[test]
    fn analytic_and_perturbed_residuals() {
        let pr = scalar(2.0, 0.0).with_inequalities(DMatrix::from_element(1, 1, -1.0), DVector::from_element(1, -1.0));
        // u* = 1, multiplier z = 2 from 2u - z = 0.
        let exact = kkt_residuals(&pr, &DVector::from_element(1, 1.0), &DVector::from_element(1, 2.0), &DVector::zeros(0));
        assert!(exact.max() <= 1e-12);
        let off = kkt_residuals(&pr, &DVector::from_element(1, 1.1), &DVector::from_element(1, 2.0), &DVector::zeros(0));
        assert!(off.primal.max(off.dual) >= 0.05);
    }

    #[test]
    fn indefinite_is_rejected() {
        let pr = QpProblem::unconstrained(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0])), DVector::zeros(2));
        assert!(matches!(solve(&pr), Err(Error::NonConvex(_))));
        let asym = QpProblem::unconstrained(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]), DVector::zeros(2));
        assert!(matches!(solve(&asym), Err(Error::NonConvex(_))));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let pr = scalar(1.0, 0.0).with_inequalities(DMatrix::zeros(1, 2), DVector::zeros(1));
        assert!(matches!(solve(&pr), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn iteration_cap_reports_status() {
        let pr = QpProblem::unconstrained(DMatrix::identity(3, 3), DVector::from_vec(vec![1.0, -2.0, 3.0]))
            .with_inequalities(DMatrix::identity(3, 3), DVector::zeros(3));
        let sol = solve_qp(&pr, &SolverOptions { tol: 1e-12, max_iter: 1 }).unwrap();
        assert_eq!(sol.status, QpStatus::MaxIterations);
    }

    #[test]
    fn deterministic_output() {
        let pr = QpProblem::unconstrained(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]), DVector::from_vec(vec![-1.0, 1.0]))
            .with_inequalities(DMatrix::identity(2, 2), DVector::from_vec(vec![0.1, -0.2]));
        let a = solve(&pr).unwrap();
        let b = solve(&pr).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn warm_start_reaches_same_optimum() {
        let pr = scalar(2.0, -4.0).with_inequalities(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 1.5));
        let cold = solve(&pr).unwrap();
        let warm = solve_qp_warm(&pr, &SolverOptions::default(), &DVector::from_element(1, 1.4)).unwrap();
        assert!((cold.x[0] - 1.5).abs() < 1e-8);
        assert!((warm.x[0] - cold.x[0]).abs() < 1e-8);
    }

    fn box_problem() -> impl Strategy<Value = QpProblem> {
        (proptest::collection::vec(-2.0f64..2.0, 4), proptest::collection::vec(-2.0f64..2.0, 2), 0.0f64..1.0)
            .prop_map(|(l, q, eps)| {
                let l = DMatrix::from_row_slice(2, 2, &l);
                let p = &l * l.transpose() + eps * DMatrix::identity(2, 2);
                let g = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
                QpProblem::unconstrained(p, DVector::from_vec(q)).with_inequalities(g, DVector::from_element(4, 1.0))
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn tightening_never_decreases_minimum(pr in box_problem(), eps in 0.01f64..0.5) {
            let base = solve(&pr).unwrap();
            prop_assert_eq!(base.status, QpStatus::Optimal);
            let mut tight = pr.clone();
            for i in 0..4 {
                if (pr.h[i] - (&pr.g * &base.x)[i]).abs() < 1e-6 {
                    tight.h[i] -= eps;
                }
            }
            let t = solve(&tight).unwrap();
            prop_assert_eq!(t.status, QpStatus::Optimal);
            prop_assert!(t.objective >= base.objective - 1e-9);
        }
    }
}
