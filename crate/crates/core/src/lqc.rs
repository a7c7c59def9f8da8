//! Closed-form linear-quadratic control.
//!
//! The generic problem minimises `E[sum_n x_nᵀQ_n x_n + a_nᵀR_n a_n + x_NᵀQ_N x_N]`
//! subject to `x_{n+1} = A_n x_n + B_n a_n + z_{n+1}`. Its value is
//! `V_n(x) = xᵀK_n x + sum_{i >= n} E[zᵀK_{i+1}z]` and the optimal dual penalty
//! is known in closed form, which makes it an exact oracle for the bound
//! machinery. The risk-neutral trading recursion lives here too.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::dual::{DualPenalty, LinearConstraints, LinearQuadraticModel, QuadraticForm};
use crate::mdp::{MdpModel, NoiseModel, Policy, Trajectory};
use crate::trading::TradingModel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LqcProblem {
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    pub q: Vec<DMatrix<f64>>,
    pub r: Vec<DMatrix<f64>>,
    pub q_terminal: DMatrix<f64>,
    pub noise_cov: DMatrix<f64>,
    pub x0: DVector<f64>,
}

fn check_psd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::invalid(format!("{what} is not symmetric")));
    }
    if m.nrows() > 0 && m.clone().symmetric_eigen().eigenvalues.min() < -1e-10 * scale {
        return Err(Error::invalid(format!("{what} is not positive semi-definite")));
    }
    Ok(())
}

impl LqcProblem {
    /// Same matrices in every period.
    #[allow(clippy::too_many_arguments)]
    pub fn time_invariant(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        q_terminal: DMatrix<f64>,
        noise_cov: DMatrix<f64>,
        horizon: usize,
        x0: DVector<f64>,
    ) -> Result<Self> {
        let p = Self {
            a: vec![a; horizon],
            b: vec![b; horizon],
            q: vec![q; horizon],
            r: vec![r; horizon],
            q_terminal,
            noise_cov,
            x0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Scalar problem with the same `a, b, q, r` everywhere and `Q_N = q`.
    pub fn scalar(a: f64, b: f64, q: f64, r: f64, noise_var: f64, horizon: usize, x0: f64) -> Result<Self> {
        let s = |v| DMatrix::from_element(1, 1, v);
        Self::time_invariant(s(a), s(b), s(q), s(r), s(q), s(noise_var), horizon, DVector::from_element(1, x0))
    }

    pub fn horizon(&self) -> usize {
        self.a.len()
    }

    pub fn state_dim(&self) -> usize {
        self.x0.len()
    }

    pub fn action_dim(&self) -> usize {
        self.b.first().map_or(0, |b| b.ncols())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.horizon();
        if n == 0 {
            return Err(Error::invalid("LQC horizon must be at least 1"));
        }
        if self.b.len() != n || self.q.len() != n || self.r.len() != n {
            return Err(Error::invalid("LQC matrix sequences must all have the horizon's length"));
        }
        let sd = self.state_dim();
        let ad = self.action_dim();
        for k in 0..n {
            if self.a[k].shape() != (sd, sd)
                || self.b[k].shape() != (sd, ad)
                || self.q[k].shape() != (sd, sd)
                || self.r[k].shape() != (ad, ad)
            {
                return Err(Error::invalid(format!("LQC matrices at period {k} have inconsistent dimensions")));
            }
            check_psd(&self.q[k], &format!("Q_{k}"))?;
            check_psd(&self.r[k], &format!("R_{k}"))?;
        }
        if self.q_terminal.shape() != (sd, sd) || self.noise_cov.shape() != (sd, sd) {
            return Err(Error::invalid("terminal cost and noise covariance must be state-sized"));
        }
        check_psd(&self.q_terminal, "Q_N")?;
        check_psd(&self.noise_cov, "noise covariance")?;
        Ok(())
    }
}

/// Riccati matrices `K_0..K_N`, gains `L_0..L_{N-1}` and noise constants.
#[derive(Debug, Clone, PartialEq)]
pub struct LqcSolution {
    pub k: Vec<DMatrix<f64>>,
    pub gains: Vec<DMatrix<f64>>,
    /// `noise_tail[n] = sum_{i=n}^{N-1} tr(Cov K_{i+1})`.
    pub noise_tail: Vec<f64>,
}

impl LqcSolution {
    pub fn horizon(&self) -> usize {
        self.gains.len()
    }

    /// Optimal expected cost-to-go `V_n(x)`.
    pub fn value(&self, n: usize, x: DVectorView<f64>) -> f64 {
        x.dot(&(&self.k[n] * x)) + self.noise_tail[n]
    }

    /// Optimal action `L_n x`.
    pub fn action(&self, n: usize, x: DVectorView<f64>) -> DVector<f64> {
        &self.gains[n] * x
    }
}

/// Backward Riccati recursion.
pub fn solve_riccati(problem: &LqcProblem) -> Result<LqcSolution> {
    problem.validate()?;
    let horizon = problem.horizon();
    let mut k = vec![DMatrix::zeros(0, 0); horizon + 1];
    let mut gains = vec![DMatrix::zeros(0, 0); horizon];
    k[horizon] = problem.q_terminal.clone();
    for n in (0..horizon).rev() {
        let (a, b) = (&problem.a[n], &problem.b[n]);
        let kn1 = &k[n + 1];
        let btk = b.transpose() * kn1;
        let s = &btk * b + &problem.r[n];
        let chol = s.clone().cholesky().ok_or_else(|| Error::Singular {
            period: n,
            what: "BᵀK B + R is not positive definite".into(),
        })?;
        let gain = -chol.solve(&(&btk * a));
        let kn = &problem.q[n] + a.transpose() * kn1 * a + a.transpose() * btk.transpose() * &gain;
        k[n] = (&kn + kn.transpose()) * 0.5;
        gains[n] = gain;
    }
    let mut noise_tail = vec![0.0; horizon + 1];
    for n in (0..horizon).rev() {
        noise_tail[n] = noise_tail[n + 1] + (&problem.noise_cov * &k[n + 1]).trace();
    }
    Ok(LqcSolution { k, gains, noise_tail })
}

/// Optimal dual penalty in cost form,
/// `sum_n 2(A x_n + B a_n)ᵀK_{n+1}z + zᵀK_{n+1}z - tr(Cov K_{n+1})`.
pub fn lqc_exact_penalty(problem: &LqcProblem, sol: &LqcSolution, path: &Trajectory) -> f64 {
    (0..problem.horizon())
        .map(|n| {
            let kn1 = &sol.k[n + 1];
            let z = path.noise(n);
            let mean = &problem.a[n] * path.state(n) + &problem.b[n] * path.action(n);
            2.0 * mean.dot(&(kn1 * z)) + z.dot(&(kn1 * z)) - (&problem.noise_cov * kn1).trace()
        })
        .sum()
}

/// Penalty built from the Taylor expansion of `V_{n+1}` around the
/// conditional mean `x̂ = A x + B a`: gradient `2Kx̂` against `z`, and for
/// `order >= 2` half the Hessian `2K` against `zzᵀ - Cov`. Cost form.
pub fn lqc_taylor_penalty(problem: &LqcProblem, sol: &LqcSolution, order: u32, path: &Trajectory) -> f64 {
    (0..problem.horizon())
        .map(|n| {
            let kn1 = &sol.k[n + 1];
            let z = path.noise(n);
            let mean = &problem.a[n] * path.state(n) + &problem.b[n] * path.action(n);
            let gradient = 2.0 * kn1 * mean;
            let mut term = gradient.dot(&z);
            if order >= 2 {
                let hessian = 2.0 * kn1;
                term += 0.5 * (z.dot(&(&hessian * z)) - (&problem.noise_cov * &hessian).trace());
            }
            term
        })
        .sum()
}

/// Reward-maximisation view of an LQC problem (rewards are negative costs).
#[derive(Debug, Clone)]
pub struct LqcMdp {
    pub problem: LqcProblem,
    noise: NoiseModel,
}

impl LqcMdp {
    pub fn new(problem: LqcProblem) -> Result<Self> {
        problem.validate()?;
        let noise = NoiseModel::gaussian(problem.noise_cov.clone())?;
        Ok(Self { problem, noise })
    }
}

impl MdpModel for LqcMdp {
    fn horizon(&self) -> usize {
        self.problem.horizon()
    }
    fn state_dim(&self) -> usize {
        self.problem.state_dim()
    }
    fn action_dim(&self) -> usize {
        self.problem.action_dim()
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn initial_state(&self) -> DVector<f64> {
        self.problem.x0.clone()
    }
    fn transition(&self, n: usize, x: DVectorView<f64>, a: DVectorView<f64>, z: DVectorView<f64>) -> DVector<f64> {
        &self.problem.a[n] * x + &self.problem.b[n] * a + z
    }
    fn reward(&self, n: usize, x: DVectorView<f64>, a: DVectorView<f64>) -> f64 {
        -(x.dot(&(&self.problem.q[n] * x)) + a.dot(&(&self.problem.r[n] * a)))
    }
    fn terminal_reward(&self, x: DVectorView<f64>) -> f64 {
        -x.dot(&(&self.problem.q_terminal * x))
    }
}

impl LinearQuadraticModel for LqcMdp {
    fn linear_dynamics(&self, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.problem.a[n].clone(), self.problem.b[n].clone())
    }
    fn dynamics_offset(&self, _n: usize, z: DVectorView<f64>) -> DVector<f64> {
        z.into_owned()
    }
    fn reward_form(&self, n: usize) -> QuadraticForm {
        let sd = self.state_dim();
        let ad = self.action_dim();
        let mut h = DMatrix::zeros(sd + ad, sd + ad);
        h.view_mut((0, 0), (sd, sd)).copy_from(&(-2.0 * &self.problem.q[n]));
        h.view_mut((sd, sd), (ad, ad)).copy_from(&(-2.0 * &self.problem.r[n]));
        QuadraticForm { hessian: h, linear: DVector::zeros(sd + ad), constant: 0.0 }
    }
    fn terminal_form(&self) -> QuadraticForm {
        let sd = self.state_dim();
        QuadraticForm { hessian: -2.0 * &self.problem.q_terminal, linear: DVector::zeros(sd), constant: 0.0 }
    }
    fn action_constraints(&self, _n: usize) -> LinearConstraints {
        LinearConstraints::none(self.state_dim() + self.action_dim())
    }
}

/// Closed-form optimal feedback `a_n = L_n x_n`.
#[derive(Debug, Clone)]
pub struct LqcPolicy {
    gains: Vec<DMatrix<f64>>,
}

impl LqcPolicy {
    pub fn new(sol: &LqcSolution) -> Self {
        Self { gains: sol.gains.clone() }
    }
}

impl Policy for LqcPolicy {
    fn act(&self, n: usize, x: DVectorView<f64>) -> DVector<f64> {
        &self.gains[n] * x
    }
}

/// The exact penalty in reward form (negated cost-form penalty).
#[derive(Debug, Clone)]
pub struct LqcExactPenalty {
    problem: LqcProblem,
    solution: LqcSolution,
    order: Option<u32>,
}

impl LqcExactPenalty {
    pub fn new(problem: LqcProblem, solution: LqcSolution) -> Self {
        Self { problem, solution, order: None }
    }

    /// Taylor-coordinate version truncated at `order` (1 or 2).
    pub fn taylor(problem: LqcProblem, solution: LqcSolution, order: u32) -> Self {
        Self { problem, solution, order: Some(order) }
    }
}

impl DualPenalty for LqcExactPenalty {
    fn evaluate(&self, path: &Trajectory) -> f64 {
        match self.order {
            None => -lqc_exact_penalty(&self.problem, &self.solution, path),
            Some(o) => -lqc_taylor_penalty(&self.problem, &self.solution, o, path),
        }
    }
    fn affine_in_action(&self) -> bool {
        true
    }
}

/// Coefficients of the risk-neutral trading value
/// `J_t(x, f) = -½xᵀA_xx,t x + xᵀA_xf,t f + ½fᵀA_ff,t f + A_t`, `t = 1..=T`.
#[derive(Debug, Clone)]
pub struct TradingSolution {
    horizon: usize,
    a_xx: Vec<DMatrix<f64>>,
    a_xf: Vec<DMatrix<f64>>,
    a_ff: Vec<DMatrix<f64>>,
    a_const: Vec<f64>,
    /// Cholesky factors of `Λ + A_xx,t+1` for `t = 1..T-1`.
    inv_terms: Vec<Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>>,
    lambda: DMatrix<f64>,
    drift: DMatrix<f64>,
    loadings: DMatrix<f64>,
}

impl TradingSolution {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    fn idx(&self, t: usize) -> usize {
        assert!((1..=self.horizon).contains(&t), "period {t} outside 1..={}", self.horizon);
        t - 1
    }

    pub fn a_xx(&self, t: usize) -> &DMatrix<f64> {
        &self.a_xx[self.idx(t)]
    }

    pub fn a_xf(&self, t: usize) -> &DMatrix<f64> {
        &self.a_xf[self.idx(t)]
    }

    pub fn a_ff(&self, t: usize) -> &DMatrix<f64> {
        &self.a_ff[self.idx(t)]
    }

    pub fn a_const(&self, t: usize) -> f64 {
        self.a_const[self.idx(t)]
    }

    /// `J_t(x_{t-1}, f_t)`.
    pub fn value(&self, t: usize, x: DVectorView<f64>, f: DVectorView<f64>) -> f64 {
        -0.5 * x.dot(&(self.a_xx(t) * x)) + x.dot(&(self.a_xf(t) * f)) + 0.5 * f.dot(&(self.a_ff(t) * f)) + self.a_const(t)
    }

    /// Unconstrained optimal trade at `t`; at `t = T` the position is liquidated.
    pub fn unconstrained_policy(&self, t: usize, x: DVectorView<f64>, f: DVectorView<f64>) -> DVector<f64> {
        let i = self.idx(t);
        if t == self.horizon {
            return -x.into_owned();
        }
        let chol = self.inv_terms[i].as_ref().expect("factor exists for t < T");
        let g = &self.loadings + &self.a_xf[i + 1] * &self.drift;
        chol.solve(&(&self.lambda * x + g * f)) - x
    }
}

/// Backward recursion for the unconstrained, risk-neutral trading problem
/// (only the terminal liquidation is imposed).
pub fn trading_value_recursion(model: &TradingModel) -> Result<TradingSolution> {
    let horizon = model.horizon;
    let d = model.num_assets();
    let k = model.num_factors();
    let lambda = model.lambda_matrix.clone();
    let drift = DMatrix::identity(k, k) - &model.phi;
    let b = &model.loadings;
    let mut a_xx = vec![DMatrix::zeros(d, d); horizon];
    let mut a_xf = vec![DMatrix::zeros(d, k); horizon];
    let mut a_ff = vec![DMatrix::zeros(k, k); horizon];
    let mut a_const = vec![0.0; horizon];
    let mut inv_terms = vec![None; horizon];
    a_xx[horizon - 1] = lambda.clone();
    for t in (1..horizon).rev() {
        let (i, next) = (t - 1, t);
        let s = &lambda + &a_xx[next];
        let chol = s.cholesky().ok_or_else(|| Error::Singular { period: t, what: "Λ + A_xx,t+1 is singular".into() })?;
        let g = b + &a_xf[next] * &drift;
        let s_inv_lambda = chol.solve(&lambda);
        let s_inv_g = chol.solve(&g);
        let xx = &lambda - &lambda * &s_inv_lambda;
        a_xx[i] = (&xx + xx.transpose()) * 0.5;
        a_xf[i] = &lambda * &s_inv_g;
        let ff = g.transpose() * &s_inv_g + drift.transpose() * &a_ff[next] * &drift;
        a_ff[i] = (&ff + ff.transpose()) * 0.5;
        a_const[i] = 0.5 * (&model.psi * &a_ff[next]).trace() + a_const[next];
        inv_terms[i] = Some(chol);
    }
    Ok(TradingSolution { horizon, a_xx, a_xf, a_ff, a_const, inv_terms, lambda, drift, loadings: b.clone() })
}
