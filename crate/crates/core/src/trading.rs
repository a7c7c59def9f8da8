//! Multi-asset liquidation with predictable returns and quadratic trading costs.
//!
//! Decisions are taken at `t = 1..=T`; the MDP period is `n = t - 1` and its
//! state is `[x_{t-1}; f_t]`. The factor shock `z_{t+1}` is the only simulated
//! noise: the objective uses expected excess returns, so the return shock and
//! the risk-free drift never enter rewards or penalties.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::dual::{DualPenalty, LinearConstraints, LinearQuadraticModel, QuadraticForm};
use crate::lqc::TradingSolution;
use crate::mdp::{MdpModel, NoiseModel, Policy, Trajectory};
use crate::regression::RegressorSpec;
use crate::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 2.14e-5;
/// Factor loadings shared by every security.
pub const FACTOR_LOADINGS: [f64; 2] = [0.3375, -0.0720];
pub const FACTOR_NOISE_VAR: [f64; 2] = [0.0379, 0.0947];
pub const RETURN_NOISE_VAR: f64 = 0.048;
pub const RISK_FREE_RETURN: f64 = 0.0726;
pub const INITIAL_POSITION: f64 = 10_000.0;

/// Mean-reversion alternatives of the sensitivity sweep, as diagonals.
pub const SWEEP_PHI: [(&str, [f64; 2]); 4] =
    [("phi1", [0.3, 0.5]), ("phi2", [0.3, 0.7]), ("phi3", [0.5, 0.3]), ("phi4", [0.7, 0.5])];
pub const SWEEP_LAMBDA: [(&str, f64); 4] =
    [("lambda1", 1.07e-5), ("lambda2", 2.67e-5), ("lambda3", 3.21e-5), ("lambda4", 4.28e-5)];
pub const BASE_PHI: [f64; 2] = [0.5, 0.7];

/// Diagonal mean-reversion matrix for a label (`base`, `phi1`..`phi4`).
pub fn phi_by_label(label: &str) -> Option<DMatrix<f64>> {
    let diag = if label == "base" {
        BASE_PHI
    } else {
        SWEEP_PHI.iter().find(|(l, _)| *l == label)?.1
    };
    Some(DMatrix::from_diagonal(&DVector::from_row_slice(&diag)))
}

/// Upper-triangular `Γ` whose row `d` holds `1/sqrt(D - d)` (0-based) from
/// the diagonal rightward, so `diag(ΓΓᵀ) = 1`.
pub fn cost_factor(num_assets: usize) -> DMatrix<f64> {
    DMatrix::from_fn(num_assets, num_assets, |r, c| if c >= r { 1.0 / ((num_assets - r) as f64).sqrt() } else { 0.0 })
}

/// Inputs to [`TradingModel::new`]; `None` overrides fall back to the
/// calibrated values.
#[derive(Debug, Clone, PartialEq)]
pub struct TradingParams {
    pub num_assets: usize,
    pub horizon: usize,
    pub lambda: f64,
    pub phi: DMatrix<f64>,
    pub risk_aversion: f64,
    pub loadings: Option<DMatrix<f64>>,
    pub psi: Option<DMatrix<f64>>,
    pub sigma: Option<DMatrix<f64>>,
    pub x0: Option<DVector<f64>>,
    pub f0: Option<DVector<f64>>,
    /// Drop sell-only and no-short constraints (terminal liquidation stays).
    pub unconstrained: bool,
}

impl Default for TradingParams {
    fn default() -> Self {
        Self {
            num_assets: 5,
            horizon: 12,
            lambda: DEFAULT_LAMBDA,
            phi: phi_by_label("base").unwrap(),
            risk_aversion: 0.0,
            loadings: None,
            psi: None,
            sigma: None,
            x0: None,
            f0: None,
            unconstrained: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TradingModel {
    pub horizon: usize,
    /// `B`, one row per security.
    pub loadings: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub cost_factor: DMatrix<f64>,
    pub lambda: f64,
    /// `Λ = λ ΓΓᵀ`.
    pub lambda_matrix: DMatrix<f64>,
    pub risk_aversion: f64,
    /// Risk-free drift; carried for completeness, never used by rewards.
    pub risk_free: f64,
    pub x0: DVector<f64>,
    pub f0: DVector<f64>,
    pub f1: DVector<f64>,
    pub unconstrained: bool,
    noise: NoiseModel,
}

fn psd_or_err(m: &DMatrix<f64>, field: &str) -> Result<()> {
    let scale = m.amax().max(1e-300);
    if (m - m.transpose()).amax() > 1e-12 * scale.max(1.0) {
        return Err(Error::invalid(format!("{field} must be symmetric")));
    }
    if m.clone().symmetric_eigen().eigenvalues.min() < -1e-12 * scale {
        return Err(Error::invalid(format!("{field} must be positive semi-definite")));
    }
    Ok(())
}

impl TradingModel {
    pub fn new(p: TradingParams) -> Result<Self> {
        let d = p.num_assets;
        if d == 0 || p.horizon == 0 {
            return Err(Error::invalid("need at least one security and one period"));
        }
        if !(p.lambda > 0.0) || !p.lambda.is_finite() {
            return Err(Error::invalid(format!("cost scale λ must be positive, got {}", p.lambda)));
        }
        if !(p.risk_aversion >= 0.0) {
            return Err(Error::invalid("risk aversion must be non-negative"));
        }
        let k = 2;
        if p.phi.shape() != (k, k) {
            return Err(Error::invalid("Φ must be 2x2"));
        }
        let loadings = p.loadings.unwrap_or_else(|| DMatrix::from_fn(d, k, |_, c| FACTOR_LOADINGS[c]));
        if loadings.shape() != (d, k) {
            return Err(Error::invalid("B must be D x 2"));
        }
        let psi = p.psi.unwrap_or_else(|| DMatrix::from_diagonal(&DVector::from_row_slice(&FACTOR_NOISE_VAR)));
        if psi.shape() != (k, k) {
            return Err(Error::invalid("Ψ must be 2x2"));
        }
        psd_or_err(&psi, "Ψ")?;
        let sigma = p.sigma.unwrap_or_else(|| DMatrix::from_diagonal_element(d, d, RETURN_NOISE_VAR));
        if sigma.shape() != (d, d) {
            return Err(Error::invalid("Σ must be D x D"));
        }
        psd_or_err(&sigma, "Σ")?;
        let x0 = p.x0.unwrap_or_else(|| DVector::from_element(d, INITIAL_POSITION));
        if x0.len() != d || x0.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("x0 must be a non-negative D-vector"));
        }
        let f0 = p.f0.unwrap_or_else(|| DVector::from_element(k, 1.0));
        if f0.len() != k {
            return Err(Error::invalid("f0 must have two entries"));
        }
        let gamma = cost_factor(d);
        let lambda_matrix = p.lambda * &gamma * gamma.transpose();
        let f1 = (DMatrix::identity(k, k) - &p.phi) * &f0;
        let noise = NoiseModel::gaussian(psi.clone())?;
        Ok(Self {
            horizon: p.horizon,
            loadings,
            phi: p.phi,
            psi,
            sigma,
            cost_factor: gamma,
            lambda: p.lambda,
            lambda_matrix,
            risk_aversion: p.risk_aversion,
            risk_free: RISK_FREE_RETURN,
            x0,
            f0,
            f1,
            unconstrained: p.unconstrained,
            noise,
        })
    }

    pub fn num_assets(&self) -> usize {
        self.x0.len()
    }

    pub fn num_factors(&self) -> usize {
        2
    }

    fn split<'b>(&self, s: &'b DVectorView<f64>) -> (DVectorView<'b, f64>, DVectorView<'b, f64>) {
        let d = self.num_assets();
        (s.rows(0, d), s.rows(d, 2))
    }

    /// Period reward `x_tᵀBf_t - ½a_tᵀΛa_t - γ/2 x_tᵀΣx_t`.
    pub fn period_reward(&self, x_after: DVectorView<f64>, a: DVectorView<f64>, f: DVectorView<f64>) -> f64 {
        let mut r = x_after.dot(&(&self.loadings * f)) - 0.5 * a.dot(&(&self.lambda_matrix * a));
        if self.risk_aversion != 0.0 {
            r -= 0.5 * self.risk_aversion * x_after.dot(&(&self.sigma * x_after));
        }
        r
    }
}

impl MdpModel for TradingModel {
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn state_dim(&self) -> usize {
        self.num_assets() + 2
    }
    fn action_dim(&self) -> usize {
        self.num_assets()
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn initial_state(&self) -> DVector<f64> {
        let mut s = DVector::zeros(self.state_dim());
        s.rows_mut(0, self.num_assets()).copy_from(&self.x0);
        s.rows_mut(self.num_assets(), 2).copy_from(&self.f1);
        s
    }
    fn transition(&self, _n: usize, s: DVectorView<f64>, a: DVectorView<f64>, z: DVectorView<f64>) -> DVector<f64> {
        let (x, f) = self.split(&s);
        let d = self.num_assets();
        let mut next = DVector::zeros(d + 2);
        next.rows_mut(0, d).copy_from(&(x + a));
        next.rows_mut(d, 2).copy_from(&((DMatrix::identity(2, 2) - &self.phi) * f + z));
        next
    }
    fn reward(&self, _n: usize, s: DVectorView<f64>, a: DVectorView<f64>) -> f64 {
        let (x, f) = self.split(&s);
        self.period_reward((x + a).as_view(), a, f)
    }
    fn terminal_reward(&self, _s: DVectorView<f64>) -> f64 {
        0.0
    }
    fn check_action(&self, n: usize, s: DVectorView<f64>, a: DVectorView<f64>) -> std::result::Result<(), String> {
        let (x, _) = self.split(&s);
        let tol = 1e-9 * self.x0.amax().max(1.0);
        for d in 0..self.num_assets() {
            let after = x[d] + a[d];
            if !self.unconstrained {
                if a[d] > tol {
                    return Err(format!("sell-only a[{d}] <= 0 violated ({})", a[d]));
                }
                if after < -tol {
                    return Err(format!("no-short x[{d}] >= 0 violated ({after})"));
                }
            }
            if n + 1 == self.horizon && after.abs() > tol {
                return Err(format!("terminal liquidation x_T[{d}] = 0 violated ({after})"));
            }
        }
        Ok(())
    }
}

impl LinearQuadraticModel for TradingModel {
    fn linear_dynamics(&self, _n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let d = self.num_assets();
        let mut f = DMatrix::zeros(d + 2, d + 2);
        f.view_mut((0, 0), (d, d)).fill_with_identity();
        f.view_mut((d, d), (2, 2)).copy_from(&(DMatrix::identity(2, 2) - &self.phi));
        let mut g = DMatrix::zeros(d + 2, d);
        g.view_mut((0, 0), (d, d)).fill_with_identity();
        (f, g)
    }
    fn dynamics_offset(&self, _n: usize, z: DVectorView<f64>) -> DVector<f64> {
        let d = self.num_assets();
        let mut o = DVector::zeros(d + 2);
        o.rows_mut(d, 2).copy_from(&z);
        o
    }
    fn reward_form(&self, _n: usize) -> QuadraticForm {
        // v = [x; f; a]
        let d = self.num_assets();
        let (xo, fo, ao) = (0, d, d + 2);
        let size = 2 * d + 2;
        let mut h = DMatrix::zeros(size, size);
        let b = &self.loadings;
        for (row, col) in [(xo, fo), (ao, fo)] {
            h.view_mut((row, col), (d, 2)).copy_from(b);
            h.view_mut((col, row), (2, d)).copy_from(&b.transpose());
        }
        h.view_mut((ao, ao), (d, d)).copy_from(&(-&self.lambda_matrix));
        if self.risk_aversion != 0.0 {
            let rs = self.risk_aversion * &self.sigma;
            for (r, c) in [(xo, xo), (ao, ao), (xo, ao), (ao, xo)] {
                let cur = h.view((r, c), (d, d)).into_owned();
                h.view_mut((r, c), (d, d)).copy_from(&(cur - &rs));
            }
        }
        QuadraticForm { hessian: h, linear: DVector::zeros(size), constant: 0.0 }
    }
    fn terminal_form(&self) -> QuadraticForm {
        let sd = self.state_dim();
        QuadraticForm { hessian: DMatrix::zeros(sd, sd), linear: DVector::zeros(sd), constant: 0.0 }
    }
    fn action_constraints(&self, n: usize) -> LinearConstraints {
        let d = self.num_assets();
        let size = 2 * d + 2;
        let ao = d + 2;
        let (ineq, ineq_rhs) = if self.unconstrained {
            (DMatrix::zeros(0, size), DVector::zeros(0))
        } else {
            // At t = T the no-short rows duplicate the liquidation equality and
            // leave the multipliers unbounded, so only the sell-only rows remain.
            let rows = if n + 1 == self.horizon { d } else { 2 * d };
            let mut g = DMatrix::zeros(rows, size);
            for i in 0..d {
                g[(i, ao + i)] = 1.0;
                if rows == 2 * d {
                    g[(d + i, i)] = -1.0;
                    g[(d + i, ao + i)] = -1.0;
                }
            }
            (g, DVector::zeros(rows))
        };
        let (eq, eq_rhs) = if n + 1 == self.horizon {
            let mut a = DMatrix::zeros(d, size);
            for i in 0..d {
                a[(i, i)] = 1.0;
                a[(i, ao + i)] = 1.0;
            }
            (a, DVector::zeros(d))
        } else {
            (DMatrix::zeros(0, size), DVector::zeros(0))
        };
        LinearConstraints { ineq, ineq_rhs, eq, eq_rhs }
    }
    fn action_scale(&self) -> f64 {
        self.x0.amax().max(1.0)
    }
    fn value_scale(&self) -> f64 {
        1000.0
    }
}

/// Unconstrained optimal trade projected onto `[-x_{t-1}, 0]`, with forced
/// liquidation at `t = T`.
#[derive(Debug, Clone)]
pub struct PlqcPolicy {
    solution: Arc<TradingSolution>,
    num_assets: usize,
}

impl PlqcPolicy {
    pub fn new(solution: Arc<TradingSolution>, num_assets: usize) -> Self {
        Self { solution, num_assets }
    }
}

/// Componentwise `max(-x, min(0, alpha))`.
pub fn project_trade(alpha: &DVector<f64>, x: DVectorView<f64>) -> DVector<f64> {
    DVector::from_fn(alpha.len(), |i, _| (-x[i]).max(alpha[i].min(0.0)))
}

impl Policy for PlqcPolicy {
    fn act(&self, n: usize, s: DVectorView<f64>) -> DVector<f64> {
        let t = n + 1;
        let d = self.num_assets;
        let x = s.rows(0, d);
        if t == self.solution.horizon() {
            return -x.into_owned();
        }
        let alpha = self.solution.unconstrained_policy(t, x, s.rows(d, 2));
        project_trade(&alpha, x)
    }
}

/// Unprojected optimal trade of the unconstrained problem.
#[derive(Debug, Clone)]
pub struct UnconstrainedPolicy {
    solution: Arc<TradingSolution>,
    num_assets: usize,
}

impl UnconstrainedPolicy {
    pub fn new(solution: Arc<TradingSolution>, num_assets: usize) -> Self {
        Self { solution, num_assets }
    }
}

impl Policy for UnconstrainedPolicy {
    fn act(&self, n: usize, s: DVectorView<f64>) -> DVector<f64> {
        let d = self.num_assets;
        self.solution.unconstrained_policy(n + 1, s.rows(0, d), s.rows(d, 2))
    }
}

/// Sells `x0 / T` per period, clamped to the remaining position and
/// liquidating whatever is left at `t = T`.
#[derive(Debug, Clone)]
pub struct TwapPolicy {
    x0: DVector<f64>,
    horizon: usize,
}

impl TwapPolicy {
    pub fn new(model: &TradingModel) -> Self {
        Self { x0: model.x0.clone(), horizon: model.horizon }
    }
}

impl Policy for TwapPolicy {
    fn act(&self, n: usize, s: DVectorView<f64>) -> DVector<f64> {
        let d = self.x0.len();
        let x = s.rows(0, d);
        if n + 1 == self.horizon {
            return -x.into_owned();
        }
        DVector::from_fn(d, |i, _| (-self.x0[i] / self.horizon as f64).max(-x[i]))
    }
}

/// Regressors built from the derivatives of the unconstrained value in the
/// factors. Order-1 coordinates use `{1, (∂J_{t+1}/∂f)_k}` evaluated at the
/// conditional mean of `f_{t+1}`; order-2 coordinates use the constant
/// `diag(A_ff,t+1)_k`. For `t >= T - 1` the next value does not depend on
/// the factor, so those coordinates are fixed at zero.
#[derive(Debug, Clone)]
pub struct TradingRegressors {
    solution: Arc<TradingSolution>,
    drift: DMatrix<f64>,
    num_assets: usize,
    order: u32,
}

impl TradingRegressors {
    pub fn new(solution: Arc<TradingSolution>, model: &TradingModel, order: u32) -> Result<Self> {
        if !(1..=2).contains(&order) {
            return Err(Error::invalid("trading regressors exist for orders 1 and 2"));
        }
        Ok(Self {
            solution,
            drift: DMatrix::identity(2, 2) - &model.phi,
            num_assets: model.num_assets(),
            order,
        })
    }

    fn active(&self, n: usize) -> bool {
        n + 2 < self.solution.horizon()
    }

    /// Factor gradient `A_xf,t+1ᵀ(x + a) + A_ff,t+1(I - Φ)f` for `t = n + 1`.
    pub fn factor_gradient(&self, n: usize, s: DVectorView<f64>, a: DVectorView<f64>) -> DVector<f64> {
        let t1 = n + 2;
        let d = self.num_assets;
        let x = s.rows(0, d);
        let f = s.rows(d, 2);
        self.solution.a_xf(t1).transpose() * (x + a) + self.solution.a_ff(t1) * (&self.drift * f)
    }
}

impl RegressorSpec for TradingRegressors {
    fn feature_count(&self, n: usize, i: usize) -> usize {
        if !self.active(n) {
            return 0;
        }
        let r = i % self.order as usize + 1;
        if r == 1 {
            2
        } else {
            1
        }
    }
    fn features(&self, n: usize, i: usize, s: DVectorView<f64>, a: DVectorView<f64>, out: &mut [f64]) {
        let k = i / self.order as usize;
        let r = i % self.order as usize + 1;
        if r == 1 {
            out[0] = 1.0;
            out[1] = self.factor_gradient(n, s, a)[k];
        } else {
            out[0] = self.solution.a_ff(n + 2)[(k, k)];
        }
    }
    fn affine_in_action(&self) -> bool {
        true
    }
}

/// Martingale differences of the unconstrained value `J_{t+1}` along a path.
/// Exact only without trading constraints.
#[derive(Debug, Clone)]
pub struct TradingValuePenalty {
    solution: Arc<TradingSolution>,
    drift: DMatrix<f64>,
    psi: DMatrix<f64>,
    num_assets: usize,
}

impl TradingValuePenalty {
    pub fn new(solution: Arc<TradingSolution>, model: &TradingModel) -> Self {
        Self {
            solution,
            drift: DMatrix::identity(2, 2) - &model.phi,
            psi: model.psi.clone(),
            num_assets: model.num_assets(),
        }
    }
}

impl DualPenalty for TradingValuePenalty {
    fn evaluate(&self, path: &Trajectory) -> f64 {
        let d = self.num_assets;
        let horizon = self.solution.horizon();
        let mut total = 0.0;
        for n in 0..horizon.saturating_sub(1) {
            let t1 = n + 2;
            let s = path.state(n);
            let x_after = s.rows(0, d) + path.action(n);
            let f_mean = &self.drift * s.rows(d, 2);
            let z = path.noise(n);
            let a_ff = self.solution.a_ff(t1);
            total += x_after.dot(&(self.solution.a_xf(t1) * z)) + f_mean.dot(&(a_ff * z))
                + 0.5 * (z.dot(&(a_ff * z)) - (&self.psi * a_ff).trace());
        }
        total
    }
    fn affine_in_action(&self) -> bool {
        true
    }
}
