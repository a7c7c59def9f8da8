//! Dual penalties, pathwise inner problems, upper bounds and duality gaps.
//!
//! For a penalty `M(a, z)` with zero conditional mean under every
//! non-anticipative policy, `E[max_a sum r(a, z) - M(a, z)]` bounds the
//! optimal value from above. Inner problems are solved either as convex QPs
//! (linear dynamics, concave quadratic rewards, affine penalties) or by
//! exhaustive enumeration for small finite-action models.

use nalgebra::{DMatrix, DVector, DVectorView};
use rayon::prelude::*;
use serde::Serialize;

use crate::mdp::{
    enumerate_noise_paths, neumaier_sum, path_rng, BoundEstimate, FiniteActionModel, MdpModel, Policy, SeedStream,
    Trajectory, CI_95,
};
use crate::qp::{solve_qp, KktResiduals, QpProblem, QpStatus, SolverOptions};
use crate::regression::PenaltyModel;
use crate::{Error, Result};

/// A function of a whole trajectory subtracted from the pathwise reward.
pub trait DualPenalty: Sync {
    fn evaluate(&self, path: &Trajectory) -> f64;
    /// True when the penalty is affine in the action sequence once states
    /// are written in terms of actions.
    fn affine_in_action(&self) -> bool;
}

/// The trivial penalty: perfect foresight without compensation.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPenalty;

impl DualPenalty for ZeroPenalty {
    fn evaluate(&self, _path: &Trajectory) -> f64 {
        0.0
    }
    fn affine_in_action(&self) -> bool {
        true
    }
}

/// `sum_n z_{n+1,k}^2` without centring. Its mean is not zero, so it is not a
/// valid penalty; useful as a negative control.
#[derive(Debug, Clone, Copy, Default)]
pub struct UncenteredSquarePenalty {
    pub component: usize,
}

impl DualPenalty for UncenteredSquarePenalty {
    fn evaluate(&self, path: &Trajectory) -> f64 {
        (0..path.horizon()).map(|n| path.noise(n)[self.component].powi(2)).sum()
    }
    fn affine_in_action(&self) -> bool {
        true
    }
}

impl DualPenalty for PenaltyModel {
    fn evaluate(&self, path: &Trajectory) -> f64 {
        PenaltyModel::evaluate(self, path)
    }
    fn affine_in_action(&self) -> bool {
        PenaltyModel::affine_in_action(self)
    }
}

impl<P: DualPenalty + ?Sized> DualPenalty for &P {
    fn evaluate(&self, path: &Trajectory) -> f64 {
        (**self).evaluate(path)
    }
    fn affine_in_action(&self) -> bool {
        (**self).affine_in_action()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub mean: f64,
    pub std_error: f64,
    /// Computed over every noise sequence rather than sampled.
    pub exact: bool,
    pub count: usize,
    pub pass: bool,
}

/// Largest number of noise sequences checked exhaustively.
const MAX_ENUMERATED_PATHS: f64 = 1e6;

/// Tests `E[M] = 0` under `policy`: by enumeration for small finite noise
/// (`|mean| <= 1e-10`), otherwise on fresh paths (`|mean| <= 4 se`).
pub fn check_feasibility<M, P, D>(model: &M, policy: &P, penalty: &D, paths: usize, seed: u64) -> Result<FeasibilityReport>
where
    M: MdpModel + ?Sized,
    P: Policy + ?Sized,
    D: DualPenalty + ?Sized,
{
    if !policy.is_non_anticipative() {
        return Err(Error::invalid("feasibility is only defined under non-anticipative policies"));
    }
    if let Some((atoms, _)) = model.noise().atoms() {
        if (atoms.len() as f64).powi(model.horizon() as i32) <= MAX_ENUMERATED_PATHS {
            let all = enumerate_noise_paths(model.noise(), model.horizon())?;
            let terms = all
                .par_iter()
                .map(|(z, p)| Ok(p * penalty.evaluate(&crate::mdp::rollout(model, policy, z)?.trajectory)))
                .collect::<Result<Vec<f64>>>()?;
            let mean = neumaier_sum(terms);
            return Ok(FeasibilityReport { mean, std_error: 0.0, exact: true, count: all.len(), pass: mean.abs() <= 1e-10 });
        }
    }
    if paths < 1000 {
        return Err(Error::invalid("Monte Carlo feasibility check needs at least 1000 paths"));
    }
    let sims = crate::mdp::simulate_paths_in(model, policy, paths, seed, SeedStream::Feasibility)?;
    let values: Vec<f64> = sims.par_iter().map(|p| penalty.evaluate(&p.trajectory)).collect();
    let est = BoundEstimate::from_samples(&values, CI_95)?;
    Ok(FeasibilityReport {
        mean: est.mean,
        std_error: est.std_error,
        exact: false,
        count: paths,
        pass: est.mean.abs() <= 4.0 * est.std_error,
    })
}

/// `½vᵀHv + lᵀv + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl QuadraticForm {
    pub fn value(&self, v: DVectorView<f64>) -> f64 {
        0.5 * v.dot(&(&self.hessian * v)) + self.linear.dot(&v) + self.constant
    }
}

/// `ineq v <= ineq_rhs`, `eq v = eq_rhs` over `v = [state; action]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraints {
    pub ineq: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    pub eq: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

impl LinearConstraints {
    pub fn none(width: usize) -> Self {
        Self {
            ineq: DMatrix::zeros(0, width),
            ineq_rhs: DVector::zeros(0),
            eq: DMatrix::zeros(0, width),
            eq_rhs: DVector::zeros(0),
        }
    }
}

/// Models whose inner problems are convex QPs: `x' = F x + G a + o(z)`,
/// concave quadratic rewards over `[x; a]` and linear action constraints.
pub trait LinearQuadraticModel: MdpModel {
    /// `(F, G)` for period `n`.
    fn linear_dynamics(&self, n: usize) -> (DMatrix<f64>, DMatrix<f64>);
    fn dynamics_offset(&self, n: usize, z: DVectorView<f64>) -> DVector<f64>;
    /// Period reward as a quadratic form in `[x; a]`.
    fn reward_form(&self, n: usize) -> QuadraticForm;
    /// Terminal reward as a quadratic form in the final state.
    fn terminal_form(&self) -> QuadraticForm;
    fn action_constraints(&self, n: usize) -> LinearConstraints;
    /// Typical action magnitude; QP variables are actions divided by it.
    fn action_scale(&self) -> f64 {
        1.0
    }
    /// Typical value magnitude; the QP objective is divided by it.
    fn value_scale(&self) -> f64 {
        1.0
    }
}

/// One pathwise inner problem as a scaled QP.
#[derive(Debug, Clone)]
pub struct InnerProblem {
    pub qp: QpProblem,
    /// Penalty at zero actions (the part no action can change).
    pub penalty_constant: f64,
    pub action_scale: f64,
    pub value_scale: f64,
    pub horizon: usize,
    pub action_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    /// `max_a sum r - M` on this path.
    pub value: f64,
    pub actions: Vec<DVector<f64>>,
    pub status: QpStatus,
    pub residuals: KktResiduals,
    pub penalty_constant: f64,
}

impl InnerProblem {
    pub fn solve(&self, options: &SolverOptions) -> Result<InnerSolution> {
        let sol = solve_qp(&self.qp, options)?;
        let actions = (0..self.horizon)
            .map(|n| sol.x.rows(n * self.action_dim, self.action_dim) * self.action_scale)
            .collect();
        Ok(InnerSolution {
            value: -sol.objective * self.value_scale,
            actions,
            status: sol.status,
            residuals: sol.residuals,
            penalty_constant: self.penalty_constant,
        })
    }
}

/// Trajectory generated by a fixed action sequence along a noise path.
pub fn trajectory_for<M: MdpModel + ?Sized>(model: &M, noises: &[DVector<f64>], actions: &[DVector<f64>]) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(actions.len() + 1);
    states.push(model.initial_state());
    for (n, a) in actions.iter().enumerate() {
        let next = model.transition(n, states[n].as_view(), a.as_view(), noises[n].as_view());
        states.push(next);
    }
    Trajectory::new(&states, actions, noises)
}

/// Sum of rewards of a fixed action sequence along a trajectory.
pub fn trajectory_reward<M: MdpModel + ?Sized>(model: &M, path: &Trajectory) -> f64 {
    let n_periods = path.horizon();
    (0..n_periods).map(|n| model.reward(n, path.state(n), path.action(n))).sum::<f64>()
        + model.terminal_reward(path.state(n_periods))
}

/// Builds the QP `min -(sum r - M)/value_scale` over scaled actions with the
/// states eliminated. The penalty's affine dependence on the actions is
/// extracted by evaluation and verified at two probe points.
pub fn build_inner_problem<M, D>(model: &M, noises: &[DVector<f64>], penalty: &D) -> Result<InnerProblem>
where
    M: LinearQuadraticModel + ?Sized,
    D: DualPenalty + ?Sized,
{
    if !penalty.affine_in_action() {
        return Err(Error::NotAffine("the penalty declares itself non-affine".into()));
    }
    let horizon = model.horizon();
    if noises.len() != horizon {
        return Err(Error::invalid(format!("expected {horizon} noises, got {}", noises.len())));
    }
    let sd = model.state_dim();
    let ad = model.action_dim();
    let nv = horizon * ad;
    let scale = model.action_scale();
    let vs = model.value_scale();

    // s_n = c_n + S_n u
    let mut c = model.initial_state();
    let mut s_mat = DMatrix::<f64>::zeros(sd, nv);
    let mut p = DMatrix::<f64>::zeros(nv, nv);
    let mut q = DVector::<f64>::zeros(nv);
    let mut constant = 0.0;
    let mut g_rows: Vec<DMatrix<f64>> = Vec::new();
    let mut h_rows: Vec<DVector<f64>> = Vec::new();
    let mut a_rows: Vec<DMatrix<f64>> = Vec::new();
    let mut b_rows: Vec<DVector<f64>> = Vec::new();

    let mut add_form = |form: &QuadraticForm, d: &DVector<f64>, dm: &DMatrix<f64>, p: &mut DMatrix<f64>, q: &mut DVector<f64>| {
        let hd = &form.hessian * dm;
        *p += dm.transpose() * &hd;
        *q += dm.transpose() * (&form.hessian * d + &form.linear);
        constant += form.value(d.as_view());
    };

    for n in 0..horizon {
        let mut d = DVector::zeros(sd + ad);
        d.rows_mut(0, sd).copy_from(&c);
        let mut dm = DMatrix::zeros(sd + ad, nv);
        dm.view_mut((0, 0), (sd, nv)).copy_from(&s_mat);
        for j in 0..ad {
            dm[(sd + j, n * ad + j)] = scale;
        }
        add_form(&model.reward_form(n), &d, &dm, &mut p, &mut q);

        let cons = model.action_constraints(n);
        if cons.ineq.nrows() > 0 {
            g_rows.push(&cons.ineq * &dm);
            h_rows.push(&cons.ineq_rhs - &cons.ineq * &d);
        }
        if cons.eq.nrows() > 0 {
            a_rows.push(&cons.eq * &dm);
            b_rows.push(&cons.eq_rhs - &cons.eq * &d);
        }

        let (f, g) = model.linear_dynamics(n);
        c = &f * &c + model.dynamics_offset(n, noises[n].as_view());
        let mut next = &f * &s_mat;
        let g_scaled = &g * scale;
        let mut block = next.view_mut((0, n * ad), (sd, ad));
        block += &g_scaled;
        s_mat = next;
    }
    add_form(&model.terminal_form(), &c, &s_mat, &mut p, &mut q);

    // Penalty as an affine function of the scaled actions.
    let eval = |u: &DVector<f64>| -> Result<f64> {
        let actions: Vec<DVector<f64>> = (0..horizon).map(|n| u.rows(n * ad, ad) * scale).collect();
        Ok(penalty.evaluate(&trajectory_for(model, noises, &actions)?))
    };
    let zero = DVector::zeros(nv);
    let p0 = eval(&zero)?;
    let grad = (0..nv)
        .into_iter()
        .map(|j| {
            let mut e = zero.clone();
            e[j] = 1.0;
            Ok(eval(&e)? - p0)
        })
        .collect::<Result<Vec<f64>>>()?;
    let grad = DVector::from_vec(grad);
    for probe in 0..2 {
        let u = DVector::from_fn(nv, |j, _| 0.5 * ((j + 1) as f64 * (1.3 + probe as f64)).sin() - 0.25 * probe as f64);
        let predicted = p0 + grad.dot(&u);
        let actual = eval(&u)?;
        let tol = 1e-7 * (p0.abs() + grad.abs().sum() + 1.0);
        if (predicted - actual).abs() > tol {
            return Err(Error::NotAffine(format!(
                "penalty differs from its affine extrapolation by {:.3e} at probe {probe}",
                (predicted - actual).abs()
            )));
        }
    }

    let stack = |blocks: &[DMatrix<f64>]| {
        let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
        let mut m = DMatrix::zeros(rows, nv);
        let mut r = 0;
        for b in blocks {
            m.view_mut((r, 0), (b.nrows(), nv)).copy_from(b);
            r += b.nrows();
        }
        m
    };
    let stack_v = |blocks: &[DVector<f64>]| {
        DVector::from_iterator(blocks.iter().map(|b| b.len()).sum(), blocks.iter().flat_map(|b| b.iter().copied()))
    };

    let p_min = -(&p) / vs;
    let qp = QpProblem {
        p: (&p_min + p_min.transpose()) * 0.5,
        q: (-q + &grad) / vs,
        g: stack(&g_rows),
        h: stack_v(&h_rows),
        a_eq: stack(&a_rows),
        b_eq: stack_v(&b_rows),
        c0: (p0 - constant) / vs,
    };
    Ok(InnerProblem { qp, penalty_constant: p0, action_scale: scale, value_scale: vs, horizon, action_dim: ad })
}

/// Exact inner optimum of a finite-action model by enumerating every
/// admissible action sequence along the fixed noise path.
pub fn inner_value_by_enumeration<M, D>(model: &M, noises: &[DVector<f64>], penalty: &D) -> Result<(f64, Vec<DVector<f64>>)>
where
    M: FiniteActionModel + ?Sized,
    D: DualPenalty + ?Sized,
{
    fn recurse<M: FiniteActionModel + ?Sized, D: DualPenalty + ?Sized>(
        model: &M,
        noises: &[DVector<f64>],
        penalty: &D,
        state: DVector<f64>,
        actions: &mut Vec<DVector<f64>>,
        best: &mut Option<(f64, Vec<DVector<f64>>)>,
    ) -> Result<()> {
        let n = actions.len();
        if n == model.horizon() {
            let path = trajectory_for(model, noises, actions)?;
            let v = trajectory_reward(model, &path) - penalty.evaluate(&path);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                *best = Some((v, actions.clone()));
            }
            return Ok(());
        }
        for a in model.actions(n, state.as_view()) {
            let next = model.transition(n, state.as_view(), a.as_view(), noises[n].as_view());
            actions.push(a);
            recurse(model, noises, penalty, next, actions, best)?;
            actions.pop();
        }
        Ok(())
    }
    let mut best = None;
    recurse(model, noises, penalty, model.initial_state(), &mut Vec::new(), &mut best)?;
    best.ok_or_else(|| Error::invalid("no admissible action sequence"))
}

/// Upper bound over every noise sequence of a finite model, weighted by
/// probability; returns the bound and the pathwise inner values.
pub fn exact_upper_bound_by_enumeration<M, D>(model: &M, penalty: &D) -> Result<(f64, Vec<f64>)>
where
    M: FiniteActionModel + ?Sized,
    D: DualPenalty + ?Sized,
{
    let all = enumerate_noise_paths(model.noise(), model.horizon())?;
    let values = all
        .par_iter()
        .map(|(z, _)| Ok(inner_value_by_enumeration(model, z, penalty)?.0))
        .collect::<Result<Vec<f64>>>()?;
    let ub = neumaier_sum(all.iter().zip(&values).map(|((_, p), v)| p * v));
    Ok((ub, values))
}

/// Upper-bound estimate for one penalty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyBound {
    pub name: String,
    pub estimate: BoundEstimate,
    /// Per-path inner values in path order.
    pub values: Vec<f64>,
    /// Per-path action-independent penalty parts.
    pub constants: Vec<f64>,
    pub statuses: Vec<QpStatus>,
}

impl PenaltyBound {
    pub fn non_optimal(&self) -> usize {
        self.statuses.iter().filter(|s| **s != QpStatus::Optimal).count()
    }
}

/// Simulates `count` fresh noise paths on the dual stream and solves the
/// inner QP of every penalty on each of them. All penalties share the paths.
pub fn estimate_upper_bounds<M>(
    model: &M,
    penalties: &[(&str, &dyn DualPenalty)],
    count: usize,
    seed: u64,
    options: &SolverOptions,
    ci_multiplier: f64,
) -> Result<Vec<PenaltyBound>>
where
    M: LinearQuadraticModel + ?Sized,
{
    if count < 2 {
        return Err(Error::invalid("upper bound needs at least 2 paths"));
    }
    if penalties.is_empty() {
        return Err(Error::invalid("no penalties given"));
    }
    let horizon = model.horizon();
    let per_path = (0..count)
        .into_par_iter()
        .map(|j| {
            let mut rng = path_rng(seed, SeedStream::Dual, j as u64);
            let noises: Vec<DVector<f64>> = (0..horizon).map(|_| model.noise().sample(&mut rng)).collect();
            penalties
                .iter()
                .map(|(_, pen)| {
                    let sol = build_inner_problem(model, &noises, *pen)?.solve(options)?;
                    if sol.status == QpStatus::Infeasible {
                        return Err(Error::InnerSolve { path: j, status: sol.status });
                    }
                    if sol.status != QpStatus::Optimal {
                        log::warn!("inner problem on path {j} stopped with {:?}, residuals {:?}", sol.status, sol.residuals);
                    }
                    Ok(sol)
                })
                .collect::<Result<Vec<InnerSolution>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    penalties
        .iter()
        .enumerate()
        .map(|(k, (name, _))| {
            let values: Vec<f64> = per_path.iter().map(|s| s[k].value).collect();
            Ok(PenaltyBound {
                name: name.to_string(),
                estimate: BoundEstimate::from_samples(&values, ci_multiplier)?,
                constants: per_path.iter().map(|s| s[k].penalty_constant).collect(),
                statuses: per_path.iter().map(|s| s[k].status).collect(),
                values,
            })
        })
        .collect()
}

/// Single-penalty convenience wrapper around [`estimate_upper_bounds`].
pub fn estimate_upper_bound<M, D>(model: &M, penalty: &D, count: usize, seed: u64, options: &SolverOptions) -> Result<PenaltyBound>
where
    M: LinearQuadraticModel + ?Sized,
    D: DualPenalty,
{
    let mut v = estimate_upper_bounds(model, &[("penalty", penalty as &dyn DualPenalty)], count, seed, options, CI_95)?;
    Ok(v.remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityGap {
    /// `UB - LB`.
    pub absolute: f64,
    /// `(UB - LB) / LB`; `None` when `LB <= 0`.
    pub ratio: Option<f64>,
}

pub fn duality_gap(lower: f64, upper: f64) -> DualityGap {
    let absolute = upper - lower;
    DualityGap { absolute, ratio: if lower > 0.0 { Some(absolute / lower) } else { None } }
}

/// Lower bound, every upper bound and the gap to the tightest one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub lower: BoundEstimate,
    pub upper: Vec<(String, BoundEstimate)>,
    pub best: String,
    pub gap: DualityGap,
}

pub fn duality_report(lower: BoundEstimate, upper: Vec<(String, BoundEstimate)>) -> Result<DualityReport> {
    let (best, est) = upper
        .iter()
        .min_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
        .ok_or_else(|| Error::invalid("duality report needs at least one upper bound"))?;
    let gap = duality_gap(lower.mean, est.mean);
    Ok(DualityReport { best: best.clone(), gap, lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSpec;
    use crate::mdp::{simulate_paths, FnPolicy, NoiseModel};
    use crate::regression::{AffineRegressors, InterceptRegressors};
    use std::sync::Arc;

    #[test]
    fn gap_examples() {
        let g = duality_gap(14.937, 15.263);
        assert!((g.ratio.unwrap() * 100.0 - 2.18).abs() < 0.005);
        assert_eq!(duality_gap(3.0, 3.0).ratio, Some(0.0));
        let g = duality_gap(62.971, 64.401);
        assert!((g.ratio.unwrap() * 100.0 - 2.27).abs() < 0.005);
        let g = duality_gap(-9.375, 1.0);
        assert!(g.ratio.is_none() && (g.absolute - 10.375).abs() < 1e-12);
    }

    #[test]
    fn penalty_arithmetic() {
        let noise = NoiseModel::standard_normal(1);
        let basis = BasisSpec::taylor(&noise, 1).unwrap();
        let path = Trajectory::new(
            &vec![DVector::zeros(1); 3],
            &vec![DVector::zeros(1); 2],
            &[DVector::from_element(1, 0.3), DVector::from_element(1, -0.3)],
        )
        .unwrap();
        let reg = Arc::new(InterceptRegressors);
        let ones = PenaltyModel::from_coefficients(basis.clone(), reg.clone(), vec![vec![DVector::from_element(1, 1.0)]; 2]).unwrap();
        assert!(DualPenalty::evaluate(&ones, &path).abs() < 1e-15);
        let zeros = PenaltyModel::from_coefficients(basis, reg, vec![vec![DVector::zeros(1)]; 2]).unwrap();
        assert_eq!(DualPenalty::evaluate(&zeros, &path), 0.0);
    }

    struct Walk {
        noise: NoiseModel,
    }

    impl MdpModel for Walk {
        fn horizon(&self) -> usize {
            3
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
            DVector::from_element(1, 1.0)
        }
        fn transition(&self, _n: usize, x: DVectorView<f64>, a: DVectorView<f64>, z: DVectorView<f64>) -> DVector<f64> {
            x + a + z
        }
        fn reward(&self, _n: usize, x: DVectorView<f64>, a: DVectorView<f64>) -> f64 {
            -x[0] * x[0] - a[0] * a[0]
        }
        fn terminal_reward(&self, x: DVectorView<f64>) -> f64 {
            -x[0] * x[0]
        }
    }

    #[test]
    fn feasibility_checks() {
        let walk = Walk { noise: NoiseModel::standard_normal(1) };
        let policy = FnPolicy::new(|_, x: DVectorView<f64>| -0.5 * x.into_owned());
        let zero = check_feasibility(&walk, &policy, &ZeroPenalty, 1000, 1).unwrap();
        assert!(zero.pass && zero.mean == 0.0);
        let bad = check_feasibility(&walk, &policy, &UncenteredSquarePenalty::default(), 20_000, 1).unwrap();
        assert!(!bad.pass && (bad.mean - 3.0).abs() < 0.1);

        // Arbitrary coefficients on a centred basis stay feasible.
        let basis = BasisSpec::taylor(walk.noise(), 2).unwrap();
        let coeffs = (0..3)
            .map(|n| (0..2).map(|i| DVector::from_vec(vec![1.0 + n as f64, -2.0 * i as f64, 0.7])).collect())
            .collect();
        let pm = PenaltyModel::from_coefficients(basis, Arc::new(AffineRegressors { state_dim: 1, action_dim: 1 }), coeffs).unwrap();
        assert!(check_feasibility(&walk, &policy, &pm, 20_000, 3).unwrap().pass);

        struct Peeking;
        impl Policy for Peeking {
            fn act(&self, _n: usize, _x: DVectorView<f64>) -> DVector<f64> {
                DVector::zeros(1)
            }
            fn is_non_anticipative(&self) -> bool {
                false
            }
        }
        assert!(check_feasibility(&walk, &Peeking, &ZeroPenalty, 1000, 1).is_err());
    }

    #[test]
    fn finite_noise_feasibility_is_exact() {
        let walk = Walk { noise: NoiseModel::uniform_atoms(&[-1.0, 1.0]).unwrap() };
        let basis = BasisSpec::indicator(walk.noise()).unwrap();
        let coeffs = (0..3).map(|_| (0..2).map(|_| DVector::from_vec(vec![0.3, 2.0, -1.0])).collect()).collect();
        let pm = PenaltyModel::from_coefficients(basis, Arc::new(AffineRegressors { state_dim: 1, action_dim: 1 }), coeffs).unwrap();
        let policy = FnPolicy::new(|_, x: DVectorView<f64>| -0.3 * x.into_owned());
        let rep = check_feasibility(&walk, &policy, &pm, 0, 0).unwrap();
        assert!(rep.exact && rep.pass && rep.count == 8);
    }

    #[test]
    fn simulated_paths_reuse_noise_across_penalties() {
        // Same seed for two estimates reproduces identical per-path values.
        let walk = Walk { noise: NoiseModel::standard_normal(1) };
        let policy = FnPolicy::new(|_, x: DVectorView<f64>| -0.5 * x.into_owned());
        let a = simulate_paths(&walk, &policy, 5, 1).unwrap();
        let b = simulate_paths(&walk, &policy, 5, 1).unwrap();
        assert_eq!(a, b);
    }
}
