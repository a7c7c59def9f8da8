//! Least-squares estimation of penalty coordinates from simulated paths.
//!
//! For each period `n` and basis index `i` the responses
//! `V_{n+1}^j h_i(z_{n+1}^j)` are regressed on features `phi_{n,i}(x_n^j, a_n^j)`.
//! Fitting never simulates: it only reads the supplied paths.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, DVectorView};
use rayon::prelude::*;

use crate::basis::BasisSpec;
use crate::mdp::{SamplePath, Trajectory};
use crate::{Error, Result};

/// Relative pivot threshold below which a column counts as dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub rank: usize,
    pub rank_deficient: bool,
    /// Classical standard errors; `None` when rank deficient or `M == K`.
    pub std_errors: Option<DVector<f64>>,
}

/// Ordinary least squares via column-pivoted QR. Rank-deficient designs get
/// the minimum-norm solution and a logged warning.
pub fn ols_solve(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    ols_solve_ridge(x, y, 0.0)
}

/// Least squares with an optional ridge penalty `ridge * ||theta||^2`.
pub fn ols_solve_ridge(x: &DMatrix<f64>, y: &DVector<f64>, ridge: f64) -> Result<OlsFit> {
    let (m, k) = x.shape();
    if y.len() != m {
        return Err(Error::invalid(format!("design has {m} rows but {} responses", y.len())));
    }
    if k == 0 {
        return Err(Error::invalid("design has no columns"));
    }
    if m < k {
        return Err(Error::invalid(format!("need at least as many observations as regressors ({m} < {k})")));
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("design matrix is identically zero"));
    }
    if !(ridge >= 0.0) {
        return Err(Error::invalid("ridge parameter must be non-negative"));
    }
    let (design, response) = if ridge > 0.0 {
        let mut d = DMatrix::zeros(m + k, k);
        d.rows_mut(0, m).copy_from(x);
        for c in 0..k {
            d[(m + c, c)] = ridge.sqrt();
        }
        let mut r = DVector::zeros(m + k);
        r.rows_mut(0, m).copy_from(y);
        (d, r)
    } else {
        (x.clone(), y.clone())
    };

    let qr = design.col_piv_qr();
    let r = qr.r();
    let perm = qr.p();
    let mut qty = response.clone();
    qr.q_tr_mul(&mut qty);
    let c = qty.rows(0, k).into_owned();

    let lead = r[(0, 0)].abs();
    let rank = (0..k).filter(|&i| r[(i, i)].abs() > RANK_TOL * lead).count();
    let rank_deficient = rank < k;

    let mut theta = if rank_deficient {
        log::warn!("regression design has rank {rank} < {k}; using the minimum-norm solution");
        let svd = r.clone().svd(true, true);
        let tol = RANK_TOL * svd.singular_values.max();
        svd.solve(&c, tol).map_err(|e| Error::invalid(e.to_string()))?
    } else {
        r.solve_upper_triangular(&c).ok_or_else(|| Error::invalid("triangular solve failed"))?
    };
    perm.inv_permute_rows(&mut theta);

    let std_errors = if !rank_deficient && m > k && ridge == 0.0 {
        let resid = y - x * &theta;
        let sigma2 = resid.norm_squared() / (m - k) as f64;
        let rinv = r.solve_upper_triangular(&DMatrix::identity(k, k)).ok_or_else(|| Error::invalid("R not invertible"))?;
        let mut diag = DVector::from_fn(k, |i, _| rinv.row(i).norm_squared() * sigma2);
        perm.inv_permute_rows(&mut diag);
        Some(diag.map(f64::sqrt))
    } else {
        None
    };
    Ok(OlsFit { coefficients: theta, rank, rank_deficient, std_errors })
}

/// Feature maps `phi_{n,i}(x, a)` per period and basis index. An empty
/// feature list fixes that coordinate to zero without a regression.
pub trait RegressorSpec: Send + Sync {
    fn feature_count(&self, n: usize, i: usize) -> usize;
    fn features(&self, n: usize, i: usize, x: DVectorView<f64>, a: DVectorView<f64>, out: &mut [f64]);
    /// True when every feature is affine in the action for fixed state.
    fn affine_in_action(&self) -> bool;
}

/// Constant feature only: each coordinate becomes a per-period sample mean.
#[derive(Debug, Clone, Copy, Default)]
pub struct InterceptRegressors;

impl RegressorSpec for InterceptRegressors {
    fn feature_count(&self, _n: usize, _i: usize) -> usize {
        1
    }
    fn features(&self, _n: usize, _i: usize, _x: DVectorView<f64>, _a: DVectorView<f64>, out: &mut [f64]) {
        out[0] = 1.0;
    }
    fn affine_in_action(&self) -> bool {
        true
    }
}

/// `[1, x, a]` for every period and index.
#[derive(Debug, Clone, Copy)]
pub struct AffineRegressors {
    pub state_dim: usize,
    pub action_dim: usize,
}

impl RegressorSpec for AffineRegressors {
    fn feature_count(&self, _n: usize, _i: usize) -> usize {
        1 + self.state_dim + self.action_dim
    }
    fn features(&self, _n: usize, _i: usize, x: DVectorView<f64>, a: DVectorView<f64>, out: &mut [f64]) {
        out[0] = 1.0;
        out[1..1 + self.state_dim].copy_from_slice(x.as_slice());
        out[1 + self.state_dim..].copy_from_slice(a.as_slice());
    }
    fn affine_in_action(&self) -> bool {
        true
    }
}

/// One-hot features over the distinct state-action pairs of each period, so
/// the regression returns per-cell sample means. Pairs outside the table get
/// coordinate zero.
#[derive(Debug, Clone, Default)]
pub struct TabularRegressors {
    cells: Vec<Vec<(Vec<f64>, Vec<f64>)>>,
}

impl TabularRegressors {
    pub fn new(cells: Vec<Vec<(DVector<f64>, DVector<f64>)>>) -> Self {
        Self {
            cells: cells
                .into_iter()
                .map(|period| period.into_iter().map(|(x, a)| (x.as_slice().to_vec(), a.as_slice().to_vec())).collect())
                .collect(),
        }
    }

    /// Cells in order of first appearance along the given paths.
    pub fn from_paths(paths: &[SamplePath]) -> Self {
        let horizon = paths.first().map_or(0, |p| p.trajectory.horizon());
        let mut cells: Vec<Vec<(Vec<f64>, Vec<f64>)>> = vec![Vec::new(); horizon];
        for p in paths {
            for (n, period) in cells.iter_mut().enumerate() {
                let key = (p.trajectory.state(n).as_slice().to_vec(), p.trajectory.action(n).as_slice().to_vec());
                if !period.contains(&key) {
                    period.push(key);
                }
            }
        }
        Self { cells }
    }

    /// Merges the cells of `other` period by period.
    pub fn merge(&mut self, other: &TabularRegressors) {
        if self.cells.len() < other.cells.len() {
            self.cells.resize(other.cells.len(), Vec::new());
        }
        for (mine, theirs) in self.cells.iter_mut().zip(&other.cells) {
            for c in theirs {
                if !mine.contains(c) {
                    mine.push(c.clone());
                }
            }
        }
    }
}

impl RegressorSpec for TabularRegressors {
    fn feature_count(&self, n: usize, _i: usize) -> usize {
        self.cells.get(n).map_or(0, Vec::len)
    }
    fn features(&self, n: usize, _i: usize, x: DVectorView<f64>, a: DVectorView<f64>, out: &mut [f64]) {
        for (slot, (cx, ca)) in out.iter_mut().zip(&self.cells[n]) {
            *slot = if cx.as_slice() == x.as_slice() && ca.as_slice() == a.as_slice() { 1.0 } else { 0.0 };
        }
    }
    fn affine_in_action(&self) -> bool {
        false
    }
}

/// Fitted penalty `sum_n sum_i beta_{n,i}(x_n, a_n) b_i(z_{n+1})`.
#[derive(Clone)]
pub struct PenaltyModel {
    basis: BasisSpec,
    regressors: Arc<dyn RegressorSpec>,
    /// `coefficients[n][i]`, possibly empty.
    coefficients: Vec<Vec<DVector<f64>>>,
}

impl std::fmt::Debug for PenaltyModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PenaltyModel")
            .field("basis", &self.basis)
            .field("coefficients", &self.coefficients)
            .finish_non_exhaustive()
    }
}

impl PenaltyModel {
    /// Builds a penalty from explicit coefficients; lengths must match the
    /// regressor feature counts.
    pub fn from_coefficients(
        basis: BasisSpec,
        regressors: Arc<dyn RegressorSpec>,
        coefficients: Vec<Vec<DVector<f64>>>,
    ) -> Result<Self> {
        for (n, period) in coefficients.iter().enumerate() {
            if period.len() != basis.len() {
                return Err(Error::invalid(format!("period {n} has {} coordinates, basis has {}", period.len(), basis.len())));
            }
            for (i, theta) in period.iter().enumerate() {
                if theta.len() != regressors.feature_count(n, i) {
                    return Err(Error::invalid(format!(
                        "coefficient ({n}, {i}) has length {}, expected {}",
                        theta.len(),
                        regressors.feature_count(n, i)
                    )));
                }
            }
        }
        Ok(Self { basis, regressors, coefficients })
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn horizon(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self, n: usize, i: usize) -> &DVector<f64> {
        &self.coefficients[n][i]
    }

    pub fn affine_in_action(&self) -> bool {
        self.regressors.affine_in_action()
    }

    /// Fitted coordinate `beta_{n,i}(x, a)`.
    pub fn coordinate(&self, n: usize, i: usize, x: DVectorView<f64>, a: DVectorView<f64>) -> f64 {
        let theta = &self.coefficients[n][i];
        if theta.is_empty() {
            return 0.0;
        }
        let mut phi = vec![0.0; theta.len()];
        self.regressors.features(n, i, x, a, &mut phi);
        phi.iter().zip(theta.iter()).map(|(p, t)| p * t).sum()
    }

    /// Period-`n` term `sum_i beta_{n,i}(x_n, a_n) b_i(z_{n+1})`.
    pub fn period_term(&self, n: usize, x: DVectorView<f64>, a: DVectorView<f64>, z: DVectorView<f64>) -> f64 {
        (0..self.basis.len())
            .map(|i| {
                let beta = self.coordinate(n, i, x, a);
                if beta == 0.0 {
                    0.0
                } else {
                    beta * self.basis.eval(i, z)
                }
            })
            .sum()
    }

    /// Penalty value along a whole trajectory.
    pub fn evaluate(&self, path: &Trajectory) -> f64 {
        (0..self.horizon())
            .map(|n| self.period_term(n, path.state(n), path.action(n), path.noise(n)))
            .sum()
    }
}

/// Fits the coordinates of period `n` from `paths`.
pub fn fit_period(
    paths: &[SamplePath],
    n: usize,
    basis: &BasisSpec,
    regressors: &dyn RegressorSpec,
) -> Result<Vec<DVector<f64>>> {
    fit_period_ridge(paths, n, basis, regressors, 0.0)
}

pub fn fit_period_ridge(
    paths: &[SamplePath],
    n: usize,
    basis: &BasisSpec,
    regressors: &dyn RegressorSpec,
    ridge: f64,
) -> Result<Vec<DVector<f64>>> {
    if paths.is_empty() {
        return Err(Error::invalid("coordinate fitting needs at least one path"));
    }
    if n >= paths[0].trajectory.horizon() {
        return Err(Error::invalid(format!("period {n} is past the horizon")));
    }
    (0..basis.len())
        .into_par_iter()
        .map(|i| fit_one(paths, n, i, basis, regressors, ridge).map_err(|e| Error::Regression { period: n, index: i, source: Box::new(e) }))
        .collect()
}

fn fit_one(
    paths: &[SamplePath],
    n: usize,
    i: usize,
    basis: &BasisSpec,
    regressors: &dyn RegressorSpec,
    ridge: f64,
) -> Result<DVector<f64>> {
    let k = regressors.feature_count(n, i);
    if k == 0 {
        return Ok(DVector::zeros(0));
    }
    let m = paths.len();
    let mut design = DMatrix::zeros(m, k);
    let mut response = DVector::zeros(m);
    let mut row = vec![0.0; k];
    for (j, p) in paths.iter().enumerate() {
        let t = &p.trajectory;
        regressors.features(n, i, t.state(n), t.action(n), &mut row);
        for c in 0..k {
            design[(j, c)] = row[c];
        }
        response[j] = p.tail_values[n + 1] * basis.response_weight(i, t.noise(n));
    }
    Ok(ols_solve_ridge(&design, &response, ridge)?.coefficients)
}

/// Fits every period from the same paths (the primal sample).
pub fn fit_coordinates(paths: &[SamplePath], basis: &BasisSpec, regressors: Arc<dyn RegressorSpec>) -> Result<PenaltyModel> {
    fit_coordinates_ridge(paths, basis, regressors, 0.0)
}

pub fn fit_coordinates_ridge(
    paths: &[SamplePath],
    basis: &BasisSpec,
    regressors: Arc<dyn RegressorSpec>,
    ridge: f64,
) -> Result<PenaltyModel> {
    if paths.is_empty() {
        return Err(Error::invalid("coordinate fitting needs at least one path"));
    }
    let horizon = paths[0].trajectory.horizon();
    let coefficients = (0..horizon)
        .map(|n| fit_period_ridge(paths, n, basis, regressors.as_ref(), ridge))
        .collect::<Result<Vec<_>>>()?;
    PenaltyModel::from_coefficients(basis.clone(), regressors, coefficients)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{NoiseModel, SamplePath};
    use proptest::prelude::*;

    #[test]
    fn intercept_only_mean() {
        let x = DMatrix::from_element(2, 1, 1.0);
        let fit = ols_solve(&x, &DVector::from_vec(vec![2.0, 4.0])).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-14);
        assert!(!fit.rank_deficient);
    }

    #[test]
    fn exact_fit_recovers_coefficients() {
        let x = DMatrix::from_fn(20, 3, |r, c| ((r * 7 + c * 3) % 11) as f64 - 5.0 + if c == 0 { 100.0 } else { 0.0 });
        let truth = DVector::from_vec(vec![1.5, -2.0, 0.25]);
        let fit = ols_solve(&x, &(&x * &truth)).unwrap();
        assert!((fit.coefficients - truth).amax() < 1e-10);
    }

    #[test]
    fn duplicated_column_gives_minimum_norm() {
        let base = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let x = DMatrix::from_columns(&[base.clone(), base.clone()]);
        let fit = ols_solve(&x, &(2.0 * &base)).unwrap();
        assert!(fit.rank_deficient);
        assert_eq!(fit.rank, 1);
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-10 && (fit.coefficients[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn argument_errors() {
        assert!(ols_solve(&DMatrix::zeros(1, 2), &DVector::zeros(1)).is_err());
        assert!(ols_solve(&DMatrix::zeros(3, 2), &DVector::zeros(3)).is_err());
        assert!(ols_solve(&DMatrix::from_element(3, 1, 1.0), &DVector::zeros(2)).is_err());
    }

    #[test]
    fn ridge_shrinks() {
        let x = DMatrix::from_element(4, 1, 1.0);
        let y = DVector::from_element(4, 2.0);
        let fit = ols_solve_ridge(&x, &y, 4.0).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn residuals_are_orthogonal(
            data in proptest::collection::vec(-10.0f64..10.0, 30),
            ys in proptest::collection::vec(-10.0f64..10.0, 10),
        ) {
            let x = DMatrix::from_row_slice(10, 3, &data);
            let y = DVector::from_vec(ys);
            let fit = ols_solve(&x, &y).unwrap();
            let resid = &y - &x * &fit.coefficients;
            let scale = x.norm() * y.norm() + 1.0;
            prop_assert!((x.transpose() * resid).amax() <= 1e-8 * scale);
        }
    }

    fn synthetic_paths(responses: &[(f64, f64, f64)]) -> Vec<SamplePath> {
        // One-period paths with state x, action a and noise z; V_1 = value.
        responses
            .iter()
            .map(|&(x, a, z)| {
                let t = Trajectory::new(
                    &[DVector::from_element(1, x), DVector::from_element(1, 0.0)],
                    &[DVector::from_element(1, a)],
                    &[DVector::from_element(1, z)],
                )
                .unwrap();
                let v1 = (1.0 + 2.0 * x - a) * z;
                SamplePath { trajectory: t, rewards: vec![0.0], terminal_reward: v1, tail_values: vec![v1, v1] }
            })
            .collect()
    }

    #[test]
    fn manufactured_coordinates_are_reproduced() {
        // With z = +-1 and Taylor R = 1, l_1(z) = z so V_1 l_1 = 1 + 2x - a exactly.
        let noise = NoiseModel::uniform_atoms(&[-1.0, 1.0]).unwrap();
        let basis = BasisSpec::taylor(&noise, 1).unwrap();
        let mut pts = Vec::new();
        for k in 0..30 {
            let x = (k % 7) as f64 * 0.3;
            let a = (k % 5) as f64 - 2.0;
            let z = if k % 2 == 0 { 1.0 } else { -1.0 };
            pts.push((x, a, z));
        }
        let paths = synthetic_paths(&pts);
        let reg = Arc::new(AffineRegressors { state_dim: 1, action_dim: 1 });
        let model = fit_coordinates(&paths, &basis, reg).unwrap();
        for &(x, a, _) in &pts {
            let beta = model.coordinate(0, 0, DVector::from_element(1, x).as_view(), DVector::from_element(1, a).as_view());
            assert!((beta - (1.0 + 2.0 * x - a)).abs() < 1e-10);
        }
        assert!(model.affine_in_action());
    }

    #[test]
    fn intercept_regressors_give_sample_means() {
        let noise = NoiseModel::uniform_atoms(&[-1.0, 1.0]).unwrap();
        let basis = BasisSpec::taylor(&noise, 1).unwrap();
        let paths = synthetic_paths(&[(0.0, 0.0, 1.0), (1.0, 0.0, -1.0), (2.0, 1.0, 1.0)]);
        let model = fit_coordinates(&paths, &basis, Arc::new(InterceptRegressors)).unwrap();
        let mean = paths.iter().map(|p| p.tail_values[1] * p.trajectory.noise(0)[0]).sum::<f64>() / 3.0;
        assert!((model.coefficients(0, 0)[0] - mean).abs() < 1e-12);
    }

    #[test]
    fn errors_name_period_and_index() {
        let noise = NoiseModel::uniform_atoms(&[-1.0, 1.0]).unwrap();
        let basis = BasisSpec::taylor(&noise, 1).unwrap();
        let paths = synthetic_paths(&[(0.0, 0.0, 1.0)]);
        let reg = Arc::new(AffineRegressors { state_dim: 1, action_dim: 1 });
        match fit_coordinates(&paths, &basis, reg) {
            Err(Error::Regression { period: 0, index: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tabular_regressors_one_hot() {
        let paths = synthetic_paths(&[(0.0, 0.0, 1.0), (1.0, 0.0, -1.0), (0.0, 0.0, -1.0)]);
        let tab = TabularRegressors::from_paths(&paths);
        assert_eq!(tab.feature_count(0, 0), 2);
        let mut out = [0.0; 2];
        tab.features(0, 0, DVector::from_element(1, 1.0).as_view(), DVector::from_element(1, 0.0).as_view(), &mut out);
        assert_eq!(out, [0.0, 1.0]);
    }
}
