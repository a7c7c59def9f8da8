//! Finite-horizon MDP abstractions, deterministic path simulation and
//! Monte Carlo bound estimates.
//!
//! Periods are indexed `n = 0..N`. The noise `z_{n+1}` drives the transition
//! from period `n` to `n + 1`; in a [`Trajectory`] it is stored at slot `n`.

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default multiplier for 95% confidence half-widths.
pub const CI_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseDistribution {
    /// Finitely many atoms with strictly positive probabilities.
    FiniteDiscrete { atoms: Vec<DVector<f64>>, probs: Vec<f64> },
    /// Zero-mean Gaussian with the given covariance; `factor * factor^T = covariance`.
    Gaussian { covariance: DMatrix<f64>, factor: DMatrix<f64> },
}

/// Distribution of the i.i.d. noise `z_1, ..., z_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    dim: usize,
    dist: NoiseDistribution,
}

impl NoiseModel {
    pub fn finite_discrete(atoms: Vec<DVector<f64>>, probs: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != probs.len() {
            return Err(Error::invalid("finite noise needs one probability per atom"));
        }
        let dim = atoms[0].len();
        if atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::invalid("noise atoms must share one dimension"));
        }
        if probs.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::invalid("noise atom probabilities must be strictly positive"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("noise probabilities sum to {total}, not 1")));
        }
        for i in 0..atoms.len() {
            for j in 0..i {
                if atoms[i] == atoms[j] {
                    return Err(Error::invalid(format!("duplicate noise atom at positions {j} and {i}")));
                }
            }
        }
        Ok(Self { dim, dist: NoiseDistribution::FiniteDiscrete { atoms, probs } })
    }

    /// Scalar noise taking each value in `values` with equal probability.
    pub fn uniform_atoms(values: &[f64]) -> Result<Self> {
        let p = 1.0 / values.len() as f64;
        Self::finite_discrete(
            values.iter().map(|&v| DVector::from_element(1, v)).collect(),
            vec![p; values.len()],
        )
    }

    /// Noise concentrated on a single atom at the origin.
    pub fn deterministic(dim: usize) -> Self {
        Self {
            dim,
            dist: NoiseDistribution::FiniteDiscrete { atoms: vec![DVector::zeros(dim)], probs: vec![1.0] },
        }
    }

    pub fn standard_normal(dim: usize) -> Self {
        Self {
            dim,
            dist: NoiseDistribution::Gaussian {
                covariance: DMatrix::identity(dim, dim),
                factor: DMatrix::identity(dim, dim),
            },
        }
    }

    /// Zero-mean Gaussian noise with a symmetric positive semi-definite covariance.
    pub fn gaussian(covariance: DMatrix<f64>) -> Result<Self> {
        let dim = covariance.nrows();
        if covariance.ncols() != dim || dim == 0 {
            return Err(Error::invalid("noise covariance must be a non-empty square matrix"));
        }
        let scale = covariance.amax().max(1.0);
        if (&covariance - covariance.transpose()).amax() > 1e-12 * scale {
            return Err(Error::invalid("noise covariance is not symmetric"));
        }
        let eig = covariance.clone().symmetric_eigen();
        if eig.eigenvalues.min() < -1e-10 * scale {
            return Err(Error::invalid("noise covariance is not positive semi-definite"));
        }
        let factor = match covariance.clone().cholesky() {
            Some(c) => c.l(),
            None => {
                let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
                &eig.eigenvectors * DMatrix::from_diagonal(&sqrt)
            }
        };
        Ok(Self { dim, dist: NoiseDistribution::Gaussian { covariance, factor } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn distribution(&self) -> &NoiseDistribution {
        &self.dist
    }

    pub fn atoms(&self) -> Option<(&[DVector<f64>], &[f64])> {
        match &self.dist {
            NoiseDistribution::FiniteDiscrete { atoms, probs } => Some((atoms, probs)),
            _ => None,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.dist, NoiseDistribution::Gaussian { .. })
    }

    /// Second-moment matrix `E[z z^T]` (the covariance, since the noise has mean zero
    /// in the Gaussian case; for finite noise the raw second moments).
    pub fn second_moment(&self) -> DMatrix<f64> {
        match &self.dist {
            NoiseDistribution::Gaussian { covariance, .. } => covariance.clone(),
            NoiseDistribution::FiniteDiscrete { atoms, probs } => {
                let mut m = DMatrix::zeros(self.dim, self.dim);
                for (a, p) in atoms.iter().zip(probs) {
                    m += *p * a * a.transpose();
                }
                m
            }
        }
    }

    /// Raw moment `E[z_k^r]` of one component, computed analytically.
    pub fn raw_moment(&self, component: usize, r: u32) -> f64 {
        match &self.dist {
            NoiseDistribution::Gaussian { covariance, .. } => {
                if r % 2 == 1 {
                    return 0.0;
                }
                let var = covariance[(component, component)];
                // (r - 1)!! * sigma^r
                let double_fact: f64 = (1..r).step_by(2).map(|k| k as f64).product();
                double_fact * var.powi(r as i32 / 2)
            }
            NoiseDistribution::FiniteDiscrete { atoms, probs } => {
                atoms.iter().zip(probs).map(|(a, p)| p * a[component].powi(r as i32)).sum()
            }
        }
    }

    /// Draws one noise vector. Normal variates use the inverse-CDF transform.
    pub fn sample<R: RngCore>(&self, rng: &mut R) -> DVector<f64> {
        match &self.dist {
            NoiseDistribution::Gaussian { factor, .. } => {
                let xi = DVector::from_fn(self.dim, |_, _| standard_normal(rng));
                factor * xi
            }
            NoiseDistribution::FiniteDiscrete { atoms, probs } => {
                let u = open_unit(rng);
                let mut acc = 0.0;
                for (a, p) in atoms.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return a.clone();
                    }
                }
                atoms[atoms.len() - 1].clone()
            }
        }
    }
}

/// Uniform variate in the open interval (0, 1) built from the top 53 bits.
pub fn open_unit<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal variate via the inverse normal CDF.
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    inverse_normal_cdf(open_unit(rng))
}

pub fn inverse_normal_cdf(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p)
}

/// Disjoint random substreams. Fitting reuses the primal paths; feasibility
/// checks and upper bounds draw from their own streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    Primal,
    Feasibility,
    Dual,
    Custom(u64),
}

impl SeedStream {
    fn tag(self) -> u64 {
        match self {
            SeedStream::Primal => 0,
            SeedStream::Feasibility => 1,
            SeedStream::Dual => 2,
            SeedStream::Custom(t) => 0x1000 + t,
        }
    }
}

/// Counter-based generator for path `index`: a pure function of `(seed, stream, index)`.
pub fn path_rng(seed: u64, stream: SeedStream, index: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.tag().to_le_bytes());
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Draws `count` noise sequences of length `horizon`, one generator per path.
pub fn sample_noise_paths(
    noise: &NoiseModel,
    horizon: usize,
    count: usize,
    seed: u64,
    stream: SeedStream,
) -> Vec<Vec<DVector<f64>>> {
    (0..count)
        .into_par_iter()
        .map(|j| {
            let mut rng = path_rng(seed, stream, j as u64);
            (0..horizon).map(|_| noise.sample(&mut rng)).collect()
        })
        .collect()
}

/// Every noise sequence of length `horizon` with its probability.
pub fn enumerate_noise_paths(noise: &NoiseModel, horizon: usize) -> Result<Vec<(Vec<DVector<f64>>, f64)>> {
    let (atoms, probs) = noise
        .atoms()
        .ok_or_else(|| Error::invalid("exact enumeration needs finite-discrete noise"))?;
    let total = (atoms.len() as f64).powi(horizon as i32);
    if total > 1e7 {
        return Err(Error::invalid(format!("{total} noise sequences is too many to enumerate")));
    }
    let mut out = vec![(Vec::with_capacity(horizon), 1.0)];
    for _ in 0..horizon {
        out = out
            .into_iter()
            .flat_map(|(seq, p)| {
                atoms.iter().zip(probs).map(move |(a, q)| {
                    let mut s = seq.clone();
                    s.push(a.clone());
                    (s, p * q)
                })
            })
            .collect();
    }
    Ok(out)
}

/// A finite-horizon MDP `x_{n+1} = f(x_n, a_n, z_{n+1})` with rewards to maximize.
pub trait MdpModel: Sync {
    /// Number of decision periods `N >= 1`.
    fn horizon(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn noise(&self) -> &NoiseModel;
    fn initial_state(&self) -> DVector<f64>;
    fn transition(&self, n: usize, x: DVectorView<f64>, a: DVectorView<f64>, z: DVectorView<f64>) -> DVector<f64>;
    fn reward(&self, n: usize, x: DVectorView<f64>, a: DVectorView<f64>) -> f64;
    fn terminal_reward(&self, x: DVectorView<f64>) -> f64;

    /// Checks the admissible-action set at period `n`; the error names the
    /// violated constraint.
    fn check_action(&self, _n: usize, _x: DVectorView<f64>, _a: DVectorView<f64>) -> std::result::Result<(), String> {
        Ok(())
    }
}

/// A sequence of decision rules `alpha_n(x_n)`.
pub trait Policy: Sync {
    fn act(&self, n: usize, x: DVectorView<f64>) -> DVector<f64>;

    /// True when `act` at period `n` uses nothing beyond period-`n` inputs.
    fn is_non_anticipative(&self) -> bool {
        true
    }
}

/// Policy backed by a closure.
pub struct FnPolicy<F>(F);

impl<F> FnPolicy<F>
where
    F: Fn(usize, DVectorView<f64>) -> DVector<f64> + Sync,
{
    pub fn new(f: F) -> Self {
        Self(f)
    }
}

impl<F> Policy for FnPolicy<F>
where
    F: Fn(usize, DVectorView<f64>) -> DVector<f64> + Sync,
{
    fn act(&self, n: usize, x: DVectorView<f64>) -> DVector<f64> {
        (self.0)(n, x)
    }
}

/// Open-loop policy that plays a fixed action sequence.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy(pub Vec<DVector<f64>>);

impl Policy for ScriptedPolicy {
    fn act(&self, n: usize, _x: DVectorView<f64>) -> DVector<f64> {
        self.0[n].clone()
    }
}

/// States, actions and noises of one path, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    horizon: usize,
    state_dim: usize,
    action_dim: usize,
    noise_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    noises: Vec<f64>,
}

impl Trajectory {
    pub fn new(states: &[DVector<f64>], actions: &[DVector<f64>], noises: &[DVector<f64>]) -> Result<Self> {
        let horizon = actions.len();
        if states.len() != horizon + 1 || noises.len() != horizon {
            return Err(Error::invalid(format!(
                "trajectory needs N+1 states and N noises for N = {horizon} actions, got {} and {}",
                states.len(),
                noises.len()
            )));
        }
        let state_dim = states[0].len();
        let action_dim = actions.first().map_or(0, |a| a.len());
        let noise_dim = noises.first().map_or(0, |z| z.len());
        let flat = |v: &[DVector<f64>], dim: usize| -> Result<Vec<f64>> {
            if v.iter().any(|x| x.len() != dim) {
                return Err(Error::invalid("trajectory entries have inconsistent dimensions"));
            }
            Ok(v.iter().flat_map(|x| x.iter().copied()).collect())
        };
        Ok(Self {
            horizon,
            state_dim,
            action_dim,
            noise_dim,
            states: flat(states, state_dim)?,
            actions: flat(actions, action_dim)?,
            noises: flat(noises, noise_dim)?,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// State `x_n`, `n = 0..=N`.
    pub fn state(&self, n: usize) -> DVectorView<'_, f64> {
        let d = self.state_dim;
        DVectorView::from_slice(&self.states[n * d..(n + 1) * d], d)
    }

    /// Action `a_n`, `n = 0..N`.
    pub fn action(&self, n: usize) -> DVectorView<'_, f64> {
        let d = self.action_dim;
        DVectorView::from_slice(&self.actions[n * d..(n + 1) * d], d)
    }

    /// Noise `z_{n+1}` driving the transition out of period `n`.
    pub fn noise(&self, n: usize) -> DVectorView<'_, f64> {
        let d = self.noise_dim;
        DVectorView::from_slice(&self.noises[n * d..(n + 1) * d], d)
    }
}

/// One simulated path with cached rewards and tail values.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub trajectory: Trajectory,
    /// `r_n(x_n, a_n)` for `n = 0..N`.
    pub rewards: Vec<f64>,
    pub terminal_reward: f64,
    /// `V_n = sum_{k >= n} r_k + r_N` for `n = 0..=N`.
    pub tail_values: Vec<f64>,
}

impl SamplePath {
    pub fn value(&self) -> f64 {
        self.tail_values[0]
    }
}

fn tail_sums(rewards: &[f64], terminal: f64) -> Vec<f64> {
    let mut tail = vec![0.0; rewards.len() + 1];
    tail[rewards.len()] = terminal;
    for n in (0..rewards.len()).rev() {
        tail[n] = rewards[n] + tail[n + 1];
    }
    tail
}

/// Runs `policy` along the given noise sequence, checking admissibility.
pub fn rollout<M: MdpModel + ?Sized, P: Policy + ?Sized>(
    model: &M,
    policy: &P,
    noises: &[DVector<f64>],
) -> Result<SamplePath> {
    let horizon = model.horizon();
    if noises.len() != horizon {
        return Err(Error::invalid(format!("expected {horizon} noises, got {}", noises.len())));
    }
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    states.push(model.initial_state());
    for n in 0..horizon {
        let x = &states[n];
        let a = policy.act(n, x.as_view());
        if a.len() != model.action_dim() {
            return Err(Error::InadmissibleAction {
                period: n,
                constraint: format!("action has dimension {}, expected {}", a.len(), model.action_dim()),
            });
        }
        model
            .check_action(n, x.as_view(), a.as_view())
            .map_err(|constraint| Error::InadmissibleAction { period: n, constraint })?;
        rewards.push(model.reward(n, x.as_view(), a.as_view()));
        let next = model.transition(n, x.as_view(), a.as_view(), noises[n].as_view());
        actions.push(a);
        states.push(next);
    }
    let terminal_reward = model.terminal_reward(states[horizon].as_view());
    let tail_values = tail_sums(&rewards, terminal_reward);
    Ok(SamplePath { trajectory: Trajectory::new(&states, &actions, noises)?, rewards, terminal_reward, tail_values })
}

/// Simulates `count` paths from the primal stream.
pub fn simulate_paths<M: MdpModel + ?Sized, P: Policy + ?Sized>(
    model: &M,
    policy: &P,
    count: usize,
    seed: u64,
) -> Result<Vec<SamplePath>> {
    simulate_paths_in(model, policy, count, seed, SeedStream::Primal)
}

/// Simulates `count` paths; path `j` depends only on `(seed, stream, j)`.
pub fn simulate_paths_in<M: MdpModel + ?Sized, P: Policy + ?Sized>(
    model: &M,
    policy: &P,
    count: usize,
    seed: u64,
    stream: SeedStream,
) -> Result<Vec<SamplePath>> {
    if count == 0 {
        return Err(Error::invalid("path count must be at least 1"));
    }
    let horizon = model.horizon();
    (0..count)
        .into_par_iter()
        .map(|j| {
            let mut rng = path_rng(seed, stream, j as u64);
            let noises: Vec<_> = (0..horizon).map(|_| model.noise().sample(&mut rng)).collect();
            rollout(model, policy, &noises)
        })
        .collect()
}

/// Recomputes the tail values `V_0..V_N` of a path from the model rewards.
pub fn pathwise_values<M: MdpModel + ?Sized>(path: &Trajectory, model: &M) -> Vec<f64> {
    let n_periods = path.horizon();
    let rewards: Vec<f64> = (0..n_periods).map(|n| model.reward(n, path.state(n), path.action(n))).collect();
    tail_sums(&rewards, model.terminal_reward(path.state(n_periods)))
}

/// Sample mean with a normal-approximation confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub half_width: f64,
    pub count: usize,
    /// Set when the half-width is zero because all samples coincide or there is one sample.
    pub degenerate: bool,
}

impl BoundEstimate {
    pub fn from_samples(samples: &[f64], ci_multiplier: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("cannot estimate a bound from zero samples"));
        }
        let count = samples.len();
        let mean = neumaier_sum(samples.iter().copied()) / count as f64;
        if count == 1 {
            return Ok(Self { mean, std_error: 0.0, half_width: 0.0, count, degenerate: true });
        }
        let ss = neumaier_sum(samples.iter().map(|&v| (v - mean) * (v - mean)));
        let std_dev = (ss / (count - 1) as f64).sqrt();
        let std_error = std_dev / (count as f64).sqrt();
        let degenerate = samples.iter().all(|&v| v == samples[0]);
        let (std_error, half_width) = if degenerate { (0.0, 0.0) } else { (std_error, ci_multiplier * std_error) };
        Ok(Self { mean, std_error, half_width, count, degenerate })
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }
}

/// Compensated summation in the given order.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn estimate_lower_bound(paths: &[SamplePath]) -> Result<BoundEstimate> {
    estimate_lower_bound_with(paths, CI_95)
}

pub fn estimate_lower_bound_with(paths: &[SamplePath], ci_multiplier: f64) -> Result<BoundEstimate> {
    if paths.is_empty() {
        return Err(Error::invalid("lower bound needs at least one path"));
    }
    let values: Vec<f64> = paths.iter().map(SamplePath::value).collect();
    BoundEstimate::from_samples(&values, ci_multiplier)
}

/// An MDP with finitely many admissible actions in every state.
pub trait FiniteActionModel: MdpModel {
    fn actions(&self, n: usize, x: DVectorView<f64>) -> Vec<DVector<f64>>;
}

/// Exact optimal value `V_n(x)` and an optimal action by backward recursion over
/// every action and noise atom. Exponential in the horizon; for small models only.
pub fn optimal_by_enumeration<M: FiniteActionModel + ?Sized>(
    model: &M,
    n: usize,
    x: DVectorView<f64>,
) -> Result<(f64, Option<DVector<f64>>)> {
    if n == model.horizon() {
        return Ok((model.terminal_reward(x), None));
    }
    let (atoms, probs) = model
        .noise()
        .atoms()
        .ok_or_else(|| Error::invalid("enumeration needs finite-discrete noise"))?;
    let mut best: Option<(f64, DVector<f64>)> = None;
    for a in model.actions(n, x) {
        let mut q = model.reward(n, x, a.as_view());
        for (z, p) in atoms.iter().zip(probs) {
            let next = model.transition(n, x, a.as_view(), z.as_view());
            q += p * optimal_by_enumeration(model, n + 1, next.as_view())?.0;
        }
        if best.as_ref().is_none_or(|(v, _)| q > *v) {
            best = Some((q, a));
        }
    }
    let (v, a) = best.ok_or_else(|| Error::invalid(format!("no admissible action at period {n}")))?;
    Ok((v, Some(a)))
}
