//! Zero-mean function bases of the noise used to expand dual penalties.
//!
//! A penalty is `sum_n sum_i beta_{n,i}(x_n, a_n) b_i(z_{n+1})` with every
//! `b_i` centred, so the penalty has zero conditional mean whatever the
//! coordinates are. Coordinates are conditional expectations
//! `E[V_{n+1} h_i(z_{n+1}) | x_n, a_n]`, where the response weight `h_i`
//! equals `b_i` for orthonormal families and is the dual function `l_r` for
//! centred monomials.
//!
//! Multivariate noise is handled componentwise: basis index `i` addresses a
//! pair (component, order) and never mixes components.

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::Serialize;

use crate::mdp::{enumerate_noise_paths, path_rng, NoiseModel, SeedStream};
use crate::{Error, Result};

/// Highest Hermite order evaluated; beyond it `1/sqrt(n!)` scaling loses accuracy.
pub const MAX_HERMITE_ORDER: u32 = 16;

/// Centred monomial `z^r - E[z^r]`; `moments[s - 1] = E[z^s]`.
pub fn taylor_basis_eval(r: u32, z: f64, moments: &[f64]) -> Result<f64> {
    if r == 0 || r as usize > moments.len() {
        return Err(Error::invalid(format!("monomial order {r} outside 1..={}", moments.len())));
    }
    Ok(z.powi(r as i32) - moments[r as usize - 1])
}

/// Normalised probabilists' Hermite polynomial `He_i(z) / sqrt(i!)`, `i >= 1`.
pub fn hermite_eval(i: u32, z: f64) -> Result<f64> {
    if i == 0 {
        return Err(Error::invalid("Hermite index 0 is the constant and is not a penalty basis function"));
    }
    if i > MAX_HERMITE_ORDER {
        return Err(Error::invalid(format!("Hermite index {i} exceeds {MAX_HERMITE_ORDER}")));
    }
    Ok(hermite_normalized(i, z))
}

fn hermite_normalized(i: u32, z: f64) -> f64 {
    // Normalised recurrence: e_{k+1} = (z e_k - sqrt(k) e_{k-1}) / sqrt(k+1).
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..i {
        let next = (z * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Raw indicator `g_i(y) = 1{y = y_i} / sqrt(rho_i)`.
pub fn indicator_eval(i: usize, y: DVectorView<f64>, atoms: &[DVector<f64>], probs: &[f64]) -> Result<f64> {
    if i >= atoms.len() || atoms.len() != probs.len() {
        return Err(Error::invalid(format!("atom index {i} outside 0..{}", atoms.len())));
    }
    let hit = atoms
        .iter()
        .position(|a| same_point(a, y))
        .ok_or_else(|| Error::invalid(format!("value {:?} is not an atom of the noise", y.as_slice())))?;
    Ok(if hit == i { 1.0 / probs[i].sqrt() } else { 0.0 })
}

fn same_point(a: &DVector<f64>, z: DVectorView<f64>) -> bool {
    a.len() == z.len() && a.iter().zip(z.iter()).all(|(x, y)| x == y)
}

/// Per-component inverses of `Cov(z, z^2, ..., z^R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateWeights {
    order: u32,
    matrices: Vec<DMatrix<f64>>,
    /// `moments[k][s - 1] = E[z_k^s]` for `s = 1..=2R`.
    moments: Vec<Vec<f64>>,
}

impl CoordinateWeights {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn matrix(&self, component: usize) -> &DMatrix<f64> {
        &self.matrices[component]
    }

    pub fn moments(&self, component: usize) -> &[f64] {
        &self.moments[component]
    }

    /// Dual weight function `l_r(z) = sum_s W[r, s] (z^s - E z^s)` for one component.
    pub fn weight_function(&self, component: usize, r: u32, z: f64) -> f64 {
        let w = &self.matrices[component];
        let m = &self.moments[component];
        let mut acc = 0.0;
        let mut pow = 1.0;
        for s in 0..self.order as usize {
            pow *= z;
            acc += w[(r as usize - 1, s)] * (pow - m[s]);
        }
        acc
    }
}

/// Inverts the monomial covariance of every noise component. A singular
/// covariance is reported with the first monomial that is an affine function
/// of the lower ones.
pub fn coordinate_weights(noise: &NoiseModel, order: u32) -> Result<CoordinateWeights> {
    if order == 0 {
        return Err(Error::invalid("monomial order must be at least 1"));
    }
    let r_max = order as usize;
    let mut matrices = Vec::with_capacity(noise.dim());
    let mut moments = Vec::with_capacity(noise.dim());
    for k in 0..noise.dim() {
        let m: Vec<f64> = (1..=2 * order).map(|s| noise.raw_moment(k, s)).collect();
        let cov = DMatrix::from_fn(r_max, r_max, |r, s| m[r + s + 1] - m[r] * m[s]);
        // Cholesky by hand so the failing pivot names its monomial.
        let mut l = DMatrix::<f64>::zeros(r_max, r_max);
        for j in 0..r_max {
            let mut d = cov[(j, j)];
            for p in 0..j {
                d -= l[(j, p)] * l[(j, p)];
            }
            if !(d > 1e-10 * cov[(j, j)].abs().max(f64::MIN_POSITIVE)) || cov[(j, j)] <= 0.0 {
                return Err(Error::SingularMoments { component: k, monomial: format!("z^{}", j + 1) });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..r_max {
                let mut v = cov[(i, j)];
                for p in 0..j {
                    v -= l[(i, p)] * l[(j, p)];
                }
                l[(i, j)] = v / d;
            }
        }
        let chol = nalgebra::Cholesky::new(cov.clone()).ok_or_else(|| Error::SingularMoments {
            component: k,
            monomial: format!("z^{}", order),
        })?;
        let w = chol.inverse();
        matrices.push((&w + w.transpose()) * 0.5);
        moments.push(m);
    }
    Ok(CoordinateWeights { order, matrices, moments })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Taylor,
    Hermite,
    Indicator,
}

#[derive(Debug, Clone, PartialEq)]
enum BasisData {
    Taylor(CoordinateWeights),
    Hermite { std_devs: Vec<f64> },
    Indicator { atoms: Vec<DVector<f64>>, probs: Vec<f64> },
}

/// A concrete zero-mean basis `b_0, ..., b_{K-1}` for one noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    order: u32,
    noise_dim: usize,
    data: BasisData,
}

impl BasisSpec {
    /// Centred monomials of orders `1..=order` per component.
    pub fn taylor(noise: &NoiseModel, order: u32) -> Result<Self> {
        Ok(Self { order, noise_dim: noise.dim(), data: BasisData::Taylor(coordinate_weights(noise, order)?) })
    }

    /// Normalised Hermite polynomials of orders `1..=order` in each
    /// standardised component. Needs Gaussian noise with diagonal covariance.
    pub fn hermite(noise: &NoiseModel, order: u32) -> Result<Self> {
        if order == 0 || order > MAX_HERMITE_ORDER {
            return Err(Error::invalid(format!("Hermite order must be in 1..={MAX_HERMITE_ORDER}")));
        }
        let cov = match noise.distribution() {
            crate::mdp::NoiseDistribution::Gaussian { covariance, .. } => covariance,
            _ => return Err(Error::invalid("Hermite basis needs Gaussian noise")),
        };
        let d = cov.nrows();
        for i in 0..d {
            for j in 0..d {
                if i != j && cov[(i, j)] != 0.0 {
                    return Err(Error::invalid("Hermite basis needs a diagonal noise covariance"));
                }
            }
            if !(cov[(i, i)] > 0.0) {
                return Err(Error::invalid(format!("noise component {i} has zero variance")));
            }
        }
        let std_devs = (0..d).map(|i| cov[(i, i)].sqrt()).collect();
        Ok(Self { order, noise_dim: d, data: BasisData::Hermite { std_devs } })
    }

    /// Centred indicators of every atom of a finite noise.
    pub fn indicator(noise: &NoiseModel) -> Result<Self> {
        let (atoms, probs) = noise.atoms().ok_or_else(|| Error::invalid("indicator basis needs finite-discrete noise"))?;
        Ok(Self {
            order: atoms.len() as u32,
            noise_dim: noise.dim(),
            data: BasisData::Indicator { atoms: atoms.to_vec(), probs: probs.to_vec() },
        })
    }

    pub fn kind(&self) -> BasisKind {
        match self.data {
            BasisData::Taylor(_) => BasisKind::Taylor,
            BasisData::Hermite { .. } => BasisKind::Hermite,
            BasisData::Indicator { .. } => BasisKind::Indicator,
        }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn len(&self) -> usize {
        match &self.data {
            BasisData::Indicator { atoms, .. } => atoms.len(),
            _ => self.noise_dim * self.order as usize,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(component, order)` addressed by index `i` (polynomial bases only).
    pub fn component_order(&self, i: usize) -> (usize, u32) {
        let r = self.order as usize;
        (i / r, (i % r) as u32 + 1)
    }

    /// Index of `(component, order)` for polynomial bases.
    pub fn index_of(&self, component: usize, order: u32) -> usize {
        component * self.order as usize + order as usize - 1
    }

    pub fn weights(&self) -> Option<&CoordinateWeights> {
        match &self.data {
            BasisData::Taylor(w) => Some(w),
            _ => None,
        }
    }

    /// Short label such as `z1^2`, `He2(z1)` or `1{y=y0}`.
    pub fn label(&self, i: usize) -> String {
        match &self.data {
            BasisData::Taylor(_) => {
                let (k, r) = self.component_order(i);
                format!("z{}^{}", k + 1, r)
            }
            BasisData::Hermite { .. } => {
                let (k, r) = self.component_order(i);
                format!("He{}(z{})", r, k + 1)
            }
            BasisData::Indicator { .. } => format!("1{{y=y{i}}}"),
        }
    }

    /// Basis function `b_i(z)`; zero mean under the noise.
    pub fn eval(&self, i: usize, z: DVectorView<f64>) -> f64 {
        match &self.data {
            BasisData::Taylor(w) => {
                let (k, r) = self.component_order(i);
                z[k].powi(r as i32) - w.moments[k][r as usize - 1]
            }
            BasisData::Hermite { std_devs } => {
                let (k, r) = self.component_order(i);
                hermite_normalized(r, z[k] / std_devs[k])
            }
            BasisData::Indicator { atoms, probs } => {
                let g = if same_point(&atoms[i], z) { 1.0 / probs[i].sqrt() } else { 0.0 };
                g - probs[i].sqrt()
            }
        }
    }

    /// Response weight `h_i(z)` such that the coordinate of `b_i` in
    /// `E[V | .]`'s expansion is `E[V h_i(z) | .]`.
    pub fn response_weight(&self, i: usize, z: DVectorView<f64>) -> f64 {
        match &self.data {
            BasisData::Taylor(w) => {
                let (k, r) = self.component_order(i);
                w.weight_function(k, r, z[k])
            }
            BasisData::Hermite { .. } => self.eval(i, z),
            // Uncentred indicator: E[V g_i] = sqrt(rho_i) E[V | z = y_i], the
            // exact coordinate of the centred b_i.
            BasisData::Indicator { atoms, probs } => {
                if same_point(&atoms[i], z) {
                    1.0 / probs[i].sqrt()
                } else {
                    0.0
                }
            }
        }
    }

    /// All `b_i(z)` at once.
    pub fn eval_all(&self, z: DVectorView<f64>) -> Vec<f64> {
        (0..self.len()).map(|i| self.eval(i, z)).collect()
    }
}

/// Outcome of a zero-mean test on a family of functions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroMeanReport {
    pub means: Vec<f64>,
    /// Standard errors of the means; zero when computed by enumeration.
    pub std_errors: Vec<f64>,
    pub exact: bool,
    pub pass: bool,
}

/// Tests `E[f(z)] = 0` for each function: exactly by enumeration for finite
/// noise (`|mean| <= 1e-12`), otherwise by Monte Carlo (`|mean| <= 4 se`).
pub fn zero_mean_check(
    funcs: &[&dyn Fn(DVectorView<f64>) -> f64],
    noise: &NoiseModel,
    draws: usize,
    seed: u64,
) -> Result<ZeroMeanReport> {
    if let Some((atoms, probs)) = noise.atoms() {
        let means: Vec<f64> = funcs
            .iter()
            .map(|f| atoms.iter().zip(probs).map(|(a, p)| p * f(a.as_view())).sum())
            .collect();
        let pass = means.iter().all(|m| m.abs() <= 1e-12);
        return Ok(ZeroMeanReport { std_errors: vec![0.0; means.len()], means, exact: true, pass });
    }
    if draws < 1000 {
        return Err(Error::invalid("Monte Carlo zero-mean check needs at least 1000 draws"));
    }
    let mut rng = path_rng(seed, SeedStream::Feasibility, 0);
    let mut sums = vec![0.0; funcs.len()];
    let mut sq = vec![0.0; funcs.len()];
    for _ in 0..draws {
        let z = noise.sample(&mut rng);
        for (j, f) in funcs.iter().enumerate() {
            let v = f(z.as_view());
            sums[j] += v;
            sq[j] += v * v;
        }
    }
    let n = draws as f64;
    let means: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let std_errors: Vec<f64> = means
        .iter()
        .zip(&sq)
        .map(|(m, s)| (((s - n * m * m) / (n - 1.0)).max(0.0) / n).sqrt())
        .collect();
    let pass = means.iter().zip(&std_errors).all(|(m, se)| m.abs() <= 4.0 * se);
    Ok(ZeroMeanReport { means, std_errors, exact: false, pass })
}

pub fn basis_zero_mean_check(spec: &BasisSpec, noise: &NoiseModel, draws: usize, seed: u64) -> Result<ZeroMeanReport> {
    if spec.noise_dim() != noise.dim() {
        return Err(Error::invalid("basis and noise dimensions differ"));
    }
    let closures: Vec<Box<dyn Fn(DVectorView<f64>) -> f64 + '_>> =
        (0..spec.len()).map(|i| Box::new(move |z: DVectorView<f64>| spec.eval(i, z)) as Box<_>).collect();
    let refs: Vec<&dyn Fn(DVectorView<f64>) -> f64> = closures.iter().map(|b| b.as_ref()).collect();
    zero_mean_check(&refs, noise, draws, seed)
}

/// `points`-node Gauss-Hermite rule for the standard normal density
/// (Golub-Welsch); weights sum to one.
pub fn gauss_hermite(points: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(points, points, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..points)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Exact expectation of `f` over one step of finite noise.
pub fn finite_expectation(noise: &NoiseModel, f: impl Fn(DVectorView<f64>) -> f64) -> Result<f64> {
    Ok(enumerate_noise_paths(noise, 1)?.iter().map(|(z, p)| p * f(z[0].as_view())).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal() -> NoiseModel {
        NoiseModel::standard_normal(1)
    }

    fn v(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn taylor_examples() {
        let m = [0.0, 1.0, 0.0];
        assert_eq!(taylor_basis_eval(1, 0.5, &m).unwrap(), 0.5);
        assert_eq!(taylor_basis_eval(2, 1.0, &m).unwrap(), 0.0);
        assert_eq!(taylor_basis_eval(3, 2.0, &m).unwrap(), 8.0);
        assert!(taylor_basis_eval(0, 1.0, &m).is_err());
        assert!(taylor_basis_eval(4, 1.0, &m).is_err());
    }

    #[test]
    fn weights_for_standard_normal() {
        let w = coordinate_weights(&normal(), 2).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5]));
        assert!((w.matrix(0) - expected).amax() <= 1e-12);
        // l_2(z) = (z^2 - 1) / 2
        assert!((w.weight_function(0, 2, 3.0) - 4.0).abs() < 1e-12);
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        assert!((w.matrix(0) * cov - DMatrix::identity(2, 2)).amax() <= 1e-12);
    }

    #[test]
    fn weights_for_two_point_noise() {
        let pm = NoiseModel::uniform_atoms(&[-1.0, 1.0]).unwrap();
        let w = coordinate_weights(&pm, 1).unwrap();
        assert!((w.matrix(0)[(0, 0)] - 1.0).abs() < 1e-15);
        match coordinate_weights(&pm, 2) {
            Err(Error::SingularMoments { component, monomial }) => {
                assert_eq!(component, 0);
                assert_eq!(monomial, "z^2");
            }
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite_eval(2, 1.0).unwrap(), 0.0);
        assert_eq!(hermite_eval(1, -0.7).unwrap(), -0.7);
        assert!(hermite_eval(3, 3f64.sqrt()).unwrap().abs() < 1e-15);
        assert!(hermite_eval(0, 1.0).is_err());
        let z: f64 = 1.3;
        assert!((hermite_eval(3, z).unwrap() - (z.powi(3) - 3.0 * z) / 6f64.sqrt()).abs() < 1e-14);
        assert!((hermite_eval(4, z).unwrap() - (z.powi(4) - 6.0 * z * z + 3.0) / 24f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn indicator_examples() {
        let two = [v(-1.0), v(1.0)];
        assert!((indicator_eval(0, v(-1.0).as_view(), &two, &[0.5, 0.5]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(indicator_eval(0, v(1.0).as_view(), &two, &[0.5, 0.5]).unwrap(), 0.0);
        let three = [v(0.0), v(1.0), v(2.0)];
        assert_eq!(indicator_eval(2, v(2.0).as_view(), &three, &[0.5, 0.25, 0.25]).unwrap(), 2.0);
        assert!(indicator_eval(0, v(7.0).as_view(), &two, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn hermite_orthonormal_under_quadrature() {
        let (nodes, weights) = gauss_hermite(64);
        assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        for i in 1..=4 {
            for j in 1..=4 {
                let ip: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&z, w)| w * hermite_normalized(i, z) * hermite_normalized(j, z))
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((ip - target).abs() <= 1e-8, "<e{i}, e{j}> = {ip}");
            }
        }
    }

    #[test]
    fn taylor_and_hermite_span_agree() {
        let noise = normal();
        let taylor = BasisSpec::taylor(&noise, 2).unwrap();
        let hermite = BasisSpec::hermite(&noise, 2).unwrap();
        for k in -40..=40 {
            let z = v(k as f64 * 0.1);
            assert!((taylor.eval(0, z.as_view()) - hermite.eval(0, z.as_view())).abs() <= 1e-12);
            assert!((taylor.eval(1, z.as_view()) - 2f64.sqrt() * hermite.eval(1, z.as_view())).abs() <= 1e-12);
        }
    }

    #[test]
    fn bases_have_zero_mean_under_quadrature() {
        let noise = NoiseModel::gaussian(DMatrix::from_diagonal(&DVector::from_vec(vec![0.25]))).unwrap();
        let (nodes, weights) = gauss_hermite(64);
        for spec in [BasisSpec::taylor(&noise, 3).unwrap(), BasisSpec::hermite(&noise, 4).unwrap()] {
            for i in 0..spec.len() {
                let mean: f64 = nodes.iter().zip(&weights).map(|(&x, w)| w * spec.eval(i, v(0.5 * x).as_view())).sum();
                assert!(mean.abs() <= 1e-8, "{} has mean {mean}", spec.label(i));
            }
        }
    }

    #[test]
    fn zero_mean_checks() {
        let noise = normal();
        let taylor = BasisSpec::taylor(&noise, 2).unwrap();
        assert!(basis_zero_mean_check(&taylor, &noise, 100_000, 5).unwrap().pass);

        let finite = NoiseModel::finite_discrete(vec![v(-1.0), v(0.5), v(3.0)], vec![0.2, 0.5, 0.3]).unwrap();
        let ind = BasisSpec::indicator(&finite).unwrap();
        let rep = basis_zero_mean_check(&ind, &finite, 0, 0).unwrap();
        assert!(rep.exact && rep.pass);

        let square = |z: DVectorView<f64>| z[0] * z[0];
        let rep = zero_mean_check(&[&square], &noise, 100_000, 5).unwrap();
        assert!(!rep.pass);
        assert!((rep.means[0] - 1.0).abs() < 0.05);
        assert!(zero_mean_check(&[&square], &noise, 10, 5).is_err());
    }

    #[test]
    fn indicator_response_recovers_conditional_mean() {
        // V(z) = z^3 on three atoms: E[V] + sum_i E[V h_i] b_i(z) must reproduce V.
        let noise = NoiseModel::finite_discrete(vec![v(-1.0), v(0.5), v(3.0)], vec![0.2, 0.5, 0.3]).unwrap();
        let spec = BasisSpec::indicator(&noise).unwrap();
        let f = |z: DVectorView<f64>| z[0].powi(3);
        let mean = finite_expectation(&noise, f).unwrap();
        let coords: Vec<f64> = (0..spec.len())
            .map(|i| finite_expectation(&noise, |z| f(z) * spec.response_weight(i, z)).unwrap())
            .collect();
        for a in noise.atoms().unwrap().0 {
            let rebuilt: f64 = mean + (0..spec.len()).map(|i| coords[i] * spec.eval(i, a.as_view())).sum::<f64>();
            assert!((rebuilt - f(a.as_view())).abs() < 1e-12);
        }
    }

    #[test]
    fn multivariate_indexing() {
        let noise = NoiseModel::standard_normal(3);
        let spec = BasisSpec::taylor(&noise, 2).unwrap();
        assert_eq!(spec.len(), 6);
        assert_eq!(spec.component_order(3), (1, 2));
        assert_eq!(spec.index_of(2, 1), 4);
        assert_eq!(spec.label(3), "z2^2");
        let z = DVector::from_vec(vec![0.0, 2.0, 0.0]);
        assert_eq!(spec.eval(3, z.as_view()), 3.0);
        let corr = NoiseModel::gaussian(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
        assert!(BasisSpec::hermite(&corr, 2).is_err());
    }

    proptest::proptest! {
        #[test]
        fn finite_noise_weights_invert_covariance(
            atoms in proptest::collection::vec(-3.0f64..3.0, 4),
            raw in proptest::collection::vec(0.05f64..1.0, 4),
        ) {
            let mut uniq = atoms.clone();
            uniq.sort_by(f64::total_cmp);
            uniq.dedup_by(|a, b| (*a - *b).abs() < 0.05);
            proptest::prop_assume!(uniq.len() == 4);
            let total: f64 = raw.iter().sum();
            let mut probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
            let s: f64 = probs[..3].iter().sum();
            probs[3] = 1.0 - s;
            let noise = NoiseModel::finite_discrete(uniq.iter().map(|&a| v(a)).collect(), probs).unwrap();
            let w = coordinate_weights(&noise, 2).unwrap();
            let m = w.moments(0);
            let cov = DMatrix::from_fn(2, 2, |r, s| m[r + s + 1] - m[r] * m[s]);
            proptest::prop_assert!((w.matrix(0) * cov - DMatrix::identity(2, 2)).amax() < 1e-6);
            let spec = BasisSpec::taylor(&noise, 2).unwrap();
            proptest::prop_assert!(basis_zero_mean_check(&spec, &noise, 0, 0).unwrap().pass);
        }
    }
}
