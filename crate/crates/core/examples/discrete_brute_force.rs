//! A three-period inventory walk with finite noise, solved exactly by
//! enumeration: the optimal value, a myopic policy's value and the
//! perfect-information bound.
use infodual::dual::{exact_upper_bound_by_enumeration, ZeroPenalty};
use infodual::mdp::{optimal_by_enumeration, simulate_paths, estimate_lower_bound, FiniteActionModel, FnPolicy, MdpModel, NoiseModel};
use nalgebra::{DVector, DVectorView};

/// `x' = x + a - z` with demand `z` in {0, 1, 2}; holding and shortage costs.
struct Inventory {
    noise: NoiseModel,
}

impl MdpModel for Inventory {
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
        x + a - z
    }
    fn reward(&self, _n: usize, x: DVectorView<f64>, a: DVectorView<f64>) -> f64 {
        -0.5 * a[0] - 0.1 * x[0].max(0.0) - 2.0 * (-x[0]).max(0.0)
    }
    fn terminal_reward(&self, x: DVectorView<f64>) -> f64 {
        -2.0 * (-x[0]).max(0.0)
    }
}

impl FiniteActionModel for Inventory {
    fn actions(&self, _n: usize, _x: DVectorView<f64>) -> Vec<DVector<f64>> {
        (0..3).map(|a| DVector::from_element(1, a as f64)).collect()
    }
}

fn main() -> infodual::Result<()> {
    let model = Inventory { noise: NoiseModel::finite_discrete(
        [0.0, 1.0, 2.0].iter().map(|&v| DVector::from_element(1, v)).collect(),
        vec![0.3, 0.5, 0.2],
    )? };
    let (v0, a0) = optimal_by_enumeration(&model, 0, model.initial_state().as_view())?;
    let (ub, values) = exact_upper_bound_by_enumeration(&model, &ZeroPenalty)?;
    let myopic = FnPolicy::new(|_, x: DVectorView<f64>| DVector::from_element(1, (1.0 - x[0]).clamp(0.0, 2.0)));
    let lb = estimate_lower_bound(&simulate_paths(&model, &myopic, 50_000, 0)?)?;

    println!("optimal value           {v0:.6} (first order {})", a0.map_or(f64::NAN, |a| a[0]));
    println!("order-up-to-1 policy    {:.4} +/- {:.4}", lb.mean, lb.half_width);
    println!("perfect information     {ub:.6} over {} demand sequences", values.len());
    Ok(())
}
