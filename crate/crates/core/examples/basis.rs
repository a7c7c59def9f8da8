//! Zero-mean penalty bases: values at a few points and a Monte Carlo mean check.
use infodual::basis::{basis_zero_mean_check, BasisSpec};
use infodual::mdp::NoiseModel;
use nalgebra::dvector;

fn main() -> infodual::Result<()> {
    let normal = NoiseModel::standard_normal(1);
    let two_point = NoiseModel::uniform_atoms(&[-1.0, 2.0])?;
    let bases = [
        ("taylor-2 / normal", BasisSpec::taylor(&normal, 2)?, &normal),
        ("hermite-3 / normal", BasisSpec::hermite(&normal, 3)?, &normal),
        ("indicator / two-point", BasisSpec::indicator(&two_point)?, &two_point),
    ];
    for (name, spec, noise) in &bases {
        println!("{name}");
        for z in [-1.0, 0.5, 2.0] {
            let vals: Vec<String> = spec.eval_all(dvector![z].as_view()).iter().map(|v| format!("{v:+.4}")).collect();
            println!("  b(z = {z:+.1}) = [{}]", vals.join(", "));
        }
        let rep = basis_zero_mean_check(spec, noise, 100_000, 1)?;
        let means: Vec<String> = rep.means.iter().map(|m| format!("{m:.1e}")).collect();
        println!("  means [{}]  exact {}  pass {}", means.join(", "), rep.exact, rep.pass);
        if let Some(w) = spec.weights() {
            println!("  coordinate weights {:.4}", w.matrix(0));
        }
    }
    Ok(())
}
