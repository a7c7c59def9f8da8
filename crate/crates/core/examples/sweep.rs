//! Runs an experiment config (default: the 16-cell parameter sweep at reduced
//! path counts) and prints the CSV report.
use infodual::experiment::{appendix_sweep, csv_string, run_experiment, ExperimentConfig};

fn main() -> infodual::Result<()> {
    let config = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(path.as_ref())?,
        None => {
            let mut c = ExperimentConfig::default();
            c.sweep = appendix_sweep();
            c.run.lb_paths = 5_000;
            c.run.ub_paths = 20;
            c
        }
    };
    let report = run_experiment(&config)?;
    for f in &report.failures {
        eprintln!("cell {} failed at {}: {}", f.cell, f.field, f.error);
    }
    print!("{}", csv_string(&report.rows)?);
    Ok(())
}
