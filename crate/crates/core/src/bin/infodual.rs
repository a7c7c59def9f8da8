//! `infodual run --config <path> --seed <u64> --out <dir> [--threads N] [--penalties zero,t1,t2]`
//!
//! Exit codes: 0 when every cell completed, 2 when some cell failed, 1 on a
//! configuration or I/O error. Progress goes to `<out>/run.log`; stdout
//! carries only the path of the CSV report.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use infodual::experiment::{parse_penalty_list, run_experiment, run_experiment_with_threads, write_csv, write_json, ExperimentConfig};

#[derive(Parser)]
#[command(name = "infodual", version, about = "Dual bounds for the constrained liquidation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment config and write CSV and JSON reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (defaults to the number of cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Comma-separated subset of zero, t1, t2, exact-lqc.
        #[arg(long)]
        penalties: Option<String>,
    },
}

fn init_log(out: &Path) -> std::io::Result<()> {
    let file = File::create(out.join("run.log"))?;
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Pipe(Box::new(file)))
        .init();
    Ok(())
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    log::error!("{msg}");
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let Command::Run { config, seed, out, threads, penalties } = cli.command;

    if let Err(e) = std::fs::create_dir_all(&out) {
        return fail(format!("cannot create {}: {e}", out.display()));
    }
    if let Err(e) = init_log(&out) {
        return fail(format!("cannot open the log in {}: {e}", out.display()));
    }

    let mut cfg = match ExperimentConfig::load(&config) {
        Ok(c) => c,
        Err(e) => return fail(format!("{}: {e}", config.display())),
    };
    cfg.run.seed = seed;
    if let Some(list) = penalties {
        match parse_penalty_list(&list) {
            Ok(p) => cfg.run.penalties = p,
            Err(e) => return fail(e),
        }
    }
    if let Err(e) = cfg.validate() {
        return fail(e);
    }
    if threads == Some(0) {
        return fail("--threads must be at least 1");
    }
    log::info!("config {} seed {seed}, {} cell(s)", config.display(), cfg.cells().len());

    let result = match threads {
        Some(n) => run_experiment_with_threads(&cfg, n),
        None => run_experiment(&cfg),
    };
    let report = match result {
        Ok(r) => r,
        Err(e) => return fail(e),
    };

    let json_path = out.join(&cfg.output.json);
    if let Err(e) = write_json(&report, &json_path) {
        return fail(format!("{}: {e}", json_path.display()));
    }
    let shown = if report.rows.is_empty() {
        json_path
    } else {
        let csv_path = out.join(&cfg.output.csv);
        if let Err(e) = write_csv(&report.rows, &csv_path) {
            return fail(format!("{}: {e}", csv_path.display()));
        }
        csv_path
    };
    println!("{}", shown.display());
    if report.is_complete() {
        log::info!("all cells completed");
        ExitCode::SUCCESS
    } else {
        log::warn!("{} cell(s) failed", report.failures.len());
        ExitCode::from(2)
    }
}
