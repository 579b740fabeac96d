//! `mixrelax`: run simulations, comparisons, ε-sweeps and friction-algebra
//! checks from a TOML experiment file.
//!
//! Exit codes: 0 success, 1 I/O or internal error, 2 invalid configuration,
//! 3 solver failure, 4 slope outside the configured band or failed check.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mixrelax::config::ExperimentConfig;
use mixrelax::output::{self, Header};
use mixrelax::{experiment, Error};

#[derive(Parser)]
#[command(name = "mixrelax", version, about = "Multicomponent Euler-Korteweg relaxation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one system and write snapshots, diagnostics and a report.
    Simulate(Common),
    /// Compare the relaxation system with its reference system.
    Compare(Common),
    /// Compare over the configured eps list and fit the convergence slope.
    Sweep(Common),
    /// Certify the friction algebra and the energy structure.
    Check(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Concurrent runs; defaults to the number of logical cores.
    #[arg(long)]
    jobs: Option<usize>,
}

/// Failure with its exit code.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Validation(_) | Error::Domain(_) | Error::Structural(_) => 2,
            Error::SolverFailure { .. } => 3,
            Error::Io(_) | Error::Precondition(_) | Error::GridMismatch(_) => 1,
        };
        Failure(code, e.to_string())
    }
}

type Runner = fn(&ExperimentConfig, &Header, &Common) -> Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MIXRELAX_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    let (common, run): (&Common, Runner) = match &cmd {
        Command::Simulate(c) => (c, simulate),
        Command::Compare(c) => (c, compare),
        Command::Sweep(c) => (c, sweep),
        Command::Check(c) => (c, check),
    };
    let cfg = ExperimentConfig::load(&common.config)?;
    let header = Header::new(cfg.hash()?);
    std::fs::create_dir_all(&common.out).map_err(|e| Failure(1, format!("{}: {e}", common.out.display())))?;
    run(&cfg, &header, common)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    Ok(output::write_file(&dir.join(name), contents)?)
}

fn simulate(cfg: &ExperimentConfig, header: &Header, c: &Common) -> Result<(), Failure> {
    let sim = experiment::simulate(cfg)?;
    if cfg.output.snapshots {
        for (k, s) in sim.trajectory.snapshots.iter().enumerate() {
            write(&c.out, &output::snapshot_name(k), &output::snapshot_csv(header, s))?;
        }
    }
    if cfg.output.diagnostics {
        write(&c.out, "diagnostics.jsonl", &output::diagnostics_jsonl(header, &sim.trajectory.records)?)?;
    }
    write(&c.out, "report.json", &output::report_json(header, &sim.report)?)?;
    log::info!("{} steps, energy audit excess {:.3e}", sim.report.steps, sim.report.audit.excess);
    Ok(())
}

fn compare(cfg: &ExperimentConfig, header: &Header, c: &Common) -> Result<(), Failure> {
    let cmp = experiment::compare(cfg, cfg.model.eps)?;
    write(&c.out, "chi.csv", &output::chi_csv(header, &cmp.series))?;
    write(&c.out, "compare.json", &output::report_json(header, &cmp)?)?;
    println!("sup_chi {:.16e}", cmp.sup_chi);
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, header: &Header, c: &Common) -> Result<(), Failure> {
    let out = experiment::sweep(cfg, c.jobs)?;
    for (k, run) in out.runs.iter().enumerate() {
        write(&c.out.join(format!("eps_{k:02}")), "chi.csv", &output::chi_csv(header, &run.series))?;
    }
    write(&c.out, "rates.csv", &output::rate_table_csv(header, &out))?;
    write(&c.out, "sweep.json", &output::report_json(header, &out)?)?;
    println!("slope {:.6}", out.result.slope);
    if out.passes {
        Ok(())
    } else {
        let band = out.band.expect("a failing sweep has a band");
        Err(Failure(4, format!("fitted slope {:.4} outside [{}, {}]", out.result.slope, band.min, band.max)))
    }
}

fn check(cfg: &ExperimentConfig, header: &Header, c: &Common) -> Result<(), Failure> {
    let rep = experiment::check(cfg)?;
    write(&c.out, "check.json", &output::report_json(header, &rep)?)?;
    if rep.passes {
        Ok(())
    } else {
        Err(Failure(4, format!("check failed: certificates {}, A4 {}", rep.certificates_pass, rep.a4_pass)))
    }
}
