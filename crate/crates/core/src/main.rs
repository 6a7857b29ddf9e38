use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use abstain::experiment::table::Table;
use abstain::experiment::{run_bench, run_bound_check, run_calib_check, run_synth, ExperimentConfig, Mode};
use abstain::{Error, Result};

/// Classification with a reject option: experiments and numerical checks.
#[derive(Parser)]
#[command(name = "abstain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learning curves on the synthetic Gaussian mixture.
    Synth(Common),
    /// Risk-vs-cost runs on sparse benchmark files.
    Bench(Common),
    /// Rejection calibration of a pairwise loss on a simplex grid.
    CalibCheck(Common),
    /// Randomized check of the excess-risk bounds; exits with 2 on a violation.
    BoundCheck(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV files and the summary.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(common: &Common, mode: Mode) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = cfg.mode {
        if m != mode {
            return Err(Error::Config(format!("config mode {m:?} does not match the subcommand")));
        }
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&common.out).map_err(|e| Error::Io {
        path: common.out.clone(),
        source: e,
    })?;
    Ok(cfg)
}

fn write(out: &Path, name: &str, table: &Table) -> Result<()> {
    table.write(&out.join(name))
}

fn write_summary(out: &Path, name: &str, text: &str) -> Result<()> {
    print!("{text}");
    let path = out.join(name);
    std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Synth(c) => {
            let cfg = load(&c, Mode::Synth)?;
            let rep = run_synth(&cfg)?;
            write(&c.out, "synth.csv", &rep.table())?;
            write(&c.out, "synth_summary.csv", &rep.summary_table())?;
            write_summary(&c.out, "synth.txt", &rep.summary())?;
        }
        Command::Bench(c) => {
            let cfg = load(&c, Mode::Bench)?;
            let rep = run_bench(&cfg)?;
            write(&c.out, "bench.csv", &rep.table())?;
            write(&c.out, "bench_summary.csv", &rep.summary_table())?;
            write_summary(&c.out, "bench.txt", &rep.summary())?;
        }
        Command::CalibCheck(c) => {
            let cfg = load(&c, Mode::CalibCheck)?;
            let rep = run_calib_check(&cfg)?;
            write(&c.out, "calib_extremes.csv", &rep.table())?;
            write(&c.out, "calib_ratios.csv", &rep.ratio_table())?;
            write_summary(&c.out, "calib.txt", &rep.summary())?;
        }
        Command::BoundCheck(c) => {
            let cfg = load(&c, Mode::BoundCheck)?;
            let rep = run_bound_check(&cfg)?;
            write(&c.out, "bound.csv", &rep.table())?;
            write_summary(&c.out, "bound.txt", &rep.summary())?;
            if rep.violated() {
                eprintln!("bound violated");
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
