use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use tvopt::experiment::{
    execute, preset, preset_names, Command, CommandOptions, ExperimentConfig, ExperimentError, Status,
    ERROR_EXIT_CODE,
};
use tvopt::par::Execution;

/// Tracking solvers for time-varying optimization: runs, h-sweeps and
/// theory checks driven by a config file or a bundled preset.
#[derive(Parser)]
#[command(name = "tvopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every solver and write one trace CSV per solver.
    Run(Common),
    /// Run every solver at every grid entry and fit the order in h.
    Sweep(Common),
    /// Run the checks named in the config and report pass/fail.
    Check(Common),
    /// List the bundled presets.
    Presets,
}

#[derive(Args)]
struct Common {
    /// Config file.
    #[arg(long, value_name = "PATH", required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled preset instead of a config file (see `tvopt presets`).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Concurrent runs; 0 uses every core.
    #[arg(long, value_name = "N", default_value_t = 0)]
    jobs: usize,
    /// Exit 0 even when a run diverges.
    #[arg(long)]
    allow_divergence: bool,
    /// Ratings file for `mf_file` problems.
    #[arg(long, value_name = "PATH")]
    ratings: Option<PathBuf>,
    /// Run sequentially even when built with parallel support.
    #[arg(long)]
    sequential: bool,
}

fn load_configs(common: &Common) -> Result<Vec<(String, ExperimentConfig)>, ExperimentError> {
    if let Some(name) = &common.preset {
        let presets = preset(name).ok_or_else(|| {
            ExperimentError::Config(format!("unknown preset `{name}`; available: {}", preset_names().join(", ")))
        })?;
        return presets.iter().map(|p| Ok((p.name.to_string(), p.config()?))).collect();
    }
    let path = common.config.as_ref().expect("clap enforces --config or --preset");
    let text = fs::read_to_string(path)
        .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config = ExperimentConfig::parse(&text)?;
    Ok(vec![(config.name.clone(), config)])
}

fn dispatch(command: Command, common: Common) -> Result<Status, ExperimentError> {
    let configs = load_configs(&common)?;
    let several = configs.len() > 1;
    let mut status = Status::Success;
    let stdout = io::stdout();
    for (name, config) in configs {
        let options = CommandOptions {
            out: if several { common.out.join(&name) } else { common.out.clone() },
            seed: common.seed,
            jobs: common.jobs,
            allow_divergence: common.allow_divergence,
            ratings: common.ratings.clone(),
            execution: if common.sequential { Execution::Sequential } else { Execution::Parallel },
        };
        let mut out = stdout.lock();
        if several {
            let _ = writeln!(out, "== {name}");
        }
        status = status.max(execute(command, config, &options, &mut out)?);
    }
    Ok(status)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => ERROR_EXIT_CODE,
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let (command, common) = match cli.command {
        Cmd::Run(c) => (Command::Run, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
        Cmd::Check(c) => (Command::Check, c),
        Cmd::Presets => {
            for name in preset_names() {
                println!("{name}");
            }
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(command, common) {
        Ok(status) => {
            if status == Status::Diverged {
                eprintln!("error: a run diverged (pass --allow-divergence to accept)");
            } else if status == Status::CheckFailed {
                eprintln!("error: at least one check failed");
            }
            ExitCode::from(status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ERROR_EXIT_CODE as u8)
        }
    }
}
