//! Command-line front end: JSON scenario configs, feasibility checks,
//! closed-loop simulation and region sweeps.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pic_core::BuiltinSystem;

use crate::commands::CliError;
use crate::config::ScenarioConfig;

#[derive(Debug, Parser)]
#[command(
    name = "pic",
    version,
    about = "Prescribed-performance tracking control under input constraints"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the feasibility conditions for a config.
    Check { config: PathBuf },
    /// Simulate the closed loop and write trajectory, event and monitor CSVs.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        overrides: SimOverrides,
    },
    /// Sweep initial states and write the feasibility mask.
    Region {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Grid resolution as NXxNY, e.g. 201x201.
        #[arg(long, value_parser = parse_grid)]
        grid: Option<[usize; 2]>,
    },
    /// Print the bundled config of a built-in example.
    DumpDefaults {
        /// pendulum_ex1 or nonlinear_ex2.
        system: BuiltinSystem,
    },
}

#[derive(Debug, Args, Default)]
pub struct SimOverrides {
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub substeps: Option<usize>,
    /// Run even if the design is not certified feasible.
    #[arg(long)]
    pub permissive: bool,
}

impl SimOverrides {
    pub fn apply(&self, config: &mut ScenarioConfig) {
        if let Some(s) = self.step {
            config.sim.step = s;
        }
        if let Some(h) = self.horizon {
            config.sim.horizon = h;
        }
        if let Some(n) = self.substeps {
            config.sim.substeps = n;
        }
        if self.permissive {
            config.sim.permissive = true;
        }
    }
}

fn parse_grid(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NXxNY, got `{s}`"))?;
    let nx = a.trim().parse().map_err(|e| format!("bad NX `{a}`: {e}"))?;
    let ny = b.trim().parse().map_err(|e| format!("bad NY `{b}`: {e}"))?;
    Ok([nx, ny])
}

fn load(
    path: &PathBuf,
    tweak: impl FnOnce(&mut ScenarioConfig),
) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = config::parse_unchecked(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    tweak(&mut config);
    config.validate()?;
    Ok(config)
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Check { config } => load(&config, |_| {}).and_then(|c| {
            if commands::check(&c, out)? {
                Ok(())
            } else {
                Err(CliError::Runtime("design is infeasible".into()))
            }
        }),
        Command::Simulate {
            config,
            out: dir,
            overrides,
        } => load(&config, |c| overrides.apply(c))
            .and_then(|c| commands::run_simulation(&c, &dir, out)),
        Command::Region {
            config,
            out: dir,
            grid,
        } => load(&config, |c| {
            if let (Some(g), Some(r)) = (grid, c.region.as_mut()) {
                r.grid = g;
            }
        })
        .and_then(|c| commands::run_region(&c, &dir, out)),
        Command::DumpDefaults { system } => writeln!(out, "{}", config::defaults(system).to_json())
            .map_err(|e| CliError::Runtime(e.to_string())),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
