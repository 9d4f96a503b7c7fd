use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use pic_core::export::{write_events, write_monitor, write_region, write_trajectory};
use pic_core::plant::spot_check_growth;
use pic_core::{
    check_feasibility, feasible_region, monitor, simulate, BoundFamily, EventKind,
    FeasibilityReport,
};

use crate::config::{ConfigError, ScenarioConfig};

/// Box half-width and resolution of the linear-growth spot check.
const GROWTH_HALF_WIDTH: f64 = 2.0;
const GROWTH_POINTS: usize = 41;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments; exit code 2.
    Config(String),
    /// Infeasible design or a failure while running; exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn io(e: std::io::Error) -> CliError {
    CliError::Runtime(format!("i/o error: {e}"))
}

fn feasibility(config: &ScenarioConfig) -> Result<FeasibilityReport, CliError> {
    let cascade = config.cascade_config()?;
    let z0 = config.initial_errors(&cascade)?;
    Ok(check_feasibility(&cascade, &config.bounds_spec(), &z0)?)
}

impl From<pic_core::Error> for CliError {
    fn from(e: pic_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

fn print_report(report: &FeasibilityReport, out: &mut dyn Write) -> std::io::Result<()> {
    for s in &report.stages {
        writeln!(
            out,
            "stage {}: varphi = {}, rhs = {}, margin = {}, rate bound = {}",
            s.stage, s.varphi, s.rhs, s.margin, s.rate_bound
        )?;
        writeln!(
            out,
            "stage {}: |z(0)| = {}, p - |z(0)| = {}",
            s.stage,
            s.z0.abs(),
            s.trivial_margin
        )?;
    }
    for s in report.failed_trivial() {
        writeln!(
            out,
            "stage {}: initial error |z(0)| = {} is not inside the funnel",
            s.stage,
            s.z0.abs()
        )?;
    }
    for s in report.failed_conditions() {
        writeln!(
            out,
            "stage {}: feasibility condition fails by {}",
            s.stage, -s.margin
        )?;
    }
    writeln!(
        out,
        "verdict: {}",
        if report.feasible {
            "feasible"
        } else {
            "infeasible"
        }
    )
}

/// Prints the certificate. Returns `Ok(false)` if the design is infeasible.
pub fn check(config: &ScenarioConfig, out: &mut dyn Write) -> Result<bool, CliError> {
    let report = feasibility(config)?;
    print_report(&report, out).map_err(io)?;
    let growth = spot_check_growth(
        &config.system_spec()?,
        &config.bounds.k,
        GROWTH_HALF_WIDTH,
        GROWTH_POINTS,
    )?;
    for g in growth {
        if g.holds() {
            writeln!(
                out,
                "growth stage {}: |f| <= {} * |xi| holds on the sampled box",
                g.stage, g.k
            )
            .map_err(io)?;
        } else {
            writeln!(
                out,
                "growth stage {}: |f| exceeds {} * |xi| by {} at {:?} (warning)",
                g.stage, g.k, g.worst_excess, g.worst_point
            )
            .map_err(io)?;
        }
    }
    Ok(report.feasible)
}

/// Runs the closed loop and writes `trajectory.csv`, `events.csv` and
/// `monitor.csv` into `out_dir`. Nothing is written unless the run succeeds.
pub fn run_simulation(
    config: &ScenarioConfig,
    out_dir: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let scenario = config.scenario()?;
    let report = feasibility(config)?;
    if !report.feasible && !scenario.permissive {
        print_report(&report, out).map_err(io)?;
        return Err(CliError::Runtime(
            "design is not certified feasible; pass --permissive to run anyway".into(),
        ));
    }
    let trajectory = simulate(&scenario).map_err(runtime)?;
    let bounds = config.bounds_spec();
    let summary = monitor(&trajectory, &scenario.controller, &bounds).map_err(runtime)?;

    fs::create_dir_all(out_dir).map_err(io)?;
    let create = |name: &str| {
        File::create(out_dir.join(name))
            .map(BufWriter::new)
            .map_err(io)
    };
    write_trajectory(&trajectory, create("trajectory.csv")?).map_err(runtime)?;
    write_events(&trajectory, create("events.csv")?).map_err(runtime)?;
    write_monitor(&summary, create("monitor.csv")?).map_err(runtime)?;

    writeln!(
        out,
        "samples: {}, final time: {}",
        trajectory.len(),
        trajectory.last().t
    )
    .map_err(io)?;
    for c in &summary.checks {
        writeln!(
            out,
            "{} stage {}: worst margin {} at t = {}, violations {}",
            c.family.as_str(),
            c.stage,
            c.worst_margin,
            c.worst_time,
            c.violations
        )
        .map_err(io)?;
    }
    let saturations = trajectory.events_of(EventKind::Saturation).count();
    writeln!(out, "saturation events: {saturations}").map_err(io)?;
    let total = summary.total_violations();
    let families: Vec<String> = BoundFamily::ALL
        .iter()
        .map(|f| format!("{} {}", f.as_str(), summary.violations(*f)))
        .collect();
    writeln!(out, "violations: {total} ({})", families.join(", ")).map_err(io)?;
    Ok(())
}

/// Sweeps the initial-state grid and writes `region.csv`.
pub fn run_region(
    config: &ScenarioConfig,
    out_dir: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let (grid, template) = config.region_template()?;
    let map = feasible_region(&grid, &template).map_err(runtime)?;
    fs::create_dir_all(out_dir).map_err(io)?;
    let file = File::create(out_dir.join("region.csv"))
        .map(BufWriter::new)
        .map_err(io)?;
    write_region(&map, file).map_err(runtime)?;

    writeln!(
        out,
        "grid {}x{}: {} of {} cells feasible (fraction {})",
        grid.nx,
        grid.ny,
        map.feasible_count(),
        grid.len(),
        map.feasible_fraction()
    )
    .map_err(io)?;
    let mut probes: Vec<[f64; 2]> = config
        .region
        .as_ref()
        .map(|r| r.probes.clone())
        .unwrap_or_default();
    let x0 = [config.sim.x0[0], config.sim.x0[1]];
    if !probes.contains(&x0) {
        probes.push(x0);
    }
    for [x, y] in probes {
        let cell = template.evaluate(x, y);
        writeln!(
            out,
            "({x}, {y}): {} (C1 margin {}, C2 margin {})",
            if cell.feasible {
                "member"
            } else {
                "not a member"
            },
            cell.margin_c1,
            cell.margin_c2
        )
        .map_err(io)?;
    }
    Ok(())
}
