//! CSV writers for trajectories, event logs, monitor summaries and region
//! masks. Reals are written with 17 significant digits so they parse back
//! to the identical `f64`.

use std::io::{Read, Write};

use crate::error::{invalid, Result};
use crate::feasibility::RegionMap;
use crate::simulator::{MonitorReport, Trajectory};

pub(crate) fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header `t, xi_1..xi_n, z_1..z_n, theta_1..theta_n, u_1..u_n, psi_1..psi_n, y_d`.
pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for name in ["xi", "z", "theta", "u", "psi"] {
        h.extend((1..=n).map(|i| format!("{name}_{i}")));
    }
    h.push("y_d".to_string());
    h
}

pub fn write_trajectory<W: Write>(trajectory: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(trajectory.n))?;
    for s in &trajectory.samples {
        let mut row = vec![real(s.t)];
        for col in [&s.xi, &s.z, &s.theta, &s.u, &s.psi] {
            row.extend(col.iter().copied().map(real));
        }
        row.push(real(s.y_d));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Event log with columns `t, kind, stage, value`.
pub fn write_events<W: Write>(trajectory: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "kind", "stage", "value"])?;
    for e in &trajectory.events {
        w.write_record([
            real(e.t),
            e.kind.to_string(),
            e.stage.to_string(),
            real(e.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Monitor summary with columns `family, stage, worst_margin, worst_time, violations`.
pub fn write_monitor<W: Write>(report: &MonitorReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "family",
        "stage",
        "worst_margin",
        "worst_time",
        "violations",
    ])?;
    for c in &report.checks {
        w.write_record([
            c.family.to_string(),
            c.stage.to_string(),
            real(c.worst_margin),
            real(c.worst_time),
            c.violations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Region mask with columns `x, y, feasible, margin_c1, margin_c2`.
pub fn write_region<W: Write>(region: &RegionMap, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "feasible", "margin_c1", "margin_c2"])?;
    for c in &region.cells {
        w.write_record([
            real(c.x),
            real(c.y),
            u8::from(c.feasible).to_string(),
            real(c.margin_c1),
            real(c.margin_c2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads any of the numeric CSVs above back into a header and rows of reals.
/// Non-numeric cells (such as event kinds) are rejected, so use
/// [`read_table`] for the event log.
pub fn read_numeric<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let (header, rows) = read_table(input)?;
    let rows = rows
        .into_iter()
        .map(|row| {
            row.iter()
                .map(|cell| {
                    cell.trim()
                        .parse::<f64>()
                        .map_err(|e| invalid(format!("bad number `{cell}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

pub fn read_table<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok((header, rows))
}
