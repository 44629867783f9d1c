//! Artifact serialization: summary and aggregate tables, plot data,
//! per-run trajectories. Floating-point values are written in
//! scientific notation with 17 significant digits so every table
//! round-trips bit-exactly.

use std::fs;
use std::path::Path;

use nsopt::diagnostics::TrajectoryPoint;

use crate::experiment::{Aggregate, Experiment, ExperimentOutput, SummaryRecord};
use crate::HarnessError;

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn summary_csv(problem: &str, solver: &str, records: &[SummaryRecord]) -> String {
    let mut out = String::from("problem,solver,N,seed,R,V,g_gap_sq,z_err_sq,f_gap\n");
    for r in records {
        out.push_str(&format!(
            "{problem},{solver},{},{},{},{},{},{},{}\n",
            r.iterations,
            r.replication,
            r.output_index,
            format_float(r.v),
            format_float(r.g_gap_sq),
            format_float(r.z_err_sq),
            format_float(r.f_gap),
        ));
    }
    out
}

pub fn aggregates_csv(aggregates: &[Aggregate]) -> String {
    let mut out = String::from(
        "N,cells,mean_V,stderr_V,mean_g_gap_sq,stderr_g_gap_sq,mean_z_err_sq,mean_f_gap\n",
    );
    for a in aggregates {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            a.iterations,
            a.cells,
            format_float(a.mean_v),
            format_float(a.stderr_v),
            format_float(a.mean_g_gap_sq),
            format_float(a.stderr_g_gap_sq),
            format_float(a.mean_z_err_sq),
            format_float(a.mean_f_gap),
        ));
    }
    out
}

pub fn timings_csv(records: &[SummaryRecord]) -> String {
    let mut out = String::from("N,seed,wall_seconds\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{}\n",
            r.iterations,
            r.replication,
            format_float(r.wall_seconds)
        ));
    }
    out
}

/// One row of the plot-data file.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub iterations: usize,
    pub mean_v: f64,
    pub stderr_v: f64,
    pub mean_g_gap: f64,
    pub slope: f64,
}

/// Columnar plot data `(N, mean_V, stderr_V, mean_g_gap, slope)` for
/// external plotting; the fitted log-log slope is repeated per row.
/// Needs at least two horizons.
pub fn plot_csv(aggregates: &[Aggregate]) -> Result<String, HarnessError> {
    if aggregates.len() < 2 {
        return Err(HarnessError::Config(
            "plot data needs at least two horizon values".into(),
        ));
    }
    let slope = loglog_slope(
        &aggregates
            .iter()
            .map(|a| (a.iterations as f64, a.mean_v))
            .collect::<Vec<_>>(),
    )?;
    let mut out = String::from("N,mean_V,stderr_V,mean_g_gap,slope\n");
    for a in aggregates {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            a.iterations,
            format_float(a.mean_v),
            format_float(a.stderr_v),
            format_float(a.mean_g_gap_sq),
            format_float(slope),
        ));
    }
    Ok(out)
}

/// Least-squares slope in log-log coordinates; two points fit exactly.
fn loglog_slope(points: &[(f64, f64)]) -> Result<f64, HarnessError> {
    if points.iter().any(|&(n, v)| n <= 0.0 || v <= 0.0) {
        return Err(HarnessError::Config(
            "plot data requires positive horizons and measures".into(),
        ));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, v)| (n.ln(), v.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in logs {
        cov += (x - mx) * (y - my);
        var += (x - mx) * (x - mx);
    }
    if var == 0.0 {
        return Err(HarnessError::Config("plot data needs distinct horizons".into()));
    }
    Ok(cov / var)
}

pub fn parse_plot_csv(text: &str) -> Result<Vec<PlotRow>, HarnessError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Config("empty plot file".into()))?;
    if header != "N,mean_V,stderr_V,mean_g_gap,slope" {
        return Err(HarnessError::Config(format!("unexpected plot header `{header}`")));
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(HarnessError::Config(format!("malformed plot row `{line}`")));
        }
        let field = |i: usize| -> Result<f64, HarnessError> {
            parts[i]
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad number `{}`", parts[i])))
        };
        rows.push(PlotRow {
            iterations: parts[0]
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad horizon `{}`", parts[0])))?,
            mean_v: field(1)?,
            stderr_v: field(2)?,
            mean_g_gap: field(3)?,
            slope: field(4)?,
        });
    }
    if rows.is_empty() {
        return Err(HarnessError::Config("plot file has no data rows".into()));
    }
    Ok(rows)
}

pub fn trajectory_csv(points: &[TrajectoryPoint]) -> String {
    let mut out = String::from("k,tau,V,d_sq,g_gap_sq,W,z_err_sq\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.iter,
            format_float(p.tau),
            format_float(p.v),
            format_float(p.d_sq),
            format_float(p.g_gap_sq),
            format_float(p.w),
            format_float(p.z_err_sq),
        ));
    }
    out
}

/// Write every artifact of one experiment run into `out_dir`.
pub fn write_artifacts(
    experiment: &Experiment,
    output: &ExperimentOutput,
    out_dir: &Path,
) -> Result<(), HarnessError> {
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("summary.csv"),
        summary_csv(&experiment.problem_name, experiment.solver.name(), &output.records),
    )?;
    fs::write(out_dir.join("aggregates.csv"), aggregates_csv(&output.aggregates))?;
    fs::write(out_dir.join("timings.csv"), timings_csv(&output.records))?;
    fs::write(out_dir.join("config_echo.txt"), &experiment.config_echo)?;
    fs::write(out_dir.join("instance.txt"), &experiment.instance_echo)?;
    if output.aggregates.len() >= 2 {
        fs::write(out_dir.join("plot.csv"), plot_csv(&output.aggregates)?)?;
    }
    for (n, rep, trajectory) in &output.trajectories {
        fs::write(
            out_dir.join(format!("traj_N{n}_seed{rep}.csv")),
            trajectory_csv(trajectory),
        )?;
    }
    if !output.failures.is_empty() {
        fs::write(out_dir.join("failures.txt"), output.failures.join("\n") + "\n")?;
    }
    Ok(())
}
