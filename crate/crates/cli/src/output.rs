//! CSV emission. Reals are written with 17 significant digits; a non-finite
//! value is an error rather than a cell.

use std::io::Write;

use anyhow::{bail, Result};
use igo_surrogate::harness::TrajectoryRow;
use igo_surrogate::BoundCheckReport;

pub fn real(x: f64) -> Result<String> {
    if !x.is_finite() {
        bail!("refusing to write non-finite value {x}");
    }
    Ok(format!("{x:.16e}"))
}

pub fn write_reports<W: Write>(out: W, reports: &[BoundCheckReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "name",
        "lhs_estimate",
        "lhs_std_error",
        "rhs_bound",
        "slack",
        "n_replicates",
        "verdict",
    ])?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            real(r.lhs_estimate)?,
            real(r.lhs_std_error)?,
            real(r.rhs_bound)?,
            real(r.slack)?,
            r.n_replicates.to_string(),
            r.verdict.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory<W: Write>(out: W, rows: &[TrajectoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iteration",
        "J",
        "J_drift_mean",
        "J_drift_stderr",
        "bound_rhs",
        "tau_or_rho_measured",
        "gate_used",
        "alpha",
        "spd_rejections",
    ])?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            real(r.j)?,
            real(r.drift_mean)?,
            real(r.drift_std_error)?,
            real(r.bound_rhs)?,
            real(r.measured)?,
            r.gate_used.to_string(),
            real(r.alpha)?,
            r.spd_rejections.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pairs<W: Write>(out: W, header: [&str; 2], rows: &[(String, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for (name, v) in rows {
        w.write_record([name.clone(), real(*v)?])?;
    }
    w.flush()?;
    Ok(())
}
