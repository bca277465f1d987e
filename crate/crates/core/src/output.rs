//! Trajectory serialization: CSV with full round-trip precision and JSON.

use std::io::Write;

use serde::Serialize;

use crate::dynamics::{IntegratorStats, Trajectory};
use crate::lattice::{ChainTrajectory, MultipoleSeries};
use crate::Result;

/// 17 significant digits, enough to reproduce any f64 bit pattern.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a single-site trajectory as CSV
/// (t, psi components, energy, casimir, observables).
pub fn write_trajectory_csv<W: Write>(trajectory: &Trajectory, mut w: W) -> Result<()> {
    let params = trajectory
        .psi_series
        .first()
        .map(|p| p.len())
        .unwrap_or(0);
    let mut header = vec!["t".to_string()];
    for i in 1..=params {
        header.push(format!("psi{i}_re"));
        header.push(format!("psi{i}_im"));
    }
    header.push("energy".into());
    header.push("casimir".into());
    for name in trajectory.observables.keys() {
        header.push(name.clone());
    }
    writeln!(w, "{}", header.join(","))?;

    for (k, t) in trajectory.times.iter().enumerate() {
        let mut row = vec![format_f64(*t)];
        for z in trajectory.psi_series[k].iter() {
            row.push(format_f64(z.re));
            row.push(format_f64(z.im));
        }
        row.push(format_f64(trajectory.energy_series[k]));
        row.push(format_f64(trajectory.casimir_series[k]));
        for series in trajectory.observables.values() {
            row.push(format_f64(series[k]));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    times: &'a [f64],
    psi_re: Vec<Vec<f64>>,
    psi_im: Vec<Vec<f64>>,
    energy: &'a [f64],
    casimir: &'a [f64],
    norm: &'a [f64],
    observables: &'a std::collections::BTreeMap<String, Vec<f64>>,
    integrator_stats: &'a IntegratorStats,
}

/// Serialize a trajectory (including integrator statistics) to JSON.
pub fn trajectory_to_json(trajectory: &Trajectory) -> Result<String> {
    let psi_re = trajectory
        .psi_series
        .iter()
        .map(|p| p.iter().map(|z| z.re).collect())
        .collect();
    let psi_im = trajectory
        .psi_series
        .iter()
        .map(|p| p.iter().map(|z| z.im).collect())
        .collect();
    Ok(serde_json::to_string_pretty(&TrajectoryJson {
        times: &trajectory.times,
        psi_re,
        psi_im,
        energy: &trajectory.energy_series,
        casimir: &trajectory.casimir_series,
        norm: &trajectory.norm_series,
        observables: &trajectory.observables,
        integrator_stats: &trajectory.stats,
    })?)
}

/// Write a chain trajectory as wide CSV: per-site coordinates, total
/// energy and S^z, and per-site multipole columns.
pub fn write_chain_csv<W: Write>(
    trajectory: &ChainTrajectory,
    multipoles: &MultipoleSeries,
    mut w: W,
) -> Result<()> {
    let sites = trajectory
        .site_psi_series
        .first()
        .map(|r| r.len())
        .unwrap_or(0);
    let params = trajectory
        .site_psi_series
        .first()
        .and_then(|r| r.first())
        .map(|p| p.len())
        .unwrap_or(0);

    let mut header = vec!["t".to_string()];
    for a in 0..sites {
        for i in 1..=params {
            header.push(format!("site{a}_psi{i}_re"));
            header.push(format!("site{a}_psi{i}_im"));
        }
    }
    header.push("energy".into());
    header.push("total_sz".into());
    for a in 0..sites {
        for label in &multipoles.labels {
            header.push(format!("site{a}_{label}"));
        }
    }
    writeln!(w, "{}", header.join(","))?;

    for (k, t) in trajectory.times.iter().enumerate() {
        let mut row = vec![format_f64(*t)];
        for psi in &trajectory.site_psi_series[k] {
            for z in psi.iter() {
                row.push(format_f64(z.re));
                row.push(format_f64(z.im));
            }
        }
        row.push(format_f64(trajectory.energy_series[k]));
        row.push(format_f64(trajectory.total_sz_series[k]));
        for site in &multipoles.values[k] {
            for v in site {
                row.push(format_f64(*v));
            }
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
