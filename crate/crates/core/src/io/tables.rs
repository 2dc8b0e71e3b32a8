//! CSV exports. Every file starts with a header naming each column and its
//! unit in brackets; `[1]` marks dimensionless quantities.

use std::path::Path;

use crate::dqn::EpisodeStats;
use crate::error::{Error, Result};
use crate::estimation::{LikelihoodTable, Posterior, SigmaCurve};
use crate::interferometer::OutputDistribution;
use crate::lattice::DensityMovie;
use crate::tasks::ScanPoint;

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let io = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    };
    Error::io(path, io)
}

/// Writes a header and rows of already formatted fields.
pub fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_training(path: &Path, episodes: &[EpisodeStats]) -> Result<()> {
    write_rows(
        path,
        &["episode [count]", "steps [count]", "fidelity [1]", "return [1]", "epsilon [1]", "mean_loss [1]", "max_loss [1]"],
        episodes.iter().map(|e| {
            vec![
                e.episode.to_string(),
                e.steps.to_string(),
                e.fidelity.to_string(),
                e.episode_return.to_string(),
                e.epsilon.to_string(),
                e.mean_loss.to_string(),
                e.max_loss.to_string(),
            ]
        }),
    )
}

pub fn write_scan(path: &Path, points: &[ScanPoint]) -> Result<()> {
    write_rows(
        path,
        &["amplitude [rad]", "half_cycles [count]", "duration [1/omega_r]", "channel_fidelity [1]"],
        points.iter().map(|p| {
            vec![
                p.amplitude.to_string(),
                p.half_cycles.to_string(),
                p.duration.to_string(),
                p.fidelity.to_string(),
            ]
        }),
    )
}

/// One row per comb state, one probability column per distribution.
pub fn write_outputs(path: &Path, dists: &[OutputDistribution]) -> Result<()> {
    let Some(first) = dists.first() else {
        return Err(Error::invalid("no output distributions to write"));
    };
    let n = first.n_max as i64;
    let mut header = vec!["momentum [hbar*k_L]".to_string()];
    header.extend(dists.iter().map(|d| format!("P(a={}) [1]", d.accel)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        path,
        &header,
        (-n..=n).map(|k| {
            let mut row = vec![(2 * k).to_string()];
            row.extend(dists.iter().map(|d| d.probability(k).to_string()));
            row
        }),
    )
}

pub fn write_likelihood(path: &Path, table: &LikelihoodTable) -> Result<()> {
    let mut header = vec!["accel [omega_r*v_r]".to_string()];
    header.extend(table.labels.iter().map(|n| format!("P(n={n}) [1]")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let xs = table.grid.values();
    write_rows(
        path,
        &header,
        xs.iter().zip(&table.rows).map(|(a, r)| {
            let mut row = vec![a.to_string()];
            row.extend(r.iter().map(|p| p.to_string()));
            row
        }),
    )
}

/// Posterior on the grid after each listed number of atoms.
pub fn write_posteriors(path: &Path, grid_values: &[f64], snaps: &[(usize, Posterior)]) -> Result<()> {
    let mut header = vec!["accel [omega_r*v_r]".to_string()];
    header.extend(snaps.iter().map(|(n, _)| format!("posterior(N={n}) [1]")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        path,
        &header,
        grid_values.iter().enumerate().map(|(j, a)| {
            let mut row = vec![a.to_string()];
            row.extend(snaps.iter().map(|(_, p)| p.probs[j].to_string()));
            row
        }),
    )
}

pub fn write_sigma_curve(path: &Path, curve: &SigmaCurve) -> Result<()> {
    write_rows(
        path,
        &[
            "atoms [count]",
            "sigma [omega_r*v_r]",
            "sigma_sem [omega_r*v_r]",
            "mean_estimate [omega_r*v_r]",
            "rms_error [omega_r*v_r]",
            "cramer_rao [omega_r*v_r]",
        ],
        curve.points.iter().map(|p| {
            vec![
                p.n.to_string(),
                p.sigma.to_string(),
                p.sigma_sem.to_string(),
                p.mean_estimate.to_string(),
                p.rms_error.to_string(),
                p.cr_bound.map_or_else(|| "inf".to_string(), |b| b.to_string()),
            ]
        }),
    )
}

/// Density frames as rows (time) by columns (position), keeping every
/// `x_stride`-th grid point.
pub fn write_density(path: &Path, movie: &DensityMovie, x_stride: usize) -> Result<()> {
    let stride = x_stride.max(1);
    let xs: Vec<f64> = movie.grid.positions().into_iter().step_by(stride).collect();
    let mut header = vec!["t [1/omega_r]".to_string()];
    header.extend(xs.iter().map(|x| format!("x={x} [k_L]")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        path,
        &header,
        movie.frames.iter().map(|f| {
            let mut row = vec![f.t.to_string()];
            row.extend(f.density.iter().step_by(stride).map(|d| d.to_string()));
            row
        }),
    )
}
