use crate::dynamics::{ModalState, Stepper};
use crate::error::{Error, Result};
use crate::model::Verdict;
use crate::parallel::Execution;

use super::{assumptions, refuse, Judgement, ProbeReport, ProbeSettings, SeriesTable};

/// Geometric radii from `min` up to at least `max` with the given ratio.
pub fn log_radii(min: f64, max: f64, ratio: f64) -> Vec<f64> {
    assert!(min > 0.0 && ratio > 1.0 && max >= min);
    let mut out = vec![min];
    while *out.last().unwrap() < max {
        let next = out.last().unwrap() * ratio;
        out.push(next);
    }
    out
}

/// Simulates every member to `horizon` and finds, per candidate radius of
/// the energy-norm ball ‖(u; u_t)‖ = (‖∇u‖² + ‖u_t‖²)^{1/2}, the first entry
/// time and whether the member stays inside afterwards. R* is the smallest
/// radius that absorbs the whole ensemble.
pub fn absorbing_probe(
    stepper: &Stepper,
    ensemble: &[ModalState],
    radii: &[f64],
    horizon: f64,
    stride: usize,
    exec: Execution,
) -> Result<ProbeReport> {
    let report = assumptions(stepper);
    if !report.passes_dissipativity() {
        return Err(refuse(
            "absorbing probe needs the dissipativity hypotheses",
            report,
        ));
    }
    if ensemble.is_empty() || radii.is_empty() {
        return Err(Error::Config(
            "absorbing probe needs a non-empty ensemble and radius list".into(),
        ));
    }
    let mut radii = radii.to_vec();
    radii.sort_by(f64::total_cmp);
    if !(radii[0] > 0.0) {
        return Err(Error::Config("candidate radii must be positive".into()));
    }
    let domain = stepper.domain();
    let runs = exec.try_map(ensemble, |ic| stepper.simulate(ic, horizon, stride))?;
    let mut table = SeriesTable::new(["member", "t", "hnorm"]);
    for (m, traj) in runs.iter().enumerate() {
        for s in traj.states() {
            table.push(vec![m as f64, s.t, s.energy_norm_sq(domain).sqrt()]);
        }
    }
    ProbeReport::from_series(ProbeSettings::Absorbing { radii }, table)
}

/// (first entry time, remains inside) of one member for radius `r`.
fn entry(rows: &[&[f64]], r: f64) -> Option<(f64, bool)> {
    let first = rows.iter().position(|row| row[2] <= r)?;
    Some((rows[first][1], rows[first..].iter().all(|row| row[2] <= r)))
}

pub(super) fn judge(radii: &[f64], table: &SeriesTable) -> Result<Judgement> {
    let groups = table.groups();
    let mut j = Judgement::default();
    let absorbing = radii.iter().copied().find(|&r| {
        groups
            .iter()
            .all(|g| matches!(entry(g, r), Some((_, true))))
    });
    let initial_max = groups.iter().map(|g| g[0][2]).fold(0.0f64, f64::max);
    let terminal_max = groups
        .iter()
        .map(|g| g[g.len() - 1][2])
        .fold(0.0f64, f64::max);
    j.constant("members", groups.len() as f64);
    j.constant("initial_norm_max", initial_max);
    j.constant("terminal_norm_max", terminal_max);
    match absorbing {
        Some(r) => {
            let latest = groups
                .iter()
                .filter_map(|g| entry(g, r))
                .map(|e| e.0)
                .fold(0.0f64, f64::max);
            j.constant("r_star", r);
            j.constant("entry_time_max", latest);
            j.verdict = Some(Verdict::Pass);
        }
        None => {
            let largest = radii.last().copied().unwrap_or(0.0);
            let missing = groups
                .iter()
                .filter(|g| !matches!(entry(g, largest), Some((_, true))))
                .count();
            j.diagnostics.push(format!(
                "{missing} members are not absorbed by the largest radius {largest}"
            ));
            j.verdict = Some(Verdict::Fail);
        }
    }
    Ok(j)
}
