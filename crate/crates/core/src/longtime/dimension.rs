use std::collections::HashSet;

use crate::dynamics::ModalState;
use crate::error::{Error, Result};
use crate::model::Verdict;
use crate::spectral::Domain;

use super::{Judgement, ProbeReport, ProbeSettings, SeriesTable};

pub const STABILITY_TOL: f64 = 0.3;

/// (√λ_k u_k, v_k) for the first `m` modes, so Euclidean distance is the
/// energy-norm distance of the truncation.
pub fn embed(domain: &Domain, s: &ModalState, m: usize) -> Vec<f64> {
    let lambda = domain.eigenvalues();
    let m = m.min(domain.len());
    (0..m)
        .map(|k| lambda[k].sqrt() * s.u[k])
        .chain((0..m).map(|k| s.v[k]))
        .collect()
}

/// diameter·2^{−k}, k = 1..=count.
pub fn dyadic_scales(diameter: f64, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|k| diameter * 0.5f64.powi(k as i32))
        .collect()
}

/// Largest coordinate range of the embedded points.
pub fn embedded_extent(points: &[Vec<f64>]) -> f64 {
    let dims = points.first().map_or(0, Vec::len);
    (0..dims)
        .map(|d| {
            let (lo, hi) = points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
                    (l.min(p[d]), h.max(p[d]))
                });
            hi - lo
        })
        .fold(0.0, f64::max)
}

fn box_count(points: &[Vec<f64>], eps: f64) -> usize {
    let dims = points[0].len();
    let origin: Vec<f64> = (0..dims)
        .map(|d| points.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min))
        .collect();
    let cells: HashSet<Vec<i64>> = points
        .iter()
        .map(|p| {
            p.iter()
                .zip(&origin)
                .map(|(x, o)| ((x - o) / eps).floor() as i64)
                .collect()
        })
        .collect();
    cells.len()
}

/// Box-counts the samples embedded with `embed_modes` and `embed_modes + 2`
/// modes over `scales` and fits ln N against ln(1/ε).
pub fn dimension_probe(
    domain: &Domain,
    samples: &[ModalState],
    embed_modes: usize,
    scales: &[f64],
) -> Result<ProbeReport> {
    if samples.is_empty() || embed_modes == 0 {
        return Err(Error::Config(
            "dimension probe needs samples and at least one embedded mode".into(),
        ));
    }
    if scales.len() < 2 || scales.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Config(
            "dimension probe needs at least two positive scales".into(),
        ));
    }
    let mut scales = scales.to_vec();
    scales.sort_by(|a, b| b.total_cmp(a));
    let base: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| embed(domain, s, embed_modes))
        .collect();
    let wide: Option<Vec<Vec<f64>>> = (embed_modes + 2 <= domain.len()).then(|| {
        samples
            .iter()
            .map(|s| embed(domain, s, embed_modes + 2))
            .collect()
    });
    let mut table = SeriesTable::new(["log_inv_eps", "log_n", "log_n_wide", "samples"]);
    for &eps in &scales {
        let n = box_count(&base, eps) as f64;
        let nw = wide.as_ref().map_or(f64::NAN, |w| box_count(w, eps) as f64);
        table.push(vec![-eps.ln(), n.ln(), nw.ln(), samples.len() as f64]);
    }
    ProbeReport::from_series(
        ProbeSettings::Dimension {
            embed_modes,
            scales,
            stability_tol: STABILITY_TOL,
        },
        table,
    )
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub(super) fn judge(stability_tol: f64, table: &SeriesTable) -> Result<Judgement> {
    let x = table.column("log_inv_eps")?;
    let y = table.column("log_n")?;
    let yw = table.column("log_n_wide")?;
    let samples = table.column("samples")?.first().copied().unwrap_or(0.0);
    let mut j = Judgement::default();
    let n = x.len();
    let (lo, hi) = if n >= 4 { (n / 4, n - n / 4) } else { (0, n) };
    j.constant("window_log_inv_eps_min", x[lo]);
    j.constant("window_log_inv_eps_max", x[hi - 1]);
    let d = slope(&x[lo..hi], &y[lo..hi]);
    j.constant("dimension", d);
    let coarsest = y[0].exp();
    let conclusive = samples >= 10.0 * coarsest;
    if samples < 1000.0 {
        j.diagnostics.push(format!(
            "only {samples} samples; 1000 or more are recommended"
        ));
    }
    if !conclusive {
        j.diagnostics.push(format!(
            "{samples} samples is fewer than 10x the coarsest box count {coarsest}"
        ));
    }
    let stable = if yw.iter().all(|v| v.is_finite()) {
        let dw = slope(&x[lo..hi], &yw[lo..hi]);
        j.constant("dimension_wide", dw);
        j.constant("stability_gap", (dw - d).abs());
        (dw - d).abs() <= stability_tol
    } else {
        j.diagnostics
            .push("embedding cannot be widened by two modes; stability not checked".into());
        true
    };
    j.verdict = Some(if !conclusive {
        Verdict::Inconclusive
    } else if stable && d.is_finite() {
        Verdict::Pass
    } else {
        Verdict::Fail
    });
    Ok(j)
}
