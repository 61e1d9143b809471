use crate::dynamics::{difference_metrics, Stepper};
use crate::error::{Error, Result};
use crate::model::Verdict;
use crate::parallel::Execution;
use crate::spectral::Domain;

use super::{IcPair, Judgement, ProbeReport, ProbeSettings, SeriesTable};

pub const HYPOTHESIS_THRESHOLD: f64 = 1e-12;
pub const CONCLUSION_THRESHOLD: f64 = 1e-6;

/// ε_L = λ_{n_low+1}^{−1/2} for the first `n_low` modal functionals.
pub fn completeness_defect(domain: &Domain, n_low: usize) -> Result<f64> {
    if n_low >= domain.len() {
        return Err(Error::Config(format!(
            "n_low = {n_low} must be below the mode count {}",
            domain.len()
        )));
    }
    Ok(domain.eigenvalues()[n_low].powf(-0.5))
}

/// Records, per pair, the squared low-mode discrepancies z_j², j ≤ n_low, and
/// the conclusion series ‖z_t‖² + ‖∇z‖².
pub fn determining_probe(
    stepper: &Stepper,
    pairs: &[IcPair],
    n_low: usize,
    horizon: f64,
    stride: usize,
    exec: Execution,
) -> Result<ProbeReport> {
    let domain = stepper.domain();
    let epsilon_l = completeness_defect(domain, n_low)?;
    if pairs.is_empty() {
        return Err(Error::Config(
            "determining probe needs at least one pair".into(),
        ));
    }
    let runs = exec.try_map(pairs, |(a, b)| {
        Ok::<_, Error>((
            stepper.simulate(a, horizon, stride)?,
            stepper.simulate(b, horizon, stride)?,
        ))
    })?;
    let mut columns = vec!["pair".to_string(), "t".to_string()];
    columns.extend((1..=n_low).map(|j| format!("z{j}_sq")));
    columns.push("conclusion".into());
    let mut table = SeriesTable::new(columns);
    for (p, (ta, tb)) in runs.iter().enumerate() {
        let diff = difference_metrics(domain, ta.states(), tb.states())?;
        for (i, (sa, sb)) in ta.states().iter().zip(tb.states()).enumerate() {
            let mut row = vec![p as f64, diff.t[i]];
            row.extend((0..n_low).map(|j| (sa.u[j] - sb.u[j]).powi(2)));
            row.push(diff.vel[i] + diff.grad[i]);
            table.push(row);
        }
    }
    let settings = ProbeSettings::Determining {
        n_low,
        epsilon_l,
        hypothesis_threshold: HYPOTHESIS_THRESHOLD,
        conclusion_threshold: CONCLUSION_THRESHOLD,
    };
    ProbeReport::from_series(settings, table)
}

/// H(t_i) = max_j ∫_{t_i}^{t_i+1} z_j², trapezoidal, for every window that
/// fits inside the record.
fn hypothesis(rows: &[&[f64]]) -> Vec<f64> {
    let n_low = rows[0].len() - 3;
    let t: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let cumulative: Vec<Vec<f64>> = (0..n_low)
        .map(|j| {
            let mut acc = vec![0.0; rows.len()];
            for i in 1..rows.len() {
                acc[i] =
                    acc[i - 1] + 0.5 * (t[i] - t[i - 1]) * (rows[i][2 + j] + rows[i - 1][2 + j]);
            }
            acc
        })
        .collect();
    let mut out = Vec::new();
    let mut k = 0;
    for i in 0..rows.len() {
        while k < rows.len() && t[k] < t[i] + 1.0 - 1e-9 {
            k += 1;
        }
        if k == rows.len() {
            break;
        }
        out.push(cumulative.iter().map(|c| c[k] - c[i]).fold(0.0, f64::max));
    }
    out
}

fn tail_max(series: &[f64]) -> f64 {
    let start = series.len() - series.len().div_ceil(4);
    series[start..].iter().copied().fold(0.0, f64::max)
}

pub(super) fn judge(
    epsilon_l: f64,
    hyp_threshold: f64,
    concl_threshold: f64,
    table: &SeriesTable,
) -> Result<Judgement> {
    let mut j = Judgement::default();
    j.constant("epsilon_L", epsilon_l);
    let (mut active, mut violated) = (0usize, 0usize);
    let (mut hyp_tail, mut concl_tail) = (0.0f64, 0.0f64);
    for (p, g) in table.groups().iter().enumerate() {
        let h = hypothesis(g);
        if h.is_empty() {
            j.diagnostics
                .push(format!("pair {p}: record shorter than one window"));
            continue;
        }
        let c: Vec<f64> = g.iter().map(|r| r[r.len() - 1]).collect();
        let (ht, ct) = (tail_max(&h), tail_max(&c));
        if ht <= hyp_threshold {
            active += 1;
            hyp_tail = hyp_tail.max(ht);
            concl_tail = concl_tail.max(ct);
            if ct > concl_threshold {
                violated += 1;
                j.diagnostics.push(format!(
                    "pair {p}: hypothesis tail {ht:e} but conclusion tail {ct:e}"
                ));
            }
        }
    }
    j.constant("active_pairs", active as f64);
    j.constant("violations", violated as f64);
    if active > 0 {
        j.constant("hypothesis_tail_max", hyp_tail);
        j.constant("conclusion_tail_max", concl_tail);
    }
    j.verdict = Some(if violated > 0 {
        Verdict::Fail
    } else if active == 0 {
        j.diagnostics
            .push("hypothesis never falls below its threshold; implication untested".into());
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    });
    Ok(j)
}
