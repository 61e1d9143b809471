//! Numerical probes of the long-time behaviour: absorbing ball, splitting,
//! quasi-stability, determining modes and box-counting dimension.
//!
//! Every probe first produces a raw [`SeriesTable`] and then derives its
//! verdict with a pure `judge` function of the table and the probe
//! settings, so a stored table reproduces the verdict exactly
//! ([`ProbeReport::rejudge`]).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{ModalState, Stepper};
use crate::error::{Error, Result};
use crate::model::{check_assumptions, AssumptionReport, Verdict, DEFAULT_S_MAX};

mod absorbing;
mod determining;
mod dimension;
mod fit;
mod quasistab;
mod sampling;
mod splitting;

pub use absorbing::{absorbing_probe, log_radii};
pub use determining::{completeness_defect, determining_probe};
pub use dimension::{dimension_probe, dyadic_scales, embed, embedded_extent};
pub use fit::{log_linear_fit, LogLinearFit};
pub use quasistab::{gamma_grid, quasi_stability_probe, QuasiMode};
pub use sampling::{attractor_samples, latin_hypercube, sample_ball, segment};
pub use splitting::splitting_probe;

/// Per-probe inputs that, together with the series, determine the verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "probe", rename_all = "kebab-case")]
pub enum ProbeSettings {
    Absorbing {
        radii: Vec<f64>,
    },
    Splitting {
        nu: f64,
        /// Bound on max ‖w + v − u‖∞ / (1 + ‖u‖∞).
        consistency_tol: f64,
    },
    QuasiStability {
        mode: QuasiMode,
        slack: f64,
        gammas: Vec<f64>,
        a_max: f64,
        b_max: f64,
    },
    Determining {
        n_low: usize,
        epsilon_l: f64,
        hypothesis_threshold: f64,
        conclusion_threshold: f64,
    },
    Dimension {
        embed_modes: usize,
        scales: Vec<f64>,
        stability_tol: f64,
    },
}

impl ProbeSettings {
    pub fn name(&self) -> &'static str {
        match self {
            ProbeSettings::Absorbing { .. } => "absorbing",
            ProbeSettings::Splitting { .. } => "splitting",
            ProbeSettings::QuasiStability { .. } => "quasistab",
            ProbeSettings::Determining { .. } => "determining",
            ProbeSettings::Dimension { .. } => "dimension",
        }
    }
}

/// Raw numeric series behind a report. Ensemble probes use a long layout
/// whose first column is the member index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        SeriesTable {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Config(format!("series has no column '{name}'")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Rows grouped by the integer in column 0, in order of appearance.
    pub fn groups(&self) -> Vec<Vec<&[f64]>> {
        let mut out: Vec<(f64, Vec<&[f64]>)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(k, _)| *k == r[0]) {
                Some((_, g)) => g.push(r),
                None => out.push((r[0], vec![r])),
            }
        }
        out.into_iter().map(|(_, g)| g).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W, header: Option<&str>) -> Result<()> {
        let cols: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        crate::io::write_table(out, header, &cols, &self.rows)
    }

    /// Reads the format written by [`SeriesTable::write_csv`]; leading `#`
    /// lines are skipped.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(input);
        let columns = rdr.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad number '{x}': {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(SeriesTable { columns, rows })
    }
}

/// What a judge derives from a table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Judgement {
    pub verdict: Option<Verdict>,
    pub constants: BTreeMap<String, f64>,
    pub fits: BTreeMap<String, LogLinearFit>,
    pub diagnostics: Vec<String>,
}

impl Judgement {
    fn constant(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.constants.insert(name.into(), value);
        } else {
            self.diagnostics
                .push(format!("{name} is not finite ({value})"));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub settings: ProbeSettings,
    pub verdict: Verdict,
    pub constants: BTreeMap<String, f64>,
    pub fits: BTreeMap<String, LogLinearFit>,
    pub diagnostics: Vec<String>,
    /// Relative path of the raw series CSV, when written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_file: Option<String>,
    #[serde(skip)]
    pub series: SeriesTable,
}

impl ProbeReport {
    pub fn from_series(settings: ProbeSettings, series: SeriesTable) -> Result<Self> {
        let j = judge(&settings, &series)?;
        Ok(ProbeReport {
            settings,
            verdict: j.verdict.unwrap_or(Verdict::Inconclusive),
            constants: j.constants,
            fits: j.fits,
            diagnostics: j.diagnostics,
            series_file: None,
            series,
        })
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }

    /// Re-derives the verdict from a stored table under this report's
    /// settings.
    pub fn rejudge(&self, series: &SeriesTable) -> Result<Verdict> {
        Ok(judge(&self.settings, series)?
            .verdict
            .unwrap_or(Verdict::Inconclusive))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn judge(settings: &ProbeSettings, series: &SeriesTable) -> Result<Judgement> {
    match settings {
        ProbeSettings::Absorbing { radii } => absorbing::judge(radii, series),
        ProbeSettings::Splitting {
            consistency_tol, ..
        } => splitting::judge(*consistency_tol, series),
        ProbeSettings::QuasiStability {
            slack,
            gammas,
            a_max,
            b_max,
            ..
        } => quasistab::judge(*slack, gammas, *a_max, *b_max, series),
        ProbeSettings::Determining {
            epsilon_l,
            hypothesis_threshold,
            conclusion_threshold,
            ..
        } => determining::judge(
            *epsilon_l,
            *hypothesis_threshold,
            *conclusion_threshold,
            series,
        ),
        ProbeSettings::Dimension { stability_tol, .. } => dimension::judge(*stability_tol, series),
    }
}

/// Assumption report for the stepper's coefficients on its domain.
pub fn assumptions(stepper: &Stepper) -> AssumptionReport {
    let d = stepper.domain();
    check_assumptions(
        stepper.coefficients(),
        d.dimension(),
        d.lambda1(),
        DEFAULT_S_MAX,
    )
}

fn refuse(reason: &str, report: AssumptionReport) -> Error {
    Error::Refused {
        reason: reason.into(),
        report: Box::new(report),
    }
}

/// A pair of initial conditions for the two-trajectory probes.
pub type IcPair = (ModalState, ModalState);
