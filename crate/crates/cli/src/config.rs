//! Run configuration. A TOML file with the blocks `domain`, `coefficients`,
//! `stepper`, `run`, `initial`, `equilibria`, `probe.*`, `oracle` and
//! `sweep`. Only `domain` and `coefficients` are required; unknown keys are
//! rejected everywhere.

use std::f64::consts::PI;
use std::path::PathBuf;

use kirchhoff::longtime::QuasiMode;
use kirchhoff::scenarios::random_ics;
use kirchhoff::{CoefficientSet, Domain, ModalState, StepperConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A length given as a number or as a multiple of π ("pi", "2pi", "0.5pi").
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Length {
    Number(f64),
    Text(String),
}

impl Length {
    pub fn value(&self) -> Result<f64, CliError> {
        match self {
            Length::Number(x) => Ok(*x),
            Length::Text(s) => {
                let s = s.trim();
                let factor = s
                    .strip_suffix("pi")
                    .ok_or_else(|| {
                        CliError::Config(format!(
                            "length '{s}' is not a number or a multiple of pi"
                        ))
                    })?
                    .trim_end()
                    .trim_end_matches('*')
                    .trim();
                let k = if factor.is_empty() {
                    1.0
                } else {
                    factor.parse::<f64>().map_err(|_| {
                        CliError::Config(format!("length '{s}' has a malformed factor"))
                    })?
                };
                Ok(k * PI)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainConfig {
    Interval {
        length: Length,
        modes: usize,
    },
    Rectangle {
        lx: Length,
        ly: Length,
        modes: usize,
    },
}

impl DomainConfig {
    pub fn build(&self) -> Result<Domain, CliError> {
        Ok(match self {
            DomainConfig::Interval { length, modes } => Domain::interval(length.value()?, *modes)?,
            DomainConfig::Rectangle { lx, ly, modes } => {
                Domain::rectangle(lx.value()?, ly.value()?, *modes)?
            }
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    pub horizon: f64,
    pub stride: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Modes written per state in trajectory CSVs.
    pub modes_out: usize,
    pub plot: bool,
    pub parallel: bool,
    /// Adds elapsed wall time to summaries, which makes them differ between
    /// otherwise identical runs.
    pub record_wall_time: bool,
}

impl Default for RunBlock {
    fn default() -> Self {
        RunBlock {
            horizon: 5.0,
            stride: 10,
            seed: 0,
            output_dir: None,
            modes_out: 8,
            plot: true,
            parallel: true,
            record_wall_time: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomIc {
    pub modes: usize,
    pub amplitude: f64,
}

/// Modal initial data; missing trailing coefficients are zero. With
/// `random`, seeded random data are added on top.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialBlock {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub random: Option<RandomIc>,
}

impl InitialBlock {
    pub fn build(&self, domain: &Domain, seed: u64) -> Result<ModalState, CliError> {
        let n = domain.len();
        if self.u.len() > n || self.v.len() > n {
            return Err(CliError::Config(format!(
                "initial data have more coefficients than the {n} modes of the domain"
            )));
        }
        let mut state = match &self.random {
            Some(r) => random_ics(domain, 1, r.modes, r.amplitude, seed)
                .pop()
                .expect("one state"),
            None => ModalState::at_rest(0.0, domain.zeros()),
        };
        for (k, x) in self.u.iter().enumerate() {
            state.u[k] += x;
        }
        for (k, x) in self.v.iter().enumerate() {
            state.v[k] += x;
        }
        Ok(state)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriaBlock {
    /// Amplitudes of the single-mode guesses.
    pub scales: Vec<f64>,
    pub tolerance: Option<f64>,
    pub max_iters: usize,
    /// Random trajectories run to `run.horizon` whose endpoints become
    /// extra guesses.
    pub trajectories: usize,
    pub amplitude: f64,
}

impl Default for EquilibriaBlock {
    fn default() -> Self {
        EquilibriaBlock {
            scales: vec![0.5, 1.0, 2.0],
            tolerance: None,
            max_iters: 100,
            trajectories: 0,
            amplitude: 2.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbsorbingBlock {
    pub members: usize,
    pub radius: f64,
    pub modes: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    pub ratio: f64,
}

impl Default for AbsorbingBlock {
    fn default() -> Self {
        AbsorbingBlock {
            members: 16,
            radius: 4.0,
            modes: 4,
            radius_min: 0.1,
            radius_max: 1e3,
            ratio: 1.02,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplittingBlock {
    pub nu: f64,
}

impl Default for SplittingBlock {
    fn default() -> Self {
        SplittingBlock { nu: 10.0 }
    }
}

/// How IC pairs for the pairwise probes are drawn.
#[derive(Clone, Debug)]
pub struct PairSpec {
    pub pairs: usize,
    pub modes: usize,
    pub amplitude: f64,
    /// When set, each pair is a random state and a copy nudged by this
    /// amount in its first two modes; otherwise both members are random.
    pub perturbation: Option<f64>,
}

impl Default for PairSpec {
    fn default() -> Self {
        PairSpec {
            pairs: 5,
            modes: 6,
            amplitude: 2.0,
            perturbation: None,
        }
    }
}

impl PairSpec {
    pub fn build(&self, domain: &Domain, seed: u64) -> Vec<(ModalState, ModalState)> {
        let first = random_ics(domain, self.pairs, self.modes, self.amplitude, seed);
        match self.perturbation {
            Some(eps) => first
                .into_iter()
                .map(|a| {
                    let mut b = a.clone();
                    b.u[0] += eps;
                    if b.v.len() > 1 {
                        b.v[1] -= eps;
                    }
                    (a, b)
                })
                .collect(),
            None => first
                .into_iter()
                .zip(random_ics(
                    domain,
                    self.pairs,
                    self.modes,
                    self.amplitude,
                    seed.wrapping_add(1),
                ))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuasiStabBlock {
    pub mode: QuasiMode,
    pub pairs: usize,
    pub modes: usize,
    pub amplitude: f64,
    pub perturbation: Option<f64>,
}

impl Default for QuasiStabBlock {
    fn default() -> Self {
        let p = PairSpec::default();
        QuasiStabBlock {
            mode: QuasiMode::Strong,
            pairs: p.pairs,
            modes: p.modes,
            amplitude: p.amplitude,
            perturbation: p.perturbation,
        }
    }
}

impl QuasiStabBlock {
    pub fn pair_spec(&self) -> PairSpec {
        PairSpec {
            pairs: self.pairs,
            modes: self.modes,
            amplitude: self.amplitude,
            perturbation: self.perturbation,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeterminingBlock {
    pub n_low: usize,
    pub pairs: usize,
    pub modes: usize,
    pub amplitude: f64,
    pub perturbation: Option<f64>,
}

impl Default for DeterminingBlock {
    fn default() -> Self {
        let p = PairSpec::default();
        DeterminingBlock {
            n_low: 3,
            pairs: p.pairs,
            modes: p.modes,
            amplitude: p.amplitude,
            perturbation: Some(1e-3),
        }
    }
}

impl DeterminingBlock {
    pub fn pair_spec(&self) -> PairSpec {
        PairSpec {
            pairs: self.pairs,
            modes: self.modes,
            amplitude: self.amplitude,
            perturbation: self.perturbation,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimensionBlock {
    pub embed_modes: usize,
    /// Number of dyadic box sizes below the embedded extent.
    pub scales: usize,
    pub trajectories: usize,
    pub per_trajectory: usize,
    pub spacing: f64,
    pub burn_in: f64,
    pub radius: f64,
    pub modes: usize,
}

impl Default for DimensionBlock {
    fn default() -> Self {
        DimensionBlock {
            embed_modes: 2,
            scales: 10,
            trajectories: 40,
            per_trajectory: 50,
            spacing: 0.2,
            burn_in: 2.0,
            radius: 4.0,
            modes: 4,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeBlocks {
    pub absorbing: AbsorbingBlock,
    pub splitting: SplittingBlock,
    pub quasistab: QuasiStabBlock,
    pub determining: DeterminingBlock,
    pub dimension: DimensionBlock,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleBlock {
    pub fd_points: usize,
}

impl Default for OracleBlock {
    fn default() -> Self {
        OracleBlock { fd_points: 256 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// Dotted key path into this file, e.g. "stepper.dt".
    pub parameter: String,
    pub values: Vec<toml::Value>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub coefficients: CoefficientSet,
    #[serde(default)]
    pub stepper: StepperConfig,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub initial: InitialBlock,
    #[serde(default)]
    pub equilibria: EquilibriaBlock,
    #[serde(default)]
    pub probe: ProbeBlocks,
    #[serde(default)]
    pub oracle: OracleBlock,
    pub sweep: Option<SweepBlock>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(value: toml::Value) -> Result<Self, CliError> {
        let cfg: RunConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Everything that can be checked without running anything.
    pub fn validate(&self) -> Result<(), CliError> {
        let domain = self.domain.build()?;
        self.coefficients.validate()?;
        self.stepper.validate()?;
        if !(self.run.horizon > 0.0 && self.run.horizon.is_finite()) {
            return Err(CliError::Config(format!(
                "run.horizon = {} must be positive",
                self.run.horizon
            )));
        }
        if self.run.stride == 0 {
            return Err(CliError::Config("run.stride must be at least 1".into()));
        }
        self.initial.build(&domain, self.run.seed)?;
        if self.coefficients.forcing.len() > domain.len() {
            return Err(CliError::Config(format!(
                "coefficients.forcing has {} entries but the domain has {} modes",
                self.coefficients.forcing.len(),
                domain.len()
            )));
        }
        Ok(())
    }
}

/// Sets the dotted `path` in `root` to `value`, creating tables as needed.
pub fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), CliError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!(
            "sweep parameter '{path}' is not a dotted key path"
        )));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| {
            CliError::Config(format!(
                "sweep parameter '{path}': '{key}' is not inside a table"
            ))
        })?;
        node = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = node.as_table_mut().ok_or_else(|| {
        CliError::Config(format!(
            "sweep parameter '{path}' does not end in a table key"
        ))
    })?;
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[domain]
kind = "interval"
length = "pi"
modes = 8

[coefficients.sigma]
family = "power-affine"
sigma0 = 1.0
sigma1 = 1.0
beta = 1.0

[coefficients.phi]
family = "power-affine"
phi0 = 1.0
phi1 = 1.0
alpha = 1.0

[coefficients.f]
family = "cubic-minus-linear"
a = 1.0
b = 1.0
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.stepper, StepperConfig::default());
        assert_eq!(cfg.domain.build().unwrap().len(), 8);
        assert!((cfg.domain.build().unwrap().lambda1() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("{MINIMAL}\n[stepper]\ndtt = 0.1\n");
        let err = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("dtt"), "{err}");
        let bad = MINIMAL.replace("beta = 1.0", "beta = 1.0\ngamma = 2.0");
        assert!(RunConfig::parse(&bad).is_err());
        let bad = format!("{MINIMAL}\n[probe.determining]\nnlow = 3\n");
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn lengths_accept_multiples_of_pi() {
        assert_eq!(Length::Text("2pi".into()).value().unwrap(), 2.0 * PI);
        assert_eq!(Length::Text("0.5 * pi".into()).value().unwrap(), 0.5 * PI);
        assert_eq!(Length::Number(3.0).value().unwrap(), 3.0);
        assert!(Length::Text("tau".into()).value().is_err());
    }

    #[test]
    fn dotted_paths_are_set() {
        let mut v: toml::Value = toml::from_str(MINIMAL).unwrap();
        set_path(&mut v, "stepper.dt", toml::Value::Float(0.005)).unwrap();
        let cfg = RunConfig::from_value(v).unwrap();
        assert_eq!(cfg.stepper.dt, 0.005);
    }
}
