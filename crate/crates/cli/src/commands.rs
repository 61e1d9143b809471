use std::path::Path;
use std::time::Instant;

use kirchhoff::dynamics::NewtonStats;
use kirchhoff::equilibria::{default_guesses, EquilibriumLibrary, EquilibriumSolver};
use kirchhoff::io::write_table;
use kirchhoff::longtime::{
    absorbing_probe, attractor_samples, determining_probe, dimension_probe, dyadic_scales, embed,
    embedded_extent, log_radii, quasi_stability_probe, sample_ball, splitting_probe, ProbeReport,
};
use kirchhoff::model::{check_assumptions, DEFAULT_S_MAX};
use kirchhoff::oracle::{cross_method_gap, CrossMethodGap};
use kirchhoff::scenarios::random_ics;
use kirchhoff::{Execution, Scheme, Stepper};
use serde::Serialize;

use crate::config::{set_path, RunConfig};
use crate::output::{load, Output};
use crate::plot::{line_chart, Series};
use crate::{CliError, ProbeKind};

fn execution(cfg: &RunConfig) -> Execution {
    if cfg.run.parallel {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

pub fn check(path: &Path, out: Option<&Path>) -> Result<u8, CliError> {
    let loaded = load(path, out)?;
    let domain = loaded.config.domain.build()?;
    let report = check_assumptions(
        &loaded.config.coefficients,
        domain.dimension(),
        domain.lambda1(),
        DEFAULT_S_MAX,
    );
    loaded.out.write_json("assumptions.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.all_pass() { 0 } else { 2 })
}

#[derive(Serialize)]
struct SimulateSummary {
    scheme: Scheme,
    dt: f64,
    horizon: f64,
    samples: usize,
    final_time: f64,
    energy_initial: f64,
    energy_final: f64,
    dissipation_final: f64,
    residual_final: f64,
    max_abs_residual: f64,
    max_energy_increase: f64,
    newton: NewtonStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_seconds: Option<f64>,
}

fn run_simulation(cfg: &RunConfig, out: &Output) -> Result<SimulateSummary, CliError> {
    let start = Instant::now();
    let domain = cfg.domain.build()?;
    let stepper = Stepper::new(&domain, &cfg.coefficients, cfg.stepper)?;
    let ic = cfg.initial.build(&domain, cfg.run.seed)?;
    let traj = stepper.simulate(&ic, cfg.run.horizon, cfg.run.stride)?;
    let ledger = traj.ledger();

    let mut buf = Vec::new();
    traj.write_csv(
        &mut buf,
        &domain,
        cfg.run.modes_out,
        Some(&out.header("trajectory")),
    )?;
    out.write("trajectory.csv", &buf)?;
    let mut buf = Vec::new();
    ledger.write_csv(&mut buf, Some(&out.header("ledger")))?;
    out.write("ledger.csv", &buf)?;

    let recs = ledger.records();
    if cfg.run.plot {
        let t: Vec<f64> = recs.iter().map(|r| r.t).collect();
        let e: Vec<f64> = recs.iter().map(|r| r.energy).collect();
        let ed: Vec<f64> = recs.iter().map(|r| r.energy + r.dissipation).collect();
        let res: Vec<f64> = recs.iter().map(|r| r.residual).collect();
        let comment = out.header("plot");
        let svg = line_chart(
            "energy",
            "t",
            &t,
            &[
                Series {
                    label: "E(t)",
                    y: &e,
                },
                Series {
                    label: "E(t) + D(t)",
                    y: &ed,
                },
            ],
            false,
            &comment,
        );
        out.write("energy.svg", svg.as_bytes())?;
        let svg = line_chart(
            "|E + D - E(0)|",
            "t",
            &t,
            &[Series {
                label: "residual",
                y: &res,
            }],
            true,
            &comment,
        );
        out.write("residual.svg", svg.as_bytes())?;
    }

    let last = ledger.last();
    let summary = SimulateSummary {
        scheme: cfg.stepper.scheme,
        dt: cfg.stepper.dt,
        horizon: cfg.run.horizon,
        samples: traj.states().len(),
        final_time: traj.last().t,
        energy_initial: ledger.initial_energy(),
        energy_final: last.energy,
        dissipation_final: last.dissipation,
        residual_final: last.residual,
        max_abs_residual: ledger.max_abs_residual(),
        max_energy_increase: ledger.max_energy_increase(),
        newton: *traj.stats(),
        wall_time_seconds: cfg
            .run
            .record_wall_time
            .then(|| start.elapsed().as_secs_f64()),
    };
    out.write_json("summary.json", &summary)?;
    Ok(summary)
}

pub fn simulate(path: &Path, out: Option<&Path>) -> Result<u8, CliError> {
    let loaded = load(path, out)?;
    let s = run_simulation(&loaded.config, &loaded.out)?;
    println!(
        "simulated to t = {} in {} steps; E: {:.6e} -> {:.6e}; max |E + D - E(0)| = {:.3e}; outputs in {}",
        s.final_time,
        s.newton.steps,
        s.energy_initial,
        s.energy_final,
        s.max_abs_residual,
        loaded.out.dir.display()
    );
    Ok(0)
}

pub fn equilibria(path: &Path, out: Option<&Path>) -> Result<u8, CliError> {
    let loaded = load(path, out)?;
    let cfg = &loaded.config;
    let domain = cfg.domain.build()?;
    let solver = EquilibriumSolver::new(&domain, &cfg.coefficients, cfg.stepper.dealias)?;
    let tol = cfg
        .equilibria
        .tolerance
        .unwrap_or_else(|| solver.default_tolerance());
    let mut guesses = vec![domain.zeros()];
    guesses.extend(default_guesses(&domain, &cfg.equilibria.scales));
    if cfg.equilibria.trajectories > 0 {
        let stepper = Stepper::new(&domain, &cfg.coefficients, cfg.stepper)?;
        let ics = random_ics(
            &domain,
            cfg.equilibria.trajectories,
            6,
            cfg.equilibria.amplitude,
            cfg.run.seed,
        );
        let ends = execution(cfg).try_map(&ics, |ic| {
            stepper
                .simulate(ic, cfg.run.horizon, usize::MAX)
                .map(|t| t.last().u.clone())
        })?;
        guesses.extend(ends);
    }
    let mut library = EquilibriumLibrary::new(&domain);
    library.metadata.config_sha256 = Some(loaded.sha256.clone());
    library.extend_from_guesses(
        &solver,
        &guesses,
        tol,
        cfg.equilibria.max_iters,
        execution(cfg),
    )?;
    let mut text = library.to_json()?;
    text.push('\n');
    loaded.out.write("equilibria.json", text.as_bytes())?;
    println!(
        "{} equilibria from {} guesses",
        library.len(),
        guesses.len()
    );
    for e in library.entries() {
        let spectrum = e.spectrum.as_ref().map_or(String::new(), |s| {
            format!(
                ", jacobian eigenvalues in [{:.4e}, {:.4e}]",
                s.min_eigenvalue, s.max_eigenvalue
            )
        });
        println!(
            "  |grad u|^2 = {:.6e}, residual {:.2e}{spectrum}",
            e.s_star, e.residual_norm
        );
    }
    Ok(0)
}

fn run_probe(kind: ProbeKind, cfg: &RunConfig) -> Result<ProbeReport, CliError> {
    let domain = cfg.domain.build()?;
    let stepper = Stepper::new(&domain, &cfg.coefficients, cfg.stepper)?;
    let exec = execution(cfg);
    let (horizon, stride, seed) = (cfg.run.horizon, cfg.run.stride, cfg.run.seed);
    let p = &cfg.probe;
    Ok(match kind {
        ProbeKind::Absorbing => {
            let b = &p.absorbing;
            if !(b.radius_min > 0.0 && b.ratio > 1.0 && b.radius_max >= b.radius_min) {
                return Err(CliError::Config(
                    "probe.absorbing needs 0 < radius_min <= radius_max and ratio > 1".into(),
                ));
            }
            let ensemble = sample_ball(&domain, b.members, b.radius, b.modes, seed);
            absorbing_probe(
                &stepper,
                &ensemble,
                &log_radii(b.radius_min, b.radius_max, b.ratio),
                horizon,
                stride,
                exec,
            )?
        }
        ProbeKind::Splitting => {
            let ic = cfg.initial.build(&domain, seed)?;
            splitting_probe(&stepper, &ic, p.splitting.nu, horizon, stride)?
        }
        ProbeKind::Quasistab => {
            let pairs = p.quasistab.pair_spec().build(&domain, seed);
            quasi_stability_probe(&stepper, &pairs, p.quasistab.mode, horizon, stride, exec)?
        }
        ProbeKind::Determining => {
            let pairs = p.determining.pair_spec().build(&domain, seed);
            determining_probe(&stepper, &pairs, p.determining.n_low, horizon, stride, exec)?
        }
        ProbeKind::Dimension => {
            let b = &p.dimension;
            let ics = sample_ball(&domain, b.trajectories, b.radius, b.modes, seed);
            let samples =
                attractor_samples(&stepper, &ics, b.burn_in, b.per_trajectory, b.spacing, exec)?;
            let points: Vec<Vec<f64>> = samples
                .iter()
                .map(|s| embed(&domain, s, b.embed_modes))
                .collect();
            let extent = embedded_extent(&points);
            let scales = dyadic_scales(if extent > 0.0 { extent } else { 1.0 }, b.scales);
            dimension_probe(&domain, &samples, b.embed_modes, &scales)?
        }
    })
}

pub fn probe(kind: ProbeKind, path: &Path, out: Option<&Path>) -> Result<u8, CliError> {
    let loaded = load(path, out)?;
    let mut report = run_probe(kind, &loaded.config)?;
    let name = report.settings.name();
    let series_file = format!("{name}_series.csv");
    let mut buf = Vec::new();
    report.series.write_csv(
        &mut buf,
        Some(&loaded.out.header(&format!("{name} series"))),
    )?;
    loaded.out.write(&series_file, &buf)?;
    report.series_file = Some(series_file);
    loaded.out.write_json(&format!("{name}.json"), &report)?;
    let constants: Vec<String> = report
        .constants
        .iter()
        .map(|(k, v)| format!("{k}={v:.6e}"))
        .collect();
    println!("{name}: {:?} [{}]", report.verdict, constants.join(", "));
    for d in &report.diagnostics {
        println!("  note: {d}");
    }
    Ok(0)
}

#[derive(Serialize)]
struct OracleSummary {
    #[serde(flatten)]
    gap: CrossMethodGap,
    within_tolerance: bool,
}

pub fn oracle_compare(path: &Path, out: Option<&Path>) -> Result<u8, CliError> {
    let loaded = load(path, out)?;
    let cfg = &loaded.config;
    let domain = cfg.domain.build()?;
    let ic = cfg.initial.build(&domain, cfg.run.seed)?;
    let gap = cross_method_gap(
        &domain,
        &cfg.coefficients,
        cfg.stepper,
        &ic,
        cfg.oracle.fd_points,
        cfg.run.horizon,
    )?;
    let summary = OracleSummary {
        gap,
        within_tolerance: gap.within_tolerance(),
    };
    loaded.out.write_json("oracle.json", &summary)?;
    println!(
        "gap {:.4e}; spectral estimate {:.4e}; finite-difference estimate {:.4e}; within tolerance: {}",
        gap.gap, gap.spectral_estimate, gap.fd_estimate, summary.within_tolerance
    );
    Ok(0)
}

pub fn sweep(
    path: &Path,
    param: Option<String>,
    values: Vec<String>,
    out: Option<&Path>,
) -> Result<u8, CliError> {
    let loaded = load(path, out)?;
    let block = loaded.config.sweep.clone();
    let parameter = param
        .or_else(|| block.as_ref().map(|b| b.parameter.clone()))
        .ok_or_else(|| CliError::Config("sweep needs --param or a [sweep] block".into()))?;
    let values: Vec<toml::Value> = if values.is_empty() {
        block.map(|b| b.values).unwrap_or_default()
    } else {
        values
            .iter()
            .map(|v| parse_value(v))
            .collect::<Result<_, _>>()?
    };
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let numeric: Vec<f64> = values
        .iter()
        .map(|v| match v {
            toml::Value::Float(x) => Ok(*x),
            toml::Value::Integer(i) => Ok(*i as f64),
            other => Err(CliError::Config(format!(
                "sweep values must be numbers, got {other}"
            ))),
        })
        .collect::<Result<_, _>>()?;

    let base: toml::Value =
        toml::from_str(&loaded.text).map_err(|e| CliError::Config(e.to_string()))?;
    let mut runs = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        let mut doc = base.clone();
        if let Some(t) = doc.as_table_mut() {
            t.remove("sweep");
        }
        set_path(&mut doc, &parameter, v.clone())?;
        let cfg = RunConfig::from_value(doc)?;
        let dir = loaded
            .out
            .child(&format!("run-{i:03}"), format!("{parameter}={v}"));
        runs.push((cfg, dir));
    }
    let summaries =
        execution(&loaded.config).try_map(&runs, |(cfg, dir)| run_simulation(cfg, dir))?;

    let rows: Vec<Vec<f64>> = summaries
        .iter()
        .zip(&numeric)
        .enumerate()
        .map(|(i, (s, &v))| {
            vec![
                i as f64,
                v,
                s.final_time,
                s.energy_initial,
                s.energy_final,
                s.dissipation_final,
                s.residual_final,
                s.max_abs_residual,
                s.newton.iterations as f64,
                s.newton.halvings as f64,
            ]
        })
        .collect();
    let mut buf = Vec::new();
    write_table(
        &mut buf,
        Some(&loaded.out.header(&format!("sweep {parameter}"))),
        &[
            "run",
            "value",
            "final_time",
            "energy_initial",
            "energy_final",
            "dissipation_final",
            "residual_final",
            "max_abs_residual",
            "newton_iterations",
            "halvings",
        ],
        rows,
    )?;
    loaded.out.write("aggregate.csv", &buf)?;
    println!(
        "{} runs over {parameter}; aggregate in {}",
        runs.len(),
        loaded.out.path("aggregate.csv").display()
    );
    Ok(0)
}

fn parse_value(text: &str) -> Result<toml::Value, CliError> {
    #[derive(serde::Deserialize)]
    struct Wrapper {
        v: toml::Value,
    }
    toml::from_str::<Wrapper>(&format!("v = {text}"))
        .map(|w| w.v)
        .map_err(|e| CliError::Config(format!("sweep value '{text}': {e}")))
}
