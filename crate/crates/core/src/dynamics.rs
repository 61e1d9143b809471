//! Time integration of the truncated modal system
//!
//! ```text
//! ü_k + σ(S)λ_k u̇_k + φ(S)λ_k u_k + (f(u))_k = h_k,   S = Σ λ_j u_j²,
//! ```
//!
//! and norms of trajectory differences.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::energetics::{EnergyFunctional, EnergyLedger};
use crate::error::{Error, Result};
use crate::model::CoefficientSet;
use crate::spectral::{Collocation, Domain, ModalVector, DEFAULT_DEALIAS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalState {
    pub t: f64,
    pub u: ModalVector,
    /// u_t
    pub v: ModalVector,
}

impl ModalState {
    pub fn new(t: f64, u: ModalVector, v: ModalVector) -> Self {
        ModalState { t, u, v }
    }

    pub fn at_rest(t: f64, u: ModalVector) -> Self {
        let v = ModalVector::zeros(u.len());
        ModalState { t, u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.u.is_finite() && self.v.is_finite()
    }

    pub fn negated(&self) -> Self {
        ModalState {
            t: self.t,
            u: ModalVector(-&self.u.0),
            v: ModalVector(-&self.v.0),
        }
    }

    /// ‖∇u‖² + ‖u_t‖².
    pub fn energy_norm_sq(&self, domain: &Domain) -> f64 {
        domain.grad_norm_sq(&self.u) + self.v.norm_squared()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Fully coupled implicit trapezoidal rule, Newton with the exact
    /// Jacobian. Second order.
    #[default]
    ImplicitTrapezoidal,
    /// Nonlocal coefficients frozen at the current state, linear terms
    /// trapezoidal, source explicit. First order.
    SemiImplicitFrozen,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Tolerance on the scaled Newton residual.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub dealias: f64,
    /// Maximum number of local dt halvings after a failed step.
    pub retry_budget: u32,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            dt: 1e-2,
            scheme: Scheme::ImplicitTrapezoidal,
            newton_tol: 1e-11,
            newton_max_iters: 25,
            dealias: DEFAULT_DEALIAS,
            retry_budget: 5,
        }
    }
}

impl StepperConfig {
    pub fn with_dt(dt: f64) -> Self {
        StepperConfig {
            dt,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iters == 0 {
            return Err(Error::Config(
                "newton tolerance and iteration budget must be positive".into(),
            ));
        }
        if !(self.dealias >= 1.0) {
            return Err(Error::Config(format!(
                "dealias factor {} must be at least 1",
                self.dealias
            )));
        }
        Ok(())
    }
}

/// Newton bookkeeping accumulated over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct NewtonStats {
    pub steps: usize,
    pub iterations: usize,
    pub max_iterations: usize,
    pub halvings: usize,
    pub max_residual: f64,
}

impl NewtonStats {
    pub fn merge(&mut self, other: &NewtonStats) {
        self.steps += other.steps;
        self.iterations += other.iterations;
        self.max_iterations = self.max_iterations.max(other.max_iterations);
        self.halvings += other.halvings;
        self.max_residual = self.max_residual.max(other.max_residual);
    }
}

/// Advances modal states of one problem instance. Immutable once built, so
/// one stepper can drive many trajectories concurrently.
#[derive(Clone, Debug)]
pub struct Stepper {
    domain: Domain,
    coeffs: CoefficientSet,
    cfg: StepperConfig,
    grid: Collocation,
    forcing: ModalVector,
    lambda: DVector<f64>,
    energy: EnergyFunctional,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

impl Stepper {
    pub fn new(domain: &Domain, coeffs: &CoefficientSet, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        coeffs.validate()?;
        Ok(Stepper {
            domain: domain.clone(),
            coeffs: coeffs.clone(),
            cfg,
            grid: Collocation::dealiased(domain, cfg.dealias)?,
            forcing: ModalVector::from_vec(coeffs.forcing_vector(domain.len())?),
            lambda: DVector::from_column_slice(domain.eigenvalues()),
            energy: EnergyFunctional::new(domain, coeffs, cfg.dealias)?,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn coefficients(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Collocation {
        &self.grid
    }

    pub fn forcing(&self) -> &ModalVector {
        &self.forcing
    }

    pub fn energy_functional(&self) -> &EnergyFunctional {
        &self.energy
    }

    /// u_tt = g(u, v) = −σ(S)Λv − φ(S)Λu − Pf(u) + h.
    pub fn acceleration(&self, u: &ModalVector, v: &ModalVector) -> ModalVector {
        let s = self.domain.grad_norm_sq(u);
        let sigma = self.coeffs.sigma.value(s);
        let phi = self.coeffs.phi.value(s);
        let force = self.grid.project(u, &self.coeffs.f);
        let mut g = &self.forcing.0 - &force.0;
        for k in 0..g.len() {
            g[k] -= self.lambda[k] * (sigma * v[k] + phi * u[k]);
        }
        ModalVector(g)
    }

    /// One step of size `cfg.dt` without retries.
    pub fn step(&self, state: &ModalState) -> Result<ModalState> {
        let mut stats = NewtonStats::default();
        self.step_dt(state, self.cfg.dt, &mut stats)
    }

    /// One step of size `dt`; on Newton failure the interval is split in
    /// halves, recursively up to the retry budget.
    pub fn advance(
        &self,
        state: &ModalState,
        dt: f64,
        stats: &mut NewtonStats,
    ) -> Result<ModalState> {
        self.advance_depth(state, dt, 0, stats)
    }

    fn advance_depth(
        &self,
        state: &ModalState,
        dt: f64,
        depth: u32,
        stats: &mut NewtonStats,
    ) -> Result<ModalState> {
        match self.step_dt(state, dt, stats) {
            Ok(next) => Ok(next),
            Err(e @ (Error::NewtonFailure { .. } | Error::SingularJacobian { .. })) => {
                if depth >= self.cfg.retry_budget {
                    return Err(e);
                }
                stats.halvings += 1;
                let mid = self.advance_depth(state, 0.5 * dt, depth + 1, stats)?;
                self.advance_depth(&mid, 0.5 * dt, depth + 1, stats)
            }
            Err(e) => Err(e),
        }
    }

    fn step_dt(&self, state: &ModalState, dt: f64, stats: &mut NewtonStats) -> Result<ModalState> {
        if !state.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite state at t = {}",
                state.t
            )));
        }
        let next = match self.cfg.scheme {
            Scheme::ImplicitTrapezoidal => self.trapezoidal(state, dt, stats)?,
            Scheme::SemiImplicitFrozen => self.frozen(state, dt),
        };
        stats.steps += 1;
        Ok(next)
    }

    fn trapezoidal(
        &self,
        state: &ModalState,
        dt: f64,
        stats: &mut NewtonStats,
    ) -> Result<ModalState> {
        let n = self.domain.len();
        let (u, v) = (&state.u, &state.v);
        let g0 = self.acceleration(u, v);
        let half = 0.5 * dt;
        // forward-Euler predictor for v⁺; u⁺ is eliminated through
        // u⁺ = u + dt/2 (v + v⁺)
        let mut x = &v.0 + &g0.0 * dt;
        let base_scale = 1.0 + inf_norm(&v.0).max(dt * inf_norm(&g0.0));
        let mut last = f64::INFINITY;
        for iter in 0..=self.cfg.newton_max_iters {
            let up = ModalVector(&u.0 + (&v.0 + &x) * half);
            let xv = ModalVector(x.clone());
            let gp = self.acceleration(&up, &xv);
            let r = &x - &v.0 - (&g0.0 + &gp.0) * half;
            let scale = base_scale.max(1.0 + inf_norm(&x));
            last = inf_norm(&r) / scale;
            if last <= self.cfg.newton_tol {
                stats.iterations += iter;
                stats.max_iterations = stats.max_iterations.max(iter);
                stats.max_residual = stats.max_residual.max(last);
                return Ok(ModalState {
                    t: state.t + dt,
                    u: up,
                    v: xv,
                });
            }
            if iter == self.cfg.newton_max_iters || !last.is_finite() {
                break;
            }
            let jac = self.step_jacobian(&up, &xv, dt);
            let delta = jac
                .lu()
                .solve(&(-r))
                .ok_or_else(|| Error::SingularJacobian { rcond: 0.0 })?;
            x += delta;
            debug_assert_eq!(x.len(), n);
        }
        Err(Error::NewtonFailure {
            iterations: self.cfg.newton_max_iters,
            residual: last,
        })
    }

    /// d/dv⁺ of v⁺ − v − dt/2 (g₀ + g(u⁺, v⁺)) with u⁺ = u + dt/2 (v + v⁺):
    /// I + dt/2 σΛ + dt²/4 [φΛ + J_f + 2σ′(Λv⁺)(Λu⁺)ᵀ + 2φ′(Λu⁺)(Λu⁺)ᵀ].
    fn step_jacobian(&self, up: &ModalVector, vp: &ModalVector, dt: f64) -> DMatrix<f64> {
        let n = self.domain.len();
        let s = self.domain.grad_norm_sq(up);
        let sigma = self.coeffs.sigma.value(s);
        let dsigma = self.coeffs.sigma.derivative(s);
        let phi = self.coeffs.phi.value(s);
        let dphi = self.coeffs.phi.derivative(s);
        let q = 0.25 * dt * dt;
        let mut jac = if self.coeffs.f.is_zero() {
            DMatrix::zeros(n, n)
        } else {
            self.grid.jacobian(up, &self.coeffs.f) * q
        };
        let lu = up.0.component_mul(&self.lambda);
        let lv = vp.0.component_mul(&self.lambda);
        if dsigma != 0.0 {
            jac.ger(2.0 * q * dsigma, &lv, &lu, 1.0);
        }
        if dphi != 0.0 {
            jac.ger(2.0 * q * dphi, &lu, &lu, 1.0);
        }
        for k in 0..n {
            jac[(k, k)] += 1.0 + 0.5 * dt * sigma * self.lambda[k] + q * phi * self.lambda[k];
        }
        jac
    }

    fn frozen(&self, state: &ModalState, dt: f64) -> ModalState {
        let (u, v) = (&state.u, &state.v);
        let s = self.domain.grad_norm_sq(u);
        let sigma = self.coeffs.sigma.value(s);
        let phi = self.coeffs.phi.value(s);
        let force = &self.forcing.0 - &self.grid.project(u, &self.coeffs.f).0;
        let half = 0.5 * dt;
        let n = u.len();
        let mut vn = DVector::zeros(n);
        let mut un = DVector::zeros(n);
        for k in 0..n {
            let l = self.lambda[k];
            let lhs = 1.0 + half * sigma * l + half * half * phi * l;
            let rhs = v[k] - half * sigma * l * v[k] - half * phi * l * (2.0 * u[k] + half * v[k])
                + dt * force[k];
            vn[k] = rhs / lhs;
            un[k] = u[k] + half * (v[k] + vn[k]);
        }
        ModalState {
            t: state.t + dt,
            u: ModalVector(un),
            v: ModalVector(vn),
        }
    }

    /// Integrates over [t₀, t₀ + horizon] with the configured dt, keeping
    /// every `stride`-th state (and the last). The ledger integrates the
    /// dissipation on every step. Sample times are t₀ + i·dt exactly.
    pub fn simulate(&self, ic: &ModalState, horizon: f64, stride: usize) -> Result<Trajectory> {
        self.simulate_observed(ic, horizon, stride, |_, _| Ok(()))
    }

    /// As [`Stepper::simulate`], calling `observe(previous, next)` after
    /// every step.
    pub fn simulate_observed<F>(
        &self,
        ic: &ModalState,
        horizon: f64,
        stride: usize,
        mut observe: F,
    ) -> Result<Trajectory>
    where
        F: FnMut(&ModalState, &ModalState) -> Result<()>,
    {
        if !(horizon > 0.0) {
            return Err(Error::Config(format!("horizon {horizon} must be positive")));
        }
        if ic.u.len() != self.domain.len() || ic.v.len() != self.domain.len() {
            return Err(Error::Config(
                "initial condition does not match the domain".into(),
            ));
        }
        let stride = stride.max(1);
        let dt = self.cfg.dt;
        let steps = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
        let mut stats = NewtonStats::default();
        let mut ledger = EnergyLedger::start(&self.energy, ic.t, &ic.u, &ic.v);
        let mut states = vec![ic.clone()];
        let mut current = ic.clone();
        for i in 1..=steps {
            let mut next = self.advance(&current, dt, &mut stats)?;
            next.t = ic.t + i as f64 * dt;
            observe(&current, &next)?;
            if i % stride == 0 || i == steps {
                ledger.update(&self.energy, next.t, &next.u, &next.v)?;
                states.push(next.clone());
            } else {
                ledger.accumulate(&self.energy, next.t, &next.u, &next.v)?;
            }
            current = next;
        }
        Ok(Trajectory {
            states,
            ledger,
            stats,
        })
    }
}

/// Sampled states with the attached energy ledger. The ledger records the
/// same times as the states.
#[derive(Clone, Debug)]
pub struct Trajectory {
    states: Vec<ModalState>,
    ledger: EnergyLedger,
    stats: NewtonStats,
}

impl Trajectory {
    pub fn states(&self) -> &[ModalState] {
        &self.states
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn stats(&self) -> &NewtonStats {
        &self.stats
    }

    pub fn last(&self) -> &ModalState {
        self.states
            .last()
            .expect("trajectory holds its initial state")
    }

    pub fn negated(&self) -> Vec<ModalState> {
        self.states.iter().map(ModalState::negated).collect()
    }

    /// CSV with t, the first `modes` coefficients of u and u_t, and
    /// ‖u‖², ‖∇u‖², ‖u_t‖².
    pub fn write_csv<W: Write>(
        &self,
        out: W,
        domain: &Domain,
        modes: usize,
        header: Option<&str>,
    ) -> Result<()> {
        let m = modes.min(domain.len());
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=m).map(|k| format!("u_{k}")));
        cols.extend((1..=m).map(|k| format!("v_{k}")));
        cols.extend(["l2norm2", "gradnorm2", "kinetic2"].map(String::from));
        let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
        let rows = self.states.iter().map(|s| {
            let mut row = Vec::with_capacity(2 * m + 4);
            row.push(s.t);
            row.extend(s.u.iter().take(m));
            row.extend(s.v.iter().take(m));
            row.push(s.u.norm_squared());
            row.push(domain.grad_norm_sq(&s.u));
            row.push(s.v.norm_squared());
            row
        });
        crate::io::write_table(out, header, &refs, rows)
    }
}

/// Norms of z = u¹ − u² along two equally sampled trajectories.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DifferenceSeries {
    pub t: Vec<f64>,
    /// ‖z_t‖²₋₁
    pub vel_neg: Vec<f64>,
    /// ‖∇z‖²
    pub grad: Vec<f64>,
    /// ‖z_t‖²
    pub vel: Vec<f64>,
    /// ‖z‖²
    pub l2: Vec<f64>,
    /// ∫₀ᵗ ‖z_t‖², trapezoidal over the samples.
    pub vel_integral: Vec<f64>,
}

impl DifferenceSeries {
    /// ‖z_t‖²₋₁ + ‖∇z‖² + ∫₀ᵗ ‖z_t‖², the left side of the Lipschitz bound.
    pub fn lipschitz_lhs(&self) -> Vec<f64> {
        (0..self.t.len())
            .map(|i| self.vel_neg[i] + self.grad[i] + self.vel_integral[i])
            .collect()
    }
}

fn check_aligned(a: &[ModalState], b: &[ModalState]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Sequencing(format!(
            "sample counts differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    for (x, y) in a.iter().zip(b) {
        if (x.t - y.t).abs() > 1e-12 * (1.0 + x.t.abs()) {
            return Err(Error::Sequencing(format!(
                "sample times differ: {} vs {}",
                x.t, y.t
            )));
        }
    }
    Ok(())
}

pub fn difference_metrics(
    domain: &Domain,
    a: &[ModalState],
    b: &[ModalState],
) -> Result<DifferenceSeries> {
    check_aligned(a, b)?;
    let mut out = DifferenceSeries::default();
    let mut integral = 0.0;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let z = ModalVector(&x.u.0 - &y.u.0);
        let zt = ModalVector(&x.v.0 - &y.v.0);
        let vel = zt.norm_squared();
        if i > 0 {
            integral += 0.5 * (x.t - out.t[i - 1]) * (vel + out.vel[i - 1]);
        }
        out.t.push(x.t);
        out.vel_neg.push(domain.sobolev_norm_sq(&zt, -1.0));
        out.grad.push(domain.grad_norm_sq(&z));
        out.vel.push(vel);
        out.l2.push(z.norm_squared());
        out.vel_integral.push(integral);
    }
    Ok(out)
}

/// ∫₀ᵗ [∫|z|^{p+1} + ∫(|u¹|^{p−1} + |u²|^{p−1})|z|²] for the supercritical
/// class, by collocation in space and trapezoid in time. Recorded only; no
/// criterion is attached to it.
pub fn supercritical_difference_integral(
    grid: &Collocation,
    p: f64,
    a: &[ModalState],
    b: &[ModalState],
) -> Result<Vec<f64>> {
    check_aligned(a, b)?;
    let mut out = Vec::with_capacity(a.len());
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (x, y) in a.iter().zip(b) {
        let g1 = grid.synthesize(&x.u);
        let g2 = grid.synthesize(&y.u);
        let val = grid.weight()
            * g1.iter()
                .zip(g2.iter())
                .map(|(&p1, &p2)| {
                    let z = p1 - p2;
                    z.abs().powf(p + 1.0)
                        + (p1.abs().powf(p - 1.0) + p2.abs().powf(p - 1.0)) * z * z
                })
                .sum::<f64>();
        if let Some((t0, v0)) = prev {
            acc += 0.5 * (x.t - t0) * (val + v0);
        }
        prev = Some((x.t, val));
        out.push(acc);
    }
    Ok(out)
}
