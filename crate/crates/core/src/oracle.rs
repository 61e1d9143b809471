//! Second-order finite differences on an interval, integrated with the same
//! implicit trapezoidal scheme as [`crate::dynamics`]. Used to cross-check
//! the spectral solver.

use std::io::Write;

use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::{ModalState, StepperConfig};
use crate::error::{Error, Result};
use crate::model::CoefficientSet;
use crate::spectral::{Domain, DomainKind, ModalVector};

/// M interior nodes x_i = i·Δx on (0, L), Δx = L/(M + 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FdGrid {
    pub length: f64,
    pub points: usize,
}

impl FdGrid {
    pub fn new(length: f64, points: usize) -> Result<Self> {
        if points < 16 {
            return Err(Error::Config(format!(
                "finite-difference grid needs at least 16 points, got {points}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Domain(format!(
                "interval length {length} must be positive"
            )));
        }
        Ok(FdGrid { length, points })
    }

    pub fn dx(&self) -> f64 {
        self.length / (self.points + 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let dx = self.dx();
        (1..=self.points).map(|i| i as f64 * dx).collect()
    }

    /// The grid with every interval halved; its odd nodes are this grid's
    /// nodes.
    pub fn refined(&self) -> FdGrid {
        FdGrid {
            length: self.length,
            points: 2 * self.points + 1,
        }
    }

    /// K u with K = −Δ_h = tridiag(−1, 2, −1)/Δx².
    pub fn apply_k(&self, u: &DVector<f64>) -> DVector<f64> {
        let m = self.points;
        let inv = 1.0 / (self.dx() * self.dx());
        DVector::from_fn(m, |i, _| {
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let right = if i + 1 < m { u[i + 1] } else { 0.0 };
            (2.0 * u[i] - left - right) * inv
        })
    }

    /// Δx uᵀ K u, the discrete ‖∇u‖².
    pub fn grad_norm_sq(&self, u: &DVector<f64>) -> f64 {
        self.dx() * u.dot(&self.apply_k(u))
    }

    pub fn l2_norm_sq(&self, u: &DVector<f64>) -> f64 {
        self.dx() * u.norm_squared()
    }

    /// Eigenvalues (4/Δx²) sin²(kπΔx/(2L)) of K, k = 1..=count.
    pub fn eigenvalues(&self, count: usize) -> Vec<f64> {
        let dx = self.dx();
        (1..=count.min(self.points))
            .map(|k| {
                4.0 / (dx * dx)
                    * (k as f64 * std::f64::consts::PI * dx / (2.0 * self.length))
                        .sin()
                        .powi(2)
            })
            .collect()
    }

    /// Samples a modal field on the nodes.
    pub fn sample(&self, domain: &Domain, c: &ModalVector) -> DVector<f64> {
        DVector::from_iterator(
            self.points,
            self.nodes().into_iter().map(|x| domain.evaluate_1d(c, x)),
        )
    }

    pub fn sample_state(&self, domain: &Domain, s: &ModalState) -> FdState {
        FdState {
            t: s.t,
            u: self.sample(domain, &s.u),
            v: self.sample(domain, &s.v),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdState {
    pub t: f64,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FdLedgerRecord {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct FdTrajectory {
    pub grid: FdGrid,
    pub states: Vec<FdState>,
    pub ledger: Vec<FdLedgerRecord>,
}

impl FdTrajectory {
    pub fn last(&self) -> &FdState {
        self.states
            .last()
            .expect("trajectory holds its initial state")
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.ledger
            .iter()
            .map(|r| r.residual.abs())
            .fold(0.0, f64::max)
    }

    /// CSV with t followed by u at every `every`-th node.
    pub fn write_csv<W: Write>(&self, out: W, every: usize, header: Option<&str>) -> Result<()> {
        let every = every.max(1);
        let idx: Vec<usize> = (0..self.grid.points).step_by(every).collect();
        let names: Vec<String> = std::iter::once("t".to_string())
            .chain(idx.iter().map(|i| format!("u_x{}", i + 1)))
            .collect();
        let cols: Vec<&str> = names.iter().map(String::as_str).collect();
        let rows = self.states.iter().map(|s| {
            std::iter::once(s.t)
                .chain(idx.iter().map(|&i| s.u[i]))
                .collect::<Vec<_>>()
        });
        crate::io::write_table(out, header, &cols, rows)
    }
}

/// Thomas algorithm for a constant-off-diagonal tridiagonal system.
fn thomas(diag: &[f64], off: f64, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return None;
    }
    c[0] = off / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - off * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return None;
        }
        c[i] = off / beta;
        d[i] = (rhs[i] - off * d[i - 1]) / beta;
    }
    let mut x = DVector::zeros(n);
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Some(x)
}

/// Finite-difference counterpart of [`crate::dynamics::Stepper`].
#[derive(Clone, Debug)]
pub struct FdStepper {
    grid: FdGrid,
    coeffs: CoefficientSet,
    cfg: StepperConfig,
    forcing: DVector<f64>,
}

impl FdStepper {
    /// `domain` must be the interval of `grid`; it supplies the modal
    /// forcing's basis.
    pub fn new(
        grid: FdGrid,
        domain: &Domain,
        coeffs: &CoefficientSet,
        cfg: StepperConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        coeffs.validate()?;
        match domain.kind() {
            DomainKind::Interval { length } if (length - grid.length).abs() <= 1e-12 * length => {}
            _ => {
                return Err(Error::Config(
                    "finite-difference oracle is one-dimensional and must match the interval"
                        .into(),
                ))
            }
        }
        let forcing = grid.sample(
            domain,
            &ModalVector::from_vec(coeffs.forcing_vector(domain.len())?),
        );
        Ok(FdStepper {
            grid,
            coeffs: coeffs.clone(),
            cfg,
            forcing,
        })
    }

    pub fn grid(&self) -> &FdGrid {
        &self.grid
    }

    pub fn acceleration(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let s = self.grid.grad_norm_sq(u);
        let sigma = self.coeffs.sigma.value(s);
        let phi = self.coeffs.phi.value(s);
        let ku = self.grid.apply_k(u);
        let kv = self.grid.apply_k(v);
        DVector::from_fn(u.len(), |i, _| {
            -sigma * kv[i] - phi * ku[i] - self.coeffs.f.value(u[i]) + self.forcing[i]
        })
    }

    pub fn energy(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let dx = self.grid.dx();
        let s = self.grid.grad_norm_sq(u);
        let pot: f64 = u
            .iter()
            .map(|&x| self.coeffs.f.antiderivative(x))
            .sum::<f64>()
            * dx;
        0.5 * self.grid.l2_norm_sq(v) + 0.5 * self.coeffs.phi.antiderivative(s) + pot
            - dx * self.forcing.dot(u)
    }

    pub fn dissipation_rate(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.coeffs.sigma.value(self.grid.grad_norm_sq(u)) * self.grid.grad_norm_sq(v)
    }

    fn step_dt(&self, s: &FdState, dt: f64) -> Result<FdState> {
        let (u, v) = (&s.u, &s.v);
        let m = self.grid.points;
        let dx = self.grid.dx();
        let inv = 1.0 / (dx * dx);
        let g0 = self.acceleration(u, v);
        let half = 0.5 * dt;
        let q = half * half;
        let mut x = v + &g0 * dt;
        let base = 1.0 + v.amax().max(dt * g0.amax());
        let mut last = f64::INFINITY;
        for _ in 0..=self.cfg.newton_max_iters {
            let up = u + (v + &x) * half;
            let r = &x - v - (&g0 + self.acceleration(&up, &x)) * half;
            last = r.amax() / base.max(1.0 + x.amax());
            if last <= self.cfg.newton_tol {
                return Ok(FdState {
                    t: s.t + dt,
                    u: up,
                    v: x,
                });
            }
            if !last.is_finite() {
                break;
            }
            // I + dt/2 σK + dt²/4 [φK + diag f′] + c bᵀ, with b = K u⁺ and
            // c = dt²/2 Δx (σ′ K v⁺ + φ′ K u⁺)
            let sq = self.grid.grad_norm_sq(&up);
            let sigma = self.coeffs.sigma.value(sq);
            let phi = self.coeffs.phi.value(sq);
            let k_coef = half * sigma + q * phi;
            let diag: Vec<f64> = (0..m)
                .map(|i| 1.0 + 2.0 * k_coef * inv + q * self.coeffs.f.derivative(up[i]))
                .collect();
            let off = -k_coef * inv;
            let b = self.grid.apply_k(&up);
            let c = (self.grid.apply_k(&x) * self.coeffs.sigma.derivative(sq)
                + &b * self.coeffs.phi.derivative(sq))
                * (2.0 * q * dx);
            let rhs = -r;
            let y = thomas(&diag, off, &rhs).ok_or(Error::SingularJacobian { rcond: 0.0 })?;
            let delta = if c.amax() == 0.0 {
                y
            } else {
                let z = thomas(&diag, off, &c).ok_or(Error::SingularJacobian { rcond: 0.0 })?;
                let denom = 1.0 + b.dot(&z);
                if denom == 0.0 {
                    return Err(Error::SingularJacobian { rcond: 0.0 });
                }
                &y - z * (b.dot(&y) / denom)
            };
            x += delta;
        }
        Err(Error::NewtonFailure {
            iterations: self.cfg.newton_max_iters,
            residual: last,
        })
    }

    fn advance(&self, s: &FdState, dt: f64, depth: u32) -> Result<FdState> {
        match self.step_dt(s, dt) {
            Err(Error::NewtonFailure { .. } | Error::SingularJacobian { .. })
                if depth < self.cfg.retry_budget =>
            {
                let mid = self.advance(s, 0.5 * dt, depth + 1)?;
                self.advance(&mid, 0.5 * dt, depth + 1)
            }
            other => other,
        }
    }

    pub fn simulate(&self, ic: &FdState, horizon: f64, stride: usize) -> Result<FdTrajectory> {
        if !(horizon > 0.0) {
            return Err(Error::Config(format!("horizon {horizon} must be positive")));
        }
        if ic.u.len() != self.grid.points || ic.v.len() != self.grid.points {
            return Err(Error::Config(
                "initial condition does not match the grid".into(),
            ));
        }
        let dt = self.cfg.dt;
        let steps = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
        let stride = stride.max(1);
        let e0 = self.energy(&ic.u, &ic.v);
        let mut d = 0.0;
        let mut rate = self.dissipation_rate(&ic.u, &ic.v);
        let mut ledger = vec![FdLedgerRecord {
            t: ic.t,
            energy: e0,
            dissipation: 0.0,
            residual: 0.0,
        }];
        let mut states = vec![ic.clone()];
        let mut cur = ic.clone();
        for i in 1..=steps {
            let mut next = self.advance(&cur, dt, 0)?;
            next.t = ic.t + i as f64 * dt;
            let r = self.dissipation_rate(&next.u, &next.v);
            d += 0.5 * dt * (rate + r);
            rate = r;
            if i % stride == 0 || i == steps {
                let e = self.energy(&next.u, &next.v);
                ledger.push(FdLedgerRecord {
                    t: next.t,
                    energy: e,
                    dissipation: d,
                    residual: e + d - e0,
                });
                states.push(next.clone());
            }
            cur = next;
        }
        Ok(FdTrajectory {
            grid: self.grid,
            states,
            ledger,
        })
    }
}

/// ‖∇(u₁ − u₂)‖² + ‖v₁ − v₂‖² in the discrete norms of `grid`.
pub fn energy_gap_sq(grid: &FdGrid, a: &FdState, b: &FdState) -> f64 {
    grid.grad_norm_sq(&(&a.u - &b.u)) + grid.l2_norm_sq(&(&a.v - &b.v))
}

/// Restriction of a refined-grid state to the coarse nodes.
pub fn restrict(fine: &FdState) -> FdState {
    let pick = |x: &DVector<f64>| {
        DVector::from_iterator((x.len() - 1) / 2, x.iter().skip(1).step_by(2).copied())
    };
    FdState {
        t: fine.t,
        u: pick(&fine.u),
        v: pick(&fine.v),
    }
}

/// Terminal energy-norm gap between the spectral and finite-difference
/// solutions, with each method's self-convergence estimate
/// (4/3)·‖coarse − refined‖ from halving both dt and the spatial step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrossMethodGap {
    pub gap: f64,
    pub spectral_estimate: f64,
    pub fd_estimate: f64,
    pub spectral_modes: usize,
    pub fd_points: usize,
    pub dt: f64,
    pub horizon: f64,
}

impl CrossMethodGap {
    pub fn within_tolerance(&self) -> bool {
        self.gap <= self.spectral_estimate + self.fd_estimate
    }
}

pub fn cross_method_gap(
    domain: &Domain,
    coeffs: &CoefficientSet,
    cfg: StepperConfig,
    ic: &ModalState,
    fd_points: usize,
    horizon: f64,
) -> Result<CrossMethodGap> {
    use crate::dynamics::Stepper;
    let length = match domain.kind() {
        DomainKind::Interval { length } => length,
        DomainKind::Rectangle { .. } => {
            return Err(Error::Config(
                "cross-method comparison is one-dimensional".into(),
            ))
        }
    };
    let half_cfg = StepperConfig {
        dt: 0.5 * cfg.dt,
        ..cfg
    };
    let fine_domain = Domain::interval(length, 2 * domain.len())?;
    let mut fine_ic = fine_domain.zeros();
    let mut fine_iv = fine_domain.zeros();
    for k in 0..domain.len() {
        fine_ic[k] = ic.u[k];
        fine_iv[k] = ic.v[k];
    }
    let fine_state = ModalState::new(ic.t, fine_ic, fine_iv);

    let grid = FdGrid::new(length, fd_points)?;
    let fine_grid = grid.refined();
    let runs: Vec<Result<FdState>> =
        crate::parallel::Execution::default().map(&[0u8, 1, 2, 3], |&which| match which {
            0 => Ok(grid.sample_state(
                domain,
                Stepper::new(domain, coeffs, cfg)?
                    .simulate(ic, horizon, usize::MAX)?
                    .last(),
            )),
            1 => Ok(grid.sample_state(
                &fine_domain,
                Stepper::new(&fine_domain, coeffs, half_cfg)?
                    .simulate(&fine_state, horizon, usize::MAX)?
                    .last(),
            )),
            2 => Ok(FdStepper::new(grid, domain, coeffs, cfg)?
                .simulate(&grid.sample_state(domain, ic), horizon, usize::MAX)?
                .last()
                .clone()),
            _ => Ok(restrict(
                FdStepper::new(fine_grid, domain, coeffs, half_cfg)?
                    .simulate(&fine_grid.sample_state(domain, ic), horizon, usize::MAX)?
                    .last(),
            )),
        });
    let mut it = runs.into_iter();
    let (spectral, spectral_fine, fd, fd_fine) = (
        it.next().unwrap()?,
        it.next().unwrap()?,
        it.next().unwrap()?,
        it.next().unwrap()?,
    );
    Ok(CrossMethodGap {
        gap: energy_gap_sq(&grid, &spectral, &fd).sqrt(),
        spectral_estimate: 4.0 / 3.0 * energy_gap_sq(&grid, &spectral, &spectral_fine).sqrt(),
        fd_estimate: 4.0 / 3.0 * energy_gap_sq(&grid, &fd, &fd_fine).sqrt(),
        spectral_modes: domain.len(),
        fd_points,
        dt: cfg.dt,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Damping, Source, Stiffness};
    use std::f64::consts::PI;

    fn linear() -> (Domain, CoefficientSet) {
        let d = Domain::interval(PI, 4).unwrap();
        let c = CoefficientSet::new(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::Constant { phi0: 1.0 },
            Source::Zero,
            vec![],
        )
        .unwrap();
        (d, c)
    }

    #[test]
    fn thomas_matches_dense_solve() {
        let diag = vec![4.0, 5.0, 6.0, 7.0];
        let rhs = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let x = thomas(&diag, -1.0, &rhs).unwrap();
        let mut a = nalgebra::DMatrix::from_diagonal(&DVector::from_vec(diag));
        for i in 0..3 {
            a[(i, i + 1)] = -1.0;
            a[(i + 1, i)] = -1.0;
        }
        assert!((a * x - rhs).amax() < 1e-14);
    }

    #[test]
    fn rejects_coarse_grid() {
        assert!(FdGrid::new(PI, 8).is_err());
    }

    #[test]
    fn zero_stays_zero() {
        let (d, c) = linear();
        let g = FdGrid::new(PI, 32).unwrap();
        let s = FdStepper::new(g, &d, &c, StepperConfig::with_dt(0.01)).unwrap();
        let z = FdState {
            t: 0.0,
            u: DVector::zeros(32),
            v: DVector::zeros(32),
        };
        assert_eq!(s.simulate(&z, 0.5, 10).unwrap().last().u.amax(), 0.0);
    }

    #[test]
    fn eigenvalues_agree_to_second_order() {
        let a = FdGrid::new(PI, 63).unwrap();
        let b = a.refined();
        for k in 0..5 {
            let exact = ((k + 1) as f64).powi(2);
            let ea = (a.eigenvalues(5)[k] - exact).abs();
            let eb = (b.eigenvalues(5)[k] - exact).abs();
            let order = (ea / eb).log2();
            assert!((order - 2.0).abs() < 0.05, "mode {k}: order {order}");
        }
    }

    #[test]
    fn single_mode_converges_in_space_at_second_order() {
        // σ = φ = 1, f = 0 on (0, π): u = a(t) sin x with a the damped
        // oscillator of frequency √(λ_h) on the grid, λ_h → 1 at O(Δx²).
        let (d, c) = linear();
        let cfg = StepperConfig::with_dt(1e-3);
        let exact = {
            let w = 3f64.sqrt() / 2.0;
            (-0.5f64).exp() * (w.cos() + w.sin() / (2.0 * w))
        };
        let ic = ModalState::at_rest(0.0, d.unit(0));
        let err = |m: usize| {
            let g = FdGrid::new(PI, m).unwrap();
            let s = FdStepper::new(g, &d, &c, cfg).unwrap();
            let traj = s
                .simulate(&g.sample_state(&d, &ic), 1.0, usize::MAX)
                .unwrap();
            let reference = g.sample(&d, &ModalVector(d.unit(0).0 * exact));
            (&traj.last().u - reference).amax()
        };
        let (e1, e2) = (err(31), err(63));
        let order = (e1 / e2).log2();
        assert!(order > 1.8 && order < 2.3, "order {order} ({e1:e}, {e2:e})");
    }

    #[test]
    fn rank_one_newton_matches_spectral_on_nonlocal_problem() {
        let d = Domain::interval(PI, 16).unwrap();
        let c = CoefficientSet::new(
            Damping::PowerAffine {
                sigma0: 1.0,
                sigma1: 1.0,
                beta: 1.0,
            },
            Stiffness::PowerAffine {
                phi0: 1.0,
                phi1: 1.0,
                alpha: 1.0,
            },
            Source::CubicMinusLinear { a: 1.0, b: 1.0 },
            vec![],
        )
        .unwrap();
        let ic = ModalState::at_rest(
            0.0,
            ModalVector::from_vec(
                (0..16)
                    .map(|k| if k < 2 { 0.8 / (k + 1) as f64 } else { 0.0 })
                    .collect(),
            ),
        );
        let gap = cross_method_gap(&d, &c, StepperConfig::with_dt(0.01), &ic, 127, 0.5).unwrap();
        assert!(gap.gap < 1e-2, "{gap:?}");
        assert!(gap.within_tolerance(), "{gap:?}");
    }
}
