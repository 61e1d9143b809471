use nalgebra::{DMatrix, DVector};

use crate::dynamics::{ModalState, NewtonStats, Stepper};
use crate::error::{Error, Result};
use crate::model::Verdict;
use crate::spectral::ModalVector;

use super::{
    assumptions, fit::log_linear_fit, refuse, Judgement, ProbeReport, ProbeSettings, SeriesTable,
};

/// Nonlocal coefficients of the u trajectory at one time level, with the
/// forcing of the w equation, h_u = −u_tt + νu + h.
struct Level {
    sigma: f64,
    phi: f64,
    h_u: DVector<f64>,
}

struct Splitter<'a> {
    stepper: &'a Stepper,
    lambda: DVector<f64>,
    nu: f64,
    tol: f64,
    max_iters: usize,
}

impl Splitter<'_> {
    fn level(&self, s: &ModalState) -> Level {
        let d = self.stepper.domain();
        let c = self.stepper.coefficients();
        let sq = d.grad_norm_sq(&s.u);
        let utt = self.stepper.acceleration(&s.u, &s.v);
        Level {
            sigma: c.sigma.value(sq),
            phi: c.phi.value(sq),
            h_u: &s.u.0 * self.nu - &utt.0 + &self.stepper.forcing().0,
        }
    }

    fn force(&self, x: &DVector<f64>) -> DVector<f64> {
        self.stepper
            .grid()
            .project(&ModalVector(x.clone()), &self.stepper.coefficients().f)
            .0
    }

    /// (σΛ)⁻¹[−φΛx − νx − N(x)].
    fn rate(&self, lv: &Level, x: &DVector<f64>, nonlinear: &DVector<f64>) -> DVector<f64> {
        let mut r = DVector::zeros(x.len());
        for k in 0..x.len() {
            let l = self.lambda[k];
            r[k] = (-lv.phi * l * x[k] - self.nu * x[k] - nonlinear[k]) / (lv.sigma * l);
        }
        r
    }

    /// w-rate: N(w) = Pf(w) − h_u.
    fn w_rate(&self, lv: &Level, w: &DVector<f64>) -> DVector<f64> {
        self.rate(lv, w, &(self.force(w) - &lv.h_u))
    }

    /// v-rate: N(v) = Pf(w + v) − Pf(w).
    fn v_rate(
        &self,
        lv: &Level,
        w: &DVector<f64>,
        fw: &DVector<f64>,
        v: &DVector<f64>,
    ) -> DVector<f64> {
        self.rate(lv, v, &(self.force(&(w + v)) - fw))
    }

    /// I + dt/2 (σΛ)⁻¹(φΛ + ν + J_f(at)).
    fn jacobian(&self, lv: &Level, at: &DVector<f64>, dt: f64) -> DMatrix<f64> {
        let n = at.len();
        let f = &self.stepper.coefficients().f;
        let mut jac = if f.is_zero() {
            DMatrix::zeros(n, n)
        } else {
            self.stepper.grid().jacobian(&ModalVector(at.clone()), f)
        };
        for k in 0..n {
            jac[(k, k)] += lv.phi * self.lambda[k] + self.nu;
        }
        for k in 0..n {
            let scale = 0.5 * dt / (lv.sigma * self.lambda[k]);
            jac.row_mut(k).scale_mut(scale);
            jac[(k, k)] += 1.0;
        }
        jac
    }

    /// Trapezoidal step x⁺ = x + dt/2 (a₀ + rate(x⁺)) by Newton; one extra
    /// iteration is taken after the tolerance is met.
    fn trapezoid<R, J>(
        &self,
        x: &DVector<f64>,
        a0: &DVector<f64>,
        dt: f64,
        rate: R,
        jac: J,
    ) -> Result<DVector<f64>>
    where
        R: Fn(&DVector<f64>) -> DVector<f64>,
        J: Fn(&DVector<f64>) -> DMatrix<f64>,
    {
        let mut y = x + a0 * dt;
        let mut polish = false;
        for _ in 0..self.max_iters {
            let r = &y - x - (a0 + rate(&y)) * (0.5 * dt);
            let res = r.amax() / (1.0 + x.amax().max(y.amax()));
            if polish || res == 0.0 {
                return Ok(y);
            }
            polish = res <= self.tol;
            let delta = jac(&y)
                .lu()
                .solve(&(-r))
                .ok_or(Error::SingularJacobian { rcond: 0.0 })?;
            y += delta;
        }
        let r = &y - x - (a0 + rate(&y)) * (0.5 * dt);
        let res = r.amax() / (1.0 + x.amax().max(y.amax()));
        if res <= self.tol {
            Ok(y)
        } else {
            Err(Error::NewtonFailure {
                iterations: self.max_iters,
                residual: res,
            })
        }
    }
}

/// Co-integrates u with the pair (w, v), where w solves the forced
/// first-order problem σΛẇ = −φΛw − νw − Pf(w) + h_u from w(0) = 0 and v
/// solves σΛv̇ = −φΛv − νv − [Pf(w + v) − Pf(w)] from v(0) = u(0), with
/// σ, φ taken along u. Records ‖∇v‖², ‖Δw‖² and the defect of u = w + v.
pub fn splitting_probe(
    stepper: &Stepper,
    ic: &ModalState,
    nu: f64,
    horizon: f64,
    stride: usize,
) -> Result<ProbeReport> {
    let report = assumptions(stepper);
    if !report.super_positivity.passed() {
        return Err(refuse(
            "splitting probe needs sigma > 0 and phi > 0",
            report,
        ));
    }
    if !(nu > 0.0) {
        return Err(Error::Config(format!(
            "coupling nu = {nu} must be positive"
        )));
    }
    if !(horizon > 0.0) {
        return Err(Error::Config(format!("horizon {horizon} must be positive")));
    }
    let cfg = *stepper.config();
    let sp = Splitter {
        stepper,
        lambda: DVector::from_column_slice(stepper.domain().eigenvalues()),
        nu,
        tol: cfg.newton_tol,
        max_iters: cfg.newton_max_iters,
    };
    let domain = stepper.domain();
    let dt = cfg.dt;
    let steps = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
    let stride = stride.max(1);

    let mut table = SeriesTable::new(["t", "grad_v2", "lap_w2", "consistency"]);
    let record = |table: &mut SeriesTable, s: &ModalState, w: &DVector<f64>, v: &DVector<f64>| {
        let lap: f64 = w
            .iter()
            .zip(sp.lambda.iter())
            .map(|(x, l)| (l * x).powi(2))
            .sum();
        let grad: f64 = v.iter().zip(sp.lambda.iter()).map(|(x, l)| l * x * x).sum();
        let defect = (w + v - &s.u.0).amax() / (1.0 + s.u.amax());
        table.push(vec![s.t, grad, lap, defect]);
    };

    let mut u = ic.clone();
    let mut w = DVector::zeros(domain.len());
    let mut v = ic.u.0.clone();
    let mut lv = sp.level(&u);
    let mut stats = NewtonStats::default();
    record(&mut table, &u, &w, &v);
    for i in 1..=steps {
        let fw = sp.force(&w);
        let aw = sp.w_rate(&lv, &w);
        let av = sp.v_rate(&lv, &w, &fw, &v);
        let mut next = stepper.advance(&u, dt, &mut stats)?;
        next.t = ic.t + i as f64 * dt;
        let ln = sp.level(&next);
        let wn = sp.trapezoid(
            &w,
            &aw,
            dt,
            |x| sp.w_rate(&ln, x),
            |x| sp.jacobian(&ln, x, dt),
        )?;
        let fwn = sp.force(&wn);
        let vn = sp.trapezoid(
            &v,
            &av,
            dt,
            |y| sp.v_rate(&ln, &wn, &fwn, y),
            |y| sp.jacobian(&ln, &(&wn + y), dt),
        )?;
        u = next;
        w = wn;
        v = vn;
        lv = ln;
        if i % stride == 0 || i == steps {
            record(&mut table, &u, &w, &v);
        }
    }
    let mut out = ProbeReport::from_series(
        ProbeSettings::Splitting {
            nu,
            consistency_tol: 10.0 * cfg.newton_tol,
        },
        table,
    )?;
    if stats.halvings > 0 {
        out.diagnostics.push(format!(
            "u stepper halved dt {} times; consistency then holds only to discretisation error",
            stats.halvings
        ));
    }
    Ok(out)
}

pub(super) fn judge(consistency_tol: f64, table: &SeriesTable) -> Result<Judgement> {
    let t = table.column("t")?;
    let grad = table.column("grad_v2")?;
    let lap = table.column("lap_w2")?;
    let defect = table.column("consistency")?;
    let mut j = Judgement::default();
    let sup_lap = lap.iter().copied().fold(0.0f64, f64::max);
    let max_defect = defect.iter().copied().fold(0.0f64, f64::max);
    j.constant("sup_lap_w2", sup_lap);
    j.constant("max_consistency", max_defect);
    let consistent = max_defect <= consistency_tol;
    if !consistent {
        j.diagnostics.push(format!(
            "u = w + v defect {max_defect:e} exceeds {consistency_tol:e}"
        ));
    }
    let bounded = sup_lap.is_finite();
    if grad.iter().all(|&x| x == 0.0) {
        j.diagnostics.push("v vanishes identically".into());
        j.verdict = Some(if consistent && bounded {
            Verdict::Pass
        } else {
            Verdict::Fail
        });
        return Ok(j);
    }
    match log_linear_fit(&t, &grad) {
        Some(fit) => {
            j.constant("gamma", -0.5 * fit.slope);
            let decays = fit.slope < 0.0 && fit.r_squared >= 0.95;
            if !decays {
                j.diagnostics.push(format!(
                    "grad_v2 fit slope {} with R^2 {}",
                    fit.slope, fit.r_squared
                ));
            }
            j.fits.insert("grad_v2".into(), fit);
            j.verdict = Some(if decays && consistent && bounded {
                Verdict::Pass
            } else {
                Verdict::Fail
            });
        }
        None => {
            j.diagnostics
                .push("too few samples above the round-off floor to fit grad_v2".into());
            j.verdict = Some(Verdict::Inconclusive);
        }
    }
    Ok(j)
}
