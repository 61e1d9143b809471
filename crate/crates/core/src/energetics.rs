//! Energy functionals and the energy-identity ledger.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AssumptionReport, CoefficientSet};
use crate::spectral::{Collocation, Domain, ModalVector};

/// Evaluates E, E⁺_η and W^{η,ν} on one domain. ∫F(u) uses the dealiased
/// collocation grid of the source projection so that its modal gradient is
/// the projected force.
#[derive(Clone, Debug)]
pub struct EnergyFunctional {
    coeffs: CoefficientSet,
    grid: Collocation,
    forcing: ModalVector,
}

impl EnergyFunctional {
    pub fn new(domain: &Domain, coeffs: &CoefficientSet, dealias: f64) -> Result<Self> {
        Ok(EnergyFunctional {
            coeffs: coeffs.clone(),
            grid: Collocation::dealiased(domain, dealias)?,
            forcing: ModalVector::from_vec(coeffs.forcing_vector(domain.len())?),
        })
    }

    pub fn domain(&self) -> &Domain {
        self.grid.domain()
    }

    pub fn coefficients(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn grid(&self) -> &Collocation {
        &self.grid
    }

    pub fn forcing(&self) -> &ModalVector {
        &self.forcing
    }

    /// ½Φ(‖∇u‖²) + ∫F(u) − (h, u).
    pub fn static_energy(&self, u: &ModalVector) -> f64 {
        let s = self.domain().grad_norm_sq(u);
        0.5 * self.coeffs.phi.antiderivative(s) + self.grid.potential(u, &self.coeffs.f)
            - self.forcing.dot(u)
    }

    /// E(u, v) = ½[‖v‖² + Φ(‖∇u‖²)] + ∫F(u) − ∫h u.
    pub fn energy(&self, u: &ModalVector, v: &ModalVector) -> f64 {
        0.5 * v.norm_squared() + self.static_energy(u)
    }

    /// E⁺_η(u, v) = ‖v‖² + [Φ + ηΣ − a(η)](‖∇u‖²) + α‖u‖^{p+1}_{p+1} + ‖u‖²,
    /// with α = 1 in the supercritical class only.
    pub fn energy_plus(
        &self,
        u: &ModalVector,
        v: &ModalVector,
        eta: f64,
        report: &AssumptionReport,
    ) -> Result<f64> {
        if !(eta >= report.eta0) {
            return Err(Error::Domain(format!(
                "eta = {eta} is below eta0 = {}",
                report.eta0
            )));
        }
        let floor = self.coeffs.augmented_floor(eta);
        if !floor.is_finite() {
            return Err(Error::Domain(format!(
                "Phi + {eta}*Sigma is unbounded below"
            )));
        }
        let s = self.domain().grad_norm_sq(u);
        let shifted =
            self.coeffs.phi.antiderivative(s) + eta * self.coeffs.sigma.antiderivative(s) - floor;
        let lp = if report.is_supercritical() {
            let q = report.growth_exponent + 1.0;
            self.grid.integrate_with(u, |x| x.abs().powf(q))
        } else {
            0.0
        };
        Ok(v.norm_squared() + shifted + lp + u.norm_squared())
    }

    /// W^{η,ν}(u, v) = E + η[(u, v) + ½Σ(‖∇u‖²)] + ν‖u‖².
    pub fn w_functional(&self, u: &ModalVector, v: &ModalVector, eta: f64, nu: f64) -> f64 {
        let s = self.domain().grad_norm_sq(u);
        self.energy(u, v)
            + eta * (u.dot(v) + 0.5 * self.coeffs.sigma.antiderivative(s))
            + nu * u.norm_squared()
    }

    /// σ(‖∇u‖²)‖∇v‖², the dissipation rate.
    pub fn dissipation_rate(&self, u: &ModalVector, v: &ModalVector) -> f64 {
        let d = self.domain();
        self.coeffs.sigma.value(d.grad_norm_sq(u)) * d.grad_norm_sq(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LedgerRecord {
    pub t: f64,
    pub energy: f64,
    pub grad_norm2: f64,
    pub kinetic2: f64,
    /// ∫₀ᵗ σ(‖∇u‖²)‖∇u_t‖², trapezoidal on the step grid.
    pub dissipation: f64,
    /// E(t) + D(t) − E(0).
    pub residual: f64,
}

/// Running record of the energy identity along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLedger {
    records: Vec<LedgerRecord>,
    energy0: f64,
    last_t: f64,
    last_rate: f64,
    dissipation: f64,
}

impl EnergyLedger {
    pub fn start(functional: &EnergyFunctional, t: f64, u: &ModalVector, v: &ModalVector) -> Self {
        let energy0 = functional.energy(u, v);
        let record = LedgerRecord {
            t,
            energy: energy0,
            grad_norm2: functional.domain().grad_norm_sq(u),
            kinetic2: v.norm_squared(),
            dissipation: 0.0,
            residual: 0.0,
        };
        EnergyLedger {
            records: vec![record],
            energy0,
            last_t: t,
            last_rate: functional.dissipation_rate(u, v),
            dissipation: 0.0,
        }
    }

    fn advance(
        &mut self,
        functional: &EnergyFunctional,
        t: f64,
        u: &ModalVector,
        v: &ModalVector,
    ) -> Result<()> {
        if !(t > self.last_t) {
            return Err(Error::Sequencing(format!(
                "ledger time {t} does not follow last time {}",
                self.last_t
            )));
        }
        let rate = functional.dissipation_rate(u, v);
        self.dissipation += 0.5 * (t - self.last_t) * (rate + self.last_rate);
        self.last_t = t;
        self.last_rate = rate;
        Ok(())
    }

    /// Integrates the dissipation up to `t` and appends a record.
    pub fn update(
        &mut self,
        functional: &EnergyFunctional,
        t: f64,
        u: &ModalVector,
        v: &ModalVector,
    ) -> Result<()> {
        self.advance(functional, t, u, v)?;
        let energy = functional.energy(u, v);
        self.records.push(LedgerRecord {
            t,
            energy,
            grad_norm2: functional.domain().grad_norm_sq(u),
            kinetic2: v.norm_squared(),
            dissipation: self.dissipation,
            residual: energy + self.dissipation - self.energy0,
        });
        Ok(())
    }

    /// Integrates the dissipation up to `t` without recording a sample.
    pub fn accumulate(
        &mut self,
        functional: &EnergyFunctional,
        t: f64,
        u: &ModalVector,
        v: &ModalVector,
    ) -> Result<()> {
        self.advance(functional, t, u, v)
    }

    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    pub fn last(&self) -> &LedgerRecord {
        self.records
            .last()
            .expect("ledger always holds the initial record")
    }

    pub fn initial_energy(&self) -> f64 {
        self.energy0
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.residual.abs())
            .fold(0.0, f64::max)
    }

    /// Largest energy increase between consecutive records.
    pub fn max_energy_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].energy - w[0].energy)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with columns t, E, gradnorm2, kinetic2, D, residual.
    pub fn write_csv<W: Write>(&self, out: W, header: Option<&str>) -> Result<()> {
        let rows = self.records.iter().map(|r| {
            vec![
                r.t,
                r.energy,
                r.grad_norm2,
                r.kinetic2,
                r.dissipation,
                r.residual,
            ]
        });
        crate::io::write_table(
            out,
            header,
            &["t", "E", "gradnorm2", "kinetic2", "D", "residual"],
            rows,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_assumptions, Damping, Source, Stiffness};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn coeffs(sigma: Damping, phi: Stiffness, f: Source) -> CoefficientSet {
        CoefficientSet::new(sigma, phi, f, vec![]).unwrap()
    }

    fn random_state(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> (ModalVector, ModalVector) {
        let u = (0..n)
            .map(|k| scale * rng.gen_range(-1.0..1.0) / (1 + k) as f64)
            .collect();
        let v = (0..n)
            .map(|k| scale * rng.gen_range(-1.0..1.0) / (1 + k) as f64)
            .collect();
        (ModalVector::from_vec(u), ModalVector::from_vec(v))
    }

    #[test]
    fn energy_examples() {
        let d = Domain::interval(PI, 4).unwrap();
        let c = coeffs(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::Constant { phi0: 2.0 },
            Source::Zero,
        );
        let e = EnergyFunctional::new(&d, &c, 2.0).unwrap();
        assert_eq!(e.energy(&d.zeros(), &d.zeros()), 0.0);
        assert_eq!(e.energy(&d.unit(0), &d.zeros()), 1.0);
    }

    #[test]
    fn quartic_potential_matches_refined_quadrature() {
        // Oracle: E = ∫ c⁴ e₁(x)⁴ / 4 by midpoint rule on 10× the grid.
        let d = Domain::interval(PI, 5).unwrap();
        let c = coeffs(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::Constant { phi0: 0.0 },
            Source::OddPower {
                a: 1.0,
                p: 3.0,
                b: 0.0,
            },
        );
        let e = EnergyFunctional::new(&d, &c, 2.0).unwrap();
        let amp = 1.3;
        let u = ModalVector(d.unit(0).0 * amp);
        let points = 10 * e.grid().points_per_axis();
        let dx = PI / points as f64;
        let oracle: f64 = (0..points)
            .map(|i| {
                let x = (i as f64 + 0.5) * dx;
                let ux = amp * (2.0 / PI).sqrt() * x.sin();
                ux.powi(4) / 4.0 * dx
            })
            .sum();
        assert!((e.energy(&u, &d.zeros()) - oracle).abs() < 1e-12);
        // closed form: c⁴ (2/π)² (3π/8) / 4
        assert!((oracle - amp.powi(4) * 3.0 / (8.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn energy_plus_examples() {
        let d = Domain::interval(PI, 3).unwrap();
        let c = coeffs(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::Constant { phi0: -1.0 },
            Source::Zero,
        );
        let report = check_assumptions(&c, 1, d.lambda1(), 100.0);
        let e = EnergyFunctional::new(&d, &c, 2.0).unwrap();
        assert_eq!(
            e.energy_plus(&d.zeros(), &d.zeros(), 2.0, &report).unwrap(),
            0.0
        );
        assert_eq!(
            e.energy_plus(&d.unit(0), &d.zeros(), 2.0, &report).unwrap(),
            2.0
        );
        assert!(matches!(
            e.energy_plus(&d.unit(0), &d.zeros(), 1.5, &report),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn energy_plus_is_nonnegative_on_random_states() {
        let d = Domain::interval(2.0, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for c in [
            coeffs(
                Damping::Constant { sigma0: 1.0 },
                Stiffness::Constant { phi0: -1.0 },
                Source::Zero,
            ),
            coeffs(
                Damping::PowerAffine {
                    sigma0: 1.0,
                    sigma1: 0.5,
                    beta: 1.0,
                },
                Stiffness::PowerAffine {
                    phi0: -2.0,
                    phi1: 1.0,
                    alpha: 1.0,
                },
                Source::CubicMinusLinear { a: 1.0, b: 1.0 },
            ),
            coeffs(
                Damping::Constant { sigma0: 0.5 },
                Stiffness::CompactBump {
                    phi0: -1.0,
                    s0: 2.0,
                },
                Source::OddPower {
                    a: 1.0,
                    p: 3.0,
                    b: 0.0,
                },
            ),
        ] {
            let report = check_assumptions(&c, 1, d.lambda1(), 100.0);
            let e = EnergyFunctional::new(&d, &c, 2.0).unwrap();
            for _ in 0..100 {
                let (u, v) = random_state(d.len(), 3.0, &mut rng);
                for eta in [report.eta0, report.eta0 + 1.0] {
                    assert!(e.energy_plus(&u, &v, eta, &report).unwrap() >= 0.0);
                }
            }
        }
    }

    #[test]
    fn w_functional_examples() {
        let d = Domain::interval(PI, 3).unwrap();
        let c = coeffs(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::Constant { phi0: 0.0 },
            Source::Zero,
        );
        let e = EnergyFunctional::new(&d, &c, 2.0).unwrap();
        let e1 = d.unit(0);
        assert_eq!(e.w_functional(&e1, &e1, 1.0, 0.0), 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (u, v) = random_state(3, 1.0, &mut rng);
        assert_eq!(e.w_functional(&u, &v, 0.0, 0.0), e.energy(&u, &v));
    }

    /// a₀E⁺_η − a₁ ≤ W^{η,ν} ≤ a₂E⁺_η + M(‖∇u‖²): constants fitted on
    /// states of unit scale keep holding on states ten times larger.
    #[test]
    fn w_functional_is_equivalent_to_energy_plus() {
        let d = Domain::interval(PI, 5).unwrap();
        let c = coeffs(
            Damping::PowerAffine {
                sigma0: 1.0,
                sigma1: 1.0,
                beta: 1.0,
            },
            Stiffness::Constant { phi0: -1.0 },
            Source::CubicMinusLinear { a: 1.0, b: 2.0 },
        );
        let report = check_assumptions(&c, 1, d.lambda1(), 100.0);
        let e = EnergyFunctional::new(&d, &c, 2.0).unwrap();
        let eta = report.eta0;
        let nu = eta * eta + 2.0;
        let a0 = 0.25;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sample = |rng: &mut ChaCha8Rng, scale: f64| {
            let (u, v) = random_state(d.len(), scale, rng);
            let ep = e.energy_plus(&u, &v, eta, &report).unwrap();
            let w = e.w_functional(&u, &v, eta, nu);
            (ep, w, d.grad_norm_sq(&u))
        };
        let fit: Vec<_> = (0..200).map(|_| sample(&mut rng, 1.0)).collect();
        let a1 = fit
            .iter()
            .map(|(ep, w, _)| a0 * ep - w)
            .fold(0.0f64, f64::max)
            + 1.0;
        for _ in 0..200 {
            let (ep, w, s) = sample(&mut rng, 10.0);
            assert!(w >= a0 * ep - a1, "lower bound: W = {w}, E+ = {ep}");
            // upper bound with a₂ = 1 + η and M(s) = (1 + η + ν)(1 + s)
            assert!(
                w <= (1.0 + eta) * ep + (1.0 + eta + nu) * (1.0 + s),
                "upper bound"
            );
        }
    }

    #[test]
    fn ledger_rejects_non_monotone_time() {
        let d = Domain::interval(PI, 2).unwrap();
        let c = coeffs(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::Constant { phi0: 1.0 },
            Source::Zero,
        );
        let e = EnergyFunctional::new(&d, &c, 2.0).unwrap();
        let mut ledger = EnergyLedger::start(&e, 0.0, &d.unit(0), &d.zeros());
        assert_eq!(ledger.last().residual, 0.0);
        ledger.update(&e, 0.5, &d.unit(0), &d.zeros()).unwrap();
        assert!(matches!(
            ledger.update(&e, 0.5, &d.unit(0), &d.zeros()),
            Err(Error::Sequencing(_))
        ));
        // static state: no dissipation, no residual
        assert_eq!(ledger.last().dissipation, 0.0);
        assert_eq!(ledger.last().residual, 0.0);
    }

    #[test]
    fn ledger_csv_layout() {
        let d = Domain::interval(PI, 2).unwrap();
        let c = coeffs(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::Constant { phi0: 1.0 },
            Source::Zero,
        );
        let e = EnergyFunctional::new(&d, &c, 2.0).unwrap();
        let ledger = EnergyLedger::start(&e, 0.0, &d.unit(0), &d.unit(1));
        let mut buf = Vec::new();
        ledger
            .write_csv(&mut buf, Some("config_sha256=abc"))
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "# config_sha256=abc");
        assert_eq!(lines[1], "t,E,gradnorm2,kinetic2,D,residual");
        assert!(lines[2].starts_with("0.0000000000000000e0,1.0000000000000000e0,"));
    }

    proptest! {
        #[test]
        fn energy_is_even_for_odd_source(seed in any::<u64>()) {
            let d = Domain::interval(PI, 6).unwrap();
            let c = coeffs(
                Damping::Constant { sigma0: 1.0 },
                Stiffness::PowerAffine { phi0: 1.0, phi1: 1.0, alpha: 1.0 },
                Source::CubicMinusLinear { a: 1.0, b: 1.0 },
            );
            let e = EnergyFunctional::new(&d, &c, 2.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (u, v) = random_state(6, 2.0, &mut rng);
            let (nu, nv) = (ModalVector(-&u.0), ModalVector(-&v.0));
            prop_assert_eq!(e.energy(&u, &v), e.energy(&nu, &nv));
        }
    }
}
