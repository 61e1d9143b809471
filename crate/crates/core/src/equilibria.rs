//! Stationary solutions φ(‖∇u‖²)Au + f(u) = h and convergence of
//! trajectories to them.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dynamics::ModalState;
use crate::error::{Error, Result};
use crate::model::CoefficientSet;
use crate::parallel::Execution;
use crate::spectral::{Collocation, Domain, ModalVector, DEFAULT_DEALIAS};

/// Two equilibria closer than this in the modal 2-norm are the same entry.
pub const DEDUP_DISTANCE: f64 = 1e-8;

const MAX_HALVINGS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub u: ModalVector,
    /// 2-norm of the modal residual.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// ‖∇u*‖²
    pub s_star: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSummary>,
}

impl EquilibriumResult {
    pub fn as_state(&self, t: f64) -> ModalState {
        ModalState::at_rest(t, self.u.clone())
    }
}

/// Residual, Jacobian and Newton solver for one problem instance.
#[derive(Clone, Debug)]
pub struct EquilibriumSolver {
    domain: Domain,
    coeffs: CoefficientSet,
    grid: Collocation,
    forcing: ModalVector,
    lambda: DVector<f64>,
}

impl EquilibriumSolver {
    pub fn new(domain: &Domain, coeffs: &CoefficientSet, dealias: f64) -> Result<Self> {
        coeffs.validate()?;
        Ok(EquilibriumSolver {
            domain: domain.clone(),
            coeffs: coeffs.clone(),
            grid: Collocation::dealiased(domain, dealias)?,
            forcing: ModalVector::from_vec(coeffs.forcing_vector(domain.len())?),
            lambda: DVector::from_column_slice(domain.eigenvalues()),
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// 1e−11 (1 + ‖h‖).
    pub fn default_tolerance(&self) -> f64 {
        1e-11 * (1.0 + self.forcing.norm())
    }

    /// r_k = φ(S)λ_k u_k + (f(u))_k − h_k.
    pub fn residual(&self, u: &ModalVector) -> ModalVector {
        let phi = self.coeffs.phi.value(self.domain.grad_norm_sq(u));
        let mut r = &self.grid.project(u, &self.coeffs.f).0 - &self.forcing.0;
        for k in 0..r.len() {
            r[k] += phi * self.lambda[k] * u[k];
        }
        ModalVector(r)
    }

    /// φ(S)Λ + J_f + 2φ′(S)(Λu)(Λu)ᵀ, symmetric.
    pub fn jacobian(&self, u: &ModalVector) -> DMatrix<f64> {
        let n = self.domain.len();
        let s = self.domain.grad_norm_sq(u);
        let mut jac = if self.coeffs.f.is_zero() {
            DMatrix::zeros(n, n)
        } else {
            self.grid.jacobian(u, &self.coeffs.f)
        };
        let dphi = self.coeffs.phi.derivative(s);
        if dphi != 0.0 {
            let lu = u.0.component_mul(&self.lambda);
            jac.ger(2.0 * dphi, &lu, &lu, 1.0);
        }
        let phi = self.coeffs.phi.value(s);
        for k in 0..n {
            jac[(k, k)] += phi * self.lambda[k];
        }
        jac
    }

    /// Damped Newton from `guess`. Returns the best iterate with
    /// `converged = false` when the iteration budget runs out or no step
    /// along the Newton direction decreases the residual.
    pub fn solve(
        &self,
        guess: &ModalVector,
        tol: f64,
        max_iters: usize,
        spectrum: bool,
    ) -> Result<EquilibriumResult> {
        if !(tol > 0.0) {
            return Err(Error::Config(format!("tolerance {tol} must be positive")));
        }
        if guess.len() != self.domain.len() || !guess.is_finite() {
            return Err(Error::Config(
                "guess must be finite and match the domain".into(),
            ));
        }
        let mut u = guess.clone();
        let mut r = self.residual(&u);
        let mut norm = r.norm();
        let mut iterations = 0;
        while norm > tol && iterations < max_iters {
            let jac = self.jacobian(&u);
            let lu = jac.lu();
            let rcond = lu_rcond(lu.u().diagonal().as_slice());
            let step = match lu.solve(&(-&r.0)) {
                Some(s) if rcond > 1e-15 && s.iter().all(|x| x.is_finite()) => s,
                _ => return Err(Error::SingularJacobian { rcond }),
            };
            iterations += 1;
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial = ModalVector(&u.0 + &step * alpha);
                let tr = self.residual(&trial);
                let tn = tr.norm();
                if tn < norm {
                    accepted = Some((trial, tr, tn));
                    break;
                }
                alpha *= 0.5;
            }
            match accepted {
                Some((nu, nr, nn)) => {
                    u = nu;
                    r = nr;
                    norm = nn;
                }
                None => break,
            }
        }
        let spectrum = spectrum.then(|| {
            let eig = SymmetricEigen::new(self.jacobian(&u)).eigenvalues;
            SpectrumSummary {
                min_eigenvalue: eig.min(),
                max_eigenvalue: eig.max(),
            }
        });
        Ok(EquilibriumResult {
            s_star: self.domain.grad_norm_sq(&u),
            u,
            residual_norm: norm,
            iterations,
            converged: norm <= tol,
            spectrum,
        })
    }
}

/// Ratio of the smallest to the largest pivot magnitude; a cheap stand-in
/// for the reciprocal condition number.
fn lu_rcond(pivots: &[f64]) -> f64 {
    let max = pivots.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let min = pivots.iter().fold(f64::INFINITY, |m, p| m.min(p.abs()));
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

pub fn stationary_residual(
    domain: &Domain,
    coeffs: &CoefficientSet,
    u: &ModalVector,
) -> Result<ModalVector> {
    Ok(EquilibriumSolver::new(domain, coeffs, DEFAULT_DEALIAS)?.residual(u))
}

pub fn solve_equilibrium(
    domain: &Domain,
    coeffs: &CoefficientSet,
    guess: &ModalVector,
    tol: f64,
    max_iters: usize,
) -> Result<EquilibriumResult> {
    EquilibriumSolver::new(domain, coeffs, DEFAULT_DEALIAS)?.solve(guess, tol, max_iters, true)
}

/// Zero and ± multiples of the first eigenmode.
pub fn default_guesses(domain: &Domain, scales: &[f64]) -> Vec<ModalVector> {
    let mut out = vec![domain.zeros()];
    for &s in scales {
        for sign in [1.0, -1.0] {
            out.push(ModalVector(domain.unit(0).0 * (sign * s)));
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LibraryMetadata {
    pub modes: usize,
    pub eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_sha256: Option<String>,
}

/// Append-only set of converged equilibria, deduplicated by modal distance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumLibrary {
    pub metadata: LibraryMetadata,
    equilibria: Vec<EquilibriumResult>,
}

impl EquilibriumLibrary {
    pub fn new(domain: &Domain) -> Self {
        EquilibriumLibrary {
            metadata: LibraryMetadata {
                modes: domain.len(),
                eigenvalues: domain.eigenvalues().to_vec(),
                config_sha256: None,
            },
            equilibria: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[EquilibriumResult] {
        &self.equilibria
    }

    pub fn len(&self) -> usize {
        self.equilibria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equilibria.is_empty()
    }

    pub fn contains(&self, u: &ModalVector) -> bool {
        self.equilibria
            .iter()
            .any(|e| (&e.u.0 - &u.0).norm() < DEDUP_DISTANCE)
    }

    /// Adds a converged result unless an equivalent entry exists. Returns
    /// whether it was added.
    pub fn insert(&mut self, result: EquilibriumResult) -> Result<bool> {
        if result.u.len() != self.metadata.modes {
            return Err(Error::Config(
                "equilibrium does not match the library's mode count".into(),
            ));
        }
        if !result.converged || self.contains(&result.u) {
            return Ok(false);
        }
        self.equilibria.push(result);
        Ok(true)
    }

    /// Whether −u* is in the library for every entry u*.
    pub fn closed_under_negation(&self) -> bool {
        self.equilibria
            .iter()
            .all(|e| self.contains(&ModalVector(-&e.u.0)))
    }

    /// Solves from every guess and folds the converged results in guess
    /// order. Singular starts are skipped.
    pub fn extend_from_guesses(
        &mut self,
        solver: &EquilibriumSolver,
        guesses: &[ModalVector],
        tol: f64,
        max_iters: usize,
        exec: Execution,
    ) -> Result<usize> {
        let results = exec.map(guesses, |g| solver.solve(g, tol, max_iters, true));
        let mut added = 0;
        for r in results {
            match r {
                Ok(res) => added += self.insert(res)? as usize,
                Err(Error::SingularJacobian { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(added)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let lib: EquilibriumLibrary = serde_json::from_str(text)?;
        if lib
            .equilibria
            .iter()
            .any(|e| e.u.len() != lib.metadata.modes)
        {
            return Err(Error::Config(
                "library entry length differs from metadata.modes".into(),
            ));
        }
        Ok(lib)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DistanceSeries {
    pub t: Vec<f64>,
    /// min over the library of ‖∇(u − u*)‖² + ‖u_t‖²
    pub distance: Vec<f64>,
    /// Library index attaining the minimum.
    pub nearest: Vec<usize>,
    /// Nonincreasing over the last quarter of samples.
    pub monotone_tail: bool,
}

pub fn distance_to_equilibria(
    domain: &Domain,
    states: &[ModalState],
    library: &EquilibriumLibrary,
) -> Result<DistanceSeries> {
    if library.is_empty() {
        return Err(Error::Config("equilibrium library is empty".into()));
    }
    let mut out = DistanceSeries::default();
    for s in states {
        let kinetic = s.v.norm_squared();
        let (idx, d) = library
            .entries()
            .iter()
            .enumerate()
            .map(|(i, e)| {
                (
                    i,
                    domain.grad_norm_sq(&ModalVector(&s.u.0 - &e.u.0)) + kinetic,
                )
            })
            .fold(
                (0, f64::INFINITY),
                |best, cur| if cur.1 < best.1 { cur } else { best },
            );
        out.t.push(s.t);
        out.distance.push(d);
        out.nearest.push(idx);
    }
    let start = out.distance.len() - out.distance.len() / 4;
    out.monotone_tail = out.distance[start.saturating_sub(1)..]
        .windows(2)
        .all(|w| w[1] <= w[0]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Stepper, StepperConfig};
    use crate::energetics::EnergyFunctional;
    use crate::model::{Damping, Source, Stiffness};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn kirchhoff_forced() -> (Domain, CoefficientSet) {
        let d = Domain::interval(PI, 4).unwrap();
        let c = CoefficientSet::new(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::PowerAffine {
                phi0: 1.0,
                phi1: 1.0,
                alpha: 1.0,
            },
            Source::Zero,
            vec![2.0],
        )
        .unwrap();
        (d, c)
    }

    fn double_well(modes: usize) -> (Domain, CoefficientSet) {
        let d = Domain::interval(PI, modes).unwrap();
        let c = CoefficientSet::new(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::Constant { phi0: 1.0 },
            Source::CubicMinusLinear { a: 1.0, b: 3.0 },
            vec![],
        )
        .unwrap();
        (d, c)
    }

    #[test]
    fn zero_is_a_root_without_forcing() {
        let (d, c) = double_well(5);
        assert_eq!(stationary_residual(&d, &c, &d.zeros()).unwrap().amax(), 0.0);
        let c = CoefficientSet::new(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::Constant { phi0: 1.0 },
            Source::OddPower {
                a: 1.0,
                p: 3.0,
                b: 0.0,
            },
            vec![],
        )
        .unwrap();
        let r = solve_equilibrium(&d, &c, &d.zeros(), 1e-11, 20).unwrap();
        assert!(r.converged && r.iterations <= 1);
        assert_eq!(r.u.amax(), 0.0);
    }

    #[test]
    fn forced_kirchhoff_root() {
        let (d, c) = kirchhoff_forced();
        let r = stationary_residual(&d, &c, &d.unit(0)).unwrap();
        assert!(r.amax() < 1e-15);
        let res =
            solve_equilibrium(&d, &c, &ModalVector(d.unit(0).0 * 0.5), 1e-11 * 3.0, 50).unwrap();
        assert!(res.converged);
        assert!((res.u[0] - 1.0).abs() <= 1e-12, "{}", res.u[0]);
        assert!(res.u.iter().skip(1).all(|&x| x == 0.0));
        assert!((res.s_star - 1.0).abs() < 1e-12);
    }

    #[test]
    fn residual_is_the_static_energy_gradient() {
        let (d, c) = double_well(8);
        let c = CoefficientSet {
            forcing: vec![0.3, -0.1],
            phi: Stiffness::PowerAffine {
                phi0: 0.5,
                phi1: 1.0,
                alpha: 1.0,
            },
            ..c
        };
        let e = EnergyFunctional::new(&d, &c, DEFAULT_DEALIAS).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = ModalVector::from_vec(
            (0..8)
                .map(|k| rng.gen_range(-1.0..1.0) / (k + 1) as f64)
                .collect(),
        );
        let r = stationary_residual(&d, &c, &u).unwrap();
        let h = 1e-5;
        for _ in 0..10 {
            let dir = ModalVector::from_vec((0..8).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let up = ModalVector(&u.0 + &dir.0 * h);
            let um = ModalVector(&u.0 - &dir.0 * h);
            let fd = (e.static_energy(&up) - e.static_energy(&um)) / (2.0 * h);
            let exact = r.dot(&dir);
            assert!(
                (fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()),
                "{fd} vs {exact}"
            );
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (d, c) = kirchhoff_forced();
        let c = CoefficientSet {
            f: Source::CubicMinusLinear { a: 1.0, b: 0.5 },
            ..c
        };
        let s = EquilibriumSolver::new(&d, &c, DEFAULT_DEALIAS).unwrap();
        let u = ModalVector::from_vec(vec![0.4, -0.2, 0.1, 0.05]);
        let jac = s.jacobian(&u);
        let h = 1e-6;
        for j in 0..4 {
            let mut up = u.clone();
            let mut um = u.clone();
            up[j] += h;
            um[j] -= h;
            let col = (&s.residual(&up).0 - &s.residual(&um).0) / (2.0 * h);
            assert!((col - jac.column(j)).amax() < 1e-7);
        }
    }

    /// Bisection on the one-mode Galerkin equation
    /// c(φ₀λ₁ − b) + a c³ ∫e₁⁴ = 0, ∫e₁⁴ = 3/(2π) on (0, π).
    fn single_mode_root(phi0: f64, a: f64, b: f64) -> f64 {
        let g = |c: f64| c * (phi0 - b) + a * c.powi(3) * 3.0 / (2.0 * PI);
        let (mut lo, mut hi) = (1e-3, 10.0);
        assert!(g(lo) < 0.0 && g(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn double_well_single_mode_matches_bisection() {
        let (d, c) = double_well(1);
        let oracle = single_mode_root(1.0, 1.0, 3.0);
        for sign in [1.0, -1.0] {
            let res =
                solve_equilibrium(&d, &c, &ModalVector::from_vec(vec![sign * 1.5]), 1e-13, 50)
                    .unwrap();
            assert!(res.converged);
            assert!(
                (res.u[0] - sign * oracle).abs() < 1e-10,
                "{} vs {}",
                res.u[0],
                oracle
            );
        }
    }

    #[test]
    fn double_well_library_is_symmetric_and_stationary() {
        let (d, c) = double_well(12);
        let solver = EquilibriumSolver::new(&d, &c, DEFAULT_DEALIAS).unwrap();
        let mut lib = EquilibriumLibrary::new(&d);
        let tol = solver.default_tolerance();
        lib.extend_from_guesses(
            &solver,
            &default_guesses(&d, &[1.0, 2.0]),
            tol,
            60,
            Execution::Parallel,
        )
        .unwrap();
        assert!(lib.len() >= 3, "{}", lib.len());
        assert!(lib.closed_under_negation());
        let stepper = Stepper::new(&d, &c, StepperConfig::with_dt(0.02)).unwrap();
        for e in lib.entries() {
            assert!(e.residual_norm <= 1e-10);
            let next = stepper.step(&e.as_state(0.0)).unwrap();
            assert!((&next.u.0 - &e.u.0).amax() < 1e-10);
            assert!(next.v.amax() < 1e-10);
        }
        let nonzero = lib.entries().iter().find(|e| e.u.amax() > 0.1).unwrap();
        assert!(nonzero.spectrum.unwrap().min_eigenvalue > 0.0);
        let back = EquilibriumLibrary::from_json(&lib.to_json().unwrap()).unwrap();
        assert_eq!(back, lib);
    }

    #[test]
    fn distance_series_flags() {
        let (d, c) = double_well(6);
        let solver = EquilibriumSolver::new(&d, &c, DEFAULT_DEALIAS).unwrap();
        let mut lib = EquilibriumLibrary::new(&d);
        assert!(distance_to_equilibria(&d, &[], &lib).is_err());
        let res = solver
            .solve(&ModalVector(d.unit(0).0 * 1.5), 1e-11, 50, false)
            .unwrap();
        lib.insert(res.clone()).unwrap();
        assert!(!lib.insert(res.clone()).unwrap());
        let states = vec![res.as_state(0.0), res.as_state(1.0)];
        let ds = distance_to_equilibria(&d, &states, &lib).unwrap();
        assert!(ds.distance.iter().all(|&x| x == 0.0));
        assert!(ds.monotone_tail);
        // the negative state is missing from the library: plateau above zero
        let neg = vec![ModalState::at_rest(0.0, ModalVector(-&res.u.0))];
        assert!(distance_to_equilibria(&d, &neg, &lib).unwrap().distance[0] > 1.0);
    }
}
