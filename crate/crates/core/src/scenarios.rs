//! Small canned problems used by the acceptance suite, the benches and the
//! command-line examples.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::ModalState;
use crate::model::{CoefficientSet, Damping, Source, Stiffness};
use crate::spectral::{Domain, ModalVector};

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: &'static str,
    pub domain: Domain,
    pub coeffs: CoefficientSet,
    pub ic: ModalState,
}

fn state(domain: &Domain, u: &[f64], v: &[f64]) -> ModalState {
    let mut uu = domain.zeros();
    let mut vv = domain.zeros();
    uu.rows_mut(0, u.len()).copy_from_slice(u);
    vv.rows_mut(0, v.len()).copy_from_slice(v);
    ModalState::new(0.0, uu, vv)
}

/// ü + u̇ + u = 0 in the first mode of (0, π).
pub fn linear_single_mode() -> Scenario {
    let domain = Domain::interval(PI, 4).expect("valid domain");
    Scenario {
        name: "linear-single-mode",
        ic: state(&domain, &[1.0], &[]),
        coeffs: CoefficientSet::new(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::Constant { phi0: 1.0 },
            Source::Zero,
            vec![],
        )
        .expect("valid coefficients"),
        domain,
    }
}

/// σ = φ = 1 + s, f = u³ − 3u on (0, π). The zero state is unstable and the
/// first-mode-dominated states ±u* attract almost every trajectory.
pub fn cubic_double_well() -> Scenario {
    let domain = Domain::interval(PI, 16).expect("valid domain");
    Scenario {
        name: "cubic-double-well",
        ic: state(&domain, &[0.5, 0.2, 0.1], &[0.3]),
        coeffs: double_well_coefficients(),
        domain,
    }
}

pub fn double_well_coefficients() -> CoefficientSet {
    CoefficientSet::new(
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
        Source::CubicMinusLinear { a: 1.0, b: 3.0 },
        vec![],
    )
    .expect("valid coefficients")
}

/// φ(s) = (1 − s/4)₊, degenerate for s ≥ 4, with f = u³. The initial data
/// keep ‖∇u‖² well inside the support.
pub fn compact_bump() -> Scenario {
    let domain = Domain::interval(PI, 8).expect("valid domain");
    Scenario {
        name: "compact-bump",
        ic: state(&domain, &[0.6, 0.15], &[0.2, -0.1]),
        coeffs: CoefficientSet::new(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::CompactBump { phi0: 1.0, s0: 4.0 },
            Source::OddPower {
                a: 1.0,
                p: 3.0,
                b: 0.0,
            },
            vec![],
        )
        .expect("valid coefficients"),
        domain,
    }
}

/// φ = −1/2 with σ(s) = 1 + 2s and f = u³.
pub fn negative_phi_strong_sigma() -> Scenario {
    let domain = Domain::interval(PI, 8).expect("valid domain");
    Scenario {
        name: "negative-phi-strong-sigma",
        ic: state(&domain, &[0.5, 0.1], &[0.0, 0.2]),
        coeffs: CoefficientSet::new(
            Damping::PowerAffine {
                sigma0: 1.0,
                sigma1: 2.0,
                beta: 1.0,
            },
            Stiffness::Constant { phi0: -0.5 },
            Source::OddPower {
                a: 1.0,
                p: 3.0,
                b: 0.0,
            },
            vec![],
        )
        .expect("valid coefficients"),
        domain,
    }
}

/// σ = 1, φ = 1 + s, f = u³ − u on (0, π) × (0, 2), six modes per axis.
pub fn rectangle_cubic() -> Scenario {
    let domain = Domain::rectangle(PI, 2.0, 6).expect("valid domain");
    Scenario {
        name: "rectangle-cubic",
        ic: state(&domain, &[0.8, 0.3, -0.2, 0.1], &[0.2]),
        coeffs: CoefficientSet::new(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::PowerAffine {
                phi0: 1.0,
                phi1: 1.0,
                alpha: 1.0,
            },
            Source::CubicMinusLinear { a: 1.0, b: 1.0 },
            vec![],
        )
        .expect("valid coefficients"),
        domain,
    }
}

pub fn all() -> Vec<Scenario> {
    vec![
        linear_single_mode(),
        cubic_double_well(),
        compact_bump(),
        negative_phi_strong_sigma(),
        rectangle_cubic(),
    ]
}

pub fn by_name(name: &str) -> Option<Scenario> {
    all().into_iter().find(|s| s.name == name)
}

/// Random initial data on the first `modes` modes with coefficients
/// uniform in ±amplitude/k (u) and ±amplitude/2 (u_t).
pub fn random_ics(
    domain: &Domain,
    count: usize,
    modes: usize,
    amplitude: f64,
    seed: u64,
) -> Vec<ModalState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = modes.min(domain.len());
    (0..count)
        .map(|_| {
            let mut u = ModalVector::zeros(domain.len());
            let mut v = ModalVector::zeros(domain.len());
            for k in 0..m {
                u[k] = rng.gen_range(-amplitude..amplitude) / (k + 1) as f64;
                v[k] = rng.gen_range(-amplitude..amplitude) * 0.5;
            }
            ModalState::new(0.0, u, v)
        })
        .collect()
}
