use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{ModalState, Stepper};
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::spectral::{Domain, ModalVector};

/// `n` points of a Latin hypercube in [0, 1)^dims.
pub fn latin_hypercube(n: usize, dims: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![vec![0.0; dims]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for d in 0..dims {
        perm.shuffle(&mut rng);
        for (i, p) in pts.iter_mut().enumerate() {
            p[d] = (perm[i] as f64 + rng.gen::<f64>()) / n as f64;
        }
    }
    pts
}

/// Latin-hypercube states in the energy ball ‖∇u‖² + ‖u_t‖² ≤ radius²,
/// excited on the first `modes` modes: each of the 2·modes weighted
/// coordinates is uniform in [−r, r] with r = radius / √(2·modes).
pub fn sample_ball(
    domain: &Domain,
    n: usize,
    radius: f64,
    modes: usize,
    seed: u64,
) -> Vec<ModalState> {
    let m = modes.clamp(1, domain.len());
    let r = radius / ((2 * m) as f64).sqrt();
    let lambda = domain.eigenvalues();
    latin_hypercube(n, 2 * m, seed)
        .into_iter()
        .map(|p| {
            let mut u = domain.zeros();
            let mut v = domain.zeros();
            for k in 0..m {
                u[k] = r * (2.0 * p[k] - 1.0) / lambda[k].sqrt();
                v[k] = r * (2.0 * p[m + k] - 1.0);
            }
            ModalState::new(0.0, u, v)
        })
        .collect()
}

/// Runs every initial condition through `burn_in`, then keeps
/// `per_trajectory` states spaced `spacing` apart.
pub fn attractor_samples(
    stepper: &Stepper,
    ics: &[ModalState],
    burn_in: f64,
    per_trajectory: usize,
    spacing: f64,
    exec: Execution,
) -> Result<Vec<ModalState>> {
    let dt = stepper.config().dt;
    let stride = (spacing / dt).round().max(1.0) as usize;
    if per_trajectory == 0 {
        return Err(Error::Config("per_trajectory must be positive".into()));
    }
    let runs = exec.try_map(ics, |ic| {
        let start = if burn_in > 0.0 {
            stepper.simulate(ic, burn_in, usize::MAX)?.last().clone()
        } else {
            ic.clone()
        };
        let horizon = (per_trajectory - 1).max(1) as f64 * stride as f64 * dt;
        let traj = stepper.simulate(&start, horizon, stride)?;
        Ok::<_, Error>(
            traj.states()
                .iter()
                .take(per_trajectory)
                .cloned()
                .collect::<Vec<_>>(),
        )
    })?;
    Ok(runs.into_iter().flatten().collect())
}

/// Evenly spaced states on the segment between `a` and `b`.
pub fn segment(a: &ModalVector, b: &ModalVector, n: usize) -> Vec<ModalState> {
    (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1).max(1) as f64;
            ModalState::at_rest(0.0, ModalVector(&a.0 * (1.0 - s) + &b.0 * s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn hypercube_strata_are_each_hit_once() {
        let pts = latin_hypercube(16, 3, 9);
        for d in 0..3 {
            let mut bins: Vec<usize> = pts.iter().map(|p| (p[d] * 16.0) as usize).collect();
            bins.sort();
            assert_eq!(bins, (0..16).collect::<Vec<_>>());
        }
        assert_eq!(pts, latin_hypercube(16, 3, 9));
    }

    #[test]
    fn ball_samples_stay_inside() {
        let d = Domain::interval(PI, 8).unwrap();
        for s in sample_ball(&d, 50, 3.0, 4, 1) {
            assert!(s.energy_norm_sq(&d) <= 9.0 + 1e-12);
            assert!(s.u.iter().skip(4).all(|&x| x == 0.0));
        }
    }
}
