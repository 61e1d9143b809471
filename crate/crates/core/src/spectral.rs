//! Dirichlet eigenbasis of −Δ on an interval or rectangle, sine-transform
//! collocation and pseudospectral evaluation of the source term.
//!
//! The basis is orthonormal in L², e_k(x) = √(2/L)·sin(kπx/L), so that all
//! Sobolev norms are weighted sums of squared coefficients.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Source;

/// Default dealiasing factor; exact for cubic sources.
pub const DEFAULT_DEALIAS: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainKind {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
}

/// A truncated Dirichlet eigenbasis. Modes are sorted by eigenvalue with
/// ties broken lexicographically by (j, k).
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    modes_per_axis: usize,
    eigenvalues: Vec<f64>,
    /// 1-based (j, k) per mode; k = 0 on an interval.
    index: Vec<(usize, usize)>,
}

impl Domain {
    pub fn new(kind: DomainKind, modes_per_axis: usize) -> Result<Self> {
        if modes_per_axis == 0 {
            return Err(Error::Config("truncation N must be at least 1".into()));
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        match kind {
            DomainKind::Interval { length } if !positive(length) => {
                return Err(Error::Config(format!(
                    "interval length {length} must be positive"
                )))
            }
            DomainKind::Rectangle { lx, ly } if !positive(lx) || !positive(ly) => {
                return Err(Error::Config(format!(
                    "rectangle lengths ({lx}, {ly}) must be positive"
                )))
            }
            _ => {}
        }
        let mut modes: Vec<(f64, (usize, usize))> = match kind {
            DomainKind::Interval { length } => (1..=modes_per_axis)
                .map(|j| (axis_eigenvalue(j, length), (j, 0)))
                .collect(),
            DomainKind::Rectangle { lx, ly } => {
                let mut m = Vec::with_capacity(modes_per_axis * modes_per_axis);
                for j in 1..=modes_per_axis {
                    for k in 1..=modes_per_axis {
                        m.push((axis_eigenvalue(j, lx) + axis_eigenvalue(k, ly), (j, k)));
                    }
                }
                m
            }
        };
        modes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(Domain {
            kind,
            modes_per_axis,
            eigenvalues: modes.iter().map(|m| m.0).collect(),
            index: modes.iter().map(|m| m.1).collect(),
        })
    }

    pub fn interval(length: f64, modes: usize) -> Result<Self> {
        Self::new(DomainKind::Interval { length }, modes)
    }

    pub fn rectangle(lx: f64, ly: f64, modes_per_axis: usize) -> Result<Self> {
        Self::new(DomainKind::Rectangle { lx, ly }, modes_per_axis)
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn modes_per_axis(&self) -> usize {
        self.modes_per_axis
    }

    pub fn dimension(&self) -> usize {
        match self.kind {
            DomainKind::Interval { .. } => 1,
            DomainKind::Rectangle { .. } => 2,
        }
    }

    /// Total number of modes.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// (j, k) wave numbers of mode `i`.
    pub fn mode_index(&self, i: usize) -> (usize, usize) {
        self.index[i]
    }

    pub fn zeros(&self) -> ModalVector {
        ModalVector::zeros(self.len())
    }

    /// Unit vector on mode `i` (0-based in eigenvalue order).
    pub fn unit(&self, i: usize) -> ModalVector {
        let mut v = self.zeros();
        v[i] = 1.0;
        v
    }

    /// Pointwise evaluation Σ c_k e_k(x) on an interval.
    pub fn evaluate_1d(&self, v: &ModalVector, x: f64) -> f64 {
        match self.kind {
            DomainKind::Interval { length } => (0..self.len())
                .map(|i| v[i] * basis_fn(self.index[i].0, length, x))
                .sum(),
            DomainKind::Rectangle { .. } => panic!("evaluate_1d on a rectangle"),
        }
    }

    /// Σ λ_k^r c_k².
    pub fn sobolev_norm_sq(&self, v: &ModalVector, order: f64) -> f64 {
        debug_assert_eq!(v.len(), self.len());
        if order == 0.0 {
            return v.norm_squared();
        }
        self.eigenvalues
            .iter()
            .zip(v.iter())
            .map(|(&l, &c)| l.powf(order) * c * c)
            .sum()
    }

    /// ‖∇u‖² = Σ λ_k c_k².
    #[inline]
    pub fn grad_norm_sq(&self, v: &ModalVector) -> f64 {
        self.eigenvalues
            .iter()
            .zip(v.iter())
            .map(|(&l, &c)| l * c * c)
            .sum()
    }

    /// Λv.
    pub fn apply_laplacian(&self, v: &ModalVector) -> ModalVector {
        ModalVector(DVector::from_iterator(
            self.len(),
            self.eigenvalues.iter().zip(v.iter()).map(|(&l, &c)| l * c),
        ))
    }
}

#[inline]
fn axis_eigenvalue(j: usize, length: f64) -> f64 {
    let w = j as f64 * PI / length;
    w * w
}

#[inline]
fn basis_fn(j: usize, length: f64, x: f64) -> f64 {
    (2.0 / length).sqrt() * (j as f64 * PI * x / length).sin()
}

/// Modal coefficients in the domain's eigenvalue order. Serializes as a
/// plain array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct ModalVector(pub DVector<f64>);

impl ModalVector {
    pub fn zeros(n: usize) -> Self {
        ModalVector(DVector::zeros(n))
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        ModalVector(DVector::from_vec(v))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }
}

impl Deref for ModalVector {
    type Target = DVector<f64>;
    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl DerefMut for ModalVector {
    fn deref_mut(&mut self) -> &mut DVector<f64> {
        &mut self.0
    }
}

impl From<Vec<f64>> for ModalVector {
    fn from(v: Vec<f64>) -> Self {
        ModalVector::from_vec(v)
    }
}

impl From<ModalVector> for Vec<f64> {
    fn from(v: ModalVector) -> Self {
        v.to_vec()
    }
}

impl From<DVector<f64>> for ModalVector {
    fn from(v: DVector<f64>) -> Self {
        ModalVector(v)
    }
}

/// Interior equispaced collocation nodes with precomputed sine-transform
/// matrices. Synthesis is `E c`; analysis is `w Eᵀ g` with the quadrature
/// weight w = Δx (Δx·Δy in 2D), which inverts synthesis exactly on the
/// resolved band.
#[derive(Clone, Debug)]
pub struct Collocation {
    domain: Domain,
    points_per_axis: usize,
    /// Per-axis matrices, `points × modes_per_axis`.
    sx: DMatrix<f64>,
    sy: Option<DMatrix<f64>>,
    weight: f64,
}

impl Collocation {
    /// `points` interior nodes per axis; requires `points ≥ N + 1`.
    pub fn new(domain: &Domain, points: usize) -> Result<Self> {
        let n = domain.modes_per_axis();
        if points < n + 1 {
            return Err(Error::Config(format!(
                "collocation grid of {points} points cannot resolve {n} modes (need at least {})",
                n + 1
            )));
        }
        let axis = |length: f64| {
            let dx = length / (points + 1) as f64;
            DMatrix::from_fn(points, n, |a, j| {
                basis_fn(j + 1, length, (a + 1) as f64 * dx)
            })
        };
        let (sx, sy, weight) = match domain.kind() {
            DomainKind::Interval { length } => (axis(length), None, length / (points + 1) as f64),
            DomainKind::Rectangle { lx, ly } => (
                axis(lx),
                Some(axis(ly)),
                lx / (points + 1) as f64 * ly / (points + 1) as f64,
            ),
        };
        Ok(Collocation {
            domain: domain.clone(),
            points_per_axis: points,
            sx,
            sy,
            weight,
        })
    }

    /// Grid of ceil(dealias·(N+1)) points per axis.
    pub fn dealiased(domain: &Domain, dealias: f64) -> Result<Self> {
        if !(dealias >= 1.0) {
            return Err(Error::Config(format!(
                "dealias factor {dealias} must be at least 1"
            )));
        }
        let points = (dealias * (domain.modes_per_axis() + 1) as f64).ceil() as usize;
        Self::new(domain, points)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn total_points(&self) -> usize {
        match self.sy {
            None => self.points_per_axis,
            Some(_) => self.points_per_axis * self.points_per_axis,
        }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Node coordinates along the first axis.
    pub fn nodes(&self) -> Vec<f64> {
        let length = match self.domain.kind() {
            DomainKind::Interval { length } => length,
            DomainKind::Rectangle { lx, .. } => lx,
        };
        let dx = length / (self.points_per_axis + 1) as f64;
        (1..=self.points_per_axis).map(|a| a as f64 * dx).collect()
    }

    fn to_grid_matrix(&self, v: &ModalVector) -> DMatrix<f64> {
        let n = self.domain.modes_per_axis();
        let mut c = DMatrix::zeros(n, n);
        for i in 0..self.domain.len() {
            let (j, k) = self.domain.mode_index(i);
            c[(j - 1, k - 1)] = v[i];
        }
        c
    }

    /// Physical samples at the nodes; row-major (x outer, y inner) in 2D.
    pub fn synthesize(&self, v: &ModalVector) -> DVector<f64> {
        assert_eq!(
            v.len(),
            self.domain.len(),
            "modal vector does not match domain"
        );
        match &self.sy {
            None => &self.sx * &v.0,
            Some(sy) => {
                let grid = &self.sx * self.to_grid_matrix(v) * sy.transpose();
                DVector::from_iterator(grid.len(), grid.transpose().iter().copied())
            }
        }
    }

    pub fn analyze(&self, samples: &DVector<f64>) -> ModalVector {
        assert_eq!(
            samples.len(),
            self.total_points(),
            "sample count does not match grid"
        );
        match &self.sy {
            None => ModalVector(self.sx.tr_mul(samples) * self.weight),
            Some(sy) => {
                let m = self.points_per_axis;
                let g = DMatrix::from_row_slice(m, m, samples.as_slice());
                let c = self.sx.tr_mul(&g) * sy * self.weight;
                ModalVector(DVector::from_iterator(
                    self.domain.len(),
                    (0..self.domain.len()).map(|i| {
                        let (j, k) = self.domain.mode_index(i);
                        c[(j - 1, k - 1)]
                    }),
                ))
            }
        }
    }

    /// Modal coefficients of f(u(·)), by collocation on this grid.
    pub fn project(&self, u: &ModalVector, f: &Source) -> ModalVector {
        let mut g = self.synthesize(u);
        g.apply(|x| *x = f.value(*x));
        self.analyze(&g)
    }

    /// ∫ F(u) dx by the same quadrature used in [`Collocation::project`], so
    /// that its modal gradient is exactly `project(u)`.
    pub fn potential(&self, u: &ModalVector, f: &Source) -> f64 {
        let g = self.synthesize(u);
        self.weight * g.iter().map(|&x| f.antiderivative(x)).sum::<f64>()
    }

    /// Quadrature of a pointwise function of u.
    pub fn integrate_with(&self, u: &ModalVector, pointwise: impl Fn(f64) -> f64) -> f64 {
        let g = self.synthesize(u);
        self.weight * g.iter().map(|&x| pointwise(x)).sum::<f64>()
    }

    /// d project(u) / du = w Eᵀ diag(f′(u)) E, dense and symmetric.
    pub fn jacobian(&self, u: &ModalVector, f: &Source) -> DMatrix<f64> {
        let n = self.domain.len();
        let mut g = self.synthesize(u);
        g.apply(|x| *x = f.derivative(*x));
        match &self.sy {
            None => {
                let mut scaled = self.sx.clone();
                for (a, mut row) in scaled.row_iter_mut().enumerate() {
                    row *= g[a] * self.weight;
                }
                self.sx.tr_mul(&scaled)
            }
            Some(sy) => {
                let m = self.points_per_axis;
                // t[a][(k, k')] = Σ_b g_ab sy_bk sy_bk'
                let t: Vec<DMatrix<f64>> = (0..m)
                    .map(|a| {
                        let mut scaled = sy.clone();
                        for (b, mut row) in scaled.row_iter_mut().enumerate() {
                            row *= g[a * m + b];
                        }
                        sy.tr_mul(&scaled)
                    })
                    .collect();
                let mut jac = DMatrix::zeros(n, n);
                for p in 0..n {
                    let (j, k) = self.domain.mode_index(p);
                    for q in p..n {
                        let (jj, kk) = self.domain.mode_index(q);
                        let mut acc = 0.0;
                        for (a, ta) in t.iter().enumerate() {
                            acc += self.sx[(a, j - 1)] * self.sx[(a, jj - 1)] * ta[(k - 1, kk - 1)];
                        }
                        jac[(p, q)] = acc * self.weight;
                        jac[(q, p)] = acc * self.weight;
                    }
                }
                jac
            }
        }
    }
}

/// Result of [`project_f`].
#[derive(Clone, Debug)]
pub struct Projection {
    pub coefficients: ModalVector,
    /// Set when f is not a polynomial and the dealias factor is below 2.
    pub aliasing_warning: bool,
}

/// Modal coefficients of f(u) on a grid refined by `dealias`.
pub fn project_f(domain: &Domain, u: &ModalVector, f: &Source, dealias: f64) -> Result<Projection> {
    let grid = Collocation::dealiased(domain, dealias)?;
    Ok(Projection {
        coefficients: grid.project(u, f),
        aliasing_warning: f.polynomial_degree().is_none() && dealias < 2.0,
    })
}
