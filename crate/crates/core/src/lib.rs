//! Spectral Galerkin simulation of the Kirchhoff wave equation with
//! state-dependent nonlocal strong damping,
//!
//! ```text
//! u_tt − σ(‖∇u‖²)Δu_t − φ(‖∇u‖²)Δu + f(u) = h,   u|∂Ω = 0,
//! ```
//!
//! on an interval or a rectangle, together with the energy functionals of
//! the problem, an equilibrium solver, probes for its long-time behaviour
//! and a finite-difference reference solver.

pub mod dynamics;
pub mod energetics;
pub mod equilibria;
pub mod error;
pub mod io;
pub mod longtime;
pub mod model;
pub mod oracle;
pub mod parallel;
pub mod scenarios;
pub mod spectral;

pub use dynamics::{ModalState, Scheme, Stepper, StepperConfig, Trajectory};
pub use error::{Error, Result};
pub use model::{check_assumptions, AssumptionReport, CoefficientSet, Damping, Source, Stiffness};
pub use parallel::Execution;
pub use spectral::{Collocation, Domain, DomainKind, ModalVector};
