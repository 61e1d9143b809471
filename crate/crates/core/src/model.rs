//! Coefficient families for the damping factor σ, the stiffness factor φ and
//! the source f, together with their closed-form antiderivatives and a
//! checker for the structural hypotheses the long-time theory relies on.
//!
//! Every family is closed-form so that Σ, Φ and F are exact; the energy
//! identity along discrete trajectories is then free of quadrature error in
//! the nonlocal potential.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Damping factor σ(s), s = ‖∇u‖².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Damping {
    /// σ(s) = σ₀.
    Constant { sigma0: f64 },
    /// σ(s) = σ₀ + σ₁ s^β.
    PowerAffine { sigma0: f64, sigma1: f64, beta: f64 },
}

/// Stiffness factor φ(s), s = ‖∇u‖².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Stiffness {
    /// φ(s) = φ₀, any sign.
    Constant { phi0: f64 },
    /// φ(s) = φ₀ + φ₁ s^α.
    PowerAffine { phi0: f64, phi1: f64, alpha: f64 },
    /// φ(s) = φ₀·max(0, 1 − s/s₀), a stiffness with finite support.
    CompactBump { phi0: f64, s0: f64 },
}

/// Source term f(u).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Source {
    Zero,
    /// f(u) = μ u.
    Linear {
        mu: f64,
    },
    /// f(u) = a|u|^{p−1}u + b u.
    OddPower {
        a: f64,
        p: f64,
        b: f64,
    },
    /// f(u) = a u³ − b u.
    CubicMinusLinear {
        a: f64,
        b: f64,
    },
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name}: parameters must be finite")))
    }
}

impl Damping {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Damping::Constant { sigma0 } => {
                check_finite("sigma", &[sigma0])?;
                if sigma0 <= 0.0 {
                    return Err(Error::Domain(format!(
                        "sigma: sigma0 = {sigma0} must be positive"
                    )));
                }
            }
            Damping::PowerAffine {
                sigma0,
                sigma1,
                beta,
            } => {
                check_finite("sigma", &[sigma0, sigma1, beta])?;
                if sigma0 <= 0.0 || sigma1 < 0.0 || beta < 1.0 {
                    return Err(Error::Domain(format!(
                        "sigma: power-affine requires sigma0 > 0, sigma1 >= 0, beta >= 1 (got {sigma0}, {sigma1}, {beta})"
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Damping::Constant { sigma0 } => sigma0,
            Damping::PowerAffine {
                sigma0,
                sigma1,
                beta,
            } => sigma0 + sigma1 * s.powf(beta),
        }
    }

    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            Damping::Constant { .. } => 0.0,
            Damping::PowerAffine { sigma1, beta, .. } => sigma1 * beta * s.powf(beta - 1.0),
        }
    }

    /// Σ(s) = ∫₀ˢ σ.
    #[inline]
    pub fn antiderivative(&self, s: f64) -> f64 {
        match *self {
            Damping::Constant { sigma0 } => sigma0 * s,
            Damping::PowerAffine {
                sigma0,
                sigma1,
                beta,
            } => sigma0 * s + sigma1 * s.powf(beta + 1.0) / (beta + 1.0),
        }
    }

    pub fn asymptotic_value(&self) -> f64 {
        if self.is_superlinear_antiderivative() {
            f64::INFINITY
        } else {
            self.value(0.0)
        }
    }

    /// Lower bound of σ over R₊ (σ is nondecreasing for every family).
    pub fn lower_bound(&self) -> f64 {
        self.value(0.0)
    }

    fn is_superlinear_antiderivative(&self) -> bool {
        matches!(*self, Damping::PowerAffine { sigma1, .. } if sigma1 > 0.0)
    }
}

impl Stiffness {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Stiffness::Constant { phi0 } => check_finite("phi", &[phi0])?,
            Stiffness::PowerAffine { phi0, phi1, alpha } => {
                check_finite("phi", &[phi0, phi1, alpha])?;
                if phi1 <= 0.0 || alpha < 1.0 {
                    return Err(Error::Domain(format!(
                        "phi: power-affine requires phi1 > 0 and alpha >= 1 (got {phi1}, {alpha})"
                    )));
                }
            }
            Stiffness::CompactBump { phi0, s0 } => {
                check_finite("phi", &[phi0, s0])?;
                if s0 <= 0.0 {
                    return Err(Error::Domain(format!(
                        "phi: compact-bump support s0 = {s0} must be positive"
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Stiffness::Constant { phi0 } => phi0,
            Stiffness::PowerAffine { phi0, phi1, alpha } => phi0 + phi1 * s.powf(alpha),
            Stiffness::CompactBump { phi0, s0 } => phi0 * (1.0 - s / s0).max(0.0),
        }
    }

    /// φ′(s); one-sided from the right at the kink of the compact bump.
    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            Stiffness::Constant { .. } => 0.0,
            Stiffness::PowerAffine { phi1, alpha, .. } => phi1 * alpha * s.powf(alpha - 1.0),
            Stiffness::CompactBump { phi0, s0 } => {
                if s < s0 {
                    -phi0 / s0
                } else {
                    0.0
                }
            }
        }
    }

    /// Φ(s) = ∫₀ˢ φ.
    #[inline]
    pub fn antiderivative(&self, s: f64) -> f64 {
        match *self {
            Stiffness::Constant { phi0 } => phi0 * s,
            Stiffness::PowerAffine { phi0, phi1, alpha } => {
                phi0 * s + phi1 * s.powf(alpha + 1.0) / (alpha + 1.0)
            }
            Stiffness::CompactBump { phi0, s0 } => {
                let r = s.min(s0);
                phi0 * (r - r * r / (2.0 * s0))
            }
        }
    }

    /// liminf φ(s) as s → ∞.
    pub fn asymptotic_value(&self) -> f64 {
        match *self {
            Stiffness::Constant { phi0 } => phi0,
            Stiffness::PowerAffine { .. } => f64::INFINITY,
            Stiffness::CompactBump { .. } => 0.0,
        }
    }

    fn antiderivative_diverges(&self) -> bool {
        match *self {
            Stiffness::Constant { phi0 } => phi0 > 0.0,
            Stiffness::PowerAffine { .. } => true,
            Stiffness::CompactBump { .. } => false,
        }
    }

    /// inf over s ≥ 0 of s·φ(s), with the minimiser.
    fn inf_s_phi(&self) -> (f64, f64) {
        match *self {
            Stiffness::Constant { phi0 } => {
                if phi0 >= 0.0 {
                    (0.0, 0.0)
                } else {
                    (f64::NEG_INFINITY, f64::INFINITY)
                }
            }
            Stiffness::PowerAffine { phi0, phi1, alpha } => {
                if phi0 >= 0.0 {
                    (0.0, 0.0)
                } else {
                    let s = (-phi0 / (phi1 * (alpha + 1.0))).powf(1.0 / alpha);
                    (s * self.value(s), s)
                }
            }
            Stiffness::CompactBump { phi0, s0 } => {
                if phi0 >= 0.0 {
                    (0.0, 0.0)
                } else {
                    (phi0 * s0 / 4.0, s0 / 2.0)
                }
            }
        }
    }
}

impl Source {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Source::Zero => {}
            Source::Linear { mu } => check_finite("f", &[mu])?,
            Source::OddPower { a, p, b } => {
                check_finite("f", &[a, p, b])?;
                if a < 0.0 || p < 1.0 {
                    return Err(Error::Domain(format!(
                        "f: odd-power requires a >= 0 and p >= 1 (got a = {a}, p = {p})"
                    )));
                }
            }
            Source::CubicMinusLinear { a, b } => check_finite("f", &[a, b])?,
        }
        Ok(())
    }

    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Source::Zero => 0.0,
            Source::Linear { mu } => mu * u,
            Source::OddPower { a, p, b } => a * u.abs().powf(p - 1.0) * u + b * u,
            Source::CubicMinusLinear { a, b } => a * u * u * u - b * u,
        }
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Source::Zero => 0.0,
            Source::Linear { mu } => mu,
            Source::OddPower { a, p, b } => a * p * u.abs().powf(p - 1.0) + b,
            Source::CubicMinusLinear { a, b } => 3.0 * a * u * u - b,
        }
    }

    /// F(u) = ∫₀ᵘ f.
    #[inline]
    pub fn antiderivative(&self, u: f64) -> f64 {
        match *self {
            Source::Zero => 0.0,
            Source::Linear { mu } => 0.5 * mu * u * u,
            Source::OddPower { a, p, b } => a * u.abs().powf(p + 1.0) / (p + 1.0) + 0.5 * b * u * u,
            Source::CubicMinusLinear { a, b } => 0.25 * a * u.powi(4) - 0.5 * b * u * u,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Source::Zero => true,
            Source::Linear { mu } => mu == 0.0,
            Source::OddPower { a, b, .. } => a == 0.0 && b == 0.0,
            Source::CubicMinusLinear { a, b } => a == 0.0 && b == 0.0,
        }
    }

    /// Every supported family is odd in u.
    pub fn is_odd(&self) -> bool {
        true
    }

    /// Polynomial degree, or `None` when f is not a polynomial.
    pub fn polynomial_degree(&self) -> Option<u32> {
        match *self {
            Source::Zero => Some(0),
            Source::Linear { .. } => Some(1),
            Source::OddPower { a, p, .. } => {
                if a == 0.0 || p == 1.0 {
                    Some(1)
                } else if p.fract() == 0.0 && (p as i64) % 2 == 1 {
                    Some(p as u32)
                } else {
                    None
                }
            }
            Source::CubicMinusLinear { a, .. } => Some(if a == 0.0 { 1 } else { 3 }),
        }
    }

    /// Growth exponent p in |f′(u)| ≲ 1 + |u|^{p−1}.
    pub fn growth_exponent(&self) -> f64 {
        match *self {
            Source::Zero | Source::Linear { .. } => 1.0,
            Source::OddPower { a, p, .. } => {
                if a == 0.0 {
                    1.0
                } else {
                    p
                }
            }
            Source::CubicMinusLinear { a, .. } => {
                if a == 0.0 {
                    1.0
                } else {
                    3.0
                }
            }
        }
    }

    /// μ_f = liminf_{|s|→∞} f(s)/s, from the leading-order term.
    pub fn mu_f(&self) -> f64 {
        match *self {
            Source::Zero => 0.0,
            Source::Linear { mu } => mu,
            Source::OddPower { a, p, b } => {
                if a > 0.0 && p > 1.0 {
                    f64::INFINITY
                } else {
                    a + b
                }
            }
            Source::CubicMinusLinear { a, b } => {
                if a > 0.0 {
                    f64::INFINITY
                } else if a < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -b
                }
            }
        }
    }

    /// c ≥ 0 with f′(u) ≥ −c for all u, when such a bound exists.
    pub fn derivative_lower_bound(&self) -> Option<f64> {
        match *self {
            Source::Zero => Some(0.0),
            Source::Linear { mu } => Some(mu),
            Source::OddPower { b, .. } => Some(b),
            Source::CubicMinusLinear { a, b } => {
                if a >= 0.0 {
                    Some(-b)
                } else {
                    None
                }
            }
        }
    }

    fn is_c2(&self) -> bool {
        match *self {
            Source::OddPower { a, p, .. } => a == 0.0 || p == 1.0 || p >= 2.0,
            _ => true,
        }
    }
}

/// The triple (σ, φ, f) plus the modal forcing h.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSet {
    pub sigma: Damping,
    pub phi: Stiffness,
    pub f: Source,
    /// Modal coefficients of h in the domain's eigenvalue order; missing
    /// trailing entries are zero.
    #[serde(default)]
    pub forcing: Vec<f64>,
}

impl CoefficientSet {
    pub fn new(sigma: Damping, phi: Stiffness, f: Source, forcing: Vec<f64>) -> Result<Self> {
        let set = CoefficientSet {
            sigma,
            phi,
            f,
            forcing,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        self.sigma.validate()?;
        self.phi.validate()?;
        self.f.validate()?;
        check_finite("forcing", &self.forcing)?;
        if let Some(s) = scan_grid(1e8)
            .into_iter()
            .find(|&s| self.sigma.value(s) <= 0.0)
        {
            return Err(Error::Domain(format!("sigma({s:e}) is not positive")));
        }
        Ok(())
    }

    /// h as a vector over `n` modes.
    pub fn forcing_vector(&self, n: usize) -> Result<Vec<f64>> {
        if self.forcing.iter().skip(n).any(|&h| h != 0.0) {
            return Err(Error::Config(format!(
                "forcing has nonzero entries beyond the {n} resolved modes"
            )));
        }
        let mut h = vec![0.0; n];
        for (dst, &src) in h.iter_mut().zip(&self.forcing) {
            *dst = src;
        }
        Ok(h)
    }

    pub fn has_forcing(&self) -> bool {
        self.forcing.iter().any(|&h| h != 0.0)
    }

    pub fn eval_sigma(&self, s: f64) -> Result<f64> {
        nonneg(s)?;
        Ok(self.sigma.value(s))
    }

    pub fn eval_phi(&self, s: f64) -> Result<f64> {
        nonneg(s)?;
        Ok(self.phi.value(s))
    }

    #[allow(non_snake_case)]
    pub fn eval_Sigma(&self, s: f64) -> Result<f64> {
        nonneg(s)?;
        Ok(self.sigma.antiderivative(s))
    }

    #[allow(non_snake_case)]
    pub fn eval_Phi(&self, s: f64) -> Result<f64> {
        nonneg(s)?;
        Ok(self.phi.antiderivative(s))
    }

    pub fn eval_f(&self, u: f64) -> f64 {
        self.f.value(u)
    }

    pub fn eval_fprime(&self, u: f64) -> f64 {
        self.f.derivative(u)
    }

    #[allow(non_snake_case)]
    pub fn eval_F(&self, u: f64) -> f64 {
        self.f.antiderivative(u)
    }

    /// a(η) = inf_{s≥0} [Φ(s) + ηΣ(s)].
    ///
    /// φ + ησ is nondecreasing for every supported family, so Φ + ηΣ is
    /// convex and the infimum sits at the root of φ + ησ (or at 0).
    pub fn augmented_floor(&self, eta: f64) -> f64 {
        let psi = |s: f64| self.phi.value(s) + eta * self.sigma.value(s);
        let g = |s: f64| self.phi.antiderivative(s) + eta * self.sigma.antiderivative(s);
        if psi(0.0) >= 0.0 {
            return 0.0;
        }
        let asymptote = if eta > 0.0 {
            self.phi.asymptotic_value() + eta * self.sigma.asymptotic_value()
        } else {
            self.phi.asymptotic_value()
        };
        if asymptote < 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut hi = 1.0;
        while psi(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e300 {
                // ψ → 0⁻: Φ + ηΣ is eventually flat.
                return g(hi);
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if psi(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        g(hi)
    }
}

fn nonneg(s: f64) -> Result<()> {
    if s >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "argument s = {s} must be nonnegative"
        )))
    }
}

/// Upper end of the scan grid used when no other bound is configured.
pub const DEFAULT_S_MAX: f64 = 1e6;

/// 512 log-spaced points on [1e−8, s_max], preceded by s = 0.
pub fn scan_grid(s_max: f64) -> Vec<f64> {
    const POINTS: usize = 512;
    let lo = 1e-8f64.ln();
    let hi = s_max.max(2e-8).ln();
    let mut grid = Vec::with_capacity(POINTS + 1);
    grid.push(0.0);
    grid.extend((0..POINTS).map(|i| (lo + (hi - lo) * i as f64 / (POINTS - 1) as f64).exp()));
    grid
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub description: String,
    #[serde(serialize_with = "serialize_extended")]
    pub point: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub note: String,
}

impl HypothesisCheck {
    fn pass(note: impl Into<String>) -> Self {
        HypothesisCheck {
            verdict: Verdict::Pass,
            witness: None,
            note: note.into(),
        }
    }

    fn fail(
        note: impl Into<String>,
        description: impl Into<String>,
        point: f64,
        value: f64,
    ) -> Self {
        HypothesisCheck {
            verdict: Verdict::Fail,
            witness: Some(Witness {
                description: description.into(),
                point,
                value,
            }),
            note: note.into(),
        }
    }

    fn not_evaluated(note: impl Into<String>) -> Self {
        HypothesisCheck {
            verdict: Verdict::Inconclusive,
            witness: None,
            note: note.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Serialises non-finite values as the strings "inf", "-inf", "nan".
pub fn serialize_extended<S: Serializer>(x: &f64, ser: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        ser.serialize_f64(*x)
    } else if x.is_nan() {
        ser.serialize_str("nan")
    } else if *x > 0.0 {
        ser.serialize_str("inf")
    } else {
        ser.serialize_str("-inf")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub dimension: usize,
    pub lambda1: f64,
    pub s_max: f64,
    /// σ > 0, coercivity of Φ + η₀Σ and the lower bound sφ(s) + c₁Σ(s) ≥ −c₂.
    pub wellposed_coefficients: HypothesisCheck,
    /// f(0) = 0, μ_f > −∞ and the dimension-dependent growth condition.
    pub wellposed_source: HypothesisCheck,
    /// Relaxed source coercivity tied to φ; never evaluated.
    pub wellposed_source_relaxed: HypothesisCheck,
    pub dissipativity: HypothesisCheck,
    pub super_positivity: HypothesisCheck,
    pub super_spectral: HypothesisCheck,
    pub crit_subcritical: HypothesisCheck,
    pub crit_critical: HypothesisCheck,
    #[serde(serialize_with = "serialize_extended")]
    pub eta0: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub c1: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub c2: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub mu_f: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub mu_hat_phi: f64,
    pub criticality: Criticality,
    pub growth_exponent: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub p_star: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub p_star_star: f64,
    pub warnings: Vec<String>,
}

impl AssumptionReport {
    pub fn passes_well_posedness(&self) -> bool {
        self.wellposed_coefficients.passed() && self.wellposed_source.passed()
    }

    pub fn passes_dissipativity(&self) -> bool {
        self.passes_well_posedness() && self.dissipativity.passed()
    }

    pub fn passes_super(&self) -> bool {
        self.super_positivity.passed() && self.super_spectral.passed()
    }

    pub fn passes_crit(&self) -> bool {
        self.crit_subcritical.passed() || self.crit_critical.passed()
    }

    pub fn all_pass(&self) -> bool {
        self.passes_dissipativity() && self.passes_super() && self.passes_crit()
    }

    pub fn is_supercritical(&self) -> bool {
        self.criticality == Criticality::Supercritical
    }
}

/// p* = (d+2)/(d−2) (∞ for d ≤ 2) and p** = (d+4)/(d−4)₊ (∞ for d ≤ 4).
pub fn critical_exponents(d: usize) -> (f64, f64) {
    let d = d as f64;
    let p_star = if d <= 2.0 {
        f64::INFINITY
    } else {
        (d + 2.0) / (d - 2.0)
    };
    let p_star_star = if d <= 4.0 {
        f64::INFINITY
    } else {
        (d + 4.0) / (d - 4.0)
    };
    (p_star, p_star_star)
}

fn fmt_ext(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "+inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x}")
    }
}

/// Checks the structural hypotheses for `coeffs` on a domain of spatial
/// dimension `d` with first Dirichlet eigenvalue `lambda1`. Coercivity is
/// decided from the leading-order terms of the closed forms; positivity is
/// decided analytically and cross-checked on [`scan_grid`].
pub fn check_assumptions(
    coeffs: &CoefficientSet,
    d: usize,
    lambda1: f64,
    s_max: f64,
) -> AssumptionReport {
    let grid = scan_grid(s_max);
    let mut warnings = Vec::new();

    let mu_f = coeffs.f.mu_f();
    let mu_hat_phi = coeffs.phi.asymptotic_value();
    let p = coeffs.f.growth_exponent();
    let (p_star, p_star_star) = critical_exponents(d);
    let criticality = if d <= 2 || p < p_star {
        Criticality::Subcritical
    } else if p == p_star {
        Criticality::Critical
    } else {
        Criticality::Supercritical
    };
    if criticality == Criticality::Supercritical && p >= p_star_star {
        warnings.push(format!(
            "growth exponent p = {p} is not below p** = {}",
            fmt_ext(p_star_star)
        ));
    }

    // --- σ positivity, coercivity and the sφ + c₁Σ lower bound ---
    let sigma_witness = grid.iter().copied().find(|&s| coeffs.sigma.value(s) <= 0.0);
    let sigma_floor = coeffs.sigma.lower_bound();
    let eta0 = if coeffs.phi.antiderivative_diverges() {
        0.0
    } else if coeffs.sigma.is_superlinear_antiderivative() {
        1.0
    } else {
        (2.0 * (-mu_hat_phi).max(0.0) / sigma_floor).max(1.0)
    };
    let (inf_s_phi, argmin_s_phi) = coeffs.phi.inf_s_phi();
    let (c1, c2) = if inf_s_phi.is_finite() {
        (0.0, (-inf_s_phi).max(0.0))
    } else {
        // Constant negative φ: c₁Σ must absorb −φ₀ s.
        let phi0 = coeffs.phi.value(0.0);
        let c1 = -phi0 / sigma_floor;
        let c2 = grid
            .iter()
            .map(|&s| s * coeffs.phi.value(s) + c1 * coeffs.sigma.antiderivative(s))
            .fold(0.0f64, |acc, v| acc.max(-v));
        (c1, c2)
    };
    let wellposed_coefficients = if let Some(s) = sigma_witness {
        HypothesisCheck::fail(
            "sigma must be positive on R+",
            "sigma(s) <= 0",
            s,
            coeffs.sigma.value(s),
        )
    } else if sigma_floor <= 0.0 {
        HypothesisCheck::fail(
            "sigma must be positive on R+",
            "sigma(0) <= 0",
            0.0,
            sigma_floor,
        )
    } else {
        let floor_ok = grid.iter().all(|&s| {
            s * coeffs.phi.value(s) + c1 * coeffs.sigma.antiderivative(s)
                >= -c2 - 1e-12 * (1.0 + c2)
        });
        if floor_ok {
            HypothesisCheck::pass(format!(
                "Phi + eta0*Sigma -> +inf with eta0 = {eta0}; s*phi(s) + c1*Sigma(s) >= -c2 with c1 = {c1}, c2 = {c2}"
            ))
        } else {
            HypothesisCheck::fail(
                "lower bound s*phi + c1*Sigma >= -c2 violated on scan grid",
                "s*phi(s) at its minimiser",
                argmin_s_phi,
                inf_s_phi,
            )
        }
    };

    // --- source ---
    let wellposed_source = if coeffs.f.value(0.0) != 0.0 {
        HypothesisCheck::fail("f(0) must vanish", "f(0)", 0.0, coeffs.f.value(0.0))
    } else if mu_f == f64::NEG_INFINITY {
        HypothesisCheck::fail(
            "mu_f = liminf f(s)/s must be > -inf",
            "f(s)/s at s = 1e8",
            1e8,
            coeffs.f.value(1e8) / 1e8,
        )
    } else if criticality == Criticality::Supercritical {
        match coeffs.f {
            Source::OddPower { a, .. } if a > 0.0 => HypothesisCheck::pass(format!(
                "supercritical two-sided growth bound holds with p = {p}, mu_f = {}",
                fmt_ext(mu_f)
            )),
            _ => HypothesisCheck::fail(
                "supercritical class needs c0|u|^(p-1) - c1 <= f'(u)",
                "f'(u) at u = 1e4",
                1e4,
                coeffs.f.derivative(1e4),
            ),
        }
    } else {
        HypothesisCheck::pass(format!("f(0) = 0, mu_f = {}, p = {p}", fmt_ext(mu_f)))
    };
    let wellposed_source_relaxed = HypothesisCheck::not_evaluated(
        "relaxed source coercivity depending on phi is not evaluated",
    );

    // --- dissipativity: (44a) or (φ(s)s → ∞ and μ_f > 0) ---
    let spectral_ok =
        mu_hat_phi > 0.0 && (mu_hat_phi == f64::INFINITY || mu_hat_phi * lambda1 + mu_f > 0.0);
    let phi_s_diverges = coeffs.phi.antiderivative_diverges() || mu_hat_phi > 0.0;
    let dissipativity = if spectral_ok {
        HypothesisCheck::pass(format!(
            "liminf phi = {} > 0 and liminf phi * lambda1 + mu_f > 0",
            fmt_ext(mu_hat_phi)
        ))
    } else if phi_s_diverges && mu_f > 0.0 {
        HypothesisCheck::pass(format!("phi(s)s -> +inf and mu_f = {} > 0", fmt_ext(mu_f)))
    } else if !phi_s_diverges {
        let s = s_max;
        HypothesisCheck::fail(
            format!(
                "phi(s)s does not diverge and liminf phi = {} is not positive",
                fmt_ext(mu_hat_phi)
            ),
            "phi(s)s at s_max does not tend to +inf",
            s,
            s * coeffs.phi.value(s),
        )
    } else {
        HypothesisCheck::fail(
            format!(
                "mu_f = {} and liminf phi * lambda1 + mu_f = {} are not positive",
                fmt_ext(mu_f),
                fmt_ext(mu_hat_phi * lambda1 + mu_f)
            ),
            "f(s)/s at s = 1e8",
            1e8,
            coeffs.f.value(1e8) / 1e8,
        )
    };

    // --- positivity of σ and φ, and the spectral gap condition ---
    let phi_witness = grid
        .iter()
        .copied()
        .find(|&s| coeffs.phi.value(s) <= 0.0)
        .or_else(|| {
            if matches!(coeffs.phi, Stiffness::CompactBump { .. }) || mu_hat_phi <= 0.0 {
                Some(match coeffs.phi {
                    Stiffness::CompactBump { s0, .. } => s0,
                    _ => s_max,
                })
            } else {
                None
            }
        });
    let super_positivity = match (sigma_witness, phi_witness) {
        (Some(s), _) => HypothesisCheck::fail(
            "sigma must be positive",
            "sigma(s) <= 0",
            s,
            coeffs.sigma.value(s),
        ),
        (None, Some(s)) => HypothesisCheck::fail(
            "phi must be positive on R+",
            "phi(s) <= 0",
            s,
            coeffs.phi.value(s),
        ),
        (None, None) => {
            HypothesisCheck::pass("sigma > 0 and phi > 0 on R+ (analytic and on scan grid)")
        }
    };
    let gap = mu_hat_phi * lambda1 + mu_f;
    let super_spectral = if criticality == Criticality::Supercritical {
        HypothesisCheck::pass("holds automatically in the supercritical class")
    } else if gap > 0.0 || (mu_hat_phi == f64::INFINITY && mu_f > f64::NEG_INFINITY) {
        HypothesisCheck::pass(format!(
            "lambda1 * liminf phi + mu_f = {} > 0",
            fmt_ext(gap)
        ))
    } else {
        HypothesisCheck::fail(
            "lambda1 * liminf phi + mu_f must be positive",
            "lambda1 * liminf phi + mu_f",
            lambda1,
            gap,
        )
    };

    // --- φ ∈ C² nondecreasing, f′ ≥ −c, then (a) subcritical or (b) critical ---
    let phi_smooth_monotone: std::result::Result<(), (String, f64, f64)> = match coeffs.phi {
        Stiffness::Constant { .. } => Ok(()),
        Stiffness::PowerAffine { alpha, .. } => {
            if alpha == 1.0 || alpha >= 2.0 {
                Ok(())
            } else {
                Err((
                    "phi'' unbounded at s = 0 for 1 < alpha < 2".into(),
                    0.0,
                    alpha,
                ))
            }
        }
        Stiffness::CompactBump { phi0, s0 } => {
            if phi0 == 0.0 {
                Ok(())
            } else {
                Err((
                    "compact bump is not C^1 at its support edge".into(),
                    s0,
                    coeffs.phi.derivative(0.5 * s0),
                ))
            }
        }
    };
    let fprime_floor = coeffs.f.derivative_lower_bound();
    let common = match (&phi_smooth_monotone, fprime_floor) {
        (Err((why, s, v)), _) => Err(HypothesisCheck::fail(
            "phi must be C^2 and nondecreasing",
            why.clone(),
            *s,
            *v,
        )),
        (Ok(()), None) => Err(HypothesisCheck::fail(
            "f' must be bounded below",
            "f'(u) at u = 1e4",
            1e4,
            coeffs.f.derivative(1e4),
        )),
        (Ok(()), Some(floor)) => Ok((-floor).max(0.0)),
    };
    let (crit_subcritical, crit_critical) = match common {
        Err(check) => (check.clone(), check),
        Ok(c) => {
            let sub = if d <= 2 || p < p_star {
                HypothesisCheck::pass(format!("subcritical source, f' >= -{c}"))
            } else {
                HypothesisCheck::fail("requires d <= 2 or p < p*", "growth exponent p", p_star, p)
            };
            let crit = if !(3..=6).contains(&d) {
                HypothesisCheck::fail(
                    "requires 3 <= d <= 6",
                    "spatial dimension",
                    d as f64,
                    d as f64,
                )
            } else if p > p_star {
                HypothesisCheck::fail(
                    "|f''| must grow at most like |u|^(p*-2)",
                    "growth exponent p",
                    p_star,
                    p,
                )
            } else if !coeffs.f.is_c2() {
                HypothesisCheck::fail("f must be C^2", "growth exponent p", 0.0, p)
            } else {
                HypothesisCheck::pass(format!(
                    "|f''(u)| <= C(1 + |u|^(p*-2)) with p* = {p_star}, f' >= -{c}"
                ))
            };
            (sub, crit)
        }
    };

    AssumptionReport {
        dimension: d,
        lambda1,
        s_max,
        wellposed_coefficients,
        wellposed_source,
        wellposed_source_relaxed,
        dissipativity,
        super_positivity,
        super_spectral,
        crit_subcritical,
        crit_critical,
        eta0,
        c1,
        c2,
        mu_f,
        mu_hat_phi,
        criticality,
        growth_exponent: p,
        p_star,
        p_star_star,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(sigma: Damping, phi: Stiffness, f: Source) -> CoefficientSet {
        CoefficientSet::new(sigma, phi, f, vec![]).unwrap()
    }

    fn families() -> Vec<CoefficientSet> {
        let sigmas = [
            Damping::Constant { sigma0: 1.5 },
            Damping::PowerAffine {
                sigma0: 0.5,
                sigma1: 2.0,
                beta: 1.5,
            },
        ];
        let phis = [
            Stiffness::Constant { phi0: -0.7 },
            Stiffness::PowerAffine {
                phi0: -1.0,
                phi1: 1.0,
                alpha: 2.0,
            },
            Stiffness::CompactBump { phi0: 2.0, s0: 3.0 },
        ];
        let fs = [
            Source::Zero,
            Source::Linear { mu: 0.3 },
            Source::OddPower {
                a: 1.0,
                p: 2.5,
                b: -0.5,
            },
            Source::CubicMinusLinear { a: 1.0, b: 1.0 },
        ];
        let mut out = Vec::new();
        for s in &sigmas {
            for p in &phis {
                for f in &fs {
                    out.push(set(s.clone(), p.clone(), f.clone()));
                }
            }
        }
        out
    }

    #[test]
    fn closed_form_examples() {
        let c = set(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::PowerAffine {
                phi0: 1.0,
                phi1: 1.0,
                alpha: 1.0,
            },
            Source::OddPower {
                a: 1.0,
                p: 3.0,
                b: 0.0,
            },
        );
        assert_eq!(c.eval_Phi(2.0).unwrap(), 4.0);
        assert_eq!(c.eval_F(2.0), 4.0);
        assert_eq!(c.eval_Sigma(5.0).unwrap(), 5.0);
        assert_eq!(c.eval_Phi(0.0).unwrap(), 0.0);
        assert_eq!(c.eval_F(0.0), 0.0);
    }

    #[test]
    fn negative_argument_is_domain_error() {
        let c = families().remove(0);
        assert!(matches!(c.eval_sigma(-1.0), Err(Error::Domain(_))));
        assert!(matches!(c.eval_Phi(-1e-3), Err(Error::Domain(_))));
        // f is defined on all of R.
        assert_eq!(c.eval_F(-1.0), c.eval_F(1.0));
    }

    #[test]
    fn antiderivatives_match_central_differences() {
        for c in families() {
            for &s in &[0.0f64, 0.5, 1.0, 10.0] {
                let h = 1e-5 * s.max(1.0);
                // One-sided at 0 for the nonnegative-domain coefficients.
                let (lo, hi, width) = if s == 0.0 {
                    (0.0, h, h)
                } else {
                    (s - h, s + h, 2.0 * h)
                };
                let d_phi = (c.phi.antiderivative(hi) - c.phi.antiderivative(lo)) / width;
                let d_sigma = (c.sigma.antiderivative(hi) - c.sigma.antiderivative(lo)) / width;
                let mid = if s == 0.0 { 0.5 * h } else { s };
                let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
                assert!(rel(d_phi, c.phi.value(mid)) < 1e-8, "{:?} at {s}", c.phi);
                assert!(
                    rel(d_sigma, c.sigma.value(mid)) < 1e-8,
                    "{:?} at {s}",
                    c.sigma
                );
                for &u in &[s, -s] {
                    let d_f = (c.f.antiderivative(u + h) - c.f.antiderivative(u - h)) / (2.0 * h);
                    assert!(rel(d_f, c.f.value(u)) < 1e-8, "{:?} at {u}", c.f);
                    let d_fp = (c.f.value(u + h) - c.f.value(u - h)) / (2.0 * h);
                    assert!(rel(d_fp, c.f.derivative(u)) < 1e-6, "{:?}' at {u}", c.f);
                }
            }
        }
    }

    #[test]
    fn f_vanishes_at_origin_and_is_odd() {
        for c in families() {
            assert_eq!(c.f.value(0.0), 0.0);
            for &u in &[0.3, 1.7, 4.0] {
                assert_eq!(c.f.value(-u), -c.f.value(u));
            }
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(Damping::Constant { sigma0: 0.0 }.validate().is_err());
        assert!(Damping::PowerAffine {
            sigma0: 1.0,
            sigma1: -1.0,
            beta: 1.0
        }
        .validate()
        .is_err());
        assert!(Stiffness::PowerAffine {
            phi0: 0.0,
            phi1: 1.0,
            alpha: 0.5
        }
        .validate()
        .is_err());
        assert!(Stiffness::CompactBump { phi0: 1.0, s0: 0.0 }
            .validate()
            .is_err());
        assert!(Source::OddPower {
            a: -1.0,
            p: 3.0,
            b: 0.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn negative_constant_stiffness_is_well_posed_but_not_dissipative() {
        let c = set(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::Constant { phi0: -1.0 },
            Source::Zero,
        );
        let r = check_assumptions(&c, 1, 1.0, 100.0);
        assert!(r.wellposed_coefficients.passed());
        assert_eq!(r.eta0, 2.0);
        assert_eq!(r.c1, 1.0);
        assert_eq!(r.c2, 0.0);
        assert_eq!(r.dissipativity.verdict, Verdict::Fail);
        assert!(r.dissipativity.witness.is_some());
        assert_eq!(r.mu_hat_phi, -1.0);
        assert_eq!(c.augmented_floor(2.0), 0.0);
    }

    #[test]
    fn criticality_in_three_dimensions() {
        let c = set(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::PowerAffine {
                phi0: 1.0,
                phi1: 1.0,
                alpha: 1.0,
            },
            Source::OddPower {
                a: 1.0,
                p: 3.0,
                b: 0.0,
            },
        );
        let r = check_assumptions(&c, 3, 1.0, 100.0);
        assert_eq!(r.p_star, 5.0);
        assert_eq!(r.criticality, Criticality::Subcritical);
        let c5 = set(
            c.sigma.clone(),
            c.phi.clone(),
            Source::OddPower {
                a: 1.0,
                p: 5.0,
                b: 0.0,
            },
        );
        assert_eq!(
            check_assumptions(&c5, 3, 1.0, 100.0).criticality,
            Criticality::Critical
        );
        let c6 = set(
            c.sigma.clone(),
            c.phi.clone(),
            Source::OddPower {
                a: 1.0,
                p: 6.0,
                b: 0.0,
            },
        );
        let r6 = check_assumptions(&c6, 3, 1.0, 100.0);
        assert_eq!(r6.criticality, Criticality::Supercritical);
        // p** = 7/(−1)₊ = ∞ in 3D: no warning.
        assert!(r6.warnings.is_empty());
        assert!(r6.super_spectral.passed());
        let r6_5d = check_assumptions(
            &set(
                c.sigma.clone(),
                c.phi.clone(),
                Source::OddPower {
                    a: 1.0,
                    p: 10.0,
                    b: 0.0,
                },
            ),
            5,
            1.0,
            100.0,
        );
        assert_eq!(r6_5d.p_star_star, 9.0);
        assert_eq!(r6_5d.warnings.len(), 1);
    }

    #[test]
    fn admissible_class_passes_everything() {
        let c = set(
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
        );
        let r = check_assumptions(&c, 3, 1.0, 100.0);
        assert!(r.passes_well_posedness());
        assert!(r.dissipativity.passed());
        assert!(r.passes_super());
        assert!(r.crit_critical.passed());
        assert!(r.all_pass());
        assert_eq!(r, check_assumptions(&c, 3, 1.0, 100.0));
    }

    #[test]
    fn compact_bump_fails_positivity_with_witness() {
        let c = set(
            Damping::Constant { sigma0: 1.0 },
            Stiffness::CompactBump { phi0: 1.0, s0: 2.0 },
            Source::CubicMinusLinear { a: 1.0, b: 0.5 },
        );
        let r = check_assumptions(&c, 1, 1.0, 100.0);
        assert!(r.passes_well_posedness());
        assert_eq!(r.super_positivity.verdict, Verdict::Fail);
        let w = r.super_positivity.witness.unwrap();
        assert!(w.point >= 2.0 && w.value <= 0.0);
        assert_eq!(r.crit_subcritical.verdict, Verdict::Fail);
        // phi(s)s stays bounded but mu_f = inf: dissipativity through (phi-s) fails, (44a) fails.
        assert_eq!(r.dissipativity.verdict, Verdict::Fail);
    }

    #[test]
    fn every_fail_carries_a_witness() {
        for c in families() {
            for d in [1, 2, 3] {
                let r = check_assumptions(&c, d, 1.0, 50.0);
                for check in [
                    &r.wellposed_coefficients,
                    &r.wellposed_source,
                    &r.dissipativity,
                    &r.super_positivity,
                    &r.super_spectral,
                    &r.crit_subcritical,
                    &r.crit_critical,
                ] {
                    if check.verdict == Verdict::Fail {
                        assert!(check.witness.is_some(), "{check:?}");
                    }
                }
                assert_eq!(r.wellposed_source_relaxed.verdict, Verdict::Inconclusive);
            }
        }
    }

    #[test]
    fn augmented_floor_matches_dense_scan() {
        for c in families() {
            for &eta in &[0.0, 0.5, 1.0, 3.0] {
                let a = c.augmented_floor(eta);
                let scan = (0..200_000)
                    .map(|i| i as f64 * 1e-4)
                    .map(|s| c.phi.antiderivative(s) + eta * c.sigma.antiderivative(s))
                    .fold(f64::INFINITY, f64::min);
                if a.is_finite() {
                    assert!(a <= scan + 1e-9, "{c:?} eta={eta}: {a} vs {scan}");
                    assert!(scan - a < 1e-6, "{c:?} eta={eta}: {a} vs {scan}");
                } else {
                    assert_eq!(a, f64::NEG_INFINITY);
                }
            }
        }
    }
}
