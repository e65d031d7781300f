//! Eigenvalue sequences, their decay regime, and the effective dimension
//! `r(h)` attached to a ball radius.

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

pub const DEFAULT_TRUNCATION: usize = 200;
pub const DEFAULT_LAMBDA: f64 = 3.0;
/// `θ_{k+1}/θ_k` must end below this for a superexponential verdict.
pub const SUPEREXPONENTIAL_RATIO: f64 = 0.05;
/// Relative band for the tail ratio over the last third of probes.
pub const EXPONENTIAL_BAND: f64 = 0.1;
/// Gaussian-like sequences are cut before `exp(-c j^2)` leaves the normal
/// double range.
const LOG_EIGENVALUE_FLOOR: f64 = -700.0;

#[derive(Debug, Clone, PartialEq)]
pub enum DecayKind {
    /// `θ_j = j^{-a}`, `a > 1`.
    Power(f64),
    /// `θ_j = ρ^j`, `0 < ρ < 1`.
    Geometric(f64),
    /// `θ_j = exp(-c j^2)`, `c > 0`.
    GaussianLike(f64),
    /// Listed eigenvalues, positive and non-increasing.
    Explicit(Vec<f64>),
}

/// An eigenvalue sequence truncated after `truncation` terms.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecaySpec {
    kind: DecayKind,
    truncation: usize,
    eigenvalues: Vec<f64>,
}

impl EigenDecaySpec {
    pub fn new(kind: DecayKind, truncation: usize) -> Result<Self> {
        match &kind {
            DecayKind::Power(a) if !(a.is_finite() && *a > 1.0) => {
                return Err(Error::arg(format!("power decay needs a > 1, got {a}")))
            }
            DecayKind::Geometric(rho) if !(*rho > 0.0 && *rho < 1.0) => {
                return Err(Error::arg(format!("geometric decay needs 0 < rho < 1, got {rho}")))
            }
            DecayKind::GaussianLike(c) if !(c.is_finite() && *c > 0.0) => {
                return Err(Error::arg(format!("gaussian-like decay needs c > 0, got {c}")))
            }
            DecayKind::Explicit(v) if truncation != v.len() => {
                return Err(Error::arg("explicit eigenvalues define their own truncation"))
            }
            _ => {}
        }
        if truncation == 0 {
            return Err(Error::arg("truncation must be at least 1"));
        }
        let eigenvalues: Vec<f64> = match &kind {
            DecayKind::Power(a) => (1..=truncation).map(|j| (j as f64).powf(-a)).collect(),
            DecayKind::Geometric(rho) => (1..=truncation).map(|j| rho.powi(j as i32)).collect(),
            DecayKind::GaussianLike(c) => (1..=truncation).map(|j| (-c * (j * j) as f64).exp()).collect(),
            DecayKind::Explicit(v) => v.clone(),
        };
        for (j, &t) in eigenvalues.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::arg(format!(
                    "eigenvalue {} is {t}; eigenvalues must be positive (lower the truncation)",
                    j + 1
                )));
            }
            if j > 0 && t > eigenvalues[j - 1] {
                return Err(Error::arg(format!("eigenvalues increase at index {}", j + 1)));
            }
        }
        Ok(EigenDecaySpec { kind, truncation, eigenvalues })
    }

    pub fn power(a: f64) -> Result<Self> {
        Self::new(DecayKind::Power(a), DEFAULT_TRUNCATION)
    }

    pub fn geometric(rho: f64) -> Result<Self> {
        Self::new(DecayKind::Geometric(rho), DEFAULT_TRUNCATION)
    }

    /// Truncates at the default length or where `c j^2` passes 700,
    /// whichever comes first.
    pub fn gaussian_like(c: f64) -> Result<Self> {
        let cap = if c > 0.0 { (-LOG_EIGENVALUE_FLOOR / c).sqrt().floor() as usize } else { 1 };
        Self::new(DecayKind::GaussianLike(c), DEFAULT_TRUNCATION.min(cap.max(1)))
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(DecayKind::Explicit(values), n)
    }

    pub fn kind(&self) -> &DecayKind {
        &self.kind
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// `θ_1, ..., θ_{J_max}`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `θ_j` for 1-based `j`.
    pub fn theta(&self, j: usize) -> f64 {
        self.eigenvalues[j - 1]
    }

    /// Every eigenvalue multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::explicit(self.eigenvalues.iter().map(|t| t * factor).collect())
    }

    /// Upper bound on `Σ_{j > J_max} θ_j` for closed-form sequences.
    pub fn omitted_tail_bound(&self) -> Option<f64> {
        let k = self.truncation as f64;
        match self.kind {
            DecayKind::Power(a) => Some(k.powf(1.0 - a) / (a - 1.0)),
            DecayKind::Geometric(rho) => Some(rho.powf(k + 1.0) / (1.0 - rho)),
            DecayKind::GaussianLike(c) => {
                let first = (-c * (k + 1.0) * (k + 1.0)).exp();
                Some(first / (1.0 - (-c * (2.0 * k + 3.0)).exp()))
            }
            DecayKind::Explicit(_) => None,
        }
    }

    /// Whether the omitted tail is negligible at radius `h`, meaning it
    /// falls below `1e-9 h^2`. `None` for explicit lists.
    pub fn truncation_negligible(&self, h: f64) -> Option<bool> {
        self.omitted_tail_bound().map(|t| t < 1e-9 * h * h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecayClass {
    Superexponential,
    Exponential,
    Neither,
}

impl DecayClass {
    pub fn label(self) -> &'static str {
        match self {
            DecayClass::Superexponential => "superexponential",
            DecayClass::Exponential => "exponential",
            DecayClass::Neither => "neither",
        }
    }
}

impl fmt::Display for DecayClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Probe output behind a [`DecayClass`] verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayDiagnostics {
    pub class: DecayClass,
    /// `θ_{k+1}/θ_k` for `k = 1..=k_probe`.
    pub ratios: Vec<f64>,
    /// `θ_k^{-1} Σ_{k<j≤J_max} θ_j` for `k = 1..=k_probe`.
    pub tail_ratios: Vec<f64>,
}

/// Classifies the decay of the truncated sequence from its first `k_probe`
/// ratios.
pub fn classify_decay(decay: &EigenDecaySpec, k_probe: usize) -> Result<DecayDiagnostics> {
    if k_probe < 3 {
        return Err(Error::arg(format!("need at least 3 probes, got {k_probe}")));
    }
    if k_probe >= decay.truncation() {
        return Err(Error::arg(format!(
            "k_probe = {k_probe} must be below the truncation {}",
            decay.truncation()
        )));
    }
    let th = decay.eigenvalues();
    let ratios: Vec<f64> = (0..k_probe).map(|k| th[k + 1] / th[k]).collect();
    let mut suffix = vec![0.0; th.len() + 1];
    for j in (0..th.len()).rev() {
        suffix[j] = suffix[j + 1] + th[j];
    }
    let tail_ratios: Vec<f64> = (0..k_probe).map(|k| suffix[k + 1] / th[k]).collect();

    let decreasing = ratios.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let class = if decreasing && ratios[k_probe - 1] < SUPEREXPONENTIAL_RATIO {
        DecayClass::Superexponential
    } else {
        let start = k_probe - (k_probe / 3).max(1);
        let last = tail_ratios[k_probe - 1];
        let stable = tail_ratios[start..]
            .iter()
            .all(|&t| (t / last - 1.0).abs() <= EXPONENTIAL_BAND);
        if stable {
            DecayClass::Exponential
        } else {
            DecayClass::Neither
        }
    };
    Ok(DecayDiagnostics { class, ratios, tail_ratios })
}

/// Rule used to turn a radius into a dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regime {
    /// Snap to `s` when `|log(h^2/θ_s)| ≤ c_s`, else bracket `h^2`.
    Superexponential,
    /// Largest `j` with `h^2/θ_j ≤ λ^2`.
    #[default]
    Exponential,
    /// `θ_{r+1} < h^2 ≤ θ_r`.
    Bracket,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Superexponential => "superexponential",
            Regime::Exponential => "exponential",
            Regime::Bracket => "bracket",
        }
    }
}

impl From<DecayClass> for Regime {
    fn from(c: DecayClass) -> Self {
        match c {
            DecayClass::Superexponential => Regime::Superexponential,
            DecayClass::Exponential => Regime::Exponential,
            DecayClass::Neither => Regime::Bracket,
        }
    }
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "superexponential" => Ok(Regime::Superexponential),
            "exponential" => Ok(Regime::Exponential),
            "bracket" | "neither" => Ok(Regime::Bracket),
            other => Err(Error::arg(format!("unknown regime '{other}'"))),
        }
    }
}

/// Default snapping tolerance `c_s = ln(1 + s)`.
pub fn default_snap_tolerance(s: usize) -> f64 {
    (1.0 + s as f64).ln()
}

fn bracket(th: &[f64], h2: f64) -> Option<usize> {
    // r with θ_{r+1} < h^2 ≤ θ_r
    let r = th.iter().take_while(|&&t| t >= h2).count();
    (r >= 1 && r < th.len()).then_some(r)
}

/// Effective dimension at radius `h`.
///
/// `snap` overrides the tolerance sequence `c_s` of the superexponential
/// rule. Fails when `h^2 > λ^2 θ_1` or when the truncated sequence cannot
/// resolve `h`.
pub fn effective_dimension(
    decay: &EigenDecaySpec,
    h: f64,
    regime: Regime,
    lambda: f64,
    snap: Option<&dyn Fn(usize) -> f64>,
) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::arg(format!("radius must be positive, got {h}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::arg(format!("lambda must be positive, got {lambda}")));
    }
    let th = decay.eigenvalues();
    let h2 = h * h;
    let l2 = lambda * lambda;
    if h2 > l2 * th[0] {
        return Err(Error::arg("radius too large for dimension-1 resolution"));
    }
    let too_small = || Error::arg(format!("radius {h} is below the resolution of {} eigenvalues", th.len()));
    match regime {
        Regime::Exponential => {
            let r = th.iter().take_while(|&&t| h2 <= l2 * t).count();
            if r == th.len() {
                Err(too_small())
            } else {
                Ok(r)
            }
        }
        Regime::Superexponential => {
            let c = |s: usize| snap.map_or_else(|| default_snap_tolerance(s), |f| f(s));
            if let Some(s) = (1..=th.len()).find(|&s| (h2 / th[s - 1]).ln().abs() <= c(s)) {
                return Ok(s);
            }
            bracket(th, h2).ok_or_else(|| {
                if h2 > th[0] {
                    Error::arg("radius too large for dimension-1 resolution")
                } else {
                    too_small()
                }
            })
        }
        Regime::Bracket => bracket(th, h2).ok_or_else(|| {
            if h2 > th[0] {
                Error::arg("radius too large for dimension-1 resolution")
            } else {
                too_small()
            }
        }),
    }
}
