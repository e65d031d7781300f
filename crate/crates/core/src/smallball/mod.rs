//! Small-ball probabilities `p(h) = P(Σ_j θ_j W_j² ≤ h²)` of a process with
//! Karhunen-Loève scores `X_j` around a fixed curve with scores `x_j`
//! (`W_j = X_j - x_j`), their Monte Carlo estimates, and the closed-form
//! product approximations that justify the log-density surrogate.
//!
//! Monte Carlo work is split into chunks of [`MC_CHUNK`] draws; chunk `k`
//! uses [`substream`]`(seed, k)`, so results do not depend on the number of
//! worker threads.

mod decay;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::rng::{child_seed, substream, Rng};
use crate::{Error, Result};

pub use decay::{
    classify_decay, default_snap_tolerance, effective_dimension, DecayClass, DecayDiagnostics,
    DecayKind, EigenDecaySpec, Regime, DEFAULT_LAMBDA, DEFAULT_TRUNCATION, EXPONENTIAL_BAND,
    SUPEREXPONENTIAL_RATIO,
};

pub const MC_CHUNK: usize = 1 << 16;
/// Estimates from fewer hits are flagged.
pub const LOW_HIT_COUNT: u64 = 200;
const Z95: f64 = 1.959_963_984_540_054;

/// Standardized law of each score `X_j`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ScoreLaw {
    #[default]
    Gaussian,
    /// `(χ²_k - k)/√(2k)`.
    ChiSquare(f64),
    /// Uniform on `[-√3, √3]`.
    Uniform,
}

impl ScoreLaw {
    pub fn validate(self) -> Result<Self> {
        match self {
            ScoreLaw::ChiSquare(k) if !(k.is_finite() && k > 0.0) => {
                Err(Error::arg(format!("chi-square degrees of freedom must be positive, got {k}")))
            }
            _ => Ok(self),
        }
    }

    pub fn pdf(self, y: f64) -> f64 {
        match self {
            ScoreLaw::Gaussian => (-0.5 * y * y).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            ScoreLaw::ChiSquare(k) => {
                let s = (2.0 * k).sqrt();
                let c = k + s * y;
                if c <= 0.0 {
                    return 0.0;
                }
                let half = 0.5 * k;
                let log = (half - 1.0) * c.ln() - 0.5 * c - half * std::f64::consts::LN_2 - ln_gamma(half);
                s * log.exp()
            }
            ScoreLaw::Uniform => {
                let a = 3f64.sqrt();
                if y.abs() <= a {
                    0.5 / a
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sample(self, rng: &mut Rng) -> f64 {
        match self {
            ScoreLaw::Gaussian => StandardNormal.sample(rng),
            ScoreLaw::ChiSquare(k) => {
                let c: f64 = ChiSquared::new(k).expect("validated").sample(rng);
                (c - k) / (2.0 * k).sqrt()
            }
            ScoreLaw::Uniform => {
                let a = 3f64.sqrt();
                rng.random_range(-a..a)
            }
        }
    }

    /// All supported laws are standardized.
    pub fn variance(self) -> f64 {
        1.0
    }
}

impl fmt::Display for ScoreLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreLaw::Gaussian => f.write_str("gaussian"),
            ScoreLaw::ChiSquare(k) => write!(f, "chisq:{k}"),
            ScoreLaw::Uniform => f.write_str("uniform"),
        }
    }
}

impl FromStr for ScoreLaw {
    type Err = Error;
    /// `gaussian`, `uniform` or `chisq:<df>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "gaussian" | "normal" => Ok(ScoreLaw::Gaussian),
            "uniform" => Ok(ScoreLaw::Uniform),
            other => {
                let df = other
                    .strip_prefix("chisq:")
                    .and_then(|d| d.parse::<f64>().ok())
                    .ok_or_else(|| Error::arg(format!("unknown score law '{s}'")))?;
                ScoreLaw::ChiSquare(df).validate()
            }
        }
    }
}

/// A process `Σ_j θ_j^{1/2} X_j ψ_j` seen from a fixed curve with scores
/// `x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSpec {
    decay: EigenDecaySpec,
    laws: Vec<ScoreLaw>,
    center: Vec<f64>,
}

impl ProcessSpec {
    /// Same law for every component. `center` may be shorter than the
    /// truncation and is padded with zeros.
    pub fn new(decay: EigenDecaySpec, law: ScoreLaw, center: Vec<f64>) -> Result<Self> {
        let laws = vec![law; decay.truncation()];
        Self::with_laws(decay, laws, center)
    }

    pub fn with_laws(decay: EigenDecaySpec, laws: Vec<ScoreLaw>, mut center: Vec<f64>) -> Result<Self> {
        let j = decay.truncation();
        if laws.len() != j {
            return Err(Error::LengthMismatch { expected: j, got: laws.len() });
        }
        for law in &laws {
            law.validate()?;
        }
        if center.len() > j {
            return Err(Error::arg(format!("{} center scores for {j} components", center.len())));
        }
        if let Some(index) = center.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        center.resize(j, 0.0);
        Ok(ProcessSpec { decay, laws, center })
    }

    pub fn decay(&self) -> &EigenDecaySpec {
        &self.decay
    }

    pub fn laws(&self) -> &[ScoreLaw] {
        &self.laws
    }

    /// `x_1, ..., x_{J_max}`.
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// The same process around a different curve.
    pub fn recentered(&self, center: Vec<f64>) -> Result<Self> {
        Self::with_laws(self.decay.clone(), self.laws.clone(), center)
    }

    /// `f_j(x_j)` for `j = 1..=r`.
    pub fn center_densities(&self, r: usize) -> Vec<f64> {
        self.laws.iter().zip(&self.center).take(r).map(|(l, &x)| l.pdf(x)).collect()
    }

    /// `Σ_{j≤r} log f_j(x_j)`.
    pub fn log_density_sum(&self, r: usize) -> f64 {
        self.center_densities(r).iter().map(|f| f.ln()).sum()
    }

    /// One squared distance `Σ_{j>skip} θ_j W_j²`; all scores are drawn so
    /// the stream position does not depend on `skip`.
    fn draw_partial(&self, rng: &mut Rng, skip: usize) -> f64 {
        let th = self.decay.eigenvalues();
        let mut acc = 0.0;
        for j in 0..th.len() {
            let w = self.laws[j].sample(rng) - self.center[j];
            if j >= skip {
                acc += th[j] * w * w;
            }
        }
        acc
    }
}

/// `π^{r/2} / Γ(r/2 + 1)`.
pub fn unit_ball_volume(r: usize) -> f64 {
    ln_unit_ball_volume(r).exp()
}

pub fn ln_unit_ball_volume(r: usize) -> f64 {
    match r {
        0 => 0.0,
        1 => std::f64::consts::LN_2,
        2 => std::f64::consts::PI.ln(),
        _ => {
            let half = 0.5 * r as f64;
            half * std::f64::consts::PI.ln() - ln_gamma(half + 1.0)
        }
    }
}

/// A Monte Carlo probability with its 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McProbability {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub hits: u64,
    pub draws: u64,
    /// Fewer than [`LOW_HIT_COUNT`] hits.
    pub low_count: bool,
}

impl McProbability {
    /// Builds the estimate from a hit count. With zero hits the interval is
    /// the one-sided `[0, 1 - 0.05^{1/n}]`.
    pub fn from_hits(hits: u64, draws: u64) -> Self {
        let n = draws as f64;
        let p = hits as f64 / n;
        let (lower, upper) = if hits == 0 {
            (0.0, 1.0 - 0.05f64.powf(1.0 / n))
        } else {
            let z2 = Z95 * Z95;
            let denom = 1.0 + z2 / n;
            let centre = (p + z2 / (2.0 * n)) / denom;
            let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
            ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
        };
        McProbability { estimate: p, lower, upper, hits, draws, low_count: hits < LOW_HIT_COUNT }
    }
}

/// Runs `per_chunk(rng, count)` over fixed chunks and concatenates the
/// results in chunk order.
fn chunked<T: Send>(n: usize, seed: u64, per_chunk: impl Fn(&mut Rng, usize) -> Vec<T> + Sync) -> Vec<T> {
    let chunks = n.div_ceil(MC_CHUNK);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let count = MC_CHUNK.min(n - k * MC_CHUNK);
            per_chunk(&mut substream(seed, k as u64), count)
        })
        .collect();
    parts.into_iter().flatten().collect()
}

/// `n_mc` draws of `||X - x||² = Σ_j θ_j W_j²`.
pub fn squared_distance_mc(spec: &ProcessSpec, n_mc: usize, seed: u64) -> Vec<f64> {
    chunked(n_mc, seed, |rng, count| (0..count).map(|_| spec.draw_partial(rng, 0)).collect())
}

fn check_mc(n_mc: usize) -> Result<()> {
    if n_mc == 0 {
        return Err(Error::arg("need at least one Monte Carlo draw"));
    }
    Ok(())
}

fn check_radius(h: f64) -> Result<()> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::arg(format!("radius must be finite and non-negative, got {h}")));
    }
    Ok(())
}

/// Estimates `p(h)` from `n_mc` draws.
pub fn small_ball_mc(spec: &ProcessSpec, h: f64, n_mc: usize, seed: u64) -> Result<McProbability> {
    Ok(small_ball_mc_many(spec, &[h], n_mc, seed)?.remove(0))
}

/// Estimates `p(h)` at several radii from one set of draws.
pub fn small_ball_mc_many(spec: &ProcessSpec, radii: &[f64], n_mc: usize, seed: u64) -> Result<Vec<McProbability>> {
    check_mc(n_mc)?;
    for &h in radii {
        check_radius(h)?;
    }
    let limits: Vec<f64> = radii.iter().map(|h| h * h).collect();
    let chunks = n_mc.div_ceil(MC_CHUNK);
    let counts: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            let mut hits = vec![0u64; limits.len()];
            for _ in 0..MC_CHUNK.min(n_mc - k * MC_CHUNK) {
                let d = spec.draw_partial(&mut rng, 0);
                for (c, &l) in hits.iter_mut().zip(&limits) {
                    *c += u64::from(d <= l);
                }
            }
            hits
        })
        .collect();
    Ok((0..radii.len())
        .map(|i| McProbability::from_hits(counts.iter().map(|c| c[i]).sum(), n_mc as u64))
        .collect())
}

/// Draws of `S = h⁻² Σ_{j>r} θ_j W_j²`.
pub fn tail_distribution_mc(spec: &ProcessSpec, h: f64, r: usize, n_mc: usize, seed: u64) -> Result<Vec<f64>> {
    check_mc(n_mc)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::arg(format!("radius must be positive, got {h}")));
    }
    let jmax = spec.decay.truncation();
    if r >= jmax {
        return Err(Error::arg(format!("r = {r} leaves no tail below the truncation {jmax}")));
    }
    let h2 = h * h;
    Ok(chunked(n_mc, seed, |rng, count| (0..count).map(|_| spec.draw_partial(rng, r) / h2).collect()))
}

/// Monte Carlo estimate of `∫₀¹ (1 - t)^{r/2} dG(t)`.
pub fn g_integral(tail_sample: &[f64], r: usize) -> f64 {
    let e = 0.5 * r as f64;
    let total: f64 = tail_sample.iter().filter(|&&s| s <= 1.0).map(|&s| (1.0 - s).powf(e)).sum();
    total / tail_sample.len() as f64
}

/// `r log(h√π) - log Γ(r/2+1) + Σ_{j≤r} (log f_j(x_j) - ½ log θ_j)`.
fn log_leading(spec: &ProcessSpec, h: f64, r: usize, densities: &[f64]) -> Result<f64> {
    if r == 0 {
        return Err(Error::arg("r must be at least 1"));
    }
    if r > spec.decay.truncation() {
        return Err(Error::arg(format!("r = {r} exceeds the truncation {}", spec.decay.truncation())));
    }
    if densities.len() < r {
        return Err(Error::LengthMismatch { expected: r, got: densities.len() });
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::arg(format!("radius must be positive, got {h}")));
    }
    if let Some(j) = densities[..r].iter().position(|&f| !(f > 0.0 && f.is_finite())) {
        return Err(Error::arg(format!("density at the center is {} for component {}", densities[j], j + 1)));
    }
    let th = spec.decay.eigenvalues();
    let products: f64 = (0..r).map(|j| densities[j].ln() - 0.5 * th[j].ln()).sum();
    Ok(r as f64 * h.ln() + ln_unit_ball_volume(r) + products)
}

/// `log q(h)`; `-∞` when no tail draw lands in `[0, 1]`.
pub fn log_q_approx(spec: &ProcessSpec, h: f64, r: usize, densities: &[f64], tail_sample: &[f64]) -> Result<f64> {
    if tail_sample.is_empty() {
        return Err(Error::arg("tail sample is empty"));
    }
    let lead = log_leading(spec, h, r, densities)?;
    let g = g_integral(tail_sample, r);
    Ok(if g > 0.0 { lead + g.ln() } else { f64::NEG_INFINITY })
}

/// The product approximation
/// `q(h) = (h√π)^r Γ(r/2+1)⁻¹ Π_{j≤r} θ_j^{-1/2} f_j(x_j) ∫₀¹(1-t)^{r/2}dG(t)`.
pub fn q_approx(spec: &ProcessSpec, h: f64, r: usize, densities: &[f64], tail_sample: &[f64]) -> Result<f64> {
    Ok(log_q_approx(spec, h, r, densities, tail_sample)?.exp())
}

/// Leading-order approximation with the tail integral replaced by one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticApprox {
    pub value: f64,
    pub log_value: f64,
    /// `½ r {log(2πe h²) - log r} + Σ_{j≤r} (Θ_j + φ_j)` with
    /// `Θ_j = -½ log θ_j` and `φ_j = log f_j(x_j)`: the Stirling form of
    /// `log_value`, which omits `log Γ`'s `½ log(πr) + 1/(6r)` remainder.
    pub log_stirling_form: f64,
}

pub fn asymptotic_approx(spec: &ProcessSpec, h: f64, r: usize, densities: &[f64]) -> Result<AsymptoticApprox> {
    let log_value = log_leading(spec, h, r, densities)?;
    let th = spec.decay.eigenvalues();
    let rf = r as f64;
    let sum: f64 = (0..r).map(|j| densities[j].ln() - 0.5 * th[j].ln()).sum();
    let log_stirling_form =
        0.5 * rf * ((2.0 * std::f64::consts::PI * std::f64::consts::E * h * h).ln() - rf.ln()) + sum;
    Ok(AsymptoticApprox { value: log_value.exp(), log_value, log_stirling_form })
}

/// Monte Carlo probability against the closed forms at one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallBallReport {
    pub radius: f64,
    pub r: usize,
    pub p_mc: McProbability,
    pub q_hat: f64,
    pub log_q_hat: f64,
    pub asymptotic: AsymptoticApprox,
    /// `G`-integral estimate, in `[0, 1]`.
    pub g_integral: f64,
    /// `log(p_mc / q_hat)`.
    pub log_ratio: f64,
    /// `|log_ratio| / r`.
    pub per_dim_error: f64,
    /// Fewer than [`LOW_HIT_COUNT`] hits.
    pub unreliable: bool,
    /// Omitted series tail below `1e-9 h²`; `None` for explicit lists.
    pub truncation_negligible: Option<bool>,
}

/// Settings for [`validate_approximation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationConfig {
    pub regime: Regime,
    pub lambda: f64,
    pub n_mc: usize,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig { regime: Regime::Exponential, lambda: DEFAULT_LAMBDA, n_mc: 1_000_000, seed: 0 }
    }
}

/// For each radius: picks `r`, estimates `p(h)`, and evaluates `q(h)` and
/// the leading-order term. Radii must be positive and decreasing.
///
/// Ball probabilities share one set of draws (stream family
/// `child_seed(seed, 0)`); tail samples use `child_seed(seed, 1)`.
pub fn validate_approximation(spec: &ProcessSpec, radii: &[f64], cfg: &ValidationConfig) -> Result<Vec<SmallBallReport>> {
    if radii.is_empty() {
        return Ok(Vec::new());
    }
    check_mc(cfg.n_mc)?;
    if radii.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(Error::arg("radii must be positive"));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::arg("radii must be strictly decreasing"));
    }
    let dims = radii
        .iter()
        .map(|&h| effective_dimension(&spec.decay, h, cfg.regime, cfg.lambda, None))
        .collect::<Result<Vec<_>>>()?;
    let probs = small_ball_mc_many(spec, radii, cfg.n_mc, child_seed(cfg.seed, 0))?;
    let tail_seed = child_seed(cfg.seed, 1);
    radii
        .iter()
        .zip(dims)
        .zip(probs)
        .map(|((&h, r), p)| {
            let dens = spec.center_densities(r);
            let tail = tail_distribution_mc(spec, h, r, cfg.n_mc, tail_seed)?;
            let g = g_integral(&tail, r);
            let log_q = log_q_approx(spec, h, r, &dens, &tail)?;
            let asymptotic = asymptotic_approx(spec, h, r, &dens)?;
            let log_ratio = p.estimate.ln() - log_q;
            Ok(SmallBallReport {
                radius: h,
                r,
                p_mc: p,
                q_hat: log_q.exp(),
                log_q_hat: log_q,
                asymptotic,
                g_integral: g,
                log_ratio,
                per_dim_error: log_ratio.abs() / r as f64,
                unreliable: p.low_count,
                truncation_negligible: spec.decay.truncation_negligible(h),
            })
        })
        .collect()
}
