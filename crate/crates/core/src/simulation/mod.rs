//! Generative models for simulated functional data and the modal-curve
//! study harness.
//!
//! Every model draws curves `X(t) = Σ_{j≤10} θ_j^{1/2} X_j ψ_j(t)` on
//! `[0, 1]` with `ψ_j(t) = √2 cos(π j t)` and scores `X_j = c T V_j`, where
//! `T ~ U[1, 2]` is shared by all components of a curve and `c` standardizes
//! `T V_j` to unit variance. The scores are uncorrelated but dependent.
//!
//! | model | `V_j`         | `θ_j`  |
//! |-------|---------------|--------|
//! | i     | `χ²(8) - 8`   | `j⁻³`  |
//! | ii    | `χ²(8) - 8`   | `j⁻²`  |
//! | iii   | `N(0, 1)`     | `j⁻³`  |
//! | iv    | `N(0, 1)`     | `j⁻²`  |

mod study;

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

pub use study::{run_mode_study, ModalEstimator, ModeStudyConfig, ModeStudyRow};

use crate::curvespace::{Curve, FunctionalSample, Grid};
use crate::fpca::Decomposition;
use crate::rng::{substream, Rng};
use crate::search::golden_section_max;
use crate::{Error, Result, Scalar};

/// Number of Karhunen–Loève terms in every simulation model.
pub const SIM_COMPONENTS: usize = 10;
/// Default number of grid points on `[0, 1]`.
pub const DEFAULT_GRID_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelId {
    I,
    Ii,
    Iii,
    Iv,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::I, ModelId::Ii, ModelId::Iii, ModelId::Iv];

    fn chi_square(self) -> bool {
        matches!(self, ModelId::I | ModelId::Ii)
    }

    fn decay_exponent(self) -> i32 {
        match self {
            ModelId::I | ModelId::Iii => 3,
            ModelId::Ii | ModelId::Iv => 2,
        }
    }

    /// `θ_j` for `j = 1..=count`.
    pub fn eigenvalues(self, count: usize) -> Vec<f64> {
        (1..=count).map(|j| (j as f64).powi(-self.decay_exponent())).collect()
    }

    /// `c = var(T V)^{-1/2}`. `E T² = 7/3`; `var V = 16` for the centered
    /// `χ²(8)` and 1 for the normal, and `E V = 0` in both cases.
    pub fn normalizer(self) -> f64 {
        let var_v: f64 = if self.chi_square() { 16.0 } else { 1.0 };
        (1.0 / (7.0 / 3.0 * var_v)).sqrt()
    }

    /// Mode of the common score density (of `c T V`).
    pub fn score_mode(self) -> f64 {
        if self.chi_square() {
            static MODE: OnceLock<f64> = OnceLock::new();
            *MODE.get_or_init(|| chi_square_mixture_mode(ModelId::I.normalizer()))
        } else {
            0.0
        }
    }

    /// Density of the standardized score `c T V` at `y`.
    pub fn score_density(self, y: f64) -> f64 {
        let c = self.normalizer();
        if self.chi_square() {
            mixture_density(y, c, chi8_centered_pdf)
        } else {
            mixture_density(y, c, std_normal_pdf)
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelId::I => "i",
            ModelId::Ii => "ii",
            ModelId::Iii => "iii",
            ModelId::Iv => "iv",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(ModelId::I),
            "ii" | "2" => Ok(ModelId::Ii),
            "iii" | "3" => Ok(ModelId::Iii),
            "iv" | "4" => Ok(ModelId::Iv),
            other => Err(Error::arg(format!("unknown model '{other}' (expected i, ii, iii or iv)"))),
        }
    }
}

fn std_normal_pdf(v: f64) -> f64 {
    (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Density of `χ²(8) - 8`.
fn chi8_centered_pdf(v: f64) -> f64 {
    let x = v + 8.0;
    if x <= 0.0 {
        0.0
    } else {
        x * x * x * (-0.5 * x).exp() / 96.0
    }
}

/// `∫_1^2 f_V(y / (c t)) / (c t) dt`, composite Simpson on 2000 panels.
fn mixture_density(y: f64, c: f64, f_v: fn(f64) -> f64) -> f64 {
    let panels = 2000;
    let h = 1.0 / panels as f64;
    let g = |t: f64| f_v(y / (c * t)) / (c * t);
    let mut s = g(1.0) + g(2.0);
    for k in 1..panels {
        let t = 1.0 + k as f64 * h;
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * g(t);
    }
    s * h / 3.0
}

fn chi_square_mixture_mode(c: f64) -> f64 {
    let f = |y: f64| mixture_density(y, c, chi8_centered_pdf);
    // the centered χ²(8) has its mode at -2, so the scaled mixture peaks
    // between -4c and 0
    let (a, b) = (-6.0 * c, 0.5);
    let steps = 4000;
    let at = |k: usize| a + (b - a) * k as f64 / steps as f64;
    let best = (0..=steps).max_by(|&p, &q| f(at(p)).total_cmp(&f(at(q)))).unwrap_or(0);
    golden_section_max(f, at(best.saturating_sub(1)), at((best + 1).min(steps)), 1e-12)
}

/// One simulated data set request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimScenario {
    pub model: ModelId,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

impl SimScenario {
    pub fn new(model: ModelId, n: usize, seed: u64) -> Self {
        SimScenario { model, n, m: DEFAULT_GRID_POINTS, seed }
    }

    pub fn with_grid_points(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn simulator(&self) -> Result<Simulator> {
        Simulator::new(self.model, self.m)
    }
}

/// Known eigenstructure of a generating process.
#[derive(Debug, Clone)]
pub struct KnownStructure {
    pub basis: Decomposition<f64>,
    /// Mode of each component's score density.
    pub score_modes: Vec<f64>,
}

/// Anything that can draw independent curves on a fixed grid.
pub trait CurveGenerator: Sync {
    fn grid(&self) -> &Arc<Grid<f64>>;

    /// Draws `n` curves together with their true standardized scores
    /// (`scores[i][j]`, empty rows when unknown).
    fn draw(&self, n: usize, rng: &mut Rng) -> Result<(FunctionalSample<f64>, Vec<Vec<f64>>)>;

    /// True eigenpairs, when the process has analytic structure.
    fn truth(&self) -> Option<KnownStructure>;
}

/// Curve generator for one of the four simulation models.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: ModelId,
    grid: Arc<Grid<f64>>,
    theta: Vec<f64>,
    psi: Vec<Curve<f64>>,
}

impl Simulator {
    pub fn new(model: ModelId, m: usize) -> Result<Self> {
        let grid = Grid::uniform(0.0, 1.0, m)?;
        let theta = model.eigenvalues(SIM_COMPONENTS);
        let psi = (1..=SIM_COMPONENTS)
            .map(|j| {
                Curve::from_fn(grid.clone(), |t| {
                    std::f64::consts::SQRT_2 * (std::f64::consts::PI * j as f64 * t).cos()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Simulator { model, grid, theta, psi })
    }

    pub fn model(&self) -> ModelId {
        self.model
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.theta
    }

    pub fn eigenfunctions(&self) -> &[Curve<f64>] {
        &self.psi
    }

    /// `Σ_j θ_j^{1/2} m ψ_j`: the true modal function (the process mean is 0).
    pub fn modal_curve(&self) -> Result<Curve<f64>> {
        self.curve_from_scores(&[self.model.score_mode(); SIM_COMPONENTS])
    }

    pub fn curve_from_scores(&self, scores: &[f64]) -> Result<Curve<f64>> {
        let mut values = vec![0.0; self.grid.len()];
        for ((&s, &th), psi) in scores.iter().zip(&self.theta).zip(&self.psi) {
            let a = th.sqrt() * s;
            for (v, &p) in values.iter_mut().zip(psi.values()) {
                *v += a * p;
            }
        }
        Curve::new(self.grid.clone(), values)
    }

    /// One vector of standardized scores `c T V_j`.
    pub fn draw_scores(&self, rng: &mut Rng) -> Vec<f64> {
        let c = self.model.normalizer();
        let t: f64 = rng.random_range(1.0..2.0);
        if self.model.chi_square() {
            let chi = ChiSquared::new(8.0).expect("valid degrees of freedom");
            (0..SIM_COMPONENTS).map(|_| c * t * (chi.sample(rng) - 8.0)).collect()
        } else {
            (0..SIM_COMPONENTS)
                .map(|_| {
                    let v: f64 = StandardNormal.sample(rng);
                    c * t * v
                })
                .collect()
        }
    }
}

impl CurveGenerator for Simulator {
    fn grid(&self) -> &Arc<Grid<f64>> {
        &self.grid
    }

    fn draw(&self, n: usize, rng: &mut Rng) -> Result<(FunctionalSample<f64>, Vec<Vec<f64>>)> {
        let mut rows = Vec::with_capacity(n);
        let mut scores = Vec::with_capacity(n);
        for _ in 0..n {
            let s = self.draw_scores(rng);
            rows.push(self.curve_from_scores(&s)?.into_values());
            scores.push(s);
        }
        Ok((FunctionalSample::new(self.grid.clone(), rows)?, scores))
    }

    fn truth(&self) -> Option<KnownStructure> {
        let basis = Decomposition::new(self.grid.clone(), self.theta.clone(), self.psi.clone()).ok()?;
        Some(KnownStructure { basis, score_modes: vec![self.model.score_mode(); SIM_COMPONENTS] })
    }
}

/// A generated sample with everything known about how it was drawn.
#[derive(Debug, Clone)]
pub struct SimulatedSample {
    pub sample: FunctionalSample<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Curve<f64>>,
    /// `scores[i][j]`: true standardized score of curve `i` on component `j`.
    pub scores: Vec<Vec<f64>>,
    pub modal_curve: Curve<f64>,
}

/// Draws the scenario's sample; stream 0 of the scenario seed.
pub fn generate_sample(sc: &SimScenario) -> Result<SimulatedSample> {
    if sc.n == 0 {
        return Err(Error::arg("scenario needs n >= 1"));
    }
    let sim = sc.simulator()?;
    let mut rng = substream(sc.seed, 0);
    let (sample, scores) = sim.draw(sc.n, &mut rng)?;
    Ok(SimulatedSample {
        sample,
        eigenvalues: sim.theta.clone(),
        eigenfunctions: sim.psi.clone(),
        scores,
        modal_curve: sim.modal_curve()?,
    })
}

/// Pointwise and integrated mean squared error of a set of estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct MseSummary<T: Scalar> {
    pub pointwise: Curve<T>,
    pub integrated: T,
}

/// `MSE(t) = B⁻¹ Σ_b (ŷ_b(t) - y(t))²` and its integral over the grid.
pub fn mse_curve<T: Scalar>(estimates: &[Curve<T>], truth: &Curve<T>) -> Result<MseSummary<T>> {
    if estimates.is_empty() {
        return Err(Error::InsufficientData("need at least one estimate".into()));
    }
    let mut acc = vec![T::zero(); truth.len()];
    for e in estimates {
        e.check_grid(truth)?;
        for ((a, &y), &t) in acc.iter_mut().zip(e.values()).zip(truth.values()) {
            *a = *a + (y - t) * (y - t);
        }
    }
    let inv = T::one() / T::from_count(estimates.len());
    let pointwise = Curve::new(truth.grid().clone(), acc.into_iter().map(|a| a * inv).collect())?;
    let integrated = truth.grid().integrate(pointwise.values());
    Ok(MseSummary { pointwise, integrated })
}
