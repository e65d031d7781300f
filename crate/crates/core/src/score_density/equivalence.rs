//! Gap between score densities evaluated with estimated and with true
//! eigenstructure.
//!
//! For a test curve `x`, `f̂_j(x̂_j)` uses `θ̂_j, ψ̂_j` from the sample while
//! the ideal `f̄_j(x_j)` uses the true `θ_j, ψ_j`; both share the sample and
//! the bandwidth. The gap should vanish faster than `(n h)^{-1/2}`, so the
//! scaled gap `(n h)^{1/2} sup_x |f̂_j - f̄_j|` is expected to shrink as `n`
//! grows.

use super::{bandwidth_normal_reference, ideal_kde_evaluate, Kernel, ScoreDensityEstimator};
use crate::curvespace::{Curve, FunctionalSample};
use crate::fpca::{project_scores, FpcaModel};
use crate::rng::substream;
use crate::simulation::CurveGenerator;
use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GapConfig {
    /// Component index, 1-based.
    pub component: usize,
    /// Sample sizes, increasing.
    pub n_list: Vec<usize>,
    pub n_test: usize,
    pub kernel: Kernel,
    /// Test curves are restricted to `||x|| <= radius`; `None` uses three
    /// times the root total variance.
    pub radius: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub n: usize,
    pub bandwidth: f64,
    pub max_gap: f64,
    pub median_gap: f64,
    pub scaled_max_gap: f64,
    pub scaled_median_gap: f64,
}

/// `|f̂_j(x̂_j) - f̄_j(x_j)|` for one test curve given the fitted model.
pub fn density_gap(
    sample: &FunctionalSample<f64>,
    model: &FpcaModel<f64>,
    estimator: &ScoreDensityEstimator<f64>,
    component: usize,
    true_theta: f64,
    true_psi: &Curve<f64>,
    x: &Curve<f64>,
) -> Result<f64> {
    let scores = project_scores(model, x)?;
    let xj = scores
        .get(component)
        .copied()
        .flatten()
        .ok_or_else(|| Error::Degenerate(format!("component {} is null", component + 1)))?;
    let fitted = estimator.evaluate(xj);
    let ideal = ideal_kde_evaluate(sample, true_theta, true_psi, x, estimator.bandwidth(), estimator.kernel())?;
    Ok((fitted - ideal).abs())
}

/// Estimates the sup-gap over random test curves for each sample size.
///
/// Stream `2k` of `seed` draws the sample for `n_list[k]`, stream `2k + 1`
/// its test curves.
pub fn equivalence_gap(generator: &dyn CurveGenerator, cfg: &GapConfig) -> Result<Vec<GapRow>> {
    let truth = generator
        .truth()
        .ok_or_else(|| Error::arg("the generator has no analytic eigenstructure"))?;
    let j = cfg
        .component
        .checked_sub(1)
        .ok_or_else(|| Error::arg("component index is 1-based"))?;
    if j >= truth.basis.len() {
        return Err(Error::arg(format!("component {} exceeds the known structure", cfg.component)));
    }
    if cfg.n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg("sample sizes must be increasing"));
    }
    if cfg.n_test == 0 {
        return Ok(Vec::new());
    }
    let theta = truth.basis.eigenvalues()[j];
    let psi = &truth.basis.eigenfunctions()[j];
    let radius = cfg
        .radius
        .unwrap_or_else(|| 3.0 * truth.basis.eigenvalues().iter().sum::<f64>().sqrt());

    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for (k, &n) in cfg.n_list.iter().enumerate() {
        let mut rng = substream(cfg.seed, 2 * k as u64);
        let (sample, _) = generator.draw(n, &mut rng)?;
        let model = FpcaModel::fit(&sample, j + 1)?;
        if model.active_components() <= j {
            return Err(Error::Degenerate(format!("component {} is null in the fit", cfg.component)));
        }
        let col = model.score_column(j).to_vec();
        let bandwidth = bandwidth_normal_reference(&col)?;
        let est = ScoreDensityEstimator::new(col, cfg.kernel, bandwidth)?;

        let mut test_rng = substream(cfg.seed, 2 * k as u64 + 1);
        let mut tests = Vec::with_capacity(cfg.n_test);
        for _ in 0..1000 {
            if tests.len() >= cfg.n_test {
                break;
            }
            let (batch, _) = generator.draw(cfg.n_test, &mut test_rng)?;
            tests.extend(batch.curves().into_iter().filter(|c| c.norm() <= radius));
        }
        tests.truncate(cfg.n_test);
        if tests.is_empty() {
            return Err(Error::Degenerate("no test curve fell inside the radius".into()));
        }

        let gaps = tests
            .iter()
            .map(|x| density_gap(&sample, &model, &est, j, theta, psi, x))
            .collect::<Result<Vec<f64>>>()?;
        let max_gap = gaps.iter().copied().fold(0.0, f64::max);
        let median_gap = stats::median(&gaps);
        let scale = (n as f64 * bandwidth).sqrt();
        rows.push(GapRow {
            n,
            bandwidth,
            max_gap,
            median_gap,
            scaled_max_gap: scale * max_gap,
            scaled_median_gap: scale * median_gap,
        });
    }
    Ok(rows)
}
