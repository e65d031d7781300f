//! Replicated comparison of modal-curve estimators on the simulation
//! models.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::{CurveGenerator, ModelId, Simulator, DEFAULT_GRID_POINTS};
use crate::central::{modal_curve, multivariate_modal_curve, MAX_JOINT_DIMENSION};
use crate::fpca::FpcaModel;
use crate::rng::{child_seed, substream};
use crate::score_density::{fit_score_densities, BandwidthRule, Kernel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModalEstimator {
    /// Product of univariate score-density modes.
    Univariate,
    /// Joint mode of a multivariate kernel estimate.
    Multivariate,
}

impl ModalEstimator {
    pub fn label(self) -> &'static str {
        match self {
            ModalEstimator::Univariate => "univariate",
            ModalEstimator::Multivariate => "multivariate",
        }
    }
}

impl fmt::Display for ModalEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModalEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "univariate" | "uni" => Ok(ModalEstimator::Univariate),
            "multivariate" | "multi" => Ok(ModalEstimator::Multivariate),
            other => Err(Error::arg(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeStudyConfig {
    pub models: Vec<ModelId>,
    pub replications: usize,
    pub n: usize,
    pub m: usize,
    pub truncations: Vec<usize>,
    pub estimators: Vec<ModalEstimator>,
    pub kernel: Kernel,
    pub seed: u64,
}

impl Default for ModeStudyConfig {
    fn default() -> Self {
        ModeStudyConfig {
            models: ModelId::ALL.to_vec(),
            replications: 100,
            n: 100,
            m: DEFAULT_GRID_POINTS,
            truncations: vec![1, 2, 3, 4],
            estimators: vec![ModalEstimator::Univariate, ModalEstimator::Multivariate],
            kernel: Kernel::Gaussian,
            seed: 0,
        }
    }
}

/// Integrated MSE of one estimator at one truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeStudyRow {
    pub model: ModelId,
    pub estimator: ModalEstimator,
    pub truncation: usize,
    pub replications: usize,
    pub imse: f64,
    /// Pointwise MSE on the model grid.
    pub mse: Vec<f64>,
}

/// Seed of replication `b` of model `model`: stream `b` of a per-model
/// child seed.
fn replication_rng(seed: u64, model: ModelId, b: usize) -> crate::rng::Rng {
    substream(child_seed(seed, model as u64), b as u64)
}

/// Runs every (model, estimator, truncation) combination over
/// `replications` independent samples and reports integrated MSE against
/// the true modal function. Replications run in parallel; the reduction
/// happens in replication order so results do not depend on the thread
/// count.
pub fn run_mode_study(cfg: &ModeStudyConfig) -> Result<Vec<ModeStudyRow>> {
    if cfg.replications == 0 {
        return Err(Error::arg("replications must be at least 1"));
    }
    if cfg.truncations.iter().any(|&t| t == 0 || t > super::SIM_COMPONENTS) {
        return Err(Error::arg("truncations must lie in 1..=10"));
    }
    if cfg.estimators.contains(&ModalEstimator::Multivariate)
        && cfg.truncations.iter().any(|&t| t > MAX_JOINT_DIMENSION)
    {
        return Err(Error::arg(format!(
            "the multivariate estimator supports truncations up to {MAX_JOINT_DIMENSION}"
        )));
    }
    let t_max = cfg.truncations.iter().copied().max().unwrap_or(1);
    let combos: Vec<(ModalEstimator, usize)> = cfg
        .estimators
        .iter()
        .flat_map(|&e| cfg.truncations.iter().map(move |&t| (e, t)))
        .collect();

    let mut rows = Vec::new();
    for &model in &cfg.models {
        let sim = Simulator::new(model, cfg.m)?;
        let truth = sim.modal_curve()?;
        let grid = sim.grid().clone();

        let per_rep: Vec<Vec<Vec<f64>>> = (0..cfg.replications)
            .into_par_iter()
            .map(|b| -> Result<Vec<Vec<f64>>> {
                let mut rng = replication_rng(cfg.seed, model, b);
                let (sample, _) = sim.draw(cfg.n, &mut rng)?;
                let fpca = FpcaModel::fit(&sample, t_max)?;
                let dens = fit_score_densities(&fpca, cfg.kernel, BandwidthRule::NormalReference)?;
                combos
                    .iter()
                    .map(|&(est, t)| {
                        let curve = match est {
                            ModalEstimator::Univariate => modal_curve(&fpca, &dens, t)?,
                            ModalEstimator::Multivariate => multivariate_modal_curve(&fpca, t)?,
                        };
                        Ok(curve
                            .values()
                            .iter()
                            .zip(truth.values())
                            .map(|(a, b)| (a - b) * (a - b))
                            .collect())
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;

        for (k, &(estimator, truncation)) in combos.iter().enumerate() {
            let mut mse = vec![0.0; grid.len()];
            for rep in &per_rep {
                for (a, v) in mse.iter_mut().zip(&rep[k]) {
                    *a += v;
                }
            }
            let inv = 1.0 / cfg.replications as f64;
            mse.iter_mut().for_each(|v| *v *= inv);
            rows.push(ModeStudyRow {
                model,
                estimator,
                truncation,
                replications: cfg.replications,
                imse: grid.integrate(&mse),
                mse,
            });
        }
    }
    Ok(rows)
}
