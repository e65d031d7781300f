//! The log-density surrogate `ℓ̂(x | r) = r⁻¹ Σ_{j≤r} log f̂_j(x̂_j)`,
//! score-plane product surfaces, and density-based grouping of curves.
//!
//! Contributions are summed in ascending order of value, so `ℓ̂` does not
//! depend on the order in which the components are listed.

use std::cmp::Ordering;

use crate::curvespace::Curve;
use crate::fpca::{active_scores, FpcaModel};
use crate::score_density::{Kernel, ScoreDensityEstimator};
use crate::{Error, Result, Scalar};

/// Compact-kernel densities are floored here before the logarithm.
/// Gaussian-kernel densities are evaluated in log space and never floored.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// `ℓ̂` at one curve, with its per-component breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDensityValue<T: Scalar> {
    pub r: usize,
    /// Mean of `contributions`, in nats.
    pub value: T,
    /// `log max(f̂_j(x̂_j), floor)` for `j = 1..=r`.
    pub contributions: Vec<T>,
    /// Components whose density was floored.
    pub floored: Vec<bool>,
}

impl<T: Scalar> LogDensityValue<T> {
    /// `Π_j f̂_j(x̂_j) = exp(r ℓ̂)`.
    pub fn product(&self) -> T {
        (self.value * T::from_count(self.r)).exp()
    }
}

/// Sum in ascending order.
fn sorted_sum<T: Scalar>(values: &[T]) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    v.into_iter().fold(T::zero(), |a, b| a + b)
}

/// Builds the log-density from the first `r` (density, score) pairs.
pub fn log_density_from_scores<T: Scalar>(
    densities: &[ScoreDensityEstimator<T>],
    scores: &[T],
    r: usize,
) -> Result<LogDensityValue<T>> {
    if r == 0 {
        return Err(Error::arg("r must be at least 1"));
    }
    let available = densities.len().min(scores.len());
    if r > available {
        return Err(Error::arg(format!("r = {r} exceeds the {available} available components")));
    }
    let floor = T::c(DENSITY_FLOOR);
    let mut contributions = Vec::with_capacity(r);
    let mut floored = Vec::with_capacity(r);
    for (d, &u) in densities.iter().zip(scores).take(r) {
        match d.kernel() {
            Kernel::Gaussian => {
                floored.push(false);
                contributions.push(d.log_evaluate(u));
            }
            Kernel::Epanechnikov => {
                let f = d.evaluate(u);
                floored.push(f < floor);
                contributions.push(f.max(floor).ln());
            }
        }
    }
    let value = sorted_sum(&contributions) / T::from_count(r);
    Ok(LogDensityValue { r, value, contributions, floored })
}

/// `ℓ̂(x | r)` for a curve on the model grid.
pub fn log_density<T: Scalar>(
    model: &FpcaModel<T>,
    densities: &[ScoreDensityEstimator<T>],
    x: &Curve<T>,
    r: usize,
) -> Result<LogDensityValue<T>> {
    let scores = active_scores(model, x)?;
    log_density_from_scores(densities, &scores, r)
}

/// Rectangular grid in the plane of two score coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePlaneGrid<T> {
    pub u_range: (T, T),
    pub v_range: (T, T),
    pub u_count: usize,
    pub v_count: usize,
}

fn axis<T: Scalar>(range: (T, T), count: usize) -> Vec<T> {
    if count == 1 {
        return vec![range.0];
    }
    let step = (range.1 - range.0) / T::from_count(count - 1);
    (0..count).map(|k| range.0 + step * T::from_count(k)).collect()
}

/// `f̂_{j1}(u) f̂_{j2}(v)` over a grid plus the same product at each training
/// curve's scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSurface<T> {
    pub components: (usize, usize),
    pub u: Vec<T>,
    pub v: Vec<T>,
    /// Row-major `u.len() x v.len()`.
    pub values: Vec<T>,
    /// `(u_i, v_i, f̂_{j1}(u_i) f̂_{j2}(v_i))` per training curve.
    pub data_points: Vec<(T, T, T)>,
}

impl<T: Scalar> ProductSurface<T> {
    pub fn get(&self, a: usize, b: usize) -> T {
        self.values[a * self.v.len() + b]
    }

    /// Grid cell with the largest product (first in row-major order).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = k;
            }
        }
        (best / self.v.len(), best % self.v.len())
    }
}

/// Product surface for 0-based components `pair`.
pub fn density_product_grid<T: Scalar>(
    model: &FpcaModel<T>,
    densities: &[ScoreDensityEstimator<T>],
    pair: (usize, usize),
    spec: &ScorePlaneGrid<T>,
) -> Result<ProductSurface<T>> {
    let (j1, j2) = pair;
    let fitted = densities.len().min(model.active_components());
    if j1 >= fitted || j2 >= fitted {
        return Err(Error::arg(format!("components {pair:?} not both fitted ({fitted} available)")));
    }
    if spec.u_count == 0 || spec.v_count == 0 {
        return Err(Error::arg("score-plane grid is empty"));
    }
    let u = axis(spec.u_range, spec.u_count);
    let v = axis(spec.v_range, spec.v_count);
    let fu: Vec<T> = u.iter().map(|&x| densities[j1].evaluate(x)).collect();
    let fv: Vec<T> = v.iter().map(|&x| densities[j2].evaluate(x)).collect();
    let values = fu.iter().flat_map(|&a| fv.iter().map(move |&b| a * b)).collect();
    let data_points = model
        .score_column(j1)
        .iter()
        .zip(model.score_column(j2))
        .map(|(&a, &b)| (a, b, densities[j1].evaluate(a) * densities[j2].evaluate(b)))
        .collect();
    Ok(ProductSurface { components: pair, u, v, values, data_points })
}

/// Log-density of every training curve and its quantile group.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrouping<T> {
    pub r: usize,
    pub log_density: Vec<T>,
    /// Group per curve; group 0 holds the lowest densities.
    pub groups: Vec<usize>,
    /// Curve indices from lowest to highest density.
    pub order: Vec<usize>,
}

/// Splits the training curves into `n_groups` equal-count groups ordered by
/// `ℓ̂(X_i | r)`. Ties are broken by curve index.
pub fn rank_by_density<T: Scalar>(
    model: &FpcaModel<T>,
    densities: &[ScoreDensityEstimator<T>],
    r: usize,
    n_groups: usize,
) -> Result<DensityGrouping<T>> {
    let n = model.sample_size();
    if n_groups == 0 {
        return Err(Error::arg("need at least one group"));
    }
    if n_groups > n {
        return Err(Error::arg(format!("{n_groups} groups for {n} curves")));
    }
    let log_density = (0..n)
        .map(|i| Ok(log_density_from_scores(densities, &model.score_row(i), r)?.value))
        .collect::<Result<Vec<T>>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        log_density[a]
            .partial_cmp(&log_density[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut groups = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        groups[i] = rank * n_groups / n;
    }
    Ok(DensityGrouping { r, log_density, groups, order })
}
