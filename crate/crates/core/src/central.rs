//! Measures of central tendency for a sample of curves: the mean, the
//! modal curve assembled from per-component score modes, a modal curve
//! from a joint kernel estimate of the leading scores, and the spatial
//! median.

use crate::curvespace::{l2_distance, Curve, FunctionalSample};
use crate::fpca::FpcaModel;
use crate::score_density::{bandwidth_normal_reference, ScoreDensityEstimator};
use crate::{Error, Result, Scalar};

/// Largest truncation accepted by [`multivariate_modal_curve`].
pub const MAX_JOINT_DIMENSION: usize = 4;

/// Distance floor in the Weiszfeld weights.
pub const WEISZFELD_DISTANCE_FLOOR: f64 = 1e-10;

pub fn mean_curve<T: Scalar>(s: &FunctionalSample<T>) -> Curve<T> {
    s.mean()
}

/// `X̄ + Σ_{j≤T} θ̂_j^{1/2} m̂_j ψ̂_j`, with `m̂_j` the mode of the `j`-th
/// score density.
pub fn modal_curve<T: Scalar>(
    model: &FpcaModel<T>,
    densities: &[ScoreDensityEstimator<T>],
    truncation: usize,
) -> Result<Curve<T>> {
    if truncation == 0 {
        return Err(Error::arg("truncation must be at least 1"));
    }
    let available = densities.len().min(model.active_components());
    if truncation > available {
        return Err(Error::arg(format!(
            "truncation {truncation} exceeds the {available} fitted components"
        )));
    }
    let modes: Vec<T> = densities[..truncation].iter().map(|d| d.mode()).collect();
    model.reconstruct(&modes)
}

/// Joint mode of a product-Gaussian kernel estimate on `points` (one row
/// per observation) with per-coordinate bandwidths.
///
/// Hill-climbs from the observation of highest estimated density. Each
/// step moves along the bandwidth-preconditioned gradient (the mean-shift
/// direction) and halves the step until the density does not decrease.
pub fn joint_kde_mode<T: Scalar>(points: &[Vec<T>], bandwidths: &[T]) -> Result<Vec<T>> {
    let d = bandwidths.len();
    if points.is_empty() {
        return Err(Error::InsufficientData("joint mode needs at least one point".into()));
    }
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::arg("points and bandwidths must share a positive dimension"));
    }
    if bandwidths.iter().any(|&h| !(h > T::zero())) {
        return Err(Error::arg("bandwidths must be positive"));
    }
    let inv_h: Vec<T> = bandwidths.iter().map(|&h| T::one() / h).collect();
    let weight = |p: &[T], y: &[T]| -> T {
        let mut q = T::zero();
        for k in 0..d {
            let u = (p[k] - y[k]) * inv_h[k];
            q = q + u * u;
        }
        (-q * T::c(0.5)).exp()
    };
    // unnormalized: constant factors do not move the mode
    let density = |y: &[T]| -> T { points.iter().map(|p| weight(p, y)).sum() };

    let mut y = points[0].clone();
    let mut fy = density(&y);
    for p in &points[1..] {
        let f = density(p);
        if f > fy {
            fy = f;
            y = p.clone();
        }
    }

    let tol = T::c(1e-10).max(T::epsilon() * T::c(10.0));
    for _ in 0..1000 {
        let mut num = vec![T::zero(); d];
        let mut den = T::zero();
        for p in points {
            let w = weight(p, &y);
            den = den + w;
            for k in 0..d {
                num[k] = num[k] + w * (p[k] - y[k]);
            }
        }
        if !(den > T::zero()) {
            break;
        }
        let dir: Vec<T> = num.iter().map(|&v| v / den).collect();
        let mut alpha = T::one();
        let mut moved = false;
        for _ in 0..40 {
            let cand: Vec<T> = y.iter().zip(&dir).map(|(&a, &b)| a + alpha * b).collect();
            let fc = density(&cand);
            if fc >= fy {
                let step = dir.iter().fold(T::zero(), |m, &v| m.max((alpha * v).abs()));
                y = cand;
                fy = fc;
                moved = step > tol;
                break;
            }
            alpha = alpha * T::c(0.5);
        }
        if !moved {
            break;
        }
    }
    Ok(y)
}

/// Modal curve from the joint mode of a `T`-variate product-Gaussian kernel
/// estimate of the first `T` score columns, with normal-reference
/// bandwidths per column. `T` is limited to [`MAX_JOINT_DIMENSION`].
pub fn multivariate_modal_curve<T: Scalar>(model: &FpcaModel<T>, truncation: usize) -> Result<Curve<T>> {
    if truncation == 0 {
        return Err(Error::arg("truncation must be at least 1"));
    }
    if truncation > MAX_JOINT_DIMENSION {
        return Err(Error::arg(format!(
            "joint kernel mode supports at most {MAX_JOINT_DIMENSION} dimensions, got {truncation}"
        )));
    }
    if truncation > model.active_components() {
        return Err(Error::arg(format!(
            "truncation {truncation} exceeds the {} active components",
            model.active_components()
        )));
    }
    let bandwidths = (0..truncation)
        .map(|j| bandwidth_normal_reference(model.score_column(j)))
        .collect::<Result<Vec<T>>>()?;
    let points: Vec<Vec<T>> = (0..model.sample_size())
        .map(|i| (0..truncation).map(|j| model.score_column(j)[i]).collect())
        .collect();
    let mode = joint_kde_mode(&points, &bandwidths)?;
    model.reconstruct(&mode)
}

/// Result of the Weiszfeld iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianCurve<T: Scalar> {
    pub curve: Curve<T>,
    pub iterations: usize,
    /// L2 length of the final update.
    pub last_step: T,
    pub converged: bool,
    /// `Σ_i ||X_i - x||` at the start and after every iteration.
    pub objective_trace: Vec<T>,
}

fn median_objective<T: Scalar>(s: &FunctionalSample<T>, x: &Curve<T>) -> T {
    let grid = s.grid();
    let mut diff = vec![T::zero(); grid.len()];
    s.rows()
        .map(|row| {
            for ((d, &a), &b) in diff.iter_mut().zip(row).zip(x.values()) {
                *d = a - b;
            }
            grid.dot(&diff, &diff).max(T::zero()).sqrt()
        })
        .sum()
}

/// Spatial median `argmin_x Σ_i ||X_i - x||` by Weiszfeld iteration from
/// the mean curve. Hitting `max_iter` is reported via `converged = false`.
pub fn median_curve<T: Scalar>(s: &FunctionalSample<T>, tol: T, max_iter: usize) -> Result<MedianCurve<T>> {
    if !(tol > T::zero()) {
        return Err(Error::arg("tolerance must be positive"));
    }
    let floor = T::c(WEISZFELD_DISTANCE_FLOOR);
    let grid = s.grid().clone();
    let curves = s.curves();
    let mut x = s.mean();
    let mut trace = vec![median_objective(s, &x)];
    let mut last_step = T::infinity();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut num = vec![T::zero(); grid.len()];
        let mut den = T::zero();
        for c in &curves {
            let w = T::one() / l2_distance(c, &x)?.max(floor);
            den = den + w;
            for (a, &v) in num.iter_mut().zip(c.values()) {
                *a = *a + w * v;
            }
        }
        let next = Curve::new(grid.clone(), num.into_iter().map(|v| v / den).collect())?;
        last_step = l2_distance(&next, &x)?;
        x = next;
        trace.push(median_objective(s, &x));
        if last_step < tol {
            converged = true;
            break;
        }
    }
    Ok(MedianCurve { curve: x, iterations, last_step, converged, objective_trace: trace })
}

/// Mean, modal and median curves of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralCurveSet<T: Scalar> {
    pub mean: Curve<T>,
    pub mode: Curve<T>,
    pub median: MedianCurve<T>,
    pub truncation: usize,
}

pub fn central_curves<T: Scalar>(
    sample: &FunctionalSample<T>,
    model: &FpcaModel<T>,
    densities: &[ScoreDensityEstimator<T>],
    truncation: usize,
    median_tol: T,
    median_max_iter: usize,
) -> Result<CentralCurveSet<T>> {
    Ok(CentralCurveSet {
        mean: mean_curve(sample),
        mode: modal_curve(model, densities, truncation)?,
        median: median_curve(sample, median_tol, median_max_iter)?,
        truncation,
    })
}
