//! Functional principal component analysis on a quadrature grid.
//!
//! The covariance operator `∫ K(s, t) ψ(t) dt` is discretized with the
//! trapezoid weights `w`. Writing `D = diag(w)^{1/2}`, the symmetric matrix
//! `D K D` has eigenvectors `u`, and `ψ = D^{-1} u` is orthonormal under the
//! same quadrature, with the same eigenvalues.

mod eigen;

use std::sync::Arc;

use rayon::prelude::*;

pub use eigen::{symmetric_eigen, SymmetricEigen};

use crate::curvespace::{center_sample, same_grid, Curve, FunctionalSample, Grid};
use crate::{Error, Result, Scalar};

/// Relative eigenvalue floor: components with `θ_j < 1e-12 θ_1` are null.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-10;
const SIGN_TOL: f64 = 1e-10;

/// Dense symmetric `m x m` covariance on a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T: Scalar> {
    m: usize,
    data: Vec<T>,
}

impl<T: Scalar> CovarianceMatrix<T> {
    pub fn new(m: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != m * m {
            return Err(Error::LengthMismatch { expected: m * m, got: data.len() });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(CovarianceMatrix { m, data })
    }

    /// Tabulates `k(s, t)` on the grid points.
    pub fn from_kernel(grid: &Grid<T>, k: impl Fn(T, T) -> T) -> Result<Self> {
        let pts = grid.points();
        let m = pts.len();
        let mut data = Vec::with_capacity(m * m);
        for &s in pts {
            for &t in pts {
                data.push(k(s, t));
            }
        }
        Self::new(m, data)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, s: usize, t: usize) -> T {
        self.data[s * self.m + t]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Largest `|K(s,t) - K(t,s)|`.
    pub fn max_asymmetry(&self) -> T {
        let m = self.m;
        let mut worst = T::zero();
        for s in 0..m {
            for t in 0..s {
                worst = worst.max((self.data[s * m + t] - self.data[t * m + s]).abs());
            }
        }
        worst
    }
}

/// Empirical covariance `n⁻¹ Σ (X_i(s) - X̄(s))(X_i(t) - X̄(t))`.
pub fn estimate_covariance<T: Scalar>(s: &FunctionalSample<T>) -> Result<CovarianceMatrix<T>> {
    let n = s.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "covariance needs at least 2 curves, got {n}"
        )));
    }
    let (_, centered) = center_sample(s);
    let m = s.grid_len();
    // column-major copy so each entry is a contiguous dot product
    let mut cols = vec![T::zero(); n * m];
    for (i, row) in centered.rows().enumerate() {
        for (t, &v) in row.iter().enumerate() {
            cols[t * n + i] = v;
        }
    }
    let inv_n = T::one() / T::from_count(n);
    let mut data = vec![T::zero(); m * m];
    data.par_chunks_mut(m).enumerate().for_each(|(a, out)| {
        let ca = &cols[a * n..(a + 1) * n];
        for (b, o) in out.iter_mut().enumerate() {
            let cb = &cols[b * n..(b + 1) * n];
            *o = ca.iter().zip(cb).map(|(&x, &y)| x * y).sum::<T>() * inv_n;
        }
    });
    // exact symmetry
    for a in 0..m {
        for b in 0..a {
            data[b * m + a] = data[a * m + b];
        }
    }
    CovarianceMatrix::new(m, data)
}

/// Eigenvalues and orthonormal eigenfunctions of a covariance operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<T: Scalar> {
    grid: Arc<Grid<T>>,
    eigenvalues: Vec<T>,
    eigenfunctions: Vec<Curve<T>>,
}

impl<T: Scalar> Decomposition<T> {
    /// Wraps externally known eigenpairs (e.g. the truth of a simulation).
    /// Eigenvalues must be non-increasing and non-negative.
    pub fn new(grid: Arc<Grid<T>>, eigenvalues: Vec<T>, eigenfunctions: Vec<Curve<T>>) -> Result<Self> {
        if eigenvalues.len() != eigenfunctions.len() {
            return Err(Error::LengthMismatch {
                expected: eigenvalues.len(),
                got: eigenfunctions.len(),
            });
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) || eigenvalues.iter().any(|&v| v < T::zero()) {
            return Err(Error::arg("eigenvalues must be non-negative and non-increasing"));
        }
        for f in &eigenfunctions {
            f.check_on(&grid)?;
        }
        Ok(Decomposition { grid, eigenvalues, eigenfunctions })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &[Curve<T>] {
        &self.eigenfunctions
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Number of leading components above the eigenvalue floor.
    pub fn active_count(&self) -> usize {
        let Some(&first) = self.eigenvalues.first() else { return 0 };
        if first <= T::zero() {
            return 0;
        }
        let floor = T::c(EIGENVALUE_FLOOR) * first;
        self.eigenvalues.iter().take_while(|&&v| v >= floor).count()
    }
}

/// Flips `psi` so that `∫ψ > 0`, or, when that integral vanishes, so that
/// the entry of largest magnitude is positive.
pub fn apply_sign_convention<T: Scalar>(grid: &Grid<T>, psi: &mut [T]) {
    let integral = grid.integrate(psi);
    let flip = if integral.abs() > T::c(SIGN_TOL) {
        integral < T::zero()
    } else {
        let mut best = 0;
        for (i, v) in psi.iter().enumerate() {
            if v.abs() > psi[best].abs() {
                best = i;
            }
        }
        psi[best] < T::zero()
    };
    if flip {
        for v in psi.iter_mut() {
            *v = -*v;
        }
    }
}

/// Solves the quadrature-weighted eigenproblem and keeps the leading `j`
/// components.
pub fn decompose<T: Scalar>(cov: &CovarianceMatrix<T>, grid: &Arc<Grid<T>>, j: usize) -> Result<Decomposition<T>> {
    let m = grid.len();
    if cov.dim() != m {
        return Err(Error::LengthMismatch { expected: m, got: cov.dim() });
    }
    if j > m {
        return Err(Error::arg(format!("requested {j} components from a {m}-point grid")));
    }
    let scale = cov.as_slice().iter().fold(T::one(), |a, v| a.max(v.abs()));
    let tol = T::c(SYMMETRY_TOL).max(T::epsilon() * T::c(100.0)) * scale;
    let asym = cov.max_asymmetry();
    if asym > tol {
        return Err(Error::NotSymmetric(asym.to_f64_lossy()));
    }

    let sqrt_w: Vec<T> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let mut b = vec![T::zero(); m * m];
    for s in 0..m {
        for t in 0..m {
            b[s * m + t] = sqrt_w[s] * cov.get(s, t) * sqrt_w[t];
        }
    }
    let eig = symmetric_eigen(&b, m)?;

    let mut eigenvalues = Vec::with_capacity(j);
    let mut eigenfunctions = Vec::with_capacity(j);
    for k in 0..j {
        let value = eig.values[k].max(T::zero());
        let mut psi: Vec<T> = (0..m).map(|i| eig.vectors[i * m + k] / sqrt_w[i]).collect();
        let norm = grid.dot(&psi, &psi).sqrt();
        if norm > T::zero() {
            for v in psi.iter_mut() {
                *v = *v / norm;
            }
        }
        apply_sign_convention(grid, &mut psi);
        eigenvalues.push(value);
        eigenfunctions.push(Curve::new(grid.clone(), psi)?);
    }
    Ok(Decomposition { grid: grid.clone(), eigenvalues, eigenfunctions })
}

/// A fitted FPCA: mean curve, eigenpairs and standardized training scores.
#[derive(Debug, Clone, PartialEq)]
pub struct FpcaModel<T: Scalar> {
    mean: Curve<T>,
    basis: Decomposition<T>,
    /// `scores[j][i]`: standardized score of curve `i` on active component `j`.
    scores: Vec<Vec<T>>,
}

impl<T: Scalar> FpcaModel<T> {
    /// Centers, estimates the covariance, decomposes and scores the sample.
    pub fn fit(sample: &FunctionalSample<T>, components: usize) -> Result<Self> {
        let cov = estimate_covariance(sample)?;
        let j = components.min(sample.len()).min(sample.grid_len());
        if j == 0 {
            return Err(Error::arg("at least one component is required"));
        }
        let basis = decompose(&cov, sample.grid(), j)?;
        Self::from_parts(sample.mean(), basis, sample)
    }

    /// Scores `sample` against a given mean and eigenbasis.
    pub fn from_parts(mean: Curve<T>, basis: Decomposition<T>, sample: &FunctionalSample<T>) -> Result<Self> {
        mean.check_on(basis.grid())?;
        if !same_grid(sample.grid(), basis.grid()) {
            return Err(Error::GridMismatch);
        }
        let active = basis.active_count();
        let grid = basis.grid().clone();
        let mut scores = vec![Vec::with_capacity(sample.len()); active];
        let mut diff = vec![T::zero(); grid.len()];
        for row in sample.rows() {
            for ((d, &x), &mu) in diff.iter_mut().zip(row).zip(mean.values()) {
                *d = x - mu;
            }
            for (j, col) in scores.iter_mut().enumerate() {
                let proj = grid.dot(&diff, basis.eigenfunctions[j].values());
                col.push(proj / basis.eigenvalues[j].sqrt());
            }
        }
        Ok(FpcaModel { mean, basis, scores })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.basis.grid()
    }

    pub fn mean(&self) -> &Curve<T> {
        &self.mean
    }

    pub fn basis(&self) -> &Decomposition<T> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[T] {
        self.basis.eigenvalues()
    }

    pub fn eigenfunctions(&self) -> &[Curve<T>] {
        self.basis.eigenfunctions()
    }

    /// Total number of computed components `J`.
    pub fn components(&self) -> usize {
        self.basis.len()
    }

    /// Components above the eigenvalue floor (these carry scores).
    pub fn active_components(&self) -> usize {
        self.scores.len()
    }

    /// Training scores of active component `j` (0-based).
    pub fn score_column(&self, j: usize) -> &[T] {
        &self.scores[j]
    }

    pub fn sample_size(&self) -> usize {
        self.scores.first().map_or(0, Vec::len)
    }

    /// Score vector of training curve `i` over the active components.
    pub fn score_row(&self, i: usize) -> Vec<T> {
        self.scores.iter().map(|c| c[i]).collect()
    }

    /// `X̄ + Σ_j θ_j^{1/2} c_j ψ_j` for standardized coordinates `c`.
    pub fn reconstruct(&self, coords: &[T]) -> Result<Curve<T>> {
        if coords.len() > self.active_components() {
            return Err(Error::arg(format!(
                "{} coordinates but only {} active components",
                coords.len(),
                self.active_components()
            )));
        }
        let mut values = self.mean.values().to_vec();
        for (j, &c) in coords.iter().enumerate() {
            let a = self.basis.eigenvalues[j].sqrt() * c;
            for (v, &p) in values.iter_mut().zip(self.basis.eigenfunctions[j].values()) {
                *v = *v + a * p;
            }
        }
        Curve::new(self.grid().clone(), values)
    }
}

/// Standardized scores `θ_j^{-1/2} ∫(x - X̄) ψ_j`; `None` for null
/// components.
pub fn project_scores<T: Scalar>(model: &FpcaModel<T>, x: &Curve<T>) -> Result<Vec<Option<T>>> {
    x.check_on(model.grid())?;
    let diff = x.sub(&model.mean)?;
    let active = model.active_components();
    Ok((0..model.components())
        .map(|j| {
            (j < active).then(|| {
                let proj = model.grid().dot(diff.values(), model.eigenfunctions()[j].values());
                proj / model.eigenvalues()[j].sqrt()
            })
        })
        .collect())
}

/// Active-component scores of `x` (all present by construction).
pub(crate) fn active_scores<T: Scalar>(model: &FpcaModel<T>, x: &Curve<T>) -> Result<Vec<T>> {
    Ok(project_scores(model, x)?.into_iter().flatten().collect())
}

/// Fraction of the total variance carried by the first `j` components.
pub fn variance_explained<T: Scalar>(model: &FpcaModel<T>, j: usize) -> Result<T> {
    variance_explained_of(model.eigenvalues(), j)
}

pub fn variance_explained_of<T: Scalar>(eigenvalues: &[T], j: usize) -> Result<T> {
    if j == 0 || j > eigenvalues.len() {
        return Err(Error::arg(format!("j must be in 1..={}, got {j}", eigenvalues.len())));
    }
    let total: T = eigenvalues.iter().copied().sum();
    if total <= T::zero() {
        return Err(Error::Degenerate("total variance is zero".into()));
    }
    let head: T = eigenvalues[..j].iter().copied().sum();
    Ok(if j == eigenvalues.len() { T::one() } else { head / total })
}
