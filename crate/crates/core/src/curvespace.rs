//! Discretized function space: grids, trapezoid quadrature, inner products,
//! distances and centering.

use std::sync::Arc;

use crate::{Error, Result, Scalar};

/// Ordered abscissae on a compact interval together with composite
/// trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T: Scalar> {
    points: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    /// Builds a grid from strictly increasing points (at least two).
    pub fn new(points: Vec<T>) -> Result<Arc<Self>> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "points not strictly increasing at index {}",
                i + 1
            )));
        }
        let half = T::c(0.5);
        let m = points.len();
        let mut weights = vec![T::zero(); m];
        for i in 0..m - 1 {
            let w = half * (points[i + 1] - points[i]);
            weights[i] = weights[i] + w;
            weights[i + 1] = weights[i + 1] + w;
        }
        Ok(Arc::new(Grid { points, weights }))
    }

    /// `m` equispaced points on `[a, b]`.
    pub fn uniform(a: T, b: T, m: usize) -> Result<Arc<Self>> {
        if m < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {m}")));
        }
        let step = (b - a) / T::from_count(m - 1);
        let points = (0..m)
            .map(|i| if i == m - 1 { b } else { a + step * T::from_count(i) })
            .collect();
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn start(&self) -> T {
        self.points[0]
    }

    pub fn end(&self) -> T {
        self.points[self.points.len() - 1]
    }

    /// Quadrature of the pointwise product of two value vectors.
    pub fn dot(&self, f: &[T], g: &[T]) -> T {
        debug_assert_eq!(f.len(), self.len());
        debug_assert_eq!(g.len(), self.len());
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(&w, (&a, &b))| w * a * b)
            .sum()
    }

    /// Quadrature of a single value vector.
    pub fn integrate(&self, f: &[T]) -> T {
        self.weights.iter().zip(f).map(|(&w, &a)| w * a).sum()
    }
}

pub(crate) fn same_grid<T: Scalar>(a: &Arc<Grid<T>>, b: &Arc<Grid<T>>) -> bool {
    Arc::ptr_eq(a, b) || a.points == b.points
}

fn check_finite<T: Scalar>(values: &[T]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// A function sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Curve<T: Scalar> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Scalar> Curve<T> {
    pub fn new(grid: Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        check_finite(&values)?;
        Ok(Curve { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid<T>>, f: impl Fn(T) -> T) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let values = vec![T::zero(); grid.len()];
        Curve { grid, values }
    }

    pub fn constant(grid: Arc<Grid<T>>, c: T) -> Result<Self> {
        let values = vec![c; grid.len()];
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn check_grid(&self, other: &Curve<T>) -> Result<()> {
        if same_grid(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub(crate) fn check_on(&self, grid: &Arc<Grid<T>>) -> Result<()> {
        if same_grid(&self.grid, grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn sub(&self, other: &Curve<T>) -> Result<Curve<T>> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a - b).collect();
        Curve::new(self.grid.clone(), values)
    }

    pub fn add(&self, other: &Curve<T>) -> Result<Curve<T>> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + b).collect();
        Curve::new(self.grid.clone(), values)
    }

    pub fn scale(&self, s: T) -> Result<Curve<T>> {
        Curve::new(self.grid.clone(), self.values.iter().map(|&v| v * s).collect())
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: T, other: &Curve<T>) -> Result<Curve<T>> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + s * b).collect();
        Curve::new(self.grid.clone(), values)
    }

    pub fn norm(&self) -> T {
        self.grid.dot(&self.values, &self.values).max(T::zero()).sqrt()
    }
}

/// L2 inner product `∫ f g` under the trapezoid rule on the shared grid.
pub fn inner_product<T: Scalar>(f: &Curve<T>, g: &Curve<T>) -> Result<T> {
    f.check_grid(g)?;
    let v = f.grid.dot(&f.values, &g.values);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { index: 0 })
    }
}

/// L2 distance `||f - g||`.
pub fn l2_distance<T: Scalar>(f: &Curve<T>, g: &Curve<T>) -> Result<T> {
    f.check_grid(g)?;
    let d: Vec<T> = f.values.iter().zip(&g.values).map(|(&a, &b)| a - b).collect();
    Ok(f.grid.dot(&d, &d).max(T::zero()).sqrt())
}

/// `n >= 1` curves stored row-major on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample<T: Scalar> {
    grid: Arc<Grid<T>>,
    data: Vec<T>,
    n: usize,
}

impl<T: Scalar> FunctionalSample<T> {
    pub fn new(grid: Arc<Grid<T>>, rows: Vec<Vec<T>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InsufficientData("a sample needs at least one curve".into()));
        }
        let m = grid.len();
        let n = rows.len();
        let mut data = Vec::with_capacity(n * m);
        for row in rows {
            if row.len() != m {
                return Err(Error::LengthMismatch { expected: m, got: row.len() });
            }
            data.extend(row);
        }
        check_finite(&data)?;
        Ok(FunctionalSample { grid, data, n })
    }

    pub fn from_curves(curves: &[Curve<T>]) -> Result<Self> {
        let first = curves
            .first()
            .ok_or_else(|| Error::InsufficientData("a sample needs at least one curve".into()))?;
        let grid = first.grid.clone();
        let mut data = Vec::with_capacity(curves.len() * grid.len());
        for c in curves {
            c.check_on(&grid)?;
            data.extend_from_slice(&c.values);
        }
        Ok(FunctionalSample { grid, data, n: curves.len() })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    /// Number of curves.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of grid points.
    pub fn grid_len(&self) -> usize {
        self.grid.len()
    }

    pub fn row(&self, i: usize) -> &[T] {
        let m = self.grid.len();
        &self.data[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.grid.len())
    }

    pub fn curve(&self, i: usize) -> Curve<T> {
        Curve { grid: self.grid.clone(), values: self.row(i).to_vec() }
    }

    pub fn curves(&self) -> Vec<Curve<T>> {
        (0..self.n).map(|i| self.curve(i)).collect()
    }

    /// Pointwise mean curve.
    pub fn mean(&self) -> Curve<T> {
        let m = self.grid.len();
        let mut acc = vec![T::zero(); m];
        for row in self.rows() {
            for (a, &v) in acc.iter_mut().zip(row) {
                *a = *a + v;
            }
        }
        let inv = T::one() / T::from_count(self.n);
        Curve { grid: self.grid.clone(), values: acc.into_iter().map(|a| a * inv).collect() }
    }

    /// Same sample with `c` added to every curve.
    pub fn shifted(&self, c: &Curve<T>) -> Result<Self> {
        c.check_on(&self.grid)?;
        let m = self.grid.len();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, &v)| v + c.values[k % m])
            .collect();
        Ok(FunctionalSample { grid: self.grid.clone(), data, n: self.n })
    }
}

/// Sample mean and the sample centered at it.
pub fn center_sample<T: Scalar>(s: &FunctionalSample<T>) -> (Curve<T>, FunctionalSample<T>) {
    let mean = s.mean();
    let m = s.grid.len();
    let data = s
        .data
        .iter()
        .enumerate()
        .map(|(k, &v)| v - mean.values[k % m])
        .collect();
    (mean, FunctionalSample { grid: s.grid.clone(), data, n: s.n })
}
