//! Uniform radial grid, sampled spherically symmetric fields and the
//! fourth-order quadrature shared by every other module.
//!
//! Interior nodes are `r_i = i h` for `i = 1..=n_points` with
//! `h = r_max / (n_points + 1)`. Both endpoints (`r = 0` and `r = r_max`)
//! are Dirichlet nodes: reduced wavefunctions vanish there, and so do all
//! density-like integrands `r^2 f(r)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    r_max: f64,
    n_points: usize,
    h: f64,
}

impl RadialGrid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(r_max: f64, n_points: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidGrid(format!("r_max must be positive, got {r_max}")));
        }
        if n_points < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} interior nodes, got {n_points}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self {
            r_max,
            n_points,
            h: r_max / (n_points as f64 + 1.0),
        })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Radius of interior node `i` (zero-based, so node 0 sits at `h`).
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.node(i)).collect()
    }

    /// Same node count on `[0, r_max / factor]`.
    pub fn contracted(&self, factor: f64) -> Result<Self> {
        Self::new(self.r_max / factor, self.n_points)
    }
}

/// Cumulative integral `C_k = \int_0^{x_k} f` of equispaced samples
/// `f_0..f_N` (endpoints included).
///
/// Simpson panels over node pairs give the even nodes; odd nodes use the
/// quadratic of their panel integrated over its first half. A trailing
/// unpaired interval uses the backward quadratic. The rule is exact for
/// piecewise quadratics whose breakpoints sit on even nodes.
pub fn cumulative_integral(h: f64, samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * h * (samples[0] + samples[1]);
        return out;
    }
    let intervals = n - 1;
    let mut k = 0;
    while k + 2 <= intervals {
        let (f0, f1, f2) = (samples[k], samples[k + 1], samples[k + 2]);
        out[k + 1] = out[k] + h / 12.0 * (5.0 * f0 + 8.0 * f1 - f2);
        out[k + 2] = out[k] + h / 3.0 * (f0 + 4.0 * f1 + f2);
        k += 2;
    }
    if k < intervals {
        let (fa, fb, fc) = (samples[k - 1], samples[k], samples[k + 1]);
        out[k + 1] = out[k] + h / 12.0 * (-fa + 8.0 * fb + 5.0 * fc);
    }
    out
}

/// Total of [`cumulative_integral`].
pub fn integrate_samples(h: f64, samples: &[f64]) -> f64 {
    cumulative_integral(h, samples).last().copied().unwrap_or(0.0)
}

/// Samples of `r^2 f(r)` on all nodes including both (zero) endpoints.
pub(crate) fn volume_samples(grid: &RadialGrid, values: &[f64]) -> Vec<f64> {
    let mut s = Vec::with_capacity(values.len() + 2);
    s.push(0.0);
    s.extend(values.iter().enumerate().map(|(i, v)| {
        let r = grid.node(i);
        r * r * v
    }));
    s.push(0.0);
    s
}

/// A spherically symmetric function sampled on the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_points()],
        }
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n_points()).map(|i| f(grid.node(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `(1 - alpha) self + alpha other`.
    pub fn mixed(&self, other: &Self, alpha: f64) -> Result<Self> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
            .collect();
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub(crate) fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// `\int f dx = 4 pi \int_0^{r_max} r^2 f(r) dr`.
pub fn integrate_volume(f: &RadialField) -> f64 {
    let grid = f.grid();
    4.0 * PI * integrate_samples(grid.spacing(), &volume_samples(grid, f.values()))
}

/// Volume-weighted L1 distance `\int |f - g| dx`.
pub fn field_distance_l1(f: &RadialField, g: &RadialField) -> Result<f64> {
    f.check_grid(g)?;
    let diff: Vec<f64> = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(integrate_volume(&RadialField::new(*f.grid(), diff)?))
}
