//! Channel-by-channel diagonalization of `H = -Delta - V` for radial `V`.
//!
//! With `psi(x) = u(r)/r Y_lm`, each angular-momentum channel reduces to
//! `-u'' + (l(l+1)/r^2 - V) u = mu u` with `u(0) = u(r_max) = 0`. Three-point
//! differences turn this into a symmetric tridiagonal matrix whose lowest
//! eigenvalues come from Sturm-sequence bisection and whose eigenvectors come
//! from inverse iteration.
//!
//! Reduced eigenfunctions are normalized with the discrete inner product
//! `h sum_i u_i^2 = 1`, the one under which the matrix is symmetric.

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::poisson::Potential;

/// Levels at or above `-EPS_BOUND` are treated as unbound.
pub const EPS_BOUND: f64 = 1e-12;
pub const DEFAULT_L_MAX: usize = 8;
pub const DEFAULT_K_PER_CHANNEL: usize = 12;

const RESIDUAL_TOL: f64 = 1e-8;
const MAX_INVERSE_ITERATIONS: usize = 12;

/// An eigenvalue of one channel; `n` counts nodes (0 for the lowest).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub l: usize,
    pub n: usize,
    pub value: f64,
}

impl Level {
    pub fn degeneracy(&self) -> usize {
        2 * self.l + 1
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumEntry {
    pub l: usize,
    pub n: usize,
    pub value: f64,
    /// Reduced radial function on the interior nodes, `h sum u^2 = 1`.
    pub u: Vec<f64>,
}

impl SpectrumEntry {
    pub fn degeneracy(&self) -> usize {
        2 * self.l + 1
    }

    pub fn level(&self) -> Level {
        Level {
            l: self.l,
            n: self.n,
            value: self.value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub grid: RadialGrid,
    /// Ascending by eigenvalue (ties broken by `l`).
    pub entries: Vec<SpectrumEntry>,
    /// Number of eigenvalues below `-EPS_BOUND` in each channel, before
    /// truncation to `k_per_channel`.
    pub bound_counts: Vec<usize>,
}

impl Spectrum {
    pub fn levels(&self) -> Vec<Level> {
        self.entries.iter().map(SpectrumEntry::level).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lowest `count` distinct eigenvalues (degenerate copies across channels
    /// collapse to one).
    pub fn distinct_values(&self, count: usize) -> Vec<f64> {
        distinct_values(self.entries.iter().map(|e| e.value), count)
    }
}

pub(crate) fn distinct_values(values: impl Iterator<Item = f64>, count: usize) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(count);
    for v in values {
        if out.len() == count {
            break;
        }
        match out.last() {
            Some(&last) if (v - last).abs() <= 1e-9 * last.abs().max(1e-12) => {}
            _ => out.push(v),
        }
    }
    out
}

/// `-d^2/dr^2 + l(l+1)/r^2 - V` on the interior nodes.
#[derive(Debug, Clone)]
pub struct ChannelOperator {
    pub l: usize,
    pub grid: RadialGrid,
    pub diagonal: Vec<f64>,
    pub off_diagonal: f64,
}

impl ChannelOperator {
    pub fn new(v: &Potential, l: usize) -> Self {
        let grid = *v.grid();
        let h = grid.spacing();
        let centrifugal = (l * (l + 1)) as f64;
        let diagonal = v
            .values()
            .iter()
            .enumerate()
            .map(|(i, &vi)| {
                let r = grid.node(i);
                centrifugal / (r * r) - vi + 2.0 / (h * h)
            })
            .collect();
        Self {
            l,
            grid,
            diagonal,
            off_diagonal: -1.0 / (h * h),
        }
    }

    pub fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    fn pivot_floor(&self) -> f64 {
        f64::MIN_POSITIVE * (self.off_diagonal * self.off_diagonal).max(1.0)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let b2 = self.off_diagonal * self.off_diagonal;
        let floor = self.pivot_floor();
        let mut count = 0;
        let mut q = 1.0;
        for (i, &d) in self.diagonal.iter().enumerate() {
            q = if i == 0 { d - x } else { d - x - b2 / q };
            if q.abs() < floor {
                q = -floor;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn bounds(&self) -> (f64, f64) {
        let b = 2.0 * self.off_diagonal.abs();
        let lo = self.diagonal.iter().cloned().fold(f64::INFINITY, f64::min) - b;
        let hi = self.diagonal.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + b;
        (lo, hi)
    }

    fn norm_estimate(&self) -> f64 {
        let (lo, hi) = self.bounds();
        lo.abs().max(hi.abs())
    }

    /// The `index`-th eigenvalue (zero-based, ascending) inside `[lo, hi]`.
    /// The caller guarantees `sturm_count(lo) <= index < sturm_count(hi)`.
    pub fn bisect_eigenvalue(&self, index: usize, mut lo: f64, mut hi: f64) -> f64 {
        let abs_tol = 4.0 * f64::EPSILON * self.norm_estimate();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= abs_tol + 2.0 * f64::EPSILON * mid.abs() || mid == lo || mid == hi {
                break;
            }
            if self.sturm_count(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Lowest `k` eigenvalues, restricted to those below `ceiling` when given.
    pub fn lowest_eigenvalues(&self, k: usize, ceiling: Option<f64>) -> Vec<f64> {
        let (glo, ghi) = self.bounds();
        let hi = ceiling.map_or(ghi, |c| c.min(ghi));
        let available = self.sturm_count(hi);
        let count = k.min(available);
        let mut out = Vec::with_capacity(count);
        let mut lo = glo;
        for j in 0..count {
            let value = self.bisect_eigenvalue(j, lo, hi);
            out.push(value);
            lo = lo.max(value - 8.0 * f64::EPSILON * self.norm_estimate());
        }
        out
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let b = self.off_diagonal;
        let n = u.len();
        (0..n)
            .map(|i| {
                let mut y = self.diagonal[i] * u[i];
                if i > 0 {
                    y += b * u[i - 1];
                }
                if i + 1 < n {
                    y += b * u[i + 1];
                }
                y
            })
            .collect()
    }

    /// Inverse iteration at `shift`, orthogonalized against `previous`
    /// (unit Euclidean norm vectors of the same channel). Returns a vector
    /// with unit Euclidean norm and its residual `||A u - shift u||`.
    pub fn inverse_iteration(&self, shift: f64, previous: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
        let n = self.dimension();
        let lu = ShiftedLu::factor(self, shift);
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.37 * ((i as f64) * 0.61803398875).sin())
            .collect();
        normalize_euclidean(&mut x);
        let mut residual = f64::INFINITY;
        for _ in 0..MAX_INVERSE_ITERATIONS {
            lu.solve(&mut x);
            for p in previous {
                let c = dot(&x, p);
                x.iter_mut().zip(p).for_each(|(xi, pi)| *xi -= c * pi);
            }
            if !normalize_euclidean(&mut x) {
                return Err(Error::ConvergenceFailure {
                    l: self.l,
                    reason: "inverse iteration produced a null vector".into(),
                });
            }
            let ax = self.apply(&x);
            residual = ax
                .iter()
                .zip(&x)
                .map(|(a, xi)| (a - shift * xi).powi(2))
                .sum::<f64>()
                .sqrt();
            if residual <= RESIDUAL_TOL {
                return Ok((x, residual));
            }
        }
        Err(Error::ConvergenceFailure {
            l: self.l,
            reason: format!("inverse iteration stagnated at residual {residual:e} for shift {shift}"),
        })
    }

    /// Eigenpairs for the given ascending eigenvalues of this channel, which
    /// must be the lowest ones (`n = 0, 1, ...`).
    pub fn eigenpairs(&self, values: &[f64]) -> Result<Vec<SpectrumEntry>> {
        let h = self.grid.spacing();
        let mut unit: Vec<Vec<f64>> = Vec::with_capacity(values.len());
        let mut out = Vec::with_capacity(values.len());
        for (n, &value) in values.iter().enumerate() {
            let (x, _) = self.inverse_iteration(value, &unit)?;
            let mut u = x.clone();
            unit.push(x);
            let scale = 1.0 / h.sqrt();
            let peak = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let sign = u
                .iter()
                .find(|v| v.abs() > 1e-3 * peak)
                .map_or(1.0, |v| v.signum());
            u.iter_mut().for_each(|v| *v *= sign * scale);
            out.push(SpectrumEntry {
                l: self.l,
                n,
                value,
                u,
            });
        }
        Ok(out)
    }
}

/// Tridiagonal LU with partial pivoting of `A - shift I`.
struct ShiftedLu {
    d: Vec<f64>,
    dl: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(op: &ChannelOperator, shift: f64) -> Self {
        let n = op.dimension();
        let b = op.off_diagonal;
        let mut d: Vec<f64> = op.diagonal.iter().map(|a| a - shift).collect();
        let mut dl = vec![b; n.saturating_sub(1)];
        let mut du = vec![b; n.saturating_sub(1)];
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        let tiny = f64::EPSILON * op.norm_estimate();
        for di in d.iter_mut() {
            if di.abs() < tiny {
                *di = if *di < 0.0 { -tiny } else { tiny };
            }
        }
        Self {
            d,
            dl,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize_euclidean(x: &mut [f64]) -> bool {
    let norm = dot(x, x).sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    true
}

/// Lowest `k` eigenpairs of channel `l` in the potential `v`.
pub fn channel_eigensolve(v: &Potential, l: usize, k: usize, grid: &RadialGrid) -> Result<Vec<SpectrumEntry>> {
    if v.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if k == 0 {
        return Err(Error::InvalidArgument("need k >= 1 eigenpairs".into()));
    }
    let op = ChannelOperator::new(v, l);
    let values = op.lowest_eigenvalues(k, None);
    op.eigenpairs(&values)
}

/// Bound eigenvalues (below `-EPS_BOUND`) of channels `0..=l_max`, at most
/// `k_per_channel` each, ascending. Also returns the untruncated bound count
/// per channel.
pub fn bound_levels(v: &Potential, l_max: usize, k_per_channel: usize) -> (Vec<Level>, Vec<usize>) {
    let mut levels = Vec::new();
    let mut counts = Vec::with_capacity(l_max + 1);
    for l in 0..=l_max {
        let op = ChannelOperator::new(v, l);
        counts.push(op.sturm_count(-EPS_BOUND));
        for (n, value) in op
            .lowest_eigenvalues(k_per_channel, Some(-EPS_BOUND))
            .into_iter()
            .enumerate()
        {
            levels.push(Level { l, n, value });
        }
    }
    sort_levels(&mut levels);
    (levels, counts)
}

pub(crate) fn sort_levels(levels: &mut [Level]) {
    levels.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.l.cmp(&b.l)).then(a.n.cmp(&b.n)));
}

/// Eigenfunctions for a selection of levels of `v` (each channel's selection
/// must be a prefix `n = 0..m`).
pub fn eigenfunctions(v: &Potential, levels: &[Level]) -> Result<Vec<SpectrumEntry>> {
    let mut out: Vec<SpectrumEntry> = Vec::with_capacity(levels.len());
    let l_max = levels.iter().map(|lv| lv.l).max();
    if let Some(l_max) = l_max {
        for l in 0..=l_max {
            let mut mine: Vec<Level> = levels.iter().filter(|lv| lv.l == l).copied().collect();
            if mine.is_empty() {
                continue;
            }
            mine.sort_by_key(|lv| lv.n);
            if mine.iter().enumerate().any(|(i, lv)| lv.n != i) {
                return Err(Error::InvalidArgument(format!(
                    "levels of channel {l} are not a prefix of its spectrum"
                )));
            }
            let op = ChannelOperator::new(v, l);
            let values: Vec<f64> = mine.iter().map(|lv| lv.value).collect();
            out.extend(op.eigenpairs(&values)?);
        }
    }
    out.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.l.cmp(&b.l)).then(a.n.cmp(&b.n)));
    Ok(out)
}

/// All bound states of channels `0..=l_max` (at most `k_per_channel` each).
pub fn full_spectrum(v: &Potential, l_max: usize, k_per_channel: usize) -> Result<Spectrum> {
    let (levels, bound_counts) = bound_levels(v, l_max, k_per_channel);
    let entries = eigenfunctions(v, &levels)?;
    Ok(Spectrum {
        grid: *v.grid(),
        entries,
        bound_counts,
    })
}

/// `\int (u')^2 dr + l(l+1) \int u^2/r^2 dr` in the discretization of the
/// channel operator, for `h sum u^2 = 1`.
pub fn kinetic_energy(u: &[f64], l: usize, grid: &RadialGrid) -> f64 {
    let h = grid.spacing();
    let n = u.len();
    let mut grad = u[0] * u[0] + u[n - 1] * u[n - 1];
    for i in 0..n - 1 {
        let d = u[i + 1] - u[i];
        grad += d * d;
    }
    let mut centrifugal = 0.0;
    if l > 0 {
        for (i, ui) in u.iter().enumerate() {
            let r = grid.node(i);
            centrifugal += ui * ui / (r * r);
        }
        centrifugal *= (l * (l + 1)) as f64 * h;
    }
    grad / h + centrifugal
}

pub fn kinetic_energy_of_entry(entry: &SpectrumEntry, grid: &RadialGrid) -> f64 {
    kinetic_energy(&entry.u, entry.l, grid)
}

/// `\int V u^2 dr` for normalized `u`.
pub fn potential_expectation(u: &[f64], v: &Potential) -> f64 {
    let h = v.grid().spacing();
    h * u.iter().zip(v.values()).map(|(a, b)| a * a * b).sum::<f64>()
}
