//! Slow reference computations that share no code path with the SCF solver.
//!
//! The rank-one Hartree energy of `rho = M |psi><psi|`, `psi = u(r)/r Y_00`,
//! is evaluated with plain node sums and a direct `O(n^2)` potential,
//! `W_i = M h sum_j u_j^2 / max(r_i, r_j)`:
//!
//! `E(u) = M sum_i (u_{i+1} - u_i)^2 / h - 1/2 M^2 h^2 sum_ij u_i^2 u_j^2 / max(r_i, r_j)`.
//!
//! It is minimized by implicit imaginary-time steps
//! `u <- normalize((1 + tau H_u)^{-1} u)` with `H_u = -d^2/dr^2 - W`.

use std::fs;
use std::path::Path;

use crate::entropy::EntropySpec;
use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::poisson::Potential;
use crate::spectral::{channel_eigensolve, distinct_values};

const INITIAL_STEP: f64 = 4.0;
const MIN_STEP: f64 = 1e-10;
const ENERGY_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct DescentResult {
    /// Reduced radial function, `h sum u^2 = 1`.
    pub u: RadialField,
    pub energy: f64,
    pub e_kin: f64,
    pub e_pot: f64,
    pub iterations: usize,
    pub final_step: f64,
}

/// Direct potential `W_i = M h sum_j u_j^2 / max(r_i, r_j)`, computed with
/// the double loop on purpose.
pub fn direct_potential(u: &[f64], mass: f64, grid: &RadialGrid) -> Vec<f64> {
    let h = grid.spacing();
    let r = grid.nodes();
    let w: Vec<f64> = u.iter().map(|x| x * x).collect();
    (0..u.len())
        .map(|i| {
            let mut s = 0.0;
            for j in 0..u.len() {
                s += w[j] / r[i].max(r[j]);
            }
            mass * h * s
        })
        .collect()
}

fn kinetic(u: &[f64], h: f64) -> f64 {
    let n = u.len();
    let mut s = u[0] * u[0] + u[n - 1] * u[n - 1];
    for i in 0..n - 1 {
        s += (u[i + 1] - u[i]).powi(2);
    }
    s / h
}

/// `(M K, E_pot, W)` for an arbitrary (not necessarily normalized) `u`.
fn energy_parts(u: &[f64], mass: f64, grid: &RadialGrid) -> (f64, f64, Vec<f64>) {
    let h = grid.spacing();
    let w = direct_potential(u, mass, grid);
    let pot = 0.5 * mass * h * u.iter().zip(&w).map(|(a, b)| a * a * b).sum::<f64>();
    (mass * kinetic(u, h), pot, w)
}

/// Rank-one Hartree energy of an arbitrary `u`.
pub fn rank1_energy(u: &[f64], mass: f64, grid: &RadialGrid) -> f64 {
    let (k, p, _) = energy_parts(u, mass, grid);
    k - p
}

/// `dE/du_i = 2 M h ((L u)_i - W_i u_i)` with `L` the Dirichlet second
/// difference.
pub fn rank1_gradient(u: &[f64], mass: f64, grid: &RadialGrid) -> Vec<f64> {
    let h = grid.spacing();
    let w = direct_potential(u, mass, grid);
    let n = u.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let right = if i + 1 < n { u[i + 1] } else { 0.0 };
            let lu = (2.0 * u[i] - left - right) / (h * h);
            2.0 * mass * h * (lu - w[i] * u[i])
        })
        .collect()
}

/// Solves `(1 + tau (L - diag(w))) x = b` by the Thomas algorithm.
fn implicit_solve(b: &[f64], w: &[f64], tau: f64, h: f64) -> Option<Vec<f64>> {
    let n = b.len();
    let off = -tau / (h * h);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut prev_c = 0.0;
    let mut prev_d = 0.0;
    for i in 0..n {
        let diag = 1.0 + tau * (2.0 / (h * h) - w[i]);
        let denom = diag - off * prev_c;
        if denom.abs() < 1e-300 {
            return None;
        }
        c[i] = off / denom;
        d[i] = (b[i] - off * prev_d) / denom;
        prev_c = c[i];
        prev_d = d[i];
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn normalize(u: &mut [f64], h: f64) -> bool {
    let norm = (h * u.iter().map(|x| x * x).sum::<f64>()).sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return false;
    }
    u.iter_mut().for_each(|x| *x /= norm);
    true
}

/// Minimizes the rank-one energy at mass `mass`, starting from
/// `u = r e^{-r / a}` with `a = r_max / 20`. A step that raises the energy
/// (or makes the shifted operator singular) is rejected and `tau` halved;
/// an accepted step lets `tau` grow again by 10 percent up to `step`.
pub fn rank1_descent(mass: f64, grid: &RadialGrid, step: f64, iterations: usize) -> Result<DescentResult> {
    if !(mass > 0.0) {
        return Err(Error::InvalidMass(mass));
    }
    let h = grid.spacing();
    let a = grid.r_max() / 20.0;
    let mut u: Vec<f64> = grid.nodes().iter().map(|r| r * (-r / a).exp()).collect();
    normalize(&mut u, h);
    let (mut k, mut p, mut w) = energy_parts(&u, mass, grid);
    let mut energy = k - p;
    let mut tau = step;
    let mut done = 1;
    for it in 1..=iterations {
        let trial = implicit_solve(&u, &w, tau, h)
            .and_then(|mut x| {
                (normalize(&mut x, h) && x.iter().map(|v| v.signum()).sum::<f64>() > 0.0).then_some(x)
            })
            .map(|x| {
                let (k2, p2, w2) = energy_parts(&x, mass, grid);
                (x, k2, p2, w2)
            });
        let floor = ENERGY_TOL * energy.abs();
        match trial {
            Some((x, k2, p2, w2)) if k2 - p2 <= energy => {
                let change = energy - (k2 - p2);
                u = x;
                (k, p, w) = (k2, p2, w2);
                energy = k - p;
                if change <= floor {
                    break;
                }
                tau = (1.1 * tau).min(step);
            }
            // a rise within rounding noise: the descent has reached its floor
            Some((_, k2, p2, _)) if k2 - p2 - energy <= floor => break,
            _ => {
                tau *= 0.5;
                if tau < MIN_STEP {
                    return Err(Error::Stagnation(format!(
                        "step fell below {MIN_STEP:e} at iteration {it} (energy {energy})"
                    )));
                }
            }
        }
        if it == iterations {
            return Err(Error::Stagnation(format!(
                "no convergence within {iterations} iterations (energy {energy})"
            )));
        }
        done = it + 1;
    }
    Ok(DescentResult {
        u: RadialField::new(*grid, u)?,
        energy,
        e_kin: k,
        e_pot: p,
        iterations: done,
        final_step: tau,
    })
}

pub fn rank1_descent_default(mass: f64, grid: &RadialGrid) -> Result<DescentResult> {
    rank1_descent(mass, grid, INITIAL_STEP, 20_000)
}

/// Reference data of the zero-temperature problem at unit mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceValues {
    pub i_10: f64,
    pub mu0_0: f64,
    pub mu0_1: f64,
    pub r_max: f64,
    pub n_points: usize,
}

impl ReferenceValues {
    pub fn to_text(&self) -> String {
        format!(
            "# zero-temperature reference at unit mass\ni_10 = {:.16e}\nmu0_0 = {:.16e}\nmu0_1 = {:.16e}\nr_max = {}\nn_points = {}\n",
            self.i_10, self.mu0_0, self.mu0_1, self.r_max, self.n_points
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = std::collections::HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("fixture line {}: expected `key = value`", lineno + 1))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        let get = |key: &str| -> Result<f64> {
            values
                .get(key)
                .ok_or_else(|| Error::InvalidArgument(format!("fixture lacks `{key}`")))?
                .parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("fixture `{key}`: {e}")))
        };
        Ok(Self {
            i_10: get("i_10")?,
            mu0_0: get("mu0_0")?,
            mu0_1: get("mu0_1")?,
            r_max: get("r_max")?,
            n_points: get("n_points")? as usize,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_text())
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.r_max, self.n_points)
    }
}

/// Runs the unit-mass descent and diagonalizes the Hamiltonian of its
/// potential for the two lowest distinct eigenvalues (channels 0 to 2).
pub fn reference_values(grid: &RadialGrid) -> Result<ReferenceValues> {
    let descent = rank1_descent_default(1.0, grid)?;
    let w = direct_potential(descent.u.values(), 1.0, grid);
    let v = Potential::from_field(RadialField::new(*grid, w)?);
    let mut values = Vec::new();
    for l in 0..=2 {
        values.extend(channel_eigensolve(&v, l, 2, grid)?.into_iter().map(|e| e.value));
    }
    values.sort_by(f64::total_cmp);
    let ev = distinct_values(values.into_iter(), 2);
    if ev.len() < 2 || ev[1] >= 0.0 {
        return Err(Error::InsufficientSpectrum(ev.iter().filter(|v| **v < 0.0).count()));
    }
    Ok(ReferenceValues {
        i_10: descent.energy,
        mu0_0: ev[0],
        mu0_1: ev[1],
        r_max: grid.r_max(),
        n_points: grid.n_points(),
    })
}

/// A frozen level: eigenvalue and degeneracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenLevel {
    pub value: f64,
    pub degeneracy: usize,
}

/// `sum_j d_j (lambda_j mu_j + T beta(lambda_j))` on a frozen spectrum.
pub fn frozen_free_energy(levels: &[FrozenLevel], lambdas: &[f64], t: f64, spec: &EntropySpec) -> f64 {
    levels
        .iter()
        .zip(lambdas)
        .map(|(lv, &lam)| lv.degeneracy as f64 * (lam * lv.value + t * spec.beta(lam).unwrap_or(f64::INFINITY)))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceMinimum {
    pub free_energy: f64,
    pub lambdas: Vec<f64>,
}

/// Grid search for `min sum_j d_j (lambda_j mu_j + T beta(lambda_j))` over
/// `sum_j d_j lambda_j = M`, `lambda >= 0`, on at most three frozen levels:
/// the last level absorbs the remaining mass. A dense pass over
/// `resolution^2` points is followed by two zoomed passes around the best
/// point.
pub fn brute_force_free_energy(
    levels: &[FrozenLevel],
    mass: f64,
    t: f64,
    spec: &EntropySpec,
    resolution: usize,
) -> Result<BruteForceMinimum> {
    if levels.is_empty() || levels.len() > 3 {
        return Err(Error::InvalidArgument(format!(
            "brute force handles 1 to 3 levels, got {}",
            levels.len()
        )));
    }
    let d: Vec<f64> = levels.iter().map(|l| l.degeneracy as f64).collect();
    let nfree = levels.len() - 1;
    let complete = |free: &[f64]| -> Option<Vec<f64>> {
        let used: f64 = free.iter().zip(&d).map(|(x, dj)| x * dj).sum();
        let last = (mass - used) / d[nfree];
        (last >= -1e-15).then(|| {
            let mut v = free.to_vec();
            v.push(last.max(0.0));
            v
        })
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let consider = |free: &[f64], best: &mut Option<(f64, Vec<f64>)>| {
        if free.iter().any(|x| *x < 0.0) {
            return;
        }
        if let Some(lams) = complete(free) {
            let f = frozen_free_energy(levels, &lams, t, spec);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                *best = Some((f, lams));
            }
        }
    };
    let mut lo: Vec<f64> = vec![0.0; nfree];
    let mut width: Vec<f64> = d[..nfree].iter().map(|dj| mass / dj).collect();
    for _pass in 0..3 {
        let steps = resolution.max(2);
        match nfree {
            0 => consider(&[], &mut best),
            1 => {
                for a in 0..=steps {
                    let x = lo[0] + width[0] * a as f64 / steps as f64;
                    consider(&[x], &mut best);
                }
            }
            _ => {
                for a in 0..=steps {
                    let x = lo[0] + width[0] * a as f64 / steps as f64;
                    for b in 0..=steps {
                        let y = lo[1] + width[1] * b as f64 / steps as f64;
                        consider(&[x, y], &mut best);
                    }
                }
            }
        }
        let (_, lams) = best.as_ref().expect("the all-on-last-level point is admissible");
        for k in 0..nfree {
            let cell = width[k] / steps as f64;
            lo[k] = (lams[k] - 2.0 * cell).max(0.0);
            width[k] = 4.0 * cell;
        }
    }
    let (free_energy, lambdas) = best.expect("nonempty search");
    Ok(BruteForceMinimum { free_energy, lambdas })
}
