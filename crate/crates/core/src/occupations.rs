//! Chemical potential and occupation numbers for a given spectrum.
//!
//! For an eigenvalue `mu_j` the occupation per magnetic substate is
//! `lambda_j = (beta')^{-1}((mu - mu_j) / T)_+`, and `mu` is tuned so that
//! `sum_j (2l+1) lambda_j = M`.

use crate::entropy::EntropySpec;
use crate::error::{Error, Result};
use crate::spectral::Level;

/// Upper end of the chemical-potential bracket.
pub const MU_CEILING: f64 = -1e-14;
pub const MASS_TOLERANCE: f64 = 1e-10;
/// Relative occupation threshold (times `M`) used when counting the rank.
pub const RANK_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OccupationSet {
    pub levels: Vec<Level>,
    /// Occupation per magnetic substate, parallel to `levels`.
    pub lambdas: Vec<f64>,
    pub mu: f64,
    pub temperature: f64,
    pub mass_target: f64,
    pub mass_realized: f64,
}

impl OccupationSet {
    pub fn rank(&self) -> usize {
        rank_of(self, RANK_THRESHOLD * self.mass_target)
    }

    /// Levels with `lambda > 0` together with their occupations.
    pub fn occupied(&self) -> impl Iterator<Item = (Level, f64)> + '_ {
        self.levels
            .iter()
            .zip(&self.lambdas)
            .filter(|(_, &lam)| lam > 0.0)
            .map(|(lv, &lam)| (*lv, lam))
    }
}

fn occupation(level_value: f64, mu: f64, t: f64, spec: &EntropySpec) -> f64 {
    if mu <= level_value {
        0.0
    } else {
        spec.beta_prime_inverse((mu - level_value) / t)
    }
}

/// `sum_j (2l+1) (beta')^{-1}((mu - mu_j)/T)_+`.
pub fn mass_at_mu(levels: &[Level], mu: f64, t: f64, spec: &EntropySpec) -> f64 {
    levels
        .iter()
        .map(|lv| lv.degeneracy() as f64 * occupation(lv.value, mu, t, spec))
        .sum()
}

/// Bisection for `mu` in `(mu_min - 1, MU_CEILING]`.
pub fn solve_chemical_potential(levels: &[Level], mass: f64, t: f64, spec: &EntropySpec) -> Result<OccupationSet> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidTemperature(t));
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::InvalidMass(mass));
    }
    let mu_min = levels
        .iter()
        .map(|lv| lv.value)
        .filter(|v| *v < MU_CEILING)
        .fold(f64::INFINITY, f64::min);
    if !mu_min.is_finite() {
        return Err(Error::EmptySpectrum);
    }
    let available = mass_at_mu(levels, MU_CEILING, t, spec);
    if available < mass {
        return Err(Error::MassNotAttainable {
            requested: mass,
            available,
        });
    }
    let (mut lo, mut hi) = (mu_min - 1.0, MU_CEILING);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass_at_mu(levels, mid, t, spec) < mass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let m_lo = mass_at_mu(levels, lo, t, spec);
    let m_hi = mass_at_mu(levels, hi, t, spec);
    let mu = if (m_lo - mass).abs() < (m_hi - mass).abs() { lo } else { hi };
    let lambdas: Vec<f64> = levels.iter().map(|lv| occupation(lv.value, mu, t, spec)).collect();
    let mass_realized = levels
        .iter()
        .zip(&lambdas)
        .map(|(lv, lam)| lv.degeneracy() as f64 * lam)
        .sum();
    Ok(OccupationSet {
        levels: levels.to_vec(),
        lambdas,
        mu,
        temperature: t,
        mass_target: mass,
        mass_realized,
    })
}

/// Number of magnetic substates with occupation above `threshold`.
pub fn rank_of(occ: &OccupationSet, threshold: f64) -> usize {
    occ.levels
        .iter()
        .zip(&occ.lambdas)
        .filter(|(_, &lam)| lam > threshold)
        .map(|(lv, _)| lv.degeneracy())
        .sum()
}
