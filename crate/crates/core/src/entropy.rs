//! Entropy generating functions `beta` and the calculus the solver needs:
//! `beta`, `beta'`, the clipped inverse `(beta')^{-1}(y)_+` and the growth
//! exponent `p(M) = sup_{0 < m <= M} m beta'(m) / beta(m)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied `beta` with its derivative and the inverse of the derivative.
#[derive(Clone)]
pub struct CustomEntropy {
    label: String,
    beta: ScalarFn,
    beta_prime: ScalarFn,
    beta_prime_inverse: ScalarFn,
}

#[derive(Clone)]
pub enum EntropySpec {
    /// `beta(s) = s^p`, `p > 1`.
    PowerLaw { p: f64 },
    Custom(CustomEntropy),
}

impl fmt::Debug for EntropySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl EntropySpec {
    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidEntropy(format!("power-law exponent must exceed 1, got {p}")));
        }
        Ok(Self::PowerLaw { p })
    }

    pub fn custom(
        label: impl Into<String>,
        beta: impl Fn(f64) -> f64 + Send + Sync + 'static,
        beta_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        beta_prime_inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::Custom(CustomEntropy {
            label: label.into(),
            beta: Arc::new(beta),
            beta_prime: Arc::new(beta_prime),
            beta_prime_inverse: Arc::new(beta_prime_inverse),
        })
    }

    /// `beta(s) = sum_k c_k s^{e_k}` with every `e_k > 1` and `c_k > 0`.
    /// `beta'` is then strictly increasing from 0, and its inverse is found by
    /// safeguarded Newton iteration.
    pub fn power_sum(label: impl Into<String>, terms: Vec<(f64, f64)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidEntropy("power sum needs at least one term".into()));
        }
        for &(e, c) in &terms {
            if !(e.is_finite() && e > 1.0 && c.is_finite() && c > 0.0) {
                return Err(Error::InvalidEntropy(format!(
                    "power-sum term ({e}, {c}) needs exponent > 1 and coefficient > 0"
                )));
            }
        }
        let terms: Arc<[(f64, f64)]> = terms.into();
        let t1 = terms.clone();
        let t2 = terms.clone();
        let t3 = terms;
        let beta = move |s: f64| t1.iter().map(|&(e, c)| c * s.powf(e)).sum::<f64>();
        let beta_prime =
            move |s: f64| t2.iter().map(|&(e, c)| c * e * s.powf(e - 1.0)).sum::<f64>();
        let beta_prime_inverse = move |y: f64| {
            let d = |s: f64| t3.iter().map(|&(e, c)| c * e * s.powf(e - 1.0)).sum::<f64>();
            let dd = |s: f64| {
                t3.iter()
                    .map(|&(e, c)| c * e * (e - 1.0) * s.powf(e - 2.0))
                    .sum::<f64>()
            };
            invert_increasing(y, d, dd)
        };
        Ok(Self::custom(label, beta, beta_prime, beta_prime_inverse))
    }

    pub fn label(&self) -> String {
        match self {
            Self::PowerLaw { p } => format!("power:{p}"),
            Self::Custom(c) => c.label.clone(),
        }
    }

    /// The exponent when this is a pure power law.
    pub fn power_exponent(&self) -> Option<f64> {
        match self {
            Self::PowerLaw { p } => Some(*p),
            Self::Custom(_) => None,
        }
    }

    pub fn beta(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::NegativeArgument(s));
        }
        Ok(self.beta_at(s))
    }

    /// `beta` for occupations already known to be nonnegative.
    #[inline]
    pub(crate) fn beta_at(&self, s: f64) -> f64 {
        match self {
            Self::PowerLaw { p } => s.powf(*p),
            Self::Custom(c) => (c.beta)(s),
        }
    }

    pub fn beta_prime(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::NegativeArgument(s));
        }
        Ok(self.beta_prime_at(s))
    }

    #[inline]
    pub(crate) fn beta_prime_at(&self, s: f64) -> f64 {
        match self {
            Self::PowerLaw { p } => p * s.powf(p - 1.0),
            Self::Custom(c) => (c.beta_prime)(s),
        }
    }

    /// `(beta')^{-1}(y)` for `y > 0`, and 0 for `y <= 0`.
    #[inline]
    pub fn beta_prime_inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        match self {
            Self::PowerLaw { p } => (y / p).powf(1.0 / (p - 1.0)),
            Self::Custom(c) => (c.beta_prime_inverse)(y).max(0.0),
        }
    }

    /// `p(M) = sup_{m in (0, M]} m beta'(m) / beta(m)`.
    pub fn p_sup(&self, mass: f64) -> Result<f64> {
        if !(mass > 0.0) {
            return Err(Error::InvalidMass(mass));
        }
        match self {
            Self::PowerLaw { p } => Ok(*p),
            Self::Custom(_) => {
                let mut sup = f64::NEG_INFINITY;
                for m in log_samples(mass * 1e-8, mass, 4000) {
                    let b = self.beta_at(m);
                    if b == 0.0 {
                        return Err(Error::UndefinedAtZero(m));
                    }
                    sup = sup.max(m * self.beta_prime_at(m) / b);
                }
                Ok(sup)
            }
        }
    }

    /// Sampled checks of the structural assumptions on `[0, s_max]`:
    /// strict convexity with finite derivative, `beta >= 0` on `[0,1]` with
    /// `beta(0) = beta'(0) = 0`, and `sup m beta'(m)/beta(m) <= 3`.
    pub fn validate_assumptions(&self, s_max: f64) -> ValidationReport {
        let mut failures = Vec::new();
        let s_max = if s_max > 0.0 { s_max } else { 1.0 };
        let n = 2000;
        let ds = s_max / n as f64;
        let samples: Vec<f64> = (0..=n).map(|k| k as f64 * ds).collect();

        let values: Vec<f64> = samples.iter().map(|&s| self.beta_at(s)).collect();
        let slopes: Vec<f64> = samples.iter().map(|&s| self.beta_prime_at(s)).collect();
        let mut convex = values.iter().chain(&slopes).all(|v| v.is_finite());
        if !convex {
            failures.push("beta or beta' not finite on the sampled range".to_string());
        }
        if let Some(k) = (1..n).find(|&k| values[k - 1] - 2.0 * values[k] + values[k + 1] < -CONVEXITY_TOL)
        {
            convex = false;
            failures.push(format!("second difference negative at s = {}", samples[k]));
        }
        if let Some(k) = (1..=n).find(|&k| !(slopes[k] > slopes[k - 1])) {
            convex = false;
            failures.push(format!("beta' not strictly increasing near s = {}", samples[k]));
        }

        let mut vanishing = true;
        let b0 = self.beta_at(0.0);
        let d0 = self.beta_prime_at(0.0);
        if !(b0.abs() <= CONVEXITY_TOL && d0.abs() <= CONVEXITY_TOL) {
            vanishing = false;
            failures.push(format!("beta(0) = {b0}, beta'(0) = {d0}; both must vanish"));
        }
        if let Some(s) = (0..=n)
            .map(|k| k as f64 / n as f64)
            .find(|&s| !(self.beta_at(s) >= 0.0))
        {
            vanishing = false;
            failures.push(format!("beta negative at s = {s}"));
        }

        let p_sup = self.p_sup(s_max).ok();
        let growth = match p_sup {
            Some(p) if p <= 3.0 + GROWTH_TOL => true,
            Some(p) => {
                failures.push(format!("sup m beta'/beta = {p} exceeds 3"));
                false
            }
            None => {
                failures.push("m beta'/beta undefined on the sampled range".to_string());
                false
            }
        };

        ValidationReport {
            strictly_convex: convex,
            vanishes_at_origin: vanishing,
            growth_bounded: growth,
            p_sup,
            failures,
        }
    }
}

const CONVEXITY_TOL: f64 = 1e-9;
const GROWTH_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// Strict convexity and finite derivative.
    pub strictly_convex: bool,
    /// `beta >= 0` on `[0, 1]` and `beta(0) = beta'(0) = 0`.
    pub vanishes_at_origin: bool,
    /// `sup m beta'(m) / beta(m) <= 3`.
    pub growth_bounded: bool,
    pub p_sup: Option<f64>,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.strictly_convex && self.vanishes_at_origin && self.growth_bounded
    }
}

fn log_samples(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |k| {
        if k + 1 == n {
            hi
        } else {
            (a + (b - a) * k as f64 / (n - 1) as f64).exp()
        }
    })
}

/// Solves `d(s) = y` for increasing `d` with `d(0) = 0`.
fn invert_increasing(y: f64, d: impl Fn(f64) -> f64, dd: impl Fn(f64) -> f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    while d(hi) < y {
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    let mut s = 0.5 * hi;
    for _ in 0..200 {
        let f = d(s) - y;
        if f == 0.0 {
            return s;
        }
        if f > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let slope = dd(s);
        let newton = s - f / slope;
        s = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) <= 1e-15 * hi || (f.abs() <= 1e-15 * y) {
            break;
        }
    }
    s
}
