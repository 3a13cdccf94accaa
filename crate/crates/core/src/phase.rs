//! Temperature sweeps and the structural relations of `T -> i(M, T)`:
//! the pure-to-mixed transition `T_c`, the maximal temperature `T*`,
//! concavity and monotonicity, the mass-temperature scaling inequality and
//! sub-additivity in the mass.

use std::thread;

use crate::entropy::EntropySpec;
use crate::error::{Error, Result};
use crate::grid::RadialField;
use crate::scf::{free_energy, scf_solve, scf_solve_from, zero_temperature_solve, ScfConfig, SolveResult};

pub const CONCAVITY_TOL: f64 = 1e-8;
pub const TC_SCAN_FACTORS: [f64; 8] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];
pub const TC_BISECTIONS: usize = 12;
pub const TSTAR_CEILING_FACTOR: f64 = 1e3;
const TSTAR_MARCH: f64 = 1.25;
const TSTAR_SECANT_STEPS: usize = 40;

/// One temperature of a scan. Failed points keep `NaN` energies and carry
/// the error message.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub temperature: f64,
    pub free_energy: f64,
    pub e_kin: f64,
    pub e_pot: f64,
    pub trace_beta: f64,
    pub mu: f64,
    pub rank: usize,
    /// Occupation of the second-lowest occupied level.
    pub lambda2: f64,
    pub converged: bool,
    pub mass_not_attainable: bool,
    pub failure: Option<String>,
}

impl ScanRecord {
    fn from_result(t: f64, r: &SolveResult) -> Self {
        Self {
            temperature: t,
            free_energy: r.breakdown.total,
            e_kin: r.breakdown.e_kin,
            e_pot: r.breakdown.e_pot,
            trace_beta: r.breakdown.trace_beta,
            mu: r.state.mu,
            rank: r.rank,
            lambda2: r.state.second_occupation(),
            converged: r.converged,
            mass_not_attainable: false,
            failure: None,
        }
    }

    fn failed(t: f64, err: &Error) -> Self {
        Self {
            temperature: t,
            free_energy: f64::NAN,
            e_kin: f64::NAN,
            e_pot: f64::NAN,
            trace_beta: f64::NAN,
            mu: f64::NAN,
            rank: 0,
            lambda2: f64::NAN,
            converged: false,
            mass_not_attainable: matches!(err, Error::MassNotAttainable { .. }),
            failure: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScanResult {
    pub mass: f64,
    pub entropy: String,
    pub records: Vec<ScanRecord>,
    pub t_c_scan: Option<f64>,
    pub t_c_formula: Option<f64>,
    pub t_star: Option<f64>,
    /// Indices of interior points violating concavity.
    pub concavity_violations: Vec<usize>,
    pub warnings: Vec<String>,
}

impl ScanResult {
    pub fn converged_records(&self) -> impl Iterator<Item = &ScanRecord> {
        self.records.iter().filter(|r| r.converged)
    }

    /// First scanned temperature whose minimizer has rank above one.
    pub fn first_mixed_temperature(&self) -> Option<f64> {
        self.converged_records().find(|r| r.rank > 1).map(|r| r.temperature)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    /// Sequential, each point seeded with the previous converged density.
    Warm,
    /// Independent cold starts spread over `workers` threads.
    Parallel { workers: usize },
}

fn check_temperatures(temps: &[f64]) -> Result<()> {
    if let Some(&t) = temps.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::InvalidTemperature(t));
    }
    if temps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("temperatures must be strictly increasing".into()));
    }
    Ok(())
}

fn record_of(t: f64, outcome: Result<SolveResult>) -> (ScanRecord, Option<SolveResult>) {
    match outcome {
        Ok(r) => (ScanRecord::from_result(t, &r), Some(r)),
        Err(Error::NotConverged(partial)) => (ScanRecord::from_result(t, &partial), None),
        Err(e) => (ScanRecord::failed(t, &e), None),
    }
}

/// Solves at every temperature of `temps`. Point failures are recorded and
/// the scan continues. A warm scan ends with a cold-start spot check at its
/// last converged point.
pub fn temperature_scan(
    mass: f64,
    spec: &EntropySpec,
    temps: &[f64],
    config: &ScfConfig,
    mode: ScanMode,
) -> Result<ScanResult> {
    check_temperatures(temps)?;
    let mut result = ScanResult {
        mass,
        entropy: spec.label(),
        ..ScanResult::default()
    };
    match mode {
        ScanMode::Warm => {
            let mut warm: Option<RadialField> = None;
            let mut last_ok = None;
            for (i, &t) in temps.iter().enumerate() {
                let (record, solved) = record_of(t, scf_solve_from(mass, t, spec, config, warm.as_ref()));
                if let Some(r) = solved {
                    warm = Some(r.state.density.clone());
                    last_ok = Some(i);
                }
                result.records.push(record);
            }
            if let Some(i) = last_ok {
                let t = temps[i];
                if let (record, Some(_)) = record_of(t, scf_solve(mass, t, spec, config)) {
                    let warm_f = result.records[i].free_energy;
                    if record.free_energy < warm_f - config.energy_tolerance(warm_f) {
                        result.warnings.push(format!(
                            "cold start at T = {t} found a lower free energy ({} < {warm_f}); warm branch replaced",
                            record.free_energy
                        ));
                        result.records[i] = record;
                    }
                }
            }
        }
        ScanMode::Parallel { workers } => {
            let workers = workers.max(1);
            let mut slots: Vec<Option<ScanRecord>> = vec![None; temps.len()];
            thread::scope(|scope| {
                let handles: Vec<_> = (0..workers)
                    .map(|w| {
                        scope.spawn(move || {
                            temps
                                .iter()
                                .enumerate()
                                .skip(w)
                                .step_by(workers)
                                .map(|(i, &t)| (i, record_of(t, scf_solve(mass, t, spec, config)).0))
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                for h in handles {
                    for (i, rec) in h.join().expect("scan worker panicked") {
                        slots[i] = Some(rec);
                    }
                }
            });
            result.records = slots.into_iter().map(|r| r.expect("every point solved")).collect();
        }
    }
    result.concavity_violations = concavity_violations(&result.records, CONCAVITY_TOL);
    result.t_c_scan = result.first_mixed_temperature();
    Ok(result)
}

/// Interior indices `i` of consecutive converged points where
/// `2 (w F_{i-1} + (1-w) F_{i+1} - F_i) > tol |F_i|`, i.e. the second
/// difference on a uniform grid exceeds `tol |F_i|`.
pub fn concavity_violations(records: &[ScanRecord], tol: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 1..records.len().saturating_sub(1) {
        let (a, b, c) = (&records[i - 1], &records[i], &records[i + 1]);
        if !(a.converged && b.converged && c.converged) {
            continue;
        }
        let w = (c.temperature - b.temperature) / (c.temperature - a.temperature);
        let chord = w * a.free_energy + (1.0 - w) * c.free_energy;
        if 2.0 * (chord - b.free_energy) > tol * b.free_energy.abs() {
            out.push(i);
        }
    }
    out
}

/// Indices `i` with `F_i < F_{i-1} - tol` between consecutive converged points.
pub fn monotonicity_violations(records: &[ScanRecord], tol: f64) -> Vec<usize> {
    (1..records.len())
        .filter(|&i| {
            let (a, b) = (&records[i - 1], &records[i]);
            a.converged && b.converged && b.free_energy < a.free_energy - tol
        })
        .collect()
}

/// `(mu^0_1 - mu^0_0) / beta'(M)` from the two lowest distinct eigenvalues of
/// the zero-temperature Hamiltonian.
pub fn critical_temperature_formula(mass: f64, spec: &EntropySpec, zero_t: &SolveResult) -> Result<f64> {
    let ev = zero_t.state.lowest_eigenvalues();
    if ev.len() < 2 {
        return Err(Error::InsufficientSpectrum(ev.len()));
    }
    Ok((ev[1] - ev[0]) / spec.beta_prime(mass)?)
}

#[derive(Debug, Clone)]
pub struct CriticalTemperature {
    pub t_c_scan: f64,
    pub t_c_formula: f64,
    /// `|t_c_scan - t_c_formula| / t_c_formula`.
    pub relative_gap: f64,
    /// Final bisection bracket `[rank 1, rank > 1]`.
    pub bracket: (f64, f64),
    pub scan: ScanResult,
    pub zero_temperature: SolveResult,
}

/// Coarse warm scan over `TC_SCAN_FACTORS * T_c(formula)`, then bisection in
/// `T` on the first interval where the rank leaves one.
pub fn find_critical_temperature(mass: f64, spec: &EntropySpec, config: &ScfConfig) -> Result<CriticalTemperature> {
    let zero_t = zero_temperature_solve(mass, config)?;
    let t_cf = critical_temperature_formula(mass, spec, &zero_t)?;
    let temps: Vec<f64> = TC_SCAN_FACTORS.iter().map(|f| f * t_cf).collect();
    let mut scan = temperature_scan(mass, spec, &temps, config, ScanMode::Warm)?;
    scan.t_c_formula = Some(t_cf);

    let k = scan
        .records
        .iter()
        .position(|r| r.converged && r.rank > 1)
        .ok_or(Error::NoRootFound {
            ceiling: *temps.last().unwrap(),
        })?;
    let (mut lo, mut hi) = (if k == 0 { 0.0 } else { temps[k - 1] }, temps[k]);
    let mut seed = if k == 0 {
        Some(zero_t.state.density.clone())
    } else {
        None
    };
    if seed.is_none() {
        seed = Some(scf_solve(mass, lo, spec, config)?.state.density);
    }
    for _ in 0..TC_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let r = scf_solve_from(mass, mid, spec, config, seed.as_ref())?;
        if r.rank > 1 {
            hi = mid;
        } else {
            lo = mid;
            seed = Some(r.state.density);
        }
    }
    let t_c_scan = 0.5 * (lo + hi);
    scan.t_c_scan = Some(t_c_scan);
    Ok(CriticalTemperature {
        t_c_scan,
        t_c_formula: t_cf,
        relative_gap: (t_c_scan - t_cf).abs() / t_cf,
        bracket: (lo, hi),
        scan,
        zero_temperature: zero_t,
    })
}

/// `max_{0 < m <= M} m^3 / beta(m) |i_{1,0}|` over a logarithmic grid of
/// `m` spanning eight decades below `M`.
pub fn tstar_lower_bound(mass: f64, spec: &EntropySpec, i_10: f64) -> f64 {
    const SAMPLES: usize = 4000;
    let lo = (1e-8 * mass).ln();
    let hi = mass.ln();
    (0..=SAMPLES)
        .map(|k| (lo + (hi - lo) * k as f64 / SAMPLES as f64).exp())
        .chain(std::iter::once(mass))
        .map(|m| m.powi(3) / spec.beta_at(m) * i_10.abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct MaxTemperature {
    pub t_star: f64,
    pub lower_bound: f64,
    pub t_c_formula: f64,
    /// Every probed temperature with its free energy (`None` when the solve
    /// failed, which is read as evaporation).
    pub samples: Vec<(f64, Option<f64>)>,
}

/// Root of `T -> i(M, T)`. Marches upward by a factor 1.25 from below the
/// lower bound (where `i < 0` is guaranteed) until `i` is nonnegative or the
/// solve fails, then iterates secants through the two largest-`T` negative
/// values. Concavity keeps every secant root at or left of `T*`.
pub fn find_max_temperature(mass: f64, spec: &EntropySpec, config: &ScfConfig) -> Result<MaxTemperature> {
    let zero_t = zero_temperature_solve(mass, config)?;
    let t_cf = critical_temperature_formula(mass, spec, &zero_t)?;
    let i_10 = zero_t.breakdown.total / mass.powi(3);
    let lower_bound = tstar_lower_bound(mass, spec, i_10);
    let ceiling = TSTAR_CEILING_FACTOR * t_cf;

    let mut samples: Vec<(f64, Option<f64>)> = Vec::new();
    let mut negatives: Vec<(f64, f64, RadialField)> = Vec::new();
    let mut warm = Some(zero_t.state.density.clone());
    let probe = |t: f64, warm: Option<&RadialField>| -> Result<Option<SolveResult>> {
        match scf_solve_from(mass, t, spec, config, warm) {
            Ok(r) => Ok(Some(r)),
            Err(Error::MassNotAttainable { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let mut t = 0.5 * lower_bound.min(t_cf);
    let first_nonnegative = loop {
        if t > ceiling {
            return Err(Error::NoRootFound { ceiling });
        }
        match probe(t, warm.as_ref())? {
            Some(r) if r.breakdown.total < 0.0 => {
                samples.push((t, Some(r.breakdown.total)));
                warm = Some(r.state.density.clone());
                negatives.push((t, r.breakdown.total, r.state.density));
            }
            Some(r) => {
                samples.push((t, Some(r.breakdown.total)));
                break t;
            }
            None => {
                samples.push((t, None));
                break t;
            }
        }
        t *= TSTAR_MARCH;
    };
    if negatives.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "free energy is already nonnegative at T = {}; cannot bracket T*",
            samples[0].0
        )));
    }

    let mut upper = first_nonnegative;
    let mut t_star = negatives.last().unwrap().0;
    for _ in 0..TSTAR_SECANT_STEPS {
        let n = negatives.len();
        let (ta, fa, _) = &negatives[n - 2];
        let (tb, fb, nb) = &negatives[n - 1];
        let mut next = tb - fb * (tb - ta) / (fb - fa);
        if !(next > *tb && next < upper) {
            next = 0.5 * (tb + upper);
        }
        let seed = nb.clone();
        let tb = *tb;
        let tol = config.energy_tolerance(0.0);
        match probe(next, Some(&seed))? {
            Some(r) if r.breakdown.total < 0.0 => {
                let f = r.breakdown.total;
                samples.push((next, Some(f)));
                negatives.push((next, f, r.state.density));
                t_star = next;
                if f.abs() <= tol || (next - tb).abs() <= 1e-12 * next {
                    break;
                }
            }
            Some(r) => {
                samples.push((next, Some(r.breakdown.total)));
                upper = next;
                t_star = next;
                if r.breakdown.total.abs() <= tol || (upper - tb) <= 1e-12 * upper {
                    break;
                }
            }
            None => {
                samples.push((next, None));
                upper = next;
                if (upper - tb) <= 1e-12 * upper {
                    break;
                }
            }
        }
    }
    Ok(MaxTemperature {
        t_star,
        lower_bound,
        t_c_formula: t_cf,
        samples,
    })
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub lambda: f64,
    pub p: f64,
    pub i_base: f64,
    pub i_scaled: f64,
    /// `lambda^3 i(M, T) - i(lambda M, lambda^{3-p} T)`; nonnegative when the
    /// inequality holds.
    pub slack: f64,
    /// `F_{lambda^{3-p} T}[rho_lambda]` for the converged base state.
    pub transformed_free_energy: f64,
    /// `|F[rho_lambda] - lambda^3 F[rho]| / |lambda^3 F[rho]|`.
    pub transform_relative_error: f64,
}

/// Compares `i(lambda M, lambda^{3-p} T)` with `lambda^3 i(M, T)` for
/// `beta(s) = s^p`, and checks the exact transform
/// `rho_lambda = lambda^4 sum lambda_j |psi_j(lambda .)><psi_j(lambda .)|`.
pub fn scaling_check(mass: f64, t: f64, lambda: f64, p: f64, config: &ScfConfig) -> Result<ScalingReport> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {lambda}")));
    }
    let spec = EntropySpec::power(p)?;
    let t_scaled = lambda.powf(3.0 - p) * t;
    let base = scf_solve(mass, t, &spec, config)?;
    let scaled = scf_solve(lambda * mass, t_scaled, &spec, config)?;
    let i_base = base.breakdown.total;
    let target = lambda.powi(3) * i_base;
    let transformed = base.state.rescaled(lambda, lambda, t_scaled)?;
    let f_transformed = free_energy(&transformed).total;
    Ok(ScalingReport {
        lambda,
        p,
        i_base,
        i_scaled: scaled.breakdown.total,
        slack: target - scaled.breakdown.total,
        transformed_free_energy: f_transformed,
        transform_relative_error: (f_transformed - target).abs() / target.abs(),
    })
}

#[derive(Debug, Clone)]
pub struct SubadditivityReport {
    pub mass: f64,
    pub part: f64,
    pub i_total: f64,
    pub i_part: f64,
    pub i_rest: f64,
    /// `i(M - m) + i(m) - i(M)`; the binding inequality asks for `> 0`.
    pub gap: f64,
}

impl SubadditivityReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.gap >= -tol
    }
}

/// `i(M) <= i(M - m) + i(m)`. The pieces are solved on grids enlarged in
/// proportion to `M / mass`, matching the natural length scale of each
/// minimizer. Since `i <= 0`, a piece whose solve fails or ends with a
/// positive free energy contributes 0.
pub fn subadditivity_check(
    mass: f64,
    m: f64,
    t: f64,
    spec: &EntropySpec,
    config: &ScfConfig,
) -> Result<SubadditivityReport> {
    if !(m > 0.0 && m < mass) {
        return Err(Error::InvalidArgument(format!("need 0 < m < M, got m = {m}, M = {mass}")));
    }
    let solve = |piece: f64| -> Result<f64> {
        let grid = config.grid.contracted(piece / mass)?;
        let cfg = config.with_grid(grid);
        let outcome = if t == 0.0 {
            zero_temperature_solve(piece, &cfg)
        } else {
            scf_solve(piece, t, spec, &cfg)
        };
        match outcome {
            Ok(r) => Ok(r.breakdown.total.min(0.0)),
            Err(Error::MassNotAttainable { .. }) if piece < mass => Ok(0.0),
            Err(e) => Err(e),
        }
    };
    let i_total = solve(mass)?;
    let i_part = solve(m)?;
    let i_rest = solve(mass - m)?;
    Ok(SubadditivityReport {
        mass,
        part: m,
        i_total,
        i_part,
        i_rest,
        gap: i_part + i_rest - i_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;

    fn record(t: f64, f: f64) -> ScanRecord {
        ScanRecord {
            temperature: t,
            free_energy: f,
            e_kin: 0.0,
            e_pot: 0.0,
            trace_beta: 0.0,
            mu: 0.0,
            rank: 1,
            lambda2: 0.0,
            converged: true,
            mass_not_attainable: false,
            failure: None,
        }
    }

    #[test]
    fn concavity_detector() {
        let concave: Vec<_> = (0..10).map(|i| record(i as f64, -(i as f64 - 4.0).powi(2))).collect();
        assert!(concavity_violations(&concave, 1e-8).is_empty());
        let convex: Vec<_> = (0..10).map(|i| record(i as f64, (i as f64).powi(2) - 100.0)).collect();
        assert_eq!(concavity_violations(&convex, 1e-8).len(), 8);
        let affine: Vec<_> = (0..10).map(|i| record(i as f64, 0.5 * i as f64 - 10.0)).collect();
        assert!(concavity_violations(&affine, 1e-8).is_empty());
        assert!(monotonicity_violations(&affine, 0.0).is_empty());
        assert_eq!(monotonicity_violations(&concave, 0.0).len(), 5);
    }

    #[test]
    fn lower_bound_examples() {
        let i10 = -0.03;
        let p2 = EntropySpec::power(2.0).unwrap();
        assert!((tstar_lower_bound(2.0, &p2, i10) - 0.06).abs() < 1e-12);
        let p3 = EntropySpec::power(3.0).unwrap();
        assert!((tstar_lower_bound(2.0, &p3, i10) - 0.03).abs() < 1e-12);
        let p12 = EntropySpec::power(1.2).unwrap();
        assert!((tstar_lower_bound(1.0, &p12, i10) - 0.03).abs() < 1e-12);
        let p4 = EntropySpec::power(4.0).unwrap();
        assert!(tstar_lower_bound(1.0, &p4, i10) > 1e6);
    }

    #[test]
    fn scan_validation() {
        let cfg = ScfConfig::new(RadialGrid::new(40.0, 400).unwrap());
        let p2 = EntropySpec::power(2.0).unwrap();
        let empty = temperature_scan(1.0, &p2, &[], &cfg, ScanMode::Warm).unwrap();
        assert!(empty.records.is_empty());
        assert!(temperature_scan(1.0, &p2, &[0.2, 0.1], &cfg, ScanMode::Warm).is_err());
        assert!(temperature_scan(1.0, &p2, &[-0.1], &cfg, ScanMode::Warm).is_err());
    }

    #[test]
    fn formula_needs_two_levels() {
        let cfg = ScfConfig::new(RadialGrid::new(80.0, 800).unwrap());
        let p2 = EntropySpec::power(2.0).unwrap();
        let mut zero_t = zero_temperature_solve(1.0, &cfg).unwrap();
        let tc = critical_temperature_formula(1.0, &p2, &zero_t).unwrap();
        let ev = zero_t.state.lowest_eigenvalues();
        assert!((tc - (ev[1] - ev[0]) / 2.0).abs() < 1e-15);
        // steeper entropy at larger mass pushes the transition down
        let p6 = EntropySpec::power(6.0).unwrap();
        assert!(critical_temperature_formula(1.0, &p6, &zero_t).unwrap() < tc);
        zero_t.state.levels.truncate(1);
        assert!(matches!(
            critical_temperature_formula(1.0, &p2, &zero_t),
            Err(Error::InsufficientSpectrum(1))
        ));
    }
}
