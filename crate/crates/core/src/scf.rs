//! Self-consistent field iteration for minimizers of
//! `F_T[rho] = tr(-Delta rho) - 1/2 \int n_rho V_rho + T tr beta(rho)`
//! under `tr rho = M`, restricted to radial states whose angular-momentum
//! shells are occupied uniformly.
//!
//! One sweep maps an input density to its potential, diagonalizes the
//! mean-field Hamiltonian, fills the levels with the thermal occupations and
//! forms the output density. The next input is a linear mix of input and
//! output, renormalized to mass `M`.
//!
//! Since the radial ansatz restricts the admissible states, every free energy
//! reported here is an upper bound on the true infimum.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entropy::EntropySpec;
use crate::error::{Error, Result};
use crate::grid::{cumulative_integral, field_distance_l1, integrate_volume, volume_samples, RadialField, RadialGrid};
use crate::occupations::{solve_chemical_potential, RANK_THRESHOLD};
use crate::poisson::{potential_energy, potential_from_density, Potential};
use crate::spectral::{
    bound_levels, eigenfunctions, kinetic_energy, potential_expectation, Level, DEFAULT_K_PER_CHANNEL,
    DEFAULT_L_MAX,
};

pub const ANSATZ_NOTE: &str =
    "radial shell-uniform ansatz: the reported free energy is an upper bound on i(M,T)";

pub const DEFAULT_R_MAX: f64 = 80.0;
pub const DEFAULT_N_POINTS: usize = 4000;
pub const MIXING_FLOOR: f64 = 0.05;
pub const PROBE_TRIALS: usize = 5;
pub const PROBE_STEPS: [f64; 2] = [1e-3, 1e-2];
pub const TRUNCATION_WARNING: f64 = 1e-8;
pub const DEFAULT_ANDERSON_DEPTH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeedDensity {
    /// Isotropic Gaussian of width `width_fraction * r_max`.
    Gaussian { width_fraction: f64 },
}

impl Default for SeedDensity {
    fn default() -> Self {
        Self::Gaussian { width_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScfConfig {
    pub grid: RadialGrid,
    /// Initial linear mixing weight of the output density.
    pub mixing: f64,
    pub max_iterations: usize,
    /// L1 self-consistency tolerance, relative to `M`.
    pub tol_density: f64,
    /// Energy tolerance `tol_energy_rel |F| + tol_energy_abs`.
    pub tol_energy_rel: f64,
    pub tol_energy_abs: f64,
    pub l_max: usize,
    pub k_per_channel: usize,
    pub seed: SeedDensity,
    /// Number of previous sweeps entering the Anderson extrapolation of the
    /// next input density; 0 keeps plain linear mixing.
    pub anderson_depth: usize,
    /// Seed of the random trial states of the minimality probe.
    pub probe_seed: u64,
    pub minimality_probe: bool,
}

impl ScfConfig {
    pub fn new(grid: RadialGrid) -> Self {
        Self {
            grid,
            mixing: 1.0,
            max_iterations: 500,
            tol_density: 1e-8,
            tol_energy_rel: 1e-10,
            tol_energy_abs: 1e-12,
            l_max: DEFAULT_L_MAX,
            k_per_channel: DEFAULT_K_PER_CHANNEL,
            seed: SeedDensity::default(),
            anderson_depth: DEFAULT_ANDERSON_DEPTH,
            probe_seed: 0,
            minimality_probe: true,
        }
    }

    pub fn with_grid(&self, grid: RadialGrid) -> Self {
        Self { grid, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(Error::InvalidArgument(format!("mixing must lie in (0, 1], got {}", self.mixing)));
        }
        if !(self.tol_density > 0.0 && self.tol_energy_rel >= 0.0 && self.tol_energy_abs > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_iterations == 0 || self.k_per_channel == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations and k_per_channel must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn energy_tolerance(&self, f: f64) -> f64 {
        self.tol_energy_rel * f.abs() + self.tol_energy_abs
    }
}

impl Default for ScfConfig {
    fn default() -> Self {
        Self::new(RadialGrid::new(DEFAULT_R_MAX, DEFAULT_N_POINTS).expect("default grid is valid"))
    }
}

/// An occupied eigenstate: `lambda` per magnetic substate of the shell.
#[derive(Debug, Clone)]
pub struct OccupiedLevel {
    pub l: usize,
    pub n: usize,
    /// Eigenvalue of the Hamiltonian that produced `u`.
    pub value: f64,
    pub lambda: f64,
    pub u: Vec<f64>,
}

impl OccupiedLevel {
    pub fn degeneracy(&self) -> usize {
        2 * self.l + 1
    }

    fn weight(&self) -> f64 {
        self.degeneracy() as f64 * self.lambda
    }
}

#[derive(Debug, Clone)]
pub struct MixedState {
    pub grid: RadialGrid,
    pub mass: f64,
    pub temperature: f64,
    /// `None` for zero-temperature states.
    pub entropy: Option<EntropySpec>,
    pub mu: f64,
    pub occupied: Vec<OccupiedLevel>,
    /// Retained bound spectrum of the Hamiltonian that produced `occupied`.
    pub levels: Vec<Level>,
    pub bound_counts: Vec<usize>,
    pub density: RadialField,
    pub potential: Potential,
}

impl MixedState {
    /// Builds the state's density and potential from its occupied levels.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        grid: RadialGrid,
        mass: f64,
        temperature: f64,
        entropy: Option<EntropySpec>,
        mu: f64,
        occupied: Vec<OccupiedLevel>,
        levels: Vec<Level>,
        bound_counts: Vec<usize>,
    ) -> Result<Self> {
        let density = density_from_state(&grid, &occupied);
        let potential = potential_from_density(&density)?;
        Ok(Self {
            grid,
            mass,
            temperature,
            entropy,
            mu,
            occupied,
            levels,
            bound_counts,
            density,
            potential,
        })
    }

    pub fn rank(&self) -> usize {
        let threshold = RANK_THRESHOLD * self.mass;
        self.occupied
            .iter()
            .filter(|o| o.lambda > threshold)
            .map(OccupiedLevel::degeneracy)
            .sum()
    }

    /// `sum (2l+1) lambda`.
    pub fn occupation_mass(&self) -> f64 {
        self.occupied.iter().map(OccupiedLevel::weight).sum()
    }

    /// Lowest two distinct eigenvalues of the generating Hamiltonian.
    pub fn lowest_eigenvalues(&self) -> Vec<f64> {
        crate::spectral::distinct_values(self.levels.iter().map(|l| l.value), 2)
    }

    /// Occupation of the second-lowest occupied level (0 if there is none).
    pub fn second_occupation(&self) -> f64 {
        self.occupied.get(1).map_or(0.0, |o| o.lambda)
    }

    /// Applies `u -> s^{1/2} u(s r)` to every orbital and multiplies each
    /// occupation by `c`. The orbitals are carried over unchanged to the grid
    /// `[0, r_max / s]` with the same node count, so the discrete kinetic and
    /// potential energies scale exactly like their continuum counterparts.
    pub fn rescaled(&self, s: f64, c: f64, temperature: f64) -> Result<Self> {
        if !(s > 0.0 && c > 0.0) {
            return Err(Error::InvalidArgument(format!("scale factors must be positive, got {s}, {c}")));
        }
        let grid = self.grid.contracted(s)?;
        let root = s.sqrt();
        let occupied = self
            .occupied
            .iter()
            .map(|o| OccupiedLevel {
                l: o.l,
                n: o.n,
                value: o.value * s * s,
                lambda: o.lambda * c,
                u: o.u.iter().map(|v| v * root).collect(),
            })
            .collect();
        let levels = self
            .levels
            .iter()
            .map(|lv| Level {
                value: lv.value * s * s,
                ..*lv
            })
            .collect();
        Self::assemble(
            grid,
            self.mass * c,
            temperature,
            self.entropy.clone(),
            self.mu * s * s,
            occupied,
            levels,
            self.bound_counts.clone(),
        )
    }
}

/// Energy bookkeeping of a state. The entropy is `S = -trace_beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeEnergyBreakdown {
    pub e_kin: f64,
    pub e_pot: f64,
    /// `tr beta(rho) = sum (2l+1) beta(lambda)`.
    pub trace_beta: f64,
    pub temperature: f64,
    /// `e_kin - e_pot + T trace_beta`.
    pub total: f64,
    /// `tr(V rho) / tr(-Delta rho)`, equal to 4 at minimizers.
    pub virial_ratio: f64,
    /// `|mu M - sum (2l+1) lambda (<H>_j + T beta'(lambda_j))|`.
    pub multiplier_residual: f64,
}

impl FreeEnergyBreakdown {
    pub fn entropy(&self) -> f64 {
        -self.trace_beta
    }
}

/// `n(r) = sum (2l+1) lambda u(r)^2 / (4 pi r^2)`.
pub fn density_from_state(grid: &RadialGrid, occupied: &[OccupiedLevel]) -> RadialField {
    let mut values = vec![0.0; grid.n_points()];
    for o in occupied {
        let w = o.weight();
        if w == 0.0 {
            continue;
        }
        for (v, u) in values.iter_mut().zip(&o.u) {
            *v += w * u * u;
        }
    }
    for (i, v) in values.iter_mut().enumerate() {
        let r = grid.node(i);
        *v /= 4.0 * PI * r * r;
    }
    RadialField::new(*grid, values).expect("length matches the grid")
}

fn trace_beta(occupied: &[OccupiedLevel], spec: Option<&EntropySpec>) -> f64 {
    match spec {
        Some(spec) => occupied
            .iter()
            .map(|o| o.degeneracy() as f64 * spec.beta_at(o.lambda))
            .sum(),
        None => 0.0,
    }
}

pub fn free_energy(state: &MixedState) -> FreeEnergyBreakdown {
    let grid = &state.grid;
    let t = state.temperature;
    let spec = state.entropy.as_ref();
    let mut e_kin = 0.0;
    let mut trace_v = 0.0;
    let mut multiplier = 0.0;
    for o in &state.occupied {
        let w = o.weight();
        let kin = kinetic_energy(&o.u, o.l, grid);
        let pot = potential_expectation(&o.u, &state.potential);
        e_kin += w * kin;
        trace_v += w * pot;
        let thermal = match spec {
            Some(spec) if t > 0.0 => t * spec.beta_prime_at(o.lambda),
            _ => 0.0,
        };
        multiplier += w * (kin - pot + thermal);
    }
    let e_pot = potential_energy(&state.density, &state.potential).expect("state fields share a grid");
    let tb = if t > 0.0 { trace_beta(&state.occupied, spec) } else { 0.0 };
    FreeEnergyBreakdown {
        e_kin,
        e_pot,
        trace_beta: tb,
        temperature: t,
        total: e_kin - e_pot + t * tb,
        virial_ratio: trace_v / e_kin,
        multiplier_residual: (state.mu * state.mass - multiplier).abs(),
    }
}

/// Gaussian of the configured width carrying mass `mass`.
pub fn seed_density(mass: f64, config: &ScfConfig) -> RadialField {
    let SeedDensity::Gaussian { width_fraction } = config.seed;
    let w = width_fraction * config.grid.r_max();
    let n = RadialField::from_fn(config.grid, |r| (-(r * r) / (w * w)).exp());
    normalized(&n, mass)
}

fn normalized(n: &RadialField, mass: f64) -> RadialField {
    let total = integrate_volume(n);
    n.scaled(mass / total)
}

/// `\int_{|x| > R} n dx`, interpolating the cumulative mass linearly between
/// nodes.
pub fn tail_mass(state: &MixedState, radius: f64) -> f64 {
    tail_mass_of(&state.density, radius)
}

pub fn tail_mass_of(density: &RadialField, radius: f64) -> f64 {
    let grid = density.grid();
    let h = grid.spacing();
    let cumulative = cumulative_integral(h, &volume_samples(grid, density.values()));
    let total = *cumulative.last().unwrap();
    let x = (radius / h).clamp(0.0, (cumulative.len() - 1) as f64);
    let k = (x.floor() as usize).min(cumulative.len() - 2);
    let frac = x - k as f64;
    let inner = cumulative[k] + frac * (cumulative[k + 1] - cumulative[k]);
    (4.0 * PI * (total - inner)).max(0.0)
}

/// Result of one sweep: the unmixed output state and the next input density.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: MixedState,
    pub next_density: RadialField,
    pub(crate) generating_potential: Potential,
}

/// One sweep starting from `state.density`, mixing with `config.mixing`.
pub fn scf_step(state: &MixedState, config: &ScfConfig) -> Result<StepOutcome> {
    scf_step_from_density(
        &state.density,
        state.mass,
        state.temperature,
        state.entropy.as_ref(),
        config,
        config.mixing,
    )
}

/// One sweep from an arbitrary input density. `temperature == 0` puts the
/// whole mass on the lowest level; otherwise `spec` is required.
pub fn scf_step_from_density(
    input: &RadialField,
    mass: f64,
    temperature: f64,
    spec: Option<&EntropySpec>,
    config: &ScfConfig,
    alpha: f64,
) -> Result<StepOutcome> {
    if input.grid() != &config.grid {
        return Err(Error::GridMismatch);
    }
    let v = potential_from_density(input)?;
    let (levels, bound_counts) = bound_levels(&v, config.l_max, config.k_per_channel);
    let (mu, selected) = occupy(&levels, mass, temperature, spec)?;
    let chosen: Vec<Level> = selected.iter().map(|(lv, _)| *lv).collect();
    let vectors = eigenfunctions(&v, &chosen)?;
    let occupied = vectors
        .into_iter()
        .map(|e| {
            let lambda = selected
                .iter()
                .find(|(lv, _)| lv.l == e.l && lv.n == e.n)
                .map(|(_, lam)| *lam)
                .expect("every eigenfunction was requested");
            OccupiedLevel {
                l: e.l,
                n: e.n,
                value: e.value,
                lambda,
                u: e.u,
            }
        })
        .collect();
    let state = MixedState::assemble(
        config.grid,
        mass,
        temperature,
        spec.cloned(),
        mu,
        occupied,
        levels,
        bound_counts,
    )?;
    let next_density = normalized(&input.mixed(&state.density, alpha)?, mass);
    Ok(StepOutcome {
        state,
        next_density,
        generating_potential: v,
    })
}

fn occupy(levels: &[Level], mass: f64, temperature: f64, spec: Option<&EntropySpec>) -> Result<(f64, Vec<(Level, f64)>)> {
    if temperature == 0.0 {
        let ground = levels.iter().find(|lv| lv.l == 0).ok_or(Error::EmptySpectrum)?;
        return Ok((ground.value, vec![(*ground, mass)]));
    }
    let spec = spec.ok_or_else(|| Error::InvalidArgument("positive temperature needs an entropy".into()))?;
    let occ = solve_chemical_potential(levels, mass, temperature, spec)?;
    let selected = occ.occupied().collect();
    Ok((occ.mu, selected))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilationReport {
    /// `E_pot / (2 E_kin)`, the optimal mass-preserving dilation.
    pub optimal_scale: f64,
    /// `F(rho) - F(rho_s)` at the optimal scale; nonnegative.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalityReport {
    /// Smallest `F((1-t) rho + t sigma) - F(rho)` over all trials.
    pub worst_change: f64,
    pub tolerance: f64,
    pub trials: usize,
}

impl MinimalityReport {
    pub fn passed(&self) -> bool {
        self.worst_change >= -self.tolerance
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// `\int |n_out - n_in| dx` at the last sweep.
    pub density_residual: f64,
    pub energy_change: f64,
    pub final_mixing: f64,
    pub free_energy_history: Vec<f64>,
    /// Free-energy increases after the last change of the mixing weight.
    pub late_energy_increases: usize,
    pub tail_mass_half: f64,
    /// Largest occupation sitting on a level at the edge of the retained
    /// spectrum (highest kept level of a truncated channel, or channel
    /// `l_max`).
    pub truncation_leak: f64,
    pub dilation: Option<DilationReport>,
    /// `E_pot / (M^{3/2} E_kin^{1/2})`.
    pub hls_ratio: f64,
    pub minimality: Option<MinimalityReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub state: MixedState,
    pub breakdown: FreeEnergyBreakdown,
    pub iterations: usize,
    pub converged: bool,
    pub rank: usize,
    pub diagnostics: Diagnostics,
}

impl SolveResult {
    pub fn free_energy(&self) -> f64 {
        self.breakdown.total
    }
}

pub fn scf_solve(mass: f64, temperature: f64, spec: &EntropySpec, config: &ScfConfig) -> Result<SolveResult> {
    scf_solve_from(mass, temperature, spec, config, None)
}

/// As [`scf_solve`], starting from `initial` (rescaled to mass `M`) instead of
/// the configured seed.
pub fn scf_solve_from(
    mass: f64,
    temperature: f64,
    spec: &EntropySpec,
    config: &ScfConfig,
    initial: Option<&RadialField>,
) -> Result<SolveResult> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::InvalidTemperature(temperature));
    }
    run(mass, temperature, Some(spec), config, initial)
}

pub fn zero_temperature_solve(mass: f64, config: &ScfConfig) -> Result<SolveResult> {
    zero_temperature_solve_from(mass, config, None)
}

pub fn zero_temperature_solve_from(mass: f64, config: &ScfConfig, initial: Option<&RadialField>) -> Result<SolveResult> {
    run(mass, 0.0, None, config, initial)
}

fn run(
    mass: f64,
    temperature: f64,
    spec: Option<&EntropySpec>,
    config: &ScfConfig,
    initial: Option<&RadialField>,
) -> Result<SolveResult> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::InvalidMass(mass));
    }
    config.validate()?;
    let mut input = match initial {
        Some(n) => {
            if n.grid() != &config.grid {
                return Err(Error::GridMismatch);
            }
            if !(integrate_volume(n) > 0.0) {
                return Err(Error::InvalidArgument("initial density carries no mass".into()));
            }
            normalized(n, mass)
        }
        None => seed_density(mass, config),
    };
    let tol_density = config.tol_density * mass;
    let mut anderson = Anderson::new(&config.grid, config.anderson_depth);
    let mut alpha = config.mixing;
    let mut history = Vec::new();
    let mut rising = 0;
    let mut late_increases = 0;
    let mut last: Option<(StepOutcome, f64, f64)> = None;
    for iteration in 1..=config.max_iterations {
        let outcome = scf_step_from_density(&input, mass, temperature, spec, config, alpha)?;
        let f = free_energy(&outcome.state).total;
        let residual = field_distance_l1(&outcome.state.density, &input)?;
        let change = history.last().map_or(f64::INFINITY, |prev: &f64| (f - prev).abs());
        if let Some(&prev) = history.last() {
            if f - prev > config.energy_tolerance(f) {
                rising += 1;
                late_increases += 1;
                if rising >= 2 && alpha > MIXING_FLOOR {
                    alpha = (0.5 * alpha).max(MIXING_FLOOR);
                    rising = 0;
                    late_increases = 0;
                    anderson.reset();
                }
            } else {
                rising = 0;
            }
        }
        history.push(f);
        if residual <= tol_density && change <= config.energy_tolerance(f) {
            let diagnostics = Diagnostics {
                density_residual: residual,
                energy_change: change,
                final_mixing: alpha,
                free_energy_history: history,
                late_energy_increases: late_increases,
                ..Diagnostics::default()
            };
            return finalize(outcome, iteration, true, diagnostics, config);
        }
        input = if config.anderson_depth == 0 {
            outcome.next_density.clone()
        } else {
            anderson.next(&input, &outcome.state.density, alpha, mass)
        };
        last = Some((outcome, residual, change));
    }
    let (outcome, residual, change) = last.expect("at least one iteration ran");
    let diagnostics = Diagnostics {
        density_residual: residual,
        energy_change: change,
        final_mixing: alpha,
        free_energy_history: history,
        late_energy_increases: late_increases,
        ..Diagnostics::default()
    };
    let partial = finalize(outcome, config.max_iterations, false, diagnostics, config)?;
    Err(Error::NotConverged(Box::new(partial)))
}

/// Anderson (type II) extrapolation of the fixed-point map `n -> n_out`
/// with the volume-weighted inner product.
struct Anderson {
    depth: usize,
    weights: Vec<f64>,
    inputs: VecDeque<Vec<f64>>,
    residuals: VecDeque<Vec<f64>>,
}

impl Anderson {
    fn new(grid: &RadialGrid, depth: usize) -> Self {
        Self {
            depth,
            weights: grid.nodes().iter().map(|r| r * r).collect(),
            inputs: VecDeque::new(),
            residuals: VecDeque::new(),
        }
    }

    fn reset(&mut self) {
        self.inputs.clear();
        self.residuals.clear();
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
    }

    fn next(&mut self, input: &RadialField, output: &RadialField, alpha: f64, mass: f64) -> RadialField {
        let x: Vec<f64> = input.values().to_vec();
        let f: Vec<f64> = output.values().iter().zip(&x).map(|(o, i)| o - i).collect();
        self.inputs.push_back(x);
        self.residuals.push_back(f);
        if self.inputs.len() > self.depth + 1 {
            self.inputs.pop_front();
            self.residuals.pop_front();
        }
        let k = self.inputs.len() - 1;
        let (xk, fk) = (&self.inputs[k], &self.residuals[k]);
        let dx: Vec<Vec<f64>> = (0..k).map(|j| sub(xk, &self.inputs[j])).collect();
        let df: Vec<Vec<f64>> = (0..k).map(|j| sub(fk, &self.residuals[j])).collect();
        let mut a = vec![vec![0.0; k]; k];
        let mut b = vec![0.0; k];
        for i in 0..k {
            for j in 0..=i {
                a[i][j] = self.dot(&df[i], &df[j]);
                a[j][i] = a[i][j];
            }
            b[i] = self.dot(&df[i], fk);
        }
        let trace: f64 = (0..k).map(|i| a[i][i]).sum();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += 1e-12 * trace;
        }
        let gamma = solve_dense(a, b).unwrap_or_else(|| vec![0.0; k]);
        let mut next: Vec<f64> = xk.iter().zip(fk).map(|(x, f)| x + alpha * f).collect();
        for (j, g) in gamma.iter().enumerate() {
            for (i, v) in next.iter_mut().enumerate() {
                *v -= g * (dx[j][i] + alpha * df[j][i]);
            }
        }
        for v in &mut next {
            *v = v.max(0.0);
        }
        let field = RadialField::new(*input.grid(), next).expect("same grid");
        if integrate_volume(&field) > 0.0 {
            normalized(&field, mass)
        } else {
            normalized(output, mass)
        }
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[pivot][col].abs() > 0.0) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn finalize(
    outcome: StepOutcome,
    iterations: usize,
    converged: bool,
    mut diagnostics: Diagnostics,
    config: &ScfConfig,
) -> Result<SolveResult> {
    let state = outcome.state;
    let breakdown = free_energy(&state);
    let mass = state.mass;

    diagnostics.tail_mass_half = tail_mass(&state, 0.5 * state.grid.r_max());
    diagnostics.truncation_leak = truncation_leak(&state, config);
    if diagnostics.truncation_leak > TRUNCATION_WARNING * mass {
        diagnostics.warnings.push(format!(
            "occupation {:e} on the edge of the retained spectrum; raise l_max or k_per_channel",
            diagnostics.truncation_leak
        ));
    }
    diagnostics.hls_ratio = breakdown.e_pot / (mass.powf(1.5) * breakdown.e_kin.sqrt());
    diagnostics.dilation = Some(dilation_probe(&state, &breakdown)?);
    if config.minimality_probe {
        diagnostics.minimality = Some(minimality_probe(&state, &outcome.generating_potential, config)?);
    }
    if let Some(d) = &diagnostics.dilation {
        if d.gain > config.energy_tolerance(breakdown.total) {
            diagnostics.warnings.push(format!(
                "dilation by {} lowers F by {:e}",
                d.optimal_scale, d.gain
            ));
        }
    }
    if let Some(m) = &diagnostics.minimality {
        if !m.passed() {
            diagnostics.warnings.push(format!(
                "a mass-preserving trial direction lowers F by {:e}",
                -m.worst_change
            ));
        }
    }
    let rank = state.rank();
    Ok(SolveResult {
        state,
        breakdown,
        iterations,
        converged,
        rank,
        diagnostics,
    })
}

fn truncation_leak(state: &MixedState, config: &ScfConfig) -> f64 {
    state
        .occupied
        .iter()
        .filter(|o| {
            let kept = state.levels.iter().filter(|lv| lv.l == o.l).count();
            let truncated = state.bound_counts.get(o.l).copied().unwrap_or(0) > kept;
            o.l == config.l_max || (truncated && o.n + 1 == kept)
        })
        .map(|o| o.lambda)
        .fold(0.0, f64::max)
}

/// Mass-preserving dilation to the virial-optimal scale, evaluated exactly on
/// the contracted grid.
pub fn dilation_probe(state: &MixedState, breakdown: &FreeEnergyBreakdown) -> Result<DilationReport> {
    let s = breakdown.e_pot / (2.0 * breakdown.e_kin);
    let dilated = state.rescaled(s, 1.0, state.temperature)?;
    let f = free_energy(&dilated).total;
    Ok(DilationReport {
        optimal_scale: s,
        gain: breakdown.total - f,
    })
}

/// Compares `F(rho)` with `F((1-t) rho + t sigma)` for random shell-uniform
/// trial states `sigma` of mass `M` that are diagonal in the eigenbasis of
/// the Hamiltonian generating `rho`.
fn minimality_probe(state: &MixedState, generating: &Potential, config: &ScfConfig) -> Result<MinimalityReport> {
    let basis = eigenfunctions(generating, &state.levels)?;
    let base: Vec<OccupiedLevel> = basis
        .iter()
        .map(|e| OccupiedLevel {
            l: e.l,
            n: e.n,
            value: e.value,
            lambda: state
                .occupied
                .iter()
                .find(|o| o.l == e.l && o.n == e.n)
                .map_or(0.0, |o| o.lambda),
            u: e.u.clone(),
        })
        .collect();
    let evaluate = |occupied: Vec<OccupiedLevel>| -> Result<f64> {
        let s = MixedState::assemble(
            state.grid,
            state.mass,
            state.temperature,
            state.entropy.clone(),
            state.mu,
            occupied,
            Vec::new(),
            Vec::new(),
        )?;
        Ok(free_energy(&s).total)
    };
    let f0 = evaluate(base.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.probe_seed);
    let mut worst = f64::INFINITY;
    for _ in 0..PROBE_TRIALS {
        let mut trial: Vec<f64> = base.iter().map(|_| rng.gen::<f64>()).collect();
        let weight: f64 = base
            .iter()
            .zip(&trial)
            .map(|(o, x)| o.degeneracy() as f64 * x)
            .sum();
        trial.iter_mut().for_each(|x| *x *= state.mass / weight);
        for &t in &PROBE_STEPS {
            let mixed = base
                .iter()
                .zip(&trial)
                .map(|(o, x)| OccupiedLevel {
                    lambda: (1.0 - t) * o.lambda + t * x,
                    ..o.clone()
                })
                .collect();
            worst = worst.min(evaluate(mixed)? - f0);
        }
    }
    Ok(MinimalityReport {
        worst_change: worst,
        tolerance: config.energy_tolerance(f0),
        trials: PROBE_TRIALS,
    })
}
