//! Run configuration (`key = value` text with `#` comments) and result
//! serialization: solve records as JSON, temperature scans as CSV.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::entropy::EntropySpec;
use crate::error::{Error as SolverError, Result as SolverResult};
use crate::grid::RadialGrid;
use crate::phase::ScanResult;
use crate::scf::{ScfConfig, SeedDensity, SolveResult, ANSATZ_NOTE};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    SolveZero,
    Scan,
    FindTc,
    FindTstar,
    Verify,
    Oracle,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Solve,
        Command::SolveZero,
        Command::Scan,
        Command::FindTc,
        Command::FindTstar,
        Command::Verify,
        Command::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::SolveZero => "solve-zero",
            Command::Scan => "scan",
            Command::FindTc => "find-tc",
            Command::FindTstar => "find-tstar",
            Command::Verify => "verify",
            Command::Oracle => "oracle",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// `power:<p>` or `custom:<path>`. A custom file lists one
/// `exponent coefficient` pair per line and defines
/// `beta(s) = sum coefficient * s^exponent`.
#[derive(Debug, Clone, PartialEq)]
pub enum EntropyChoice {
    Power(f64),
    Custom(PathBuf),
}

impl EntropyChoice {
    pub fn to_spec(&self) -> SolverResult<EntropySpec> {
        match self {
            EntropyChoice::Power(p) => EntropySpec::power(*p),
            EntropyChoice::Custom(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    SolverError::InvalidEntropy(format!("cannot read {}: {e}", path.display()))
                })?;
                let terms = parse_power_sum(&text)?;
                EntropySpec::power_sum(self.to_string(), terms)
            }
        }
    }
}

impl std::fmt::Display for EntropyChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EntropyChoice::Power(p) => write!(f, "power:{p:?}"),
            EntropyChoice::Custom(path) => write!(f, "custom:{}", path.display()),
        }
    }
}

impl FromStr for EntropyChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(p) = s.strip_prefix("power:") {
            let p: f64 = p.trim().parse().map_err(|_| format!("`{p}` is not a number"))?;
            if !(p.is_finite() && p > 1.0) {
                return Err(format!("power-law exponent must exceed 1, got {p}"));
            }
            Ok(EntropyChoice::Power(p))
        } else if let Some(path) = s.strip_prefix("custom:") {
            if path.trim().is_empty() {
                return Err("custom entropy needs a file path".into());
            }
            Ok(EntropyChoice::Custom(PathBuf::from(path.trim())))
        } else {
            Err(format!("expected `power:<p>` or `custom:<path>`, got `{s}`"))
        }
    }
}

/// Lines of `exponent coefficient`, `#` comments allowed.
pub fn parse_power_sum(text: &str) -> SolverResult<Vec<(f64, f64)>> {
    let mut terms = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed: Vec<f64> = fields.iter().filter_map(|f| f.parse().ok()).collect();
        if fields.len() != 2 || parsed.len() != 2 {
            return Err(SolverError::InvalidEntropy(format!(
                "line {}: expected `exponent coefficient`",
                i + 1
            )));
        }
        terms.push((parsed[0], parsed[1]));
    }
    Ok(terms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub mass: f64,
    pub temperature: Option<f64>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub points: usize,
    pub entropy: EntropyChoice,
    pub r_max: f64,
    pub n_points: usize,
    pub mixing: f64,
    pub max_iterations: usize,
    pub tol_density: f64,
    pub tol_energy: f64,
    pub l_max: usize,
    pub k_per_channel: usize,
    pub seed_width: f64,
    pub seed: u64,
    pub parallel: usize,
    pub out: Option<PathBuf>,
    pub reference: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scf = ScfConfig::default();
        let SeedDensity::Gaussian { width_fraction } = scf.seed;
        Self {
            command: Command::Solve,
            mass: 1.0,
            temperature: None,
            t_min: None,
            t_max: None,
            points: 20,
            entropy: EntropyChoice::Power(2.0),
            r_max: scf.grid.r_max(),
            n_points: scf.grid.n_points(),
            mixing: scf.mixing,
            max_iterations: scf.max_iterations,
            tol_density: scf.tol_density,
            tol_energy: scf.tol_energy_rel,
            l_max: scf.l_max,
            k_per_channel: scf.k_per_channel,
            seed_width: width_fraction,
            seed: scf.probe_seed,
            parallel: 1,
            out: None,
            reference: None,
        }
    }
}

pub const CONFIG_KEYS: [&str; 20] = [
    "command",
    "mass",
    "temperature",
    "t_min",
    "t_max",
    "points",
    "entropy",
    "r_max",
    "n_points",
    "mixing",
    "max_iterations",
    "tol_density",
    "tol_energy",
    "l_max",
    "k_per_channel",
    "seed_width",
    "seed",
    "parallel",
    "out",
    "reference",
];

fn number<T: FromStr>(field: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| invalid(field, format!("`{value}` is not a valid number")))
}

fn positive(field: &str, value: &str) -> Result<f64, ConfigError> {
    let x: f64 = number(field, value)?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(invalid(field, format!("must be positive, got {value}")))
    }
}

impl RunConfig {
    /// Sets one field from its textual value (shared by files and flags).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "command" => self.command = value.parse().map_err(|e: String| invalid(key, e))?,
            "mass" => self.mass = positive(key, value)?,
            "temperature" => self.temperature = Some(positive(key, value)?),
            "t_min" => self.t_min = Some(positive(key, value)?),
            "t_max" => self.t_max = Some(positive(key, value)?),
            "points" => {
                self.points = number(key, value)?;
                if self.points == 0 {
                    return Err(invalid(key, "need at least one point"));
                }
            }
            "entropy" => self.entropy = value.parse().map_err(|e: String| invalid(key, e))?,
            "r_max" => self.r_max = positive(key, value)?,
            "n_points" => {
                self.n_points = number(key, value)?;
                if self.n_points < RadialGrid::MIN_POINTS {
                    return Err(invalid(key, format!("need at least {} nodes", RadialGrid::MIN_POINTS)));
                }
            }
            "mixing" => {
                let a = positive(key, value)?;
                if a > 1.0 {
                    return Err(invalid(key, "must lie in (0, 1]"));
                }
                self.mixing = a;
            }
            "max_iterations" => {
                self.max_iterations = number(key, value)?;
                if self.max_iterations == 0 {
                    return Err(invalid(key, "must be positive"));
                }
            }
            "tol_density" => self.tol_density = positive(key, value)?,
            "tol_energy" => self.tol_energy = positive(key, value)?,
            "l_max" => self.l_max = number(key, value)?,
            "k_per_channel" => {
                self.k_per_channel = number(key, value)?;
                if self.k_per_channel == 0 {
                    return Err(invalid(key, "must be positive"));
                }
            }
            "seed_width" => self.seed_width = positive(key, value)?,
            "seed" => self.seed = number(key, value)?,
            "parallel" => {
                self.parallel = number(key, value)?;
                if self.parallel == 0 {
                    return Err(invalid(key, "must be positive"));
                }
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "reference" => self.reference = Some(PathBuf::from(value)),
            _ => return Err(invalid(key, "unknown key")),
        }
        Ok(())
    }

    /// Checks relations between fields.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let (Some(a), Some(b)) = (self.t_min, self.t_max) {
            if b < a {
                return Err(invalid("t_max", "must not be below t_min"));
            }
        }
        if self.points == 1 {
            if let (Some(a), Some(b)) = (self.t_min, self.t_max) {
                if a != b {
                    return Err(invalid("points", "a range needs at least two points"));
                }
            }
        }
        match self.command {
            Command::Solve if self.temperature.is_none() => {
                Err(invalid("temperature", "required by `solve` (use `solve-zero` for T = 0)"))
            }
            Command::Scan if self.t_min.is_none() || self.t_max.is_none() => {
                Err(invalid("t_min", "`scan` needs t_min and t_max"))
            }
            _ => Ok(()),
        }
    }

    pub fn grid(&self) -> SolverResult<RadialGrid> {
        RadialGrid::new(self.r_max, self.n_points)
    }

    pub fn scf_config(&self) -> SolverResult<ScfConfig> {
        let mut c = ScfConfig::new(self.grid()?);
        c.mixing = self.mixing;
        c.max_iterations = self.max_iterations;
        c.tol_density = self.tol_density;
        c.tol_energy_rel = self.tol_energy;
        c.l_max = self.l_max;
        c.k_per_channel = self.k_per_channel;
        c.seed = SeedDensity::Gaussian {
            width_fraction: self.seed_width,
        };
        c.probe_seed = self.seed;
        Ok(c)
    }

    /// Scan temperatures: `points` values evenly spaced on `[t_min, t_max]`.
    pub fn temperatures(&self) -> Vec<f64> {
        match (self.t_min, self.t_max) {
            (Some(a), Some(b)) if self.points > 1 => (0..self.points)
                .map(|k| a + (b - a) * k as f64 / (self.points - 1) as f64)
                .collect(),
            (Some(a), _) => vec![a],
            _ => Vec::new(),
        }
    }
}

/// Parses a configuration document on top of the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    apply_config_text(&mut config, text)?;
    config.validate()?;
    Ok(config)
}

/// Applies the `key = value` lines of `text` to `config` without the final
/// cross-field validation.
pub fn apply_config_text(config: &mut RunConfig, text: &str) -> Result<(), ConfigError> {
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: i + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Parse {
                line: i + 1,
                message: "empty key or value".into(),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::Parse {
                line: i + 1,
                message: format!("duplicate key `{key}`"),
            });
        }
        config.set(key, value)?;
    }
    Ok(())
}

/// Serializes every field so that `parse_config` reproduces `config`.
pub fn to_config_text(config: &RunConfig) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    line("command", config.command.name().into());
    line("mass", format!("{:?}", config.mass));
    if let Some(t) = config.temperature {
        line("temperature", format!("{t:?}"));
    }
    if let Some(t) = config.t_min {
        line("t_min", format!("{t:?}"));
    }
    if let Some(t) = config.t_max {
        line("t_max", format!("{t:?}"));
    }
    line("points", config.points.to_string());
    line("entropy", config.entropy.to_string());
    line("r_max", format!("{:?}", config.r_max));
    line("n_points", config.n_points.to_string());
    line("mixing", format!("{:?}", config.mixing));
    line("max_iterations", config.max_iterations.to_string());
    line("tol_density", format!("{:?}", config.tol_density));
    line("tol_energy", format!("{:?}", config.tol_energy));
    line("l_max", config.l_max.to_string());
    line("k_per_channel", config.k_per_channel.to_string());
    line("seed_width", format!("{:?}", config.seed_width));
    line("seed", config.seed.to_string());
    line("parallel", config.parallel.to_string());
    if let Some(p) = &config.out {
        line("out", p.display().to_string());
    }
    if let Some(p) = &config.reference {
        line("reference", p.display().to_string());
    }
    s
}

/// Writes every float with 17 significant digits.
struct SignificantDigits;

impl serde_json::ser::Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Pretty JSON with 17-significant-digit floats; non-finite floats become
/// `null`.
pub fn to_json<T: Serialize>(value: &T) -> io::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SignificantDigits);
    value.serialize(&mut ser).map_err(io::Error::other)?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(io::Error::other)
}

#[derive(Debug, Serialize)]
struct GridRecord {
    r_max: f64,
    n_points: usize,
}

#[derive(Debug, Serialize)]
struct OccupationRecord {
    l: usize,
    n: usize,
    eigenvalue: f64,
    lambda: f64,
    degeneracy: usize,
}

#[derive(Debug, Serialize)]
struct DiagnosticsRecord<'a> {
    density_residual: f64,
    energy_change: f64,
    multiplier_residual: f64,
    final_mixing: f64,
    late_energy_increases: usize,
    tail_mass_half_radius: f64,
    truncation_leak: f64,
    dilation_scale: Option<f64>,
    dilation_gain: Option<f64>,
    hls_ratio: f64,
    minimality_worst_change: Option<f64>,
    minimality_passed: Option<bool>,
    lowest_eigenvalues: Vec<f64>,
    warnings: &'a [String],
}

#[derive(Debug, Serialize)]
struct SolveRecord<'a> {
    mass: f64,
    temperature: f64,
    entropy: Option<String>,
    free_energy: f64,
    e_kin: f64,
    e_pot: f64,
    /// `tr beta(rho)`; the entropy is its negative.
    entropy_term: f64,
    mu: f64,
    virial_ratio: f64,
    rank: usize,
    converged: bool,
    iterations: usize,
    grid: GridRecord,
    occupations: Vec<OccupationRecord>,
    diagnostics: DiagnosticsRecord<'a>,
    note: &'static str,
}

pub fn solve_json(result: &SolveResult) -> io::Result<String> {
    let s = &result.state;
    let b = &result.breakdown;
    let d = &result.diagnostics;
    let record = SolveRecord {
        mass: s.mass,
        temperature: s.temperature,
        entropy: s.entropy.as_ref().map(EntropySpec::label),
        free_energy: b.total,
        e_kin: b.e_kin,
        e_pot: b.e_pot,
        entropy_term: b.trace_beta,
        mu: s.mu,
        virial_ratio: b.virial_ratio,
        rank: result.rank,
        converged: result.converged,
        iterations: result.iterations,
        grid: GridRecord {
            r_max: s.grid.r_max(),
            n_points: s.grid.n_points(),
        },
        occupations: s
            .occupied
            .iter()
            .map(|o| OccupationRecord {
                l: o.l,
                n: o.n,
                eigenvalue: o.value,
                lambda: o.lambda,
                degeneracy: o.degeneracy(),
            })
            .collect(),
        diagnostics: DiagnosticsRecord {
            density_residual: d.density_residual,
            energy_change: d.energy_change,
            multiplier_residual: b.multiplier_residual,
            final_mixing: d.final_mixing,
            late_energy_increases: d.late_energy_increases,
            tail_mass_half_radius: d.tail_mass_half,
            truncation_leak: d.truncation_leak,
            dilation_scale: d.dilation.map(|x| x.optimal_scale),
            dilation_gain: d.dilation.map(|x| x.gain),
            hls_ratio: d.hls_ratio,
            minimality_worst_change: d.minimality.as_ref().map(|m| m.worst_change),
            minimality_passed: d.minimality.as_ref().map(|m| m.passed()),
            lowest_eigenvalues: s.lowest_eigenvalues(),
            warnings: &d.warnings,
        },
        note: ANSATZ_NOTE,
    };
    to_json(&record)
}

pub fn write_solve_json(result: &SolveResult, path: &Path) -> io::Result<()> {
    fs::write(path, solve_json(result)?)
}

fn csv_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "nan".into()
    }
}

fn summary_value(x: Option<f64>) -> String {
    x.map_or_else(|| "none".into(), csv_number)
}

pub const SCAN_HEADER: &str = "T,free_energy,e_kin,e_pot,entropy_term,mu,rank,lambda2,converged";

pub fn scan_csv(scan: &ScanResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{SCAN_HEADER}");
    for r in &scan.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            csv_number(r.temperature),
            csv_number(r.free_energy),
            csv_number(r.e_kin),
            csv_number(r.e_pot),
            csv_number(r.trace_beta),
            csv_number(r.mu),
            r.rank,
            csv_number(r.lambda2),
            r.converged
        );
    }
    let _ = writeln!(s, "# t_c_scan={}", summary_value(scan.t_c_scan));
    let _ = writeln!(s, "# t_c_formula={}", summary_value(scan.t_c_formula));
    let _ = writeln!(s, "# t_star={}", summary_value(scan.t_star));
    s
}

pub fn write_scan_csv(scan: &ScanResult, path: &Path) -> io::Result<()> {
    if scan.records.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "scan has no records"));
    }
    fs::write(path, scan_csv(scan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::ScanRecord;
    use proptest::prelude::*;

    #[test]
    fn minimal_document() {
        let c = parse_config("mass = 1.0\ntemperature = 0.02\nentropy = power:2").unwrap();
        assert_eq!(c.command, Command::Solve);
        assert_eq!(c.mass, 1.0);
        assert_eq!(c.temperature, Some(0.02));
        assert_eq!(c.entropy, EntropyChoice::Power(2.0));
        assert_eq!(c.r_max, RunConfig::default().r_max);
    }

    #[test]
    fn validation_names_the_field() {
        let e = parse_config("mass = -1").unwrap_err();
        assert!(matches!(&e, ConfigError::Validation { field, .. } if field == "mass"), "{e}");
        let e = parse_config("temperature = 0.1\nentropy = power:1.0").unwrap_err();
        assert!(matches!(&e, ConfigError::Validation { field, .. } if field == "entropy"), "{e}");
        let e = parse_config("command = solve").unwrap_err();
        assert!(matches!(&e, ConfigError::Validation { field, .. } if field == "temperature"));
        let e = parse_config("bogus = 3").unwrap_err();
        assert!(matches!(&e, ConfigError::Validation { field, .. } if field == "bogus"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = parse_config("# comment\n\nmass 1.0\n").unwrap_err();
        assert_eq!(
            e,
            ConfigError::Parse {
                line: 3,
                message: "expected `key = value`, got `mass 1.0`".into()
            }
        );
        let e = parse_config("mass = 1\nmass = 2\n").unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 2, .. }));
    }

    #[test]
    fn comments_and_custom_entropy() {
        let c = parse_config("command = solve-zero # trailing\nentropy = custom:/tmp/b.txt\n").unwrap();
        assert_eq!(c.command, Command::SolveZero);
        assert_eq!(c.entropy, EntropyChoice::Custom("/tmp/b.txt".into()));
        assert_eq!(parse_power_sum("2 1\n# c\n3 0.5\n").unwrap(), vec![(2.0, 1.0), (3.0, 0.5)]);
        assert!(parse_power_sum("2\n").is_err());
    }

    #[test]
    fn scan_csv_layout() {
        let rec = |t: f64, rank: usize, converged: bool| ScanRecord {
            temperature: t,
            free_energy: -0.01,
            e_kin: 0.02,
            e_pot: 0.04,
            trace_beta: 1.0,
            mu: -0.05,
            rank,
            lambda2: 0.0,
            converged,
            mass_not_attainable: false,
            failure: None,
        };
        let scan = ScanResult {
            mass: 1.0,
            entropy: "power:2".into(),
            records: vec![rec(0.01, 1, true), rec(0.02, 1, false), rec(0.03, 4, true)],
            t_c_formula: Some(0.0169),
            ..ScanResult::default()
        };
        let text = scan_csv(&scan);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SCAN_HEADER);
        assert_eq!(lines.iter().filter(|l| !l.starts_with('#')).count(), 4);
        assert!(lines[2].ends_with(",false"));
        assert_eq!(lines[4], "# t_c_scan=none");
        let tc: f64 = lines[5].strip_prefix("# t_c_formula=").unwrap().parse().unwrap();
        assert_eq!(tc, 0.0169);
        assert_eq!(lines[6], "# t_star=none");
    }

    #[test]
    fn json_uses_seventeen_digits() {
        let s = to_json(&vec![0.1f64, -2.5, f64::NAN]).unwrap();
        assert_eq!(s, "[1.0000000000000001e-1,-2.5000000000000000e0,null]\n");
        let back: Vec<Option<f64>> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![Some(0.1), Some(-2.5), None]);
    }

    fn config_strategy() -> impl Strategy<Value = RunConfig> {
        (
            prop::sample::select(Command::ALL.to_vec()),
            1e-3f64..1e3,
            prop::option::of(1e-6f64..10.0),
            (1e-6f64..1.0, 0.0f64..1.0),
            2usize..200,
            prop_oneof![(1.0001f64..6.0).prop_map(EntropyChoice::Power), Just(EntropyChoice::Custom("beta.txt".into()))],
            (1.0f64..500.0, 16usize..20_000),
            (1e-3f64..=1.0, 1usize..5000, 1e-14f64..1e-2, 1e-14f64..1e-2),
            (0usize..20, 1usize..40, 1e-3f64..1.0, any::<u64>(), 1usize..16),
            prop::option::of("[a-z]{1,8}\\.json"),
        )
            .prop_map(|(command, mass, temperature, (t_min, span), points, entropy, grid, scf, misc, out)| {
                let mut c = RunConfig {
                    command,
                    mass,
                    temperature,
                    t_min: Some(t_min),
                    t_max: Some(t_min + span + 1e-9),
                    points,
                    entropy,
                    r_max: grid.0,
                    n_points: grid.1,
                    mixing: scf.0,
                    max_iterations: scf.1,
                    tol_density: scf.2,
                    tol_energy: scf.3,
                    l_max: misc.0,
                    k_per_channel: misc.1,
                    seed_width: misc.2,
                    seed: misc.3,
                    parallel: misc.4,
                    out: out.map(PathBuf::from),
                    reference: None,
                };
                if c.command == Command::Solve && c.temperature.is_none() {
                    c.temperature = Some(0.01);
                }
                c
            })
    }

    proptest! {
        #[test]
        fn config_round_trip(c in config_strategy()) {
            prop_assert_eq!(parse_config(&to_config_text(&c)).unwrap(), c);
        }
    }
}
