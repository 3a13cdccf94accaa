use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use thermal_hartree::entropy::EntropySpec;
use thermal_hartree::error::Error;
use thermal_hartree::io::{
    apply_config_text, scan_csv, solve_json, to_json, Command, ConfigError, RunConfig,
};
use thermal_hartree::oracle::{reference_values, ReferenceValues};
use thermal_hartree::phase::{
    critical_temperature_formula, find_critical_temperature, find_max_temperature, temperature_scan,
    ScanMode,
};
use thermal_hartree::scf::{free_energy, scf_solve, zero_temperature_solve, SolveResult};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_MASS: u8 = 4;

/// Finite-temperature ground states of the gravitational Hartree model.
#[derive(Debug, Parser)]
#[command(name = "thermal-hartree", version, allow_negative_numbers = true)]
struct Cli {
    /// One of: solve, solve-zero, scan, find-tc, find-tstar, verify, oracle.
    command: String,
    /// `key = value` configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mass: Option<String>,
    #[arg(long)]
    temperature: Option<String>,
    /// `power:<p>` or `custom:<path>`.
    #[arg(long)]
    entropy: Option<String>,
    #[arg(long = "r-max")]
    r_max: Option<String>,
    #[arg(long = "n-points")]
    n_points: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Worker threads for independent cold-start scan points.
    #[arg(long)]
    parallel: Option<String>,
}

enum Failure {
    Config(String),
    Solver(Error),
    Io(std::io::Error),
    Verification(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn solver_exit_code(e: &Error) -> u8 {
    match e {
        Error::MassNotAttainable { .. } => EXIT_MASS,
        Error::NotConverged(_) | Error::Stagnation(_) | Error::ConvergenceFailure { .. } | Error::NoRootFound { .. } => {
            EXIT_NOT_CONVERGED
        }
        Error::InvalidGrid(_)
        | Error::InvalidEntropy(_)
        | Error::InvalidTemperature(_)
        | Error::InvalidMass(_)
        | Error::InvalidArgument(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut config = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        apply_config_text(&mut config, &text)?;
    }
    config.set("command", &cli.command)?;
    let overrides = [
        ("mass", &cli.mass),
        ("temperature", &cli.temperature),
        ("entropy", &cli.entropy),
        ("r_max", &cli.r_max),
        ("n_points", &cli.n_points),
        ("out", &cli.out),
        ("parallel", &cli.parallel),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            config.set(key, v)?;
        }
    }
    config.validate()?;
    Ok(config)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn entropy_spec(config: &RunConfig) -> Result<EntropySpec, Failure> {
    config.entropy.to_spec().map_err(|e| Failure::Config(e.to_string()))
}

fn report_warnings(result: &SolveResult) {
    for w in &result.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
}

/// Writes the (possibly partial) solve record, then maps the outcome.
fn emit_solve(config: &RunConfig, outcome: Result<SolveResult, Error>) -> Result<(), Failure> {
    match outcome {
        Ok(result) => {
            report_warnings(&result);
            emit(config.out.as_deref(), &solve_json(&result)?)
        }
        Err(Error::NotConverged(partial)) => {
            report_warnings(&partial);
            emit(config.out.as_deref(), &solve_json(&partial)?)?;
            Err(Failure::Solver(Error::NotConverged(partial)))
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct CriticalRecord {
    mass: f64,
    entropy: String,
    t_c_scan: f64,
    t_c_formula: f64,
    relative_gap: f64,
    bracket: [f64; 2],
    mu0_0: f64,
    mu0_1: f64,
}

#[derive(Serialize)]
struct SampleRecord {
    temperature: f64,
    free_energy: Option<f64>,
}

#[derive(Serialize)]
struct MaxTemperatureRecord {
    mass: f64,
    entropy: String,
    t_star: Option<f64>,
    lower_bound: Option<f64>,
    t_c_formula: Option<f64>,
    finite: bool,
    samples: Vec<SampleRecord>,
}

#[derive(Serialize)]
struct CheckRecord {
    name: &'static str,
    value: f64,
    tolerance: f64,
    passed: bool,
}

#[derive(Serialize)]
struct VerifyRecord {
    reference: ReferenceValuesRecord,
    checks: Vec<CheckRecord>,
    passed: bool,
}

#[derive(Serialize)]
struct ReferenceValuesRecord {
    i_10: f64,
    mu0_0: f64,
    mu0_1: f64,
    r_max: f64,
    n_points: usize,
}

impl From<ReferenceValues> for ReferenceValuesRecord {
    fn from(r: ReferenceValues) -> Self {
        Self {
            i_10: r.i_10,
            mu0_0: r.mu0_0,
            mu0_1: r.mu0_1,
            r_max: r.r_max,
            n_points: r.n_points,
        }
    }
}

fn check(name: &'static str, value: f64, tolerance: f64) -> CheckRecord {
    CheckRecord {
        name,
        value,
        tolerance,
        passed: value.abs() <= tolerance,
    }
}

fn run_verify(config: &RunConfig) -> Result<(), Failure> {
    let scf = config.scf_config()?;
    let reference = match &config.reference {
        Some(path) => ReferenceValues::read(path)?,
        None => reference_values(&scf.grid)?,
    };
    let grid = reference.grid()?;
    let zero = zero_temperature_solve(1.0, &scf.with_grid(grid))?;
    let b = zero.breakdown;
    let ev = zero.state.lowest_eigenvalues();
    let mut checks = vec![
        check("i_10 relative difference", (b.total - reference.i_10) / reference.i_10, 1e-3),
        check("zero-temperature E_pot/E_kin - 2", b.e_pot / b.e_kin - 2.0, 1e-3),
        check("reference mu0_0/(3 i_10) - 1", reference.mu0_0 / (3.0 * reference.i_10) - 1.0, 1e-3),
        check("mu0_0 relative difference", (ev[0] - reference.mu0_0) / reference.mu0_0, 1e-3),
    ];
    if let Some(t) = config.temperature {
        let spec = entropy_spec(config)?;
        let r = scf_solve(config.mass, t, &spec, &scf)?;
        let br = free_energy(&r.state);
        checks.push(check("tr(V rho)/tr(-Lap rho) - 4", br.virial_ratio - 4.0, 5e-3));
        checks.push(check(
            "multiplier residual / |mu M|",
            br.multiplier_residual / (r.state.mu * config.mass).abs(),
            1e-6,
        ));
        if let Some(p) = spec.power_exponent() {
            let excess = (config.mass * r.state.mu - p * br.total).max(0.0);
            checks.push(check("M mu - p F (positive part)", excess, 0.0));
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    let record = VerifyRecord {
        reference: reference.into(),
        checks,
        passed,
    };
    emit(config.out.as_deref(), &to_json(&record)?)?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Verification("one or more checks failed".into()))
    }
}

fn run(config: &RunConfig) -> Result<(), Failure> {
    let out = config.out.as_deref();
    match config.command {
        Command::Solve => {
            let spec = entropy_spec(config)?;
            let t = config.temperature.expect("validated");
            emit_solve(config, scf_solve(config.mass, t, &spec, &config.scf_config()?))
        }
        Command::SolveZero => emit_solve(config, zero_temperature_solve(config.mass, &config.scf_config()?)),
        Command::Scan => {
            let spec = entropy_spec(config)?;
            let scf = config.scf_config()?;
            let mode = if config.parallel > 1 {
                ScanMode::Parallel {
                    workers: config.parallel,
                }
            } else {
                ScanMode::Warm
            };
            let mut scan = temperature_scan(config.mass, &spec, &config.temperatures(), &scf, mode)?;
            match zero_temperature_solve(config.mass, &scf) {
                Ok(zero) => scan.t_c_formula = critical_temperature_formula(config.mass, &spec, &zero).ok(),
                Err(e) => eprintln!("warning: zero-temperature solve failed: {e}"),
            }
            for w in &scan.warnings {
                eprintln!("warning: {w}");
            }
            emit(out, &scan_csv(&scan))
        }
        Command::FindTc => {
            let spec = entropy_spec(config)?;
            let tc = find_critical_temperature(config.mass, &spec, &config.scf_config()?)?;
            let ev = tc.zero_temperature.state.lowest_eigenvalues();
            let record = CriticalRecord {
                mass: config.mass,
                entropy: spec.label(),
                t_c_scan: tc.t_c_scan,
                t_c_formula: tc.t_c_formula,
                relative_gap: tc.relative_gap,
                bracket: [tc.bracket.0, tc.bracket.1],
                mu0_0: ev[0],
                mu0_1: ev[1],
            };
            emit(out, &to_json(&record)?)
        }
        Command::FindTstar => {
            let spec = entropy_spec(config)?;
            let record = match find_max_temperature(config.mass, &spec, &config.scf_config()?) {
                Ok(m) => MaxTemperatureRecord {
                    mass: config.mass,
                    entropy: spec.label(),
                    t_star: Some(m.t_star),
                    lower_bound: Some(m.lower_bound),
                    t_c_formula: Some(m.t_c_formula),
                    finite: true,
                    samples: m
                        .samples
                        .into_iter()
                        .map(|(temperature, free_energy)| SampleRecord {
                            temperature,
                            free_energy,
                        })
                        .collect(),
                },
                Err(Error::NoRootFound { ceiling }) => {
                    eprintln!("no sign change of the free energy below T = {ceiling}");
                    MaxTemperatureRecord {
                        mass: config.mass,
                        entropy: spec.label(),
                        t_star: None,
                        lower_bound: None,
                        t_c_formula: None,
                        finite: false,
                        samples: Vec::new(),
                    }
                }
                Err(e) => return Err(e.into()),
            };
            emit(out, &to_json(&record)?)
        }
        Command::Verify => run_verify(config),
        Command::Oracle => {
            let reference = reference_values(&config.grid()?)?;
            emit(out, &reference.to_text())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = load_config(&cli).and_then(|config| run(&config));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(solver_exit_code(&e))
        }
        Err(Failure::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
