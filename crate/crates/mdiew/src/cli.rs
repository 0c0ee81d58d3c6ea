//! Command-line front end: simulate coincidence counts, run the witness
//! pipeline on count files, apply stored coefficients, and sweep the state
//! weight to produce certification curves as CSV.
//!
//! Exit codes are stable: 0 success, 2 usage or domain error, 3 file parse
//! error, 4 input-set contract mismatch, 5 solver failure.
//!
//! Setting `MDIEW_SOLVER_DUMP=<dir>` makes every semidefinite solve write
//! its problem to that directory in the debug dump format.

use crate::qlin::{werner_state, QlinError};
use crate::scenario::{
    apply_efficiency, ideal_correlations, simulate_counts_with_background, CountTable,
    InputStateSet, MeasurementModel, ScenarioError, N_OUTCOMES,
};
use crate::witness::{
    evaluate_witness, monte_carlo_error, witness_pipeline, WitnessCoefficients, WitnessError,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Parse(String),
    Contract(String),
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Contract(_) => 4,
            CliError::Solver(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Parse(m) | CliError::Contract(m)
            | CliError::Solver(m) => m,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Format(_) => CliError::Parse(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<QlinError> for CliError {
    fn from(e: QlinError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<WitnessError> for CliError {
    fn from(e: WitnessError) -> Self {
        match e {
            WitnessError::InputSetMismatch { .. } => CliError::Contract(e.to_string()),
            WitnessError::Scenario(inner) => CliError::from(inner),
            WitnessError::Domain(_) => CliError::Usage(e.to_string()),
            WitnessError::InfeasibleTable(_)
            | WitnessError::SolverFailure(_)
            | WitnessError::Sdp(_)
            | WitnessError::Qlin(_) => CliError::Solver(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "mdiew",
    about = "Measurement-device-independent entanglement witnessing",
    long_about = "Simulate coincidence-count experiments on two-qubit Werner states, \
certify entanglement from count tables via semidefinite programming, apply stored \
witness coefficients, and sweep the state weight.\n\nSet MDIEW_SOLVER_DUMP=<dir> to \
dump every semidefinite problem in the plain-text debug format."
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct NoiseArgs {
    /// Mean detected coincidence rate per outcome pair (Hz) at a uniform
    /// outcome distribution.
    #[arg(long, default_value_t = 16.0)]
    rate: f64,
    /// Integration time per input pair (seconds).
    #[arg(long, default_value_t = 10.0)]
    time: f64,
    /// Total detection efficiency folded into the non-detection outcome.
    #[arg(long, default_value_t = 0.03)]
    efficiency: f64,
    /// Path-phase error of Alice's measurement (radians).
    #[arg(long, default_value_t = 0.0)]
    phase_error_a: f64,
    /// Path-phase error of Bob's measurement (radians).
    #[arg(long, default_value_t = 0.0)]
    phase_error_b: f64,
    /// Measurement visibility in [0, 1]; 1 is ideal.
    #[arg(long, default_value_t = 1.0)]
    visibility: f64,
    /// Uniform background count rate per cell (Hz); dark counts fold in
    /// here.
    #[arg(long, default_value_t = 0.0)]
    background_rate: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a count table for a Werner state and write it as JSON.
    Simulate {
        /// Werner weight λ in [0, 1].
        #[arg(long)]
        lambda: f64,
        /// RNG seed (simulation outputs are reproducible byte-for-byte).
        #[arg(long)]
        seed: u64,
        /// Output path for the count-table JSON.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        noise: NoiseArgs,
    },
    /// Witness a count table; prints a JSON report to stdout.
    Witness {
        /// Count-table JSON produced by `simulate` (or real data in the
        /// same schema).
        #[arg(long)]
        counts: PathBuf,
        /// Stored witness coefficients; when given, no extraction runs.
        #[arg(long)]
        coeffs: Option<PathBuf>,
        /// Monte-Carlo resamples for the uncertainty estimate.
        #[arg(long, default_value_t = 100)]
        mc: usize,
        /// RNG seed for the Monte-Carlo resampling.
        #[arg(long)]
        seed: u64,
        /// Write the coefficients used (extracted or supplied) to this path.
        #[arg(long)]
        write_coeffs: Option<PathBuf>,
    },
    /// Apply stored coefficients to a count table (witness with --coeffs
    /// required).
    Apply {
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        coeffs: PathBuf,
        #[arg(long, default_value_t = 100)]
        mc: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        write_coeffs: Option<PathBuf>,
    },
    /// Sweep the Werner weight and write a CSV of witness values.
    Sweep {
        /// Grid of λ values: either comma-separated ("0.4,0.6,1.0") or a
        /// range "start:stop:points".
        #[arg(long)]
        lambdas: String,
        /// Monte-Carlo resamples per grid point.
        #[arg(long, default_value_t = 100)]
        mc: usize,
        /// Reference λ whose extracted coefficients produce the fixed-β
        /// column.
        #[arg(long, default_value_t = 0.94)]
        reference_lambda: f64,
        /// Base RNG seed; per-point seeds derive deterministically from it.
        #[arg(long)]
        seed: u64,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        noise: NoiseArgs,
    },
}

#[derive(Serialize)]
struct WitnessReport {
    value: f64,
    std: f64,
    n_mc: usize,
    certified: bool,
    coeffs_path_written: Option<String>,
}

/// Parse args from the process environment, run, and return the exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message; usage problems exit 2, while
            // --help/--version exit 0 through clap's machinery.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { lambda, seed, out, noise } => cmd_simulate(lambda, seed, &out, &noise),
        Command::Witness { counts, coeffs, mc, seed, write_coeffs } => {
            cmd_witness(&counts, coeffs.as_deref(), mc, seed, write_coeffs.as_deref())
        }
        Command::Apply { counts, coeffs, mc, seed, write_coeffs } => {
            cmd_witness(&counts, Some(&coeffs), mc, seed, write_coeffs.as_deref())
        }
        Command::Sweep { lambdas, mc, reference_lambda, seed, out, noise } => {
            cmd_sweep(&lambdas, mc, reference_lambda, seed, out.as_deref(), &noise)
        }
    }
}

fn simulate_table(
    lambda: f64,
    seed: u64,
    noise: &NoiseArgs,
) -> Result<CountTable, CliError> {
    if noise.time <= 0.0 || noise.rate < 0.0 {
        return Err(CliError::Usage(
            "rate must be nonnegative and time positive".into(),
        ));
    }
    let inputs = InputStateSet::standard();
    let meas = MeasurementModel::new(noise.phase_error_a, noise.phase_error_b, noise.visibility)?;
    let rho = werner_state(lambda)?;
    let ideal = ideal_correlations(&rho, &inputs, &meas)?;
    let detected = apply_efficiency(&ideal, noise.efficiency)?;
    // `rate` calibrates the detected level: with efficiency folded in, a
    // uniform table yields `rate·time` expected counts per outcome cell.
    let pair_rate_hz = noise.rate * (N_OUTCOMES * N_OUTCOMES) as f64 / noise.efficiency;
    let mut counts = simulate_counts_with_background(
        &detected,
        pair_rate_hz,
        noise.time,
        noise.background_rate,
        seed,
    )?;
    counts.metadata = serde_json::json!({
        "lambda": lambda,
        "seed": seed,
        "rate_hz_per_outcome": noise.rate,
        "pair_rate_hz": pair_rate_hz,
        "integration_time_s": noise.time,
        "efficiency": noise.efficiency,
        "phase_error_a": noise.phase_error_a,
        "phase_error_b": noise.phase_error_b,
        "visibility": noise.visibility,
        "background_rate_hz": noise.background_rate,
    });
    Ok(counts)
}

fn cmd_simulate(lambda: f64, seed: u64, out: &Path, noise: &NoiseArgs) -> Result<(), CliError> {
    let counts = simulate_table(lambda, seed, noise)?;
    write_atomic(out, counts.to_json().as_bytes())?;
    Ok(())
}

fn cmd_witness(
    counts_path: &Path,
    coeffs_path: Option<&Path>,
    mc: usize,
    seed: u64,
    write_coeffs: Option<&Path>,
) -> Result<(), CliError> {
    let counts = CountTable::from_json(&read_file(counts_path)?)?;
    let coeffs = match coeffs_path {
        Some(p) => Some(
            WitnessCoefficients::from_json(&read_file(p)?)
                .map_err(|e| match e {
                    WitnessError::Scenario(ScenarioError::Format(m)) => CliError::Parse(m),
                    other => CliError::from(other),
                })?,
        ),
        None => None,
    };
    let inputs = InputStateSet::standard();
    let (value, coeffs_out) = witness_pipeline(&counts, &inputs, coeffs.as_ref())?;
    let (_, std) = monte_carlo_error(&counts, &inputs, &coeffs_out, mc, seed)?;
    let coeffs_path_written = match write_coeffs {
        Some(p) => {
            write_atomic(p, coeffs_out.to_json().as_bytes())?;
            Some(p.display().to_string())
        }
        None => None,
    };
    let report = WitnessReport {
        value,
        std,
        n_mc: mc,
        certified: value < -3.0 * std,
        coeffs_path_written,
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn cmd_sweep(
    lambdas: &str,
    mc: usize,
    reference_lambda: f64,
    seed: u64,
    out: Option<&Path>,
    noise: &NoiseArgs,
) -> Result<(), CliError> {
    let grid = parse_grid(lambdas)?;
    if grid.is_empty() {
        return Err(CliError::Usage("empty λ grid".into()));
    }
    for l in &grid {
        if !(0.0..=1.0).contains(l) {
            return Err(CliError::Usage(format!("λ = {l} outside [0, 1]")));
        }
    }
    let inputs = InputStateSet::standard();

    // Fixed-β reference run gets the seed slot one past the grid.
    let ref_seed = point_seed(seed, grid.len());
    let ref_counts = simulate_table(reference_lambda, ref_seed, noise)?;
    let (_, beta_ref) = witness_pipeline(&ref_counts, &inputs, None)?;

    let mut csv = String::from("lambda,w_self,std_self,w_fixed,std_fixed,n_mc\n");
    for (i, &lambda) in grid.iter().enumerate() {
        let counts = simulate_table(lambda, point_seed(seed, i), noise)?;
        let (w_self, beta_self) = witness_pipeline(&counts, &inputs, None)?;
        let (_, std_self) = monte_carlo_error(&counts, &inputs, &beta_self, mc, point_seed(seed, i))?;
        let raw = crate::scenario::reconstruct_probabilities(&counts)?;
        let w_fixed = evaluate_witness(&beta_ref, &raw)?;
        let (_, std_fixed) =
            monte_carlo_error(&counts, &inputs, &beta_ref, mc, point_seed(seed, i))?;
        csv.push_str(&format!(
            "{lambda},{w_self},{std_self},{w_fixed},{std_fixed},{mc}\n"
        ));
    }
    match out {
        Some(p) => write_atomic(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn point_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Accepts "0.4,0.5,0.9" or "start:stop:points".
fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(vec![]);
    }
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Usage(format!(
                "range grid must be start:stop:points, got {spec:?}"
            )));
        }
        let start: f64 = parts[0]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad grid start {:?}", parts[0])))?;
        let stop: f64 = parts[1]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad grid stop {:?}", parts[1])))?;
        let points: usize = parts[2]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad grid count {:?}", parts[2])))?;
        if points == 0 {
            return Ok(vec![]);
        }
        if points == 1 {
            return Ok(vec![start]);
        }
        let step = (stop - start) / (points - 1) as f64;
        return Ok((0..points).map(|i| start + step * i as f64).collect());
    }
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad λ value {:?}", s)))
        })
        .collect()
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

/// Write through a sibling temp file and rename, so partial files are never
/// observed.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp{}",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
            std::process::id()
        )),
        None => PathBuf::from(format!(".{}.tmp{}", path.display(), std::process::id())),
    };
    std::fs::write(&tmp, bytes)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Usage(format!("cannot finalize {}: {e}", path.display())))
}
