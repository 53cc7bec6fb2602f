//! `firdiv`: estimate a nonnegative FIR impulse response `h` minimizing the
//! I-divergence `I(Y || T(h)U)` between observed outputs and convolved
//! inputs, plus supporting commands for data validation, reference
//! answers, and synthetic experiments.
//!
//! Exit codes: 0 success, 1 command-line usage errors, 2 data or
//! mathematical precondition failures (unreadable/negative data, ill-posed
//! instances, oversized oracle requests, and similar).

mod io;
mod report;

use clap::{Args, Parser, Subcommand};
use firdiv_core::diagnostics::check_conditions;
use firdiv_core::oracle::{
    brute_force_minimize, rate_experiment, toy_closed_form, GridSearchConfig, RateRegime, ToyCase,
};
use firdiv_core::solver::Init;
use firdiv_core::stats::{
    consistency_experiment, generate_batch, limit_criterion_check, normality_experiment,
    ConsistencyConfig, InputLaw, NoiseModel, NormalityConfig,
};
use firdiv_core::{solve, ImpulseResponse, SolverConfig};
use report::{
    result_json, CheckReport, ConditionsJson, EstimateReport, FileInfo, InputsJson,
    SolverConfigJson, SCHEMA_VERSION,
};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "firdiv",
    version,
    about = "Nonnegative FIR deconvolution by I-divergence minimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a data pair: well-posedness and uniqueness conditions
    Check(CheckArgs),
    /// Estimate the impulse response minimizing I(Y || T(h)U)
    Estimate(EstimateArgs),
    /// Reference answers computed independently of the solver
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
    /// Synthetic-data experiments under multiplicative noise
    Simulate {
        #[command(subcommand)]
        which: SimulateCommand,
    },
}

#[derive(Args)]
struct CheckArgs {
    /// Observed outputs: CSV, one time step per row, one experiment per column
    output: PathBuf,
    /// Inputs, same shape as the outputs
    input: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Observed outputs: CSV, one time step per row, one experiment per column
    output: PathBuf,
    /// Inputs, same shape as the outputs
    input: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    /// KKT stopping tolerance, relative to the total output mass
    #[arg(long, default_value_t = 1e-8)]
    tol_kkt: f64,
    /// Relative objective-decrease threshold of the stall rule
    #[arg(long, default_value_t = 1e-12)]
    tol_objective: f64,
    /// Starting point: ones, simplex, or file:PATH
    #[arg(long, default_value = "ones", value_parser = parse_init)]
    init: InitArg,
    /// Re-derive each step through the lifted projections and record
    /// identity residuals in the report
    #[arg(long)]
    verify: bool,
    /// Write the JSON report to this file instead of stdout
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Closed-form minimizer of the two-tap single-experiment instance
    Toy {
        #[arg(long)]
        u0: f64,
        #[arg(long)]
        u1: f64,
        #[arg(long)]
        y0: f64,
        #[arg(long)]
        y1: f64,
    },
    /// Exhaustive shrinking-grid minimization (small instances only)
    Grid {
        output: PathBuf,
        input: PathBuf,
        #[arg(long, default_value_t = 11)]
        points: usize,
        #[arg(long, default_value_t = 10)]
        rounds: usize,
    },
    /// Convergence-rate measurement on a two-tap instance
    Rate {
        #[arg(long)]
        u0: f64,
        #[arg(long)]
        u1: f64,
        #[arg(long)]
        y0: f64,
        #[arg(long)]
        y1: f64,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
    },
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Draw one synthetic batch and write the output/input pair as CSV
    Batch {
        /// True response, comma-separated taps
        #[arg(long, value_parser = parse_taps)]
        taps: TapList,
        #[arg(long, default_value_t = 8)]
        experiments: usize,
        /// point | gamma:SHAPE | lognormal:SIGMA | twopoint:DOWN,UP
        #[arg(long, default_value = "point", value_parser = parse_noise)]
        noise: NoiseModel,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the noisy outputs
        #[arg(long)]
        out_output: PathBuf,
        /// Where to write the inputs
        #[arg(long)]
        out_input: PathBuf,
    },
    /// Median estimation error versus number of experiments
    Consistency {
        #[arg(long, value_parser = parse_taps)]
        taps: TapList,
        #[arg(long, default_value = "gamma:4", value_parser = parse_noise)]
        noise: NoiseModel,
        #[arg(long, default_value = "16,64,256,1024", value_parser = parse_sizes)]
        sizes: SizeList,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Moments of the scaled errors sqrt(m)(h_hat - h_true)
    Normality {
        #[arg(long, value_parser = parse_taps)]
        taps: TapList,
        #[arg(long, default_value = "gamma:4", value_parser = parse_noise)]
        noise: NoiseModel,
        #[arg(long, default_value_t = 256)]
        experiments: usize,
        #[arg(long, default_value_t = 200)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Monte Carlo check of the noise-splitting identity of the expected criterion
    LimitCheck {
        #[arg(long, value_parser = parse_taps)]
        taps: TapList,
        #[arg(long, default_value = "gamma:4", value_parser = parse_noise)]
        noise: NoiseModel,
        /// Fixed probe response at which both sides are sampled
        #[arg(long, value_parser = parse_taps)]
        probe: TapList,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Debug)]
enum InitArg {
    Ones,
    Simplex,
    File(PathBuf),
}

fn parse_init(s: &str) -> Result<InitArg, String> {
    match s {
        "ones" => Ok(InitArg::Ones),
        "simplex" => Ok(InitArg::Simplex),
        _ => match s.strip_prefix("file:") {
            Some(path) if !path.is_empty() => Ok(InitArg::File(PathBuf::from(path))),
            _ => Err("expected ones, simplex, or file:PATH".into()),
        },
    }
}

#[derive(Clone, Debug)]
struct TapList(Vec<f64>);

fn parse_taps(s: &str) -> Result<TapList, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| format!("tap '{t}': {e}"))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(TapList)
}

#[derive(Clone, Debug)]
struct SizeList(Vec<usize>);

fn parse_sizes(s: &str) -> Result<SizeList, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| format!("size '{t}': {e}"))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(SizeList)
}

fn parse_noise(s: &str) -> Result<NoiseModel, String> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let model = match kind {
        "point" => NoiseModel::PointMass,
        "gamma" => NoiseModel::GammaMeanOne {
            shape: rest.parse().map_err(|e| format!("gamma shape: {e}"))?,
        },
        "lognormal" => NoiseModel::LognormalMeanOne {
            sigma: rest.parse().map_err(|e| format!("lognormal sigma: {e}"))?,
        },
        "twopoint" => {
            let (down, up) = rest
                .split_once(',')
                .ok_or("twopoint noise needs DOWN,UP".to_string())?;
            NoiseModel::TwoPointMeanOne {
                down: down.parse().map_err(|e| format!("twopoint down: {e}"))?,
                up: up.parse().map_err(|e| format!("twopoint up: {e}"))?,
            }
        }
        _ => return Err("expected point, gamma:SHAPE, lognormal:SIGMA, or twopoint:DOWN,UP".into()),
    };
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

fn noise_label(noise: &NoiseModel) -> String {
    match noise {
        NoiseModel::PointMass => "point".into(),
        NoiseModel::GammaMeanOne { shape } => format!("gamma:{shape}"),
        NoiseModel::LognormalMeanOne { sigma } => format!("lognormal:{sigma}"),
        NoiseModel::TwoPointMeanOne { down, up } => format!("twopoint:{down},{up}"),
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, String> {
    match cli.command {
        Command::Check(args) => cmd_check(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Oracle { which } => cmd_oracle(which),
        Command::Simulate { which } => cmd_simulate(which),
    }
}

fn file_info(path: &Path, rows: usize, cols: usize) -> Result<FileInfo, String> {
    Ok(FileInfo {
        path: path.display().to_string(),
        sha256: io::sha256_hex(path)?,
        rows,
        cols,
    })
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), String> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    let mut out = std::io::stdout().lock();
    if let Err(e) = writeln!(out, "{text}") {
        // A downstream pager closing the pipe is not our error.
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        return Err(format!("writing report: {e}"));
    }
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<i32, String> {
    let y = io::read_matrix(&args.output)?;
    let u = io::read_matrix(&args.input)?;
    let conditions = check_conditions(&y, &u).map_err(|e| e.to_string())?;
    let report = CheckReport {
        schema_version: SCHEMA_VERSION,
        command: "check",
        inputs: InputsJson {
            output: file_info(&args.output, y.rows(), y.cols())?,
            input: file_info(&args.input, u.rows(), u.cols())?,
        },
        conditions: ConditionsJson::from(&conditions),
    };
    print_json(&report)?;
    Ok(if conditions.well_posed { 0 } else { 2 })
}

fn cmd_estimate(args: EstimateArgs) -> Result<i32, String> {
    let y = io::read_matrix(&args.output)?;
    let u = io::read_matrix(&args.input)?;
    let conditions = check_conditions(&y, &u).map_err(|e| e.to_string())?;

    let (init, init_label) = match &args.init {
        InitArg::Ones => (Init::Ones, "ones".to_string()),
        InitArg::Simplex => (Init::UniformSimplex, "simplex".to_string()),
        InitArg::File(path) => (
            Init::Custom(io::read_response(path)?),
            format!("file:{}", path.display()),
        ),
    };
    let config = SolverConfig {
        max_iters: args.max_iters,
        tol_kkt: args.tol_kkt,
        tol_objective: args.tol_objective,
        init,
        verify_mode: args.verify,
        record_history: false,
    };

    let start = Instant::now();
    let solved = solve(&y, &u, &config).map_err(|e| e.to_string())?;
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;

    let report = EstimateReport {
        schema_version: SCHEMA_VERSION,
        command: "estimate",
        inputs: InputsJson {
            output: file_info(&args.output, y.rows(), y.cols())?,
            input: file_info(&args.input, u.rows(), u.cols())?,
        },
        config: SolverConfigJson {
            max_iters: args.max_iters,
            tol_kkt: args.tol_kkt,
            tol_objective: args.tol_objective,
            init: init_label,
            verify: args.verify,
        },
        conditions: ConditionsJson::from(&conditions),
        result: result_json(&solved),
        wall_time_ms,
    };
    match &args.out {
        Some(path) => {
            let text = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
            std::fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))?;
        }
        None => print_json(&report)?,
    }
    Ok(0)
}

fn toy_case_label(case: ToyCase) -> &'static str {
    match case {
        ToyCase::Interior => "interior",
        ToyCase::Boundary => "boundary",
    }
}

fn cmd_oracle(which: OracleCommand) -> Result<i32, String> {
    match which {
        OracleCommand::Toy { u0, u1, y0, y1 } => {
            let sol = toy_closed_form(u0, u1, y0, y1).map_err(|e| e.to_string())?;
            print_json(&json!({
                "schema_version": SCHEMA_VERSION,
                "command": "oracle toy",
                "h_star": sol.h_star.as_slice(),
                "case": toy_case_label(sol.case),
                "objective": sol.objective_at_star,
                "unique": sol.unique,
            }))?;
        }
        OracleCommand::Grid {
            output,
            input,
            points,
            rounds,
        } => {
            let y = io::read_matrix(&output)?;
            let u = io::read_matrix(&input)?;
            let config = GridSearchConfig {
                points_per_dim: points,
                rounds,
                ..GridSearchConfig::default()
            };
            let found = brute_force_minimize(&y, &u, &config).map_err(|e| e.to_string())?;
            print_json(&json!({
                "schema_version": SCHEMA_VERSION,
                "command": "oracle grid",
                "h": found.h.as_slice(),
                "objective": found.objective,
                "evaluations": found.evaluations,
            }))?;
        }
        OracleCommand::Rate {
            u0,
            u1,
            y0,
            y1,
            iters,
        } => {
            let exp = rate_experiment(u0, u1, y0, y1, iters).map_err(|e| e.to_string())?;
            print_json(&json!({
                "schema_version": SCHEMA_VERSION,
                "command": "oracle rate",
                "case": toy_case_label(exp.case),
                "h_star": exp.h_star.as_slice(),
                "regime": match exp.regime {
                    RateRegime::Exponential => "exponential",
                    RateRegime::OneOverT => "one_over_t",
                },
                "geometric_rate": exp.geometric_rate,
                "fit_window": exp.fit_window,
                "final_residual": exp.residuals.last(),
                "iterations": iters,
            }))?;
        }
    }
    Ok(0)
}

fn cmd_simulate(which: SimulateCommand) -> Result<i32, String> {
    match which {
        SimulateCommand::Batch {
            taps,
            experiments,
            noise,
            seed,
            out_output,
            out_input,
        } => {
            let h_true = ImpulseResponse::new(taps.0).map_err(|e| e.to_string())?;
            let batch = generate_batch(&h_true, &InputLaw::default(), &noise, experiments, seed)
                .map_err(|e| e.to_string())?;
            io::write_matrix(&out_output, &batch.y)?;
            io::write_matrix(&out_input, &batch.u)?;
            print_json(&json!({
                "schema_version": SCHEMA_VERSION,
                "command": "simulate batch",
                "rows": batch.y.rows(),
                "cols": batch.y.cols(),
                "noise": noise_label(&noise),
                "seed": seed,
                "output": { "path": out_output.display().to_string(), "sha256": io::sha256_hex(&out_output)? },
                "input": { "path": out_input.display().to_string(), "sha256": io::sha256_hex(&out_input)? },
            }))?;
        }
        SimulateCommand::Consistency {
            taps,
            noise,
            sizes,
            replicates,
            seed,
            threads,
        } => {
            let h_true = ImpulseResponse::new(taps.0).map_err(|e| e.to_string())?;
            let config = ConsistencyConfig {
                sample_sizes: sizes.0,
                replicates,
                seed,
                threads,
                solver: SolverConfig::default(),
            };
            let curve = consistency_experiment(&h_true, &InputLaw::default(), &noise, &config)
                .map_err(|e| e.to_string())?;
            print_json(&json!({
                "schema_version": SCHEMA_VERSION,
                "command": "simulate consistency",
                "noise": noise_label(&noise),
                "seed": seed,
                "sample_sizes": curve.sample_sizes,
                "replicates": replicates,
                "median_errors": curve.medians(),
                "failures": curve.failures(),
                "trend_ok": curve.trend_ok(),
            }))?;
        }
        SimulateCommand::Normality {
            taps,
            noise,
            experiments,
            replicates,
            seed,
            threads,
        } => {
            let h_true = ImpulseResponse::new(taps.0).map_err(|e| e.to_string())?;
            let config = NormalityConfig {
                sample_size: experiments,
                replicates,
                seed,
                threads,
                ..NormalityConfig::default()
            };
            let sample = normality_experiment(&h_true, &InputLaw::default(), &noise, &config)
                .map_err(|e| e.to_string())?;
            print_json(&json!({
                "schema_version": SCHEMA_VERSION,
                "command": "simulate normality",
                "noise": noise_label(&noise),
                "seed": seed,
                "experiments": experiments,
                "replicates": replicates,
                "used": sample.count(),
                "excluded_boundary": sample.excluded_boundary,
                "failed": sample.failed,
                "means": sample.means(),
                "skewness": sample.skewness(),
                "excess_kurtosis": sample.excess_kurtosis(),
                "covariance": sample.covariance(),
            }))?;
        }
        SimulateCommand::LimitCheck {
            taps,
            noise,
            probe,
            draws,
            seed,
        } => {
            let h_true = ImpulseResponse::new(taps.0).map_err(|e| e.to_string())?;
            let h_probe = ImpulseResponse::new(probe.0).map_err(|e| e.to_string())?;
            let check = limit_criterion_check(
                &h_true,
                &InputLaw::default(),
                &noise,
                &h_probe,
                1,
                draws,
                seed,
            )
            .map_err(|e| e.to_string())?;
            print_json(&json!({
                "schema_version": SCHEMA_VERSION,
                "command": "simulate limit-check",
                "noise": noise_label(&noise),
                "seed": seed,
                "draws": check.samples,
                "lhs_mean": check.lhs_mean,
                "rhs_mean": check.rhs_mean,
                "diff_mean": check.diff_mean,
                "std_error": check.std_error,
                "within_three_se": check.within_three_se(),
            }))?;
        }
    }
    Ok(0)
}
