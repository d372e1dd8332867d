//! Command-line front end for the SDR detectors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qam_sdr::detectors::{
    gaussian_randomized_rounding, simple_rounding, va_bits, va_rounding_i, va_rounding_ii,
};
use qam_sdr::model::generate_instance;
use qam_sdr::relaxations::solve_relaxation;
use qam_sdr::sim::{
    random_roots, roots_report, run_simulation, trial_seed, verify_equivalence, Family, SimConfig,
    VerifyTolerances,
};
use qam_sdr::{ComplexInstance, RootSet, SolverOptions};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "qam-sdr", version, about = "SDR detectors for MIMO detection under 4^q-QAM")]
struct Cli {
    /// Debug logging, including per-trial instance fingerprints.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Tolerances {
    /// Solver relative duality-gap tolerance.
    #[arg(long)]
    tol_gap: Option<f64>,
    /// Solver feasibility tolerance.
    #[arg(long)]
    tol_feas: Option<f64>,
}

impl Tolerances {
    fn options(&self, base: SolverOptions) -> SolverOptions {
        SolverOptions {
            gap_tol: self.tol_gap.unwrap_or(base.gap_tol),
            feas_tol: self.tol_feas.unwrap_or(base.feas_tol),
            ..base
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo symbol-error sweep; writes CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        randomizations: Option<usize>,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Solves all applicable relaxations and runs the six conversions.
    Verify {
        /// Sweep config; one report per (SNR, trial) instance.
        #[arg(long, conflicts_with = "instance", required_unless_present = "instance")]
        config: Option<PathBuf>,
        /// A single instance file.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// JSON report destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Tolerance on pairwise optimal-value gaps.
        #[arg(long, default_value_t = 1e-5)]
        value_tol: f64,
        /// Feasibility tolerance for converted points.
        #[arg(long, default_value_t = 1e-6)]
        check_tol: f64,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Interval analysis for root quadruples.
    Roots {
        /// Comma-separated quadruple, e.g. 1,9,25,49; repeatable.
        #[arg(long = "roots")]
        roots: Vec<String>,
        /// Number of random quadruples to add.
        #[arg(long, default_value_t = 0)]
        random: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Absolute tolerance on the interval endpoints.
        #[arg(long, default_value_t = 1e-4)]
        endpoint_tol: f64,
        /// JSON report destination; a table goes to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Solves one instance file and rounds the result.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = RelaxationArg::Bc)]
        relaxation: RelaxationArg,
        #[arg(long, value_enum, default_value_t = RoundingArg::Simple)]
        rounding: RoundingArg,
        #[arg(long, default_value_t = 100)]
        randomizations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Writes a random instance file.
    Generate {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: u32,
        /// SNR in dB; `inf` for a noiseless instance.
        #[arg(long)]
        snr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RelaxationArg {
    Bc,
    Pi,
    Va,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum RoundingArg {
    Simple,
    Randomized,
    VaI,
    VaIi,
}

/// An error with its exit code.
struct Failure(u8, String);

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure(EXIT_CONFIG, e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure(1, format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_instance(path: &Path) -> Result<ComplexInstance, Failure> {
    ComplexInstance::from_json(&read(path)?).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<SimConfig, Failure> {
    let mut cfg = SimConfig::from_toml(&read(path)?).map_err(config_err)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config, seed, out, randomizations, tol } => {
            let mut cfg = load_config(&config, seed)?;
            cfg.gap_tol = tol.tol_gap.unwrap_or(cfg.gap_tol);
            cfg.feas_tol = tol.tol_feas.unwrap_or(cfg.feas_tol);
            cfg.randomizations = randomizations.unwrap_or(cfg.randomizations);
            cfg.validate().map_err(config_err)?;
            let report = run_simulation(&cfg).map_err(config_err)?;
            for r in report.records.iter().filter(|r| r.failures > 0) {
                eprintln!("{} dB {}: {} solver failures", r.snr_db, r.detector, r.failures);
            }
            for s in &report.summaries {
                log::info!(
                    "{} dB: {} trials, {} ties, {} disagreements ({} without tie), {} excluded",
                    s.snr_db,
                    s.trials,
                    s.tie_trials,
                    s.disagreements,
                    s.disagreements_without_tie,
                    s.excluded_trials
                );
            }
            emit(out.as_deref(), &report.to_csv())
        }
        Command::Verify { config, instance, seed, out, value_tol, check_tol, tol } => {
            let tols = VerifyTolerances { gap: value_tol, feas: check_tol };
            let mut cases: Vec<ComplexInstance> = Vec::new();
            let opts;
            if let Some(path) = instance {
                cases.push(load_instance(&path)?);
                opts = tol.options(SolverOptions::default());
            } else {
                let cfg = load_config(config.as_deref().expect("clap enforces one source"), seed)?;
                cfg.validate().map_err(config_err)?;
                opts = tol.options(cfg.solver_options());
                for (si, &snr) in cfg.snr_db_grid.iter().enumerate() {
                    for t in 0..cfg.trials_per_snr {
                        let s = trial_seed(cfg.seed, si, t);
                        cases.push(
                            generate_instance(cfg.m_tilde, cfg.n_tilde, cfg.q, snr, s).map_err(config_err)?,
                        );
                    }
                }
            }
            let reports: Vec<_> = cases
                .iter()
                .map(|ci| verify_equivalence(&ci.to_real(), ci.fingerprint(), &opts, &tols))
                .collect();
            let json = serde_json::to_string_pretty(&reports).expect("report serializes");
            emit(out.as_deref(), &(json + "\n"))?;
            let max_gap = reports.iter().map(|r| r.max_gap()).fold(0.0, f64::max);
            let passed = reports.iter().filter(|r| r.all_ok()).count();
            eprintln!(
                "verified {} instances: {passed} fully consistent, max pairwise gap {max_gap:.3e}",
                reports.len()
            );
            if reports.iter().any(|r| r.hard_failure()) {
                return Err(Failure(EXIT_SOLVER, "a relaxation failed to reach optimality".into()));
            }
            Ok(())
        }
        Command::Roots { roots, random, seed, endpoint_tol, out, tol } => {
            let mut sets = Vec::new();
            for text in &roots {
                let values: Vec<f64> = text
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| config_err(format!("--roots {text}: {e}")))?;
                let Ok(mut r) = <[f64; 4]>::try_from(values) else {
                    return Err(config_err(format!("--roots {text}: expected four values")));
                };
                r.sort_by(f64::total_cmp);
                sets.push(RootSet::new(r).map_err(config_err)?);
            }
            sets.extend(random_roots(random, seed));
            if sets.is_empty() {
                return Err(config_err("no roots given; use --roots or --random"));
            }
            let rows = roots_report(&sets, &tol.options(SolverOptions::default()), endpoint_tol);
            if out.is_some() {
                let json = serde_json::to_string_pretty(&rows).expect("report serializes");
                emit(out.as_deref(), &(json + "\n"))?;
            } else {
                println!("roots\tp\tcondition\tL\tU\tagrees");
                for row in &rows {
                    match &row.analysis {
                        Some(a) => println!(
                            "{:?}\t{:?}\t{}\t{:.6}\t{:.6}\t{}",
                            row.roots, a.roots.p, a.condition_holds, a.d_interval.0, a.d_interval.1, a.agrees
                        ),
                        None => println!("{:?}\terror: {}", row.roots, row.error.as_deref().unwrap_or("")),
                    }
                }
            }
            if rows.iter().any(|r| r.error.is_some()) {
                return Err(Failure(EXIT_SOLVER, "an interval program failed".into()));
            }
            Ok(())
        }
        Command::Solve { instance, relaxation, rounding, randomizations, seed, tol } => {
            let ci = load_instance(&instance)?;
            let inst = ci.to_real();
            let family = match relaxation {
                RelaxationArg::Bc => Family::Bc,
                RelaxationArg::Pi => Family::Pi,
                RelaxationArg::Va => Family::Va,
            };
            let relax = family
                .relaxation(inst.q)
                .ok_or_else(|| config_err(format!("PI relaxation unavailable for q = {}", inst.q)))?;
            if matches!(rounding, RoundingArg::VaI | RoundingArg::VaIi) && family != Family::Va {
                return Err(config_err("va-i/va-ii rounding requires --relaxation va"));
            }
            let opts = SolverOptions {
                verbose: cli.verbose,
                ..tol.options(SolverOptions::default())
            };
            let (sol, point) =
                solve_relaxation(&inst, &relax, &opts).map_err(|e| Failure(EXIT_SOLVER, e.to_string()))?;
            let decision = match rounding {
                RoundingArg::Simple => simple_rounding(&point, &inst),
                RoundingArg::Randomized => gaussian_randomized_rounding(&point, &inst, randomizations, seed),
                RoundingArg::VaI => va_bits(&point).and_then(|b| va_rounding_i(b, &inst)),
                RoundingArg::VaIi => va_bits(&point).and_then(|b| va_rounding_ii(b, &inst)),
            }
            .map_err(|e| Failure(EXIT_SOLVER, e.to_string()))?;
            let out = serde_json::json!({
                "relaxation": relax.label(),
                "status": format!("{:?}", sol.status),
                "relaxation_value": sol.objective,
                "iterations": sol.iterations,
                "gap": sol.gap,
                "primal_infeasibility": sol.primal_infeas,
                "rounding": decision.method,
                "s_hat": decision.s_hat.as_slice(),
                "objective": decision.objective,
                "s_true": inst.s_true.as_slice(),
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("serializes"));
            Ok(())
        }
        Command::Generate { m, n, q, snr, seed, out } => {
            let ci = generate_instance(m, n, q, snr, seed).map_err(config_err)?;
            emit(out.as_deref(), &(ci.to_json() + "\n"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
