//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 on usage/configuration/IO errors, 2 when
//! `compare` finds at least one regression (verdicts are still printed).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::analysis::{compare_runs, Verdict, DEFAULT_COMPARISON_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::oracle::{lookup_table_from_json, standard_grid, validate_oracle, OracleSpec};
use crate::report::{simulate_report, BenchmarkReport, REPORT_SCHEMA_VERSION};
use crate::runner::{
    run_experiment, ExperimentConfig, DEFAULT_MEASUREMENTS_PER_TRIAL, DEFAULT_TRIALS,
    DEFAULT_WARMUP_EXECS,
};
use crate::suite::resolve_target;
use crate::timer::{
    calibrate, CalibrationReport, MonotonicClock, SystemClock, TimerSpec, DEFAULT_J_MAX,
};
use crate::tuning::{cache_lookup, cache_store, machine_fingerprint, tune, TuneResult};

/// Environment variable consulted for the cache path when `--cache` is not
/// given.
pub const CACHE_ENV_VAR: &str = "RBENCH_CACHE";

const DEFAULT_CALIBRATION_SAMPLES: usize = 10_000;

#[derive(Parser)]
#[command(
    name = "rbench",
    version,
    about = "Microbenchmark harness: calibrate, tune, run, compare, simulate"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Measure the host timer's precision and derive its repetition bound.
    Calibrate {
        /// Timer accuracy override in nanoseconds (default: 1000x the
        /// measured precision).
        #[arg(long)]
        tau_acc_ns: Option<u64>,
        /// Cap on the repetition bound j.
        #[arg(long, default_value_t = DEFAULT_J_MAX)]
        j_max: u64,
        /// Clock read pairs used to measure precision.
        #[arg(long, default_value_t = DEFAULT_CALIBRATION_SAMPLES)]
        samples: usize,
        /// Emit the calibration as a JSON object.
        #[arg(long)]
        json: bool,
    },
    /// Tune executions-per-measurement for a suite or a single builtin.
    Tune {
        /// Suite file path, or `builtin:NAME[:SIZE]`.
        target: String,
        /// Tuning cache path (default: $RBENCH_CACHE).
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Ramp time budget per benchmark, in seconds.
        #[arg(long, default_value_t = 5.0)]
        tuning_budget_s: f64,
        #[arg(long)]
        tau_acc_ns: Option<u64>,
        /// Use a lookup-table oracle loaded from this JSON file instead of
        /// the default logistic curve.
        #[arg(long)]
        oracle_table: Option<PathBuf>,
    },
    /// Run a suite under tuned configurations and write a report.
    Run {
        /// Suite file path, or `builtin:NAME[:SIZE]`.
        suite: String,
        /// Tuning cache path (default: $RBENCH_CACHE).
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Measured-time budget per benchmark, in seconds.
        #[arg(long)]
        budget_s: f64,
        /// Report output path.
        #[arg(long)]
        output: PathBuf,
        /// Trials per benchmark.
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: u64,
        /// Measurements per trial.
        #[arg(long = "per-trial", default_value_t = DEFAULT_MEASUREMENTS_PER_TRIAL)]
        per_trial: u64,
        /// Unmeasured executions before measuring each benchmark.
        #[arg(long, default_value_t = DEFAULT_WARMUP_EXECS)]
        warmup: u64,
        /// Include a kernel density curve per benchmark (enlarges reports).
        #[arg(long)]
        kde: bool,
        #[arg(long)]
        tau_acc_ns: Option<u64>,
        /// Ramp budget used when a benchmark is not in the cache yet.
        #[arg(long, default_value_t = 5.0)]
        tuning_budget_s: f64,
        #[arg(long)]
        oracle_table: Option<PathBuf>,
    },
    /// Compare two reports benchmark by benchmark on their minima.
    Compare {
        baseline: PathBuf,
        candidate: PathBuf,
        /// Regression threshold as a fraction (0.30 flags a >= 30% slower
        /// minimum).
        #[arg(long, default_value_t = DEFAULT_COMPARISON_THRESHOLD)]
        threshold: f64,
        /// Emit verdicts as a JSON array.
        #[arg(long)]
        json: bool,
    },
    /// Run a simulation scenario and write its report.
    Simulate {
        scenario: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Validate an oracle against its required properties.
    Oracle {
        /// Run the property checks (required).
        #[arg(long, required = true)]
        check: bool,
        /// Logistic parameters as `a,b` (a in 1/ns).
        #[arg(long)]
        params: Option<String>,
        /// Validate a lookup table from this JSON file instead.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        tau_acc_ns: u64,
        #[arg(long, default_value_t = 1)]
        tau_prec_ns: u64,
        #[arg(long, default_value_t = DEFAULT_J_MAX)]
        j_max: u64,
    },
    /// Exits immediately; spawned to estimate subprocess overhead.
    #[command(name = "__noop", hide = true)]
    Noop,
}

/// Entry point used by `main`. Returns the process exit code.
pub fn run() -> i32 {
    run_with_args(std::env::args_os())
}

pub fn run_with_args<I>(args: I) -> i32
where
    I: IntoIterator,
    I::Item: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn dispatch(command: Cmd) -> Result<i32> {
    match command {
        Cmd::Calibrate {
            tau_acc_ns,
            j_max,
            samples,
            json,
        } => cmd_calibrate(tau_acc_ns, j_max, samples, json),
        Cmd::Tune {
            target,
            cache,
            tuning_budget_s,
            tau_acc_ns,
            oracle_table,
        } => cmd_tune(&target, cache, tuning_budget_s, tau_acc_ns, oracle_table),
        Cmd::Run {
            suite,
            cache,
            budget_s,
            output,
            trials,
            per_trial,
            warmup,
            kde,
            tau_acc_ns,
            tuning_budget_s,
            oracle_table,
        } => cmd_run(RunArgs {
            suite,
            cache,
            budget_s,
            output,
            trials,
            per_trial,
            warmup,
            kde,
            tau_acc_ns,
            tuning_budget_s,
            oracle_table,
        }),
        Cmd::Compare {
            baseline,
            candidate,
            threshold,
            json,
        } => cmd_compare(&baseline, &candidate, threshold, json),
        Cmd::Simulate {
            scenario,
            seed,
            output,
        } => cmd_simulate(&scenario, seed, &output),
        Cmd::Oracle {
            check: _,
            params,
            table,
            tau_acc_ns,
            tau_prec_ns,
            j_max,
        } => cmd_oracle(params, table, tau_acc_ns, tau_prec_ns, j_max),
        Cmd::Noop => Ok(0),
    }
}

fn cmd_calibrate(
    tau_acc_ns: Option<u64>,
    j_max: u64,
    samples: usize,
    json: bool,
) -> Result<i32> {
    let mut clock = SystemClock::new();
    let report = calibrate(&mut clock, samples, tau_acc_ns, j_max)?;
    print_calibration(&report, json);
    Ok(0)
}

fn print_calibration(report: &CalibrationReport, json: bool) {
    if json {
        println!(
            "{}",
            serde_json::to_string(report).expect("calibration reports always serialize")
        );
    } else {
        println!("timer precision: {} ns", report.spec.tau_prec_ns);
        println!(
            "timer accuracy:  {} ns ({})",
            report.spec.tau_acc_ns,
            match report.source {
                crate::timer::AccuracySource::Measured => "derived from precision",
                crate::timer::AccuracySource::Configured => "configured",
            }
        );
        println!("j:               {} (cap {})", report.spec.j, report.j_max);
    }
}

fn seconds_to_ns(seconds: f64, what: &str) -> Result<u64> {
    if !(seconds > 0.0) || !seconds.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "{what} must be a positive number of seconds, got {seconds}"
        )));
    }
    Ok((seconds * 1e9) as u64)
}

fn cache_path(flag: Option<PathBuf>) -> Result<PathBuf> {
    if let Some(path) = flag {
        return Ok(path);
    }
    match std::env::var_os(CACHE_ENV_VAR) {
        Some(path) if !path.is_empty() => Ok(PathBuf::from(path)),
        _ => Err(Error::InvalidConfig(format!(
            "no tuning cache path: pass --cache or set {CACHE_ENV_VAR}"
        ))),
    }
}

fn host_timer(tau_acc_ns: Option<u64>) -> Result<TimerSpec> {
    let mut clock = SystemClock::new();
    Ok(calibrate(&mut clock, DEFAULT_CALIBRATION_SAMPLES, tau_acc_ns, DEFAULT_J_MAX)?.spec)
}

fn oracle_for(timer: TimerSpec, table: Option<&Path>) -> Result<OracleSpec> {
    match table {
        Some(path) => OracleSpec::lookup(lookup_table_from_json(path)?, timer),
        None => OracleSpec::logistic(0.009 / timer.tau_prec_ns as f64, 0.5, timer),
    }
}

fn tune_one(
    def: &crate::suite::BenchmarkDefinition,
    timer: &TimerSpec,
    oracle: &OracleSpec,
    budget_ns: u64,
    clock: &mut impl MonotonicClock,
) -> Result<TuneResult> {
    let workload = crate::runner::HostWorkload::from_definition(def)?;
    let mut executor = crate::runner::HostExecutor::new(workload, clock);
    // One unmeasured execution so one-time setup costs stay off the ramp.
    crate::tuning::Executor::measure(&mut executor, 1)?;
    tune(&def.id, &mut executor, timer, oracle, budget_ns)
}

fn cmd_tune(
    target: &str,
    cache: Option<PathBuf>,
    tuning_budget_s: f64,
    tau_acc_ns: Option<u64>,
    oracle_table: Option<PathBuf>,
) -> Result<i32> {
    let defs = resolve_target(target)?;
    let cache = cache_path(cache)?;
    let budget_ns = seconds_to_ns(tuning_budget_s, "tuning budget")?;
    let timer = host_timer(tau_acc_ns)?;
    let oracle = oracle_for(timer, oracle_table.as_deref())?;
    let fingerprint = machine_fingerprint(&timer);
    let mut clock = SystemClock::new();
    for def in &defs {
        let result = tune_one(def, &timer, &oracle, budget_ns, &mut clock)?;
        println!(
            "tuned {}: n = {}, t_hat = {:.3} ns, ramp = {} points",
            def.id, result.n, result.t_hat_ns, result.ramp_len
        );
        cache_store(&cache, &fingerprint, &result)?;
    }
    println!("cache written to {}", cache.display());
    Ok(0)
}

struct RunArgs {
    suite: String,
    cache: Option<PathBuf>,
    budget_s: f64,
    output: PathBuf,
    trials: u64,
    per_trial: u64,
    warmup: u64,
    kde: bool,
    tau_acc_ns: Option<u64>,
    tuning_budget_s: f64,
    oracle_table: Option<PathBuf>,
}

fn cmd_run(args: RunArgs) -> Result<i32> {
    let defs = resolve_target(&args.suite)?;
    let cache = cache_path(args.cache)?;
    let budget_ns = seconds_to_ns(args.budget_s, "budget")?;
    let tuning_budget_ns = seconds_to_ns(args.tuning_budget_s, "tuning budget")?;
    let timer = host_timer(args.tau_acc_ns)?;
    let oracle = oracle_for(timer, args.oracle_table.as_deref())?;
    let fingerprint = machine_fingerprint(&timer);
    let cfg = ExperimentConfig {
        tau_budget_ns: budget_ns,
        measurements_per_trial: args.per_trial,
        trials: args.trials,
        warmup_execs: args.warmup,
    };
    let noop_argv = noop_probe_argv();
    let started_at = unix_now();
    let mut clock = SystemClock::new();
    let mut records = Vec::with_capacity(defs.len());
    for def in &defs {
        let tuned = match cache_lookup(&cache, &def.id, &fingerprint)? {
            Some(cached) => cached,
            None => {
                let fresh = tune_one(def, &timer, &oracle, tuning_budget_ns, &mut clock)?;
                cache_store(&cache, &fingerprint, &fresh)?;
                fresh
            }
        };
        let record = run_experiment(
            def,
            &tuned,
            &cfg,
            &mut clock,
            noop_argv.as_deref(),
            args.kde,
        )?;
        println!(
            "{}: n = {}, min = {:.3} ns, mean = {:.3} ns, median = {:.3} ns, trimmed = {:.3} ns ({} samples)",
            record.id,
            tuned.n,
            record.estimates.min_ns,
            record.estimates.mean_ns,
            record.estimates.median_ns,
            record.estimates.trimmed_mean_ns,
            record.estimates.sample_count,
        );
        records.push(record);
    }
    let report = BenchmarkReport {
        schema_version: REPORT_SCHEMA_VERSION,
        timer: Some(timer),
        fingerprint: Some(fingerprint),
        started_at: Some(started_at),
        finished_at: Some(unix_now()),
        benchmarks: records,
    };
    report.save(&args.output)?;
    println!("report written to {}", args.output.display());
    Ok(0)
}

fn noop_probe_argv() -> Option<Vec<String>> {
    std::env::current_exe()
        .ok()
        .and_then(|exe| exe.to_str().map(|s| vec![s.to_string(), "__noop".to_string()]))
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn cmd_compare(
    baseline_path: &Path,
    candidate_path: &Path,
    threshold: f64,
    json: bool,
) -> Result<i32> {
    let baseline = BenchmarkReport::load(baseline_path)?;
    let candidate = BenchmarkReport::load(candidate_path)?;
    let mut verdicts = Vec::new();
    let mut regressions = 0usize;
    for base_record in &baseline.benchmarks {
        let Some(cand_record) = candidate.record(&base_record.id) else {
            eprintln!("note: {} is missing from the candidate report", base_record.id);
            continue;
        };
        let result = compare_runs(&base_record.estimates, &cand_record.estimates, threshold)?;
        if result.verdict == Verdict::Regression {
            regressions += 1;
        }
        verdicts.push((base_record.id.clone(), result));
    }
    for cand_record in &candidate.benchmarks {
        if baseline.record(&cand_record.id).is_none() {
            eprintln!("note: {} is missing from the baseline report", cand_record.id);
        }
    }
    if json {
        let array: Vec<serde_json::Value> = verdicts
            .iter()
            .map(|(id, r)| {
                serde_json::json!({
                    "id": id,
                    "verdict": r.verdict,
                    "ratio": r.ratio,
                    "baseline_min_ns": r.baseline_min_ns,
                    "candidate_min_ns": r.candidate_min_ns,
                    "threshold": r.threshold,
                })
            })
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&array).expect("verdicts always serialize")
        );
    } else {
        for (id, r) in &verdicts {
            println!(
                "{id}: {} (ratio {:.4}, baseline {:.3} ns, candidate {:.3} ns)",
                r.verdict, r.ratio, r.baseline_min_ns, r.candidate_min_ns
            );
        }
    }
    Ok(if regressions > 0 { 2 } else { 0 })
}

fn cmd_simulate(scenario_path: &Path, seed: Option<u64>, output: &Path) -> Result<i32> {
    let text =
        std::fs::read_to_string(scenario_path).map_err(|e| Error::io(scenario_path, e))?;
    let mut scenario: Scenario =
        serde_json::from_str(&text).map_err(|e| Error::parse(scenario_path, e))?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let id = scenario_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario");
    let report = simulate_report(&scenario, id)?;
    report.save(output)?;
    let est = &report.benchmarks[0].estimates;
    println!(
        "{id}: min = {:.3} ns, mean = {:.3} ns, median = {:.3} ns ({} samples, seed {})",
        est.min_ns, est.mean_ns, est.median_ns, est.sample_count, scenario.seed
    );
    println!("report written to {}", output.display());
    Ok(0)
}

fn cmd_oracle(
    params: Option<String>,
    table: Option<PathBuf>,
    tau_acc_ns: u64,
    tau_prec_ns: u64,
    j_max: u64,
) -> Result<i32> {
    let timer = crate::timer::resolve_timer_spec(tau_prec_ns, Some(tau_acc_ns), j_max)?;
    let spec = match (&table, &params) {
        (Some(path), _) => OracleSpec::lookup(lookup_table_from_json(path)?, timer)?,
        (None, Some(text)) => {
            let (a_text, b_text) = text.split_once(',').ok_or_else(|| {
                Error::InvalidConfig(format!("--params expects \"a,b\", got {text:?}"))
            })?;
            let a: f64 = a_text.trim().parse().map_err(|_| {
                Error::InvalidConfig(format!("invalid logistic steepness {a_text:?}"))
            })?;
            let b: f64 = b_text.trim().parse().map_err(|_| {
                Error::InvalidConfig(format!("invalid logistic midpoint {b_text:?}"))
            })?;
            OracleSpec::logistic(a, b, timer)?
        }
        (None, None) => OracleSpec::logistic(0.009 / timer.tau_prec_ns as f64, 0.5, timer)?,
    };
    let grid = standard_grid(&timer, 200);
    let validation = validate_oracle(&spec, &grid)?;
    for check in &validation.checks {
        match (&check.passed, &check.witness) {
            (true, _) => println!("{}: ok", check.name),
            (false, Some(witness)) => println!("{}: FAIL ({witness})", check.name),
            (false, None) => println!("{}: FAIL", check.name),
        }
    }
    Ok(if validation.all_passed() { 0 } else { 1 })
}
