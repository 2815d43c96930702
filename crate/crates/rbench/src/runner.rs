//! Running real workloads under a tuned configuration.
//!
//! An experiment gathers measurements of `n` back-to-back executions each,
//! organized into trials, until either the requested number of trials is
//! complete or the accumulated measured time reaches the budget. The budget
//! is never overshot by more than a single measurement. All measured
//! executions run sequentially on one thread.

use std::path::PathBuf;
use std::process::{Command, Stdio};

use crate::analysis::{kde, Bandwidth, DensityCurve};
use crate::error::{Error, Result};
use crate::model::{Measurement, Trial};
use crate::report::{BenchmarkRecord, TrialRecord};
use crate::suite::{BenchmarkDefinition, BenchmarkKind};
use crate::timer::MonotonicClock;
use crate::tuning::{Executor, TuneResult};
use crate::workloads::Builtin;

pub const DEFAULT_MEASUREMENTS_PER_TRIAL: u64 = 10_000;
pub const DEFAULT_TRIALS: u64 = 10;
pub const DEFAULT_WARMUP_EXECS: u64 = 1;

/// How much measuring to do for one benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentConfig {
    /// Total measured-time budget for the benchmark, in nanoseconds.
    pub tau_budget_ns: u64,
    pub measurements_per_trial: u64,
    pub trials: u64,
    /// Unmeasured executions before measuring starts; excludes one-time
    /// code-loading costs without pretending workloads "warm up".
    pub warmup_execs: u64,
}

impl ExperimentConfig {
    pub fn with_budget(tau_budget_ns: u64) -> Self {
        ExperimentConfig {
            tau_budget_ns,
            measurements_per_trial: DEFAULT_MEASUREMENTS_PER_TRIAL,
            trials: DEFAULT_TRIALS,
            warmup_execs: DEFAULT_WARMUP_EXECS,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.tau_budget_ns == 0 {
            return Err(Error::InvalidConfig("budget must be positive".into()));
        }
        if self.trials == 0 || self.measurements_per_trial == 0 {
            return Err(Error::InvalidConfig(
                "trials and measurements per trial must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A host-executed workload: a builtin, or a subprocess timed over its
/// whole lifetime.
#[derive(Debug, Clone)]
pub enum HostWorkload {
    Builtin(Builtin),
    Command {
        argv: Vec<String>,
        workdir: Option<PathBuf>,
    },
}

impl HostWorkload {
    pub fn from_definition(def: &BenchmarkDefinition) -> Result<Self> {
        Ok(match &def.kind {
            BenchmarkKind::Builtin { name, size } => {
                HostWorkload::Builtin(Builtin::resolve(name, *size)?)
            }
            BenchmarkKind::Command { argv, workdir } => HostWorkload::Command {
                argv: argv.clone(),
                workdir: workdir.clone(),
            },
        })
    }

    fn run_once(&self) -> Result<u64> {
        match self {
            HostWorkload::Builtin(builtin) => Ok(builtin.execute()),
            HostWorkload::Command { argv, workdir } => {
                let mut cmd = Command::new(&argv[0]);
                cmd.args(&argv[1..])
                    .stdin(Stdio::null())
                    .stdout(Stdio::null())
                    .stderr(Stdio::null());
                if let Some(dir) = workdir {
                    cmd.current_dir(dir);
                }
                let status = cmd
                    .status()
                    .map_err(|e| Error::Executor(format!("failed to spawn {:?}: {e}", argv[0])))?;
                Ok(status.code().unwrap_or(-1) as u64)
            }
        }
    }
}

/// Wraps a [`HostWorkload`] and a clock into an [`Executor`]. Every
/// execution's return value passes through `black_box` and is folded into
/// `checksum`, so the measured bodies stay live.
pub struct HostExecutor<'c, C: MonotonicClock> {
    workload: HostWorkload,
    clock: &'c mut C,
    pub checksum: u64,
}

impl<'c, C: MonotonicClock> HostExecutor<'c, C> {
    pub fn new(workload: HostWorkload, clock: &'c mut C) -> Self {
        HostExecutor {
            workload,
            clock,
            checksum: 0,
        }
    }
}

impl<C: MonotonicClock> Executor for HostExecutor<'_, C> {
    fn measure(&mut self, count: u64) -> Result<u64> {
        let start = self.clock.now_ns();
        for _ in 0..count {
            let value = std::hint::black_box(self.workload.run_once()?);
            self.checksum = self.checksum.rotate_left(1) ^ value;
        }
        let end = self.clock.now_ns();
        Ok(end.saturating_sub(start))
    }
}

/// The measurement loop: gathers measurements of `n` executions each into
/// trials of `measurements_per_trial`, stopping at `trials` full trials or
/// once the accumulated measured time reaches the budget, whichever comes
/// first. A partial final trial is kept as long as it holds at least one
/// measurement.
///
/// `t_hat_ns` is only used for the upfront feasibility check: a budget
/// smaller than one expected measurement (`n * t_hat_ns`) is rejected, and
/// the error names that minimum.
pub fn run_measurements(
    executor: &mut dyn Executor,
    n: u64,
    t_hat_ns: f64,
    cfg: &ExperimentConfig,
) -> Result<Vec<Trial>> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfig(
            "executions per measurement must be positive".into(),
        ));
    }
    let required_ns = (n as f64 * t_hat_ns).ceil().max(1.0) as u64;
    if cfg.tau_budget_ns < required_ns {
        return Err(Error::BudgetTooSmall {
            budget_ns: cfg.tau_budget_ns,
            required_ns,
        });
    }

    let mut trials: Vec<Trial> = Vec::new();
    let mut current: Vec<Measurement> = Vec::new();
    let mut elapsed: u128 = 0;
    'measuring: while (trials.len() as u64) < cfg.trials {
        let total_time_ns = executor.measure(n)?;
        elapsed += total_time_ns as u128;
        current.push(Measurement {
            total_time_ns,
            n_execs: n,
        });
        if current.len() as u64 == cfg.measurements_per_trial {
            trials.push(Trial::new(trials.len() as u64, std::mem::take(&mut current))?);
        }
        if elapsed >= cfg.tau_budget_ns as u128 {
            break 'measuring;
        }
    }
    if !current.is_empty() {
        trials.push(Trial::new(trials.len() as u64, current)?);
    }
    Ok(trials)
}

/// Times `runs` spawns of a no-op command and returns the smallest, as a
/// floor estimate of per-spawn overhead. Reported next to command-kind
/// results, never subtracted from them.
pub fn measure_spawn_overhead(
    noop_argv: &[String],
    clock: &mut impl MonotonicClock,
    runs: u32,
) -> Result<f64> {
    if noop_argv.is_empty() {
        return Err(Error::InvalidConfig("no-op argv must not be empty".into()));
    }
    let workload = HostWorkload::Command {
        argv: noop_argv.to_vec(),
        workdir: None,
    };
    let mut best = f64::INFINITY;
    for _ in 0..runs.max(1) {
        let start = clock.now_ns();
        workload.run_once()?;
        let end = clock.now_ns();
        best = best.min(end.saturating_sub(start) as f64);
    }
    Ok(best)
}

/// Runs one benchmark end to end: warmup, measurement loop, estimates, and
/// (optionally) a density curve. For command benchmarks, `noop_argv` is
/// spawned a few times to estimate the subprocess floor.
pub fn run_experiment(
    def: &BenchmarkDefinition,
    tune: &TuneResult,
    cfg: &ExperimentConfig,
    clock: &mut impl MonotonicClock,
    noop_argv: Option<&[String]>,
    with_kde: bool,
) -> Result<BenchmarkRecord> {
    if tune.n == 0 {
        return Err(Error::InvalidConfig(
            "tuning result has a zero execution count".into(),
        ));
    }
    let is_command = matches!(def.kind, BenchmarkKind::Command { .. });
    let spawn_overhead_ns = match (is_command, noop_argv) {
        (true, Some(argv)) => Some(measure_spawn_overhead(argv, clock, 16)?),
        _ => None,
    };

    let workload = HostWorkload::from_definition(def)?;
    let mut executor = HostExecutor::new(workload, clock);
    if cfg.warmup_execs > 0 {
        executor.measure(cfg.warmup_execs)?;
    }
    let trials = run_measurements(&mut executor, tune.n, tune.t_hat_ns, cfg)?;
    let checksum = executor.checksum;

    let trial_records: Vec<TrialRecord> = trials.iter().map(TrialRecord::from_trial).collect();
    let density = if with_kde {
        let samples = crate::report::pooled_samples(&trial_records);
        Some(density_for_samples(&samples, tune.timer.tau_prec_ns)?)
    } else {
        None
    };
    let mut record =
        BenchmarkRecord::from_trials(&def.id, Some(tune.clone()), trial_records, density)?;
    record.spawn_overhead_ns = spawn_overhead_ns;
    record.result_checksum = Some(format!("{checksum:016x}"));
    Ok(record)
}

/// Silverman-bandwidth density curve with the timer precision as the
/// degenerate-sample fallback.
pub fn density_for_samples(samples: &[f64], tau_prec_ns: u64) -> Result<DensityCurve> {
    kde(
        samples,
        Bandwidth::Silverman {
            fallback_ns: tau_prec_ns.max(1) as f64,
        },
        200,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SimulatedExecutor, SyntheticProgram};
    use crate::timer::{resolve_timer_spec, SystemClock};
    use crate::tuning::TuneResult;

    fn config(budget: u64, per_trial: u64, trials: u64) -> ExperimentConfig {
        ExperimentConfig {
            tau_budget_ns: budget,
            measurements_per_trial: per_trial,
            trials,
            warmup_execs: 0,
        }
    }

    fn noiseless_executor(t_p0: u64) -> SimulatedExecutor {
        SimulatedExecutor::noiseless(SyntheticProgram::new(1, t_p0).unwrap())
    }

    #[test]
    fn full_trials_complete_within_a_generous_budget() {
        // 100 ns per execution, n = 100: each measurement is 10^4 ns, the
        // 10^9 ns budget admits exactly 10 trials of 10^4 measurements.
        let mut executor = noiseless_executor(100);
        let trials =
            run_measurements(&mut executor, 100, 100.0, &config(1_000_000_000, 10_000, 10))
                .unwrap();
        assert_eq!(trials.len(), 10);
        assert!(trials.iter().all(|t| t.measurements.len() == 10_000));
    }

    #[test]
    fn small_budget_yields_a_partial_trial() {
        // Budget 5e4 ns admits exactly 5 measurements of 10^4 ns.
        let mut executor = noiseless_executor(100);
        let trials =
            run_measurements(&mut executor, 100, 100.0, &config(50_000, 10_000, 10)).unwrap();
        assert_eq!(trials.len(), 1);
        assert_eq!(trials[0].measurements.len(), 5);
    }

    #[test]
    fn budget_overshoot_is_at_most_one_measurement() {
        let mut executor = noiseless_executor(100);
        let budget = 33_000u64; // not a multiple of the 10^4 ns measurement
        let trials = run_measurements(&mut executor, 100, 100.0, &config(budget, 100, 10)).unwrap();
        let measured: u64 = trials
            .iter()
            .flat_map(|t| t.measurements.iter().map(|m| m.total_time_ns))
            .sum();
        assert!(measured >= budget);
        assert!(measured <= budget + 10_000);
    }

    #[test]
    fn infeasible_budget_names_the_minimum() {
        let mut executor = noiseless_executor(100);
        let err =
            run_measurements(&mut executor, 100, 100.0, &config(9_999, 10, 10)).unwrap_err();
        match err {
            Error::BudgetTooSmall {
                budget_ns,
                required_ns,
            } => {
                assert_eq!(budget_ns, 9_999);
                assert_eq!(required_ns, 10_000);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn trial_indices_are_sequential() {
        let mut executor = noiseless_executor(10);
        let trials = run_measurements(&mut executor, 1, 10.0, &config(1_000, 10, 50)).unwrap();
        for (i, t) in trials.iter().enumerate() {
            assert_eq!(t.trial_index, i as u64);
        }
    }

    #[test]
    fn builtin_experiment_produces_a_consistent_record() {
        let def = BenchmarkDefinition {
            id: "sumindex-small".into(),
            kind: BenchmarkKind::Builtin {
                name: "sumindex".into(),
                size: Some(64),
            },
        };
        let timer = resolve_timer_spec(1, Some(1000), 10_000).unwrap();
        let tune = TuneResult {
            benchmark_id: def.id.clone(),
            n: 8,
            t_hat_ns: 100.0,
            timer,
            oracle_kind: "logistic".into(),
            tuned_at: 0,
            ramp_len: 1,
        };
        let cfg = ExperimentConfig {
            tau_budget_ns: 3_000_000,
            measurements_per_trial: 50,
            trials: 3,
            warmup_execs: 1,
        };
        let mut clock = SystemClock::new();
        let record = run_experiment(&def, &tune, &cfg, &mut clock, None, true).unwrap();
        assert_eq!(record.id, "sumindex-small");
        assert!(!record.trials.is_empty());
        assert!(record.result_checksum.is_some());
        assert!(record.density.is_some());
        assert!(record.estimates.min_ns > 0.0);
        let recomputed = crate::report::recompute_estimates(&record).unwrap();
        assert_eq!(recomputed.min_ns.to_bits(), record.estimates.min_ns.to_bits());
    }

    #[test]
    fn command_experiment_reports_spawn_overhead() {
        let def = BenchmarkDefinition {
            id: "true-cmd".into(),
            kind: BenchmarkKind::Command {
                argv: vec!["true".into()],
                workdir: None,
            },
        };
        let timer = resolve_timer_spec(1, Some(1000), 10_000).unwrap();
        let tune = TuneResult {
            benchmark_id: def.id.clone(),
            n: 1,
            t_hat_ns: 100_000.0,
            timer,
            oracle_kind: "logistic".into(),
            tuned_at: 0,
            ramp_len: 1,
        };
        let cfg = ExperimentConfig {
            tau_budget_ns: 200_000_000,
            measurements_per_trial: 4,
            trials: 2,
            warmup_execs: 1,
        };
        let mut clock = SystemClock::new();
        let noop = vec!["true".to_string()];
        let record = run_experiment(&def, &tune, &cfg, &mut clock, Some(&noop), false).unwrap();
        let overhead = record.spawn_overhead_ns.unwrap();
        assert!(overhead > 0.0);
        // The spawn floor is genuinely part of each sample, not removed.
        assert!(record.estimates.min_ns >= overhead * 0.5);
    }

    #[test]
    fn missing_command_fails_with_executor_error() {
        let workload = HostWorkload::Command {
            argv: vec!["rbench-test-no-such-binary".into()],
            workdir: None,
        };
        assert!(matches!(workload.run_once(), Err(Error::Executor(_))));
    }
}
