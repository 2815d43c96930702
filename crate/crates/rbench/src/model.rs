//! A statistical model of benchmark timing and a deterministic simulator
//! for it.
//!
//! A workload is modeled as a tape of `k` instructions with a fixed minimum
//! run time. The environment can only slow it down: each *delay factor*
//! (cache eviction, context switch, allocator pause, ...) may fire after any
//! instruction, independently, adding its time scale to the total. The
//! number of times a factor fires across a run is then a sum of independent
//! Bernoulli trials with per-slot probabilities — a Poisson binomial random
//! variable. On top of the delays sits a bounded timer read error.
//!
//! Folding `n` executions into one measurement amortizes the timer error by
//! `1/n`, but the delay term need not vanish: with per-slot trigger
//! probabilities `p`, the per-execution time converges to the base time plus
//! `sum(tau * sum_of_slot_probs)` rather than to the base time itself. The
//! simulator makes that bias reproducible at will, which is what the test
//! suite uses it for.
//!
//! Everything here is seed-deterministic: the generator is ChaCha8 (a
//! counter-based stream cipher RNG with a stability guarantee), seeded via
//! [`split_seed`], so identical seeds give bit-identical results on every
//! platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted probability-sequence length for
/// [`trigger_count_pmf`]; the convolution is quadratic.
pub const MAX_PMF_LEN: usize = 100_000;

/// Derives an independent sub-seed from a master seed and a stream index.
///
/// This is one finalization step of SplitMix64 applied to the master seed
/// advanced by the index, the conventional way to fan a single u64 seed out
/// into many decorrelated ones.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic workload: `k` instructions taking `t_p0_ns` in total
/// when nothing interferes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProgram {
    /// Instruction count.
    pub k: u64,
    /// Minimum (interference-free) time for one execution.
    pub t_p0_ns: u64,
    /// Optional per-instruction split of `t_p0_ns`; must have length `k`
    /// and sum to `t_p0_ns`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_instruction_times_ns: Option<Vec<u64>>,
}

impl SyntheticProgram {
    pub fn new(k: u64, t_p0_ns: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig(
                "instruction count must be positive".into(),
            ));
        }
        if t_p0_ns == 0 {
            return Err(Error::InvalidConfig("base time must be positive".into()));
        }
        Ok(SyntheticProgram {
            k,
            t_p0_ns,
            per_instruction_times_ns: None,
        })
    }

    pub fn with_instruction_times(mut self, times_ns: Vec<u64>) -> Result<Self> {
        if times_ns.len() as u64 != self.k {
            return Err(Error::InvalidConfig(format!(
                "expected {} per-instruction times, got {}",
                self.k,
                times_ns.len()
            )));
        }
        let sum: u64 = times_ns.iter().sum();
        if sum != self.t_p0_ns {
            return Err(Error::InvalidConfig(format!(
                "per-instruction times sum to {sum} ns, expected {} ns",
                self.t_p0_ns
            )));
        }
        self.per_instruction_times_ns = Some(times_ns);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.t_p0_ns == 0 {
            return Err(Error::InvalidConfig(
                "program needs k >= 1 and a positive base time".into(),
            ));
        }
        if let Some(times) = &self.per_instruction_times_ns {
            if times.len() as u64 != self.k || times.iter().sum::<u64>() != self.t_p0_ns {
                return Err(Error::InvalidConfig(
                    "per-instruction times do not match k and the base time".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Per-slot trigger probabilities of a delay factor: one shared value, or
/// one value per instruction slot (repeated cyclically over the slots of a
/// multi-execution run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TriggerProbs {
    Uniform(f64),
    PerSlot(Vec<f64>),
}

impl TriggerProbs {
    fn validate(&self, k: u64) -> Result<()> {
        match self {
            TriggerProbs::Uniform(p) => check_probability(*p),
            TriggerProbs::PerSlot(ps) => {
                if ps.len() as u64 != k {
                    return Err(Error::InvalidConfig(format!(
                        "per-slot probabilities must have length k = {k}, got {}",
                        ps.len()
                    )));
                }
                ps.iter().try_for_each(|&p| check_probability(p))
            }
        }
    }

    fn for_slot(&self, slot: u64, k: u64) -> f64 {
        match self {
            TriggerProbs::Uniform(p) => *p,
            TriggerProbs::PerSlot(ps) => ps[(slot % k) as usize],
        }
    }

    /// Sum of the k per-slot probabilities (expected triggers per execution).
    fn sum_over_slots(&self, k: u64) -> f64 {
        match self {
            TriggerProbs::Uniform(p) => p * k as f64,
            TriggerProbs::PerSlot(ps) => ps.iter().sum(),
        }
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::InvalidProbability(p));
    }
    Ok(())
}

/// An environmental delay source: fires independently in each instruction
/// slot, adding `tau_ns` per trigger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayFactor {
    pub tau_ns: u64,
    pub probs: TriggerProbs,
}

impl DelayFactor {
    pub fn uniform(tau_ns: u64, p: f64) -> Result<Self> {
        check_probability(p)?;
        Ok(DelayFactor {
            tau_ns,
            probs: TriggerProbs::Uniform(p),
        })
    }

    pub fn per_slot(tau_ns: u64, ps: Vec<f64>) -> Result<Self> {
        ps.iter().try_for_each(|&p| check_probability(p))?;
        Ok(DelayFactor {
            tau_ns,
            probs: TriggerProbs::PerSlot(ps),
        })
    }
}

/// Timer read error: none, or uniform on `[-bound_ns, +bound_ns]`. The
/// bound should not exceed the governing timer's accuracy, which is by
/// definition the largest error a reading can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TimerErrorModel {
    #[default]
    None,
    Uniform {
        bound_ns: u64,
    },
}

/// One timing measurement: the wall time for `n_execs` back-to-back
/// executions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measurement {
    pub total_time_ns: u64,
    pub n_execs: u64,
}

impl Measurement {
    /// Per-execution time sample.
    pub fn per_exec_ns(&self) -> f64 {
        self.total_time_ns as f64 / self.n_execs as f64
    }
}

/// An ordered run of measurements gathered consecutively under one
/// configuration. All measurements in a trial share the same `n_execs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_index: u64,
    pub measurements: Vec<Measurement>,
}

impl Trial {
    pub fn new(trial_index: u64, measurements: Vec<Measurement>) -> Result<Self> {
        if measurements.is_empty() {
            return Err(Error::InvalidConfig("a trial cannot be empty".into()));
        }
        let n = measurements[0].n_execs;
        if measurements.iter().any(|m| m.n_execs != n) {
            return Err(Error::InvalidConfig(
                "all measurements in a trial must share one execution count".into(),
            ));
        }
        Ok(Trial {
            trial_index,
            measurements,
        })
    }

    pub fn n_execs(&self) -> u64 {
        self.measurements[0].n_execs
    }

    pub fn per_exec_samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.measurements.iter().map(Measurement::per_exec_ns)
    }
}

/// Probability mass function of the total trigger count for independent
/// Bernoulli slots with the given success probabilities (a Poisson binomial
/// distribution), computed by the iterative convolution recurrence.
///
/// Entry `m` of the result is the probability of exactly `m` triggers.
pub fn trigger_count_pmf(probs: &[f64]) -> Result<Vec<f64>> {
    if probs.len() > MAX_PMF_LEN {
        return Err(Error::InvalidConfig(format!(
            "probability sequence too long: {} > {MAX_PMF_LEN}",
            probs.len()
        )));
    }
    probs.iter().try_for_each(|&p| check_probability(p))?;
    let mut pmf = vec![0.0f64; probs.len() + 1];
    pmf[0] = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        let q = 1.0 - p;
        for m in (1..=i + 1).rev() {
            pmf[m] = pmf[m] * q + pmf[m - 1] * p;
        }
        pmf[0] *= q;
    }
    Ok(pmf)
}

/// Simulates one measurement of `n` executions.
///
/// The total time is `n * t_p0_ns` plus, for each delay factor, the number
/// of triggered slots (out of the `n * k` independent Bernoulli draws, with
/// the factor's probabilities repeated cyclically) times its time scale,
/// plus a timer error draw, clamped at zero. Draws happen factor by factor
/// in declaration order, then the error draw, all from a ChaCha8 stream
/// seeded with `seed`, so results are bit-stable.
pub fn simulate_measurement(
    prog: &SyntheticProgram,
    factors: &[DelayFactor],
    n: u64,
    err: &TimerErrorModel,
    seed: u64,
) -> Result<Measurement> {
    prog.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfig(
            "a measurement needs at least one execution".into(),
        ));
    }
    for factor in factors {
        factor.probs.validate(prog.k)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = n * prog.k;
    let mut delay_ns: u128 = 0;
    for factor in factors {
        let mut triggers: u64 = 0;
        match &factor.probs {
            TriggerProbs::Uniform(p) => {
                // Same probability in every slot, no need to index.
                for _ in 0..slots {
                    if rng.random::<f64>() < *p {
                        triggers += 1;
                    }
                }
            }
            TriggerProbs::PerSlot(_) => {
                for slot in 0..slots {
                    if rng.random::<f64>() < factor.probs.for_slot(slot, prog.k) {
                        triggers += 1;
                    }
                }
            }
        }
        delay_ns += triggers as u128 * factor.tau_ns as u128;
    }
    let epsilon: i128 = match err {
        TimerErrorModel::None => 0,
        TimerErrorModel::Uniform { bound_ns } => {
            let b = *bound_ns as i64;
            rng.random_range(-b..=b) as i128
        }
    };
    let raw = n as i128 * prog.t_p0_ns as i128 + delay_ns as i128 + epsilon;
    Ok(Measurement {
        total_time_ns: raw.max(0) as u64,
        n_execs: n,
    })
}

/// Simulates a trial of `count` measurements. Measurement `m` uses the
/// sub-seed `split_seed(seed, m)`, so trials are reproducible and distinct
/// measurements are decorrelated.
pub fn simulate_trial(
    prog: &SyntheticProgram,
    factors: &[DelayFactor],
    n: u64,
    err: &TimerErrorModel,
    count: u64,
    seed: u64,
    trial_index: u64,
) -> Result<Trial> {
    if count == 0 {
        return Err(Error::InvalidConfig(
            "a trial needs at least one measurement".into(),
        ));
    }
    let measurements = (0..count)
        .map(|m| simulate_measurement(prog, factors, n, err, split_seed(seed, m)))
        .collect::<Result<Vec<_>>>()?;
    Trial::new(trial_index, measurements)
}

/// The expected per-execution time in the infinite-repetition limit:
/// the base time plus each factor's time scale weighted by its expected
/// triggers per execution. Repetition amortizes timer error but leaves this
/// delay bias intact.
pub fn asymptotic_per_exec_time(prog: &SyntheticProgram, factors: &[DelayFactor]) -> f64 {
    let delay: f64 = factors
        .iter()
        .map(|f| f.tau_ns as f64 * f.probs.sum_over_slots(prog.k))
        .sum();
    prog.t_p0_ns as f64 + delay
}

/// A self-contained simulation configuration, loadable from JSON.
///
/// When `regimes` is non-empty it overrides `factors`: each trial picks one
/// regime through a seeded hash of the trial index, which is how slow
/// environment shifts (bimodality, drift across trials) are reproduced
/// without changing the per-measurement model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub program: SyntheticProgram,
    #[serde(default)]
    pub factors: Vec<DelayFactor>,
    #[serde(default)]
    pub error: TimerErrorModel,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regimes: Vec<Vec<DelayFactor>>,
    pub trials: u64,
    pub measurements_per_trial: u64,
    pub n: u64,
    pub seed: u64,
}

/// Salt separating the regime-selection stream from the trial-seed stream.
const REGIME_SALT: u64 = 0x7265_6769_6d65_7321;

impl Scenario {
    /// The factor set in effect for a given trial.
    pub fn factors_for_trial(&self, trial_index: u64) -> &[DelayFactor] {
        if self.regimes.is_empty() {
            &self.factors
        } else {
            let pick = split_seed(self.seed ^ REGIME_SALT, trial_index) % self.regimes.len() as u64;
            &self.regimes[pick as usize]
        }
    }
}

/// Runs a full scenario: `trials` trials of `measurements_per_trial`
/// measurements each, trial `t` seeded with `split_seed(seed, t)`.
pub fn simulate_scenario(scenario: &Scenario) -> Result<Vec<Trial>> {
    if scenario.trials == 0 {
        return Err(Error::InvalidConfig(
            "a scenario needs at least one trial".into(),
        ));
    }
    (0..scenario.trials)
        .map(|t| {
            simulate_trial(
                &scenario.program,
                scenario.factors_for_trial(t),
                scenario.n,
                &scenario.error,
                scenario.measurements_per_trial,
                split_seed(scenario.seed, t),
                t,
            )
        })
        .collect()
}

/// An executor backed by the simulator, usable anywhere a real benchmark
/// executor is expected. Each `measure` call consumes one sub-seed, so a
/// fixed master seed reproduces the whole call sequence.
#[derive(Debug, Clone)]
pub struct SimulatedExecutor {
    pub program: SyntheticProgram,
    pub factors: Vec<DelayFactor>,
    pub error: TimerErrorModel,
    seed: u64,
    calls: u64,
}

impl SimulatedExecutor {
    pub fn new(
        program: SyntheticProgram,
        factors: Vec<DelayFactor>,
        error: TimerErrorModel,
        seed: u64,
    ) -> Self {
        SimulatedExecutor {
            program,
            factors,
            error,
            seed,
            calls: 0,
        }
    }

    /// An executor with no delay factors and no timer error: `count`
    /// executions always take exactly `count * t_p0_ns`.
    pub fn noiseless(program: SyntheticProgram) -> Self {
        Self::new(program, Vec::new(), TimerErrorModel::None, 0)
    }
}

impl crate::tuning::Executor for SimulatedExecutor {
    fn measure(&mut self, count: u64) -> Result<u64> {
        let seed = split_seed(self.seed, self.calls);
        self.calls += 1;
        let m = simulate_measurement(&self.program, &self.factors, count, &self.error, seed)?;
        Ok(m.total_time_ns)
    }
}
