//! The oracle function: mapping an estimated execution time to the number of
//! executions folded into one measurement.
//!
//! Fast workloads need many back-to-back executions per measurement so that
//! timer error, amortized over the executions, falls below the clock's
//! precision. Slow workloads need none. The oracle `n = oracle(t)` encodes
//! this tradeoff as a non-increasing map from an estimated per-execution
//! time `t` to a repetition count in `{1, ..., j}`.
//!
//! Two forms are provided: a generalized-logistic curve
//!
//! ```text
//! n(t) = floor(1 + (j - 1) / (1 + e^(a * (t - b * tau_acc))))
//! ```
//!
//! and a step lookup table of `(threshold_ns, n)` pairs, which is what the
//! harness ships by default and what a per-machine tuning pass would
//! regenerate.

use std::path::Path;

use crate::error::{Error, Result};
use crate::timer::TimerSpec;

/// Exponent clamp for the logistic form. `e^700` is already far beyond any
/// meaningful contribution and larger exponents would overflow to infinity;
/// the clamp cannot change the floored result.
const EXPONENT_CLAMP: f64 = 700.0;

/// Accepted range for `a * tau_prec` in the logistic form.
pub const LOGISTIC_A_RANGE: (f64, f64) = (0.005, 0.02);
/// Accepted range for the midpoint fraction `b` in the logistic form.
pub const LOGISTIC_B_RANGE: (f64, f64) = (0.4, 0.6);

/// A lookup-table row: workloads estimated at or below `threshold_ns` get
/// `n` executions per measurement.
pub type LookupEntry = (u64, u64);

#[derive(Debug, Clone, PartialEq)]
pub enum OracleFunction {
    /// Generalized-logistic curve with steepness `a_per_ns` (1/ns) and
    /// midpoint at `b` times the timer accuracy.
    Logistic { a_per_ns: f64, b: f64 },
    /// Step table; thresholds strictly increasing, `n` values non-increasing.
    Lookup { table: Vec<LookupEntry> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpec {
    pub function: OracleFunction,
    pub timer: TimerSpec,
}

impl OracleSpec {
    /// Logistic oracle with parameter range checking.
    pub fn logistic(a_per_ns: f64, b: f64, timer: TimerSpec) -> Result<Self> {
        let a_scaled = a_per_ns * timer.tau_prec_ns as f64;
        if !(a_scaled > LOGISTIC_A_RANGE.0 && a_scaled < LOGISTIC_A_RANGE.1) {
            return Err(Error::InvalidConfig(format!(
                "logistic steepness out of range: a * tau_prec = {a_scaled}, expected ({}, {})",
                LOGISTIC_A_RANGE.0, LOGISTIC_A_RANGE.1
            )));
        }
        if !(b > LOGISTIC_B_RANGE.0 && b < LOGISTIC_B_RANGE.1) {
            return Err(Error::InvalidConfig(format!(
                "logistic midpoint fraction out of range: b = {b}, expected ({}, {})",
                LOGISTIC_B_RANGE.0, LOGISTIC_B_RANGE.1
            )));
        }
        Ok(Self::logistic_unchecked(a_per_ns, b, timer))
    }

    /// Logistic oracle without range checking.
    pub fn logistic_unchecked(a_per_ns: f64, b: f64, timer: TimerSpec) -> Self {
        OracleSpec {
            function: OracleFunction::Logistic { a_per_ns, b },
            timer,
        }
    }

    /// Lookup oracle with table validation: non-empty, thresholds strictly
    /// increasing, `n` values non-increasing and within `{1, ..., j}`.
    pub fn lookup(table: Vec<LookupEntry>, timer: TimerSpec) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::EmptyLookupTable);
        }
        for window in table.windows(2) {
            let [(t0, n0), (t1, n1)] = [window[0], window[1]];
            if t1 <= t0 {
                return Err(Error::InvalidConfig(format!(
                    "lookup thresholds must be strictly increasing: {t0} ns then {t1} ns"
                )));
            }
            if n1 > n0 {
                return Err(Error::InvalidConfig(format!(
                    "lookup n values must be non-increasing: {n0} then {n1}"
                )));
            }
        }
        for &(threshold, n) in &table {
            if n == 0 || n > timer.j {
                return Err(Error::InvalidConfig(format!(
                    "lookup n values must lie in 1..={}, found {n} at threshold {threshold} ns",
                    timer.j
                )));
            }
        }
        Ok(Self::lookup_unchecked(table, timer))
    }

    /// Lookup oracle without table validation. Intended for feeding
    /// deliberately broken tables to [`validate_oracle`].
    pub fn lookup_unchecked(table: Vec<LookupEntry>, timer: TimerSpec) -> Self {
        OracleSpec {
            function: OracleFunction::Lookup { table },
            timer,
        }
    }

    /// Default lookup table: one step per decade from just above the timer
    /// precision to the timer accuracy, dropping `n` tenfold per step. A
    /// starting point meant to be replaced by per-machine tuning.
    pub fn default_lookup(timer: TimerSpec) -> Self {
        let mut table = Vec::new();
        let mut threshold = timer.tau_prec_ns.saturating_mul(10);
        let mut n = timer.j;
        loop {
            table.push((threshold, n.max(1)));
            if threshold >= timer.tau_acc_ns || table.len() >= 32 {
                break;
            }
            threshold = threshold.saturating_mul(10);
            n /= 10;
        }
        Self::lookup_unchecked(table, timer)
    }

    /// The repetition count for an estimated per-execution time `t_ns`.
    pub fn n_for(&self, t_ns: f64) -> u64 {
        let t = t_ns.max(0.0);
        match &self.function {
            OracleFunction::Logistic { a_per_ns, b } => {
                let j = self.timer.j;
                let exponent = (a_per_ns * (t - b * self.timer.tau_acc_ns as f64))
                    .clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP);
                let y = 1.0 + (j - 1) as f64 / (1.0 + exponent.exp());
                (y.floor() as u64).clamp(1, j)
            }
            OracleFunction::Lookup { table } => {
                let idx = table.partition_point(|&(threshold, _)| (threshold as f64) < t);
                match table.get(idx) {
                    Some(&(_, n)) => n,
                    None => 1,
                }
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.function {
            OracleFunction::Logistic { .. } => "logistic",
            OracleFunction::Lookup { .. } => "lookup",
        }
    }
}

/// Reads a lookup table from a JSON array of `[threshold_ns, n]` pairs.
pub fn lookup_table_from_json(path: &Path) -> Result<Vec<LookupEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

/// Serializes a lookup table as a JSON array of `[threshold_ns, n]` pairs.
pub fn lookup_table_to_json(table: &[LookupEntry]) -> String {
    serde_json::to_string(table).expect("lookup tables always serialize")
}

/// One validated oracle property.
#[derive(Debug, Clone)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Human-readable witness for a failure.
    pub witness: Option<String>,
}

/// Outcome of [`validate_oracle`]: five property checks in a fixed order.
#[derive(Debug, Clone)]
pub struct OracleValidation {
    pub checks: Vec<PropertyCheck>,
}

impl OracleValidation {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Builds a log-spaced evaluation grid spanning a tenth of the timer
/// precision to ten times the timer accuracy, always containing the
/// precision and accuracy points themselves. `points` is clamped to at
/// least 100.
pub fn standard_grid(timer: &TimerSpec, points: usize) -> Vec<f64> {
    let points = points.max(100);
    let lo = timer.tau_prec_ns as f64 / 10.0;
    let hi = 10.0 * timer.tau_acc_ns as f64;
    let ratio = hi / lo;
    let mut grid: Vec<f64> = (0..points)
        .map(|i| lo * ratio.powf(i as f64 / (points - 1) as f64))
        .collect();
    grid[0] = lo;
    *grid.last_mut().expect("non-empty") = hi;
    grid.push(timer.tau_prec_ns as f64);
    grid.push(timer.tau_acc_ns as f64);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Checks the five properties an oracle must satisfy over `grid`:
///
/// 1. every value lies in `{1, ..., j}`;
/// 2. the map is non-increasing in `t`;
/// 3. `n(tau_prec) >= 0.9 * j` — fast workloads get nearly the full count;
/// 4. `n(t) == 1` for every grid point `t >= 2 * tau_acc` — slow workloads
///    are not repeated;
/// 5. perturbing `t` by ±10% at `tau_prec` and at `tau_acc` changes the
///    output by at most 5% of `j` — weak dependence on either timer
///    parameter, neither of which is ever known exactly.
///
/// The grid must hold at least 100 points, span
/// `[tau_prec / 10, 10 * tau_acc]`, and contain `tau_prec` and `tau_acc`.
pub fn validate_oracle(spec: &OracleSpec, grid: &[f64]) -> Result<OracleValidation> {
    let timer = &spec.timer;
    let prec = timer.tau_prec_ns as f64;
    let acc = timer.tau_acc_ns as f64;
    if grid.len() < 100 {
        return Err(Error::InvalidConfig(format!(
            "oracle validation grid needs at least 100 points, got {}",
            grid.len()
        )));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], *sorted.last().expect("non-empty"));
    if lo > prec / 10.0 || hi < 10.0 * acc {
        return Err(Error::InvalidConfig(format!(
            "oracle validation grid must span [{}, {}] ns, got [{lo}, {hi}]",
            prec / 10.0,
            10.0 * acc
        )));
    }
    if !sorted.contains(&prec) || !sorted.contains(&acc) {
        return Err(Error::InvalidConfig(
            "oracle validation grid must contain the precision and accuracy points".into(),
        ));
    }

    let values: Vec<(f64, u64)> = sorted.iter().map(|&t| (t, spec.n_for(t))).collect();
    let j = timer.j;
    let mut checks = Vec::with_capacity(5);

    let range_witness = values
        .iter()
        .find(|&&(_, n)| n < 1 || n > j)
        .map(|&(t, n)| format!("n({t} ns) = {n}, outside 1..={j}"));
    checks.push(PropertyCheck {
        name: "range",
        passed: range_witness.is_none(),
        witness: range_witness,
    });

    let monotone_witness = values
        .windows(2)
        .find(|w| w[1].1 > w[0].1)
        .map(|w| format!("n({} ns) = {} < n({} ns) = {}", w[0].0, w[0].1, w[1].0, w[1].1));
    checks.push(PropertyCheck {
        name: "non-increasing",
        passed: monotone_witness.is_none(),
        witness: monotone_witness,
    });

    let n_at_prec = spec.n_for(prec);
    let fast_passed = n_at_prec as f64 >= 0.9 * j as f64;
    checks.push(PropertyCheck {
        name: "near-full-count-at-precision",
        passed: fast_passed,
        witness: (!fast_passed).then(|| format!("n({prec} ns) = {n_at_prec} < 0.9 * {j}")),
    });

    let slow_witness = values
        .iter()
        .find(|&&(t, n)| t >= 2.0 * acc && n != 1)
        .map(|&(t, n)| format!("n({t} ns) = {n}, expected 1 beyond {} ns", 2.0 * acc));
    checks.push(PropertyCheck {
        name: "single-execution-beyond-accuracy",
        passed: slow_witness.is_none(),
        witness: slow_witness,
    });

    let mut sensitivity_witness = None;
    'outer: for t in [prec, acc] {
        let reference = spec.n_for(t);
        for factor in [0.9, 1.1] {
            let perturbed = spec.n_for(t * factor);
            let delta = perturbed.abs_diff(reference);
            if delta as f64 > 0.05 * j as f64 {
                sensitivity_witness = Some(format!(
                    "|n({} ns) - n({t} ns)| = {delta} > 5% of j = {j}",
                    t * factor
                ));
                break 'outer;
            }
        }
    }
    checks.push(PropertyCheck {
        name: "insensitive-at-endpoints",
        passed: sensitivity_witness.is_none(),
        witness: sensitivity_witness,
    });

    Ok(OracleValidation { checks })
}
