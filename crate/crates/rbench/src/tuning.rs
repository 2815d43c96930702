//! Selecting the executions-per-measurement count for a benchmark.
//!
//! The procedure walks a ramp: measure the time for 1 execution, then 2,
//! and so on up to the timer bound `j`, stopping early once the accumulated
//! ramp time reaches a budget. The per-execution estimate is the minimum of
//! `T_i / i` over the ramp — with one-sided noise every error term is
//! non-negative, so the minimum is the sample carrying the least error.
//! Feeding that estimate to the oracle yields `n`.
//!
//! If negative timer error sneaks a small-`i` underestimate into the ramp,
//! the oracle simply returns a larger `n` than strictly necessary, which
//! costs budget but not correctness.
//!
//! Tuning is a preprocessing step, run once per benchmark per machine and
//! cached; experiments reuse the cached `n`.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::oracle::OracleSpec;
use crate::timer::{TimerSpec, DEFAULT_J_MAX};

/// Default ramp budget: five seconds. The full ramp costs time quadratic in
/// `j`, which is prohibitive for slow workloads, so it is cut off here.
pub const DEFAULT_TUNING_BUDGET_NS: u64 = 5_000_000_000;

/// Something that can run a workload an exact number of back-to-back times
/// and report the elapsed nanoseconds.
pub trait Executor {
    fn measure(&mut self, count: u64) -> Result<u64>;
}

/// The outcome of tuning one benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub benchmark_id: String,
    /// Executions per measurement to use in experiments.
    pub n: u64,
    /// Minimum per-execution time observed on the ramp.
    pub t_hat_ns: f64,
    /// Timer characteristics in effect when tuning ran.
    pub timer: TimerSpec,
    pub oracle_kind: String,
    /// Unix seconds.
    pub tuned_at: u64,
    /// Ramp points actually measured.
    pub ramp_len: u64,
}

/// Runs the tuning ramp for one benchmark.
///
/// Ramp points with a zero reading are excluded from the minimum (a zero
/// would drag the estimate to the oracle's maximum); if every point reads
/// zero the workload is too fast for the timer even at `i = j` and tuning
/// fails. The ramp stops at `i = j` or once the accumulated measured time
/// reaches `tuning_budget_ns`, whichever comes first, so the budget is
/// never exceeded by more than one measurement.
pub fn tune(
    benchmark_id: &str,
    executor: &mut dyn Executor,
    timer: &TimerSpec,
    oracle: &OracleSpec,
    tuning_budget_ns: u64,
) -> Result<TuneResult> {
    if tuning_budget_ns == 0 {
        return Err(Error::InvalidConfig(
            "tuning budget must be positive".into(),
        ));
    }
    let mut elapsed: u128 = 0;
    let mut t_hat_ns: Option<f64> = None;
    let mut ramp_len = 0u64;
    for i in 1..=timer.j {
        let total = executor.measure(i)?;
        ramp_len = i;
        elapsed += total as u128;
        if total > 0 {
            let per_exec = total as f64 / i as f64;
            t_hat_ns = Some(t_hat_ns.map_or(per_exec, |t: f64| t.min(per_exec)));
        }
        if elapsed >= tuning_budget_ns as u128 {
            break;
        }
    }
    let t_hat_ns = t_hat_ns.ok_or(Error::DegenerateBenchmark)?;
    let n = oracle.n_for(t_hat_ns).clamp(1, timer.j);
    Ok(TuneResult {
        benchmark_id: benchmark_id.to_string(),
        n,
        t_hat_ns,
        timer: *timer,
        oracle_kind: oracle.kind().to_string(),
        tuned_at: unix_now(),
        ramp_len,
    })
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// A fingerprint of the machine a tuning result is valid for: hostname,
/// CPU model string, and the timer characteristics.
///
/// The timer values enter by order of magnitude, not exactly: the measured
/// precision wobbles a little from run to run (it reflects the cost of a
/// clock read), and hashing the exact value would make every process a
/// cache miss. A timer that genuinely changes class still changes the
/// fingerprint.
pub fn machine_fingerprint(timer: &TimerSpec) -> String {
    let mut hasher = Sha256::new();
    hasher.update(hostname().as_bytes());
    hasher.update([0]);
    hasher.update(cpu_model().as_bytes());
    hasher.update([0]);
    hasher.update(decade(timer.tau_acc_ns).to_le_bytes());
    hasher.update(decade(timer.tau_prec_ns).to_le_bytes());
    hex::encode(&hasher.finalize()[..16])
}

fn decade(value_ns: u64) -> u32 {
    value_ns.max(1).ilog10()
}

fn hostname() -> String {
    std::fs::read_to_string("/proc/sys/kernel/hostname")
        .map(|s| s.trim().to_string())
        .or_else(|_| std::env::var("HOSTNAME"))
        .unwrap_or_else(|_| "unknown-host".to_string())
}

fn cpu_model() -> String {
    if let Ok(info) = std::fs::read_to_string("/proc/cpuinfo") {
        for line in info.lines() {
            if let Some(rest) = line.strip_prefix("model name") {
                if let Some((_, value)) = rest.split_once(':') {
                    return value.trim().to_string();
                }
            }
        }
    }
    std::env::consts::ARCH.to_string()
}

pub const CACHE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheFile {
    schema_version: u32,
    entries: Vec<CacheEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheEntry {
    benchmark_id: String,
    fingerprint: String,
    n: u64,
    t_hat_ns: f64,
    tau_acc_ns: u64,
    tau_prec_ns: u64,
    oracle_kind: String,
    tuned_at: u64,
    ramp_len: u64,
}

impl CacheEntry {
    fn from_result(result: &TuneResult, fingerprint: &str) -> Self {
        CacheEntry {
            benchmark_id: result.benchmark_id.clone(),
            fingerprint: fingerprint.to_string(),
            n: result.n,
            t_hat_ns: result.t_hat_ns,
            tau_acc_ns: result.timer.tau_acc_ns,
            tau_prec_ns: result.timer.tau_prec_ns,
            oracle_kind: result.oracle_kind.clone(),
            tuned_at: result.tuned_at,
            ramp_len: result.ramp_len,
        }
    }

    fn into_result(self) -> TuneResult {
        // j is not persisted; rebuild it from the stored timer pair under
        // the default cap.
        let j = (self.tau_acc_ns / self.tau_prec_ns.max(1)).clamp(1, DEFAULT_J_MAX);
        TuneResult {
            benchmark_id: self.benchmark_id,
            n: self.n,
            t_hat_ns: self.t_hat_ns,
            timer: TimerSpec {
                tau_acc_ns: self.tau_acc_ns,
                tau_prec_ns: self.tau_prec_ns,
                j,
            },
            oracle_kind: self.oracle_kind,
            tuned_at: self.tuned_at,
            ramp_len: self.ramp_len,
        }
    }
}

fn load_cache(path: &Path) -> Result<CacheFile> {
    if !path.exists() {
        return Ok(CacheFile {
            schema_version: CACHE_SCHEMA_VERSION,
            entries: Vec::new(),
        });
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

/// Inserts or replaces the cache entry for `(result.benchmark_id,
/// fingerprint)`. The file is rewritten atomically via a temporary file in
/// the same directory.
pub fn cache_store(path: &Path, fingerprint: &str, result: &TuneResult) -> Result<()> {
    let mut cache = load_cache(path)?;
    let entry = CacheEntry::from_result(result, fingerprint);
    match cache
        .entries
        .iter_mut()
        .find(|e| e.benchmark_id == entry.benchmark_id && e.fingerprint == entry.fingerprint)
    {
        Some(existing) => *existing = entry,
        None => cache.entries.push(entry),
    }
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or_else(|| Path::new(".")))
        .map_err(|e| Error::io(path, e))?;
    let mut text = serde_json::to_string_pretty(&cache).expect("cache always serializes");
    text.push('\n');
    std::io::Write::write_all(&mut tmp, text.as_bytes()).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Looks up the tuning result for `(benchmark_id, fingerprint)`. A missing
/// file or missing entry is a miss, not an error; a corrupt file is an
/// error naming the path.
pub fn cache_lookup(
    path: &Path,
    benchmark_id: &str,
    fingerprint: &str,
) -> Result<Option<TuneResult>> {
    let cache = load_cache(path)?;
    Ok(cache
        .entries
        .into_iter()
        .find(|e| e.benchmark_id == benchmark_id && e.fingerprint == fingerprint)
        .map(CacheEntry::into_result))
}
