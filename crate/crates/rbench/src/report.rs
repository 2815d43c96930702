//! Persisted benchmark reports.
//!
//! A report is self-contained: raw measurements are always stored alongside
//! the derived estimates, so every estimate can be recomputed from the file
//! and checked bit for bit. Reports produced by the simulator carry no
//! timer, fingerprint, or timestamps — they do not depend on the host, and
//! omitting host state keeps equal-seed runs byte-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{location_estimates, DensityCurve, EstimateSet};
use crate::error::{Error, Result};
use crate::model::{simulate_scenario, Measurement, Scenario, Trial};
use crate::timer::TimerSpec;
use crate::tuning::TuneResult;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Raw measurements of one trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub n_execs: u64,
    pub total_times_ns: Vec<u64>,
}

impl TrialRecord {
    pub fn from_trial(trial: &Trial) -> Self {
        TrialRecord {
            trial_index: trial.trial_index,
            n_execs: trial.n_execs(),
            total_times_ns: trial.measurements.iter().map(|m| m.total_time_ns).collect(),
        }
    }

    pub fn measurements(&self) -> Vec<Measurement> {
        self.total_times_ns
            .iter()
            .map(|&total_time_ns| Measurement {
                total_time_ns,
                n_execs: self.n_execs,
            })
            .collect()
    }

    pub fn per_exec_samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.total_times_ns
            .iter()
            .map(|&t| t as f64 / self.n_execs as f64)
    }
}

/// Everything recorded about one benchmark in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub id: String,
    /// Tuning result in effect; absent for simulated records.
    pub tune: Option<TuneResult>,
    /// Measured subprocess-spawn floor for command benchmarks. Reported so
    /// the reader can judge it; never subtracted from the measurements.
    pub spawn_overhead_ns: Option<f64>,
    /// Folded workload return values, hex-encoded. Ties the report to the
    /// computed results so benchmark bodies cannot be discarded.
    pub result_checksum: Option<String>,
    pub trials: Vec<TrialRecord>,
    pub estimates: EstimateSet,
    pub density: Option<DensityCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    pub timer: Option<TimerSpec>,
    pub fingerprint: Option<String>,
    /// Unix seconds; absent for simulated reports.
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
    pub benchmarks: Vec<BenchmarkRecord>,
}

/// Per-execution samples pooled across trials, in collection order.
pub fn pooled_samples(trials: &[TrialRecord]) -> Vec<f64> {
    trials
        .iter()
        .flat_map(|t| t.per_exec_samples().collect::<Vec<_>>())
        .collect()
}

/// Recomputes a record's estimates from its raw measurements.
pub fn recompute_estimates(record: &BenchmarkRecord) -> Result<EstimateSet> {
    let n_execs = record
        .trials
        .first()
        .map(|t| t.n_execs)
        .ok_or(Error::EmptySamples)?;
    location_estimates(&pooled_samples(&record.trials), n_execs)
}

fn estimates_bit_equal(a: &EstimateSet, b: &EstimateSet) -> bool {
    a.min_ns.to_bits() == b.min_ns.to_bits()
        && a.mean_ns.to_bits() == b.mean_ns.to_bits()
        && a.median_ns.to_bits() == b.median_ns.to_bits()
        && a.trimmed_mean_ns.to_bits() == b.trimmed_mean_ns.to_bits()
        && a.sample_count == b.sample_count
        && a.n_execs == b.n_execs
}

impl BenchmarkRecord {
    /// Builds a record from trials, computing the estimates.
    pub fn from_trials(
        id: &str,
        tune: Option<TuneResult>,
        trials: Vec<TrialRecord>,
        density: Option<DensityCurve>,
    ) -> Result<Self> {
        let record_stub = BenchmarkRecord {
            id: id.to_string(),
            tune,
            spawn_overhead_ns: None,
            result_checksum: None,
            trials,
            estimates: EstimateSet {
                min_ns: 0.0,
                mean_ns: 0.0,
                median_ns: 0.0,
                trimmed_mean_ns: 0.0,
                sample_count: 0,
                n_execs: 1,
            },
            density,
        };
        let estimates = recompute_estimates(&record_stub)?;
        Ok(BenchmarkRecord {
            estimates,
            ..record_stub
        })
    }
}

impl BenchmarkReport {
    /// Serializes to pretty JSON with a trailing newline. Serialization is
    /// deterministic, so two equal reports produce identical bytes.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports always serialize");
        text.push('\n');
        text
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }

    /// Checks that every record's stored estimates match a recomputation
    /// from its raw measurements, bit for bit.
    pub fn verify_self_contained(&self) -> Result<()> {
        for record in &self.benchmarks {
            let recomputed = recompute_estimates(record)?;
            if !estimates_bit_equal(&recomputed, &record.estimates) {
                return Err(Error::ReportInconsistent {
                    id: record.id.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn record(&self, id: &str) -> Option<&BenchmarkRecord> {
        self.benchmarks.iter().find(|r| r.id == id)
    }
}

/// Runs a scenario and wraps the outcome in a report. Host-independent:
/// no timer, fingerprint, or timestamps.
pub fn simulate_report(scenario: &Scenario, id: &str) -> Result<BenchmarkReport> {
    let trials = simulate_scenario(scenario)?;
    let trial_records: Vec<TrialRecord> = trials.iter().map(TrialRecord::from_trial).collect();
    let record = BenchmarkRecord::from_trials(id, None, trial_records, None)?;
    Ok(BenchmarkReport {
        schema_version: REPORT_SCHEMA_VERSION,
        timer: None,
        fingerprint: None,
        started_at: None,
        finished_at: None,
        benchmarks: vec![record],
    })
}
