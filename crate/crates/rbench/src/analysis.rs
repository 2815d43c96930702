//! Location estimates, regression verdicts, and density curves.
//!
//! Timing samples are not well behaved: they are skewed, often multimodal,
//! and their noise is one-sided (the environment only ever adds time).
//! Under additive one-sided noise the sample minimum is the estimate that
//! carries the least error, and empirically it is also the most stable
//! across repeated trials, so comparisons between runs are made on minima.
//! The mean, median, and trimmed mean are still computed and reported; they
//! are useful for inspecting the shape of the distribution, just not for
//! deciding regressions.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Measurement;

/// Default regression threshold: a 30% or greater increase in the minimum
/// counts as a regression.
pub const DEFAULT_COMPARISON_THRESHOLD: f64 = 0.30;

/// The four location estimates over one pooled set of per-execution samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    pub min_ns: f64,
    pub mean_ns: f64,
    pub median_ns: f64,
    pub trimmed_mean_ns: f64,
    pub sample_count: u64,
    /// Executions per measurement under which the samples were taken.
    pub n_execs: u64,
}

/// Outcome of comparing a candidate run against a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Regression,
    Improvement,
    Unchanged,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Regression => "regression",
            Verdict::Improvement => "improvement",
            Verdict::Unchanged => "unchanged",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub baseline_min_ns: f64,
    pub candidate_min_ns: f64,
    /// `candidate_min_ns / baseline_min_ns`.
    pub ratio: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// A kernel density estimate sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    /// `(time_ns, density)` pairs in increasing time order.
    pub points: Vec<(f64, f64)>,
    pub bandwidth_ns: f64,
}

impl DensityCurve {
    /// Writes the curve as two-column CSV (`time_ns,density`).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time_ns,density")?;
        for (t, d) in &self.points {
            writeln!(out, "{t},{d}")?;
        }
        Ok(())
    }

    /// Trapezoidal integral over the grid; close to one for a well-formed
    /// curve whose grid extends well past the sample range.
    pub fn integral(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
            .sum()
    }
}

/// Bandwidth choice for [`kde`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Silverman's normal-reference rule, `s * (4 / (3n))^(1/5)`, falling
    /// back to `fallback_ns` when the samples have no spread.
    Silverman { fallback_ns: f64 },
}

fn validate_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    for &s in samples {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::InvalidSample(s));
        }
    }
    Ok(())
}

/// Computes the minimum, mean, median, and 5–95% trimmed mean of a set of
/// per-execution samples.
///
/// The median of an even-sized set is the mean of the two central order
/// statistics. The trimmed mean averages every sample whose value lies in
/// the closed interval between the 5th and 95th percentiles, where the 5th
/// percentile is the order statistic of rank `floor(0.05 n) + 1` and the
/// 95th the one of rank `n - floor(0.05 n)` (one-indexed): exactly
/// `floor(0.05 n)` samples are dropped from each tail, plus any ties beyond
/// the percentile values.
pub fn location_estimates(samples: &[f64], n_execs: u64) -> Result<EstimateSet> {
    validate_samples(samples)?;
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);

    let min_ns = sorted[0];
    let mean_ns = samples.iter().sum::<f64>() / n as f64;
    let median_ns = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };

    let drop = (0.05 * n as f64).floor() as usize;
    let p5 = sorted[drop];
    let p95 = sorted[n - 1 - drop];
    let mut trimmed_sum = 0.0;
    let mut trimmed_count = 0usize;
    for &s in &sorted {
        if s >= p5 && s <= p95 {
            trimmed_sum += s;
            trimmed_count += 1;
        }
    }
    let trimmed_mean_ns = trimmed_sum / trimmed_count as f64;

    Ok(EstimateSet {
        min_ns,
        mean_ns,
        median_ns,
        trimmed_mean_ns,
        sample_count: n as u64,
        n_execs,
    })
}

/// The minimum per-execution time over a set of measurements.
pub fn minimum_estimate(measurements: &[Measurement]) -> Result<f64> {
    if measurements.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(measurements
        .iter()
        .map(Measurement::per_exec_ns)
        .fold(f64::INFINITY, f64::min))
}

/// Compares two runs on their minima. A ratio at or above `1 + threshold`
/// is a regression; at or below `1 - threshold`, an improvement. The
/// regression boundary is inclusive, and the improvement rule is the
/// symmetric counterpart.
pub fn compare_runs(
    baseline: &EstimateSet,
    candidate: &EstimateSet,
    threshold: f64,
) -> Result<ComparisonResult> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "comparison threshold must be positive, got {threshold}"
        )));
    }
    if !(baseline.min_ns > 0.0) {
        return Err(Error::NonPositiveBaseline(baseline.min_ns));
    }
    if !(candidate.min_ns > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "candidate minimum {} ns is not positive",
            candidate.min_ns
        )));
    }
    let ratio = candidate.min_ns / baseline.min_ns;
    let verdict = if ratio >= 1.0 + threshold {
        Verdict::Regression
    } else if ratio <= 1.0 - threshold {
        Verdict::Improvement
    } else {
        Verdict::Unchanged
    };
    Ok(ComparisonResult {
        baseline_min_ns: baseline.min_ns,
        candidate_min_ns: candidate.min_ns,
        ratio,
        threshold,
        verdict,
    })
}

/// Gaussian-kernel density estimate on a uniform grid spanning five
/// bandwidths past the sample range on both sides.
pub fn kde(samples: &[f64], bandwidth: Bandwidth, grid_size: usize) -> Result<DensityCurve> {
    validate_samples(samples)?;
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidConfig(
            "a density estimate needs at least two samples".into(),
        ));
    }
    if grid_size < 2 {
        return Err(Error::InvalidConfig(
            "density grid needs at least two points".into(),
        ));
    }
    let h = match bandwidth {
        Bandwidth::Fixed(h) => {
            if !(h > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "bandwidth must be positive, got {h}"
                )));
            }
            h
        }
        Bandwidth::Silverman { fallback_ns } => {
            if !(fallback_ns > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "fallback bandwidth must be positive, got {fallback_ns}"
                )));
            }
            let mean = samples.iter().sum::<f64>() / n as f64;
            let var =
                samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let s = var.sqrt();
            let h = s * (4.0 / (3.0 * n as f64)).powf(0.2);
            if h > 0.0 {
                h
            } else {
                fallback_ns
            }
        }
    };

    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 5.0 * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 5.0 * h;
    let step = (hi - lo) / (grid_size - 1) as f64;
    let norm = 1.0 / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let points = (0..grid_size)
        .map(|i| {
            let x = lo + i as f64 * step;
            let density = norm
                * samples
                    .iter()
                    .map(|&s| (-0.5 * ((x - s) / h).powi(2)).exp())
                    .sum::<f64>();
            (x, density)
        })
        .collect();
    Ok(DensityCurve {
        points,
        bandwidth_ns: h,
    })
}

/// Unbiased sample variance (n - 1 denominator).
pub fn sample_variance(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
}
