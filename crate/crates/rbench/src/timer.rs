//! System-timer characterization.
//!
//! Timing a workload is only as good as the clock behind it. Two numbers
//! summarize a clock for our purposes:
//!
//! * **precision** (`tau_prec_ns`): the smallest nonzero interval the clock
//!   can report, measured here as the minimum positive difference between
//!   consecutive readings;
//! * **accuracy** (`tau_acc_ns`): an upper bound on the error of any single
//!   reading. It is fine for this to be an overestimate.
//!
//! Their ratio `j = floor(tau_acc / tau_prec)` bounds how many back-to-back
//! executions one measurement can usefully contain: beyond `j` repetitions
//! the amortized timer error per execution drops below what the clock can
//! resolve, so larger counts buy nothing.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on `j`. Tuning walks a ramp of up to `j` measurement points,
/// so an enormous accuracy/precision ratio must not translate into an
/// unbounded tuning loop.
pub const DEFAULT_J_MAX: u64 = 10_000;

/// Multiplier applied to the measured precision when no accuracy is
/// configured. Overestimating accuracy only raises the repetition count,
/// which is acceptable.
pub const DEFAULT_ACC_MULTIPLIER: u64 = 1000;

/// Minimum number of read pairs accepted by [`measure_precision`].
pub const MIN_CALIBRATION_SAMPLES: usize = 1000;

/// A monotonic nanosecond clock. Readings are offsets from an arbitrary
/// fixed origin and must never decrease.
pub trait MonotonicClock {
    fn now_ns(&mut self) -> u64;
}

/// The host's monotonic clock.
#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl MonotonicClock for SystemClock {
    fn now_ns(&mut self) -> u64 {
        self.origin.elapsed().as_nanos() as u64
    }
}

/// A simulated clock that advances by a fixed granularity on every read.
/// Useful for exercising calibration without touching real time.
#[derive(Debug, Clone)]
pub struct SimClock {
    now_ns: u64,
    granularity_ns: u64,
}

impl SimClock {
    pub fn new(granularity_ns: u64) -> Self {
        SimClock {
            now_ns: 0,
            granularity_ns,
        }
    }
}

impl MonotonicClock for SimClock {
    fn now_ns(&mut self) -> u64 {
        self.now_ns += self.granularity_ns;
        self.now_ns
    }
}

/// Resolved timer characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimerSpec {
    /// Upper bound on the error of a single reading, in nanoseconds.
    pub tau_acc_ns: u64,
    /// Smallest measurable nonzero interval, in nanoseconds.
    pub tau_prec_ns: u64,
    /// `min(floor(tau_acc / tau_prec), j_max)`; the largest useful number of
    /// executions per measurement.
    pub j: u64,
}

/// Where the accuracy figure in a [`CalibrationReport`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccuracySource {
    /// Derived from the measured precision via [`DEFAULT_ACC_MULTIPLIER`].
    Measured,
    /// Supplied by the caller.
    Configured,
}

/// Output of the `calibrate` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationReport {
    #[serde(flatten)]
    pub spec: TimerSpec,
    pub j_max: u64,
    pub source: AccuracySource,
}

/// Measures the clock's precision: the minimum strictly positive difference
/// between consecutive readings over `samples` read pairs.
///
/// Fails if the clock ever runs backwards (the offending pair is reported)
/// or if it never advances at all during calibration.
pub fn measure_precision(clock: &mut impl MonotonicClock, samples: usize) -> Result<u64> {
    if samples < MIN_CALIBRATION_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "precision calibration needs at least {MIN_CALIBRATION_SAMPLES} read pairs, got {samples}"
        )));
    }
    let mut prev = clock.now_ns();
    let mut min_delta: Option<u64> = None;
    for pair_index in 0..samples {
        let next = clock.now_ns();
        if next < prev {
            return Err(Error::NonMonotonicClock {
                pair_index,
                earlier_ns: prev,
                later_ns: next,
            });
        }
        if next > prev {
            let delta = next - prev;
            min_delta = Some(min_delta.map_or(delta, |m| m.min(delta)));
        }
        prev = next;
    }
    min_delta.ok_or(Error::ClockNeverAdvanced { samples })
}

/// Combines a measured precision with a configured (or defaulted) accuracy
/// into a [`TimerSpec`].
///
/// When `configured_acc_ns` is absent the accuracy defaults to
/// [`DEFAULT_ACC_MULTIPLIER`] times the precision.
pub fn resolve_timer_spec(
    measured_prec_ns: u64,
    configured_acc_ns: Option<u64>,
    j_max: u64,
) -> Result<TimerSpec> {
    if measured_prec_ns == 0 {
        return Err(Error::InvalidConfig(
            "timer precision must be positive".into(),
        ));
    }
    if j_max == 0 {
        return Err(Error::InvalidConfig("j_max must be positive".into()));
    }
    let tau_acc_ns = match configured_acc_ns {
        Some(acc) => {
            if acc < measured_prec_ns {
                return Err(Error::AccuracyBelowPrecision {
                    acc_ns: acc,
                    prec_ns: measured_prec_ns,
                });
            }
            acc
        }
        None => measured_prec_ns.saturating_mul(DEFAULT_ACC_MULTIPLIER),
    };
    let j = (tau_acc_ns / measured_prec_ns).min(j_max);
    Ok(TimerSpec {
        tau_acc_ns,
        tau_prec_ns: measured_prec_ns,
        j,
    })
}

/// Measures precision on `clock` and resolves the full calibration in one
/// step.
pub fn calibrate(
    clock: &mut impl MonotonicClock,
    samples: usize,
    configured_acc_ns: Option<u64>,
    j_max: u64,
) -> Result<CalibrationReport> {
    let prec = measure_precision(clock, samples)?;
    let spec = resolve_timer_spec(prec, configured_acc_ns, j_max)?;
    let source = if configured_acc_ns.is_some() {
        AccuracySource::Configured
    } else {
        AccuracySource::Measured
    };
    Ok(CalibrationReport {
        spec,
        j_max,
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Replays a fixed sequence of readings.
    struct ScriptedClock {
        readings: Vec<u64>,
        next: usize,
    }

    impl ScriptedClock {
        fn new(readings: Vec<u64>) -> Self {
            ScriptedClock { readings, next: 0 }
        }
    }

    impl MonotonicClock for ScriptedClock {
        fn now_ns(&mut self) -> u64 {
            let r = self.readings[self.next.min(self.readings.len() - 1)];
            self.next += 1;
            r
        }
    }

    #[test]
    fn precision_equals_granularity_for_simulated_clocks() {
        for g in [1u64, 10, 100, 1000] {
            let mut clock = SimClock::new(g);
            assert_eq!(measure_precision(&mut clock, 1000).unwrap(), g);
        }
    }

    #[test]
    fn precision_rejects_small_sample_counts() {
        let mut clock = SimClock::new(1);
        assert!(matches!(
            measure_precision(&mut clock, 999),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn precision_reports_backwards_pair() {
        // 1002 reads: 0, 1, 2, then a jump back to 1.
        let mut readings: Vec<u64> = (0..1200).collect();
        readings[3] = 1;
        let mut clock = ScriptedClock::new(readings);
        match measure_precision(&mut clock, 1000) {
            Err(Error::NonMonotonicClock {
                pair_index,
                earlier_ns,
                later_ns,
            }) => {
                assert_eq!(pair_index, 2);
                assert_eq!(earlier_ns, 2);
                assert_eq!(later_ns, 1);
            }
            other => panic!("expected non-monotonic error, got {other:?}"),
        }
    }

    #[test]
    fn precision_errors_when_clock_is_stuck() {
        let mut clock = ScriptedClock::new(vec![42; 1201]);
        assert!(matches!(
            measure_precision(&mut clock, 1000),
            Err(Error::ClockNeverAdvanced { samples: 1000 })
        ));
    }

    #[test]
    fn host_clock_precision_is_positive_and_below_default_accuracy() {
        let mut clock = SystemClock::new();
        let p = measure_precision(&mut clock, 10_000).unwrap();
        // Observed 1 ns on the build host; this assertion is deliberately
        // loose because the bound is host-specific.
        assert!(p > 0);
        assert!(p <= p.saturating_mul(DEFAULT_ACC_MULTIPLIER));
    }

    #[test]
    fn resolve_matches_reference_ratio() {
        let spec = resolve_timer_spec(1, Some(1000), DEFAULT_J_MAX).unwrap();
        assert_eq!(spec.j, 1000);
        assert_eq!(spec.tau_acc_ns, 1000);
        assert_eq!(spec.tau_prec_ns, 1);
    }

    #[test]
    fn resolve_accuracy_equal_to_precision_gives_j_of_one() {
        let spec = resolve_timer_spec(1, Some(1), DEFAULT_J_MAX).unwrap();
        assert_eq!(spec.j, 1);
    }

    #[test]
    fn resolve_caps_j_at_j_max() {
        let spec = resolve_timer_spec(1, Some(1_000_000_000), 10_000).unwrap();
        assert_eq!(spec.j, 10_000);
    }

    #[test]
    fn resolve_defaults_accuracy_to_multiple_of_precision() {
        let spec = resolve_timer_spec(7, None, DEFAULT_J_MAX).unwrap();
        assert_eq!(spec.tau_acc_ns, 7 * DEFAULT_ACC_MULTIPLIER);
        assert_eq!(spec.j, 1000);
    }

    #[test]
    fn resolve_rejects_accuracy_below_precision() {
        assert!(matches!(
            resolve_timer_spec(10, Some(9), DEFAULT_J_MAX),
            Err(Error::AccuracyBelowPrecision {
                acc_ns: 9,
                prec_ns: 10
            })
        ));
    }

    #[test]
    fn calibration_report_serializes_flat() {
        let mut clock = SimClock::new(1);
        let report = calibrate(&mut clock, 1000, None, DEFAULT_J_MAX).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["tau_prec_ns"], 1);
        assert_eq!(json["tau_acc_ns"], 1000);
        assert_eq!(json["j"], 1000);
        assert_eq!(json["j_max"], 10_000);
        assert_eq!(json["source"], "measured");
    }

    // Overestimating the accuracy can only grow j, and the floor keeps the
    // growth bounded by the overestimation factor (up to the +1 slack the
    // floor introduces) until the cap engages.
    #[test]
    fn overestimated_accuracy_grows_j_boundedly() {
        for prec in [1u64, 3, 10, 17] {
            for acc in [prec, prec * 2 + 1, prec * 999, prec * 1000] {
                let base = resolve_timer_spec(prec, Some(acc), u64::MAX).unwrap();
                for f in [2u64, 3, 10] {
                    let over = resolve_timer_spec(prec, Some(acc * f), u64::MAX).unwrap();
                    assert!(over.j >= base.j);
                    assert!(over.j <= f * (base.j + 1));
                    assert!(over.tau_acc_ns >= over.tau_prec_ns && over.j >= 1);
                }
            }
        }
    }
}
