//! Native demo workloads.
//!
//! Four small benchmarks covering distinct time decades and distinct stress
//! patterns:
//!
//! * `sumindex` — indexed summation over a scattered index sequence
//!   (element retrieval, memory layout);
//! * `pushall` — element-by-element append with a pseudo-random draw per
//!   iteration (RNG cost plus periodic reallocation from vector growth);
//! * `branchsum` — a parity-branched nested loop counter (periodically
//!   expensive branches);
//! * `manyallocs` — an outer vector of inner vectors with per-element
//!   reseeded random lengths (frequent allocations of differing sizes).
//!
//! Every workload is deterministic and returns a value the harness folds
//! into a report checksum, so the benchmark body cannot be optimized away
//! as dead code.

use crate::error::{Error, Result};
use crate::suite::{BenchmarkDefinition, BenchmarkKind};

/// One step of SplitMix64, the usual tiny deterministic generator.
fn splitmix_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const BUILTIN_NAMES: [&str; 4] = ["sumindex", "pushall", "branchsum", "manyallocs"];

/// A readied builtin workload. Construction performs the setup (allocating
/// input data); [`Builtin::execute`] performs exactly one measured
/// execution.
#[derive(Debug, Clone)]
pub enum Builtin {
    SumIndex { data: Vec<f64>, indices: Vec<usize> },
    PushAll { source: Vec<u64> },
    BranchSum { n: u64 },
    ManyAllocs { n: u64 },
}

impl Builtin {
    /// Builds a builtin by name with an optional size override.
    pub fn resolve(name: &str, size: Option<u64>) -> Result<Builtin> {
        let size = size.unwrap_or(default_size(name)?);
        if size == 0 {
            return Err(Error::InvalidConfig(format!(
                "workload {name} needs a positive size"
            )));
        }
        Ok(match name {
            "sumindex" => Self::sumindex(size as usize),
            "pushall" => Self::pushall(size as usize),
            "branchsum" => Builtin::BranchSum { n: size },
            "manyallocs" => Builtin::ManyAllocs { n: size },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown builtin workload {other:?}; known: {}",
                    BUILTIN_NAMES.join(", ")
                )))
            }
        })
    }

    fn sumindex(len: usize) -> Builtin {
        let mut state = 0x5375_6d49_6e64_6578; // fixed setup seed
        let data = (0..len)
            .map(|_| (splitmix_next(&mut state) % 1024) as f64 / 1024.0)
            .collect();
        // A scattered (large odd stride) index walk over the array.
        let indices = (0..len).map(|i| i.wrapping_mul(0x9E37_79B1) % len).collect();
        Builtin::SumIndex { data, indices }
    }

    fn pushall(len: usize) -> Builtin {
        Builtin::PushAll {
            source: (0..len as u64).collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::SumIndex { .. } => "sumindex",
            Builtin::PushAll { .. } => "pushall",
            Builtin::BranchSum { .. } => "branchsum",
            Builtin::ManyAllocs { .. } => "manyallocs",
        }
    }

    /// Runs the workload once and returns its result value.
    pub fn execute(&self) -> u64 {
        match self {
            Builtin::SumIndex { data, indices } => {
                let sum: f64 = indices.iter().map(|&i| data[i]).sum();
                sum.to_bits()
            }
            Builtin::PushAll { source } => {
                let mut target = Vec::new();
                let mut state = 0x5075_7368_416c_6c21;
                for &value in source {
                    target.push(value);
                    // The draw does not feed the output; black_box keeps the
                    // generator from being elided.
                    std::hint::black_box(splitmix_next(&mut state));
                }
                target
                    .iter()
                    .fold(0u64, |acc, &v| acc.wrapping_add(v))
                    .wrapping_add(target.len() as u64)
            }
            Builtin::BranchSum { n } => {
                let n = *n;
                let mut counter: i64 = 0;
                for i in 1..=n {
                    if i % 2 == 0 {
                        counter -= 1;
                    } else {
                        for inner in 1..=n {
                            if inner % 2 == 0 {
                                counter += 1;
                            } else {
                                counter -= 1;
                            }
                        }
                    }
                }
                counter as u64
            }
            Builtin::ManyAllocs { n } => {
                let n = *n;
                let mut outer: Vec<Vec<u64>> = Vec::with_capacity(n as usize);
                for i in 0..n {
                    // Reseed per element so the structure is deterministic.
                    let mut state = i;
                    let len = (splitmix_next(&mut state) % n + 1) as usize;
                    outer.push(vec![i; len]);
                }
                outer
                    .iter()
                    .fold(0u64, |acc, inner| acc.wrapping_add(inner.len() as u64))
            }
        }
    }
}

/// Default sizes, chosen so the minimum execution times of the four
/// workloads land in distinct decades, roughly from hundreds of
/// nanoseconds up to a millisecond on a current machine.
pub fn default_size(name: &str) -> Result<u64> {
    match name {
        "sumindex" => Ok(512),
        "pushall" => Ok(1024),
        "branchsum" => Ok(256),
        "manyallocs" => Ok(1024),
        other => Err(Error::InvalidConfig(format!(
            "unknown builtin workload {other:?}; known: {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

/// The shipped suite: all four builtins at their default sizes.
pub fn catalog() -> Vec<BenchmarkDefinition> {
    BUILTIN_NAMES
        .iter()
        .map(|&name| BenchmarkDefinition {
            id: name.to_string(),
            kind: BenchmarkKind::Builtin {
                name: name.to_string(),
                size: None,
            },
        })
        .collect()
}
