//! Benchmark suite files.
//!
//! A suite is a TOML file with one `[[benchmark]]` table per entry:
//!
//! ```toml
//! [[benchmark]]
//! id = "sumindex"
//! kind = "builtin"      # runs a shipped workload
//! name = "sumindex"     # optional, defaults to the id
//! size = 512            # optional, workload-specific size
//!
//! [[benchmark]]
//! id = "list-tmp"
//! kind = "command"      # times whole subprocess lifetimes
//! argv = ["ls", "/tmp"]
//! workdir = "/"         # optional
//! ```
//!
//! Ids must be unique and builtin names must resolve; both are checked at
//! parse time.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::workloads::Builtin;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BenchmarkKind {
    Builtin {
        name: String,
        size: Option<u64>,
    },
    Command {
        argv: Vec<String>,
        workdir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkDefinition {
    pub id: String,
    pub kind: BenchmarkKind,
}

#[derive(Debug, Deserialize)]
struct SuiteFile {
    #[serde(default)]
    benchmark: Vec<SuiteEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteEntry {
    id: String,
    kind: String,
    name: Option<String>,
    size: Option<u64>,
    argv: Option<Vec<String>>,
    workdir: Option<PathBuf>,
}

/// Parses suite text. `origin` is only used in error messages.
pub fn parse_suite(text: &str, origin: &Path) -> Result<Vec<BenchmarkDefinition>> {
    let file: SuiteFile = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
    if file.benchmark.is_empty() {
        return Err(Error::parse(origin, "suite defines no benchmarks"));
    }
    let mut defs = Vec::with_capacity(file.benchmark.len());
    let mut seen = std::collections::HashSet::new();
    for entry in file.benchmark {
        if !seen.insert(entry.id.clone()) {
            return Err(Error::parse(
                origin,
                format!("duplicate benchmark id {:?}", entry.id),
            ));
        }
        let kind = match entry.kind.as_str() {
            "builtin" => {
                let name = entry.name.unwrap_or_else(|| entry.id.clone());
                // Resolve now so bad names fail at parse time.
                Builtin::resolve(&name, entry.size)
                    .map_err(|e| Error::parse(origin, format!("benchmark {:?}: {e}", entry.id)))?;
                BenchmarkKind::Builtin {
                    name,
                    size: entry.size,
                }
            }
            "command" => {
                let argv = entry.argv.unwrap_or_default();
                if argv.is_empty() {
                    return Err(Error::parse(
                        origin,
                        format!("benchmark {:?}: command kind needs a non-empty argv", entry.id),
                    ));
                }
                BenchmarkKind::Command {
                    argv,
                    workdir: entry.workdir,
                }
            }
            other => {
                return Err(Error::parse(
                    origin,
                    format!(
                        "benchmark {:?}: unknown kind {other:?} (expected \"builtin\" or \"command\")",
                        entry.id
                    ),
                ))
            }
        };
        defs.push(BenchmarkDefinition { id: entry.id, kind });
    }
    Ok(defs)
}

/// Loads and parses a suite file.
pub fn load_suite(path: &Path) -> Result<Vec<BenchmarkDefinition>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_suite(&text, path)
}

/// Resolves a CLI benchmark target: either `builtin:NAME` (optionally
/// `builtin:NAME:SIZE`) or a path to a suite file.
pub fn resolve_target(target: &str) -> Result<Vec<BenchmarkDefinition>> {
    if let Some(rest) = target.strip_prefix("builtin:") {
        let (name, size) = match rest.split_once(':') {
            Some((name, size_text)) => {
                let size = size_text.parse::<u64>().map_err(|_| {
                    Error::InvalidConfig(format!("invalid builtin size {size_text:?}"))
                })?;
                (name.to_string(), Some(size))
            }
            None => (rest.to_string(), None),
        };
        Builtin::resolve(&name, size)?;
        return Ok(vec![BenchmarkDefinition {
            id: name.clone(),
            kind: BenchmarkKind::Builtin { name, size },
        }]);
    }
    load_suite(Path::new(target))
}
