//! Reproducible experiment runner behind the `weyl` binary.
//!
//! A run is fully described by an [`ExperimentConfig`]. Result files depend
//! only on the config (worker count included); `manifest.json` additionally
//! records the wall clock.

mod commands;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use crate::complete::{self, CompleteSumTable, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::report::{write_json, write_jsonl, CsvTable, LemmaReport};

pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_RESOURCE_LIMIT: i32 = 3;
pub const EXIT_LEMMA_FAILURE: i32 = 4;

/// Subcommand names with the parameter keys each accepts. `seed`, `cap`,
/// `threads` and `out` are accepted everywhere.
pub const SUBCOMMANDS: &[(&str, &[&str])] = &[
    ("gauss-check", &["p"]),
    ("monomial-check", &["d", "p", "a"]),
    ("weil-check", &["p", "f"]),
    ("moments", &["d", "p", "nu", "include-zero", "cache"]),
    ("box-moments", &["d", "p", "nu", "side", "boxes", "cache"]),
    ("enumerate-lp", &["d", "p", "gamma", "cache"]),
    ("orbit-count", &["p", "a", "side", "starts"]),
    (
        "box-density",
        &["d", "p", "gamma", "side", "starts", "cache"],
    ),
    ("amplify", &["d", "p", "primes", "tau", "gamma", "count"]),
    ("amplify-mono", &["d", "p", "a", "tau", "delta", "N"]),
    ("weyl-trace", &["x", "m", "N-max", "grid"]),
    ("mr-scan", &["d", "x", "samples", "N-max"]),
    ("sigma-scan", &["x", "m", "N-max"]),
    ("exceptional-scan", &["x", "m", "alpha", "N-max"]),
    ("measure-estimate", &["d", "alpha", "i", "samples"]),
    (
        "cantor-build",
        &["d", "tau", "epsilon", "gamma", "primes", "depth"],
    ),
    (
        "cantor-dim",
        &["d", "r", "cells", "depth", "placement", "scales"],
    ),
    ("pattern-demo", &["d", "a", "b", "c", "placement"]),
    ("discrepancy", &["x", "m", "N", "N-max"]),
    ("koksma-check", &["d", "x", "m", "N", "N-max", "samples"]),
    ("discrepancy-scan", &["x", "m", "alpha", "N-max"]),
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: String,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    /// Largest complete-sum table the run may build.
    pub cap: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

impl ExperimentConfig {
    /// Validates the subcommand and its keys. `seed`, `cap`, `threads` and
    /// `out` may also appear in `params`, where they override the defaults.
    pub fn new(command: &str, params: BTreeMap<String, String>) -> Result<Self> {
        let allowed = SUBCOMMANDS
            .iter()
            .find(|(name, _)| *name == command)
            .map(|(_, keys)| *keys)
            .ok_or_else(|| invalid(format!("unknown subcommand {command:?}")))?;
        let mut cfg = Self {
            command: command.to_string(),
            params: BTreeMap::new(),
            seed: 0,
            cap: DEFAULT_CAP,
            threads: None,
            out: PathBuf::from("weyl-out"),
        };
        for (key, value) in params {
            match key.as_str() {
                "seed" => cfg.seed = parse_u64(&key, &value)?,
                "cap" => cfg.cap = parse_u64(&key, &value)?,
                "threads" => {
                    let t = parse_u64(&key, &value)?;
                    if t == 0 {
                        return Err(invalid("threads must be >= 1"));
                    }
                    cfg.threads = Some(t as usize);
                }
                "out" => cfg.out = PathBuf::from(value),
                k if allowed.contains(&k) => {
                    cfg.params.insert(key, value);
                }
                k => {
                    return Err(invalid(format!("unknown key {k:?} for {command}")));
                }
            }
        }
        Ok(cfg)
    }

    /// `key = value` lines; `#` starts a comment. `command` names the subcommand.
    pub fn parse(text: &str) -> Result<Self> {
        let mut params = BTreeMap::new();
        let mut command = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("line {}: expected key = value", lineno + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k == "command" {
                if command.replace(v).is_some() {
                    return Err(invalid("command given twice"));
                }
            } else if params.insert(k.clone(), v).is_some() {
                return Err(invalid(format!("key {k:?} given twice")));
            }
        }
        let command = command.ok_or_else(|| invalid("config has no command"))?;
        Self::new(&command, params)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Everything that determines the result files: parameters plus seed and cap.
    pub fn effective_params(&self) -> BTreeMap<String, String> {
        let mut p = self.params.clone();
        p.insert("seed".into(), self.seed.to_string());
        p.insert("cap".into(), self.cap.to_string());
        p
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(|s| s.as_str())
    }
}

pub(crate) fn parse_u64(key: &str, v: &str) -> Result<u64> {
    let v = v.trim();
    if let Ok(n) = v.parse::<u64>() {
        return Ok(n);
    }
    // allow 1e5 and friends when exactly integral
    match v.parse::<f64>() {
        Ok(f) if f >= 0.0 && f.fract() == 0.0 && f < 1.8e19 => Ok(f as u64),
        _ => Err(invalid(format!(
            "{key}: expected a non-negative integer, got {v:?}"
        ))),
    }
}

/// Files written by a run and whether every check in it held.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
}

/// What a subcommand produced, before anything touches the disk.
pub(crate) struct Artifacts {
    pub report: LemmaReport,
    pub csv: Vec<(&'static str, CsvTable)>,
    pub jsonl: Vec<(&'static str, Vec<serde_json::Value>)>,
    /// Set when the run stopped early; partial outputs are still written.
    pub stopped: Option<Error>,
}

impl Artifacts {
    pub fn new(report: LemmaReport) -> Self {
        Self {
            report,
            csv: Vec::new(),
            jsonl: Vec::new(),
            stopped: None,
        }
    }
}

/// Runs the experiment and writes `report.json`, any CSV/JSONL tables and
/// `manifest.json` into `config.out`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let artifacts = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid(e.to_string()))?
            .install(|| commands::dispatch(config))?,
        None => commands::dispatch(config)?,
    };
    std::fs::create_dir_all(&config.out)?;
    let mut files = Vec::new();
    let path = config.out.join("report.json");
    write_json(&path, &artifacts.report)?;
    files.push(path);
    for (name, t) in &artifacts.csv {
        let path = config.out.join(name);
        t.write(&path)?;
        files.push(path);
    }
    for (name, records) in &artifacts.jsonl {
        let path = config.out.join(name);
        write_jsonl(&path, records)?;
        files.push(path);
    }
    let manifest = json!({
        "command": config.command,
        "config": config.effective_params(),
        "threads": config.threads,
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "pass": artifacts.report.pass,
        "stopped": artifacts.stopped.as_ref().map(|e| e.to_string()),
        "files": files.iter().map(|f| f.file_name().unwrap().to_string_lossy()).collect::<Vec<_>>(),
    });
    let path = config.out.join("manifest.json");
    write_json(&path, &manifest)?;
    files.push(path);
    if let Some(e) = artifacts.stopped {
        return Err(e);
    }
    Ok(RunOutcome {
        pass: artifacts.report.pass,
        files,
    })
}

/// Process exit status for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ResourceLimit { .. } => EXIT_RESOURCE_LIMIT,
        Error::WitnessNotFound { .. } => EXIT_LEMMA_FAILURE,
        Error::Io(_) | Error::ChecksumMismatch | Error::MalformedCache(_) => 1,
        _ => EXIT_INVALID_CONFIG,
    }
}

/// Builds the table and stores it at `path`.
pub fn cache_table(d: u32, p: u64, cap: u64, path: &Path) -> Result<CompleteSumTable> {
    let t = CompleteSumTable::build(d, p, cap)?;
    complete::save_table(&t, path)?;
    Ok(t)
}

/// Loads a cached table and checks that it is the one asked for.
pub fn load_table(d: u32, p: u64, path: &Path) -> Result<CompleteSumTable> {
    let t = complete::load_table(path)?;
    if t.d() != d || t.p() != p {
        return Err(Error::MalformedCache(format!(
            "cache holds d = {}, p = {}; wanted d = {d}, p = {p}",
            t.d(),
            t.p()
        )));
    }
    Ok(t)
}

/// Uses the cache at `path` when present, otherwise builds and fills it.
pub fn cached_table(d: u32, p: u64, cap: u64, path: Option<&Path>) -> Result<CompleteSumTable> {
    match path {
        Some(path) if path.exists() => load_table(d, p, path),
        Some(path) => cache_table(d, p, cap, path),
        None => CompleteSumTable::build(d, p, cap),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_round() {
        let cfg = ExperimentConfig::parse(
            "# moments\ncommand = moments\nd = 2\np = 3\nnu = 2\nseed = 7\nout = /tmp/x\n",
        )
        .unwrap();
        assert_eq!(cfg.command, "moments");
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.cap, DEFAULT_CAP);
        assert_eq!(cfg.out, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.params.len(), 3);
    }

    #[test]
    fn seed_defaults_to_zero() {
        let cfg = ExperimentConfig::parse("command = gauss-check\np = 13").unwrap();
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            "command = gauss-check\np = 13\nd = 2",
            "command = gauss-check\nbogus = 1",
            "command = no-such-thing",
            "p = 13",
            "command = gauss-check\np = 13\np = 17",
            "command = gauss-check\njunk line",
        ] {
            let e = ExperimentConfig::parse(text).unwrap_err();
            assert!(matches!(e, Error::InvalidConfig(_)), "{text}: {e}");
            assert_eq!(exit_code(&e), EXIT_INVALID_CONFIG);
        }
    }

    #[test]
    fn every_subcommand_registered_once() {
        let mut names: Vec<_> = SUBCOMMANDS.iter().map(|(n, _)| *n).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 21);
    }

    #[test]
    fn cache_helpers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wslt");
        let a = cache_table(2, 7, DEFAULT_CAP, &path).unwrap();
        let b = load_table(2, 7, &path).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            load_table(2, 11, &path),
            Err(Error::MalformedCache(_))
        ));
        let bad = dir.path().join("bad.wslt");
        assert!(matches!(
            cache_table(2, 1024, DEFAULT_CAP, &bad),
            Err(Error::InvalidField(1024))
        ));
        assert!(!bad.exists());
        let e = cache_table(3, 401, 1000, &bad).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_RESOURCE_LIMIT);
    }
}
