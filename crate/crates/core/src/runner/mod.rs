//! Config-driven runs of every subcommand with a checksummed manifest.

mod commands;
pub mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use config::Keys;

/// Environment variable that overrides the output directory of the config.
pub const OUT_ENV: &str = "MAGAGMON_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Heatkernel,
    LevyArea,
    Betabar,
    AgmonDist,
    Eigs,
    VerifyBound,
    Bounds,
    KatoCheck,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Heatkernel,
        Command::LevyArea,
        Command::Betabar,
        Command::AgmonDist,
        Command::Eigs,
        Command::VerifyBound,
        Command::Bounds,
        Command::KatoCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Heatkernel => "heatkernel",
            Command::LevyArea => "levy-area",
            Command::Betabar => "betabar",
            Command::AgmonDist => "agmon-dist",
            Command::Eigs => "eigs",
            Command::VerifyBound => "verify-bound",
            Command::Bounds => "bounds",
            Command::KatoCheck => "kato-check",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Command::Heatkernel | Command::LevyArea | Command::Betabar)
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown subcommand {s:?}"))
    }
}

#[derive(Debug)]
pub enum RunError {
    /// Schema violation at a key path.
    Config { key: String, message: String },
    /// Failure inside a numerical module.
    Numeric { module: &'static str, source: crate::Error },
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn missing(key: &str) -> Self {
        RunError::Config { key: key.into(), message: "missing required key".into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } => 2,
            RunError::Numeric { .. } => 3,
            RunError::Io { .. } => 4,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config { key, message } => write!(f, "config error at `{key}`: {message}"),
            RunError::Numeric { module, source } => write!(f, "{module}: {source}"),
            RunError::Io { path, source } => write!(f, "io error at {}: {source}", path.display()),
        }
    }
}

impl std::error::Error for RunError {}

pub(crate) fn numeric(module: &'static str, source: crate::Error) -> RunError {
    RunError::Numeric { module, source }
}

/// An output file held in memory until the run succeeds.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: &str, bytes: Vec<u8>) -> Self {
        Artifact { name: name.to_string(), bytes }
    }

    pub fn json<T: Serialize + ?Sized>(name: &str, value: &T) -> Result<Self, RunError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| numeric("cli-runner", crate::Error::Parse(e.to_string())))?;
        bytes.push(b'\n');
        Ok(Artifact::new(name, bytes))
    }

    /// Data rows for CSV files, `None` otherwise.
    fn rows(&self) -> Option<usize> {
        self.name
            .ends_with(".csv")
            .then(|| self.bytes.iter().filter(|&&b| b == b'\n').count().saturating_sub(1))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub rows: Option<usize>,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub program: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub artifacts: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

/// Parses and validates the config and computes the artifacts in memory.
pub fn compute(command: Command, text: &str, base_dir: &Path, seed: Option<u64>) -> Result<(Vec<Artifact>, Option<u64>), RunError> {
    let mut keys = Keys::parse(text, base_dir)?;
    if let Some(s) = seed {
        let v = i64::try_from(s).map_err(|_| RunError::Config {
            key: "sampling.seed".into(),
            message: format!("seed {s} exceeds the config integer range"),
        })?;
        keys.set("sampling.seed", toml::Value::Integer(v));
    }
    if let Some(sub) = keys.str("subcommand")? {
        if sub != command.name() {
            return Err(RunError::Config {
                key: "subcommand".into(),
                message: format!("config is for {sub:?}, invoked as {:?}", command.name()),
            });
        }
    }
    keys.str("output.dir")?;
    if command.is_stochastic() && !keys.has("sampling.seed") {
        return Err(RunError::missing("sampling.seed"));
    }
    let artifacts = match command {
        Command::Heatkernel => commands::heatkernel(&keys),
        Command::LevyArea => commands::levy_area(&keys),
        Command::Betabar => commands::betabar(&keys),
        Command::AgmonDist => commands::agmon_dist(&keys),
        Command::Eigs => commands::eigs(&keys),
        Command::VerifyBound => commands::verify_bound(&keys),
        Command::Bounds => commands::bounds(&keys),
        Command::KatoCheck => commands::kato_check(&keys),
    }?;
    let seed = keys.u64("sampling.seed")?;
    keys.finish()?;
    Ok((artifacts, seed))
}

fn output_dir(inv: &Invocation, text: &str, base_dir: &Path) -> Result<PathBuf, RunError> {
    if let Some(p) = &inv.out {
        return Ok(p.clone());
    }
    if let Some(p) = std::env::var_os(OUT_ENV) {
        return Ok(PathBuf::from(p));
    }
    let keys = Keys::parse(text, base_dir)?;
    Ok(keys.path("output.dir")?.unwrap_or_else(|| base_dir.join("out")))
}

/// Runs one subcommand end to end and writes artifacts plus `manifest.json`.
pub fn execute(inv: &Invocation) -> Result<Outcome, RunError> {
    let raw = std::fs::read(&inv.config).map_err(|e| RunError::Io { path: inv.config.clone(), source: e })?;
    let text = String::from_utf8(raw.clone()).map_err(|_| RunError::Config {
        key: "<document>".into(),
        message: "config is not valid UTF-8".into(),
    })?;
    let base_dir = inv.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let go = || compute(inv.command, &text, &base_dir, inv.seed);
    let (artifacts, seed) = match inv.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| numeric("cli-runner", crate::Error::InvalidInput(e.to_string())))?
            .install(go)?,
        None => go()?,
    };
    let out_dir = output_dir(inv, &text, &base_dir)?;
    std::fs::create_dir_all(&out_dir).map_err(|e| RunError::Io { path: out_dir.clone(), source: e })?;
    let mut entries = Vec::new();
    for a in &artifacts {
        let path = out_dir.join(&a.name);
        std::fs::write(&path, &a.bytes).map_err(|e| RunError::Io { path: path.clone(), source: e })?;
        entries.push(ManifestEntry { name: a.name.clone(), rows: a.rows(), bytes: a.bytes.len(), sha256: sha256_hex(&a.bytes) });
    }
    let manifest = Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: inv.command.name(),
        config_sha256: sha256_hex(&raw),
        seed,
        artifacts: entries,
    };
    let m = Artifact::json("manifest.json", &manifest)?;
    let path = out_dir.join(&m.name);
    std::fs::write(&path, &m.bytes).map_err(|e| RunError::Io { path, source: e })?;
    Ok(Outcome { out_dir, manifest })
}
