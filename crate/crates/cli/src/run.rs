//! Output directory bookkeeping: artifacts, the run manifest, and timings.

use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};
use std::time::Instant;

use homog_core::{io, Result, RunConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";
pub const TIMINGS: &str = "timings.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Info,
}

impl Status {
    pub fn of(passed: bool) -> Status {
        if passed {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        }
    }
}

/// One line of a verdict file.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    /// The statistic the status was decided on.
    pub value: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, status: Status, value: f64, detail: impl Into<String>) -> Check {
        Check { name: name.into(), status, value, detail: detail.into() }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct VerdictSummary {
    pub passed: usize,
    pub failed: usize,
    pub informational: usize,
}

impl VerdictSummary {
    pub fn of(checks: &[Check]) -> Self {
        let count = |s: Status| checks.iter().filter(|c| c.status == s).count();
        VerdictSummary { passed: count(Status::Pass), failed: count(Status::Fail), informational: count(Status::Info) }
    }
}

#[derive(Serialize)]
struct Artifact {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Tolerances {
    tol_scale: f64,
    bisection_fraction: f64,
    ci_multiplier: f64,
    fekete_sigma: f64,
    macro_residual: f64,
    scheme_error: f64,
}

#[derive(Serialize)]
struct Versions {
    homog_core: &'static str,
    homog_cli: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: String,
    config: &'a RunConfig,
    seeds: Vec<u64>,
    fresh_seeds: Vec<u64>,
    versions: Versions,
    tolerances: Tolerances,
    verdicts: Option<VerdictSummary>,
    artifacts: Vec<Artifact>,
    /// Wall-clock data are kept out of the manifest so that reruns are byte-identical.
    timings_file: &'static str,
}

#[derive(Serialize)]
struct Stage {
    name: String,
    seconds: f64,
}

#[derive(Serialize)]
struct Timings {
    command: String,
    workers: usize,
    total_seconds: f64,
    stages: Vec<Stage>,
}

pub struct Run {
    pub cfg: RunConfig,
    pub out: PathBuf,
    command: &'static str,
    artifacts: Vec<String>,
    stages: Vec<Stage>,
    started: Instant,
    pub verdicts: Option<VerdictSummary>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    let text = serde_json::to_string(cfg)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

impl Run {
    pub fn new(command: &'static str, cfg: RunConfig, out: &Path) -> Result<Run> {
        io::ensure_dir(out)?;
        Ok(Run {
            cfg,
            out: out.to_path_buf(),
            command,
            artifacts: Vec::new(),
            stages: Vec::new(),
            started: Instant::now(),
            verdicts: None,
        })
    }

    /// Runs `f` and records its wall-clock time under `name`.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&RunConfig) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f(&self.cfg);
        self.stages.push(Stage { name: name.into(), seconds: t.elapsed().as_secs_f64() });
        r
    }

    fn register(&mut self, file: &str) -> PathBuf {
        self.artifacts.push(file.into());
        self.out.join(file)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, file: &str, value: &T) -> Result<()> {
        let path = self.register(file);
        io::write_json(&path, value)
    }

    pub fn write<F>(&mut self, file: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.register(file);
        io::write_with(&path, body)
    }

    /// Writes `manifest.json` and `timings.json`.
    pub fn finish(self, workers: usize) -> Result<()> {
        let cfg = &self.cfg;
        let artifacts = self
            .artifacts
            .iter()
            .map(|f| Ok(Artifact { file: f.clone(), sha256: sha256_file(&self.out.join(f))? }))
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            command: self.command,
            config_sha256: config_hash(cfg)?,
            config: cfg,
            seeds: cfg.seed_list(),
            fresh_seeds: cfg.fresh_seed_list(),
            versions: Versions { homog_core: homog_core::VERSION, homog_cli: env!("CARGO_PKG_VERSION") },
            tolerances: Tolerances {
                tol_scale: cfg.tol_scale,
                bisection_fraction: cfg.effective.tol_fraction,
                ci_multiplier: cfg.effective.ci_multiplier,
                fekete_sigma: cfg.shape.fekete_sigma,
                macro_residual: cfg.macro_.solver.tol,
                scheme_error: cfg.macro_.scheme_error,
            },
            verdicts: self.verdicts,
            artifacts,
            timings_file: TIMINGS,
        };
        io::write_json(&self.out.join(MANIFEST), &manifest)?;
        let timings = Timings {
            command: self.command.into(),
            workers,
            total_seconds: self.started.elapsed().as_secs_f64(),
            stages: self.stages,
        };
        io::write_json(&self.out.join(TIMINGS), &timings)
    }
}
