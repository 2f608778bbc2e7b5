use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use conceptbench::experiments::{
    records, run_experiment, summarize_records, write_results_csv, write_summary_csv, ExperimentConfig, RunResult,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::to_toml;
use crate::error::CliError;
use crate::plot::emit_plots;

/// Written next to the manifest when a run does not finish cleanly.
pub const FAILED_MARKER: &str = "FAILED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_path: Option<PathBuf>,
    /// SHA-256 of the config snapshot.
    pub config_sha256: String,
    pub tool_version: String,
    pub platform: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub wall_clock_secs: Option<f64>,
    pub status: RunStatus,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn load(run_dir: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(run_dir.join("manifest.json"))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("bad manifest: {e}")))
    }

    fn save(&self, run_dir: &Path) -> Result<(), CliError> {
        let tmp = run_dir.join("manifest.json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(self).expect("manifest serializes"))?;
        fs::rename(tmp, run_dir.join("manifest.json"))?;
        Ok(())
    }

    /// Only `running` may move, and only to `done` or `failed`.
    fn finish(&mut self, status: RunStatus, error: Option<String>, secs: f64) {
        assert_eq!(self.status, RunStatus::Running, "run already finished");
        assert_ne!(status, RunStatus::Running);
        self.status = status;
        self.error = error;
        self.finished_at = Some(now());
        self.wall_clock_secs = Some(secs);
    }
}

static ACTIVE: Mutex<Option<PathBuf>> = Mutex::new(None);

/// The run directory currently being written, if any.
pub fn active_run() -> Option<PathBuf> {
    ACTIVE.lock().map(|g| g.clone()).unwrap_or(None)
}

/// Marks a still-running run as failed; used by the interrupt handler.
pub fn mark_interrupted(run_dir: &Path) -> Result<(), CliError> {
    let mut m = RunManifest::load(run_dir)?;
    if m.status != RunStatus::Running {
        return Ok(());
    }
    m.finish(RunStatus::Failed, Some("interrupted".into()), 0.0);
    fs::write(run_dir.join(FAILED_MARKER), "interrupted\n")?;
    m.save(run_dir)
}

fn now() -> String {
    chrono::Utc::now().format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
}

fn create_run_dir(out_root: &Path, hash: &str) -> Result<(String, PathBuf), CliError> {
    fs::create_dir_all(out_root)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3f").to_string().replace('.', "");
    let base = format!("{stamp}-{}", &hash[..8]);
    for n in 0.. {
        let id = if n == 0 { base.clone() } else { format!("{base}-{n}") };
        let dir = out_root.join(&id);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok((id, dir)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

fn write_outputs(dir: &Path, result: &RunResult) -> Result<(), CliError> {
    let rows = records(&result.series);
    let results_csv = dir.join("results.csv");
    write_results_csv(&results_csv, &rows)?;
    fs::write(dir.join("run_result.json"), serde_json::to_vec_pretty(result).map_err(conceptbench::Error::from)?)?;
    if !result.is_complete() {
        return Err(CliError::Validation(format!("{} cell(s) failed: {}", result.failures.len(), result.failures.join("; "))));
    }
    write_summary_csv(&dir.join("summary.csv"), &summarize_records(&rows)?)?;
    emit_plots(&results_csv, &dir.join("plots"))?;
    Ok(())
}

/// Runs an experiment inside a fresh directory under `out_root` and
/// returns its final manifest and path. A failed run leaves a `FAILED`
/// marker and `status = failed` and is reported as an error.
pub fn run(cfg: &ExperimentConfig, config_path: Option<&Path>, out_root: &Path) -> Result<(RunManifest, PathBuf), CliError> {
    let snapshot = to_toml(cfg)?;
    let hash = hex::encode(Sha256::digest(snapshot.as_bytes()));
    let (run_id, dir) = create_run_dir(out_root, &hash)?;
    fs::write(dir.join("config.toml"), &snapshot)?;
    let mut manifest = RunManifest {
        run_id: run_id.clone(),
        config_path: config_path.map(Path::to_path_buf),
        config_sha256: hash,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        platform: format!("{}-{}", std::env::consts::OS, std::env::consts::ARCH),
        started_at: now(),
        finished_at: None,
        wall_clock_secs: None,
        status: RunStatus::Running,
        error: None,
    };
    manifest.save(&dir)?;
    *ACTIVE.lock().unwrap_or_else(|e| e.into_inner()) = Some(dir.clone());
    log::info!("run {run_id} in {}", dir.display());

    let started = Instant::now();
    let checkpoints = dir.join("checkpoints");
    let outcome = catch_unwind(AssertUnwindSafe(|| -> Result<(), CliError> {
        fs::create_dir_all(&checkpoints)?;
        let result = run_experiment(cfg, Some(&checkpoints))?;
        write_outputs(&dir, &result)
    }));
    let error = match outcome {
        Ok(Ok(())) => None,
        Ok(Err(e)) => Some(e.to_string()),
        Err(panic) => Some(format!(
            "panic: {}",
            panic
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| panic.downcast_ref::<&str>().copied())
                .unwrap_or("unknown")
        )),
    };
    *ACTIVE.lock().unwrap_or_else(|e| e.into_inner()) = None;
    let secs = started.elapsed().as_secs_f64();
    match error {
        None => {
            manifest.finish(RunStatus::Done, None, secs);
            manifest.save(&dir)?;
            Ok((manifest, dir))
        }
        Some(reason) => {
            fs::write(dir.join(FAILED_MARKER), format!("{reason}\n"))?;
            manifest.finish(RunStatus::Failed, Some(reason.clone()), secs);
            manifest.save(&dir)?;
            Err(CliError::Failed { run_id, reason })
        }
    }
}
