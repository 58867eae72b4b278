//! On-disk layout of experiment results. Every file is written to a
//! temporary sibling and renamed into place.
//!
//! ```text
//! {out}/{run_id}.csv                  per-episode log
//! {out}/{run_id}.samples.csv          transitions (k, h, x.., a, xn.., r)
//! {out}/{name}-{algo}-{hash8}.summary.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::agent::resolve_bonus;
use crate::bonus::BonusRule;
use crate::config::{Algorithm, RunConfig};
use crate::error::{Error, Result};
use crate::estimator::write_samples_csv;
use crate::experiment::{aggregate, bandwidth_schedule, write_log_csv, RunLog, Summary, World};
use crate::planner::lipschitz_constants;

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Domain(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn log_path(dir: &Path, run_id: &str) -> PathBuf {
    dir.join(format!("{run_id}.csv"))
}

pub fn samples_path(dir: &Path, run_id: &str) -> PathBuf {
    dir.join(format!("{run_id}.samples.csv"))
}

pub fn summary_path(dir: &Path, cfg: &RunConfig, algo: Algorithm) -> PathBuf {
    let fp = cfg.fingerprint(algo);
    dir.join(format!("{}-{}-{}.summary.json", cfg.name, algo.label(), &fp[..8]))
}

/// Constants the run resolved from its configuration.
pub fn resolved_constants(cfg: &RunConfig) -> Result<serde_json::Value> {
    let lipschitz = lipschitz_constants(cfg.lambda_r, cfg.lambda_p, cfg.horizon)?;
    let sigma_final = bandwidth_schedule(&cfg.bandwidth, cfg.episodes);
    let mut out = json!({
        "kernel": cfg.kernel.label(),
        "kernel_c1": cfg.kernel.c1(),
        "kernel_c2": cfg.kernel.c2(),
        "lipschitz": lipschitz.as_slice(),
        "sigma_first": bandwidth_schedule(&cfg.bandwidth, 1),
        "sigma_final": sigma_final,
    });
    if !cfg.env.is_bandit() {
        if let BonusRule::Theoretical { constants, .. } = resolve_bonus(cfg, cfg.episodes, sigma_final)? {
            out["theoretical_bonus_at_final_episode"] = serde_json::to_value(constants).expect("plain floats");
        }
    }
    if let World::Grid { env, optimal } = World::new(cfg)? {
        out["optimal_initial_value"] = json!(optimal[0][env.start()]);
    }
    Ok(out)
}

pub fn summary_json(cfg: &RunConfig, summary: &Summary) -> Result<serde_json::Value> {
    let mut echo = cfg.clone();
    echo.algorithms = vec![summary.algo];
    Ok(json!({
        "config": serde_json::to_value(&echo).expect("config serializes"),
        "fingerprint": summary.fingerprint,
        "algo": summary.algo.label(),
        "env": summary.env,
        "metric": summary.metric,
        "seeds": summary.seeds,
        "constants": resolved_constants(cfg)?,
        "k": summary.k,
        "episode_mean": summary.episode_mean,
        "episode_std": summary.episode_std,
        "cumulative_mean": summary.cumulative_mean,
        "cumulative_std": summary.cumulative_std,
    }))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WrittenFiles {
    pub logs: Vec<PathBuf>,
    pub samples: Vec<PathBuf>,
    pub summaries: Vec<PathBuf>,
}

/// Writes one CSV per run, optional transition dumps, and one summary per
/// algorithm. `logs` must come from [`crate::experiment::run_all`] on `cfg`.
pub fn write_run_outputs(dir: &Path, cfg: &RunConfig, logs: &[RunLog], dump_samples: bool) -> Result<WrittenFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = WrittenFiles::default();
    let dim = cfg.env.state_dim();
    for log in logs {
        let mut buf = Vec::new();
        write_log_csv(log, &mut buf)?;
        let p = log_path(dir, &log.run_id);
        write_atomic(&p, &buf)?;
        files.logs.push(p);
        if dump_samples {
            let mut buf = Vec::new();
            write_samples_csv(dim, log.samples.iter().cloned(), &mut buf)?;
            let p = samples_path(dir, &log.run_id);
            write_atomic(&p, &buf)?;
            files.samples.push(p);
        }
    }
    for &algo in &cfg.algorithms {
        let mine: Vec<RunLog> = logs.iter().filter(|l| l.algo == algo).cloned().collect();
        if mine.is_empty() {
            continue;
        }
        let summary = aggregate(&mine)?;
        let text = serde_json::to_string_pretty(&summary_json(cfg, &summary)?).expect("json");
        let p = summary_path(dir, cfg, algo);
        write_atomic(&p, format!("{text}\n").as_bytes())?;
        files.summaries.push(p);
    }
    Ok(files)
}
