//! Argument parsing and subcommand execution for the `kucbvi` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use kucbvi::concentration::verification_suite;
use kucbvi::estimator::read_samples_csv;
use kucbvi::experiment::{replay, run_all, write_log_csv, RunOptions};
use kucbvi::output::{log_path, samples_path, write_atomic, write_run_outputs};
use kucbvi::presets::{preset, preset_names};
use kucbvi::RunConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] kucbvi::Error),
    #[error("replay mismatch for {run_id}: {reason}")]
    ReplayMismatch { run_id: String, reason: String },
    #[error("bound verification failed; see {0}")]
    VerificationFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kucbvi", version, about = "Kernel-based optimistic RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run every (algorithm, seed) pair of a configuration.
    Run(RunArgs),
    /// Monte-Carlo coverage of the concentration bounds.
    VerifyBounds(VerifyArgs),
    /// List environments and presets.
    ListEnvs,
    /// Re-derive logged runs from their transition dumps.
    Replay(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Configuration file (TOML, or JSON with a .json extension).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Name of a built-in configuration.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated seeds replacing those of the configuration.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Number of runs executed concurrently.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Override the number of episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Record wall-clock milliseconds per episode (makes logs non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Do not write transition dumps.
    #[arg(long)]
    no_samples: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 200)]
    t_max: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for `coverage.json` (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub config: RunConfig,
    pub out: PathBuf,
    pub parallel: usize,
    pub timing: bool,
    pub dump_samples: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliInvocation {
    Run(RunSpec),
    Replay(RunSpec),
    VerifyBounds {
        trials: usize,
        t_max: usize,
        delta: f64,
        seed: u64,
        out: Option<PathBuf>,
    },
    ListEnvs,
}

fn resolve(args: RunArgs) -> Result<RunSpec, CliError> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| kucbvi::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            if path.extension().is_some_and(|e| e == "json") {
                RunConfig::from_json_str(&text)?
            } else {
                RunConfig::from_toml_str(&text)?
            }
        }
        (None, Some(name)) => RunConfig::from_toml_str(kucbvi::presets::preset_source(name)?)?,
        (None, None) => return Err(CliError::Usage("one of --config or --preset is required".into())),
    };
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    if let Some(k) = args.episodes {
        config.episodes = k;
    }
    if args.parallel == 0 {
        return Err(CliError::Usage("--parallel must be >= 1".into()));
    }
    config.validate()?;
    Ok(RunSpec {
        config,
        out: args.out,
        parallel: args.parallel,
        timing: args.timing,
        dump_samples: !args.no_samples,
    })
}

/// Parses `args` (including the program name) into a validated invocation.
pub fn parse_and_validate<I, T>(args: I) -> Result<CliInvocation, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(match cli.command {
        Cmd::Run(a) => CliInvocation::Run(resolve(a)?),
        Cmd::Replay(a) => CliInvocation::Replay(resolve(a)?),
        Cmd::VerifyBounds(a) => {
            if a.trials == 0 || a.t_max == 0 || !(a.delta > 0.0 && a.delta < 1.0) {
                return Err(CliError::Usage("need trials, t-max >= 1 and delta in (0, 1)".into()));
            }
            CliInvocation::VerifyBounds {
                trials: a.trials,
                t_max: a.t_max,
                delta: a.delta,
                seed: a.seed,
                out: a.out,
            }
        }
        Cmd::ListEnvs => CliInvocation::ListEnvs,
    })
}

/// Runs an invocation; returns the text to print on success.
pub fn execute(inv: &CliInvocation) -> Result<String, CliError> {
    match inv {
        CliInvocation::Run(spec) => {
            let opts = RunOptions {
                timing: spec.timing,
                keep_samples: spec.dump_samples,
            };
            let logs = run_all(&spec.config, opts, spec.parallel)?;
            let files = write_run_outputs(&spec.out, &spec.config, &logs, spec.dump_samples)?;
            let mut msg = String::new();
            for log in &logs {
                msg.push_str(&format!(
                    "{}\t{}\tfinal cumulative {:?}\n",
                    log.run_id,
                    log.metric_label(),
                    log.final_cumulative()
                ));
            }
            msg.push_str(&format!(
                "wrote {} logs, {} transition dumps, {} summaries to {}\n",
                files.logs.len(),
                files.samples.len(),
                files.summaries.len(),
                spec.out.display()
            ));
            Ok(msg)
        }
        CliInvocation::Replay(spec) => replay_all(spec),
        CliInvocation::VerifyBounds {
            trials,
            t_max,
            delta,
            seed,
            out,
        } => {
            let report = verification_suite(*trials, *t_max, *delta, *seed)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            let location = match out {
                Some(dir) => {
                    fs::create_dir_all(dir).map_err(|e| kucbvi::Error::Io {
                        path: dir.clone(),
                        source: e,
                    })?;
                    let p = dir.join("coverage.json");
                    write_atomic(&p, text.as_bytes())?;
                    p.display().to_string()
                }
                None => "stdout".to_string(),
            };
            if !report.passed {
                if out.is_none() {
                    print!("{text}");
                }
                return Err(CliError::VerificationFailed(location));
            }
            Ok(if out.is_some() {
                format!("all bounds covered; report at {location}\n")
            } else {
                text
            })
        }
        CliInvocation::ListEnvs => {
            let mut s = String::from("environments:\n");
            s.push_str("  lipschitz_bandit   arms on [0,1], mean max(a, 1-a), Gaussian noise\n");
            s.push_str("  discrete_grid      n x n grid in [0,1]^2, 4 slippery actions\n");
            s.push_str("  continuous_grid    [0,1]^2, displacement 0.1 plus Gaussian noise\n");
            s.push_str("presets:\n");
            for name in preset_names() {
                let cfg = preset(name)?;
                let algos: Vec<_> = cfg.algorithms.iter().map(|a| a.label()).collect();
                s.push_str(&format!("  {name:<18} {} [{}]\n", cfg.env.label(), algos.join(", ")));
            }
            Ok(s)
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| {
        kucbvi::Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .into()
    })
}

fn string_records(bytes: &[u8]) -> Result<Vec<csv::StringRecord>, CliError> {
    csv::Reader::from_reader(bytes)
        .records()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Core(kucbvi::Error::Csv(e)))
}

fn replay_all(spec: &RunSpec) -> Result<String, CliError> {
    let cfg = &spec.config;
    let mut msg = String::new();
    for &algo in &cfg.algorithms {
        for &seed in &cfg.seeds {
            let run_id = cfg.run_id(algo, seed);
            let samples = read_samples_csv(
                cfg.env.state_dim(),
                read_file(&samples_path(&spec.out, &run_id))?.as_slice(),
            )?;
            let original = read_file(&log_path(&spec.out, &run_id))?;
            let log = replay(cfg, algo, seed, &samples)?;
            let mut rebuilt = Vec::new();
            write_log_csv(&log, &mut rebuilt)?;
            let (a, b) = (string_records(&original)?, string_records(&rebuilt)?);
            if a.len() != b.len() {
                return Err(CliError::ReplayMismatch {
                    run_id,
                    reason: format!("{} logged episodes, {} replayed", a.len(), b.len()),
                });
            }
            // every column except wall_ms
            for (ra, rb) in a.iter().zip(&b) {
                if (0..8).any(|i| ra.get(i) != rb.get(i)) {
                    return Err(CliError::ReplayMismatch {
                        run_id,
                        reason: format!("episode {} differs", ra.get(4).unwrap_or("?")),
                    });
                }
            }
            msg.push_str(&format!("{run_id}\treplay identical ({} episodes)\n", a.len()));
        }
    }
    Ok(msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<CliInvocation, CliError> {
        parse_and_validate(std::iter::once("kucbvi").chain(args.iter().copied()))
    }

    #[test]
    fn preset_overrides_apply() {
        let inv = parse(&[
            "run",
            "--preset",
            "grid8",
            "--out",
            "o",
            "--seeds",
            "3,4",
            "--episodes",
            "10",
        ])
        .unwrap();
        let CliInvocation::Run(spec) = inv else { panic!() };
        assert_eq!(spec.config.seeds, vec![3, 4]);
        assert_eq!(spec.config.episodes, 10);
        assert_eq!(spec.parallel, 1);
        assert!(spec.dump_samples && !spec.timing);
    }

    #[test]
    fn config_and_preset_conflict() {
        let err = parse(&["run", "--preset", "grid8", "--config", "x.toml", "--out", "o"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn zero_parallel_rejected() {
        let err = parse(&["run", "--preset", "grid8", "--out", "o", "--parallel", "0"]).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
    }

    #[test]
    fn overrides_are_validated() {
        let err = parse(&["run", "--preset", "grid8", "--out", "o", "--episodes", "0"]).unwrap_err();
        assert!(err.to_string().contains("episodes"), "{err}");
    }

    #[test]
    fn verify_bounds_domain() {
        assert!(parse(&["verify-bounds", "--delta", "1.5"]).is_err());
        assert!(matches!(
            parse(&["verify-bounds"]).unwrap(),
            CliInvocation::VerifyBounds { trials: 10_000, .. }
        ));
    }
}
