//! Episode loop, bandwidth schedules, regret accounting and aggregation
//! across seeds.
//!
//! The per-episode metric is the regret `V*_1(x_1) - V^pi_k_1(x_1)` on the
//! discrete grid (exact evaluation of the deployed policy), `1 - r(a_k)` on
//! the bandit, and the collected reward on the continuous grid.

use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{build_agent, Agent};
use crate::config::{Algorithm, BandwidthSchedule, EnvSpec, RunConfig};
use crate::envs::{
    evaluate_policy, exact_optimal_values, ContinuousGridWorldEnv, DiscreteGridWorldEnv, LipschitzBanditEnv,
};
use crate::error::{Error, Result};
use crate::estimator::TransitionSample;
use crate::rng::{run_rng, SimRng};

/// `scale * log(k / period) / sqrt(k / period)` without refresh or floor.
pub fn raw_discrete_bandwidth(scale: f64, period: f64, k: f64) -> f64 {
    let u = k / period;
    scale * u.ln() / u.sqrt()
}

/// Episode at which the schedule was last refreshed: `max(1, R floor(k/R))`.
pub fn refresh_point(schedule: &BandwidthSchedule, k: usize) -> usize {
    let r = match *schedule {
        BandwidthSchedule::Constant { .. } => return k,
        BandwidthSchedule::Bandit { refresh } => refresh,
        BandwidthSchedule::Discrete { refresh, .. } => refresh,
    };
    (r * (k / r)).max(1)
}

/// The schedule formula at a real-valued episode index, with the floor.
pub fn bandwidth_at(schedule: &BandwidthSchedule, k: f64) -> f64 {
    match *schedule {
        BandwidthSchedule::Constant { sigma } => sigma,
        BandwidthSchedule::Bandit { .. } => 1.0 / k.sqrt(),
        BandwidthSchedule::Discrete {
            scale,
            period,
            sigma_min,
            ..
        } => {
            let raw = raw_discrete_bandwidth(scale, period, k);
            if raw.is_nan() {
                sigma_min
            } else {
                raw.max(sigma_min)
            }
        }
    }
}

/// `sigma_k`, held constant between refreshes.
pub fn bandwidth_schedule(schedule: &BandwidthSchedule, k: usize) -> f64 {
    bandwidth_at(schedule, refresh_point(schedule, k) as f64)
}

/// What a run's per-episode metric means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Regret,
    TotalReward,
}

/// The environment of a run together with what is needed to score it.
#[derive(Debug, Clone)]
pub enum World {
    Bandit(LipschitzBanditEnv),
    Grid {
        env: DiscreteGridWorldEnv,
        optimal: Vec<Vec<f64>>,
    },
    Continuous(ContinuousGridWorldEnv),
}

impl World {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        Ok(match cfg.env {
            EnvSpec::LipschitzBandit { arms, noise_std } => World::Bandit(LipschitzBanditEnv::new(arms, noise_std)?),
            EnvSpec::DiscreteGrid {
                size,
                slip,
                reward_noise_std,
                goal,
                reward_width,
                start,
            } => {
                let env = DiscreteGridWorldEnv::new(size, slip, reward_noise_std, goal, reward_width, start)?;
                let optimal = exact_optimal_values(&env, cfg.horizon);
                World::Grid { env, optimal }
            }
            EnvSpec::ContinuousGrid { .. } => {
                let env = cfg.env.continuous().expect("continuous spec");
                env.validate()?;
                World::Continuous(env)
            }
        })
    }

    pub fn metric_kind(&self) -> MetricKind {
        match self {
            World::Continuous(_) => MetricKind::TotalReward,
            _ => MetricKind::Regret,
        }
    }

    pub fn start(&self) -> Vec<f64> {
        match self {
            World::Bandit(_) => Vec::new(),
            World::Grid { env, .. } => env.state(env.start()).to_vec(),
            World::Continuous(env) => env.start.to_vec(),
        }
    }

    pub fn step(&self, x: &[f64], a: usize, rng: &mut SimRng) -> Result<(Vec<f64>, f64)> {
        match self {
            World::Bandit(env) => Ok((Vec::new(), env.pull(a, rng)?)),
            World::Grid { env, .. } => {
                let (next, r) = env.step(env.state_index(x)?, a, rng)?;
                Ok((env.state(next).to_vec(), r))
            }
            World::Continuous(env) => env.step(x, a, rng),
        }
    }

    /// Exact regret of the agent's current policy from the start state.
    fn policy_regret(&self, agent: &dyn Agent, horizon: usize) -> Result<Option<f64>> {
        let World::Grid { env, optimal } = self else {
            return Ok(None);
        };
        let ns = env.n_states();
        let mut table = vec![0usize; horizon * ns];
        for h in 1..=horizon {
            for s in 0..ns {
                table[(h - 1) * ns + s] = agent.policy(h, env.state(s))?;
            }
        }
        let v = evaluate_policy(env, horizon, |h, s| table[(h - 1) * ns + s]);
        Ok(Some(optimal[0][env.start()] - v[0][env.start()]))
    }
}

/// One row of a run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub k: usize,
    pub episode_metric: f64,
    pub cumulative_metric: f64,
    pub sigma: f64,
    pub wall_ms: u64,
    /// The agent's optimistic `V_1(x_1)` at the start of the episode.
    pub optimistic_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub run_id: String,
    pub seed: u64,
    pub algo: Algorithm,
    pub env: String,
    pub fingerprint: String,
    pub metric: MetricKind,
    pub records: Vec<EpisodeRecord>,
    /// Every transition, in order; empty unless requested.
    pub samples: Vec<TransitionSample>,
}

impl RunLog {
    pub fn final_cumulative(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cumulative_metric)
    }

    pub fn metric_label(&self) -> &'static str {
        match self.metric {
            MetricKind::Regret => "regret",
            MetricKind::TotalReward => "total_reward",
        }
    }

    pub fn cumulative(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cumulative_metric).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Record wall-clock time per episode (otherwise the column is 0).
    pub timing: bool,
    /// Keep every transition in [`RunLog::samples`].
    pub keep_samples: bool,
}

/// Supplies transitions to the episode loop.
trait Transitions {
    fn next(&mut self, k: usize, h: usize, x: &[f64], a: usize) -> Result<(Vec<f64>, f64)>;
}

struct Live<'a> {
    world: &'a World,
    rng: SimRng,
}

impl Transitions for Live<'_> {
    fn next(&mut self, _k: usize, _h: usize, x: &[f64], a: usize) -> Result<(Vec<f64>, f64)> {
        self.world.step(x, a, &mut self.rng)
    }
}

struct Logged<'a> {
    samples: std::slice::Iter<'a, TransitionSample>,
}

impl Transitions for Logged<'_> {
    fn next(&mut self, k: usize, h: usize, x: &[f64], a: usize) -> Result<(Vec<f64>, f64)> {
        let diverged = |reason: String| Error::ReplayDivergence { k, h, reason };
        let s = self
            .samples
            .next()
            .ok_or_else(|| diverged("dataset exhausted".into()))?;
        if s.k != k || s.h != h {
            return Err(diverged(format!("dataset row is (k={}, h={})", s.k, s.h)));
        }
        if s.x.iter().map(|v| v.to_bits()).ne(x.iter().map(|v| v.to_bits())) {
            return Err(diverged(format!("state {:?} differs from logged {:?}", x, s.x)));
        }
        if s.a != a {
            return Err(diverged(format!("action {a} differs from logged {}", s.a)));
        }
        Ok((s.x_next.clone(), s.r))
    }
}

fn drive(
    cfg: &RunConfig,
    algo: Algorithm,
    seed: u64,
    world: &World,
    source: &mut dyn Transitions,
    opts: RunOptions,
) -> Result<RunLog> {
    let mut agent = build_agent(cfg, algo)?;
    let start = world.start();
    let mut records = Vec::with_capacity(cfg.episodes);
    let mut samples = Vec::new();
    let mut cumulative = 0.0;
    for k in 1..=cfg.episodes {
        let clock = opts.timing.then(Instant::now);
        let sigma = bandwidth_schedule(&cfg.bandwidth, k);
        agent.begin_episode(k, sigma)?;
        let optimistic_value = agent.optimistic_value(&start);
        let mut metric = world.policy_regret(agent.as_ref(), cfg.horizon)?.unwrap_or(0.0);
        let mut x = start.clone();
        for h in 1..=cfg.horizon {
            let a = agent.act(h, &x)?;
            let (x_next, r) = source.next(k, h, &x, a)?;
            let sample = TransitionSample { x, a, x_next, r, h, k };
            if cfg.clip_rewards {
                agent.observe(&TransitionSample {
                    r: sample.r.clamp(0.0, 1.0),
                    ..sample.clone()
                })?;
            } else {
                agent.observe(&sample)?;
            }
            match world {
                World::Bandit(env) => metric += env.best_mean() - env.mean(a)?,
                World::Continuous(_) => metric += r,
                World::Grid { .. } => {}
            }
            x = sample.x_next.clone();
            if opts.keep_samples {
                samples.push(sample);
            }
        }
        agent.end_episode()?;
        cumulative += metric;
        records.push(EpisodeRecord {
            k,
            episode_metric: metric,
            cumulative_metric: cumulative,
            sigma,
            wall_ms: clock.map_or(0, |c| c.elapsed().as_millis() as u64),
            optimistic_value,
        });
    }
    Ok(RunLog {
        run_id: cfg.run_id(algo, seed),
        seed,
        algo,
        env: cfg.env.label().to_string(),
        fingerprint: cfg.fingerprint(algo),
        metric: world.metric_kind(),
        records,
        samples,
    })
}

/// One full run of `algo` under `cfg` with environment noise from `seed`.
pub fn run(cfg: &RunConfig, algo: Algorithm, seed: u64, opts: RunOptions) -> Result<RunLog> {
    let world = World::new(cfg)?;
    let mut live = Live {
        world: &world,
        rng: run_rng(seed),
    };
    drive(cfg, algo, seed, &world, &mut live, opts)
}

/// Re-derives a run from its logged transitions, checking at every step that
/// the agent takes the logged action from the logged state.
pub fn replay(cfg: &RunConfig, algo: Algorithm, seed: u64, samples: &[TransitionSample]) -> Result<RunLog> {
    let world = World::new(cfg)?;
    let mut logged = Logged {
        samples: samples.iter(),
    };
    let opts = RunOptions {
        timing: false,
        keep_samples: true,
    };
    let log = drive(cfg, algo, seed, &world, &mut logged, opts)?;
    if logged.samples.next().is_some() {
        return Err(Error::ReplayDivergence {
            k: cfg.episodes,
            h: cfg.horizon,
            reason: "dataset has extra rows".into(),
        });
    }
    Ok(log)
}

/// Every `(algorithm, seed)` pair of `cfg`, run on up to `parallel` threads.
/// The result order is algorithms outer, seeds inner, as configured.
pub fn run_all(cfg: &RunConfig, opts: RunOptions, parallel: usize) -> Result<Vec<RunLog>> {
    let jobs: Vec<(Algorithm, u64)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(|&(a, s)| run(cfg, a, s, opts)).collect())
}

/// Mean and sample standard deviation per episode across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub fingerprint: String,
    pub algo: Algorithm,
    pub env: String,
    pub metric: MetricKind,
    pub seeds: Vec<u64>,
    pub k: Vec<usize>,
    pub episode_mean: Vec<f64>,
    pub episode_std: Vec<f64>,
    pub cumulative_mean: Vec<f64>,
    pub cumulative_std: Vec<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregates logs of one configuration; the result does not depend on the
/// order of `logs`.
pub fn aggregate(logs: &[RunLog]) -> Result<Summary> {
    let first = logs
        .first()
        .ok_or_else(|| Error::Domain("no logs to aggregate".into()))?;
    for l in logs {
        if l.fingerprint != first.fingerprint {
            return Err(Error::FingerprintMismatch(format!(
                "{} vs {}",
                first.fingerprint, l.fingerprint
            )));
        }
        if l.records.len() != first.records.len() {
            return Err(Error::LengthMismatch {
                left: first.records.len(),
                right: l.records.len(),
            });
        }
    }
    let mut sorted: Vec<&RunLog> = logs.iter().collect();
    sorted.sort_by_key(|l| l.seed);
    let n_k = first.records.len();
    let mut s = Summary {
        fingerprint: first.fingerprint.clone(),
        algo: first.algo,
        env: first.env.clone(),
        metric: first.metric,
        seeds: sorted.iter().map(|l| l.seed).collect(),
        k: first.records.iter().map(|r| r.k).collect(),
        episode_mean: Vec::with_capacity(n_k),
        episode_std: Vec::with_capacity(n_k),
        cumulative_mean: Vec::with_capacity(n_k),
        cumulative_std: Vec::with_capacity(n_k),
    };
    for i in 0..n_k {
        let ep: Vec<f64> = sorted.iter().map(|l| l.records[i].episode_metric).collect();
        let cu: Vec<f64> = sorted.iter().map(|l| l.records[i].cumulative_metric).collect();
        let (m, sd) = mean_std(&ep);
        s.episode_mean.push(m);
        s.episode_std.push(sd);
        let (m, sd) = mean_std(&cu);
        s.cumulative_mean.push(m);
        s.cumulative_std.push(sd);
    }
    Ok(s)
}

pub const LOG_COLUMNS: [&str; 9] = [
    "run_id",
    "seed",
    "algo",
    "env",
    "k",
    "episode_metric",
    "cumulative_metric",
    "sigma_k",
    "wall_ms",
];

/// Writes the per-episode CSV log. Floats use the shortest representation
/// that round-trips, with `.` as decimal separator.
pub fn write_log_csv<W: Write>(log: &RunLog, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(LOG_COLUMNS)?;
    let seed = log.seed.to_string();
    for r in &log.records {
        out.write_record([
            log.run_id.as_str(),
            &seed,
            log.algo.label(),
            &log.env,
            &r.k.to_string(),
            &format!("{:?}", r.episode_metric),
            &format!("{:?}", r.cumulative_metric),
            &format!("{:?}", r.sigma),
            &r.wall_ms.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// A parsed CSV log row.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub run_id: String,
    pub seed: u64,
    pub algo: String,
    pub env: String,
    pub k: usize,
    pub episode_metric: f64,
    pub cumulative_metric: f64,
    pub sigma_k: f64,
    pub wall_ms: u64,
}

pub fn read_log_csv<R: Read>(r: R) -> Result<Vec<LogRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != LOG_COLUMNS {
        return Err(Error::Parse(format!("unexpected log header {header:?}")));
    }
    let bad = |s: &str| Error::Parse(format!("bad value `{s}` in run log"));
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(LogRow {
            run_id: rec[0].to_string(),
            seed: rec[1].parse().map_err(|_| bad(&rec[1]))?,
            algo: rec[2].to_string(),
            env: rec[3].to_string(),
            k: rec[4].parse().map_err(|_| bad(&rec[4]))?,
            episode_metric: rec[5].parse().map_err(|_| bad(&rec[5]))?,
            cumulative_metric: rec[6].parse().map_err(|_| bad(&rec[6]))?,
            sigma_k: rec[7].parse().map_err(|_| bad(&rec[7]))?,
            wall_ms: rec[8].parse().map_err(|_| bad(&rec[8]))?,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
