//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs as a plain binary so the lines are never captured.

mod common;

use std::time::{Duration, Instant};

use common::*;
use kucbvi::concentration::{kernel_bias_sweep, verification_suite};
use kucbvi::estimator::DatasetMode;
use kucbvi::experiment::{log_log_slope, write_log_csv};
use kucbvi::presets::preset;
use kucbvi::{
    exact_optimal_values, interpolate_query, lipschitz_constants, practical_bonus, refine_value, run, run_all,
    Algorithm, ContinuousGridWorldEnv, DiscreteGridWorldEnv, GreedyKernelAgent, KernelSmoother, LipschitzQ, LipschitzV,
    MotherKernel, ProductMetric, RunConfig, RunLog, RunOptions, StateMetric, StepDataset, TransitionSample,
};
use rand::Rng;

type Outcome = Result<String, String>;

const OPTS: RunOptions = RunOptions {
    timing: false,
    keep_samples: false,
};

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn within(limit: Duration, took: Duration) -> Result<(), String> {
    if took < limit {
        Ok(())
    } else {
        Err(format!("took {took:.1?}, limit {limit:?}"))
    }
}

fn dataset(inst: &Instance) -> StepDataset {
    let mut d = StepDataset::new(inst.query.len(), DatasetMode::Stationary);
    for s in 0..inst.xs.len() {
        d.append(TransitionSample {
            x: inst.xs[s].clone(),
            a: inst.actions[s],
            x_next: inst.next[s].clone(),
            r: inst.rewards[s],
            h: 1,
            k: 1,
        })
        .unwrap();
    }
    d
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = rng(1);
    let mut worst = 0.0f64;
    let mut check = |what: &str, got: f64, want: f64| -> Result<(), String> {
        let err = if got == want {
            0.0
        } else {
            (got - want).abs() / want.abs().max(1e-300)
        };
        worst = worst.max(err);
        if rel_close(got, want, 1e-12) {
            Ok(())
        } else {
            Err(format!("{what}: {got} vs oracle {want}"))
        }
    };
    for _ in 0..200 {
        let inst = Instance::random(&mut rng, 10);
        let data = dataset(&inst);
        let metric = ProductMetric {
            state: StateMetric::Euclidean,
            action: inst.metric.clone(),
        };
        let sm = KernelSmoother::new(inst.kernel, metric.clone(), inst.sigma, inst.beta).unwrap();
        let (x, a) = (&inst.query[..], inst.query_action);
        check("count", sm.count(&data, x, a), inst.count())?;
        check("reward", sm.reward_estimate(&data, x, a), inst.reward())?;
        check(
            "transition",
            sm.transition_expectation(&data, x, a, test_value),
            inst.expectation(test_value),
        )?;

        let l = rng.random_range(0.1..5.0);
        let mut q = LipschitzQ::new(x.len(), l, metric);
        let mut anchors = Vec::new();
        for s in 0..inst.xs.len() {
            let v = rng.random_range(0.0..3.0);
            q.push(&inst.xs[s], inst.actions[s], v);
            anchors.push((inst.xs[s].clone(), inst.actions[s], v));
        }
        let want = cone_min(&inst.metric, l, &anchors, x, a);
        let got = interpolate_query(&q, x, a);
        if want.is_infinite() {
            if got != want {
                return Err(format!("interpolate: {got} vs oracle {want}"));
            }
        } else {
            check("interpolate", got, want)?;
        }

        let horizon = rng.random_range(1..=20);
        let h = rng.random_range(1..=horizon);
        let sigma_term = rng.random_range(0.0..0.2);
        for discrete in [true, false] {
            let c = inst.count();
            check(
                "practical bonus",
                practical_bonus(c, h, horizon, inst.beta, sigma_term, variant(discrete)).unwrap(),
                common::practical_bonus(c, h, horizon, inst.beta, sigma_term, discrete),
            )?;
        }
    }
    within(Duration::from_secs(1), started.elapsed())?;
    Ok(format!("200 instances, max relative error {worst:.1e}"))
}

fn lipschitz_invariant() -> Outcome {
    let started = Instant::now();
    let mut rng = rng(2);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..1000 {
        let dim = rng.random_range(1..=3);
        let l = rng.random_range(0.01..10.0);
        let n = rng.random_range(1..=30);
        let point = |rng: &mut rand_chacha::ChaCha8Rng| (0..dim).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
        let positions: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let line = i % 2 == 0;
        let metric = if line {
            ProductMetric::line_actions(positions)
        } else {
            ProductMetric::discrete_actions()
        };
        let mut q = LipschitzQ::new(dim, l, metric.clone());
        let mut v = LipschitzV::new(dim, l, f64::INFINITY, StateMetric::Euclidean);
        for _ in 0..n {
            let (x, a, val) = (point(&mut rng), rng.random_range(0..4), rng.random_range(0.0..20.0));
            q.push(&x, a, val);
            refine_value(&mut v, &x, val);
        }
        let (u, v_pt) = (point(&mut rng), point(&mut rng));
        let (au, av) = if line {
            (rng.random_range(0..4), rng.random_range(0..4))
        } else {
            let a = rng.random_range(0..4);
            (a, a)
        };
        let (qu, qv) = (q.query(&u, au), q.query(&v_pt, av));
        if qu.is_finite() || qv.is_finite() {
            let rho = metric.distance(&u, au, &v_pt, av);
            let gap = (qu - qv).abs() - l * rho;
            worst = worst.max(gap);
            if !(gap <= 1e-9) {
                return Err(format!("LipschitzQ: |{qu} - {qv}| > {l} * {rho}"));
            }
        }
        let rho = StateMetric::Euclidean.distance(&u, &v_pt);
        let gap = (v.query(&u) - v.query(&v_pt)).abs() - l * rho;
        worst = worst.max(gap);
        if !(gap <= 1e-9) {
            return Err(format!("LipschitzV: gap {gap}"));
        }
    }
    within(Duration::from_secs(1), started.elapsed())?;
    Ok(format!("1000 anchor sets, max |Q(u)-Q(v)| - L rho = {worst:.2e}"))
}

fn greedy_monotonicity() -> Outcome {
    let started = Instant::now();
    let cfg = preset("continuous").unwrap();
    let env: ContinuousGridWorldEnv = cfg.env.continuous().unwrap();
    let sigma = 0.1;
    let smoother = KernelSmoother::new(
        MotherKernel::Gaussian,
        ProductMetric::discrete_actions(),
        sigma,
        cfg.beta,
    )
    .unwrap();
    let bonus = kucbvi::agent::resolve_bonus(&cfg, 1, sigma).unwrap();
    let lipschitz = lipschitz_constants(cfg.lambda_r, cfg.lambda_p, cfg.horizon).unwrap();
    let mut agent = GreedyKernelAgent::new(smoother, bonus, &lipschitz, cfg.horizon, 4, 2, cfg.stationary);
    let mut rng = rng(3);
    let probes: Vec<[f64; 2]> = (0..100).map(|_| [rng.random(), rng.random()]).collect();
    let snapshot = |agent: &GreedyKernelAgent| -> Vec<f64> {
        (1..=cfg.horizon)
            .flat_map(|h| probes.iter().map(move |p| agent.value_function(h).query(p)))
            .collect()
    };
    let mut prev = snapshot(&agent);
    let mut max_increase = f64::NEG_INFINITY;
    for k in 1..=500 {
        let mut x = env.start.to_vec();
        for h in 1..=cfg.horizon {
            let a = agent.step(h, &x).action;
            let (x_next, r) = env.step(&x, a, &mut rng).unwrap();
            agent.record(TransitionSample {
                x,
                a,
                x_next: x_next.clone(),
                r,
                h,
                k,
            });
            x = x_next;
        }
        agent.end_episode().unwrap();
        let now = snapshot(&agent);
        for (old, new) in prev.iter().zip(&now) {
            max_increase = max_increase.max(new - old);
            if new > &(old + 1e-12) {
                return Err(format!("episode {k}: probe value rose from {old} to {new}"));
            }
        }
        prev = now;
    }
    within(Duration::from_secs(60), started.elapsed())?;
    Ok(format!(
        "500 episodes x 100 probes x {} steps, max change {max_increase:.2e}",
        cfg.horizon
    ))
}

fn optimism_config() -> RunConfig {
    RunConfig::from_toml_str(
        r#"
name = "optimism3x3"
algorithms = ["kernel_ucbvi"]
episodes = 200
horizon = 3
seeds = []
beta = 1.0
stationary = false
interpolate = true
plan_every = 1

[env]
kind = "discrete_grid"
size = 3
slip = 0.1
reward_noise_std = 0.0
goal = [1.0, 1.0]
reward_width = 0.5
start = [0.0, 0.0]

[bandwidth]
kind = "constant"
sigma = 0.1

[bonus]
kind = "theoretical"
delta = 0.1
covering = { constant = 1.0, dimension = 2.0 }
"#,
    )
    .unwrap()
}

fn statistical_optimism() -> Outcome {
    let started = Instant::now();
    let mut cfg = optimism_config();
    cfg.seeds = (0..40).collect();
    cfg.validate().map_err(|e| e.to_string())?;
    let env = DiscreteGridWorldEnv::new(3, 0.1, 0.0, [1.0, 1.0], 0.5, [0.0, 0.0]).unwrap();
    let v_star = exact_optimal_values(&env, cfg.horizon)[0][env.start()];
    let logs = run_all(&cfg, OPTS, threads()).map_err(|e| e.to_string())?;
    let mut violating = 0;
    let mut min_gap = f64::INFINITY;
    for log in &logs {
        let gaps: Vec<f64> = log
            .records
            .iter()
            .map(|r| r.optimistic_value.unwrap() - v_star)
            .collect();
        min_gap = gaps.iter().copied().fold(min_gap, f64::min);
        if gaps.iter().any(|&g| g < -1e-9) {
            violating += 1;
        }
    }
    let frac = violating as f64 / logs.len() as f64;
    within(Duration::from_secs(120), started.elapsed())?;
    let msg = format!("{violating}/40 runs non-optimistic ({frac}), min V1 - V1* = {min_gap:.3e}");
    if frac <= 0.1 + 0.1 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn concentration_coverage() -> Outcome {
    let started = Instant::now();
    let report = verification_suite(10_000, 200, 0.05, 5).map_err(|e| e.to_string())?;
    let worst = report.coverage.iter().map(|c| c.failure_rate).fold(0.0, f64::max);
    for c in &report.coverage {
        if c.failure_rate > 0.05 {
            return Err(format!(
                "{:?} with {} weights: failure rate {}",
                c.bound,
                c.config.weights.label(),
                c.failure_rate
            ));
        }
    }
    within(Duration::from_secs(60), started.elapsed())?;
    Ok(format!(
        "{} configurations, worst failure rate {worst}",
        report.coverage.len()
    ))
}

fn kernel_bias() -> Outcome {
    let started = Instant::now();
    let sweep = kernel_bias_sweep(&MotherKernel::Gaussian, 1000, 500, &[0.01, 0.1, 1.0], &[0.05, 1.0], 6)
        .map_err(|e| e.to_string())?;
    within(Duration::from_secs(1), started.elapsed())?;
    let msg = format!(
        "{} violations in {} sequences, max lhs/rhs {:.3}",
        sweep.violations, sweep.sequences, sweep.max_ratio
    );
    if sweep.violations == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn mean_final(logs: &[RunLog], algo: Algorithm) -> f64 {
    let sel: Vec<f64> = logs
        .iter()
        .filter(|l| l.algo == algo)
        .map(|l| l.final_cumulative())
        .collect();
    sel.iter().sum::<f64>() / sel.len() as f64
}

fn sublinear_regret(grid: &[RunLog], took: Duration) -> Outcome {
    let k = grid[0].records.len();
    let mut slopes = Vec::new();
    for log in grid.iter().filter(|l| l.algo == Algorithm::KernelUcbvi && l.seed < 5) {
        let cum = log.cumulative();
        if let Some(w) = cum.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(format!(
                "seed {}: cumulative regret not increasing at k = {}",
                log.seed,
                w + 2
            ));
        }
        let tail: Vec<usize> = (k / 2..=k).collect();
        let x: Vec<f64> = tail.iter().map(|&i| i as f64).collect();
        let y: Vec<f64> = tail.iter().map(|&i| cum[i - 1]).collect();
        slopes.push(log_log_slope(&x, &y));
    }
    if slopes.len() != 5 {
        return Err(format!("expected 5 seeds, got {}", slopes.len()));
    }
    within(Duration::from_secs(600), took)?;
    let max = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let msg = format!(
        "slopes {:?}, max {max:.3}",
        slopes.iter().map(|s| (s * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    );
    if max < 0.95 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn kernel_beats_ucbvi(grid: &[RunLog], took: Duration) -> Outcome {
    within(Duration::from_secs(1200), took)?;
    let (kern, tab) = (
        mean_final(grid, Algorithm::KernelUcbvi),
        mean_final(grid, Algorithm::Ucbvi),
    );
    let msg = format!("mean regret at K: Kernel-UCBVI {kern:.1}, UCBVI {tab:.1}");
    if kern <= tab {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn greedy_ordering(stat: &[RunLog], nonstat: &[RunLog], took: Duration) -> Outcome {
    within(Duration::from_secs(1200), took)?;
    let (gk, gu) = (
        mean_final(stat, Algorithm::GreedyKernelUcbvi),
        mean_final(stat, Algorithm::GreedyUcbvi),
    );
    let (gk2, gu2, oq) = (
        mean_final(nonstat, Algorithm::GreedyKernelUcbvi),
        mean_final(nonstat, Algorithm::GreedyUcbvi),
        mean_final(nonstat, Algorithm::OptQl),
    );
    let msg = format!(
        "stationary: greedy-kernel {gk:.1} vs greedy-ucbvi {gu:.1}; per-step: greedy-kernel {gk2:.1}, greedy-ucbvi {gu2:.1}, optql {oq:.1}"
    );
    if gk >= gu && gk2 >= gu2 && gk2 >= oq && gu2 >= oq {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn csv_bytes(log: &RunLog) -> Vec<u8> {
    let mut out = Vec::new();
    write_log_csv(log, &mut out).unwrap();
    out
}

fn determinism(earlier: &[&RunLog]) -> Outcome {
    let mut checked = Vec::new();
    for log in earlier {
        let cfg = preset(log.run_id.split('-').next().unwrap()).map_err(|e| e.to_string())?;
        let again = run(&cfg, log.algo, log.seed, OPTS).map_err(|e| e.to_string())?;
        if csv_bytes(log) != csv_bytes(&again) {
            return Err(format!("{} differs on repetition", log.run_id));
        }
        checked.push(log.run_id.clone());
    }
    let mut bandit = preset("bandit").unwrap();
    bandit.seeds = vec![3, 4];
    let serial = run_all(&bandit, OPTS, 1).map_err(|e| e.to_string())?;
    let parallel = run_all(&bandit, OPTS, 4).map_err(|e| e.to_string())?;
    for (a, b) in serial.iter().zip(&parallel) {
        if csv_bytes(a) != csv_bytes(b) {
            return Err(format!("{} differs between serial and parallel runs", a.run_id));
        }
        checked.push(a.run_id.clone());
    }
    Ok(format!("{} logs byte-identical on repetition", checked.len()))
}

fn report(n: usize, name: &str, outcome: Outcome, failures: &mut Vec<usize>) {
    match outcome {
        Ok(msg) => println!("criterion {n:>2} PASS  {name}: {msg}"),
        Err(msg) => {
            println!("criterion {n:>2} FAIL  {name}: {msg}");
            failures.push(n);
        }
    }
}

fn main() {
    // `cargo test -- --list` and filters expect a harness; run everything regardless.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failures = Vec::new();
    report(1, "oracle equivalence", oracle_equivalence(), &mut failures);
    report(2, "Lipschitz invariant", lipschitz_invariant(), &mut failures);
    report(3, "greedy monotonicity", greedy_monotonicity(), &mut failures);
    report(4, "statistical optimism", statistical_optimism(), &mut failures);
    report(5, "concentration coverage", concentration_coverage(), &mut failures);
    report(6, "kernel-bias bound", kernel_bias(), &mut failures);

    let started = Instant::now();
    let grid = run_all(&preset("grid8").unwrap(), OPTS, threads()).expect("grid8 runs");
    let grid_took = started.elapsed();
    report(7, "sublinear regret", sublinear_regret(&grid, grid_took), &mut failures);
    report(
        8,
        "Kernel-UCBVI vs UCBVI",
        kernel_beats_ucbvi(&grid, grid_took),
        &mut failures,
    );

    let started = Instant::now();
    let stat = run_all(&preset("continuous").unwrap(), OPTS, threads()).expect("continuous runs");
    let nonstat = run_all(&preset("continuous_optql").unwrap(), OPTS, threads()).expect("continuous_optql runs");
    report(
        9,
        "greedy comparison",
        greedy_ordering(&stat, &nonstat, started.elapsed()),
        &mut failures,
    );

    let first = |logs: &[RunLog]| logs.iter().find(|l| l.seed == 0).cloned().unwrap();
    let (g, s, n) = (first(&grid), first(&stat), first(&nonstat));
    report(10, "determinism", determinism(&[&g, &s, &n]), &mut failures);

    if failures.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failures:?}");
        std::process::exit(1);
    }
}
