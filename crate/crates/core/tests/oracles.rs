//! Estimators, interpolation, bonuses and kernel constants against
//! independently written references, plus property tests of the invariants.

mod common;

use common::*;
use kucbvi::estimator::DatasetMode;
use kucbvi::experiment::{bandwidth_at, refresh_point};
use kucbvi::{
    lipschitz_constants, practical_bonus, refine_value, ucbvi_bonus, BandwidthSchedule, DiscretizationMap,
    KernelSmoother, LipschitzQ, LipschitzV, MotherKernel, ProductMetric, StateMetric, StepDataset, TransitionSample,
};
use proptest::prelude::*;

fn build(inst: &Instance) -> (KernelSmoother, StepDataset) {
    let metric = ProductMetric {
        state: StateMetric::Euclidean,
        action: inst.metric.clone(),
    };
    let sm = KernelSmoother::new(inst.kernel, metric, inst.sigma, inst.beta).unwrap();
    let mut d = StepDataset::new(inst.query.len(), DatasetMode::Stationary);
    for s in 0..inst.xs.len() {
        d.append(TransitionSample {
            x: inst.xs[s].clone(),
            a: inst.actions[s],
            x_next: inst.next[s].clone(),
            r: inst.rewards[s],
            h: 1 + s % 3,
            k: 1,
        })
        .unwrap();
    }
    (sm, d)
}

proptest! {
    #[test]
    fn estimators_match_direct_sums(seed in any::<u64>()) {
        let inst = Instance::random(&mut rng(seed), 40);
        let (sm, d) = build(&inst);
        let (x, a) = (&inst.query[..], inst.query_action);
        prop_assert!(rel_close(sm.count(&d, x, a), inst.count(), 1e-12));
        prop_assert!(rel_close(sm.reward_estimate(&d, x, a), inst.reward(), 1e-12));
        prop_assert!(rel_close(sm.transition_expectation(&d, x, a, test_value), inst.expectation(test_value), 1e-12));
    }

    #[test]
    fn estimates_are_shrunk_averages(seed in any::<u64>()) {
        let inst = Instance::random(&mut rng(seed), 40);
        let (sm, d) = build(&inst);
        let (x, a) = (&inst.query[..], inst.query_action);
        let c = sm.count(&d, x, a);
        prop_assert!(c >= inst.beta);
        let r = sm.reward_estimate(&d, x, a);
        let rmax = inst.rewards.iter().copied().fold(0.0, f64::max);
        prop_assert!(r >= 0.0 && r <= rmax * (c - inst.beta) / c + 1e-12);
        let ones = sm.transition_expectation(&d, x, a, |_| 1.0);
        let mass = inst.weights().iter().sum::<f64>() / inst.count();
        prop_assert!(rel_close(ones, mass, 1e-12) && ones < 1.0);
    }

    #[test]
    fn count_grows_with_data(seed in any::<u64>()) {
        let inst = Instance::random(&mut rng(seed), 20);
        let (sm, mut d) = build(&inst);
        let (x, a) = (&inst.query[..], inst.query_action);
        let before = sm.count(&d, x, a);
        d.append(TransitionSample { x: x.to_vec(), a, x_next: x.to_vec(), r: 0.5, h: 1, k: 2 }).unwrap();
        prop_assert!(rel_close(sm.count(&d, x, a), before + 1.0, 1e-12));
    }

    #[test]
    fn interpolation_matches_cone_minimum(seed in any::<u64>(), l in 0.01f64..10.0) {
        let mut r = rng(seed);
        let inst = Instance::random(&mut r, 30);
        let metric = ProductMetric { state: StateMetric::Euclidean, action: inst.metric.clone() };
        let mut q = LipschitzQ::new(inst.query.len(), l, metric);
        let mut anchors = Vec::new();
        for s in 0..inst.xs.len() {
            let v = inst.rewards[s] * 5.0;
            q.push(&inst.xs[s], inst.actions[s], v);
            anchors.push((inst.xs[s].clone(), inst.actions[s], v));
            // an anchor is never exceeded at its own location
            prop_assert!(q.query(&inst.xs[s], inst.actions[s]) <= v);
        }
        let want = cone_min(&inst.metric, l, &anchors, &inst.query, inst.query_action);
        let got = q.query(&inst.query, inst.query_action);
        prop_assert!(got == want || rel_close(got, want, 1e-12));
    }

    #[test]
    fn refinement_never_raises_values(
        anchors in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..10.0), 1..30),
        probes in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..20),
        l in 0.0f64..5.0,
    ) {
        let mut v = LipschitzV::new(2, l, 10.0, StateMetric::Euclidean);
        let mut prev: Vec<f64> = probes.iter().map(|p| v.query(&[p.0, p.1])).collect();
        for (x, y, val) in anchors {
            refine_value(&mut v, &[x, y], val);
            let now: Vec<f64> = probes.iter().map(|p| v.query(&[p.0, p.1])).collect();
            for (a, b) in prev.iter().zip(&now) {
                prop_assert!(b <= a);
            }
            prop_assert!(v.query(&[x, y]) <= val.min(10.0));
            prev = now;
        }
    }

    #[test]
    fn practical_bonus_matches_formula_and_decays(
        beta in 0.001f64..2.0, extra in 0.0f64..1e4, more in 0.0f64..100.0,
        horizon in 1usize..50, sigma_term in 0.0f64..1.0, discrete in any::<bool>(),
    ) {
        let h = 1 + (extra as usize) % horizon;
        let c = beta + extra;
        let b = practical_bonus(c, h, horizon, beta, sigma_term, variant(discrete)).unwrap();
        prop_assert!(rel_close(b, common::practical_bonus(c, h, horizon, beta, sigma_term, discrete), 1e-12));
        let later = practical_bonus(c + more, h, horizon, beta, sigma_term, variant(discrete)).unwrap();
        prop_assert!(later <= b);
        prop_assert!(b >= sigma_term);
    }

    #[test]
    fn cells_round_half_up(x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let map = DiscretizationMap::new(0.1, 2).unwrap();
        let ix = (x / 0.1 + 0.5).floor() as usize;
        let iy = (y / 0.1 + 0.5).floor() as usize;
        prop_assert_eq!(map.cell(&[x, y]).unwrap(), ix + 11 * iy);
        let c = map.center(ix + 11 * iy);
        prop_assert!((c[0] - x).abs() <= 0.05 + 1e-12 && (c[1] - y).abs() <= 0.05 + 1e-12);
    }

    #[test]
    fn bandwidth_is_piecewise_constant(k in 1usize..10_000) {
        let s = BandwidthSchedule::Discrete { scale: 0.1, period: 25.0, refresh: 500, sigma_min: 1e-3 };
        let kr = refresh_point(&s, k);
        prop_assert!(kr <= k && kr >= 1 && (kr == 1 || kr.is_multiple_of(500)) && k - kr < 500);
        prop_assert_eq!(kucbvi::bandwidth_schedule(&s, k), bandwidth_at(&s, kr as f64));
    }
}

#[test]
fn lipschitz_constants_match_direct_sum() {
    for &(lr, lp, horizon) in &[(1.0, 1.0, 20), (0.5, 2.0, 7), (2.0, 0.3, 12), (1.0, 0.0, 4)] {
        let l = lipschitz_constants(lr, lp, horizon).unwrap();
        for h in 1..=horizon {
            let mut want = 0.0;
            for hp in h..=horizon {
                want += lr * f64::powi(lp, (horizon - hp) as i32);
            }
            assert!(rel_close(l.get(h), want, 1e-12), "h = {h}: {} vs {want}", l.get(h));
        }
    }
    assert_eq!(lipschitz_constants(1.0, 1.0, 20).unwrap().get(1), 20.0);
}

/// `C1 = sup_z g(z) e^{z^2/2}` and `C2 = sup_z |g'(z)|`, by dense grid search.
#[test]
fn kernel_constants_match_grid_search() {
    for kernel in [
        MotherKernel::Gaussian,
        MotherKernel::ExpPower { p: 2.0 },
        MotherKernel::ExpPower { p: 3.0 },
        MotherKernel::ExpPower { p: 4.5 },
    ] {
        let (mut c1, mut c2) = (0.0f64, 0.0f64);
        let n = 400_000;
        for i in 0..=n {
            let z = 6.0 * i as f64 / n as f64;
            c1 = c1.max(profile(&kernel, z) * (0.5 * z * z).exp());
            let dz = 1e-6;
            let slope = (profile(&kernel, z + dz) - profile(&kernel, (z - dz).max(0.0))) / (z + dz - (z - dz).max(0.0));
            c2 = c2.max(slope.abs());
        }
        assert!(
            rel_close(kernel.c1(), c1, 1e-6),
            "{kernel:?}: c1 {} vs {c1}",
            kernel.c1()
        );
        assert!(
            rel_close(kernel.c2(), c2, 1e-6),
            "{kernel:?}: c2 {} vs {c2}",
            kernel.c2()
        );
    }
    assert_eq!(MotherKernel::Gaussian.c1(), 1.0);
    assert_eq!(MotherKernel::Gaussian.c2(), (-0.5f64).exp());
}

#[test]
fn ucbvi_bonus_example() {
    // N = 1, beta = 0.01, H = 20, h = 1: 1/sqrt(1.01) + 20/1.01 + 0.02/1.01
    let want = 1.0 / 1.01f64.sqrt() + 20.0 / 1.01 + 0.02 / 1.01;
    assert!(rel_close(ucbvi_bonus(1, 1, 20, 0.01).unwrap(), want, 1e-12));
}
