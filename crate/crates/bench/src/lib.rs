//! Fixtures shared by the benchmarks.

use kucbvi::envs::DiscreteGridWorldEnv;
use kucbvi::estimator::{FiniteStateModel, StateGram};
use kucbvi::{ContinuousGridWorldEnv, MotherKernel, ProductMetric, StepDataset, TransitionSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` transitions of a uniformly random policy on the continuous grid,
/// pooled over steps.
pub fn continuous_dataset(n: usize, seed: u64) -> StepDataset {
    let env = ContinuousGridWorldEnv {
        step_size: 0.1,
        transition_noise_std: 0.01,
        reward_noise_std: 0.01,
        start: [0.1, 0.1],
        goal: [0.8, 0.8],
        reward_width: 0.1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = StepDataset::stationary(2);
    let mut x = env.start.to_vec();
    for i in 0..n {
        let a = rng.random_range(0..4);
        let (x_next, r) = env.step(&x, a, &mut rng).expect("valid state");
        d.append(TransitionSample {
            x,
            a,
            x_next: x_next.clone(),
            r,
            h: 1 + i % 20,
            k: 1 + i / 20,
        })
        .expect("matching dimension");
        x = if i % 20 == 19 { env.start.to_vec() } else { x_next };
    }
    d
}

/// The 8x8 grid with `visits` random transitions recorded, and its kernel Gram matrix.
pub fn grid_model(visits: usize, sigma: f64, seed: u64) -> (FiniteStateModel, StateGram) {
    let env = DiscreteGridWorldEnv::new(8, 0.1, 0.1, [1.0, 1.0], 0.1, [0.0, 0.0]).expect("valid grid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = FiniteStateModel::new(env.n_states(), env.n_actions());
    for _ in 0..visits {
        let (s, a) = (rng.random_range(0..env.n_states()), rng.random_range(0..4));
        let (next, r) = env.step(s, a, &mut rng).expect("valid state");
        model.record(s, a, next, r);
    }
    let gram = StateGram::kernel(
        &MotherKernel::Gaussian,
        &ProductMetric::discrete_actions(),
        env.states(),
        sigma,
    );
    (model, gram)
}
