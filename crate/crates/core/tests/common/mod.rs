#![allow(dead_code)]

use aclab_core::{Table, TabularMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> TabularMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transition = (0..n_states)
        .map(|_| {
            (0..n_actions)
                .map(|_| {
                    let w: Vec<f64> = (0..n_states).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                    let z: f64 = w.iter().sum();
                    w.into_iter().map(|x| x / z).collect()
                })
                .collect()
        })
        .collect();
    let reward = (0..n_states)
        .map(|_| (0..n_actions).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect();
    TabularMdp::new(transition, reward, gamma, vec![1.0 / n_states as f64; n_states]).unwrap()
}

pub fn random_theta(n_states: usize, n_actions: usize, scale: f64, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Table::from_fn(n_states, n_actions, |_, _| scale * (rng.random::<f64>() * 2.0 - 1.0))
}
