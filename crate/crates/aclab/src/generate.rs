//! Random MDP generator.

use aclab_core::{Result, TabularMdp, Table};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenOptions {
    pub n_states: usize,
    pub n_actions: usize,
    pub seed: u64,
    /// Fraction of successor states removed from each row, in `[0, 1]`.
    pub sparsity: f64,
    pub discount: f64,
}

impl GenOptions {
    pub fn new(n_states: usize, n_actions: usize, seed: u64) -> Self {
        Self {
            n_states,
            n_actions,
            seed,
            sparsity: 0.0,
            discount: 0.9,
        }
    }
}

/// Transition rows from a symmetric Dirichlet(1) (normalized unit exponentials),
/// optionally restricted to `ceil((1 - sparsity) S)` random successors;
/// rewards uniform in `[0, 1]`; uniform initial distribution.
pub fn gen_mdp(opts: &GenOptions) -> Result<TabularMdp> {
    let GenOptions {
        n_states: ns,
        n_actions: na,
        seed,
        sparsity,
        discount,
    } = *opts;
    if ns == 0 || na == 0 {
        return Err(aclab_core::Error::InvalidParameter(format!("sizes must be >= 1, got {ns}x{na}")));
    }
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(aclab_core::Error::InvalidParameter(format!("sparsity must lie in [0, 1], got {sparsity}")));
    }
    let keep = (((1.0 - sparsity) * ns as f64).ceil() as usize).clamp(1, ns);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat = Vec::with_capacity(ns * na * ns);
    for _ in 0..ns * na {
        let mut row = vec![0.0; ns];
        if keep == ns {
            for p in row.iter_mut() {
                *p = rng.sample::<f64, _>(Exp1);
            }
        } else {
            for j in sample(&mut rng, ns, keep).iter() {
                row[j] = rng.sample::<f64, _>(Exp1);
            }
        }
        let z: f64 = row.iter().sum();
        flat.extend(row.into_iter().map(|p| p / z));
    }
    let reward = Table::from_fn(ns, na, |_, _| rng.random::<f64>());
    let mu = aclab_core::StateVec::from_element(ns, 1.0 / ns as f64);
    TabularMdp::from_parts(ns, na, discount, flat, reward, mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one() {
        let m = gen_mdp(&GenOptions::new(1, 1, 0)).unwrap();
        assert_eq!(m.next_state_probs(0, 0), &[1.0]);
        assert_eq!(m.initial_dist()[0], 1.0);
    }

    #[test]
    fn rows_are_distributions() {
        let m = gen_mdp(&GenOptions::new(50, 5, 7)).unwrap();
        for s in 0..50 {
            for a in 0..5 {
                let row = m.next_state_probs(s, a);
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&p| p >= 0.0));
            }
        }
        assert!(m.reward().iter().all(|&r| (0.0..=1.0).contains(&r)));
    }

    #[test]
    fn sparsity_limits_successors() {
        let mut o = GenOptions::new(10, 2, 3);
        o.sparsity = 0.75;
        let m = gen_mdp(&o).unwrap();
        for s in 0..10 {
            for a in 0..2 {
                assert_eq!(m.next_state_probs(s, a).iter().filter(|&&p| p > 0.0).count(), 3);
            }
        }
    }

    #[test]
    fn invalid_options() {
        assert!(gen_mdp(&GenOptions::new(0, 2, 1)).is_err());
        let mut o = GenOptions::new(2, 2, 1);
        o.sparsity = 1.5;
        assert!(gen_mdp(&o).is_err());
    }
}
