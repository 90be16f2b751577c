mod common;

use aclab_core::diagnostics::check_cgamma;
use aclab_core::exact::{exploration_lambda, exact_q, return_of};
use aclab_core::sampling::RngStream;
use aclab_core::SoftmaxPolicy;
use common::{random_mdp, random_theta};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn return_is_shift_invariant(seed in 0u64..1000, shift in -20.0f64..20.0) {
        let mdp = random_mdp(3, 3, 0.9, seed);
        let theta = random_theta(3, 3, 2.0, seed + 1);
        let shifted = theta.add_scalar(shift);
        let j1 = return_of(&mdp, &SoftmaxPolicy::new(theta).unwrap()).unwrap();
        let j2 = return_of(&mdp, &SoftmaxPolicy::new(shifted).unwrap()).unwrap();
        prop_assert!((j1 - j2).abs() < 1e-12);
    }

    #[test]
    fn q_values_are_bounded(seed in 0u64..1000, gamma in 0.0f64..0.99) {
        let mdp = random_mdp(4, 2, gamma, seed);
        let q = exact_q(&mdp, &SoftmaxPolicy::new(random_theta(4, 2, 3.0, seed)).unwrap()).unwrap();
        prop_assert!(q.amax() <= 1.0 / (1.0 - gamma) + 1e-9);
    }

    #[test]
    fn cgamma_never_exceeded(seed in 0u64..1000, gamma in 0.0f64..0.99) {
        let mdp = random_mdp(3, 2, gamma, seed);
        let pol = SoftmaxPolicy::new(random_theta(3, 2, 2.0, seed)).unwrap();
        let mut rng = RngStream::new(seed);
        prop_assert!(check_cgamma(&mdp, &pol, 20, &mut rng).unwrap().passed());
    }

    #[test]
    fn softmax_policies_explore(seed in 0u64..1000) {
        let mdp = random_mdp(3, 2, 0.9, seed);
        let pol = SoftmaxPolicy::new(random_theta(3, 2, 1.0, seed)).unwrap();
        prop_assert!(exploration_lambda(&mdp, &pol).unwrap() > 0.0);
    }
}
