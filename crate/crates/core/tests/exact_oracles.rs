mod common;

use aclab_core::diagnostics::{check_gdl, check_gradq_bound, q_jacobian};
use aclab_core::exact::{
    advantage_of, deterministic_probs, exact_gradient, exact_q, exact_value, occupation_measure, optimal_return,
    return_of, snapshot,
};
use aclab_core::{SoftmaxPolicy, Table};
use common::{random_mdp, random_theta};

fn fd_gradient(mdp: &aclab_core::TabularMdp, theta: &Table, h: f64) -> Table {
    let mut g = Table::zeros(theta.nrows(), theta.ncols());
    for s in 0..theta.nrows() {
        for a in 0..theta.ncols() {
            let mut plus = theta.clone();
            plus[(s, a)] += h;
            let mut minus = theta.clone();
            minus[(s, a)] -= h;
            let jp = return_of(mdp, &SoftmaxPolicy::new(plus).unwrap()).unwrap();
            let jm = return_of(mdp, &SoftmaxPolicy::new(minus).unwrap()).unwrap();
            g[(s, a)] = (jp - jm) / (2.0 * h);
        }
    }
    g
}

#[test]
fn gradient_matches_central_differences() {
    for seed in 0..10 {
        let (ns, na) = (2 + seed as usize % 4, 2 + seed as usize % 2);
        let mdp = random_mdp(ns, na, 0.8, seed);
        let theta = random_theta(ns, na, 1.5, 100 + seed);
        let g = exact_gradient(&mdp, &SoftmaxPolicy::new(theta.clone()).unwrap()).unwrap();
        let fd = fd_gradient(&mdp, &theta, 1e-5);
        let rel = (&g - &fd).amax() / g.amax();
        assert!(rel < 1e-6, "seed {seed}: {rel}");
    }
}

#[test]
fn gradient_rows_sum_to_zero() {
    let mdp = random_mdp(4, 3, 0.9, 3);
    let g = exact_gradient(&mdp, &SoftmaxPolicy::new(random_theta(4, 3, 2.0, 4)).unwrap()).unwrap();
    for s in 0..4 {
        assert!(g.row(s).sum().abs() < 1e-12);
    }
}

#[test]
fn bellman_consistency_and_centred_advantage() {
    let mdp = random_mdp(5, 3, 0.95, 8);
    let pol = SoftmaxPolicy::new(random_theta(5, 3, 1.0, 9)).unwrap();
    let v = exact_value(&mdp, &pol).unwrap();
    let q = exact_q(&mdp, &pol).unwrap();
    for s in 0..5 {
        let vq: f64 = (0..3).map(|a| pol.prob(s, a) * q[(s, a)]).sum();
        assert!((vq - v[s]).abs() < 1e-12);
    }
    let adv = advantage_of(&q, &pol).unwrap();
    for s in 0..5 {
        let m: f64 = (0..3).map(|a| pol.prob(s, a) * adv[(s, a)]).sum();
        assert!(m.abs() < 1e-12);
    }
    let d = occupation_measure(&mdp, &pol).unwrap();
    assert!((d.sum() - 1.0).abs() < 1e-12);
    assert!(d.iter().all(|&x| x > 0.0));
}

#[test]
fn optimal_return_beats_every_deterministic_policy() {
    for seed in 0..6 {
        let (ns, na) = (3, 2 + seed as usize % 2);
        let mdp = random_mdp(ns, na, 0.9, 40 + seed);
        let opt = optimal_return(&mdp, 1e-10).unwrap();
        let mut best = f64::NEG_INFINITY;
        let total = na.pow(ns as u32);
        for code in 0..total {
            let actions: Vec<usize> = (0..ns).map(|s| code / na.pow(s as u32) % na).collect();
            best = best.max(return_of(&mdp, &deterministic_probs(na, &actions)).unwrap());
        }
        assert!((opt.j_star - best).abs() < 1e-10, "seed {seed}: {} vs {best}", opt.j_star);
    }
}

#[test]
fn gdl_holds_on_random_pairs() {
    for seed in 0..25 {
        let mdp = random_mdp(3 + seed as usize % 4, 2 + seed as usize % 3, 0.9, 200 + seed);
        let opt = optimal_return(&mdp, 1e-10).unwrap();
        let theta = random_theta(mdp.n_states(), mdp.n_actions(), 3.0, 300 + seed);
        let rep = check_gdl(&mdp, &SoftmaxPolicy::new(theta).unwrap(), &opt).unwrap();
        assert!(rep.passed(), "seed {seed}: {rep:?}");
    }
}

#[test]
fn q_jacobian_matches_finite_differences() {
    let mdp = random_mdp(4, 3, 0.9, 12);
    let theta = random_theta(4, 3, 1.0, 13);
    let jac = q_jacobian(&mdp, &SoftmaxPolicy::new(theta.clone()).unwrap()).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for s2 in 0..4 {
        for a2 in 0..3 {
            let mut plus = theta.clone();
            plus[(s2, a2)] += h;
            let mut minus = theta.clone();
            minus[(s2, a2)] -= h;
            let dq = (exact_q(&mdp, &SoftmaxPolicy::new(plus).unwrap()).unwrap()
                - exact_q(&mdp, &SoftmaxPolicy::new(minus).unwrap()).unwrap())
                / (2.0 * h);
            for s in 0..4 {
                for a in 0..3 {
                    worst = worst.max((dq[(s, a)] - jac[(s * 3 + a, s2 * 3 + a2)]).abs());
                }
            }
        }
    }
    assert!(worst < 1e-7 * jac.amax(), "{worst}");
}

#[test]
fn gradq_bound_on_random_triples() {
    for seed in 0..10 {
        let mdp = random_mdp(2 + seed as usize % 4, 2 + seed as usize % 2, 0.9, 500 + seed);
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let pol = SoftmaxPolicy::new(random_theta(ns, na, 2.0, 600 + seed)).unwrap();
        let q = random_theta(ns, na, 10.0, 700 + seed);
        assert!(check_gradq_bound(&mdp, &pol, &q).unwrap().passed());
    }
}

#[test]
fn snapshot_return_is_weighted_value() {
    let mdp = random_mdp(4, 2, 0.7, 21);
    let pol = SoftmaxPolicy::new(random_theta(4, 2, 1.0, 22)).unwrap();
    let snap = snapshot(&mdp, &pol).unwrap();
    assert!((snap.ret - mdp.initial_dist().dot(&snap.value)).abs() < 1e-12);
}
