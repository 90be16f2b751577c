//! Exact (linear-algebra) quantities of a finite discounted MDP under a fixed
//! stochastic policy: kernels, values, Q-values, advantages, occupation
//! measures, returns, policy gradients, the optimal return and the constants
//! used by the convergence analysis.
//!
//! Every system is solved by dense LU factorization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{dim, Error, Result};
use crate::mdp::TabularMdp;
use crate::policy::SoftmaxPolicy;
use crate::{StateVec, Table};

/// Anything that exposes an `S x A` table of action probabilities.
///
/// Implemented for [`SoftmaxPolicy`] and for raw probability tables, so that
/// deterministic (one-hot) policies can be evaluated with the same routines.
pub trait ActionProbs {
    fn action_probs(&self) -> &Table;
}

impl ActionProbs for SoftmaxPolicy {
    fn action_probs(&self) -> &Table {
        self.probs()
    }
}

impl ActionProbs for Table {
    fn action_probs(&self) -> &Table {
        self
    }
}

/// One-hot probability table selecting `actions[s]` in every state.
pub fn deterministic_probs(n_actions: usize, actions: &[usize]) -> Table {
    let mut t = Table::zeros(actions.len(), n_actions);
    for (s, &a) in actions.iter().enumerate() {
        t[(s, a)] = 1.0;
    }
    t
}

fn check_shape(mdp: &TabularMdp, probs: &Table) -> Result<()> {
    let want = (mdp.n_states(), mdp.n_actions());
    if probs.shape() != want {
        return Err(dim(
            "policy table",
            format!("{}x{}", want.0, want.1),
            format!("{}x{}", probs.nrows(), probs.ncols()),
        ));
    }
    Ok(())
}

/// State-to-state kernel `P^pi(s'|s) = sum_a pi(a|s) P(s'|s,a)`.
pub fn policy_state_kernel(mdp: &TabularMdp, pol: &impl ActionProbs) -> Result<DMatrix<f64>> {
    let probs = pol.action_probs();
    check_shape(mdp, probs)?;
    let n = mdp.n_states();
    let mut k = DMatrix::zeros(n, n);
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            let w = probs[(s, a)];
            if w == 0.0 {
                continue;
            }
            for (sp, p) in mdp.next_state_probs(s, a).iter().enumerate() {
                k[(s, sp)] += w * p;
            }
        }
    }
    Ok(k)
}

/// State-action kernel `P_pi((s,a) -> (s',a')) = P(s'|s,a) pi(a'|s')`, indexed
/// by `s * A + a`.
pub fn state_action_kernel(mdp: &TabularMdp, pol: &impl ActionProbs) -> Result<DMatrix<f64>> {
    let probs = pol.action_probs();
    check_shape(mdp, probs)?;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let n = ns * na;
    let mut k = DMatrix::zeros(n, n);
    for s in 0..ns {
        for a in 0..na {
            let row = s * na + a;
            for (sp, p) in mdp.next_state_probs(s, a).iter().enumerate() {
                for ap in 0..na {
                    k[(row, sp * na + ap)] = p * probs[(sp, ap)];
                }
            }
        }
    }
    Ok(k)
}

/// `R^pi(s) = sum_a pi(a|s) R(s,a)`.
pub fn policy_reward(mdp: &TabularMdp, pol: &impl ActionProbs) -> Result<StateVec> {
    let probs = pol.action_probs();
    check_shape(mdp, probs)?;
    Ok(DVector::from_iterator(
        mdp.n_states(),
        (0..mdp.n_states()).map(|s| probs.row(s).dot(&mdp.reward().row(s))),
    ))
}

fn resolvent(mdp: &TabularMdp, kernel: &DMatrix<f64>) -> DMatrix<f64> {
    let n = mdp.n_states();
    DMatrix::identity(n, n) - kernel * mdp.discount()
}

fn solve(system: DMatrix<f64>, rhs: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let x = system
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::Numerical(format!("singular system while computing {what}")))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite solution while computing {what}")));
    }
    Ok(x)
}

/// `v^pi = (I - gamma P^pi)^{-1} R^pi`.
pub fn exact_value(mdp: &TabularMdp, pol: &impl ActionProbs) -> Result<StateVec> {
    let kernel = policy_state_kernel(mdp, pol)?;
    solve(resolvent(mdp, &kernel), &policy_reward(mdp, pol)?, "value")
}

/// `Q(s,a) = R(s,a) + gamma sum_s' P(s'|s,a) v(s')` for a given value vector.
pub fn q_from_value(mdp: &TabularMdp, value: &StateVec) -> Table {
    let g = mdp.discount();
    Table::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        let next: f64 = mdp
            .next_state_probs(s, a)
            .iter()
            .zip(value.iter())
            .map(|(p, v)| p * v)
            .sum();
        mdp.reward()[(s, a)] + g * next
    })
}

pub fn exact_q(mdp: &TabularMdp, pol: &impl ActionProbs) -> Result<Table> {
    Ok(q_from_value(mdp, &exact_value(mdp, pol)?))
}

/// `A(s,a) = Q(s,a) - sum_b pi(b|s) Q(s,b)`.
pub fn advantage_of(qvalue: &Table, pol: &impl ActionProbs) -> Result<Table> {
    let probs = pol.action_probs();
    if probs.shape() != qvalue.shape() {
        return Err(dim("Q table", format!("{:?}", probs.shape()), format!("{:?}", qvalue.shape())));
    }
    let mut adv = qvalue.clone();
    for s in 0..qvalue.nrows() {
        let v = probs.row(s).dot(&qvalue.row(s));
        adv.row_mut(s).add_scalar_mut(-v);
    }
    Ok(adv)
}

/// Normalized discounted occupation `d^pi = (1-gamma) mu^T (I - gamma P^pi)^{-1}`.
pub fn occupation_measure(mdp: &TabularMdp, pol: &impl ActionProbs) -> Result<StateVec> {
    let kernel = policy_state_kernel(mdp, pol)?;
    occupation_from_kernel(mdp, &kernel, mdp.initial_dist())
}

fn occupation_from_kernel(mdp: &TabularMdp, kernel: &DMatrix<f64>, start: &StateVec) -> Result<StateVec> {
    let rhs = start * (1.0 - mdp.discount());
    solve(resolvent(mdp, kernel).transpose(), &rhs, "occupation measure")
}

/// Occupation measures started from each point mass: row `s'` of the result is
/// `d_{s'}(.) = (1-gamma) e_{s'}^T (I - gamma P^pi)^{-1}`.
pub fn pointwise_occupation(mdp: &TabularMdp, pol: &impl ActionProbs) -> Result<DMatrix<f64>> {
    let kernel = policy_state_kernel(mdp, pol)?;
    let inv = resolvent(mdp, &kernel)
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular resolvent while computing pointwise occupation".into()))?;
    Ok(inv * (1.0 - mdp.discount()))
}

/// `J^pi = mu . v^pi`.
pub fn return_of(mdp: &TabularMdp, pol: &impl ActionProbs) -> Result<f64> {
    Ok(mdp.initial_dist().dot(&exact_value(mdp, pol)?))
}

/// `dJ/dtheta(s,a) = (1-gamma)^{-1} d^pi(s) pi(a|s) A^pi(s,a)`.
pub fn exact_gradient(mdp: &TabularMdp, pol: &impl ActionProbs) -> Result<Table> {
    Ok(snapshot(mdp, pol)?.grad)
}

/// Every exact per-policy quantity, computed from one kernel.
#[derive(Debug, Clone)]
pub struct PolicySnapshot {
    pub value: StateVec,
    pub qvalue: Table,
    pub advantage: Table,
    pub occupation: StateVec,
    pub ret: f64,
    pub grad: Table,
}

pub fn snapshot(mdp: &TabularMdp, pol: &impl ActionProbs) -> Result<PolicySnapshot> {
    let probs = pol.action_probs();
    let kernel = policy_state_kernel(mdp, pol)?;
    let value = solve(resolvent(mdp, &kernel), &policy_reward(mdp, pol)?, "value")?;
    let occupation = occupation_from_kernel(mdp, &kernel, mdp.initial_dist())?;
    let qvalue = q_from_value(mdp, &value);
    let advantage = advantage_of(&qvalue, pol)?;
    let scale = 1.0 / (1.0 - mdp.discount());
    let grad = Table::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        scale * occupation[s] * probs[(s, a)] * advantage[(s, a)]
    });
    let ret = mdp.initial_dist().dot(&value);
    Ok(PolicySnapshot {
        value,
        qvalue,
        advantage,
        occupation,
        ret,
        grad,
    })
}

/// Result of solving the Bellman optimality equation.
#[derive(Debug, Clone)]
pub struct OptimalSolution {
    pub j_star: f64,
    pub value: StateVec,
    /// Greedy optimal action per state, ties broken towards the lowest index.
    pub actions: Vec<usize>,
    pub vi_iterations: usize,
}

/// Value iteration to a guaranteed optimality gap `tol`, followed by exact
/// policy-iteration polishing of the greedy policy.
///
/// Stops once `||v_{t+1} - v_t||_inf <= tol (1-gamma) / (2 gamma)`, which
/// bounds `||v_{t+1} - v*||_inf` by `tol / 2`; the greedy policy is then
/// evaluated exactly and improved until stable, so `j_star` is the return of
/// a deterministic optimal policy.
pub fn optimal_return(mdp: &TabularMdp, tol: f64) -> Result<OptimalSolution> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let g = mdp.discount();
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let threshold = if g > 0.0 { tol * (1.0 - g) / (2.0 * g) } else { f64::INFINITY };
    let cap = if g > 0.0 {
        ((2.0 / (tol * (1.0 - g).powi(2))).ln() / (1.0 / g).ln()).ceil().max(0.0) as usize + 100
    } else {
        1
    };

    let mut v = StateVec::zeros(ns);
    let mut iterations = 0;
    let mut last_delta = f64::INFINITY;
    while iterations < cap {
        let q = q_from_value(mdp, &v);
        let next = StateVec::from_iterator(ns, (0..ns).map(|s| q.row(s).max()));
        last_delta = (&next - &v).amax();
        v = next;
        iterations += 1;
        if last_delta <= threshold {
            break;
        }
    }
    if last_delta > threshold {
        return Err(Error::Convergence {
            iterations,
            last_delta,
        });
    }

    let mut actions = greedy_actions(&q_from_value(mdp, &v));
    for _ in 0..(ns * na + 10) {
        let value = exact_value(mdp, &deterministic_probs(na, &actions))?;
        let q = q_from_value(mdp, &value);
        let mut changed = false;
        for s in 0..ns {
            let best = argmax_lowest(q.row(s).iter().copied());
            let cur = q[(s, actions[s])];
            if q[(s, best)] > cur + 1e-12 * (1.0 + cur.abs()) {
                actions[s] = best;
                changed = true;
            }
        }
        if !changed {
            let value = exact_value(mdp, &deterministic_probs(na, &actions))?;
            return Ok(OptimalSolution {
                j_star: mdp.initial_dist().dot(&value),
                value,
                actions,
                vi_iterations: iterations,
            });
        }
    }
    Err(Error::Numerical("policy-iteration polishing did not stabilise".into()))
}

fn argmax_lowest(it: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in it.enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best.0
}

fn greedy_actions(q: &Table) -> Vec<usize> {
    (0..q.nrows()).map(|s| argmax_lowest(q.row(s).iter().copied())).collect()
}

/// Constants of the gradient-domination inequality for one policy.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GdlConstants {
    /// `C_PL = max_s d^{pi*}(s) / d^pi(s)`.
    pub mismatch: f64,
    /// `c = min_s pi(a*(s)|s)`.
    pub min_opt_prob: f64,
    /// `c / (sqrt(S) C_PL)`.
    pub gdl_factor: f64,
}

impl GdlConstants {
    /// `c_g = sqrt(S) C_PL / c`, the reciprocal of [`Self::gdl_factor`].
    pub fn c_g(&self) -> f64 {
        1.0 / self.gdl_factor
    }
}

pub fn gdl_constants(
    mdp: &TabularMdp,
    pol: &impl ActionProbs,
    opt_actions: &[usize],
    d_opt: &StateVec,
) -> Result<GdlConstants> {
    let probs = pol.action_probs();
    check_shape(mdp, probs)?;
    if opt_actions.len() != mdp.n_states() {
        return Err(dim("optimal actions", mdp.n_states(), opt_actions.len()));
    }
    if d_opt.len() != mdp.n_states() {
        return Err(dim("optimal occupation", mdp.n_states(), d_opt.len()));
    }
    let d = occupation_measure(mdp, pol)?;
    let mut mismatch: f64 = 0.0;
    for s in 0..mdp.n_states() {
        if d[s] <= 0.0 {
            return Err(Error::DegenerateOccupation { state: s });
        }
        mismatch = mismatch.max(d_opt[s] / d[s]);
    }
    let min_opt_prob = opt_actions
        .iter()
        .enumerate()
        .map(|(s, &a)| probs[(s, a)])
        .fold(f64::INFINITY, f64::min);
    Ok(GdlConstants {
        mismatch,
        min_opt_prob,
        gdl_factor: min_opt_prob / ((mdp.n_states() as f64).sqrt() * mismatch),
    })
}

/// Convenience: GDL constants against the optimal policy of `opt`.
///
/// Rejects initial distributions with a zero entry, which would make the
/// mismatch coefficient meaningless.
pub fn gdl_constants_for(mdp: &TabularMdp, pol: &impl ActionProbs, opt: &OptimalSolution) -> Result<GdlConstants> {
    let (s, m) = mdp.min_initial_mass();
    if m <= 0.0 {
        return Err(Error::DegenerateOccupation { state: s });
    }
    let d_opt = occupation_measure(mdp, &deterministic_probs(mdp.n_actions(), &opt.actions))?;
    gdl_constants(mdp, pol, &opt.actions, &d_opt)
}

/// `M = D^pi (I - gamma P_pi)` on the `S*A` state-action space, where
/// `D^pi = diag(d^pi(s) pi(a|s))`.
pub fn exploration_operator(mdp: &TabularMdp, pol: &impl ActionProbs) -> Result<DMatrix<f64>> {
    let probs = pol.action_probs();
    let d = occupation_measure(mdp, pol)?;
    let kernel = state_action_kernel(mdp, pol)?;
    let n = kernel.nrows();
    let na = mdp.n_actions();
    let mut m = DMatrix::identity(n, n) - kernel * mdp.discount();
    for i in 0..n {
        let w = d[i / na] * probs[(i / na, i % na)];
        m.row_mut(i).scale_mut(w);
    }
    Ok(m)
}

/// Diagonal of `D^pi` as a table.
pub fn state_action_weights(mdp: &TabularMdp, pol: &impl ActionProbs) -> Result<Table> {
    let probs = pol.action_probs();
    let d = occupation_measure(mdp, pol)?;
    Ok(Table::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| d[s] * probs[(s, a)]))
}

/// Largest `lambda` with `<x, M x> >= lambda ||x||^2` for all `x`: the
/// smallest eigenvalue of `(M + M^T) / 2`. May be non-positive.
pub fn exploration_lambda(mdp: &TabularMdp, pol: &impl ActionProbs) -> Result<f64> {
    let m = exploration_operator(mdp, pol)?;
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lambda = eig.eigenvalues.min();
    if !lambda.is_finite() {
        return Err(Error::Numerical("symmetric eigensolve produced a non-finite eigenvalue".into()));
    }
    Ok(lambda)
}

/// Flattens an `S x A` table into the `s * A + a` ordering used by the
/// state-action operators.
pub fn flatten(t: &Table) -> DVector<f64> {
    DVector::from_iterator(t.len(), (0..t.nrows()).flat_map(|s| (0..t.ncols()).map(move |a| t[(s, a)])))
}

pub fn unflatten(v: &DVector<f64>, n_states: usize, n_actions: usize) -> Table {
    Table::from_fn(n_states, n_actions, |s, a| v[s * n_actions + a])
}
