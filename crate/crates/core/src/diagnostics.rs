//! Analysis quantities and numerical inequality checks.
//!
//! [`trace_point`] evaluates sub-optimality, critic error, gradient norm and
//! the Lyapunov term for one iterate. The `check_*` functions evaluate both
//! sides of the inequalities used by the convergence argument and return an
//! [`InequalityReport`] with per-point slack.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::actor_critic::{std_err, FixedPolicyOperator, RunTrace};
use crate::error::{Error, Result};
use crate::exact::{
    exact_q, exploration_operator, flatten, gdl_constants_for, optimal_return, pointwise_occupation, snapshot,
    state_action_weights, ActionProbs, GdlConstants, OptimalSolution,
};
use crate::mdp::TabularMdp;
use crate::policy::SoftmaxPolicy;
use crate::sampling::RngStream;
use crate::Table;

/// Diagnostics of one iterate `(theta_k, Q_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// `a_k = J* - J^{pi_k}`, clamped at zero.
    pub subopt: f64,
    /// Unclamped `J* - J^{pi_k}`; may be slightly negative from round-off.
    pub subopt_raw: f64,
    /// `||Q_k - Q^{pi_k}||_2`.
    pub critic_err: f64,
    /// `||grad J^{pi_k}||_2`.
    pub grad_norm: f64,
    /// `x_k = a_k + critic_err^2`.
    pub lyapunov: f64,
}

pub fn trace_point(mdp: &TabularMdp, pol: &impl ActionProbs, critic_q: &Table, j_star: f64) -> Result<TracePoint> {
    let snap = snapshot(mdp, pol)?;
    let subopt_raw = j_star - snap.ret;
    let subopt = subopt_raw.max(0.0);
    let critic_err = (critic_q - &snap.qvalue).norm();
    Ok(TracePoint {
        subopt,
        subopt_raw,
        critic_err,
        grad_norm: snap.grad.norm(),
        lyapunov: subopt + critic_err * critic_err,
    })
}

/// One evaluated inequality `lhs <= rhs` (plus any statistical margin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityPoint {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// `rhs + margin - lhs`; negative means violated.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub n_points: usize,
    pub violations: usize,
    pub worst_slack: f64,
    pub margin_policy: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip)]
    pub points: Vec<InequalityPoint>,
}

impl InequalityReport {
    fn new(name: &str, margin_policy: &str) -> Self {
        Self {
            name: name.to_string(),
            n_points: 0,
            violations: 0,
            worst_slack: f64::INFINITY,
            margin_policy: margin_policy.to_string(),
            notes: Vec::new(),
            points: Vec::new(),
        }
    }

    fn push(&mut self, index: usize, lhs: f64, rhs: f64, margin: f64) {
        let slack = rhs + margin - lhs;
        self.n_points += 1;
        if !(slack >= 0.0) {
            self.violations += 1;
        }
        self.worst_slack = self.worst_slack.min(slack);
        self.points.push(InequalityPoint {
            index,
            lhs,
            rhs,
            margin,
            slack,
        });
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Constants of the convergence analysis for one MDP.
///
/// `c_l` depends on the iterate through `a_k`; it is exposed as
/// [`ConstantsLedger::c_l`] rather than as a stored number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub lambda: f64,
    /// Smoothness of the return, `8 / (1-gamma)^3`.
    pub smooth_l: f64,
    /// Lipschitz constant of the softmax map, 2.
    pub lip_pi: f64,
    pub c_q: f64,
    pub c_u: f64,
    pub c_z: f64,
    pub c_beta: f64,
    pub c_eta: f64,
    /// Numerical estimate of the Q-value smoothness constant `L_2^q`.
    pub l2q: f64,
    /// `2 lambda c_beta / c_z^2`, the iterate-independent branch of `c_l`.
    pub c_l_critic_branch: f64,
    /// GDL constants at the uniform policy, when `mu > 0`.
    pub gdl: Option<GdlConstants>,
}

impl ConstantsLedger {
    /// `(1-gamma)^{-1}` shorthand.
    fn h(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    /// `2 gamma sqrt(S) A / (1-gamma)^3`, the moving-target coefficient of the
    /// critic recursion.
    pub fn critic_coupling(&self) -> f64 {
        2.0 * self.gamma * (self.n_states as f64).sqrt() * self.n_actions as f64 * self.h().powi(3)
    }

    /// `c_l = 4 min{ a_k^2 / (c_g^2 (1-gamma)), 2 lambda c_beta / c_z^2 }`.
    ///
    /// The first branch varies with `a_k`, so the value is only meaningful per
    /// iterate.
    pub fn c_l(&self, a_k: f64, gdl: &GdlConstants) -> f64 {
        let actor = a_k * a_k / (gdl.c_g().powi(2) * (1.0 - self.gamma));
        4.0 * actor.min(self.c_l_critic_branch)
    }
}

pub fn constants_ledger(mdp: &TabularMdp, lambda: f64, l2q: f64) -> Result<ConstantsLedger> {
    if !(lambda > 0.0) {
        return Err(Error::AssumptionViolated(format!(
            "exploration constant lambda = {lambda} is not positive; c_beta is undefined"
        )));
    }
    if !(l2q >= 0.0 && l2q.is_finite()) {
        return Err(Error::InvalidParameter(format!("L2q must be finite and >= 0, got {l2q}")));
    }
    let g = mdp.discount();
    let h = 1.0 / (1.0 - g);
    let s = mdp.n_states() as f64;
    let a = mdp.n_actions() as f64;
    let smooth_l = 8.0 * h.powi(3);
    let lip_pi = 2.0;
    let c_q = 2.0 * s * a * smooth_l * lip_pi * h * h;
    let c_u = 1.0 + 2.0 * h;
    let c_z = 2.0 * s * a * h;
    let coupling = 2.0 * g * s.sqrt() * a * h.powi(3) + 2.0 * h;
    let c_beta = (1.0 - g) / (2.0 * lambda) * coupling * coupling;
    let c_eta = 2.0 * c_u * c_u * c_beta * c_beta + 4.0 * smooth_l * h.powi(4) + 2.0 * c_q * c_q + 2.0 * l2q * c_z * h.powi(4);
    let gdl = if mdp.min_initial_mass().1 > 0.0 {
        let opt = optimal_return(mdp, 1e-10)?;
        Some(gdl_constants_for(mdp, &SoftmaxPolicy::uniform(mdp.n_states(), mdp.n_actions()), &opt)?)
    } else {
        None
    };
    Ok(ConstantsLedger {
        n_states: mdp.n_states(),
        n_actions: mdp.n_actions(),
        gamma: g,
        lambda,
        smooth_l,
        lip_pi,
        c_q,
        c_u,
        c_z,
        c_beta,
        c_eta,
        l2q,
        c_l_critic_branch: 2.0 * lambda * c_beta / (c_z * c_z),
        gdl,
    })
}

/// Estimates `L_2^q` as the largest second-difference quotient
/// `||Q(theta + h d) - 2 Q(theta) + Q(theta - h d)|| / h^2` over random
/// parameter points `theta ~ N(0, I)` and unit directions `d`.
pub fn estimate_l2q(mdp: &TabularMdp, probes: usize, rng: &mut RngStream) -> Result<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let h = 1e-3;
    let mut best: f64 = 0.0;
    for probe in 0..probes {
        let theta = if probe == 0 {
            Table::zeros(ns, na)
        } else {
            Table::from_fn(ns, na, |_, _| rng.normal())
        };
        let mut dir = Table::from_fn(ns, na, |_, _| rng.normal());
        let n = dir.norm();
        if n == 0.0 {
            continue;
        }
        dir /= n;
        let q = |t: Table| -> Result<Table> { exact_q(mdp, &SoftmaxPolicy::new(t)?) };
        let plus = q(&theta + &dir * h)?;
        let mid = q(theta.clone())?;
        let minus = q(&theta - &dir * h)?;
        best = best.max((plus - mid * 2.0 + minus).norm() / (h * h));
    }
    Ok(best)
}

fn require_unit_spacing(run: &RunTrace) -> Result<()> {
    if run.config.n_seeds < 10 {
        return Err(Error::InsufficientSeeds {
            got: run.config.n_seeds,
            need: 10,
        });
    }
    if run.config.diag_every != 1 {
        return Err(Error::CheckpointSpacing(run.config.diag_every));
    }
    Ok(())
}

const SE_MARGIN: f64 = 3.0;

/// Actor recursion on seed-mean estimates:
/// `a_{k+1} <= a_k - eta/(1-g) y_k^2 + 2 eta/(1-g) y_k z_k + 4 L eta^2/(1-g)^4`,
/// allowing three standard errors of `a_{k+1}`.
pub fn check_actor_recursion(run: &RunTrace, ledger: &ConstantsLedger) -> Result<InequalityReport> {
    require_unit_spacing(run)?;
    let h = 1.0 / (1.0 - ledger.gamma);
    let mut rep = InequalityReport::new("actor_recursion", "seed-mean estimates; lhs may exceed rhs by 3 standard errors of a_{k+1}");
    for w in run.checkpoints.windows(2) {
        let (cur, next) = (&w[0], &w[1]);
        let eta = cur.eta;
        let (a, y, z) = (cur.mean.point.subopt, cur.mean.point.grad_norm, cur.mean.point.critic_err);
        let rhs = a - eta * h * y * y + 2.0 * eta * h * y * z + 4.0 * ledger.smooth_l * eta * eta * h.powi(4);
        rep.push(cur.k, next.mean.point.subopt, rhs, SE_MARGIN * next.mean.subopt_se);
    }
    Ok(rep)
}

/// Critic recursion on seed-mean estimates:
/// `z_{k+1}^2 <= (1 - 2 lambda beta) z_k^2 + 2 c_u^2 beta^2 + 2 c_q^2 eta^2
///   + 2 L2q/(1-g)^4 eta^2 z_k + 2 g sqrt(S) A/(1-g)^3 eta y_k z_k`,
/// allowing three standard errors of `z_{k+1}^2`.
pub fn check_critic_recursion(run: &RunTrace, ledger: &ConstantsLedger, lambda: f64) -> Result<InequalityReport> {
    require_unit_spacing(run)?;
    let h = 1.0 / (1.0 - ledger.gamma);
    let mut rep = InequalityReport::new(
        "critic_recursion",
        "seed-mean estimates; lhs may exceed rhs by 3 standard errors of z_{k+1}^2",
    );
    rep.notes.push(format!("lambda = {lambda:e}, L2q = {:e}", ledger.l2q));
    for w in run.checkpoints.windows(2) {
        let (cur, next) = (&w[0], &w[1]);
        let (eta, beta) = (cur.eta, cur.beta);
        let (y, z) = (cur.mean.point.grad_norm, cur.mean.point.critic_err);
        let rhs = (1.0 - 2.0 * lambda * beta) * z * z
            + 2.0 * ledger.c_u * ledger.c_u * beta * beta
            + 2.0 * ledger.c_q * ledger.c_q * eta * eta
            + 2.0 * ledger.l2q * h.powi(4) * eta * eta * z
            + ledger.critic_coupling() * eta * y * z;
        let lhs = next.mean.point.critic_err.powi(2);
        rep.push(cur.k, lhs, rhs, SE_MARGIN * next.mean.critic_sq_se);
    }
    Ok(rep)
}

const ROUNDING: f64 = 1e-12;

/// Gradient domination: `J* - J^pi <= (sqrt(S) C_PL / c) ||grad J||_2`.
pub fn check_gdl(mdp: &TabularMdp, pol: &impl ActionProbs, opt: &OptimalSolution) -> Result<InequalityReport> {
    let gdl = gdl_constants_for(mdp, pol, opt)?;
    let snap = snapshot(mdp, pol)?;
    let mut rep = InequalityReport::new("gradient_domination", "exact; absolute rounding allowance 1e-12");
    rep.push(0, opt.j_star - snap.ret, gdl.c_g() * snap.grad.norm(), ROUNDING);
    Ok(rep)
}

/// `||D^pi (I - gamma P_pi) Q|| <= (1 + gamma) ||Q||` for random `Q ~ N(0, I)`.
/// `notes[0]` records the largest observed ratio.
pub fn check_cgamma(mdp: &TabularMdp, pol: &impl ActionProbs, trials: usize, rng: &mut RngStream) -> Result<InequalityReport> {
    let m = exploration_operator(mdp, pol)?;
    let n = m.nrows();
    let bound = 1.0 + mdp.discount();
    let mut rep = InequalityReport::new("c_gamma_bound", "exact; relative rounding allowance 1e-12");
    let mut max_ratio: f64 = 0.0;
    for t in 0..trials {
        let q = DVector::from_fn(n, |_, _| rng.normal());
        let qn = q.norm();
        let lhs = (&m * &q).norm();
        if qn > 0.0 {
            max_ratio = max_ratio.max(lhs / qn);
        }
        rep.push(t, lhs, bound * qn, ROUNDING * qn);
    }
    rep.notes.push(format!("max_ratio = {max_ratio}"));
    Ok(rep)
}

/// Jacobian `dQ^pi(s,a) / dtheta(s'',a'')` as an `SA x SA` matrix (rows `s*A+a`,
/// columns `s''*A+a''`):
/// `gamma/(1-gamma) sum_s' P(s'|s,a) d_{s'}(s'') pi(a''|s'') A^pi(s'',a'')`.
pub fn q_jacobian(mdp: &TabularMdp, pol: &impl ActionProbs) -> Result<DMatrix<f64>> {
    let probs = pol.action_probs();
    let snap = snapshot(mdp, pol)?;
    let occ = pointwise_occupation(mdp, pol)?;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let g = mdp.discount();
    // reach[(s,a), s''] = sum_s' P(s'|s,a) d_{s'}(s'')
    let mut jac = DMatrix::zeros(ns * na, ns * na);
    for s in 0..ns {
        for a in 0..na {
            let p = mdp.next_state_probs(s, a);
            for s2 in 0..ns {
                let reach: f64 = (0..ns).map(|sp| p[sp] * occ[(sp, s2)]).sum();
                for a2 in 0..na {
                    jac[(s * na + a, s2 * na + a2)] = g / (1.0 - g) * reach * probs[(s2, a2)] * snap.advantage[(s2, a2)];
                }
            }
        }
    }
    Ok(jac)
}

/// `||grad Q^pi (d^pi . A_k)||^2 <= 4 gamma^2 S A^2 / (1-gamma)^4 ||grad J^pi||^2`,
/// where `d^pi . A_k` weights the critic advantage `A_k` by the state-action
/// occupation `d^pi(s) pi(a|s)`.
pub fn check_gradq_bound(mdp: &TabularMdp, pol: &impl ActionProbs, critic_q: &Table) -> Result<InequalityReport> {
    let jac = q_jacobian(mdp, pol)?;
    let weights = state_action_weights(mdp, pol)?;
    let critic_adv = crate::exact::advantage_of(critic_q, pol)?;
    let v = flatten(&weights.component_mul(&critic_adv));
    let lhs = (jac * v).norm_squared();
    let g = mdp.discount();
    let (s, a) = (mdp.n_states() as f64, mdp.n_actions() as f64);
    let grad = snapshot(mdp, pol)?.grad;
    let rhs = 4.0 * g * g * s * a * a / (1.0 - g).powi(4) * grad.norm_squared();
    let mut rep = InequalityReport::new("gradq_bound", "exact; absolute rounding allowance 1e-12");
    rep.push(0, lhs, rhs, ROUNDING);
    Ok(rep)
}

/// Outcome of iterating the expected critic operator with `beta = lambda/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub lambda: f64,
    /// `sqrt(1 - lambda^2 / 2)`.
    pub bound: f64,
    pub max_ratio: f64,
    pub n_ratios: usize,
    pub violations: usize,
    /// Starts that were already at the fixed point.
    pub fixed_point_starts: usize,
    pub assumption_violated: bool,
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        !self.assumption_violated && self.violations == 0
    }
}

/// Per-step error ratios `||Q_{m+1} - Q^pi|| / ||Q_m - Q^pi||` over `steps`
/// applications of the expected operator from `q0`. Empty when `q0 = Q^pi`.
pub fn contraction_ratios(mdp: &TabularMdp, pol: &SoftmaxPolicy, q0: &Table, beta: f64, steps: usize) -> Result<Vec<f64>> {
    let op = FixedPolicyOperator::new(mdp, pol)?;
    let qpi = exact_q(mdp, pol)?;
    let mut q = q0.clone();
    let mut err = (&q - &qpi).norm();
    let mut ratios = Vec::with_capacity(steps);
    for _ in 0..steps {
        if err == 0.0 {
            break;
        }
        q = op.apply(&q, beta)?;
        let next = (&q - &qpi).norm();
        ratios.push(next / err);
        err = next;
    }
    Ok(ratios)
}

/// Exploration constants at or below this are treated as zero.
pub const LAMBDA_FLOOR: f64 = 1e-14;

/// Expected-TD contraction: from `trials` random `Q_0` (plus `Q_0 = Q^pi`),
/// every per-step ratio over 200 steps with `beta = lambda/2` must be at most
/// `sqrt(1 - lambda^2/2)` (plus `1e-10`).
pub fn check_fixed_policy_contraction(
    mdp: &TabularMdp,
    pol: &SoftmaxPolicy,
    trials: usize,
    rng: &mut RngStream,
) -> Result<DecayReport> {
    const STEPS: usize = 200;
    let lambda = crate::exact::exploration_lambda(mdp, pol)?;
    if !(lambda > LAMBDA_FLOOR) {
        return Ok(DecayReport {
            lambda,
            bound: f64::NAN,
            max_ratio: f64::NAN,
            n_ratios: 0,
            violations: 0,
            fixed_point_starts: 0,
            assumption_violated: true,
        });
    }
    let beta = lambda / 2.0;
    let bound = (1.0 - lambda * lambda / 2.0).sqrt();
    let qpi = exact_q(mdp, pol)?;
    let scale = 1.0 / (1.0 - mdp.discount());
    let mut rep = DecayReport {
        lambda,
        bound,
        max_ratio: 0.0,
        n_ratios: 0,
        violations: 0,
        fixed_point_starts: 0,
        assumption_violated: false,
    };
    for t in 0..=trials {
        let q0 = if t == 0 {
            qpi.clone()
        } else {
            Table::from_fn(mdp.n_states(), mdp.n_actions(), |_, _| scale * rng.normal())
        };
        let ratios = contraction_ratios(mdp, pol, &q0, beta, STEPS)?;
        if ratios.is_empty() {
            rep.fixed_point_starts += 1;
        }
        for r in ratios {
            rep.n_ratios += 1;
            rep.max_ratio = rep.max_ratio.max(r);
            if r > bound + 1e-10 {
                rep.violations += 1;
            }
        }
    }
    Ok(rep)
}

/// Sub-optimality implied by `E||grad J||^2 <= eps` through gradient
/// domination and Jensen: `sqrt(eps) / gdl_factor`.
pub fn local_to_global(eps_stationary: f64, gdl: &GdlConstants) -> Result<f64> {
    if !(eps_stationary >= 0.0) {
        return Err(Error::InvalidParameter(format!("stationarity level must be >= 0, got {eps_stationary}")));
    }
    Ok(eps_stationary.sqrt() / gdl.gdl_factor)
}

/// Block-smoothed monotonicity of the seed-mean Lyapunov term.
///
/// Checkpoints after the first `burn_in_frac` of the horizon are grouped into
/// consecutive blocks of `window`; block `j+1` may exceed block `j` by at most
/// `se_mult` standard errors of the paired per-seed block difference.
pub fn check_lyapunov_monotone(run: &RunTrace, window: usize, burn_in_frac: f64, se_mult: f64) -> Result<InequalityReport> {
    if window == 0 {
        return Err(Error::InvalidParameter("window must be >= 1".into()));
    }
    let burn = (burn_in_frac * run.config.horizon as f64).ceil() as usize;
    let cps: Vec<_> = run.checkpoints.iter().filter(|c| c.k >= burn).collect();
    let n_seeds = run.config.n_seeds;
    let blocks: Vec<Vec<f64>> = cps
        .chunks_exact(window)
        .map(|chunk| {
            (0..n_seeds)
                .map(|i| chunk.iter().map(|c| c.per_seed[i].lyapunov).sum::<f64>() / window as f64)
                .collect()
        })
        .collect();
    let mut rep = InequalityReport::new(
        "lyapunov_monotone",
        &format!("block means of {window} checkpoints after {burn_in_frac} burn-in; {se_mult} paired standard errors"),
    );
    for (j, w) in blocks.windows(2).enumerate() {
        let diffs: Vec<f64> = w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect();
        let prev = w[0].iter().sum::<f64>() / n_seeds as f64;
        let next = w[1].iter().sum::<f64>() / n_seeds as f64;
        rep.push(j, next, prev, se_mult * std_err(&diffs));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{deterministic_probs, exact_q};
    use crate::mdp::fixtures::{chain, random, single};

    #[test]
    fn optimal_single_action_point() {
        let m = random(3, 1, 0.9, 1);
        let pol = SoftmaxPolicy::uniform(3, 1);
        let opt = optimal_return(&m, 1e-10).unwrap();
        let q = Table::from_element(3, 1, 0.5);
        let tp = trace_point(&m, &pol, &q, opt.j_star).unwrap();
        assert!(tp.subopt < 1e-12);
        assert!((tp.lyapunov - tp.subopt - tp.critic_err.powi(2)).abs() == 0.0);
    }

    #[test]
    fn exact_critic_point() {
        let m = random(3, 2, 0.9, 2);
        let pol = SoftmaxPolicy::uniform(3, 2);
        let opt = optimal_return(&m, 1e-10).unwrap();
        let tp = trace_point(&m, &pol, &exact_q(&m, &pol).unwrap(), opt.j_star).unwrap();
        assert!(tp.critic_err < 1e-12);
        assert!((tp.lyapunov - tp.subopt).abs() < 1e-20);
    }

    #[test]
    fn chain_critic_error_is_root_ten() {
        let m = chain(0.5, 2);
        let pol = SoftmaxPolicy::uniform(2, 2);
        let opt = optimal_return(&m, 1e-10).unwrap();
        let tp = trace_point(&m, &pol, &Table::zeros(2, 2), opt.j_star).unwrap();
        assert!((tp.critic_err - 10f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn ledger_reference_values() {
        let m = random(2, 2, 0.5, 3);
        let l = constants_ledger(&m, 0.1, 0.0).unwrap();
        assert_eq!(l.smooth_l, 64.0);
        assert_eq!(l.c_u, 5.0);
        assert_eq!(l.c_z, 16.0);
        assert_eq!(l.lip_pi, 2.0);
        assert!(l.gdl.is_some());
        assert!(matches!(constants_ledger(&m, 0.0, 0.0), Err(Error::AssumptionViolated(_))));
    }

    #[test]
    fn c_l_takes_the_smaller_branch() {
        let m = random(2, 2, 0.5, 3);
        let l = constants_ledger(&m, 0.1, 1.0).unwrap();
        let gdl = l.gdl.unwrap();
        assert_eq!(l.c_l(0.0, &gdl), 0.0);
        assert!((l.c_l(1e9, &gdl) - 4.0 * l.c_l_critic_branch).abs() < 1e-12 * l.c_l_critic_branch);
    }

    #[test]
    fn gdl_trivial_cases() {
        let m = random(3, 1, 0.9, 4);
        let opt = optimal_return(&m, 1e-10).unwrap();
        let rep = check_gdl(&m, &SoftmaxPolicy::uniform(3, 1), &opt).unwrap();
        assert!(rep.passed());
        assert!(rep.points[0].lhs.abs() < 1e-12 && rep.points[0].rhs == 0.0);
    }

    #[test]
    fn gdl_near_optimal_policy_both_sides_small() {
        let m = random(3, 2, 0.9, 5);
        let opt = optimal_return(&m, 1e-10).unwrap();
        let mut theta = Table::zeros(3, 2);
        for (s, &a) in opt.actions.iter().enumerate() {
            theta[(s, a)] = 30.0;
        }
        let rep = check_gdl(&m, &SoftmaxPolicy::new(theta).unwrap(), &opt).unwrap();
        assert!(rep.passed());
        assert!(rep.points[0].lhs < 1e-9);
    }

    #[test]
    fn cgamma_scalar_and_zero() {
        let m = single(0.5);
        let pol = SoftmaxPolicy::uniform(1, 1);
        let mut rng = RngStream::new(3);
        let rep = check_cgamma(&m, &pol, 20, &mut rng).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.notes[0], "max_ratio = 0.5");
        let op = exploration_operator(&m, &pol).unwrap();
        assert_eq!((op * DVector::zeros(1)).norm(), 0.0);
    }

    #[test]
    fn gradq_tiny_discount_and_zero_critic_advantage() {
        let m = random(3, 2, 0.9, 6).with_discount(1e-12).unwrap();
        let pol = SoftmaxPolicy::new(Table::from_row_slice(3, 2, &[0.1, 0.5, -1.0, 0.0, 2.0, 1.0])).unwrap();
        let rep = check_gradq_bound(&m, &pol, &Table::from_row_slice(3, 2, &[3.0, -2.0, 1.0, 0.0, 5.0, 2.0])).unwrap();
        assert!(rep.points[0].lhs < 1e-20 && rep.passed());

        let m = random(3, 2, 0.9, 6);
        let rep = check_gradq_bound(&m, &pol, &Table::from_element(3, 2, 4.0)).unwrap();
        assert_eq!(rep.points[0].lhs, 0.0);
        assert!(rep.passed());
    }

    #[test]
    fn scalar_contraction_ratio() {
        // lambda = 0.5, beta = 0.25: Q_{m+1} - Q^pi = (1 - 0.25 * 0.5)(Q_m - Q^pi).
        let m = single(0.5);
        let pol = SoftmaxPolicy::uniform(1, 1);
        let ratios = contraction_ratios(&m, &pol, &Table::zeros(1, 1), 0.25, 5).unwrap();
        for r in &ratios {
            assert!((r - 0.875).abs() < 1e-14);
        }
        let mut rng = RngStream::new(1);
        let rep = check_fixed_policy_contraction(&m, &pol, 5, &mut rng).unwrap();
        assert!(rep.passed());
        assert!((rep.bound - 0.875f64.sqrt()).abs() < 1e-15);
        assert_eq!(rep.fixed_point_starts, 1);
    }

    #[test]
    fn contraction_reports_assumption_violation() {
        let m = random(3, 2, 0.9, 2);
        let probs = deterministic_probs(2, &[0, 0, 1]);
        assert!(crate::exact::exploration_lambda(&m, &probs).unwrap() <= LAMBDA_FLOOR);
        // Logits 800 apart underflow to exact zeros.
        let pol = SoftmaxPolicy::new(Table::from_row_slice(3, 2, &[800.0, 0.0, 800.0, 0.0, 0.0, 800.0])).unwrap();
        let mut rng = RngStream::new(0);
        let rep = check_fixed_policy_contraction(&m, &pol, 3, &mut rng).unwrap();
        assert!(rep.assumption_violated && !rep.passed());
    }

    #[test]
    fn local_to_global_values() {
        let unit = GdlConstants {
            mismatch: 1.0,
            min_opt_prob: 1.0,
            gdl_factor: 1.0,
        };
        assert_eq!(local_to_global(0.0, &unit).unwrap(), 0.0);
        assert!((local_to_global(0.04, &unit).unwrap() - 0.2).abs() < 1e-15);
        assert!(local_to_global(-1.0, &unit).is_err());
        // eps(k) = k^{-1/2} maps to k^{-1/4}: log-ratio over a decade is -1/4.
        let g = GdlConstants {
            mismatch: 2.0,
            min_opt_prob: 0.3,
            gdl_factor: 0.1,
        };
        let (k1, k2) = (1e4f64, 1e6f64);
        let e1 = local_to_global(k1.powf(-0.5), &g).unwrap();
        let e2 = local_to_global(k2.powf(-0.5), &g).unwrap();
        assert!(((e2 / e1).ln() / (k2 / k1).ln() + 0.25).abs() < 1e-12);
    }

    #[test]
    fn l2q_is_zero_without_action_choice() {
        let m = random(3, 1, 0.9, 2);
        let mut rng = RngStream::new(0);
        assert_eq!(estimate_l2q(&m, 5, &mut rng).unwrap(), 0.0);
        let m2 = random(3, 2, 0.9, 2);
        assert!(estimate_l2q(&m2, 5, &mut rng).unwrap() > 0.0);
    }
}
