//! Single-timescale actor-critic with one sample per iteration, plus the
//! expected fixed-policy critic operator.
//!
//! Each iteration draws `s ~ d^{pi_k}`, `a ~ pi_k(.|s)`, `s' ~ P(.|s,a)`,
//! `a' ~ pi_k(.|s')` and then, reading only the pre-step critic `Q_k`:
//!
//! ```text
//! theta(s,a) += eta_k / (1-gamma) * (Q_k(s,a) - sum_b pi_k(b|s) Q_k(s,b))
//! Q(s,a)     += beta_k * (R(s,a) + gamma Q_k(s',a') - Q_k(s,a))
//! ```
//!
//! Only the sampled coordinate of `theta` and of `Q` changes.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{trace_point, TracePoint};
use crate::error::{dim, Error, Result};
use crate::exact::{exploration_lambda, flatten, optimal_return, state_action_weights, state_action_kernel, unflatten};
use crate::mdp::TabularMdp;
use crate::policy::SoftmaxPolicy;
use crate::sampling::{sample_iteration, RngStream, SampleTuple, SamplingMode};
use crate::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    PowerLaw,
    Constant,
}

/// Actor step `eta_k = scale * (1+k)^{-exponent}` (or `scale` when constant);
/// critic step `beta_k = critic_ratio * eta_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    pub scale: f64,
    #[serde(default)]
    pub exponent: f64,
    #[serde(default = "one")]
    pub critic_ratio: f64,
}

fn one() -> f64 {
    1.0
}

impl StepSchedule {
    pub fn power_law(scale: f64, exponent: f64, critic_ratio: f64) -> Self {
        Self {
            kind: ScheduleKind::PowerLaw,
            scale,
            exponent,
            critic_ratio,
        }
    }

    pub fn constant(scale: f64, critic_ratio: f64) -> Self {
        Self {
            kind: ScheduleKind::Constant,
            scale,
            exponent: 0.0,
            critic_ratio,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.scale) || !ok(self.critic_ratio) {
            return Err(Error::InvalidParameter(format!(
                "schedule scale and critic ratio must be positive, got {} and {}",
                self.scale, self.critic_ratio
            )));
        }
        if !(self.exponent.is_finite() && self.exponent >= 0.0) {
            return Err(Error::InvalidParameter(format!("schedule exponent must be >= 0, got {}", self.exponent)));
        }
        Ok(())
    }

    /// `(eta_k, beta_k)`.
    pub fn value(&self, k: usize) -> (f64, f64) {
        let eta = match self.kind {
            ScheduleKind::PowerLaw => self.scale * (1.0 + k as f64).powf(-self.exponent),
            ScheduleKind::Constant => self.scale,
        };
        (eta, self.critic_ratio * eta)
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self::power_law(1.0, 2.0 / 3.0, 1.0)
    }
}

pub fn schedule_value(sched: &StepSchedule, k: usize) -> (f64, f64) {
    sched.value(k)
}

/// Live actor-critic iterate: policy parameters, critic table and counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AcState {
    pub policy: SoftmaxPolicy,
    pub critic_q: Table,
    pub iter: usize,
}

impl AcState {
    pub fn new(theta: Table, critic_q: Table) -> Result<Self> {
        if theta.shape() != critic_q.shape() {
            return Err(dim("critic table", format!("{:?}", theta.shape()), format!("{:?}", critic_q.shape())));
        }
        Ok(Self {
            policy: SoftmaxPolicy::new(theta)?,
            critic_q,
            iter: 0,
        })
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            policy: SoftmaxPolicy::uniform(n_states, n_actions),
            critic_q: Table::zeros(n_states, n_actions),
            iter: 0,
        }
    }

    /// Applies one actor-critic update in place.
    pub fn step(&mut self, tup: SampleTuple, eta: f64, beta: f64, gamma: f64, reward: f64) -> Result<()> {
        let SampleTuple { s, a, s_next, a_next } = tup;
        let (ns, na) = self.critic_q.shape();
        if s >= ns || s_next >= ns || a >= na || a_next >= na {
            return Err(Error::InvalidParameter(format!("sample tuple {tup:?} out of bounds for {ns}x{na}")));
        }
        let q = &self.critic_q;
        let v: f64 = (0..na).map(|b| self.policy.prob(s, b) * q[(s, b)]).sum();
        let advantage = q[(s, a)] - v;
        let td = reward + gamma * q[(s_next, a_next)] - q[(s, a)];
        let updated_q = q[(s, a)] + beta * td;
        if !(advantage.is_finite() && updated_q.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite update at iteration {} (advantage {advantage}, critic {updated_q})",
                self.iter
            )));
        }
        self.policy
            .bump(s, a, eta / (1.0 - gamma) * advantage)
            .map_err(|e| Error::Numerical(format!("iteration {}: {e}", self.iter)))?;
        self.critic_q[(s, a)] = updated_q;
        self.iter += 1;
        Ok(())
    }
}

/// Functional form of [`AcState::step`].
pub fn ac_step(mut state: AcState, tup: SampleTuple, eta: f64, beta: f64, gamma: f64, reward: f64) -> Result<AcState> {
    state.step(tup, eta, beta, gamma, reward)?;
    Ok(state)
}

/// Experiment configuration for [`run_ac`]. Serialized as the `run` section of
/// the harness config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub schedule: StepSchedule,
    pub horizon: usize,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
    #[serde(default = "default_diag_every")]
    pub diag_every: usize,
    /// `None` means `theta_0 = 0`.
    #[serde(default)]
    pub theta_init: Option<Vec<Vec<f64>>>,
    /// `None` means `Q_0 = 0`.
    #[serde(default)]
    pub q_init: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampling: SamplingMode,
    /// Record the smallest exploration constant over seeds at each checkpoint.
    #[serde(default)]
    pub track_lambda: bool,
}

fn default_seeds() -> usize {
    10
}

fn default_diag_every() -> usize {
    500
}

impl RunConfig {
    pub fn new(schedule: StepSchedule, horizon: usize, n_seeds: usize, diag_every: usize, seed: u64) -> Self {
        Self {
            schedule,
            horizon,
            n_seeds,
            diag_every,
            theta_init: None,
            q_init: None,
            seed,
            sampling: SamplingMode::Occupation,
            track_lambda: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.n_seeds == 0 {
            return Err(Error::InvalidParameter("n_seeds must be >= 1".into()));
        }
        if self.diag_every == 0 {
            return Err(Error::InvalidParameter("diag_every must be >= 1".into()));
        }
        Ok(())
    }

    fn initial_table(init: &Option<Vec<Vec<f64>>>, ns: usize, na: usize, what: &'static str) -> Result<Table> {
        match init {
            None => Ok(Table::zeros(ns, na)),
            Some(rows) => {
                if rows.len() != ns || rows.iter().any(|r| r.len() != na) {
                    return Err(dim(what, format!("{ns}x{na}"), format!("{} rows", rows.len())));
                }
                Ok(Table::from_fn(ns, na, |s, a| rows[s][a]))
            }
        }
    }

    pub fn initial_state(&self, mdp: &TabularMdp) -> Result<AcState> {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        AcState::new(
            Self::initial_table(&self.theta_init, ns, na, "theta_init")?,
            Self::initial_table(&self.q_init, ns, na, "q_init")?,
        )
    }

    /// Iterations at which diagnostics are recorded: `0, m, 2m, ...` and `K`.
    pub fn checkpoint_iters(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = (0..=self.horizon).step_by(self.diag_every).collect();
        if ks.last() != Some(&self.horizon) {
            ks.push(self.horizon);
        }
        ks
    }
}

/// Seed-averaged diagnostics at one checkpoint.
///
/// `point.subopt` is the mean of `a_k`; `point.critic_err` and
/// `point.grad_norm` are root-mean-squares (`z_k = sqrt(E||Q_k - Q^k||^2)`,
/// `y_k = sqrt(E||grad J^k||^2)`); `point.lyapunov` is the mean of `x_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedMean {
    pub point: TracePoint,
    pub subopt_se: f64,
    pub critic_sq_se: f64,
    pub lyapunov_se: f64,
}

impl SeedMean {
    pub fn from_points(points: &[TracePoint]) -> Self {
        let n = points.len() as f64;
        let a: Vec<f64> = points.iter().map(|p| p.subopt).collect();
        let z2: Vec<f64> = points.iter().map(|p| p.critic_err * p.critic_err).collect();
        let y2: Vec<f64> = points.iter().map(|p| p.grad_norm * p.grad_norm).collect();
        let x: Vec<f64> = points.iter().map(|p| p.lyapunov).collect();
        let raw = points.iter().map(|p| p.subopt_raw).sum::<f64>() / n;
        SeedMean {
            point: TracePoint {
                subopt: mean(&a),
                subopt_raw: raw,
                critic_err: mean(&z2).sqrt(),
                grad_norm: mean(&y2).sqrt(),
                lyapunov: mean(&x),
            },
            subopt_se: std_err(&a),
            critic_sq_se: std_err(&z2),
            lyapunov_se: std_err(&x),
        }
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean (sample standard deviation over sqrt(n)); zero
/// for a single sample.
pub(crate) fn std_err(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub k: usize,
    pub eta: f64,
    pub beta: f64,
    pub per_seed: Vec<TracePoint>,
    pub mean: SeedMean,
    /// Smallest exploration constant over the seeds' policies, when tracked.
    pub min_lambda: Option<f64>,
}

/// Output of [`run_ac`].
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub config: RunConfig,
    pub j_star: f64,
    pub checkpoints: Vec<Checkpoint>,
    /// Largest `||Q_k||_inf` seen by any seed at any iteration.
    pub max_critic_sup: f64,
    /// Per seed: running minimum over checkpoints of `min_s pi_k(a*(s)|s)`.
    pub min_opt_prob: Vec<f64>,
    /// Per seed: mean number of chain transitions per occupation draw.
    pub mean_chain_len: Vec<f64>,
    pub final_states: Vec<AcState>,
    pub wall_time: Duration,
}

impl RunTrace {
    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("a trace always has the k = 0 checkpoint")
    }
}

struct SeedRun {
    points: Vec<TracePoint>,
    lambdas: Vec<f64>,
    max_sup: f64,
    min_opt_prob: f64,
    mean_chain: f64,
    final_state: AcState,
}

fn run_seed(mdp: &TabularMdp, cfg: &RunConfig, j_star: f64, opt_actions: &[usize], seed_idx: usize) -> Result<SeedRun> {
    let wrap = |iter: usize| move |e: Error| Error::AtIteration { seed: seed_idx, iter, source: Box::new(e) };
    let mut state = cfg.initial_state(mdp)?;
    let mut rng = RngStream::substream(cfg.seed, seed_idx as u64);
    let gamma = mdp.discount();
    let checkpoints = cfg.checkpoint_iters();
    let mut next_cp = 0;
    let mut run = SeedRun {
        points: Vec::with_capacity(checkpoints.len()),
        lambdas: Vec::new(),
        max_sup: state.critic_q.amax(),
        min_opt_prob: f64::INFINITY,
        mean_chain: 0.0,
        final_state: AcState::zeros(1, 1),
    };
    let mut chain_total = 0usize;
    for k in 0..=cfg.horizon {
        if next_cp < checkpoints.len() && checkpoints[next_cp] == k {
            run.points.push(trace_point(mdp, &state.policy, &state.critic_q, j_star).map_err(wrap(k))?);
            if cfg.track_lambda {
                run.lambdas.push(exploration_lambda(mdp, &state.policy).map_err(wrap(k))?);
            }
            let c = opt_actions
                .iter()
                .enumerate()
                .map(|(s, &a)| state.policy.prob(s, a))
                .fold(f64::INFINITY, f64::min);
            run.min_opt_prob = run.min_opt_prob.min(c);
            next_cp += 1;
        }
        if k == cfg.horizon {
            break;
        }
        let (eta, beta) = cfg.schedule.value(k);
        let tup = match cfg.sampling {
            SamplingMode::Occupation => {
                let draw = crate::sampling::sample_occupation_state(mdp, &state.policy, &mut rng);
                chain_total += draw.transitions;
                crate::sampling::sample_tuple(mdp, &state.policy, draw.state, &mut rng)
            }
            SamplingMode::Uniform => sample_iteration(mdp, &state.policy, SamplingMode::Uniform, &mut rng),
        };
        let reward = mdp.reward()[(tup.s, tup.a)];
        state.step(tup, eta, beta, gamma, reward).map_err(wrap(k))?;
        run.max_sup = run.max_sup.max(state.critic_q[(tup.s, tup.a)].abs());
    }
    run.mean_chain = if cfg.horizon > 0 { chain_total as f64 / cfg.horizon as f64 } else { 0.0 };
    run.final_state = state;
    Ok(run)
}

/// Runs the actor-critic loop for every seed (in parallel; each seed owns
/// substream `seed_index` of the master seed) and records exact diagnostics at
/// every checkpoint.
pub fn run_ac(mdp: &TabularMdp, cfg: &RunConfig) -> Result<RunTrace> {
    cfg.validate()?;
    let started = Instant::now();
    let opt = optimal_return(mdp, 1e-10)?;
    let runs: Vec<SeedRun> = (0..cfg.n_seeds)
        .into_par_iter()
        .map(|i| run_seed(mdp, cfg, opt.j_star, &opt.actions, i))
        .collect::<Result<_>>()?;

    let checkpoints = cfg
        .checkpoint_iters()
        .into_iter()
        .enumerate()
        .map(|(j, k)| {
            let per_seed: Vec<TracePoint> = runs.iter().map(|r| r.points[j]).collect();
            let (eta, beta) = cfg.schedule.value(k);
            Checkpoint {
                k,
                eta,
                beta,
                mean: SeedMean::from_points(&per_seed),
                per_seed,
                min_lambda: cfg
                    .track_lambda
                    .then(|| runs.iter().map(|r| r.lambdas[j]).fold(f64::INFINITY, f64::min)),
            }
        })
        .collect();

    Ok(RunTrace {
        config: cfg.clone(),
        j_star: opt.j_star,
        checkpoints,
        max_critic_sup: runs.iter().map(|r| r.max_sup).fold(0.0, f64::max),
        min_opt_prob: runs.iter().map(|r| r.min_opt_prob).collect(),
        mean_chain_len: runs.iter().map(|r| r.mean_chain).collect(),
        final_states: runs.into_iter().map(|r| r.final_state).collect(),
        wall_time: started.elapsed(),
    })
}

/// Expected critic operator for a fixed policy:
/// `Q <- Q + beta D^pi (R + gamma P_pi Q - Q)`.
pub fn fixed_policy_expected_step(mdp: &TabularMdp, pol: &SoftmaxPolicy, q: &Table, beta: f64) -> Result<Table> {
    let op = FixedPolicyOperator::new(mdp, pol)?;
    op.apply(q, beta)
}

/// Precomputed pieces of the expected critic operator, for repeated application.
pub struct FixedPolicyOperator {
    kernel: nalgebra::DMatrix<f64>,
    weights: nalgebra::DVector<f64>,
    reward: nalgebra::DVector<f64>,
    gamma: f64,
    shape: (usize, usize),
}

impl FixedPolicyOperator {
    pub fn new(mdp: &TabularMdp, pol: &SoftmaxPolicy) -> Result<Self> {
        Ok(Self {
            kernel: state_action_kernel(mdp, pol)?,
            weights: flatten(&state_action_weights(mdp, pol)?),
            reward: flatten(mdp.reward()),
            gamma: mdp.discount(),
            shape: (mdp.n_states(), mdp.n_actions()),
        })
    }

    pub fn apply(&self, q: &Table, beta: f64) -> Result<Table> {
        if q.shape() != self.shape {
            return Err(dim("Q table", format!("{:?}", self.shape), format!("{:?}", q.shape())));
        }
        let qv = flatten(q);
        let residual = &self.reward + &self.kernel * &qv * self.gamma - &qv;
        let next = qv + residual.component_mul(&self.weights) * beta;
        Ok(unflatten(&next, self.shape.0, self.shape.1))
    }
}
