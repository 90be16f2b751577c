//! `check-all`: every numerical check on one MDP with default settings.

use aclab_core::actor_critic::{run_ac, RunConfig, StepSchedule};
use aclab_core::diagnostics::{
    check_actor_recursion, check_cgamma, check_critic_recursion, check_fixed_policy_contraction, check_gdl,
    check_gradq_bound, constants_ledger, estimate_l2q, InequalityReport,
};
use aclab_core::exact::{exact_gradient, optimal_return, return_of};
use aclab_core::recursion::{iterate_lyapunov, IterationMode, LyapunovRecursion};
use aclab_core::sampling::RngStream;
use aclab_core::{Error, SoftmaxPolicy, Table, TabularMdp};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    AssumptionViolated,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub name: String,
    pub status: Status,
    pub detail: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub passed: bool,
    pub entries: Vec<SuiteEntry>,
}

impl SuiteReport {
    pub fn entry(&self, name: &str) -> Option<&SuiteEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Random policies per exact check.
    pub policies: usize,
    pub cgamma_trials: usize,
    pub contraction_trials: usize,
    pub recursion_seeds: usize,
    pub recursion_horizon: usize,
    pub ode_instances: usize,
    pub ode_horizon: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            policies: 5,
            cgamma_trials: 100,
            contraction_trials: 10,
            recursion_seeds: 10,
            recursion_horizon: 300,
            ode_instances: 100,
            ode_horizon: 10_000,
        }
    }
}

fn from_error(name: &str, e: &Error) -> SuiteEntry {
    let status = match e {
        Error::AssumptionViolated(_) | Error::DegenerateOccupation { .. } => Status::AssumptionViolated,
        _ => Status::Error,
    };
    SuiteEntry {
        name: name.into(),
        status,
        detail: json!({ "error": e.to_string() }),
    }
}

fn from_reports(name: &str, reports: aclab_core::Result<Vec<InequalityReport>>) -> SuiteEntry {
    match reports {
        Err(e) => from_error(name, &e),
        Ok(reports) => {
            let ok = reports.iter().all(InequalityReport::passed);
            SuiteEntry {
                name: name.into(),
                status: if ok { Status::Pass } else { Status::Fail },
                detail: serde_json::to_value(&reports).unwrap_or(Value::Null),
            }
        }
    }
}

fn policies(mdp: &TabularMdp, n: usize, rng: &mut RngStream) -> Vec<SoftmaxPolicy> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut out = vec![SoftmaxPolicy::uniform(ns, na)];
    for _ in 1..n.max(1) {
        out.push(SoftmaxPolicy::new(Table::from_fn(ns, na, |_, _| rng.normal())).expect("finite logits"));
    }
    out
}

/// Relative error `||g - fd||_inf / ||g||_inf` of the exact gradient against
/// central differences with step `h`; absolute when `g = 0`.
pub fn gradient_fd_error(mdp: &TabularMdp, pol: &SoftmaxPolicy, h: f64) -> aclab_core::Result<f64> {
    let theta = pol.theta();
    let g = exact_gradient(mdp, pol)?;
    let mut worst: f64 = 0.0;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let mut plus = theta.clone();
            plus[(s, a)] += h;
            let mut minus = theta.clone();
            minus[(s, a)] -= h;
            let fd = (return_of(mdp, &SoftmaxPolicy::new(plus)?)? - return_of(mdp, &SoftmaxPolicy::new(minus)?)?) / (2.0 * h);
            worst = worst.max((g[(s, a)] - fd).abs());
        }
    }
    let scale = g.amax();
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

pub fn check_all(mdp: &TabularMdp, opts: &SuiteOptions) -> SuiteReport {
    let mut rng = RngStream::substream(opts.seed, 0);
    let pols = policies(mdp, opts.policies, &mut rng);
    let mut entries = Vec::new();

    entries.push(match optimal_return(mdp, 1e-10) {
        Err(e) => from_error("gradient_domination", &e),
        Ok(opt) => from_reports("gradient_domination", pols.iter().map(|p| check_gdl(mdp, p, &opt)).collect()),
    });

    entries.push(match pols.iter().map(|p| gradient_fd_error(mdp, p, 1e-5)).collect::<aclab_core::Result<Vec<_>>>() {
        Err(e) => from_error("gradient_finite_difference", &e),
        Ok(errs) => {
            let worst = errs.iter().copied().fold(0.0, f64::max);
            SuiteEntry {
                name: "gradient_finite_difference".into(),
                status: if worst <= 1e-6 { Status::Pass } else { Status::Fail },
                detail: json!({ "max_relative_error": worst, "tolerance": 1e-6 }),
            }
        }
    });

    let mut cg_rng = RngStream::substream(opts.seed, 1);
    entries.push(from_reports(
        "c_gamma_bound",
        pols.iter().map(|p| check_cgamma(mdp, p, opts.cgamma_trials, &mut cg_rng)).collect(),
    ));

    let scale = 1.0 / (1.0 - mdp.discount());
    let mut gq_rng = RngStream::substream(opts.seed, 2);
    entries.push(from_reports(
        "gradq_bound",
        pols.iter()
            .map(|p| {
                let q = Table::from_fn(mdp.n_states(), mdp.n_actions(), |_, _| scale * (2.0 * gq_rng.uniform() - 1.0));
                check_gradq_bound(mdp, p, &q)
            })
            .collect(),
    ));

    let mut fp_rng = RngStream::substream(opts.seed, 3);
    entries.push(match check_fixed_policy_contraction(mdp, &pols[0], opts.contraction_trials, &mut fp_rng) {
        Err(e) => from_error("fixed_policy_contraction", &e),
        Ok(rep) => SuiteEntry {
            name: "fixed_policy_contraction".into(),
            status: if rep.assumption_violated {
                Status::AssumptionViolated
            } else if rep.passed() {
                Status::Pass
            } else {
                Status::Fail
            },
            detail: serde_json::to_value(&rep).unwrap_or(Value::Null),
        },
    });

    entries.extend(recursion_entries(mdp, opts));
    entries.push(ode_entry(opts));

    SuiteReport {
        passed: entries.iter().all(|e| e.status == Status::Pass),
        entries,
    }
}

fn recursion_entries(mdp: &TabularMdp, opts: &SuiteOptions) -> Vec<SuiteEntry> {
    let names = ["actor_recursion", "critic_recursion"];
    let mut cfg = RunConfig::new(StepSchedule::default(), opts.recursion_horizon, opts.recursion_seeds, 1, opts.seed);
    cfg.track_lambda = true;
    let run = match run_ac(mdp, &cfg) {
        Ok(r) => r,
        Err(e) => return names.iter().map(|n| from_error(n, &e)).collect(),
    };
    let lambda = run
        .checkpoints
        .iter()
        .filter_map(|c| c.min_lambda)
        .fold(f64::INFINITY, f64::min);
    let mut l2_rng = RngStream::substream(opts.seed, 4);
    let ledger = estimate_l2q(mdp, 100, &mut l2_rng).and_then(|l2q| constants_ledger(mdp, lambda, l2q));
    match ledger {
        Err(e) => names.iter().map(|n| from_error(n, &e)).collect(),
        Ok(ledger) => vec![
            from_reports(names[0], check_actor_recursion(&run, &ledger).map(|r| vec![r])),
            from_reports(names[1], check_critic_recursion(&run, &ledger, lambda).map(|r| vec![r])),
        ],
    }
}

fn ode_entry(opts: &SuiteOptions) -> SuiteEntry {
    let mut rng = RngStream::substream(opts.seed, 5);
    let mut failures = Vec::new();
    let mut min_rel_slack = f64::INFINITY;
    for i in 0..opts.ode_instances {
        let c1 = 10f64.powf(2.0 * rng.uniform() - 1.0);
        let c2 = 10f64.powf(2.0 * rng.uniform() - 1.0);
        let alpha0 = 0.3 + (2f64.powf(-1.0 / 3.0) - 0.3) * rng.uniform();
        let u0 = alpha0 * (c2 / (c1 * c1)).cbrt();
        let rec = match LyapunovRecursion::adjusted(c1, c2, u0) {
            Ok(r) => r,
            Err(e) => return from_error("ode_tracking", &e),
        };
        match iterate_lyapunov(&rec, opts.ode_horizon, IterationMode::Equality) {
            Err(e) => return from_error("ode_tracking", &e),
            Ok(tr) => {
                let rel = tr.u.iter().zip(&tr.bound).map(|(u, b)| (b - u) / b).fold(f64::INFINITY, f64::min);
                min_rel_slack = min_rel_slack.min(rel);
                if let Some(cx) = tr.counterexample {
                    failures.push(json!({ "instance": i, "c1": rec.c1, "c2": rec.c2, "u0": rec.u0, "k": cx.k, "u_k": cx.u_k, "bound": cx.bound }));
                }
            }
        }
    }
    SuiteEntry {
        name: "ode_tracking".into(),
        status: if failures.is_empty() { Status::Pass } else { Status::Fail },
        detail: json!({ "instances": opts.ode_instances, "horizon": opts.ode_horizon, "min_relative_slack": min_rel_slack, "counterexamples": failures }),
    }
}
