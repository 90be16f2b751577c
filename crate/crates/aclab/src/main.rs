use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aclab::config::ExperimentSpec;
use aclab::generate::{gen_mdp, GenOptions};
use aclab::output::{write_json, write_run_csvs, Manifest, RunSummary};
use aclab::suite::{check_all, SuiteOptions};
use aclab::sweep::{run_sweep, DEFAULT_EXPONENTS};
use aclab_core::actor_critic::run_ac;
use aclab_core::diagnostics::check_fixed_policy_contraction;
use aclab_core::recursion::{iterate_coupled, iterate_lyapunov, CoupledRecursion, IterationMode, LyapunovRecursion};
use aclab_core::sampling::{RngStream, SamplingMode};
use aclab_core::{SoftmaxPolicy, Table, TabularMdp};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "aclab", version, about = "Tabular single-timescale actor-critic laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random MDP and write it as JSON.
    GenMdp {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        actions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        sparsity: f64,
        #[arg(long, default_value_t = 0.9)]
        discount: f64,
    },
    /// Run the actor-critic loop described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sampling: Option<SamplingMode>,
    },
    /// Run one leg per step-size exponent and overlay the results.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        exponents: Option<Vec<f64>>,
        #[arg(long)]
        sampling: Option<SamplingMode>,
    },
    /// Iterate the expected critic operator for a fixed policy and check its contraction rate.
    FixedEval {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Policy logits are `scale * N(0, 1)`; 0 gives the uniform policy.
        #[arg(long, default_value_t = 0.0)]
        theta_scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Iterate a scalar recursion.
    Recursion {
        #[arg(long, value_enum)]
        mode: RecursionMode,
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
        #[arg(long, default_value_t = 1.0)]
        c1: f64,
        #[arg(long, default_value_t = 2.0)]
        c2: f64,
        #[arg(long, default_value_t = 0.5)]
        u0: f64,
        /// Start from the bound instead of u0 (lyapunov mode).
        #[arg(long)]
        worst_case: bool,
        /// Eight comma-separated constants; drawn uniformly in (0, 1] when absent (coupled mode).
        #[arg(long, value_delimiter = ',')]
        constants: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        draws: usize,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run every inequality check on one MDP; exits with status 2 on any violation.
    CheckAll {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RecursionMode {
    Lyapunov,
    Coupled,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_spec(path: &Path, sampling: Option<SamplingMode>) -> Result<(ExperimentSpec, TabularMdp)> {
    let mut spec = ExperimentSpec::load(path)?;
    if let Some(mode) = sampling {
        spec.run.sampling = mode;
    }
    let mdp = spec.load_mdp()?;
    Ok((spec, mdp))
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::GenMdp {
            states,
            actions,
            seed,
            out,
            sparsity,
            discount,
        } => {
            let mdp = gen_mdp(&GenOptions {
                n_states: states,
                n_actions: actions,
                seed,
                sparsity,
                discount,
            })?;
            mdp.save(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", out.display());
        }
        Command::Run { config, sampling } => {
            let (spec, mdp) = load_spec(&config, sampling)?;
            let trace = run_ac(&mdp, &spec.run)?;
            let dir = &spec.output_dir;
            let mdp_meta = [("mdp", spec.mdp_path.display().to_string())];
            let mut manifest = Manifest::new("run");
            manifest.add(write_run_csvs(&trace, dir, "run", &mdp_meta)?);
            let summary = dir.join("run_summary.json");
            write_json(&summary, &RunSummary::of(&trace))?;
            manifest.add([summary]);
            println!("{}", manifest.write(dir)?.display());
        }
        Command::Sweep {
            config,
            exponents,
            sampling,
        } => {
            let (spec, mdp) = load_spec(&config, sampling)?;
            let exps = exponents.or(spec.sweep_exponents.clone()).unwrap_or_else(|| DEFAULT_EXPONENTS.to_vec());
            let outcome = run_sweep(&mdp, &spec.run, &exps, Some(&spec.output_dir))?;
            let mut manifest = Manifest::new("sweep");
            for leg in &outcome.legs {
                manifest.add(leg.files.iter().cloned());
            }
            manifest.errors = outcome.errors();
            println!("{}", manifest.write(&spec.output_dir)?.display());
            if !manifest.errors.is_empty() {
                for e in &manifest.errors {
                    eprintln!("leg failed: {e}");
                }
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::FixedEval {
            mdp,
            seed,
            trials,
            theta_scale,
            out,
        } => {
            let mdp = TabularMdp::load(&mdp).with_context(|| format!("loading {}", mdp.display()))?;
            let mut rng = RngStream::substream(seed, 0);
            let theta = Table::from_fn(mdp.n_states(), mdp.n_actions(), |_, _| theta_scale * rng.normal());
            let pol = SoftmaxPolicy::new(theta)?;
            let rep = check_fixed_policy_contraction(&mdp, &pol, trials, &mut rng)?;
            let text = serde_json::to_string_pretty(&rep)?;
            match out {
                Some(p) => write_json(&p, &rep)?,
                None => println!("{text}"),
            }
            if !rep.passed() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Recursion {
            mode,
            horizon,
            c1,
            c2,
            u0,
            worst_case,
            constants,
            draws,
            rho,
            seed,
            out_dir,
        } => {
            fs::create_dir_all(&out_dir)?;
            return match mode {
                RecursionMode::Lyapunov => lyapunov_cmd(c1, c2, u0, horizon, worst_case, &out_dir),
                RecursionMode::Coupled => coupled_cmd(constants, draws, rho, seed, horizon, &out_dir),
            };
        }
        Command::CheckAll { mdp, seed, out } => {
            let mdp = TabularMdp::load(&mdp).with_context(|| format!("loading {}", mdp.display()))?;
            let rep = check_all(
                &mdp,
                &SuiteOptions {
                    seed,
                    ..SuiteOptions::default()
                },
            );
            for e in &rep.entries {
                println!("{:<28} {:?}", e.name, e.status);
            }
            if let Some(p) = out {
                write_json(&p, &rep)?;
            }
            if !rep.passed {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn lyapunov_cmd(c1: f64, c2: f64, u0: f64, horizon: usize, worst_case: bool, dir: &Path) -> Result<ExitCode> {
    let rec = if u0 > 0.0 {
        LyapunovRecursion::adjusted(c1, c2, u0)?
    } else {
        LyapunovRecursion::with_alpha0(c1, c2, 0.0, 2f64.powf(-1.0 / 3.0))?
    };
    let mode = if worst_case { IterationMode::WorstCase } else { IterationMode::Equality };
    let tr = iterate_lyapunov(&rec, horizon, mode)?;
    let mut csv = String::from("k,u_k,alpha_bound,eta_k\n");
    for k in 0..tr.u.len() {
        let _ = writeln!(csv, "{},{},{},{}", k, tr.u[k], tr.bound[k], tr.eta[k]);
    }
    let csv_path = dir.join("lyapunov.csv");
    fs::write(&csv_path, csv)?;
    let report = dir.join("lyapunov.json");
    write_json(
        &report,
        &json!({
            "recursion": tr.recursion,
            "mode": tr.mode,
            "horizon": horizon,
            "certified": tr.certified(),
            "min_slack": tr.min_slack,
            "counterexample": tr.counterexample,
        }),
    )?;
    let mut manifest = Manifest::new("recursion");
    manifest.add([csv_path, report]);
    println!("{}", manifest.write(dir)?.display());
    Ok(if tr.certified() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn coupled_cmd(constants: Option<Vec<f64>>, draws: usize, rho: f64, seed: u64, horizon: usize, dir: &Path) -> Result<ExitCode> {
    if draws == 0 {
        bail!("--draws must be >= 1");
    }
    let mut rng = RngStream::substream(seed, 0);
    let mut csv = String::from("draw,k,a_k,z_k,x_k\n");
    let mut summaries = Vec::new();
    for d in 0..draws {
        let c: [f64; 8] = match &constants {
            Some(v) => v.as_slice().try_into().context("--constants needs exactly eight values")?,
            None => std::array::from_fn(|_| 1.0 - rng.uniform()),
        };
        let mut rec = CoupledRecursion::figure_regime(c);
        rec.rho = rho;
        let tr = iterate_coupled(&rec, horizon)?;
        for k in 0..tr.x.len() {
            let _ = writeln!(csv, "{d},{k},{},{},{}", tr.a[k], tr.z[k], tr.x[k]);
        }
        summaries.push(json!({
            "draw": d,
            "constants": c,
            "lyapunov_nonincreasing_after_50": tr.lyapunov_nonincreasing_after(50),
            "actor_nonmonotone": tr.actor_nonmonotone(),
            "divergence": tr.divergence,
        }));
    }
    let csv_path = dir.join("coupled.csv");
    fs::write(&csv_path, csv)?;
    let report = dir.join("coupled.json");
    write_json(&report, &json!({ "horizon": horizon, "rho": rho, "seed": seed, "draws": summaries }))?;
    let mut manifest = Manifest::new("recursion");
    manifest.add([csv_path, report]);
    println!("{}", manifest.write(dir)?.display());
    Ok(ExitCode::SUCCESS)
}
