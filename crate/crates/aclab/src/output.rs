//! CSV traces and the per-invocation manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use aclab_core::actor_critic::RunTrace;
use anyhow::{Context, Result};
use serde::Serialize;

pub const SEED_COLUMNS: &str = "k,seed,a_k,z_k,y_k,x_k,eta_k,beta_k";
pub const MEAN_COLUMNS: &str = "k,a_k,z_k,y_k,x_k,eta_k,beta_k,a_se,x_se";

fn header(trace: &RunTrace, extra: &[(&str, String)]) -> String {
    let mut out = String::new();
    let config = serde_json::to_string(&trace.config).expect("run config serializes");
    let _ = writeln!(out, "# config: {config}");
    let _ = writeln!(out, "# master_seed: {}", trace.config.seed);
    let _ = writeln!(
        out,
        "# substreams: seed i uses ChaCha8 stream i of the master seed, i = 0..{}",
        trace.config.n_seeds
    );
    let _ = writeln!(out, "# j_star: {}", trace.j_star);
    for (k, v) in extra {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out
}

/// One row per (checkpoint, seed). `a_k` is the unclamped `J* - J^{pi_k}`.
pub fn seed_csv(trace: &RunTrace, extra: &[(&str, String)]) -> String {
    let mut out = header(trace, extra);
    out.push_str(SEED_COLUMNS);
    out.push('\n');
    for cp in &trace.checkpoints {
        for (i, p) in cp.per_seed.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                cp.k, i, p.subopt_raw, p.critic_err, p.grad_norm, p.lyapunov, cp.eta, cp.beta
            );
        }
    }
    out
}

/// One row per checkpoint with seed means and standard errors.
pub fn mean_csv(trace: &RunTrace, extra: &[(&str, String)]) -> String {
    let mut out = header(trace, extra);
    out.push_str(MEAN_COLUMNS);
    out.push('\n');
    for cp in &trace.checkpoints {
        let m = &cp.mean;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            cp.k,
            m.point.subopt_raw,
            m.point.critic_err,
            m.point.grad_norm,
            m.point.lyapunov,
            cp.eta,
            cp.beta,
            m.subopt_se,
            m.lyapunov_se
        );
    }
    out
}

/// Writes `<stem>_seeds.csv` and `<stem>_mean.csv` into `dir`.
pub fn write_run_csvs(trace: &RunTrace, dir: &Path, stem: &str, extra: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let seeds = dir.join(format!("{stem}_seeds.csv"));
    let means = dir.join(format!("{stem}_mean.csv"));
    fs::write(&seeds, seed_csv(trace, extra)).with_context(|| format!("writing {}", seeds.display()))?;
    fs::write(&means, mean_csv(trace, extra)).with_context(|| format!("writing {}", means.display()))?;
    Ok(vec![seeds, means])
}

/// Summary written next to the CSVs; carries the values the CSVs do not.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub j_star: f64,
    pub final_subopt: f64,
    pub final_lyapunov: f64,
    pub max_critic_sup: f64,
    pub min_opt_prob: Vec<f64>,
    pub mean_chain_len: Vec<f64>,
    pub wall_time_secs: f64,
}

impl RunSummary {
    pub fn of(trace: &RunTrace) -> Self {
        let last = trace.last();
        Self {
            j_star: trace.j_star,
            final_subopt: last.mean.point.subopt,
            final_lyapunov: last.mean.point.lyapunov,
            max_critic_sup: trace.max_critic_sup,
            min_opt_prob: trace.min_opt_prob.clone(),
            mean_chain_len: trace.mean_chain_len.clone(),
            wall_time_secs: trace.wall_time.as_secs_f64(),
        }
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Machine-readable index of every file one invocation produced.
#[derive(Debug, Default, Serialize)]
pub struct Manifest {
    pub command: String,
    pub files: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn add(&mut self, files: impl IntoIterator<Item = PathBuf>) {
        self.files.extend(files);
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}
