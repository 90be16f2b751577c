//! Step-size sweeps over `eta_k = beta_k = (1+k)^{-a}`.

use std::path::{Path, PathBuf};

use aclab_core::actor_critic::{run_ac, RunConfig, RunTrace, StepSchedule};
use aclab_core::TabularMdp;
use anyhow::Result;

use crate::output::write_run_csvs;
use crate::svg::{emit_svg, SvgChart};

pub const DEFAULT_EXPONENTS: [f64; 5] = [0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0];
/// Step size of the constant (exponent 0) leg.
pub const CONSTANT_STEP: f64 = 0.01;

/// Exponent 0 becomes the constant schedule `eta = 0.01`; any other exponent
/// keeps the base scale and critic ratio.
pub fn leg_schedule(base: &StepSchedule, exponent: f64) -> StepSchedule {
    if exponent == 0.0 {
        StepSchedule::constant(CONSTANT_STEP, base.critic_ratio)
    } else {
        StepSchedule::power_law(base.scale, exponent, base.critic_ratio)
    }
}

pub fn leg_stem(exponent: f64) -> String {
    format!("sweep_a{exponent:.3}")
}

#[derive(Debug)]
pub struct LegOutcome {
    pub exponent: f64,
    pub schedule: StepSchedule,
    pub trace: std::result::Result<RunTrace, String>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub legs: Vec<LegOutcome>,
    pub chart: SvgChart,
}

impl SweepOutcome {
    pub fn errors(&self) -> Vec<String> {
        self.legs
            .iter()
            .filter_map(|l| l.trace.as_ref().err().map(|e| format!("a = {}: {e}", l.exponent)))
            .collect()
    }
}

/// Runs every leg on the same MDP and master seed. A failing leg is recorded
/// and the sweep continues. With `out_dir`, each leg writes its CSVs and the
/// overlay chart goes to `sweep.svg`.
pub fn run_sweep(mdp: &TabularMdp, base: &RunConfig, exponents: &[f64], out_dir: Option<&Path>) -> Result<SweepOutcome> {
    crate::config::validate_exponents(exponents)?;
    let mut chart = SvgChart::new("seed-mean sub-optimality", "k + 1", "a_k", true);
    let mut legs = Vec::with_capacity(exponents.len());
    for &a in exponents {
        let mut cfg = base.clone();
        cfg.schedule = leg_schedule(&base.schedule, a);
        let mut leg = LegOutcome {
            exponent: a,
            schedule: cfg.schedule,
            trace: run_ac(mdp, &cfg).map_err(|e| e.to_string()),
            files: Vec::new(),
        };
        if let Ok(trace) = &leg.trace {
            let pts = trace
                .checkpoints
                .iter()
                .map(|c| ((c.k + 1) as f64, c.mean.point.subopt))
                .filter(|p| p.1 > 0.0)
                .collect();
            chart.push(&format!("a = {a:.3}"), pts);
            if let Some(dir) = out_dir {
                let extra = [("exponent", format!("{a}"))];
                leg.files = write_run_csvs(trace, dir, &leg_stem(a), &extra)?;
            }
        }
        legs.push(leg);
    }
    let mut outcome = SweepOutcome { legs, chart };
    if let Some(dir) = out_dir {
        let path = dir.join("sweep.svg");
        emit_svg(&outcome.chart, &path)?;
        if let Some(last) = outcome.legs.last_mut() {
            last.files.push(path);
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_zero_is_constant() {
        let s = leg_schedule(&StepSchedule::default(), 0.0);
        assert_eq!(s.value(0).0, 0.01);
        assert_eq!(s.value(1000).0, 0.01);
        let s = leg_schedule(&StepSchedule::power_law(1.0, 0.1, 10.0), 0.5);
        assert_eq!(s.value(3), (0.5, 5.0));
    }

    #[test]
    fn zero_horizon_gives_one_point_per_series() {
        let mdp = crate::generate::gen_mdp(&crate::generate::GenOptions::new(3, 2, 1)).unwrap();
        let cfg = RunConfig::new(StepSchedule::default(), 0, 2, 1, 5);
        let out = run_sweep(&mdp, &cfg, &[0.5], None).unwrap();
        assert_eq!(out.chart.series.len(), 1);
        assert_eq!(out.chart.series[0].points.len(), 1);
        assert!(out.chart.render().is_ok());
    }
}
