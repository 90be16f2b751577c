//! Seeded i.i.d. sampling of states from the discounted occupation measure and
//! of one-step transitions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::policy::SoftmaxPolicy;

/// Deterministic random stream: ChaCha8 keyed by a 64-bit master seed, with
/// one independent 64-bit stream id per run.
///
/// Equal `(seed, stream)` pairs and equal call sequences give bit-identical
/// draws on every platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    /// Substream `stream` of master seed `seed`.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Standard normal draw (Box-Muller).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// One Algorithm-1 draw `(s, a, s', a')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleTuple {
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
    pub a_next: usize,
}

/// How the state of each actor-critic iteration is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// `s ~ d^{pi_k}` through a geometrically stopped chain.
    #[default]
    Occupation,
    /// `s ~ Uniform(S)`.
    Uniform,
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "occupation" => Ok(Self::Occupation),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::InvalidParameter(format!(
                "unknown sampling mode {other:?} (expected occupation|uniform)"
            ))),
        }
    }
}

/// Inverse-CDF draw from a probability vector, accumulating left to right.
pub fn sample_categorical(weights: &[f64], rng: &mut RngStream) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::InvalidDistribution("empty weight vector".into()));
    }
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidDistribution(format!("weight {i} is {}", weights[i])));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
    }
    Ok(draw_index(weights, rng.uniform()))
}

/// Inverse CDF without validation. Falls back to the last positive weight when
/// rounding leaves `u` above the accumulated mass.
#[inline]
pub(crate) fn draw_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

#[inline]
fn draw_action(pol: &SoftmaxPolicy, s: usize, rng: &mut RngStream) -> usize {
    let u = rng.uniform();
    let probs = pol.probs();
    let mut acc = 0.0;
    let na = probs.ncols();
    for a in 0..na {
        acc += probs[(s, a)];
        if u < acc {
            return a;
        }
    }
    na - 1
}

/// A state drawn from the discounted occupation measure together with the
/// number of transitions the chain took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OccupationDraw {
    pub state: usize,
    pub transitions: usize,
}

/// Draws `s_0 ~ mu`; then, while a `gamma`-coin comes up, continues the chain
/// with `s_{i+1} ~ P^pi(.|s_i)`. The state where the chain stops is returned,
/// whose law is `(1-gamma) sum_n gamma^n mu^T (P^pi)^n = d^pi`.
pub fn sample_occupation_state(mdp: &TabularMdp, pol: &SoftmaxPolicy, rng: &mut RngStream) -> OccupationDraw {
    let gamma = mdp.discount();
    let mut s = draw_index(mdp.initial_dist().as_slice(), rng.uniform());
    let mut transitions = 0;
    while rng.uniform() < gamma {
        let a = draw_action(pol, s, rng);
        s = draw_index(mdp.next_state_probs(s, a), rng.uniform());
        transitions += 1;
    }
    OccupationDraw { state: s, transitions }
}

/// `a ~ pi(.|s)`, `s' ~ P(.|s,a)`, `a' ~ pi(.|s')`.
pub fn sample_tuple(mdp: &TabularMdp, pol: &SoftmaxPolicy, s: usize, rng: &mut RngStream) -> SampleTuple {
    let a = draw_action(pol, s, rng);
    let s_next = draw_index(mdp.next_state_probs(s, a), rng.uniform());
    let a_next = draw_action(pol, s_next, rng);
    SampleTuple { s, a, s_next, a_next }
}

/// Full draw for one actor-critic iteration under the given sampling mode.
pub fn sample_iteration(
    mdp: &TabularMdp,
    pol: &SoftmaxPolicy,
    mode: SamplingMode,
    rng: &mut RngStream,
) -> SampleTuple {
    let s = match mode {
        SamplingMode::Occupation => sample_occupation_state(mdp, pol, rng).state,
        SamplingMode::Uniform => rng.below(mdp.n_states()),
    };
    sample_tuple(mdp, pol, s, rng)
}
