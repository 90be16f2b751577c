//! Scalar recursions: the Lyapunov recursion tracked against its ODE, and the
//! coupled actor / critic / gradient-domination system.

use serde::{Deserialize, Serialize};

use crate::actor_critic::StepSchedule;
use crate::error::{Error, Result};

/// `alpha(k)` solving `d alpha / dk = -alpha^4 / 2` with `alpha(0) = alpha0`:
/// `alpha_k = (1/alpha0^3 + 3k/2)^{-1/3}`.
pub fn ode_alpha(k: f64, alpha0: f64) -> f64 {
    (alpha0.powi(-3) + 1.5 * k).cbrt().recip()
}

/// `u_{k+1} = u_k - c1 eta_k u_k^2 + c2 eta_k^2 / 2` with step sizes
/// synthesized from the ODE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovRecursion {
    pub c1: f64,
    pub c2: f64,
    pub u0: f64,
    /// Starting point of the tracked ODE; at least `c1^{2/3} c2^{-1/3} u0`.
    pub alpha0: f64,
}

impl LyapunovRecursion {
    /// `alpha0 = c1^{2/3} c2^{-1/3} u0`. Requires `u0 > 0`; use
    /// [`with_alpha0`](Self::with_alpha0) for a zero start.
    pub fn new(c1: f64, c2: f64, u0: f64) -> Result<Self> {
        check_positive("c1", c1)?;
        check_positive("c2", c2)?;
        check_positive("u0", u0)?;
        Ok(Self {
            c1,
            c2,
            u0,
            alpha0: scaled(c1, c2, u0),
        })
    }

    /// Same recursion with `c2` raised to `max{c2, 2 c1^2 u0^3}`, which forces
    /// `alpha0 <= 2^{-1/3}`.
    pub fn adjusted(c1: f64, c2: f64, u0: f64) -> Result<Self> {
        check_positive("c1", c1)?;
        check_positive("u0", u0)?;
        Self::new(c1, c2.max(2.0 * c1 * c1 * u0.powi(3)), u0)
    }

    /// Tracks the ODE from an explicit `alpha0 >= c1^{2/3} c2^{-1/3} u0`.
    pub fn with_alpha0(c1: f64, c2: f64, u0: f64, alpha0: f64) -> Result<Self> {
        check_positive("c1", c1)?;
        check_positive("c2", c2)?;
        check_positive("alpha0", alpha0)?;
        if !(u0 >= 0.0 && u0.is_finite()) {
            return Err(Error::InvalidParameter(format!("u0 must be finite and >= 0, got {u0}")));
        }
        let nu0 = scaled(c1, c2, u0);
        if nu0 > alpha0 {
            return Err(Error::InvalidParameter(format!(
                "alpha0 = {alpha0} is below the scaled start {nu0}"
            )));
        }
        Ok(Self { c1, c2, u0, alpha0 })
    }

    /// Whether `alpha0 <= 2^{-1/3}`, the precondition of the tracking bound.
    pub fn certifiable(&self) -> bool {
        2.0 * self.alpha0.powi(3) <= 1.0 + 1e-12
    }

    /// `eta_k = c1^{-1/3} c2^{-1/3} alpha_k^2`.
    pub fn eta(&self, k: usize) -> f64 {
        eta_from_alpha(self, k)
    }

    /// `c1^{-2/3} c2^{1/3} alpha_k`.
    pub fn bound(&self, k: usize) -> f64 {
        (self.c2 / (self.c1 * self.c1)).cbrt() * ode_alpha(k as f64, self.alpha0)
    }
}

fn scaled(c1: f64, c2: f64, u: f64) -> f64 {
    (c1 * c1 / c2).cbrt() * u
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {x}")))
    }
}

pub fn eta_from_alpha(rec: &LyapunovRecursion, k: usize) -> f64 {
    (rec.c1 * rec.c2).cbrt().recip() * ode_alpha(k as f64, rec.alpha0).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationMode {
    /// Iterate from `u0`.
    #[default]
    Equality,
    /// Iterate from the largest start the precondition admits,
    /// `u0 = c1^{-2/3} c2^{1/3} alpha0`.
    WorstCase,
}

/// First index where `u_k` exceeds the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub k: usize,
    pub u_k: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovTrace {
    pub recursion: LyapunovRecursion,
    pub mode: IterationMode,
    pub u: Vec<f64>,
    pub bound: Vec<f64>,
    pub eta: Vec<f64>,
    /// `min_k (bound_k - u_k)`.
    pub min_slack: f64,
    pub counterexample: Option<Counterexample>,
}

impl LyapunovTrace {
    pub fn certified(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Relative allowance for rounding in the certification: at `k = 0` the
/// bound and `u0` coincide up to the cube-root round trip.
pub const ROUNDING: f64 = 1e-12;

/// Iterates the recursion as an equality for `k = 0..=horizon` and checks
/// `u_k <= c1^{-2/3} c2^{1/3} alpha_k (1 + ROUNDING)` at every index.
///
/// Fails with [`Error::AssumptionViolated`] when `alpha0 > 2^{-1/3}`.
pub fn iterate_lyapunov(rec: &LyapunovRecursion, horizon: usize, mode: IterationMode) -> Result<LyapunovTrace> {
    if !rec.certifiable() {
        return Err(Error::AssumptionViolated(format!(
            "alpha0 = {} exceeds 2^(-1/3); raise c2 to at least 2 c1^2 u0^3",
            rec.alpha0
        )));
    }
    let start = match mode {
        IterationMode::Equality => rec.u0,
        IterationMode::WorstCase => rec.bound(0),
    };
    let mut u = Vec::with_capacity(horizon + 1);
    let mut bound = Vec::with_capacity(horizon + 1);
    let mut eta = Vec::with_capacity(horizon + 1);
    let mut min_slack = f64::INFINITY;
    let mut counterexample = None;
    let mut cur = start;
    for k in 0..=horizon {
        let b = rec.bound(k);
        let e = rec.eta(k);
        let slack = b - cur;
        min_slack = min_slack.min(slack);
        if counterexample.is_none() && !(slack >= -ROUNDING * b) {
            counterexample = Some(Counterexample { k, u_k: cur, bound: b });
        }
        u.push(cur);
        bound.push(b);
        eta.push(e);
        cur = cur - rec.c1 * e * cur * cur + 0.5 * rec.c2 * e * e;
    }
    Ok(LyapunovTrace {
        recursion: *rec,
        mode,
        u,
        bound,
        eta,
        min_slack,
        counterexample,
    })
}

/// Coupled system
///
/// ```text
/// a_{k+1}   = a_k - c1 eta y^2 + c2 eta y z + c3 eta^2 z
/// z_{k+1}^2 = z_k^2 - c4 beta z_k^2 + c5 beta^2 + c6 eta^2 + c7 eta y z
/// y_k       = rho a_k / c8
/// ```
///
/// iterated as equalities with `a` and `z^2` clamped at zero. With `c8 = 0`
/// the gradient-domination constraint is void and `y_k = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledRecursion {
    pub c: [f64; 8],
    pub a0: f64,
    pub z0: f64,
    pub schedule: StepSchedule,
    #[serde(default = "unit")]
    pub rho: f64,
}

fn unit() -> f64 {
    1.0
}

impl CoupledRecursion {
    /// `a0 = z0 = 2`, `eta_k = 0.1 (1+k)^{-2/3}`, `beta_k = 10 eta_k`.
    pub fn figure_regime(c: [f64; 8]) -> Self {
        Self {
            c,
            a0: 2.0,
            z0: 2.0,
            schedule: StepSchedule::power_law(0.1, 2.0 / 3.0, 10.0),
            rho: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.c.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidParameter(format!("c{} must be finite and >= 0, got {}", i + 1, self.c[i])));
        }
        if !(self.a0 >= 0.0 && self.a0.is_finite() && self.z0 >= 0.0 && self.z0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "a0 and z0 must be finite and >= 0, got {} and {}",
                self.a0, self.z0
            )));
        }
        if !(self.rho >= 1.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be >= 1, got {}", self.rho)));
        }
        self.schedule.validate()
    }

    fn gradient(&self, a: f64) -> f64 {
        if self.c[7] == 0.0 {
            0.0
        } else {
            self.rho * a / self.c[7]
        }
    }
}

pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub k: usize,
    pub x: f64,
    pub c: [f64; 8],
}

/// Trajectory of the coupled system; `z` holds `sqrt(z^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledTrace {
    pub a: Vec<f64>,
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    /// Set when `x_k` exceeded [`DIVERGENCE_LIMIT`]; the trace stops there.
    pub divergence: Option<Divergence>,
}

impl CoupledTrace {
    /// No increase of `x` after index `from`.
    pub fn lyapunov_nonincreasing_after(&self, from: usize) -> bool {
        self.divergence.is_none() && self.x.iter().skip(from).zip(self.x.iter().skip(from + 1)).all(|(p, n)| n <= p)
    }

    /// At least one increase of `a`.
    pub fn actor_nonmonotone(&self) -> bool {
        self.a.windows(2).any(|w| w[1] > w[0])
    }
}

pub fn iterate_coupled(rec: &CoupledRecursion, horizon: usize) -> Result<CoupledTrace> {
    rec.validate()?;
    let c = &rec.c;
    let mut a = rec.a0;
    let mut z2 = rec.z0 * rec.z0;
    let mut trace = CoupledTrace {
        a: Vec::with_capacity(horizon + 1),
        z: Vec::with_capacity(horizon + 1),
        x: Vec::with_capacity(horizon + 1),
        divergence: None,
    };
    for k in 0..=horizon {
        let x = a + z2;
        trace.a.push(a);
        trace.z.push(z2.sqrt());
        trace.x.push(x);
        if !(x <= DIVERGENCE_LIMIT) {
            trace.divergence = Some(Divergence { k, x, c: rec.c });
            break;
        }
        if k == horizon {
            break;
        }
        let (eta, beta) = rec.schedule.value(k);
        let y = rec.gradient(a);
        let z = z2.sqrt();
        let a_next = a - c[0] * eta * y * y + c[1] * eta * y * z + c[2] * eta * eta * z;
        let z2_next = z2 - c[3] * beta * z2 + c[4] * beta * beta + c[5] * eta * eta + c[6] * eta * y * z;
        a = a_next.max(0.0);
        z2 = z2_next.max(0.0);
    }
    Ok(trace)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let pts: Vec<(f64, f64)> = points.into_iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
