//! Softmax policy parameterization `pi(a|s) = exp(theta(s,a)) / sum_b exp(theta(s,b))`.

use crate::error::{Error, Result};
use crate::Table;

/// Row-wise softmax of a parameter table.
///
/// Each row is shifted by its maximum before exponentiation, so the result is
/// exactly invariant to per-state constant offsets up to rounding.
pub fn softmax_probs(theta: &Table) -> Result<Table> {
    if let Some(bad) = theta.iter().position(|t| !t.is_finite()) {
        let rows = theta.nrows();
        return Err(Error::InvalidParameter(format!(
            "non-finite theta entry at (s={}, a={})",
            bad % rows,
            bad / rows
        )));
    }
    let mut probs = theta.clone();
    for mut row in probs.row_iter_mut() {
        let max = row.max();
        row.apply(|x| *x = (*x - max).exp());
        let z = row.sum();
        row /= z;
    }
    Ok(probs)
}

/// Parameter table together with its cached action probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    theta: Table,
    probs: Table,
}

impl SoftmaxPolicy {
    pub fn new(theta: Table) -> Result<Self> {
        let probs = softmax_probs(&theta)?;
        Ok(Self { theta, probs })
    }

    /// The uniform policy, `theta = 0`.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self::new(Table::zeros(n_states, n_actions)).expect("zero table is finite")
    }

    pub fn theta(&self) -> &Table {
        &self.theta
    }

    pub fn probs(&self) -> &Table {
        &self.probs
    }

    pub fn n_states(&self) -> usize {
        self.theta.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.theta.ncols()
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[(s, a)]
    }

    /// Adds `delta` to a single logit and refreshes that state's probabilities.
    pub fn bump(&mut self, s: usize, a: usize, delta: f64) -> Result<()> {
        let updated = self.theta[(s, a)] + delta;
        if !updated.is_finite() {
            return Err(Error::InvalidParameter(format!("theta({s},{a}) became non-finite")));
        }
        self.theta[(s, a)] = updated;
        self.refresh_row(s);
        Ok(())
    }

    fn refresh_row(&mut self, s: usize) {
        let row = self.theta.row(s);
        let max = row.max();
        let mut z = 0.0;
        for a in 0..self.theta.ncols() {
            let e = (self.theta[(s, a)] - max).exp();
            self.probs[(s, a)] = e;
            z += e;
        }
        for a in 0..self.theta.ncols() {
            self.probs[(s, a)] /= z;
        }
    }

    /// Replaces the whole parameter table.
    pub fn set_theta(&mut self, theta: Table) -> Result<()> {
        self.probs = softmax_probs(&theta)?;
        self.theta = theta;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_logits_give_uniform_rows() {
        let p = softmax_probs(&Table::zeros(2, 3)).unwrap();
        for v in p.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn log_two_logit_gives_two_thirds() {
        let p = softmax_probs(&Table::from_row_slice(1, 2, &[2f64.ln(), 0.0])).unwrap();
        assert!((p[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[(0, 1)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn shift_keeps_two_thirds() {
        for c in [-700.0, -3.0, 0.5, 40.0, 900.0] {
            let p = softmax_probs(&Table::from_row_slice(1, 2, &[c + 2f64.ln(), c])).unwrap();
            assert!((p[(0, 0)] - 2.0 / 3.0).abs() < 1e-12, "c = {c}");
        }
    }

    #[test]
    fn non_finite_theta_is_rejected() {
        let mut t = Table::zeros(2, 2);
        t[(1, 0)] = f64::NAN;
        match softmax_probs(&t) {
            Err(Error::InvalidParameter(msg)) => assert!(msg.contains("s=1, a=0"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bump_matches_full_recompute() {
        let mut pol = SoftmaxPolicy::new(Table::from_row_slice(2, 3, &[0.1, -0.4, 2.0, 1.0, 1.0, -3.0])).unwrap();
        pol.bump(1, 2, 0.75).unwrap();
        let fresh = softmax_probs(pol.theta()).unwrap();
        assert!((pol.probs() - fresh).amax() < 1e-15);
    }

    proptest! {
        #[test]
        fn rows_are_stochastic_and_shift_invariant(
            vals in proptest::collection::vec(-50.0f64..50.0, 12),
            shift in proptest::collection::vec(-100.0f64..100.0, 4),
        ) {
            let theta = Table::from_row_slice(4, 3, &vals);
            let p = softmax_probs(&theta).unwrap();
            for s in 0..4 {
                let row_sum: f64 = p.row(s).sum();
                prop_assert!((row_sum - 1.0).abs() < 1e-12);
                prop_assert!(p.row(s).iter().all(|&x| x > 0.0));
            }
            let mut shifted = theta.clone();
            for s in 0..4 {
                for a in 0..3 {
                    shifted[(s, a)] += shift[s];
                }
            }
            let q = softmax_probs(&shifted).unwrap();
            prop_assert!((p - q).amax() < 1e-12);
        }
    }
}
