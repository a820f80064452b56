//! Stochastic model of the controller-to-actuator link: independent
//! per-packet delays with loss, and the truncated delay-weight vector the
//! buffer-age chain is built from.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ProbabilityVector, SIMPLEX_TOL};

/// Outcome of one transmission: delivered after a whole number of steps, or
/// never (lost).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayOutcome {
    Delivered(usize),
    Lost,
}

/// Delay distribution of the link. `pmf[i]` is the probability that a packet
/// that is not lost arrives `i` steps after it was sent; losses are drawn
/// independently with `loss_prob`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayModel {
    delay_pmf: Vec<f64>,
    #[serde(default)]
    loss_prob: f64,
}

impl DelayModel {
    pub fn new(delay_pmf: Vec<f64>, loss_prob: f64) -> Result<Self> {
        let model = Self {
            delay_pmf,
            loss_prob,
        };
        model.validate()?;
        Ok(model)
    }

    /// A lossless link that always delivers within the sending step.
    pub fn perfect() -> Self {
        Self {
            delay_pmf: vec![1.0],
            loss_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delay_pmf.is_empty() {
            return Err(Error::InvalidProbability {
                reason: "delay pmf must not be empty".into(),
            });
        }
        if self.delay_pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidProbability {
                reason: "delay pmf entries must be finite and nonnegative".into(),
            });
        }
        let sum: f64 = self.delay_pmf.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidProbability {
                reason: format!("delay pmf sums to {sum}, expected 1"),
            });
        }
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(Error::InvalidProbability {
                reason: format!("loss probability {} outside [0, 1]", self.loss_prob),
            });
        }
        Ok(())
    }

    pub fn pmf(&self) -> &[f64] {
        &self.delay_pmf
    }

    pub fn loss_prob(&self) -> f64 {
        self.loss_prob
    }

    /// Truncated delay weights `q` of length `n_seq + 2`.
    ///
    /// `q_i = (1 − loss)·pmf[i]` for `i ≤ n_seq`; the last entry aggregates
    /// losses and every delay beyond `n_seq`, since such a packet can never
    /// beat a buffered or future packet for the steps it would serve.
    pub fn truncated_weights(&self, n_seq: usize) -> TruncatedDelayWeights {
        let arrival = 1.0 - self.loss_prob;
        let mut q = Vec::with_capacity(n_seq + 2);
        let mut head = 0.0;
        for i in 0..=n_seq {
            let w = arrival * self.delay_pmf.get(i).copied().unwrap_or(0.0);
            head += w;
            q.push(w);
        }
        q.push((1.0 - head).max(0.0));
        TruncatedDelayWeights {
            q: ProbabilityVector::new(nalgebra::DVector::from_vec(q))
                .expect("complement construction keeps the weights on the simplex"),
        }
    }

    /// Samples one transmission outcome by inverse CDF over a single uniform
    /// draw, so each call consumes a fixed amount of generator state.
    pub fn sample_delay<R: Rng + ?Sized>(&self, rng: &mut R) -> DelayOutcome {
        let u: f64 = rng.random();
        if u < self.loss_prob || self.loss_prob >= 1.0 {
            return DelayOutcome::Lost;
        }
        let v = (u - self.loss_prob) / (1.0 - self.loss_prob);
        let mut acc = 0.0;
        let mut last_support = 0;
        for (i, p) in self.delay_pmf.iter().enumerate() {
            if *p > 0.0 {
                last_support = i;
            }
            acc += p;
            if v < acc {
                return DelayOutcome::Delivered(i);
            }
        }
        // Roundoff at the top of the CDF lands on the last supported delay.
        DelayOutcome::Delivered(last_support)
    }
}

/// Delay weights truncated at the sequence horizon; see
/// [`DelayModel::truncated_weights`].
#[derive(Debug, Clone)]
pub struct TruncatedDelayWeights {
    q: ProbabilityVector,
}

impl TruncatedDelayWeights {
    /// Wraps an explicit weight vector of length `n_seq + 2`.
    pub fn from_weights(q: ProbabilityVector) -> Result<Self> {
        if q.len() < 2 {
            return Err(Error::InvalidProbability {
                reason: "truncated weights need at least two entries".into(),
            });
        }
        Ok(Self { q })
    }

    pub fn weights(&self) -> &ProbabilityVector {
        &self.q
    }

    pub fn n_seq(&self) -> usize {
        self.q.len() - 2
    }

    pub fn get(&self, i: usize) -> f64 {
        self.q.get(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn truncated_weights_perfect_network() {
        let model = DelayModel::new(vec![1.0], 0.0).unwrap();
        let q = model.truncated_weights(1);
        assert_eq!(q.weights().as_vector().as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn truncated_weights_hand_arithmetic() {
        let model = DelayModel::new(vec![0.6, 0.4], 0.5).unwrap();
        let q = model.truncated_weights(1);
        assert_relative_eq!(q.get(0), 0.3, epsilon = 1e-15);
        assert_relative_eq!(q.get(1), 0.2, epsilon = 1e-15);
        assert_relative_eq!(q.get(2), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn truncated_weights_all_mass_in_tail() {
        let model = DelayModel::new(vec![0.0, 0.0, 1.0], 0.0).unwrap();
        let q = model.truncated_weights(1);
        assert_eq!(q.weights().as_vector().as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn sample_delay_perfect_network_is_zero() {
        let model = DelayModel::new(vec![1.0], 0.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(model.sample_delay(&mut rng), DelayOutcome::Delivered(0));
        }
    }

    #[test]
    fn sample_delay_certain_loss() {
        let model = DelayModel::new(vec![1.0], 1.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(model.sample_delay(&mut rng), DelayOutcome::Lost);
        }
    }

    #[test]
    fn sample_delay_empirical_frequency() {
        let model = DelayModel::new(vec![0.5, 0.5], 0.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let draws = 100_000;
        let zeros = (0..draws)
            .filter(|_| model.sample_delay(&mut rng) == DelayOutcome::Delivered(0))
            .count();
        let freq = zeros as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 0.005, "frequency {freq}");
    }

    #[test]
    fn sample_delay_deterministic_given_seed() {
        let model = DelayModel::new(vec![0.2, 0.5, 0.3], 0.1).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            (0..32)
                .map(|_| model.sample_delay(&mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
    }

    #[test]
    fn rejects_bad_pmfs() {
        assert!(DelayModel::new(vec![], 0.0).is_err());
        assert!(DelayModel::new(vec![0.5, 0.4], 0.0).is_err());
        assert!(DelayModel::new(vec![1.0], 1.5).is_err());
        assert!(DelayModel::new(vec![-0.5, 1.5], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn truncated_weights_always_sum_to_one(
            raw in proptest::collection::vec(0.0f64..1.0, 1..6),
            loss in 0.0f64..1.0,
            n_seq in 1usize..5,
        ) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let pmf: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let model = DelayModel::new(pmf, loss).unwrap();
            let q = model.truncated_weights(n_seq);
            let sum: f64 = q.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert_eq!(q.weights().len(), n_seq + 2);
        }

        #[test]
        fn tail_weight_grows_with_loss(
            raw in proptest::collection::vec(0.0f64..1.0, 1..6),
            loss_low in 0.0f64..1.0,
            loss_high in 0.0f64..1.0,
            n_seq in 1usize..5,
        ) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let pmf: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let (lo, hi) = if loss_low <= loss_high {
                (loss_low, loss_high)
            } else {
                (loss_high, loss_low)
            };
            let q_lo = DelayModel::new(pmf.clone(), lo).unwrap().truncated_weights(n_seq);
            let q_hi = DelayModel::new(pmf, hi).unwrap().truncated_weights(n_seq);
            prop_assert!(q_hi.get(n_seq + 1) + 1e-12 >= q_lo.get(n_seq + 1));
        }
    }
}
