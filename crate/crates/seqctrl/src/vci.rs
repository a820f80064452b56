//! Sequence generation with virtual control inputs.
//!
//! The controller keeps the tails of previously sent packets, models which of
//! those inputs the actuator will actually apply as a discrete distribution
//! over the buffer age, and rolls the plant expectation forward under that
//! distribution to fill each packet. The age distribution comes either from
//! the stationary solution of the buffer-age Markov chain or from a Wonham
//! filter driven by state measurements.

use nalgebra::{DMatrix, DVector};

use crate::actuator::Packet;
use crate::error::{Error, Result};
use crate::network::TruncatedDelayWeights;
use crate::numerics::{stationary_distribution, ProbabilityVector};
use crate::plant::PlantModel;

/// Row-stochastic transition matrix of the buffer-age chain on
/// `{0, …, n_seq + 1}`.
///
/// The age can grow by at most one per step, so the upper triangle beyond the
/// first superdiagonal is zero; every entry at or below the diagonal in
/// column `j` equals the truncated delay weight `q_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    p: DMatrix<f64>,
}

impl TransitionMatrix {
    /// Builds the age-chain transition matrix from truncated delay weights.
    pub fn from_delay_weights(q: &TruncatedDelayWeights) -> Self {
        let order = q.weights().len();
        let mut p = DMatrix::zeros(order, order);
        let mut cumulative = 0.0;
        for i in 0..order {
            for j in 0..=i {
                p[(i, j)] = q.get(j);
            }
            if i + 1 < order {
                cumulative += q.get(i);
                p[(i, i + 1)] = (1.0 - cumulative).max(0.0);
            }
        }
        Self { p }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Number of age states, `n_seq + 2`.
    pub fn order(&self) -> usize {
        self.p.nrows()
    }

    pub fn n_seq(&self) -> usize {
        self.order() - 2
    }

    /// Stationary age distribution `α_∞` with `Pᵀα_∞ = α_∞`.
    pub fn stationary(&self) -> Result<ProbabilityVector> {
        stationary_distribution(&self.p)
    }
}

/// Age-probability vector used when predicting `m` steps ahead of the
/// measurement: length `n_seq + 2 − offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    alpha: ProbabilityVector,
    offset: usize,
    n_seq: usize,
}

impl WeightVector {
    pub fn new(alpha: ProbabilityVector, offset: usize, n_seq: usize) -> Result<Self> {
        let expected = n_seq + 2 - offset;
        if offset > n_seq || alpha.len() != expected {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "weight vector at offset {offset} must have {expected} entries, got {}",
                    alpha.len()
                ),
            });
        }
        Ok(Self {
            alpha,
            offset,
            n_seq,
        })
    }

    pub fn alpha(&self) -> &ProbabilityVector {
        &self.alpha
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn n_seq(&self) -> usize {
        self.n_seq
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Predicts the age weights `m` steps ahead: applies `(Pᵐ)ᵀ`, keeps the first
/// `n_seq + 2 − m` entries and renormalizes the kept mass to one.
pub fn predict_weights(
    transition: &TransitionMatrix,
    alpha: &WeightVector,
    m: usize,
) -> Result<WeightVector> {
    let n_seq = transition.n_seq();
    if alpha.offset() != 0 || alpha.n_seq() != n_seq {
        return Err(Error::DimensionMismatch {
            context: "prediction starts from a full-length weight vector".into(),
        });
    }
    if m > n_seq {
        return Err(Error::InvalidArgument {
            context: format!("prediction horizon {m} exceeds sequence length {n_seq}"),
        });
    }
    if m == 0 {
        return Ok(alpha.clone());
    }
    let p_t = transition.matrix().transpose();
    let mut v = alpha.alpha().as_vector().clone();
    for _ in 0..m {
        v = &p_t * v;
    }
    let kept = v.rows(0, n_seq + 2 - m).into_owned();
    let mass = kept.sum();
    if mass <= 0.0 {
        return Err(Error::DegenerateNormalizer);
    }
    WeightVector::new(ProbabilityVector::new(kept / mass)?, m, n_seq)
}

/// One measurement update of the age belief.
///
/// `candidates[i]` must be the input that was applicable at the *previous*
/// step under age `i` (the entry the actuator would have applied had the
/// buffered packet been `i` steps old), with the default input last. The
/// belief is reweighted by the Gaussian likelihood of the observed state
/// transition under each candidate, normalized by the sum of the reweighted
/// entries, and then pushed one step through the age chain to describe the
/// current step.
pub fn wonham_update(
    belief: &WeightVector,
    x_now: &DVector<f64>,
    x_prev: &DVector<f64>,
    candidates: &[DVector<f64>],
    plant: &PlantModel,
    transition: &TransitionMatrix,
) -> Result<WeightVector> {
    let n_seq = transition.n_seq();
    if belief.offset() != 0 || belief.n_seq() != n_seq {
        return Err(Error::DimensionMismatch {
            context: "belief must be a full-length weight vector".into(),
        });
    }
    if candidates.len() != n_seq + 2 {
        return Err(Error::DimensionMismatch {
            context: format!(
                "expected {} input candidates, got {}",
                n_seq + 2,
                candidates.len()
            ),
        });
    }
    if plant.noise_is_zero() {
        return Err(Error::DegenerateNoise);
    }

    let predicted_mean = plant.a() * x_prev;
    let mut posterior = belief.alpha().as_vector().clone();
    for (weight, candidate) in posterior.iter_mut().zip(candidates.iter()) {
        let residual = x_now - &predicted_mean - plant.b() * candidate;
        *weight *= plant.noise_likelihood(&residual)?;
    }
    let mass = posterior.sum();
    let posterior = if mass > 0.0 && mass.is_finite() {
        posterior / mass
    } else {
        // All likelihoods underflowed; fall back to the prediction-only
        // update instead of dividing by (near) zero.
        belief.alpha().as_vector().clone()
    };

    // One-step prediction through the chain. At full length nothing is
    // truncated and the result already sums to one.
    let next = transition.matrix().transpose() * posterior;
    let sum = next.sum();
    WeightVector::new(ProbabilityVector::new(next / sum)?, 0, n_seq)
}

/// Expected value of the virtual control input: the weighted mix of the
/// planned candidates with the default input carrying the tail weight.
pub fn expected_virtual_input(
    alpha: &WeightVector,
    candidates: &[DVector<f64>],
    default_input: &DVector<f64>,
) -> Result<DVector<f64>> {
    if alpha.len() != candidates.len() + 1 {
        return Err(Error::DimensionMismatch {
            context: format!(
                "weight vector of length {} needs {} candidates, got {}",
                alpha.len(),
                alpha.len() - 1,
                candidates.len()
            ),
        });
    }
    let mut expected = default_input * alpha.alpha().get(candidates.len());
    for (i, candidate) in candidates.iter().enumerate() {
        expected += candidate * alpha.alpha().get(i);
    }
    Ok(expected)
}

/// Flat layout of the stored packet tails `η`.
///
/// Block `j` (for `j = 1..=n_seq`) holds the still-applicable entries of the
/// packet sent `j` steps ago: `n_seq + 1 − j` inputs, ordered by target step.
/// Entry `t` of block `j` is the input planned for `t` steps after the
/// current one.
#[derive(Debug, Clone, Copy)]
pub struct EtaLayout {
    input_dim: usize,
    n_seq: usize,
}

impl EtaLayout {
    pub fn new(input_dim: usize, n_seq: usize) -> Self {
        Self { input_dim, n_seq }
    }

    /// Total length `n·N(N+1)/2`.
    pub fn dim(&self) -> usize {
        self.input_dim * self.n_seq * (self.n_seq + 1) / 2
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_seq(&self) -> usize {
        self.n_seq
    }

    /// Entries in block `j`.
    pub fn block_len(&self, j: usize) -> usize {
        debug_assert!((1..=self.n_seq).contains(&j));
        self.n_seq + 1 - j
    }

    /// Scalar offset of block `j`.
    pub fn block_offset(&self, j: usize) -> usize {
        debug_assert!((1..=self.n_seq).contains(&j));
        self.input_dim * ((j - 1) * (2 * self.n_seq + 2 - j)) / 2
    }

    /// Scalar offset of entry `t` within block `j`.
    pub fn entry_offset(&self, j: usize, t: usize) -> usize {
        debug_assert!(t < self.block_len(j));
        self.block_offset(j) + t * self.input_dim
    }
}

/// Source of the age weights used when generating sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// Time-invariant stationary solution of the age chain.
    Stationary,
    /// Wonham-filtered belief updated from state measurements.
    Filtered,
}

/// Sequence-generating controller built around a given state-feedback gain.
#[derive(Debug, Clone)]
pub struct VciController {
    plant: PlantModel,
    gain: DMatrix<f64>,
    n_seq: usize,
    default_input: DVector<f64>,
    transition: TransitionMatrix,
    alpha_inf: ProbabilityVector,
    /// Stationary weights predicted per offset `0..n_seq`, cached because
    /// they are time-invariant.
    stationary_weights: Vec<WeightVector>,
    mode: WeightMode,
    layout: EtaLayout,
    eta: DVector<f64>,
    belief: WeightVector,
    prev_state: Option<DVector<f64>>,
    prev_candidates: Option<Vec<DVector<f64>>>,
}

impl VciController {
    pub fn new(
        plant: &PlantModel,
        gain: DMatrix<f64>,
        n_seq: usize,
        default_input: DVector<f64>,
        transition: TransitionMatrix,
        mode: WeightMode,
    ) -> Result<Self> {
        if gain.nrows() != plant.input_dim() || gain.ncols() != plant.state_dim() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "gain must be {}x{}, got {}x{}",
                    plant.input_dim(),
                    plant.state_dim(),
                    gain.nrows(),
                    gain.ncols()
                ),
            });
        }
        if default_input.len() != plant.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "default input dimension must match the plant input".into(),
            });
        }
        if transition.n_seq() != n_seq {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "transition matrix covers n_seq {}, controller uses {}",
                    transition.n_seq(),
                    n_seq
                ),
            });
        }
        let alpha_inf = transition.stationary()?;
        let base = WeightVector::new(alpha_inf.clone(), 0, n_seq)?;
        let stationary_weights = (0..n_seq)
            .map(|offset| predict_weights(&transition, &base, offset))
            .collect::<Result<Vec<_>>>()?;

        // Before anything was sent the buffer is empty: the age at step 0 is
        // either 0 (the first packet arrives within its own step) or
        // "exhausted".
        let order = n_seq + 2;
        let arrive_now = transition.matrix()[(order - 1, 0)];
        let mut initial = DVector::zeros(order);
        initial[0] = arrive_now;
        initial[order - 1] = 1.0 - arrive_now;
        let belief = WeightVector::new(ProbabilityVector::new(initial)?, 0, n_seq)?;

        let layout = EtaLayout::new(plant.input_dim(), n_seq);
        Ok(Self {
            plant: plant.clone(),
            gain,
            n_seq,
            default_input,
            transition,
            alpha_inf,
            stationary_weights,
            mode,
            eta: DVector::zeros(layout.dim()),
            belief,
            prev_state: None,
            prev_candidates: None,
            layout,
        })
    }

    pub fn n_seq(&self) -> usize {
        self.n_seq
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn transition(&self) -> &TransitionMatrix {
        &self.transition
    }

    pub fn stationary_alpha(&self) -> &ProbabilityVector {
        &self.alpha_inf
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    pub fn layout(&self) -> EtaLayout {
        self.layout
    }

    /// Current belief over the buffer age (meaningful in filtered mode).
    pub fn belief(&self) -> &WeightVector {
        &self.belief
    }

    pub fn eta(&self) -> &DVector<f64> {
        &self.eta
    }

    /// Overwrites the stored packet tails; used when probing the controller
    /// as a linear map.
    pub fn set_eta(&mut self, eta: DVector<f64>) -> Result<()> {
        if eta.len() != self.layout.dim() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "eta must have length {}, got {}",
                    self.layout.dim(),
                    eta.len()
                ),
            });
        }
        self.eta = eta;
        Ok(())
    }

    fn eta_entry(&self, eta: &DVector<f64>, block: usize, t: usize) -> DVector<f64> {
        eta.rows(self.layout.entry_offset(block, t), self.layout.input_dim())
            .into_owned()
    }

    /// Pure sequence evaluation: computes the packet entries for state `x`
    /// and stored tails `eta` under the given per-offset weights, without
    /// touching controller state.
    fn plan(
        &self,
        x: &DVector<f64>,
        eta: &DVector<f64>,
        weights: &[WeightVector],
    ) -> Result<Vec<DVector<f64>>> {
        let mut entries = Vec::with_capacity(self.n_seq + 1);
        entries.push(&self.gain * x);
        let mut expected_state = x.clone();
        for m in 1..=self.n_seq {
            let offset = m - 1;
            let weight = &weights[offset];
            let mut candidates = Vec::with_capacity(self.n_seq - offset + 1);
            // The entry just planned participates at index 0; older packets
            // contribute their entries for the same target step.
            candidates.push(entries[offset].clone());
            for block in 1..=(self.n_seq - offset) {
                candidates.push(self.eta_entry(eta, block, offset));
            }
            let virtual_input = expected_virtual_input(weight, &candidates, &self.default_input)?;
            expected_state = self.plant.a() * expected_state + self.plant.b() * virtual_input;
            entries.push(&self.gain * &expected_state);
        }
        Ok(entries)
    }

    fn weights_for_generation(&self) -> Result<Vec<WeightVector>> {
        match self.mode {
            WeightMode::Stationary => Ok(self.stationary_weights.clone()),
            WeightMode::Filtered => (0..self.n_seq)
                .map(|offset| predict_weights(&self.transition, &self.belief, offset))
                .collect(),
        }
    }

    /// Inputs that were applicable at the step that produced the newest
    /// measurement, ordered by age, with the default input last.
    fn applicable_now(&self, newest_entry: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut candidates = Vec::with_capacity(self.n_seq + 2);
        candidates.push(newest_entry.clone());
        for block in 1..=self.n_seq {
            candidates.push(self.eta_entry(&self.eta, block, 0));
        }
        candidates.push(self.default_input.clone());
        candidates
    }

    /// Generates the packet for step `k` from the measured state and commits
    /// the bookkeeping for the next step.
    pub fn step(&mut self, k: u64, x: &DVector<f64>) -> Result<Packet> {
        if x.len() != self.plant.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "measured state dimension must match the plant".into(),
            });
        }
        if self.mode == WeightMode::Filtered {
            if let (Some(prev_state), Some(prev_candidates)) =
                (self.prev_state.as_ref(), self.prev_candidates.as_ref())
            {
                self.belief = wonham_update(
                    &self.belief,
                    x,
                    prev_state,
                    prev_candidates,
                    &self.plant,
                    &self.transition,
                )?;
            }
        }

        let weights = self.weights_for_generation()?;
        let entries = self.plan(x, &self.eta, &weights)?;

        if self.mode == WeightMode::Filtered {
            self.prev_candidates = Some(self.applicable_now(&entries[0]));
            self.prev_state = Some(x.clone());
        }

        // Shift the tails: the new packet contributes its future entries as
        // block 1, each older block loses its first entry and moves down.
        let mut next_eta = DVector::zeros(self.layout.dim());
        for t in 0..self.n_seq {
            next_eta
                .rows_mut(self.layout.entry_offset(1, t), self.layout.input_dim())
                .copy_from(&entries[t + 1]);
        }
        for block in 1..self.n_seq {
            for t in 0..self.layout.block_len(block + 1) {
                let source = self.eta_entry(&self.eta, block, t + 1);
                next_eta
                    .rows_mut(
                        self.layout.entry_offset(block + 1, t),
                        self.layout.input_dim(),
                    )
                    .copy_from(&source);
            }
        }
        self.eta = next_eta;

        Packet::new(k, entries)
    }

    /// Evaluates the sequence for an arbitrary augmented state `[x; η]`
    /// without committing any bookkeeping. Stationary weights only.
    pub fn evaluate(&self, x: &DVector<f64>, eta: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        if eta.len() != self.layout.dim() {
            return Err(Error::DimensionMismatch {
                context: "eta length must match the layout".into(),
            });
        }
        self.plan(x, eta, &self.stationary_weights)
    }
}

/// Time-invariant matrix form of the stationary controller: maps the
/// augmented state `ψ = [x; η]` to the stacked packet entries.
#[derive(Debug, Clone)]
pub struct AugmentedGain {
    l_tilde: DMatrix<f64>,
    state_dim: usize,
    input_dim: usize,
    n_seq: usize,
}

impl AugmentedGain {
    /// Builds the matrix column by column by probing the stationary
    /// controller on unit basis vectors of `ψ`. Requires a zero default
    /// input, otherwise the map has an affine part and is not a gain.
    pub fn build(
        plant: &PlantModel,
        gain: DMatrix<f64>,
        transition: TransitionMatrix,
        n_seq: usize,
    ) -> Result<Self> {
        let default_input = DVector::zeros(plant.input_dim());
        let controller = VciController::new(
            plant,
            gain,
            n_seq,
            default_input,
            transition,
            WeightMode::Stationary,
        )?;
        Self::from_controller(&controller)
    }

    /// Probes an existing stationary controller. The controller's default
    /// input must be zero.
    pub fn from_controller(controller: &VciController) -> Result<Self> {
        if controller.default_input.iter().any(|&v| v != 0.0) {
            return Err(Error::NonzeroDefaultInput);
        }
        let state_dim = controller.plant.state_dim();
        let input_dim = controller.plant.input_dim();
        let n_seq = controller.n_seq;
        let eta_dim = controller.layout.dim();
        let rows = (n_seq + 1) * input_dim;
        let cols = state_dim + eta_dim;
        let mut l_tilde = DMatrix::zeros(rows, cols);
        for col in 0..cols {
            let mut psi = DVector::zeros(cols);
            psi[col] = 1.0;
            let x = psi.rows(0, state_dim).into_owned();
            let eta = psi.rows(state_dim, eta_dim).into_owned();
            let entries = controller.evaluate(&x, &eta)?;
            for (m, entry) in entries.iter().enumerate() {
                l_tilde
                    .view_mut((m * input_dim, col), (input_dim, 1))
                    .copy_from(entry);
            }
        }
        Ok(Self {
            l_tilde,
            state_dim,
            input_dim,
            n_seq,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l_tilde
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_seq(&self) -> usize {
        self.n_seq
    }

    /// Stacked packet entries for the augmented state `ψ`.
    pub fn apply(&self, psi: &DVector<f64>) -> Result<DVector<f64>> {
        if psi.len() != self.l_tilde.ncols() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "augmented state must have length {}, got {}",
                    self.l_tilde.ncols(),
                    psi.len()
                ),
            });
        }
        Ok(&self.l_tilde * psi)
    }
}
