//! Closed-loop episode simulation and Monte Carlo batches.
//!
//! One episode wires plant, network, actuator and a controller together for a
//! fixed horizon. Per step: the controller measures the state and sends its
//! packet, due packets (including a zero-delay send from this very step) are
//! delivered, the actuator picks the applied input, and the plant advances
//! with fresh process noise.
//!
//! Reproducibility contract: run `r` of a batch derives its seed as
//! `master_seed ^ r` and owns two independent generator streams, one for
//! process noise and one for packet delays. Different controller kinds under
//! the same seed therefore consume identical noise and delay realizations,
//! which makes paired cost comparisons meaningful.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::actuator::{BufferState, Packet};
use crate::error::{Error, Result};
use crate::network::{DelayModel, DelayOutcome};
use crate::plant::PlantModel;
use crate::vci::{TransitionMatrix, VciController, WeightMode};

const NOISE_STREAM: u64 = 0;
const DELAY_STREAM: u64 = 1;

/// Which control law closes the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControllerKind {
    /// Transparent link, plain state feedback. The ground-truth baseline.
    #[serde(rename = "cs")]
    Cs,
    /// Open-loop rollout sequences sent over the network, ignoring what was
    /// sent before.
    #[serde(rename = "ol")]
    OlNcs,
    /// Virtual-control-input sequences with stationary age weights.
    #[serde(rename = "vci")]
    VciStationary,
    /// Virtual-control-input sequences with Wonham-filtered age weights.
    #[serde(rename = "vci-filtered")]
    VciFiltered,
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ControllerKind::Cs => "cs",
            ControllerKind::OlNcs => "ol",
            ControllerKind::VciStationary => "vci",
            ControllerKind::VciFiltered => "vci-filtered",
        };
        f.write_str(name)
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cs" => Ok(ControllerKind::Cs),
            "ol" => Ok(ControllerKind::OlNcs),
            "vci" => Ok(ControllerKind::VciStationary),
            "vci-filtered" => Ok(ControllerKind::VciFiltered),
            other => Err(Error::Config(format!(
                "unknown controller kind '{other}', expected cs|ol|vci|vci-filtered"
            ))),
        }
    }
}

/// Everything one simulated episode needs.
#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    pub plant: PlantModel,
    pub delay: DelayModel,
    pub controller: ControllerKind,
    pub n_seq: usize,
    pub default_input: DVector<f64>,
    pub horizon: usize,
    pub initial_state: DVector<f64>,
    pub cost_q: DMatrix<f64>,
    pub cost_r: DMatrix<f64>,
    /// State-feedback gain under `u = L·x`; typically the LQR design for
    /// `(cost_q, cost_r)`.
    pub gain: DMatrix<f64>,
    pub master_seed: u64,
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        let s = self.plant.state_dim();
        let n = self.plant.input_dim();
        if self.horizon == 0 {
            return Err(Error::InvalidArgument {
                context: "horizon must be at least one step".into(),
            });
        }
        if self.initial_state.len() != s {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "initial state has {} entries, plant expects {s}",
                    self.initial_state.len()
                ),
            });
        }
        if self.default_input.len() != n {
            return Err(Error::DimensionMismatch {
                context: "default input dimension must match the plant input".into(),
            });
        }
        if self.gain.nrows() != n || self.gain.ncols() != s {
            return Err(Error::DimensionMismatch {
                context: format!("gain must be {n}x{s}"),
            });
        }
        if self.cost_q.nrows() != s || self.cost_q.ncols() != s {
            return Err(Error::DimensionMismatch {
                context: "cost weight Q must be state-dimensional".into(),
            });
        }
        if self.cost_r.nrows() != n || self.cost_r.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "cost weight R must be input-dimensional".into(),
            });
        }
        self.delay.validate()
    }

    fn with_controller(&self, controller: ControllerKind) -> Self {
        let mut cfg = self.clone();
        cfg.controller = controller;
        cfg
    }
}

/// Trajectories and cost of one episode.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub ages: Vec<usize>,
    pub cost: f64,
}

/// Open-loop rollout packet: entry `m` is `L(A + BL)^m·x`, ignoring anything
/// sent before.
pub fn ol_sequence(
    gain: &DMatrix<f64>,
    plant: &PlantModel,
    x: &DVector<f64>,
    n_seq: usize,
    timestamp: u64,
) -> Result<Packet> {
    if gain.nrows() != plant.input_dim() || gain.ncols() != plant.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "gain does not match the plant".into(),
        });
    }
    let mut entries = Vec::with_capacity(n_seq + 1);
    let mut predicted = x.clone();
    let mut input = gain * &predicted;
    entries.push(input.clone());
    for _ in 0..n_seq {
        predicted = plant.a() * &predicted + plant.b() * &input;
        input = gain * &predicted;
        entries.push(input.clone());
    }
    Packet::new(timestamp, entries)
}

/// Accumulated quadratic cost `Σ xᵀQx + uᵀRu` over the applied inputs.
pub fn quadratic_cost(result: &EpisodeResult, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<f64> {
    if result.states.len() != result.inputs.len() {
        return Err(Error::DimensionMismatch {
            context: "state and input trajectories must have equal length".into(),
        });
    }
    let mut cost = 0.0;
    for (x, u) in result.states.iter().zip(result.inputs.iter()) {
        cost += step_cost(x, u, q, r);
    }
    Ok(cost)
}

/// Quadratic cost of one step.
pub fn step_cost(x: &DVector<f64>, u: &DVector<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
    (x.transpose() * q * x)[(0, 0)] + (u.transpose() * r * u)[(0, 0)]
}

/// Runs one episode with the seed from the config.
pub fn run_episode(cfg: &EpisodeConfig) -> Result<EpisodeResult> {
    run_episode_with_seed(cfg, cfg.master_seed)
}

/// Runs one episode with an explicit seed (used by Monte Carlo batches).
pub fn run_episode_with_seed(cfg: &EpisodeConfig, seed: u64) -> Result<EpisodeResult> {
    cfg.validate()?;
    let mut noise_rng = ChaCha12Rng::seed_from_u64(seed);
    noise_rng.set_stream(NOISE_STREAM);
    let mut delay_rng = ChaCha12Rng::seed_from_u64(seed);
    delay_rng.set_stream(DELAY_STREAM);

    let mut vci = match cfg.controller {
        ControllerKind::VciStationary | ControllerKind::VciFiltered => {
            let mode = if cfg.controller == ControllerKind::VciFiltered {
                WeightMode::Filtered
            } else {
                WeightMode::Stationary
            };
            let transition =
                TransitionMatrix::from_delay_weights(&cfg.delay.truncated_weights(cfg.n_seq));
            Some(VciController::new(
                &cfg.plant,
                cfg.gain.clone(),
                cfg.n_seq,
                cfg.default_input.clone(),
                transition,
                mode,
            )?)
        }
        _ => None,
    };

    let mut buffer = BufferState::new(cfg.default_input.clone(), cfg.n_seq);
    let mut in_flight: Vec<(u64, Packet)> = Vec::new();
    let mut x = cfg.initial_state.clone();

    let mut states = Vec::with_capacity(cfg.horizon);
    let mut inputs = Vec::with_capacity(cfg.horizon);
    let mut ages = Vec::with_capacity(cfg.horizon);

    for k in 0..cfg.horizon as u64 {
        states.push(x.clone());

        // Controller measures and sends.
        let direct_input = match cfg.controller {
            ControllerKind::Cs => Some(&cfg.gain * &x),
            ControllerKind::OlNcs => {
                let packet = ol_sequence(&cfg.gain, &cfg.plant, &x, cfg.n_seq, k)?;
                send(&cfg.delay, &mut delay_rng, &mut in_flight, k, packet);
                None
            }
            ControllerKind::VciStationary | ControllerKind::VciFiltered => {
                let packet = vci.as_mut().expect("constructed above").step(k, &x)?;
                send(&cfg.delay, &mut delay_rng, &mut in_flight, k, packet);
                None
            }
        };

        // Deliver everything due this step; a zero-delay packet from this
        // very step is usable right away.
        let mut idx = 0;
        while idx < in_flight.len() {
            if in_flight[idx].0 <= k {
                let (_, packet) = in_flight.swap_remove(idx);
                buffer.offer_packet(packet)?;
            } else {
                idx += 1;
            }
        }

        // Actuate and advance the plant.
        let (u, age) = match direct_input {
            Some(u) => (u, 0),
            None => buffer.actuate(k)?,
        };
        let w = cfg.plant.sample_noise(&mut noise_rng);
        x = cfg.plant.step(&x, &u, &w)?;
        inputs.push(u);
        ages.push(age);
    }

    let mut result = EpisodeResult {
        states,
        inputs,
        ages,
        cost: 0.0,
    };
    result.cost = quadratic_cost(&result, &cfg.cost_q, &cfg.cost_r)?;
    Ok(result)
}

fn send(
    delay: &DelayModel,
    rng: &mut ChaCha12Rng,
    in_flight: &mut Vec<(u64, Packet)>,
    k: u64,
    packet: Packet,
) {
    match delay.sample_delay(rng) {
        DelayOutcome::Delivered(steps) => in_flight.push((k + steps as u64, packet)),
        DelayOutcome::Lost => {}
    }
}

/// Mean and standard error of per-run costs.
#[derive(Debug, Clone, Copy)]
pub struct CostStats {
    pub runs: usize,
    pub mean: f64,
    pub std_error: f64,
}

impl CostStats {
    pub fn from_costs(costs: &[f64]) -> Self {
        let runs = costs.len();
        let mean = costs.iter().sum::<f64>() / runs as f64;
        let std_error = if runs > 1 {
            let var =
                costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (runs - 1) as f64;
            (var / runs as f64).sqrt()
        } else {
            0.0
        };
        Self {
            runs,
            mean,
            std_error,
        }
    }
}

/// Per-run costs for each controller kind under shared realizations.
#[derive(Debug, Clone)]
pub struct PairedCosts {
    pub kinds: Vec<ControllerKind>,
    /// `costs[i][r]` is the cost of kind `i` in run `r`.
    pub costs: Vec<Vec<f64>>,
}

impl PairedCosts {
    pub fn stats(&self, kind: ControllerKind) -> Option<CostStats> {
        self.kinds
            .iter()
            .position(|k| *k == kind)
            .map(|i| CostStats::from_costs(&self.costs[i]))
    }

    pub fn costs_for(&self, kind: ControllerKind) -> Option<&[f64]> {
        self.kinds
            .iter()
            .position(|k| *k == kind)
            .map(|i| self.costs[i].as_slice())
    }
}

/// Monte Carlo batch for the configured controller kind. Episodes run in
/// parallel; the output depends only on the config and seed.
pub fn monte_carlo(cfg: &EpisodeConfig, runs: usize) -> Result<CostStats> {
    let costs = batch_costs(cfg, runs)?;
    Ok(CostStats::from_costs(&costs))
}

/// Per-run costs of a batch, in run order.
pub fn batch_costs(cfg: &EpisodeConfig, runs: usize) -> Result<Vec<f64>> {
    if runs == 0 {
        return Err(Error::InvalidArgument {
            context: "at least one Monte Carlo run is required".into(),
        });
    }
    cfg.validate()?;
    (0..runs as u64)
        .into_par_iter()
        .map(|r| run_episode_with_seed(cfg, cfg.master_seed ^ r).map(|res| res.cost))
        .collect()
}

/// Runs the same realizations for several controller kinds so costs can be
/// compared run by run.
pub fn paired_monte_carlo(
    cfg: &EpisodeConfig,
    kinds: &[ControllerKind],
    runs: usize,
) -> Result<PairedCosts> {
    let mut costs = Vec::with_capacity(kinds.len());
    for kind in kinds {
        costs.push(batch_costs(&cfg.with_controller(*kind), runs)?);
    }
    Ok(PairedCosts {
        kinds: kinds.to_vec(),
        costs,
    })
}

/// Result of a paired one-sided t-test for `mean(b − a) > 0`.
#[derive(Debug, Clone, Copy)]
pub struct PairedTest {
    pub t_statistic: f64,
    pub critical_value: f64,
    pub significant: bool,
}

/// Paired one-sided t-test at confidence `confidence` that `b` exceeds `a`
/// in the mean.
pub fn paired_one_sided_test(a: &[f64], b: &[f64], confidence: f64) -> Result<PairedTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument {
            context: "paired test needs two samples of equal length >= 2".into(),
        });
    }
    if !(0.0..1.0).contains(&confidence) {
        return Err(Error::InvalidArgument {
            context: format!("confidence {confidence} outside (0, 1)"),
        });
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = b.iter().zip(a.iter()).map(|(bi, ai)| bi - ai).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    let t_statistic = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::InvalidArgument {
        context: format!("t distribution: {e}"),
    })?;
    let critical_value = dist.inverse_cdf(confidence);
    Ok(PairedTest {
        t_statistic,
        critical_value,
        significant: t_statistic > critical_value,
    })
}

/// Buffer-age process on its own: packets with dummy payloads are pushed
/// through the delay model and the actuator's age sequence is recorded.
/// Bridges the discrete-event buffer to the age chain's stationary law.
pub fn simulate_buffer_ages<R: Rng + ?Sized>(
    delay: &DelayModel,
    n_seq: usize,
    steps: usize,
    rng: &mut R,
) -> Vec<usize> {
    let dummy = vec![DVector::zeros(1); n_seq + 1];
    let mut buffer = BufferState::new(DVector::zeros(1), n_seq);
    let mut in_flight: Vec<(u64, Packet)> = Vec::new();
    let mut ages = Vec::with_capacity(steps);
    for k in 0..steps as u64 {
        if let DelayOutcome::Delivered(steps) = delay.sample_delay(rng) {
            in_flight.push((k + steps as u64, Packet::new(k, dummy.clone()).unwrap()));
        }
        let mut idx = 0;
        while idx < in_flight.len() {
            if in_flight[idx].0 <= k {
                let (_, packet) = in_flight.swap_remove(idx);
                buffer.offer_packet(packet).unwrap();
            } else {
                idx += 1;
            }
        }
        let (_, age) = buffer.actuate(k).unwrap();
        ages.push(age);
    }
    ages
}
