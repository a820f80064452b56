//! Batch interface: JSON config ingestion, subcommand implementations, and
//! CSV output.
//!
//! The config schema is documented in the README; `RunConfig::pendulum_example`
//! emits a complete, runnable instance of it.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{
    batch_costs, paired_one_sided_test, run_episode_with_seed, ControllerKind, CostStats,
    EpisodeConfig, EpisodeResult,
};
use crate::network::DelayModel;
use crate::plant::{lqr_gain, pendulum_plant, PendulumParams, PlantModel};
use crate::stability::{closed_loop_modes, mss_check, MssVerdict};
use crate::vci::{AugmentedGain, TransitionMatrix};

/// Plant description: either the pendulum preset or explicit discrete-time
/// matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum PlantConfig {
    Pendulum(PendulumParams),
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        noise_cov: Vec<Vec<f64>>,
    },
}

/// Quadratic cost weights; also the LQR design weights for the gain.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

fn default_horizon() -> usize {
    150
}

fn default_runs() -> usize {
    100
}

fn default_controller() -> ControllerKind {
    ControllerKind::VciStationary
}

/// Schema-validated run description. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantConfig,
    pub network: DelayModel,
    #[serde(default = "default_controller")]
    pub controller: ControllerKind,
    pub sequence_length: usize,
    /// Default input applied when the buffer is exhausted; zeros when absent.
    #[serde(default)]
    pub default_input: Option<Vec<f64>>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub initial_state: Vec<f64>,
    pub cost: CostConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Config(format!("{what}: matrix must be non-empty")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{what}: ragged matrix rows")));
    }
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("{what}: entries must be finite")));
    }
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &data))
}

impl RunConfig {
    /// Reads and validates a config file.
    pub fn parse_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    /// Parses and validates config text. Schema errors name the offending
    /// field.
    pub fn parse_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Config(format!("field '{}': {}", e.path(), e.inner())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.network
            .validate()
            .map_err(|e| Error::Config(format!("field 'network': {e}")))?;
        if self.horizon == 0 {
            return Err(Error::Config("field 'horizon': must be positive".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("field 'runs': must be positive".into()));
        }
        if self.initial_state.is_empty() {
            return Err(Error::Config(
                "field 'initial_state': must be non-empty".into(),
            ));
        }
        if let PlantConfig::Pendulum(params) = &self.plant {
            if self.initial_state.len() != 4 {
                return Err(Error::Config(
                    "field 'initial_state': pendulum state has 4 components".into(),
                ));
            }
            pendulum_plant(params).map_err(|e| Error::Config(format!("field 'plant': {e}")))?;
        }
        Ok(())
    }

    /// Builds the plant described by the config.
    pub fn build_plant(&self) -> Result<PlantModel> {
        match &self.plant {
            PlantConfig::Pendulum(params) => pendulum_plant(params),
            PlantConfig::Linear { a, b, noise_cov } => PlantModel::new(
                to_matrix(a, "plant.linear.a")?,
                to_matrix(b, "plant.linear.b")?,
                to_matrix(noise_cov, "plant.linear.noise_cov")?,
            ),
        }
    }

    /// Assembles the full episode config: plant, network, cost weights, and
    /// the LQR gain synthesized from them.
    pub fn to_episode_config(&self) -> Result<EpisodeConfig> {
        let plant = self.build_plant()?;
        let q = to_matrix(&self.cost.q, "cost.q")?;
        let r = to_matrix(&self.cost.r, "cost.r")?;
        let gain = lqr_gain(plant.a(), plant.b(), &q, &r)?;
        let default_input = match &self.default_input {
            Some(values) => DVector::from_vec(values.clone()),
            None => DVector::zeros(plant.input_dim()),
        };
        let cfg = EpisodeConfig {
            delay: self.network.clone(),
            controller: self.controller,
            n_seq: self.sequence_length,
            default_input,
            horizon: self.horizon,
            initial_state: DVector::from_vec(self.initial_state.clone()),
            cost_q: q,
            cost_r: r,
            gain,
            master_seed: self.seed,
            plant,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The pendulum benchmark preset: physical parameters, the design
    /// weights, the benchmark initial state, and a five-step delay profile.
    pub fn pendulum_example() -> Self {
        Self {
            plant: PlantConfig::Pendulum(PendulumParams::benchmark()),
            network: DelayModel::new(vec![0.3, 0.25, 0.2, 0.15, 0.1], 0.0)
                .expect("preset network pmf is a valid distribution"),
            controller: ControllerKind::VciStationary,
            sequence_length: 4,
            default_input: None,
            horizon: 150,
            initial_state: vec![0.0, 0.2, 0.2, 0.0],
            cost: CostConfig {
                q: vec![
                    vec![5000.0, 0.0, 0.0, 0.0],
                    vec![0.0, 0.0, 0.0, 0.0],
                    vec![0.0, 0.0, 100.0, 0.0],
                    vec![0.0, 0.0, 0.0, 0.0],
                ],
                r: vec![vec![100.0]],
            },
            seed: 0,
            runs: 100,
        }
    }
}

/// Report of the `design` subcommand.
#[derive(Debug, Clone)]
pub struct DesignReport {
    pub gain: DMatrix<f64>,
    pub closed_loop_radius: f64,
}

pub fn cmd_design(config: &RunConfig) -> Result<DesignReport> {
    let plant = config.build_plant()?;
    let q = to_matrix(&config.cost.q, "cost.q")?;
    let r = to_matrix(&config.cost.r, "cost.r")?;
    let gain = lqr_gain(plant.a(), plant.b(), &q, &r)?;
    let closed_loop_radius = crate::numerics::spectral_radius(&(plant.a() + plant.b() * &gain))?;
    Ok(DesignReport {
        gain,
        closed_loop_radius,
    })
}

/// Report of the `stability` subcommand.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub verdict: MssVerdict,
    pub stationary_age: Vec<f64>,
}

pub fn cmd_stability(config: &RunConfig) -> Result<StabilityReport> {
    let episode = config.to_episode_config()?;
    if episode.default_input.iter().any(|&v| v != 0.0) {
        return Err(Error::NonzeroDefaultInput);
    }
    let transition =
        TransitionMatrix::from_delay_weights(&episode.delay.truncated_weights(episode.n_seq));
    let gain_tilde = AugmentedGain::build(
        &episode.plant,
        episode.gain.clone(),
        transition.clone(),
        episode.n_seq,
    )?;
    let sys = closed_loop_modes(&episode.plant, &gain_tilde, &transition)?;
    let verdict = mss_check(&sys)?;
    let stationary_age = transition
        .stationary()?
        .as_vector()
        .iter()
        .copied()
        .collect();
    Ok(StabilityReport {
        verdict,
        stationary_age,
    })
}

/// Writes one episode as trajectory CSV:
/// `run,k,x1..xs,u1..un,theta,step_cost`.
pub fn write_trajectory_csv<W: Write>(
    out: &mut W,
    run: u64,
    result: &EpisodeResult,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<()> {
    let s = result.states.first().map(|x| x.len()).unwrap_or(0);
    let n = result.inputs.first().map(|u| u.len()).unwrap_or(0);
    let mut header = vec!["run".to_string(), "k".to_string()];
    header.extend((1..=s).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("u{i}")));
    header.push("theta".to_string());
    header.push("step_cost".to_string());
    writeln!(out, "{}", header.join(","))?;
    for (k, ((x, u), theta)) in result
        .states
        .iter()
        .zip(result.inputs.iter())
        .zip(result.ages.iter())
        .enumerate()
    {
        let cost = crate::harness::step_cost(x, u, q, r);
        let mut fields = vec![run.to_string(), k.to_string()];
        fields.extend(x.iter().map(|v| v.to_string()));
        fields.extend(u.iter().map(|v| v.to_string()));
        fields.push(theta.to_string());
        fields.push(cost.to_string());
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// One row of the Monte Carlo summary.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub controller: ControllerKind,
    pub sigma_w: f64,
    pub stats: CostStats,
}

/// Writes the summary CSV: `controller,sigma_w,runs,mean_cost,std_error`.
pub fn write_summary_csv<W: Write>(out: &mut W, rows: &[SummaryRow]) -> Result<()> {
    writeln!(out, "controller,sigma_w,runs,mean_cost,std_error")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.controller, row.sigma_w, row.stats.runs, row.stats.mean, row.stats.std_error
        )?;
    }
    Ok(())
}

/// Runs one episode and writes its trajectory CSV.
pub fn cmd_simulate<W: Write>(config: &RunConfig, out: &mut W) -> Result<EpisodeResult> {
    let episode = config.to_episode_config()?;
    let result = run_episode_with_seed(&episode, episode.master_seed)?;
    write_trajectory_csv(out, 0, &result, &episode.cost_q, &episode.cost_r)?;
    Ok(result)
}

/// Controllers covered by a default `montecarlo` invocation.
pub const DEFAULT_MONTE_CARLO_KINDS: [ControllerKind; 3] = [
    ControllerKind::Cs,
    ControllerKind::OlNcs,
    ControllerKind::VciStationary,
];

/// Runs the Monte Carlo batch for each controller kind under shared
/// realizations and writes the summary CSV. Returns the rows and, when both
/// baselines are present, the paired comparison of open-loop against
/// virtual-input sequences.
pub fn cmd_montecarlo<W: Write>(
    config: &RunConfig,
    kinds: &[ControllerKind],
    out: &mut W,
) -> Result<(Vec<SummaryRow>, Option<String>)> {
    let episode = config.to_episode_config()?;
    let sigma_w = episode.plant.noise_scale();
    let mut rows = Vec::with_capacity(kinds.len());
    let mut per_kind_costs = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let mut cfg = episode.clone();
        cfg.controller = *kind;
        let costs = batch_costs(&cfg, config.runs)?;
        rows.push(SummaryRow {
            controller: *kind,
            sigma_w,
            stats: CostStats::from_costs(&costs),
        });
        per_kind_costs.push(costs);
    }
    write_summary_csv(out, &rows)?;

    let vci_idx = kinds
        .iter()
        .position(|k| *k == ControllerKind::VciStationary);
    let ol_idx = kinds.iter().position(|k| *k == ControllerKind::OlNcs);
    let comparison = match (vci_idx, ol_idx) {
        (Some(v), Some(o)) => {
            let test = paired_one_sided_test(&per_kind_costs[v], &per_kind_costs[o], 0.95)?;
            Some(format!(
                "paired one-sided t-test (ol > vci): t = {:.3}, critical = {:.3}, significant = {}",
                test.t_statistic, test.critical_value, test.significant
            ))
        }
        _ => None,
    };
    Ok((rows, comparison))
}
