//! Mean-square stability of the pendulum loop as the link degrades: sweep the
//! loss probability, check the second-moment spectral radius, and cross-check
//! each verdict with the moment-iteration oracle.
//!
//! ```bash
//! cargo run --release -p seqctrl --example stability_margin
//! ```

use nalgebra::{DMatrix, DVector};
use seqctrl::network::DelayModel;
use seqctrl::plant::{lqr_gain, pendulum_plant, PendulumParams};
use seqctrl::stability::{closed_loop_modes, moment_iteration_oracle, mss_check, MomentTrend};
use seqctrl::vci::{AugmentedGain, TransitionMatrix};

fn main() -> seqctrl::Result<()> {
    let n_seq = 2;
    let plant = pendulum_plant(&PendulumParams::benchmark())?;
    let q = DMatrix::from_diagonal(&DVector::from_vec(vec![5000.0, 0.0, 100.0, 0.0]));
    let r = DMatrix::from_element(1, 1, 100.0);
    let gain = lqr_gain(plant.a(), plant.b(), &q, &r)?;

    println!("loss_prob  radius      mss    oracle");
    for loss_percent in [0, 10, 20, 40, 60, 80, 90, 95, 99] {
        let loss = loss_percent as f64 / 100.0;
        let delay = DelayModel::new(vec![0.7, 0.2, 0.1], loss)?;
        let transition = TransitionMatrix::from_delay_weights(&delay.truncated_weights(n_seq));
        let gain_tilde = AugmentedGain::build(&plant, gain.clone(), transition.clone(), n_seq)?;
        let sys = closed_loop_modes(&plant, &gain_tilde, &transition)?;
        let verdict = mss_check(&sys)?;
        let oracle = match moment_iteration_oracle(&sys, 5000)? {
            MomentTrend::Decays => "decays",
            MomentTrend::Diverges => "diverges",
            MomentTrend::Inconclusive => "inconclusive",
        };
        println!(
            "{:>8.2}  {:>8.5}  {:>5}  {oracle}",
            loss, verdict.radius, verdict.is_mss
        );
    }
    Ok(())
}
