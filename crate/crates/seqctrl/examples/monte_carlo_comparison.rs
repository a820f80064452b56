//! Paired Monte Carlo comparison of the controller baselines on the pendulum:
//! transparent-link state feedback (cs), open-loop rollout sequences (ol),
//! and virtual-control-input sequences (vci), across noise levels.
//!
//! Every kind replays identical noise and delay realizations, so the cost
//! differences are paired and the one-sided t-test applies run by run.
//!
//! ```bash
//! cargo run --release -p seqctrl --example monte_carlo_comparison
//! ```

use nalgebra::{DMatrix, DVector};
use seqctrl::harness::{paired_monte_carlo, paired_one_sided_test, ControllerKind, EpisodeConfig};
use seqctrl::network::DelayModel;
use seqctrl::plant::{lqr_gain, pendulum_plant, PendulumParams};

fn main() -> seqctrl::Result<()> {
    let runs = 100;
    let delay = DelayModel::new(vec![0.05, 0.1, 0.2, 0.3, 0.35], 0.3)?;
    let kinds = [
        ControllerKind::Cs,
        ControllerKind::VciStationary,
        ControllerKind::OlNcs,
    ];

    println!(
        "{runs} paired runs per cell, delay pmf {:?}, loss {}",
        delay.pmf(),
        delay.loss_prob()
    );
    println!("sigma_w   cs           vci          ol           t(ol>vci)");
    for sigma in [0.001, 0.003, 0.006, 0.009, 0.012] {
        let params = PendulumParams {
            noise_std: sigma,
            ..PendulumParams::benchmark()
        };
        let plant = pendulum_plant(&params)?;
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![5000.0, 0.0, 100.0, 0.0]));
        let r = DMatrix::from_element(1, 1, 100.0);
        let gain = lqr_gain(plant.a(), plant.b(), &q, &r)?;
        let cfg = EpisodeConfig {
            plant,
            delay: delay.clone(),
            controller: ControllerKind::Cs,
            n_seq: 4,
            default_input: DVector::zeros(1),
            horizon: 150,
            initial_state: DVector::from_vec(vec![0.0, 0.2, 0.2, 0.0]),
            cost_q: q,
            cost_r: r,
            gain,
            master_seed: 0xC0DE,
        };
        let paired = paired_monte_carlo(&cfg, &kinds, runs)?;
        let mean = |kind| paired.stats(kind).unwrap().mean;
        let test = paired_one_sided_test(
            paired.costs_for(ControllerKind::VciStationary).unwrap(),
            paired.costs_for(ControllerKind::OlNcs).unwrap(),
            0.95,
        )?;
        println!(
            "{sigma:<8} {:<12.2} {:<12.2} {:<12.2} {:.2}{}",
            mean(ControllerKind::Cs),
            mean(ControllerKind::VciStationary),
            mean(ControllerKind::OlNcs),
            test.t_statistic,
            if test.significant { " *" } else { "" },
        );
    }
    println!("(* one-sided paired t-test significant at 95%)");
    Ok(())
}
