//! One closed-loop episode of the pendulum over a lossy link with the
//! virtual-control-input controller, printing a trajectory digest and the
//! realized buffer ages.
//!
//! ```bash
//! cargo run --release -p seqctrl --example single_episode
//! ```

use nalgebra::{DMatrix, DVector};
use seqctrl::harness::{run_episode, ControllerKind, EpisodeConfig};
use seqctrl::network::DelayModel;
use seqctrl::plant::{lqr_gain, pendulum_plant, PendulumParams};

fn main() -> seqctrl::Result<()> {
    let params = PendulumParams::benchmark();
    let plant = pendulum_plant(&params)?;
    let q = DMatrix::from_diagonal(&DVector::from_vec(vec![5000.0, 0.0, 100.0, 0.0]));
    let r = DMatrix::from_element(1, 1, 100.0);
    let gain = lqr_gain(plant.a(), plant.b(), &q, &r)?;

    let cfg = EpisodeConfig {
        plant,
        delay: DelayModel::new(vec![0.3, 0.3, 0.2, 0.15, 0.05], 0.1)?,
        controller: ControllerKind::VciStationary,
        n_seq: 4,
        default_input: DVector::zeros(1),
        horizon: 150,
        initial_state: DVector::from_vec(vec![0.0, 0.2, 0.2, 0.0]),
        cost_q: q,
        cost_r: r,
        gain,
        master_seed: 42,
    };

    let result = run_episode(&cfg)?;
    println!("cumulative cost: {:.3}", result.cost);

    let mut histogram = vec![0usize; cfg.n_seq + 2];
    for &age in &result.ages {
        histogram[age] += 1;
    }
    println!(
        "buffer-age histogram over {} steps: {histogram:?}",
        cfg.horizon
    );

    println!("k    cart_pos   angle      input      age");
    for k in (0..cfg.horizon).step_by(15) {
        println!(
            "{k:<4} {:>9.4}  {:>9.4}  {:>9.4}  {}",
            result.states[k][0], result.states[k][2], result.inputs[k][0], result.ages[k]
        );
    }
    let max_angle = result
        .states
        .iter()
        .map(|x| x[2].abs())
        .fold(0.0f64, f64::max);
    println!("largest |angle| along the run: {max_angle:.4} rad");
    Ok(())
}
