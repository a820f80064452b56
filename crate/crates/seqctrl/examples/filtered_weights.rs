//! Tracking the buffer age from state measurements alone: run the filtered
//! controller on a scalar plant and score its belief against the actuator's
//! ground-truth age, with the stationary distribution as the baseline.
//!
//! Note that the first belief entry always equals q₀: whether the packet
//! sent *this* step arrives within the step is independent of everything
//! already observed, so no filter can sharpen it.
//!
//! ```bash
//! cargo run --release -p seqctrl --example filtered_weights
//! ```

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use seqctrl::actuator::{BufferState, Packet};
use seqctrl::network::{DelayModel, DelayOutcome};
use seqctrl::plant::PlantModel;
use seqctrl::vci::{TransitionMatrix, VciController, WeightMode};

fn main() -> seqctrl::Result<()> {
    // Scalar unstable plant with enough noise for the filter to see.
    let plant = PlantModel::new(
        DMatrix::from_element(1, 1, 1.1),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 0.01),
    )?;
    let gain = DMatrix::from_element(1, 1, -0.8);
    let n_seq = 2;
    let delay = DelayModel::new(vec![0.4, 0.3, 0.3], 0.15)?;
    let transition = TransitionMatrix::from_delay_weights(&delay.truncated_weights(n_seq));
    let stationary = transition.stationary()?;
    println!(
        "stationary age distribution: {:?}",
        stationary.as_vector().as_slice()
    );

    let mut controller = VciController::new(
        &plant,
        gain,
        n_seq,
        DVector::zeros(1),
        transition,
        WeightMode::Filtered,
    )?;

    let mut noise_rng = ChaCha12Rng::seed_from_u64(5);
    let mut delay_rng = ChaCha12Rng::seed_from_u64(6);
    let mut buffer = BufferState::new(DVector::zeros(1), n_seq);
    let mut in_flight: Vec<(u64, Packet)> = Vec::new();
    let mut x = DVector::from_vec(vec![1.0]);

    let steps = 300u64;
    let mut filter_score = 0.0;
    let mut stationary_score = 0.0;
    println!("first steps (belief over ages 0..={}):", n_seq + 1);
    println!("k   true_age   belief");
    for k in 0..steps {
        let packet = controller.step(k, &x)?;
        if let DelayOutcome::Delivered(d) = delay.sample_delay(&mut delay_rng) {
            in_flight.push((k + d as u64, packet));
        }
        let mut idx = 0;
        while idx < in_flight.len() {
            if in_flight[idx].0 <= k {
                let (_, due) = in_flight.swap_remove(idx);
                buffer.offer_packet(due)?;
            } else {
                idx += 1;
            }
        }
        let (u, age) = buffer.actuate(k)?;
        let w = plant.sample_noise(&mut noise_rng);
        x = plant.step(&x, &u, &w)?;

        // Probability the controller assigned to the age that actually
        // happened, versus the time-invariant baseline.
        filter_score += controller.belief().alpha().get(age);
        stationary_score += stationary.get(age);
        if k < 12 {
            let belief: Vec<f64> = controller.belief().alpha().iter().copied().collect();
            print!("{k:<3} {age:<10}[");
            for (i, b) in belief.iter().enumerate() {
                print!("{}{b:.3}", if i > 0 { ", " } else { "" });
            }
            println!("]");
        }
    }
    println!(
        "mean probability assigned to the true age: filtered {:.4} vs stationary {:.4}",
        filter_score / steps as f64,
        stationary_score / steps as f64
    );
    Ok(())
}
