//! LQR design for the cart-pendulum benchmark: build the continuous-time
//! linearization, discretize it with a zero-order hold, synthesize the gain,
//! and report the closed-loop spectral radius.
//!
//! ```bash
//! cargo run --release -p seqctrl --example pendulum_design
//! ```

use nalgebra::{DMatrix, DVector};
use seqctrl::numerics::spectral_radius;
use seqctrl::plant::{pendulum_continuous, pendulum_plant, LqrDesign, PendulumParams};

fn main() -> seqctrl::Result<()> {
    let params = PendulumParams::benchmark();
    println!("pendulum parameters: {params:#?}");

    let (a_c, b_c) = pendulum_continuous(&params)?;
    println!("continuous A:{a_c}");
    println!("continuous B:{b_c}");

    let plant = pendulum_plant(&params)?;
    println!(
        "discretized at {} s, open-loop spectral radius {:.6} (unstable upright equilibrium)",
        params.sampling_time,
        spectral_radius(plant.a())?
    );

    let q = DMatrix::from_diagonal(&DVector::from_vec(vec![5000.0, 0.0, 100.0, 0.0]));
    let r = DMatrix::from_element(1, 1, 100.0);
    let design = LqrDesign::synthesize(plant.a(), plant.b(), q, r)?;
    println!(
        "LQR gain (u = L·x): {:?}",
        design.gain().iter().copied().collect::<Vec<_>>()
    );
    println!(
        "closed-loop spectral radius: {:.6}",
        design.closed_loop_radius()
    );
    Ok(())
}
