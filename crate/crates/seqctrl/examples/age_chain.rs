//! The buffer-age Markov chain of a lossy link: truncated delay weights, the
//! transition matrix, its stationary distribution, and how closely the
//! discrete-event buffer tracks that law empirically.
//!
//! ```bash
//! cargo run --release -p seqctrl --example age_chain
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use seqctrl::harness::simulate_buffer_ages;
use seqctrl::network::DelayModel;
use seqctrl::vci::TransitionMatrix;

fn main() -> seqctrl::Result<()> {
    let n_seq = 3;
    let delay = DelayModel::new(vec![0.35, 0.3, 0.2, 0.1, 0.05], 0.1)?;
    println!(
        "link: delay pmf {:?}, loss probability {}",
        delay.pmf(),
        delay.loss_prob()
    );

    let weights = delay.truncated_weights(n_seq);
    println!(
        "truncated weights q (length n_seq + 2): {:?}",
        weights.weights().as_vector().as_slice()
    );

    let transition = TransitionMatrix::from_delay_weights(&weights);
    println!("age-chain transition matrix:{}", transition.matrix());

    let alpha = transition.stationary()?;
    println!(
        "stationary age distribution: {:?}",
        alpha.as_vector().as_slice()
    );

    let steps = 200_000;
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let ages = simulate_buffer_ages(&delay, n_seq, steps, &mut rng);
    let mut histogram = vec![0usize; n_seq + 2];
    for &age in &ages {
        histogram[age] += 1;
    }
    println!("empirical distribution over {steps} buffer steps:");
    let mut tv = 0.0;
    for (age, &count) in histogram.iter().enumerate() {
        let freq = count as f64 / steps as f64;
        tv += (freq - alpha.get(age)).abs();
        println!(
            "  age {age}: empirical {freq:.4} vs stationary {:.4}",
            alpha.get(age)
        );
    }
    println!("total variation distance: {:.4}", tv / 2.0);
    Ok(())
}
