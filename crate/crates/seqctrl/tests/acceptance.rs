//! Acceptance suite: one test per criterion, each printing a pass line with
//! its measured runtime. Run with `--nocapture` to see the lines:
//!
//! ```bash
//! cargo test --release -p seqctrl --test acceptance -- --nocapture
//! ```

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use seqctrl::actuator::{BufferState, Packet};
use seqctrl::harness::{
    batch_costs, paired_monte_carlo, paired_one_sided_test, run_episode_with_seed,
    simulate_buffer_ages, ControllerKind, EpisodeConfig,
};
use seqctrl::network::{DelayModel, DelayOutcome};
use seqctrl::numerics::{solve_dare, ProbabilityVector};
use seqctrl::plant::{lqr_gain, pendulum_plant, PendulumParams, PlantModel};
use seqctrl::stability::{
    build_shift_matrices, closed_loop_modes, model_applied_input, moment_iteration_oracle,
    mss_check, MomentTrend,
};
use seqctrl::vci::{
    expected_virtual_input, predict_weights, AugmentedGain, TransitionMatrix, VciController,
    WeightMode, WeightVector,
};

fn pendulum_episode(
    kind: ControllerKind,
    noise_std: f64,
    delay: DelayModel,
    n_seq: usize,
    seed: u64,
) -> EpisodeConfig {
    let params = PendulumParams {
        noise_std,
        ..PendulumParams::benchmark()
    };
    let plant = pendulum_plant(&params).unwrap();
    let q = DMatrix::from_diagonal(&DVector::from_vec(vec![5000.0, 0.0, 100.0, 0.0]));
    let r = DMatrix::from_element(1, 1, 100.0);
    let gain = lqr_gain(plant.a(), plant.b(), &q, &r).unwrap();
    EpisodeConfig {
        plant,
        delay,
        controller: kind,
        n_seq,
        default_input: DVector::zeros(1),
        horizon: 150,
        initial_state: DVector::from_vec(vec![0.0, 0.2, 0.2, 0.0]),
        cost_q: q,
        cost_r: r,
        gain,
        master_seed: seed,
    }
}

fn random_simplex<R: Rng>(rng: &mut R, len: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(floor..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

#[test]
fn criterion_1_stationary_age_agreement() {
    let start = Instant::now();
    let n_seq = 2;
    let mut rng = ChaCha12Rng::seed_from_u64(0xA6E5);
    let mut worst_tv = 0.0f64;
    for model_index in 0..10 {
        let pmf_len = rng.random_range(1..=6);
        let pmf = random_simplex(&mut rng, pmf_len, 0.05);
        let loss = rng.random_range(0.0..0.3);
        let delay = DelayModel::new(pmf, loss).unwrap();

        let transition = TransitionMatrix::from_delay_weights(&delay.truncated_weights(n_seq));
        let alpha = transition.stationary().unwrap();

        let burn_in = 1_000;
        let steps = 100_000;
        let ages = simulate_buffer_ages(&delay, n_seq, steps + burn_in, &mut rng);
        let mut histogram = vec![0usize; n_seq + 2];
        for &age in &ages[burn_in..] {
            histogram[age] += 1;
        }
        let tv: f64 = histogram
            .iter()
            .enumerate()
            .map(|(i, &count)| (count as f64 / steps as f64 - alpha.get(i)).abs())
            .sum::<f64>()
            / 2.0;
        assert!(
            tv < 0.01,
            "model {model_index}: total variation {tv} exceeds 0.01"
        );
        worst_tv = worst_tv.max(tv);
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "runtime {elapsed:.2}s exceeds 10s");
    println!("criterion 1 (stationary-age agreement): PASS, worst TV {worst_tv:.4}, {elapsed:.2}s");
}

#[test]
fn criterion_2_model_vs_simulation_exactness() {
    let start = Instant::now();
    let input_dim = 2;
    let n_seq = 3;
    let delay = DelayModel::new(vec![0.3, 0.2, 0.2, 0.2, 0.1], 0.2).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(0xB07);

    let (f, g) = build_shift_matrices(input_dim, n_seq);
    let d = f.nrows();
    let mut eta = DVector::zeros(d);
    let mut buffer = BufferState::new(DVector::zeros(input_dim), n_seq);
    let mut in_flight: Vec<(u64, Packet)> = Vec::new();

    for k in 0..10_000u64 {
        let entries: Vec<DVector<f64>> = (0..=n_seq)
            .map(|_| DVector::from_fn(input_dim, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let packet = Packet::new(k, entries.clone()).unwrap();
        if let DelayOutcome::Delivered(steps) = delay.sample_delay(&mut rng) {
            in_flight.push((k + steps as u64, packet));
        }
        let mut idx = 0;
        while idx < in_flight.len() {
            if in_flight[idx].0 <= k {
                let (_, due) = in_flight.swap_remove(idx);
                buffer.offer_packet(due).unwrap();
            } else {
                idx += 1;
            }
        }
        let (applied, age) = buffer.actuate(k).unwrap();

        let stacked = DVector::from_iterator(
            (n_seq + 1) * input_dim,
            entries.iter().flat_map(|e| e.iter().copied()),
        );
        let modeled = model_applied_input(input_dim, n_seq, age, &eta, &stacked).unwrap();
        assert_eq!(
            modeled, applied,
            "model and actuator disagree at step {k} (age {age})"
        );
        eta = &f * eta + &g * stacked;
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "runtime {elapsed:.2}s exceeds 5s");
    println!("criterion 2 (model-vs-simulation exactness): PASS, {elapsed:.2}s");
}

#[test]
fn criterion_3_perfect_network_collapse() {
    let start = Instant::now();
    let seed = 2024;
    let run = |kind| {
        let cfg = pendulum_episode(kind, 0.006, DelayModel::perfect(), 2, seed);
        run_episode_with_seed(&cfg, seed).unwrap()
    };
    let cs = run(ControllerKind::Cs);
    let vci = run(ControllerKind::VciStationary);
    let ol = run(ControllerKind::OlNcs);

    let max_dev = |a: &[DVector<f64>], b: &[DVector<f64>]| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).amax())
            .fold(0.0f64, f64::max)
    };
    assert!(max_dev(&cs.states, &vci.states) <= 1e-12);
    assert!(max_dev(&cs.states, &ol.states) <= 1e-12);
    assert!(vci.ages.iter().all(|&age| age == 0));
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "runtime {elapsed:.2}s exceeds 1s");
    println!("criterion 3 (perfect-network collapse): PASS, {elapsed:.2}s");
}

#[test]
fn criterion_4_theorem_vs_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xC0FFEE);
    let total = 200;
    let mut conclusive = 0;
    let mut draws = 0;
    while draws < total {
        let s = rng.random_range(1..=2usize);
        let n_seq = rng.random_range(1..=2usize);
        let a = DMatrix::from_fn(s, s, |_, _| rng.random_range(-2.0..2.0));
        let b = DMatrix::from_fn(s, 1, |_, _| rng.random_range(-1.0..1.0));
        let gain = DMatrix::from_fn(1, s, |_, _| rng.random_range(-1.5..1.5));
        let plant = match PlantModel::new(a, b, DMatrix::zeros(s, s)) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let pmf = random_simplex(&mut rng, n_seq + 2, 0.01);
        let loss = rng.random_range(0.0..0.5);
        let delay = DelayModel::new(pmf, loss).unwrap();
        let transition = TransitionMatrix::from_delay_weights(&delay.truncated_weights(n_seq));
        let gain_tilde = match AugmentedGain::build(&plant, gain, transition.clone(), n_seq) {
            Ok(g) => g,
            Err(_) => continue,
        };
        let sys = closed_loop_modes(&plant, &gain_tilde, &transition).unwrap();
        draws += 1;

        let verdict = mss_check(&sys).unwrap();
        match moment_iteration_oracle(&sys, 2000).unwrap() {
            MomentTrend::Decays => {
                conclusive += 1;
                assert!(
                    verdict.is_mss,
                    "oracle decays but radius is {}",
                    verdict.radius
                );
            }
            MomentTrend::Diverges => {
                conclusive += 1;
                assert!(
                    !verdict.is_mss,
                    "oracle diverges but radius is {}",
                    verdict.radius
                );
            }
            MomentTrend::Inconclusive => {}
        }
    }
    assert!(
        conclusive * 10 >= total * 9,
        "only {conclusive}/{total} draws were conclusive"
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "runtime {elapsed:.2}s exceeds 60s");
    println!(
        "criterion 4 (theorem-vs-oracle): PASS, {conclusive}/{total} conclusive, {elapsed:.2}s"
    );
}

#[test]
fn criterion_5_linearity_certificate() {
    let start = Instant::now();
    let n_seq = 3;
    let params = PendulumParams::benchmark();
    let plant = pendulum_plant(&params).unwrap();
    let q = DMatrix::from_diagonal(&DVector::from_vec(vec![5000.0, 0.0, 100.0, 0.0]));
    let r = DMatrix::from_element(1, 1, 100.0);
    let gain = lqr_gain(plant.a(), plant.b(), &q, &r).unwrap();
    let delay = DelayModel::new(vec![0.4, 0.3, 0.2, 0.1], 0.1).unwrap();
    let transition = TransitionMatrix::from_delay_weights(&delay.truncated_weights(n_seq));

    let controller = VciController::new(
        &plant,
        gain.clone(),
        n_seq,
        DVector::zeros(1),
        transition.clone(),
        WeightMode::Stationary,
    )
    .unwrap();
    let gain_tilde = AugmentedGain::from_controller(&controller).unwrap();

    let s = plant.state_dim();
    let d = controller.layout().dim();
    let mut rng = ChaCha12Rng::seed_from_u64(0x11CE);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let psi = DVector::from_fn(s + d, |_, _| rng.random_range(-1.0..1.0));
        let x = psi.rows(0, s).into_owned();
        let eta = psi.rows(s, d).into_owned();
        let entries = controller.evaluate(&x, &eta).unwrap();
        let stacked = DVector::from_iterator(
            (n_seq + 1) * plant.input_dim(),
            entries.iter().flat_map(|e| e.iter().copied()),
        );
        let dev = (stacked - gain_tilde.apply(&psi).unwrap()).amax();
        worst = worst.max(dev);
    }
    assert!(worst < 1e-10, "worst deviation {worst}");
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "runtime {elapsed:.2}s exceeds 1s");
    println!(
        "criterion 5 (linearity certificate): PASS, worst deviation {worst:.2e}, {elapsed:.2}s"
    );
}

#[test]
fn criterion_6_hand_value_regressions() {
    let start = Instant::now();
    let tol = 1e-9;

    // Transition matrix from q = [0.5, 0.3, 0.2].
    let weights = seqctrl::network::TruncatedDelayWeights::from_weights(
        ProbabilityVector::new(DVector::from_row_slice(&[0.5, 0.3, 0.2])).unwrap(),
    )
    .unwrap();
    let transition = TransitionMatrix::from_delay_weights(&weights);
    let expected_p = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.5, 0.3, 0.2, 0.5, 0.3, 0.2]);
    assert!((transition.matrix() - expected_p).amax() < tol);

    // Its stationary distribution.
    let alpha = transition.stationary().unwrap();
    for (i, expected) in [0.5, 0.4, 0.1].iter().enumerate() {
        assert!((alpha.get(i) - expected).abs() < tol);
    }

    // One-step prediction with truncation.
    let base = WeightVector::new(alpha.clone(), 0, 1).unwrap();
    let predicted = predict_weights(&transition, &base, 1).unwrap();
    assert!((predicted.alpha().get(0) - 5.0 / 9.0).abs() < tol);
    assert!((predicted.alpha().get(1) - 4.0 / 9.0).abs() < tol);

    // Expected virtual input.
    let mix = WeightVector::new(
        ProbabilityVector::new(DVector::from_row_slice(&[0.5, 0.4, 0.1])).unwrap(),
        0,
        1,
    )
    .unwrap();
    let candidates = vec![DVector::from_vec(vec![2.0]), DVector::from_vec(vec![1.0])];
    let expected = expected_virtual_input(&mix, &candidates, &DVector::zeros(1)).unwrap();
    assert!((expected[0] - 1.4).abs() < tol);

    // Scalar Riccati fixed point.
    let one = DMatrix::from_element(1, 1, 1.0);
    let s = solve_dare(&one, &one, &one, &one).unwrap();
    assert!((s[(0, 0)] - 1.618_033_988_749_895).abs() < tol);

    // Sequence generation hand trace.
    let plant = PlantModel::new(one.clone(), one.clone(), DMatrix::zeros(1, 1)).unwrap();
    let mut controller = VciController::new(
        &plant,
        DMatrix::from_element(1, 1, -0.5),
        1,
        DVector::zeros(1),
        transition,
        WeightMode::Stationary,
    )
    .unwrap();
    controller.set_eta(DVector::from_vec(vec![0.8])).unwrap();
    let packet = controller.step(0, &DVector::from_vec(vec![1.0])).unwrap();
    assert!((packet.inputs()[0][0] - (-0.5)).abs() < tol);
    assert!((packet.inputs()[1][0] - (-0.535)).abs() < tol);

    let elapsed = start.elapsed().as_secs_f64();
    println!("criterion 6 (hand-value regressions): PASS, {elapsed:.2}s");
}

#[test]
fn criterion_7_qualitative_cost_ordering() {
    let start = Instant::now();
    let runs = 200;
    // Delay pmf spanning 0..=4 steps, biased toward long delays, with packet
    // loss folded in as the delay model allows. The advantage of mixing over
    // the still-applicable candidates grows with network stress; on nearly
    // ideal links the two sequence strategies tie statistically.
    let delay = DelayModel::new(vec![0.05, 0.1, 0.2, 0.3, 0.35], 0.3).unwrap();
    let cfg = pendulum_episode(ControllerKind::Cs, 0.006, delay, 4, 0x7AB1E3);
    let paired = paired_monte_carlo(
        &cfg,
        &[
            ControllerKind::Cs,
            ControllerKind::VciStationary,
            ControllerKind::OlNcs,
        ],
        runs,
    )
    .unwrap();
    let cs = paired.stats(ControllerKind::Cs).unwrap();
    let vci = paired.stats(ControllerKind::VciStationary).unwrap();
    let ol = paired.stats(ControllerKind::OlNcs).unwrap();

    assert!(
        cs.mean <= vci.mean,
        "CS mean {} should not exceed VCI mean {}",
        cs.mean,
        vci.mean
    );
    let test = paired_one_sided_test(
        paired.costs_for(ControllerKind::VciStationary).unwrap(),
        paired.costs_for(ControllerKind::OlNcs).unwrap(),
        0.95,
    )
    .unwrap();
    assert!(
        vci.mean < ol.mean && test.significant,
        "VCI mean {} vs OL mean {}, t = {:.3} (critical {:.3})",
        vci.mean,
        ol.mean,
        test.t_statistic,
        test.critical_value
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "runtime {elapsed:.2}s exceeds 120s");
    println!(
        "criterion 7 (qualitative cost ordering): PASS, means cs {:.2} <= vci {:.2} < ol {:.2}, t = {:.2}, {elapsed:.2}s",
        cs.mean, vci.mean, ol.mean, test.t_statistic
    );
}

#[test]
fn criterion_8_stability_verdict_sanity() {
    let start = Instant::now();
    let n_seq = 2;
    let runs = 500;

    let max_second_moment = |cfg: &EpisodeConfig| -> f64 {
        let mut per_step = vec![0.0f64; cfg.horizon];
        for r in 0..runs as u64 {
            let result = run_episode_with_seed(cfg, cfg.master_seed ^ r).unwrap();
            for (k, x) in result.states.iter().enumerate() {
                per_step[k] += x.norm_squared();
            }
        }
        per_step
            .iter()
            .map(|total| total / runs as f64)
            .fold(0.0, f64::max)
    };

    let verdict_for = |cfg: &EpisodeConfig| {
        let transition =
            TransitionMatrix::from_delay_weights(&cfg.delay.truncated_weights(cfg.n_seq));
        let gain_tilde =
            AugmentedGain::build(&cfg.plant, cfg.gain.clone(), transition.clone(), cfg.n_seq)
                .unwrap();
        let sys = closed_loop_modes(&cfg.plant, &gain_tilde, &transition).unwrap();
        mss_check(&sys).unwrap()
    };

    // Mostly delay-0 network: stable in the mean square.
    let healthy = pendulum_episode(
        ControllerKind::VciStationary,
        0.006,
        DelayModel::new(vec![0.9, 0.08, 0.02], 0.0).unwrap(),
        n_seq,
        0x5EED,
    );
    let healthy_verdict = verdict_for(&healthy);
    assert!(
        healthy_verdict.is_mss,
        "healthy network radius {}",
        healthy_verdict.radius
    );
    let healthy_moment = max_second_moment(&healthy);
    assert!(
        healthy_moment < 1e6,
        "second moment {healthy_moment} should stay bounded"
    );

    // Same network with almost certain loss: the verdict flips and the
    // empirical moments grow.
    let starved = pendulum_episode(
        ControllerKind::VciStationary,
        0.006,
        DelayModel::new(vec![0.9, 0.08, 0.02], 0.99).unwrap(),
        n_seq,
        0x5EED,
    );
    let starved_verdict = verdict_for(&starved);
    assert!(
        !starved_verdict.is_mss,
        "starved network radius {}",
        starved_verdict.radius
    );
    let starved_moment = max_second_moment(&starved);
    assert!(
        starved_moment > 1e6,
        "second moment {starved_moment} should grow"
    );

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 180.0, "runtime {elapsed:.2}s exceeds 180s");
    println!(
        "criterion 8 (stability verdict sanity): PASS, radii {:.4} (MSS) vs {:.4} (not MSS), moments {:.3e} vs {:.3e}, {elapsed:.2}s",
        healthy_verdict.radius, starved_verdict.radius, healthy_moment, starved_moment
    );
}

// Cross-module invariant shared by the criteria: the empirical age process
// equals the chain's stationary law (criterion 1 at scale) and the VCI loop
// under a perfect network degenerates to plain state feedback (criterion 3);
// the smoke below guards the batching helper those tests rely on.
#[test]
fn batch_costs_are_seed_deterministic() {
    let delay = DelayModel::new(vec![0.6, 0.4], 0.1).unwrap();
    let cfg = pendulum_episode(ControllerKind::VciStationary, 0.003, delay, 2, 9);
    let a = batch_costs(&cfg, 8).unwrap();
    let b = batch_costs(&cfg, 8).unwrap();
    assert_eq!(a, b);
}

// The analytic moment radius must match the simulated decay quantitatively,
// not just in sign: with zero process noise the mean squared state over
// random delay realizations contracts per 50 steps by roughly radius^50.
// The dominant eigenvalue structure makes the window ratio oscillate around
// that factor, so the band is wide; a radius off by 2x either way fails.
#[test]
fn moment_radius_matches_simulated_decay_rate() {
    let n_seq = 2;
    let delay = DelayModel::new(vec![0.5, 0.3, 0.2], 0.05).unwrap();
    let cfg = {
        let mut cfg = pendulum_episode(ControllerKind::VciStationary, 0.0, delay, n_seq, 11);
        cfg.horizon = 151;
        cfg
    };
    let transition = TransitionMatrix::from_delay_weights(&cfg.delay.truncated_weights(cfg.n_seq));
    let gain_tilde =
        AugmentedGain::build(&cfg.plant, cfg.gain.clone(), transition.clone(), cfg.n_seq).unwrap();
    let sys = closed_loop_modes(&cfg.plant, &gain_tilde, &transition).unwrap();
    let radius = mss_check(&sys).unwrap().radius;
    assert!(radius < 1.0);

    let runs = 500u64;
    let mut m100 = 0.0;
    let mut m150 = 0.0;
    for r in 0..runs {
        let result = run_episode_with_seed(&cfg, cfg.master_seed ^ r).unwrap();
        m100 += result.states[100].norm_squared();
        m150 += result.states[150].norm_squared();
    }
    let measured = m150 / m100;
    let predicted = radius.powi(50);
    assert!(
        measured > 0.4 * predicted && measured < 2.5 * predicted,
        "50-step contraction {measured:.5} vs predicted {predicted:.5}"
    );
}

// The controller's internal tail bookkeeping must be the same linear shift
// the stability model uses: replaying its packets through (F, G) and mapping
// [x; η] with L̃ reproduces every packet it emits.
#[test]
fn controller_tails_match_the_shift_model() {
    let n_seq = 3;
    let params = PendulumParams {
        noise_std: 0.004,
        ..PendulumParams::benchmark()
    };
    let plant = pendulum_plant(&params).unwrap();
    let q = DMatrix::from_diagonal(&DVector::from_vec(vec![5000.0, 0.0, 100.0, 0.0]));
    let r = DMatrix::from_element(1, 1, 100.0);
    let gain = lqr_gain(plant.a(), plant.b(), &q, &r).unwrap();
    let delay = DelayModel::new(vec![0.3, 0.3, 0.2, 0.2], 0.1).unwrap();
    let transition = TransitionMatrix::from_delay_weights(&delay.truncated_weights(n_seq));
    let mut controller = VciController::new(
        &plant,
        gain,
        n_seq,
        DVector::zeros(1),
        transition,
        WeightMode::Stationary,
    )
    .unwrap();
    let gain_tilde = AugmentedGain::from_controller(&controller).unwrap();
    let (f, g) = build_shift_matrices(plant.input_dim(), n_seq);

    let mut rng = ChaCha12Rng::seed_from_u64(77);
    let mut eta_model: DVector<f64> = DVector::zeros(f.nrows());
    for k in 0..200u64 {
        let x = DVector::from_fn(plant.state_dim(), |_, _| rng.random_range(-0.5..0.5));
        let packet = controller.step(k, &x).unwrap();
        let stacked = DVector::from_iterator(
            (n_seq + 1) * plant.input_dim(),
            packet.inputs().iter().flat_map(|e| e.iter().copied()),
        );
        let mut psi = DVector::zeros(plant.state_dim() + eta_model.len());
        psi.rows_mut(0, plant.state_dim()).copy_from(&x);
        psi.rows_mut(plant.state_dim(), eta_model.len())
            .copy_from(&eta_model);
        let via_gain = gain_tilde.apply(&psi).unwrap();
        assert!(
            (&stacked - via_gain).amax() < 1e-10,
            "packet diverged from L̃ψ at step {k}"
        );
        eta_model = &f * eta_model + &g * stacked;
        assert_eq!(
            controller.eta(),
            &eta_model,
            "internal tails diverged from the shift model at step {k}"
        );
    }
}
