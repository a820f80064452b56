//! Sequence-based control over lossy networks.
//!
//! A controller on the far side of an unreliable link sends, at every step, a
//! time-stamped packet of inputs for the current and the next `N` steps. The
//! actuator buffers the newest packet it has seen, applies the entry matching
//! the current step, and falls back to a default input once the buffered
//! sequence is exhausted. This crate provides:
//!
//! - [`plant`]: discrete-time linear dynamics with Gaussian process noise,
//!   zero-order-hold discretization, the cart-pendulum benchmark, and LQR
//!   gain synthesis;
//! - [`network`]: per-packet delay/loss sampling and the truncated delay
//!   weights behind the buffer-age Markov chain;
//! - [`actuator`]: the time-stamped newest-wins buffer and its input
//!   selection;
//! - [`vci`]: sequence generation with *virtual control inputs* — the
//!   still-applicable inputs of earlier packets are mixed according to a
//!   distribution over the buffer age, either stationary or tracked by a
//!   Wonham filter — plus the time-invariant matrix form of the controller;
//! - [`stability`]: the closed loop as a Markovian jump linear system and a
//!   mean-square stability test with an independent moment-iteration oracle;
//! - [`harness`]: reproducible episode simulation and paired Monte Carlo
//!   batches;
//! - [`cli`]: JSON run configs and CSV reports behind the `seqctrl` binary.
//!
//! ## Runnable examples
//!
//! Each major capability has a standalone example:
//!
//! ```bash
//! cargo run --release -p seqctrl --example pendulum_design
//! cargo run --release -p seqctrl --example age_chain
//! cargo run --release -p seqctrl --example stability_margin
//! cargo run --release -p seqctrl --example single_episode
//! cargo run --release -p seqctrl --example monte_carlo_comparison
//! cargo run --release -p seqctrl --example filtered_weights
//! ```

pub mod actuator;
pub mod cli;
pub mod error;
pub mod harness;
pub mod network;
pub mod numerics;
pub mod plant;
pub mod stability;
pub mod vci;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
