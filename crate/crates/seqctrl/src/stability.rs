//! Mean-square stability of the closed loop.
//!
//! The network and actuator are written as a linear system on the stored
//! packet tails `η`, the plant and controller are folded in, and the result
//! is a Markovian jump linear system indexed by the buffer age. The verdict
//! comes from the spectral radius of the associated second-moment operator;
//! an independent moment-iteration oracle cross-checks it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::spectral_radius;
use crate::plant::PlantModel;
use crate::vci::{AugmentedGain, EtaLayout, TransitionMatrix};

/// Default cap on the dimension of the second-moment matrix,
/// `(n_seq + 2)·(s + d)²`.
pub const DEFAULT_MSS_DIM_CAP: usize = 2048;

/// Shift pair `(F, G)` with `η_{k+1} = F η_k + G U_k`: every stored block
/// loses its current entry and the freshly sent packet contributes its tail.
pub fn build_shift_matrices(input_dim: usize, n_seq: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let layout = EtaLayout::new(input_dim, n_seq);
    let d = layout.dim();
    let packet_len = (n_seq + 1) * input_dim;
    let mut f = DMatrix::zeros(d, d);
    let mut g = DMatrix::zeros(d, packet_len);
    let eye = DMatrix::identity(input_dim, input_dim);

    // Block 1 of the next tails holds entries 1..=n_seq of the new packet.
    for t in 0..n_seq {
        g.view_mut(
            (layout.entry_offset(1, t), (t + 1) * input_dim),
            (input_dim, input_dim),
        )
        .copy_from(&eye);
    }
    // Block j+1 keeps block j of the old tails, shifted past its first entry.
    for block in 1..n_seq {
        for t in 0..layout.block_len(block + 1) {
            f.view_mut(
                (
                    layout.entry_offset(block + 1, t),
                    layout.entry_offset(block, t + 1),
                ),
                (input_dim, input_dim),
            )
            .copy_from(&eye);
        }
    }
    (f, g)
}

/// Selection pair `(H_θ, J_θ)` with `u_k = H_θ η_k + J_θ U_k`: the fresh
/// packet's first entry for age zero, the matching stored entry for ages
/// `1..=n_seq`, and zero (the default input) once the buffer is exhausted.
pub fn build_selection_matrices(
    input_dim: usize,
    n_seq: usize,
    theta: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if theta > n_seq + 1 {
        return Err(Error::AgeOutOfRange {
            age: theta,
            max: n_seq + 1,
        });
    }
    let layout = EtaLayout::new(input_dim, n_seq);
    let mut h = DMatrix::zeros(input_dim, layout.dim());
    let mut j = DMatrix::zeros(input_dim, (n_seq + 1) * input_dim);
    let eye = DMatrix::identity(input_dim, input_dim);
    if theta == 0 {
        j.view_mut((0, 0), (input_dim, input_dim)).copy_from(&eye);
    } else if theta <= n_seq {
        h.view_mut((0, layout.entry_offset(theta, 0)), (input_dim, input_dim))
            .copy_from(&eye);
    }
    Ok((h, j))
}

/// Jump linear system `ψ_{k+1} = Ã_θ ψ_k + w̃_k` with one mode per buffer
/// age, switched by the age chain.
#[derive(Debug, Clone)]
pub struct JumpLinearSystem {
    modes: Vec<DMatrix<f64>>,
    transition: TransitionMatrix,
}

impl JumpLinearSystem {
    pub fn new(modes: Vec<DMatrix<f64>>, transition: TransitionMatrix) -> Result<Self> {
        if modes.len() != transition.order() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "{} modes for a chain with {} states",
                    modes.len(),
                    transition.order()
                ),
            });
        }
        let dim = modes.first().map(|m| m.nrows()).ok_or(Error::EmptyMatrix)?;
        for m in &modes {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    context: "all modes must be square with a shared dimension".into(),
                });
            }
        }
        Ok(Self { modes, transition })
    }

    pub fn modes(&self) -> &[DMatrix<f64>] {
        &self.modes
    }

    pub fn transition(&self) -> &TransitionMatrix {
        &self.transition
    }

    pub fn mode_dim(&self) -> usize {
        self.modes[0].nrows()
    }
}

/// Closed-loop modes `Ã_θ = [[A, B·H_θ], [0, F]] + [[B·J_θ], [G]]·L̃` for
/// every age. Requires the zero default input already baked into `L̃`.
pub fn closed_loop_modes(
    plant: &PlantModel,
    gain_tilde: &AugmentedGain,
    transition: &TransitionMatrix,
) -> Result<JumpLinearSystem> {
    let s = plant.state_dim();
    let n = plant.input_dim();
    let n_seq = gain_tilde.n_seq();
    if gain_tilde.state_dim() != s || gain_tilde.input_dim() != n {
        return Err(Error::DimensionMismatch {
            context: "augmented gain was built for a different plant".into(),
        });
    }
    if transition.n_seq() != n_seq {
        return Err(Error::DimensionMismatch {
            context: "transition matrix and augmented gain disagree on n_seq".into(),
        });
    }
    let layout = EtaLayout::new(n, n_seq);
    let d = layout.dim();
    let (f, g) = build_shift_matrices(n, n_seq);
    let mut modes = Vec::with_capacity(n_seq + 2);
    for theta in 0..=(n_seq + 1) {
        let (h, j) = build_selection_matrices(n, n_seq, theta)?;
        let mut base = DMatrix::zeros(s + d, s + d);
        base.view_mut((0, 0), (s, s)).copy_from(plant.a());
        base.view_mut((0, s), (s, d)).copy_from(&(plant.b() * &h));
        base.view_mut((s, s), (d, d)).copy_from(&f);
        let mut inject = DMatrix::zeros(s + d, (n_seq + 1) * n);
        inject
            .view_mut((0, 0), (s, (n_seq + 1) * n))
            .copy_from(&(plant.b() * &j));
        inject.view_mut((s, 0), (d, (n_seq + 1) * n)).copy_from(&g);
        modes.push(base + inject * gain_tilde.matrix());
    }
    JumpLinearSystem::new(modes, transition.clone())
}

/// Verdict of the second-moment spectral test.
#[derive(Debug, Clone, Copy)]
pub struct MssVerdict {
    pub radius: f64,
    pub is_mss: bool,
}

/// Mean-square stability via the spectral radius of
/// `(Pᵀ ⊗ I)·blockdiag[Ã_i ⊗ Ã_i]` over all modes.
pub fn mss_check(sys: &JumpLinearSystem) -> Result<MssVerdict> {
    mss_check_with_cap(sys, DEFAULT_MSS_DIM_CAP)
}

/// Same as [`mss_check`] with an explicit cap on the moment-matrix dimension.
pub fn mss_check_with_cap(sys: &JumpLinearSystem, cap: usize) -> Result<MssVerdict> {
    let m = sys.mode_dim();
    let modes = sys.modes().len();
    let total = modes * m * m;
    if total > cap {
        return Err(Error::DimensionCap { dim: total, cap });
    }
    let p = sys.transition().matrix();
    // Block (j, i) of (Pᵀ ⊗ I)·blockdiag[Ã_i ⊗ Ã_i] is p_{ij}·(Ã_i ⊗ Ã_i).
    let mut moment_op = DMatrix::zeros(total, total);
    for (i, mode) in sys.modes().iter().enumerate() {
        let self_kron = mode.kronecker(mode);
        for j in 0..modes {
            let weight = p[(i, j)];
            if weight != 0.0 {
                moment_op
                    .view_mut((j * m * m, i * m * m), (m * m, m * m))
                    .copy_from(&(&self_kron * weight));
            }
        }
    }
    let radius = spectral_radius(&moment_op)?;
    Ok(MssVerdict {
        radius,
        is_mss: radius < 1.0,
    })
}

/// Outcome of the coupled second-moment iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentTrend {
    Decays,
    Diverges,
    Inconclusive,
}

/// Independent stability oracle: iterates the coupled moment recursion
/// `M_j⁺ = Σ_i p_{ij} Ã_i M_i Ã_iᵀ` from identity and watches the total
/// trace. Decay below `1e-8` or growth past `1e8` is conclusive.
pub fn moment_iteration_oracle(sys: &JumpLinearSystem, steps: usize) -> Result<MomentTrend> {
    if steps < 100 {
        return Err(Error::InvalidArgument {
            context: format!("moment iteration needs at least 100 steps, got {steps}"),
        });
    }
    let m = sys.mode_dim();
    let modes = sys.modes().len();
    let p = sys.transition().matrix();
    let mut moments: Vec<DMatrix<f64>> = (0..modes).map(|_| DMatrix::identity(m, m)).collect();
    for _ in 0..steps {
        let mut next: Vec<DMatrix<f64>> = (0..modes).map(|_| DMatrix::zeros(m, m)).collect();
        for (i, moment) in moments.iter().enumerate() {
            let pushed = &sys.modes()[i] * moment * sys.modes()[i].transpose();
            for (j, slot) in next.iter_mut().enumerate() {
                let weight = p[(i, j)];
                if weight != 0.0 {
                    *slot += &pushed * weight;
                }
            }
        }
        moments = next;
        let total_trace: f64 = moments.iter().map(|m| m.trace()).sum();
        if !total_trace.is_finite() || total_trace > 1e8 {
            return Ok(MomentTrend::Diverges);
        }
        if total_trace < 1e-8 {
            return Ok(MomentTrend::Decays);
        }
    }
    Ok(MomentTrend::Inconclusive)
}

/// Applied input predicted by the network/actuator model for one step.
pub fn model_applied_input(
    input_dim: usize,
    n_seq: usize,
    theta: usize,
    eta: &DVector<f64>,
    packet_inputs: &DVector<f64>,
) -> Result<DVector<f64>> {
    let (h, j) = build_selection_matrices(input_dim, n_seq, theta)?;
    Ok(&h * eta + &j * packet_inputs)
}
