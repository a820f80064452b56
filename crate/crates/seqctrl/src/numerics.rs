//! Dense real-matrix utilities the rest of the crate builds on: Kronecker
//! products, spectral radii, zero-order-hold discretization, a discrete
//! algebraic Riccati solver, and Markov-chain stationary distributions.
//!
//! Everything here is a pure function on immutable inputs and safe to call
//! from any number of threads.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Absolute tolerance for simplex membership checks (sum-to-one, row sums).
pub const SIMPLEX_TOL: f64 = 1e-9;

const DARE_ITERATION_CAP: usize = 1_000_000;
const DARE_TOL: f64 = 1e-12;
const STATIONARY_ITERATION_CAP: usize = 1_000_000;
const STATIONARY_TOL: f64 = 1e-12;

/// A vector on the probability simplex: nonnegative entries summing to one
/// within [`SIMPLEX_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(DVector<f64>);

impl ProbabilityVector {
    /// Validates and wraps `weights`. Entries in `[-1e-12, 0)` are treated as
    /// roundoff and clamped to zero.
    pub fn new(weights: DVector<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidProbability {
                reason: "empty weight vector".into(),
            });
        }
        let mut weights = weights;
        for w in weights.iter_mut() {
            if !w.is_finite() {
                return Err(Error::InvalidProbability {
                    reason: format!("non-finite weight {w}"),
                });
            }
            if *w < 0.0 {
                if *w < -1e-12 {
                    return Err(Error::InvalidProbability {
                        reason: format!("negative weight {w}"),
                    });
                }
                *w = 0.0;
            }
            if *w > 1.0 + SIMPLEX_TOL {
                return Err(Error::InvalidProbability {
                    reason: format!("weight {w} exceeds one"),
                });
            }
        }
        let sum = weights.sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidProbability {
                reason: format!("weights sum to {sum}, expected 1"),
            });
        }
        Ok(Self(weights))
    }

    /// Uniform distribution over `len` outcomes.
    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform distribution needs at least one outcome");
        Self(DVector::from_element(len, 1.0 / len as f64))
    }

    /// Point mass on outcome `index`.
    pub fn unit(len: usize, index: usize) -> Self {
        assert!(index < len, "point mass index out of range");
        let mut v = DVector::zeros(len);
        v[index] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }
}

fn ensure_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn ensure_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == m.ncols() {
        Ok(())
    } else {
        Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

fn ensure_symmetric(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    ensure_square(m)?;
    let scale = 1.0 + m.amax();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * scale {
                return Err(Error::NotSymmetric { what });
            }
        }
    }
    Ok(())
}

/// Kronecker product of two non-empty matrices.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    ensure_finite(a)?;
    ensure_finite(b)?;
    Ok(a.kronecker(b))
}

/// Largest eigenvalue modulus of a square real matrix.
///
/// Uses a full eigen-decomposition so complex conjugate pairs of real
/// matrices are handled.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    ensure_square(m)?;
    ensure_finite(m)?;
    Ok(m.complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max))
}

/// Exact zero-order-hold discretization of the continuous-time pair
/// `(a_c, b_c)` at sampling time `t_s`.
///
/// Computed through the matrix exponential of the augmented block matrix
/// `[[A, B], [0, 0]] * t_s`, whose top row holds `(A_d, B_d)`.
pub fn zoh_discretize(
    a_c: &DMatrix<f64>,
    b_c: &DMatrix<f64>,
    t_s: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    ensure_square(a_c)?;
    ensure_finite(a_c)?;
    ensure_finite(b_c)?;
    if b_c.nrows() != a_c.nrows() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "input matrix has {} rows, state matrix expects {}",
                b_c.nrows(),
                a_c.nrows()
            ),
        });
    }
    if !t_s.is_finite() || t_s <= 0.0 {
        return Err(Error::InvalidArgument {
            context: format!("sampling time must be positive, got {t_s}"),
        });
    }
    let s = a_c.nrows();
    let n = b_c.ncols();
    let mut aug = DMatrix::zeros(s + n, s + n);
    aug.view_mut((0, 0), (s, s)).copy_from(a_c);
    aug.view_mut((0, s), (s, n)).copy_from(b_c);
    let exp = (aug * t_s).exp();
    let a_d = exp.view((0, 0), (s, s)).into_owned();
    let b_d = exp.view((0, s), (s, n)).into_owned();
    Ok((a_d, b_d))
}

/// Solves the discrete algebraic Riccati equation
/// `S = AᵀSA − AᵀSB(R + BᵀSB)⁻¹BᵀSA + Q`
/// by fixed-point iteration from `S₀ = Q`.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    ensure_square(a)?;
    ensure_finite(a)?;
    ensure_finite(b)?;
    ensure_symmetric(q, "state weight Q")?;
    ensure_symmetric(r, "input weight R")?;
    let s_dim = a.nrows();
    if b.nrows() != s_dim || q.nrows() != s_dim || r.nrows() != b.ncols() {
        return Err(Error::DimensionMismatch {
            context: "DARE operands must share state and input dimensions".into(),
        });
    }

    let a_t = a.transpose();
    let b_t = b.transpose();
    let mut s = q.clone();
    for _ in 0..DARE_ITERATION_CAP {
        let sb = &s * b;
        let denom = r + &b_t * &sb;
        let denom_inv = denom.try_inverse().ok_or(Error::NonConvergence {
            cap: DARE_ITERATION_CAP,
            context: "singular gain denominator in Riccati iteration",
        })?;
        let sa = &s * a;
        let mut next = &a_t * &sa - &a_t * &sb * denom_inv * &b_t * &sa + q;
        // Symmetrize to keep roundoff from drifting the iterate.
        next = (&next + next.transpose()) * 0.5;
        if !next.iter().all(|x| x.is_finite()) {
            return Err(Error::NonConvergence {
                cap: DARE_ITERATION_CAP,
                context: "Riccati iterate diverged (pair is not stabilizable)",
            });
        }
        let delta = (&next - &s).amax();
        s = next;
        if delta < DARE_TOL * f64::max(1.0, s.amax()) {
            return Ok(s);
        }
    }
    Err(Error::NonConvergence {
        cap: DARE_ITERATION_CAP,
        context: "Riccati fixed-point iteration (pair may not be stabilizable)",
    })
}

/// Stationary distribution of a row-stochastic matrix: the unique `α` with
/// `Pᵀα = α` on the simplex.
///
/// Non-uniqueness (null space of `Pᵀ − I` with dimension above one) is
/// reported as an error rather than resolved silently.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<ProbabilityVector> {
    ensure_square(p)?;
    ensure_finite(p)?;
    let n = p.nrows();
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    for i in 0..n {
        let sum: f64 = p.row(i).iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NotStochastic { row: i, sum });
        }
    }

    let p_t = p.transpose();
    let shifted = &p_t - DMatrix::identity(n, n);
    let singular_values = shifted.clone().svd(false, false).singular_values;
    let null_dim = singular_values.iter().filter(|&&sv| sv < 1e-9).count();
    if null_dim != 1 {
        return Err(Error::NonUniqueStationary { dim: null_dim });
    }

    // Damped power iteration on Pᵀ; the damping removes oscillation from
    // periodic chains without moving the fixed point.
    let mut alpha = DVector::from_element(n, 1.0 / n as f64);
    let mut converged = false;
    for _ in 0..STATIONARY_ITERATION_CAP {
        let next = (&p_t * &alpha + &alpha) * 0.5;
        let delta = (&next - &alpha).amax();
        alpha = next;
        if delta < STATIONARY_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            cap: STATIONARY_ITERATION_CAP,
            context: "stationary-distribution power iteration",
        });
    }
    let residual = (&p_t * &alpha - &alpha).amax();
    if residual > 1e-10 {
        return Err(Error::NonConvergence {
            cap: STATIONARY_ITERATION_CAP,
            context: "stationary distribution residual above tolerance",
        });
    }
    let sum = alpha.sum();
    ProbabilityVector::new(alpha / sum)
}
