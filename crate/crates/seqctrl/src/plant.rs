//! Discrete-time linear plant with Gaussian process noise, the
//! inverted-pendulum-on-a-cart preset, and LQR gain synthesis.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{solve_dare, spectral_radius, zoh_discretize};

/// Standard gravity in m/s².
pub const GRAVITY: f64 = 9.81;

/// Coloring factor that maps standard normals to the configured covariance.
#[derive(Debug, Clone)]
enum NoiseFactor {
    Zero,
    /// Per-component standard deviations of a diagonal covariance.
    Diagonal(DVector<f64>),
    /// Lower Cholesky factor of a dense positive-definite covariance.
    Cholesky(DMatrix<f64>),
}

/// Discrete-time linear dynamics `x_{k+1} = A x_k + B u_k + w_k` with
/// zero-mean Gaussian process noise of known covariance.
#[derive(Debug, Clone)]
pub struct PlantModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    noise_cov: DMatrix<f64>,
    factor: NoiseFactor,
}

impl PlantModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, noise_cov: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if a.is_empty() || b.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        if b.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "input matrix has {} rows, state dimension is {}",
                    b.nrows(),
                    a.nrows()
                ),
            });
        }
        if !a
            .iter()
            .chain(b.iter())
            .chain(noise_cov.iter())
            .all(|x| x.is_finite())
        {
            return Err(Error::NonFinite);
        }
        if noise_cov.nrows() != a.nrows() || noise_cov.ncols() != a.nrows() {
            return Err(Error::DimensionMismatch {
                context: "noise covariance must be state-dimensional and square".into(),
            });
        }
        let factor = noise_factor(&noise_cov)?;
        Ok(Self {
            a,
            b,
            noise_cov,
            factor,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    /// One exact step of the dynamics: `A x + B u + w`.
    pub fn step(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        if x.len() != self.state_dim() || w.len() != self.state_dim() || u.len() != self.input_dim()
        {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "step expects x:{} u:{} w:{}, got x:{} u:{} w:{}",
                    self.state_dim(),
                    self.input_dim(),
                    self.state_dim(),
                    x.len(),
                    u.len(),
                    w.len()
                ),
            });
        }
        Ok(&self.a * x + &self.b * u + w)
    }

    /// Zero-mean Gaussian draw with the configured covariance, produced by
    /// coloring standard normals. Deterministic given the generator state.
    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let s = self.state_dim();
        let z = DVector::from_iterator(s, (0..s).map(|_| rng.sample::<f64, _>(StandardNormal)));
        match &self.factor {
            NoiseFactor::Zero => DVector::zeros(s),
            NoiseFactor::Diagonal(stds) => z.component_mul(stds),
            NoiseFactor::Cholesky(l) => l * z,
        }
    }

    /// Whether the noise covariance is identically zero.
    pub fn noise_is_zero(&self) -> bool {
        matches!(self.factor, NoiseFactor::Zero)
    }

    /// Largest per-component noise standard deviation; used in reports.
    pub fn noise_scale(&self) -> f64 {
        self.noise_cov
            .diagonal()
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v))
            .sqrt()
    }

    /// Gaussian likelihood of a residual under the process-noise model.
    ///
    /// Covariance components with zero variance contribute an indicator: the
    /// residual must vanish there for the likelihood to be nonzero.
    pub(crate) fn noise_likelihood(&self, residual: &DVector<f64>) -> Result<f64> {
        const ZERO_COMPONENT_TOL: f64 = 1e-9;
        if residual.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "residual dimension must match the state".into(),
            });
        }
        match &self.factor {
            NoiseFactor::Zero => Err(Error::DegenerateNoise),
            NoiseFactor::Diagonal(stds) => {
                let mut density = 1.0;
                for (v, sigma) in residual.iter().zip(stds.iter()) {
                    if *sigma > 0.0 {
                        let z = v / sigma;
                        density *=
                            (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                    } else if v.abs() > ZERO_COMPONENT_TOL {
                        return Ok(0.0);
                    }
                }
                Ok(density)
            }
            NoiseFactor::Cholesky(l) => {
                let y = l
                    .clone()
                    .lu()
                    .solve(residual)
                    .ok_or(Error::IndefiniteCovariance)?;
                let dim = residual.len() as f64;
                let det_l: f64 = l.diagonal().iter().product();
                let norm = (2.0 * std::f64::consts::PI).powf(dim / 2.0) * det_l;
                Ok((-0.5 * y.norm_squared()).exp() / norm)
            }
        }
    }
}

fn noise_factor(cov: &DMatrix<f64>) -> Result<NoiseFactor> {
    numerics_symmetry_check(cov)?;
    if cov.iter().all(|&x| x == 0.0) {
        return Ok(NoiseFactor::Zero);
    }
    let is_diagonal = cov
        .row_iter()
        .enumerate()
        .all(|(i, row)| row.iter().enumerate().all(|(j, &x)| i == j || x == 0.0));
    if is_diagonal {
        let mut stds = cov.diagonal();
        for v in stds.iter_mut() {
            if *v < 0.0 {
                return Err(Error::IndefiniteCovariance);
            }
            *v = v.sqrt();
        }
        Ok(NoiseFactor::Diagonal(stds))
    } else {
        let chol = cov.clone().cholesky().ok_or(Error::IndefiniteCovariance)?;
        Ok(NoiseFactor::Cholesky(chol.l()))
    }
}

fn numerics_symmetry_check(cov: &DMatrix<f64>) -> Result<()> {
    let scale = 1.0 + cov.amax();
    for i in 0..cov.nrows() {
        for j in (i + 1)..cov.ncols() {
            if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-9 * scale {
                return Err(Error::NotSymmetric {
                    what: "noise covariance",
                });
            }
        }
    }
    Ok(())
}

/// Physical parameters of the inverted pendulum on a cart.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumParams {
    /// Cart mass in kg.
    pub cart_mass: f64,
    /// Pendulum mass in kg.
    pub pendulum_mass: f64,
    /// Cart friction coefficient in N/m/s.
    pub cart_friction: f64,
    /// Distance from pivot to pendulum center of mass in m.
    pub length_to_com: f64,
    /// Pendulum moment of inertia in kg·m².
    pub inertia: f64,
    /// Sampling time in s.
    pub sampling_time: f64,
    /// Standard deviation of the process noise added to cart position and
    /// pendulum angle each step.
    pub noise_std: f64,
}

impl PendulumParams {
    /// The benchmark parameter set used throughout the examples.
    pub fn benchmark() -> Self {
        Self {
            cart_mass: 0.5,
            pendulum_mass: 0.5,
            cart_friction: 0.1,
            length_to_com: 0.3,
            inertia: 0.006,
            sampling_time: 0.01,
            noise_std: 0.006,
        }
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("cart_mass", self.cart_mass),
            ("pendulum_mass", self.pendulum_mass),
            ("cart_friction", self.cart_friction),
            ("length_to_com", self.length_to_com),
            ("inertia", self.inertia),
            ("sampling_time", self.sampling_time),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidArgument {
                    context: format!("pendulum parameter {name} must be positive, got {value}"),
                });
            }
        }
        if self.noise_std < 0.0 {
            return Err(Error::InvalidArgument {
                context: format!("noise_std must be nonnegative, got {}", self.noise_std),
            });
        }
        Ok(())
    }
}

/// Continuous-time linearization of the cart-pendulum about the upright
/// equilibrium, with state `[cart position, cart velocity, angle, angular
/// velocity]`.
pub fn pendulum_continuous(params: &PendulumParams) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    params.validate()?;
    let m_cart = params.cart_mass;
    let m_pend = params.pendulum_mass;
    let friction = params.cart_friction;
    let l = params.length_to_com;
    let inertia = params.inertia;
    let g = GRAVITY;

    let p = inertia * (m_cart + m_pend) + m_cart * m_pend * l * l;
    let a_c = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0,
            1.0,
            0.0,
            0.0,
            0.0,
            -(inertia + m_pend * l * l) * friction / p,
            m_pend * m_pend * g * l * l / p,
            0.0,
            0.0,
            0.0,
            0.0,
            1.0,
            0.0,
            -m_pend * l * friction / p,
            m_pend * g * l * (m_cart + m_pend) / p,
            0.0,
        ],
    );
    let b_c = DMatrix::from_row_slice(
        4,
        1,
        &[0.0, (inertia + m_pend * l * l) / p, 0.0, m_pend * l / p],
    );
    Ok((a_c, b_c))
}

/// Discretized pendulum plant with process noise on cart position and
/// pendulum angle only: `noise_cov = diag(σ², 0, σ², 0)`.
pub fn pendulum_plant(params: &PendulumParams) -> Result<PlantModel> {
    let (a_c, b_c) = pendulum_continuous(params)?;
    let (a_d, b_d) = zoh_discretize(&a_c, &b_c, params.sampling_time)?;
    let var = params.noise_std * params.noise_std;
    let noise_cov = DMatrix::from_diagonal(&DVector::from_vec(vec![var, 0.0, var, 0.0]));
    PlantModel::new(a_d, b_d, noise_cov)
}

/// LQR state-feedback gain under the convention `u = L·x`: the negative
/// feedback sign is folded into `L = −(R + BᵀSB)⁻¹BᵀSA`.
pub fn lqr_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let s = solve_dare(a, b, q, r)?;
    let denom = (r + b.transpose() * &s * b)
        .try_inverse()
        .ok_or(Error::NonConvergence {
            cap: 0,
            context: "singular gain denominator after Riccati solve",
        })?;
    Ok(-(denom * b.transpose() * &s * a))
}

/// An LQR design: weights plus the synthesized gain, checked for closed-loop
/// stability.
#[derive(Debug, Clone)]
pub struct LqrDesign {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    gain: DMatrix<f64>,
    closed_loop_radius: f64,
}

impl LqrDesign {
    pub fn synthesize(
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self> {
        let gain = lqr_gain(a, b, &q, &r)?;
        let closed_loop_radius = spectral_radius(&(a + b * &gain))?;
        if closed_loop_radius >= 1.0 {
            return Err(Error::NonConvergence {
                cap: 0,
                context: "LQR design did not stabilize the closed loop",
            });
        }
        Ok(Self {
            q,
            r,
            gain,
            closed_loop_radius,
        })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn closed_loop_radius(&self) -> f64 {
        self.closed_loop_radius
    }
}
