//! Inverse-variance fusion, per-keypoint constant-velocity Kalman filtering
//! and recursive fusion of relative dimensions.

use nalgebra::{Matrix4, SMatrix, SVector, Vector4};
use serde::{Deserialize, Serialize};

use crate::geometry::{Vec2, Vec3};
use crate::{Error, Result};

/// Axis-independent 2D Gaussian in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianEstimate2D {
    pub mean: Vec2,
    pub var: Vec2,
}

impl GaussianEstimate2D {
    pub fn new(mean: Vec2, var: Vec2) -> Self {
        Self { mean, var }
    }

    pub fn isotropic(mean: Vec2, var: f64) -> Self {
        Self { mean, var: Vec2::new(var, var) }
    }

    pub fn std(&self) -> Vec2 {
        self.var.map(f64::sqrt)
    }

    pub fn is_valid(&self) -> bool {
        self.var.iter().all(|v| v.is_finite() && *v > 0.0) && self.mean.iter().all(|m| m.is_finite())
    }
}

/// Per-axis inverse-variance fusion:
/// `σ̂² = (Σ σᵢ⁻²)⁻¹`, `μ̂ = σ̂² Σ σᵢ⁻² μᵢ`.
pub fn bayes_fuse(estimates: &[GaussianEstimate2D]) -> Result<GaussianEstimate2D> {
    if estimates.is_empty() {
        return Err(Error::EmptyInput);
    }
    if estimates.len() == 1 {
        return Ok(estimates[0]);
    }
    let mut info = Vec2::zeros();
    let mut weighted = Vec2::zeros();
    for e in estimates {
        let w = e.var.map(|v| 1.0 / v);
        info += w;
        weighted += w.component_mul(&e.mean);
    }
    let var = info.map(|i| 1.0 / i);
    Ok(GaussianEstimate2D { mean: var.component_mul(&weighted), var })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityUncertainty {
    /// The fixed velocity variance is the measurement noise of the offset
    /// observation; the initial state velocity variance uses it too.
    Measurement,
    /// The fixed velocity variance only seeds the initial state covariance;
    /// offset observations carry their own reported variance.
    InitialState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// px²/frame² per axis.
    pub velocity_variance: f64,
    pub velocity_mode: VelocityUncertainty,
    /// White-noise acceleration std, px/frame².
    pub accel_std: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { velocity_variance: 20.0, velocity_mode: VelocityUncertainty::Measurement, accel_std: 0.5 }
    }
}

impl FilterConfig {
    pub fn process_noise(&self) -> Matrix4<f64> {
        process_noise(self.accel_std)
    }

    /// Variance used for an offset observation with the given reported variance.
    pub fn offset_variance(&self, reported: Vec2) -> Vec2 {
        match self.velocity_mode {
            VelocityUncertainty::Measurement => Vec2::new(self.velocity_variance, self.velocity_variance),
            VelocityUncertainty::InitialState => reported,
        }
    }
}

/// Discrete white-noise-acceleration covariance for state `[x, y, vx, vy]`, dt = 1.
pub fn process_noise(accel_std: f64) -> Matrix4<f64> {
    let q = accel_std * accel_std;
    let mut m = Matrix4::zeros();
    for axis in 0..2 {
        let (p, v) = (axis, axis + 2);
        m[(p, p)] = 0.25 * q;
        m[(p, v)] = 0.5 * q;
        m[(v, p)] = 0.5 * q;
        m[(v, v)] = q;
    }
    m
}

/// Kalman state of one keypoint: `[x, y, vx, vy]` with full covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointFilterState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub covariance: Matrix4<f64>,
}

impl KeypointFilterState {
    /// Zero velocity, position variance from the observation.
    pub fn from_observation(obs: &GaussianEstimate2D, velocity_variance: f64) -> Self {
        let cov = Matrix4::from_diagonal(&Vector4::new(obs.var.x, obs.var.y, velocity_variance, velocity_variance));
        Self { position: obs.mean, velocity: Vec2::zeros(), covariance: cov }
    }

    pub fn state(&self) -> Vector4<f64> {
        Vector4::new(self.position.x, self.position.y, self.velocity.x, self.velocity.y)
    }

    fn with_state(x: Vector4<f64>, covariance: Matrix4<f64>) -> Self {
        Self { position: Vec2::new(x[0], x[1]), velocity: Vec2::new(x[2], x[3]), covariance }
    }

    pub fn position_estimate(&self) -> GaussianEstimate2D {
        GaussianEstimate2D { mean: self.position, var: Vec2::new(self.covariance[(0, 0)], self.covariance[(1, 1)]) }
    }

    pub fn velocity_estimate(&self) -> GaussianEstimate2D {
        GaussianEstimate2D { mean: self.velocity, var: Vec2::new(self.covariance[(2, 2)], self.covariance[(3, 3)]) }
    }

    /// Symmetric with strictly positive eigenvalues.
    pub fn is_spd(&self) -> bool {
        let c = &self.covariance;
        (c - c.transpose()).amax() <= 1e-9 * c.amax().max(1.0) && c.symmetric_eigenvalues().iter().all(|e| *e > 0.0)
    }
}

fn transition() -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = 1.0;
    f[(1, 3)] = 1.0;
    f
}

fn symmetrize(p: Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}

/// Constant-velocity propagation by one frame.
pub fn kalman_predict(state: &KeypointFilterState, q: &Matrix4<f64>) -> KeypointFilterState {
    let f = transition();
    let x = f * state.state();
    let p = symmetrize(f * state.covariance * f.transpose() + q);
    KeypointFilterState::with_state(x, p)
}

fn linear_update<const M: usize>(
    state: &KeypointFilterState,
    h: &SMatrix<f64, M, 4>,
    z: &SVector<f64, M>,
    r: &SVector<f64, M>,
) -> KeypointFilterState {
    let p = &state.covariance;
    let rm = SMatrix::<f64, M, M>::from_diagonal(r);
    let s = h * p * h.transpose() + rm;
    let s_inv = s.try_inverse().expect("innovation covariance is positive definite");
    let k = p * h.transpose() * s_inv;
    let x = state.state() + k * (z - h * state.state());
    // Joseph form keeps the posterior symmetric positive-definite.
    let ikh = Matrix4::identity() - k * h;
    let p_new = symmetrize(ikh * p * ikh.transpose() + k * rm * k.transpose());
    KeypointFilterState::with_state(x, p_new)
}

/// Update with a position and a velocity measurement, diagonal noise.
pub fn kalman_update(
    state: &KeypointFilterState,
    z_pos: &GaussianEstimate2D,
    z_vel: &GaussianEstimate2D,
) -> KeypointFilterState {
    let h = SMatrix::<f64, 4, 4>::identity();
    let z = Vector4::new(z_pos.mean.x, z_pos.mean.y, z_vel.mean.x, z_vel.mean.y);
    let r = Vector4::new(z_pos.var.x, z_pos.var.y, z_vel.var.x, z_vel.var.y);
    linear_update(state, &h, &z, &r)
}

/// Update with a position measurement only.
pub fn kalman_update_position(state: &KeypointFilterState, z_pos: &GaussianEstimate2D) -> KeypointFilterState {
    let h = SMatrix::<f64, 2, 4>::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    linear_update(state, &h, &z_pos.mean, &z_pos.var)
}

/// Belief over relative dimensions (height component normalized to 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionBelief {
    pub mean: Vec3,
    pub var: Vec3,
}

impl DimensionBelief {
    pub const FLAT_VARIANCE: f64 = 1e12;

    /// Uninformative prior.
    pub fn flat() -> Self {
        Self { mean: Vec3::new(1.0, 1.0, 1.0), var: Vec3::repeat(Self::FLAT_VARIANCE) }
    }

    pub fn new(mean: Vec3, var: Vec3) -> Self {
        Self { mean, var }
    }
}

/// Recursive per-axis inverse-variance fusion; after k updates this equals
/// batch fusion of the whole measurement history.
pub fn dim_update(belief: &DimensionBelief, obs_mean: &Vec3, obs_var: &Vec3) -> DimensionBelief {
    let mut out = *belief;
    for i in 0..3 {
        let (w0, w1) = (1.0 / belief.var[i], 1.0 / obs_var[i]);
        let var = 1.0 / (w0 + w1);
        out.var[i] = var;
        out.mean[i] = var * (w0 * belief.mean[i] + w1 * obs_mean[i]);
    }
    out
}
