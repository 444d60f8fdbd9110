//! Weighted perspective-n-point by Levenberg-Marquardt.
//!
//! The pose is updated multiplicatively, `R ← exp([ω]×)·R`, `t ← t + δt`,
//! so the Jacobian is taken with respect to the 6-vector `(ω, δt)` at zero.
//! Without an initial guess the solver bootstraps from a direct linear
//! transform on normalized image coordinates.

use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix3x4, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::geometry::{
    cuboid_vertices, orthonormalize, project, skew, so3_exp, CameraIntrinsics, CuboidDimensions, Mat3, RigidTransform,
    Vec2, Vec3,
};
use crate::{Error, Result};

type Vec6 = SVector<f64, 6>;
type Mat6 = SMatrix<f64, 6, 6>;

#[derive(Debug, Clone, PartialEq)]
pub struct PnPProblem {
    pub image_points: Vec<Vec2>,
    /// Per-axis inverse variances.
    pub weights: Vec<Vec2>,
    pub model_points: Vec<Vec3>,
    pub intrinsics: CameraIntrinsics,
}

impl PnPProblem {
    pub fn new(
        image_points: Vec<Vec2>,
        weights: Vec<Vec2>,
        model_points: Vec<Vec3>,
        intrinsics: CameraIntrinsics,
    ) -> Result<Self> {
        if image_points.len() != model_points.len() || weights.len() != model_points.len() {
            return Err(Error::Degenerate("correspondence lengths differ".into()));
        }
        if weights.iter().any(|w| !(w.x > 0.0 && w.y > 0.0 && w.x.is_finite() && w.y.is_finite())) {
            return Err(Error::Degenerate("weights must be positive and finite".into()));
        }
        Ok(Self { image_points, weights, model_points, intrinsics })
    }

    /// Correspondences for the 8 cuboid vertices of `dims` at the canonical
    /// pose, optionally followed by the box center at the origin.
    ///
    /// `image_points` and `variances` are indexed like
    /// [`cuboid_vertices`], with the center at index 8.
    pub fn from_cuboid(
        dims: &CuboidDimensions,
        image_points: &[Vec2; 9],
        variances: &[Vec2; 9],
        intrinsics: CameraIntrinsics,
        include_center: bool,
    ) -> Result<Self> {
        let n = if include_center { 9 } else { 8 };
        let mut model: Vec<Vec3> = cuboid_vertices(dims, &RigidTransform::identity()).to_vec();
        if include_center {
            model.push(Vec3::zeros());
        }
        let weights = variances[..n].iter().map(|v| v.map(|x| 1.0 / x)).collect();
        Self::new(image_points[..n].to_vec(), weights, model, intrinsics)
    }

    pub fn len(&self) -> usize {
        self.model_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model_points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseEstimate {
    pub pose: RigidTransform,
    /// Unweighted RMS reprojection distance in pixels.
    pub reprojection_rmse: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub initial_damping: f64,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 100, initial_damping: 1e-3, gradient_tolerance: 1e-8, step_tolerance: 1e-10 }
    }
}

/// Left-multiplied rotation increment followed by a translation increment.
pub fn apply_increment(pose: &RigidTransform, delta: &Vec6) -> RigidTransform {
    let omega = Vec3::new(delta[0], delta[1], delta[2]);
    let dt = Vec3::new(delta[3], delta[4], delta[5]);
    RigidTransform::new(orthonormalize(&(so3_exp(&omega) * pose.rotation)), pose.translation + dt)
}

/// Weighted residuals `√w ⊙ (π(R·X + t) − u)` per correspondence.
pub fn reprojection_residuals(pose: &RigidTransform, problem: &PnPProblem) -> Result<Vec<Vec2>> {
    problem
        .model_points
        .iter()
        .zip(&problem.image_points)
        .zip(&problem.weights)
        .map(|((x, u), w)| {
            let p = project(&pose.transform_point(x), &problem.intrinsics)?;
            Ok((p - u).component_mul(&w.map(f64::sqrt)))
        })
        .collect()
}

/// Stacked weighted residuals (length 2N) and their Jacobian (2N × 6).
pub fn residuals_and_jacobian(pose: &RigidTransform, problem: &PnPProblem) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = problem.len();
    let k = &problem.intrinsics;
    let mut r = DVector::zeros(2 * n);
    let mut j = DMatrix::zeros(2 * n, 6);
    for (i, ((x, u), w)) in problem.model_points.iter().zip(&problem.image_points).zip(&problem.weights).enumerate() {
        let rx = pose.rotation * x;
        let pc = rx + pose.translation;
        if pc.z <= 0.0 {
            return Err(Error::NonPositiveDepth(pc.z));
        }
        let iz = 1.0 / pc.z;
        let proj = Vec2::new(k.fx * pc.x * iz + k.cx, k.fy * pc.y * iz + k.cy);
        let sw = w.map(f64::sqrt);
        let res = (proj - u).component_mul(&sw);
        r[2 * i] = res.x;
        r[2 * i + 1] = res.y;

        let dproj = Matrix2x3::new(k.fx * iz, 0.0, -k.fx * pc.x * iz * iz, 0.0, k.fy * iz, -k.fy * pc.y * iz * iz);
        let d_omega = dproj * (-skew(&rx));
        for c in 0..3 {
            j[(2 * i, c)] = sw.x * d_omega[(0, c)];
            j[(2 * i + 1, c)] = sw.y * d_omega[(1, c)];
            j[(2 * i, 3 + c)] = sw.x * dproj[(0, c)];
            j[(2 * i + 1, 3 + c)] = sw.y * dproj[(1, c)];
        }
    }
    Ok((r, j))
}

fn check_degenerate(problem: &PnPProblem) -> Result<()> {
    if problem.len() < 4 {
        return Err(Error::Degenerate(format!("need at least 4 points, got {}", problem.len())));
    }
    let n = problem.len() as f64;
    let mean = problem.image_points.iter().fold(Vec2::zeros(), |a, p| a + p) / n;
    let mut cov = nalgebra::Matrix2::zeros();
    for p in &problem.image_points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let ev = cov.symmetric_eigenvalues();
    let (lo, hi) = (ev.min(), ev.max());
    if hi <= 0.0 || lo <= 1e-12 * hi {
        return Err(Error::Degenerate("image points are collinear".into()));
    }
    Ok(())
}

/// Direct linear transform on normalized image coordinates, projected onto
/// a rigid pose. Needs at least 6 correspondences.
pub fn dlt_pose(problem: &PnPProblem) -> Option<RigidTransform> {
    let n = problem.len();
    if n < 6 {
        return None;
    }
    let k = &problem.intrinsics;
    let centroid = problem.model_points.iter().fold(Vec3::zeros(), |a, p| a + p) / n as f64;
    let spread = problem.model_points.iter().map(|p| (p - centroid).norm()).sum::<f64>() / n as f64;
    if spread <= 0.0 {
        return None;
    }
    let scale = spread / 3f64.sqrt();

    let mut a = DMatrix::zeros(2 * n, 12);
    for (i, (x, u)) in problem.model_points.iter().zip(&problem.image_points).enumerate() {
        let xn = (u.x - k.cx) / k.fx;
        let yn = (u.y - k.cy) / k.fy;
        let xh = [(x.x - centroid.x) / scale, (x.y - centroid.y) / scale, (x.z - centroid.z) / scale, 1.0];
        for c in 0..4 {
            a[(2 * i, c)] = xh[c];
            a[(2 * i, 8 + c)] = -xn * xh[c];
            a[(2 * i + 1, 4 + c)] = xh[c];
            a[(2 * i + 1, 8 + c)] = -yn * xh[c];
        }
    }
    // Smallest right singular vector via the 12×12 normal matrix.
    let ata = a.transpose() * &a;
    let eig = ata.symmetric_eigen();
    let (imin, _) = eig.eigenvalues.iter().enumerate().min_by(|x, y| x.1.total_cmp(y.1))?;
    let p = eig.eigenvectors.column(imin);
    let mut pm = Matrix3x4::from_row_slice(p.as_slice());

    // Undo the model normalization: X' = (X − c)/s.
    let m_norm: Mat3 = pm.fixed_view::<3, 3>(0, 0).into_owned();
    let m = m_norm / scale;
    let p4 = pm.column(3).into_owned() - m * centroid;
    pm.fixed_view_mut::<3, 3>(0, 0).copy_from(&m);
    pm.set_column(3, &p4);

    let in_front = problem.model_points.iter().filter(|x| (m.row(2) * **x)[0] + p4.z > 0.0).count();
    if 2 * in_front < n {
        pm = -pm;
    }
    let m: Mat3 = pm.fixed_view::<3, 3>(0, 0).into_owned();
    let svd = m.svd(false, false);
    let s = svd.singular_values.mean();
    if !(s > 0.0) {
        return None;
    }
    let rotation = orthonormalize(&m);
    let t = pm.column(3).into_owned() / s;
    let pose = RigidTransform::new(rotation, t);
    pose.rotation.iter().all(|v| v.is_finite()).then_some(pose)
}

/// Crude pose for too few points for the DLT: identity rotation, depth
/// from the ratio of model to image spread.
fn centroid_pose(problem: &PnPProblem) -> RigidTransform {
    let n = problem.len() as f64;
    let k = &problem.intrinsics;
    let mc = problem.model_points.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let ic = problem.image_points.iter().fold(Vec2::zeros(), |a, p| a + p) / n;
    let model_spread = problem.model_points.iter().map(|p| (p - mc).norm()).sum::<f64>() / n;
    let image_spread = problem.image_points.iter().map(|p| (p - ic).norm()).sum::<f64>() / n;
    let f = 0.5 * (k.fx + k.fy);
    let depth = if image_spread > 0.0 { f * model_spread / image_spread } else { 1.0 };
    let depth = depth.max(10.0 * model_spread).max(1e-6);
    RigidTransform::from_translation(k.unproject(&ic, depth) - mc)
}

fn rmse(pose: &RigidTransform, problem: &PnPProblem) -> f64 {
    let sum: f64 = problem
        .model_points
        .iter()
        .zip(&problem.image_points)
        .map(|(x, u)| {
            project(&pose.transform_point(x), &problem.intrinsics).map_or(f64::INFINITY, |p| (p - u).norm_squared())
        })
        .sum();
    (sum / problem.len() as f64).sqrt()
}

fn cost(pose: &RigidTransform, problem: &PnPProblem) -> Option<f64> {
    reprojection_residuals(pose, problem).ok().map(|r| r.iter().map(|v| v.norm_squared()).sum())
}

/// Minimizes the weighted squared reprojection error.
///
/// Returns the best pose found; `converged` is false when the iteration
/// budget ran out with the gradient still above tolerance.
pub fn solve_pnp(problem: &PnPProblem, init: Option<&RigidTransform>, opts: &LmOptions) -> Result<PoseEstimate> {
    check_degenerate(problem)?;
    let candidates = [init.copied(), dlt_pose(problem), Some(centroid_pose(problem))];
    let mut pose = candidates
        .into_iter()
        .flatten()
        .find(|p| cost(p, problem).is_some())
        .ok_or_else(|| Error::Degenerate("no initial pose with positive depths".into()))?;

    let mut lambda = opts.initial_damping;
    let mut iterations = 0;
    let mut converged = false;
    let (mut r, mut j) = residuals_and_jacobian(&pose, problem)?;
    let mut current = r.norm_squared();

    while iterations < opts.max_iterations {
        let g: Vec6 = (j.transpose() * &r).fixed_rows::<6>(0).into_owned();
        if g.amax() < opts.gradient_tolerance {
            converged = true;
            break;
        }
        let h: Mat6 = (j.transpose() * &j).fixed_view::<6, 6>(0, 0).into_owned();
        iterations += 1;

        let mut damped = h;
        for i in 0..6 {
            damped[(i, i)] += lambda * h[(i, i)].max(1e-12);
        }
        let Some(delta) = damped.cholesky().map(|c| c.solve(&(-g))) else {
            lambda *= 10.0;
            continue;
        };
        if delta.norm() < opts.step_tolerance {
            converged = true;
            break;
        }
        let trial = apply_increment(&pose, &delta);
        match cost(&trial, problem) {
            Some(c) if c < current => {
                pose = trial;
                current = c;
                lambda = (lambda * 0.1).max(1e-15);
                (r, j) = residuals_and_jacobian(&pose, problem)?;
            }
            _ => lambda *= 10.0,
        }
    }
    if !converged {
        let g = j.transpose() * &r;
        converged = g.amax() < opts.gradient_tolerance;
    }
    Ok(PoseEstimate { pose, reprojection_rmse: rmse(&pose, problem), converged, iterations })
}
