//! Pinhole camera, rigid transforms and cuboid construction.
//!
//! Camera frame is right-handed with +z forward, +x right and +y down, so
//! image coordinates grow right and down.

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(rename = "w")]
    pub width: u32,
    #[serde(rename = "h")]
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid intrinsics {self:?}")))
        }
    }

    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width as f64 && p.y < self.height as f64
    }

    /// Back-projects a pixel to the camera-frame point at the given depth.
    pub fn unproject(&self, pixel: &Vec2, depth: f64) -> Vec3 {
        Vec3::new((pixel.x - self.cx) / self.fx * depth, (pixel.y - self.cy) / self.fy * depth, depth)
    }
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self { fx: 600.0, fy: 600.0, cx: 320.0, cy: 240.0, width: 640, height: 480 }
    }
}

/// Projects a camera-frame point to pixel coordinates.
pub fn project(point: &Vec3, k: &CameraIntrinsics) -> Result<Vec2> {
    if point.z <= 0.0 {
        return Err(Error::NonPositiveDepth(point.z));
    }
    Ok(Vec2::new(k.fx * point.x / point.z + k.cx, k.fy * point.y / point.z + k.cy))
}

/// Rotation followed by translation: `x ↦ R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self { rotation: Mat3::identity(), translation }
    }

    /// Rotation by `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        Self { rotation: axis_angle(axis, angle), translation: Vec3::zeros() }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -(rt * self.translation) }
    }

    /// Row-major rotation entries.
    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]]
    }

    pub fn from_row_major(r: &[f64; 9], t: &[f64; 3]) -> RigidTransform {
        RigidTransform { rotation: Mat3::from_row_slice(r), translation: Vec3::new(t[0], t[1], t[2]) }
    }

    /// Checks orthonormality and a positive determinant within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let rtr = self.rotation.transpose() * self.rotation;
        (rtr - Mat3::identity()).amax() <= tol && (self.rotation.determinant() - 1.0).abs() <= tol
    }

    /// Geodesic angle between the two rotations, in radians.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        rotation_angle(&(self.rotation.transpose() * other.rotation))
    }
}

pub fn axis_angle(axis: &Vec3, angle: f64) -> Mat3 {
    let n = axis.norm();
    if n == 0.0 || angle == 0.0 {
        return Mat3::identity();
    }
    Rotation3::from_axis_angle(&nalgebra::Unit::new_unchecked(axis / n), angle).into_inner()
}

/// Rodrigues exponential of a rotation vector.
pub fn so3_exp(omega: &Vec3) -> Mat3 {
    Rotation3::new(*omega).into_inner()
}

pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Angle of a rotation matrix, robust near 0 and π.
pub fn rotation_angle(r: &Mat3) -> f64 {
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let sin = 0.5 * Vec3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm();
    sin.atan2(cos)
}

/// Nearest rotation matrix in the Frobenius sense.
pub fn orthonormalize(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Mat3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

/// Relative width / height / length of a cuboid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuboidDimensions(pub Vec3);

impl CuboidDimensions {
    pub fn new(w: f64, h: f64, l: f64) -> Self {
        Self(Vec3::new(w, h, l))
    }

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|d| d.is_finite() && *d > 0.0)
    }

    /// Rescaled so the height component is 1.
    pub fn normalized(&self) -> Self {
        Self(self.0 / self.0.y)
    }

    pub fn volume(&self) -> f64 {
        self.0.x * self.0.y * self.0.z
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0 * s)
    }
}

/// Local-frame sign pattern of vertex `i`: bit 0 drives x, bit 1 y, bit 2 z;
/// a set bit means the positive half-extent.
pub fn vertex_signs(i: usize) -> Vec3 {
    let s = |bit: usize| if (i >> bit) & 1 == 1 { 1.0 } else { -1.0 };
    Vec3::new(s(0), s(1), s(2))
}

/// The 8 cuboid vertices in the canonical binary order (x fastest).
pub fn cuboid_vertices(dims: &CuboidDimensions, pose: &RigidTransform) -> [Vec3; 8] {
    let half = dims.0 / 2.0;
    std::array::from_fn(|i| pose.transform_point(&vertex_signs(i).component_mul(&half)))
}

/// An oriented box: `pose` maps the box-local frame (centered, axis-aligned)
/// into the reference frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cuboid {
    pub pose: RigidTransform,
    pub dims: CuboidDimensions,
}

impl Cuboid {
    pub fn new(pose: RigidTransform, dims: CuboidDimensions) -> Self {
        Self { pose, dims }
    }

    pub fn vertices(&self) -> [Vec3; 8] {
        cuboid_vertices(&self.dims, &self.pose)
    }

    pub fn center(&self) -> Vec3 {
        self.pose.translation
    }

    pub fn volume(&self) -> f64 {
        self.dims.volume()
    }

    /// The same box expressed in another frame: `frame ∘ pose`.
    pub fn transformed(&self, frame: &RigidTransform) -> Cuboid {
        Cuboid { pose: frame.compose(&self.pose), dims: self.dims }
    }

    /// Uniform scaling of the box about the reference origin.
    pub fn scaled(&self, s: f64) -> Cuboid {
        Cuboid { pose: RigidTransform::new(self.pose.rotation, self.pose.translation * s), dims: self.dims.scaled(s) }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let local = self.pose.rotation.transpose() * (p - self.pose.translation);
        let half = self.dims.0 / 2.0;
        local.x.abs() <= half.x && local.y.abs() <= half.y && local.z.abs() <= half.z
    }

    /// Projected vertices followed by the projected center.
    pub fn project_keypoints(&self, k: &CameraIntrinsics) -> Result<[Vec2; 9]> {
        let v = self.vertices();
        let mut out = [Vec2::zeros(); 9];
        for (o, p) in out.iter_mut().zip(v.iter()) {
            *o = project(p, k)?;
        }
        out[8] = project(&self.center(), k)?;
        Ok(out)
    }
}
