//! Evaluation metrics: oriented 3D IoU, vertex reprojection error, view
//! angle errors, symmetry-aware variants and the sliding-window
//! consistency score.

use serde::{Deserialize, Serialize};

use crate::geometry::{axis_angle, project, CameraIntrinsics, Cuboid, RigidTransform, Vec3};
use crate::{Error, Result};

/// Convex polyhedron as outward-oriented (counter-clockwise seen from
/// outside) polygonal faces.
#[derive(Debug, Clone, Default)]
struct Polyhedron {
    faces: Vec<Vec<Vec3>>,
}

impl Polyhedron {
    fn from_cuboid(c: &Cuboid) -> Self {
        let v = c.vertices();
        let mut faces = Vec::with_capacity(6);
        for axis in 0..3 {
            for side in 0..2 {
                let pts: Vec<Vec3> = (0..8).filter(|i| (i >> axis) & 1 == side).map(|i| v[i]).collect();
                let sign = if side == 1 { 1.0 } else { -1.0 };
                let normal = c.pose.rotation.column(axis) * sign;
                faces.push(order_ccw(pts, &normal));
            }
        }
        Self { faces }
    }

    fn vertex_iter(&self) -> impl Iterator<Item = &Vec3> {
        self.faces.iter().flatten()
    }

    /// Keeps the part with `n·x ≤ d`.
    fn clip(self, n: &Vec3, d: f64, eps: f64) -> Polyhedron {
        let (mut any_out, mut any_in) = (false, false);
        for p in self.vertex_iter() {
            let s = n.dot(p) - d;
            any_out |= s > eps;
            any_in |= s < -eps;
        }
        if !any_out {
            return self;
        }
        if !any_in {
            return Polyhedron::default();
        }
        let mut faces = Vec::with_capacity(self.faces.len() + 1);
        let mut cap: Vec<Vec3> = Vec::new();
        for face in &self.faces {
            let mut out = Vec::with_capacity(face.len() + 1);
            for i in 0..face.len() {
                let (p, q) = (face[i], face[(i + 1) % face.len()]);
                let (dp, dq) = (n.dot(&p) - d, n.dot(&q) - d);
                if dp <= eps {
                    out.push(p);
                    if dp >= -eps {
                        cap.push(p);
                    }
                }
                if (dp < -eps && dq > eps) || (dp > eps && dq < -eps) {
                    let x = p + (q - p) * (dp / (dp - dq));
                    out.push(x);
                    cap.push(x);
                }
            }
            if out.len() >= 3 {
                faces.push(out);
            }
        }
        let cap = dedup(cap, eps);
        if cap.len() >= 3 {
            faces.push(order_ccw(cap, n));
        }
        Polyhedron { faces }
    }

    /// Divergence theorem over fan-triangulated faces.
    fn volume(&self) -> f64 {
        let mut v = 0.0;
        for f in &self.faces {
            for i in 1..f.len().saturating_sub(1) {
                v += f[0].dot(&f[i].cross(&f[i + 1]));
            }
        }
        (v / 6.0).max(0.0)
    }
}

fn dedup(points: Vec<Vec3>, eps: f64) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::with_capacity(points.len());
    for p in points {
        if out.iter().all(|q| (q - p).norm() > eps) {
            out.push(p);
        }
    }
    out
}

fn order_ccw(mut points: Vec<Vec3>, normal: &Vec3) -> Vec<Vec3> {
    let c = points.iter().fold(Vec3::zeros(), |a, p| a + p) / points.len() as f64;
    let n = normal.normalize();
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = n.cross(&helper).normalize();
    let v = n.cross(&u);
    let angle = |p: &Vec3| {
        let d = p - c;
        d.dot(&v).atan2(d.dot(&u))
    };
    points.sort_by(|a, b| angle(a).total_cmp(&angle(b)));
    points
}

/// Exact volume of the intersection of two oriented boxes.
pub fn intersection_volume(a: &Cuboid, b: &Cuboid) -> f64 {
    let scale = a.dims.0.amax().max(b.dims.0.amax()).max(a.center().amax()).max(b.center().amax());
    let eps = 1e-12 * scale.max(1.0);
    let mut poly = Polyhedron::from_cuboid(a);
    let half = b.dims.0 / 2.0;
    for axis in 0..3 {
        let n = b.pose.rotation.column(axis).into_owned();
        let c = n.dot(&b.center());
        poly = poly.clip(&n, c + half[axis], eps);
        if poly.faces.is_empty() {
            return 0.0;
        }
        poly = poly.clip(&(-n), -c + half[axis], eps);
        if poly.faces.is_empty() {
            return 0.0;
        }
    }
    poly.volume()
}

/// Oriented 3D intersection over union.
pub fn iou3d(a: &Cuboid, b: &Cuboid) -> f64 {
    let inter = intersection_volume(a, b);
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Maximize,
    Minimize,
}

/// `pred` rotated about its own local `axis` by `2πk/n`.
pub fn rotated_about_local_axis(pred: &Cuboid, axis: usize, k: usize, n: usize) -> Cuboid {
    let mut local = Vec3::zeros();
    local[axis] = 1.0;
    let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
    let r = pred.pose.rotation * axis_angle(&local, angle);
    Cuboid::new(RigidTransform::new(r, pred.pose.translation), pred.dims)
}

/// Best value of `metric` over `n` uniform rotations of the prediction
/// about its symmetry axis, and the rotation index that attains it.
pub fn symmetric_best_with_index<F>(
    pred: &Cuboid,
    gt: &Cuboid,
    axis: usize,
    n: usize,
    objective: Objective,
    mut metric: F,
) -> Result<(f64, usize)>
where
    F: FnMut(&Cuboid, &Cuboid) -> Result<f64>,
{
    let n = n.max(1);
    let mut best: Option<(f64, usize)> = None;
    for k in 0..n {
        let v = metric(&rotated_about_local_axis(pred, axis, k, n), gt)?;
        let better = match (best, objective) {
            (None, _) => true,
            (Some((b, _)), Objective::Maximize) => v > b,
            (Some((b, _)), Objective::Minimize) => v < b,
        };
        if better {
            best = Some((v, k));
        }
    }
    Ok(best.expect("n ≥ 1"))
}

pub fn symmetric_best<F>(
    pred: &Cuboid,
    gt: &Cuboid,
    axis: usize,
    n: usize,
    objective: Objective,
    metric: F,
) -> Result<f64>
where
    F: FnMut(&Cuboid, &Cuboid) -> Result<f64>,
{
    symmetric_best_with_index(pred, gt, axis, n, objective, metric).map(|(v, _)| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelNormalization {
    Diagonal,
    Width,
}

/// Mean distance between index-matched projected vertices, divided by the
/// image diagonal (or width).
pub fn pixel_error(pred: &Cuboid, gt: &Cuboid, k: &CameraIntrinsics, norm: PixelNormalization) -> Result<f64> {
    let (pv, gv) = (pred.vertices(), gt.vertices());
    let mut sum = 0.0;
    for (p, g) in pv.iter().zip(gv.iter()) {
        sum += (project(p, k)? - project(g, k)?).norm();
    }
    let denom = match norm {
        PixelNormalization::Diagonal => k.diagonal(),
        PixelNormalization::Width => k.width as f64,
    };
    Ok(sum / 8.0 / denom)
}

/// Local "forward" axis: the longer of the two horizontal axes (x and z;
/// y is the height axis).
pub fn forward_axis(dims: &Vec3) -> usize {
    if dims.z > dims.x {
        2
    } else {
        0
    }
}

fn heading_and_elevation(f: &Vec3, up: &Vec3) -> Result<(f64, f64)> {
    let f = f.normalize();
    let up = up.normalize();
    let horizontal = f - up * f.dot(&up);
    if horizontal.norm() < 1e-6 {
        return Err(Error::DegenerateHeading);
    }
    let helper = if up.x.abs() < 0.9 { Vec3::x() } else { Vec3::z() };
    let e1 = (helper - up * helper.dot(&up)).normalize();
    let e2 = up.cross(&e1);
    let azimuth = horizontal.dot(&e2).atan2(horizontal.dot(&e1));
    let elevation = f.dot(&up).clamp(-1.0, 1.0).asin();
    Ok((azimuth, elevation))
}

/// Azimuth and elevation errors in degrees between the forward axes of two
/// poses, with `up_axis` given in the same frame as the poses.
pub fn view_angles(pred: &RigidTransform, gt: &RigidTransform, up_axis: &Vec3, forward: usize) -> Result<(f64, f64)> {
    let fp = pred.rotation.column(forward).into_owned();
    let fg = gt.rotation.column(forward).into_owned();
    let (ap, ep) = heading_and_elevation(&fp, up_axis)?;
    let (ag, eg) = heading_and_elevation(&fg, up_axis)?;
    let mut da = (ap - ag).abs() % (2.0 * std::f64::consts::PI);
    if da > std::f64::consts::PI {
        da = 2.0 * std::f64::consts::PI - da;
    }
    Ok((da.to_degrees(), (ep - eg).abs().to_degrees()))
}

/// Mean pairwise IoU within each sliding window, averaged over windows.
/// Frames without a prediction contribute IoU 0 to every pair they are in.
pub fn consistency(predictions: &[Option<Cuboid>], window: usize) -> Result<f64> {
    let needed = window.max(2);
    if predictions.len() < needed {
        return Err(Error::TooFewFrames { needed, got: predictions.len() });
    }
    let n = predictions.len();
    let mut pair = vec![vec![0.0; window]; n];
    for i in 0..n {
        for d in 1..window {
            if i + d < n {
                if let (Some(a), Some(b)) = (&predictions[i], &predictions[i + d]) {
                    pair[i][d] = iou3d(a, b);
                }
            }
        }
    }
    let windows = n - window + 1;
    let pairs = (window * (window - 1) / 2) as f64;
    let mut total = 0.0;
    for s in 0..windows {
        let mut sum = 0.0;
        for i in s..s + window {
            for j in i + 1..s + window {
                sum += pair[i][j - i];
            }
        }
        total += sum / pairs;
    }
    Ok(total / windows as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Scores: a frame counts when `value ≥ threshold`.
    HigherIsBetter,
    /// Errors: a frame counts when `value < threshold`.
    LowerIsBetter,
}

/// Fraction of frames meeting the threshold.
pub fn ap_at_threshold(values: &[f64], threshold: f64, direction: Direction) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = values
        .iter()
        .filter(|v| match direction {
            Direction::HigherIsBetter => **v >= threshold,
            Direction::LowerIsBetter => **v < threshold,
        })
        .count();
    Ok(hits as f64 / values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    pub iou_threshold: f64,
    pub azimuth_threshold_deg: f64,
    pub elevation_threshold_deg: f64,
    pub symmetry_samples: usize,
    pub consistency_window: usize,
    pub pixel_normalization: PixelNormalization,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            azimuth_threshold_deg: 15.0,
            elevation_threshold_deg: 10.0,
            symmetry_samples: 100,
            consistency_window: 5,
            pixel_normalization: PixelNormalization::Diagonal,
        }
    }
}

/// One ground-truth object in one frame, with its matched prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameResult {
    /// Camera frame, metric scale.
    pub predicted: Option<Cuboid>,
    /// Camera frame.
    pub gt: Cuboid,
    pub cam_to_world: RigidTransform,
    pub intrinsics: CameraIntrinsics,
    pub symmetric: bool,
}

/// Index of the local axis symmetric boxes rotate about.
pub const SYMMETRY_AXIS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub iou: f64,
    pub pixel_error: Option<f64>,
    pub azimuth_error_deg: Option<f64>,
    pub elevation_error_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ap_iou50: f64,
    /// `None` when no frame had a prediction.
    pub mean_pixel_error: Option<f64>,
    pub ap_azimuth15: f64,
    pub ap_elevation10: f64,
    pub consistency: f64,
}

/// Per-frame metrics for one object track.
pub fn frame_metrics(f: &FrameResult, up_world: &Vec3, opts: &MetricOptions) -> Result<FrameMetrics> {
    let Some(pred) = f.predicted else {
        return Ok(FrameMetrics { iou: 0.0, pixel_error: None, azimuth_error_deg: None, elevation_error_deg: None });
    };
    let n = opts.symmetry_samples;
    let up_cam = f.cam_to_world.rotation.transpose() * up_world;
    let forward = forward_axis(&f.gt.dims.0);
    let azimuth =
        |a: &Cuboid, b: &Cuboid| Ok(view_angles(&a.pose, &b.pose, &up_cam, forward).map_or(f64::INFINITY, |v| v.0));
    // Each metric takes its own best rotation: IoU of a square section
    // ties under quarter turns, so the IoU-best rotation says nothing
    // about heading.
    let (iou, aligned) = if f.symmetric {
        let iou = symmetric_best(&pred, &f.gt, SYMMETRY_AXIS, n, Objective::Maximize, |a, b| Ok(iou3d(a, b)))?;
        let (_, k) = symmetric_best_with_index(&pred, &f.gt, SYMMETRY_AXIS, n, Objective::Minimize, azimuth)?;
        (iou, rotated_about_local_axis(&pred, SYMMETRY_AXIS, k, n.max(1)))
    } else {
        (iou3d(&pred, &f.gt), pred)
    };
    let px = |c: &Cuboid, g: &Cuboid| pixel_error(c, g, &f.intrinsics, opts.pixel_normalization);
    let pixel = if f.symmetric {
        symmetric_best(&pred, &f.gt, SYMMETRY_AXIS, opts.symmetry_samples, Objective::Minimize, px)
    } else {
        px(&pred, &f.gt)
    };
    let angles = view_angles(&aligned.pose, &f.gt.pose, &up_cam, forward).ok();
    Ok(FrameMetrics {
        iou,
        pixel_error: pixel.ok(),
        azimuth_error_deg: angles.map(|a| a.0),
        elevation_error_deg: angles.map(|a| a.1),
    })
}

/// Metrics over one object's frame sequence.
pub fn evaluate(
    frames: &[FrameResult],
    up_world: &Vec3,
    opts: &MetricOptions,
) -> Result<(MetricReport, Vec<FrameMetrics>)> {
    if frames.is_empty() {
        return Err(Error::EmptyInput);
    }
    let per: Vec<FrameMetrics> = frames.iter().map(|f| frame_metrics(f, up_world, opts)).collect::<Result<_>>()?;
    let ious: Vec<f64> = per.iter().map(|m| m.iou).collect();
    let az: Vec<f64> = per.iter().map(|m| m.azimuth_error_deg.unwrap_or(f64::INFINITY)).collect();
    let el: Vec<f64> = per.iter().map(|m| m.elevation_error_deg.unwrap_or(f64::INFINITY)).collect();
    let px: Vec<f64> = per.iter().filter_map(|m| m.pixel_error).collect();
    let world: Vec<Option<Cuboid>> =
        frames.iter().map(|f| f.predicted.map(|p| p.transformed(&f.cam_to_world))).collect();
    let report = MetricReport {
        ap_iou50: ap_at_threshold(&ious, opts.iou_threshold, Direction::HigherIsBetter)?,
        mean_pixel_error: (!px.is_empty()).then(|| px.iter().sum::<f64>() / px.len() as f64),
        ap_azimuth15: ap_at_threshold(&az, opts.azimuth_threshold_deg, Direction::LowerIsBetter)?,
        ap_elevation10: ap_at_threshold(&el, opts.elevation_threshold_deg, Direction::LowerIsBetter)?,
        consistency: consistency(&world, opts.consistency_window)?,
    };
    Ok((report, per))
}

/// Frame-weighted mean of several reports.
pub fn aggregate(reports: &[(MetricReport, usize)]) -> Option<MetricReport> {
    let total: usize = reports.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return None;
    }
    let w =
        |f: &dyn Fn(&MetricReport) -> f64| reports.iter().map(|(r, n)| f(r) * *n as f64).sum::<f64>() / total as f64;
    let px: Vec<(f64, usize)> = reports.iter().filter_map(|(r, n)| r.mean_pixel_error.map(|p| (p, *n))).collect();
    let px_total: usize = px.iter().map(|(_, n)| n).sum();
    Some(MetricReport {
        ap_iou50: w(&|r| r.ap_iou50),
        mean_pixel_error: (px_total > 0).then(|| px.iter().map(|(p, n)| p * *n as f64).sum::<f64>() / px_total as f64),
        ap_azimuth15: w(&|r| r.ap_azimuth15),
        ap_elevation10: w(&|r| r.ap_elevation10),
        consistency: w(&|r| r.consistency),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CuboidDimensions;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit_at(t: Vec3) -> Cuboid {
        Cuboid::new(RigidTransform::from_translation(t), CuboidDimensions::new(1.0, 1.0, 1.0))
    }

    #[test]
    fn iou_analytic_cases() {
        let a = unit_at(Vec3::zeros());
        assert!((iou3d(&a, &a) - 1.0).abs() < 1e-9);
        assert_eq!(iou3d(&a, &unit_at(Vec3::new(3.0, 0.0, 0.0))), 0.0);
        assert!((iou3d(&a, &unit_at(Vec3::new(0.5, 0.0, 0.0))) - 1.0 / 3.0).abs() < 1e-9);
        // touching faces
        assert!(iou3d(&a, &unit_at(Vec3::new(1.0, 0.0, 0.0))).abs() < 1e-9);
    }

    #[test]
    fn iou_nested_boxes() {
        let big = Cuboid::new(RigidTransform::identity(), CuboidDimensions::new(2.0, 2.0, 2.0));
        let small = unit_at(Vec3::new(0.2, -0.1, 0.3));
        assert!((iou3d(&big, &small) - 1.0 / 8.0).abs() < 1e-9);
    }

    #[test]
    fn iou_rotated_square_prism() {
        // Unit square rotated 45° about z overlaps the axis-aligned one in a
        // regular octagon of area 2(√2 − 1).
        let a = unit_at(Vec3::zeros());
        let b = Cuboid::new(RigidTransform::from_axis_angle(&Vec3::z(), PI / 4.0), a.dims);
        let inter = 2.0 * (2f64.sqrt() - 1.0);
        assert!((iou3d(&a, &b) - inter / (2.0 - inter)).abs() < 1e-9);
    }

    #[test]
    fn symmetric_alignment() {
        let dims = CuboidDimensions::new(1.0, 2.0, 1.0);
        let gt = Cuboid::new(RigidTransform::from_translation(Vec3::new(0.0, 0.0, 3.0)), dims);
        let yawed = Cuboid::new(RigidTransform::new(axis_angle(&Vec3::y(), PI / 4.0), gt.pose.translation), dims);
        let plain = iou3d(&yawed, &gt);
        let best = symmetric_best(&yawed, &gt, 1, 100, Objective::Maximize, |a, b| Ok(iou3d(a, b))).unwrap();
        // The nearest grid rotation is 1.8° off alignment; IoU of two unit
        // squares 1.8° apart, computed independently with shapely.
        assert!((best - 0.970009894236195).abs() < 1e-9, "best = {best}");
        let on_grid =
            Cuboid::new(RigidTransform::new(axis_angle(&Vec3::y(), 43.2f64.to_radians()), gt.pose.translation), dims);
        let aligned = symmetric_best(&on_grid, &gt, 1, 100, Objective::Maximize, |a, b| Ok(iou3d(a, b))).unwrap();
        assert!(aligned >= 0.99);
        assert!(best >= plain);
        let same = symmetric_best(&gt, &gt, 1, 100, Objective::Maximize, |a, b| Ok(iou3d(a, b))).unwrap();
        assert!((same - 1.0).abs() < 1e-9);
        let one = symmetric_best(&yawed, &gt, 1, 1, Objective::Maximize, |a, b| Ok(iou3d(a, b))).unwrap();
        assert_eq!(one, plain);
    }

    #[test]
    fn pixel_error_cases() {
        let k = CameraIntrinsics { width: 640, height: 480, ..Default::default() };
        assert_eq!(k.diagonal(), 800.0);
        let gt = unit_at(Vec3::new(0.0, 0.0, 6.0));
        assert_eq!(pixel_error(&gt, &gt, &k, PixelNormalization::Diagonal).unwrap(), 0.0);
    }

    #[test]
    fn pixel_error_shifted_prediction() {
        // Near-flat box: every vertex sits at depth z, so a lateral shift of
        // 5·z/f moves each projection by exactly 5 px.
        let k = CameraIntrinsics::default();
        let z = 6.0;
        let dims = CuboidDimensions::new(1.0, 1.0, 1e-9);
        let gt = Cuboid::new(RigidTransform::from_translation(Vec3::new(0.0, 0.0, z)), dims);
        let dx = 5.0 * z / k.fx;
        let pred = Cuboid::new(RigidTransform::from_translation(Vec3::new(dx, 0.0, z)), dims);
        let e = pixel_error(&pred, &gt, &k, PixelNormalization::Diagonal).unwrap();
        assert!((e - 5.0 / 800.0).abs() < 1e-9);
        let w = pixel_error(&pred, &gt, &k, PixelNormalization::Width).unwrap();
        assert!((w - 5.0 / 640.0).abs() < 1e-9);
    }

    #[test]
    fn permuted_vertices_increase_error() {
        let k = CameraIntrinsics::default();
        let gt = Cuboid::new(
            RigidTransform::from_translation(Vec3::new(0.0, 0.0, 5.0)),
            CuboidDimensions::new(1.0, 0.5, 2.0),
        );
        // 180° about y swaps vertex indices but covers the same volume.
        let flipped = Cuboid::new(RigidTransform::new(axis_angle(&Vec3::y(), PI), gt.pose.translation), gt.dims);
        assert!((iou3d(&flipped, &gt) - 1.0).abs() < 1e-9);
        assert!(pixel_error(&flipped, &gt, &k, PixelNormalization::Diagonal).unwrap() > 0.0);
    }

    #[test]
    fn view_angle_cases() {
        let up = Vec3::y();
        let id = RigidTransform::identity();
        assert_eq!(view_angles(&id, &id, &up, 0).unwrap(), (0.0, 0.0));
        let yaw = RigidTransform::from_axis_angle(&up, 15f64.to_radians());
        let (az, el) = view_angles(&yaw, &id, &up, 0).unwrap();
        assert!((az - 15.0).abs() < 1e-9 && el.abs() < 1e-9);
        let pitch = RigidTransform::from_axis_angle(&Vec3::z(), 10f64.to_radians());
        let (az, el) = view_angles(&pitch, &id, &up, 0).unwrap();
        assert!(az.abs() < 1e-9 && (el - 10.0).abs() < 1e-9);
        let wrap = RigidTransform::from_axis_angle(&up, 350f64.to_radians());
        assert!((view_angles(&wrap, &id, &up, 0).unwrap().0 - 10.0).abs() < 1e-9);
        let vertical = RigidTransform::from_axis_angle(&Vec3::z(), PI / 2.0);
        assert_eq!(view_angles(&vertical, &id, &up, 0), Err(Error::DegenerateHeading));
    }

    #[test]
    fn consistency_cases() {
        let a = unit_at(Vec3::zeros());
        let b = unit_at(Vec3::new(5.0, 0.0, 0.0));
        assert!((consistency(&[Some(a); 12], 5).unwrap() - 1.0).abs() < 1e-9);
        let alt: Vec<_> = (0..5).map(|i| Some(if i % 2 == 0 { a } else { b })).collect();
        assert!((consistency(&alt, 5).unwrap() - 0.4).abs() < 1e-9);
        let alt: Vec<_> = (0..9).map(|i| Some(if i % 2 == 0 { a } else { b })).collect();
        assert!((consistency(&alt, 5).unwrap() - 0.4).abs() < 1e-9);
        assert!(matches!(consistency(&[Some(a); 4], 5), Err(Error::TooFewFrames { .. })));
        let gaps = [Some(a), None, Some(a), Some(a), Some(a)];
        assert!((consistency(&gaps, 5).unwrap() - 0.6).abs() < 1e-9);
    }

    #[test]
    fn ap_cases() {
        assert_eq!(ap_at_threshold(&[1.0; 4], 0.5, Direction::HigherIsBetter).unwrap(), 1.0);
        assert_eq!(ap_at_threshold(&[0.6, 0.4, 0.6, 0.4], 0.5, Direction::HigherIsBetter).unwrap(), 0.5);
        assert_eq!(ap_at_threshold(&[], 0.5, Direction::HigherIsBetter), Err(Error::EmptyInput));
        assert_eq!(ap_at_threshold(&[15.0, 14.9], 15.0, Direction::LowerIsBetter).unwrap(), 0.5);
    }

    #[test]
    fn perfect_predictions_report() {
        let k = CameraIntrinsics::default();
        let gt = Cuboid::new(
            RigidTransform::new(axis_angle(&Vec3::y(), 0.3), Vec3::new(0.1, 0.2, 3.0)),
            CuboidDimensions::new(0.4, 0.3, 0.6),
        );
        let frames: Vec<_> = (0..10)
            .map(|_| FrameResult {
                predicted: Some(gt),
                gt,
                cam_to_world: RigidTransform::identity(),
                intrinsics: k,
                symmetric: false,
            })
            .collect();
        let (r, _) = evaluate(&frames, &Vec3::new(0.0, -1.0, 0.0), &MetricOptions::default()).unwrap();
        assert_eq!(r.ap_iou50, 1.0);
        assert_eq!(r.mean_pixel_error, Some(0.0));
        assert!((r.consistency - 1.0).abs() < 1e-9);
        assert_eq!(r.ap_azimuth15, 1.0);
    }

    #[test]
    fn symmetric_heading_ignores_quarter_turns() {
        let k = CameraIntrinsics::default();
        let gt = Cuboid::new(
            RigidTransform::from_translation(Vec3::new(0.0, 0.0, 3.0)),
            CuboidDimensions::new(0.3, 0.8, 0.3),
        );
        let turned =
            Cuboid::new(RigidTransform::new(axis_angle(&Vec3::y(), PI / 2.0 + 0.01), gt.pose.translation), gt.dims);
        let up = Vec3::new(0.0, -1.0, 0.0);
        let f = |symmetric| FrameResult {
            predicted: Some(turned),
            gt,
            cam_to_world: RigidTransform::identity(),
            intrinsics: k,
            symmetric,
        };
        let opts = MetricOptions::default();
        let sym = frame_metrics(&f(true), &up, &opts).unwrap();
        assert!(sym.azimuth_error_deg.unwrap() < 1.8 + 1e-9);
        let plain = frame_metrics(&f(false), &up, &opts).unwrap();
        assert!(plain.azimuth_error_deg.unwrap() > 89.0);
    }

    fn arb_box() -> impl Strategy<Value = Cuboid> {
        (
            prop::array::uniform3(-1.0..1.0f64),
            -PI..PI,
            prop::array::uniform3(-0.5..0.5f64),
            prop::array::uniform3(0.3..2.0f64),
        )
            .prop_filter("axis", |(a, ..)| Vec3::from(*a).norm() > 1e-2)
            .prop_map(|(a, ang, t, d)| {
                Cuboid::new(
                    RigidTransform::new(axis_angle(&Vec3::from(a), ang), Vec3::from(t)),
                    CuboidDimensions(Vec3::from(d)),
                )
            })
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_rigid_invariant(a in arb_box(), b in arb_box(), ang in -PI..PI, t in prop::array::uniform3(-5.0..5.0f64)) {
            let ab = iou3d(&a, &b);
            prop_assert!((ab - iou3d(&b, &a)).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&ab));
            let m = RigidTransform::new(axis_angle(&Vec3::new(0.3, -0.5, 0.8), ang), Vec3::from(t));
            prop_assert!((ab - iou3d(&a.transformed(&m), &b.transformed(&m))).abs() < 1e-9);
            prop_assert!((iou3d(&a, &a) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn symmetric_never_worse(a in arb_box(), b in arb_box()) {
            let best = symmetric_best(&a, &b, 1, 12, Objective::Maximize, |x, y| Ok(iou3d(x, y))).unwrap();
            prop_assert!(best >= iou3d(&a, &b));
        }
    }
}
