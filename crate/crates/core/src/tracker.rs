//! Per-frame tracking loop.
//!
//! Each frame, observations are associated to tracklets. For every vertex
//! and the center, the previous filtered position moved by the observed
//! offset is fused with the heatmap peak, the result drives a
//! constant-velocity Kalman filter, relative dimensions are fused over
//! time, and PnP turns the filtered points into a pose. The posterior
//! points are then rendered into the conditioning maps for the next frame.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::filtering::{
    bayes_fuse, dim_update, kalman_predict, kalman_update, kalman_update_position, DimensionBelief, FilterConfig,
    GaussianEstimate2D, KeypointFilterState,
};
use crate::geometry::{axis_angle, CameraIntrinsics, Cuboid, CuboidDimensions, RigidTransform, Vec2, Vec3};
use crate::heatmap::{render_scale, ConditioningMaps, PeakDetection};
use crate::pnp::{solve_pnp, LmOptions, PnPProblem, PoseEstimate};
use crate::{Error, Result};

/// Index of the center among the tracked points; vertices are `0..8`.
pub const CENTER: usize = 8;

/// Variance given to a vertex that has never been observed.
const UNKNOWN_VARIANCE: f64 = 1e6;

/// One detected object in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub center_peak: PeakDetection,
    pub keypoint_peaks: [Option<PeakDetection>; 8],
    /// Displacement of each vertex since the previous frame.
    pub keypoint_offsets: [Option<GaussianEstimate2D>; 8],
    /// Displacement of the center since the previous frame.
    pub center_offset: Option<GaussianEstimate2D>,
    /// Relative dimensions, height component 1.
    pub dims_mean: Vec3,
    pub dims_var: Vec3,
    /// 2D box size in pixels.
    pub bbox2d: Vec2,
}

impl Observation {
    /// Peak of vertex `k`, or of the center for `k == CENTER`.
    pub fn peak(&self, k: usize) -> Option<GaussianEstimate2D> {
        let p = if k == CENTER { Some(&self.center_peak) } else { self.keypoint_peaks[k].as_ref() };
        p.map(|p| GaussianEstimate2D::new(p.location, p.variance()))
    }

    pub fn offset(&self, k: usize) -> Option<GaussianEstimate2D> {
        if k == CENTER {
            self.center_offset
        } else {
            self.keypoint_offsets[k]
        }
    }

    /// Where the object's center was in the previous frame.
    pub fn previous_center(&self) -> Vec2 {
        self.center_peak.location - self.center_offset.map_or(Vec2::zeros(), |o| o.mean)
    }

    pub fn is_valid(&self) -> bool {
        let points = (0..=CENTER).filter_map(|k| self.peak(k)).chain((0..=CENTER).filter_map(|k| self.offset(k)));
        let mut ok = true;
        for e in points {
            ok &= e.is_valid();
        }
        ok && self.dims_var.iter().all(|v| *v > 0.0) && self.dims_mean.iter().all(|d| *d > 0.0 && d.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    #[serde(alias = "gt")]
    GroundTruth,
    NoisyGt,
    Detector,
    None,
}

impl InitMode {
    pub const ALL: [InitMode; 4] = [InitMode::GroundTruth, InitMode::NoisyGt, InitMode::Detector, InitMode::None];

    pub fn name(&self) -> &'static str {
        match self {
            InitMode::GroundTruth => "gt",
            InitMode::NoisyGt => "noisy_gt",
            InitMode::Detector => "detector",
            InitMode::None => "none",
        }
    }
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gt" | "ground_truth" => Ok(InitMode::GroundTruth),
            "noisy_gt" => Ok(InitMode::NoisyGt),
            "detector" => Ok(InitMode::Detector),
            "none" => Ok(InitMode::None),
            other => Err(Error::InvalidConfig(format!("unknown init mode `{other}`"))),
        }
    }
}

/// Perturbation applied to ground truth for the noisy initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoisyInitSpec {
    pub rotation_std_deg: f64,
    /// Per-axis translation std in meters.
    pub translation_std: f64,
    /// Relative std of a uniform scale factor.
    pub scale_std: f64,
    /// Draws used to estimate the variance of the perturbed keypoints.
    pub variance_samples: usize,
}

impl Default for NoisyInitSpec {
    fn default() -> Self {
        Self { rotation_std_deg: 5.0, translation_std: 0.03, scale_std: 0.2, variance_samples: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub init_mode: InitMode,
    pub conditioning: bool,
    pub filtering: bool,
    pub max_misses: usize,
    /// Association gate in pixels.
    pub gate_radius: f64,
    pub filter: FilterConfig,
    pub pnp: LmOptions,
    /// Add the center to the 8 vertices in PnP.
    pub use_center_in_pnp: bool,
    pub heatmap_stride: u32,
    /// Lower bound on the rendered Gaussian's std in pixels, so a sharp
    /// posterior still covers a heatmap cell.
    pub render_sigma_floor: f64,
    /// Keypoint variance (px²) of ground-truth initialization.
    pub init_variance: f64,
    /// Dimension variance of ground-truth-based initialization.
    pub init_dims_variance: f64,
    pub noisy_init: NoisyInitSpec,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            init_mode: InitMode::GroundTruth,
            conditioning: true,
            filtering: true,
            max_misses: 5,
            gate_radius: 50.0,
            filter: FilterConfig::default(),
            pnp: LmOptions::default(),
            use_center_in_pnp: true,
            heatmap_stride: 4,
            render_sigma_floor: 4.0,
            init_variance: 1.0,
            init_dims_variance: 1e-6,
            noisy_init: NoisyInitSpec::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("tracker.{what}")));
        if !(self.gate_radius > 0.0) {
            return bad("gate_radius must be positive");
        }
        if self.heatmap_stride == 0 {
            return bad("heatmap_stride must be at least 1");
        }
        if !(self.render_sigma_floor > 0.0) {
            return bad("render_sigma_floor must be positive");
        }
        if !(self.init_variance > 0.0 && self.init_dims_variance > 0.0) {
            return bad("init variances must be positive");
        }
        if !(self.filter.velocity_variance > 0.0 && self.filter.accel_std >= 0.0) {
            return bad("filter variances must be positive");
        }
        let n = &self.noisy_init;
        if !(n.rotation_std_deg >= 0.0 && n.translation_std >= 0.0 && n.scale_std >= 0.0) || n.variance_samples < 2 {
            return bad("noisy_init needs non-negative stds and at least 2 variance samples");
        }
        Ok(())
    }
}

/// Filtered state of one tracked object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tracklet {
    pub id: u64,
    pub center: KeypointFilterState,
    pub bbox2d: Vec2,
    pub keypoints: [KeypointFilterState; 8],
    pub dims: DimensionBelief,
    /// Frames since creation.
    pub age: usize,
    /// Consecutive frames without a matched observation.
    pub misses: usize,
    pub last_pose: Option<PoseEstimate>,
    /// The state already refers to the next frame to be processed, so that
    /// step skips the prediction (set by initialization).
    pub fresh: bool,
}

impl Tracklet {
    /// Vertex `k`, or the center for `k == CENTER`.
    pub fn point(&self, k: usize) -> &KeypointFilterState {
        if k == CENTER {
            &self.center
        } else {
            &self.keypoints[k]
        }
    }

    fn point_mut(&mut self, k: usize) -> &mut KeypointFilterState {
        if k == CENTER {
            &mut self.center
        } else {
            &mut self.keypoints[k]
        }
    }

    fn from_points(
        id: u64,
        points: &[GaussianEstimate2D; 9],
        dims: DimensionBelief,
        bbox2d: Vec2,
        cfg: &TrackerConfig,
    ) -> Self {
        let v = cfg.filter.velocity_variance;
        Self {
            id,
            center: KeypointFilterState::from_observation(&points[CENTER], v),
            bbox2d,
            keypoints: std::array::from_fn(|k| KeypointFilterState::from_observation(&points[k], v)),
            dims,
            age: 0,
            misses: 0,
            last_pose: None,
            fresh: false,
        }
    }

    /// Posterior positions of the 8 vertices.
    pub fn keypoint_estimates(&self) -> [GaussianEstimate2D; 8] {
        std::array::from_fn(|k| self.keypoints[k].position_estimate())
    }
}

/// What the tracker reports for one tracklet in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOutput {
    pub id: u64,
    /// Camera-frame pose in units of object height.
    pub pose: PoseEstimate,
    pub dims: Vec3,
    pub keypoints: [GaussianEstimate2D; 8],
    pub center: GaussianEstimate2D,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Association {
    /// `(tracklet index, observation index)` pairs.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracklets: Vec<usize>,
    pub unmatched_observations: Vec<usize>,
}

/// Greedy nearest-neighbor matching of each observation's previous center
/// (peak minus center offset) to tracklet centers. Pairs are taken in order
/// of increasing distance; pairs farther than `gate` are never matched.
pub fn associate(tracklets: &[Tracklet], observations: &[Observation], gate: f64) -> Association {
    let mut pairs = Vec::new();
    for (ti, t) in tracklets.iter().enumerate() {
        for (oi, o) in observations.iter().enumerate() {
            let d = (o.previous_center() - t.center.position).norm();
            if d <= gate {
                pairs.push((d, ti, oi));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut t_used = vec![false; tracklets.len()];
    let mut o_used = vec![false; observations.len()];
    let mut out = Association::default();
    for (_, ti, oi) in pairs {
        if !t_used[ti] && !o_used[oi] {
            t_used[ti] = true;
            o_used[oi] = true;
            out.matches.push((ti, oi));
        }
    }
    out.unmatched_tracklets = (0..tracklets.len()).filter(|i| !t_used[*i]).collect();
    out.unmatched_observations = (0..observations.len()).filter(|i| !o_used[*i]).collect();
    out
}

/// A ground-truth object in camera coordinates at metric scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthObject {
    pub id: u64,
    pub cuboid: Cuboid,
}

/// Random rotation about a uniform axis with a normally distributed angle,
/// per-axis translation noise, and a uniform scale factor, all about the
/// box center.
pub fn perturb_cuboid<R: Rng>(cuboid: &Cuboid, spec: &NoisyInitSpec, rng: &mut R) -> Cuboid {
    let mut normal = || -> f64 { StandardNormal.sample(rng) };
    let axis = Vec3::new(normal(), normal(), normal());
    let axis = if axis.norm() > 1e-12 { axis.normalize() } else { Vec3::z() };
    let angle = spec.rotation_std_deg.to_radians() * normal();
    let dt = Vec3::new(normal(), normal(), normal()) * spec.translation_std;
    let scale = (1.0 + spec.scale_std * normal()).max(0.2);
    let pose = RigidTransform::new(axis_angle(&axis, angle) * cuboid.pose.rotation, cuboid.pose.translation + dt);
    Cuboid::new(pose, cuboid.dims.scaled(scale))
}

fn normalized_pose(cuboid: &Cuboid) -> PoseEstimate {
    let h = cuboid.dims.0.y;
    PoseEstimate {
        pose: RigidTransform::new(cuboid.pose.rotation, cuboid.pose.translation / h),
        reprojection_rmse: 0.0,
        converged: true,
        iterations: 0,
    }
}

fn bbox_of(points: &[Vec2]) -> Vec2 {
    let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    hi - lo
}

fn tracklet_from_cuboid(
    id: u64,
    cuboid: &Cuboid,
    variances: &[Vec2; 9],
    k: &CameraIntrinsics,
    cfg: &TrackerConfig,
) -> Option<Tracklet> {
    let pts = cuboid.project_keypoints(k).ok()?;
    let points = std::array::from_fn(|i| GaussianEstimate2D::new(pts[i], variances[i]));
    let dims = DimensionBelief::new(cuboid.dims.normalized().0, Vec3::repeat(cfg.init_dims_variance));
    let mut t = Tracklet::from_points(id, &points, dims, bbox_of(&pts[..8]), cfg);
    t.last_pose = Some(normalized_pose(cuboid));
    t.fresh = true;
    Some(t)
}

/// Tracklets entering the first frame.
///
/// Ground-truth modes place the tracklets at the first frame's projections;
/// `detector` builds them from a single-frame detection of that frame and
/// `none` starts empty. Objects that cannot be projected are skipped.
pub fn initialize(
    mode: InitMode,
    ground_truth: Option<&[GroundTruthObject]>,
    detections: &[Observation],
    intrinsics: &CameraIntrinsics,
    cfg: &TrackerConfig,
    seed: u64,
) -> Result<Vec<Tracklet>> {
    match mode {
        InitMode::GroundTruth => {
            let gt = ground_truth.ok_or(Error::MissingGroundTruth("ground_truth"))?;
            let var = [Vec2::repeat(cfg.init_variance); 9];
            Ok(gt.iter().filter_map(|o| tracklet_from_cuboid(o.id, &o.cuboid, &var, intrinsics, cfg)).collect())
        }
        InitMode::NoisyGt => {
            let gt = ground_truth.ok_or(Error::MissingGroundTruth("noisy_gt"))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::new();
            for o in gt {
                let noisy = perturb_cuboid(&o.cuboid, &cfg.noisy_init, &mut rng);
                let Some(var) = perturbation_variance(&noisy, intrinsics, cfg, &mut rng) else {
                    continue;
                };
                out.extend(tracklet_from_cuboid(o.id, &noisy, &var, intrinsics, cfg));
            }
            Ok(out)
        }
        InitMode::Detector => Ok(detections
            .iter()
            .filter(|o| o.is_valid())
            .enumerate()
            .map(|(i, o)| spawn(i as u64 + 1, o, cfg))
            .collect()),
        InitMode::None => Ok(Vec::new()),
    }
}

/// Per-point spread of projections under repeated perturbation of `cuboid`,
/// floored at the ground-truth initialization variance.
fn perturbation_variance<R: Rng>(
    cuboid: &Cuboid,
    k: &CameraIntrinsics,
    cfg: &TrackerConfig,
    rng: &mut R,
) -> Option<[Vec2; 9]> {
    let base = cuboid.project_keypoints(k).ok()?;
    let mut acc = [Vec2::zeros(); 9];
    let mut n = 0usize;
    for _ in 0..cfg.noisy_init.variance_samples {
        let Ok(p) = perturb_cuboid(cuboid, &cfg.noisy_init, rng).project_keypoints(k) else {
            continue;
        };
        for i in 0..9 {
            let d = p[i] - base[i];
            acc[i] += d.component_mul(&d);
        }
        n += 1;
    }
    if n == 0 {
        return None;
    }
    Some(acc.map(|a| (a / n as f64).map(|v| v.max(cfg.init_variance))))
}

fn spawn(id: u64, obs: &Observation, cfg: &TrackerConfig) -> Tracklet {
    let center = obs.peak(CENTER).expect("center peak is always present");
    let points = std::array::from_fn(|k| {
        obs.peak(k).unwrap_or_else(|| GaussianEstimate2D::isotropic(center.mean, UNKNOWN_VARIANCE))
    });
    let dims = if cfg.filtering {
        dim_update(&DimensionBelief::flat(), &obs.dims_mean, &obs.dims_var)
    } else {
        DimensionBelief::new(obs.dims_mean, obs.dims_var)
    };
    Tracklet::from_points(id, &points, dims, obs.bbox2d, cfg)
}

/// Fuses one point's offset-propagated prior with its peak, then filters.
fn filter_point(
    state: &KeypointFilterState,
    peak: Option<GaussianEstimate2D>,
    offset: Option<GaussianEstimate2D>,
    fresh: bool,
    cfg: &TrackerConfig,
) -> KeypointFilterState {
    // A fresh state is already at this frame; moving it again would double count.
    let offset = if fresh { None } else { offset };
    let prev = state.position_estimate();
    let propagated = offset.map(|o| GaussianEstimate2D::new(prev.mean + o.mean, prev.var + o.var));
    if !cfg.filtering {
        let raw = peak.or(propagated).unwrap_or(prev);
        return KeypointFilterState::from_observation(&raw, cfg.filter.velocity_variance);
    }
    let fused = match (propagated, peak) {
        (Some(p), Some(z)) => Some(bayes_fuse(&[p, z]).expect("estimates have positive variance")),
        (p, z) => p.or(z),
    };
    let predicted = if fresh { *state } else { kalman_predict(state, &cfg.filter.process_noise()) };
    match (fused, offset) {
        (Some(z), Some(o)) => {
            let vel = GaussianEstimate2D::new(o.mean, cfg.filter.offset_variance(o.var));
            kalman_update(&predicted, &z, &vel)
        }
        (Some(z), None) => kalman_update_position(&predicted, &z),
        (None, _) => predicted,
    }
}

pub struct Tracker {
    config: TrackerConfig,
    intrinsics: CameraIntrinsics,
    tracklets: Vec<Tracklet>,
    next_id: u64,
    maps: ConditioningMaps,
}

impl Tracker {
    pub fn new(config: TrackerConfig, intrinsics: CameraIntrinsics) -> Result<Self> {
        Self::with_tracklets(config, intrinsics, Vec::new())
    }

    /// Starts from initialized tracklets and renders their conditioning maps.
    pub fn with_tracklets(config: TrackerConfig, intrinsics: CameraIntrinsics, initial: Vec<Tracklet>) -> Result<Self> {
        config.validate()?;
        intrinsics.validate()?;
        let mut ids: Vec<u64> = initial.iter().map(|t| t.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) || ids.first() == Some(&0) {
            return Err(Error::InvalidConfig("tracklet ids must be unique and positive".into()));
        }
        let maps = ConditioningMaps::for_image(intrinsics.width, intrinsics.height, config.heatmap_stride);
        let mut tracker =
            Self { config, intrinsics, next_id: ids.last().map_or(1, |m| m + 1), tracklets: initial, maps };
        tracker.render();
        Ok(tracker)
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn tracklets(&self) -> &[Tracklet] {
        &self.tracklets
    }

    /// Maps rendered from the current tracklets; blank when conditioning is off.
    pub fn conditioning(&self) -> &ConditioningMaps {
        &self.maps
    }

    /// Processes one frame and returns a pose for every tracklet that was
    /// matched or spawned in it, ordered by id. Invalid observations are ignored.
    pub fn step(&mut self, observations: &[Observation]) -> Vec<TrackOutput> {
        let observations: Vec<Observation> = observations.iter().filter(|o| o.is_valid()).copied().collect();
        let assoc = associate(&self.tracklets, &observations, self.config.gate_radius);
        let cfg = self.config;
        let mut outputs = Vec::new();

        for &(ti, oi) in &assoc.matches {
            let obs = &observations[oi];
            let t = &mut self.tracklets[ti];
            for k in 0..=CENTER {
                *t.point_mut(k) = filter_point(t.point(k), obs.peak(k), obs.offset(k), t.fresh, &cfg);
            }
            t.dims = if cfg.filtering {
                dim_update(&t.dims, &obs.dims_mean, &obs.dims_var)
            } else {
                DimensionBelief::new(obs.dims_mean, obs.dims_var)
            };
            t.bbox2d = obs.bbox2d;
            t.misses = 0;
            t.age += 1;
            t.fresh = false;
            outputs.extend(solve(t, &self.intrinsics, &cfg));
        }
        for &ti in &assoc.unmatched_tracklets {
            let t = &mut self.tracklets[ti];
            if cfg.filtering && !t.fresh {
                let q = cfg.filter.process_noise();
                for k in 0..=CENTER {
                    *t.point_mut(k) = kalman_predict(t.point(k), &q);
                }
            }
            t.fresh = false;
            t.misses += 1;
            t.age += 1;
        }
        self.tracklets.retain(|t| t.misses <= cfg.max_misses);
        for &oi in &assoc.unmatched_observations {
            let mut t = spawn(self.next_id, &observations[oi], &cfg);
            self.next_id += 1;
            outputs.extend(solve(&mut t, &self.intrinsics, &cfg));
            self.tracklets.push(t);
        }
        outputs.sort_by_key(|o| o.id);
        self.render();
        outputs
    }

    fn render(&mut self) {
        self.maps.clear();
        if !self.config.conditioning {
            return;
        }
        let floor = self.config.render_sigma_floor;
        for t in &self.tracklets {
            for k in 0..=CENTER {
                let est = t.point(k).position_estimate();
                let std = est.std();
                let scale = render_scale(0.5 * (std.x + std.y));
                self.maps.map_mut(k).render_gaussian(&est.mean, &std.map(|s| s.max(floor)), scale);
            }
        }
    }
}

/// Pose of a tracklet from its filtered points; keeps the previous pose
/// (marked unconverged) when PnP cannot run.
fn solve(t: &mut Tracklet, k: &CameraIntrinsics, cfg: &TrackerConfig) -> Option<TrackOutput> {
    let est: [GaussianEstimate2D; 9] = std::array::from_fn(|i| t.point(i).position_estimate());
    let pts = est.map(|e| e.mean);
    let var = est.map(|e| e.var);
    let dims = CuboidDimensions(t.dims.mean.map(|d| d.max(1e-3)));
    let pose = PnPProblem::from_cuboid(&dims, &pts, &var, *k, cfg.use_center_in_pnp)
        .and_then(|p| solve_pnp(&p, t.last_pose.as_ref().map(|e| &e.pose), &cfg.pnp));
    let pose = match (pose, t.last_pose) {
        (Ok(p), _) => p,
        (Err(_), Some(prev)) => PoseEstimate { converged: false, iterations: 0, ..prev },
        (Err(_), None) => return None,
    };
    t.last_pose = Some(pose);
    Some(TrackOutput {
        id: t.id,
        pose,
        dims: dims.0,
        keypoints: t.keypoint_estimates(),
        center: t.center.position_estimate(),
    })
}

/// Rotation angle of one noisy-initialization draw.
pub fn sample_rotation_perturbation<R: Rng>(spec: &NoisyInitSpec, rng: &mut R) -> f64 {
    let c = Cuboid::new(RigidTransform::identity(), CuboidDimensions::new(1.0, 1.0, 1.0));
    let p = perturb_cuboid(&c, spec, rng);
    p.pose.rotation_angle_to(&c.pose)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peak(p: Vec2, var: f64) -> PeakDetection {
        PeakDetection { location: p, confidence: 1.0, sigma: Vec2::repeat(var.sqrt()) }
    }

    fn observation_of(cuboid: &Cuboid, prev: Option<&Cuboid>, k: &CameraIntrinsics) -> Observation {
        let pts = cuboid.project_keypoints(k).unwrap();
        let prev_pts = prev.map(|c| c.project_keypoints(k).unwrap());
        let off = |i: usize| prev_pts.map(|pp| GaussianEstimate2D::isotropic(pts[i] - pp[i], 0.25));
        Observation {
            center_peak: peak(pts[CENTER], 1.0),
            keypoint_peaks: std::array::from_fn(|i| Some(peak(pts[i], 1.0))),
            keypoint_offsets: std::array::from_fn(off),
            center_offset: off(CENTER),
            dims_mean: cuboid.dims.normalized().0,
            dims_var: Vec3::repeat(1e-4),
            bbox2d: bbox_of(&pts[..8]),
        }
    }

    fn scene() -> (Cuboid, CameraIntrinsics) {
        let pose =
            RigidTransform::new(axis_angle(&Vec3::new(0.2, 1.0, 0.1).normalize(), 0.6), Vec3::new(0.1, 0.05, 2.5));
        (Cuboid::new(pose, CuboidDimensions::new(0.3, 0.4, 0.5)), CameraIntrinsics::default())
    }

    fn tracklet_at(id: u64, x: f64, y: f64) -> Tracklet {
        let p = GaussianEstimate2D::isotropic(Vec2::new(x, y), 1.0);
        Tracklet::from_points(id, &[p; 9], DimensionBelief::flat(), Vec2::zeros(), &TrackerConfig::default())
    }

    fn obs_at(x: f64, y: f64) -> Observation {
        let (c, k) = scene();
        let mut o = observation_of(&c, None, &k);
        o.center_peak.location = Vec2::new(x, y);
        o
    }

    #[test]
    fn association_cases() {
        let a = associate(&[tracklet_at(1, 100.0, 100.0)], &[obs_at(103.0, 100.0)], 10.0);
        assert_eq!(a.matches, vec![(0, 0)]);
        let a = associate(&[tracklet_at(1, 100.0, 100.0)], &[obs_at(130.0, 100.0)], 10.0);
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_observations, vec![0]);
        assert_eq!(a.unmatched_tracklets, vec![0]);
        // t0-o0 = 6, t0-o1 = 1, t1-o0 = 4, t1-o1 = 9
        let ts = [tracklet_at(1, 0.0, 0.0), tracklet_at(2, 10.0, 0.0)];
        let os = [obs_at(6.0, 0.0), obs_at(1.0, 0.0)];
        let a = associate(&ts, &os, 20.0);
        assert_eq!(a.matches, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn static_closed_loop_is_exact() {
        let (c, k) = scene();
        let gt = [GroundTruthObject { id: 1, cuboid: c }];
        let cfg = TrackerConfig::default();
        let init = initialize(InitMode::GroundTruth, Some(&gt), &[], &k, &cfg, 0).unwrap();
        let mut tr = Tracker::with_tracklets(cfg, k, init).unwrap();
        let truth = normalized_pose(&c).pose;
        for f in 0..50 {
            let obs = observation_of(&c, (f > 0).then_some(&c), &k);
            let out = tr.step(&[obs]);
            assert_eq!(out.len(), 1);
            assert_eq!(out[0].id, 1);
            let p = &out[0].pose.pose;
            assert!(p.rotation_angle_to(&truth) < 1e-3, "frame {f}");
            assert!((p.translation - truth.translation).norm() / truth.translation.norm() < 1e-3);
        }
    }

    #[test]
    fn missing_peaks_use_offsets() {
        let (c, k) = scene();
        let cfg = TrackerConfig::default();
        let mut tr = Tracker::new(cfg, k).unwrap();
        tr.step(&[observation_of(&c, None, &k)]);
        let mut obs = observation_of(&c, Some(&c), &k);
        obs.keypoint_peaks = [None; 8];
        let out = tr.step(&[obs]);
        assert_eq!(out.len(), 1);
        assert!(out[0].pose.pose.rotation_angle_to(&normalized_pose(&c).pose) < 1e-3);
    }

    #[test]
    fn no_filtering_passes_raw_peaks() {
        let (c, k) = scene();
        let cfg = TrackerConfig { filtering: false, ..TrackerConfig::default() };
        let mut tr = Tracker::new(cfg, k).unwrap();
        let mut obs = observation_of(&c, None, &k);
        tr.step(&[obs]);
        obs.keypoint_peaks[3].as_mut().unwrap().location.x += 7.0;
        let out = tr.step(&[obs]);
        assert_eq!(out[0].keypoints[3].mean, obs.keypoint_peaks[3].unwrap().location);
        assert_eq!(tr.tracklets()[0].keypoints[3].velocity, Vec2::zeros());
    }

    #[test]
    fn retirement_after_misses() {
        let (c, k) = scene();
        let mut tr = Tracker::new(TrackerConfig::default(), k).unwrap();
        tr.step(&[observation_of(&c, None, &k)]);
        for _ in 0..5 {
            assert!(tr.step(&[]).is_empty());
            assert_eq!(tr.tracklets().len(), 1);
        }
        tr.step(&[]);
        assert!(tr.tracklets().is_empty());
    }

    #[test]
    fn conditioning_peak_matches_posterior() {
        let (c, k) = scene();
        let mut tr = Tracker::new(TrackerConfig::default(), k).unwrap();
        tr.step(&[observation_of(&c, None, &k)]);
        let t = tr.tracklets()[0];
        for kp in 0..8 {
            let est = t.keypoints[kp].position_estimate();
            let std = est.std();
            let expected = render_scale(0.5 * (std.x + std.y));
            let peaks = tr.conditioning().keypoints[kp].extract_peaks(0.01, 1, &Default::default());
            assert!((peaks[0].confidence - expected).abs() < 1e-9);
            assert!((peaks[0].location - est.mean).norm() < 1e-6);
        }
        let off = Tracker::new(TrackerConfig { conditioning: false, ..TrackerConfig::default() }, k);
        let mut off = off.unwrap();
        off.step(&[observation_of(&c, None, &k)]);
        assert_eq!(off.conditioning().center.max_value(), 0.0);
    }

    #[test]
    fn ground_truth_modes_need_ground_truth() {
        let k = CameraIntrinsics::default();
        let cfg = TrackerConfig::default();
        assert_eq!(initialize(InitMode::NoisyGt, None, &[], &k, &cfg, 1), Err(Error::MissingGroundTruth("noisy_gt")));
        assert!(initialize(InitMode::None, None, &[], &k, &cfg, 1).unwrap().is_empty());
    }

    #[test]
    fn noisy_init_variances_cover_error() {
        let (c, k) = scene();
        let gt = [GroundTruthObject { id: 1, cuboid: c }];
        let cfg = TrackerConfig::default();
        let t = initialize(InitMode::NoisyGt, Some(&gt), &[], &k, &cfg, 9).unwrap()[0];
        assert!(t.fresh);
        assert!(t.keypoints.iter().all(|s| s.covariance[(0, 0)] > cfg.init_variance));
        assert!((t.dims.mean - c.dims.normalized().0).norm() < 1e-12);
    }

    #[test]
    fn init_mode_names() {
        for m in InitMode::ALL {
            assert_eq!(m.name().parse::<InitMode>().unwrap(), m);
        }
        assert!("bogus".parse::<InitMode>().is_err());
    }
}
