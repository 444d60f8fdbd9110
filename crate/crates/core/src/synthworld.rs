//! Synthetic desk-scale world: static boxes on a ground plane seen by an
//! orbiting camera, and a mock detector producing observations with known,
//! optionally miscalibrated noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::filtering::GaussianEstimate2D;
use crate::geometry::{axis_angle, CameraIntrinsics, Cuboid, CuboidDimensions, Mat3, RigidTransform, Vec2, Vec3};
use crate::heatmap::{render_scale, ConditioningMaps, PeakDetection};
use crate::records::{ObjectRecord, ObservationRecord, PoseRecord, SequenceRecord};
use crate::tracker::{Observation, CENTER};
use crate::{Error, Result};

/// World up direction.
pub const WORLD_UP: Vec3 = Vec3::new(0.0, 1.0, 0.0);

/// Mixes tags into a seed (splitmix64 finalizer per step).
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    tags.iter().fold(mix(base), |acc, t| mix(acc ^ mix(*t)))
}

/// Dimension ranges (meters, `[x, y = height, z]`) of one object category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategorySpec {
    pub name: String,
    pub dims_min: [f64; 3],
    pub dims_max: [f64; 3],
    /// Square cross-section, invariant under rotation about the height axis.
    pub symmetric: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitSpec {
    /// Meters from the look-at point.
    pub radius: f64,
    pub angular_rate_deg: f64,
    pub elevation_deg: f64,
    /// Relative amplitude of a slow radius oscillation.
    pub radius_wobble: f64,
    /// Height of the look-at point.
    pub target_height: f64,
}

impl Default for OrbitSpec {
    fn default() -> Self {
        Self { radius: 2.0, angular_rate_deg: 30.0, elevation_deg: 25.0, radius_wobble: 0.1, target_height: 0.15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub object_count: usize,
    pub categories: Vec<CategorySpec>,
    /// Use only this category; otherwise each object draws one uniformly.
    pub category: Option<usize>,
    pub orbit: OrbitSpec,
    pub frame_count: usize,
    /// Frames per second.
    pub frame_rate: f64,
    pub intrinsics: CameraIntrinsics,
    /// Objects are spread on a circle of this radius around the origin.
    pub placement_radius: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            object_count: 1,
            categories: vec![
                CategorySpec {
                    name: "box".into(),
                    dims_min: [0.2, 0.15, 0.25],
                    dims_max: [0.45, 0.35, 0.5],
                    symmetric: false,
                },
                CategorySpec {
                    name: "bottle".into(),
                    dims_min: [0.08, 0.2, 0.08],
                    dims_max: [0.14, 0.35, 0.14],
                    symmetric: true,
                },
            ],
            category: None,
            orbit: OrbitSpec::default(),
            frame_count: 100,
            frame_rate: 30.0,
            intrinsics: CameraIntrinsics::default(),
            placement_radius: 0.3,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("scene.{m}")));
        if self.frame_count < 2 {
            return bad("frame_count must be at least 2");
        }
        if !(self.orbit.radius > 0.0) {
            return bad("orbit.radius must be positive");
        }
        if !(self.frame_rate > 0.0) {
            return bad("frame_rate must be positive");
        }
        if self.object_count == 0 {
            return bad("object_count must be at least 1");
        }
        if self.categories.is_empty() {
            return bad("categories must not be empty");
        }
        if let Some(c) = self.category {
            if c >= self.categories.len() {
                return bad("category index out of range");
            }
        }
        for c in &self.categories {
            if (0..3).any(|i| !(c.dims_min[i] > 0.0 && c.dims_min[i] <= c.dims_max[i])) {
                return bad(&format!("categories.{}: need 0 < dims_min <= dims_max", c.name));
            }
        }
        self.intrinsics.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockDetectorSpec {
    /// Per-axis keypoint noise std in pixels.
    pub keypoint_sigma: f64,
    /// Reported variance = calibration × true noise variance.
    pub calibration: f64,
    /// Probability that a vertex peak is missing.
    pub dropout: f64,
    /// Std of the noise on the two free relative dimensions.
    pub dims_sigma: f64,
    /// Per-axis offset noise std in pixels.
    pub offset_sigma: f64,
    /// How much a confident prior at the keypoint shrinks the noise, in [0, 1].
    pub conditioning_gain: f64,
    /// Smallest reported variance.
    pub variance_floor: f64,
}

impl Default for MockDetectorSpec {
    fn default() -> Self {
        Self {
            keypoint_sigma: 3.0,
            calibration: 1.0,
            dropout: 0.05,
            dims_sigma: 0.05,
            offset_sigma: 0.5,
            conditioning_gain: 0.5,
            variance_floor: 1e-4,
        }
    }
}

impl MockDetectorSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.keypoint_sigma >= 0.0
            && self.calibration > 0.0
            && (0.0..1.0).contains(&self.dropout)
            && self.dims_sigma >= 0.0
            && self.offset_sigma >= 0.0
            && (0.0..=1.0).contains(&self.conditioning_gain)
            && self.variance_floor > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("detector: out-of-range value in {self:?}")))
        }
    }

    /// Noise std after conditioning on a prior of the given confidence.
    pub fn effective_sigma(&self, prior_confidence: f64) -> f64 {
        self.keypoint_sigma * (1.0 - self.conditioning_gain * prior_confidence.clamp(0.0, 1.0))
    }

    fn reported(&self, sigma: f64) -> f64 {
        (self.calibration * sigma * sigma).max(self.variance_floor)
    }
}

fn look_at(eye: &Vec3, target: &Vec3) -> Mat3 {
    let z = (target - eye).normalize();
    let x = z.cross(&WORLD_UP).normalize();
    let y = z.cross(&x);
    Mat3::from_columns(&[x, y, z])
}

/// Camera-to-world pose at time `t` seconds.
pub fn camera_pose(orbit: &OrbitSpec, phase: f64, t: f64) -> RigidTransform {
    let theta = phase + orbit.angular_rate_deg.to_radians() * t;
    let elev = orbit.elevation_deg.to_radians();
    let r = orbit.radius * (1.0 + orbit.radius_wobble * (0.7 * t + phase).sin());
    let target = Vec3::new(0.0, orbit.target_height, 0.0);
    let eye = target + r * Vec3::new(elev.cos() * theta.sin(), elev.sin(), elev.cos() * theta.cos());
    RigidTransform::new(look_at(&eye, &target), eye)
}

fn sample_dims<R: Rng>(cat: &CategorySpec, rng: &mut R) -> Vec3 {
    let mut d = Vec3::from_fn(|i, _| rng.random_range(cat.dims_min[i]..=cat.dims_max[i]));
    if cat.symmetric {
        d.z = d.x;
    }
    d
}

/// Ground-truth frames of one sequence; observations are left empty.
pub fn generate_sequence(spec: &SceneSpec, seed: u64) -> Result<Vec<SequenceRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.object_count;
    let ring_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let mut objects = Vec::with_capacity(n);
    for i in 0..n {
        let cat = &spec.categories[spec.category.unwrap_or_else(|| rng.random_range(0..spec.categories.len()))];
        let dims = sample_dims(cat, &mut rng);
        let yaw = rng.random_range(0.0..std::f64::consts::TAU);
        let pos = if n == 1 {
            Vec3::new(rng.random_range(-0.05..0.05), 0.0, rng.random_range(-0.05..0.05))
        } else {
            let a = ring_phase + std::f64::consts::TAU * i as f64 / n as f64;
            spec.placement_radius * Vec3::new(a.cos(), 0.0, a.sin())
        };
        let pose = RigidTransform::new(axis_angle(&WORLD_UP, yaw), pos + Vec3::new(0.0, dims.y / 2.0, 0.0));
        objects.push(ObjectRecord {
            id: i as u64 + 1,
            dims: dims.into(),
            world_pose: PoseRecord::from(&pose),
            symmetric: cat.symmetric,
        });
    }
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    Ok((0..spec.frame_count)
        .map(|f| SequenceRecord {
            frame: f,
            intrinsics: spec.intrinsics,
            cam_to_world: PoseRecord::from(&camera_pose(&spec.orbit, phase, f as f64 / spec.frame_rate)),
            objects: objects.clone(),
            observations: Vec::new(),
        })
        .collect())
}

/// Projected vertices and center of an object, if it is in front of the
/// camera with its center inside the image.
pub fn visible_keypoints(record: &SequenceRecord, object: &ObjectRecord) -> Option<[Vec2; 9]> {
    let cam = record.camera_cuboid(object);
    let pts = cam.project_keypoints(&record.intrinsics).ok()?;
    record.intrinsics.contains(&pts[CENTER]).then_some(pts)
}

/// Fraction of frames whose every object has all projected vertices inside the image.
pub fn frustum_coverage(records: &[SequenceRecord]) -> f64 {
    let inside = records
        .iter()
        .filter(|r| {
            r.objects
                .iter()
                .all(|o| visible_keypoints(r, o).is_some_and(|p| p.iter().all(|q| r.intrinsics.contains(q))))
        })
        .count();
    inside as f64 / records.len().max(1) as f64
}

/// Mock detection of one object, or `None` if it is not visible.
///
/// The draw order is fixed, so the same seed gives the same standard-normal
/// variates whatever the conditioning: conditioning only rescales them.
/// Prior confidence is read from `maps` where the keypoint was in the frame
/// the maps describe (the previous frame when given, else this one).
pub fn detect_object(
    record: &SequenceRecord,
    previous: Option<&SequenceRecord>,
    maps: Option<&ConditioningMaps>,
    object: &ObjectRecord,
    spec: &MockDetectorSpec,
    seed: u64,
) -> Option<Observation> {
    let pts = visible_keypoints(record, object)?;
    let prev_pts = previous
        .and_then(|p| p.objects.iter().find(|o| o.id == object.id).map(|o| (p, o)))
        .and_then(|(p, o)| p.camera_cuboid(o).project_keypoints(&p.intrinsics).ok());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal2 = |rng: &mut ChaCha8Rng| Vec2::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
    let z_peak: [Vec2; 9] = std::array::from_fn(|_| normal2(&mut rng));
    let u_drop: [f64; 8] = std::array::from_fn(|_| rng.random::<f64>());
    let z_off: [Vec2; 9] = std::array::from_fn(|_| normal2(&mut rng));
    let z_dims = normal2(&mut rng);

    let peaks: [PeakDetection; 9] = std::array::from_fn(|k| {
        let at = prev_pts.map_or(pts[k], |p| p[k]);
        let conf = maps.map_or(0.0, |m| m.map(k).sample(&at));
        let sigma = spec.effective_sigma(conf);
        let var = spec.reported(sigma);
        PeakDetection {
            location: pts[k] + sigma * z_peak[k],
            confidence: render_scale(var.sqrt()),
            sigma: Vec2::repeat(var.sqrt()),
        }
    });
    let off_var = Vec2::repeat(spec.reported(spec.offset_sigma));
    let offsets: [Option<GaussianEstimate2D>; 9] = std::array::from_fn(|k| {
        prev_pts.map(|p| GaussianEstimate2D::new(pts[k] - p[k] + spec.offset_sigma * z_off[k], off_var))
    });

    let gt_dims = CuboidDimensions(Vec3::from(object.dims)).normalized().0;
    let dims_mean = Vec3::new(
        (gt_dims.x + spec.dims_sigma * z_dims.x).max(1e-3),
        1.0,
        (gt_dims.z + spec.dims_sigma * z_dims.y).max(1e-3),
    );
    let dv = spec.reported(spec.dims_sigma);
    let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
    for p in &pts[..8] {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    Some(Observation {
        center_peak: peaks[CENTER],
        keypoint_peaks: std::array::from_fn(|k| (u_drop[k] >= spec.dropout).then_some(peaks[k])),
        keypoint_offsets: std::array::from_fn(|k| offsets[k]),
        center_offset: offsets[CENTER],
        dims_mean,
        dims_var: Vec3::new(dv, spec.variance_floor, dv),
        bbox2d: hi - lo,
    })
}

/// Seed of the detection of `object` in a frame whose detector seed is `frame_seed`.
pub fn object_seed(frame_seed: u64, object: u64) -> u64 {
    derive_seed(frame_seed, &[object])
}

/// Detections of every visible object of a frame, as records carrying
/// their seeds.
pub fn mock_detect(
    record: &SequenceRecord,
    previous: Option<&SequenceRecord>,
    maps: Option<&ConditioningMaps>,
    spec: &MockDetectorSpec,
    frame_seed: u64,
) -> Vec<ObservationRecord> {
    record
        .objects
        .iter()
        .filter_map(|o| {
            let seed = object_seed(frame_seed, o.id);
            detect_object(record, previous, maps, o, spec, seed).map(|obs| ObservationRecord::new(o.id, seed, &obs))
        })
        .collect()
}

/// A full sequence with unconditioned detections in every frame.
pub fn simulate_sequence(scene: &SceneSpec, detector: &MockDetectorSpec, seed: u64) -> Result<Vec<SequenceRecord>> {
    detector.validate()?;
    let mut records = generate_sequence(scene, derive_seed(seed, &[0]))?;
    for f in 0..records.len() {
        let frame_seed = derive_seed(seed, &[1, f as u64]);
        let obs = mock_detect(&records[f], f.checked_sub(1).map(|p| &records[p]), None, detector, frame_seed);
        records[f].observations = obs;
    }
    Ok(records)
}

/// Ground-truth cuboid in camera coordinates for every object of a frame.
pub fn camera_cuboids(record: &SequenceRecord) -> Vec<(u64, Cuboid)> {
    record.objects.iter().map(|o| (o.id, record.camera_cuboid(o))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_objects_and_determinism() {
        let spec = SceneSpec::default();
        let a = generate_sequence(&spec, 5).unwrap();
        assert_eq!(a.len(), 100);
        assert!(a.iter().all(|r| r.objects == a[0].objects));
        assert_eq!(a, generate_sequence(&spec, 5).unwrap());
        assert_ne!(a, generate_sequence(&spec, 6).unwrap());
    }

    #[test]
    fn camera_looks_at_target_with_y_down() {
        let pose = camera_pose(&OrbitSpec::default(), 0.3, 1.0);
        assert!(pose.is_valid(1e-9));
        let target = pose.inverse().transform_point(&Vec3::new(0.0, 0.15, 0.0));
        assert!(target.x.abs() < 1e-9 && target.y.abs() < 1e-9 && target.z > 0.0);
        let up_in_cam = pose.rotation.transpose() * WORLD_UP;
        assert!(up_in_cam.y < 0.0);
    }

    #[test]
    fn objects_stay_in_view() {
        for n in 1..=3 {
            for seed in 0..10 {
                let spec = SceneSpec { object_count: n, ..SceneSpec::default() };
                let recs = generate_sequence(&spec, seed).unwrap();
                assert!(frustum_coverage(&recs) >= 0.9, "n={n} seed={seed}");
            }
        }
    }

    #[test]
    fn symmetric_category_has_square_section() {
        let spec = SceneSpec { category: Some(1), ..SceneSpec::default() };
        let r = &generate_sequence(&spec, 3).unwrap()[0];
        assert!(r.objects[0].symmetric);
        assert_eq!(r.objects[0].dims[0], r.objects[0].dims[2]);
    }

    #[test]
    fn noiseless_detection_is_exact() {
        let spec = MockDetectorSpec {
            keypoint_sigma: 0.0,
            dims_sigma: 0.0,
            offset_sigma: 0.0,
            dropout: 0.0,
            ..Default::default()
        };
        let recs = generate_sequence(&SceneSpec::default(), 1).unwrap();
        let obj = recs[1].objects[0];
        let obs = detect_object(&recs[1], Some(&recs[0]), None, &obj, &spec, 4).unwrap();
        let pts = visible_keypoints(&recs[1], &obj).unwrap();
        let prev = visible_keypoints(&recs[0], &obj).unwrap();
        for k in 0..8 {
            assert_eq!(obs.keypoint_peaks[k].unwrap().location, pts[k]);
            assert_eq!(obs.keypoint_offsets[k].unwrap().mean, pts[k] - prev[k]);
        }
        assert_eq!(obs.center_peak.location, pts[CENTER]);
        let d = CuboidDimensions(Vec3::from(obj.dims)).normalized().0;
        assert!((obs.dims_mean - d).norm() < 1e-15);
    }

    #[test]
    fn conditioning_limits() {
        let spec = MockDetectorSpec { conditioning_gain: 1.0, ..Default::default() };
        assert_eq!(spec.effective_sigma(1.0), 0.0);
        assert_eq!(spec.effective_sigma(0.0), spec.keypoint_sigma);
        let mut last = f64::INFINITY;
        for i in 0..=100 {
            let s = MockDetectorSpec::default().effective_sigma(i as f64 / 100.0);
            assert!(s <= last);
            last = s;
        }
    }

    #[test]
    fn seeds_differ_per_tag() {
        assert_ne!(derive_seed(1, &[0]), derive_seed(1, &[1]));
        assert_ne!(derive_seed(1, &[1, 2]), derive_seed(1, &[2, 1]));
        assert_eq!(derive_seed(7, &[3]), derive_seed(7, &[3]));
    }
}
