//! JSON-Lines records for sequences and predictions.
//!
//! Floats are written with 17 significant digits so every value survives a
//! write/read cycle bit for bit.

use std::io::{self, BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::filtering::GaussianEstimate2D;
use crate::geometry::{CameraIntrinsics, Cuboid, CuboidDimensions, RigidTransform, Vec2, Vec3};
use crate::heatmap::PeakDetection;
use crate::tracker::{Observation, TrackOutput};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

impl From<&RigidTransform> for PoseRecord {
    fn from(p: &RigidTransform) -> Self {
        Self { r: p.rotation_row_major(), t: [p.translation.x, p.translation.y, p.translation.z] }
    }
}

impl PoseRecord {
    pub fn to_transform(&self) -> RigidTransform {
        RigidTransform::from_row_major(&self.r, &self.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRecord {
    pub id: u64,
    pub dims: [f64; 3],
    pub world_pose: PoseRecord,
    pub symmetric: bool,
}

impl ObjectRecord {
    pub fn world_cuboid(&self) -> Cuboid {
        Cuboid::new(self.world_pose.to_transform(), CuboidDimensions(Vec3::from(self.dims)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakRecord {
    pub location: [f64; 2],
    pub variance: [f64; 2],
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateRecord {
    pub mean: [f64; 2],
    pub var: [f64; 2],
}

/// One detection. `object` is the ground-truth id the detection was drawn
/// from and `seed` the draw's seed, so a run can re-detect the same frame
/// with conditioning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRecord {
    pub object: u64,
    pub seed: u64,
    pub center: PeakRecord,
    pub keypoints: [Option<PeakRecord>; 8],
    pub offsets: [Option<EstimateRecord>; 8],
    pub center_offset: Option<EstimateRecord>,
    pub dims_mean: [f64; 3],
    pub dims_var: [f64; 3],
    pub bbox2d: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceRecord {
    pub frame: usize,
    pub intrinsics: CameraIntrinsics,
    pub cam_to_world: PoseRecord,
    pub objects: Vec<ObjectRecord>,
    pub observations: Vec<ObservationRecord>,
}

impl SequenceRecord {
    /// Ground-truth cuboid of `object` in this frame's camera coordinates.
    pub fn camera_cuboid(&self, object: &ObjectRecord) -> Cuboid {
        object.world_cuboid().transformed(&self.cam_to_world.to_transform().inverse())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub frame: usize,
    pub id: u64,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub dims: [f64; 3],
    pub keypoints_2d: [[f64; 2]; 8],
    pub keypoint_sigmas: [[f64; 2]; 8],
    pub converged: bool,
}

impl PredictionRecord {
    pub fn from_output(frame: usize, out: &TrackOutput) -> Self {
        let pose = PoseRecord::from(&out.pose.pose);
        Self {
            frame,
            id: out.id,
            rotation: pose.r,
            translation: pose.t,
            dims: out.dims.into(),
            keypoints_2d: std::array::from_fn(|k| out.keypoints[k].mean.into()),
            keypoint_sigmas: std::array::from_fn(|k| out.keypoints[k].std().into()),
            converged: out.pose.converged,
        }
    }

    /// Predicted cuboid in camera coordinates, in units of object height.
    pub fn cuboid(&self) -> Cuboid {
        Cuboid::new(
            RigidTransform::from_row_major(&self.rotation, &self.translation),
            CuboidDimensions(Vec3::from(self.dims)),
        )
    }
}

fn peak_to_record(p: &PeakDetection) -> PeakRecord {
    PeakRecord { location: p.location.into(), variance: p.variance().into(), confidence: p.confidence }
}

fn peak_from_record(r: &PeakRecord) -> PeakDetection {
    PeakDetection {
        location: Vec2::from(r.location),
        confidence: r.confidence,
        sigma: Vec2::from(r.variance).map(f64::sqrt),
    }
}

fn estimate_to_record(e: &GaussianEstimate2D) -> EstimateRecord {
    EstimateRecord { mean: e.mean.into(), var: e.var.into() }
}

fn estimate_from_record(r: &EstimateRecord) -> GaussianEstimate2D {
    GaussianEstimate2D::new(Vec2::from(r.mean), Vec2::from(r.var))
}

impl ObservationRecord {
    pub fn new(object: u64, seed: u64, obs: &Observation) -> Self {
        Self {
            object,
            seed,
            center: peak_to_record(&obs.center_peak),
            keypoints: std::array::from_fn(|k| obs.keypoint_peaks[k].as_ref().map(peak_to_record)),
            offsets: std::array::from_fn(|k| obs.keypoint_offsets[k].as_ref().map(estimate_to_record)),
            center_offset: obs.center_offset.as_ref().map(estimate_to_record),
            dims_mean: obs.dims_mean.into(),
            dims_var: obs.dims_var.into(),
            bbox2d: obs.bbox2d.into(),
        }
    }

    pub fn to_observation(&self) -> Observation {
        Observation {
            center_peak: peak_from_record(&self.center),
            keypoint_peaks: std::array::from_fn(|k| self.keypoints[k].as_ref().map(peak_from_record)),
            keypoint_offsets: std::array::from_fn(|k| self.offsets[k].as_ref().map(estimate_from_record)),
            center_offset: self.center_offset.as_ref().map(estimate_from_record),
            dims_mean: Vec3::from(self.dims_mean),
            dims_var: Vec3::from(self.dims_var),
            bbox2d: Vec2::from(self.bbox2d),
        }
    }
}

/// JSON formatter writing every float as `d.dddddddddddddddde±x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactFloatFormatter;

impl serde_json::ser::Formatter for ExactFloatFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value == 0.0 && value.is_sign_positive() {
            return writer.write_all(b"0.0");
        }
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes one record as a single JSON line (without the newline).
pub fn to_line<T: Serialize>(record: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloatFormatter);
    record.serialize(&mut ser).map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_jsonl<T: Serialize, W: Write>(records: &[T], mut out: W) -> Result<()> {
    for r in records {
        out.write_all(to_line(r)?.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Parses one record per non-blank line; errors carry the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(input: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Malformed { line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

/// Reads a sequence file; an empty file is an error.
pub fn read_sequence<R: BufRead>(input: R) -> Result<Vec<SequenceRecord>> {
    let records: Vec<SequenceRecord> = read_jsonl(input)?;
    if records.is_empty() {
        return Err(Error::Malformed { line: 1, message: "sequence file has no records".into() });
    }
    for (i, r) in records.iter().enumerate() {
        if r.frame != i {
            return Err(Error::Malformed { line: i + 1, message: format!("expected frame {i}, found {}", r.frame) });
        }
        r.intrinsics.validate().map_err(|e| Error::Malformed { line: i + 1, message: e.to_string() })?;
    }
    Ok(records)
}
