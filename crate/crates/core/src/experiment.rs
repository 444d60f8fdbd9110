//! Experiment drivers: simulate a suite of sequences, track them, score the
//! predictions, and run the ablation grid.

use serde::{Deserialize, Serialize};

use crate::geometry::Cuboid;
use crate::metrics::{aggregate, evaluate, iou3d, FrameMetrics, FrameResult, MetricOptions, MetricReport};
use crate::noise_sim::{corrupt, sample_paired_frame, LabeledObject, NoiseModel, PointRole};
use crate::records::{PredictionRecord, SequenceRecord};
use crate::synthworld::{
    derive_seed, detect_object, simulate_sequence, visible_keypoints, MockDetectorSpec, SceneSpec, WORLD_UP,
};
use crate::tracker::{initialize, GroundTruthObject, InitMode, Observation, Tracker, TrackerConfig};
use crate::{Error, Result};

const SCENE_TAG: u64 = 0;
const INIT_TAG: u64 = 2;
const TRAINING_TAG: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Required; there is no entropy-based fallback.
    pub seed: Option<u64>,
    pub sequences: usize,
    /// Every n-th sequence uses the first symmetric category; 0 disables.
    pub symmetric_every: usize,
    pub scene: SceneSpec,
    pub detector: MockDetectorSpec,
    /// Corruption model for training-style conditioning inputs.
    pub noise: NoiseModel,
    pub tracker: TrackerConfig,
    pub metrics: MetricOptions,
    pub out_dir: String,
    /// Also write corrupted training-style conditioning inputs when simulating.
    pub training_inputs: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            sequences: 20,
            symmetric_every: 4,
            scene: SceneSpec::default(),
            detector: MockDetectorSpec::default(),
            noise: NoiseModel::default(),
            tracker: TrackerConfig::default(),
            metrics: MetricOptions::default(),
            out_dir: "out".into(),
            training_inputs: false,
        }
    }
}

impl ExperimentConfig {
    /// The standard suite: 20 sequences of 100 frames, default noise, seed 42.
    pub fn standard() -> Self {
        Self { seed: Some(42), ..Self::default() }
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::InvalidConfig("seed: missing (set it in the config or pass --seed)".into()))
    }

    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        if self.sequences == 0 {
            return Err(Error::InvalidConfig("sequences: must be at least 1".into()));
        }
        self.scene.validate()?;
        self.detector.validate()?;
        self.tracker.validate()?;
        self.noise.center.validate()?;
        self.noise.keypoint.validate()?;
        let m = &self.metrics;
        if m.consistency_window < 2 || m.symmetry_samples == 0 {
            return Err(Error::InvalidConfig("metrics: consistency_window >= 2 and symmetry_samples >= 1".into()));
        }
        if self.symmetric_every > 0 && self.symmetric_category().is_none() {
            return Err(Error::InvalidConfig("symmetric_every: no symmetric category defined".into()));
        }
        Ok(())
    }

    fn symmetric_category(&self) -> Option<usize> {
        self.scene.categories.iter().position(|c| c.symmetric)
    }

    /// Scene of sequence `index`: every `symmetric_every`-th one uses the
    /// symmetric category, the others the first asymmetric one, unless the
    /// scene pins a category.
    pub fn scene_for(&self, index: usize) -> SceneSpec {
        let mut scene = self.scene.clone();
        if self.symmetric_every > 0 && scene.category.is_none() {
            let symmetric = (index + 1).is_multiple_of(self.symmetric_every);
            scene.category =
                if symmetric { self.symmetric_category() } else { scene.categories.iter().position(|c| !c.symmetric) };
        }
        scene
    }

    pub fn sequence_seed(&self, index: usize) -> Result<u64> {
        Ok(derive_seed(self.seed()?, &[SCENE_TAG, index as u64]))
    }
}

/// Runs `f` for every sequence index, in parallel when the `parallel`
/// feature is on. Results keep index order.
pub fn map_sequences<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

pub fn simulate_one(cfg: &ExperimentConfig, index: usize) -> Result<Vec<SequenceRecord>> {
    simulate_sequence(&cfg.scene_for(index), &cfg.detector, cfg.sequence_seed(index)?)
}

pub fn simulate_suite(cfg: &ExperimentConfig) -> Result<Vec<Vec<SequenceRecord>>> {
    cfg.validate()?;
    map_sequences(cfg.sequences, |i| simulate_one(cfg, i))
}

fn ground_truth(record: &SequenceRecord) -> Vec<GroundTruthObject> {
    record.objects.iter().map(|o| GroundTruthObject { id: o.id, cuboid: record.camera_cuboid(o) }).collect()
}

/// Tracks one sequence and returns one prediction per frame per reported tracklet.
///
/// With conditioning on, each frame is re-detected in-loop from the
/// recorded seeds using the tracker's conditioning maps; otherwise the
/// recorded observations are used as they are. `seed` drives the
/// initialization draws and is mixed with the sequence's recorded detection
/// seeds, so one seed serves a whole suite.
pub fn track_sequence(
    records: &[SequenceRecord],
    tracker_cfg: &TrackerConfig,
    detector: &MockDetectorSpec,
    seed: u64,
) -> Result<Vec<PredictionRecord>> {
    let first = records.first().ok_or(Error::EmptyInput)?;
    let k = first.intrinsics;
    let frame_seeds: Vec<u64> = first.observations.iter().map(|o| o.seed).collect();
    let init_seed = derive_seed(derive_seed(seed, &[INIT_TAG]), &frame_seeds);

    let detections: Vec<Observation> = match tracker_cfg.init_mode {
        InitMode::Detector => first
            .observations
            .iter()
            .filter_map(|o| {
                let obj = first.objects.iter().find(|g| g.id == o.object)?;
                detect_object(first, None, None, obj, detector, derive_seed(o.seed, &[INIT_TAG]))
            })
            .collect(),
        _ => Vec::new(),
    };
    let gt = ground_truth(first);
    let initial = initialize(tracker_cfg.init_mode, Some(&gt), &detections, &k, tracker_cfg, init_seed)?;
    let mut tracker = Tracker::with_tracklets(*tracker_cfg, k, initial)?;

    let mut out = Vec::new();
    for (f, rec) in records.iter().enumerate() {
        let obs: Vec<Observation> = if tracker_cfg.conditioning {
            let prev = f.checked_sub(1).map(|p| &records[p]);
            rec.observations
                .iter()
                .filter_map(|o| {
                    let obj = rec.objects.iter().find(|g| g.id == o.object)?;
                    detect_object(rec, prev, Some(tracker.conditioning()), obj, detector, o.seed)
                })
                .collect()
        } else {
            rec.observations.iter().map(|o| o.to_observation()).collect()
        };
        for o in tracker.step(&obs) {
            out.push(PredictionRecord::from_output(f, &o));
        }
    }
    Ok(out)
}

/// Scores of one sequence: a report per ground-truth object plus per-frame rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEvaluation {
    pub objects: Vec<(u64, MetricReport, Vec<FrameMetrics>)>,
}

impl SequenceEvaluation {
    pub fn report(&self) -> Option<MetricReport> {
        let weighted: Vec<(MetricReport, usize)> = self.objects.iter().map(|(_, r, f)| (*r, f.len())).collect();
        aggregate(&weighted)
    }
}

/// Predictions are in units of object height; they are brought to metric
/// scale with the ground-truth height before scoring. Each ground-truth
/// object takes the prediction of highest IoU in its frame.
pub fn evaluate_sequence(
    records: &[SequenceRecord],
    predictions: &[PredictionRecord],
    opts: &MetricOptions,
) -> Result<SequenceEvaluation> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut by_frame: Vec<Vec<Cuboid>> = vec![Vec::new(); records.len()];
    for p in predictions {
        let slot = by_frame.get_mut(p.frame).ok_or_else(|| {
            Error::FrameMismatch(format!(
                "prediction for frame {} but the sequence has {} frames",
                p.frame,
                records.len()
            ))
        })?;
        slot.push(p.cuboid());
    }
    let mut objects = Vec::new();
    for (oi, obj) in records[0].objects.iter().enumerate() {
        let frames: Vec<FrameResult> = records
            .iter()
            .zip(&by_frame)
            .map(|(rec, preds)| {
                let gt_obj = rec.objects.get(oi).filter(|o| o.id == obj.id).ok_or_else(|| {
                    Error::FrameMismatch(format!("frame {}: object list differs from frame 0", rec.frame))
                })?;
                let gt = rec.camera_cuboid(gt_obj);
                let h = gt.dims.0.y;
                let predicted = preds
                    .iter()
                    .map(|c| c.scaled(h))
                    .map(|c| (iou3d(&c, &gt), c))
                    .fold(None, |best: Option<(f64, Cuboid)>, cand| match best {
                        Some(b) if b.0 >= cand.0 => Some(b),
                        _ => Some(cand),
                    })
                    .map(|(_, c)| c);
                Ok(FrameResult {
                    predicted,
                    gt,
                    cam_to_world: rec.cam_to_world.to_transform(),
                    intrinsics: rec.intrinsics,
                    symmetric: gt_obj.symmetric,
                })
            })
            .collect::<Result<_>>()?;
        let (report, per) = evaluate(&frames, &WORLD_UP, opts)?;
        objects.push((obj.id, report, per));
    }
    Ok(SequenceEvaluation { objects })
}

/// Simulates, tracks and scores a suite with the given tracker settings.
pub fn run_suite(
    cfg: &ExperimentConfig,
    sequences: &[Vec<SequenceRecord>],
    tracker: &TrackerConfig,
) -> Result<MetricReport> {
    let seed = cfg.seed()?;
    let evals = map_sequences(sequences.len(), |i| {
        let preds = track_sequence(&sequences[i], tracker, &cfg.detector, seed)?;
        evaluate_sequence(&sequences[i], &preds, &cfg.metrics)
    })?;
    let weighted: Vec<(MetricReport, usize)> =
        evals.iter().flat_map(|e| e.objects.iter().map(|(_, r, f)| (*r, f.len()))).collect();
    aggregate(&weighted).ok_or(Error::EmptyInput)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub report: MetricReport,
}

/// Tracker settings of every ablation row: the full pipeline (ground-truth
/// initialization), without filtering, without conditioning heatmaps, and
/// each initialization mode.
pub fn ablation_settings(base: &TrackerConfig) -> Vec<(String, TrackerConfig)> {
    let full = TrackerConfig { init_mode: InitMode::GroundTruth, filtering: true, conditioning: true, ..*base };
    let mut rows = vec![
        ("full".to_string(), full),
        ("w/o filtering".to_string(), TrackerConfig { filtering: false, ..full }),
        ("w/o heatmap".to_string(), TrackerConfig { conditioning: false, ..full }),
    ];
    for mode in InitMode::ALL {
        rows.push((format!("init={mode}"), TrackerConfig { init_mode: mode, ..full }));
    }
    rows
}

pub fn ablate(cfg: &ExperimentConfig) -> Result<Vec<AblationRow>> {
    let sequences = simulate_suite(cfg)?;
    ablation_settings(&cfg.tracker)
        .into_iter()
        .map(|(name, t)| Ok(AblationRow { name, report: run_suite(cfg, &sequences, &t)? }))
        .collect()
}

/// One corrupted point of a training-style conditioning input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingPoint {
    /// Vertex index, or 8 for the center.
    pub point: usize,
    /// Source object id; `None` for an injected false positive.
    pub object: Option<u64>,
    pub location: [f64; 2],
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub frame: usize,
    /// Frame whose ground truth was corrupted into the conditioning input.
    pub paired_frame: usize,
    pub points: Vec<TrainingPoint>,
}

/// For every frame, corrupts the ground truth of a nearby frame into the
/// kind of conditioning input used to train a tracklet-conditioned detector.
pub fn training_samples(records: &[SequenceRecord], noise: &NoiseModel, seed: u64) -> Result<Vec<TrainingSample>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, &[TRAINING_TAG]));
    let len = records.len();
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        let k = sample_paired_frame(t, noise.center.frame_window, len, &mut rng)?;
        let rec = &records[k];
        let (ids, labeled): (Vec<u64>, Vec<LabeledObject>) = rec
            .objects
            .iter()
            .filter_map(|o| {
                let p = visible_keypoints(rec, o)?;
                Some((o.id, LabeledObject { center: p[8], keypoints: std::array::from_fn(|i| p[i]) }))
            })
            .unzip();
        let size = (rec.intrinsics.width, rec.intrinsics.height);
        let points = corrupt(&labeled, noise, size, derive_seed(seed, &[TRAINING_TAG, t as u64]))
            .into_iter()
            .map(|p| TrainingPoint {
                point: match p.role {
                    PointRole::Center => 8,
                    PointRole::Keypoint(i) => i,
                },
                object: p.object.map(|i| ids[i]),
                location: p.location.into(),
                scale: p.scale,
            })
            .collect();
        out.push(TrainingSample { frame: t, paired_frame: k, points });
    }
    Ok(out)
}
