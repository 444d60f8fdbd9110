//! Test-time error model for conditioning inputs: location jitter, false
//! negatives and false positives applied to ground-truth centers and
//! keypoints, plus paired-frame sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::heatmap::Heatmap;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Per-axis pixel standard deviation of the location jitter.
    pub sigma: f64,
    pub lambda_fp: f64,
    pub lambda_fn: f64,
    pub alpha: f64,
    pub beta_noise: f64,
    /// Paired frames are drawn from `|k − t| < frame_window`.
    pub frame_window: usize,
}

impl NoiseConfig {
    pub fn center_default() -> Self {
        Self { sigma: 1.0, lambda_fp: 0.1, lambda_fn: 0.2, alpha: 2.0, beta_noise: 4.5, frame_window: 5 }
    }

    pub fn keypoint_default() -> Self {
        Self { lambda_fp: 0.05, lambda_fn: 0.1, ..Self::center_default() }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.sigma >= 0.0 && prob(self.lambda_fp) && prob(self.lambda_fn) && self.alpha > 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid noise config {self:?}")))
        }
    }

    pub fn scale(&self, n: f64) -> f64 {
        noise_scale(n, self.alpha, self.beta_noise)
    }
}

/// Noise for object centers and for cuboid keypoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub center: NoiseConfig,
    pub keypoint: NoiseConfig,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { center: NoiseConfig::center_default(), keypoint: NoiseConfig::keypoint_default() }
    }
}

/// Render height for a jitter of magnitude `n`: `max(1 − α^(n−β), 0)`.
pub fn noise_scale(n: f64, alpha: f64, beta_noise: f64) -> f64 {
    (1.0 - alpha.powf(n - beta_noise)).max(0.0)
}

/// Ground-truth pixel locations of one object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledObject {
    pub center: Vec2,
    pub keypoints: [Vec2; 8],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointRole {
    Center,
    Keypoint(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptedPoint {
    pub role: PointRole,
    /// Source object; `None` for an injected false positive.
    pub object: Option<usize>,
    pub location: Vec2,
    pub scale: f64,
}

/// Applies jitter, drops and injections to every object.
///
/// Keypoint slots of an object (true points and injections alike) are only
/// considered when that object's center survived.
pub fn corrupt(
    objects: &[LabeledObject],
    model: &NoiseModel,
    image_size: (u32, u32),
    seed: u64,
) -> Vec<CorruptedPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let (w, h) = (image_size.0 as f64, image_size.1 as f64);

    let emit = |rng: &mut ChaCha8Rng,
                out: &mut Vec<CorruptedPoint>,
                cfg: &NoiseConfig,
                role: PointRole,
                object: usize,
                truth: Vec2|
     -> bool {
        let mut kept = false;
        if !rng.random_bool(cfg.lambda_fn) {
            let n = jitter(rng, cfg.sigma);
            out.push(CorruptedPoint { role, object: Some(object), location: truth + n, scale: cfg.scale(n.norm()) });
            kept = true;
        }
        if rng.random_bool(cfg.lambda_fp) {
            let n = jitter(rng, cfg.sigma);
            let location = Vec2::new(rng.random_range(0.0..w), rng.random_range(0.0..h));
            out.push(CorruptedPoint { role, object: None, location, scale: cfg.scale(n.norm()) });
        }
        kept
    };

    for (i, obj) in objects.iter().enumerate() {
        if !emit(&mut rng, &mut out, &model.center, PointRole::Center, i, obj.center) {
            continue;
        }
        for (k, kp) in obj.keypoints.iter().enumerate() {
            emit(&mut rng, &mut out, &model.keypoint, PointRole::Keypoint(k), i, *kp);
        }
    }
    out
}

fn jitter<R: Rng>(rng: &mut R, sigma: f64) -> Vec2 {
    if sigma == 0.0 {
        return Vec2::zeros();
    }
    let n = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    Vec2::new(n.sample(rng), n.sample(rng))
}

/// Draws the conditioning heatmaps (center, then 8 keypoints) for a
/// corrupted point set using a fixed rendering sigma.
pub fn render_corrupted(
    points: &[CorruptedPoint],
    center: &mut Heatmap,
    keypoints: &mut [Heatmap; 8],
    render_sigma: f64,
) {
    let s = Vec2::new(render_sigma, render_sigma);
    for p in points {
        let map = match p.role {
            PointRole::Center => &mut *center,
            PointRole::Keypoint(k) => &mut keypoints[k],
        };
        map.render_gaussian(&p.location, &s, p.scale);
    }
}

/// Uniform draw of a paired frame `k ≠ t` with `|k − t| < window`, clipped
/// to `[0, len)`.
pub fn sample_paired_frame<R: Rng>(t: usize, window: usize, len: usize, rng: &mut R) -> Result<usize> {
    let empty = Error::EmptyWindow { t, window, len };
    if window == 0 || t >= len {
        return Err(empty);
    }
    let lo = t.saturating_sub(window - 1);
    let hi = (t + window - 1).min(len - 1);
    let count = hi - lo; // candidates excluding t
    if count == 0 {
        return Err(empty);
    }
    let pick = lo + rng.random_range(0..count);
    Ok(if pick >= t { pick + 1 } else { pick })
}
