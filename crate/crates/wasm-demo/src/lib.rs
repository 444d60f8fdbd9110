//! Browser bindings for three interactive views: a conditioning heatmap
//! with its extracted peaks, the uncertainty losses as functions of the
//! predicted uncertainty, and the IoU of two oriented boxes.

use cuboidtrack::geometry::{Cuboid, CuboidDimensions, RigidTransform, Vec2, Vec3};
use cuboidtrack::heatmap::{render_scale, Heatmap, ScaleParams};
use cuboidtrack::losses::{kld, kld_plus, nll, KldPlusConfig};
use cuboidtrack::metrics::{iou3d, symmetric_best, Objective, SYMMETRY_AXIS};
use wasm_bindgen::prelude::*;

/// A heatmap over an image, fed with keypoints of a chosen uncertainty.
#[wasm_bindgen]
pub struct HeatmapDemo {
    map: Heatmap,
}

#[wasm_bindgen]
impl HeatmapDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(image_width: u32, image_height: u32, stride: u32) -> HeatmapDemo {
        HeatmapDemo { map: Heatmap::for_image(image_width.max(1), image_height.max(1), stride.max(1)) }
    }

    pub fn cols(&self) -> usize {
        self.map.width()
    }

    pub fn rows(&self) -> usize {
        self.map.height()
    }

    pub fn clear(&mut self) {
        self.map.clear();
    }

    /// Renders a keypoint at pixel `(x, y)` whose predicted std is `sigma`
    /// pixels; the height is `render_scale(sigma)`. Returns that height.
    pub fn add_keypoint(&mut self, x: f64, y: f64, sigma: f64) -> f64 {
        let sigma = sigma.max(0.1);
        let k = render_scale(sigma);
        self.map.render_gaussian(&Vec2::new(x, y), &Vec2::new(sigma, sigma), k);
        k
    }

    /// Row-major cell values in `[0, 1]`.
    pub fn values(&self) -> Vec<f64> {
        self.map.values().to_vec()
    }

    /// Peaks above `threshold`, flattened as `[x, y, confidence, sigma_x, sigma_y, ...]`.
    pub fn peaks(&self, threshold: f64, max_peaks: usize) -> Vec<f64> {
        self.map
            .extract_peaks(threshold, max_peaks, &ScaleParams::default())
            .iter()
            .flat_map(|p| [p.location.x, p.location.y, p.confidence, p.sigma.x, p.sigma.y])
            .collect()
    }
}

/// Peak height assigned to a keypoint with the given pixel std.
#[wasm_bindgen]
pub fn scale_for_sigma(sigma: f64) -> f64 {
    render_scale(sigma)
}

/// Losses at a fixed residual as the predicted uncertainty `u` sweeps
/// `[u_min, u_max]` on `samples` points. Rows are `[u, nll, kld, kld_plus]`
/// where `u` is `b̂` for the Laplace losses and `λσ̂²` for the squared one.
/// Non-finite entries (invalid inputs) come back as NaN.
#[wasm_bindgen]
pub fn loss_curves(residual: f64, beta: f64, beta2: f64, u_min: f64, u_max: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    let (lo, hi) = (u_min.max(1e-6), u_max.max(u_min.max(1e-6) * 1.0001));
    let cfg = KldPlusConfig { beta2, ..KldPlusConfig::default() };
    let mut out = Vec::with_capacity(4 * n);
    for i in 0..n {
        // Log-spaced so both ends of the range get resolution.
        let u = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
        out.push(u);
        out.push(nll(residual, 0.0, u).map_or(f64::NAN, |e| e.value));
        out.push(kld(residual, 0.0, u, beta).map_or(f64::NAN, |e| e.value));
        out.push(kld_plus(residual, 0.0, u.ln(), &cfg).map_or(f64::NAN, |e| e.value));
    }
    out
}

fn box_from(params: &[f64]) -> Option<Cuboid> {
    let &[x, y, z, yaw_deg, w, h, l] = params else {
        return None;
    };
    let dims = CuboidDimensions::new(w, h, l);
    if !dims.is_valid() {
        return None;
    }
    let pose = RigidTransform::new(
        RigidTransform::from_axis_angle(&Vec3::y(), yaw_deg.to_radians()).rotation,
        Vec3::new(x, y, z),
    );
    Some(Cuboid::new(pose, dims))
}

/// IoU of two boxes given as `[x, y, z, yaw_deg, width, height, length]`
/// with yaw about the vertical axis. NaN for malformed input.
#[wasm_bindgen]
pub fn box_iou(a: &[f64], b: &[f64]) -> f64 {
    match (box_from(a), box_from(b)) {
        (Some(a), Some(b)) => iou3d(&a, &b),
        _ => f64::NAN,
    }
}

/// Best IoU over `samples` rotations of `a` about its vertical axis, as
/// scored for rotationally symmetric objects.
#[wasm_bindgen]
pub fn symmetric_box_iou(a: &[f64], b: &[f64], samples: usize) -> f64 {
    match (box_from(a), box_from(b)) {
        (Some(a), Some(b)) => {
            symmetric_best(&a, &b, SYMMETRY_AXIS, samples.max(1), Objective::Maximize, |p, g| Ok(iou3d(p, g)))
                .unwrap_or(f64::NAN)
        }
        _ => f64::NAN,
    }
}

/// Top-down footprint corners `[x0, z0, x1, z1, x2, z2, x3, z3]` of a box
/// given like [`box_iou`].
#[wasm_bindgen]
pub fn footprint(params: &[f64]) -> Vec<f64> {
    let Some(c) = box_from(params) else {
        return Vec::new();
    };
    // Bottom face vertices (negative y sign) in cyclic order.
    [0usize, 1, 5, 4]
        .iter()
        .flat_map(|&i| {
            let v = c.vertices()[i];
            [v.x, v.z]
        })
        .collect()
}
