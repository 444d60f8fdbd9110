//! Uncertainty-scaled Gaussian heatmaps and peak extraction.
//!
//! A map cell `(row, col)` is centered on pixel `(col·stride, row·stride)`.
//! A keypoint with pixel standard deviation σ is drawn as a Gaussian whose
//! peak height is [`render_scale`]`(σ)`, so confident predictions render
//! bright and uncertain ones fade out entirely at σ ≥ `a`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

/// Parameters of the peak-height curve `k = max(1 − c^((a−σ)/(a−b)), 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for ScaleParams {
    fn default() -> Self {
        Self { a: 9.0, b: 3.0, c: 0.15 }
    }
}

impl ScaleParams {
    /// Peak height for a predicted pixel standard deviation.
    pub fn scale(&self, sigma: f64) -> f64 {
        let e = (self.a - sigma) / (self.a - self.b);
        (1.0 - self.c.powf(e)).max(0.0)
    }

    /// Inverse of [`ScaleParams::scale`], clamped to `[0.5, a]`.
    pub fn sigma_for(&self, k: f64) -> f64 {
        const MIN_SIGMA: f64 = 0.5;
        if k <= 0.0 {
            return self.a;
        }
        if k >= self.scale(0.0) {
            return MIN_SIGMA;
        }
        let e = (1.0 - k).ln() / self.c.ln();
        (self.a - (self.a - self.b) * e).clamp(MIN_SIGMA, self.a)
    }
}

/// [`ScaleParams::scale`] with the default constants (a = 9, b = 3, c = 0.15).
pub fn render_scale(sigma: f64) -> f64 {
    ScaleParams::default().scale(sigma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    stride: u32,
    values: Vec<f64>,
}

/// Conditioning input for one frame: a map of object centers and one map
/// per cuboid vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningMaps {
    pub center: Heatmap,
    pub keypoints: [Heatmap; 8],
}

impl ConditioningMaps {
    pub fn for_image(image_width: u32, image_height: u32, stride: u32) -> Self {
        let blank = Heatmap::for_image(image_width, image_height, stride);
        Self { keypoints: std::array::from_fn(|_| blank.clone()), center: blank }
    }

    pub fn clear(&mut self) {
        self.center.clear();
        self.keypoints.iter_mut().for_each(Heatmap::clear);
    }

    /// Map for vertex `k`, or the center map for `k == 8`.
    pub fn map(&self, k: usize) -> &Heatmap {
        if k == 8 {
            &self.center
        } else {
            &self.keypoints[k]
        }
    }

    pub fn map_mut(&mut self, k: usize) -> &mut Heatmap {
        if k == 8 {
            &mut self.center
        } else {
            &mut self.keypoints[k]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakDetection {
    /// Pixel location.
    pub location: Vec2,
    pub confidence: f64,
    /// Per-axis pixel standard deviation.
    pub sigma: Vec2,
}

impl PeakDetection {
    pub fn variance(&self) -> Vec2 {
        self.sigma.component_mul(&self.sigma)
    }
}

impl Heatmap {
    pub const DEFAULT_STRIDE: u32 = 4;

    /// Map covering an image of the given pixel size.
    pub fn for_image(image_width: u32, image_height: u32, stride: u32) -> Self {
        let stride = stride.max(1);
        let width = image_width.div_ceil(stride) as usize;
        let height = image_height.div_ceil(stride) as usize;
        Self { width, height, stride, values: vec![0.0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn clear(&mut self) {
        self.values.fill(0.0);
    }

    fn image_extent(&self) -> (f64, f64) {
        let s = self.stride as f64;
        (self.width as f64 * s, self.height as f64 * s)
    }

    /// Max-composites `scale·exp(−Δx²/2σx² − Δy²/2σy²)` into the map.
    /// Centers outside the image are ignored.
    pub fn render_gaussian(&mut self, center: &Vec2, sigma: &Vec2, scale: f64) {
        let (w, h) = self.image_extent();
        if scale <= 0.0 || !(center.x >= 0.0 && center.y >= 0.0 && center.x < w && center.y < h) {
            return;
        }
        let s = self.stride as f64;
        let (cx, cy) = (center.x / s, center.y / s);
        let (sx, sy) = ((sigma.x / s).max(1e-6), (sigma.y / s).max(1e-6));
        let rx = (3.0 * sx).ceil().max(1.0);
        let ry = (3.0 * sy).ceil().max(1.0);
        let c0 = ((cx - rx).floor().max(0.0)) as usize;
        let c1 = ((cx + rx).ceil() as usize).min(self.width - 1);
        let r0 = ((cy - ry).floor().max(0.0)) as usize;
        let r1 = ((cy + ry).ceil() as usize).min(self.height - 1);
        for row in r0..=r1 {
            let dy = row as f64 - cy;
            let ey = dy * dy / (2.0 * sy * sy);
            for col in c0..=c1 {
                let dx = col as f64 - cx;
                let v = scale * (-(dx * dx / (2.0 * sx * sx)) - ey).exp();
                let cell = &mut self.values[row * self.width + col];
                if v > *cell {
                    *cell = v;
                }
            }
        }
    }

    /// Bilinear lookup at a pixel location; zero outside the map.
    pub fn sample(&self, pixel: &Vec2) -> f64 {
        let s = self.stride as f64;
        let (x, y) = (pixel.x / s, pixel.y / s);
        if !(x >= 0.0 && y >= 0.0) || x > (self.width - 1) as f64 || y > (self.height - 1) as f64 {
            return 0.0;
        }
        let (c0, r0) = (x.floor() as usize, y.floor() as usize);
        let (c1, r1) = ((c0 + 1).min(self.width - 1), (r0 + 1).min(self.height - 1));
        let (fx, fy) = (x - c0 as f64, y - r0 as f64);
        let top = self.get(r0, c0) * (1.0 - fx) + self.get(r0, c1) * fx;
        let bottom = self.get(r1, c0) * (1.0 - fx) + self.get(r1, c1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Local maxima above `threshold`, strongest first.
    ///
    /// Locations are refined by a per-axis parabola through the log values of
    /// the 3-cell neighborhood, which is exact for a single Gaussian. The
    /// refined peak height is the confidence, and sigma comes from inverting
    /// the scale curve.
    pub fn extract_peaks(&self, threshold: f64, max_peaks: usize, params: &ScaleParams) -> Vec<PeakDetection> {
        let mut peaks = Vec::new();
        for row in 0..self.height {
            for col in 0..self.width {
                let v = self.get(row, col);
                if v <= threshold || !self.is_local_max(row, col) {
                    continue;
                }
                let (dx, gx) = self.refine(row, col, true);
                let (dy, gy) = self.refine(row, col, false);
                let confidence = (v.ln() + gx + gy).exp().min(1.0);
                let sigma = params.sigma_for(confidence);
                let s = self.stride as f64;
                peaks.push(PeakDetection {
                    location: Vec2::new((col as f64 + dx) * s, (row as f64 + dy) * s),
                    confidence,
                    sigma: Vec2::new(sigma, sigma),
                });
            }
        }
        peaks.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        peaks.truncate(max_peaks);
        peaks
    }

    // Plateaus are broken in favor of the first cell in scan order.
    fn is_local_max(&self, row: usize, col: usize) -> bool {
        let v = self.get(row, col);
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (r, c) = (row as i64 + dr, col as i64 + dc);
                if r < 0 || c < 0 || r >= self.height as i64 || c >= self.width as i64 {
                    continue;
                }
                let n = self.get(r as usize, c as usize);
                let earlier = dr < 0 || (dr == 0 && dc < 0);
                if n > v || (earlier && n == v) {
                    return false;
                }
            }
        }
        true
    }

    /// Sub-cell offset and log-height gain along one axis.
    fn refine(&self, row: usize, col: usize, horizontal: bool) -> (f64, f64) {
        let (idx, len) = if horizontal { (col, self.width) } else { (row, self.height) };
        if idx == 0 || idx + 1 >= len {
            return (0.0, 0.0);
        }
        let at = |i: usize| if horizontal { self.get(row, i) } else { self.get(i, col) };
        let (l, c, r) = (at(idx - 1), at(idx), at(idx + 1));
        if l <= 0.0 || r <= 0.0 {
            return (0.0, 0.0);
        }
        let (l, c, r) = (l.ln(), c.ln(), r.ln());
        let curvature = l - 2.0 * c + r;
        if curvature >= 0.0 {
            return (0.0, 0.0);
        }
        let offset = (0.5 * (l - r) / curvature).clamp(-0.5, 0.5);
        let gain = -0.25 * (l - r) * offset;
        (offset, gain)
    }

    /// Greyscale binary PGM (P5, maxval 255).
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        out.write_all(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scale_constants() {
        assert_eq!(render_scale(9.0), 0.0);
        assert!((render_scale(3.0) - 0.85).abs() < 1e-12);
        assert!((render_scale(0.0) - (1.0 - 0.15f64.powf(1.5))).abs() < 1e-12);
        assert!((render_scale(0.0) - 0.9419).abs() < 1e-4);
        assert_eq!(render_scale(20.0), 0.0);
    }

    #[test]
    fn zero_scale_leaves_map() {
        let mut m = Heatmap::for_image(64, 64, 4);
        m.render_gaussian(&Vec2::new(32.0, 32.0), &Vec2::new(2.0, 2.0), 0.0);
        assert_eq!(m.max_value(), 0.0);
    }

    #[test]
    fn aligned_peak_equals_scale() {
        let mut m = Heatmap::for_image(64, 64, 4);
        m.render_gaussian(&Vec2::new(32.0, 16.0), &Vec2::new(3.0, 3.0), 0.85);
        assert_eq!(m.get(4, 8), 0.85);
        assert_eq!(m.max_value(), 0.85);
    }

    #[test]
    fn max_composition() {
        let mut m = Heatmap::for_image(64, 64, 4);
        let c = Vec2::new(32.0, 32.0);
        m.render_gaussian(&c, &Vec2::new(2.0, 2.0), 0.5);
        m.render_gaussian(&c, &Vec2::new(2.0, 2.0), 0.85);
        assert_eq!(m.max_value(), 0.85);
    }

    #[test]
    fn outside_center_renders_nothing() {
        let mut m = Heatmap::for_image(64, 64, 4);
        m.render_gaussian(&Vec2::new(-1.0, 10.0), &Vec2::new(4.0, 4.0), 0.9);
        m.render_gaussian(&Vec2::new(10.0, 70.0), &Vec2::new(4.0, 4.0), 0.9);
        assert_eq!(m.max_value(), 0.0);
    }

    #[test]
    fn empty_map_no_peaks() {
        let m = Heatmap::for_image(64, 48, 4);
        assert!(m.extract_peaks(0.1, 10, &ScaleParams::default()).is_empty());
    }

    #[test]
    fn single_gaussian_round_trip() {
        let p = ScaleParams::default();
        let mut m = Heatmap::for_image(128, 128, 4);
        let center = Vec2::new(64.0, 48.0);
        m.render_gaussian(&center, &Vec2::new(2.0, 2.0), 0.9);
        let peaks = m.extract_peaks(0.1, 10, &p);
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].location - center).norm() / 4.0 < 0.25);
        let expected = p.sigma_for(0.9);
        assert!((peaks[0].sigma.x - expected).abs() <= 0.2 * expected);
    }

    #[test]
    fn off_grid_center_is_recovered() {
        let mut m = Heatmap::for_image(128, 128, 4);
        let center = Vec2::new(61.3, 50.9);
        m.render_gaussian(&center, &Vec2::new(6.0, 5.0), 0.8);
        let peaks = m.extract_peaks(0.1, 10, &ScaleParams::default());
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].location - center).norm() < 1e-6);
        assert!((peaks[0].confidence - 0.8).abs() < 1e-9);
    }

    #[test]
    fn two_gaussians_descending() {
        let mut m = Heatmap::for_image(160, 120, 4);
        m.render_gaussian(&Vec2::new(20.0, 20.0), &Vec2::new(2.0, 2.0), 0.6);
        m.render_gaussian(&Vec2::new(120.0, 80.0), &Vec2::new(2.0, 2.0), 0.9);
        let peaks = m.extract_peaks(0.1, 10, &ScaleParams::default());
        assert_eq!(peaks.len(), 2);
        assert!(peaks[0].confidence > peaks[1].confidence);
        assert!((peaks[0].location - Vec2::new(120.0, 80.0)).norm() < 1.0);
        assert!((peaks[1].location - Vec2::new(20.0, 20.0)).norm() < 1.0);
        assert_eq!(m.extract_peaks(0.1, 1, &ScaleParams::default()).len(), 1);
    }

    #[test]
    fn sigma_inverse_clamps() {
        let p = ScaleParams::default();
        assert_eq!(p.sigma_for(0.99), 0.5);
        assert_eq!(p.sigma_for(0.0), 9.0);
        assert!((p.sigma_for(0.85) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn pgm_header_and_size() {
        let mut m = Heatmap::for_image(16, 8, 4);
        m.render_gaussian(&Vec2::new(8.0, 4.0), &Vec2::new(2.0, 2.0), 1.0);
        let mut buf = Vec::new();
        m.write_pgm(&mut buf).unwrap();
        let header = b"P5\n4 2\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(buf.len(), header.len() + 8);
        assert_eq!(buf[header.len() + 4 + 2], 255);
    }

    proptest! {
        #[test]
        fn scale_monotone(s1 in 0.0..12.0f64, s2 in 0.0..12.0f64) {
            let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
            prop_assert!(render_scale(lo) >= render_scale(hi));
            prop_assert!((0.0..=1.0).contains(&render_scale(lo)));
        }

        #[test]
        fn aligned_round_trip(sigma in 1.0..8.0f64, col in 5usize..35, row in 5usize..25) {
            let p = ScaleParams::default();
            let mut m = Heatmap::for_image(160, 120, 4);
            let center = Vec2::new(col as f64 * 4.0, row as f64 * 4.0);
            let k = p.scale(sigma);
            m.render_gaussian(&center, &Vec2::new(sigma, sigma), k);
            let peaks = m.extract_peaks(0.05, 4, &p);
            prop_assert_eq!(peaks.len(), 1);
            prop_assert!((peaks[0].location - center).norm() / 4.0 < 0.25);
            prop_assert!((peaks[0].confidence - k).abs() < 1e-6);
            prop_assert!((peaks[0].sigma.x - sigma.max(0.5)).abs() < 1e-6);
        }

        #[test]
        fn render_order_independent(
            a in prop::array::uniform2(0.0..128.0f64),
            b in prop::array::uniform2(0.0..128.0f64),
            ka in 0.0..1.0f64, kb in 0.0..1.0f64,
        ) {
            let mut m1 = Heatmap::for_image(128, 128, 4);
            let mut m2 = m1.clone();
            let s = Vec2::new(5.0, 3.0);
            m1.render_gaussian(&Vec2::from(a), &s, ka);
            m1.render_gaussian(&Vec2::from(b), &s, kb);
            m2.render_gaussian(&Vec2::from(b), &s, kb);
            m2.render_gaussian(&Vec2::from(a), &s, ka);
            prop_assert_eq!(m1, m2);
        }
    }
}
