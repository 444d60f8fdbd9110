use cuboidtrack::geometry::Vec2;
use cuboidtrack::heatmap::render_scale;
use cuboidtrack::noise_sim::{corrupt, noise_scale, LabeledObject, NoiseModel, PointRole};
use proptest::prelude::*;

fn object() -> LabeledObject {
    LabeledObject {
        center: Vec2::new(320.0, 240.0),
        keypoints: std::array::from_fn(|k| Vec2::new(280.0 + 10.0 * k as f64, 200.0 + 5.0 * k as f64)),
    }
}

#[derive(Default)]
struct Counts {
    trials: usize,
    kept: usize,
    injected: usize,
}

impl Counts {
    fn fn_rate(&self) -> f64 {
        1.0 - self.kept as f64 / self.trials as f64
    }
    fn fp_rate(&self) -> f64 {
        self.injected as f64 / self.trials as f64
    }
}

#[test]
fn empirical_rates_match_configuration() {
    let model = NoiseModel::default();
    assert_eq!((model.center.lambda_fp, model.center.lambda_fn), (0.1, 0.2));
    assert_eq!((model.keypoint.lambda_fp, model.keypoint.lambda_fn), (0.05, 0.1));
    let (mut c, mut k) = (Counts::default(), Counts::default());
    let mut violations = 0;
    for seed in 0..10_000 {
        let pts = corrupt(&[object()], &model, (640, 480), seed);
        let center_kept = pts.iter().any(|p| p.role == PointRole::Center && p.object.is_some());
        c.trials += 1;
        c.kept += center_kept as usize;
        c.injected += pts.iter().filter(|p| p.role == PointRole::Center && p.object.is_none()).count();
        let keypoints: Vec<_> = pts.iter().filter(|p| matches!(p.role, PointRole::Keypoint(_))).collect();
        if !center_kept {
            violations += keypoints.len();
            continue;
        }
        k.trials += 8;
        k.kept += keypoints.iter().filter(|p| p.object.is_some()).count();
        k.injected += keypoints.iter().filter(|p| p.object.is_none()).count();
    }
    assert_eq!(violations, 0);
    assert!((c.fn_rate() - 0.2).abs() < 0.02, "center fn {}", c.fn_rate());
    assert!((c.fp_rate() - 0.1).abs() < 0.02, "center fp {}", c.fp_rate());
    assert!((k.fn_rate() - 0.1).abs() < 0.02, "keypoint fn {}", k.fn_rate());
    assert!((k.fp_rate() - 0.05).abs() < 0.02, "keypoint fp {}", k.fp_rate());
}

#[test]
fn jitter_has_configured_spread() {
    let model = NoiseModel::default();
    let truth = object().center;
    let mut sq = Vec::new();
    for seed in 0..10_000 {
        for p in corrupt(&[object()], &model, (640, 480), seed) {
            if p.role == PointRole::Center && p.object.is_some() {
                let d = p.location - truth;
                sq.push(d.x * d.x);
                sq.push(d.y * d.y);
                assert!((p.scale - noise_scale(d.norm(), 2.0, 4.5)).abs() < 1e-12);
            }
        }
    }
    let var = sq.iter().sum::<f64>() / sq.len() as f64;
    assert!((var - 1.0).abs() < 0.05, "{var}");
}

#[test]
fn scale_constants() {
    assert!(render_scale(9.0).abs() < 1e-12);
    assert!((render_scale(3.0) - 0.85).abs() < 1e-12);
    assert!(noise_scale(4.5, 2.0, 4.5).abs() < 1e-12);
    assert!((noise_scale(0.0, 2.0, 4.5) - (1.0 - 2f64.powf(-4.5))).abs() < 1e-12);
}

proptest! {
    #[test]
    fn noise_scale_is_nonincreasing(a in 0.0..10.0f64, b in 0.0..10.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(noise_scale(lo, 2.0, 4.5) >= noise_scale(hi, 2.0, 4.5));
        prop_assert!((0.0..1.0).contains(&noise_scale(lo, 2.0, 4.5)));
    }

    #[test]
    fn render_scale_is_nonincreasing(a in 0.0..20.0f64, b in 0.0..20.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(render_scale(lo) >= render_scale(hi));
        prop_assert!((0.0..=1.0).contains(&render_scale(lo)));
    }
}
