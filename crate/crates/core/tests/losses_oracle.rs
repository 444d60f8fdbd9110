use cuboidtrack::losses::{kld, kld_plus, nll, KldPlusConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    (f(x + H) - f(x - H)) / (2.0 * H)
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1.0)
}

#[test]
fn nll_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 1000 {
        let (y, yh, b): (f64, f64, f64) =
            (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(0.1..5.0));
        if (y - yh).abs() < 1e-3 {
            continue;
        }
        let e = nll(y, yh, b).unwrap();
        let v = |y: f64, yh: f64, b: f64| nll(y, yh, b).unwrap().value;
        assert!(rel_err(e.d_y, central(|t| v(t, yh, b), y)) < 1e-5);
        assert!(rel_err(e.d_y_hat, central(|t| v(y, t, b), yh)) < 1e-5);
        assert!(rel_err(e.d_uncertainty, central(|t| v(y, yh, t), b)) < 1e-5);
        checked += 1;
    }
}

#[test]
fn kld_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 1000 {
        let y: f64 = rng.random_range(-5.0..5.0);
        let yh: f64 = rng.random_range(-5.0..5.0);
        let (b, beta) = (rng.random_range(0.1..5.0), rng.random_range(0.1..5.0));
        if (y - yh).abs() < 1e-3 {
            continue;
        }
        let e = kld(y, yh, b, beta).unwrap();
        let v = |y: f64, yh: f64, b: f64, beta: f64| kld(y, yh, b, beta).unwrap().value;
        assert!(rel_err(e.d_y, central(|t| v(t, yh, b, beta), y)) < 1e-5);
        assert!(rel_err(e.d_y_hat, central(|t| v(y, t, b, beta), yh)) < 1e-5);
        assert!(rel_err(e.d_uncertainty, central(|t| v(y, yh, t, beta), b)) < 1e-5);
        assert!(rel_err(e.d_beta, central(|t| v(y, yh, b, t), beta)) < 1e-5);
        checked += 1;
    }
}

#[test]
fn kld_plus_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let unclipped = KldPlusConfig { grad_clip: f64::INFINITY, ..KldPlusConfig::default() };
    for _ in 0..1000 {
        let (y, yh) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let s = rng.random_range(-3.0..3.0);
        let cfg = KldPlusConfig { beta2: rng.random_range(0.05..2.0), ..unclipped };
        let e = kld_plus(y, yh, s, &cfg).unwrap();
        let v =
            |y: f64, yh: f64, s: f64, b2: f64| kld_plus(y, yh, s, &KldPlusConfig { beta2: b2, ..cfg }).unwrap().value;
        assert!(rel_err(e.d_y, central(|t| v(t, yh, s, cfg.beta2), y)) < 1e-5);
        assert!(rel_err(e.d_y_hat, central(|t| v(y, t, s, cfg.beta2), yh)) < 1e-5);
        assert!(rel_err(e.d_uncertainty, central(|t| v(y, yh, t, cfg.beta2), s)) < 1e-5);
        assert!(rel_err(e.d_beta, central(|t| v(y, yh, s, t), cfg.beta2)) < 1e-5);
    }
}

#[test]
fn kld_nonnegative_on_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..10_000 {
        let v = kld(
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(1e-3..10.0),
            rng.random_range(1e-3..10.0),
        )
        .unwrap()
        .value;
        assert!(v >= 0.0, "{v}");
    }
    for (y, b) in [(0.0, 1.0), (3.5, 0.2), (-7.0, 4.0)] {
        assert!(kld(y, y, b, b).unwrap().value.abs() < 1e-12);
    }
}

#[test]
fn nll_unbounded_below_kld_not() {
    let mut last = f64::INFINITY;
    for k in 1..30 {
        let b = 10f64.powi(-k);
        let v = nll(0.0, 0.0, b).unwrap().value;
        assert!(v < last);
        last = v;
        assert!(kld(0.0, 0.0, b, 0.5).unwrap().value >= 0.0);
    }
    assert!(last < -60.0);
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-10 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

#[test]
fn kld_plus_has_finite_minimizer() {
    let cfg = KldPlusConfig::default();
    for r in [0.0, 0.05, 0.3, 1.0, 2.5] {
        let f = |s: f64| kld_plus(r, 0.0, s, &cfg).unwrap().value;
        let s = golden_section(f, -20.0, 20.0);
        assert!(s > -19.0 && s < 19.0, "minimizer hit the bracket: {s}");
        assert!(f(s) < f(s - 1.0) && f(s) < f(s + 1.0));
        // Stationarity in u = λσ̂²: u²/2 + u − (β²e^{−r²/β²} + r²) = 0.
        let num = cfg.beta2 * (-r * r / cfg.beta2).exp() + r * r;
        let u = -1.0 + (1.0 + 2.0 * num).sqrt();
        assert!((s.exp() - u).abs() < 1e-6 * u.max(1.0), "r={r}: {} vs {u}", s.exp());
    }
}

proptest! {
    #[test]
    fn kld_is_nonnegative(y in -50.0..50.0f64, yh in -50.0..50.0f64, b in 1e-4..50.0f64, beta in 1e-4..50.0f64) {
        prop_assert!(kld(y, yh, b, beta).unwrap().value >= 0.0);
    }

    #[test]
    fn losses_reject_nonpositive_uncertainty(y in -5.0..5.0f64, b in -5.0..=0.0f64) {
        prop_assert!(nll(y, 0.0, b).is_err());
        prop_assert!(kld(y, 0.0, b, 1.0).is_err());
    }

    #[test]
    fn kld_plus_gradients_are_clipped(y in -100.0..100.0f64, s in -30.0..30.0f64) {
        let e = kld_plus(y, 0.0, s, &KldPlusConfig::default()).unwrap();
        prop_assert!(e.grad().iter().all(|g| g.abs() <= 100.0));
    }
}
