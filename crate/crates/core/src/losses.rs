//! Laplace negative log-likelihood and KL-divergence uncertainty losses,
//! with analytic gradients.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Loss value and its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub d_y: f64,
    pub d_y_hat: f64,
    /// Derivative w.r.t. the uncertainty input (`b̂` for [`nll`] and [`kld`],
    /// `log λσ̂²` for [`kld_plus`]).
    pub d_uncertainty: f64,
    /// Derivative w.r.t. the label-uncertainty hyperparameter; zero for [`nll`].
    pub d_beta: f64,
}

impl LossEval {
    pub fn grad(&self) -> [f64; 4] {
        [self.d_y, self.d_y_hat, self.d_uncertainty, self.d_beta]
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.grad().iter().all(|g| g.is_finite())
    }
}

// Subgradient of |r| at 0 is taken as 0.
fn sign(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `log 2b̂ + |y − ŷ| / b̂`. Unbounded below as `b̂ → 0` with `y = ŷ`.
pub fn nll(y: f64, y_hat: f64, b_hat: f64) -> Result<LossEval> {
    if !(b_hat > 0.0) {
        return Err(Error::NonPositiveUncertainty(b_hat));
    }
    let r = y - y_hat;
    let u = r.abs();
    let d_y = sign(r) / b_hat;
    Ok(LossEval {
        value: (2.0 * b_hat).ln() + u / b_hat,
        d_y,
        d_y_hat: -d_y,
        d_uncertainty: 1.0 / b_hat - u / (b_hat * b_hat),
        d_beta: 0.0,
    })
}

/// KL divergence from the label Laplace(y, β) to the predicted Laplace(ŷ, b̂):
/// `log(b̂/β) + (β·exp(−|y − ŷ|/β) + |y − ŷ|)/b̂ − 1`. Always ≥ 0.
pub fn kld(y: f64, y_hat: f64, b_hat: f64, beta: f64) -> Result<LossEval> {
    if !(b_hat > 0.0) {
        return Err(Error::NonPositiveUncertainty(b_hat));
    }
    if !(beta > 0.0) {
        return Err(Error::NonPositiveUncertainty(beta));
    }
    let r = y - y_hat;
    let u = r.abs();
    let e = (-u / beta).exp();
    let num = beta * e + u;
    let d_y = sign(r) * (1.0 - e) / b_hat;
    Ok(LossEval {
        value: (b_hat / beta).ln() + num / b_hat - 1.0,
        d_y,
        d_y_hat: -d_y,
        d_uncertainty: 1.0 / b_hat - num / (b_hat * b_hat),
        d_beta: -1.0 / beta + e * (1.0 + u / beta) / b_hat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KldPlusConfig {
    /// Label uncertainty β².
    pub beta2: f64,
    /// Coefficient λ relating the network output to σ̂².
    pub lambda: f64,
    /// Bound on each gradient component's magnitude.
    pub grad_clip: f64,
}

impl Default for KldPlusConfig {
    fn default() -> Self {
        Self { beta2: 0.1, lambda: 0.25, grad_clip: 100.0 }
    }
}

impl KldPlusConfig {
    /// σ̂² recovered from the predicted `log λσ̂²`.
    pub fn predicted_variance(&self, log_lambda_sigma2: f64) -> f64 {
        log_lambda_sigma2.exp() / self.lambda
    }
}

/// Squared-residual KL loss parameterized by `s = log λσ̂²`:
/// `log(λσ̂²/β²) + (β²·exp(−(y−ŷ)²/β²) + (y−ŷ)²)/(λσ̂²) − 1 + ½λσ̂²`.
///
/// The value only depends on the product `λσ̂² = exp(s)`; gradient
/// components are clipped to `±cfg.grad_clip`.
pub fn kld_plus(y: f64, y_hat: f64, log_lambda_sigma2: f64, cfg: &KldPlusConfig) -> Result<LossEval> {
    let b2 = cfg.beta2;
    if !(b2 > 0.0) {
        return Err(Error::NonPositiveUncertainty(b2));
    }
    let s = log_lambda_sigma2.exp();
    let r = y - y_hat;
    let q = r * r;
    let e = (-q / b2).exp();
    let num = b2 * e + q;
    let clip = |g: f64| g.clamp(-cfg.grad_clip, cfg.grad_clip);
    let d_y = 2.0 * r * (1.0 - e) / s;
    Ok(LossEval {
        value: (s / b2).ln() + num / s - 1.0 + 0.5 * s,
        d_y: clip(d_y),
        d_y_hat: clip(-d_y),
        d_uncertainty: clip(1.0 - num / s + 0.5 * s),
        d_beta: clip(-1.0 / b2 + e * (1.0 + q / b2) / s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nll_examples() {
        assert!(nll(1.0, 1.0, 0.5).unwrap().value.abs() < 1e-15);
        assert!((nll(1.0, 0.0, 1.0).unwrap().value - (2f64.ln() + 1.0)).abs() < 1e-15);
        assert!((nll(1.0, 0.0, 1.0).unwrap().value - 1.6931).abs() < 1e-4);
        assert!(nll(0.0, 0.0, 1e-300).unwrap().value < -600.0);
        assert_eq!(nll(0.0, 0.0, 0.0), Err(Error::NonPositiveUncertainty(0.0)));
        assert!(nll(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn nll_subgradient_at_kink() {
        let e = nll(2.0, 2.0, 1.0).unwrap();
        assert_eq!(e.d_y, 0.0);
        assert_eq!(e.d_y_hat, 0.0);
    }

    #[test]
    fn kld_examples() {
        assert_eq!(kld(0.3, 0.3, 0.7, 0.7).unwrap().value, 0.0);
        let v = kld(0.0, 0.0, 2.0, 1.0).unwrap().value;
        assert!((v - (2f64.ln() + 0.5 - 1.0)).abs() < 1e-15);
        assert!((v - 0.1931).abs() < 1e-4);
        assert!(kld(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(kld(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn kld_plus_examples() {
        let cfg = KldPlusConfig::default();
        let v = kld_plus(0.0, 0.0, 0.1f64.ln(), &cfg).unwrap().value;
        assert!((v - 0.05).abs() < 1e-12);
        let v = kld_plus(1.0, 0.0, 0.0, &cfg).unwrap().value;
        let expected = 10f64.ln() + (0.1 * (-10f64).exp() + 1.0) - 1.0 + 0.5;
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 2.8026).abs() < 1e-4);
    }

    #[test]
    fn kld_plus_clips_gradients() {
        let cfg = KldPlusConfig::default();
        let e = kld_plus(10.0, 0.0, -8.0, &cfg).unwrap();
        assert_eq!(e.d_uncertainty, -100.0);
        assert_eq!(e.d_y, 100.0);
        assert_eq!(e.d_y_hat, -100.0);
    }

    #[test]
    fn predicted_variance_uses_lambda() {
        let cfg = KldPlusConfig::default();
        assert!((cfg.predicted_variance(0.0) - 4.0).abs() < 1e-15);
    }
}
