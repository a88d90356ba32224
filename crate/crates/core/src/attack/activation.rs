//! Turning raw scores into membership probabilities and decisions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Simple,
    Calibrated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationConfig {
    pub regime: Regime,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// P(Y = 1); required by the calibrated regime.
    #[serde(default)]
    pub prior: Option<f64>,
}

fn default_threshold() -> f64 {
    0.5
}

impl ActivationConfig {
    pub fn simple() -> Self {
        ActivationConfig { regime: Regime::Simple, threshold: 0.5, prior: None }
    }

    pub fn calibrated(prior: f64) -> Self {
        ActivationConfig { regime: Regime::Calibrated, threshold: 0.5, prior: Some(prior) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Parameter(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        match (self.regime, self.prior) {
            (_, Some(p)) if !(p > 0.0 && p < 1.0) => {
                Err(Error::Parameter(format!("prior {p} outside (0, 1)")))
            }
            (Regime::Calibrated, None) => {
                Err(Error::Parameter("calibrated activation needs a prior".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Activation {
    pub probabilities: Vec<f64>,
    pub predictions: Vec<bool>,
    /// Set when the scores carried no spread and every prediction was
    /// forced to 0.
    pub degenerate: bool,
}

/// `f(Λ) = 2σ(Λ) − 1`, with decisions taken on `Λ` itself so that the
/// boundary case is exact.
pub fn activate_simple(raw: &[f64], threshold: f64) -> Activation {
    let cut = ((1.0 + threshold) / (1.0 - threshold)).ln();
    Activation {
        probabilities: raw.iter().map(|&l| (l / 2.0).tanh()).collect(),
        predictions: raw.iter().map(|&l| l >= cut).collect(),
        degenerate: false,
    }
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Z-scores (population standard deviation) shifted by their `1 − prior`
/// quantile, then passed through the sigmoid. Roughly a fraction `prior` of
/// the records ends up predicted positive.
pub fn activate_calibrated(raw: &[f64], prior: f64, threshold: f64) -> Result<Activation> {
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::Parameter(format!("prior {prior} outside (0, 1)")));
    }
    let n = raw.len();
    let degenerate = Activation {
        probabilities: vec![0.0; n],
        predictions: vec![false; n],
        degenerate: true,
    };
    if n == 0 {
        return Ok(degenerate);
    }
    let mean = raw.iter().sum::<f64>() / n as f64;
    let var = raw.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Ok(degenerate);
    }
    let z: Vec<f64> = raw.iter().map(|x| (x - mean) / sd).collect();
    let q = quantile(&z, 1.0 - prior);
    let cut = (threshold / (1.0 - threshold)).ln();
    Ok(Activation {
        probabilities: z.iter().map(|&v| 1.0 / (1.0 + (q - v).exp())).collect(),
        predictions: z.iter().map(|&v| v - q >= cut).collect(),
        degenerate: false,
    })
}

/// Activation of a score vector. Raw scores that overflow are replaced by
/// their logarithms for calibration, which leaves the decisions unchanged
/// up to quantile interpolation.
pub fn activate(log_scores: &[f64], cfg: &ActivationConfig) -> Result<Activation> {
    cfg.validate()?;
    let raw: Vec<f64> = log_scores.iter().map(|l| l.exp()).collect();
    match cfg.regime {
        Regime::Simple => Ok(activate_simple(&raw, cfg.threshold)),
        Regime::Calibrated => {
            let prior = cfg.prior.expect("validated");
            if raw.iter().all(|x| x.is_finite()) {
                activate_calibrated(&raw, prior, cfg.threshold)
            } else {
                activate_calibrated(log_scores, prior, cfg.threshold)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_boundaries() {
        let a = activate_simple(&[0.0, 3f64.ln(), 1e6, 1.0], 0.5);
        assert_eq!(a.probabilities[0], 0.0);
        assert!((a.probabilities[1] - 0.5).abs() < 1e-15);
        assert_eq!(a.probabilities[2], 1.0);
        assert_eq!(a.predictions, vec![false, true, true, false]);
    }

    #[test]
    fn calibrated_halves() {
        let a = activate_calibrated(&[1.0, 2.0, 3.0, 4.0], 0.5, 0.5).unwrap();
        assert_eq!(a.predictions, vec![false, false, true, true]);
    }

    #[test]
    fn calibrated_degenerate() {
        let a = activate_calibrated(&[2.0; 5], 0.3, 0.5).unwrap();
        assert!(a.degenerate);
        assert!(a.predictions.iter().all(|p| !p));
        assert!(activate_calibrated(&[1.0], 0.0, 0.5).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 0.5), 2.5);
        assert_eq!(quantile(&[1.0, 2.0], 1.0), 2.0);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn config_validation() {
        assert!(ActivationConfig::simple().validate().is_ok());
        assert!(ActivationConfig::calibrated(1.0).validate().is_err());
        let mut c = ActivationConfig::calibrated(0.2);
        c.prior = None;
        assert!(c.validate().is_err());
    }
}
