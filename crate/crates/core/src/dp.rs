//! Differential-privacy primitives shared by the generators: Laplace and
//! Gaussian noise, the exponential mechanism and a budget ledger.
//!
//! `epsilon = f64::INFINITY` is accepted everywhere and switches every
//! mechanism to its noiseless limit.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpParams {
    #[serde(with = "epsilon_serde")]
    pub epsilon: f64,
    #[serde(default)]
    pub delta: f64,
    /// Usefulness parameter bounding Bayesian-network parent domains. When
    /// absent the generator uses `4 / |train|`.
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl DpParams {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Self {
        DpParams {
            epsilon,
            delta,
            theta: None,
            seed,
        }
    }

    pub fn noiseless(seed: u64) -> Self {
        DpParams::new(f64::INFINITY, 0.0, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Parameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::Parameter(format!(
                "delta must lie in [0, 1), got {}",
                self.delta
            )));
        }
        if let Some(t) = self.theta {
            if !(t > 0.0) {
                return Err(Error::Parameter(format!("theta must be positive, got {t}")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.epsilon.is_infinite()
    }
}

/// (De)serializes epsilon as a JSON number, or the string `"inf"` for the
/// noiseless sentinel.
pub mod epsilon_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(eps: &f64, s: S) -> Result<S::Ok, S::Error> {
        if eps.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*eps)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| de::Error::custom(format!("invalid epsilon `{s}`"))),
        }
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for e in v {
                if e.is_infinite() {
                    seq.serialize_element("inf")?;
                } else {
                    seq.serialize_element(e)?;
                }
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?
                .into_iter()
                .map(|r| match r {
                    Repr::Num(x) => Ok(x),
                    Repr::Str(s) => s
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| de::Error::custom(format!("invalid epsilon `{s}`"))),
                })
                .collect()
        }
    }
}

/// Fractions of the budget given to structure selection and to measuring
/// statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetSplit {
    pub selection: f64,
    pub measurement: f64,
}

impl Default for BudgetSplit {
    fn default() -> Self {
        BudgetSplit {
            selection: 1.0 / 3.0,
            measurement: 2.0 / 3.0,
        }
    }
}

impl BudgetSplit {
    pub fn validate(&self) -> Result<()> {
        if self.selection < 0.0
            || self.measurement < 0.0
            || (self.selection + self.measurement - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(format!(
                "budget split {}/{} must be non-negative and sum to 1",
                self.selection, self.measurement
            )));
        }
        Ok(())
    }
}

pub fn sample_laplace(rng: &mut Rng, scale: f64) -> f64 {
    // inverse CDF on u in (-1/2, 1/2)
    let u: f64 = rng.random::<f64>() - 0.5;
    let tail = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    -scale * u.signum() * tail.ln()
}

pub fn sample_gaussian(rng: &mut Rng, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}

/// `n` iid Laplace(0, scale) draws.
pub fn laplace_noise(scale: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Parameter(format!("Laplace scale must be positive, got {scale}")));
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..n).map(|_| sample_laplace(&mut rng, scale)).collect())
}

/// `n` iid N(0, sigma²) draws.
pub fn gaussian_noise(sigma: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!("Gaussian sigma must be positive, got {sigma}")));
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..n).map(|_| sample_gaussian(&mut rng, sigma)).collect())
}

/// Laplace scale giving `epsilon`-DP for a query of L1 sensitivity `l1`.
pub fn laplace_scale(epsilon: f64, l1: f64) -> f64 {
    l1 / epsilon
}

/// Classic Gaussian-mechanism calibration for (epsilon, delta)-DP with L2
/// sensitivity `l2`.
pub fn gaussian_sigma(epsilon: f64, delta: f64, l2: f64) -> f64 {
    (2.0 * (1.25 / delta).ln()).sqrt() * l2 / epsilon
}

fn validate_scores(scores: &[f64], sensitivity: f64) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Selection("no candidate to select from".into()));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Selection(format!("non-finite score {s}")));
    }
    if !(sensitivity > 0.0) {
        return Err(Error::Parameter(format!(
            "sensitivity must be positive, got {sensitivity}"
        )));
    }
    Ok(())
}

/// Index of the first maximal score.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Exponential mechanism drawing from `rng`: index `k` is returned with
/// probability proportional to `exp(epsilon * scores[k] / (2 * sensitivity))`.
pub fn exponential_mechanism_with(
    rng: &mut Rng,
    scores: &[f64],
    epsilon: f64,
    sensitivity: f64,
) -> Result<usize> {
    validate_scores(scores, sensitivity)?;
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if epsilon.is_infinite() {
        return Ok(argmax(scores));
    }
    let factor = epsilon / (2.0 * sensitivity);
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| ((s - max) * factor).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return Ok(i);
        }
        u -= w;
    }
    // rounding: fall back to the last candidate with positive weight
    Ok(weights.iter().rposition(|&w| w > 0.0).unwrap_or(0))
}

pub fn exponential_mechanism(
    scores: &[f64],
    epsilon: f64,
    sensitivity: f64,
    seed: u64,
) -> Result<usize> {
    exponential_mechanism_with(&mut rng_from_seed(seed), scores, epsilon, sensitivity)
}

/// Analytic selection probabilities of the exponential mechanism.
pub fn exponential_mechanism_probabilities(
    scores: &[f64],
    epsilon: f64,
    sensitivity: f64,
) -> Result<Vec<f64>> {
    validate_scores(scores, sensitivity)?;
    if epsilon.is_infinite() {
        let mut p = vec![0.0; scores.len()];
        p[argmax(scores)] = 1.0;
        return Ok(p);
    }
    let factor = epsilon / (2.0 * sensitivity);
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = scores.iter().map(|s| ((s - max) * factor).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub epsilon_share: f64,
    pub delta_share: f64,
    pub mechanism: String,
}

/// Record of how a total privacy budget was spent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub total: DpParams,
    pub spent: Vec<LedgerEntry>,
}

const BUDGET_SLACK: f64 = 1e-9;

impl BudgetLedger {
    pub fn new(total: DpParams) -> Self {
        BudgetLedger {
            total,
            spent: Vec::new(),
        }
    }

    pub fn epsilon_spent(&self) -> f64 {
        self.spent.iter().map(|e| e.epsilon_share).sum()
    }

    pub fn delta_spent(&self) -> f64 {
        self.spent.iter().map(|e| e.delta_share).sum()
    }

    /// Records a charge, expressed as fractions of the total budget, and
    /// returns the absolute (epsilon, delta) granted.
    pub fn charge(
        &mut self,
        label: impl Into<String>,
        epsilon_share: f64,
        delta_share: f64,
        mechanism: &str,
    ) -> Result<(f64, f64)> {
        let label = label.into();
        if epsilon_share < 0.0 || delta_share < 0.0 {
            return Err(Error::Budget(format!("negative share for `{label}`")));
        }
        if self.epsilon_spent() + epsilon_share > 1.0 + BUDGET_SLACK
            || self.delta_spent() + delta_share > 1.0 + BUDGET_SLACK
        {
            return Err(Error::Budget(format!("charging `{label}` overspends the budget")));
        }
        self.spent.push(LedgerEntry {
            label,
            epsilon_share,
            delta_share,
            mechanism: mechanism.to_string(),
        });
        Ok((
            self.total.epsilon * epsilon_share,
            self.total.delta * delta_share,
        ))
    }

    pub fn within_budget(&self) -> bool {
        self.epsilon_spent() <= 1.0 + BUDGET_SLACK && self.delta_spent() <= 1.0 + BUDGET_SLACK
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_sentinel() {
        for seed in 0..20 {
            assert_eq!(
                exponential_mechanism(&[1.0, 3.0, 2.0], f64::INFINITY, 1.0, seed).unwrap(),
                1
            );
        }
        assert_eq!(argmax(&[2.0, 5.0, 5.0]), 1);
    }

    #[test]
    fn empty_scores_fail() {
        assert!(matches!(
            exponential_mechanism(&[], 1.0, 1.0, 0),
            Err(Error::Selection(_))
        ));
        assert!(exponential_mechanism(&[f64::NAN], 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn noise_parameter_errors() {
        assert!(matches!(laplace_noise(0.0, 3, 0), Err(Error::Parameter(_))));
        assert!(matches!(gaussian_noise(-1.0, 3, 0), Err(Error::Parameter(_))));
        assert!(gaussian_noise(1.0, 0, 0).unwrap().is_empty());
    }

    #[test]
    fn noise_is_seed_deterministic() {
        assert_eq!(gaussian_noise(2.0, 10, 5).unwrap(), gaussian_noise(2.0, 10, 5).unwrap());
        assert_ne!(laplace_noise(2.0, 10, 5).unwrap(), laplace_noise(2.0, 10, 6).unwrap());
    }

    #[test]
    fn ledger_refuses_overspending() {
        let mut l = BudgetLedger::new(DpParams::new(1.0, 1e-9, 0));
        let (e, d) = l.charge("a", 0.5, 0.5, "gaussian").unwrap();
        assert_eq!((e, d), (0.5, 0.5e-9));
        l.charge("b", 0.5, 0.0, "exponential").unwrap();
        assert!(l.within_budget());
        assert!(matches!(l.charge("c", 0.01, 0.0, "laplace"), Err(Error::Budget(_))));
    }

    #[test]
    fn epsilon_serializes_infinity() {
        let p = DpParams::noiseless(3);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"inf\""), "{s}");
        let back: DpParams = serde_json::from_str(&s).unwrap();
        assert!(back.epsilon.is_infinite());
        let q: DpParams = serde_json::from_str(r#"{"epsilon": 0.5}"#).unwrap();
        assert_eq!(q.epsilon, 0.5);
        assert_eq!(q.delta, 0.0);
    }

    #[test]
    fn validation() {
        assert!(DpParams::new(0.0, 0.0, 0).validate().is_err());
        assert!(DpParams::new(1.0, 1.0, 0).validate().is_err());
        assert!(DpParams::new(1.0, 1e-9, 0).validate().is_ok());
        assert!(BudgetSplit { selection: 0.5, measurement: 0.6 }.validate().is_err());
    }
}
