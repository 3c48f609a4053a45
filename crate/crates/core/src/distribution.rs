//! Opinion distributions the population is drawn from.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalCdf};

use crate::error::{Error, Result};

/// Opinion distribution over `[0, 1]`; draws outside are clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OpinionDistribution {
    /// `mix * N(mu1, sigma) + (1 - mix) * N(mu2, sigma)`.
    BimodalGaussian { mu1: f64, mu2: f64, sigma: f64, mix: f64 },
    /// Resample (with replacement) from a fixed set of opinions.
    CustomSamples { samples: Vec<f64> },
}

impl Default for OpinionDistribution {
    fn default() -> Self {
        OpinionDistribution::BimodalGaussian { mu1: 0.4, mu2: 0.6, sigma: 0.2, mix: 0.5 }
    }
}

impl OpinionDistribution {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| Error::Config { key: key.into(), message: message.into() };
        match self {
            OpinionDistribution::BimodalGaussian { mu1, mu2, sigma, mix } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(bad("population.sigma", "must be > 0"));
                }
                if !(0.0..=1.0).contains(mix) {
                    return Err(bad("population.mix", "must lie in [0, 1]"));
                }
                if !mu1.is_finite() || !mu2.is_finite() {
                    return Err(bad("population.mu", "must be finite"));
                }
            }
            OpinionDistribution::CustomSamples { samples } => {
                if samples.is_empty() || samples.iter().any(|o| !(0.0..=1.0).contains(o)) {
                    return Err(bad("population.samples", "need at least one opinion, all in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let o = match self {
            OpinionDistribution::BimodalGaussian { mu1, mu2, sigma, mix } => {
                let mu = if rng.random::<f64>() < *mix { *mu1 } else { *mu2 };
                Normal::new(mu, *sigma).expect("validated sigma").sample(rng)
            }
            OpinionDistribution::CustomSamples { samples } => samples[rng.random_range(0..samples.len())],
        };
        o.clamp(0.0, 1.0)
    }

    /// CDF of the clipped variable.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match self {
            OpinionDistribution::BimodalGaussian { mu1, mu2, sigma, mix } => {
                let n1 = NormalCdf::new(*mu1, *sigma).expect("validated sigma");
                let n2 = NormalCdf::new(*mu2, *sigma).expect("validated sigma");
                mix * n1.cdf(x) + (1.0 - mix) * n2.cdf(x)
            }
            OpinionDistribution::CustomSamples { samples } => {
                samples.iter().filter(|&&o| o <= x).count() as f64 / samples.len() as f64
            }
        }
    }

    /// Quantile of the clipped variable, by bisection on the CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        if let OpinionDistribution::CustomSamples { samples } = self {
            let mut sorted = samples.clone();
            sorted.sort_by(f64::total_cmp);
            let k = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
            return sorted[k - 1];
        }
        if p <= self.cdf(0.0) {
            return 0.0;
        }
        if p >= self.cdf(1.0 - 1e-15) {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Deterministic reference sample at percentiles `(k + 0.5) / n`.
    pub fn quantile_sample(&self, n: usize) -> Vec<f64> {
        (0..n).map(|k| self.quantile((k as f64 + 0.5) / n as f64)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn clipped_draws() {
        let d = OpinionDistribution::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let o = d.sample(&mut rng);
            assert!((0.0..=1.0).contains(&o));
        }
    }

    #[test]
    fn symmetric_quantiles() {
        let q = OpinionDistribution::default().quantile_sample(100);
        assert_eq!(q.len(), 100);
        for k in 0..50 {
            assert!((q[k] + q[99 - k] - 1.0).abs() < 1e-9, "{} {}", q[k], q[99 - k]);
        }
        assert!(q.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_bad_parameters() {
        let d = OpinionDistribution::BimodalGaussian { mu1: 0.4, mu2: 0.6, sigma: 0.0, mix: 0.5 };
        assert!(d.validate().is_err());
        let d = OpinionDistribution::CustomSamples { samples: vec![0.2, 1.3] };
        assert!(d.validate().is_err());
    }
}
