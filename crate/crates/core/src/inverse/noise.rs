use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ObservationSet;
use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    /// `ξ ~ U[-1, 1]`
    UniformSymmetric,
    /// `ξ ~ N(0, 1)`
    Gaussian,
}

/// Multiplicative noise `β ← β (1 + level ξ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Relative level, `0.01` for 1%.
    pub level: f64,
    pub distribution: NoiseDistribution,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::uniform(0.0, 0)
    }

    pub fn uniform(level: f64, seed: u64) -> Self {
        Self {
            level,
            distribution: NoiseDistribution::UniformSymmetric,
            seed,
        }
    }
}

/// Perturb every observation multiplicatively; deterministic in `spec.seed`.
pub fn add_noise(obs: &ObservationSet, spec: NoiseSpec) -> Result<ObservationSet> {
    if !(spec.level >= 0.0) || !spec.level.is_finite() {
        return domain(format!(
            "noise level must be finite and nonnegative, got {}",
            spec.level
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let values = obs
        .values
        .iter()
        .map(|&v| {
            let xi: f64 = match spec.distribution {
                NoiseDistribution::UniformSymmetric => rng.random_range(-1.0..=1.0),
                NoiseDistribution::Gaussian => rng.sample(StandardNormal),
            };
            v * (1.0 + spec.level * xi)
        })
        .collect();
    Ok(ObservationSet {
        times: obs.times.clone(),
        values,
        noise: spec,
        provenance: format!(
            "{}; noise {:?} level={} seed={}",
            obs.provenance, spec.distribution, spec.level, spec.seed
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs() -> ObservationSet {
        ObservationSet::new(vec![0.1, 0.2, 0.3], vec![-1.0, -0.5, -0.25], "test").unwrap()
    }

    #[test]
    fn zero_level_is_identity() {
        let o = obs();
        assert_eq!(
            add_noise(&o, NoiseSpec::uniform(0.0, 7)).unwrap().values,
            o.values
        );
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let o = obs();
        for dist in [NoiseDistribution::UniformSymmetric, NoiseDistribution::Gaussian] {
            let spec = NoiseSpec {
                level: 0.01,
                distribution: dist,
                seed: 42,
            };
            let a = add_noise(&o, spec).unwrap();
            let b = add_noise(&o, spec).unwrap();
            assert_eq!(a.values, b.values);
            assert_ne!(a.values, o.values);
            let c = add_noise(&o, NoiseSpec { seed: 43, ..spec }).unwrap();
            assert_ne!(a.values, c.values);
        }
    }

    #[test]
    fn uniform_noise_stays_in_band() {
        let o = obs();
        for seed in 0..50 {
            let n = add_noise(&o, NoiseSpec::uniform(0.01, seed)).unwrap();
            for (v, w) in n.values.iter().zip(&o.values) {
                assert!(((v - w) / w).abs() <= 0.01 + 1e-15);
            }
        }
    }

    #[test]
    fn negative_level_rejected() {
        assert!(add_noise(&obs(), NoiseSpec::uniform(-0.1, 1)).is_err());
    }
}
