//! Seeded synthetic datasets built from the published group models.
//!
//! Mixture variables are drawn from group-consistent ranges: HN mixtures
//! have C3A above 9, the others C3A at most 7.5, and ML/LL mixtures sit at
//! least `margin` C3S units on the correct side of the published ML/LL
//! boundary. Records run until the specimen has failed, so the failure
//! point is observed rather than extrapolated. Series follow the group's
//! published model, multiplied by `1 + noise·z` with standard normal `z`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::curveproc::ExpansionSeries;
use crate::domain::{paper_default_bundle, GroupLabel, GroupModel, MixVar, Mixture};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Mixtures per group, in HN, ML, LL order.
    pub counts: [usize; 3],
    /// Relative noise level (0.05 = 5%).
    pub noise: f64,
    pub seed: u64,
    /// ML and LL records stop once the noiseless expansion exceeds this
    /// (percent).
    pub record_until_expansion: f64,
    /// No record runs past this (years).
    pub max_horizon: f64,
    /// Sampling interval for ML and LL series (years).
    pub step: f64,
    /// Sampling interval for HN series (years).
    pub hn_step: f64,
    /// HN records stop once the noiseless expansion passes this (percent).
    pub hn_stop_expansion: f64,
    /// Minimum C3S distance from the ML/LL boundary.
    pub margin: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            counts: [12, 12, 12],
            noise: 0.0,
            seed: 0,
            record_until_expansion: 0.6,
            max_horizon: 120.0,
            step: 0.25,
            hn_step: 0.5,
            hn_stop_expansion: 3.0,
            margin: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub data: Vec<(Mixture, ExpansionSeries)>,
    /// Generating group of each specimen.
    pub labels: Vec<GroupLabel>,
}

impl SyntheticDataset {
    pub fn mixtures(&self) -> impl Iterator<Item = &Mixture> {
        self.data.iter().map(|(m, _)| m)
    }
}

// ML/LL boundary from the published bundle: C3S + 387.3·WC − 233.6 = 0
fn c3s_on_boundary(wc: f64) -> f64 {
    233.6 - 387.3 * wc
}

fn draw_mixture(rng: &mut ChaCha8Rng, id: String, group: GroupLabel, margin: f64) -> Mixture {
    use MixVar::*;
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let (wc, c3a, c3s, cc) = match group {
        GroupLabel::HN => (u(0.40, 0.60), u(9.0, 13.0), u(40.0, 60.0), u(0.58, 0.62)),
        GroupLabel::ML => {
            let wc = u(0.50, 0.62);
            let c3s = (c3s_on_boundary(wc) + margin).max(30.0) + u(0.0, 12.0);
            (wc, u(1.0, 7.5), c3s, u(0.45, 0.60))
        }
        GroupLabel::LL => {
            let wc = u(0.40, 0.48);
            let c3s = (c3s_on_boundary(wc) - margin).min(65.0) - u(0.0, 12.0);
            (wc, u(2.0, 7.5), c3s, u(0.45, 0.60))
        }
    };
    Mixture::new(id)
        .with(Wc, wc)
        .with(C3a, c3a)
        .with(C3s, c3s)
        .with(C2s, u(10.0, 30.0))
        .with(C4af, u(6.0, 14.0))
        .with(CementContent, cc)
        .with(Air, u(2.0, 7.0))
}

fn sample_times(model: &GroupModel, mix: &Mixture, config: &SyntheticConfig) -> Result<Vec<f64>> {
    let (step, stop) = match model.group {
        GroupLabel::HN => (config.hn_step, config.hn_stop_expansion),
        GroupLabel::ML | GroupLabel::LL => (config.step, config.record_until_expansion),
    };
    let mut times = Vec::new();
    for i in 0.. {
        let t = i as f64 * step;
        if t > config.max_horizon {
            break;
        }
        times.push(t);
        if model.predict(mix, t)? > stop && times.len() >= 4 {
            break;
        }
    }
    Ok(times)
}

/// Draws `counts` mixtures per group and their expansion records. The same
/// config always yields the same dataset.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticDataset> {
    if config.noise < 0.0 || !config.noise.is_finite() {
        return Err(Error::InvalidConfig(format!("noise {} must be a finite value >= 0", config.noise)));
    }
    if !(config.step > 0.0 && config.hn_step > 0.0 && config.max_horizon > 0.0) {
        return Err(Error::InvalidConfig("horizon and sampling steps must be positive".into()));
    }
    let bundle = paper_default_bundle();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (group, &count) in GroupLabel::ALL.iter().zip(&config.counts) {
        let model = bundle.model(*group).expect("default bundle has every group");
        for i in 0..count {
            let id = format!("{group}-{:03}", i + 1);
            let mix = draw_mixture(&mut rng, id.clone(), *group, config.margin);
            let times = sample_times(model, &mix, config)?;
            let mut values = Vec::with_capacity(times.len());
            for &t in &times {
                let clean = model.predict(&mix, t)?;
                let z: f64 = rng.sample(StandardNormal);
                values.push(if config.noise > 0.0 { clean * (1.0 + config.noise * z) } else { clean });
            }
            data.push((mix, ExpansionSeries::new(id, times, values)?));
            labels.push(*group);
        }
    }
    Ok(SyntheticDataset { data, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::classify_mixture;

    #[test]
    fn noiseless_series_follow_the_models() {
        let d = generate_synthetic(&SyntheticConfig {
            counts: [3, 3, 3],
            ..SyntheticConfig::default()
        })
        .unwrap();
        let bundle = paper_default_bundle();
        for ((mix, s), g) in d.data.iter().zip(&d.labels) {
            for (t, v) in s.samples() {
                assert_eq!(v, bundle.model(*g).unwrap().predict(mix, t).unwrap());
            }
        }
    }

    #[test]
    fn generated_mixtures_respect_published_boundaries() {
        let d = generate_synthetic(&SyntheticConfig {
            counts: [20, 20, 20],
            seed: 9,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let bundle = paper_default_bundle();
        for (mix, g) in d.mixtures().zip(&d.labels) {
            assert_eq!(classify_mixture(mix, &bundle, true).unwrap(), *g);
            assert_eq!(classify_mixture(mix, &bundle, false).unwrap(), *g);
            assert!(mix.range_violation().is_none());
        }
    }

    #[test]
    fn same_seed_same_data() {
        let c = SyntheticConfig {
            noise: 0.05,
            seed: 4,
            ..SyntheticConfig::default()
        };
        assert_eq!(generate_synthetic(&c).unwrap(), generate_synthetic(&c).unwrap());
        let other = generate_synthetic(&SyntheticConfig { seed: 5, ..c.clone() }).unwrap();
        assert_ne!(other, generate_synthetic(&c).unwrap());
    }

    #[test]
    fn single_group_and_bad_noise() {
        let d = generate_synthetic(&SyntheticConfig {
            counts: [0, 0, 4],
            ..SyntheticConfig::default()
        })
        .unwrap();
        assert!(d.labels.iter().all(|&g| g == GroupLabel::LL));
        assert!(generate_synthetic(&SyntheticConfig {
            noise: -0.1,
            ..SyntheticConfig::default()
        })
        .is_err());
    }
}
