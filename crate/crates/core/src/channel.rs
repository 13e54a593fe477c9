//! Noisy ToA observations for legitimate and spoofing vehicles, and labeled
//! dataset generation.
//!
//! Legitimate vehicle at its claimed location:
//! `Y_i = U_i + phi_i + X_i`, with `phi_i ~ Exp(mean = nlos_std)` and
//! `X_i ~ N(0, thermal_noise_std^2)`, all independent across stations.
//!
//! Far-field spoofer: `Y_i = mean(U) + b + X_i`, where `b` is one common
//! exponential bias per sample (zero by default, the spoofer's timing offset
//! absorbs it).
//!
//! Per-sample draw order, fixed for reproducibility: label uniform, claimed
//! x, claimed y, then for a legitimate vehicle `(phi_i, X_i)` per station in
//! order (`phi_i` skipped when `nlos_std == 0`), or for a spoofer `b` (skipped
//! when its std is 0) followed by `X_1..X_N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scenario::{self, Location, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Thermal noise standard deviation, ns.
    pub thermal_noise_std: f64,
    /// NLoS bias mean (= standard deviation = 1/rate) for legitimate vehicles, ns.
    pub nlos_std: f64,
    /// Mean of the per-sample common bias carried by spoofers, ns.
    #[serde(default)]
    pub attacker_common_bias_std: f64,
}

impl ChannelParams {
    pub fn new(thermal_noise_std: f64, nlos_std: f64) -> Result<Self> {
        let p = Self {
            thermal_noise_std,
            nlos_std,
            attacker_common_bias_std: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_attacker_bias(mut self, std: f64) -> Result<Self> {
        self.attacker_common_bias_std = std;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.thermal_noise_std.is_finite() && self.thermal_noise_std > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "thermal noise std must be positive, got {}",
                self.thermal_noise_std
            )));
        }
        for (name, v) in [
            ("nlos std", self.nlos_std),
            ("attacker common bias std", self.attacker_common_bias_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Ground-truth class of a vehicle, and the decision a verifier makes about it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Legitimate = 0,
    Malicious = 1,
}

impl Class {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Class::Legitimate),
            1 => Some(Class::Malicious),
            _ => None,
        }
    }

    pub fn target(self) -> f64 {
        f64::from(self.as_u8())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub claimed: Location,
    /// Noiseless ToA from the claimed location (U).
    pub claimed_toa: Vec<f64>,
    /// Measured ToA (Y).
    pub observed_toa: Vec<f64>,
    pub label: Class,
}

impl LabeledSample {
    pub fn n_bs(&self) -> usize {
        self.claimed_toa.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub params: ChannelParams,
    pub scenario: Scenario,
    pub seed: u64,
    /// Probability with which each sample was labeled malicious.
    pub malicious_fraction: f64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_bs(&self) -> usize {
        self.scenario.n_bs()
    }

    /// `(n_legit, n_malicious)`.
    pub fn label_counts(&self) -> (usize, usize) {
        let m = self
            .samples
            .iter()
            .filter(|s| s.label == Class::Malicious)
            .count();
        (self.samples.len() - m, m)
    }

    pub fn labels(&self) -> Vec<Class> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

/// NLoS-biased noisy observation of a legitimate vehicle at `claimed`.
pub fn observe_legitimate(
    scenario: &Scenario,
    params: &ChannelParams,
    claimed: &Location,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let u = scenario::claimed_toa_vector(scenario, claimed);
    let mut y = Vec::with_capacity(u.len());
    for ui in u {
        let phi = if params.nlos_std > 0.0 {
            sample_exponential(1.0 / params.nlos_std, rng)?
        } else {
            0.0
        };
        y.push(ui + phi + params.thermal_noise_std * rng.gaussian());
    }
    Ok(y)
}

/// Noisy observation of a far-field spoofer claiming `claimed`.
pub fn observe_malicious(
    scenario: &Scenario,
    params: &ChannelParams,
    claimed: &Location,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let v = scenario::attacker_mean_vector(scenario, claimed);
    let bias = if params.attacker_common_bias_std > 0.0 {
        sample_exponential(1.0 / params.attacker_common_bias_std, rng)?
    } else {
        0.0
    };
    Ok(v.into_iter()
        .map(|vi| vi + bias + params.thermal_noise_std * rng.gaussian())
        .collect())
}

/// Exponential NLoS delay with the given rate (1/ns).
pub fn sample_exponential(rate: f64, rng: &mut RngStream) -> Result<f64> {
    rng.exponential(rate)
}

pub fn generate_dataset(
    scenario: &Scenario,
    params: &ChannelParams,
    n_samples: usize,
    malicious_fraction: f64,
    seed: u64,
) -> Result<Dataset> {
    params.validate()?;
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&malicious_fraction) {
        return Err(Error::InvalidParameter(format!(
            "malicious fraction must lie in [0, 1], got {malicious_fraction}"
        )));
    }
    let mut rng = RngStream::new(seed);
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let label = if rng.uniform() < malicious_fraction {
            Class::Malicious
        } else {
            Class::Legitimate
        };
        let claimed = scenario::sample_claimed_location(scenario, &mut rng);
        let observed_toa = match label {
            Class::Legitimate => observe_legitimate(scenario, params, &claimed, &mut rng)?,
            Class::Malicious => observe_malicious(scenario, params, &claimed, &mut rng)?,
        };
        samples.push(LabeledSample {
            claimed,
            claimed_toa: scenario::claimed_toa_vector(scenario, &claimed),
            observed_toa,
            label,
        });
    }
    Ok(Dataset {
        samples,
        params: *params,
        scenario: scenario.clone(),
        seed,
        malicious_fraction,
    })
}
