//! Likelihood-ratio verifier under the Gaussian observation model.
//!
//! Legitimate: `Y ~ N(U, sigma^2 I)`; spoofer: `Y ~ N(V, sigma^2 I)`. The
//! detector decides malicious when `Lambda(Y) = p(Y|H1) / p(Y|H0) >= lambda`.
//! It models thermal noise only; NLoS delays on legitimate vehicles are not
//! part of its likelihoods.

use crate::channel::{Class, Dataset, LabeledSample};
use crate::error::{check_len, Error, Result};
use crate::metrics::{compute_metrics, MetricsReport, Prior};
use crate::scenario::attacker_mean_from_toa;

/// `|u - v|` at or below this (ns) makes the hypotheses indistinguishable.
pub const UNDECIDABLE_SEPARATION_NS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrtDetector {
    /// Noise std the detector assumes, ns.
    pub thermal_noise_std: f64,
    /// Decision threshold on the likelihood ratio (not its log).
    pub threshold: f64,
}

impl LrtDetector {
    pub fn new(thermal_noise_std: f64, threshold: f64) -> Result<Self> {
        if !(thermal_noise_std.is_finite() && thermal_noise_std > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "detector noise std must be positive, got {thermal_noise_std}"
            )));
        }
        if !(threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "LRT threshold must be positive, got {threshold}"
            )));
        }
        Ok(Self {
            thermal_noise_std,
            threshold,
        })
    }

    /// Unit threshold: Bayes-optimal for equal priors and unit costs.
    pub fn matched(thermal_noise_std: f64) -> Result<Self> {
        Self::new(thermal_noise_std, 1.0)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `ln Lambda = -(|y - v|^2 - |y - u|^2) / (2 sigma^2)`.
pub fn log_likelihood_ratio(det: &LrtDetector, y: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    check_len(y.len(), u.len())?;
    check_len(y.len(), v.len())?;
    let s2 = det.thermal_noise_std * det.thermal_noise_std;
    Ok(-(sq_dist(y, v) - sq_dist(y, u)) / (2.0 * s2))
}

/// Malicious iff `ln Lambda >= ln lambda`.
pub fn decide(det: &LrtDetector, y: &[f64], u: &[f64], v: &[f64]) -> Result<Class> {
    let llr = log_likelihood_ratio(det, y, u, v)?;
    Ok(decision_from_llr(det, llr))
}

fn decision_from_llr(det: &LrtDetector, llr: f64) -> Class {
    if llr >= det.threshold.ln() {
        Class::Malicious
    } else {
        Class::Legitimate
    }
}

/// Log-likelihood ratio of a sample against its claimed ToA and the far-field
/// spoofer mean derived from it.
pub fn sample_log_likelihood_ratio(det: &LrtDetector, sample: &LabeledSample) -> Result<f64> {
    let v = attacker_mean_from_toa(&sample.claimed_toa);
    log_likelihood_ratio(det, &sample.observed_toa, &sample.claimed_toa, &v)
}

/// True when the claimed ToA vector coincides with the spoofer mean, so no
/// observation can separate the hypotheses.
pub fn is_undecidable_geometry(u: &[f64], v: &[f64]) -> bool {
    sq_dist(u, v).sqrt() <= UNDECIDABLE_SEPARATION_NS
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrtEvaluation {
    pub report: MetricsReport,
    pub decisions: Vec<Class>,
    /// Indices of samples flagged `undecidable_geometry`.
    pub undecidable: Vec<usize>,
}

/// Runs the detector over a dataset and scores it with equal priors.
pub fn evaluate_lrt(det: &LrtDetector, dataset: &Dataset) -> Result<LrtEvaluation> {
    evaluate_lrt_with_prior(det, dataset, Prior::EQUAL)
}

pub fn evaluate_lrt_with_prior(det: &LrtDetector, dataset: &Dataset, prior: Prior) -> Result<LrtEvaluation> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset has no samples"));
    }
    let mut decisions = Vec::with_capacity(dataset.len());
    let mut undecidable = Vec::new();
    for (i, s) in dataset.samples.iter().enumerate() {
        let v = attacker_mean_from_toa(&s.claimed_toa);
        if is_undecidable_geometry(&s.claimed_toa, &v) {
            log::warn!("sample {i}: undecidable_geometry (claimed ToA equals spoofer mean)");
            undecidable.push(i);
        }
        decisions.push(decide(det, &s.observed_toa, &s.claimed_toa, &v)?);
    }
    let report = compute_metrics(&decisions, &dataset.labels(), prior)?;
    Ok(LrtEvaluation {
        report,
        decisions,
        undecidable,
    })
}
