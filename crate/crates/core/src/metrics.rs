//! Detection metrics: false positive rate, detection rate and the
//! prior-weighted Total Error `xi = p(H0) * alpha + p(H1) * (1 - beta)`.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::channel::{Class, Dataset};
use crate::error::{check_len, Error, Result};
use crate::lrt::{self, LrtDetector};

/// How the class priors entering the Total Error are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    /// Fixed `p(H1)`; `p(H0) = 1 - p(H1)`.
    Fixed(f64),
    /// Label proportions of the evaluated set; the Total Error is then the
    /// plain misclassification rate.
    Empirical,
}

impl Prior {
    pub const EQUAL: Prior = Prior::Fixed(0.5);
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// False positive rate; `None` when there are no legitimate samples.
    pub alpha: Option<f64>,
    /// Detection rate; `None` when there are no malicious samples.
    pub beta: Option<f64>,
    /// `None` when a missing class carries nonzero prior weight.
    pub total_error: Option<f64>,
    pub prior_h0: f64,
    pub prior_h1: f64,
    pub n_legit: usize,
    pub n_malicious: usize,
}

impl MetricsReport {
    pub fn n(&self) -> usize {
        self.n_legit + self.n_malicious
    }

    pub fn undefined_flags(&self) -> Vec<&'static str> {
        let mut flags = Vec::new();
        if self.alpha.is_none() {
            flags.push("alpha_undefined");
        }
        if self.beta.is_none() {
            flags.push("beta_undefined");
        }
        if self.total_error.is_none() {
            flags.push("total_error_undefined");
        }
        flags
    }
}

/// Total Error from rates and priors, honoring undefined rates whose class has
/// zero prior weight.
pub fn total_error(alpha: Option<f64>, beta: Option<f64>, prior_h1: f64) -> Option<f64> {
    let prior_h0 = 1.0 - prior_h1;
    let legit_term = match alpha {
        Some(a) => prior_h0 * a,
        None if prior_h0 == 0.0 => 0.0,
        None => return None,
    };
    let malicious_term = match beta {
        Some(b) => prior_h1 * (1.0 - b),
        None if prior_h1 == 0.0 => 0.0,
        None => return None,
    };
    Some(legit_term + malicious_term)
}

pub fn compute_metrics(decisions: &[Class], labels: &[Class], prior: Prior) -> Result<MetricsReport> {
    check_len(labels.len(), decisions.len())?;
    if labels.is_empty() {
        return Err(Error::EmptyInput("no decisions to score"));
    }
    let (mut n_legit, mut n_malicious, mut false_pos, mut detected) = (0usize, 0usize, 0usize, 0usize);
    for (&d, &l) in decisions.iter().zip(labels) {
        match l {
            Class::Legitimate => {
                n_legit += 1;
                false_pos += usize::from(d == Class::Malicious);
            }
            Class::Malicious => {
                n_malicious += 1;
                detected += usize::from(d == Class::Malicious);
            }
        }
    }
    let prior_h1 = match prior {
        Prior::Fixed(p) if (0.0..=1.0).contains(&p) => p,
        Prior::Fixed(p) => {
            return Err(Error::InvalidParameter(format!("prior must lie in [0, 1], got {p}")))
        }
        Prior::Empirical => n_malicious as f64 / labels.len() as f64,
    };
    let alpha = (n_legit > 0).then(|| false_pos as f64 / n_legit as f64);
    let beta = (n_malicious > 0).then(|| detected as f64 / n_malicious as f64);
    Ok(MetricsReport {
        alpha,
        beta,
        total_error: total_error(alpha, beta, prior_h1),
        prior_h0: 1.0 - prior_h1,
        prior_h1,
        n_legit,
        n_malicious,
    })
}

/// Standard Gaussian upper tail, `Q(x) = erfc(x / sqrt 2) / 2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Closed-form Total Error of the unit-threshold LRT under equal priors when
/// observations are Gaussian with no NLoS bias: `Q(|v - u| / (2 sigma))`.
///
/// The log-likelihood ratio is affine in `y`, hence Gaussian under both
/// hypotheses with means `±|v-u|^2 / (2 sigma^2)` and variance
/// `|v-u|^2 / sigma^2`; both error probabilities equal the same tail.
pub fn analytic_lrt_error(u: &[f64], v: &[f64], sigma: f64) -> Result<f64> {
    check_len(u.len(), v.len())?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let sep = u
        .iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(q_function(sep / (2.0 * sigma)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

/// LRT operating points for each threshold (ascending, positive).
pub fn roc_sweep(det: &LrtDetector, dataset: &Dataset, thresholds: &[f64]) -> Result<Vec<RocPoint>> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset has no samples"));
    }
    if thresholds.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidParameter("thresholds must be positive".into()));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("thresholds must be sorted ascending".into()));
    }
    let scores = dataset
        .samples
        .iter()
        .map(|s| lrt::sample_log_likelihood_ratio(det, s))
        .collect::<Result<Vec<_>>>()?;
    let labels = dataset.labels();
    thresholds
        .iter()
        .map(|&threshold| {
            let ln_t = threshold.ln();
            let decisions: Vec<Class> = scores
                .iter()
                .map(|&s| if s >= ln_t { Class::Malicious } else { Class::Legitimate })
                .collect();
            let r = compute_metrics(&decisions, &labels, Prior::EQUAL)?;
            Ok(RocPoint {
                threshold,
                alpha: r.alpha,
                beta: r.beta,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_dataset, ChannelParams};
    use crate::scenario::Scenario;
    use proptest::prelude::*;
    use Class::{Legitimate as L, Malicious as M};

    #[test]
    fn total_error_arithmetic() {
        // 5 legit with 1 false positive (alpha 0.2), 10 malicious with 7 detected (beta 0.7)
        let mut labels = vec![L; 5];
        labels.extend(vec![M; 10]);
        let mut decisions = vec![M, L, L, L, L];
        decisions.extend(vec![M; 7]);
        decisions.extend(vec![L; 3]);
        let r = compute_metrics(&decisions, &labels, Prior::EQUAL).unwrap();
        assert!((r.alpha.unwrap() - 0.2).abs() < 1e-15);
        assert!((r.beta.unwrap() - 0.7).abs() < 1e-15);
        assert!((r.total_error.unwrap() - 0.25).abs() < 1e-15);
        assert_eq!((r.n_legit, r.n_malicious), (5, 10));
    }

    #[test]
    fn perfect_and_constant_detectors() {
        let labels = [L, M, L, M];
        let r = compute_metrics(&labels, &labels, Prior::EQUAL).unwrap();
        assert_eq!((r.alpha, r.beta, r.total_error), (Some(0.0), Some(1.0), Some(0.0)));

        let r = compute_metrics(&[L; 4], &labels, Prior::EQUAL).unwrap();
        assert_eq!((r.alpha, r.beta, r.total_error), (Some(0.0), Some(0.0), Some(0.5)));
    }

    #[test]
    fn empirical_prior_is_misclassification_rate() {
        let labels = [L, L, L, M];
        let decisions = [M, L, L, L];
        let r = compute_metrics(&decisions, &labels, Prior::Empirical).unwrap();
        assert_eq!(r.prior_h1, 0.25);
        assert!((r.total_error.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn missing_class_handling() {
        let r = compute_metrics(&[L, M], &[L, L], Prior::EQUAL).unwrap();
        assert_eq!(r.beta, None);
        assert_eq!(r.total_error, None);
        assert_eq!(r.undefined_flags(), vec!["beta_undefined", "total_error_undefined"]);

        let r = compute_metrics(&[L, M], &[L, L], Prior::Empirical).unwrap();
        assert_eq!(r.total_error, Some(0.5));

        let r = compute_metrics(&[M], &[M], Prior::Fixed(1.0)).unwrap();
        assert_eq!(r.alpha, None);
        assert_eq!(r.total_error, Some(0.0));
    }

    #[test]
    fn metric_errors() {
        assert!(matches!(
            compute_metrics(&[L], &[L, M], Prior::EQUAL),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(compute_metrics(&[], &[], Prior::EQUAL), Err(Error::EmptyInput(_))));
        assert!(compute_metrics(&[L], &[L], Prior::Fixed(1.2)).is_err());
    }

    #[test]
    fn q_function_values() {
        assert_eq!(q_function(0.0), 0.5);
        // Reference values of the standard normal tail; required accuracy 1e-10.
        assert!((q_function(1.0) - 0.158_655_253_931_457_05).abs() < 1e-10);
        assert!((q_function(3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-10);
        assert!((q_function(6.0) / 9.865_876_450_376_98e-10 - 1.0).abs() < 1e-6);
        assert!(q_function(40.0) < 1e-300);
    }

    #[test]
    fn analytic_error_examples() {
        let u = [932.34, 2536.23, 1503.35, 2797.02];
        let v = [1942.24; 4];
        assert_eq!(analytic_lrt_error(&u, &u, 300.0).unwrap(), 0.5);
        let e = analytic_lrt_error(&u, &v, 300.0).unwrap();
        assert!((e - 0.005_78).abs() < 5e-5, "{e}");
        let far: Vec<f64> = u.iter().map(|x| x + 1.0e5).collect();
        assert!(analytic_lrt_error(&u, &far, 300.0).unwrap() < 1e-100);
        assert!(analytic_lrt_error(&u, &v, 0.0).is_err());
        assert!(analytic_lrt_error(&u, &v[..3], 300.0).is_err());
    }

    #[test]
    fn roc_limits_and_monotonicity() {
        let s = Scenario::four_corners();
        let p = ChannelParams::new(300.0, 300.0).unwrap();
        let d = generate_dataset(&s, &p, 2000, 0.5, 5).unwrap();
        let det = LrtDetector::new(300.0, 1.0).unwrap();
        let thresholds = [1e-300, 1e-3, 0.1, 1.0, 10.0, 1e3, 1e300];
        let pts = roc_sweep(&det, &d, &thresholds).unwrap();
        assert_eq!((pts[0].alpha, pts[0].beta), (Some(1.0), Some(1.0)));
        assert_eq!((pts[6].alpha, pts[6].beta), (Some(0.0), Some(0.0)));
        for w in pts.windows(2) {
            assert!(w[0].alpha >= w[1].alpha);
            assert!(w[0].beta >= w[1].beta);
        }
        assert!(roc_sweep(&det, &d, &[1.0, 0.5]).is_err());
        assert!(roc_sweep(&det, &d, &[0.0, 0.5]).is_err());
    }

    fn class_vec() -> impl Strategy<Value = Vec<(Class, Class)>> {
        prop::collection::vec(
            (prop::bool::ANY, prop::bool::ANY).prop_map(|(a, b)| {
                let c = |x| if x { M } else { L };
                (c(a), c(b))
            }),
            1..200,
        )
    }

    proptest! {
        #[test]
        fn report_is_consistent_and_permutation_invariant(
            pairs in class_vec(),
            p1 in 0.0..=1.0f64,
            rot in 0usize..200,
        ) {
            let (d, l): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
            let r = compute_metrics(&d, &l, Prior::Fixed(p1)).unwrap();
            prop_assert!((r.prior_h0 + r.prior_h1 - 1.0).abs() < 1e-15);
            if let (Some(a), Some(b), Some(xi)) = (r.alpha, r.beta, r.total_error) {
                prop_assert_eq!(xi, r.prior_h0 * a + r.prior_h1 * (1.0 - b));
            }
            let mut rotated = pairs.clone();
            rotated.rotate_left(rot % pairs.len());
            rotated.reverse();
            let (d2, l2): (Vec<_>, Vec<_>) = rotated.into_iter().unzip();
            let r2 = compute_metrics(&d2, &l2, Prior::Fixed(p1)).unwrap();
            prop_assert_eq!(r, r2);
        }
    }
}
