//! Feed-forward verifier: standardized `[U; Y]` features, one tanh hidden
//! layer of ten units, a linear scalar output scored against `{0, 1}`
//! labels with mean squared error.
//!
//! Training is plain full-batch gradient descent with validation early
//! stopping: it halts once validation MSE has failed to strictly improve for
//! `max_validation_failures` consecutive epochs and returns the parameters of
//! the best validation epoch.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Class, Dataset, LabeledSample};
use crate::error::{check_len, Error, Result};
use crate::metrics::{compute_metrics, Prior};
use crate::rng::{derive_seed, tag_of, RngStream};
use crate::scenario::mean;

pub const HIDDEN_UNITS: usize = 10;

/// Pools smaller than this skip the validation split.
pub const MIN_POOL_FOR_VALIDATION: usize = 7;

/// Epoch count used when the validation split is skipped for a small pool.
pub const SMALL_POOL_EPOCHS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// `[U; Y]`
    #[default]
    Raw,
    /// `[U; Y - U]`
    Residual,
}

/// Concatenated claimed ToA followed by observed ToA.
pub fn featurize(sample: &LabeledSample) -> Vec<f64> {
    featurize_with(sample, FeatureMode::Raw)
}

pub fn featurize_with(sample: &LabeledSample, mode: FeatureMode) -> Vec<f64> {
    let mut f = Vec::with_capacity(2 * sample.n_bs());
    f.extend_from_slice(&sample.claimed_toa);
    match mode {
        FeatureMode::Raw => f.extend_from_slice(&sample.observed_toa),
        FeatureMode::Residual => f.extend(
            sample
                .observed_toa
                .iter()
                .zip(&sample.claimed_toa)
                .map(|(y, u)| y - u),
        ),
    }
    f
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    /// Hidden weights, `hidden x inputs`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Output weights, one per hidden unit.
    pub w2: Vec<f64>,
    pub b2: f64,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub decision_threshold: f64,
    pub features: FeatureMode,
}

/// Gradient of the mean squared error, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Gradients {
    fn zeros(hidden: usize, inputs: usize) -> Self {
        Self {
            w1: vec![0.0; hidden * inputs],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    /// Same ordering as [`MlpModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.w1.len() + 2 * self.b1.len() + 1);
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }
}

impl MlpModel {
    /// Builds a model from nested weights. Standardization defaults to the
    /// identity when `feature_mean`/`feature_std` are `None`.
    pub fn from_parts(
        w1: Vec<Vec<f64>>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: f64,
        standardization: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        let inputs = w1.first().map_or(0, Vec::len);
        let (feature_mean, feature_std) =
            standardization.unwrap_or_else(|| (vec![0.0; inputs], vec![1.0; inputs]));
        let model = Self {
            w1: w1.into_iter().flatten().collect(),
            b1,
            w2,
            b2,
            feature_mean,
            feature_std,
            decision_threshold: 0.5,
            features: FeatureMode::Raw,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let hidden = self.b1.len();
        let inputs = self.feature_mean.len();
        if hidden == 0 || inputs == 0 {
            return Err(Error::InvalidParameter("model has no hidden units or inputs".into()));
        }
        check_len(hidden * inputs, self.w1.len())?;
        check_len(hidden, self.w2.len())?;
        check_len(inputs, self.feature_std.len())?;
        let all = self.parameters();
        if all.iter().chain(&self.feature_mean).any(|v| !v.is_finite())
            || !self.decision_threshold.is_finite()
        {
            return Err(Error::InvalidParameter("model parameters must be finite".into()));
        }
        if self.feature_std.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidParameter("feature std entries must be positive".into()));
        }
        Ok(())
    }

    pub fn hidden_units(&self) -> usize {
        self.b1.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.feature_mean.len()
    }

    /// Number of base stations the feature layout corresponds to.
    pub fn n_bs(&self) -> usize {
        self.n_inputs() / 2
    }

    /// All trainable parameters: `w1` (row-major), `b1`, `w2`, `b2`.
    pub fn parameters(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.w1.len() + 2 * self.b1.len() + 1);
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        let (h, d) = (self.hidden_units(), self.n_inputs());
        check_len(h * d + 2 * h + 1, params.len())?;
        let (w1, rest) = params.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, rest) = rest.split_at(h);
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = rest[0];
        Ok(())
    }

    pub fn standardize(&self, features: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_inputs(), features.len())?;
        Ok(features
            .iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    fn hidden_activations(&self, z: &[f64], out: &mut [f64]) {
        let d = self.n_inputs();
        for (j, a) in out.iter_mut().enumerate() {
            let row = &self.w1[j * d..(j + 1) * d];
            let pre = self.b1[j] + row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>();
            *a = pre.tanh();
        }
    }

    /// Network output on already standardized inputs.
    pub fn score_standardized(&self, z: &[f64]) -> f64 {
        let mut a = vec![0.0; self.hidden_units()];
        self.hidden_activations(z, &mut a);
        self.b2 + self.w2.iter().zip(&a).map(|(w, x)| w * x).sum::<f64>()
    }

    /// Mean squared error on standardized inputs (`inputs` is row-major,
    /// one row per target).
    pub fn mse_standardized(&self, inputs: &[f64], targets: &[f64]) -> Result<f64> {
        let d = self.n_inputs();
        check_len(targets.len() * d, inputs.len())?;
        if targets.is_empty() {
            return Err(Error::EmptyInput("no targets"));
        }
        let sse: f64 = inputs
            .chunks_exact(d)
            .zip(targets)
            .map(|(z, t)| (self.score_standardized(z) - t).powi(2))
            .sum();
        Ok(sse / targets.len() as f64)
    }

    /// Backpropagated MSE and its gradient on standardized inputs.
    pub fn loss_and_gradient(&self, inputs: &[f64], targets: &[f64]) -> Result<(f64, Gradients)> {
        let (h, d) = (self.hidden_units(), self.n_inputs());
        check_len(targets.len() * d, inputs.len())?;
        if targets.is_empty() {
            return Err(Error::EmptyInput("no targets"));
        }
        let m = targets.len() as f64;
        let mut g = Gradients::zeros(h, d);
        let mut a = vec![0.0; h];
        let mut sse = 0.0;
        for (z, &t) in inputs.chunks_exact(d).zip(targets) {
            self.hidden_activations(z, &mut a);
            let score = self.b2 + self.w2.iter().zip(&a).map(|(w, x)| w * x).sum::<f64>();
            let err = score - t;
            sse += err * err;
            let ds = 2.0 * err / m;
            g.b2 += ds;
            for j in 0..h {
                g.w2[j] += ds * a[j];
                let dpre = ds * self.w2[j] * (1.0 - a[j] * a[j]);
                g.b1[j] += dpre;
                for (gw, x) in g.w1[j * d..(j + 1) * d].iter_mut().zip(z) {
                    *gw += dpre * x;
                }
            }
        }
        Ok((sse / m, g))
    }

    fn descend(&mut self, g: &Gradients, lr: f64) {
        for (w, d) in self.w1.iter_mut().zip(&g.w1) {
            *w -= lr * d;
        }
        for (w, d) in self.b1.iter_mut().zip(&g.b1) {
            *w -= lr * d;
        }
        for (w, d) in self.w2.iter_mut().zip(&g.w2) {
            *w -= lr * d;
        }
        self.b2 -= lr * g.b2;
    }
}

/// Network output for raw (unstandardized) features.
pub fn forward(model: &MlpModel, features: &[f64]) -> Result<f64> {
    let z = model.standardize(features)?;
    Ok(model.score_standardized(&z))
}

/// Malicious iff the score reaches the decision threshold.
pub fn classify(model: &MlpModel, sample: &LabeledSample) -> Result<Class> {
    let score = forward(model, &featurize_with(sample, model.features))?;
    Ok(decision_from_score(model, score))
}

fn decision_from_score(model: &MlpModel, score: f64) -> Class {
    if score >= model.decision_threshold {
        Class::Malicious
    } else {
        Class::Legitimate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub max_validation_failures: usize,
    pub validation_fraction: f64,
    pub learning_rate: f64,
    pub init_scale: f64,
    pub seed: u64,
    pub features: FeatureMode,
    pub decision_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 1000,
            max_validation_failures: 6,
            validation_fraction: 0.15,
            learning_rate: 0.1,
            init_scale: 0.5,
            seed: 0,
            features: FeatureMode::Raw,
            decision_threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_validation_failures < 1 {
            return Err(Error::InvalidParameter("max_validation_failures must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidParameter(format!(
                "validation fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return Err(Error::InvalidParameter("init scale must be positive".into()));
        }
        if self.max_epochs < 1 {
            return Err(Error::InvalidParameter("max_epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// What happened during one [`train`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub n_train: usize,
    pub n_validation: usize,
    /// Gradient steps taken.
    pub epochs_run: usize,
    /// Epoch whose parameters were returned (0 = initialization).
    pub best_epoch: usize,
    /// Validation MSE after each epoch, starting with the initial parameters.
    /// Empty when validation was skipped.
    pub validation_mse: Vec<f64>,
    pub stopped_early: bool,
}

/// Per-dimension mean and population std; zero-variance dimensions get std 1.
pub fn standardization_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = rows.first().map_or(0, Vec::len);
    let n = rows.len() as f64;
    let mut means = Vec::with_capacity(d);
    let mut stds = Vec::with_capacity(d);
    let mut col = Vec::with_capacity(rows.len());
    for k in 0..d {
        col.clear();
        col.extend(rows.iter().map(|r| r[k]));
        let m = mean(&col);
        let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        let sd = var.sqrt();
        means.push(m);
        stds.push(if sd > 1e-12 * m.abs().max(1.0) { sd } else { 1.0 });
    }
    (means, stds)
}

pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<MlpModel> {
    train_samples(&dataset.samples, cfg).map(|(m, _)| m)
}

pub fn train_with_report(dataset: &Dataset, cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    train_samples(&dataset.samples, cfg)
}

pub fn train_samples(samples: &[LabeledSample], cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    let first = samples.first().ok_or(Error::EmptyInput("training pool is empty"))?;
    let n_bs = first.n_bs();
    let rows = samples
        .iter()
        .map(|s| {
            check_len(n_bs, s.claimed_toa.len())?;
            check_len(n_bs, s.observed_toa.len())?;
            Ok(featurize_with(s, cfg.features))
        })
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = samples.iter().map(|s| s.label.target()).collect();
    let (feature_mean, feature_std) = standardization_stats(&rows);
    let d = 2 * n_bs;
    let h = HIDDEN_UNITS;

    let mut model = MlpModel {
        w1: vec![0.0; h * d],
        b1: vec![0.0; h],
        w2: vec![0.0; h],
        b2: 0.0,
        feature_mean,
        feature_std,
        decision_threshold: cfg.decision_threshold,
        features: cfg.features,
    };
    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| model.standardize(r))
        .collect::<Result<_>>()?;

    let n = samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    let n_val = if n < MIN_POOL_FOR_VALIDATION {
        0
    } else {
        let mut split_rng = RngStream::new(derive_seed(cfg.seed, tag_of("split")));
        split_rng.shuffle(&mut order);
        ((cfg.validation_fraction * n as f64).round() as usize).min(n - 1)
    };
    let epochs = if n < MIN_POOL_FOR_VALIDATION {
        SMALL_POOL_EPOCHS
    } else {
        cfg.max_epochs
    };
    let (val_idx, train_idx) = order.split_at(n_val);
    let gather = |idx: &[usize]| -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(idx.len() * d);
        let mut t = Vec::with_capacity(idx.len());
        for &i in idx {
            x.extend_from_slice(&z[i]);
            t.push(targets[i]);
        }
        (x, t)
    };
    let (train_x, train_t) = gather(train_idx);
    let (val_x, val_t) = gather(val_idx);

    let mut init_rng = RngStream::new(derive_seed(cfg.seed, tag_of("init")));
    let s = cfg.init_scale;
    let mut init = vec![0.0; h * d + 2 * h + 1];
    for p in init.iter_mut() {
        *p = init_rng.uniform_in(-s, s);
    }
    model.set_parameters(&init)?;

    let mut report = TrainReport {
        n_train: train_t.len(),
        n_validation: val_t.len(),
        epochs_run: 0,
        best_epoch: 0,
        validation_mse: Vec::new(),
        stopped_early: false,
    };
    let mut best = model.clone();
    let mut best_val = f64::INFINITY;
    let mut failures = 0;
    if n_val > 0 {
        best_val = model.mse_standardized(&val_x, &val_t)?;
        report.validation_mse.push(best_val);
    }

    for epoch in 1..=epochs {
        let (loss, grad) = model.loss_and_gradient(&train_x, &train_t)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        model.descend(&grad, cfg.learning_rate);
        report.epochs_run = epoch;
        if n_val == 0 {
            continue;
        }
        let vm = model.mse_standardized(&val_x, &val_t)?;
        if !vm.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        report.validation_mse.push(vm);
        if vm < best_val {
            best_val = vm;
            best.clone_from(&model);
            report.best_epoch = epoch;
            failures = 0;
        } else {
            failures += 1;
            if failures >= cfg.max_validation_failures {
                report.stopped_early = true;
                break;
            }
        }
    }

    if n_val == 0 {
        if model.parameters().iter().any(|p| !p.is_finite()) {
            return Err(Error::TrainingDiverged { epoch: epochs });
        }
        report.best_epoch = report.epochs_run;
        return Ok((model, report));
    }
    Ok((best, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub second: usize,
    pub total_error: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Median Total Error over the final tenth of the curve (at least one
    /// point); undefined points are skipped.
    pub fn plateau(&self) -> Option<f64> {
        let k = self.points.len().div_ceil(10).max(1);
        let mut tail: Vec<f64> = self.points[self.points.len().saturating_sub(k)..]
            .iter()
            .filter_map(|p| p.total_error)
            .collect();
        if tail.is_empty() {
            return None;
        }
        tail.sort_by(f64::total_cmp);
        let mid = tail.len() / 2;
        Some(if tail.len() % 2 == 1 {
            tail[mid]
        } else {
            0.5 * (tail[mid - 1] + tail[mid])
        })
    }
}

/// Seed for the retraining at second `t`.
pub fn seed_for_second(base: u64, t: usize) -> u64 {
    derive_seed(base, t as u64)
}

/// One vehicle per second: at second `t` a freshly initialized network is
/// trained on the first `t` stream samples and scored on the test set with
/// empirical priors.
pub fn incremental_training_run(
    train_stream: &Dataset,
    test_set: &Dataset,
    cfg: &TrainConfig,
    max_seconds: usize,
) -> Result<LearningCurve> {
    let mut curves =
        incremental_training_run_multi(train_stream, &[test_set], cfg, max_seconds, Prior::Empirical)?;
    Ok(curves.remove(0))
}

/// As [`incremental_training_run`], scoring every network on several test
/// sets; returns one curve per test set, in order. Seconds are retrained in
/// parallel; results do not depend on scheduling.
pub fn incremental_training_run_multi(
    train_stream: &Dataset,
    test_sets: &[&Dataset],
    cfg: &TrainConfig,
    max_seconds: usize,
    prior: Prior,
) -> Result<Vec<LearningCurve>> {
    cfg.validate()?;
    if max_seconds == 0 {
        return Err(Error::InvalidParameter("max_seconds must be >= 1".into()));
    }
    if train_stream.len() < max_seconds {
        return Err(Error::InvalidParameter(format!(
            "training stream has {} samples, fewer than {max_seconds} seconds",
            train_stream.len()
        )));
    }
    let prepared = test_sets
        .iter()
        .map(|t| {
            if t.is_empty() {
                return Err(Error::EmptyInput("test set is empty"));
            }
            check_len(train_stream.n_bs(), t.n_bs())?;
            let feats: Vec<Vec<f64>> = t
                .samples
                .iter()
                .map(|s| featurize_with(s, cfg.features))
                .collect();
            Ok((feats, t.labels()))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_second = (1..=max_seconds)
        .into_par_iter()
        .map(|t| {
            let mut c = *cfg;
            c.seed = seed_for_second(cfg.seed, t);
            let (model, _) = train_samples(&train_stream.samples[..t], &c)?;
            prepared
                .iter()
                .map(|(feats, labels)| {
                    let decisions = feats
                        .iter()
                        .map(|f| forward(&model, f).map(|s| decision_from_score(&model, s)))
                        .collect::<Result<Vec<_>>>()?;
                    let r = compute_metrics(&decisions, labels, prior)?;
                    Ok(CurvePoint {
                        second: t,
                        total_error: r.total_error,
                        alpha: r.alpha,
                        beta: r.beta,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut curves = vec![LearningCurve::default(); test_sets.len()];
    for row in per_second {
        for (curve, p) in curves.iter_mut().zip(row) {
            curve.points.push(p);
        }
    }
    Ok(curves)
}

#[derive(Debug, Deserialize)]
struct ModelDoc {
    n_bs: usize,
    decision_threshold: f64,
    #[serde(default)]
    features: FeatureMode,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    feature_mean: Vec<f64>,
    feature_std: Vec<f64>,
}

fn write_array(out: &mut String, name: &str, values: &[f64]) {
    let _ = write!(out, "\"{name}\":[");
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push(']');
}

impl MlpModel {
    /// Flat JSON with every float printed to 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        let features = match self.features {
            FeatureMode::Raw => "raw",
            FeatureMode::Residual => "residual",
        };
        let _ = write!(
            out,
            "{{\"n_bs\":{},\"decision_threshold\":{:.16e},\"features\":\"{features}\",",
            self.n_bs(),
            self.decision_threshold
        );
        write_array(&mut out, "w1", &self.w1);
        out.push(',');
        write_array(&mut out, "b1", &self.b1);
        out.push(',');
        write_array(&mut out, "w2", &self.w2);
        out.push(',');
        write_array(&mut out, "b2", &[self.b2]);
        out.push(',');
        write_array(&mut out, "feature_mean", &self.feature_mean);
        out.push(',');
        write_array(&mut out, "feature_std", &self.feature_std);
        out.push_str("}\n");
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        check_len(1, doc.b2.len())?;
        let model = Self {
            w1: doc.w1,
            b1: doc.b1,
            w2: doc.w2,
            b2: doc.b2[0],
            feature_mean: doc.feature_mean,
            feature_std: doc.feature_std,
            decision_threshold: doc.decision_threshold,
            features: doc.features,
        };
        model.validate()?;
        check_len(2 * doc.n_bs, model.n_inputs())?;
        Ok(model)
    }
}
