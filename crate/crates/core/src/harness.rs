//! Experiment runner: scenario -> channel -> verifiers -> metrics, written
//! out as CSV files whose `#` header lines carry the resolved configuration.
//!
//! Every random stream of a run is seeded from the base seed and a textual
//! cell identifier (figure, NLoS level, station count, role), so cells are
//! independent of each other and of execution order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{generate_dataset, ChannelParams, Dataset};
use crate::error::{Error, Result};
use crate::io::{self, SummaryCell, SUMMARY_HEADER};
use crate::lrt::{evaluate_lrt, LrtDetector, LrtEvaluation};
use crate::metrics::{MetricsReport, Prior};
use crate::nn::{incremental_training_run_multi, LearningCurve, TrainConfig};
use crate::rng::{derive_seed, tag_of};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Bs4,
    Bs6,
}

impl Preset {
    pub fn scenario(self) -> Scenario {
        match self {
            Preset::Bs4 => Scenario::four_corners(),
            Preset::Bs6 => Scenario::six_stations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioChoice {
    Preset(Preset),
    Explicit(Scenario),
}

impl ScenarioChoice {
    pub fn resolve(&self) -> Scenario {
        match self {
            ScenarioChoice::Preset(p) => p.scenario(),
            ScenarioChoice::Explicit(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioChoice,
    pub thermal_noise_std_ns: f64,
    pub nlos_std_ns: Vec<f64>,
    pub attacker_common_bias_std_ns: f64,
    pub po_train: f64,
    pub po_test: Vec<f64>,
    pub n_test: usize,
    pub max_seconds: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub lrt_threshold: f64,
    /// Network training settings. Its `seed` is replaced per cell and second
    /// by seeds derived from `seed` above.
    pub nn: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioChoice::Preset(Preset::Bs4),
            thermal_noise_std_ns: 300.0,
            nlos_std_ns: vec![300.0, 500.0, 700.0],
            attacker_common_bias_std_ns: 0.0,
            po_train: 0.5,
            po_test: vec![0.5, 0.1, 0.01, 0.0005],
            n_test: 10_000,
            max_seconds: 400,
            seed: 1,
            output_dir: PathBuf::from("out"),
            lrt_threshold: 1.0,
            nn: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_test < 1 || self.max_seconds < 1 {
            return bad("n_test and max_seconds must be >= 1".into());
        }
        if self.nlos_std_ns.is_empty() || self.po_test.is_empty() {
            return bad("nlos_std_ns and po_test must be nonempty".into());
        }
        for &p in self.po_test.iter().chain([&self.po_train]) {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("proportion {p} outside [0, 1]"));
            }
        }
        for &nlos in &self.nlos_std_ns {
            self.channel(nlos)?;
        }
        LrtDetector::new(self.thermal_noise_std_ns, self.lrt_threshold)?;
        self.nn.validate()
    }

    pub fn channel(&self, nlos_std_ns: f64) -> Result<ChannelParams> {
        ChannelParams::new(self.thermal_noise_std_ns, nlos_std_ns)?
            .with_attacker_bias(self.attacker_common_bias_std_ns)
    }

    pub fn detector(&self) -> Result<LrtDetector> {
        LrtDetector::new(self.thermal_noise_std_ns, self.lrt_threshold)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Configuration as recorded in output headers; the output directory is
    /// left out so results are byte-identical wherever they are written.
    fn header_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("output_dir");
        }
        v.to_string()
    }

    fn cell_seed(&self, cell: &str, role: &str) -> u64 {
        derive_seed(self.seed, tag_of(&format!("{cell}/{role}")))
    }
}

fn cell_id(figure: &str, scenario: &Scenario, nlos: f64) -> String {
    format!("{figure}/bs{}/nlos{nlos}", scenario.n_bs())
}

/// Training stream shared by every test set of a cell.
fn train_stream(cfg: &ExperimentConfig, cell: &str, scenario: &Scenario, params: &ChannelParams) -> Result<Dataset> {
    generate_dataset(scenario, params, cfg.max_seconds, cfg.po_train, cfg.cell_seed(cell, "train"))
}

fn test_set(
    cfg: &ExperimentConfig,
    cell: &str,
    scenario: &Scenario,
    params: &ChannelParams,
    po: f64,
) -> Result<Dataset> {
    generate_dataset(scenario, params, cfg.n_test, po, cfg.cell_seed(cell, &format!("test-po{po}")))
}

fn nn_config(cfg: &ExperimentConfig, cell: &str) -> TrainConfig {
    TrainConfig {
        seed: cfg.cell_seed(cell, "nn"),
        ..cfg.nn
    }
}

/// LRT alone on the equal-proportion test set of an NLoS level; the same
/// test set [`nlos_cell`] scores both verifiers on.
pub fn nlos_lrt(cfg: &ExperimentConfig, nlos: f64) -> Result<LrtEvaluation> {
    let scenario = cfg.scenario.resolve();
    let params = cfg.channel(nlos)?;
    let cell = cell_id("fig2", &scenario, nlos);
    let test = test_set(cfg, &cell, &scenario, &params, 0.5)?;
    evaluate_lrt(&cfg.detector()?, &test)
}

/// One NLoS level of the equal-proportion experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct NlosCell {
    pub nlos_std_ns: f64,
    pub n_bs: usize,
    pub curve: LearningCurve,
    pub lrt: MetricsReport,
    pub undecidable: usize,
}

pub fn nlos_cell(cfg: &ExperimentConfig, nlos: f64) -> Result<NlosCell> {
    let scenario = cfg.scenario.resolve();
    let params = cfg.channel(nlos)?;
    let cell = cell_id("fig2", &scenario, nlos);
    let stream = train_stream(cfg, &cell, &scenario, &params)?;
    let test = test_set(cfg, &cell, &scenario, &params, 0.5)?;
    let mut curves = incremental_training_run_multi(
        &stream,
        &[&test],
        &nn_config(cfg, &cell),
        cfg.max_seconds,
        Prior::Empirical,
    )?;
    let lrt = evaluate_lrt(&cfg.detector()?, &test)?;
    Ok(NlosCell {
        nlos_std_ns: nlos,
        n_bs: scenario.n_bs(),
        curve: curves.remove(0),
        lrt: lrt.report,
        undecidable: lrt.undecidable.len(),
    })
}

/// The varying-proportion experiments: a network trained on an
/// equal-proportion stream, scored on test sets of different proportions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoFigure {
    /// NLoS 300 ns, 4 stations.
    Fig3,
    /// NLoS 500 ns, 4 stations.
    Fig4,
    /// NLoS 500 ns, 6 stations.
    Fig5,
}

impl PoFigure {
    pub fn name(self) -> &'static str {
        match self {
            PoFigure::Fig3 => "fig3",
            PoFigure::Fig4 => "fig4",
            PoFigure::Fig5 => "fig5",
        }
    }

    pub fn nlos_std_ns(self) -> f64 {
        match self {
            PoFigure::Fig3 => 300.0,
            PoFigure::Fig4 | PoFigure::Fig5 => 500.0,
        }
    }

    pub fn scenario(self) -> Scenario {
        match self {
            PoFigure::Fig3 | PoFigure::Fig4 => Scenario::four_corners(),
            PoFigure::Fig5 => Scenario::six_stations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoCell {
    pub figure: PoFigure,
    /// `(po_test, curve)` in configuration order.
    pub curves: Vec<(f64, LearningCurve)>,
    /// LRT on an equal-proportion test set.
    pub lrt: MetricsReport,
}

impl PoCell {
    /// Largest difference between plateau Total Errors across proportions.
    pub fn plateau_spread(&self) -> Option<f64> {
        let plateaus = self
            .curves
            .iter()
            .map(|(_, c)| c.plateau())
            .collect::<Option<Vec<_>>>()?;
        let max = plateaus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = plateaus.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(max - min)
    }
}

pub fn po_cell(cfg: &ExperimentConfig, figure: PoFigure) -> Result<PoCell> {
    let scenario = figure.scenario();
    let nlos = figure.nlos_std_ns();
    let params = cfg.channel(nlos)?;
    // Cells with the same geometry and NLoS share streams with the
    // equal-proportion experiment.
    let cell = cell_id("fig2", &scenario, nlos);
    let stream = train_stream(cfg, &cell, &scenario, &params)?;
    let tests = cfg
        .po_test
        .iter()
        .map(|&po| test_set(cfg, &cell, &scenario, &params, po))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Dataset> = tests.iter().collect();
    let curves = incremental_training_run_multi(
        &stream,
        &refs,
        &nn_config(cfg, &cell),
        cfg.max_seconds,
        Prior::Empirical,
    )?;
    let reference = test_set(cfg, &cell, &scenario, &params, 0.5)?;
    let lrt = evaluate_lrt(&cfg.detector()?, &reference)?.report;
    Ok(PoCell {
        figure,
        curves: cfg.po_test.iter().cloned().zip(curves).collect(),
        lrt,
    })
}

fn header(cfg: &ExperimentConfig, figure: &str, cell: &str, extra: Vec<(&str, String)>) -> String {
    let mut entries = vec![
        ("figure", figure.to_string()),
        ("seed", cfg.seed.to_string()),
        ("cell", cell.to_string()),
        ("config", cfg.header_json()),
    ];
    entries.extend(extra);
    io::comment_block(&entries)
}

fn write_curve(
    cfg: &ExperimentConfig,
    path: PathBuf,
    figure: &str,
    cell: &str,
    curve: &LearningCurve,
) -> Result<PathBuf> {
    let plateau = vec![("plateau_total_error", io::fmt6(curve.plateau()))];
    let text = io::curve_csv(curve, &header(cfg, figure, cell, plateau));
    io::write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// Learning curve per NLoS level plus the LRT reference values.
pub fn run_fig2(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    let mut files = Vec::new();
    let mut summary = header(cfg, "fig2", "lrt", vec![]) + SUMMARY_HEADER + "\n";
    for &nlos in &cfg.nlos_std_ns {
        let cell = nlos_cell(cfg, nlos)?;
        if cell.undecidable > 0 {
            log::warn!("fig2 nlos {nlos}: {} undecidable_geometry samples", cell.undecidable);
        }
        log::info!(
            "fig2 nlos {nlos}: nn plateau {} lrt {}",
            io::fmt6(cell.curve.plateau()),
            io::fmt6(cell.lrt.total_error)
        );
        files.push(write_curve(
            cfg,
            out.join(format!("fig2_nlos{nlos}.csv")),
            "fig2",
            &format!("nlos={nlos}"),
            &cell.curve,
        )?);
        let row = io::summary_row(
            &SummaryCell {
                method: "lrt",
                n_bs: cell.n_bs,
                sigma_ns: cfg.thermal_noise_std_ns,
                nlos_ns: nlos,
                po_test: 0.5,
            },
            &cell.lrt,
        );
        summary.push_str(&row);
        summary.push('\n');
    }
    let path = out.join("fig2_lrt.csv");
    io::write_atomic(&path, summary.as_bytes())?;
    files.push(path);
    Ok(files)
}

/// Learning curve per test proportion plus the equal-proportion LRT line.
pub fn run_po_figure(cfg: &ExperimentConfig, figure: PoFigure) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let name = figure.name();
    let out = &cfg.output_dir;
    let cell = po_cell(cfg, figure)?;
    let n_bs = figure.scenario().n_bs();
    let mut files = Vec::new();
    for (po, curve) in &cell.curves {
        files.push(write_curve(
            cfg,
            out.join(format!("{name}_po{po}.csv")),
            name,
            &format!("nlos={} n_bs={n_bs} po_test={po}", figure.nlos_std_ns()),
            curve,
        )?);
    }
    log::info!("{name}: plateau spread {}", io::fmt6(cell.plateau_spread()));
    let row = io::summary_row(
        &SummaryCell {
            method: "lrt",
            n_bs,
            sigma_ns: cfg.thermal_noise_std_ns,
            nlos_ns: figure.nlos_std_ns(),
            po_test: 0.5,
        },
        &cell.lrt,
    );
    let text = header(cfg, name, "lrt", vec![]) + SUMMARY_HEADER + "\n" + &row + "\n";
    let path = out.join(format!("{name}_lrt.csv"));
    io::write_atomic(&path, text.as_bytes())?;
    files.push(path);
    Ok(files)
}

pub fn run_all(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let mut files = run_fig2(cfg)?;
    for fig in [PoFigure::Fig3, PoFigure::Fig4, PoFigure::Fig5] {
        files.extend(run_po_figure(cfg, fig)?);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            nlos_std_ns: vec![300.0, 700.0],
            po_test: vec![0.5, 0.0005],
            n_test: 300,
            max_seconds: 12,
            output_dir: dir.to_path_buf(),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn config_json_defaults_and_overrides() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"scenario":"bs6","seed":9,"nn":{"learning_rate":0.05}}"#).unwrap();
        assert_eq!(cfg.scenario.resolve().n_bs(), 6);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.nn.learning_rate, 0.05);
        assert_eq!(cfg.nn.max_validation_failures, 6);
        let explicit = r#"{"scenario":{"bs":[[0,0],[10,0],[0,10]],"region":[1,1,5,5]}}"#;
        let cfg: ExperimentConfig = serde_json::from_str(explicit).unwrap();
        assert_eq!(cfg.scenario.resolve().n_bs(), 3);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus":1}"#).is_err());
        let back: ExperimentConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.po_test.push(1.5);
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            nlos_std_ns: vec![-1.0],
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            n_test: 0,
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn fig2_emits_one_curve_per_nlos_plus_lrt() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick(dir.path());
        let files = run_fig2(&cfg).unwrap();
        let names: Vec<String> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["fig2_nlos300.csv", "fig2_nlos700.csv", "fig2_lrt.csv"]);
        let curve = std::fs::read_to_string(&files[0]).unwrap();
        assert!(curve.starts_with("# figure: fig2\n# seed: 1\n"));
        let rows: Vec<&str> = curve.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "second,total_error,alpha,beta");
        assert_eq!(rows.len(), 1 + 12);
        let lrt = std::fs::read_to_string(&files[2]).unwrap();
        let rows: Vec<&str> = lrt.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], SUMMARY_HEADER);
        assert!(rows[1].starts_with("lrt,4,300.000000,300.000000,0.500000,"));
        assert_eq!(rows.len(), 3);
    }

    #[test]
    fn po_figure_files_and_reproducibility() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fa = run_po_figure(&quick(a.path()), PoFigure::Fig5).unwrap();
        let fb = run_po_figure(&quick(b.path()), PoFigure::Fig5).unwrap();
        assert_eq!(fa.len(), 3);
        assert!(fa[1].ends_with("fig5_po0.0005.csv"));
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
        let text = std::fs::read_to_string(&fa[1]).unwrap();
        for row in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let xi: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
            assert!(xi.is_finite());
        }
    }
}
