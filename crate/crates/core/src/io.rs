//! File formats: dataset CSV with its JSON sidecar, learning-curve CSV and
//! one-row metric summaries. Floats are written with 6 decimals, undefined
//! rates as `NaN`. Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, Class, Dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::nn::LearningCurve;
use crate::scenario::{Location, Scenario};

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Prefixes each `(key, value)` with `# ` as a comment line.
pub fn comment_block(entries: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        for line in v.lines() {
            let _ = writeln!(out, "# {k}: {line}");
        }
    }
    out
}

pub fn fmt6(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "NaN".to_string(),
    }
}

/// Sidecar metadata stored next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub n: usize,
    pub malicious_fraction: f64,
    pub thermal_noise_std_ns: f64,
    pub nlos_std_ns: f64,
    pub n_bs: usize,
    #[serde(default)]
    pub attacker_common_bias_std_ns: f64,
    pub scenario: Scenario,
}

impl DatasetMeta {
    pub fn of(d: &Dataset) -> Self {
        Self {
            seed: d.seed,
            n: d.len(),
            malicious_fraction: d.malicious_fraction,
            thermal_noise_std_ns: d.params.thermal_noise_std,
            nlos_std_ns: d.params.nlos_std,
            n_bs: d.n_bs(),
            attacker_common_bias_std_ns: d.params.attacker_common_bias_std,
            scenario: d.scenario.clone(),
        }
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Dataset rows `idx,label,x_c,y_c,u_1..u_N,y_1..y_N`, optionally followed
/// by an `lrt_decision` column.
pub fn dataset_csv(dataset: &Dataset, comments: &str, decisions: Option<&[Class]>) -> String {
    let n = dataset.n_bs();
    let mut out = String::from(comments);
    out.push_str("idx,label,x_c,y_c");
    for i in 1..=n {
        let _ = write!(out, ",u_{i}");
    }
    for i in 1..=n {
        let _ = write!(out, ",y_{i}");
    }
    if decisions.is_some() {
        out.push_str(",lrt_decision");
    }
    out.push('\n');
    for (idx, s) in dataset.samples.iter().enumerate() {
        let _ = write!(out, "{idx},{},{:.6},{:.6}", s.label.as_u8(), s.claimed.x, s.claimed.y);
        for v in s.claimed_toa.iter().chain(&s.observed_toa) {
            let _ = write!(out, ",{v:.6}");
        }
        if let Some(d) = decisions {
            let _ = write!(out, ",{}", d[idx].as_u8());
        }
        out.push('\n');
    }
    out
}

/// Writes the CSV and its `.json` sidecar.
pub fn write_dataset(path: &Path, dataset: &Dataset, comments: &str) -> Result<()> {
    write_atomic(path, dataset_csv(dataset, comments, None).as_bytes())?;
    let meta = serde_json::to_string_pretty(&DatasetMeta::of(dataset))? + "\n";
    write_atomic(&sidecar_path(path), meta.as_bytes())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    fs::metadata(path).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: DatasetMeta =
        serde_json::from_str(&text).map_err(|e| Error::format(&side, e.to_string()))?;
    let n_bs = meta.scenario.n_bs();
    if meta.n_bs != n_bs {
        return Err(Error::format(&side, "n_bs disagrees with scenario"));
    }
    let params = ChannelParams {
        thermal_noise_std: meta.thermal_noise_std_ns,
        nlos_std: meta.nlos_std_ns,
        attacker_common_bias_std: meta.attacker_common_bias_std_ns,
    };
    params.validate()?;

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::format(path, e.to_string()))?;
    if headers.len() < 4 + 2 * n_bs || &headers[4] != "u_1" {
        return Err(Error::format(path, format!("expected {n_bs} ToA columns per vector")));
    }
    let mut samples = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::format(path, format!("row {row}: bad field {k}")))
        };
        let label = rec
            .get(1)
            .and_then(|s| s.trim().parse::<u8>().ok())
            .and_then(Class::from_u8)
            .ok_or_else(|| Error::format(path, format!("row {row}: label must be 0 or 1")))?;
        let claimed = Location::claimed(num(2)?, num(3)?);
        let claimed_toa = (0..n_bs).map(|i| num(4 + i)).collect::<Result<Vec<_>>>()?;
        let observed_toa = (0..n_bs).map(|i| num(4 + n_bs + i)).collect::<Result<Vec<_>>>()?;
        samples.push(LabeledSample {
            claimed,
            claimed_toa,
            observed_toa,
            label,
        });
    }
    if samples.len() != meta.n {
        return Err(Error::format(
            path,
            format!("sidecar says {} rows, found {}", meta.n, samples.len()),
        ));
    }
    Ok(Dataset {
        samples,
        params,
        scenario: meta.scenario,
        seed: meta.seed,
        malicious_fraction: meta.malicious_fraction,
    })
}

pub fn curve_csv(curve: &LearningCurve, comments: &str) -> String {
    let mut out = String::from(comments);
    out.push_str("second,total_error,alpha,beta\n");
    for p in &curve.points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.second,
            fmt6(p.total_error),
            fmt6(p.alpha),
            fmt6(p.beta)
        );
    }
    out
}

pub const SUMMARY_HEADER: &str = "method,n_bs,sigma_ns,nlos_ns,po_test,alpha,beta,total_error,n";

/// Identifies the experimental cell a [`MetricsReport`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryCell<'a> {
    pub method: &'a str,
    pub n_bs: usize,
    pub sigma_ns: f64,
    pub nlos_ns: f64,
    pub po_test: f64,
}

pub fn summary_row(cell: &SummaryCell<'_>, report: &MetricsReport) -> String {
    format!(
        "{},{},{:.6},{:.6},{:.6},{},{},{},{}",
        cell.method,
        cell.n_bs,
        cell.sigma_ns,
        cell.nlos_ns,
        cell.po_test,
        fmt6(report.alpha),
        fmt6(report.beta),
        fmt6(report.total_error),
        report.n()
    )
}
