use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lvs_core::harness::{self, ExperimentConfig, PoFigure, Preset};
use lvs_core::io::{self, SummaryCell, SUMMARY_HEADER};
use lvs_core::lrt::{evaluate_lrt_with_prior, LrtDetector};
use lvs_core::metrics::compute_metrics;
use lvs_core::rng::{derive_seed, tag_of};
use lvs_core::nn::{classify, incremental_training_run_multi, train_with_report};
use lvs_core::{generate_dataset, Dataset, MetricsReport, Prior, Result, Scenario};

/// Location verification with ToA measurements: simulate, verify, plot data.
#[derive(Parser)]
#[command(name = "lvs", version)]
struct Cli {
    /// Base seed for every random stream [default: from config, else 1].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON experiment configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: from config, else ./out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of training seconds (one sample per second).
    #[arg(long, global = true)]
    max_seconds: Option<usize>,
    /// Samples per test set.
    #[arg(long, global = true)]
    n_test: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    /// p(H0) = p(H1) = 0.5.
    Equal,
    /// Label proportions of the evaluated set.
    Empirical,
}

impl From<PriorArg> for Prior {
    fn from(p: PriorArg) -> Self {
        match p {
            PriorArg::Equal => Prior::EQUAL,
            PriorArg::Empirical => Prior::Empirical,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a labelled dataset and write <out>/<name>.csv plus a JSON sidecar.
    Generate {
        /// Number of samples.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Fraction of malicious samples.
        #[arg(long, default_value_t = 0.5)]
        po: f64,
        /// NLoS bias std in ns [default: first config value].
        #[arg(long)]
        nlos: Option<f64>,
        /// Thermal noise std in ns [default: from config].
        #[arg(long)]
        sigma: Option<f64>,
        /// `bs4`, `bs6` or a scenario JSON file [default: from config].
        #[arg(long)]
        scenario: Option<String>,
        /// File stem of the dataset.
        #[arg(long, default_value = "dataset")]
        name: String,
    },
    /// Run the likelihood-ratio test on a dataset and print a summary row.
    EvalLrt {
        #[arg(long)]
        data: PathBuf,
        /// Threshold on the likelihood ratio (not its log).
        #[arg(long)]
        threshold: Option<f64>,
        /// Noise std assumed by the detector [default: the dataset's].
        #[arg(long)]
        sigma: Option<f64>,
        /// Also write the dataset with an `lrt_decision` column here.
        #[arg(long)]
        decisions: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "equal")]
        prior: PriorArg,
    },
    /// Train the network on a dataset and save it as JSON.
    TrainNn {
        #[arg(long)]
        data: PathBuf,
        /// Model path [default: <out>/model.json].
        #[arg(long)]
        model: Option<PathBuf>,
        /// Score the trained model on this dataset and print a summary row.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "empirical")]
        prior: PriorArg,
    },
    /// Incremental training run; writes <out>/curve.csv.
    Curve {
        /// Training stream [default: generated from config].
        #[arg(long)]
        train: Option<PathBuf>,
        /// Test set [default: generated from config].
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Learning curves at each NLoS level with LRT reference values.
    Fig2,
    /// Varying test proportion, NLoS 300 ns, 4 stations.
    Fig3,
    /// Varying test proportion, NLoS 500 ns, 4 stations.
    Fig4,
    /// Varying test proportion, NLoS 500 ns, 6 stations.
    Fig5,
    /// Every figure.
    All,
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_json_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(m) = cli.max_seconds {
        cfg.max_seconds = m;
    }
    if let Some(n) = cli.n_test {
        cfg.n_test = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_scenario(arg: &str) -> Result<Scenario> {
    match arg {
        "bs4" => Ok(Preset::Bs4.scenario()),
        "bs6" => Ok(Preset::Bs6.scenario()),
        path => {
            let path = Path::new(path);
            let text = std::fs::read_to_string(path).map_err(|e| lvs_core::Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| lvs_core::Error::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        }
    }
}

fn print_summary(method: &str, d: &Dataset, sigma: f64, report: &MetricsReport) {
    let cell = SummaryCell {
        method,
        n_bs: d.n_bs(),
        sigma_ns: sigma,
        nlos_ns: d.params.nlos_std,
        po_test: d.malicious_fraction,
    };
    println!("{SUMMARY_HEADER}");
    println!("{}", io::summary_row(&cell, report));
}

fn header(cfg: &ExperimentConfig, command: &str) -> String {
    io::comment_block(&[
        ("command", command.to_string()),
        ("seed", cfg.seed.to_string()),
    ])
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve_config(&cli)?;
    match cli.cmd {
        Cmd::Generate {
            n,
            po,
            nlos,
            sigma,
            scenario,
            name,
        } => {
            if let Some(s) = sigma {
                cfg.thermal_noise_std_ns = s;
            }
            let nlos = nlos.unwrap_or(cfg.nlos_std_ns[0]);
            let scenario = match scenario {
                Some(s) => parse_scenario(&s)?,
                None => cfg.scenario.resolve(),
            };
            let params = cfg.channel(nlos)?;
            let d = generate_dataset(&scenario, &params, n, po, cfg.seed)?;
            let path = cfg.output_dir.join(format!("{name}.csv"));
            io::write_dataset(&path, &d, &header(&cfg, "generate"))?;
            println!("{}", path.display());
        }
        Cmd::EvalLrt {
            data,
            threshold,
            sigma,
            decisions,
            prior,
        } => {
            let d = io::read_dataset(&data)?;
            let sigma = sigma.unwrap_or(d.params.thermal_noise_std);
            let det = LrtDetector::new(sigma, threshold.unwrap_or(cfg.lrt_threshold))?;
            let eval = evaluate_lrt_with_prior(&det, &d, prior.into())?;
            if !eval.undecidable.is_empty() {
                log::warn!("{} samples with undecidable_geometry", eval.undecidable.len());
            }
            if let Some(p) = decisions {
                let text = io::dataset_csv(&d, &header(&cfg, "eval-lrt"), Some(&eval.decisions));
                io::write_atomic(&p, text.as_bytes())?;
            }
            print_summary("lrt", &d, sigma, &eval.report);
        }
        Cmd::TrainNn {
            data,
            model,
            test,
            prior,
        } => {
            let d = io::read_dataset(&data)?;
            let mut tc = cfg.nn;
            tc.seed = cfg.seed;
            let (m, report) = train_with_report(&d, &tc)?;
            log::info!(
                "trained {} epochs, best epoch {}, early stop {}",
                report.epochs_run,
                report.best_epoch,
                report.stopped_early
            );
            let path = model.unwrap_or_else(|| cfg.output_dir.join("model.json"));
            io::write_atomic(&path, m.to_json().as_bytes())?;
            if let Some(t) = test {
                let t = io::read_dataset(&t)?;
                let decisions = t
                    .samples
                    .iter()
                    .map(|s| classify(&m, s))
                    .collect::<Result<Vec<_>>>()?;
                let r = compute_metrics(&decisions, &t.labels(), prior.into())?;
                print_summary("nn", &t, t.params.thermal_noise_std, &r);
            } else {
                println!("{}", path.display());
            }
        }
        Cmd::Curve { train, test } => {
            let scenario = cfg.scenario.resolve();
            let params = cfg.channel(cfg.nlos_std_ns[0])?;
            let stream = match train {
                Some(p) => io::read_dataset(&p)?,
                None => generate_dataset(
                    &scenario,
                    &params,
                    cfg.max_seconds,
                    cfg.po_train,
                    derive_seed(cfg.seed, tag_of("curve/train")),
                )?,
            };
            let test = match test {
                Some(p) => io::read_dataset(&p)?,
                None => generate_dataset(
                    &scenario,
                    &params,
                    cfg.n_test,
                    cfg.po_test[0],
                    derive_seed(cfg.seed, tag_of("curve/test")),
                )?,
            };
            let mut tc = cfg.nn;
            tc.seed = cfg.seed;
            let seconds = cfg.max_seconds.min(stream.len());
            let curve = incremental_training_run_multi(&stream, &[&test], &tc, seconds, Prior::Empirical)?
                .remove(0);
            let comments = header(&cfg, "curve")
                + &io::comment_block(&[("plateau_total_error", io::fmt6(curve.plateau()))]);
            let path = cfg.output_dir.join("curve.csv");
            io::write_atomic(&path, io::curve_csv(&curve, &comments).as_bytes())?;
            println!("{}", path.display());
        }
        Cmd::Fig2 => print_files(harness::run_fig2(&cfg)?),
        Cmd::Fig3 => print_files(harness::run_po_figure(&cfg, PoFigure::Fig3)?),
        Cmd::Fig4 => print_files(harness::run_po_figure(&cfg, PoFigure::Fig4)?),
        Cmd::Fig5 => print_files(harness::run_po_figure(&cfg, PoFigure::Fig5)?),
        Cmd::All => print_files(harness::run_all(&cfg)?),
    }
    Ok(())
}

fn print_files(files: Vec<PathBuf>) {
    for f in files {
        println!("{}", f.display());
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lvs: error: {e}");
            ExitCode::from(1)
        }
    }
}
