//! Command-line front end: dataset generation, feature export, and the
//! Q1-Q5 experiment grids with aggregated reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use vibrobench::bench::{build_catalog, builtin_sources, run_experiments, DatasetSource};
use vibrobench::dataio::{generate_synthetic, DatasetManifest, SyntheticSpec};
use vibrobench::eval::{ranking_table, write_aggregate_csv, Experiment, Report, TrialOptions};
use vibrobench::features::{extract_features, Domain, FeatureKind};

#[derive(Parser)]
#[command(name = "vibrobench", version, about = "Vibration clustering benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic datasets (CSV plus manifest) to the output directory.
    Synth(SynthArgs),
    /// Extract feature matrices for every configured dataset.
    Features(FeaturesArgs),
    /// Run experiment grids and write report.json plus aggregate CSVs.
    Experiment(ExperimentArgs),
    /// Regenerate aggregate CSVs and tables from an existing report.json.
    Report(ReportArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration JSON; defaults to the built-in synthetic suite.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Savitzky-Golay window size override.
    #[arg(long)]
    savgol_window: Option<usize>,
    /// Savitzky-Golay polynomial order override.
    #[arg(long)]
    savgol_order: Option<usize>,
    /// Seed salt mixed into every trial seed.
    #[arg(long)]
    seed_salt: Option<String>,
    /// Print per-class feature summaries and progress detail.
    #[arg(short, long, default_value_t = false)]
    verbose: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Synthetic spec JSON to generate instead of the built-in suite.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Dataset name used for files written from --spec.
    #[arg(long, default_value = "synth")]
    name: String,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which experiment to run: q1..q5 or all.
    #[arg(long, default_value = "all")]
    which: String,
    /// Repeated runs per grid setting.
    #[arg(long)]
    runs: Option<usize>,
    /// Parallel trial workers (1 = fully serial).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding report.json.
    #[arg(long)]
    out: PathBuf,
}

/// Run configuration file contents. Every field has a default, so an absent
/// file means "benchmark the built-in synthetic suite".
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunConfig {
    #[serde(default = "builtin_sources")]
    datasets: Vec<DatasetSource>,
    #[serde(default = "default_runs")]
    runs_per_setting: usize,
    #[serde(default)]
    seed_salt: String,
    #[serde(default)]
    options: TrialOptions,
}

fn default_runs() -> usize {
    3
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            datasets: builtin_sources(),
            runs_per_setting: default_runs(),
            seed_salt: String::new(),
            options: TrialOptions::default(),
        }
    }
}

impl RunConfig {
    fn resolve(common: &CommonArgs) -> Result<Self> {
        let mut config = match &common.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(w) = common.savgol_window {
            config.options.savgol.window_size = w;
        }
        if let Some(o) = common.savgol_order {
            config.options.savgol.poly_order = o;
        }
        if let Some(salt) = &common.seed_salt {
            config.seed_salt = salt.clone();
        }
        if config.datasets.is_empty() {
            bail!("config declares no datasets");
        }
        Ok(config)
    }

    /// Machine-readable run provenance: resolved config plus the pinned
    /// algorithm defaults it may have overridden.
    fn provenance(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self,
            "pinned_defaults": TrialOptions::default(),
        })
    }
}

fn ensure_out_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating output dir {}", path.display()))
}

fn write_provenance(config: &RunConfig, out: &Path) -> Result<()> {
    let path = out.join("provenance.json");
    let text = serde_json::to_string_pretty(&config.provenance())?;
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let out = &args.common.out;
    ensure_out_dir(out)?;
    let specs: Vec<(String, SyntheticSpec)> = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading spec {}", path.display()))?;
            let spec: SyntheticSpec = serde_json::from_str(&text)
                .with_context(|| format!("parsing spec {}", path.display()))?;
            vec![(args.name.clone(), spec)]
        }
        None => vibrobench::bench::builtin_suite(),
    };
    for (name, spec) in &specs {
        let dataset = generate_synthetic(spec)?;
        let csv_path = out.join(format!("{name}.csv"));
        dataset.write_csv(&csv_path)?;
        let manifest = DatasetManifest {
            name: name.clone(),
            csv_path: PathBuf::from(format!("{name}.csv")),
            channel_columns: (0..dataset.num_channels()).map(|c| format!("ch{c}")).collect(),
            label_column: "label".into(),
            sample_rate: dataset.sample_rate,
            window_length: dataset.window_length(),
            window_stride: dataset.window_length(),
            num_classes: dataset.num_classes,
            subset_fraction: 1.0,
            shuffle_seed: 0,
        };
        let manifest_path = out.join(format!("{name}.manifest.json"));
        fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing {}", manifest_path.display()))?;
        println!("wrote {} ({dataset})", csv_path.display());
    }
    Ok(())
}

fn cmd_features(args: &FeaturesArgs) -> Result<()> {
    let config = RunConfig::resolve(&args.common)?;
    let out = &args.common.out;
    ensure_out_dir(out)?;
    let catalog = build_catalog(&config.datasets, &config.options)?;
    for id in catalog.ids() {
        let dataset = catalog.get(id).unwrap();
        println!("dataset {id}: {dataset}");
        for domain in Domain::ALL {
            let matrix = extract_features(dataset, &FeatureKind::ALL, domain)?;
            let path = out.join(format!("features_{id}_{domain}.csv"));
            matrix.write_csv(&path)?;
            println!("  wrote {}", path.display());
            if !args.common.verbose {
                continue;
            }
            // per-class summary of the standardized feature space
            for (col, meta) in matrix.column_meta.iter().enumerate() {
                let mut per_class: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
                for (row, &label) in matrix.labels.iter().enumerate() {
                    per_class.entry(label).or_default().push(matrix.values.get(row, col));
                }
                let summary: Vec<String> = per_class
                    .iter()
                    .map(|(class, values)| {
                        let n = values.len() as f64;
                        let mean = values.iter().sum::<f64>() / n;
                        let std =
                            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                        format!("class {class}: {mean:+.3} ± {std:.3}")
                    })
                    .collect();
                println!("    {meta}: {}", summary.join(" | "));
            }
        }
    }
    write_provenance(&config, out)?;
    Ok(())
}

fn parse_which(which: &str) -> Result<Vec<Experiment>> {
    if which.eq_ignore_ascii_case("all") {
        return Ok(Experiment::ALL.to_vec());
    }
    which.parse::<Experiment>().map(|e| vec![e]).map_err(|e| anyhow::anyhow!(e))
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<i32> {
    let mut config = RunConfig::resolve(&args.common)?;
    if let Some(runs) = args.runs {
        config.runs_per_setting = runs;
    }
    let experiments = parse_which(&args.which)?;
    let out = &args.common.out;
    ensure_out_dir(out)?;

    let catalog = build_catalog(&config.datasets, &config.options)?;
    for id in catalog.ids() {
        eprintln!("loaded {id}: {}", catalog.get(id).unwrap());
    }

    let report_path = out.join("report.json");
    let mut report = if report_path.exists() {
        let mut existing = Report::from_json_file(&report_path)
            .with_context(|| format!("reading {}", report_path.display()))?;
        existing.provenance = config.provenance();
        existing
    } else {
        Report::new(config.provenance())
    };

    run_experiments(
        &mut report,
        &experiments,
        &catalog,
        config.runs_per_setting,
        &config.seed_salt,
        &config.options,
        args.jobs,
    )?;

    fs::write(&report_path, report.to_json_pretty())
        .with_context(|| format!("writing {}", report_path.display()))?;

    let mut all_completed = true;
    for experiment in &experiments {
        let grid = &report.experiments[experiment.name()];
        let csv_path = out.join(format!("aggregate_{}.csv", experiment.name()));
        write_aggregate_csv(grid, &csv_path)
            .with_context(|| format!("writing {}", csv_path.display()))?;
        let completed = grid.ledger.iter().filter(|r| r.completed()).count();
        let failed = grid.ledger.len() - completed;
        println!(
            "{experiment}: {} trials ({completed} completed, {failed} failed) -> {}",
            grid.ledger.len(),
            csv_path.display()
        );
        print!("{}", ranking_table(grid));
        if failed > 0 {
            all_completed = false;
        }
    }
    println!("report: {}", report_path.display());
    Ok(if all_completed { 0 } else { 2 })
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let report_path = args.out.join("report.json");
    let report = Report::from_json_file(&report_path)
        .with_context(|| format!("reading {}", report_path.display()))?;
    for (name, grid) in &report.experiments {
        let csv_path = args.out.join(format!("aggregate_{name}.csv"));
        write_aggregate_csv(grid, &csv_path)
            .with_context(|| format!("writing {}", csv_path.display()))?;
        println!("{name}: {} trials -> {}", grid.ledger.len(), csv_path.display());
        print!("{}", ranking_table(grid));
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Synth(args) => cmd_synth(args).map(|()| 0),
        Command::Features(args) => cmd_features(args).map(|()| 0),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Report(args) => cmd_report(args).map(|()| 0),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
