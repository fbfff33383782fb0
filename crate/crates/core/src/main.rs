use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rrr_ecg::experiment::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "rrr-ecg", version, about = "ECG beat classification on MIT-BIH records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count beats per code and class, and the R-R-R span distribution.
    Census(ConfigArgs),
    /// Build the dataset, train every run and write the reports.
    Train(ConfigArgs),
    /// Re-score a checkpoint on the test partition of a manifest.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Defaults to `rescore/` next to the checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate the per-run summaries in an output directory.
    Report(ConfigArgs),
}

/// A config file plus per-key overrides; flags take precedence.
#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<String>,
    #[arg(long)]
    output_dir: Option<String>,
    /// MITBIH5, MITBIH6 or AAMI5.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    window_length: Option<String>,
    #[arg(long)]
    balance_fraction: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    n_runs: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    /// Batches between evaluations, or `epoch`.
    #[arg(long)]
    eval_interval: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    lr_decay_factor: Option<String>,
    #[arg(long)]
    lr_patience: Option<String>,
    #[arg(long)]
    lr_floor: Option<String>,
    /// Comma-separated record names, or `all`.
    #[arg(long)]
    records: Option<String>,
    /// Cap on segments per class, or `none`.
    #[arg(long)]
    max_per_class: Option<String>,
    /// `test` or `validation`.
    #[arg(long)]
    select_on: Option<String>,
    #[arg(long)]
    validation_fraction: Option<String>,
    #[arg(long)]
    threads: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("data_dir", &self.data_dir),
            ("output_dir", &self.output_dir),
            ("scheme", &self.scheme),
            ("channel", &self.channel),
            ("window_length", &self.window_length),
            ("balance_fraction", &self.balance_fraction),
            ("seed", &self.seed),
            ("n_runs", &self.n_runs),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("eval_interval", &self.eval_interval),
            ("learning_rate", &self.learning_rate),
            ("lr_decay_factor", &self.lr_decay_factor),
            ("lr_patience", &self.lr_patience),
            ("lr_floor", &self.lr_floor),
            ("records", &self.records),
            ("max_per_class", &self.max_per_class),
            ("select_on", &self.select_on),
            ("validation_fraction", &self.validation_fraction),
            ("threads", &self.threads),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        config.validate()?;
        if config.threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build_global()
                .context("configuring the thread pool")?;
        }
        Ok(config)
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Census(args) => {
            let config = args.resolve()?;
            let c = experiment::census(&config)?;
            experiment::write_census(&config.output_dir, &c)?;
            println!("records: {}", c.records.len());
            for (code, n) in &c.code_counts {
                println!("code {code:>2} {:<2} {n}", rrr_ecg::wfdb::code_symbol(*code));
            }
            println!(
                "max R-R-R span: {} samples; {} of {} beats ({:.4}%) exceed the window",
                c.spans.max_span,
                c.spans.n_exceeding,
                c.spans.n_beats,
                100.0 * c.spans.fraction_exceeding()
            );
            if !c.checksum_failures.is_empty() {
                println!("checksum mismatches: {}", c.checksum_failures.join(" "));
            }
            println!("wrote {}", config.output_dir.display());
        }
        Command::Train(args) => {
            let config = args.resolve()?;
            let outcomes = experiment::run_experiment(&config)?;
            for o in &outcomes {
                match &o.result {
                    Ok(r) => println!(
                        "run {:02}: accuracy {:.4}  precision {:.4}  sensitivity {:.4}  F1 {:.4}  AUC {:.4}",
                        o.run, r.accuracy, r.macro_precision, r.macro_sensitivity, r.macro_f1, r.macro_auc
                    ),
                    Err(e) => println!("run {:02}: FAILED ({e})", o.run),
                }
            }
            println!("wrote {}", config.output_dir.display());
            if outcomes.iter().all(|o| o.result.is_err()) {
                bail!("every run failed");
            }
        }
        Command::Evaluate {
            config,
            checkpoint,
            manifest,
            out,
        } => {
            let config = config.resolve()?;
            let out = out.unwrap_or_else(|| {
                checkpoint
                    .parent()
                    .map_or_else(|| PathBuf::from("rescore"), |p| p.join("rescore"))
            });
            let r = experiment::evaluate_checkpoint(&config, &checkpoint, &manifest, &out)?;
            println!(
                "accuracy {:.4}  F1 {:.4}  AUC {:.4} on {} segments; wrote {}",
                r.accuracy,
                r.macro_f1,
                r.macro_auc,
                r.n_test,
                out.display()
            );
        }
        Command::Report(args) => {
            let config = args.resolve()?;
            let rows = experiment::report(&config.output_dir)?;
            if rows.is_empty() {
                bail!("no run summaries under {}", config.output_dir.display());
            }
            let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
            let (mean, std) = experiment::mean_std(&acc);
            println!("{} runs: accuracy {mean:.4} ± {std:.4}", rows.len());
        }
    }
    Ok(())
}
