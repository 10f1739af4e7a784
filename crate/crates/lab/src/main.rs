//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error,
//! 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use radlab::config::ExperimentConfig;
use radlab::{checkpoint, data, eval, report, train, LabError};
use radlab_core::selpred;

#[derive(Parser)]
#[command(name = "radlab", version, about = "Lifelong radar pulse classification experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize the configured datasets and write FRM1 frame files.
    GenData {
        config: PathBuf,
        /// Output directory for the frame files.
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Train the configured variant and archive checkpoints into a run
    /// directory (datasets included, so `report` can run on it directly).
    Train {
        config: PathBuf,
        /// Run directory to create.
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Score a frame file with a checkpoint; writes per-sample predictions.
    Eval {
        ckpt: PathBuf,
        data: PathBuf,
        /// Predictions CSV to write.
        #[arg(long, default_value = "preds.csv")]
        out: PathBuf,
    },
    /// Risk–coverage analysis of a predictions file: writes the sweep and
    /// prints the threshold chosen for the coverage target.
    Selpred {
        preds: PathBuf,
        /// Global coverage target in (0, 1].
        #[arg(long, default_value_t = 0.8)]
        coverage: f64,
        /// Output CSV (defaults to risk_coverage.csv next to the input).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the full report bundle for a finished run directory.
    Report { run_dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), LabError> {
    match cli.cmd {
        Cmd::GenData { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let tasks = data::build_all_tasks(&cfg)?;
            data::write_dataset(&out, &tasks)?;
            for t in &tasks {
                println!(
                    "task {}: {} train / {} test frames",
                    t.task_id,
                    t.train.len(),
                    t.test.len()
                );
            }
            println!("frame files in {}", out.display());
        }
        Cmd::Train { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let artifacts = train::run_training(&cfg, &out)?;
            println!("checkpoint: {}", artifacts.ckpt_path.display());
            for p in &artifacts.stage_ckpts {
                println!("stage checkpoint: {}", p.display());
            }
            println!("training log: {}", artifacts.log_path.display());
        }
        Cmd::Eval { ckpt, data: data_path, out } => {
            let ckpt = checkpoint::load(&ckpt)?;
            let frames = data::read_frames(&data_path)?;
            let rows = eval::evaluate(&ckpt, &frames)?;
            report::write_preds(&out, &rows)?;
            let correct = rows.iter().filter(|r| r.is_correct()).count();
            println!(
                "{} samples, recall {:.4}; predictions in {}",
                rows.len(),
                correct as f64 / rows.len() as f64,
                out.display()
            );
        }
        Cmd::Selpred { preds, coverage, out } => {
            let rows = report::read_preds(&preds)?;
            let scored: Vec<_> = rows.iter().map(|r| r.scored()).collect();
            let curve = selpred::sweep_thresholds(&scored)?;
            let out = out.unwrap_or_else(|| {
                preds.parent().unwrap_or_else(|| std::path::Path::new(".")).join("risk_coverage.csv")
            });
            report::write_risk_coverage(&out, &curve)?;
            let th = selpred::threshold_for_coverage(&curve, coverage)?;
            let (recall, realized) = selpred::selective_metrics(&scored, th.tau)?;
            println!("risk-coverage sweep: {}", out.display());
            println!(
                "tau = {} for target coverage {coverage}: coverage {realized}, selective recall {}",
                th.tau,
                recall.map(|r| r.to_string()).unwrap_or_else(|| "n/a".into())
            );
        }
        Cmd::Report { run_dir } => {
            let paths = report::report_run(&run_dir)?;
            println!("preds: {}", paths.preds.display());
            println!("recall table: {}", paths.recall_table.display());
            println!("risk-coverage: {}", paths.risk_coverage.display());
            println!("snr table: {}", paths.snr_table.display());
            if let Some(p) = &paths.roc_low_snr {
                println!("low-snr roc: {}", p.display());
            }
            println!("summary: {}", paths.summary.display());
        }
    }
    Ok(())
}
