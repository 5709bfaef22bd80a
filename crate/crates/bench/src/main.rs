use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sebench::config::BenchConfig;
use sebench::corpus::write_synthetic_corpus;
use sebench::{pipeline, report, BenchError};
use sebench_core::segan::{
    save_checkpoint, steps_per_epoch, toy_dataset, train, Architecture, GanModel, TrainConfig,
};

#[derive(Parser)]
#[command(name = "bench", version, about = "Speech enhancement benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON benchmark config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides worker_count and SEBENCH_WORKERS.
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<BenchConfig, BenchError> {
        let mut cfg = BenchConfig::load(&self.config)?;
        if let Some(w) = self.workers {
            cfg.worker_count = w;
            cfg.validate()?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Mix, enhance, score and aggregate in one pass.
    Run(ConfigArgs),
    /// Write the scenario manifest and clean/noisy audio.
    Mix(ConfigArgs),
    /// Enhance the mixtures written by `mix`.
    Enhance(ConfigArgs),
    /// Score the enhanced audio written by `enhance` into reports.csv.
    Score(ConfigArgs),
    /// Aggregate a reports.csv into per-condition statistics.
    Aggregate {
        #[arg(long)]
        reports: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a SEGAN model on synthetic windows and save a checkpoint.
    Train(TrainArgs),
    /// Write the synthetic test corpus (clean/ and noise/ subdirectories).
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    windows: usize,
    #[arg(long, default_value_t = 60)]
    epochs: usize,
    #[arg(long, default_value_t = 20)]
    batch_size: usize,
    #[arg(long, default_value_t = 2e-4)]
    lr: f64,
    #[arg(long, default_value_t = 100.0)]
    lambda_l1: f64,
    /// Seed of the synthetic dataset.
    #[arg(long, default_value_t = 1)]
    data_seed: u64,
    /// Seed of the parameter initialisation.
    #[arg(long, default_value_t = 7)]
    model_seed: u64,
    /// Seed of batch shuffling and latent draws.
    #[arg(long, default_value_t = 3)]
    seed: u64,
    #[arg(long, default_value_t = 5.0)]
    snr_lo: f64,
    #[arg(long, default_value_t = 15.0)]
    snr_hi: f64,
}

fn run_train(a: &TrainArgs) -> Result<(), BenchError> {
    let arch = Architecture::default();
    let data = toy_dataset(a.windows, arch.window_len, (a.snr_lo, a.snr_hi), a.data_seed)?;
    let model = GanModel::new(arch, a.lambda_l1, a.model_seed)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        lr: a.lr,
        lambda_l1: a.lambda_l1,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let started = Instant::now();
    let outcome = train(model, &data, &cfg)?;
    let steps = steps_per_epoch(data.len(), cfg.batch_size);
    println!(
        "trained {} epochs in {:.1} s: l1 {:.5} -> {:.5}",
        a.epochs,
        started.elapsed().as_secs_f64(),
        outcome.initial_l1(),
        outcome.final_l1(steps)
    );
    save_checkpoint(&outcome.model, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let out = pipeline::run_benchmark(&cfg)?;
            println!(
                "{} scenarios, {} reports, {} errors -> {}",
                out.scenarios.len(),
                out.reports.len(),
                out.errors.len(),
                cfg.out_dir.display()
            );
        }
        Command::Mix(args) => {
            let cfg = args.load()?;
            let s = pipeline::stage_mix(&cfg)?;
            println!("mixed {} scenarios", s.len());
        }
        Command::Enhance(args) => {
            let cfg = args.load()?;
            let errors = pipeline::stage_enhance(&cfg)?;
            println!("enhanced, {} errors", errors.len());
        }
        Command::Score(args) => {
            let cfg = args.load()?;
            let r = pipeline::stage_score(&cfg)?;
            println!("scored {} reports", r.len());
        }
        Command::Aggregate { reports, out } => {
            let reports = report::read_reports(&reports)?;
            let summary = report::write_aggregates(&out, &reports)?;
            println!("{} aggregate rows -> {}", summary.rows.len(), out.display());
        }
        Command::Train(a) => run_train(&a)?,
        Command::Synth { out } => {
            let files = write_synthetic_corpus(&out)?;
            println!("wrote {} files under {}", files.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
