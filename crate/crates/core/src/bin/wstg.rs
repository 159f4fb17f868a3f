use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use wstg::dataset::{generate_corpus, load_corpus, save_corpus, Split};
use wstg::diagnostics::gradient_suite;
use wstg::predictions::{evaluate_rows, frame_scores_to_tsv, predict, read_predictions, rows, write_predictions};
use wstg::tensor::gradcheck::Tolerance;
use wstg::train::{train_coarse, train_fine, TrainLog};
use wstg::{Checkpoint, CorpusSpec, Error, EvalReport, Grounder, Mode, Result, Stage, TrainConfig};

/// Weakly-supervised temporal grounding: data generation, two-stage
/// training, inference and evaluation.
#[derive(Parser)]
#[command(name = "wstg", version)]
struct Cli {
    /// key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed (and the corpus seed for generate-data)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Config override, repeatable: --set lr=0.01
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Coarse,
    Fine,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Writes a synthetic corpus to --out
    GenerateData {
        #[arg(long, default_value_t = 250)]
        videos: usize,
        #[arg(long, default_value_t = 50)]
        test: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 20)]
        vocab: usize,
    },
    /// Trains the encoders and coarse stage; writes coarse.ckpt
    TrainCoarse {
        #[arg(long)]
        data: PathBuf,
    },
    /// Trains the fine stage on a coarse checkpoint; writes fine.ckpt
    TrainFine {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Grounds corpus queries; writes predictions.tsv
    Infer {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Inference depth; defaults to the checkpoint's stage
        #[arg(long, value_enum)]
        stage: Option<StageArg>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Also write frame_scores.tsv
        #[arg(long)]
        dump_scores: bool,
    },
    /// Scores predictions against ground truth; writes report.csv
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Runs the finite-difference gradient suite
    Gradcheck {
        #[arg(long, default_value_t = 50)]
        seeds: u64,
    },
    /// Prints report.csv files side by side: NAME=PATH ...
    Report {
        #[arg(required = true)]
        reports: Vec<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WSTG_LOG", "info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// `--config` (or `fallback` without one), then `--set` overrides, then `--seed`.
fn config(cli: &Cli, fallback: TrainConfig) -> Result<TrainConfig> {
    let mut cfg = match &cli.config {
        Some(path) => TrainConfig::load(path)?,
        None => fallback,
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_loss_log(path: &Path, log: &TrainLog) -> Result<()> {
    let mut text = String::from("epoch,loss\n");
    for (i, l) in log.epoch_losses.iter().enumerate() {
        text.push_str(&format!("{},{l}\n", i + 1));
    }
    write(path, &text)
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.as_path();
    match &cli.command {
        Command::GenerateData { videos, test, dim, vocab } => {
            let spec = CorpusSpec {
                n_videos: *videos,
                n_test: *test,
                feature_dim: *dim,
                vocab_size: *vocab,
                seed: cli.seed.unwrap_or(CorpusSpec::default().seed),
                ..CorpusSpec::default()
            };
            let corpus = generate_corpus(&spec)?;
            save_corpus(&corpus, out)?;
            info!("wrote {} videos to {}", corpus.videos.len(), out.display());
        }
        Command::TrainCoarse { data } => {
            let cfg = config(&cli, TrainConfig::default())?;
            let corpus = load_corpus(data)?;
            let ids = corpus.split_ids(Split::Train);
            let (ckpt, log) = train_coarse(&corpus.training_view(&ids), &cfg)?;
            create_dir(out)?;
            ckpt.save(&out.join("coarse.ckpt"))?;
            write_loss_log(&out.join("coarse_loss.csv"), &log)?;
            info!("{} steps, {} clipped", log.steps, log.clipped_steps);
        }
        Command::TrainFine { data, checkpoint } => {
            let coarse = Checkpoint::load(checkpoint)?;
            let cfg = config(&cli, coarse.config.clone())?;
            let corpus = load_corpus(data)?;
            let ids = corpus.split_ids(Split::Train);
            let (ckpt, log) = train_fine(&corpus.training_view(&ids), &coarse, &cfg)?;
            create_dir(out)?;
            ckpt.save(&out.join("fine.ckpt"))?;
            write_loss_log(&out.join("fine_loss.csv"), &log)?;
            info!("{} steps, {} skipped", log.steps, log.skipped_steps);
        }
        Command::Infer {
            data,
            checkpoint,
            stage,
            split,
            dump_scores,
        } => {
            let ckpt = Checkpoint::load(checkpoint)?;
            let grounder = Grounder::from_checkpoint(&ckpt)?;
            let mode = match stage {
                None => grounder.default_mode(),
                Some(StageArg::Coarse) => Mode::CoarseOnly,
                Some(StageArg::Fine) if ckpt.stage == Stage::Fine => Mode::Full,
                Some(StageArg::Fine) => {
                    return Err(Error::Config("--stage fine needs a fine-stage checkpoint".into()))
                }
            };
            let corpus = load_corpus(data)?;
            let ids: Vec<usize> = match split {
                SplitArg::Train => corpus.split_ids(Split::Train),
                SplitArg::Test => corpus.split_ids(Split::Test),
                SplitArg::All => (0..corpus.queries.len()).collect(),
            };
            let preds = predict(&grounder, &corpus, &ids, mode)?;
            create_dir(out)?;
            write_predictions(&out.join("predictions.tsv"), &rows(&corpus, &preds))?;
            if *dump_scores {
                let scores: Vec<_> = preds
                    .iter()
                    .filter_map(|(q, p)| p.frame_scores.as_ref().map(|s| (*q, s)))
                    .collect();
                write(&out.join("frame_scores.tsv"), &frame_scores_to_tsv(&scores))?;
            }
            info!("grounded {} queries", preds.len());
        }
        Command::Evaluate { data, predictions } => {
            let cfg = config(&cli, TrainConfig::default())?;
            let corpus = load_corpus(data)?;
            let report = evaluate_rows(&corpus, &read_predictions(predictions)?, &cfg.iou_thresholds)?;
            create_dir(out)?;
            write(&out.join("report.csv"), &report.to_csv())?;
            print!("{}", EvalReport::table(&[("model", &report)]));
        }
        Command::Gradcheck { seeds } => {
            let entries = gradient_suite(*seeds, Tolerance::default())?;
            let mut failed = 0;
            for e in &entries {
                println!(
                    "{:<20} {:>4} instances {:>7} entries  max abs err {:.2e}  max rel err {:.2e}  {}",
                    e.name,
                    e.instances,
                    e.report.checked,
                    e.report.max_abs_err,
                    e.report.max_rel_err,
                    if e.passed() { "ok" } else { "FAILED" }
                );
                failed += usize::from(!e.passed());
            }
            if failed > 0 {
                return Err(Error::Contract(format!("{failed} gradient checks failed")));
            }
        }
        Command::Report { reports } => {
            let mut loaded = Vec::new();
            for spec in reports {
                let (name, path) = spec.split_once('=').unwrap_or((spec.as_str(), spec.as_str()));
                let text = fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.into(),
                    source: e,
                })?;
                loaded.push((name.to_string(), EvalReport::from_csv(&text)?));
            }
            let table: Vec<(&str, &EvalReport)> = loaded.iter().map(|(n, r)| (n.as_str(), r)).collect();
            print!("{}", EvalReport::table(&table));
        }
    }
    Ok(())
}
