//! The `ppgan` command line.
//!
//! Subcommands:
//!
//! - `train` — train a (possibly private) WGAN on an IDX image corpus,
//!   writing `metrics.csv`, periodic checkpoints, and `summary.txt`.
//! - `accountant` — query the moments accountant for a composed
//!   subsampled-Gaussian mechanism, next to the coarse closed form and
//!   the strong-composition baseline.
//! - `score` — sample a trained generator and append its inception /
//!   generate scores to `scores.csv`.
//! - `calibrate` — print the closed-form noise calibrations for a
//!   privacy target.
//! - `synth-ehr` — sample synthetic diagnosis-code records to CSV.
//! - `synth-digits` — render a labeled synthetic digit corpus to IDX.
//! - `train-label-model` — fit and save the frozen classifier used by
//!   `score`.
//!
//! Exit codes: 0 success, 2 usage (from the argument parser), 3 privacy
//! budget halt, 4 invalid configuration or parameters, 5 data or format
//! problems, 6 numeric failure.

use std::fs;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::accountant::{strong_composition_epsilon, MechanismStep, MomentLedger};
use crate::checkpoint::CheckpointState;
use crate::config::{load_config, parse_config};
use crate::data::{
    generate_digit_corpus, load_idx, normalize_images, synthesize_ehr, write_ehr_csv,
    write_idx_images, write_idx_labels, SynthEhrModel,
};
use crate::dp::{calibrate_sigma_eq17, calibrate_sigma_lemma1, PrivacyTarget};
use crate::error::{Error, Result};
use crate::ndnum::RngStream;
use crate::scores::{score_generator, train_label_model, LabelModel};
use crate::train::Trainer;

/// Column order of `metrics.csv`.
pub const METRICS_HEADER: &str = "iter,critic_loss,gen_loss,grad_norm,eps";
/// Column order of `scores.csv`.
pub const SCORES_HEADER: &str = "eps,seed,is_mean,is_std,gs";

#[derive(Parser)]
#[command(
    name = "ppgan",
    version,
    about = "Differentially private WGAN training, privacy accounting, and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a WGAN with per-example clipping and Gaussian noise
    Train(TrainArgs),
    /// Query the moments accountant for composed noisy steps
    Accountant(AccountantArgs),
    /// Score a trained generator against a frozen label model
    Score(ScoreArgs),
    /// Print closed-form noise calibrations for a privacy target
    Calibrate(CalibrateArgs),
    /// Sample synthetic diagnosis-code records to CSV
    SynthEhr(SynthEhrArgs),
    /// Render a labeled synthetic digit corpus to IDX files
    SynthDigits(SynthDigitsArgs),
    /// Fit and save the label model used for scoring
    TrainLabelModel(TrainLabelModelArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Run configuration file (flat key = value text)
    #[arg(long)]
    config: PathBuf,
    /// Directory holding images.idx and labels.idx
    #[arg(long)]
    data_dir: PathBuf,
    /// Output directory for metrics, checkpoints, and the summary
    #[arg(long)]
    out_dir: PathBuf,
    /// Override the seed from the config file
    #[arg(long)]
    seed: Option<u64>,
    /// Resume from this checkpoint (same config required)
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct AccountantArgs {
    /// Query direction
    #[arg(long, value_enum)]
    query: AccountantQuery,
    /// Per-step sampling ratio in (0, 1]
    #[arg(long)]
    q: f64,
    /// Noise multiplier
    #[arg(long)]
    sigma: f64,
    /// Number of composed steps
    #[arg(long)]
    steps: u64,
    /// Failure probability for eps-for-delta
    #[arg(long)]
    delta: Option<f64>,
    /// Epsilon for delta-for-eps
    #[arg(long)]
    epsilon: Option<f64>,
    /// Largest moment order in the grid
    #[arg(long, default_value_t = 32)]
    lambda_max: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum AccountantQuery {
    EpsForDelta,
    DeltaForEps,
}

#[derive(Args)]
struct ScoreArgs {
    /// Training checkpoint holding the generator to score
    #[arg(long)]
    checkpoint: PathBuf,
    /// Frozen label model written by train-label-model
    #[arg(long)]
    label_model: PathBuf,
    /// Directory scores.csv is appended to
    #[arg(long)]
    out_dir: PathBuf,
    /// Images to sample
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Consecutive equal splits (must divide --samples)
    #[arg(long, default_value_t = 10)]
    splits: usize,
    /// Evaluation seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Privacy target epsilon
    #[arg(long)]
    epsilon: f64,
    /// Privacy target delta
    #[arg(long)]
    delta: f64,
    /// Sampling ratio the noisy steps will run at
    #[arg(long)]
    q: f64,
    /// Critic iterations per generator step
    #[arg(long)]
    n_d: u32,
    /// L2 sensitivity for the single-query calibration
    #[arg(long, default_value_t = 1.0)]
    sensitivity: f64,
}

#[derive(Args)]
struct SynthEhrArgs {
    /// Model description file; omitted uses the built-in demonstration model
    #[arg(long)]
    model: Option<PathBuf>,
    /// Records to sample
    #[arg(long)]
    count: usize,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SynthDigitsArgs {
    /// Directory images.idx and labels.idx are written to
    #[arg(long)]
    out_dir: PathBuf,
    /// Images to render
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainLabelModelArgs {
    /// Directory holding images.idx and labels.idx
    #[arg(long)]
    data_dir: PathBuf,
    /// Output path for the saved model
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    /// Pool images to this side length first; 0 keeps full resolution
    #[arg(long, default_value_t = 8)]
    downsample: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parse the process arguments, run the chosen subcommand, and return
/// the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Train(args) => cmd_train(args),
        Command::Accountant(args) => cmd_accountant(args),
        Command::Score(args) => cmd_score(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::SynthEhr(args) => cmd_synth_ehr(args),
        Command::SynthDigits(args) => cmd_synth_digits(args),
        Command::TrainLabelModel(args) => cmd_train_label_model(args),
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::BudgetExceeded { .. } => 3,
        Error::Config { .. }
        | Error::Parameter(_)
        | Error::Shape(_)
        | Error::AccuracyGate { .. } => 4,
        Error::Data(_) | Error::Format(_) | Error::Io(_) => 5,
        Error::Numeric(_) => 6,
    }
}

/// Open `metrics.csv` for appending. On a resume, rows past the
/// checkpoint's iteration are dropped first so the file continues with
/// neither gaps nor duplicates.
fn open_metrics(path: &Path, start_iteration: u64) -> Result<fs::File> {
    if start_iteration > 0 && path.exists() {
        let text = fs::read_to_string(path)?;
        let mut kept = String::with_capacity(text.len());
        kept.push_str(METRICS_HEADER);
        kept.push('\n');
        for line in text.lines().skip(1) {
            let iter: Option<u64> = line.split(',').next().and_then(|f| f.parse().ok());
            if let Some(i) = iter {
                if i <= start_iteration {
                    kept.push_str(line);
                    kept.push('\n');
                }
            }
        }
        fs::write(path, kept)?;
        Ok(OpenOptions::new().append(true).open(path)?)
    } else {
        let mut file = fs::File::create(path)?;
        writeln!(file, "{METRICS_HEADER}")?;
        Ok(file)
    }
}

fn save_checkpoint(
    out_dir: &Path,
    trainer: &Trainer,
    config_text: &str,
    config_hash: u64,
    abort: bool,
) -> Result<PathBuf> {
    let name = if abort {
        format!("checkpoint-abort-{:06}.bin", trainer.iteration())
    } else {
        format!("checkpoint-{:06}.bin", trainer.iteration())
    };
    let path = out_dir.join(name);
    CheckpointState::from_trainer(trainer, config_text.to_string(), config_hash).save(&path)?;
    Ok(path)
}

fn cmd_train(args: TrainArgs) -> Result<i32> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let canonical = cfg.canonical_text();
    let config_hash = cfg.hash();

    let (images, _labels) = load_idx(
        &args.data_dir.join("images.idx"),
        &args.data_dir.join("labels.idx"),
    )?;
    let data = normalize_images(&images, cfg.downsample)?;
    let rows = data.rows();
    let sigma_n = cfg.resolved_sigma(rows)?;
    let train_cfg = cfg.train_config(sigma_n)?;
    let q = train_cfg.batch as f64 / rows as f64;

    if train_cfg.is_private() {
        if q > 0.05 {
            eprintln!(
                "warning: sampling ratio q = {q:.4} is above 0.05, where the \
                 coarse closed-form noise calibration degrades; the accountant \
                 output in summary.txt is the authoritative spend"
            );
        }
        if train_cfg.critic_iters > 10 {
            eprintln!(
                "warning: {} critic iterations per cycle is above 10, where the \
                 coarse closed-form noise calibration degrades; the accountant \
                 output in summary.txt is the authoritative spend",
                train_cfg.critic_iters
            );
        }
    }

    fs::create_dir_all(&args.out_dir)?;
    let mut trainer = match &args.resume {
        Some(path) => {
            let ck = CheckpointState::load(path)?;
            ck.verify_config_hash(config_hash)?;
            Trainer::restore(
                train_cfg.clone(),
                data,
                ck.generator,
                ck.critic,
                ck.ledger,
                ck.iteration,
                ck.batch_counter,
                ck.prior_counter,
                ck.noise_counter,
            )?
        }
        None => Trainer::new(train_cfg.clone(), data, cfg.gen_hidden, cfg.critic_hidden)?,
    };

    let metrics_path = args.out_dir.join("metrics.csv");
    let mut metrics = open_metrics(&metrics_path, trainer.iteration())?;

    let mut halt: Option<(f64, f64, u64)> = None;
    while trainer.iteration() < train_cfg.gen_iters && halt.is_none() {
        match trainer.cycle() {
            Ok(row) => {
                writeln!(
                    metrics,
                    "{},{},{},{},{}",
                    row.iteration, row.critic_loss, row.gen_loss, row.grad_norm, row.eps_spent
                )?;
                if cfg.checkpoint_interval > 0
                    && row.iteration % cfg.checkpoint_interval == 0
                    && row.iteration < train_cfg.gen_iters
                {
                    save_checkpoint(&args.out_dir, &trainer, &canonical, config_hash, false)?;
                }
            }
            Err(Error::BudgetExceeded {
                epsilon,
                target,
                iteration,
            }) => halt = Some((epsilon, target, iteration)),
            Err(err @ Error::Numeric(_)) => {
                metrics.flush()?;
                let path =
                    save_checkpoint(&args.out_dir, &trainer, &canonical, config_hash, true)?;
                eprintln!(
                    "training diverged; diagnostic checkpoint written to {}",
                    path.display()
                );
                return Err(err);
            }
            Err(err) => return Err(err),
        }
    }
    metrics.flush()?;
    save_checkpoint(&args.out_dir, &trainer, &canonical, config_hash, false)?;

    let mut summary = String::new();
    summary.push_str(&format!("iterations = {}\n", trainer.iteration()));
    summary.push_str(&format!("epsilon_target = {}\n", train_cfg.epsilon_target));
    summary.push_str(&format!("delta = {}\n", train_cfg.delta));
    summary.push_str(&format!("sigma_n = {sigma_n}\n"));
    summary.push_str(&format!("q = {q}\n"));
    if train_cfg.is_private() {
        let eps = trainer.ledger().eps_for_delta(train_cfg.delta)?;
        summary.push_str(&format!("final_epsilon = {eps}\n"));
        let target = PrivacyTarget::new(train_cfg.epsilon_target, train_cfg.delta)?;
        if let Ok(n_d) = u32::try_from(train_cfg.critic_iters) {
            if let Ok(sigma_closed) = calibrate_sigma_eq17(&target, q, n_d) {
                summary.push_str(&format!(
                    "sigma_eq17 = {sigma_closed}  # closed form at the target, for comparison\n"
                ));
            }
        }
    } else {
        summary.push_str("final_epsilon = non-private\n");
    }
    match halt {
        Some((epsilon, target, iteration)) => summary.push_str(&format!(
            "halted = yes at iteration {iteration}: next step would spend \
             epsilon = {epsilon} > target {target}\n"
        )),
        None => summary.push_str("halted = no\n"),
    }
    fs::write(args.out_dir.join("summary.txt"), summary)?;

    if halt.is_some() {
        println!(
            "halted by the privacy budget after {} iterations; see {}",
            trainer.iteration(),
            args.out_dir.join("summary.txt").display()
        );
        Ok(3)
    } else {
        println!(
            "completed {} iterations; summary in {}",
            trainer.iteration(),
            args.out_dir.join("summary.txt").display()
        );
        Ok(0)
    }
}

fn cmd_accountant(args: AccountantArgs) -> Result<i32> {
    let step = MechanismStep::new(args.q, args.sigma)?;
    let mut ledger = MomentLedger::with_lambda_max(args.lambda_max);
    if args.steps > 0 {
        ledger.accumulate(&step, args.steps)?;
    }
    match args.query {
        AccountantQuery::EpsForDelta => {
            let delta = args.delta.ok_or_else(|| {
                Error::Parameter("eps-for-delta needs --delta".to_string())
            })?;
            let eps = ledger.eps_for_delta(delta)?;
            println!("accountant epsilon = {eps}");
            let closed =
                2.0 * args.q * (args.steps as f64 * (1.0 / delta).ln()).sqrt() / args.sigma;
            println!("closed-form epsilon = {closed}");
            let eps0 = (2.0 * (1.25 / delta).ln()).sqrt() / args.sigma;
            let strong = if args.steps == 0 {
                0.0
            } else {
                strong_composition_epsilon(eps0, args.steps, delta)?
            };
            println!("strong-composition epsilon = {strong}");
        }
        AccountantQuery::DeltaForEps => {
            let epsilon = args.epsilon.ok_or_else(|| {
                Error::Parameter("delta-for-eps needs --epsilon".to_string())
            })?;
            let delta = ledger.delta_for_eps(epsilon)?;
            println!("accountant delta = {delta}");
        }
    }
    Ok(0)
}

fn cmd_score(args: ScoreArgs) -> Result<i32> {
    let ck = CheckpointState::load(&args.checkpoint)?;
    let model = LabelModel::load(&args.label_model)?;
    let run_cfg = parse_config(&ck.config_text)?;
    let eps = if run_cfg.epsilon_target.is_infinite() {
        f64::INFINITY
    } else {
        ck.ledger.eps_for_delta(run_cfg.delta)?
    };
    let mut stream = RngStream::new(args.seed, crate::streams::EVAL);
    let report = score_generator(&ck.generator, &model, args.samples, args.splits, &mut stream)?;

    fs::create_dir_all(&args.out_dir)?;
    let path = args.out_dir.join("scores.csv");
    let mut file = if path.exists() {
        OpenOptions::new().append(true).open(&path)?
    } else {
        let mut f = fs::File::create(&path)?;
        writeln!(f, "{SCORES_HEADER}")?;
        f
    };
    writeln!(
        file,
        "{},{},{},{},{}",
        eps, args.seed, report.is_mean, report.is_std, report.gs
    )?;

    println!("eps = {eps}");
    println!("is_mean = {}", report.is_mean);
    println!("is_std = {}", report.is_std);
    println!("gs = {}", report.gs);
    Ok(0)
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<i32> {
    let target = PrivacyTarget::new(args.epsilon, args.delta)?;
    let sigma_n = calibrate_sigma_eq17(&target, args.q, args.n_d)?;
    println!("sigma_n = {sigma_n}");
    let sigma = calibrate_sigma_lemma1(&target, args.sensitivity)?;
    println!("sigma_lemma1 = {sigma}");
    if !target.in_lemma_regime() {
        eprintln!(
            "note: epsilon = {} is not below 1, outside the proven regime of \
             the lemma1 closed form; treat sigma_lemma1 as a heuristic",
            args.epsilon
        );
    }
    Ok(0)
}

fn cmd_synth_ehr(args: SynthEhrArgs) -> Result<i32> {
    let model = match &args.model {
        Some(path) => SynthEhrModel::load_model(path)?,
        None => SynthEhrModel::demo(),
    };
    let mut stream = RngStream::new(args.seed, crate::streams::DATA);
    let records = synthesize_ehr(&model, args.count, &mut stream);
    write_ehr_csv(&args.out, &records)?;
    println!("wrote {} records to {}", args.count, args.out.display());
    Ok(0)
}

fn cmd_synth_digits(args: SynthDigitsArgs) -> Result<i32> {
    fs::create_dir_all(&args.out_dir)?;
    let mut stream = RngStream::new(args.seed, crate::streams::DATA);
    let (images, labels) = generate_digit_corpus(args.count, &mut stream);
    write_idx_images(&args.out_dir.join("images.idx"), &images)?;
    write_idx_labels(&args.out_dir.join("labels.idx"), &labels)?;
    println!(
        "wrote {} {}x{} images to {}",
        images.count(),
        images.rows(),
        images.cols(),
        args.out_dir.display()
    );
    Ok(0)
}

fn cmd_train_label_model(args: TrainLabelModelArgs) -> Result<i32> {
    let (images, labels) = load_idx(
        &args.data_dir.join("images.idx"),
        &args.data_dir.join("labels.idx"),
    )?;
    let side = if args.downsample == 0 {
        None
    } else {
        Some(args.downsample)
    };
    let flat = normalize_images(&images, side)?;
    let mut stream = RngStream::new(args.seed, crate::streams::EVAL);
    let model = train_label_model(&flat, &labels, args.epochs, &mut stream)?;
    model.save(&args.out)?;
    println!("label model saved to {}", args.out.display());
    Ok(0)
}
