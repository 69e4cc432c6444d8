//! Command-line pipeline: synth, train, classify, evaluate, diagnose.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
//! Machine-readable output goes to stdout, diagnostics to stderr.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use iscb::classifier;
use iscb::error::Error;
use iscb::io;
use iscb::norms::NormPair;
use iscb::preprocess;
use iscb::synth::{CoefficientModel, SyntheticSpec};
use iscb::trainer::{self, StepPolicy, TrainConfig};
use iscb::PNorm;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "iscb",
    version,
    about = "Per-class incoherent subspace learning and p-norm response classification",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-subspace synthetic train/test pair as CSV.
    Synth(SynthArgs),
    /// Learn a feature bank from a CSV dataset and write a model file.
    Train(TrainArgs),
    /// Label the signals of a CSV file with a trained model.
    Classify(ClassifyArgs),
    /// Score a trained model against a labeled CSV dataset.
    Evaluate(EvaluateArgs),
    /// Print the coherence report and Grassmann bound of a model.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    dim: usize,
    #[arg(long = "per-class")]
    per_class: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, value_parser = CoefficientModel::parse)]
    coeff: CoefficientModel,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    coherence: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long = "out-train")]
    out_train: PathBuf,
    #[arg(long = "out-test")]
    out_test: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = PNorm::parse)]
    p: PNorm,
    #[arg(long)]
    s: usize,
    #[arg(long = "mu-fraction")]
    mu_fraction: f64,
    #[arg(long = "outer-iters", default_value_t = 10)]
    outer_iters: usize,
    #[arg(long = "inner-tol", default_value_t = 1e-4)]
    inner_tol: f64,
    #[arg(long = "step-policy", default_value = "auto", value_parser = StepPolicy::parse)]
    step_policy: StepPolicy,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "2,2", value_parser = parse_qp)]
    qp: NormPair,
}

fn parse_qp(text: &str) -> Result<NormPair, String> {
    const ALLOWED: [&str; 4] = ["2,2", "1,inf", "inf,inf", "inf,1"];
    if !ALLOWED.contains(&text) {
        return Err(format!("norm pair must be one of {}", ALLOWED.join(", ")));
    }
    NormPair::parse(text).map_err(|e| e.to_string())
}

/// Maps a library error onto the exit-code contract.
fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::InvalidConfig(_)
        | Error::EnumerationCap { .. }
        | Error::UnsupportedNormPair { .. } => EXIT_USAGE,
        Error::Numerical(_) => EXIT_NUMERICAL,
        Error::ZeroColumn { .. }
        | Error::ZeroSignal
        | Error::DimensionMismatch { .. }
        | Error::Parse { .. }
        | Error::Model(_)
        | Error::Io(_) => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    // die quietly when a downstream pipe closes, like other unix filters
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are successes, anything else is usage
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(EXIT_USAGE)
                }
            };
        }
    };
    let result = match cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Train(args) => run_train(args),
        Command::Classify(args) => run_classify(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Diagnose(args) => run_diagnose(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run_synth(args: SynthArgs) -> Result<(), Error> {
    let spec = SyntheticSpec {
        classes: args.classes,
        dim: args.dim,
        per_class: args.per_class,
        rank: args.s,
        coefficient_model: args.coeff,
        noise_sigma: args.noise,
        subspace_coherence: args.coherence,
        seed: args.seed,
    };
    let (train, test, _) = iscb::generate_synthetic(&spec)?;
    io::save_csv(&args.out_train, &train)?;
    io::save_csv(&args.out_test, &test)?;
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<(), Error> {
    let cfg = TrainConfig {
        pnorm: args.p,
        rank: args.s,
        mu_fraction: args.mu_fraction,
        outer_iters: args.outer_iters,
        inner_tol: args.inner_tol,
        inner_max_iters: 500,
        step_policy: args.step_policy,
        seed: args.seed,
    };
    let raw = io::load_csv(&args.data)?;
    cfg.validate(raw.dim())?;
    let normalized = preprocess::normalize_columns(&raw)?;
    let (reduction, reduced) = preprocess::qr_reduce(&normalized)?;
    cfg.validate(reduced.dim())?;
    let (bank, report) = trainer::train(&reduced, &cfg)?;
    if let Some(bound) = report.overlap_bound {
        eprintln!(
            "warning: s*C = {} exceeds the embedded dimension {}; subspaces must \
             overlap (grassmann bound {bound})",
            cfg.rank * reduced.class_count(),
            reduced.dim()
        );
    }
    if !report.degenerate_classes.is_empty() {
        eprintln!(
            "warning: rank-deficient feature blocks completed deterministically \
             for classes {:?}",
            report.degenerate_classes
        );
    }
    let lifted = preprocess::lift_features(&reduction, &bank)?;
    io::save_model(&args.out, &lifted)?;
    println!("best_distance={}", report.best_distance);
    println!("within_deficit={}", report.feasibility.max_within_deficit);
    println!("without_excess={}", report.feasibility.max_without_excess);
    Ok(())
}

fn run_classify(args: ClassifyArgs) -> Result<(), Error> {
    let bank = io::load_model(&args.model)?;
    let indexed = io::load_csv_indexed(&args.data)?;
    let mut out = String::new();
    for (row, (class, column)) in indexed.row_map.iter().enumerate() {
        let y = indexed.dataset.class(*class).column(*column).into_owned();
        let prediction = classifier::classify(&bank, &y)?;
        out.push_str(&format!(
            "{row},{},{}\n",
            prediction.label, prediction.margin
        ));
    }
    fs::write(&args.out, out)?;
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let bank = io::load_model(&args.model)?;
    let data = io::load_csv(&args.data)?;
    let summary = classifier::evaluate(&bank, &data)?;
    println!(
        "misclassified={} total={} accuracy={}",
        summary.misclassified, summary.total, summary.accuracy
    );
    for (a, actual) in summary.actual_labels.iter().enumerate() {
        for (p, predicted) in summary.predicted_labels.iter().enumerate() {
            let count = summary.confusion[a][p];
            if count > 0 {
                println!("confusion actual={actual} predicted={predicted} count={count}");
            }
        }
    }
    Ok(())
}

fn run_diagnose(args: DiagnoseArgs) -> Result<(), Error> {
    let bank = io::load_model(&args.model)?;
    let report = bank.coherence_report(args.qp)?;
    println!("p={}", bank.pnorm());
    println!("dim={}", bank.dim());
    println!("rank={}", bank.rank());
    println!("classes={}", bank.class_count());
    println!("qp={}", args.qp);
    println!(
        "grassmann_bound={}",
        trainer::grassmann_bound(bank.rank(), bank.dim(), Some(bank.class_count()))
    );
    for (i, label) in bank.labels().iter().enumerate() {
        let row: Vec<String> = (0..bank.class_count())
            .map(|j| format!("{}", report[(i, j)]))
            .collect();
        println!("coherence,{label},{}", row.join(","));
    }
    Ok(())
}
