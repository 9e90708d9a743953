//! Command-line front end: run experiments, sweeps, kernel validation, or
//! emit a synthesized sample function as CSV.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wcgpr::{
    filter_induced_kernel, generate_improper_gp, run_single, run_sweep, validate_kernel_pair,
    ComplexInputSet, ExperimentConfig, ExperimentReport, PredictorSelection, Result,
};

#[derive(Parser)]
#[command(name = "wcgpr", about = "Widely complex Gaussian-process regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// JSON experiment configuration; defaults used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config output path (CSV; stdout when unset).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the predictor selection.
    #[arg(long, value_parser = parse_predictor)]
    predictor: Option<PredictorSelection>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment at a single training size.
    Run(CommonOpts),
    /// Run the configured training-size sweep.
    Sweep(CommonOpts),
    /// Validate the config and its filter-induced kernel pair.
    Validate(CommonOpts),
    /// Synthesize one sample function and emit it as CSV.
    Synth(CommonOpts),
}

fn parse_predictor(s: &str) -> std::result::Result<PredictorSelection, String> {
    match s {
        "widely" => Ok(PredictorSelection::Widely),
        "proper" => Ok(PredictorSelection::Proper),
        "both" => Ok(PredictorSelection::Both),
        other => Err(format!("unknown predictor `{other}` (widely|proper|both)")),
    }
}

fn load_config(opts: &CommonOpts) -> Result<ExperimentConfig> {
    let mut config = match &opts.config {
        Some(path) => ExperimentConfig::from_json(&fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(out) = &opts.out {
        config.output = Some(out.clone());
    }
    if let Some(trials) = opts.trials {
        config.trials = trials;
    }
    if let Some(predictor) = opts.predictor {
        config.predictor = predictor;
    }
    config.validate()?;
    Ok(config)
}

fn emit_report(report: &ExperimentReport) -> Result<()> {
    match &report.config.output {
        Some(path) => {
            let file = fs::File::create(path)?;
            report.write_csv(file)?;
            eprintln!("wrote {}", path.display());
        }
        None => report.write_csv(std::io::stdout().lock())?,
    }
    eprint!("{}", report.summary_text());
    Ok(())
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(opts) => {
            let config = load_config(&opts)?;
            emit_report(&run_single(&config)?)
        }
        Command::Sweep(opts) => {
            let mut config = load_config(&opts)?;
            if config.sweep.is_none() {
                config.sweep = Some(vec![50, 100, 200, 300, 400, 500]);
                config.validate()?;
            }
            emit_report(&run_sweep(&config)?)
        }
        Command::Validate(opts) => {
            let config = load_config(&opts)?;
            let kp = filter_induced_kernel(&config.filter_model()?, config.grid.uniform_spacing()?)?;
            // Validate the pair on a random subset of grid nodes.
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let indices =
                rand::seq::index::sample(&mut rng, config.grid.total(), 12.min(config.grid.total()))
                    .into_vec();
            let x = ComplexInputSet::from_grid_indices(&config.grid, &indices)?;
            let report = validate_kernel_pair(&kp, &x, 1e-8)?;
            println!("{report}");
            if report.pass {
                Ok(())
            } else {
                Err(wcgpr::Error::numerical("kernel pair validation failed"))
            }
        }
        Command::Synth(opts) => {
            let config = load_config(&opts)?;
            let sample = generate_improper_gp(&config.filter_model()?, config.seed)?;
            match &config.output {
                Some(path) => {
                    sample.write_csv(fs::File::create(path)?)?;
                    eprintln!("wrote {}", path.display());
                }
                None => sample.write_csv(std::io::stdout().lock())?,
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::FAILURE
        }
    }
}
