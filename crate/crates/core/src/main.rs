use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use qimlab::harness::{execute, parse_snr, write_output, Command, ExperimentConfig, Overrides, Status};
use qimlab::measurements::EnsembleKind;
use qimlab::scalar::Field;

#[derive(Parser)]
#[command(name = "qimlab", version, about = "Phase retrieval with quotient intensity models")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Success rate against the number of measurements.
    SuccessRate(Flags),
    /// Relative-error traces for each model and the Wirtinger Flow baseline.
    Convergence(Flags),
    /// Reconstruction error against SNR.
    Noise(Flags),
    /// Landscape sign checks and basin census (JSON).
    Landscape(Flags),
    /// Special-function and expectation oracles (JSON).
    OracleCheck(Flags),
}

#[derive(Args)]
struct Flags {
    /// Comma-separated models: qim1, qim2[:beta], qim3[:beta1:beta2].
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Measurement count; overrides --ratio.
    #[arg(long)]
    m: Option<usize>,
    /// Comma-separated m/n ratios.
    #[arg(long, value_delimiter = ',')]
    ratio: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated SNR values in dB; `inf` for noiseless.
    #[arg(long, value_delimiter = ',', value_parser = snr_arg)]
    snr: Option<Vec<f64>>,
    /// Step size, overriding each model's default.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    field: Option<Field>,
    #[arg(long, value_parser = ensemble_arg)]
    ensemble: Option<EnsembleKind>,
    /// Monte Carlo samples per oracle point.
    #[arg(long)]
    samples: Option<usize>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn snr_arg(s: &str) -> Result<f64, String> {
    parse_snr(s).map_err(|e| e.to_string())
}

fn ensemble_arg(s: &str) -> Result<EnsembleKind, String> {
    match s {
        "gaussian" | "explicit-gaussian" => Ok(EnsembleKind::ExplicitGaussian),
        "cdp" => Ok(EnsembleKind::Cdp),
        other => Err(format!("unknown ensemble '{other}' (expected gaussian or cdp)")),
    }
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            models: self.model.clone().map(|m| vec![m]),
            field: self.field,
            ensemble: self.ensemble,
            n: self.n,
            m: self.m,
            ratios: self.ratio.clone(),
            trials: self.trials,
            max_iters: self.iters,
            tol: self.tol,
            seed: self.seed,
            snr_db: self.snr.as_ref().map(|v| {
                v.iter()
                    .map(|x| match serde_json::Number::from_f64(*x) {
                        Some(num) => serde_json::Value::Number(num),
                        None => serde_json::Value::String("inf".into()),
                    })
                    .collect()
            }),
            step: self.step,
            mc_samples: self.samples,
            betas: None,
            radii: None,
            out: self.out.clone(),
            threads: self.threads,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Sub::SuccessRate(f) => (Command::SuccessRate, f),
        Sub::Convergence(f) => (Command::Convergence, f),
        Sub::Noise(f) => (Command::Noise, f),
        Sub::Landscape(f) => (Command::Landscape, f),
        Sub::OracleCheck(f) => (Command::OracleCheck, f),
    };
    let file = match &flags.config {
        Some(path) => match Overrides::from_json_file(path) {
            Ok(o) => o,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => Overrides::default(),
    };
    let cfg = match ExperimentConfig::resolve(command, file.merge(flags.overrides())) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(t) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let start = Instant::now();
    let outcome = match execute(&cfg).and_then(|o| write_output(&cfg, &o).map(|_| o)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("{} finished in {:.2}s", command.as_str(), start.elapsed().as_secs_f64());
    match outcome.status {
        Status::Pass => ExitCode::SUCCESS,
        Status::CheckFailed => ExitCode::from(1),
    }
}
