use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fri_ridge::bench::{cmd_bench, cmd_estimate, cmd_extract, cmd_generate, ExperimentConfig, Method, RunOptions};
use fri_ridge::Result;

/// Ridge estimation in time-frequency representations with finite-rate-of-innovation methods.
#[derive(Debug, Parser)]
#[command(name = "fri-ridge", version, about)]
struct Cli {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize the configured mixture (plus noise) and its ground-truth sidecar.
    Generate(RunArgs),
    /// Estimate ridge trajectories for one signal.
    Estimate {
        #[command(flatten)]
        run: RunArgs,
        /// Also dump the TFR and per-frame FRI intermediates.
        #[arg(long)]
        debug_dump: bool,
    },
    /// Monte Carlo sweep over SNR and noise realizations.
    Bench(BenchArgs),
    /// Reconstruct one mode per estimated ridge by STFT masking.
    Extract {
        #[command(flatten)]
        run: RunArgs,
        /// Use a single all-true mask instead of ridge masks.
        #[arg(long)]
        all_pass: bool,
    },
}

#[derive(Debug, Args)]
struct Overrides {
    /// Number of components to estimate.
    #[arg(short = 'K', long)]
    components: Option<usize>,
    /// Window time spread L in samples.
    #[arg(short = 'L', long)]
    window_spread: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// fri | fri-tls | fri-sst
    #[arg(long)]
    method: Option<Method>,
    /// SNR in dB; `inf` for a noiseless signal.
    #[arg(long, default_value = "inf", allow_hyphen_values = true)]
    snr: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Signal file (.csv with real,imag columns or mono .wav) instead of the synthetic mixture.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Methods to compare; all three by default.
    #[arg(long, value_delimiter = ',', alias = "method")]
    methods: Vec<Method>,
    /// SNR values in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Vec<f64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Base seed; realization r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    overrides: Overrides,
}

fn load_config(path: Option<&PathBuf>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut config = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(k) = overrides.components {
        config.estimator.components = k;
    }
    if let Some(l) = overrides.window_spread {
        config.analysis.window_spread = l;
    }
    if let Some(out) = &overrides.out {
        config.output.dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run_options(config: &ExperimentConfig, args: &RunArgs) -> RunOptions {
    let mut opts = RunOptions::from_config(config);
    if let Some(m) = args.method {
        opts.method = m;
    }
    opts.snr_db = args.snr;
    if let Some(s) = args.seed {
        opts.seed = s;
    }
    if args.input.is_some() {
        opts.input = args.input.clone();
    }
    opts
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.2}")
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => {
            let config = load_config(cli.config.as_ref(), &args.overrides)?;
            let opts = run_options(&config, &args);
            for path in cmd_generate(&config, &opts)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Estimate { run, debug_dump } => {
            let config = load_config(cli.config.as_ref(), &run.overrides)?;
            let mut opts = run_options(&config, &run);
            opts.debug_dump = debug_dump;
            let out = cmd_estimate(&config, &opts)?;
            let traj = &out.estimate.trajectories;
            println!(
                "{}: {} tracks over {} frames, {} degenerate",
                opts.method,
                traj.n_components(),
                traj.n_frames(),
                traj.degenerate_frames()
            );
            if let Some(m) = &out.metrics {
                println!("rmse {:.6}  rmae {:.6}", m.rmse, m.rmae);
            }
            for path in &out.written {
                println!("wrote {}", path.display());
            }
        }
        Command::Bench(args) => {
            let mut config = load_config(cli.config.as_ref(), &args.overrides)?;
            if !args.snr.is_empty() {
                config.sweep.snr_db = args.snr.clone();
            }
            if let Some(r) = args.realizations {
                config.sweep.realizations = r;
            }
            if let Some(s) = args.seed {
                config.sweep.seed = s;
            }
            config.validate()?;
            let methods = if args.methods.is_empty() {
                Method::ALL.to_vec()
            } else {
                args.methods.clone()
            };
            let out_dir = config.output.dir.clone();
            let rows = cmd_bench(&config, &methods, &out_dir)?;
            println!("{:<8} {:>7} {:>12} {:>12} {:>9}", "method", "snr_db", "rmse", "rmae", "rqf_avg");
            for r in &rows {
                println!(
                    "{:<8} {:>7} {:>12.6} {:>12.6} {:>9}",
                    r.method.as_str(),
                    fmt_db(r.snr_db),
                    r.rmse.mean,
                    r.rmae.mean,
                    fmt_db(r.rqf_average)
                );
            }
            println!("wrote {}", out_dir.display());
        }
        Command::Extract { run, all_pass } => {
            let config = load_config(cli.config.as_ref(), &run.overrides)?;
            let opts = run_options(&config, &run);
            for mode in cmd_extract(&config, &opts, all_pass)? {
                match mode.rqf {
                    Some(q) => println!("wrote {}  rqf {} dB", mode.path.display(), fmt_db(q)),
                    None => println!("wrote {}", mode.path.display()),
                }
            }
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
