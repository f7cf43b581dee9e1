use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use doamp::channel::SpectrumShape;
use doamp::harness::config::{resolve_output_dir, ChannelChoice, ExperimentConfig, OUTPUT_ROOT_ENV};
use doamp::harness::experiment::run_experiment_to;
use doamp::harness::inspect::{inspect_channel, DEFAULT_KS_SAMPLES};
use doamp::harness::sweep::{consolidated_csv, load_grid, sweep_to};
use doamp::nle::bridge::serve_echo;

/// Random-multiplexing compression over a linear channel, decoded with the
/// Diffusion-OAMP receiver.
///
/// Output files go under `--out` when given, else under `$DOAMP_OUTPUT_ROOT`.
/// Without either, only the summary is printed.
#[derive(Parser, Debug)]
#[command(name = "doamp", version, about)]
struct Cli {
    /// Verbosity (-v, -vv, -vvv)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment config (flat key = value or JSON)
    Run {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a grid file and print the consolidated CSV
    Sweep {
        grid: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Emit the singular spectrum and Rayleigh-fit statistics of a channel
    InspectChannel {
        #[arg(long, value_enum, default_value_t = Kind::Fading)]
        kind: Kind,
        #[arg(long, default_value_t = 256)]
        dim: usize,
        #[arg(long, default_value_t = 10.0)]
        kappa: f64,
        #[arg(long, value_enum, default_value_t = Shape::Geometric)]
        spectrum: Shape,
        #[arg(long, default_value_t = 4)]
        taps: usize,
        #[arg(long, default_value_t = 1.0)]
        decay: f64,
        /// Normalized Doppler f_D·T
        #[arg(long, default_value_t = 0.01)]
        doppler: f64,
        #[arg(long, default_value_t = 8)]
        symbols: usize,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Tap amplitudes drawn for the KS test
        #[arg(long, default_value_t = DEFAULT_KS_SAMPLES)]
        samples: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Serve the denoiser bridge protocol on stdin/stdout, echoing payloads
    BridgeEcho,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Kind {
    Identity,
    Conditioned,
    Fading,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Shape {
    Linear,
    Geometric,
}

fn out_dir(explicit: Option<PathBuf>, fallback: &str) -> Option<PathBuf> {
    explicit.or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(|r| PathBuf::from(r).join(fallback)))
}

fn run(config: &Path, out: Option<PathBuf>) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    let dir = out.or_else(|| resolve_output_dir(&cfg));
    let report = run_experiment_to(&cfg, dir.as_deref())?;
    print!("{}", report.summary_csv());
    log::info!("{} trials in {:.2}s", report.trials.len(), report.wall_time_s);
    if report.failures() == report.trials.len() {
        bail!("every trial failed: {}", report.trials[0].error.as_deref().unwrap_or("?"));
    }
    Ok(())
}

fn sweep(grid: &Path, out: Option<PathBuf>) -> anyhow::Result<()> {
    let cfgs = load_grid(grid).with_context(|| format!("loading {}", grid.display()))?;
    let stem = grid.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    let dir = out_dir(out, stem);
    let reports = sweep_to(&cfgs, dir.as_deref())?;
    print!("{}", consolidated_csv(&reports));
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Sweep { grid, out } => sweep(&grid, out),
        Command::InspectChannel {
            kind,
            dim,
            kappa,
            spectrum,
            taps,
            decay,
            doppler,
            symbols,
            sigma,
            seed,
            samples,
            out,
        } => {
            let choice = match kind {
                Kind::Identity => ChannelChoice::Identity,
                Kind::Conditioned => ChannelChoice::Conditioned {
                    kappa,
                    spectrum: match spectrum {
                        Shape::Linear => SpectrumShape::Linear,
                        Shape::Geometric => SpectrumShape::Geometric,
                    },
                },
                Kind::Fading => ChannelChoice::Fading {
                    num_taps: taps,
                    decay,
                    doppler_rate: doppler,
                    num_symbols: symbols,
                },
            };
            let spec = choice.to_spec(dim, sigma * sigma, seed);
            let report = inspect_channel(&spec, samples)?;
            print!("{}", report.stats_csv());
            if let Some(dir) = out_dir(out, &format!("channel-{}", choice.label())) {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("spectrum.csv"), report.spectrum_csv())?;
                fs::write(dir.join("stats.csv"), report.stats_csv())?;
                fs::write(dir.join("channel.json"), spec.to_json())?;
            }
            Ok(())
        }
        Command::BridgeEcho => {
            let frames = serve_echo(io::stdin().lock(), io::stdout().lock())?;
            log::info!("served {frames} frames");
            Ok(())
        }
    }
}
