use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ehrelay_cli::config::{apply_text, ExperimentConfig, Mode};
use ehrelay_cli::experiment::build_matrix;
use ehrelay_cli::{figures, run_experiment, write_csv, CliError, Figure, FigureOptions};

/// Caps the worker pool size.
const WORKERS_ENV: &str = "EHRELAY_WORKERS";

#[derive(Parser)]
#[command(
    name = "ehrelay",
    version,
    about = "Outage experiments for battery-aware relay selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo outage estimate for one point.
    Simulate(Overrides),
    /// Markov-chain outage for one point.
    Analyze {
        #[command(flatten)]
        overrides: Overrides,
        /// Write the joint transition matrix here.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
    },
    /// One row per value of a swept parameter.
    Sweep(Overrides),
    /// Write the CSV curves of a standard figure.
    Figures {
        /// fig2, fig3, fig4 or fig5.
        name: String,
        #[arg(long, default_value = "figures")]
        out_dir: PathBuf,
        #[arg(long)]
        slots: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
}

/// Flags mirror config keys and take precedence over `--config`.
#[derive(Args, Default)]
struct Overrides {
    /// Flat key=value file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bars, csi, benchmark or random.
    #[arg(long)]
    policy: Option<String>,
    /// sim, dtmc-product, dtmc-mc or dtmc-marginal.
    #[arg(long)]
    mode: Option<String>,
    /// Transmit SNR P/N0 in dB.
    #[arg(long)]
    snr_db: Option<String>,
    /// Number of relays.
    #[arg(long)]
    relays: Option<String>,
    /// Intermediate battery levels L.
    #[arg(long)]
    levels: Option<String>,
    /// Battery capacity in units of source power.
    #[arg(long)]
    alpha: Option<String>,
    /// Energy conversion efficiency in [0, 1].
    #[arg(long)]
    kappa: Option<String>,
    /// Target rate R in bit/s/Hz.
    #[arg(long)]
    rate: Option<String>,
    /// Noise power N0.
    #[arg(long)]
    noise: Option<String>,
    /// Mean source-relay gains, one value or one per relay.
    #[arg(long)]
    mean_g: Option<String>,
    /// Mean relay-destination gains, one value or one per relay.
    #[arg(long)]
    mean_h: Option<String>,
    /// Simulated slots, warmup included.
    #[arg(long)]
    slots: Option<String>,
    /// Leading slots excluded from the estimate.
    #[arg(long)]
    warmup: Option<String>,
    /// Base seed.
    #[arg(long)]
    seed: Option<String>,
    /// Samples per state for `dtmc-mc`.
    #[arg(long)]
    samples: Option<String>,
    /// Swept key: snr_db, kappa, alpha, levels, n_relays, rate or policy.
    #[arg(long)]
    axis: Option<String>,
    /// Comma-separated sweep values.
    #[arg(long)]
    values: Option<String>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &String)> {
        [
            ("policy", &self.policy),
            ("mode", &self.mode),
            ("snr_db", &self.snr_db),
            ("n_relays", &self.relays),
            ("levels", &self.levels),
            ("alpha", &self.alpha),
            ("kappa", &self.kappa),
            ("rate", &self.rate),
            ("noise", &self.noise),
            ("mean_g", &self.mean_g),
            ("mean_h", &self.mean_h),
            ("slots", &self.slots),
            ("warmup_slots", &self.warmup),
            ("seed", &self.seed),
            ("mc_samples_per_state", &self.samples),
            ("sweep_axis", &self.axis),
            ("sweep_values", &self.values),
            ("out", &self.out),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
        .collect()
    }

    fn load(&self, base: ExperimentConfig) -> Result<ExperimentConfig, CliError> {
        let mut config = base;
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            apply_text(&mut config, &text)?;
        }
        for (key, value) in self.pairs() {
            config.set(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn emit(config: &ExperimentConfig) -> Result<(), CliError> {
    let rows = run_experiment(config)?;
    match &config.out {
        Some(path) => {
            let io_err = |source| CliError::Io {
                path: path.clone(),
                source,
            };
            let file = fs::File::create(path).map_err(io_err)?;
            write_csv(&rows, BufWriter::new(file)).map_err(io_err)
        }
        None => {
            let stdout = io::stdout();
            write_csv(&rows, stdout.lock()).map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

fn single_point(config: &ExperimentConfig) -> Result<(), CliError> {
    if config.sweep_axis.is_some() {
        return Err(CliError::Incompatible {
            key: "sweep_axis".into(),
            reason: "use the sweep subcommand".into(),
        });
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(o) => {
            let config = o.load(ExperimentConfig {
                mode: Mode::Sim,
                ..ExperimentConfig::default()
            })?;
            single_point(&config)?;
            emit(&config)
        }
        Command::Analyze {
            overrides,
            dump_matrix,
        } => {
            let config = overrides.load(ExperimentConfig {
                mode: Mode::DtmcProduct,
                ..ExperimentConfig::default()
            })?;
            single_point(&config)?;
            if !config.mode.is_analysis() {
                return Err(CliError::Incompatible {
                    key: "mode".into(),
                    reason: "analyze needs a dtmc-* mode".into(),
                });
            }
            if let Some(path) = dump_matrix {
                let matrix = build_matrix(&config, config.seed)?;
                let io_err = |source| CliError::Io {
                    path: path.clone(),
                    source,
                };
                let mut out = BufWriter::new(fs::File::create(&path).map_err(io_err)?);
                matrix
                    .dump(&mut out)
                    .and_then(|_| out.flush())
                    .map_err(io_err)?;
            }
            emit(&config)
        }
        Command::Sweep(o) => {
            let config = o.load(ExperimentConfig::default())?;
            if config.sweep_axis.is_none() {
                return Err(CliError::Invalid {
                    key: "sweep_axis".into(),
                    reason: "sweep needs --axis and --values".into(),
                });
            }
            emit(&config)
        }
        Command::Figures {
            name,
            out_dir,
            slots,
            seed,
            samples,
        } => {
            let figure: Figure = name.parse()?;
            let opts = FigureOptions {
                slots,
                seed,
                mc_samples_per_state: samples,
            };
            for path in figures(figure, &out_dir, &opts)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // fails only if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
