use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod outputs;

#[derive(Parser)]
#[command(name = "fimlfm", version, about = "FIM-LFM waveform, SAR and link simulation")]
struct Cli {
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the pulse train and a spectrogram of its first pulse.
    Waveform { config: PathBuf },
    /// Ambiguity surface or one of its zero cuts.
    Ambiguity(AmbiguityArgs),
    /// Simulate the raw echo cube of the configured scene.
    SarSim { config: PathBuf },
    /// Focus an echo cube into an image.
    SarFocus(FocusArgs),
    /// Resolution, PSLR and ISLR of every configured target in an image.
    Metrics {
        image: PathBuf,
        /// Config whose scene and geometry locate the targets.
        #[arg(long)]
        targets: PathBuf,
    },
    /// Monte-Carlo bit error rates over an SNR sweep.
    CommBer(BerArgs),
}

#[derive(Args)]
struct AmbiguityArgs {
    config: PathBuf,
    #[arg(long, conflicts_with = "numeric")]
    closed_form: bool,
    /// Sampled evaluation (the default).
    #[arg(long)]
    numeric: bool,
    #[arg(long, value_enum)]
    cut: Option<Cut>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Cut {
    /// Zero-delay cut along Doppler.
    Tau0,
    /// Zero-Doppler cut along delay.
    Xi0,
}

#[derive(Args)]
struct FocusArgs {
    config: PathBuf,
    /// Echo cube written by `sar-sim`; simulated in memory when absent.
    #[arg(long)]
    echo: Option<PathBuf>,
    #[arg(long)]
    skip_qam_removal: bool,
    #[arg(long)]
    skip_compensation: bool,
    #[arg(long)]
    skip_rcmc: bool,
}

#[derive(Args)]
struct BerArgs {
    config: PathBuf,
    /// Comma-separated SNR points in dB; defaults to `comm.snr_db`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<u64>,
    /// Simulate every sample instead of drawing the detection statistics.
    #[arg(long)]
    waveform_level: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Waveform { config } => commands::waveform(&config, cli.out),
        Command::Ambiguity(a) => commands::ambiguity(&a.config, cli.out, a.closed_form, a.cut),
        Command::SarSim { config } => commands::sar_sim(&config, cli.out),
        Command::SarFocus(f) => commands::sar_focus(
            &f.config,
            cli.out,
            f.echo.as_deref(),
            commands::Skips {
                qam_removal: f.skip_qam_removal,
                compensation: f.skip_compensation,
                rcmc: f.skip_rcmc,
            },
        ),
        Command::Metrics { image, targets } => commands::metrics(&image, &targets, cli.out),
        Command::CommBer(b) => commands::comm_ber(&b.config, cli.out, b.snr, b.trials, b.waveform_level),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
