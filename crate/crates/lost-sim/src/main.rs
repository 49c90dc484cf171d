use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lost-sim",
    version,
    about = "Signal-level simulator for a battery-less UWB positioning system"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an interrogation scenario and write metrics CSV.
    Simulate {
        /// Scenario file (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Also write the cycle-0 half-window waveforms.
        #[arg(long)]
        dump_waveforms: bool,
    },
    /// Sweep one parameter over a value list with independent trials.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of: snr (accumulated_snr), tw (integration_time), distance,
        /// jitter (jitter_sigma).
        #[arg(long)]
        var: String,
        /// Comma-separated values (SI units; dB for snr).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Vec<f64>,
        /// Trials per value.
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print activation distances for power thresholds over a Friis link.
    LinkBudget {
        /// Transmit ERP, W.
        #[arg(long)]
        erp: f64,
        /// Carrier frequency, Hz.
        #[arg(long)]
        freq: f64,
        /// Receive antenna gain, dBi.
        #[arg(long)]
        gr: f64,
        /// Comma-separated thresholds, dBm.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        thresholds: Vec<f64>,
    },
    /// Estimate a TDOA from four recorded half-window waveform files.
    Tdoa {
        #[arg(long)]
        r11: PathBuf,
        #[arg(long)]
        r12: PathBuf,
        #[arg(long)]
        r21: PathBuf,
        #[arg(long)]
        r22: PathBuf,
        /// Known delay TX1 -> RX1, s.
        #[arg(long, allow_negative_numbers = true)]
        tp11: f64,
        /// Known delay TX1 -> RX2, s.
        #[arg(long, allow_negative_numbers = true)]
        tp12: f64,
    },
}

fn configure_threads() {
    if let Ok(v) = std::env::var("LOST_SIM_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            dump_waveforms,
        } => lost_sim::cli::cmd_simulate(&config, &out, dump_waveforms).map(|metrics| {
            println!("wrote {}", metrics.display());
        }),
        Command::Sweep {
            config,
            var,
            values,
            trials,
            out,
        } => lost_sim::cli::cmd_sweep(&config, &var, &values, trials, &out).map(|summary| {
            println!("wrote {}", summary.display());
        }),
        Command::LinkBudget {
            erp,
            freq,
            gr,
            thresholds,
        } => lost_sim::cli::cmd_link_budget(erp, freq, gr, &thresholds).map(|table| {
            print!("{table}");
        }),
        Command::Tdoa {
            r11,
            r12,
            r21,
            r22,
            tp11,
            tp12,
        } => lost_sim::cli::cmd_tdoa(&r11, &r12, &r21, &r22, tp11, tp12).map(|m| {
            println!(
                "tdoa_s={:e} peak_quality_db={:.2} ambiguity_ratio={:.4}",
                m.tdoa, m.peak_quality, m.ambiguity_ratio
            );
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
