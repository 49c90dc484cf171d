//! End-to-end interrogation cycles in the 10 x 7 m room: charging,
//! addressing, recording, TDOA estimation and particle-filter tracking.
//!
//! Uses the desk-scale preset (4x stretched signal timescales at 1 GS/s) so
//! it runs in seconds; swap in `presets::full_scale()` for the nominal
//! 4 GS/s system.
//!
//! Run: cargo run --release --example full_scenario

use lost_sim::config::presets;
use lost_sim::simkit::{error_cdf, run_scenario, LocalizationMode, NoiseModel};

fn main() -> lost_sim::Result<()> {
    let mut cfg = presets::desk_scale();
    cfg.mode = LocalizationMode::Tracking;
    // Operating point: 37 dB accumulated pulse-energy SNR at the reference
    // anchor (about the threshold for 1 cm-class ranging).
    cfg.noise = NoiseModel::FixedPsd(cfg.psd_for_accumulated_snr(
        37.0,
        cfg.tags[0].position,
        0,
    ));
    cfg.pf.meas_sigma = 0.05;

    let cycles = 30;
    let table = run_scenario(&cfg, cycles)?;
    println!("cycle  detections  error");
    for row in &table.rows {
        match row.error_m {
            Some(e) => println!(
                "{:5}  {:10}  {:7.2} cm",
                row.cycle,
                row.n_detections,
                e * 100.0
            ),
            None => println!("{:5}  {:10}  (no fix)", row.cycle, row.n_detections),
        }
    }
    let cdf = error_cdf(&table);
    println!(
        "\n{} cycles with a fix: median {:.2} cm, p90 {:.2} cm",
        cdf.n_with_estimate,
        cdf.median.unwrap_or(f64::NAN) * 100.0,
        cdf.p90.unwrap_or(f64::NAN) * 100.0
    );
    Ok(())
}
