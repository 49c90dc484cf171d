//! TDOA accuracy versus accumulated SNR: a reduced version of the
//! Monte-Carlo sweep that locates the 1 cm-class operating point.
//!
//! Run: cargo run --release --example snr_sweep

use lost_sim::config::presets;
use lost_sim::simkit::{
    group_by_value, sweep, tdoa_rmse, LocalizationMode, SweepOptions, SweepVariable,
};

fn main() -> lost_sim::Result<()> {
    let mut cfg = presets::desk_scale();
    cfg.mode = LocalizationMode::Snapshot;

    // Desk scale stretches time 4x, so the 1 cm distance class corresponds
    // to 4 x 33 ps of TDOA error.
    let target = 4.0 * 33e-12;
    let values: Vec<f64> = (31..=41).step_by(2).map(f64::from).collect();
    let trials = 30;
    println!("accumulated SNR sweep, {trials} trials per point (desk scale):");
    let table = sweep(
        &cfg,
        SweepVariable::AccumulatedSnr,
        &values,
        trials,
        &SweepOptions::default(),
    )?;
    let mut curve = Vec::new();
    for (value, rows) in group_by_value(&table) {
        let rmse = tdoa_rmse(&rows).unwrap_or(f64::NAN);
        println!("  {value:5.1} dB -> rmse {:7.1} ps", rmse * 1e12);
        curve.push((value, rmse));
    }

    // Log-linear interpolation of the target crossing.
    for pair in curve.windows(2) {
        let (s0, r0) = pair[0];
        let (s1, r1) = pair[1];
        if r0 >= target && r1 <= target {
            let f = (r0 / target).ln() / (r0 / r1).ln();
            println!(
                "\nRMSE {:.0} ps ({} cm class) reached near {:.1} dB accumulated SNR",
                target * 1e12,
                1,
                s0 + f * (s1 - s0)
            );
        }
    }
    Ok(())
}
