//! Wireless-power-transfer range analysis: activation distances of the
//! off-the-shelf PMU and the ASIC variant over a 2 W-ERP UHF shower.
//!
//! Run: cargo run --release --example link_budget

use lost_sim::channel::{friis_rx_power, uwb_link_snr, RfLinkParams};
use lost_sim::energy::{activation_distance, TagEnergyState};

fn main() -> lost_sim::Result<()> {
    let shower = RfLinkParams {
        erp_w: 2.0,
        carrier_hz: 868e6,
        rx_antenna_gain_dbi: 1.8,
        noise_figure_db: 0.0,
        uwb_tx_psd_dbm_mhz: 0.0,
        uwb_bandwidth_hz: 1.0,
    };

    println!("UHF shower: 2 W ERP at 868 MHz, tag antenna 1.8 dBi");
    println!("received power vs distance:");
    for d in [2.0, 5.0, 8.66, 10.0, 12.24, 22.0] {
        println!("  {d:6.2} m -> {:7.2} dBm", friis_rx_power(&shower, d)?);
    }

    let pmu = TagEnergyState::default();
    let asic = TagEnergyState::asic_preset();
    println!("\nactivation distances:");
    for (label, state) in [("off-the-shelf PMU", &pmu), ("custom ASIC      ", &asic)] {
        let d_cold = activation_distance(&shower, state.threshold_cold)?;
        let d_sustain = activation_distance(&shower, state.threshold_sustain)?;
        println!(
            "  {label}: cold start {:6.2} m ({:.1} dBm), sustain {:6.2} m ({:.1} dBm)",
            d_cold, state.threshold_cold, d_sustain, state.threshold_sustain
        );
    }

    let uwb = RfLinkParams {
        erp_w: 1.0,
        carrier_hz: 4e9,
        rx_antenna_gain_dbi: 5.0,
        noise_figure_db: 2.0,
        uwb_tx_psd_dbm_mhz: -50.0,
        uwb_bandwidth_hz: 1.4e9,
    };
    println!("\nUWB uplink per-pulse SNR over the 1.4 GHz band:");
    for d in [2.0, 5.0, 10.0, 15.0] {
        println!("  {d:6.2} m -> {:6.2} dB", uwb_link_snr(&uwb, d)?);
    }
    Ok(())
}
