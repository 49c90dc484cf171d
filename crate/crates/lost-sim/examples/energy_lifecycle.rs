//! Battery-less tag lifecycle: cold start under a UHF shower, recharge,
//! addressed wake-up, transmission, sleep.
//!
//! Run: cargo run --release --example energy_lifecycle

use lost_sim::channel::{friis_rx_power, RfLinkParams};
use lost_sim::energy::{
    can_wake, charge, ook_decode, ook_encode, rectifier_output, AddressCodec, RectennaModel,
    TagEnergyState, TagMode,
};

fn main() -> lost_sim::Result<()> {
    let shower = RfLinkParams {
        erp_w: 2.0,
        carrier_hz: 868e6,
        rx_antenna_gain_dbi: 1.8,
        noise_figure_db: 0.0,
        uwb_tx_psd_dbm_mhz: 0.0,
        uwb_bandwidth_hz: 1.0,
    };
    let rectenna = RectennaModel::default();
    let mut tag = TagEnergyState::default();
    let distance = 6.0;
    let p_rf = friis_rx_power(&shower, distance)?;
    let p_dc = rectifier_output(&rectenna, p_rf);
    println!(
        "tag at {distance} m: incident {p_rf:.1} dBm, harvested {:.1} uW (quiescent {:.1} uW)",
        p_dc * 1e6,
        tag.quiescent_power * 1e6
    );

    // Cold start: charge in 10 ms steps until wake-eligible.
    let dt = 10e-3;
    let mut t = 0.0;
    tag.observe_rf(p_rf);
    while !can_wake(&tag, p_rf) && t < 1.0 {
        tag = charge(&tag, p_dc, dt)?;
        t += dt;
    }
    println!(
        "cold start complete after {:.0} ms: stored {:.2} uJ, mode {:?}",
        t * 1e3,
        tag.stored * 1e6,
        tag.mode
    );

    // Addressed interrogation.
    let codec = AddressCodec::default();
    let envelope = ook_encode(0x5A, &codec)?;
    let decoded = ook_decode(&envelope, &codec)?;
    println!(
        "OOK downlink: sent 0x5A, decoded 0x{decoded:02X} ({} chips over {:.1} ms)",
        codec.frame_chips(),
        codec.frame_duration() * 1e3
    );
    if decoded == 0x5A && can_wake(&tag, p_rf) {
        tag.consume_transmission()?;
        println!(
            "transmitted one burst: stored {:.2} uJ, mode {:?}",
            tag.stored * 1e6,
            tag.mode
        );
    }

    // Sustained operation at reduced power.
    let far = 11.0;
    let p_far = friis_rx_power(&shower, far)?;
    println!(
        "moved to {far} m ({p_far:.1} dBm): wake-eligible = {} (sustain threshold {:.0} dBm)",
        can_wake(&tag, p_far),
        tag.threshold_sustain
    );
    assert_eq!(tag.mode, TagMode::Sleep);
    Ok(())
}
