//! The double cross-correlation TDOA estimator, and why receiver clock
//! offsets cancel: the same scene is re-recorded with different offsets and
//! the estimate stays put at picosecond level.
//!
//! Run: cargo run --release --example double_correlation

use lost_sim::channel::{distance, propagate, ClockModel, Geometry, RfLinkParams, Transmission};
use lost_sim::signal::{draw_emission_schedule, make_pulse_shape, Modulation, PulseTrainSpec, Waveform};
use lost_sim::tdoa::{double_correlation_tdoa, RecordingWindow, SyncGeometry, TdoaConfig};
use lost_sim::SPEED_OF_LIGHT;

fn main() -> lost_sim::Result<()> {
    let rate = 4e9;
    let shape = make_pulse_shape(4e9, 1.4e9)?;
    let spec = PulseTrainSpec {
        shape: shape.clone(),
        prp: 6.25e-9,
        jitter_sigma: 200e-12,
        n_pulses: 512,
        modulation: Modulation::Jittered,
        energy_per_pulse: 8.75e-14,
    };
    let window = RecordingWindow::new(24e-6, 10e-6)?;

    let rx1 = [0.0, 0.0, 0.0];
    let rx2 = [10.0, 0.0, 0.0];
    let ref_tx = [5.0, 1.0, 0.0];
    let tag = [3.0, 5.5, 0.0];
    let geometry = Geometry {
        anchors: vec![rx1, rx2, [5.0, 8.0, 0.0]],
        ref_tx,
        showers: vec![],
        reflectors: vec![],
        obstacles: vec![],
        anchor_boresights: vec![],
        pattern_exponent: 0.0,
    };
    let link = RfLinkParams {
        erp_w: 1.0,
        carrier_hz: 4e9,
        rx_antenna_gain_dbi: 5.0,
        noise_figure_db: 2.0,
        uwb_tx_psd_dbm_mhz: -50.0,
        uwb_bandwidth_hz: 1.4e9,
    };
    let sync = SyncGeometry {
        tp11: distance(ref_tx, rx1) / SPEED_OF_LIGHT,
        tp12: distance(ref_tx, rx2) / SPEED_OF_LIGHT,
    };
    let truth = (distance(tag, rx2) - distance(tag, rx1)) / SPEED_OF_LIGHT;
    println!("geometric TDOA: {:.3} ns", truth * 1e9);

    let burst = spec.burst_duration();
    let t1 = (window.t_w - burst) / 2.0;
    let t2 = window.t_r / 2.0 + (window.t_w - burst) / 2.0;
    let ref_sched = draw_emission_schedule(&spec, 11)?;
    let tag_sched = draw_emission_schedule(&spec, 12)?;

    for clock_offset in [-2e-6, 0.0, 1.5e-6, 3e-6] {
        let clocks = ClockModel {
            offsets: vec![0.0, clock_offset, 0.0],
        };
        let record = |rx_idx: usize| -> lost_sim::Result<Waveform> {
            let rx = geometry.anchors[rx_idx];
            let mut w = propagate(
                &ref_sched,
                &shape,
                ref_tx,
                rx,
                Some(rx_idx),
                &geometry,
                &link,
                &Transmission {
                    start_time: t1,
                    energy_per_pulse: spec.energy_per_pulse,
                },
                clocks.offset(rx_idx),
                rate,
                (0.0, window.t_r),
            )?;
            let tag_wave = propagate(
                &tag_sched,
                &shape,
                tag,
                rx,
                Some(rx_idx),
                &geometry,
                &link,
                &Transmission {
                    start_time: t2,
                    energy_per_pulse: spec.energy_per_pulse,
                },
                clocks.offset(rx_idx),
                rate,
                (0.0, window.t_r),
            )?;
            w.add_assign(&tag_wave)?;
            Ok(w)
        };
        let rec1 = record(0)?;
        let rec2 = record(1)?;
        let n_w = (window.t_w * rate).round() as usize;
        let m = double_correlation_tdoa(
            &rec1.slice(0.0, n_w)?,
            &rec1.slice(window.t_r / 2.0, n_w)?,
            &rec2.slice(0.0, n_w)?,
            &rec2.slice(window.t_r / 2.0, n_w)?,
            &sync,
            &window,
            &TdoaConfig::default(),
            (0, 1),
        )?;
        println!(
            "clock offset {:6.1} us -> tdoa {:.4} ns (error {:6.2} ps, peak quality {:.1} dB)",
            clock_offset * 1e6,
            m.tdoa * 1e9,
            (m.tdoa - truth) * 1e12,
            m.peak_quality
        );
    }
    Ok(())
}
