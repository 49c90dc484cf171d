//! Geometric propagation, link budgets, clock offsets and thermal noise.
//!
//! Propagation is deterministic: a line-of-sight ray plus one image-source
//! path per reflector, with obstacle screens attenuating any path whose ray
//! they intersect. UWB path loss is evaluated at the center frequency
//! (narrowband approximation over the pulse bandwidth). The same module holds
//! the UHF Friis math used for wireless-power-transfer range analysis.

use crate::error::{Error, Result};
use crate::signal::{
    render_pulses, wrap_cycles, EmissionSchedule, PlacedPulse, PulseKernel, PulseShape, Waveform,
};
use crate::{dbm_to_watt, from_db, watt_to_dbm, BOLTZMANN, SPEED_OF_LIGHT, T0_KELVIN};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// ERP to EIRP correction (half-wave dipole gain), dB.
pub const ERP_TO_EIRP_DB: f64 = 2.15;

/// 3D position, meters.
pub type Position = [f64; 3];

pub fn distance(a: Position, b: Position) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn sub(a: Position, b: Position) -> Position {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Position, b: Position) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: Position) -> f64 {
    dot(a, a).sqrt()
}

/// Deterministic multipath element.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Reflector {
    /// Infinite plane; specular image-source reflection.
    Plane {
        point: Position,
        normal: Position,
        reflection_coefficient: f64,
    },
    /// Point scatterer re-radiating along tx -> point -> rx.
    Point {
        position: Position,
        reflection_coefficient: f64,
    },
}

/// Attenuating screen intersected by a propagation ray.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Obstacle {
    /// Vertical screen over an XY segment (infinite in z).
    Screen {
        a: [f64; 2],
        b: [f64; 2],
        attenuation_db: f64,
    },
    /// Circular disk in 3D.
    Disk {
        center: Position,
        normal: Position,
        radius: f64,
        attenuation_db: f64,
    },
}

/// Scene geometry: receiving anchors, the reference transmitter, UHF power
/// showers and deterministic multipath elements.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Geometry {
    /// Receiving reference nodes (RX1 first).
    pub anchors: Vec<Position>,
    /// Reference UWB transmitter (TX1), known position.
    pub ref_tx: Position,
    /// UHF power-transfer units.
    #[serde(default)]
    pub showers: Vec<Position>,
    #[serde(default)]
    pub reflectors: Vec<Reflector>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    /// Optional per-anchor boresight directions for the receive pattern.
    #[serde(default)]
    pub anchor_boresights: Vec<Position>,
    /// Cosine-power receive pattern exponent; 0 = isotropic.
    #[serde(default)]
    pub pattern_exponent: f64,
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if self.anchors.len() < 3 {
            return Err(Error::parameter(format!(
                "at least 3 receiving anchors required, got {}",
                self.anchors.len()
            )));
        }
        if !self.anchor_boresights.is_empty() && self.anchor_boresights.len() != self.anchors.len()
        {
            return Err(Error::parameter(
                "anchor_boresights must be empty or match the anchor count",
            ));
        }
        Ok(())
    }

    /// Receive pattern gain (linear power) for anchor `rx_index` seeing an
    /// arrival along `incoming` (pointing toward the anchor).
    pub fn pattern_gain(&self, rx_index: Option<usize>, incoming: Position) -> f64 {
        let (Some(idx), true) = (rx_index, self.pattern_exponent > 0.0) else {
            return 1.0;
        };
        let Some(&bore) = self.anchor_boresights.get(idx) else {
            return 1.0;
        };
        let nb = norm(bore);
        let ni = norm(incoming);
        if nb == 0.0 || ni == 0.0 {
            return 1.0;
        }
        // Boresight points outward from the anchor; the arrival direction is
        // the reverse of the incoming ray.
        let c = (-dot(bore, incoming) / (nb * ni)).max(0.0);
        c.powf(self.pattern_exponent)
    }
}

/// Per-receiver clock offsets relative to RX1 (whose offset is 0).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClockModel {
    pub offsets: Vec<f64>,
}

impl ClockModel {
    pub fn zero(n_rx: usize) -> Self {
        ClockModel {
            offsets: vec![0.0; n_rx],
        }
    }

    pub fn offset(&self, rx: usize) -> f64 {
        self.offsets.get(rx).copied().unwrap_or(0.0)
    }

    pub fn validate(&self, recording_window: f64) -> Result<()> {
        if self.offsets.first().map(|&o| o != 0.0).unwrap_or(false) {
            return Err(Error::parameter("offset of RX1 must be 0"));
        }
        for (k, &o) in self.offsets.iter().enumerate() {
            if o.abs() >= recording_window / 4.0 {
                return Err(Error::parameter(format!(
                    "clock offset of RX{} ({:.3e} s) must be < T_r/4",
                    k + 1,
                    o
                )));
            }
        }
        Ok(())
    }
}

/// RF parameters of one link (UHF power link or UWB signalling link).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RfLinkParams {
    /// Effective radiated power (dipole-referenced), W.
    pub erp_w: f64,
    /// Carrier / center frequency, Hz.
    pub carrier_hz: f64,
    /// Receive antenna gain, dBi.
    pub rx_antenna_gain_dbi: f64,
    /// Receiver noise figure, dB.
    pub noise_figure_db: f64,
    /// UWB transmit PSD, dBm/MHz (signalling link only).
    pub uwb_tx_psd_dbm_mhz: f64,
    /// UWB signal bandwidth, Hz (signalling link only).
    pub uwb_bandwidth_hz: f64,
}

impl RfLinkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.erp_w > 0.0) {
            return Err(Error::parameter("erp_w must be positive"));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::parameter("carrier_hz must be positive"));
        }
        if self.noise_figure_db < 0.0 {
            return Err(Error::parameter("noise_figure_db must be >= 0"));
        }
        Ok(())
    }

    /// Effective isotropic radiated power, dBm.
    pub fn eirp_dbm(&self) -> f64 {
        watt_to_dbm(self.erp_w) + ERP_TO_EIRP_DB
    }

    /// Noise power spectral density kT0 * F, W/Hz.
    pub fn noise_psd(&self) -> f64 {
        BOLTZMANN * T0_KELVIN * from_db(self.noise_figure_db)
    }
}

/// Free-space path loss, dB.
pub fn fspl(distance_m: f64, frequency_hz: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::parameter("distance must be positive"));
    }
    if !(frequency_hz > 0.0) {
        return Err(Error::parameter("frequency must be positive"));
    }
    let lambda = SPEED_OF_LIGHT / frequency_hz;
    Ok(20.0 * (4.0 * PI * distance_m / lambda).log10())
}

/// Received power over a Friis link, dBm.
pub fn friis_rx_power(link: &RfLinkParams, distance_m: f64) -> Result<f64> {
    Ok(link.eirp_dbm() + link.rx_antenna_gain_dbi - fspl(distance_m, link.carrier_hz)?)
}

/// Total UWB transmit power from the regulatory PSD, dBm.
pub fn uwb_total_tx_power_dbm(link: &RfLinkParams) -> f64 {
    link.uwb_tx_psd_dbm_mhz + 10.0 * (link.uwb_bandwidth_hz / 1e6).log10()
}

/// Receiver noise floor over the UWB bandwidth, dBm.
pub fn uwb_noise_floor_dbm(link: &RfLinkParams) -> f64 {
    watt_to_dbm(BOLTZMANN * T0_KELVIN) + link.noise_figure_db
        + 10.0 * link.uwb_bandwidth_hz.log10()
}

/// Per-pulse received SNR (power over the UWB band) at a reference node, dB.
pub fn uwb_link_snr(link: &RfLinkParams, distance_m: f64) -> Result<f64> {
    let rx_power = uwb_total_tx_power_dbm(link) + link.rx_antenna_gain_dbi
        - fspl(distance_m, link.carrier_hz)?;
    Ok(rx_power - uwb_noise_floor_dbm(link))
}

/// Average transmitted pulse energy implied by the regulatory PSD when
/// pulses repeat every `prp` seconds, J.
pub fn uwb_pulse_energy(link: &RfLinkParams, prp: f64) -> f64 {
    dbm_to_watt(uwb_total_tx_power_dbm(link)) * prp
}

/// One resolved propagation path.
#[derive(Debug, Clone, Copy)]
pub struct PropagationPath {
    /// Total propagation delay, s.
    pub delay: f64,
    /// Linear amplitude factor applied to a unit-energy pulse.
    pub amplitude: f64,
}

/// Enumerate LOS and reflector paths from `tx` to `rx` with link-budget
/// amplitudes (sqrt of path gain) and obstacle attenuation.
pub fn trace_paths(
    tx: Position,
    rx: Position,
    rx_index: Option<usize>,
    geometry: &Geometry,
    link: &RfLinkParams,
) -> Result<Vec<PropagationPath>> {
    let d_los = distance(tx, rx);
    if d_los == 0.0 {
        return Err(Error::parameter("zero-length propagation path"));
    }
    let lambda = SPEED_OF_LIGHT / link.carrier_hz;
    let rx_gain = from_db(link.rx_antenna_gain_dbi);
    let spread = |d: f64| (lambda / (4.0 * PI * d)).powi(2);

    let mut paths = Vec::new();

    // Line of sight.
    let mut amp = (rx_gain * spread(d_los) * geometry.pattern_gain(rx_index, sub(rx, tx))).sqrt();
    amp *= obstacle_factor(tx, rx, geometry);
    paths.push(PropagationPath {
        delay: d_los / SPEED_OF_LIGHT,
        amplitude: amp,
    });

    for reflector in &geometry.reflectors {
        match *reflector {
            Reflector::Plane {
                point,
                normal,
                reflection_coefficient,
            } => {
                if reflection_coefficient == 0.0 {
                    continue;
                }
                let n_len = norm(normal);
                if n_len == 0.0 {
                    continue;
                }
                let n = [normal[0] / n_len, normal[1] / n_len, normal[2] / n_len];
                let h_tx = dot(sub(tx, point), n);
                let h_rx = dot(sub(rx, point), n);
                // Specular reflection needs both endpoints on one side.
                if h_tx * h_rx <= 0.0 {
                    continue;
                }
                let image = [
                    tx[0] - 2.0 * h_tx * n[0],
                    tx[1] - 2.0 * h_tx * n[1],
                    tx[2] - 2.0 * h_tx * n[2],
                ];
                let d = distance(image, rx);
                if d == 0.0 {
                    continue;
                }
                // Reflection point: where the image->rx segment crosses the plane.
                let denom = dot(sub(rx, image), n);
                if denom.abs() < 1e-12 {
                    continue;
                }
                let s = dot(sub(point, image), n) / denom;
                if !(0.0..=1.0).contains(&s) {
                    continue;
                }
                let rp = [
                    image[0] + s * (rx[0] - image[0]),
                    image[1] + s * (rx[1] - image[1]),
                    image[2] + s * (rx[2] - image[2]),
                ];
                let mut amp = reflection_coefficient
                    * (rx_gain * spread(d) * geometry.pattern_gain(rx_index, sub(rx, rp))).sqrt();
                amp *= obstacle_factor(tx, rp, geometry);
                amp *= obstacle_factor(rp, rx, geometry);
                paths.push(PropagationPath {
                    delay: d / SPEED_OF_LIGHT,
                    amplitude: amp,
                });
            }
            Reflector::Point {
                position,
                reflection_coefficient,
            } => {
                if reflection_coefficient == 0.0 {
                    continue;
                }
                let d1 = distance(tx, position);
                let d2 = distance(position, rx);
                if d1 == 0.0 || d2 == 0.0 {
                    continue;
                }
                let d = d1 + d2;
                let mut amp = reflection_coefficient
                    * (rx_gain * spread(d) * geometry.pattern_gain(rx_index, sub(rx, position)))
                        .sqrt();
                amp *= obstacle_factor(tx, position, geometry);
                amp *= obstacle_factor(position, rx, geometry);
                paths.push(PropagationPath {
                    delay: d / SPEED_OF_LIGHT,
                    amplitude: amp,
                });
            }
        }
    }
    Ok(paths)
}

/// Linear amplitude factor from obstacles crossing segment a -> b.
fn obstacle_factor(a: Position, b: Position, geometry: &Geometry) -> f64 {
    let mut factor = 1.0;
    for obstacle in &geometry.obstacles {
        let (blocked, att) = match *obstacle {
            Obstacle::Screen {
                a: s0,
                b: s1,
                attenuation_db,
            } => (
                segments_cross_xy([a[0], a[1]], [b[0], b[1]], s0, s1),
                attenuation_db,
            ),
            Obstacle::Disk {
                center,
                normal,
                radius,
                attenuation_db,
            } => (ray_hits_disk(a, b, center, normal, radius), attenuation_db),
        };
        if blocked {
            factor *= from_db(-att).sqrt();
        }
    }
    factor
}

fn segments_cross_xy(p0: [f64; 2], p1: [f64; 2], q0: [f64; 2], q1: [f64; 2]) -> bool {
    let d = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let d1 = d(q0, q1, p0);
    let d2 = d(q0, q1, p1);
    let d3 = d(p0, p1, q0);
    let d4 = d(p0, p1, q1);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

fn ray_hits_disk(
    a: Position,
    b: Position,
    center: Position,
    normal: Position,
    radius: f64,
) -> bool {
    let n_len = norm(normal);
    if n_len == 0.0 {
        return false;
    }
    let n = [normal[0] / n_len, normal[1] / n_len, normal[2] / n_len];
    let dir = sub(b, a);
    let denom = dot(dir, n);
    if denom.abs() < 1e-12 {
        return false;
    }
    let t = dot(sub(center, a), n) / denom;
    if !(0.0..=1.0).contains(&t) {
        return false;
    }
    let hit = [a[0] + t * dir[0], a[1] + t * dir[1], a[2] + t * dir[2]];
    distance(hit, center) <= radius
}

/// Transmission timing and energy of one burst.
#[derive(Debug, Clone, Copy)]
pub struct Transmission {
    /// Burst start instant on the global timeline, s.
    pub start_time: f64,
    /// Transmitted energy per pulse, J.
    pub energy_per_pulse: f64,
}

/// Propagate a burst from `tx` to `rx` into the receiver's local-time window.
///
/// Each pulse copy arrives at `start_time + t_i + path_delay + clock_offset`
/// in local time and carries the carrier phase of its total physical delay;
/// the receiver's clock offset shifts the recording but not the
/// downconversion phase.
#[allow(clippy::too_many_arguments)]
pub fn propagate(
    schedule: &EmissionSchedule,
    shape: &PulseShape,
    tx: Position,
    rx: Position,
    rx_index: Option<usize>,
    geometry: &Geometry,
    link: &RfLinkParams,
    tx_cfg: &Transmission,
    clock_offset: f64,
    sample_rate: f64,
    window: (f64, f64),
) -> Result<Waveform> {
    let (t_start, t_end) = window;
    if !(t_end > t_start) {
        return Err(Error::parameter("window must have positive length"));
    }
    let paths = trace_paths(tx, rx, rx_index, geometry, link)?;
    let kernel = PulseKernel::new(shape, sample_rate)?;
    let n_samples = ((t_end - t_start) * sample_rate).round() as usize;
    let fc = shape.center_frequency;
    let scale = tx_cfg.energy_per_pulse.sqrt();

    let mut placed = Vec::with_capacity(schedule.len() * paths.len());
    for (&t_i, &pol) in schedule.times.iter().zip(schedule.polarities.iter()) {
        let t_emit = tx_cfg.start_time + t_i;
        for path in &paths {
            if path.amplitude == 0.0 {
                continue;
            }
            let t_phys = t_emit + path.delay;
            let t_local = t_phys + clock_offset;
            if t_local < t_start || t_local > t_end {
                continue;
            }
            placed.push(PlacedPulse {
                time: t_local,
                amplitude: Complex64::from_polar(
                    pol as f64 * scale * path.amplitude,
                    -2.0 * PI * wrap_cycles(fc * t_phys),
                ),
            });
        }
    }
    let samples = render_pulses(&placed, &kernel, sample_rate, t_start, n_samples);
    Ok(Waveform {
        sample_rate,
        t0: t_start,
        samples,
    })
}

/// Add circularly-symmetric complex Gaussian thermal noise with PSD
/// `kT0 * 10^(NF/10)` over the simulated bandwidth. Deterministic per seed.
pub fn add_noise(w: &Waveform, noise_figure_db: f64, seed: u64) -> Waveform {
    let n0 = BOLTZMANN * T0_KELVIN * from_db(noise_figure_db);
    add_noise_psd(w, n0, seed)
}

/// Same as [`add_noise`] but with the noise PSD given directly, W/Hz.
pub fn add_noise_psd(w: &Waveform, noise_psd: f64, seed: u64) -> Waveform {
    let sigma = (noise_psd * w.sample_rate / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = w.clone();
    for s in out.samples.iter_mut() {
        let re: f64 = normal.sample(&mut rng);
        let im: f64 = normal.sample(&mut rng);
        *s += Complex64::new(re * sigma, im * sigma);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{draw_emission_schedule, make_pulse_shape, Modulation, PulseTrainSpec};

    fn uhf_link() -> RfLinkParams {
        RfLinkParams {
            erp_w: 2.0,
            carrier_hz: 868e6,
            rx_antenna_gain_dbi: 1.8,
            noise_figure_db: 0.0,
            uwb_tx_psd_dbm_mhz: 0.0,
            uwb_bandwidth_hz: 1.0,
        }
    }

    fn uwb_link() -> RfLinkParams {
        RfLinkParams {
            erp_w: 1.0,
            carrier_hz: 4e9,
            rx_antenna_gain_dbi: 5.0,
            noise_figure_db: 2.0,
            uwb_tx_psd_dbm_mhz: -50.0,
            uwb_bandwidth_hz: 1.4e9,
        }
    }

    fn bare_geometry(anchors: Vec<Position>) -> Geometry {
        Geometry {
            anchors,
            ref_tx: [0.0, 0.0, 0.0],
            showers: vec![],
            reflectors: vec![],
            obstacles: vec![],
            anchor_boresights: vec![],
            pattern_exponent: 0.0,
        }
    }

    #[test]
    fn fspl_reference_values() {
        assert!((fspl(10.0, 868e6).unwrap() - 51.2).abs() < 0.1);
        let lambda = SPEED_OF_LIGHT / 868e6;
        assert!(fspl(lambda / (4.0 * PI), 868e6).unwrap().abs() < 1e-9);
        let d6 = fspl(20.0, 868e6).unwrap() - fspl(10.0, 868e6).unwrap();
        assert!((d6 - 6.02).abs() < 0.01);
        assert!(fspl(0.0, 868e6).is_err());
        assert!(fspl(-1.0, 868e6).is_err());
    }

    #[test]
    fn fspl_distance_frequency_reciprocity() {
        for k in [0.1, 0.5, 2.0, 13.0] {
            let a = fspl(7.3, 1.2e9).unwrap();
            let b = fspl(7.3 * k, 1.2e9 / k).unwrap();
            assert!((a - b).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn friis_matches_activation_thresholds() {
        let link = uhf_link();
        assert!((friis_rx_power(&link, 8.66).unwrap() - -13.0).abs() < 0.2);
        assert!((friis_rx_power(&link, 12.24).unwrap() - -16.0).abs() < 0.2);
        let drop = friis_rx_power(&link, 10.0).unwrap() - friis_rx_power(&link, 5.0).unwrap();
        assert!((drop - -6.02).abs() < 0.01);
    }

    #[test]
    fn uwb_budget_reference_values() {
        let link = uwb_link();
        assert!((uwb_total_tx_power_dbm(&link) - -18.54).abs() < 0.05);
        assert!((uwb_noise_floor_dbm(&link) - -80.5).abs() < 0.1);
        let snr_drop = uwb_link_snr(&link, 20.0).unwrap() - uwb_link_snr(&link, 10.0).unwrap();
        assert!((snr_drop - -6.02).abs() < 0.01);
    }

    fn single_pulse_schedule(shape: &PulseShape) -> EmissionSchedule {
        EmissionSchedule::new(vec![0.0], vec![1], shape.duration).unwrap()
    }

    /// Log-parabolic refinement of the waveform envelope peak.
    fn envelope_peak_time(w: &Waveform) -> f64 {
        let (k, _) = w
            .samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap();
        let y0 = w.samples[k - 1].norm().ln();
        let y1 = w.samples[k].norm().ln();
        let y2 = w.samples[k + 1].norm().ln();
        let denom = y0 - 2.0 * y1 + y2;
        let delta = if denom.abs() > 1e-300 {
            0.5 * (y0 - y2) / denom
        } else {
            0.0
        };
        w.sample_time(k) + delta / w.sample_rate
    }

    #[test]
    fn propagate_los_delay_3m() {
        let shape = make_pulse_shape(4e9, 1.4e9).unwrap();
        let sched = single_pulse_schedule(&shape);
        let geometry = bare_geometry(vec![[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [3.0, 3.0, 0.0]]);
        let tx_cfg = Transmission {
            start_time: 0.0,
            energy_per_pulse: 1e-12,
        };
        let w = propagate(
            &sched,
            &shape,
            [0.0, 0.0, 0.0],
            [3.0, 0.0, 0.0],
            Some(0),
            &geometry,
            &uwb_link(),
            &tx_cfg,
            0.0,
            4e9,
            (0.0, 40e-9),
        )
        .unwrap();
        let t_peak = envelope_peak_time(&w);
        let expect = 3.0 / SPEED_OF_LIGHT;
        assert!(
            (t_peak - expect).abs() < 1e-12,
            "peak at {:.4} ns, expected {:.4} ns",
            t_peak * 1e9,
            expect * 1e9
        );
    }

    #[test]
    fn propagate_clock_offset_shifts_content() {
        let shape = make_pulse_shape(4e9, 1.4e9).unwrap();
        let sched = single_pulse_schedule(&shape);
        let geometry = bare_geometry(vec![[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [3.0, 3.0, 0.0]]);
        let tx_cfg = Transmission {
            start_time: 0.0,
            energy_per_pulse: 1e-12,
        };
        let run = |offset: f64, window: (f64, f64)| {
            propagate(
                &sched,
                &shape,
                [0.0, 0.0, 0.0],
                [3.0, 0.0, 0.0],
                Some(0),
                &geometry,
                &uwb_link(),
                &tx_cfg,
                offset,
                4e9,
                window,
            )
            .unwrap()
        };
        let w0 = run(0.0, (0.0, 100e-9));
        let w1 = run(2e-6, (0.0, 2.1e-6));
        // +2 us = exactly 8000 samples at 4 GS/s.
        let shift = 8000;
        let peak = w0.samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
        for k in 0..w0.len() {
            let a = w0.samples[k];
            let b = w1.samples[k + shift];
            assert!((a - b).norm() < 1e-9 * peak, "sample {k} differs");
        }
    }

    #[test]
    fn propagate_zero_coefficient_reflector_is_los() {
        let shape = make_pulse_shape(4e9, 1.4e9).unwrap();
        let sched = single_pulse_schedule(&shape);
        let mut geometry = bare_geometry(vec![[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [3.0, 3.0, 0.0]]);
        let tx_cfg = Transmission {
            start_time: 0.0,
            energy_per_pulse: 1e-12,
        };
        let run = |g: &Geometry| {
            propagate(
                &sched,
                &shape,
                [0.0, 0.0, 0.0],
                [3.0, 0.0, 0.0],
                Some(0),
                g,
                &uwb_link(),
                &tx_cfg,
                0.0,
                4e9,
                (0.0, 60e-9),
            )
            .unwrap()
        };
        let w_los = run(&geometry);
        geometry.reflectors.push(Reflector::Plane {
            point: [0.0, 5.0, 0.0],
            normal: [0.0, 1.0, 0.0],
            reflection_coefficient: 0.0,
        });
        let w_refl = run(&geometry);
        assert_eq!(w_los.samples, w_refl.samples);
    }

    #[test]
    fn propagate_reflector_adds_delayed_copy() {
        let shape = make_pulse_shape(4e9, 1.4e9).unwrap();
        let sched = single_pulse_schedule(&shape);
        let mut geometry = bare_geometry(vec![[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [3.0, 3.0, 0.0]]);
        geometry.reflectors.push(Reflector::Plane {
            point: [0.0, 2.0, 0.0],
            normal: [0.0, -1.0, 0.0],
            reflection_coefficient: 0.8,
        });
        let tx_cfg = Transmission {
            start_time: 0.0,
            energy_per_pulse: 1e-12,
        };
        let w = propagate(
            &sched,
            &shape,
            [0.0, 0.0, 0.0],
            [3.0, 0.0, 0.0],
            Some(0),
            &geometry,
            &uwb_link(),
            &tx_cfg,
            0.0,
            4e9,
            (0.0, 60e-9),
        )
        .unwrap();
        // Image of tx over the y=2 plane sits at (0, 4, 0); path length 5 m.
        let expect = 5.0 / SPEED_OF_LIGHT;
        let k0 = (expect * 4e9) as usize;
        let region: f64 = w.samples[k0 - 2..k0 + 3].iter().map(|s| s.norm()).sum();
        assert!(
            region > 0.0,
            "no reflected energy near {:.2} ns",
            expect * 1e9
        );
    }

    #[test]
    fn propagate_obstacle_attenuates() {
        let shape = make_pulse_shape(4e9, 1.4e9).unwrap();
        let sched = single_pulse_schedule(&shape);
        let mut geometry = bare_geometry(vec![[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [3.0, 3.0, 0.0]]);
        let tx_cfg = Transmission {
            start_time: 0.0,
            energy_per_pulse: 1e-12,
        };
        let run = |g: &Geometry| {
            propagate(
                &sched,
                &shape,
                [0.0, 0.0, 0.0],
                [3.0, 0.0, 0.0],
                Some(0),
                g,
                &uwb_link(),
                &tx_cfg,
                0.0,
                4e9,
                (0.0, 60e-9),
            )
            .unwrap()
        };
        let clear = run(&geometry).energy();
        geometry.obstacles.push(Obstacle::Screen {
            a: [1.5, -1.0],
            b: [1.5, 1.0],
            attenuation_db: 15.0,
        });
        let blocked = run(&geometry).energy();
        let ratio_db = 10.0 * (clear / blocked).log10();
        assert!((ratio_db - 15.0).abs() < 0.01, "attenuation {ratio_db:.2} dB");
    }

    #[test]
    fn noise_variance_matches_psd() {
        let w = Waveform::zeros(4e9, 0.0, 1_000_000);
        let noisy = add_noise(&w, 2.0, 99);
        let var: f64 =
            noisy.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / noisy.len() as f64;
        let n0 = BOLTZMANN * T0_KELVIN * from_db(2.0);
        let expect = n0 * 4e9;
        assert!(
            (var - expect).abs() / expect < 0.02,
            "var = {var:.3e}, expected {expect:.3e}"
        );
    }

    #[test]
    fn noise_deterministic_and_scales() {
        let w = Waveform::zeros(1e9, 0.0, 100_000);
        let a = add_noise(&w, 2.0, 7);
        let b = add_noise(&w, 2.0, 7);
        assert_eq!(a.samples, b.samples);
        let c = add_noise(&w, 5.01, 7);
        let pa: f64 = a.samples.iter().map(|s| s.norm_sqr()).sum();
        let pc: f64 = c.samples.iter().map(|s| s.norm_sqr()).sum();
        assert!((pc / pa - 2.0).abs() < 0.04, "power ratio {}", pc / pa);
    }

    #[test]
    fn propagate_rejects_zero_length_path() {
        let shape = make_pulse_shape(4e9, 1.4e9).unwrap();
        let sched = single_pulse_schedule(&shape);
        let geometry = bare_geometry(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let tx_cfg = Transmission {
            start_time: 0.0,
            energy_per_pulse: 1e-12,
        };
        let r = propagate(
            &sched,
            &shape,
            [0.0; 3],
            [0.0; 3],
            None,
            &geometry,
            &uwb_link(),
            &tx_cfg,
            0.0,
            4e9,
            (0.0, 10e-9),
        );
        assert!(r.is_err());
    }

    #[test]
    fn burst_energy_follows_link_budget() {
        let shape = make_pulse_shape(4e9, 1.4e9).unwrap();
        let spec = PulseTrainSpec {
            shape: shape.clone(),
            prp: 6.25e-9,
            jitter_sigma: 200e-12,
            n_pulses: 50,
            modulation: Modulation::Jittered,
            energy_per_pulse: 8.75e-14,
        };
        let sched = draw_emission_schedule(&spec, 3).unwrap();
        let geometry = bare_geometry(vec![[5.0, 0.0, 0.0], [0.0, 5.0, 0.0], [5.0, 5.0, 0.0]]);
        let link = uwb_link();
        let tx_cfg = Transmission {
            start_time: 50e-9,
            energy_per_pulse: spec.energy_per_pulse,
        };
        let w = propagate(
            &sched,
            &shape,
            [0.0; 3],
            [5.0, 0.0, 0.0],
            Some(0),
            &geometry,
            &link,
            &tx_cfg,
            0.0,
            4e9,
            (0.0, 500e-9),
        )
        .unwrap();
        let lambda = SPEED_OF_LIGHT / 4e9;
        let gain = from_db(5.0) * (lambda / (4.0 * PI * 5.0)).powi(2);
        let expect = 50.0 * spec.energy_per_pulse * gain;
        assert!(
            (w.energy() - expect).abs() / expect < 0.02,
            "energy {:.3e} vs {:.3e}",
            w.energy(),
            expect
        );
    }
}
