//! Signal-level simulation and estimation for a remote-powered, battery-less
//! UWB indoor positioning system.
//!
//! The library covers the full measurement chain of such a system:
//!
//! - [`signal`] — jittered / periodic / PN-polarity UWB pulse trains at
//!   complex baseband, with sub-sample pulse placement.
//! - [`channel`] — geometric propagation (LOS, image-source reflectors,
//!   attenuating obstacles), receiver clock offsets, thermal noise, and the
//!   UHF Friis link budget used for wireless power transfer.
//! - [`tdoa`] — the double cross-correlation TDOA estimator that cancels
//!   unknown receiver clock offsets, with FFT correlation, sub-sample peak
//!   interpolation and ambiguity diagnostics.
//! - [`locate`] — snapshot nonlinear least squares and a particle-filter
//!   tracker turning TDOA sets into positions.
//! - [`energy`] — the battery-less tag energy model: rectenna RF-to-DC
//!   conversion, charge accumulation, cold-start/sustain wake logic and the
//!   OOK address codec.
//! - [`simkit`] — interrogation-cycle orchestration, Monte-Carlo sweeps and
//!   metrics collection.
//! - [`config`], [`wavefile`], [`cli`] — scenario files, the binary waveform
//!   format and the command-line entry points.
//!
//! Every operation is deterministic given its configuration and seed; see the
//! `examples/` directory for one runnable demo per capability.

pub mod channel;
pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
mod fft;
pub mod locate;
pub mod signal;
pub mod simkit;
pub mod tdoa;
pub mod wavefile;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Reference temperature for noise figure definitions, K.
pub const T0_KELVIN: f64 = 290.0;

/// Convert a linear power ratio to dB.
pub fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Convert dB to a linear power ratio.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Convert power in watts to dBm.
pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * (watt * 1e3).log10()
}

/// Convert dBm to power in watts.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}
