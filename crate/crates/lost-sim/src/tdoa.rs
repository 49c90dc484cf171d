//! Double cross-correlation TDOA estimation.
//!
//! Two receivers record one acquisition window each: the reference
//! transmitter's burst lands in the first half, the tag's burst in the
//! second. Correlating the first halves gives a peak at
//! `tp12 - tp11 + tR` and the second halves a peak at `tp22 - tp21 + tR`;
//! their difference cancels the unknown clock offset `tR` and, with the
//! known reference-path difference added back, yields the tag TDOA
//! `tp22 - tp21`.

use crate::error::{Error, Result};
use crate::fft;
use crate::signal::Waveform;
use num_complex::Complex64;

/// Receiver acquisition timing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordingWindow {
    /// Total acquisition window T_r, s.
    pub t_r: f64,
    /// Correlation integration window T_w (at most T_r/2), s.
    pub t_w: f64,
}

impl RecordingWindow {
    pub fn new(t_r: f64, t_w: f64) -> Result<Self> {
        if !(t_r > 0.0 && t_w > 0.0) {
            return Err(Error::parameter("window durations must be positive"));
        }
        if t_w > t_r / 2.0 + 1e-15 {
            return Err(Error::parameter(format!(
                "t_w {:.3e} s exceeds t_r/2 = {:.3e} s",
                t_w,
                t_r / 2.0
            )));
        }
        Ok(RecordingWindow { t_r, t_w })
    }
}

/// Known propagation delays from the reference transmitter to the receiver
/// pair under correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncGeometry {
    /// TX1 -> RX1 delay, s.
    pub tp11: f64,
    /// TX1 -> RX2 delay, s.
    pub tp12: f64,
}

impl SyncGeometry {
    pub fn validate(&self, window: &RecordingWindow) -> Result<()> {
        if self.tp11 < 0.0 || self.tp12 < 0.0 {
            return Err(Error::parameter("reference delays must be >= 0"));
        }
        if self.tp11 >= window.t_w || self.tp12 >= window.t_w {
            return Err(Error::parameter("reference delays must be < t_w"));
        }
        Ok(())
    }
}

/// Sampled cross-correlation on a symmetric lag grid.
#[derive(Debug, Clone)]
pub struct CorrelationFunction {
    /// Lag step, equal to the waveform sample period, s.
    pub sample_rate: f64,
    /// Values at lags `-(n-1) .. (n-1)` samples; index `k` is lag
    /// `k - (n-1)` samples.
    pub values: Vec<Complex64>,
    /// Number of samples of the correlated windows.
    pub n_window: usize,
}

impl CorrelationFunction {
    /// Lag in seconds for value index `k`.
    pub fn lag(&self, k: usize) -> f64 {
        (k as f64 - (self.n_window as f64 - 1.0)) / self.sample_rate
    }

    /// Index of the zero lag.
    pub fn zero_index(&self) -> usize {
        self.n_window - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One receiver-pair TDOA measurement.
#[derive(Debug, Clone)]
pub struct TdoaMeasurement {
    /// (reference receiver, other receiver) indices.
    pub rx_pair: (usize, usize),
    /// Estimated `tp22 - tp21`, s.
    pub tdoa: f64,
    /// Tag-correlation peak power over the correlation noise floor, dB.
    pub peak_quality: f64,
    /// Largest sidelobe magnitude over main peak magnitude in the tag
    /// correlation.
    pub ambiguity_ratio: f64,
}

/// Estimator configuration.
#[derive(Debug, Clone, Copy)]
pub struct TdoaConfig {
    /// Minimum peak quality for a valid detection, dB.
    pub detection_threshold_db: f64,
    /// Exclusion half-width around the main peak for the ambiguity ratio, s.
    pub ambiguity_exclusion: f64,
    /// Take the earliest local peak above this fraction of the global
    /// maximum instead of the strongest peak. `None` = strongest peak.
    pub first_peak_fraction: Option<f64>,
}

impl Default for TdoaConfig {
    fn default() -> Self {
        TdoaConfig {
            detection_threshold_db: 10.0,
            ambiguity_exclusion: 2e-9,
            first_peak_fraction: None,
        }
    }
}

/// Cross-correlate two equal-rate waveforms:
/// `C[k] = sum_m a[m] * conj(b[m + k])`.
///
/// For `b` a delayed copy of `a`, the peak sits at the (positive) delay.
/// Computed with zero-padded FFTs; equals the direct sum to near machine
/// precision. The shorter input is zero-padded to the longer length.
pub fn cross_correlate(a: &Waveform, b: &Waveform) -> Result<CorrelationFunction> {
    if (a.sample_rate - b.sample_rate).abs() > 1e-6 {
        return Err(Error::parameter("sample rates differ"));
    }
    let n = a.len().max(b.len());
    if n == 0 {
        return Err(Error::parameter("empty waveforms"));
    }
    let padded = (2 * n).next_power_of_two();
    let mut fa = vec![Complex64::new(0.0, 0.0); padded];
    let mut fb = vec![Complex64::new(0.0, 0.0); padded];
    fa[..a.len()].copy_from_slice(&a.samples);
    fb[..b.len()].copy_from_slice(&b.samples);
    fft::forward(&mut fa);
    fft::forward(&mut fb);
    // conj(IDFT(conj(A) .* B))[k] = sum_m a[m] conj(b[m+k]), k circular.
    for (va, vb) in fa.iter_mut().zip(fb.iter()) {
        *va = va.conj() * vb;
    }
    fft::inverse(&mut fa);

    let mut values = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
    // Negative lags -(n-1)..-1 live at circular indices padded-(n-1)..padded-1.
    for k in 0..n - 1 {
        values[k] = fa[padded - (n - 1) + k].conj();
    }
    for k in 0..n {
        values[n - 1 + k] = fa[k].conj();
    }
    Ok(CorrelationFunction {
        sample_rate: a.sample_rate,
        values,
        n_window: n,
    })
}

/// Peak location result.
#[derive(Debug, Clone, Copy)]
pub struct Peak {
    /// Refined delay, s.
    pub delay: f64,
    /// Magnitude at the (discrete) peak.
    pub value: f64,
    /// Second difference of the log-magnitude at the peak (curvature proxy,
    /// negative at a maximum).
    pub curvature: f64,
    /// Discrete index of the peak in the correlation.
    pub index: usize,
}

/// Locate the global magnitude maximum and refine it by three-point
/// parabolic interpolation on the log-magnitude (exact for the
/// Gaussian-envelope correlation peaks produced by this simulator).
/// Ties break toward the smallest |lag|, then the earliest lag.
pub fn find_peak(c: &CorrelationFunction) -> Result<Peak> {
    find_peak_with(c, None)
}

/// [`find_peak`] with an optional first-peak rule: take the earliest local
/// maximum whose magnitude reaches `fraction` of the global maximum.
pub fn find_peak_with(c: &CorrelationFunction, first_fraction: Option<f64>) -> Result<Peak> {
    if c.is_empty() {
        return Err(Error::parameter("empty correlation"));
    }
    let mags: Vec<f64> = c.values.iter().map(|v| v.norm()).collect();
    let mut best = 0usize;
    for (k, &m) in mags.iter().enumerate() {
        if m > mags[best] {
            best = k;
        } else if m == mags[best] && k != best {
            let lag_k = c.lag(k).abs();
            let lag_b = c.lag(best).abs();
            if lag_k < lag_b {
                best = k;
            }
        }
    }
    let peak_mag = mags[best];
    if peak_mag == 0.0 || mags.iter().all(|&m| m == peak_mag) {
        return Err(Error::DegeneratePeak(
            "correlation magnitude is flat".into(),
        ));
    }

    if let Some(fraction) = first_fraction {
        let thr = peak_mag * fraction;
        for k in 1..mags.len() - 1 {
            if mags[k] >= thr && mags[k] >= mags[k - 1] && mags[k] >= mags[k + 1] {
                best = k;
                break;
            }
        }
    }

    let (delta, curvature) = if best == 0 || best == mags.len() - 1 {
        (0.0, 0.0)
    } else {
        interpolate_log(mags[best - 1], mags[best], mags[best + 1])
    };
    Ok(Peak {
        delay: c.lag(best) + delta / c.sample_rate,
        value: mags[best],
        curvature,
        index: best,
    })
}

/// Three-point parabola on ln-magnitude; returns (sub-sample offset,
/// curvature). Falls back to plain magnitude when a neighbor is zero.
fn interpolate_log(y0: f64, y1: f64, y2: f64) -> (f64, f64) {
    let (a, b, c) = if y0 > 0.0 && y1 > 0.0 && y2 > 0.0 {
        (y0.ln(), y1.ln(), y2.ln())
    } else {
        (y0, y1, y2)
    };
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-300 {
        return (0.0, 0.0);
    }
    let delta = 0.5 * (a - c) / denom;
    (delta.clamp(-0.5, 0.5), denom)
}

/// Robust correlation noise floor: median magnitude outside +/-50 ns of the
/// peak, scaled by 1.4826.
///
/// The raw correlation variance scales with the lag overlap, so the median
/// is taken over a band near the peak (+/-2 us) where the overlap is
/// comparable, rather than over the whole lag axis.
fn noise_floor(c: &CorrelationFunction, peak_index: usize) -> f64 {
    let guard = (50e-9 * c.sample_rate).round() as usize;
    let band = (2e-6 * c.sample_rate).round() as usize;
    let (band_lo, band_hi) = if 2 * band + 1 >= c.len() {
        (0, c.len())
    } else {
        let lo = peak_index.saturating_sub(band);
        let hi = (peak_index + band + 1).min(c.len());
        (lo, hi)
    };
    let lo = peak_index.saturating_sub(guard);
    let hi = (peak_index + guard).min(c.len());
    let mut mags: Vec<f64> = (band_lo..band_hi)
        .filter(|k| *k < lo || *k >= hi)
        .map(|k| c.values[k].norm())
        .collect();
    if mags.is_empty() {
        return 0.0;
    }
    let mid = mags.len() / 2;
    mags.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
    mags[mid] * 1.4826
}

/// Peak power over the correlation noise floor, dB (finite even for
/// noise-free inputs).
pub fn peak_quality_db(c: &CorrelationFunction, peak: &Peak) -> f64 {
    let floor = noise_floor(c, peak.index).max(peak.value * 1e-12);
    20.0 * (peak.value / floor).log10()
}

/// Largest magnitude outside `exclusion` seconds of the main peak, as a
/// fraction of the main peak magnitude.
pub fn ambiguity_ratio(c: &CorrelationFunction, exclusion: f64) -> Result<f64> {
    let peak = find_peak(c)?;
    let guard = (exclusion * c.sample_rate).ceil() as usize;
    let lo = peak.index.saturating_sub(guard);
    let hi = (peak.index + guard + 1).min(c.len());
    let side = c
        .values
        .iter()
        .enumerate()
        .filter(|(k, _)| *k < lo || *k >= hi)
        .map(|(_, v)| v.norm())
        .fold(0.0, f64::max);
    Ok(side / peak.value)
}

/// Double cross-correlation TDOA estimate from the four half-window
/// recordings of a receiver pair.
///
/// `r11`/`r21` hold the reference burst (first halves of RX1/RX2), `r12`/
/// `r22` the tag burst (second halves), each of duration `t_w`. Returns the
/// estimate `tdoa = (t2_peak - t1_peak) + (tp12 - tp11)`; quality metrics
/// come from the tag correlation.
pub fn double_correlation_tdoa(
    r11: &Waveform,
    r12: &Waveform,
    r21: &Waveform,
    r22: &Waveform,
    sync: &SyncGeometry,
    window: &RecordingWindow,
    cfg: &TdoaConfig,
    rx_pair: (usize, usize),
) -> Result<TdoaMeasurement> {
    sync.validate(window)?;
    let c1 = cross_correlate(r11, r21)?;
    let c2 = cross_correlate(r12, r22)?;
    let p1 = find_peak_with(&c1, cfg.first_peak_fraction)?;
    let p2 = find_peak_with(&c2, cfg.first_peak_fraction)?;

    let quality = peak_quality_db(&c2, &p2);
    let quality1 = peak_quality_db(&c1, &p1);
    if quality.min(quality1) < cfg.detection_threshold_db {
        return Err(Error::DetectionFailed {
            peak_quality_db: quality.min(quality1),
            threshold_db: cfg.detection_threshold_db,
        });
    }

    let delta_t = p2.delay - p1.delay;
    Ok(TdoaMeasurement {
        rx_pair,
        tdoa: delta_t + (sync.tp12 - sync.tp11),
        peak_quality: quality,
        ambiguity_ratio: ambiguity_ratio(&c2, cfg.ambiguity_exclusion)?,
    })
}
