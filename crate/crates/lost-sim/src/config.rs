//! Scenario file schema (TOML) and built-in parameter presets.
//!
//! Every field carries a default from the nominal system parameters, so a
//! minimal file only needs the geometry and the tag list. The full schema is
//! documented in the repository README.

use crate::channel::{ClockModel, Geometry, Obstacle, Position, Reflector, RfLinkParams};
use crate::energy::{AddressCodec, RectennaModel, TagEnergyState, TagMode};
use crate::error::{Error, Result};
use crate::locate::{PfParams, Region, SolverConfig};
use crate::signal::{make_pulse_shape, Modulation, PulseTrainSpec};
use crate::simkit::{LocalizationMode, NoiseModel, ScenarioConfig, SweepOptions, TagSpec};
use crate::tdoa::{RecordingWindow, TdoaConfig};
use serde::{Deserialize, Serialize};

/// Root of the scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_cycles")]
    pub cycles: usize,
    #[serde(default = "default_mode")]
    pub mode: LocalizationMode,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "default_charge_interval")]
    pub charge_interval_s: f64,
    pub geometry: GeometrySection,
    #[serde(default)]
    pub bounds: Option<BoundsSection>,
    #[serde(default)]
    pub clocks: Option<ClocksSection>,
    #[serde(default)]
    pub uhf: UhfSection,
    #[serde(default)]
    pub uwb: UwbSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub window: WindowSection,
    pub tags: Vec<TagSection>,
    #[serde(default)]
    pub codec: CodecSection,
    #[serde(default)]
    pub rectenna: RectennaSection,
    #[serde(default)]
    pub pf: PfSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub tdoa: TdoaSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

fn default_seed() -> u64 {
    1
}
fn default_cycles() -> usize {
    50
}
fn default_mode() -> LocalizationMode {
    LocalizationMode::Tracking
}
fn default_sample_rate() -> f64 {
    4e9
}
fn default_charge_interval() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub anchors: Vec<Position>,
    pub ref_tx: Position,
    #[serde(default)]
    pub showers: Vec<Position>,
    #[serde(default)]
    pub reflectors: Vec<Reflector>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub anchor_boresights: Vec<Position>,
    #[serde(default)]
    pub pattern_exponent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub min: Position,
    pub max: Position,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClocksSection {
    pub offsets_s: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UhfSection {
    pub erp_w: f64,
    pub carrier_hz: f64,
    pub tag_antenna_gain_dbi: f64,
}

impl Default for UhfSection {
    fn default() -> Self {
        UhfSection {
            erp_w: 2.0,
            carrier_hz: 868e6,
            tag_antenna_gain_dbi: 1.8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UwbSection {
    pub center_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_psd_dbm_mhz: f64,
    pub rx_antenna_gain_dbi: f64,
    pub noise_figure_db: f64,
}

impl Default for UwbSection {
    fn default() -> Self {
        UwbSection {
            center_frequency_hz: 4e9,
            bandwidth_hz: 1.4e9,
            tx_psd_dbm_mhz: -50.0,
            rx_antenna_gain_dbi: 5.0,
            noise_figure_db: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub prp_s: f64,
    pub n_pulses: usize,
    pub jitter_sigma_s: f64,
    pub modulation: Modulation,
    /// Energy per transmitted pulse; 0 = derive from the UWB PSD and prp.
    pub energy_per_pulse_j: f64,
    /// Reference transmitter pulse energy; 0 = same as the tag.
    pub ref_energy_per_pulse_j: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            prp_s: 6.25e-9,
            n_pulses: 5000,
            jitter_sigma_s: 200e-12,
            modulation: Modulation::Jittered,
            energy_per_pulse_j: 0.0,
            ref_energy_per_pulse_j: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSection {
    pub t_r_s: f64,
    pub t_w_s: f64,
}

impl Default for WindowSection {
    fn default() -> Self {
        WindowSection {
            t_r_s: 100e-6,
            t_w_s: 40e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagSection {
    pub id: u64,
    pub position: Position,
    #[serde(default)]
    pub velocity: Position,
    #[serde(default)]
    pub energy: EnergySection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergySection {
    pub capacity_j: f64,
    pub stored_j: f64,
    pub threshold_cold_dbm: f64,
    pub threshold_sustain_dbm: f64,
    pub quiescent_power_w: f64,
    pub tx_energy_per_cycle_j: f64,
    /// Use the ASIC threshold preset instead of the off-the-shelf PMU.
    pub asic: bool,
}

impl Default for EnergySection {
    fn default() -> Self {
        let d = TagEnergyState::default();
        EnergySection {
            capacity_j: d.capacity,
            stored_j: d.stored,
            threshold_cold_dbm: d.threshold_cold,
            threshold_sustain_dbm: d.threshold_sustain,
            quiescent_power_w: d.quiescent_power,
            tx_energy_per_cycle_j: d.tx_energy_per_cycle,
            asic: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodecSection {
    pub bitrate: f64,
    pub address_bits: u32,
    pub samples_per_chip: usize,
}

impl Default for CodecSection {
    fn default() -> Self {
        let d = AddressCodec::default();
        CodecSection {
            bitrate: d.bitrate,
            address_bits: d.address_bits,
            samples_per_chip: d.samples_per_chip,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RectennaSection {
    pub split_fraction_wur: f64,
    pub efficiency_table: Vec<(f64, f64)>,
    /// Optional CSV file (input dBm, efficiency) overriding the table.
    pub efficiency_csv: Option<String>,
}

impl Default for RectennaSection {
    fn default() -> Self {
        let d = RectennaModel::default();
        RectennaSection {
            split_fraction_wur: d.split_fraction_wur,
            efficiency_table: d.efficiency_table,
            efficiency_csv: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PfSection {
    pub n_particles: usize,
    pub meas_sigma_m: f64,
    pub process_noise: f64,
}

impl Default for PfSection {
    fn default() -> Self {
        PfSection {
            n_particles: 2000,
            meas_sigma_m: 0.02,
            process_noise: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub dims: usize,
    pub fixed_height_m: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            dims: 2,
            fixed_height_m: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TdoaSection {
    pub detection_threshold_db: f64,
    pub ambiguity_exclusion_s: f64,
    pub first_peak_fraction: Option<f64>,
}

impl Default for TdoaSection {
    fn default() -> Self {
        let d = TdoaConfig::default();
        TdoaSection {
            detection_threshold_db: d.detection_threshold_db,
            ambiguity_exclusion_s: d.ambiguity_exclusion,
            first_peak_fraction: d.first_peak_fraction,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// "off", "noise_figure", "psd" or "per_pulse_snr".
    pub model: String,
    pub psd_w_hz: f64,
    pub per_pulse_snr_db: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            model: "noise_figure".into(),
            psd_w_hz: 0.0,
            per_pulse_snr_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Draw the tag position per trial from this region.
    pub tag_region_min: Option<Position>,
    pub tag_region_max: Option<Position>,
    pub distance_direction: Position,
    pub cycles_per_trial: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            tag_region_min: None,
            tag_region_max: None,
            distance_direction: [1.0, 0.0, 0.0],
            cycles_per_trial: 1,
        }
    }
}

impl ScenarioFile {
    /// Parse a TOML scenario file.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Resolve into a validated [`ScenarioConfig`].
    pub fn into_config(self) -> Result<ScenarioConfig> {
        let shape = make_pulse_shape(self.uwb.center_frequency_hz, self.uwb.bandwidth_hz)?;
        let link_uwb = RfLinkParams {
            erp_w: 1.0,
            carrier_hz: self.uwb.center_frequency_hz,
            rx_antenna_gain_dbi: self.uwb.rx_antenna_gain_dbi,
            noise_figure_db: self.uwb.noise_figure_db,
            uwb_tx_psd_dbm_mhz: self.uwb.tx_psd_dbm_mhz,
            uwb_bandwidth_hz: self.uwb.bandwidth_hz,
        };
        let link_uhf = RfLinkParams {
            erp_w: self.uhf.erp_w,
            carrier_hz: self.uhf.carrier_hz,
            rx_antenna_gain_dbi: self.uhf.tag_antenna_gain_dbi,
            noise_figure_db: 0.0,
            uwb_tx_psd_dbm_mhz: 0.0,
            uwb_bandwidth_hz: 1.0,
        };
        let energy_per_pulse = if self.train.energy_per_pulse_j > 0.0 {
            self.train.energy_per_pulse_j
        } else {
            crate::channel::uwb_pulse_energy(&link_uwb, self.train.prp_s)
        };
        let train = PulseTrainSpec {
            shape,
            prp: self.train.prp_s,
            jitter_sigma: self.train.jitter_sigma_s,
            n_pulses: self.train.n_pulses,
            modulation: self.train.modulation,
            energy_per_pulse,
        };
        let geometry = Geometry {
            anchors: self.geometry.anchors,
            ref_tx: self.geometry.ref_tx,
            showers: self.geometry.showers,
            reflectors: self.geometry.reflectors,
            obstacles: self.geometry.obstacles,
            anchor_boresights: self.geometry.anchor_boresights,
            pattern_exponent: self.geometry.pattern_exponent,
        };
        let clocks = match self.clocks {
            Some(c) => ClockModel {
                offsets: c.offsets_s,
            },
            None => ClockModel::zero(geometry.anchors.len()),
        };
        let bounds = match self.bounds {
            Some(b) => Region {
                min: b.min,
                max: b.max,
            },
            None => {
                // Bounding box of anchors and tags with a margin.
                let mut min = [f64::MAX; 3];
                let mut max = [f64::MIN; 3];
                for p in geometry.anchors.iter().chain(self.tags.iter().map(|t| &t.position)) {
                    for d in 0..3 {
                        min[d] = min[d].min(p[d]);
                        max[d] = max[d].max(p[d]);
                    }
                }
                Region { min, max }
            }
        };
        let mut rectenna = RectennaModel {
            efficiency_table: self.rectenna.efficiency_table,
            split_fraction_wur: self.rectenna.split_fraction_wur,
        };
        if let Some(csv_path) = &self.rectenna.efficiency_csv {
            let file = std::fs::File::open(csv_path)?;
            let loaded = RectennaModel::from_csv(file)?;
            rectenna.efficiency_table = loaded.efficiency_table;
        }
        let tags = self
            .tags
            .into_iter()
            .map(|t| {
                let base = if t.energy.asic {
                    TagEnergyState::asic_preset()
                } else {
                    TagEnergyState::default()
                };
                TagSpec {
                    id: t.id,
                    position: t.position,
                    velocity: t.velocity,
                    energy: TagEnergyState {
                        capacity: t.energy.capacity_j,
                        stored: t.energy.stored_j,
                        threshold_cold: if t.energy.asic {
                            base.threshold_cold
                        } else {
                            t.energy.threshold_cold_dbm
                        },
                        threshold_sustain: if t.energy.asic {
                            base.threshold_sustain
                        } else {
                            t.energy.threshold_sustain_dbm
                        },
                        quiescent_power: t.energy.quiescent_power_w,
                        tx_energy_per_cycle: t.energy.tx_energy_per_cycle_j,
                        mode: TagMode::Cold,
                        cold_threshold_seen: false,
                    },
                }
            })
            .collect();
        let noise = match self.noise.model.as_str() {
            "off" => NoiseModel::Off,
            "noise_figure" => NoiseModel::NoiseFigure,
            "psd" => NoiseModel::FixedPsd(self.noise.psd_w_hz),
            "per_pulse_snr" => NoiseModel::PerPulseSnr(self.noise.per_pulse_snr_db),
            other => {
                return Err(Error::Config(format!(
                    "noise.model must be off|noise_figure|psd|per_pulse_snr, got {other}"
                )))
            }
        };
        let cfg = ScenarioConfig {
            geometry,
            clocks,
            link_uhf,
            link_uwb,
            train,
            window: RecordingWindow::new(self.window.t_r_s, self.window.t_w_s)?,
            tags,
            codec: AddressCodec {
                bitrate: self.codec.bitrate,
                address_bits: self.codec.address_bits,
                samples_per_chip: self.codec.samples_per_chip,
            },
            rectenna,
            pf: PfParams {
                process_noise: self.pf.process_noise,
                meas_sigma: self.pf.meas_sigma_m,
                dims: self.solver.dims,
                fixed_height: self.solver.fixed_height_m,
            },
            n_particles: self.pf.n_particles,
            solver: SolverConfig {
                dims: self.solver.dims,
                fixed_height: self.solver.fixed_height_m,
                ..SolverConfig::default()
            },
            tdoa: TdoaConfig {
                detection_threshold_db: self.tdoa.detection_threshold_db,
                ambiguity_exclusion: self.tdoa.ambiguity_exclusion_s,
                first_peak_fraction: self.tdoa.first_peak_fraction,
            },
            sample_rate: self.sample_rate_hz,
            seed: self.seed,
            mode: self.mode,
            noise,
            charge_interval: self.charge_interval_s,
            bounds,
            ref_energy_per_pulse: if self.train.ref_energy_per_pulse_j > 0.0 {
                Some(self.train.ref_energy_per_pulse_j)
            } else {
                None
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sweep options from the file.
    pub fn sweep_options(&self) -> SweepOptions {
        let tag_region = match (self.sweep.tag_region_min, self.sweep.tag_region_max) {
            (Some(min), Some(max)) => Some(Region { min, max }),
            _ => None,
        };
        SweepOptions {
            tag_region,
            distance_direction: self.sweep.distance_direction,
            cycles_per_trial: self.sweep.cycles_per_trial.max(1),
        }
    }
}

/// Built-in parameter presets.
pub mod presets {
    use super::*;

    fn room(sample_rate: f64, uwb: UwbSection, train: TrainSection, exclusion: f64) -> ScenarioConfig {
        let file = ScenarioFile {
            seed: 1,
            cycles: 50,
            mode: LocalizationMode::Snapshot,
            sample_rate_hz: sample_rate,
            charge_interval_s: 0.2,
            geometry: GeometrySection {
                anchors: vec![
                    [0.0, 0.0, 2.03],
                    [10.0, 0.0, 2.03],
                    [10.0, 7.0, 2.03],
                    [0.0, 7.0, 2.03],
                ],
                ref_tx: [5.0, 0.5, 2.03],
                showers: vec![[5.0, 0.0, 2.03], [0.0, 3.5, 2.03], [10.0, 3.5, 2.03]],
                reflectors: vec![],
                obstacles: vec![],
                anchor_boresights: vec![],
                pattern_exponent: 0.0,
            },
            bounds: Some(BoundsSection {
                min: [0.0, 0.0, 0.0],
                max: [10.0, 7.0, 4.0],
            }),
            clocks: Some(ClocksSection {
                offsets_s: vec![0.0, 1.2e-6, -0.8e-6, 0.6e-6],
            }),
            uhf: UhfSection::default(),
            uwb,
            train,
            window: WindowSection::default(),
            tags: vec![TagSection {
                id: 1,
                position: [5.0, 3.5, 2.03],
                velocity: [0.0; 3],
                energy: EnergySection::default(),
            }],
            codec: CodecSection::default(),
            rectenna: RectennaSection::default(),
            pf: PfSection::default(),
            solver: SolverSection {
                dims: 2,
                fixed_height_m: 2.03,
            },
            tdoa: TdoaSection {
                ambiguity_exclusion_s: exclusion,
                ..TdoaSection::default()
            },
            noise: NoiseSection::default(),
            sweep: SweepSection::default(),
        };
        file.into_config().expect("preset must validate")
    }

    /// Nominal system parameters: 4 GHz center, 1.4 GHz bandwidth,
    /// 6.25 ns prp, 5000 pulses, 4 GS/s sampling, 10 x 7 m room.
    pub fn full_scale() -> ScenarioConfig {
        room(
            4e9,
            UwbSection::default(),
            TrainSection::default(),
            2e-9,
        )
    }

    /// Time-scaled variant for slow machines: every signal timescale is
    /// stretched 4x (1 GHz center, 350 MHz bandwidth, 25 ns prp, 1250
    /// pulses, 800 ps jitter) at 1 GS/s, with the same recording windows.
    /// Delay-estimation errors scale by the same factor of 4.
    pub fn desk_scale() -> ScenarioConfig {
        room(
            1e9,
            UwbSection {
                center_frequency_hz: 1e9,
                bandwidth_hz: 0.35e9,
                ..UwbSection::default()
            },
            TrainSection {
                prp_s: 25e-9,
                n_pulses: 1250,
                jitter_sigma_s: 800e-12,
                ..TrainSection::default()
            },
            8e-9,
        )
    }
}
