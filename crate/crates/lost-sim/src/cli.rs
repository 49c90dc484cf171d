//! Command implementations behind the `lost-sim` binary.
//!
//! Each command writes plot-ready CSV plus a run manifest; outputs are
//! reproducible byte-for-byte from (config, seed, tool version), the
//! manifest timestamp aside.

use crate::channel::{distance, RfLinkParams};
use crate::simkit::ScenarioConfig;
use crate::config::ScenarioFile;
use crate::energy::activation_distance;
use crate::error::{Error, Result};
use crate::simkit::{
    error_cdf, group_by_value, sweep, MetricsRow, MetricsTable, Simulation, SweepVariable,
};
use crate::tdoa::{double_correlation_tdoa, RecordingWindow, SyncGeometry, TdoaConfig,
    TdoaMeasurement};
use crate::wavefile::{read_waveform, write_waveform};
use crate::SPEED_OF_LIGHT;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Run metadata emitted next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub start_unix_s: u64,
    pub outputs: Vec<String>,
    /// Echo of the resolved configuration file.
    pub config: String,
}

impl RunManifest {
    fn new(command: &str, seed: u64, config_echo: String) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            start_unix_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            outputs: Vec::new(),
            config: config_echo,
        }
    }

    fn write(&self, out_dir: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
        std::fs::write(out_dir.join("manifest.toml"), text)?;
        Ok(())
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn min_quality(row: &MetricsRow) -> Option<f64> {
    row.peak_quality_db
        .iter()
        .cloned()
        .fold(None, |acc: Option<f64>, q| {
            Some(acc.map_or(q, |a| a.min(q)))
        })
}

fn write_metrics_csv(path: &Path, rows: &[MetricsRow], with_sweep_columns: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = Vec::new();
    if with_sweep_columns {
        header.extend_from_slice(&["sweep_value", "trial"]);
    }
    header.extend_from_slice(&[
        "cycle",
        "tag_id",
        "truth_x",
        "truth_y",
        "est_x",
        "est_y",
        "error_m",
        "n_detections",
        "min_peak_quality_db",
    ]);
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let mut record = Vec::new();
        if with_sweep_columns {
            record.push(fmt_opt(row.sweep_value));
            record.push(format!("{}", row.trial));
        }
        record.push(format!("{}", row.cycle));
        record.push(format!("{}", row.tag_id));
        record.push(format!("{}", row.truth[0]));
        record.push(format!("{}", row.truth[1]));
        record.push(fmt_opt(row.estimate.map(|p| p[0])));
        record.push(fmt_opt(row.estimate.map(|p| p[1])));
        record.push(fmt_opt(row.error_m));
        record.push(format!("{}", row.n_detections));
        record.push(fmt_opt(min_quality(row)));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

/// `simulate`: run the scenario and write metrics plus a manifest.
///
/// With `dump_waveforms`, the half-window slices of cycle 0 are written as
/// waveform files; feeding them back through `tdoa` reproduces the in-run
/// estimates exactly.
pub fn cmd_simulate(config_path: &Path, out_dir: &Path, dump_waveforms: bool) -> Result<PathBuf> {
    let file = ScenarioFile::load(config_path)?;
    let echo = toml::to_string_pretty(&file).map_err(|e| Error::Config(e.to_string()))?;
    let cycles = file.cycles;
    let cfg = file.into_config()?;
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new("simulate", cfg.seed, echo);

    let mut sim = Simulation::new(cfg.clone())?;
    let mut rows = Vec::with_capacity(cycles);
    for cycle in 0..cycles {
        let tag_id = cfg.tags[cycle % cfg.tags.len()].id;
        let (result, waves) = sim.run_cycle_detailed(tag_id)?;
        if dump_waveforms && cycle == 0 {
            let dir = out_dir.join("waveforms");
            std::fs::create_dir_all(&dir)?;
            let files = [
                ("r11.lstw".to_string(), &waves.r11),
                ("r12.lstw".to_string(), &waves.r12),
            ];
            for (name, wf) in files {
                let path = dir.join(&name);
                write_waveform(&path, wf)?;
                manifest.outputs.push(format!("waveforms/{name}"));
            }
            for (k, (r21, r22)) in waves.pairs.iter().enumerate() {
                let rx = k + 1;
                for (name, wf) in [
                    (format!("r21_rx{rx}.lstw"), r21),
                    (format!("r22_rx{rx}.lstw"), r22),
                ] {
                    let path = dir.join(&name);
                    write_waveform(&path, wf)?;
                    manifest.outputs.push(format!("waveforms/{name}"));
                }
            }
        }
        rows.push(sim.row_from_cycle(&result, 0, None));
    }

    let metrics_path = out_dir.join("metrics.csv");
    write_metrics_csv(&metrics_path, &rows, false)?;
    manifest.outputs.push("metrics.csv".into());
    manifest.write(out_dir)?;
    Ok(metrics_path)
}

/// `sweep`: vary one parameter, write raw rows and a per-value summary.
pub fn cmd_sweep(
    config_path: &Path,
    var: &str,
    values: &[f64],
    trials: usize,
    out_dir: &Path,
) -> Result<PathBuf> {
    if trials == 0 {
        return Err(Error::parameter("trials must be >= 1"));
    }
    let variable = SweepVariable::parse(var)?;
    let file = ScenarioFile::load(config_path)?;
    let echo = toml::to_string_pretty(&file).map_err(|e| Error::Config(e.to_string()))?;
    let options = file.sweep_options();
    let cfg = file.into_config()?;
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new("sweep", cfg.seed, echo);

    let table = sweep(&cfg, variable, values, trials, &options)?;

    let raw_path = out_dir.join("sweep_raw.csv");
    write_metrics_csv(&raw_path, &table.rows, true)?;
    manifest.outputs.push("sweep_raw.csv".into());

    let summary_path = out_dir.join("sweep_summary.csv");
    write_sweep_summary(&summary_path, &table)?;
    manifest.outputs.push("sweep_summary.csv".into());
    manifest.write(out_dir)?;
    Ok(summary_path)
}

fn write_sweep_summary(path: &Path, table: &MetricsTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["value", "median_error_m", "p90_error_m", "n_detected"])
        .map_err(csv_err)?;
    for (value, rows) in group_by_value(table) {
        let sub = MetricsTable {
            rows: rows.iter().map(|r| (*r).clone()).collect(),
        };
        let cdf = error_cdf(&sub);
        w.write_record(&[
            format!("{value}"),
            fmt_opt(cdf.median),
            fmt_opt(cdf.p90),
            format!("{}", cdf.n_with_estimate),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One `link-budget` output row.
#[derive(Debug)]
pub struct LinkBudgetRow {
    pub threshold_dbm: f64,
    pub distance_m: Result<f64>,
}

/// Activation distances for each threshold over a Friis link.
pub fn link_budget_rows(
    erp_w: f64,
    carrier_hz: f64,
    rx_gain_dbi: f64,
    thresholds_dbm: &[f64],
) -> Result<Vec<LinkBudgetRow>> {
    let link = RfLinkParams {
        erp_w,
        carrier_hz,
        rx_antenna_gain_dbi: rx_gain_dbi,
        noise_figure_db: 0.0,
        uwb_tx_psd_dbm_mhz: 0.0,
        uwb_bandwidth_hz: 1.0,
    };
    link.validate()?;
    Ok(thresholds_dbm
        .iter()
        .map(|&thr| LinkBudgetRow {
            threshold_dbm: thr,
            distance_m: activation_distance(&link, thr),
        })
        .collect())
}

/// `link-budget`: print threshold -> activation distance rows.
pub fn cmd_link_budget(
    erp_w: f64,
    carrier_hz: f64,
    rx_gain_dbi: f64,
    thresholds_dbm: &[f64],
) -> Result<String> {
    let rows = link_budget_rows(erp_w, carrier_hz, rx_gain_dbi, thresholds_dbm)?;
    let mut out = String::new();
    writeln!(out, "threshold_dbm  activation_distance_m").ok();
    for row in rows {
        match row.distance_m {
            Ok(d) => writeln!(out, "{:>13.2}  {:.3}", row.threshold_dbm, d).ok(),
            Err(e) => writeln!(out, "{:>13.2}  error: {e}", row.threshold_dbm).ok(),
        };
    }
    Ok(out)
}

/// `tdoa`: estimate from four waveform files.
pub fn cmd_tdoa(
    r11_path: &Path,
    r12_path: &Path,
    r21_path: &Path,
    r22_path: &Path,
    tp11: f64,
    tp12: f64,
) -> Result<TdoaMeasurement> {
    let r11 = read_waveform(r11_path)?;
    let r12 = read_waveform(r12_path)?;
    let r21 = read_waveform(r21_path)?;
    let r22 = read_waveform(r22_path)?;
    for w in [&r12, &r21, &r22] {
        if (w.sample_rate - r11.sample_rate).abs() > 1e-6 {
            return Err(Error::parameter("waveform sample rates differ"));
        }
    }
    let t_w = r11.len() as f64 / r11.sample_rate;
    let window = RecordingWindow::new(2.0 * t_w, t_w)?;
    let sync = SyncGeometry { tp11, tp12 };
    double_correlation_tdoa(
        &r11,
        &r12,
        &r21,
        &r22,
        &sync,
        &window,
        &TdoaConfig::default(),
        (0, 1),
    )
}

/// Reference-path delays for the pair (RX1, rx) of a scenario, s.
pub fn sync_delays_for(cfg: &ScenarioConfig, rx: usize) -> (f64, f64) {
    (
        distance(cfg.geometry.ref_tx, cfg.geometry.anchors[0]) / SPEED_OF_LIGHT,
        distance(cfg.geometry.ref_tx, cfg.geometry.anchors[rx]) / SPEED_OF_LIGHT,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_budget_reference_distances() {
        let rows = link_budget_rows(2.0, 868e6, 1.8, &[-13.0, -16.0]).unwrap();
        let d0 = rows[0].distance_m.as_ref().unwrap();
        let d1 = rows[1].distance_m.as_ref().unwrap();
        assert!((d0 - 8.66).abs() / 8.66 < 0.02, "d(-13) = {d0:.3}");
        assert!((d1 - 12.24).abs() / 12.24 < 0.02, "d(-16) = {d1:.3}");
        // Distances scale as 10^(ddB/20).
        assert!((d1 / d0 - 10f64.powf(3.0 / 20.0)).abs() < 1e-9);
    }

    #[test]
    fn link_budget_unreachable_threshold_is_error_row() {
        let rows = link_budget_rows(2.0, 868e6, 1.8, &[50.0]).unwrap();
        assert!(rows[0].distance_m.is_err());
        let text = cmd_link_budget(2.0, 868e6, 1.8, &[50.0, -13.0]).unwrap();
        assert!(text.contains("error"), "output: {text}");
        assert!(text.lines().count() >= 3);
    }
}
