//! CSV bundle and run manifest.
//!
//! Every CSV has a header row, comma separators, LF line endings and one
//! row per snapshot. Values are written as `{:.16e}` (17 significant
//! digits), which parses back to the identical `f64`.
//!
//! | file              | columns                                                |
//! |-------------------|--------------------------------------------------------|
//! | `populations.csv` | `t_ps, rho_exc_1 .. rho_exc_N` (ascending energy)       |
//! | `temperature.csv` | `t_ps, T_site_1_K .. T_site_N_K`                        |
//! | `phasespace.csv`  | `t_ps`, then `x_mean_s{m}_q{q}, p_mean_s{m}_q{q}` pairs |
//! | `energy.csv`      | `t_ps, E_total_cm`                                      |
//!
//! Site and mode numbers in column names are 1-based.

use std::fmt::Write as _;
use std::path::Path;

use d2therm_core::{TrajectoryRecord, UnitSystem};
use serde::Serialize;

use crate::config::{ConfigFile, ResolvedRun};
use crate::ensemble::EnsembleResult;
use crate::error::{Result, SimError};

pub const POPULATIONS_CSV: &str = "populations.csv";
pub const TEMPERATURE_CSV: &str = "temperature.csv";
pub const PHASESPACE_CSV: &str = "phasespace.csv";
pub const ENERGY_CSV: &str = "energy.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

/// Render a table as CSV text.
pub fn format_csv(header: &[String], times: &[f64], columns: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for (i, t) in times.iter().enumerate() {
        write!(out, "{t:.16e}").unwrap();
        for c in columns {
            write!(out, ",{:.16e}", c[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parsed CSV: header plus rows of numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn parse_csv(text: &str) -> Result<Table> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| SimError::Parse("empty CSV".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| SimError::Parse(format!("CSV line {}: {e}", i + 2)))?;
        if row.len() != header.len() {
            return Err(SimError::Parse(format!(
                "CSV line {} has {} fields, header has {}",
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn read_csv(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text)
}

fn transpose(values: &[Vec<f64>], width: usize) -> Vec<Vec<f64>> {
    (0..width)
        .map(|k| values.iter().map(|row| row[k]).collect())
        .collect()
}

/// The four CSV files as (name, contents).
pub fn render_bundle(
    run: &ResolvedRun,
    result: &EnsembleResult,
) -> Result<Vec<(&'static str, String)>> {
    let n = run.run.model.n_sites();
    let t = &result.times;

    let pops = result.exciton_populations()?;
    let mut header = vec!["t_ps".to_string()];
    header.extend((1..=n).map(|e| format!("rho_exc_{e}")));
    let populations = format_csv(&header, t, &transpose(&pops.values, n));

    let temp = result.temperature(run.epsilon)?;
    let mut header = vec!["t_ps".to_string()];
    header.extend((1..=n).map(|m| format!("T_site_{m}_K")));
    let temperature = format_csv(&header, t, &transpose(&temp.values, n));

    let mut header = vec!["t_ps".to_string()];
    let mut cols = Vec::new();
    for m in &run.phase_space {
        let xp = result.phase_space(m.site, m.mode)?;
        header.push(format!("x_mean_s{}_q{}", m.site + 1, m.mode + 1));
        header.push(format!("p_mean_s{}_q{}", m.site + 1, m.mode + 1));
        cols.push(xp.iter().map(|v| v.0).collect());
        cols.push(xp.iter().map(|v| v.1).collect());
    }
    let phasespace = format_csv(&header, t, &cols);

    let e = result.energy()?;
    let energy = format_csv(&["t_ps".into(), "E_total_cm".into()], t, &[e.column(0)]);

    Ok(vec![
        (POPULATIONS_CSV, populations),
        (TEMPERATURE_CSV, temperature),
        (PHASESPACE_CSV, phasespace),
        (ENERGY_CSV, energy),
    ])
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureEntry {
    pub index: u64,
    pub seed: String,
    pub t_ps: f64,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct EventStats {
    pub mean_per_mode: f64,
    pub variance_per_mode: f64,
    pub samples: u64,
}

/// Everything needed to reproduce a run. Running `d2therm run --config
/// manifest.json` regenerates the same CSV files byte for byte.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub program: &'static str,
    pub version: &'static str,
    pub master_seed: u64,
    pub trajectories: usize,
    pub completed: u64,
    pub failure_count: usize,
    pub failures: Vec<FailureEntry>,
    pub scattering_events: EventStats,
    pub units: ManifestUnits,
    pub warnings: Vec<String>,
    pub config: ConfigFile,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestUnits {
    pub kb_cm_per_k: f64,
    pub wavenumber_to_rad_per_ps: f64,
}

impl Manifest {
    pub fn new(run: &ResolvedRun, result: &EnsembleResult) -> Self {
        let (mean, var) = result.accumulator.event_statistics();
        let UnitSystem {
            kb,
            wavenumber_to_angular,
        } = *run.run.model.units();
        Self {
            program: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            master_seed: run.run.master_seed,
            trajectories: run.run.n_trajectories,
            completed: result.accumulator.n_trajectories,
            failure_count: result.failures().len(),
            failures: result
                .failures()
                .iter()
                .map(|f| FailureEntry {
                    index: f.index,
                    seed: format!("{:#018x}", f.seed),
                    t_ps: f.t,
                    message: f.message.clone(),
                })
                .collect(),
            scattering_events: EventStats {
                mean_per_mode: mean,
                variance_per_mode: var,
                samples: result.accumulator.event_samples,
            },
            units: ManifestUnits {
                kb_cm_per_k: kb,
                wavenumber_to_rad_per_ps: wavenumber_to_angular,
            },
            warnings: run.warnings(),
            config: run.config.clone(),
        }
    }
}

/// Write the CSV bundle and manifest into `dir`, creating it if needed.
pub fn write_bundle(dir: &Path, run: &ResolvedRun, result: &EnsembleResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, text) in render_bundle(run, result)? {
        std::fs::write(dir.join(name), text)?;
    }
    let mut manifest = serde_json::to_string_pretty(&Manifest::new(run, result))
        .map_err(|e| SimError::Parse(e.to_string()))?;
    manifest.push('\n');
    std::fs::write(dir.join(MANIFEST_JSON), manifest)?;
    Ok(())
}

/// Per-trajectory debug table: amplitudes, site populations and energy.
pub fn format_trajectory(record: &TrajectoryRecord, times: &[f64]) -> String {
    let n = record.snapshots.first().map_or(0, |s| s.state.alpha.len());
    let mut header = vec!["t_ps".to_string()];
    for k in 1..=n {
        header.push(format!("re_alpha_{k}"));
        header.push(format!("im_alpha_{k}"));
    }
    header.push("E_total_cm".into());
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        cols.push(
            record
                .snapshots
                .iter()
                .map(|s| s.state.alpha[k].re)
                .collect(),
        );
        cols.push(
            record
                .snapshots
                .iter()
                .map(|s| s.state.alpha[k].im)
                .collect(),
        );
    }
    cols.push(record.snapshots.iter().map(|s| s.energy).collect());
    format_csv(&header, times, &cols)
}
