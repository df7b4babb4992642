//! JSON run configuration.
//!
//! Units are carried in key names: energies and frequencies in cm⁻¹,
//! temperatures in K, `dt_fs`/`snapshot_fs`/`epsilon_fs` in fs and the
//! remaining times in ps. Site, exciton and mode indices are 0-based.
//!
//! ```json
//! {
//!   "model": { "epsilon": [0, 250, 500], "J": [[0,100,0],[100,0,100],[0,100,0]] },
//!   "bath": { "Q": 15, "omega0_cm": 0.01, "delta_omega_cm": 50, "s": 2,
//!             "omega_c_cm": 100, "lambda_reorg_cm": 50 },
//!   "thermal": { "T0_K": 77, "T_inf_K": 77, "nu_per_ps": 2.5, "tau_ps": 0.01 },
//!   "run": { "dt_fs": 1, "t_total_ps": 10, "snapshot_fs": 10,
//!            "trajectories": 240, "master_seed": 1 },
//!   "excitation": { "kind": "exciton", "index": 2 }
//! }
//! ```

use std::path::Path;

use d2therm_core::observables::recursion_time;
use d2therm_core::thermalization::POISSON_WARN_THRESHOLD;
use d2therm_core::{
    build_bath, BathSpec, Excitation, ExcitonModel, IntegratorConfig, RunConfig, ThermalLaw,
    ThermalizationParams, UnitSystem,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Result, SimError};

/// Default smoothing window for the temperature estimate, fs.
pub const DEFAULT_EPSILON_FS: f64 = 50.0;
/// Default snapshot spacing, fs.
pub const DEFAULT_SNAPSHOT_FS: f64 = 10.0;
/// Frequency of the default phase-space mode, cm⁻¹.
pub const DEFAULT_PHASE_SPACE_CM: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: ModelSection,
    pub bath: BathSection,
    pub thermal: ThermalSection,
    pub run: RunSection,
    pub excitation: ExcitationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub epsilon: Vec<f64>,
    #[serde(rename = "J")]
    pub j: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    #[serde(rename = "Q")]
    pub q: usize,
    pub omega0_cm: f64,
    pub delta_omega_cm: f64,
    pub s: f64,
    pub omega_c_cm: f64,
    pub lambda_reorg_cm: f64,
}

/// One temperature for every site, or one per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Temperatures {
    Uniform(f64),
    PerSite(Vec<f64>),
}

impl Temperatures {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Temperatures::Uniform(t) => vec![*t],
            Temperatures::PerSite(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    #[serde(rename = "T0_K")]
    pub t0_k: Temperatures,
    #[serde(rename = "T_inf_K")]
    pub t_inf_k: f64,
    pub nu_per_ps: f64,
    pub tau_ps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub dt_fs: f64,
    pub t_total_ps: f64,
    #[serde(default = "default_snapshot_fs")]
    pub snapshot_fs: f64,
    pub trajectories: usize,
    pub master_seed: u64,
}

fn default_snapshot_fs() -> f64 {
    DEFAULT_SNAPSHOT_FS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExcitationKind {
    Site,
    Exciton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationSection {
    pub kind: ExcitationKind,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeRef {
    pub site: usize,
    pub mode: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_epsilon_fs")]
    pub epsilon_fs: f64,
    #[serde(default)]
    pub phase_space: Vec<ModeRef>,
}

fn default_epsilon_fs() -> f64 {
    DEFAULT_EPSILON_FS
}

/// Parse `text` as a configuration, or as a run manifest carrying one
/// under `"config"`, then apply `key.path=value` overrides.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ConfigFile> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
    if let Some(inner) = doc.get("config").filter(|_| doc.get("model").is_none()) {
        doc = inner.clone();
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    serde_json::from_value(doc).map_err(|e| SimError::Parse(e.to_string()))
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, overrides)
}

/// Set `path` (dot separated, numeric segments index arrays) to `value`.
/// The value is read as JSON when it parses, otherwise as a string.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| SimError::config(spec, "override must have the form key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(SimError::config(spec, "empty override key"));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let last = depth + 1 == parts.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let i: usize = part.parse().map_err(|_| {
                    SimError::config(key, format!("'{part}' is not an array index"))
                })?;
                let len = items.len();
                let slot = items.get_mut(i).ok_or_else(|| {
                    SimError::config(key, format!("index {i} out of range (len {len})"))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(SimError::config(
                    key,
                    format!("'{part}' is not inside an object or array"),
                ))
            }
        };
    }
    unreachable!("loop returns on the last segment")
}

/// Number of `dt` steps in `duration`, failing under `key` when it is not
/// a whole number.
fn whole_steps(key: &str, duration: f64, dt: f64) -> Result<usize> {
    let n = (duration / dt).round();
    if n < 1.0 || (n * dt - duration).abs() > 1e-9 * duration.max(dt) {
        return Err(SimError::config(
            key,
            format!("{duration} ps is not a positive integer multiple of dt = {dt} ps"),
        ));
    }
    Ok(n as usize)
}

fn require(key: &str, ok: bool, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(SimError::config(key, message()))
    }
}

/// A validated configuration with the core run built from it.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    /// The configuration with every default filled in.
    pub config: ConfigFile,
    pub run: RunConfig,
    /// Temperature smoothing window, ps.
    pub epsilon: f64,
    pub phase_space: Vec<ModeRef>,
}

impl ResolvedRun {
    pub fn new(config: ConfigFile) -> Result<Self> {
        Self::with_units(config, UnitSystem::STANDARD)
    }

    pub fn with_units(mut config: ConfigFile, units: UnitSystem) -> Result<Self> {
        let finite =
            |key: &str, x: f64| require(key, x.is_finite(), || format!("must be finite, got {x}"));

        let n = config.model.epsilon.len();
        require("model.epsilon", n >= 1, || "needs at least one site".into())?;
        for &e in &config.model.epsilon {
            finite("model.epsilon", e)?;
        }
        let j = &config.model.j;
        require("model.J", j.len() == n, || {
            format!("expected {n} rows, got {}", j.len())
        })?;
        let mut coupling = Vec::with_capacity(n * n);
        for (r, row) in j.iter().enumerate() {
            require("model.J", row.len() == n, || {
                format!("row {r} has {} entries, expected {n}", row.len())
            })?;
            for (c, &v) in row.iter().enumerate() {
                finite("model.J", v)?;
                require("model.J", r != c || v == 0.0, || {
                    format!("diagonal entry ({r},{r}) must be 0, got {v}")
                })?;
                require("model.J", v == j[c][r], || {
                    format!("not symmetric at ({r},{c}): {v} vs {}", j[c][r])
                })?;
                coupling.push(v);
            }
        }
        let model = ExcitonModel::new(config.model.epsilon.clone(), coupling, units)?;

        let b = &config.bath;
        require("bath.Q", b.q >= 1, || "must be >= 1".into())?;
        require(
            "bath.omega0_cm",
            b.omega0_cm > 0.0 && b.omega0_cm.is_finite(),
            || format!("must be > 0, got {}", b.omega0_cm),
        )?;
        require(
            "bath.delta_omega_cm",
            b.delta_omega_cm > 0.0 && b.delta_omega_cm.is_finite(),
            || format!("must be > 0, got {}", b.delta_omega_cm),
        )?;
        require("bath.s", b.s.is_finite() && b.s >= 0.0, || {
            format!("must be >= 0, got {}", b.s)
        })?;
        require(
            "bath.omega_c_cm",
            b.omega_c_cm > 0.0 && b.omega_c_cm.is_finite(),
            || format!("must be > 0, got {}", b.omega_c_cm),
        )?;
        require(
            "bath.lambda_reorg_cm",
            b.lambda_reorg_cm >= 0.0 && b.lambda_reorg_cm.is_finite(),
            || format!("must be >= 0, got {}", b.lambda_reorg_cm),
        )?;
        let spec = BathSpec {
            n_modes: b.q,
            omega0: b.omega0_cm,
            delta_omega: b.delta_omega_cm,
            s: b.s,
            omega_c: b.omega_c_cm,
            lambda_reorg: b.lambda_reorg_cm,
        };
        let bath =
            build_bath(&spec, &units, n).map_err(|e| SimError::config("bath", e.to_string()))?;

        let th = &config.thermal;
        let t0 = th.t0_k.values();
        require("thermal.T0_K", t0.len() == 1 || t0.len() == n, || {
            format!("expected 1 or {n} values, got {}", t0.len())
        })?;
        let mut initial_laws = Vec::with_capacity(t0.len());
        for &t in &t0 {
            require("thermal.T0_K", t >= 0.0 && t.is_finite(), || {
                format!("must be >= 0 K, got {t}")
            })?;
            initial_laws.push(ThermalLaw::new(t, &units)?);
        }
        require(
            "thermal.T_inf_K",
            th.t_inf_k >= 0.0 && th.t_inf_k.is_finite(),
            || format!("must be >= 0 K, got {}", th.t_inf_k),
        )?;
        require(
            "thermal.nu_per_ps",
            th.nu_per_ps >= 0.0 && th.nu_per_ps.is_finite(),
            || format!("must be >= 0, got {}", th.nu_per_ps),
        )?;
        require(
            "thermal.tau_ps",
            th.tau_ps > 0.0 && th.tau_ps.is_finite(),
            || format!("must be > 0, got {}", th.tau_ps),
        )?;
        require("thermal.nu_per_ps", th.nu_per_ps * th.tau_ps <= 1.0, || {
            format!("nu*tau = {} exceeds 1", th.nu_per_ps * th.tau_ps)
        })?;

        let r = &config.run;
        require("run.dt_fs", r.dt_fs > 0.0 && r.dt_fs.is_finite(), || {
            format!("must be > 0, got {}", r.dt_fs)
        })?;
        require(
            "run.t_total_ps",
            r.t_total_ps > 0.0 && r.t_total_ps.is_finite(),
            || format!("must be > 0, got {}", r.t_total_ps),
        )?;
        require("run.trajectories", r.trajectories >= 1, || {
            "must be >= 1".into()
        })?;
        let dt = r.dt_fs * 1e-3;
        let total = whole_steps("run.t_total_ps", r.t_total_ps, dt)?;
        let stride = whole_steps("run.snapshot_fs", r.snapshot_fs * 1e-3, dt)?;
        require("run.snapshot_fs", total.is_multiple_of(stride), || {
            format!(
                "t_total = {} ps is not a multiple of the snapshot spacing {} fs",
                r.t_total_ps, r.snapshot_fs
            )
        })?;
        let tau_steps = whole_steps("thermal.tau_ps", th.tau_ps, dt)?;
        require("run.t_total_ps", total.is_multiple_of(tau_steps), || {
            format!(
                "{} ps is not an integer multiple of tau = {} ps",
                r.t_total_ps, th.tau_ps
            )
        })?;

        let ex = config.excitation;
        require("excitation.index", ex.index < n, || {
            format!("{} out of range for {n} sites", ex.index)
        })?;
        let excitation = match ex.kind {
            ExcitationKind::Site => Excitation::Site(ex.index),
            ExcitationKind::Exciton => Excitation::Exciton(ex.index),
        };

        let mut output = config.output.clone().unwrap_or(OutputSection {
            epsilon_fs: DEFAULT_EPSILON_FS,
            phase_space: Vec::new(),
        });
        if output.phase_space.is_empty() {
            output.phase_space.push(ModeRef {
                site: 0,
                mode: bath.nearest_mode(0, DEFAULT_PHASE_SPACE_CM),
            });
        }
        require(
            "output.epsilon_fs",
            output.epsilon_fs >= r.snapshot_fs && output.epsilon_fs.is_finite(),
            || {
                format!(
                    "must be at least the snapshot spacing {} fs, got {}",
                    r.snapshot_fs, output.epsilon_fs
                )
            },
        )?;
        for m in &output.phase_space {
            require("output.phase_space", m.site < n && m.mode < b.q, || {
                format!(
                    "mode (site {}, mode {}) out of range for {n} sites x {} modes",
                    m.site, m.mode, b.q
                )
            })?;
        }

        let run = RunConfig {
            model,
            bath,
            initial_laws,
            // kept even at nu = 0 so the random stream layout never depends on nu
            thermalization: Some(ThermalizationParams {
                nu: th.nu_per_ps,
                tau: th.tau_ps,
                t_inf: th.t_inf_k,
            }),
            integrator: IntegratorConfig {
                dt,
                t_total: r.t_total_ps,
                record_stride: stride,
            },
            n_trajectories: r.trajectories,
            master_seed: r.master_seed,
            excitation,
        };
        run.validate()?;
        let epsilon = output.epsilon_fs * 1e-3;
        let phase_space = output.phase_space.clone();
        config.output = Some(output);
        Ok(Self {
            config,
            run,
            epsilon,
            phase_space,
        })
    }

    /// Physics warnings that do not stop a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let th = &self.config.thermal;
        let p = th.nu_per_ps * th.tau_ps;
        if p > POISSON_WARN_THRESHOLD {
            out.push(format!(
                "thermal.nu_per_ps: Poisson limit degraded (nu*tau = {p} > {POISSON_WARN_THRESHOLD})"
            ));
        }
        let t_rec = recursion_time(self.config.bath.delta_omega_cm, self.run.model.units());
        if th.nu_per_ps == 0.0 && t_rec < self.config.run.t_total_ps {
            out.push(format!(
                "bath.delta_omega_cm: bath recursion time {t_rec:.3} ps < t_total {} ps; \
                 without thermalization the finite bath reflects energy back after t_rec",
                self.config.run.t_total_ps
            ));
        }
        out
    }
}
