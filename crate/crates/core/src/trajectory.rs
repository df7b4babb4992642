//! Single-trajectory driver and ensemble moment accumulation.
//!
//! A trajectory is fully determined by `(RunConfig, index)`: its random
//! stream is seeded from [`trajectory_seed`], thermal displacements are drawn
//! first, then the run alternates RK4 propagation with scattering rounds at
//! every τ boundary. The parallel driver lives in the `d2therm` crate; this
//! module only holds the pieces that need no threads or IO.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::dynamics::{propagate_steps, steps_in, IntegratorConfig, Rk4Workspace};
use crate::error::{Error, Result};
use crate::model::{BathModes, ExcitonModel};
use crate::rng::TrajectoryRng;
use crate::state::{init_state, total_energy, D2State, Excitation, ThermalLaw};
use crate::sum::NeumaierSum;
use crate::thermalization::{scatter, ThermalizationParams};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer (Stafford's "Mix13"); a bijection on u64.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index` under `master_seed`:
/// `mix64(mix64(master_seed) + (index + 1) * 0x9E3779B97F4A7C15)`.
///
/// For a fixed master seed distinct indices give distinct seeds (the inner
/// sum is injective in the index and `mix64` is a bijection).
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    mix64(mix64(master_seed).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Everything needed to run one trajectory of the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ExcitonModel,
    pub bath: BathModes,
    /// One law for all sites, or one per site.
    pub initial_laws: Vec<ThermalLaw>,
    /// `None` disables the secondary bath entirely.
    pub thermalization: Option<ThermalizationParams>,
    pub integrator: IntegratorConfig,
    pub n_trajectories: usize,
    pub master_seed: u64,
    pub excitation: Excitation,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        if self.n_trajectories == 0 {
            return Err(Error::invalid("n_trajectories", "must be >= 1"));
        }
        let n = self.model.n_sites();
        if self.bath.n_sites() != n {
            return Err(Error::DimensionMismatch {
                what: "bath sites",
                expected: n,
                got: self.bath.n_sites(),
            });
        }
        if self.initial_laws.len() != 1 && self.initial_laws.len() != n {
            return Err(Error::DimensionMismatch {
                what: "initial temperatures",
                expected: n,
                got: self.initial_laws.len(),
            });
        }
        match self.excitation {
            Excitation::Site(k) | Excitation::Exciton(k) if k >= n => {
                return Err(Error::IndexOutOfRange {
                    what: "excitation",
                    index: k,
                    len: n,
                })
            }
            _ => {}
        }
        if let Some(p) = &self.thermalization {
            p.validate()?;
            let tau_steps = steps_in("tau", p.tau, self.integrator.dt)?;
            if tau_steps == 0 {
                return Err(Error::invalid("tau", "must be at least one step"));
            }
            let total = self.integrator.total_steps();
            if !total.is_multiple_of(tau_steps) {
                return Err(Error::invalid(
                    "t_total",
                    alloc::format!(
                        "{} ps is not an integer multiple of tau = {} ps",
                        self.integrator.t_total,
                        p.tau
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn n_snapshots(&self) -> usize {
        self.integrator.total_steps() / self.integrator.record_stride + 1
    }

    /// Time between snapshots, ps.
    pub fn snapshot_interval(&self) -> f64 {
        self.integrator.dt * self.integrator.record_stride as f64
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        let step = self.integrator.record_stride;
        (0..self.n_snapshots())
            .map(|s| (s * step) as f64 * self.integrator.dt)
            .collect()
    }
}

/// A recorded state and its energy (cm⁻¹).
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: D2State,
    pub energy: f64,
}

/// Everything one trajectory produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub index: u64,
    pub seed: u64,
    pub snapshots: Vec<Snapshot>,
    /// Scattering events per mode over the whole run.
    pub events: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFailure {
    pub index: u64,
    pub seed: u64,
    /// Time at which the trajectory was aborted, ps.
    pub t: f64,
    pub message: String,
}

impl core::fmt::Display for TrajectoryFailure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "trajectory {} (seed {:#018x}) failed at t = {} ps: {}",
            self.index, self.seed, self.t, self.message
        )
    }
}

/// Run one trajectory, handing every snapshot to `sink` as it is recorded.
/// Returns per-mode scattering event counts.
pub fn run_trajectory_with<F>(
    config: &RunConfig,
    index: u64,
    mut sink: F,
) -> core::result::Result<Vec<u32>, TrajectoryFailure>
where
    F: FnMut(usize, &D2State, f64),
{
    let seed = trajectory_seed(config.master_seed, index);
    let fail = |t: f64, e: Error| TrajectoryFailure {
        index,
        seed,
        t,
        message: e.to_string(),
    };
    let model = &config.model;
    let bath = &config.bath;
    let dt = config.integrator.dt;
    let mut rng = TrajectoryRng::from_seed(seed);
    let mut state = init_state(
        model,
        bath,
        &config.initial_laws,
        config.excitation,
        &mut rng,
    )
    .map_err(|e| fail(0.0, e))?;
    let mut events = vec![0u32; bath.len()];

    let total = config.integrator.total_steps();
    let stride = config.integrator.record_stride;
    let thermal = match &config.thermalization {
        Some(p) => {
            let tau_steps = steps_in("tau", p.tau, dt).map_err(|e| fail(0.0, e))?;
            let law = p.law(bath.units()).map_err(|e| fail(0.0, e))?;
            Some((p, law, tau_steps.max(1)))
        }
        None => None,
    };

    let mut ws = Rk4Workspace::new(bath);
    sink(0, &state, total_energy(&state, model, bath));
    let mut step = 0;
    let mut next_snap = stride;
    let mut next_scatter = thermal.as_ref().map_or(usize::MAX, |t| t.2);
    let mut snap = 1;
    while step < total {
        let target = next_snap.min(next_scatter).min(total);
        propagate_steps(&mut state, model, bath, target - step, dt, &mut ws)
            .map_err(|e| fail(state.t, e))?;
        step = target;
        state.t = step as f64 * dt;
        if step == next_scatter {
            if let Some((p, law, tau_steps)) = &thermal {
                scatter(&mut state, bath, p, law, &mut rng, Some(&mut events));
                next_scatter += tau_steps;
            }
        }
        if step == next_snap {
            sink(snap, &state, total_energy(&state, model, bath));
            snap += 1;
            next_snap += stride;
        }
    }
    Ok(events)
}

/// Run one trajectory and keep every snapshot.
pub fn run_trajectory(
    config: &RunConfig,
    index: u64,
) -> core::result::Result<TrajectoryRecord, TrajectoryFailure> {
    let mut snapshots = Vec::with_capacity(config.n_snapshots());
    let events = run_trajectory_with(config, index, |_, state, energy| {
        snapshots.push(Snapshot {
            state: state.clone(),
            energy,
        })
    })?;
    Ok(TrajectoryRecord {
        index,
        seed: trajectory_seed(config.master_seed, index),
        snapshots,
        events,
    })
}

/// Running sums of the ensemble moments the observables need, per snapshot:
/// the coherence matrix ⟨α_n*α_m⟩, ⟨Re λ⟩, ⟨Im λ⟩, ⟨(Im λ)²⟩ and ⟨E⟩, plus
/// pooled scattering-event statistics.
///
/// Memory is O(snapshots · (N² + N·Q)) regardless of ensemble size. All sums
/// are compensated, so merging partial accumulators in any order agrees to
/// well below 1e-12 relative; merging in a fixed order is bit-reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAccumulator {
    pub n_sites: usize,
    /// N·Q.
    pub n_modes: usize,
    pub n_snapshots: usize,
    pub n_trajectories: u64,
    /// `[s][n * N + m]`, real and imaginary parts of Σ α_n* α_m.
    pub coherence_re: Vec<NeumaierSum>,
    pub coherence_im: Vec<NeumaierSum>,
    /// `[s][k]`
    pub lambda_re: Vec<NeumaierSum>,
    pub lambda_im: Vec<NeumaierSum>,
    pub lambda_im_sq: Vec<NeumaierSum>,
    /// `[s]`
    pub energy: Vec<NeumaierSum>,
    /// Σ of per-(mode, trajectory) event counts and of their squares.
    pub event_sum: NeumaierSum,
    pub event_sq_sum: NeumaierSum,
    pub event_samples: u64,
    pub failures: Vec<TrajectoryFailure>,
}

impl EnsembleAccumulator {
    pub fn new(n_sites: usize, n_modes: usize, n_snapshots: usize) -> Self {
        let nn = n_sites * n_sites * n_snapshots;
        let nm = n_modes * n_snapshots;
        Self {
            n_sites,
            n_modes,
            n_snapshots,
            n_trajectories: 0,
            coherence_re: vec![NeumaierSum::ZERO; nn],
            coherence_im: vec![NeumaierSum::ZERO; nn],
            lambda_re: vec![NeumaierSum::ZERO; nm],
            lambda_im: vec![NeumaierSum::ZERO; nm],
            lambda_im_sq: vec![NeumaierSum::ZERO; nm],
            energy: vec![NeumaierSum::ZERO; n_snapshots],
            event_sum: NeumaierSum::ZERO,
            event_sq_sum: NeumaierSum::ZERO,
            event_samples: 0,
            failures: Vec::new(),
        }
    }

    pub fn for_config(config: &RunConfig) -> Self {
        Self::new(
            config.model.n_sites(),
            config.bath.len(),
            config.n_snapshots(),
        )
    }

    fn add_snapshot(&mut self, s: usize, state: &D2State, energy: f64) {
        let n = self.n_sites;
        let base = s * n * n;
        for i in 0..n {
            let ai = state.alpha[i].conj();
            for j in 0..n {
                let c = ai * state.alpha[j];
                self.coherence_re[base + i * n + j] += c.re;
                self.coherence_im[base + i * n + j] += c.im;
            }
        }
        let base = s * self.n_modes;
        for (k, l) in state.lambda.iter().enumerate() {
            self.lambda_re[base + k] += l.re;
            self.lambda_im[base + k] += l.im;
            self.lambda_im_sq[base + k] += l.im * l.im;
        }
        self.energy[s] += energy;
    }

    /// Add one finished trajectory.
    pub fn add(&mut self, record: &TrajectoryRecord) -> Result<()> {
        if record.snapshots.len() != self.n_snapshots {
            return Err(Error::DimensionMismatch {
                what: "trajectory snapshots",
                expected: self.n_snapshots,
                got: record.snapshots.len(),
            });
        }
        if record.events.len() != self.n_modes {
            return Err(Error::DimensionMismatch {
                what: "event counts",
                expected: self.n_modes,
                got: record.events.len(),
            });
        }
        for (s, snap) in record.snapshots.iter().enumerate() {
            if snap.state.alpha.len() != self.n_sites || snap.state.lambda.len() != self.n_modes {
                return Err(Error::DimensionMismatch {
                    what: "snapshot state",
                    expected: self.n_sites + self.n_modes,
                    got: snap.state.alpha.len() + snap.state.lambda.len(),
                });
            }
            self.add_snapshot(s, &snap.state, snap.energy);
        }
        for &e in &record.events {
            let e = e as f64;
            self.event_sum += e;
            self.event_sq_sum += e * e;
        }
        self.event_samples += record.events.len() as u64;
        self.n_trajectories += 1;
        Ok(())
    }

    pub fn record_failure(&mut self, failure: TrajectoryFailure) {
        self.failures.push(failure);
    }

    /// Fold `other` into `self`.
    pub fn merge(&mut self, other: &EnsembleAccumulator) -> Result<()> {
        if (self.n_sites, self.n_modes, self.n_snapshots)
            != (other.n_sites, other.n_modes, other.n_snapshots)
        {
            return Err(Error::Other("accumulator shapes differ".to_string()));
        }
        let pairs = [
            (&mut self.coherence_re, &other.coherence_re),
            (&mut self.coherence_im, &other.coherence_im),
            (&mut self.lambda_re, &other.lambda_re),
            (&mut self.lambda_im, &other.lambda_im),
            (&mut self.lambda_im_sq, &other.lambda_im_sq),
            (&mut self.energy, &other.energy),
        ];
        for (a, b) in pairs {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
        self.event_sum.merge(&other.event_sum);
        self.event_sq_sum.merge(&other.event_sq_sum);
        self.event_samples += other.event_samples;
        self.n_trajectories += other.n_trajectories;
        self.failures.extend(other.failures.iter().cloned());
        Ok(())
    }

    fn inv_count(&self) -> f64 {
        if self.n_trajectories == 0 {
            0.0
        } else {
            1.0 / self.n_trajectories as f64
        }
    }

    /// ⟨α_n* α_m⟩ at snapshot `s`, row-major.
    pub fn coherence_mean(&self, s: usize) -> Vec<Complex64> {
        let nn = self.n_sites * self.n_sites;
        let w = self.inv_count();
        (0..nn)
            .map(|k| {
                Complex64::new(
                    self.coherence_re[s * nn + k].value() * w,
                    self.coherence_im[s * nn + k].value() * w,
                )
            })
            .collect()
    }

    /// ⟨λ⟩ at snapshot `s`, all modes.
    pub fn lambda_mean(&self, s: usize) -> Vec<Complex64> {
        let w = self.inv_count();
        let base = s * self.n_modes;
        (0..self.n_modes)
            .map(|k| {
                Complex64::new(
                    self.lambda_re[base + k].value() * w,
                    self.lambda_im[base + k].value() * w,
                )
            })
            .collect()
    }

    /// ⟨(Im λ)²⟩ at snapshot `s`, all modes.
    pub fn im_sq_mean(&self, s: usize) -> Vec<f64> {
        let w = self.inv_count();
        let base = s * self.n_modes;
        (0..self.n_modes)
            .map(|k| self.lambda_im_sq[base + k].value() * w)
            .collect()
    }

    pub fn energy_mean(&self, s: usize) -> f64 {
        self.energy[s].value() * self.inv_count()
    }

    /// Site populations ⟨|α_n|²⟩ at snapshot `s`.
    pub fn site_populations(&self, s: usize) -> Vec<f64> {
        let c = self.coherence_mean(s);
        (0..self.n_sites)
            .map(|n| c[n * self.n_sites + n].re)
            .collect()
    }

    /// Pooled mean and variance of per-(mode, trajectory) event counts.
    pub fn event_statistics(&self) -> (f64, f64) {
        if self.event_samples == 0 {
            return (0.0, 0.0);
        }
        let n = self.event_samples as f64;
        let mean = self.event_sum.value() / n;
        let var = self.event_sq_sum.value() / n - mean * mean;
        (mean, var)
    }
}
