//! Parallel Monte Carlo ensemble.
//!
//! Trajectory indices are cut into fixed blocks of [`BLOCK_SIZE`]. Each block
//! is run sequentially into its own accumulator, blocks run in parallel, and
//! block accumulators are merged strictly in block order. Neither the block
//! layout nor the merge order depends on the number of worker threads, so
//! the merged result is bit-identical for any thread count.

use std::ops::Range;

use d2therm_core::observables::{
    bath_temperature, exciton_populations, phase_space_mean, windowed_kinetic_energy, TimeSeries,
};
use d2therm_core::{
    diagonalize, run_trajectory, BathModes, EigenBasis, EnsembleAccumulator, RunConfig,
    TrajectoryFailure, TrajectoryRecord,
};
use rayon::prelude::*;

use crate::error::{Result, SimError};

/// Trajectories per work item.
pub const BLOCK_SIZE: usize = 8;

/// Fraction of failed trajectories above which a run is aborted.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

type RecordHook<'a> = &'a (dyn Fn(&TrajectoryRecord) + Sync);
type ProgressHook<'a> = &'a dyn Fn(&EnsembleAccumulator) -> Result<()>;

#[derive(Clone, Copy, Default)]
pub struct EnsembleOptions<'a> {
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    /// Called with every successful trajectory record (debug dumps).
    pub on_record: Option<RecordHook<'a>>,
    /// Called on the caller's thread with the running total after every
    /// wave of blocks (checkpointing).
    pub on_progress: Option<ProgressHook<'a>>,
}

impl std::fmt::Debug for EnsembleOptions<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnsembleOptions")
            .field("threads", &self.threads)
            .field("on_record", &self.on_record.is_some())
            .field("on_progress", &self.on_progress.is_some())
            .finish()
    }
}

/// Merged ensemble moments plus what is needed to turn them into
/// observables.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub accumulator: EnsembleAccumulator,
    pub basis: EigenBasis,
    pub bath: BathModes,
    pub master_seed: u64,
}

fn run_block(
    config: &RunConfig,
    indices: Range<usize>,
    hook: Option<RecordHook<'_>>,
) -> EnsembleAccumulator {
    let mut acc = EnsembleAccumulator::for_config(config);
    for i in indices {
        match run_trajectory(config, i as u64) {
            Ok(rec) => {
                if let Some(h) = hook {
                    h(&rec);
                }
                // shapes come from the same config
                acc.add(&rec).expect("record shape matches accumulator");
            }
            Err(f) => acc.record_failure(f),
        }
    }
    acc
}

/// Accumulate trajectories `range` of `config` without the failure check.
pub fn run_ensemble_range(
    config: &RunConfig,
    range: Range<usize>,
    options: &EnsembleOptions<'_>,
) -> Result<EnsembleAccumulator> {
    extend_ensemble(
        config,
        EnsembleAccumulator::for_config(config),
        range,
        options,
    )
}

fn extend_ensemble(
    config: &RunConfig,
    start: EnsembleAccumulator,
    range: Range<usize>,
    options: &EnsembleOptions<'_>,
) -> Result<EnsembleAccumulator> {
    config.validate()?;
    let blocks: Vec<Range<usize>> = (range.start..range.end)
        .step_by(BLOCK_SIZE)
        .map(|s| s..(s + BLOCK_SIZE).min(range.end))
        .collect();
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = options.threads {
            b = b.num_threads(n.max(1));
        }
        b.build().map_err(|e| SimError::Parse(e.to_string()))?
    };
    let wave = pool.current_num_threads().max(1) * 2;
    let mut total = start;
    for chunk in blocks.chunks(wave) {
        let hook = options.on_record;
        let parts: Vec<EnsembleAccumulator> = pool.install(|| {
            chunk
                .par_iter()
                .map(|r| run_block(config, r.clone(), hook))
                .collect()
        });
        for p in &parts {
            total.merge(p)?;
        }
        if let Some(hook) = options.on_progress {
            hook(&total)?;
        }
    }
    Ok(total)
}

pub(crate) fn check_failures(acc: &EnsembleAccumulator, total: usize) -> Result<()> {
    let failed = acc.failures.len();
    if failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(SimError::TooManyFailures {
            failed,
            total,
            first: acc
                .failures
                .first()
                .map(TrajectoryFailure::to_string)
                .unwrap_or_default(),
        });
    }
    Ok(())
}

/// Run the full ensemble of `config.n_trajectories` trajectories.
pub fn run_ensemble(config: &RunConfig, options: &EnsembleOptions<'_>) -> Result<EnsembleResult> {
    let acc = run_ensemble_range(config, 0..config.n_trajectories, options)?;
    check_failures(&acc, config.n_trajectories)?;
    EnsembleResult::from_accumulator(config, acc)
}

/// Continue an ensemble from an accumulator holding trajectories
/// `0..resume.n_trajectories + resume.failures.len()`.
pub fn resume_ensemble(
    config: &RunConfig,
    resume: EnsembleAccumulator,
    options: &EnsembleOptions<'_>,
) -> Result<EnsembleResult> {
    let done = resume.n_trajectories as usize + resume.failures.len();
    if done > config.n_trajectories {
        return Err(SimError::Checkpoint(format!(
            "checkpoint holds {done} trajectories but the run asks for {}",
            config.n_trajectories
        )));
    }
    let expected = EnsembleAccumulator::for_config(config);
    if (resume.n_sites, resume.n_modes, resume.n_snapshots)
        != (expected.n_sites, expected.n_modes, expected.n_snapshots)
    {
        return Err(SimError::Checkpoint(
            "accumulator shape does not match the configuration".into(),
        ));
    }
    let acc = extend_ensemble(config, resume, done..config.n_trajectories, options)?;
    check_failures(&acc, config.n_trajectories)?;
    EnsembleResult::from_accumulator(config, acc)
}

impl EnsembleResult {
    pub fn from_accumulator(config: &RunConfig, accumulator: EnsembleAccumulator) -> Result<Self> {
        let expected = EnsembleAccumulator::for_config(config);
        if (
            accumulator.n_sites,
            accumulator.n_modes,
            accumulator.n_snapshots,
        ) != (expected.n_sites, expected.n_modes, expected.n_snapshots)
        {
            return Err(SimError::Checkpoint(
                "accumulator shape does not match the configuration".into(),
            ));
        }
        Ok(Self {
            times: config.snapshot_times(),
            accumulator,
            basis: diagonalize(&config.model)?,
            bath: config.bath.clone(),
            master_seed: config.master_seed,
        })
    }

    pub fn n_trajectories(&self) -> usize {
        self.accumulator.n_trajectories as usize
    }

    pub fn n_snapshots(&self) -> usize {
        self.times.len()
    }

    pub fn failures(&self) -> &[TrajectoryFailure] {
        &self.accumulator.failures
    }

    /// Exciton populations ρ_e(t), ascending exciton energy.
    pub fn exciton_populations(&self) -> Result<TimeSeries> {
        let coh: Vec<_> = (0..self.n_snapshots())
            .map(|s| self.accumulator.coherence_mean(s))
            .collect();
        Ok(exciton_populations(
            &self.times,
            &coh,
            &self.basis,
            self.n_trajectories(),
        )?)
    }

    pub fn site_populations(&self) -> Result<TimeSeries> {
        let values = (0..self.n_snapshots())
            .map(|s| self.accumulator.site_populations(s))
            .collect();
        Ok(TimeSeries::new(
            self.times.clone(),
            values,
            self.n_trajectories(),
        )?)
    }

    /// Windowed kinetic energies ⟨K_mq(t, ε)⟩ in rad/ps.
    pub fn kinetic_energy(&self, epsilon: f64) -> Result<Vec<Vec<f64>>> {
        let im_sq: Vec<Vec<f64>> = (0..self.n_snapshots())
            .map(|s| self.accumulator.im_sq_mean(s))
            .collect();
        Ok(windowed_kinetic_energy(
            &im_sq,
            self.bath.omega(),
            self.stride(),
            epsilon,
        )?)
    }

    /// Per-site bath temperature T_m(t) in K with window `epsilon` (ps).
    pub fn temperature(&self, epsilon: f64) -> Result<TimeSeries> {
        let k = self.kinetic_energy(epsilon)?;
        let est = bath_temperature(&k, &self.bath, self.bath.units(), epsilon)?;
        Ok(TimeSeries::new(
            self.times.clone(),
            est.per_site,
            self.n_trajectories(),
        )?)
    }

    /// (⟨x⟩, ⟨p⟩) of one mode over time.
    pub fn phase_space(&self, site: usize, mode: usize) -> Result<Vec<(f64, f64)>> {
        let means: Vec<_> = (0..self.n_snapshots())
            .map(|s| self.accumulator.lambda_mean(s))
            .collect();
        Ok(phase_space_mean(&means, &self.bath, site, mode)?)
    }

    pub fn energy(&self) -> Result<TimeSeries> {
        let values = (0..self.n_snapshots())
            .map(|s| vec![self.accumulator.energy_mean(s)])
            .collect();
        Ok(TimeSeries::new(
            self.times.clone(),
            values,
            self.n_trajectories(),
        )?)
    }

    fn stride(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            f64::INFINITY
        }
    }
}
