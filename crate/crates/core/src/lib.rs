//! Exciton-bath dynamics with the Davydov D2 ansatz and stochastic bath
//! thermalization.
//!
//! A molecular aggregate of `N` sites, each coupled to its own finite bath of
//! `Q` harmonic modes, is propagated with the Dirac-Frenkel variational
//! equations of motion. Contact with an implicit secondary bath at a fixed
//! temperature is modelled by a discrete-time Bernoulli process that resamples
//! mode momenta from the thermal coherent-state distribution.
//!
//! The crate is `no_std` (it needs `alloc`). IO, configuration files, the
//! parallel ensemble driver and the command line live in the `d2therm` crate.
//!
//! Units: the Hamiltonian is specified in cm⁻¹, temperatures in Kelvin and
//! time in ps. Frequencies are converted to rad/ps once, when the model is
//! built, so that the dynamics runs with ℏ = 1.
#![no_std]
// validation uses `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod dynamics;
pub mod error;
pub mod model;
pub mod observables;
pub mod rng;
pub mod state;
pub mod sum;
pub mod thermalization;
pub mod trajectory;
pub mod units;

pub use num_complex::Complex64;

pub use dynamics::{
    drive_strength, eom_rhs, propagate_segment, rk4_step, DerivativeBuffer, IntegratorConfig,
    Rk4Workspace,
};
pub use error::{Error, Result};
pub use model::{
    build_bath, diagonalize, specific_heat, spectral_density, BathModes, BathSpec, EigenBasis,
    ExcitonModel,
};
pub use observables::{
    bath_temperature, exciton_populations, phase_space_mean, recursion_time,
    windowed_kinetic_energy, TemperatureEstimate, TimeSeries,
};
pub use rng::TrajectoryRng;
pub use state::{init_state, sample_displacement, total_energy, D2State, Excitation, ThermalLaw};
pub use thermalization::{expected_event_count, scatter, ThermalizationParams};
pub use trajectory::{
    run_trajectory, run_trajectory_with, trajectory_seed, EnsembleAccumulator, RunConfig, Snapshot,
    TrajectoryFailure, TrajectoryRecord,
};
pub use units::UnitSystem;
