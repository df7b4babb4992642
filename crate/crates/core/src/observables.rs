//! Ensemble observables: exciton populations, transient bath temperature,
//! phase-space means.
//!
//! Everything here works on ensemble-averaged moments (see
//! [`EnsembleAccumulator`](crate::trajectory::EnsembleAccumulator)); averaging
//! over trajectories always happens before time windowing.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{BathModes, EigenBasis};
use crate::sum::NeumaierSum;
use crate::units::UnitSystem;

/// Observable values on a uniform snapshot grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    /// One vector per snapshot.
    pub values: Vec<Vec<f64>>,
    pub n_trajectories: usize,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>, n_trajectories: usize) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                what: "time series rows",
                expected: times.len(),
                got: values.len(),
            });
        }
        if times.len() > 1 {
            let stride = times[1] - times[0];
            if !(stride > 0.0) {
                return Err(Error::invalid("times", "must be strictly increasing"));
            }
            for (k, w) in times.windows(2).enumerate() {
                let d = w[1] - w[0];
                if !(d > 0.0) || (d - stride).abs() > 1e-9 * stride.max(times[k + 1].abs()) {
                    return Err(Error::invalid(
                        "times",
                        "snapshot grid must have a uniform stride",
                    ));
                }
            }
        }
        Ok(Self {
            times,
            values,
            n_trajectories,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn stride(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }

    /// Column `k` across all snapshots.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[k]).collect()
    }
}

/// Populations of the exciton states from one ensemble-averaged coherence
/// matrix `coherence[n * N + m] = ⟨α_n* α_m⟩`:
/// ρ_e = Σ_nm ψ_ne ⟨α_n* α_m⟩ ψ_me.
pub fn exciton_populations_at(coherence: &[Complex64], basis: &EigenBasis) -> Result<Vec<f64>> {
    let n = basis.dim();
    if coherence.len() != n * n {
        return Err(Error::DimensionMismatch {
            what: "coherence matrix",
            expected: n * n,
            got: coherence.len(),
        });
    }
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            asym = asym.max((coherence[i * n + j] - coherence[j * n + i].conj()).norm());
        }
    }
    if asym > 1e-10 {
        return Err(Error::NotHermitian(asym));
    }
    let mut rho = vec![0.0; n];
    for (e, r) in rho.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let pi = basis.component(i, e);
            if pi == 0.0 {
                continue;
            }
            for j in 0..n {
                acc += coherence[i * n + j] * (pi * basis.component(j, e));
            }
        }
        *r = acc.re;
    }
    Ok(rho)
}

/// Exciton populations for every snapshot.
pub fn exciton_populations(
    times: &[f64],
    coherence: &[Vec<Complex64>],
    basis: &EigenBasis,
    n_trajectories: usize,
) -> Result<TimeSeries> {
    let values = coherence
        .iter()
        .map(|c| exciton_populations_at(c, basis))
        .collect::<Result<Vec<_>>>()?;
    TimeSeries::new(times.to_vec(), values, n_trajectories)
}

/// Windowed mean kinetic energy ⟨K_mq(t, ε)⟩ with K = ω (Im λ)².
///
/// `im_sq[s][k]` is the ensemble mean of (Im λ_k)² at snapshot `s`, `omega`
/// the mode frequencies (any unit; K comes out in the same unit). The window
/// is centered, `epsilon` wide (ps), and truncated at the ends of the series.
pub fn windowed_kinetic_energy(
    im_sq: &[Vec<f64>],
    omega: &[f64],
    stride: f64,
    epsilon: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(stride > 0.0) {
        return Err(Error::invalid("stride", "snapshot stride must be > 0"));
    }
    if !(epsilon >= stride * (1.0 - 1e-9)) {
        return Err(Error::invalid(
            "epsilon",
            alloc::format!("window {epsilon} ps is shorter than the snapshot stride {stride} ps"),
        ));
    }
    let s = im_sq.len();
    let modes = omega.len();
    if let Some(row) = im_sq.iter().find(|r| r.len() != modes) {
        return Err(Error::DimensionMismatch {
            what: "kinetic energy row",
            expected: modes,
            got: row.len(),
        });
    }
    let half = ((0.5 * epsilon / stride) + 1e-9).floor() as usize;
    let mut out = vec![vec![0.0; modes]; s];
    let mut prefix = vec![0.0; s + 1];
    for k in 0..modes {
        let mut acc = NeumaierSum::ZERO;
        for i in 0..s {
            acc += im_sq[i][k];
            prefix[i + 1] = acc.value();
        }
        for (i, row) in out.iter_mut().enumerate() {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(s - 1);
            let mean = (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64;
            row[k] = omega[k] * mean;
        }
    }
    Ok(out)
}

/// Temperature (K) of one mode from its mean kinetic energy: the Bose
/// occupancy inverted, ω / (k_B ln(1 + ω/(2K))). `omega` and `kinetic` share
/// a unit; zero kinetic energy maps to 0 K.
pub fn mode_temperature(omega: f64, kinetic: f64, omega_cm: f64, units: &UnitSystem) -> f64 {
    if kinetic <= 0.0 {
        return 0.0;
    }
    omega_cm / (units.kb * (omega / (2.0 * kinetic)).ln_1p())
}

/// Per-site transient temperature T_m(t) for each snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureEstimate {
    /// `per_site[s][m]`, K.
    pub per_site: Vec<Vec<f64>>,
    /// Window width ε, ps.
    pub epsilon: f64,
}

impl TemperatureEstimate {
    pub fn site(&self, m: usize) -> Vec<f64> {
        self.per_site.iter().map(|r| r[m]).collect()
    }
}

/// Transient bath temperature, the mode average of per-mode inverted
/// occupancies: T_m = (1/(k_B Q)) Σ_q ω_mq / ln(1 + ω_mq / (2⟨K_mq⟩)).
///
/// `kinetic[s]` holds ⟨K⟩ (rad/ps) for all modes, site-major.
pub fn bath_temperature(
    kinetic: &[Vec<f64>],
    bath: &BathModes,
    units: &UnitSystem,
    epsilon: f64,
) -> Result<TemperatureEstimate> {
    let nq = bath.n_modes();
    let omega_cm: Vec<f64> = bath
        .omega()
        .iter()
        .map(|&w| units.angular_to_cm(w))
        .collect();
    let mut per_site = Vec::with_capacity(kinetic.len());
    for row in kinetic {
        if row.len() != bath.len() {
            return Err(Error::DimensionMismatch {
                what: "kinetic energy row",
                expected: bath.len(),
                got: row.len(),
            });
        }
        let temps = (0..bath.n_sites())
            .map(|m| {
                let mut acc = NeumaierSum::ZERO;
                for q in 0..nq {
                    let k = m * nq + q;
                    acc += mode_temperature(bath.omega()[k], row[k], omega_cm[k], units);
                }
                acc.value() / nq as f64
            })
            .collect();
        per_site.push(temps);
    }
    Ok(TemperatureEstimate { per_site, epsilon })
}

/// Ensemble phase-space point (⟨x⟩, ⟨p⟩) = (√2⟨Re λ⟩, √2⟨Im λ⟩) of one mode
/// for every snapshot. `lambda_mean[s]` holds ⟨λ⟩ for all modes.
pub fn phase_space_mean(
    lambda_mean: &[Vec<Complex64>],
    bath: &BathModes,
    site: usize,
    mode: usize,
) -> Result<Vec<(f64, f64)>> {
    if site >= bath.n_sites() {
        return Err(Error::IndexOutOfRange {
            what: "site",
            index: site,
            len: bath.n_sites(),
        });
    }
    if mode >= bath.n_modes() {
        return Err(Error::IndexOutOfRange {
            what: "mode",
            index: mode,
            len: bath.n_modes(),
        });
    }
    let k = bath.index(site, mode);
    lambda_mean
        .iter()
        .map(|row| {
            row.get(k)
                .map(|l| (SQRT_2 * l.re, SQRT_2 * l.im))
                .ok_or(Error::DimensionMismatch {
                    what: "mean displacement row",
                    expected: bath.len(),
                    got: row.len(),
                })
        })
        .collect()
}

/// Bath recursion time 2π/Δω in ps, Δω given in cm⁻¹.
pub fn recursion_time(delta_omega_cm: f64, units: &UnitSystem) -> f64 {
    2.0 * PI / units.cm_to_angular(delta_omega_cm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{diagonalize, ExcitonModel};
    use crate::rng::TrajectoryRng;
    use crate::state::{sample_displacement, ThermalLaw};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const U: UnitSystem = UnitSystem::STANDARD;

    fn outer(v: &[Complex64]) -> Vec<Complex64> {
        let n = v.len();
        let mut c = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                c[i * n + j] = v[i].conj() * v[j];
            }
        }
        c
    }

    #[test]
    fn highest_exciton_population() {
        let model = ExcitonModel::chain(vec![0.0, 250.0, 500.0], 100.0, U).unwrap();
        let basis = diagonalize(&model).unwrap();
        let alpha: Vec<Complex64> = basis
            .eigenvector(2)
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        let rho = exciton_populations_at(&outer(&alpha), &basis).unwrap();
        assert!(rho[0].abs() < 1e-14 && rho[1].abs() < 1e-14);
        assert!((rho[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn uncoupled_excitons_are_sites() {
        let model = ExcitonModel::new(vec![0.0, 10.0, 20.0], vec![0.0; 9], U).unwrap();
        let basis = diagonalize(&model).unwrap();
        let alpha = [
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.48),
            Complex64::new(0.64, 0.0),
        ];
        let rho = exciton_populations_at(&outer(&alpha), &basis).unwrap();
        for (r, a) in rho.iter().zip(&alpha) {
            assert!((r - a.norm_sqr()).abs() < 1e-15);
        }
    }

    #[test]
    fn non_hermitian_coherence_rejected() {
        let basis = EigenBasis::identity(2);
        let c = vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.1, 0.2),
            Complex64::new(0.1, 0.2),
            Complex64::new(0.5, 0.0),
        ];
        assert!(matches!(
            exciton_populations_at(&c, &basis),
            Err(Error::NotHermitian(_))
        ));
    }

    proptest! {
        #[test]
        fn trace_preserved(n in 1usize..6, raw in proptest::collection::vec(-1.0f64..1.0, 72), jraw in proptest::collection::vec(-200.0f64..200.0, 36)) {
            // mixture of three random pure states => Hermitian PSD unit trace
            let mut c = vec![Complex64::new(0.0, 0.0); n * n];
            for k in 0..3 {
                let v: Vec<Complex64> = (0..n).map(|i| Complex64::new(raw[(k * 12 + 2 * i) % 72], raw[(k * 12 + 2 * i + 1) % 72] + 0.01)).collect();
                let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum();
                for (x, y) in c.iter_mut().zip(outer(&v)) {
                    *x += y / (3.0 * norm);
                }
            }
            let mut j = vec![0.0; n * n];
            for a in 0..n {
                for b in (a + 1)..n {
                    j[a * n + b] = jraw[a * 6 + b];
                    j[b * n + a] = jraw[a * 6 + b];
                }
            }
            let model = ExcitonModel::new((0..n).map(|i| 100.0 * i as f64).collect(), j, U).unwrap();
            let basis = diagonalize(&model).unwrap();
            let rho = exciton_populations_at(&c, &basis).unwrap();
            prop_assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(rho.iter().all(|&r| r > -1e-12));
        }
    }

    #[test]
    fn frozen_thermal_ensemble_kinetic_energy() {
        let w = U.cm_to_angular(200.0);
        let law = ThermalLaw::new(300.0, &U).unwrap();
        let mut rng = TrajectoryRng::from_seed(4);
        let (snaps, traj) = (50, 4000);
        let mut im_sq = vec![vec![0.0]; snaps];
        let mut all = Vec::with_capacity(traj);
        for _ in 0..traj {
            all.push(sample_displacement(&law, w, &mut rng));
        }
        let mean_sq: f64 = all.iter().map(|l| l.im * l.im).sum::<f64>() / traj as f64;
        for row in im_sq.iter_mut() {
            row[0] = mean_sq;
        }
        let k = windowed_kinetic_energy(&im_sq, &[w], 0.01, 0.05).unwrap();
        let expected = w * law.occupancy(w) / 2.0;
        let se = w * law.quadrature_variance(w) * (2.0 / traj as f64).sqrt();
        for row in &k {
            assert!((row[0] - expected).abs() < 3.0 * se);
        }
    }

    #[test]
    fn real_displacements_have_no_kinetic_energy() {
        let im_sq = vec![vec![0.0, 0.0]; 10];
        let k = windowed_kinetic_energy(&im_sq, &[1.0, 2.0], 0.01, 0.05).unwrap();
        assert!(k.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn full_width_window_is_global_mean() {
        let s = 21;
        let im_sq: Vec<Vec<f64>> = (0..s).map(|i| vec![(i as f64 * 0.7).sin().abs()]).collect();
        let mean: f64 = im_sq.iter().map(|r| r[0]).sum::<f64>() / s as f64;
        let span = 0.01 * (s - 1) as f64;
        let k = windowed_kinetic_energy(&im_sq, &[2.0], 0.01, 2.0 * span).unwrap();
        for row in &k {
            assert_relative_eq!(row[0], 2.0 * mean, max_relative = 1e-14);
        }
    }

    #[test]
    fn centered_window_is_truncated_at_edges() {
        let im_sq: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        // ε = 50 fs, stride 10 fs: ±2 samples
        let k = windowed_kinetic_energy(&im_sq, &[1.0], 0.01, 0.05).unwrap();
        let got: Vec<f64> = k.iter().map(|r| r[0]).collect();
        assert_eq!(got, vec![1.0, 1.5, 2.0, 3.0, 3.5, 4.0]);
    }

    #[test]
    fn window_narrower_than_stride_rejected() {
        let im_sq = vec![vec![1.0]; 4];
        assert!(windowed_kinetic_energy(&im_sq, &[1.0], 0.01, 0.005).is_err());
    }

    #[test]
    fn analytic_kinetic_energy_inverts_exactly() {
        let spec = crate::model::BathSpec {
            n_modes: 40,
            omega0: 0.01,
            delta_omega: 20.0,
            s: 2.0,
            omega_c: 100.0,
            lambda_reorg: 0.0,
        };
        let bath = crate::model::build_bath(&spec, &U, 2).unwrap();
        for t in [77.0, 200.0, 300.0] {
            let law = ThermalLaw::new(t, &U).unwrap();
            let row: Vec<f64> = bath
                .omega()
                .iter()
                .map(|&w| w * law.occupancy(w) / 2.0)
                .collect();
            for (k, &w) in bath.omega().iter().enumerate() {
                let tm = mode_temperature(w, row[k], U.angular_to_cm(w), &U);
                assert_relative_eq!(tm, t, max_relative = 1e-12);
            }
            let est = bath_temperature(&[row], &bath, &U, 0.05).unwrap();
            assert_relative_eq!(est.per_site[0][0], t, max_relative = 1e-12);
            assert_relative_eq!(est.per_site[0][1], t, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_kinetic_energy_is_zero_temperature() {
        assert_eq!(mode_temperature(1.0, 0.0, 5.3, &U), 0.0);
    }

    #[test]
    fn temperature_is_mode_permutation_invariant() {
        let bath = BathModes::from_parts(1, 3, vec![1.0, 5.0, 20.0], vec![0.0; 3], U).unwrap();
        let rev = BathModes::from_parts(1, 3, vec![20.0, 5.0, 1.0], vec![0.0; 3], U).unwrap();
        let a = bath_temperature(&[vec![3.0, 0.7, 0.05]], &bath, &U, 0.05).unwrap();
        let b = bath_temperature(&[vec![0.05, 0.7, 3.0]], &rev, &U, 0.05).unwrap();
        assert_relative_eq!(a.per_site[0][0], b.per_site[0][0], max_relative = 1e-15);
    }

    #[test]
    fn phase_space_scaling_and_bounds() {
        let bath = BathModes::from_parts(2, 2, vec![1.0; 4], vec![0.0; 4], U).unwrap();
        let rows = vec![vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, -0.5),
        ]];
        let p = phase_space_mean(&rows, &bath, 1, 1).unwrap();
        assert_relative_eq!(p[0].0, SQRT_2);
        assert_relative_eq!(p[0].1, -0.5 * SQRT_2);
        assert!(phase_space_mean(&rows, &bath, 2, 0).is_err());
        assert!(phase_space_mean(&rows, &bath, 0, 2).is_err());
    }

    #[test]
    fn recursion_times() {
        assert_relative_eq!(
            recursion_time(50.0, &U),
            0.667128190396304,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            recursion_time(1.0, &U),
            33.3564095198152,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            recursion_time(2.0, &U),
            recursion_time(1.0, &U) / 2.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn time_series_requires_uniform_grid() {
        assert!(TimeSeries::new(vec![0.0, 0.1, 0.2], vec![vec![]; 3], 1).is_ok());
        assert!(TimeSeries::new(vec![0.0, 0.1, 0.3], vec![vec![]; 3], 1).is_err());
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![vec![]; 2], 1).is_err());
        assert!(TimeSeries::new(vec![0.0, 0.1], vec![vec![]; 1], 1).is_err());
    }
}
