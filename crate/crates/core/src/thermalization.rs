//! Stochastic contact with an implicit secondary bath.
//!
//! The run is cut into intervals of length τ. At the end of each interval
//! every primary-bath mode flips a coin that lands heads with probability
//! ν·τ; on heads the mode momentum p = √2 Im λ is redrawn from the thermal
//! distribution at T_∞ while the coordinate is left alone. For ν·τ ≪ 1 the
//! number of events in a time t is Poisson with mean ν·t.

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::BathModes;
use crate::rng::TrajectoryRng;
use crate::state::{D2State, ThermalLaw};
use crate::units::UnitSystem;

/// Above this ν·τ the Bernoulli process is a poor stand-in for Poisson
/// statistics.
pub const POISSON_WARN_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalizationParams {
    /// Scattering rate per mode, ps⁻¹.
    pub nu: f64,
    /// Scattering interval, ps.
    pub tau: f64,
    /// Secondary-bath temperature, K.
    pub t_inf: f64,
}

impl ThermalizationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::invalid(
                "nu",
                alloc::format!("must be >= 0, got {}", self.nu),
            ));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(
                "tau",
                alloc::format!("must be > 0, got {}", self.tau),
            ));
        }
        if !(self.t_inf >= 0.0 && self.t_inf.is_finite()) {
            return Err(Error::invalid(
                "t_inf",
                alloc::format!("must be >= 0 K, got {}", self.t_inf),
            ));
        }
        if self.flip_probability() > 1.0 {
            return Err(Error::invalid(
                "nu",
                alloc::format!("nu*tau = {} exceeds 1", self.flip_probability()),
            ));
        }
        Ok(())
    }

    /// Per-mode, per-interval scattering probability ν·τ.
    #[inline]
    pub fn flip_probability(&self) -> f64 {
        self.nu * self.tau
    }

    /// True when ν·τ is large enough that the Poisson limit is degraded.
    pub fn poisson_degraded(&self) -> bool {
        self.flip_probability() > POISSON_WARN_THRESHOLD
    }

    pub fn law(&self, units: &UnitSystem) -> Result<ThermalLaw> {
        ThermalLaw::new(self.t_inf, units)
    }
}

/// Apply one scattering round to every mode, site-major and mode-minor.
///
/// Each mode consumes one uniform for its coin, and one Box-Muller pair on
/// heads. α and Re λ are never touched. Returns the number of modes that
/// scattered; per-mode outcomes are written to `events` when given.
pub fn scatter(
    state: &mut D2State,
    bath: &BathModes,
    params: &ThermalizationParams,
    law: &ThermalLaw,
    rng: &mut TrajectoryRng,
    mut events: Option<&mut [u32]>,
) -> usize {
    let p = params.flip_probability();
    let mut count = 0;
    for (k, (l, &w)) in state.lambda.iter_mut().zip(bath.omega()).enumerate() {
        if rng.coin(p) {
            let sigma = law.quadrature_variance(w).sqrt();
            let z = rng.standard_normal();
            l.im = sigma * z;
            count += 1;
            if let Some(ev) = events.as_deref_mut() {
                ev[k] += 1;
            }
        }
    }
    count
}

/// Poisson mean ν·t of scattering events per mode over a run.
pub fn expected_event_count(nu: f64, t_total: f64) -> f64 {
    nu * t_total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_bath, BathSpec};
    use crate::state::{init_state, Excitation};
    use crate::ExcitonModel;
    use alloc::vec;
    use num_complex::Complex64;

    const U: UnitSystem = UnitSystem::STANDARD;

    fn setup(q: usize) -> (BathModes, D2State) {
        let model = ExcitonModel::chain(vec![0.0, 100.0], 50.0, U).unwrap();
        let spec = BathSpec {
            n_modes: q,
            omega0: 10.0,
            delta_omega: 20.0,
            s: 2.0,
            omega_c: 100.0,
            lambda_reorg: 40.0,
        };
        let bath = build_bath(&spec, &U, 2).unwrap();
        let law = ThermalLaw::new(300.0, &U).unwrap();
        let st = init_state(
            &model,
            &bath,
            &[law],
            Excitation::Site(1),
            &mut TrajectoryRng::from_seed(1),
        )
        .unwrap();
        (bath, st)
    }

    #[test]
    fn zero_rate_is_identity() {
        let (bath, st) = setup(20);
        let params = ThermalizationParams {
            nu: 0.0,
            tau: 0.01,
            t_inf: 200.0,
        };
        let law = params.law(&U).unwrap();
        let mut s = st.clone();
        let mut rng = TrajectoryRng::from_seed(3);
        for _ in 0..100 {
            assert_eq!(scatter(&mut s, &bath, &params, &law, &mut rng, None), 0);
        }
        assert_eq!(s, st);
    }

    #[test]
    fn flip_probability_from_reported_values() {
        let params = ThermalizationParams {
            nu: 2.5,
            tau: 0.01,
            t_inf: 77.0,
        };
        assert!((params.flip_probability() - 0.025).abs() < 1e-15);
        assert!(!params.poisson_degraded());
        let degraded = ThermalizationParams {
            nu: 50.0,
            tau: 0.01,
            t_inf: 77.0,
        };
        assert!(degraded.poisson_degraded());
        assert!(degraded.validate().is_ok());
        assert!(ThermalizationParams {
            nu: 200.0,
            ..degraded
        }
        .validate()
        .is_err());
        assert!(ThermalizationParams {
            tau: 0.0,
            ..degraded
        }
        .validate()
        .is_err());
        assert!(ThermalizationParams {
            nu: -1.0,
            ..degraded
        }
        .validate()
        .is_err());
    }

    #[test]
    fn certain_scattering_preserves_coordinates_and_amplitudes() {
        let (bath, st) = setup(30);
        let params = ThermalizationParams {
            nu: 100.0,
            tau: 0.01,
            t_inf: 200.0,
        };
        let law = params.law(&U).unwrap();
        let mut s = st.clone();
        let mut rng = TrajectoryRng::from_seed(9);
        let n = scatter(&mut s, &bath, &params, &law, &mut rng, None);
        assert_eq!(n, bath.len());
        assert_eq!(s.alpha, st.alpha);
        for (a, b) in s.lambda.iter().zip(&st.lambda) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_ne!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn certain_scattering_matches_target_marginal() {
        let bath = BathModes::from_parts(1, 1, vec![U.cm_to_angular(100.0)], vec![0.0], U).unwrap();
        let params = ThermalizationParams {
            nu: 100.0,
            tau: 0.01,
            t_inf: 200.0,
        };
        let law = params.law(&U).unwrap();
        let var = law.quadrature_variance(bath.omega()[0]);
        let mut rng = TrajectoryRng::from_seed(17);
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            // start far from the target distribution
            let mut s = D2State {
                alpha: vec![Complex64::new(1.0, 0.0)],
                lambda: vec![Complex64::new(3.0, 5.0)],
                t: 0.0,
            };
            scatter(&mut s, &bath, &params, &law, &mut rng, None);
            acc += s.lambda[0].im * s.lambda[0].im;
        }
        let se = var * (2.0 / n as f64).sqrt();
        assert!((acc / n as f64 - var).abs() < 3.0 * se);
    }

    #[test]
    fn event_counts_follow_poisson() {
        assert_eq!(expected_event_count(2.5, 10.0), 25.0);
        assert_eq!(expected_event_count(0.0, 10.0), 0.0);
        let bath = BathModes::from_parts(1, 1, vec![1.0], vec![0.0], U).unwrap();
        let params = ThermalizationParams {
            nu: 2.5,
            tau: 0.01,
            t_inf: 77.0,
        };
        let law = params.law(&U).unwrap();
        let intervals = 1000; // 10 ps
        let runs = 5000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for r in 0..runs {
            let mut rng = TrajectoryRng::from_seed(1000 + r);
            let mut s = D2State {
                alpha: vec![Complex64::new(1.0, 0.0)],
                lambda: vec![Complex64::new(0.0, 0.0)],
                t: 0.0,
            };
            let mut ev = [0u32];
            for _ in 0..intervals {
                scatter(&mut s, &bath, &params, &law, &mut rng, Some(&mut ev));
            }
            let k = ev[0] as f64;
            s1 += k;
            s2 += k * k;
        }
        let mean = s1 / runs as f64;
        let var = s2 / runs as f64 - mean * mean;
        let expected = expected_event_count(params.nu, 10.0);
        assert!(
            (mean - expected).abs() < 3.0 * (expected / runs as f64).sqrt(),
            "mean {mean}"
        );
        assert!((var / mean - 1.0).abs() < 0.1, "var/mean {}", var / mean);
    }

    #[test]
    fn stream_consumption_is_outcome_independent() {
        let (bath, st) = setup(10);
        let law = ThermalLaw::new(200.0, &U).unwrap();
        let off = ThermalizationParams {
            nu: 0.0,
            tau: 0.01,
            t_inf: 200.0,
        };
        let mut a = TrajectoryRng::from_seed(5);
        let mut b = TrajectoryRng::from_seed(5);
        let mut s = st.clone();
        scatter(&mut s, &bath, &off, &law, &mut a, None);
        for _ in 0..bath.len() {
            b.uniform();
        }
        assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
    }
}
