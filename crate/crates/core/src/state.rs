//! D2 variational parameters and thermal initial conditions.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{bose_occupancy, diagonalize, BathModes, ExcitonModel};
use crate::rng::TrajectoryRng;
use crate::units::UnitSystem;

/// Instantaneous D2 parameters: excitation amplitudes α_n and coherent-state
/// displacements λ_mq (site-major, `m * Q + q`).
///
/// Mode coordinate and momentum are x = √2 Re λ and p = √2 Im λ.
#[derive(Debug, Clone, PartialEq)]
pub struct D2State {
    pub alpha: Vec<Complex64>,
    pub lambda: Vec<Complex64>,
    /// Time in ps.
    pub t: f64,
}

impl D2State {
    pub fn zeros(n_sites: usize, n_modes: usize) -> Self {
        Self {
            alpha: vec![Complex64::new(0.0, 0.0); n_sites],
            lambda: vec![Complex64::new(0.0, 0.0); n_sites * n_modes],
            t: 0.0,
        }
    }

    /// Σ_n |α_n|². Not renormalized anywhere; drift from one is the
    /// integrator-quality diagnostic.
    pub fn norm_sqr(&self) -> f64 {
        self.alpha.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self
                .alpha
                .iter()
                .all(|a| a.re.is_finite() && a.im.is_finite())
            && self
                .lambda
                .iter()
                .all(|l| l.re.is_finite() && l.im.is_finite())
    }

    pub fn check_dims(&self, bath: &BathModes) -> Result<()> {
        if self.alpha.len() != bath.n_sites() {
            return Err(Error::DimensionMismatch {
                what: "excitation amplitudes",
                expected: bath.n_sites(),
                got: self.alpha.len(),
            });
        }
        if self.lambda.len() != bath.len() {
            return Err(Error::DimensionMismatch {
                what: "mode displacements",
                expected: bath.len(),
                got: self.lambda.len(),
            });
        }
        Ok(())
    }
}

/// Canonical thermal distribution of coherent-state displacements at a given
/// temperature: both quadratures of λ are Gaussian with variance n̄(ω)/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalLaw {
    temperature: f64,
    /// β in units of (rad/ps)⁻¹.
    beta_angular: f64,
}

impl ThermalLaw {
    pub fn new(temperature: f64, units: &UnitSystem) -> Result<Self> {
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::invalid(
                "temperature",
                alloc::format!("must be a finite value >= 0 K, got {temperature}"),
            ));
        }
        let beta_angular = if temperature == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (units.kb * temperature * units.wavenumber_to_angular)
        };
        Ok(Self {
            temperature,
            beta_angular,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Mean occupancy n̄ = 1/(e^{βω} − 1) for ω in rad/ps.
    pub fn occupancy(&self, omega: f64) -> f64 {
        bose_occupancy(self.beta_angular * omega)
    }

    /// Variance of each quadrature, Re λ and Im λ: n̄/2 = 1/(2(e^{βω} − 1)).
    pub fn quadrature_variance(&self, omega: f64) -> f64 {
        0.5 * self.occupancy(omega)
    }
}

/// Draw λ from the thermal coherent-state distribution for a mode of
/// frequency `omega` (rad/ps). Always consumes one Box-Muller pair.
pub fn sample_displacement(law: &ThermalLaw, omega: f64, rng: &mut TrajectoryRng) -> Complex64 {
    let (a, b) = rng.standard_normal_pair();
    let var = law.quadrature_variance(omega);
    if var == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let sigma = var.sqrt();
    Complex64::new(sigma * a, sigma * b)
}

/// Initial electronic state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Excitation {
    /// All amplitude on one site.
    Site(usize),
    /// An exciton eigenstate, indexed in ascending-energy order.
    Exciton(usize),
}

/// Build the t = 0 state: thermal displacements for every mode (drawn in
/// site-major, mode-minor order) and the requested electronic excitation.
///
/// `laws` holds either one law for all sites or one per site.
pub fn init_state(
    model: &ExcitonModel,
    bath: &BathModes,
    laws: &[ThermalLaw],
    excitation: Excitation,
    rng: &mut TrajectoryRng,
) -> Result<D2State> {
    let n = model.n_sites();
    if bath.n_sites() != n {
        return Err(Error::DimensionMismatch {
            what: "bath sites",
            expected: n,
            got: bath.n_sites(),
        });
    }
    if laws.len() != 1 && laws.len() != n {
        return Err(Error::DimensionMismatch {
            what: "initial temperatures",
            expected: n,
            got: laws.len(),
        });
    }
    let mut state = D2State::zeros(n, bath.n_modes());
    match excitation {
        Excitation::Site(k) => {
            if k >= n {
                return Err(Error::IndexOutOfRange {
                    what: "site",
                    index: k,
                    len: n,
                });
            }
            state.alpha[k] = Complex64::new(1.0, 0.0);
        }
        Excitation::Exciton(e) => {
            if e >= n {
                return Err(Error::IndexOutOfRange {
                    what: "exciton",
                    index: e,
                    len: n,
                });
            }
            let basis = diagonalize(model)?;
            for (site, a) in state.alpha.iter_mut().enumerate() {
                *a = Complex64::new(basis.component(site, e), 0.0);
            }
        }
    }
    for m in 0..n {
        let law = if laws.len() == 1 { &laws[0] } else { &laws[m] };
        for (q, &w) in bath.site_omega(m).iter().enumerate() {
            state.lambda[bath.index(m, q)] = sample_displacement(law, w, rng);
        }
    }
    Ok(state)
}

/// ⟨Ĥ⟩ in the D2 state, cm⁻¹:
/// Σ ε_n|α_n|² + Σ_{n≠m} J_nm α_n*α_m + Σ ω|λ|² − Σ_n |α_n|² Σ_q ω g 2Re λ.
pub fn total_energy(state: &D2State, model: &ExcitonModel, bath: &BathModes) -> f64 {
    let n = model.n_sites();
    let units = bath.units();
    let mut e = 0.0;
    let mut hop = Complex64::new(0.0, 0.0);
    for i in 0..n {
        e += model.epsilon()[i] * state.alpha[i].norm_sqr();
        for j in 0..n {
            if i != j {
                hop += state.alpha[i].conj() * state.alpha[j] * model.coupling(i, j);
            }
        }
    }
    debug_assert!(hop.im.abs() < 1e-10 * (1.0 + hop.re.abs()));
    e += hop.re;
    for m in 0..n {
        let pop = state.alpha[m].norm_sqr();
        let mut bath_e = 0.0;
        let mut coupling_e = 0.0;
        for ((w, g), l) in bath
            .site_omega(m)
            .iter()
            .zip(bath.site_g(m))
            .zip(&state.lambda[bath.index(m, 0)..bath.index(m + 1, 0)])
        {
            let w_cm = units.angular_to_cm(*w);
            bath_e += w_cm * l.norm_sqr();
            coupling_e += w_cm * g * 2.0 * l.re;
        }
        e += bath_e - pop * coupling_e;
    }
    e
}
