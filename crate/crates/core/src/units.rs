//! Physical constants and unit conversions (ℏ = 1 throughout).

use core::f64::consts::PI;

/// Boltzmann constant in cm⁻¹/K.
pub const KB_CM_PER_K: f64 = 0.6950348;

/// Speed of light in cm/ps.
pub const SPEED_OF_LIGHT_CM_PER_PS: f64 = 0.0299792458;

/// Angular frequency in rad/ps corresponding to 1 cm⁻¹ (2πc).
pub const WAVENUMBER_TO_ANGULAR: f64 = 2.0 * PI * SPEED_OF_LIGHT_CM_PER_PS;

/// Conversion factors between the reporting units (cm⁻¹, K) and the
/// internal units (rad/ps).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    /// Boltzmann constant, cm⁻¹/K.
    pub kb: f64,
    /// rad·ps⁻¹ per cm⁻¹.
    pub wavenumber_to_angular: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::STANDARD
    }
}

impl UnitSystem {
    pub const STANDARD: UnitSystem = UnitSystem {
        kb: KB_CM_PER_K,
        wavenumber_to_angular: WAVENUMBER_TO_ANGULAR,
    };

    #[inline]
    pub fn cm_to_angular(&self, wavenumber: f64) -> f64 {
        wavenumber * self.wavenumber_to_angular
    }

    #[inline]
    pub fn angular_to_cm(&self, omega: f64) -> f64 {
        omega / self.wavenumber_to_angular
    }

    /// Inverse temperature β = 1/(k_B T) in cm (i.e. per cm⁻¹ of energy).
    /// Returns `f64::INFINITY` at T = 0.
    #[inline]
    pub fn beta_cm(&self, temperature_k: f64) -> f64 {
        if temperature_k <= 0.0 {
            f64::INFINITY
        } else {
            1.0 / (self.kb * temperature_k)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        assert_eq!(UnitSystem::STANDARD.kb, 0.6950348);
        assert!((WAVENUMBER_TO_ANGULAR - 0.1883651567).abs() < 1e-10);
    }

    #[test]
    fn round_trip_is_identity() {
        let u = UnitSystem::default();
        for &w in &[0.01, 1.0, 50.0, 100.0, 749.01, 1.0e5] {
            let back = u.angular_to_cm(u.cm_to_angular(w));
            assert!(((back - w) / w).abs() < 1e-14, "{w} -> {back}");
        }
    }

    #[test]
    fn zero_temperature_beta_is_infinite() {
        assert!(UnitSystem::STANDARD.beta_cm(0.0).is_infinite());
    }
}
