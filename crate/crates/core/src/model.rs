//! Aggregate Hamiltonian, bath discretization and thermodynamic helpers.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::units::UnitSystem;

/// Super-Ohmic spectral density ω^s·exp(−ω/ω_c).
pub fn spectral_density(omega: f64, s: f64, omega_c: f64) -> f64 {
    if omega == 0.0 {
        return if s == 0.0 { 1.0 } else { 0.0 };
    }
    omega.powf(s) * (-omega / omega_c).exp()
}

/// Heat capacity of one harmonic oscillator in units of k_B,
/// (βω)² e^{βω}/(e^{βω} − 1)². `beta` and `omega` in reciprocal units.
pub fn specific_heat(beta: f64, omega: f64) -> f64 {
    let half = 0.5 * beta * omega;
    if half == 0.0 {
        return 1.0;
    }
    // e^x/(e^x-1)^2 = 1/(4 sinh^2(x/2))
    let r = half / half.sinh();
    r * r
}

/// Bose-Einstein occupancy 1/(e^{x} − 1) for x = βω. Zero for x = ∞.
#[inline]
pub fn bose_occupancy(beta_omega: f64) -> f64 {
    if beta_omega.is_infinite() {
        0.0
    } else {
        1.0 / beta_omega.exp_m1()
    }
}

/// Electronic part of the aggregate Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitonModel {
    n_sites: usize,
    /// Site energies ε_n, cm⁻¹.
    epsilon: Vec<f64>,
    /// Row-major N×N resonant couplings J_nm, cm⁻¹, zero diagonal.
    coupling: Vec<f64>,
    epsilon_angular: Vec<f64>,
    coupling_angular: Vec<f64>,
    units: UnitSystem,
}

impl ExcitonModel {
    /// `coupling` is row-major N×N. It must be symmetric with a zero
    /// diagonal.
    pub fn new(epsilon: Vec<f64>, coupling: Vec<f64>, units: UnitSystem) -> Result<Self> {
        let n = epsilon.len();
        if n == 0 {
            return Err(Error::invalid("epsilon", "at least one site is required"));
        }
        if coupling.len() != n * n {
            return Err(Error::DimensionMismatch {
                what: "coupling matrix",
                expected: n * n,
                got: coupling.len(),
            });
        }
        if let Some(e) = epsilon.iter().find(|e| !e.is_finite()) {
            return Err(Error::invalid(
                "epsilon",
                alloc::format!("non-finite entry {e}"),
            ));
        }
        for i in 0..n {
            if coupling[i * n + i] != 0.0 {
                return Err(Error::invalid(
                    "J",
                    alloc::format!("diagonal entry J[{i}][{i}] must be zero"),
                ));
            }
            for j in (i + 1)..n {
                let (a, b) = (coupling[i * n + j], coupling[j * n + i]);
                if !a.is_finite() || a != b {
                    return Err(Error::NotSymmetric {
                        row: i,
                        col: j,
                        a,
                        b,
                    });
                }
            }
        }
        let epsilon_angular = epsilon.iter().map(|&e| units.cm_to_angular(e)).collect();
        let coupling_angular = coupling.iter().map(|&j| units.cm_to_angular(j)).collect();
        Ok(Self {
            n_sites: n,
            epsilon,
            coupling,
            epsilon_angular,
            coupling_angular,
            units,
        })
    }

    /// Linear chain with uniform nearest-neighbour coupling.
    pub fn chain(epsilon: Vec<f64>, nearest_neighbor: f64, units: UnitSystem) -> Result<Self> {
        let n = epsilon.len();
        let mut j = vec![0.0; n * n];
        for i in 0..n.saturating_sub(1) {
            j[i * n + i + 1] = nearest_neighbor;
            j[(i + 1) * n + i] = nearest_neighbor;
        }
        Self::new(epsilon, j, units)
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn epsilon(&self) -> &[f64] {
        &self.epsilon
    }

    /// J_nm in cm⁻¹.
    #[inline]
    pub fn coupling(&self, n: usize, m: usize) -> f64 {
        self.coupling[n * self.n_sites + m]
    }

    pub fn coupling_matrix(&self) -> &[f64] {
        &self.coupling
    }

    pub(crate) fn epsilon_angular(&self) -> &[f64] {
        &self.epsilon_angular
    }

    pub(crate) fn coupling_angular(&self) -> &[f64] {
        &self.coupling_angular
    }

    pub fn units(&self) -> &UnitSystem {
        &self.units
    }

    /// H_S as a dense row-major matrix in cm⁻¹.
    pub fn hamiltonian(&self) -> Vec<f64> {
        let n = self.n_sites;
        let mut h = self.coupling.clone();
        for i in 0..n {
            h[i * n + i] = self.epsilon[i];
        }
        h
    }
}

/// Discretization of the per-site spectral density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    /// Modes per site.
    pub n_modes: usize,
    /// Frequency of the first mode, cm⁻¹.
    pub omega0: f64,
    /// Grid step Δω, cm⁻¹.
    pub delta_omega: f64,
    /// Ohmicity exponent.
    pub s: f64,
    /// Cutoff ω_c, cm⁻¹.
    pub omega_c: f64,
    /// Reorganization energy Λ = Σ_q ω_q g_q² per site, cm⁻¹.
    pub lambda_reorg: f64,
}

impl BathSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::invalid(
                "Q",
                "at least one mode per site is required",
            ));
        }
        let positive = [
            ("omega0", self.omega0),
            ("delta_omega", self.delta_omega),
            ("omega_c", self.omega_c),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, alloc::format!("must be > 0, got {v}")));
            }
        }
        if !(self.lambda_reorg >= 0.0 && self.lambda_reorg.is_finite()) {
            return Err(Error::invalid(
                "lambda_reorg",
                alloc::format!("must be >= 0, got {}", self.lambda_reorg),
            ));
        }
        if !self.s.is_finite() {
            return Err(Error::invalid("s", "must be finite"));
        }
        Ok(())
    }

    /// Mode frequencies ω_q = ω₀ + (q − 1)Δω in cm⁻¹.
    pub fn frequencies_cm(&self) -> Vec<f64> {
        (0..self.n_modes)
            .map(|q| self.omega0 + q as f64 * self.delta_omega)
            .collect()
    }
}

/// Discretized local baths: `n_modes` modes for each of `n_sites` sites,
/// stored site-major (index `m * n_modes + q`).
#[derive(Debug, Clone, PartialEq)]
pub struct BathModes {
    n_sites: usize,
    n_modes: usize,
    /// ω_mq in rad/ps.
    omega: Vec<f64>,
    /// Dimensionless couplings g_mq.
    g: Vec<f64>,
    units: UnitSystem,
}

impl BathModes {
    /// Assemble baths from explicit frequencies (rad/ps) and couplings.
    pub fn from_parts(
        n_sites: usize,
        n_modes: usize,
        omega: Vec<f64>,
        g: Vec<f64>,
        units: UnitSystem,
    ) -> Result<Self> {
        let len = n_sites * n_modes;
        if omega.len() != len {
            return Err(Error::DimensionMismatch {
                what: "bath frequencies",
                expected: len,
                got: omega.len(),
            });
        }
        if g.len() != len {
            return Err(Error::DimensionMismatch {
                what: "bath couplings",
                expected: len,
                got: g.len(),
            });
        }
        if let Some(w) = omega.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::invalid(
                "omega",
                alloc::format!("mode frequency {w} is not > 0"),
            ));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("g", "non-finite coupling"));
        }
        Ok(Self {
            n_sites,
            n_modes,
            omega,
            g,
            units,
        })
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    #[inline]
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Total number of modes, N·Q.
    #[inline]
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// All frequencies in rad/ps, site-major.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// All couplings, site-major.
    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn site_omega(&self, site: usize) -> &[f64] {
        &self.omega[site * self.n_modes..(site + 1) * self.n_modes]
    }

    pub fn site_g(&self, site: usize) -> &[f64] {
        &self.g[site * self.n_modes..(site + 1) * self.n_modes]
    }

    #[inline]
    pub fn index(&self, site: usize, mode: usize) -> usize {
        site * self.n_modes + mode
    }

    pub fn omega_cm(&self, site: usize, mode: usize) -> f64 {
        self.units.angular_to_cm(self.omega[self.index(site, mode)])
    }

    pub fn units(&self) -> &UnitSystem {
        &self.units
    }

    /// Σ_q ω_mq g_mq² for site `m`, in cm⁻¹.
    pub fn reorganization_energy(&self, site: usize) -> f64 {
        let mut acc = crate::sum::NeumaierSum::ZERO;
        for (w, g) in self.site_omega(site).iter().zip(self.site_g(site)) {
            acc += self.units.angular_to_cm(*w) * g * g;
        }
        acc.value()
    }

    /// Mode of `site` whose frequency is closest to `target_cm`.
    pub fn nearest_mode(&self, site: usize, target_cm: f64) -> usize {
        let target = self.units.cm_to_angular(target_cm);
        self.site_omega(site)
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - target)
                    .abs()
                    .partial_cmp(&(b.1 - target).abs())
                    .unwrap_or(Ordering::Equal)
            })
            .map(|(q, _)| q)
            .unwrap_or(0)
    }
}

/// Discretize the spectral density into `n_sites` identical local baths.
///
/// g_q² = Λ·(C″(ω_q)/ω_q²) / Σ_q′ C″(ω_q′)/ω_q′, which makes Σ_q ω_q g_q² = Λ.
pub fn build_bath(spec: &BathSpec, units: &UnitSystem, n_sites: usize) -> Result<BathModes> {
    spec.validate()?;
    if n_sites == 0 {
        return Err(Error::invalid("n_sites", "at least one site is required"));
    }
    let freqs = spec.frequencies_cm();
    let weights: Vec<f64> = freqs
        .iter()
        .map(|&w| spectral_density(w, spec.s, spec.omega_c) / (w * w))
        .collect();
    let mut norm = crate::sum::NeumaierSum::ZERO;
    for (w, wt) in freqs.iter().zip(&weights) {
        norm += w * wt;
    }
    let norm = norm.value();
    let g_site: Vec<f64> = if spec.lambda_reorg == 0.0 {
        vec![0.0; spec.n_modes]
    } else {
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::DegenerateSpectralDensity);
        }
        weights
            .iter()
            .map(|wt| (spec.lambda_reorg * wt / norm).sqrt())
            .collect()
    };
    let omega_site: Vec<f64> = freqs.iter().map(|&w| units.cm_to_angular(w)).collect();

    let mut omega = Vec::with_capacity(n_sites * spec.n_modes);
    let mut g = Vec::with_capacity(n_sites * spec.n_modes);
    for _ in 0..n_sites {
        omega.extend_from_slice(&omega_site);
        g.extend_from_slice(&g_site);
    }
    BathModes::from_parts(n_sites, spec.n_modes, omega, g, *units)
}

/// Exciton eigenbasis of H_S. `vectors` is row-major with column `e` holding
/// eigenvector ψ_·e, i.e. `vectors[n * N + e] = ψ_ne`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    pub energies: Vec<f64>,
    pub vectors: Vec<f64>,
    n: usize,
}

impl EigenBasis {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn component(&self, site: usize, exciton: usize) -> f64 {
        self.vectors[site * self.n + exciton]
    }

    /// Column `e` as a vector over sites.
    pub fn eigenvector(&self, exciton: usize) -> Vec<f64> {
        (0..self.n).map(|s| self.component(s, exciton)).collect()
    }

    /// Identity basis (useful when only site populations are wanted).
    pub fn identity(n: usize) -> Self {
        let mut vectors = vec![0.0; n * n];
        for i in 0..n {
            vectors[i * n + i] = 1.0;
        }
        Self {
            energies: vec![0.0; n],
            vectors,
            n,
        }
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Diagonalize H_S with cyclic Jacobi rotations.
///
/// Eigenpairs are sorted by ascending energy (stable: ties keep original
/// index order) and each eigenvector is signed so that its largest-magnitude
/// entry is positive.
pub fn diagonalize(model: &ExcitonModel) -> Result<EigenBasis> {
    symmetric_eigen(&model.hamiltonian(), model.n_sites())
}

/// Jacobi eigen-decomposition of a symmetric row-major `n × n` matrix.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> Result<EigenBasis> {
    if matrix.len() != n * n {
        return Err(Error::DimensionMismatch {
            what: "matrix",
            expected: n * n,
            got: matrix.len(),
        });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (matrix[i * n + j], matrix[j * n + i]);
            if a != b {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    a,
                    b,
                });
            }
        }
    }
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-12 * frob;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(&a, n);
        if off <= tol || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[i * n + i]
            .partial_cmp(&a[j * n + j])
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    let energies: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (e, &col) in order.iter().enumerate() {
        let mut pivot = 0;
        for k in 1..n {
            if v[k * n + col].abs() > v[pivot * n + col].abs() {
                pivot = k;
            }
        }
        let sign = if v[pivot * n + col] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            vectors[k * n + e] = sign * v[k * n + col];
        }
    }
    Ok(EigenBasis {
        energies,
        vectors,
        n,
    })
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const U: UnitSystem = UnitSystem::STANDARD;

    #[test]
    fn spectral_density_values() {
        assert_eq!(spectral_density(0.0, 2.0, 100.0), 0.0);
        assert_relative_eq!(
            spectral_density(100.0, 2.0, 100.0),
            3678.794411714423,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            spectral_density(200.0, 2.0, 100.0),
            5413.411329464508,
            max_relative = 1e-14
        );
    }

    #[test]
    fn dense_grid_endpoints() {
        let spec = BathSpec {
            n_modes: 750,
            omega0: 0.01,
            delta_omega: 1.0,
            s: 2.0,
            omega_c: 100.0,
            lambda_reorg: 50.0,
        };
        let bath = build_bath(&spec, &U, 1).unwrap();
        assert_relative_eq!(bath.omega_cm(0, 0), 0.01, max_relative = 1e-13);
        assert_relative_eq!(bath.omega_cm(0, 749), 749.01, max_relative = 1e-13);
        assert_eq!(bath.len(), 750);
    }

    #[test]
    fn sparse_grid_is_replicated_per_site() {
        let spec = BathSpec {
            n_modes: 15,
            omega0: 0.01,
            delta_omega: 50.0,
            s: 2.0,
            omega_c: 100.0,
            lambda_reorg: 100.0,
        };
        let bath = build_bath(&spec, &U, 3).unwrap();
        assert_eq!(bath.n_modes(), 15);
        assert_eq!(bath.site_omega(0), bath.site_omega(2));
        assert_eq!(bath.site_g(1), bath.site_g(2));
        for m in 0..3 {
            assert!((bath.reorganization_energy(m) - 100.0).abs() / 100.0 < 1e-10);
        }
    }

    #[test]
    fn zero_reorganization_gives_uncoupled_bath() {
        let spec = BathSpec {
            n_modes: 10,
            omega0: 1.0,
            delta_omega: 10.0,
            s: 2.0,
            omega_c: 100.0,
            lambda_reorg: 0.0,
        };
        let bath = build_bath(&spec, &U, 2).unwrap();
        assert!(bath.g().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn unnormalizable_bath_rejected() {
        // every weight underflows to zero
        let spec = BathSpec {
            n_modes: 3,
            omega0: 1.0e6,
            delta_omega: 1.0,
            s: 2.0,
            omega_c: 1.0,
            lambda_reorg: 10.0,
        };
        assert_eq!(
            build_bath(&spec, &U, 1),
            Err(Error::DegenerateSpectralDensity)
        );
    }

    #[test]
    fn invalid_specs_rejected() {
        let ok = BathSpec {
            n_modes: 3,
            omega0: 1.0,
            delta_omega: 1.0,
            s: 2.0,
            omega_c: 1.0,
            lambda_reorg: 10.0,
        };
        assert!(build_bath(&BathSpec { n_modes: 0, ..ok }, &U, 1).is_err());
        assert!(build_bath(
            &BathSpec {
                delta_omega: 0.0,
                ..ok
            },
            &U,
            1
        )
        .is_err());
        assert!(build_bath(&BathSpec { omega0: -1.0, ..ok }, &U, 1).is_err());
        assert!(build_bath(
            &BathSpec {
                lambda_reorg: -1.0,
                ..ok
            },
            &U,
            1
        )
        .is_err());
    }

    #[test]
    fn two_site_dimer() {
        let m = ExcitonModel::chain(vec![0.0, 0.0], 100.0, U).unwrap();
        let b = diagonalize(&m).unwrap();
        assert_relative_eq!(b.energies[0], -100.0, epsilon = 1e-10);
        assert_relative_eq!(b.energies[1], 100.0, epsilon = 1e-10);
        let r = core::f64::consts::FRAC_1_SQRT_2;
        // lower state (1,-1)/√2 with the first entry positive after the sign rule
        // (tie in magnitude resolved toward the lowest index)
        assert_relative_eq!(b.component(0, 0).abs(), r, epsilon = 1e-12);
        assert_relative_eq!(b.component(0, 0), -b.component(1, 0), epsilon = 1e-12);
        assert_relative_eq!(b.component(0, 1), r, epsilon = 1e-12);
        assert_relative_eq!(b.component(1, 1), r, epsilon = 1e-12);
    }

    /// Eigenvalues of the 3×3 chain from the characteristic polynomial,
    /// solved by bisection on sign changes.
    fn cubic_roots(eps: [f64; 3], j: f64) -> [f64; 3] {
        let p = |x: f64| {
            let (a, b, c) = (eps[0] - x, eps[1] - x, eps[2] - x);
            a * b * c - a * j * j - c * j * j
        };
        let mut roots = [0.0; 3];
        let mut found = 0;
        let (lo, hi, steps) = (-2000.123, 2000.0, 400_000);
        let h = (hi - lo) / steps as f64;
        for k in 0..steps {
            let (mut x0, mut x1) = (lo + k as f64 * h, lo + (k + 1) as f64 * h);
            if p(x0).signum() != p(x1).signum() {
                for _ in 0..200 {
                    let mid = 0.5 * (x0 + x1);
                    if p(x0).signum() == p(mid).signum() {
                        x0 = mid;
                    } else {
                        x1 = mid;
                    }
                }
                roots[found] = 0.5 * (x0 + x1);
                found += 1;
            }
        }
        assert_eq!(found, 3);
        roots
    }

    #[test]
    fn trimer_matches_characteristic_polynomial() {
        let m = ExcitonModel::chain(vec![0.0, 250.0, 500.0], 100.0, U).unwrap();
        let b = diagonalize(&m).unwrap();
        let roots = cubic_roots([0.0, 250.0, 500.0], 100.0);
        for e in 0..3 {
            assert!(
                (b.energies[e] - roots[e]).abs() < 1e-8,
                "{} vs {}",
                b.energies[e],
                roots[e]
            );
        }
        assert!(b.energies[0] < b.energies[1] && b.energies[1] < b.energies[2]);
    }

    #[test]
    fn uncoupled_sites_give_permuted_identity() {
        let m = ExcitonModel::new(vec![300.0, -50.0, 120.0], vec![0.0; 9], U).unwrap();
        let b = diagonalize(&m).unwrap();
        assert_eq!(b.energies, vec![-50.0, 120.0, 300.0]);
        let expected_site = [1, 2, 0];
        for (e, &site) in expected_site.iter().enumerate() {
            for n in 0..3 {
                let want = if n == site { 1.0 } else { 0.0 };
                assert_eq!(b.component(n, e), want);
            }
        }
    }

    #[test]
    fn degenerate_levels_keep_index_order() {
        let m = ExcitonModel::new(vec![10.0, 10.0], vec![0.0; 4], U).unwrap();
        let b = diagonalize(&m).unwrap();
        assert_eq!(b.component(0, 0), 1.0);
        assert_eq!(b.component(1, 1), 1.0);
    }

    #[test]
    fn nonsymmetric_coupling_rejected() {
        let r = ExcitonModel::new(vec![0.0, 0.0], vec![0.0, 1.0, 2.0, 0.0], U);
        assert!(matches!(r, Err(Error::NotSymmetric { .. })));
        assert!(symmetric_eigen(&[0.0, 1.0, 2.0, 0.0], 2).is_err());
        let diag = ExcitonModel::new(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0], U);
        assert!(diag.is_err());
        assert!(ExcitonModel::new(vec![], vec![], U).is_err());
    }

    #[test]
    fn specific_heat_values() {
        assert_relative_eq!(specific_heat(1e-9, 1.0), 1.0, max_relative = 1e-12);
        let e = core::f64::consts::E;
        assert_relative_eq!(
            specific_heat(1.0, 1.0),
            e / ((e - 1.0) * (e - 1.0)),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            specific_heat(1.0, 1.0),
            0.920673594207792,
            max_relative = 1e-12
        );
        assert!(specific_heat(50.0, 1.0) < 1e-18);
        assert_eq!(specific_heat(1.0, 1.0e6), 0.0);
    }

    #[test]
    fn specific_heat_monotone_on_grid() {
        let mut prev = f64::INFINITY;
        for k in 1..2000 {
            let x = k as f64 * 0.025;
            let c = specific_heat(x, 1.0);
            assert!(c < prev, "not decreasing at {x}");
            prev = c;
        }
    }

    fn random_symmetric(n: usize, seed: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                m[i * n + j] = seed[k % seed.len()] * (1.0 + k as f64 * 0.1);
                m[j * n + i] = m[i * n + j];
                k += 1;
            }
        }
        m
    }

    proptest! {
        #[test]
        fn bath_normalization(
            q in 1usize..400,
            omega0 in 0.001f64..50.0,
            dw in 0.1f64..60.0,
            s in 0.5f64..4.0,
            wc in 10.0f64..500.0,
            lam in 0.1f64..2000.0,
        ) {
            let spec = BathSpec { n_modes: q, omega0, delta_omega: dw, s, omega_c: wc, lambda_reorg: lam };
            let bath = build_bath(&spec, &U, 1).unwrap();
            prop_assert!(bath.omega().iter().all(|&w| w > 0.0));
            let rel = (bath.reorganization_energy(0) - lam).abs() / lam;
            prop_assert!(rel < 1e-12, "relative error {}", rel);
        }

        #[test]
        fn eigen_reconstruction(n in 1usize..=8, seed in proptest::collection::vec(-500.0f64..500.0, 1..40)) {
            let h = random_symmetric(n, &seed);
            let b = symmetric_eigen(&h, n).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let mut r = 0.0;
                    let mut ortho = 0.0;
                    for e in 0..n {
                        r += b.component(i, e) * b.energies[e] * b.component(j, e);
                        ortho += b.component(e, i) * b.component(e, j);
                    }
                    prop_assert!((r - h[i * n + j]).abs() < 1e-8);
                    let id = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((ortho - id).abs() < 1e-10);
                }
                let mut hv_err: f64 = 0.0;
                for e in 0..n {
                    for row in 0..n {
                        let hv: f64 = (0..n).map(|k| h[row * n + k] * b.component(k, e)).sum();
                        hv_err = hv_err.max((hv - b.energies[e] * b.component(row, e)).abs());
                    }
                }
                prop_assert!(hv_err < 1e-8);
            }
            for w in b.energies.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            for e in 0..n {
                let col = b.eigenvector(e);
                let pivot = col.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
                prop_assert!(pivot > 0.0);
            }
        }
    }
}
