//! Dirac-Frenkel equations of motion for the D2 ansatz and their fixed-step
//! RK4 integration.
//!
//! With local (uncorrelated) baths the coupling tensor is site-diagonal, so
//! the drive on mode (m, q) is h_mq = g_mq |α_m|² and
//!
//! ```text
//! dα_n/dt  = −i ε_n α_n − i Σ_{m≠n} J_nm α_m
//!            + i α_n [ Σ_q 2 ω_nq g_nq Re λ_nq − Σ_{m,q} ω_mq h_mq Re λ_mq ]
//! dλ_mq/dt = −i ω_mq (λ_mq − h_mq)
//! ```
//!
//! The h-term in the amplitude equation runs over every mode of every bath:
//! it is the same real number for all sites and only shifts the global phase,
//! which keeps ⟨Ĥ⟩ exactly conserved.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{BathModes, ExcitonModel};
use crate::state::D2State;

/// Time derivatives of the D2 parameters, rad/ps units.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBuffer {
    pub dalpha: Vec<Complex64>,
    pub dlambda: Vec<Complex64>,
}

impl DerivativeBuffer {
    pub fn zeros(n_sites: usize, n_modes_total: usize) -> Self {
        Self {
            dalpha: vec![Complex64::new(0.0, 0.0); n_sites],
            dlambda: vec![Complex64::new(0.0, 0.0); n_modes_total],
        }
    }

    pub fn for_bath(bath: &BathModes) -> Self {
        Self::zeros(bath.n_sites(), bath.len())
    }
}

/// Fixed-step integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Step, ps.
    pub dt: f64,
    /// Horizon, ps.
    pub t_total: f64,
    /// Steps between recorded snapshots.
    pub record_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_total: 1.0,
            record_stride: 10,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(
                "dt",
                alloc::format!("must be > 0, got {}", self.dt),
            ));
        }
        if !(self.t_total >= self.dt && self.t_total.is_finite()) {
            return Err(Error::invalid(
                "t_total",
                alloc::format!("must be >= dt ({}), got {}", self.dt, self.t_total),
            ));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride", "must be >= 1"));
        }
        self.steps_for("t_total", self.t_total)?;
        Ok(())
    }

    /// Number of steps spanning `duration`, which must be an integer
    /// multiple of `dt` (to 1e-9 relative).
    pub fn steps_for(&self, name: &'static str, duration: f64) -> Result<usize> {
        steps_in(name, duration, self.dt)
    }

    pub fn total_steps(&self) -> usize {
        steps_in("t_total", self.t_total, self.dt).unwrap_or(0)
    }
}

pub(crate) fn steps_in(name: &'static str, duration: f64, dt: f64) -> Result<usize> {
    if !(duration >= 0.0) {
        return Err(Error::invalid(
            name,
            alloc::format!("must be >= 0, got {duration}"),
        ));
    }
    let n = (duration / dt).round();
    if (n * dt - duration).abs() > 1e-9 * duration.max(dt) {
        return Err(Error::invalid(
            name,
            alloc::format!("{duration} ps is not an integer multiple of dt = {dt} ps"),
        ));
    }
    Ok(n as usize)
}

/// Drive on mode `q` of site `site`: h = g_mq |α_m|².
#[inline]
pub fn drive_strength(state: &D2State, bath: &BathModes, site: usize, mode: usize) -> f64 {
    bath.g()[bath.index(site, mode)] * state.alpha[site].norm_sqr()
}

/// Evaluate the equations of motion into `out`.
pub fn eom_rhs(
    state: &D2State,
    model: &ExcitonModel,
    bath: &BathModes,
    out: &mut DerivativeBuffer,
) {
    rhs_slices(
        &state.alpha,
        &state.lambda,
        model,
        bath,
        &mut out.dalpha,
        &mut out.dlambda,
    );
}

fn rhs_slices(
    alpha: &[Complex64],
    lambda: &[Complex64],
    model: &ExcitonModel,
    bath: &BathModes,
    dalpha: &mut [Complex64],
    dlambda: &mut [Complex64],
) {
    let n = alpha.len();
    let nq = bath.n_modes();
    let omega = bath.omega();
    let g = bath.g();
    let eps = model.epsilon_angular();
    let jmat = model.coupling_angular();

    // global phase term Σ_m |α_m|² Σ_q ω g Re λ, and per-site 2 Σ_q ω g Re λ
    let mut global = 0.0;
    for m in 0..n {
        let pop = alpha[m].norm_sqr();
        let lo = m * nq;
        let w = &omega[lo..lo + nq];
        let gm = &g[lo..lo + nq];
        let lam = &lambda[lo..lo + nq];
        let dl = &mut dlambda[lo..lo + nq];
        let mut site_sum = 0.0;
        for q in 0..nq {
            let re = lam[q].re;
            let wg = w[q] * gm[q];
            site_sum += wg * re;
            // −iω(λ − h) with h = g·pop
            dl[q] = Complex64::new(w[q] * lam[q].im, -(w[q] * re - wg * pop));
        }
        global += pop * site_sum;
        // stash 2Σ ω g Re λ in dalpha for the second pass
        dalpha[m] = Complex64::new(2.0 * site_sum, 0.0);
    }
    for i in 0..n {
        let phase = dalpha[i].re - global;
        let a = alpha[i];
        // −i(ε − phase)α
        let mut acc = Complex64::new(a.im * (eps[i] - phase), -a.re * (eps[i] - phase));
        let row = &jmat[i * n..(i + 1) * n];
        for (k, (&jik, ak)) in row.iter().zip(alpha).enumerate() {
            if k != i && jik != 0.0 {
                acc += Complex64::new(ak.im * jik, -ak.re * jik);
            }
        }
        dalpha[i] = acc;
    }
}

/// Scratch space for [`rk4_step_in_place`]; reuse it across steps to avoid
/// allocation.
#[derive(Debug, Clone)]
pub struct Rk4Workspace {
    k: [DerivativeBuffer; 4],
    alpha: Vec<Complex64>,
    lambda: Vec<Complex64>,
}

impl Rk4Workspace {
    pub fn new(bath: &BathModes) -> Self {
        let z = DerivativeBuffer::for_bath(bath);
        Self {
            k: [z.clone(), z.clone(), z.clone(), z],
            alpha: vec![Complex64::new(0.0, 0.0); bath.n_sites()],
            lambda: vec![Complex64::new(0.0, 0.0); bath.len()],
        }
    }
}

/// One classical RK4 step of size `dt` (ps), in place.
pub fn rk4_step_in_place(
    state: &mut D2State,
    model: &ExcitonModel,
    bath: &BathModes,
    dt: f64,
    ws: &mut Rk4Workspace,
) -> Result<()> {
    let Rk4Workspace { k, alpha, lambda } = ws;
    let [k1, k2, k3, k4] = k;
    let half = 0.5 * dt;

    rhs_slices(
        &state.alpha,
        &state.lambda,
        model,
        bath,
        &mut k1.dalpha,
        &mut k1.dlambda,
    );
    axpy(alpha, &state.alpha, half, &k1.dalpha);
    axpy(lambda, &state.lambda, half, &k1.dlambda);
    rhs_slices(alpha, lambda, model, bath, &mut k2.dalpha, &mut k2.dlambda);
    axpy(alpha, &state.alpha, half, &k2.dalpha);
    axpy(lambda, &state.lambda, half, &k2.dlambda);
    rhs_slices(alpha, lambda, model, bath, &mut k3.dalpha, &mut k3.dlambda);
    axpy(alpha, &state.alpha, dt, &k3.dalpha);
    axpy(lambda, &state.lambda, dt, &k3.dlambda);
    rhs_slices(alpha, lambda, model, bath, &mut k4.dalpha, &mut k4.dlambda);

    let sixth = dt / 6.0;
    let mut check = combine(
        &mut state.alpha,
        sixth,
        &k1.dalpha,
        &k2.dalpha,
        &k3.dalpha,
        &k4.dalpha,
    );
    check += combine(
        &mut state.lambda,
        sixth,
        &k1.dlambda,
        &k2.dlambda,
        &k3.dlambda,
        &k4.dlambda,
    );
    state.t += dt;
    if !check.is_finite() {
        return Err(Error::NonFinite { t: state.t });
    }
    Ok(())
}

#[inline]
fn axpy(out: &mut [Complex64], y: &[Complex64], h: f64, k: &[Complex64]) {
    for ((o, y), k) in out.iter_mut().zip(y).zip(k) {
        *o = Complex64::new(y.re + h * k.re, y.im + h * k.im);
    }
}

/// y += h(k1 + 2k2 + 2k3 + k4); returns Σ|Δy| components (finite iff all
/// updated values are).
#[inline]
fn combine(
    y: &mut [Complex64],
    h: f64,
    k1: &[Complex64],
    k2: &[Complex64],
    k3: &[Complex64],
    k4: &[Complex64],
) -> f64 {
    let mut check = 0.0;
    for i in 0..y.len() {
        let re = y[i].re + h * (k1[i].re + 2.0 * (k2[i].re + k3[i].re) + k4[i].re);
        let im = y[i].im + h * (k1[i].im + 2.0 * (k2[i].im + k3[i].im) + k4[i].im);
        check += re * 0.0 + im * 0.0;
        y[i] = Complex64::new(re, im);
    }
    check
}

/// One RK4 step returning a new state.
pub fn rk4_step(
    state: &D2State,
    model: &ExcitonModel,
    bath: &BathModes,
    dt: f64,
) -> Result<D2State> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be > 0"));
    }
    state.check_dims(bath)?;
    let mut next = state.clone();
    let mut ws = Rk4Workspace::new(bath);
    rk4_step_in_place(&mut next, model, bath, dt, &mut ws)?;
    Ok(next)
}

/// Propagate for `duration` ps in steps of `dt`. No scattering happens
/// inside a segment.
pub fn propagate_segment(
    state: &mut D2State,
    model: &ExcitonModel,
    bath: &BathModes,
    duration: f64,
    dt: f64,
    ws: &mut Rk4Workspace,
) -> Result<()> {
    let steps = steps_in("duration", duration, dt)?;
    propagate_steps(state, model, bath, steps, dt, ws)
}

/// Propagate for an explicit number of steps.
pub fn propagate_steps(
    state: &mut D2State,
    model: &ExcitonModel,
    bath: &BathModes,
    steps: usize,
    dt: f64,
    ws: &mut Rk4Workspace,
) -> Result<()> {
    for _ in 0..steps {
        rk4_step_in_place(state, model, bath, dt, ws)?;
    }
    Ok(())
}
