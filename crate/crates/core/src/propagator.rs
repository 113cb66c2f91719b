//! Split-step Fourier propagation of the rotating-frame ring GPE
//!
//! `i ∂ψ/∂t = [−(1/2R²) ∂²/∂θ² + V(θ,t) + U|ψ|² − Ω L_z] ψ`   (ħ = m = 1)
//!
//! using symmetric (Strang) splitting: a half step of the position-space
//! phase, a full kinetic + rotation step on the winding-number coefficients,
//! and a second position-space half step with the density recomputed.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::RingGrid;
use crate::potential::{Barrier, PotentialSpec};
use crate::wavefunction::{moving_gaussian, uniform_state, Wavefunction};

/// Rotation rate, interaction strength and the time lattice of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveParams {
    pub omega_rot: f64,
    pub interaction: f64,
    pub dt: f64,
    pub t_final: f64,
    pub save_times: Vec<f64>,
}

impl EvolveParams {
    pub fn new(omega_rot: f64, interaction: f64, dt: f64, t_final: f64, save_times: Vec<f64>) -> Result<Self> {
        let p = EvolveParams {
            omega_rot,
            interaction,
            dt,
            t_final,
            save_times,
        };
        p.validate()?;
        Ok(p)
    }

    /// `intervals + 1` equally spaced snapshots over `[0, t_final]`, with the
    /// step shrunk from `max_dt` so that every snapshot lands on a step.
    pub fn uniform(omega_rot: f64, interaction: f64, t_final: f64, max_dt: f64, intervals: usize) -> Result<Self> {
        if !(t_final > 0.0 && max_dt > 0.0) || intervals == 0 {
            return Err(Error::config(format!(
                "need t_final > 0, dt > 0 and at least one save interval \
                 (t_final = {t_final}, dt = {max_dt}, intervals = {intervals})"
            )));
        }
        let per_interval = (t_final / (intervals as f64 * max_dt) - 1e-9).ceil().max(1.0) as usize;
        let n_steps = per_interval * intervals;
        let dt = t_final / n_steps as f64;
        let save_times = (0..=intervals).map(|k| (k * per_interval) as f64 * dt).collect();
        EvolveParams::new(omega_rot, interaction, dt, n_steps as f64 * dt, save_times)
    }

    pub fn with_omega(&self, omega_rot: f64) -> Self {
        EvolveParams {
            omega_rot,
            ..self.clone()
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Step index of each save time.
    pub fn save_steps(&self) -> Vec<usize> {
        self.save_times.iter().map(|t| (t / self.dt).round() as usize).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::config(format!(
                "t_final must be non-negative, got {}",
                self.t_final
            )));
        }
        if !self.omega_rot.is_finite() || !self.interaction.is_finite() {
            return Err(Error::config("rotation rate and interaction must be finite"));
        }
        let steps = self.t_final / self.dt;
        if (steps - steps.round()).abs() * self.dt > 1e-12 * self.dt.max(self.t_final) {
            return Err(Error::config(format!(
                "t_final = {} is not a whole number of steps dt = {}",
                self.t_final, self.dt
            )));
        }
        let mut prev = f64::NEG_INFINITY;
        for &t in &self.save_times {
            if t < prev {
                return Err(Error::config("save_times must be sorted"));
            }
            if t < 0.0 || t > self.t_final * (1.0 + 1e-12) {
                return Err(Error::config(format!("save time {t} outside [0, {}]", self.t_final)));
            }
            let k = (t / self.dt).round();
            if (k * self.dt - t).abs() > 1e-12 * self.dt {
                return Err(Error::config(format!(
                    "save time {t} is not a multiple of dt = {}",
                    self.dt
                )));
            }
            prev = t;
        }
        Ok(())
    }
}

/// Reusable split-step integrator for one grid, step size and rotation rate.
///
/// Owns its scratch buffers; a run is single-threaded but independent
/// propagators can run concurrently.
pub struct Propagator {
    grid: Arc<RingGrid>,
    dt: f64,
    interaction: f64,
    /// `exp(−i dt [n²/2R² − Ω n]) / N`, FFT bin order.
    spectral_phase: Vec<Complex64>,
    potential: Vec<f64>,
    cached_static: Option<PotentialSpec>,
}

impl Propagator {
    pub fn new(grid: Arc<RingGrid>, params: &EvolveParams) -> Self {
        let r2 = grid.radius().powi(2);
        let inv_n = 1.0 / grid.n_points() as f64;
        let spectral_phase = (0..grid.n_points())
            .map(|k| {
                let n = grid.fft_winding(k) as f64;
                let w = n * n / (2.0 * r2) - params.omega_rot * n;
                Complex64::from_polar(inv_n, -w * params.dt)
            })
            .collect();
        let potential = vec![0.0; grid.n_points()];
        Propagator {
            grid,
            dt: params.dt,
            interaction: params.interaction,
            spectral_phase,
            potential,
            cached_static: None,
        }
    }

    pub fn grid(&self) -> &Arc<RingGrid> {
        &self.grid
    }

    fn load_potential(&mut self, pot: &PotentialSpec, t_mid: f64) {
        if pot.is_static() {
            if self.cached_static.as_ref() == Some(pot) {
                return;
            }
            pot.fill(&self.grid, t_mid, &mut self.potential);
            self.cached_static = Some(*pot);
        } else {
            pot.fill(&self.grid, t_mid, &mut self.potential);
            self.cached_static = None;
        }
    }

    fn position_half_step(&self, amps: &mut [Complex64]) {
        let half = 0.5 * self.dt;
        let u = self.interaction;
        for (a, v) in amps.iter_mut().zip(&self.potential) {
            let phase = -half * (v + u * a.norm_sqr());
            *a *= Complex64::from_polar(1.0, phase);
        }
    }

    /// Advances `amps` from `t` to `t + dt` in place.
    pub fn step_in_place(&mut self, amps: &mut [Complex64], pot: &PotentialSpec, t: f64) {
        self.load_potential(pot, t + 0.5 * self.dt);
        self.position_half_step(amps);
        self.grid.fft_in_place(amps);
        for (a, p) in amps.iter_mut().zip(&self.spectral_phase) {
            *a *= p;
        }
        self.grid.ifft_in_place(amps);
        self.position_half_step(amps);
    }

    /// Runs from `t = 0` to `params.t_final`, recording snapshots at the save times.
    pub fn evolve(
        &mut self,
        psi0: &Wavefunction,
        pot: &PotentialSpec,
        params: &EvolveParams,
    ) -> Vec<(f64, Wavefunction)> {
        let save_steps = params.save_steps();
        let mut out = Vec::with_capacity(save_steps.len());
        let mut psi = psi0.clone();
        let mut next = 0;
        let n_steps = params.n_steps();
        for step in 0..=n_steps {
            while next < save_steps.len() && save_steps[next] == step {
                out.push((params.save_times[next], psi.clone()));
                next += 1;
            }
            if step == n_steps {
                break;
            }
            self.step_in_place(psi.amps_mut(), pot, step as f64 * params.dt);
        }
        out
    }
}

/// One Strang step of `psi` from `t` to `t + dt`.
pub fn step(psi: &Wavefunction, pot: &PotentialSpec, params: &EvolveParams, t: f64) -> Wavefunction {
    let mut prop = Propagator::new(psi.grid().clone(), params);
    let mut out = psi.clone();
    prop.step_in_place(out.amps_mut(), pot, t);
    out
}

/// Real-time trajectory sampled at `params.save_times`.
pub fn evolve(psi0: &Wavefunction, pot: &PotentialSpec, params: &EvolveParams) -> Result<Vec<(f64, Wavefunction)>> {
    params.validate()?;
    pot.validate(psi0.grid())?;
    let mut prop = Propagator::new(psi0.grid().clone(), params);
    Ok(prop.evolve(psi0, pot, params))
}

/// Settings for imaginary-time relaxation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStateOptions {
    /// Stop once the energy changes by less than this in one step.
    pub tol: f64,
    /// Imaginary time step; `None` picks `10⁻³ / energy scale`.
    pub dt: Option<f64>,
    pub max_steps: usize,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions {
            tol: 1e-10,
            dt: None,
            max_steps: 500_000,
        }
    }
}

/// Ground state and its energy.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub state: Wavefunction,
    pub energy: f64,
    pub steps: usize,
}

/// Imaginary-time relaxation of a static potential.
///
/// The result has unit norm and its global phase fixed so that `Σψ_j` is
/// real and non-negative.
pub fn ground_state(
    pot: &PotentialSpec,
    interaction: f64,
    grid: Arc<RingGrid>,
    opts: &GroundStateOptions,
) -> Result<GroundState> {
    if !pot.is_static() {
        return Err(Error::config("ground state needs a static potential"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::config(format!("tolerance must be positive, got {}", opts.tol)));
    }
    pot.validate(&grid)?;
    let dt = opts.dt.unwrap_or(1e-3 / pot.energy_scale());
    let r = grid.radius();

    let mut psi = if pot.harmonic_omega > 0.0 {
        let sigma = (1.0 / (r * pot.harmonic_omega.sqrt())).min(0.5);
        moving_gaussian(grid.clone(), sigma, pot.trap_path.center(0.0), 0.0)
    } else {
        uniform_state(grid.clone())
    };

    let v = pot.sample(&grid, 0.0);
    let inv_n = 1.0 / grid.n_points() as f64;
    let decay: Vec<f64> = (0..grid.n_points())
        .map(|k| {
            let n = grid.fft_winding(k) as f64;
            inv_n * (-dt * n * n / (2.0 * r * r)).exp()
        })
        .collect();
    let half_decay = |amps: &mut [Complex64]| {
        for (a, v) in amps.iter_mut().zip(&v) {
            *a *= (-0.5 * dt * (v + interaction * a.norm_sqr())).exp();
        }
    };

    let mut energy = psi.energy(pot, interaction, 0.0);
    let mut residual = f64::INFINITY;
    for steps in 1..=opts.max_steps {
        let amps = psi.amps_mut();
        half_decay(amps);
        grid.fft_in_place(amps);
        for (a, d) in amps.iter_mut().zip(&decay) {
            *a *= d;
        }
        grid.ifft_in_place(amps);
        half_decay(amps);
        psi = psi.normalized();
        let e = psi.energy(pot, interaction, 0.0);
        residual = (e - energy).abs();
        energy = e;
        if residual < opts.tol {
            let sum: Complex64 = psi.amps().iter().sum();
            let phase = if sum.norm() > 0.0 {
                sum.conj() / sum.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            return Ok(GroundState {
                state: psi.scaled(phase),
                energy,
                steps,
            });
        }
    }
    Err(Error::GroundStateNotConverged {
        steps: opts.max_steps,
        residual,
    })
}

/// Probe used to calibrate the barrier: a packet of width `sigma` with mean
/// winding `k_kick R` launched from θ = −π/2 at a static barrier at θ = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierProbe {
    pub sigma: f64,
    pub width: f64,
    pub dt: f64,
    /// Bisection stops once the reflection is this close to the target.
    pub tolerance: f64,
}

impl BarrierProbe {
    pub fn for_grid(grid: &RingGrid, sigma: f64) -> Self {
        BarrierProbe {
            sigma,
            width: 8.0 * grid.dtheta(),
            dt: 1e-4,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierCalibration {
    pub amplitude: f64,
    pub reflection: f64,
    pub evaluations: usize,
}

/// Reflection of an ideal delta barrier `A δ(θ)` for a plane wave of
/// winding `k R`: `1 / (1 + (k/(A R))²)`.
pub fn delta_barrier_reflection(amplitude: f64, k_kick: f64, radius: f64) -> f64 {
    let lambda = amplitude * radius;
    if lambda == 0.0 {
        return 0.0;
    }
    1.0 / (1.0 + (k_kick / lambda).powi(2))
}

/// Probability on the launch side, θ ∈ [−π, 0), after the probe packet has
/// crossed half the ring.
pub fn probe_reflection(grid: &Arc<RingGrid>, k_kick: f64, probe: &BarrierProbe, amplitude: f64) -> f64 {
    let r = grid.radius();
    let psi0 = moving_gaussian(grid.clone(), probe.sigma, -PI / 2.0, k_kick * r);
    let pot = PotentialSpec::free().with_barrier(Barrier {
        amplitude,
        width: probe.width,
        center: 0.0,
        on_time: f64::NEG_INFINITY,
    });
    // Angular speed k/R: the packet centre covers π in πR/k.
    let t_final = PI * r / k_kick;
    let n_steps = (t_final / probe.dt).ceil().max(1.0) as usize;
    let params = EvolveParams {
        omega_rot: 0.0,
        interaction: 0.0,
        dt: t_final / n_steps as f64,
        t_final,
        save_times: vec![t_final],
    };
    let mut prop = Propagator::new(grid.clone(), &params);
    let mut psi = psi0;
    for s in 0..n_steps {
        prop.step_in_place(psi.amps_mut(), &pot, s as f64 * params.dt);
    }
    let dens = psi.density();
    grid.integrate(
        grid.theta()
            .iter()
            .zip(&dens)
            .filter(|(t, _)| **t < 0.0)
            .map(|(_, p)| *p),
    )
}

/// Bisects the barrier amplitude until the probe packet reflects `target`.
pub fn calibrate_barrier(
    grid: &Arc<RingGrid>,
    k_kick: f64,
    probe: &BarrierProbe,
    target: f64,
) -> Result<BarrierCalibration> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::config(format!(
            "target reflection must lie in (0, 1), got {target}"
        )));
    }
    if !(k_kick > 0.0) {
        return Err(Error::config(format!("k_kick must be positive, got {k_kick}")));
    }
    PotentialSpec::free()
        .with_barrier(Barrier {
            amplitude: 1.0,
            width: probe.width,
            center: 0.0,
            on_time: 0.0,
        })
        .validate(grid)?;

    let mut evaluations = 0;
    let mut reflect = |a: f64| {
        evaluations += 1;
        probe_reflection(grid, k_kick, probe, a)
    };

    let mut lo = 0.0;
    let r_lo = reflect(lo);
    // Ideal delta barrier with the target reflection, as a starting bracket.
    let guess = k_kick / grid.radius() * (target / (1.0 - target)).sqrt();
    let mut hi = 2.0 * guess;
    let mut r_hi = reflect(hi);
    let mut doublings = 0;
    while r_hi < target && doublings < 30 {
        lo = hi;
        hi *= 2.0;
        r_hi = reflect(hi);
        doublings += 1;
    }
    if r_lo > target || r_hi < target {
        return Err(Error::CalibrationBracket {
            target,
            low_amplitude: 0.0,
            low_reflection: r_lo,
            high_amplitude: hi,
            high_reflection: r_hi,
        });
    }

    let mut mid = 0.5 * (lo + hi);
    let mut r_mid = reflect(mid);
    for _ in 0..60 {
        if (r_mid - target).abs() <= probe.tolerance {
            break;
        }
        if r_mid < target {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        r_mid = reflect(mid);
    }
    Ok(BarrierCalibration {
        amplitude: mid,
        reflection: r_mid,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::TrapPath;
    use crate::wavefunction::{initial_state_kandes, plane_wave};
    use approx::assert_relative_eq;

    #[test]
    fn uniform_params_hit_every_save_time() {
        let t_final = 3.0 * PI / 20.0;
        let p = EvolveParams::uniform(0.0, 0.0, t_final, 1e-4, 201).unwrap();
        assert!(p.dt <= 1e-4);
        assert_eq!(p.save_times.len(), 202);
        assert_eq!(p.n_steps() % 201, 0);
        assert_relative_eq!(p.t_final, t_final, max_relative = 1e-14);
        let steps = p.save_steps();
        assert_eq!(steps[67] * 3, p.n_steps());
    }

    #[test]
    fn params_validation() {
        assert!(EvolveParams::new(0.0, 0.0, 0.0, 1.0, vec![]).is_err());
        assert!(EvolveParams::new(0.0, 0.0, 0.1, 1.0, vec![0.5, 0.2]).is_err());
        assert!(EvolveParams::new(0.0, 0.0, 0.1, 1.0, vec![1.5]).is_err());
        assert!(EvolveParams::new(0.0, 0.0, 0.1, 1.0, vec![0.55]).is_err());
        assert!(EvolveParams::new(0.0, 0.0, 0.1, 1.05, vec![]).is_err());
        assert!(EvolveParams::new(0.0, 0.0, 0.25, 1.0, vec![0.0, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn plane_wave_picks_up_global_phase() {
        let g = RingGrid::new(64, 1.3).unwrap();
        let ell = 3;
        let params = EvolveParams::new(0.7, 0.0, 0.01, 0.01, vec![]).unwrap();
        let psi = plane_wave(g.clone(), ell);
        let out = step(&psi, &PotentialSpec::free(), &params, 0.0);
        let w = (ell * ell) as f64 / (2.0 * 1.69) - 0.7 * ell as f64;
        let phase = Complex64::from_polar(1.0, -w * 0.01);
        for (a, b) in out.amps().iter().zip(psi.amps()) {
            assert!((a - b * phase).norm() < 1e-13);
        }
    }

    #[test]
    fn uniform_state_under_interaction_keeps_density() {
        let g = RingGrid::new(64, 1.0).unwrap();
        let params = EvolveParams::new(0.0, 0.8, 0.01, 0.01, vec![]).unwrap();
        let psi = uniform_state(g);
        let out = step(&psi, &PotentialSpec::free(), &params, 0.0);
        let phase = out.amps()[0] / psi.amps()[0];
        for (a, b) in out.amps().iter().zip(psi.amps()) {
            assert!((a - b * phase).norm() < 1e-14);
        }
        let expected = Complex64::from_polar(1.0, -0.01 * 0.8 / (2.0 * PI));
        assert!((phase - expected).norm() < 1e-14);
    }

    #[test]
    fn step_preserves_norm() {
        let g = RingGrid::new(512, 1.0).unwrap();
        let params = EvolveParams::new(0.3, 0.2, 1e-4, 1e-4, vec![]).unwrap();
        let pot = PotentialSpec::harmonic(2.0, TrapPath::ConstantVelocity { rate: 1.0 });
        let psi = initial_state_kandes(g, 0.5, 20.0).unwrap();
        let out = step(&psi, &pot, &params, 0.0);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_harmonic_ground_state() {
        let g = RingGrid::new(1024, 5.0).unwrap();
        let pot = PotentialSpec::harmonic(1.0, TrapPath::Fixed { center: 0.0 });
        let gs = ground_state(&pot, 0.0, g, &GroundStateOptions::default()).unwrap();
        assert_relative_eq!(gs.energy, 0.5, max_relative = 1e-3);
        assert_relative_eq!(gs.state.norm_sqr(), 1.0, epsilon = 1e-12);
        let sum: Complex64 = gs.state.amps().iter().sum();
        assert!(sum.im.abs() < 1e-12 && sum.re > 0.0);
    }

    #[test]
    fn flat_ring_ground_state_is_uniform() {
        let g = RingGrid::new(64, 1.0).unwrap();
        let gs = ground_state(&PotentialSpec::free(), 0.0, g.clone(), &GroundStateOptions::default()).unwrap();
        assert!(gs.state.max_abs_diff(&uniform_state(g)) < 1e-12);
        assert!(gs.energy.abs() < 1e-14);
    }

    #[test]
    fn ground_state_rejects_moving_trap_and_caps_steps() {
        let g = RingGrid::new(256, 5.0).unwrap();
        let moving = PotentialSpec::harmonic(1.0, TrapPath::ConstantVelocity { rate: 1.0 });
        assert!(ground_state(&moving, 0.0, g.clone(), &GroundStateOptions::default())
            .unwrap_err()
            .is_config());
        let pot = PotentialSpec::harmonic(1.0, TrapPath::Fixed { center: 0.0 });
        let opts = GroundStateOptions {
            tol: 1e-300,
            dt: None,
            max_steps: 10,
        };
        match ground_state(&pot, 1.0, g, &opts) {
            Err(Error::GroundStateNotConverged { steps, residual }) => {
                assert_eq!(steps, 10);
                assert!(residual.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn delta_formula_limits() {
        assert_eq!(delta_barrier_reflection(0.0, 20.0, 1.0), 0.0);
        assert_relative_eq!(delta_barrier_reflection(20.0, 20.0, 1.0), 0.5);
        assert!(delta_barrier_reflection(1e6, 20.0, 1.0) > 0.999);
    }

    #[test]
    fn probe_reflection_limits() {
        let g = RingGrid::new(1024, 1.0).unwrap();
        let probe = BarrierProbe::for_grid(&g, 0.5);
        assert!(probe_reflection(&g, 20.0, &probe, 0.0) < 1e-3);
        assert!(probe_reflection(&g, 20.0, &probe, 1e4) > 0.99);
    }

    #[test]
    fn calibration_rejects_bad_targets() {
        let g = RingGrid::new(256, 1.0).unwrap();
        let probe = BarrierProbe::for_grid(&g, 0.5);
        assert!(calibrate_barrier(&g, 20.0, &probe, 1.0).is_err());
        assert!(calibrate_barrier(&g, 20.0, &probe, 0.0).is_err());
        let narrow = BarrierProbe {
            width: g.dtheta(),
            ..probe
        };
        assert!(calibrate_barrier(&g, 20.0, &narrow, 0.5).unwrap_err().is_config());
    }
}
