//! Scheme registry: turns a [`SchemeConfig`] into a runnable plan and runs it
//! into Fisher series and (θ, t) maps.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use num_complex::Complex64;

use crate::config::{SchemeConfig, SchemeId};
use crate::error::{Error, Result};
use crate::fisher::{
    self, analytic_qfi_free, cfi_density, cfi_left_right, cfi_spin_population, density_derivative, derivative_bundle,
    sagnac_reference, spin_population_derivatives, spinor_cfi_density, spinor_qfi, FisherSeries,
};
use crate::grid::RingGrid;
use crate::potential::{Barrier, PotentialSpec, TrapPath};
use crate::propagator::{
    calibrate_barrier, ground_state, BarrierCalibration, BarrierProbe, EvolveParams, GroundStateOptions, Propagator,
};
use crate::spinor::{evolve_spinor_with_pulse, microwave_pulse, raman_pulse, SpinorPotential};
use crate::wavefunction::{initial_state_kandes, initial_state_oam_pair, plane_wave, SpinorState, Wavefunction};

/// Largest tolerated change of the total norm over a run.
pub const NORM_DRIFT_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    /// Counter-propagating packets from one Gaussian kicked by `±k_kick`.
    Kandes { sigma: f64, k_kick: f64 },
    /// `(e^{iℓθ} + e^{−iℓθ})/√(4π)`.
    OamPair { ell: i64 },
    /// `ψ_± = e^{±iℓθ}/√(4π)`.
    OamSpinor { ell: i64 },
    /// Trap ground state split equally between both components.
    TrapGroundState { trap_omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BarrierSchedule {
    Fixed(Barrier),
    /// Amplitude found at run time by [`calibrate_barrier`].
    Calibrated {
        width: f64,
        center: f64,
        on_time: f64,
        target_reflection: f64,
        probe_sigma: f64,
        k_kick: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pulse {
    Microwave,
    Raman { ell: i64 },
}

impl Pulse {
    pub fn apply(&self, state: &SpinorState) -> SpinorState {
        match *self {
            Pulse::Microwave => microwave_pulse(state),
            Pulse::Raman { ell } => raman_pulse(state, ell),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialSchedule {
    Scalar {
        base: PotentialSpec,
        barrier: Option<BarrierSchedule>,
    },
    Spinor(SpinorPotential),
}

/// Readout pulse of a spinor scheme. Snapshots up to `time` are reported as
/// if the pulse were applied at that instant; the pulse is then applied for
/// real at `step` and later snapshots are read out as they are.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSchedule {
    pub pulse: Pulse,
    pub step: usize,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Estimators {
    pub f_lr: bool,
    pub f_spin: bool,
    pub analytic: bool,
}

/// Executable description of a scheme. Building it performs no propagation.
#[derive(Debug, Clone)]
pub struct SchemePlan {
    pub config: SchemeConfig,
    pub grid: Arc<RingGrid>,
    pub params: EvolveParams,
    pub initial: InitialState,
    pub potential: PotentialSchedule,
    pub pulse: Option<PulseSchedule>,
    pub estimators: Estimators,
    /// Boundary between the two halves read out by `F_LR`.
    pub split: f64,
}

pub fn build_scheme(config: &SchemeConfig) -> Result<SchemePlan> {
    build(config).map_err(|e| e.in_scheme(config.scheme.as_str()))
}

fn build(config: &SchemeConfig) -> Result<SchemePlan> {
    config.validate()?;
    let id = config.scheme;
    let grid = RingGrid::new(config.grid.n_points, config.grid.radius)?;
    let ev = &config.evolution;
    let params = EvolveParams::uniform(ev.omega0, ev.interaction, config.t_final(), ev.dt, ev.save_intervals)?;
    let tc = config.collision_time();

    let initial = match id {
        SchemeId::KandesFree | SchemeId::KandesInteracting | SchemeId::HelmBarrier => InitialState::Kandes {
            sigma: config.packet.sigma,
            k_kick: config.packet.k_kick,
        },
        SchemeId::HalkyardOam => InitialState::OamPair { ell: config.oam.ell },
        SchemeId::HalkyardTwoSpin => InitialState::OamSpinor { ell: config.oam.ell },
        SchemeId::StevensonConstVelocity | SchemeId::StevensonSinusoidal => InitialState::TrapGroundState {
            trap_omega: config.transport.trap_omega,
        },
    };
    if let InitialState::OamPair { ell } | InitialState::OamSpinor { ell } = initial {
        let limit = (grid.n_points() / 4) as i64;
        if ell.abs() > limit {
            return Err(Error::config(format!(
                "|oam.ell| = {} exceeds n_points/4 = {limit}",
                ell.abs()
            )));
        }
    }

    let potential = match id {
        SchemeId::StevensonConstVelocity | SchemeId::StevensonSinusoidal => {
            let period = config.transport.period;
            // The + component travels towards negative θ, the − component mirrors it.
            let path = if id == SchemeId::StevensonConstVelocity {
                TrapPath::ConstantVelocity {
                    rate: -2.0 * PI / period,
                }
            } else {
                TrapPath::Sinusoidal {
                    period,
                    direction: -1.0,
                }
            };
            let omega = config.transport.trap_omega;
            PotentialSchedule::Spinor(SpinorPotential {
                plus: PotentialSpec::harmonic(omega, path),
                minus: PotentialSpec::harmonic(omega, path.mirrored()),
            })
        }
        SchemeId::HalkyardTwoSpin => PotentialSchedule::Spinor(SpinorPotential::symmetric(PotentialSpec::free())),
        SchemeId::HelmBarrier => {
            let b = &config.barrier;
            let width = b.width.unwrap_or(8.0 * grid.dtheta());
            let on_time = b.on_time.unwrap_or(tc);
            let schedule = match b.amplitude {
                Some(amplitude) => BarrierSchedule::Fixed(Barrier {
                    amplitude,
                    width,
                    center: b.center,
                    on_time,
                }),
                None => BarrierSchedule::Calibrated {
                    width,
                    center: b.center,
                    on_time,
                    target_reflection: b.target_reflection,
                    probe_sigma: config.packet.sigma,
                    k_kick: config.packet.k_kick,
                },
            };
            let probe = PotentialSpec::free().with_barrier(Barrier {
                amplitude: b.amplitude.unwrap_or(1.0),
                width,
                center: b.center,
                on_time,
            });
            probe.validate(&grid)?;
            PotentialSchedule::Scalar {
                base: PotentialSpec::free(),
                barrier: Some(schedule),
            }
        }
        _ => PotentialSchedule::Scalar {
            base: PotentialSpec::free(),
            barrier: None,
        },
    };

    let pulse = match id {
        SchemeId::HalkyardTwoSpin => Some(Pulse::Raman { ell: config.oam.ell }),
        SchemeId::StevensonConstVelocity | SchemeId::StevensonSinusoidal => Some(Pulse::Microwave),
        _ => None,
    }
    .map(|pulse| {
        let wanted = config.pulse.time.unwrap_or(params.t_final);
        let step = ((wanted / params.dt).round() as usize).min(params.n_steps());
        PulseSchedule {
            pulse,
            step,
            time: step as f64 * params.dt,
        }
    });

    let free = match &potential {
        PotentialSchedule::Scalar { base, barrier } => barrier.is_none() && *base == PotentialSpec::free(),
        PotentialSchedule::Spinor(p) => p.plus == PotentialSpec::free() && p.minus == PotentialSpec::free(),
    };
    let estimators = Estimators {
        f_lr: id == SchemeId::HelmBarrier,
        f_spin: id.is_spinor(),
        analytic: free && ev.interaction == 0.0,
    };

    Ok(SchemePlan {
        config: config.clone(),
        grid,
        params,
        initial,
        potential,
        pulse,
        estimators,
        split: config.barrier.center,
    })
}

/// Run diagnostics; a run is degraded when any check fails.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub delta: f64,
    pub richardson_residual: Vec<f64>,
    pub max_norm_drift: f64,
    /// Largest probability mass dropped from `F_C` as empty bins.
    pub max_excluded_mass: f64,
    pub violations: Vec<String>,
    pub barrier: Option<BarrierCalibration>,
    pub barrier_amplitude: Option<f64>,
    pub ground_state_energy: Option<f64>,
    pub ground_state_steps: Option<usize>,
    pub pulse_time: Option<f64>,
    pub dt: f64,
}

impl Diagnostics {
    pub fn max_residual(&self) -> f64 {
        self.richardson_residual.iter().copied().fold(0.0, f64::max)
    }

    pub fn degraded_reasons(&self) -> Vec<String> {
        let mut out = Vec::new();
        let r = self.max_residual();
        if !(r < fisher::RESIDUAL_LIMIT) {
            out.push(format!(
                "Richardson residual {r:e} exceeds {:e}",
                fisher::RESIDUAL_LIMIT
            ));
        }
        if !(self.max_norm_drift < NORM_DRIFT_LIMIT) {
            out.push(format!(
                "norm drift {:e} exceeds {NORM_DRIFT_LIMIT:e}",
                self.max_norm_drift
            ));
        }
        out.extend(self.violations.iter().cloned());
        out
    }

    pub fn degraded(&self) -> bool {
        !self.degraded_reasons().is_empty()
    }
}

/// Everything a run produces, all on the lattice `theta × series.times`.
#[derive(Debug, Clone)]
pub struct SchemeOutput {
    pub scheme: SchemeId,
    pub theta: Vec<f64>,
    pub series: FisherSeries,
    /// `|ψ|²`, or `|ψ_+|²` before readout for spinor schemes.
    pub density: Vec<Vec<f64>>,
    pub ddensity: Vec<Vec<f64>>,
    /// `J_z = ½(|ψ_+|² − |ψ_−|²)` after the readout pulse.
    pub jz: Option<Vec<Vec<f64>>>,
    pub djz: Option<Vec<Vec<f64>>>,
    pub diagnostics: Diagnostics,
}

/// Runs the plan with derivatives taken at `omega0` with step `delta`, using
/// at most `threads` concurrent offset propagations.
pub fn run_scheme(plan: &SchemePlan, omega0: f64, delta: f64, threads: usize) -> Result<SchemeOutput> {
    run(plan, omega0, delta, threads).map_err(|e| e.in_scheme(plan.config.scheme.as_str()))
}

impl SchemePlan {
    /// Runs at the configured `omega0` and `delta`.
    pub fn run(&self, threads: usize) -> Result<SchemeOutput> {
        let ev = &self.config.evolution;
        run_scheme(self, ev.omega0, ev.delta, threads)
    }
}

fn run(plan: &SchemePlan, omega0: f64, delta: f64, threads: usize) -> Result<SchemeOutput> {
    if !omega0.is_finite() {
        return Err(Error::config(format!("omega0 must be finite, got {omega0}")));
    }
    let grid = &plan.grid;
    let params = plan.params.with_omega(omega0);
    let mut diag = Diagnostics {
        delta,
        richardson_residual: Vec::new(),
        max_norm_drift: 0.0,
        max_excluded_mass: 0.0,
        violations: Vec::new(),
        barrier: None,
        barrier_amplitude: None,
        ground_state_energy: None,
        ground_state_steps: None,
        pulse_time: plan.pulse.map(|p| p.time),
        dt: params.dt,
    };
    match plan.potential {
        PotentialSchedule::Scalar { base, barrier } => {
            let pot = match barrier {
                None => base,
                Some(BarrierSchedule::Fixed(b)) => base.with_barrier(b),
                Some(BarrierSchedule::Calibrated {
                    width,
                    center,
                    on_time,
                    target_reflection,
                    probe_sigma,
                    k_kick,
                }) => {
                    let probe = BarrierProbe {
                        width,
                        ..BarrierProbe::for_grid(grid, probe_sigma)
                    };
                    let cal = calibrate_barrier(grid, k_kick, &probe, target_reflection)?;
                    diag.barrier = Some(cal);
                    base.with_barrier(Barrier {
                        amplitude: cal.amplitude,
                        width,
                        center,
                        on_time,
                    })
                }
            };
            diag.barrier_amplitude = pot.barrier.map(|b| b.amplitude);
            let psi0 = match plan.initial {
                InitialState::Kandes { sigma, k_kick } => initial_state_kandes(grid.clone(), sigma, k_kick)?,
                InitialState::OamPair { ell } => initial_state_oam_pair(grid.clone(), ell)?,
                other => return Err(Error::config(format!("{other:?} is not a scalar initial state"))),
            };
            run_scalar(plan, &psi0, &pot, &params, delta, threads, diag)
        }
        PotentialSchedule::Spinor(pot) => {
            let s0 = match plan.initial {
                InitialState::OamSpinor { ell } => SpinorState::new(
                    half(plane_wave(grid.clone(), ell)),
                    half(plane_wave(grid.clone(), -ell)),
                )?,
                InitialState::TrapGroundState { trap_omega } => {
                    let trap = PotentialSpec::harmonic(trap_omega, TrapPath::Fixed { center: 0.0 });
                    let gs = ground_state(&trap, params.interaction, grid.clone(), &GroundStateOptions::default())?;
                    diag.ground_state_energy = Some(gs.energy);
                    diag.ground_state_steps = Some(gs.steps);
                    let psi = half(gs.state);
                    SpinorState::new(psi.clone(), psi)?
                }
                other => return Err(Error::config(format!("{other:?} is not a spinor initial state"))),
            };
            let pulse = plan
                .pulse
                .ok_or_else(|| Error::config("spinor scheme without a readout pulse"))?;
            run_spinor(plan, &s0, &pot, pulse, &params, delta, threads, diag)
        }
    }
}

fn half(psi: Wavefunction) -> Wavefunction {
    psi.scaled(Complex64::new(FRAC_1_SQRT_2, 0.0))
}

fn run_scalar(
    plan: &SchemePlan,
    psi0: &Wavefunction,
    pot: &PotentialSpec,
    params: &EvolveParams,
    delta: f64,
    threads: usize,
    mut diag: Diagnostics,
) -> Result<SchemeOutput> {
    let grid = &plan.grid;
    let runner = |omega: f64| {
        let p = params.with_omega(omega);
        Ok(Propagator::new(grid.clone(), &p).evolve(psi0, pot, &p))
    };
    let bundle = derivative_bundle(runner, params.omega_rot, delta, threads)?;

    let n0 = psi0.norm_sqr();
    let n = bundle.times.len();
    let mut series = empty_series(bundle.times.clone(), grid.radius(), &plan.estimators);
    let mut density = Vec::with_capacity(n);
    let mut ddensity = Vec::with_capacity(n);
    for ((&t, psi), dpsi) in bundle.times.iter().zip(&bundle.base).zip(&bundle.derivative) {
        diag.max_norm_drift = diag.max_norm_drift.max((psi.norm_sqr() - n0).abs());
        series.f_q.push(fisher::qfi(psi, dpsi)?);
        let p = psi.density();
        let dp = density_derivative(psi, dpsi);
        let fc = cfi_density(&p, &dp, grid);
        diag.max_excluded_mass = diag.max_excluded_mass.max(fc.excluded_mass);
        series.f_c.push(fc.value);
        if let Some(v) = series.f_lr.as_mut() {
            v.push(cfi_left_right(&p, &dp, grid, plan.split));
        }
        if let Some(v) = series.analytic_f_q.as_mut() {
            v.push(analytic_qfi_free(psi0, t));
        }
        density.push(p);
        ddensity.push(dp);
    }
    diag.richardson_residual = bundle.richardson_residual;
    diag.violations = series.violations();
    Ok(SchemeOutput {
        scheme: plan.config.scheme,
        theta: grid.theta().to_vec(),
        series,
        density,
        ddensity,
        jz: None,
        djz: None,
        diagnostics: diag,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_spinor(
    plan: &SchemePlan,
    s0: &SpinorState,
    pot: &SpinorPotential,
    pulse: PulseSchedule,
    params: &EvolveParams,
    delta: f64,
    threads: usize,
    mut diag: Diagnostics,
) -> Result<SchemeOutput> {
    let grid = &plan.grid;
    let apply = |s: &SpinorState| pulse.pulse.apply(s);
    let runner = |omega: f64| evolve_spinor_with_pulse(s0, pot, &params.with_omega(omega), pulse.step, &apply);
    let bundle = derivative_bundle(runner, params.omega_rot, delta, threads)?;

    let n0 = s0.norm_sqr();
    let var0 = spinor_lz_variance(s0);
    let save_steps = params.save_steps();
    let n = bundle.times.len();
    let mut series = empty_series(bundle.times.clone(), grid.radius(), &plan.estimators);
    let mut density = Vec::with_capacity(n);
    let mut ddensity = Vec::with_capacity(n);
    let mut jz = Vec::with_capacity(n);
    let mut djz = Vec::with_capacity(n);
    for (i, ((&t, s), ds)) in bundle
        .times
        .iter()
        .zip(&bundle.base)
        .zip(&bundle.derivative)
        .enumerate()
    {
        diag.max_norm_drift = diag.max_norm_drift.max((s.norm_sqr() - n0).abs());
        series.f_q.push(spinor_qfi(s, ds)?);
        let (r, dr) = if save_steps[i] <= pulse.step {
            (pulse.pulse.apply(s), pulse.pulse.apply(ds))
        } else {
            (s.clone(), ds.clone())
        };
        let fc = spinor_cfi_density(&r, &dr)?;
        diag.max_excluded_mass = diag.max_excluded_mass.max(fc.excluded_mass);
        series.f_c.push(fc.value);
        if let Some(v) = series.f_spin.as_mut() {
            let [(pp, dpp), (pm, dpm)] = spin_population_derivatives(&r, &dr)?;
            v.push(cfi_spin_population(pp, pm, dpp, dpm));
        }
        if let Some(v) = series.analytic_f_q.as_mut() {
            v.push(4.0 * t * t * var0);
        }
        density.push(s.plus.density());
        ddensity.push(density_derivative(&s.plus, &ds.plus));
        jz.push(r.jz_density());
        let dp = density_derivative(&r.plus, &dr.plus);
        let dm = density_derivative(&r.minus, &dr.minus);
        djz.push(dp.iter().zip(&dm).map(|(a, b)| 0.5 * (a - b)).collect());
    }
    diag.richardson_residual = bundle.richardson_residual;
    diag.violations = series.violations();
    Ok(SchemeOutput {
        scheme: plan.config.scheme,
        theta: grid.theta().to_vec(),
        series,
        density,
        ddensity,
        jz: Some(jz),
        djz: Some(djz),
        diagnostics: diag,
    })
}

fn empty_series(times: Vec<f64>, radius: f64, est: &Estimators) -> FisherSeries {
    let n = times.len();
    let slot = |on: bool| on.then(|| Vec::with_capacity(n));
    FisherSeries {
        times,
        f_q: Vec::with_capacity(n),
        f_c: Vec::with_capacity(n),
        f_lr: slot(est.f_lr),
        f_spin: slot(est.f_spin),
        f_s_reference: sagnac_reference(radius),
        analytic_f_q: slot(est.analytic),
    }
}

/// `Var(L_z)` of the two-component state taken as a whole.
fn spinor_lz_variance(s: &SpinorState) -> f64 {
    let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for c in [&s.plus, &s.minus] {
        let n = c.norm_sqr();
        if n == 0.0 {
            continue;
        }
        let (mean, var) = c.lz_moments();
        w += n;
        m1 += n * mean;
        m2 += n * (var + mean * mean);
    }
    if w == 0.0 {
        return 0.0;
    }
    let mean = m1 / w;
    (m2 / w - mean * mean).max(0.0)
}
