//! Rotation sensitivity of simulated order parameters.
//!
//! The Ω-derivative of a trajectory is taken by central differences over
//! independent runs at `Ω₀ ± δ` (with a `δ/2` pair as a convergence check),
//! and fed to the quantum Fisher information of the pure single-particle
//! state and to classical Fisher informations of several measurements.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::grid::RingGrid;
use crate::wavefunction::{SpinorState, Wavefunction};

/// Bins with `P < EMPTY_BIN_EPS · max P` are dropped from classical sums.
pub const EMPTY_BIN_EPS: f64 = 1e-10;

/// Relative slack allowed in `F_C ≤ F_Q` style inequalities.
pub const ORDERING_SLACK: f64 = 1e-3;

/// Bound on the Richardson residual for a converged derivative.
pub const RESIDUAL_LIMIT: f64 = 1e-2;

/// States that can be finite-differenced.
pub trait Differentiable: Clone + Send {
    fn add_scaled(&self, other: &Self, factor: f64) -> Self;
    fn max_abs(&self) -> f64;
    fn max_abs_diff(&self, other: &Self) -> f64;
}

impl Differentiable for Wavefunction {
    fn add_scaled(&self, other: &Self, factor: f64) -> Self {
        Wavefunction::add_scaled(self, other, factor)
    }
    fn max_abs(&self) -> f64 {
        Wavefunction::max_abs(self)
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        Wavefunction::max_abs_diff(self, other)
    }
}

impl Differentiable for SpinorState {
    fn add_scaled(&self, other: &Self, factor: f64) -> Self {
        SpinorState::add_scaled(self, other, factor)
    }
    fn max_abs(&self) -> f64 {
        SpinorState::max_abs(self)
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        SpinorState::max_abs_diff(self, other)
    }
}

/// Trajectory at `Ω₀` together with `∂ψ/∂Ω` on the same save times.
#[derive(Debug, Clone)]
pub struct DerivativeBundle<S> {
    pub times: Vec<f64>,
    pub base: Vec<S>,
    pub derivative: Vec<S>,
    pub delta_used: f64,
    /// Per save time: `max|D_δ − D_{δ/2}| / max|D_{δ/2}|`.
    pub richardson_residual: Vec<f64>,
}

impl<S> DerivativeBundle<S> {
    pub fn max_residual(&self) -> f64 {
        self.richardson_residual.iter().copied().fold(0.0, f64::max)
    }

    pub fn converged(&self) -> bool {
        self.max_residual() < RESIDUAL_LIMIT
    }
}

type Trajectory<S> = Vec<(f64, S)>;

/// Runs `runner` at `Ω₀`, `Ω₀ ± δ` and `Ω₀ ± δ/2`, at most `threads` at a
/// time, and central-differences the snapshots.
///
/// The returned derivative uses step `δ`; the `δ/2` pair only feeds the
/// residual. Whether a non-converged bundle is usable is left to the caller.
pub fn derivative_bundle<S, F>(runner: F, omega0: f64, delta: f64, threads: usize) -> Result<DerivativeBundle<S>>
where
    S: Differentiable,
    F: Fn(f64) -> Result<Trajectory<S>> + Sync,
{
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::config(format!("derivative step must be positive, got {delta}")));
    }
    let omegas = [
        omega0,
        omega0 + delta,
        omega0 - delta,
        omega0 + 0.5 * delta,
        omega0 - 0.5 * delta,
    ];
    let runs = run_all(&runner, &omegas, threads.max(1))?;
    let [base, plus, minus, plus_half, minus_half]: [Trajectory<S>; 5] =
        runs.try_into().unwrap_or_else(|_| unreachable!());

    let n = base.len();
    let aligned = [&plus, &minus, &plus_half, &minus_half].iter().all(|r| {
        r.len() == n
            && r.iter()
                .zip(&base)
                .all(|((ta, _), (tb, _))| (ta - tb).abs() <= 1e-12 * ta.abs().max(1.0))
    });
    if !aligned {
        return Err(Error::config("offset runs returned different save times"));
    }

    let mut times = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let mut derivative = Vec::with_capacity(n);
    let mut residual = Vec::with_capacity(n);
    for ((((t, s0), (_, sp)), (_, sm)), ((_, hp), (_, hm))) in base
        .into_iter()
        .zip(plus)
        .zip(minus)
        .zip(plus_half.into_iter().zip(minus_half))
    {
        let d_full = scale(&sp.add_scaled(&sm, -1.0), 1.0 / (2.0 * delta));
        let d_half = scale(&hp.add_scaled(&hm, -1.0), 1.0 / delta);
        let denom = d_half.max_abs();
        let r = if denom > 0.0 {
            d_full.max_abs_diff(&d_half) / denom
        } else {
            0.0
        };
        times.push(t);
        states.push(s0);
        derivative.push(d_full);
        residual.push(r);
    }
    Ok(DerivativeBundle {
        times,
        base: states,
        derivative,
        delta_used: delta,
        richardson_residual: residual,
    })
}

fn scale<S: Differentiable>(s: &S, factor: f64) -> S {
    // s·factor = s + (factor − 1)·s
    s.add_scaled(s, factor - 1.0)
}

fn run_all<S, F>(runner: &F, omegas: &[f64], threads: usize) -> Result<Vec<Trajectory<S>>>
where
    S: Send,
    F: Fn(f64) -> Result<Trajectory<S>> + Sync,
{
    let slots: Vec<Mutex<Option<Result<Trajectory<S>>>>> = omegas.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = threads.min(omegas.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= omegas.len() {
                    break;
                }
                let r = runner(omegas[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every offset was run"))
        .collect()
}

/// Single-particle QFI, `4[⟨ψ̇|ψ̇⟩ − |⟨ψ|ψ̇⟩|²]`, clamped at zero.
pub fn qfi(psi: &Wavefunction, dpsi: &Wavefunction) -> Result<f64> {
    let dd = dpsi.overlap(dpsi)?.re;
    let pd = psi.overlap(dpsi)?;
    Ok((4.0 * (dd - pd.norm_sqr())).max(0.0))
}

/// Two-component QFI with the joint inner product.
pub fn spinor_qfi(state: &SpinorState, dstate: &SpinorState) -> Result<f64> {
    let dd = dstate.overlap(dstate)?.re;
    let pd = state.overlap(dstate)?;
    Ok((4.0 * (dd - pd.norm_sqr())).max(0.0))
}

/// Free-evolution QFI `4 t² Var(L_z/ħ)` of the initial state.
pub fn analytic_qfi_free(psi0: &Wavefunction, t: f64) -> f64 {
    4.0 * t * t * psi0.lz_moments().1
}

/// `∂P/∂Ω = 2 Re(ψ* ∂ψ/∂Ω)` pointwise.
pub fn density_derivative(psi: &Wavefunction, dpsi: &Wavefunction) -> Vec<f64> {
    psi.amps()
        .iter()
        .zip(dpsi.amps())
        .map(|(a, d)| 2.0 * (a.conj() * d).re)
        .collect()
}

/// Classical Fisher information of a sampled density, with the probability
/// mass of the dropped (near-empty) bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityFisher {
    pub value: f64,
    pub excluded_mass: f64,
}

fn density_sum(densities: &[(&[f64], &[f64])], dtheta: f64) -> DensityFisher {
    let peak = densities
        .iter()
        .flat_map(|(p, _)| p.iter().copied())
        .fold(0.0, f64::max);
    let cut = EMPTY_BIN_EPS * peak;
    let mut value = 0.0;
    let mut excluded = 0.0;
    for (p, dp) in densities {
        for (&p, &d) in p.iter().zip(dp.iter()) {
            if p > cut {
                value += d * d / p;
            } else {
                excluded += p;
            }
        }
    }
    DensityFisher {
        value: value * dtheta,
        excluded_mass: excluded * dtheta,
    }
}

/// `F_C = ∫ (∂P/∂Ω)² / P dθ` over non-empty bins.
pub fn cfi_density(p: &[f64], dp: &[f64], grid: &RingGrid) -> DensityFisher {
    density_sum(&[(p, dp)], grid.dtheta())
}

/// Spin- and position-resolved CFI: the density sum over both components.
pub fn spinor_cfi_density(state: &SpinorState, dstate: &SpinorState) -> Result<DensityFisher> {
    state.plus.grid().ensure_same(dstate.plus.grid())?;
    let pp = state.plus.density();
    let pm = state.minus.density();
    let dp = density_derivative(&state.plus, &dstate.plus);
    let dm = density_derivative(&state.minus, &dstate.minus);
    Ok(density_sum(&[(&pp, &dp), (&pm, &dm)], state.grid().dtheta()))
}

/// CFI of a measurement with discrete outcomes `P_j` and derivatives `dP_j`.
/// Outcomes with `P_j ≤ EMPTY_BIN_EPS · max P` contribute nothing.
pub fn cfi_outcomes(probs: &[f64], dprobs: &[f64]) -> f64 {
    let peak = probs.iter().copied().fold(0.0, f64::max);
    probs
        .iter()
        .zip(dprobs)
        .filter(|(p, _)| **p > EMPTY_BIN_EPS * peak)
        .map(|(p, d)| d * d / p)
        .sum()
}

/// Two-bin CFI for a detector that only tells θ < `split` from θ ≥ `split`.
pub fn cfi_left_right(p: &[f64], dp: &[f64], grid: &RingGrid, split: f64) -> f64 {
    let mut left = (0.0, 0.0);
    let mut right = (0.0, 0.0);
    for ((&t, &p), &d) in grid.theta().iter().zip(p).zip(dp) {
        let bin = if t < split { &mut left } else { &mut right };
        bin.0 += p;
        bin.1 += d;
    }
    let h = grid.dtheta();
    cfi_outcomes(&[left.0 * h, right.0 * h], &[left.1 * h, right.1 * h])
}

/// Spin-population CFI, `Σ_{j=±1} (dP_j/dΩ)² / P_j`.
pub fn cfi_spin_population(p_plus: f64, p_minus: f64, dp_plus: f64, dp_minus: f64) -> f64 {
    cfi_outcomes(&[p_plus, p_minus], &[dp_plus, dp_minus])
}

/// Spin populations and their Ω-derivatives.
pub fn spin_population_derivatives(state: &SpinorState, dstate: &SpinorState) -> Result<[(f64, f64); 2]> {
    let dp = 2.0 * state.plus.overlap(&dstate.plus)?.re;
    let dm = 2.0 * state.minus.overlap(&dstate.minus)?.re;
    let (p, m) = state.populations();
    Ok([(p, dp), (m, dm)])
}

/// `F_S = (2 m π R² / ħ)²`: QFI after one closed loop of an ideal ring interferometer.
pub fn sagnac_reference(radius: f64) -> f64 {
    (2.0 * PI * radius * radius).powi(2)
}

/// Sagnac phase `2 m Ω A / ħ`.
pub fn sagnac_phase(omega: f64, area: f64) -> f64 {
    2.0 * omega * area
}

/// Time series of Fisher informations for one scheme run.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherSeries {
    pub times: Vec<f64>,
    pub f_q: Vec<f64>,
    pub f_c: Vec<f64>,
    pub f_lr: Option<Vec<f64>>,
    pub f_spin: Option<Vec<f64>>,
    pub f_s_reference: f64,
    pub analytic_f_q: Option<Vec<f64>>,
}

fn exceeds(lhs: f64, rhs: f64) -> bool {
    lhs > rhs * (1.0 + ORDERING_SLACK) + 1e-12
}

impl FisherSeries {
    /// Descriptions of every violated ordering (`F_C ≤ F_Q`, `F_LR ≤ F_C`,
    /// `F_spin ≤ F_C`, `F_spin ≤ F_Q`). Empty when all hold.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, &t) in self.times.iter().enumerate() {
            let (fq, fc) = (self.f_q[i], self.f_c[i]);
            if exceeds(fc, fq) {
                out.push(format!("t = {t}: F_C = {fc} exceeds F_Q = {fq}"));
            }
            if let Some(flr) = &self.f_lr {
                if exceeds(flr[i], fc) {
                    out.push(format!("t = {t}: F_LR = {} exceeds F_C = {fc}", flr[i]));
                }
            }
            if let Some(fs) = &self.f_spin {
                if exceeds(fs[i], fc) {
                    out.push(format!("t = {t}: F_spin = {} exceeds F_C = {fc}", fs[i]));
                }
                if exceeds(fs[i], fq) {
                    out.push(format!("t = {t}: F_spin = {} exceeds F_Q = {fq}", fs[i]));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the save time closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}
