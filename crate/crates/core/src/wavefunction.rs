//! Single- and two-component order parameters on a [`RingGrid`], their
//! observables, and the initial states used by the gyroscope schemes.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::RingGrid;
use crate::potential::{wrap_angle, PotentialSpec};

/// Complex samples `ψ(θ_j)` on a shared grid.
///
/// States built by the constructors here are normalized to
/// `∫|ψ|² dθ = 1`. Parameter derivatives (`∂ψ/∂Ω`) reuse this type and carry
/// no norm constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    grid: Arc<RingGrid>,
    amps: Vec<Complex64>,
}

impl Wavefunction {
    pub fn new(grid: Arc<RingGrid>, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != grid.n_points() {
            return Err(Error::config(format!(
                "wavefunction has {} samples but the grid has {}",
                amps.len(),
                grid.n_points()
            )));
        }
        Ok(Wavefunction { grid, amps })
    }

    pub fn zeros(grid: Arc<RingGrid>) -> Self {
        let amps = vec![Complex64::new(0.0, 0.0); grid.n_points()];
        Wavefunction { grid, amps }
    }

    pub fn from_fn(grid: Arc<RingGrid>, f: impl Fn(f64) -> Complex64) -> Self {
        let amps = grid.theta().iter().map(|&t| f(t)).collect();
        Wavefunction { grid, amps }
    }

    /// Builds a state from winding-number coefficients ordered as [`RingGrid::windings`].
    pub fn from_spectrum(grid: Arc<RingGrid>, coeffs: &[Complex64]) -> Result<Self> {
        if coeffs.len() != grid.n_points() {
            return Err(Error::config("spectrum length does not match grid"));
        }
        let amps = grid.to_position(coeffs);
        Ok(Wavefunction { grid, amps })
    }

    pub fn grid(&self) -> &Arc<RingGrid> {
        &self.grid
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<Complex64> {
        self.amps
    }

    /// `∫|ψ|² dθ`.
    pub fn norm_sqr(&self) -> f64 {
        self.grid.integrate(self.amps.iter().map(|a| a.norm_sqr()))
    }

    /// Rescales to unit norm. A zero state is returned unchanged.
    pub fn normalized(mut self) -> Self {
        let n = self.norm_sqr();
        if n > 0.0 {
            let s = 1.0 / n.sqrt();
            self.amps.iter_mut().for_each(|a| *a *= s);
        }
        self
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        self.amps.iter_mut().for_each(|a| *a *= factor);
        self
    }

    /// `P(θ_j) = |ψ(θ_j)|²`.
    pub fn density(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨self|other⟩ = ∫ ψ* φ dθ`.
    pub fn overlap(&self, other: &Wavefunction) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        let s: Complex64 = self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.dtheta())
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        self.grid.to_spectrum(&self.amps)
    }

    /// Mean and variance of `L_z/ħ` from the winding-number spectrum.
    pub fn lz_moments(&self) -> (f64, f64) {
        let c = self.spectrum();
        let mut total = 0.0;
        let mut first = 0.0;
        let mut second = 0.0;
        for (&n, cn) in self.grid.windings().iter().zip(&c) {
            let w = cn.norm_sqr();
            let n = n as f64;
            total += w;
            first += n * w;
            second += n * n * w;
        }
        if total == 0.0 {
            return (0.0, 0.0);
        }
        let mean = first / total;
        let var = (second / total - mean * mean).max(0.0);
        (mean, var)
    }

    /// Kinetic + potential + mean-field energy, `U/2 ∫|ψ|⁴`, at time `t`.
    pub fn energy(&self, potential: &PotentialSpec, interaction: f64, t: f64) -> f64 {
        let r2 = self.grid.radius().powi(2);
        let kinetic: f64 = self
            .grid
            .windings()
            .iter()
            .zip(self.spectrum())
            .map(|(&n, c)| c.norm_sqr() * (n * n) as f64 / (2.0 * r2))
            .sum();
        let v = potential.sample(&self.grid, t);
        let dens = self.density();
        let pot = self.grid.integrate(v.iter().zip(&dens).map(|(v, p)| v * p));
        let mf = 0.5 * interaction * self.grid.integrate(dens.iter().map(|p| p * p));
        kinetic + pot + mf
    }

    /// RMS angular distance of the density from `center`, using wrapped
    /// displacements.
    pub fn rms_width_about(&self, center: f64) -> f64 {
        let dens = self.density();
        let total = self.grid.integrate(dens.iter().copied());
        let m2 = self.grid.integrate(
            self.grid
                .theta()
                .iter()
                .zip(&dens)
                .map(|(&t, p)| wrap_angle(t - center).powi(2) * p),
        );
        (m2 / total).sqrt()
    }

    /// Largest pointwise modulus.
    pub fn max_abs(&self) -> f64 {
        self.amps.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// `self + factor · other`, sample by sample.
    pub fn add_scaled(&self, other: &Wavefunction, factor: f64) -> Wavefunction {
        let amps = self.amps.iter().zip(&other.amps).map(|(a, b)| a + b * factor).collect();
        Wavefunction {
            grid: self.grid.clone(),
            amps,
        }
    }

    pub fn max_abs_diff(&self, other: &Wavefunction) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Rotates the state rigidly by `angle`: `ψ(θ) → ψ(θ − angle)`, exact on
    /// the spectral representation.
    pub fn rotated(&self, angle: f64) -> Wavefunction {
        let c: Vec<Complex64> = self
            .grid
            .windings()
            .iter()
            .zip(self.spectrum())
            .map(|(&n, c)| c * Complex64::from_polar(1.0, -(n as f64) * angle))
            .collect();
        Wavefunction {
            grid: self.grid.clone(),
            amps: self.grid.to_position(&c),
        }
    }
}

/// Two spin components `ψ₊₁`, `ψ₋₁` on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorState {
    pub plus: Wavefunction,
    pub minus: Wavefunction,
}

impl SpinorState {
    pub fn new(plus: Wavefunction, minus: Wavefunction) -> Result<Self> {
        plus.grid.ensure_same(&minus.grid)?;
        Ok(SpinorState { plus, minus })
    }

    pub fn grid(&self) -> &Arc<RingGrid> {
        self.plus.grid()
    }

    /// Joint norm `∫(|ψ₊₁|² + |ψ₋₁|²) dθ`.
    pub fn norm_sqr(&self) -> f64 {
        self.plus.norm_sqr() + self.minus.norm_sqr()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm_sqr();
        if n == 0.0 {
            return self;
        }
        let s = Complex64::new(1.0 / n.sqrt(), 0.0);
        SpinorState {
            plus: self.plus.scaled(s),
            minus: self.minus.scaled(s),
        }
    }

    /// Two-component inner product.
    pub fn overlap(&self, other: &SpinorState) -> Result<Complex64> {
        Ok(self.plus.overlap(&other.plus)? + self.minus.overlap(&other.minus)?)
    }

    /// Spin populations `(P₊, P₋)`.
    pub fn populations(&self) -> (f64, f64) {
        (self.plus.norm_sqr(), self.minus.norm_sqr())
    }

    /// `J_z(θ) = ½(|ψ₊₁|² − |ψ₋₁|²)`.
    pub fn jz_density(&self) -> Vec<f64> {
        self.plus
            .amps
            .iter()
            .zip(&self.minus.amps)
            .map(|(p, m)| 0.5 * (p.norm_sqr() - m.norm_sqr()))
            .collect()
    }

    pub fn add_scaled(&self, other: &SpinorState, factor: f64) -> SpinorState {
        SpinorState {
            plus: self.plus.add_scaled(&other.plus, factor),
            minus: self.minus.add_scaled(&other.minus, factor),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.plus.max_abs().max(self.minus.max_abs())
    }

    pub fn max_abs_diff(&self, other: &SpinorState) -> f64 {
        self.plus
            .max_abs_diff(&other.plus)
            .max(self.minus.max_abs_diff(&other.minus))
    }
}

/// `1/√(2π)` on every site: the `n = 0` eigenstate.
pub fn uniform_state(grid: Arc<RingGrid>) -> Wavefunction {
    let a = 1.0 / (2.0 * PI).sqrt();
    Wavefunction::from_fn(grid, |_| Complex64::new(a, 0.0))
}

/// Normalized `L_z` eigenstate `e^{iℓθ}/√(2π)`.
pub fn plane_wave(grid: Arc<RingGrid>, ell: i64) -> Wavefunction {
    let a = 1.0 / (2.0 * PI).sqrt();
    Wavefunction::from_fn(grid, |t| Complex64::from_polar(a, ell as f64 * t))
}

/// Gaussian packet split by a `±ħk` kick: `exp(−θ²/2σ²) cos(k R θ)`,
/// renormalized on the grid.
///
/// Rejects σ whose Gaussian tail at θ = ±π exceeds 10⁻⁸ of the peak, since
/// the packet would then wrap onto itself.
pub fn initial_state_kandes(grid: Arc<RingGrid>, sigma: f64, k_kick: f64) -> Result<Wavefunction> {
    if !(sigma > 0.0) {
        return Err(Error::config(format!("sigma must be positive, got {sigma}")));
    }
    let tail = (-PI * PI / (2.0 * sigma * sigma)).exp();
    if tail >= 1e-8 {
        return Err(Error::config(format!(
            "sigma = {sigma} rad leaves a tail of {tail:.3e} at θ = ±π (limit 1e-8)"
        )));
    }
    let kr = k_kick * grid.radius();
    Ok(gaussian_shape(grid, sigma, 0.0, |t| {
        Complex64::new((kr * t).cos(), 0.0)
    }))
}

/// Normalized Gaussian packet centered at `center` with mean winding `winding`.
pub fn moving_gaussian(grid: Arc<RingGrid>, sigma: f64, center: f64, winding: f64) -> Wavefunction {
    gaussian_shape(grid, sigma, center, |t| {
        Complex64::from_polar(1.0, winding * wrap_angle(t - center))
    })
}

fn gaussian_shape(grid: Arc<RingGrid>, sigma: f64, center: f64, carrier: impl Fn(f64) -> Complex64) -> Wavefunction {
    Wavefunction::from_fn(grid, |t| {
        let d = wrap_angle(t - center);
        carrier(t) * (-d * d / (2.0 * sigma * sigma)).exp()
    })
    .normalized()
}

/// Equal superposition of `±ℓ` windings, `(e^{iℓθ} + e^{−iℓθ})/√(4π)`.
pub fn initial_state_oam_pair(grid: Arc<RingGrid>, ell: i64) -> Result<Wavefunction> {
    let limit = (grid.n_points() / 4) as i64;
    if ell.abs() > limit {
        return Err(Error::config(format!(
            "|ell| = {} exceeds n_points/4 = {limit}",
            ell.abs()
        )));
    }
    if ell == 0 {
        return Ok(uniform_state(grid));
    }
    let a = 1.0 / (4.0 * PI).sqrt();
    Ok(Wavefunction::from_fn(grid, |t| {
        Complex64::new(2.0 * a * (ell as f64 * t).cos(), 0.0)
    }))
}
