//! Uniform periodic angular grid and the discrete winding-number transform.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Periodic grid over θ ∈ [−π, π) on a ring of radius `R`.
///
/// Owns the FFT plans for its resolution, so every transform on the grid
/// reuses them. Cloning is cheap; wavefunctions share a grid through an `Arc`.
#[derive(Clone)]
pub struct RingGrid {
    n_points: usize,
    radius: f64,
    theta: Vec<f64>,
    windings: Vec<i64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for RingGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RingGrid")
            .field("n_points", &self.n_points)
            .field("radius", &self.radius)
            .finish()
    }
}

impl PartialEq for RingGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_points == other.n_points && self.radius == other.radius
    }
}

impl RingGrid {
    pub fn new(n_points: usize, radius: f64) -> Result<Arc<Self>> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::config(format!(
                "grid size must be a power of two and at least 8, got {n_points}"
            )));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::config(format!(
                "ring radius must be positive and finite, got {radius}"
            )));
        }
        let dtheta = 2.0 * PI / n_points as f64;
        let theta = (0..n_points).map(|j| -PI + j as f64 * dtheta).collect();
        let half = (n_points / 2) as i64;
        let windings = (-half..half).collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_points);
        let inverse = planner.plan_fft_inverse(n_points);
        Ok(Arc::new(RingGrid {
            n_points,
            radius,
            theta,
            windings,
            forward,
            inverse,
        }))
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_points as f64
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Winding numbers in ascending order, `−N/2 ..= N/2 − 1`. This is also
    /// the ordering of [`RingGrid::to_spectrum`].
    pub fn windings(&self) -> &[i64] {
        &self.windings
    }

    /// Winding number carried by FFT bin `k`.
    pub fn fft_winding(&self, k: usize) -> i64 {
        if k < self.n_points / 2 {
            k as i64
        } else {
            k as i64 - self.n_points as i64
        }
    }

    /// Winding numbers in raw FFT bin order.
    pub fn fft_windings(&self) -> Vec<i64> {
        (0..self.n_points).map(|k| self.fft_winding(k)).collect()
    }

    pub fn ensure_same(&self, other: &RingGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.n_points,
                left_radius: self.radius,
                right: other.n_points,
                right_radius: other.radius,
            })
        }
    }

    /// Unnormalized in-place forward DFT (FFT bin order).
    pub fn fft_in_place(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Unnormalized in-place inverse DFT (FFT bin order).
    pub fn ifft_in_place(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }

    /// Coefficients `c_n = (1/√2π) ∫ ψ(θ) e^{−inθ} dθ`, ordered as [`RingGrid::windings`].
    ///
    /// Normalized so that `Σ|c_n|² = Σ|ψ_j|² Δθ`.
    pub fn to_spectrum(&self, amps: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(amps.len(), self.n_points);
        let mut buf = amps.to_vec();
        self.forward.process(&mut buf);
        let scale = self.dtheta() / (2.0 * PI).sqrt();
        // θ_0 = −π contributes e^{inπ} = (−1)^n.
        self.windings
            .iter()
            .map(|&n| {
                let k = n.rem_euclid(self.n_points as i64) as usize;
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                buf[k] * (scale * sign)
            })
            .collect()
    }

    /// Inverse of [`RingGrid::to_spectrum`]: `ψ(θ_j) = (1/√2π) Σ_n c_n e^{inθ_j}`.
    pub fn to_position(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(coeffs.len(), self.n_points);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_points];
        let scale = 1.0 / (2.0 * PI).sqrt();
        for (&n, &c) in self.windings.iter().zip(coeffs) {
            let k = n.rem_euclid(self.n_points as i64) as usize;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            buf[k] = c * (scale * sign);
        }
        self.inverse.process(&mut buf);
        buf
    }

    /// Δθ-weighted Riemann sum of a sampled function.
    pub fn integrate(&self, values: impl IntoIterator<Item = f64>) -> f64 {
        values.into_iter().sum::<f64>() * self.dtheta()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_point_grid() {
        let g = RingGrid::new(8, 1.0).unwrap();
        let expected: Vec<f64> = (0..8).map(|j| -PI + j as f64 * PI / 4.0).collect();
        for (a, b) in g.theta().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(g.windings(), &[-4, -3, -2, -1, 0, 1, 2, 3]);
        assert_eq!(g.theta()[0], -PI);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(RingGrid::new(7, 1.0).unwrap_err().is_config());
        assert!(RingGrid::new(4, 1.0).is_err());
        assert!(RingGrid::new(12, 1.0).is_err());
        assert!(RingGrid::new(16, 0.0).is_err());
        assert!(RingGrid::new(16, -1.0).is_err());
        assert!(RingGrid::new(16, f64::NAN).is_err());
    }

    #[test]
    fn spacing_is_uniform() {
        let g = RingGrid::new(2048, 1.0).unwrap();
        let d = g.dtheta();
        for w in g.theta().windows(2) {
            assert!((w[1] - w[0] - d).abs() < 1e-12);
        }
    }

    #[test]
    fn windings_are_a_permutation_of_fft_bins() {
        let g = RingGrid::new(64, 2.0).unwrap();
        let mut bins = g.fft_windings();
        bins.sort_unstable();
        assert_eq!(bins, g.windings());
    }

    #[test]
    fn plane_wave_lands_in_one_bin() {
        let g = RingGrid::new(32, 1.0).unwrap();
        let amps: Vec<Complex64> = g
            .theta()
            .iter()
            .map(|&t| Complex64::from_polar(1.0 / (2.0 * PI).sqrt(), 3.0 * t))
            .collect();
        let c = g.to_spectrum(&amps);
        for (&n, cn) in g.windings().iter().zip(&c) {
            let want = if n == 3 { 1.0 } else { 0.0 };
            assert!((cn - Complex64::new(want, 0.0)).norm() < 1e-13, "n={n} c={cn}");
        }
    }

    #[test]
    fn mismatch_is_reported() {
        let a = RingGrid::new(16, 1.0).unwrap();
        let b = RingGrid::new(32, 1.0).unwrap();
        assert!(matches!(a.ensure_same(&b), Err(Error::GridMismatch { .. })));
        assert!(a.ensure_same(&RingGrid::new(16, 1.0).unwrap()).is_ok());
    }
}
