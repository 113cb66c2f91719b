//! Declarative time-dependent potentials on the ring.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RingGrid;

/// Wraps an angle into (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Position of the harmonic trap minimum as a function of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrapPath {
    Fixed {
        center: f64,
    },
    /// `θ₀(t) = rate · t`.
    ConstantVelocity {
        rate: f64,
    },
    /// `θ₀(t) = direction · (2πt/T − sin(2πt/T))`: one full loop in time `T`
    /// that starts and ends at rest.
    Sinusoidal {
        period: f64,
        direction: f64,
    },
}

impl TrapPath {
    pub fn center(&self, t: f64) -> f64 {
        match *self {
            TrapPath::Fixed { center } => center,
            TrapPath::ConstantVelocity { rate } => rate * t,
            TrapPath::Sinusoidal { period, direction } => {
                let phase = 2.0 * PI * t / period;
                direction * (phase - phase.sin())
            }
        }
    }

    /// Reflection θ → −θ of the path.
    pub fn mirrored(&self) -> TrapPath {
        match *self {
            TrapPath::Fixed { center } => TrapPath::Fixed { center: -center },
            TrapPath::ConstantVelocity { rate } => TrapPath::ConstantVelocity { rate: -rate },
            TrapPath::Sinusoidal { period, direction } => TrapPath::Sinusoidal {
                period,
                direction: -direction,
            },
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, TrapPath::Fixed { .. })
    }
}

/// Regularized delta barrier: a Gaussian bump whose integral over θ equals
/// `amplitude`. Active for `t >= on_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
    pub on_time: f64,
}

impl Barrier {
    pub fn value(&self, theta: f64) -> f64 {
        let d = wrap_angle(theta - self.center);
        self.amplitude / (self.width * (2.0 * PI).sqrt()) * (-0.5 * d * d / (self.width * self.width)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    /// Trap frequency ω; zero disables the harmonic term.
    pub harmonic_omega: f64,
    pub trap_path: TrapPath,
    pub barrier: Option<Barrier>,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::free()
    }
}

impl PotentialSpec {
    pub fn free() -> Self {
        PotentialSpec {
            harmonic_omega: 0.0,
            trap_path: TrapPath::Fixed { center: 0.0 },
            barrier: None,
        }
    }

    pub fn harmonic(omega: f64, path: TrapPath) -> Self {
        PotentialSpec {
            harmonic_omega: omega,
            trap_path: path,
            barrier: None,
        }
    }

    pub fn with_barrier(mut self, barrier: Barrier) -> Self {
        self.barrier = Some(barrier);
        self
    }

    pub fn validate(&self, grid: &RingGrid) -> Result<()> {
        if !(self.harmonic_omega.is_finite() && self.harmonic_omega >= 0.0) {
            return Err(Error::config(format!(
                "harmonic_omega must be finite and non-negative, got {}",
                self.harmonic_omega
            )));
        }
        if let TrapPath::Sinusoidal { period, .. } = self.trap_path {
            if !(period > 0.0) {
                return Err(Error::config(format!(
                    "transport period must be positive, got {period}"
                )));
            }
        }
        if let Some(b) = &self.barrier {
            if b.amplitude != 0.0 && b.width < 4.0 * grid.dtheta() {
                return Err(Error::config(format!(
                    "barrier width {} is below 4Δθ = {} and cannot be resolved",
                    b.width,
                    4.0 * grid.dtheta()
                )));
            }
        }
        Ok(())
    }

    /// True when the potential does not change with time.
    pub fn is_static(&self) -> bool {
        (self.harmonic_omega == 0.0 || self.trap_path.is_static())
            && self.barrier.is_none_or(|b| b.amplitude == 0.0 || b.on_time <= 0.0)
    }

    pub fn value(&self, radius: f64, theta: f64, t: f64) -> f64 {
        let mut v = 0.0;
        if self.harmonic_omega != 0.0 {
            let d = wrap_angle(theta - self.trap_path.center(t));
            v += 0.5 * self.harmonic_omega.powi(2) * radius * radius * d * d;
        }
        if let Some(b) = &self.barrier {
            if t >= b.on_time {
                v += b.value(theta);
            }
        }
        v
    }

    /// Samples `V(θ_j, t)` into `out`.
    pub fn fill(&self, grid: &RingGrid, t: f64, out: &mut [f64]) {
        let r = grid.radius();
        for (o, &th) in out.iter_mut().zip(grid.theta()) {
            *o = self.value(r, th, t);
        }
    }

    pub fn sample(&self, grid: &RingGrid, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; grid.n_points()];
        self.fill(grid, t, &mut out);
        out
    }

    /// Energy scale used to pick the imaginary-time step.
    pub fn energy_scale(&self) -> f64 {
        self.harmonic_omega.max(1.0)
    }
}
