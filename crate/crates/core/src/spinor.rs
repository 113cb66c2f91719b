//! Two-component evolution with independent trap paths, and the
//! instantaneous coupling pulses that recombine the components.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::Result;
use crate::potential::PotentialSpec;
use crate::propagator::{EvolveParams, Propagator};
use crate::wavefunction::{SpinorState, Wavefunction};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinorPotential {
    pub plus: PotentialSpec,
    pub minus: PotentialSpec,
}

impl SpinorPotential {
    pub fn symmetric(pot: PotentialSpec) -> Self {
        SpinorPotential { plus: pot, minus: pot }
    }
}

/// Evolves both components under the ring GPE with their own potentials and
/// intra-component interaction `U|ψ_±|²`; both share the rotation term.
pub fn evolve_spinor(
    state: &SpinorState,
    pot: &SpinorPotential,
    params: &EvolveParams,
) -> Result<Vec<(f64, SpinorState)>> {
    evolve_inner(state, pot, params, None)
}

/// As [`evolve_spinor`], applying `pulse` once the evolution reaches step
/// `pulse_step`. A snapshot saved at that step holds the state before the pulse.
pub fn evolve_spinor_with_pulse(
    state: &SpinorState,
    pot: &SpinorPotential,
    params: &EvolveParams,
    pulse_step: usize,
    pulse: &dyn Fn(&SpinorState) -> SpinorState,
) -> Result<Vec<(f64, SpinorState)>> {
    evolve_inner(state, pot, params, Some((pulse_step, pulse)))
}

type PulseHook<'a> = (usize, &'a dyn Fn(&SpinorState) -> SpinorState);

fn evolve_inner(
    state: &SpinorState,
    pot: &SpinorPotential,
    params: &EvolveParams,
    pulse: Option<PulseHook<'_>>,
) -> Result<Vec<(f64, SpinorState)>> {
    params.validate()?;
    state.plus.grid().ensure_same(state.minus.grid())?;
    pot.plus.validate(state.grid())?;
    pot.minus.validate(state.grid())?;

    let mut prop_plus = Propagator::new(state.grid().clone(), params);
    let mut prop_minus = Propagator::new(state.grid().clone(), params);
    let save_steps = params.save_steps();
    let n_steps = params.n_steps();
    let mut out = Vec::with_capacity(save_steps.len());
    let mut cur = state.clone();
    let mut next = 0;
    for step in 0..=n_steps {
        while next < save_steps.len() && save_steps[next] == step {
            out.push((params.save_times[next], cur.clone()));
            next += 1;
        }
        if let Some((at, f)) = pulse {
            if at == step {
                cur = f(&cur);
            }
        }
        if step == n_steps {
            break;
        }
        let t = step as f64 * params.dt;
        prop_plus.step_in_place(cur.plus.amps_mut(), &pot.plus, t);
        prop_minus.step_in_place(cur.minus.amps_mut(), &pot.minus, t);
    }
    Ok(out)
}

/// `ψ_± → (ψ_± + c · e^{±iφ(θ)} ψ_∓)/√2` for the two pulse families.
fn couple(state: &SpinorState, coupling: Complex64, ell: i64) -> SpinorState {
    let grid = state.grid().clone();
    let two_ell = 2.0 * ell as f64;
    let mut plus = Vec::with_capacity(grid.n_points());
    let mut minus = Vec::with_capacity(grid.n_points());
    for ((&t, p), m) in grid.theta().iter().zip(state.plus.amps()).zip(state.minus.amps()) {
        let twist = Complex64::from_polar(1.0, two_ell * t);
        plus.push((p + coupling * twist * m) * FRAC_1_SQRT_2);
        minus.push((m + coupling * twist.conj() * p) * FRAC_1_SQRT_2);
    }
    SpinorState {
        plus: Wavefunction::new(grid.clone(), plus).expect("same grid"),
        minus: Wavefunction::new(grid, minus).expect("same grid"),
    }
}

/// Raman beamsplitter that also transfers `2ℓ` units of angular momentum:
/// `ψ_± → (ψ_± − i ψ_∓ e^{±2iℓθ})/√2`.
pub fn raman_pulse(state: &SpinorState, ell: i64) -> SpinorState {
    couple(state, Complex64::new(0.0, -1.0), ell)
}

/// Inverse (adjoint) of [`raman_pulse`]: `ψ_± → (ψ_± + i ψ_∓ e^{±2iℓθ})/√2`.
pub fn raman_pulse_inverse(state: &SpinorState, ell: i64) -> SpinorState {
    couple(state, Complex64::new(0.0, 1.0), ell)
}

/// Microwave beamsplitter `ψ_± → (ψ_± − i ψ_∓)/√2`.
pub fn microwave_pulse(state: &SpinorState) -> SpinorState {
    raman_pulse(state, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RingGrid;
    use crate::wavefunction::{initial_state_kandes, plane_wave, uniform_state};
    use approx::assert_relative_eq;

    fn halves(psi: Wavefunction) -> Wavefunction {
        psi.scaled(Complex64::new(FRAC_1_SQRT_2, 0.0))
    }

    #[test]
    fn microwave_on_equal_components() {
        let g = RingGrid::new(128, 1.0).unwrap();
        let psi = initial_state_kandes(g, 0.4, 6.0).unwrap();
        let s = SpinorState::new(halves(psi.clone()), halves(psi.clone())).unwrap();
        let out = microwave_pulse(&s);
        let factor = Complex64::new(1.0, -1.0) * FRAC_1_SQRT_2 * FRAC_1_SQRT_2;
        for (a, b) in out.plus.amps().iter().zip(psi.amps()) {
            assert!((a - b * factor).norm() < 1e-14);
        }
        let (p, m) = out.populations();
        assert_relative_eq!(p, 0.5, epsilon = 1e-12);
        assert_relative_eq!(m, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn microwave_dark_port() {
        let g = RingGrid::new(64, 1.0).unwrap();
        let psi = halves(uniform_state(g));
        let s = SpinorState::new(psi.clone(), psi.scaled(-Complex64::i())).unwrap();
        let (p, m) = microwave_pulse(&s).populations();
        assert!(p.abs() < 1e-14);
        assert_relative_eq!(m, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn raman_zero_is_microwave() {
        let g = RingGrid::new(64, 1.0).unwrap();
        let s = SpinorState::new(halves(plane_wave(g.clone(), 2)), halves(plane_wave(g, -1))).unwrap();
        assert_eq!(raman_pulse(&s, 0), microwave_pulse(&s));
    }

    #[test]
    fn raman_twice_swaps_dressed_modes() {
        let g = RingGrid::new(64, 1.0).unwrap();
        let ell = 3;
        let s = SpinorState::new(plane_wave(g.clone(), ell), Wavefunction::zeros(g.clone())).unwrap();
        let out = raman_pulse(&raman_pulse(&s, ell), ell);
        let (p, m) = out.populations();
        assert!(p < 1e-14);
        assert_relative_eq!(m, 1.0, epsilon = 1e-12);
        // The transferred population carries winding ℓ − 2ℓ = −ℓ.
        let (mean, var) = out.minus.lz_moments();
        assert_relative_eq!(mean, -ell as f64, epsilon = 1e-10);
        assert!(var < 1e-10);
    }

    #[test]
    fn pulse_hook_fires_once_after_the_snapshot() {
        let g = RingGrid::new(64, 1.0).unwrap();
        let psi = halves(uniform_state(g.clone()));
        let s = SpinorState::new(psi.clone(), psi.scaled(-Complex64::i())).unwrap();
        let params = EvolveParams::uniform(0.0, 0.0, 1.0, 0.05, 4).unwrap();
        let pot = SpinorPotential::symmetric(PotentialSpec::free());
        let at = params.save_steps()[2];
        let traj = evolve_spinor_with_pulse(&s, &pot, &params, at, &microwave_pulse).unwrap();
        assert_relative_eq!(traj[2].1.populations().0, 0.5, epsilon = 1e-12);
        for (_, st) in &traj[3..] {
            let (p, m) = st.populations();
            assert!(p < 1e-12);
            assert_relative_eq!(m, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mirrored_transport_stays_mirrored() {
        use crate::potential::TrapPath;
        let g = RingGrid::new(256, 5.0).unwrap();
        let path = TrapPath::Sinusoidal {
            period: 5.0,
            direction: -1.0,
        };
        let pot = SpinorPotential {
            plus: PotentialSpec::harmonic(1.0, path),
            minus: PotentialSpec::harmonic(1.0, path.mirrored()),
        };
        let psi = crate::wavefunction::moving_gaussian(g.clone(), 0.2, 0.0, 0.0);
        let s = SpinorState::new(halves(psi.clone()), halves(psi)).unwrap();
        let params = EvolveParams::uniform(0.0, 0.0, 2.0, 1e-3, 4).unwrap();
        let traj = evolve_spinor(&s, &pot, &params).unwrap();
        let n = g.n_points();
        for (_, st) in &traj {
            let p = st.plus.density();
            let m = st.minus.density();
            for j in 1..n {
                assert!((p[j] - m[n - j]).abs() < 1e-8);
            }
            assert_relative_eq!(st.norm_sqr(), 1.0, epsilon = 1e-10);
        }
    }
}
