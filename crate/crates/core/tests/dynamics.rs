use std::f64::consts::PI;

use approx::assert_relative_eq;
use num_complex::Complex64;
use ringgyro::fisher::analytic_qfi_free;
use ringgyro::propagator::{calibrate_barrier, delta_barrier_reflection, probe_reflection, BarrierProbe};
use ringgyro::wavefunction::{initial_state_kandes, moving_gaussian};
use ringgyro::{
    build_scheme, evolve, ground_state, EvolveParams, GroundStateOptions, PotentialSpec, RingGrid, SchemeConfig,
    SchemeId, TrapPath, Wavefunction,
};

fn last(traj: Vec<(f64, Wavefunction)>) -> Wavefunction {
    traj.into_iter().last().unwrap().1
}

fn run_to(psi: &Wavefunction, pot: &PotentialSpec, omega: f64, u: f64, dt: f64, t: f64) -> Wavefunction {
    let params = EvolveParams::new(omega, u, dt, t, vec![t]).unwrap();
    last(evolve(psi, pot, &params).unwrap())
}

#[test]
fn free_evolution_matches_exact_spectral_phases() {
    let grid = RingGrid::new(512, 1.3).unwrap();
    let psi0 = initial_state_kandes(grid.clone(), 0.5, 20.0).unwrap();
    let (omega, t) = (0.7, 0.25);
    let numeric = run_to(&psi0, &PotentialSpec::free(), omega, 0.0, 1e-3, t);
    let r2 = grid.radius().powi(2);
    let exact: Vec<Complex64> = grid
        .windings()
        .iter()
        .zip(psi0.spectrum())
        .map(|(&n, c)| {
            let n = n as f64;
            c * Complex64::from_polar(1.0, -(n * n / (2.0 * r2) - omega * n) * t)
        })
        .collect();
    let exact = Wavefunction::from_spectrum(grid, &exact).unwrap();
    assert!(numeric.max_abs_diff(&exact) < 1e-11, "{}", numeric.max_abs_diff(&exact));
}

#[test]
fn rotating_frame_is_a_rigid_rotation_of_the_static_frame() {
    let grid = RingGrid::new(256, 1.0).unwrap();
    let psi0 = moving_gaussian(grid.clone(), 0.4, 0.3, 5.0);
    let (omega, t, u) = (1.5, 0.3, 0.6);
    let rotating = run_to(&psi0, &PotentialSpec::free(), omega, u, 1e-3, t);
    let lab = run_to(&psi0, &PotentialSpec::free(), 0.0, u, 1e-3, t);
    // e^{iΩ L_z t} shifts θ by +Ωt.
    let shifted = lab.rotated(-omega * t);
    assert!(
        rotating.max_abs_diff(&shifted) < 1e-10,
        "{}",
        rotating.max_abs_diff(&shifted)
    );
}

#[test]
fn split_step_error_is_second_order_in_dt() {
    let grid = RingGrid::new(256, 1.0).unwrap();
    let psi0 = moving_gaussian(grid.clone(), 0.4, 0.0, 3.0);
    let pot = PotentialSpec::harmonic(4.0, TrapPath::ConstantVelocity { rate: 2.0 });
    let t = 0.4;
    let reference = run_to(&psi0, &pot, 0.5, 0.8, 2.5e-5, t);
    let errs: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| run_to(&psi0, &pot, 0.5, 0.8, dt, t).max_abs_diff(&reference))
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.8..2.3).contains(&order), "errors {errs:?}");
    }
}

#[test]
fn static_hamiltonian_conserves_energy() {
    let grid = RingGrid::new(512, 2.0).unwrap();
    let psi0 = moving_gaussian(grid.clone(), 0.3, 0.4, 6.0);
    let pot = PotentialSpec::harmonic(3.0, TrapPath::Fixed { center: 0.0 });
    let u = 0.5;
    let e0 = psi0.energy(&pot, u, 0.0);
    let params = EvolveParams::uniform(0.0, u, 2.0, 1e-4, 10).unwrap();
    for (t, psi) in evolve(&psi0, &pot, &params).unwrap() {
        let e = psi.energy(&pot, u, t);
        assert!((e - e0).abs() < 1e-5 * e0.abs(), "t = {t}: {e} vs {e0}");
    }
}

#[test]
fn kandes_state_sits_on_two_winding_clusters() {
    let grid = RingGrid::new(2048, 1.0).unwrap();
    let psi = initial_state_kandes(grid.clone(), 0.5, 20.0).unwrap();
    let mut near = 0.0;
    let mut tail = 0.0;
    for (&n, c) in grid.windings().iter().zip(psi.spectrum()) {
        let w = c.norm_sqr();
        if (n.abs() - 20).abs() <= 12 {
            near += w;
        }
        if n.abs() > 200 {
            tail += w;
        }
    }
    assert!(near > 1.0 - 1e-12, "{near}");
    assert!(tail < 1e-12, "{tail}");
    let (mean, var) = psi.lz_moments();
    assert!(mean.abs() < 1e-10);
    // Two well-separated Gaussians of spectral width 1/(√2 σ) at ±kR.
    assert_relative_eq!(var, 400.0 + 2.0, max_relative = 1e-6);
}

#[test]
fn kandes_free_fisher_follows_free_law() {
    let mut cfg = SchemeConfig::defaults(SchemeId::KandesFree);
    cfg.grid.n_points = 512;
    cfg.evolution.save_intervals = 12;
    let out = build_scheme(&cfg).unwrap().run(5).unwrap();
    let analytic = out.series.analytic_f_q.as_ref().unwrap();
    let psi0 = initial_state_kandes(RingGrid::new(512, 1.0).unwrap(), 0.5, 20.0).unwrap();
    for ((&t, &fq), &a) in out.series.times.iter().zip(&out.series.f_q).zip(analytic) {
        assert_relative_eq!(a, analytic_qfi_free(&psi0, t), max_relative = 1e-12);
        if t > 0.0 {
            assert_relative_eq!(fq, a, max_relative = 1e-3);
        }
    }
    assert!(out.diagnostics.violations.is_empty());
}

#[test]
fn repulsion_spreads_a_packet_faster() {
    let grid = RingGrid::new(512, 1.0).unwrap();
    let psi0 = moving_gaussian(grid.clone(), 0.3, 0.0, 0.0);
    let widths: Vec<f64> = [0.0, 0.2, 1.0]
        .iter()
        .map(|&u| run_to(&psi0, &PotentialSpec::free(), 0.0, u, 1e-3, 0.1).rms_width_about(0.0))
        .collect();
    assert!(widths[0] < widths[1] && widths[1] < widths[2], "{widths:?}");
    // Free Gaussian spreading, σ(t)² = σ² + (t/(2σR²))², as the U = 0 oracle.
    let sigma = 0.3 / 2f64.sqrt();
    let expected = (sigma * sigma + (0.1 / (2.0 * sigma)).powi(2)).sqrt();
    assert_relative_eq!(widths[0], expected, max_relative = 1e-6);
}

#[test]
fn harmonic_ground_state_energy_and_width() {
    let grid = RingGrid::new(1024, 5.0).unwrap();
    let pot = PotentialSpec::harmonic(1.0, TrapPath::Fixed { center: 0.0 });
    let opts = GroundStateOptions::default();
    let free = ground_state(&pot, 0.0, grid.clone(), &opts).unwrap();
    let repulsive = ground_state(&pot, 0.2, grid.clone(), &opts).unwrap();
    // Oscillator length 1/√ω in arc length, so 1/(√2 R) rad in density.
    assert_relative_eq!(free.energy, 0.5, max_relative = 1e-6);
    assert_relative_eq!(
        free.state.rms_width_about(0.0),
        1.0 / (2f64.sqrt() * 5.0),
        max_relative = 1e-4
    );
    assert!(repulsive.energy > free.energy);
    assert!(repulsive.state.rms_width_about(0.0) > free.state.rms_width_about(0.0));
    // First-order perturbation theory: ΔE ≈ U/2 ∫|ψ₀|⁴ dθ.
    let overlap4 = grid.integrate(free.state.density().iter().map(|p| p * p));
    let de = repulsive.energy - free.energy;
    assert!(
        de < 0.5 * 0.2 * overlap4 && de > 0.9 * 0.5 * 0.2 * overlap4,
        "{de} vs {}",
        0.1 * overlap4
    );
    for gs in [&free, &repulsive] {
        assert_relative_eq!(gs.state.norm_sqr(), 1.0, max_relative = 1e-12);
        let sum: Complex64 = gs.state.amps().iter().sum();
        assert!(sum.im.abs() < 1e-12 * sum.re);
    }
}

#[test]
fn ground_state_is_stationary_in_real_time() {
    let grid = RingGrid::new(256, 5.0).unwrap();
    let pot = PotentialSpec::harmonic(1.0, TrapPath::Fixed { center: 0.0 });
    let opts = GroundStateOptions {
        tol: 1e-15,
        ..GroundStateOptions::default()
    };
    let gs = ground_state(&pot, 0.2, grid, &opts).unwrap();
    let later = run_to(&gs.state, &pot, 0.0, 0.2, 1e-3, 1.0);
    let p0 = gs.state.density();
    let p1 = later.density();
    let drift = p0.iter().zip(&p1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-4 * p0.iter().copied().fold(0.0, f64::max), "{drift}");
}

#[test]
fn calibrated_barrier_reflects_half() {
    let grid = RingGrid::new(2048, 1.0).unwrap();
    let probe = BarrierProbe::for_grid(&grid, 0.5);
    let cal = calibrate_barrier(&grid, 20.0, &probe, 0.5).unwrap();
    assert!((cal.reflection - 0.5).abs() <= probe.tolerance);
    let again = probe_reflection(&grid, 20.0, &probe, cal.amplitude);
    assert_relative_eq!(again, cal.reflection, max_relative = 1e-12);
    // A narrow barrier sits close to the delta-barrier law at the mean momentum.
    assert!((delta_barrier_reflection(cal.amplitude, 20.0, 1.0) - 0.5).abs() < 0.05);
    assert!(probe_reflection(&grid, 20.0, &probe, 0.5 * cal.amplitude) < 0.5);
    assert!(probe_reflection(&grid, 20.0, &probe, 2.0 * cal.amplitude) > 0.5);
}

#[test]
fn barrierless_probe_transmits_everything() {
    let grid = RingGrid::new(1024, 1.0).unwrap();
    let probe = BarrierProbe::for_grid(&grid, 0.5);
    let r = probe_reflection(&grid, 20.0, &probe, 0.0);
    // Only the tails of the freely spread packet, now centred at π/2, remain on θ < 0.
    let t = PI / 20.0;
    let s0 = 0.5 / 2f64.sqrt();
    let s = (s0 * s0 + (t / (2.0 * s0)).powi(2)).sqrt();
    let tails: f64 = grid
        .theta()
        .iter()
        .filter(|&&th| th < 0.0)
        .map(|&th| {
            (-2..=2)
                .map(|k| {
                    let d = th + 2.0 * PI * k as f64 - PI / 2.0;
                    (-d * d / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt())
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        * grid.dtheta();
    assert_relative_eq!(r, tails, max_relative = 1e-3);
}

fn kandes_run(u: f64, t_final: f64, intervals: usize) -> (Wavefunction, Vec<(f64, Wavefunction)>) {
    let grid = RingGrid::new(2048, 1.0).unwrap();
    let psi0 = initial_state_kandes(grid, 0.5, 20.0).unwrap();
    let params = EvolveParams::uniform(0.0, u, t_final, 1e-4, intervals).unwrap();
    let traj = evolve(&psi0, &PotentialSpec::free(), &params).unwrap();
    (psi0, traj)
}

fn l1(a: &Wavefunction, b: &Wavefunction) -> f64 {
    let g = a.grid();
    g.integrate(a.density().iter().zip(b.density()).map(|(p, q)| (p - q).abs()))
}

#[test]
fn free_kandes_packets_meet_opposite_and_keep_lz() {
    let tc = PI / 20.0;
    let (psi0, traj) = kandes_run(0.0, 2.0 * tc, 2);
    let moments0 = psi0.lz_moments();
    for (_, psi) in &traj {
        let m = psi.lz_moments();
        assert!((m.0 - moments0.0).abs() < 1e-9 && (m.1 - moments0.1).abs() < 1e-9 * moments0.1);
    }
    let at_tc = &traj[1].1;
    assert!(at_tc.rms_width_about(PI) < 0.5, "{}", at_tc.rms_width_about(PI));
    assert!(at_tc.rms_width_about(0.0) > 2.5);
    // Recombination at 2T_c: compare with the exact spectral propagator.
    let at_2tc = &traj[2].1;
    let exact: Vec<Complex64> = psi0
        .grid()
        .windings()
        .iter()
        .zip(psi0.spectrum())
        .map(|(&n, c)| c * Complex64::from_polar(1.0, -(n * n) as f64 / 2.0 * 2.0 * tc))
        .collect();
    let exact = Wavefunction::from_spectrum(psi0.grid().clone(), &exact).unwrap();
    assert!(l1(at_2tc, &exact) < 1e-9, "{}", l1(at_2tc, &exact));
    // Fringes and dispersion keep the recombined density visibly different.
    let back = l1(at_2tc, &psi0);
    assert!(back > 0.1 && back < 0.6, "{back}");
}

#[test]
fn interaction_widens_recombined_kandes_packets() {
    let tc = PI / 20.0;
    let (_, free) = kandes_run(0.0, 2.0 * tc, 1);
    let (_, inter) = kandes_run(0.2, 2.0 * tc, 1);
    let w0 = free[1].1.rms_width_about(0.0);
    let w1 = inter[1].1.rms_width_about(0.0);
    assert!(w1 > w0 && w1 < 1.05 * w0, "{w0} vs {w1}");
}
