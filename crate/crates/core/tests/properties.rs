//! Property tests over randomly drawn devices, pulses and parameters.

use std::collections::BTreeMap;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use resetlab::analytic::{damped_coupler_population, lz_transition_probability, rabi_population, LzParams};
use resetlab::calib::{cmaes_minimize, sweep2d, OptimizerConfig, SweepAxis};
use resetlab::dynamics::{propagate, propagate_density, PropagateOptions, QuantumState};
use resetlab::model::{build_system, BasisState, CouplingConfig, DeviceConfig, SystemModel};
use resetlab::oracle::{resonator, transmon};
use resetlab::pulses::{adiabatic_detuning, sample_pulse, AdiabaticPulseParams, PulseSpec, Waveform};

fn three_mode(fq: f64, fc: f64, alpha: f64, g_qc: f64, g_cr: f64, kappa: f64) -> SystemModel {
    let mut q = transmon("Q", fq, 3, false);
    q.anharmonicity_ghz = Some(alpha);
    let cfg = DeviceConfig {
        modes: vec![q, transmon("C", fc, 3, true), resonator("R", 6.75, kappa, 3)],
        couplings: vec![
            CouplingConfig { a: "Q".into(), b: "C".into(), g_ghz: g_qc },
            CouplingConfig { a: "C".into(), b: "R".into(), g_ghz: g_cr },
        ],
        frame_ghz: None,
    };
    build_system(&cfg).unwrap()
}

fn max_abs(m: &nalgebra::DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn sector_weight(system: &SystemModel, probs: &[f64], n: usize) -> f64 {
    (0..system.dim()).filter(|&i| system.excitations(i) == n).map(|i| probs[i]).sum()
}

fn device() -> impl Strategy<Value = SystemModel> {
    (4.5..5.5f64, 5.5..6.5f64, -0.3..-0.1f64, 0.01..0.08f64, 0.01..0.1f64, 0.0..0.2f64)
        .prop_map(|(fq, fc, a, gqc, gcr, k)| three_mode(fq, fc, a, gqc, gcr, k))
}

fn square_pulse() -> impl Strategy<Value = PulseSpec> {
    (-1.5..0.5f64, 1.0..8.0f64, 0.0..1.0f64)
        .prop_map(|(amp, dur, edge)| PulseSpec::single("C", Waveform::square(amp, dur).with_edge(edge.min(0.4 * dur))).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hamiltonian_hermitian_and_number_conserving(sys in device(), fc in 3.0..8.0f64) {
        let h = sys.assemble_hamiltonian(&BTreeMap::from([("C".to_string(), fc)])).unwrap();
        prop_assert!(max_abs(&(&h - h.adjoint())) < 1e-12);
        let n = sys.number_operator();
        prop_assert!(max_abs(&(&h * &n - &n * &h)) < 1e-12);
    }

    #[test]
    fn frame_shift_keeps_block_spacings(sys in device(), shift in -2.0..2.0f64) {
        let shifted = sys.with_frame(sys.frame() + shift);
        let fc = BTreeMap::from([("C".to_string(), 6.0)]);
        let h0 = sys.assemble_hamiltonian(&fc).unwrap();
        let h1 = shifted.assemble_hamiltonian(&fc).unwrap();
        for n in 0..=sys.max_excitations() {
            let (b0, _) = sys.excitation_block(&h0, n).unwrap();
            let (b1, _) = shifted.excitation_block(&h1, n).unwrap();
            let mut e0: Vec<f64> = b0.symmetric_eigenvalues().iter().copied().collect();
            let mut e1: Vec<f64> = b1.symmetric_eigenvalues().iter().copied().collect();
            e0.sort_by(f64::total_cmp);
            e1.sort_by(f64::total_cmp);
            for k in 1..e0.len() {
                prop_assert!(((e0[k] - e0[0]) - (e1[k] - e1[0])).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn basis_index_round_trips(sys in device()) {
        for i in 0..sys.dim() {
            let s = sys.basis_state(i).unwrap();
            prop_assert_eq!(sys.basis_index(&s).unwrap(), i);
        }
    }

    #[test]
    fn lossless_evolution_is_unitary_and_sector_confined(sys in device(), pulse in square_pulse(), start in 0usize..27) {
        let init = QuantumState::basis(&sys, &sys.basis_state(start).unwrap()).unwrap();
        let n0 = sys.excitations(start);
        let opts = PropagateOptions { record_every_ns: Some(0.25), ..PropagateOptions::unchecked(0.004) };
        let tr = propagate(&sys, &pulse, &init, pulse.duration() + 1.0, &BTreeMap::new(), &opts).unwrap();
        for (norm, p) in tr.norms.iter().zip(&tr.populations) {
            prop_assert!((norm - 1.0).abs() < 1e-10);
            prop_assert!((sector_weight(&sys, p, n0) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn lossy_norm_never_grows(sys in device(), pulse in square_pulse(), start in 0usize..27) {
        let init = QuantumState::basis(&sys, &sys.basis_state(start).unwrap()).unwrap();
        let opts = PropagateOptions { record_every_ns: Some(0.1), ..PropagateOptions::unchecked(0.004) };
        let tr = propagate(&sys, &pulse, &init, pulse.duration() + 2.0, &sys.dissipators(), &opts).unwrap();
        for w in tr.norms.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn density_trace_is_conserved(sys in device(), pulse in square_pulse()) {
        let init = QuantumState::basis(&sys, &BasisState::new([1, 1, 0])).unwrap();
        let run = propagate_density(&sys, &pulse, &init, pulse.duration() + 2.0, &sys.dissipators(), &PropagateOptions::unchecked(0.004)).unwrap();
        prop_assert!((run.final_density.trace() - 1.0).abs() < 1e-10);
        prop_assert!(run.final_density.probabilities().iter().all(|&p| p > -1e-12 && p < 1.0 + 1e-12));
        prop_assert!(run.no_jump.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn sequential_runs_compose(sys in device(), amp in -1.5..-0.5f64, t_qc in 2.0..8.0f64, lo in 0.0..0.5f64, hi in 0.3..0.9f64) {
        let qc = PulseSpec::single("C", Waveform::square(amp, t_qc).with_edge(0.5)).unwrap();
        let cr = PulseSpec::ramp("C", lo, hi, 10.0).unwrap();
        let both = PulseSpec::composite(vec![(0.0, qc.clone()), (t_qc, cr)]).unwrap();
        let init = QuantumState::basis(&sys, &BasisState::new([1, 0, 0])).unwrap();
        let loss = sys.dissipators();
        let opts = PropagateOptions::unchecked(0.002);
        let whole = propagate(&sys, &both, &init, t_qc + 10.0, &loss, &opts).unwrap();
        let first = propagate(&sys, &qc, &init, t_qc, &loss, &opts).unwrap();
        let second_opts = PropagateOptions { t_start: t_qc, ..opts };
        let second = propagate(&sys, &both, &first.final_state, 10.0, &loss, &second_opts).unwrap();
        for (a, b) in whole.final_populations().iter().zip(second.final_populations()) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn analytic_probabilities_in_unit_interval(g in 0.005..0.2f64, t in 0.0..200.0f64, ratio in 0.05..8.0f64, rate in 1e-4..10.0f64) {
        let (p1, p2) = rabi_population(g, t);
        let pd = damped_coupler_population(g, ratio * g, t);
        let pl = lz_transition_probability(&LzParams::new(g, rate).unwrap());
        for p in [p1, p2, pd, pl] {
            prop_assert!((0.0..=1.0).contains(&p), "{p}");
        }
    }

    #[test]
    fn lz_transfer_falls_with_coupling(g in 0.005..0.2f64, factor in 1.01..3.0f64, rate in 0.01..10.0f64) {
        let weak = lz_transition_probability(&LzParams::new(g, rate).unwrap());
        let strong = lz_transition_probability(&LzParams::new(g * factor, rate).unwrap());
        let slow = lz_transition_probability(&LzParams::new(g, rate / factor).unwrap());
        prop_assert!(strong < weak || weak == 0.0);
        prop_assert!(slow < weak || weak == 0.0);
    }

    #[test]
    fn adiabatic_endpoints_exact(tau in 5.0..150.0f64, f0 in -1.5..-0.05f64, f_tau in -1.0..1.5f64, g in 0.005..0.3f64) {
        if let Ok(p) = AdiabaticPulseParams::new(tau, f0, f_tau, g) {
            let d0 = adiabatic_detuning(&p, 0.0).unwrap();
            let d1 = adiabatic_detuning(&p, tau).unwrap();
            prop_assert!(((d0 - f0) / f0).abs() < 1e-9);
            prop_assert!(((d1 - f_tau) / f_tau.abs().max(1e-12)).abs() < 1e-9 || (d1 - f_tau).abs() < 1e-12);
        }
    }

    #[test]
    fn composite_samples_add(a1 in -1.0..1.0f64, d1 in 1.0..10.0f64, a2 in -1.0..1.0f64, d2 in 1.0..10.0f64, gap in 0.0..5.0f64, t in 0.0..30.0f64) {
        let p = PulseSpec::square("C0", a1, d1).unwrap();
        let q = PulseSpec::ramp("C1", a2, -a2, d2).unwrap();
        let r = PulseSpec::square("C0", a2, d2).unwrap();
        let all = PulseSpec::composite(vec![(0.0, p.clone()), (0.0, q.clone()), (d1 + gap, r.clone())]).unwrap();
        let mut expect: BTreeMap<String, f64> = BTreeMap::new();
        for (start, part) in [(0.0, &p), (0.0, &q), (d1 + gap, &r)] {
            for (ch, v) in sample_pulse(&part.delayed(start).unwrap(), t) {
                *expect.entry(ch).or_default() += v;
            }
        }
        let got = sample_pulse(&all, t);
        for (ch, v) in &expect {
            prop_assert!((got.get(ch).copied().unwrap_or(0.0) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_grid_independent_of_order(seed in any::<u64>()) {
        let f = |x: &[f64]| Ok(((x[0] * 3.1).sin() * (x[1] * 1.7).cos()).powi(2));
        let ax = SweepAxis::linspace("a", "ns", 0.0, 2.0, 7).unwrap();
        let ay = SweepAxis::linspace("b", "GHz", -1.0, 1.0, 5).unwrap();
        let grid = sweep2d(f, ax.clone(), ay.clone()).unwrap();
        let mut order: Vec<(usize, usize)> = (0..7).flat_map(|i| (0..5).map(move |j| (i, j))).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        for (i, j) in order {
            let v: f64 = f(&[ax.values[i], ay.values[j]]).unwrap();
            prop_assert_eq!(grid.errors[i][j].to_bits(), v.to_bits());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn optimizer_best_is_monotone_and_seeded(seed in any::<u64>(), cx in -0.5..0.5f64, cy in -0.5..0.5f64) {
        let f = |x: &[f64]| Ok((x[0] - cx).powi(2) + 3.0 * (x[1] - cy).powi(2));
        let mut cfg = OptimizerConfig::new(vec![0.8, -0.8], vec![(-1.0, 1.0), (-1.0, 1.0)]);
        cfg.seed = seed;
        cfg.max_evaluations = 300;
        let a = cmaes_minimize(f, &cfg).unwrap();
        let b = cmaes_minimize(f, &cfg).unwrap();
        prop_assert_eq!(a.history_jsonl(), b.history_jsonl());
        prop_assert_eq!(&a.best_params, &b.best_params);
        for w in a.history.windows(2) {
            prop_assert!(w[1].best <= w[0].best);
        }
    }
}

#[test]
fn adiabatic_trajectory_straightens_with_strong_coupling() {
    let deviation = |g: f64| {
        let p = AdiabaticPulseParams::new(40.0, -1.0, 0.8, g).unwrap();
        (0..=100)
            .map(|k| {
                let t = 40.0 * k as f64 / 100.0;
                let line = -1.0 + 1.8 * t / 40.0;
                (adiabatic_detuning(&p, t).unwrap() - line).abs()
            })
            .fold(0.0, f64::max)
    };
    let devs: Vec<f64> = [0.05, 0.5, 5.0, 50.0].iter().map(|&g| deviation(g)).collect();
    assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
    assert!(devs[3] < 1e-3, "{devs:?}");
}
