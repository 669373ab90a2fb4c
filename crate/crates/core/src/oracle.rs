//! Analytic-versus-numeric equivalence suites.
//!
//! Each suite builds a minimal device, propagates it numerically and compares
//! the result against the closed forms in [`crate::analytic`] and
//! [`crate::pulses`]. The `oracle-check` command runs them all.

use std::f64::consts::TAU;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analytic::{damped_coupler_population, decay_rate_scan, lz_transition_probability, rabi_population, LzParams};
use crate::dynamics::{avoided_crossing, propagate, spectrum_scan, PropagateOptions, QuantumState};
use crate::error::Result;
use crate::model::{build_system, BasisState, CouplingConfig, DeviceConfig, ModeConfig, ModeKind, SystemModel};
use crate::pulses::{adiabatic_detuning, adiabaticity_metric, AdiabaticPulseParams, PulseSpec, Waveform};

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub name: String,
    /// Largest deviation found (suite-specific units, see `detail`).
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
    pub detail: String,
}

fn report(name: &str, max_error: f64, tolerance: f64, start: Instant, detail: String) -> OracleReport {
    OracleReport {
        name: name.to_string(),
        max_error,
        tolerance,
        passed: max_error <= tolerance,
        seconds: start.elapsed().as_secs_f64(),
        detail,
    }
}

pub fn transmon(name: &str, freq: f64, levels: usize, tunable: bool) -> ModeConfig {
    ModeConfig {
        name: name.into(),
        kind: ModeKind::Transmon,
        frequency_ghz: freq,
        anharmonicity_ghz: Some(-0.2),
        kappa_ghz: None,
        chi_ghz: None,
        levels,
        tunable,
        t1_us: None,
        t2_us: None,
    }
}

pub fn resonator(name: &str, freq: f64, kappa: f64, levels: usize) -> ModeConfig {
    ModeConfig {
        name: name.into(),
        kind: ModeKind::Resonator,
        frequency_ghz: freq,
        anharmonicity_ghz: None,
        kappa_ghz: Some(kappa),
        chi_ghz: None,
        levels,
        tunable: false,
        t1_us: None,
        t2_us: None,
    }
}

/// Two coupled modes `a`, `b` with exchange `g`.
pub fn pair_device(a: ModeConfig, b: ModeConfig, g: f64) -> Result<SystemModel> {
    let couplings = vec![CouplingConfig {
        a: a.name.clone(),
        b: b.name.clone(),
        g_ghz: g,
    }];
    build_system(&DeviceConfig {
        modes: vec![a, b],
        couplings,
        frame_ghz: None,
    })
}

/// Resonant qubit-coupler swap against cos²(2πgt) over two periods, and the
/// transfer at t = 1/(4g).
pub fn rabi_suite() -> Result<OracleReport> {
    let start = Instant::now();
    let g = 0.047;
    let s = pair_device(transmon("Q", 5.176, 2, false), transmon("C", 5.176, 2, true), g)?;
    let init = QuantumState::basis(&s, &BasisState(vec![1, 0]))?;
    let iq = s.basis_index(&BasisState(vec![1, 0]))?;
    let ic = s.basis_index(&BasisState(vec![0, 1]))?;
    let period = 1.0 / (2.0 * g);
    let opts = PropagateOptions {
        record_every_ns: Some(0.05),
        ..PropagateOptions::default()
    };
    let traj = propagate(&s, &PulseSpec::idle(), &init, 2.0 * period, &Default::default(), &opts)?;
    let mut worst: f64 = 0.0;
    for (t, p) in traj.times.iter().zip(&traj.populations) {
        let (pq, pc) = rabi_population(g, *t);
        worst = worst.max((p[iq] - pq).abs()).max((p[ic] - pc).abs());
    }
    let quarter = propagate(&s, &PulseSpec::idle(), &init, 1.0 / (4.0 * g), &Default::default(), &opts)?;
    let transfer_gap = (1.0 - quarter.final_populations()[ic]).abs();
    let mut r = report(
        "rabi",
        worst,
        1e-8,
        start,
        format!("max |ΔP| over two periods; transfer gap at 1/(4g) = {transfer_gap:.3e}"),
    );
    r.passed &= transfer_gap <= 1e-6;
    Ok(r)
}

/// Loss-free swap population of the coupler against the damped closed form
/// on a (κ/g) × t grid. The closed form takes κ as the resonator amplitude
/// decay rate, which is a model linewidth of 2κ.
pub fn damped_suite() -> Result<OracleReport> {
    let start = Instant::now();
    let g = 0.05;
    let ratios = [0.5, 1.0, 2.0, 3.0, 4.0];
    let t_end = 20.0 / (TAU * g);
    let times: Vec<f64> = (1..=40).map(|k| t_end * k as f64 / 40.0).collect();
    let mut worst: f64 = 0.0;
    for r in ratios {
        let kappa = r * g;
        let s = pair_device(transmon("C", 6.752, 2, true), resonator("R", 6.752, 2.0 * kappa, 2), g)?;
        let init = QuantumState::basis(&s, &BasisState(vec![1, 0]))?;
        let ic = s.basis_index(&BasisState(vec![1, 0]))?;
        let mut prev = 0.0;
        let mut state = init;
        let loss = s.dissipators();
        for &t in &times {
            let traj = propagate(&s, &PulseSpec::idle(), &state, t - prev, &loss, &PropagateOptions::unchecked(0.002))?;
            state = traj.final_state;
            prev = t;
            let numeric = state.amplitudes()[ic].norm_sqr();
            worst = worst.max((numeric - damped_coupler_population(g, kappa, t)).abs());
        }
    }
    // both sides of the critical point
    let mut jump: f64 = 0.0;
    for k in 1..=40 {
        let t = t_end * k as f64 / 40.0;
        let c = damped_coupler_population(g, 2.0 * g, t);
        let lo = damped_coupler_population(g, 2.0 * g * (1.0 - 1e-12), t);
        let hi = damped_coupler_population(g, 2.0 * g * (1.0 + 1e-12), t);
        jump = jump.max((c - lo).abs()).max((c - hi).abs());
    }
    let mut rep = report(
        "damped",
        worst,
        1e-6,
        start,
        format!("max |ΔP_c| on 5x40 grid; continuity at critical point {jump:.3e}"),
    );
    rep.passed &= jump <= 1e-8;
    Ok(rep)
}

/// Envelope decay-rate scan over κ/g ∈ [0.5, 4]: distance (in grid points)
/// of the fastest decay from κ/g = 2.
pub fn critical_suite() -> Result<OracleReport> {
    let start = Instant::now();
    let (scan, best) = decay_rate_scan(0.5, 4.0, 36)?;
    let target = (0..scan.len())
        .min_by(|&a, &b| (scan[a].ratio - 2.0).abs().total_cmp(&(scan[b].ratio - 2.0).abs()))
        .unwrap_or(0);
    let off = (best as f64 - target as f64).abs();
    Ok(report(
        "critical-damping",
        off,
        2.0,
        start,
        format!("fastest decay at κ/g = {:.3}", scan[best].ratio),
    ))
}

/// (numeric, formula) survival of |1⟩ on the qubit for a linear coupler
/// sweep across ±`half_span` GHz around the qubit at `rate` GHz/ns.
pub fn lz_survival(g: f64, half_span: f64, rate: f64) -> Result<(f64, f64)> {
    let s = pair_device(transmon("Q", 5.0, 2, false), transmon("C", 5.0 - half_span, 2, true), g)?;
    let duration = 2.0 * half_span / rate;
    let pulse = PulseSpec::single("C", Waveform::ramp(0.0, 2.0 * half_span, duration))?;
    let init = QuantumState::basis(&s, &BasisState(vec![1, 0]))?;
    let traj = propagate(&s, &pulse, &init, duration, &Default::default(), &PropagateOptions::unchecked(0.004))?;
    let numeric = traj.final_populations()[s.basis_index(&BasisState(vec![1, 0]))?];
    let theory = lz_transition_probability(&LzParams::from_cyclic(g, rate)?);
    Ok((numeric, theory))
}

pub fn lz_suite() -> Result<OracleReport> {
    let start = Instant::now();
    let g = 0.01;
    // survival from 0.05 to 0.95: rate = 4π²g² / (−ln P)
    let targets: Vec<f64> = (0..10).map(|k| 0.05 + 0.1 * k as f64).collect();
    let mut worst: f64 = 0.0;
    for p in targets {
        let rate = (TAU * g).powi(2) / (-p.ln());
        let (numeric, theory) = lz_survival(g, 3.0, rate)?;
        worst = worst.max((numeric - theory).abs());
    }
    Ok(report("landau-zener", worst, 2e-2, start, "max |ΔP| over 10 sweep rates".into()))
}

/// Endpoint, slope and constant-adiabaticity checks on random trajectories.
pub fn adiabatic_suite(seed: u64) -> Result<OracleReport> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut endpoint, mut slope, mut flatness): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut accepted = 0;
    while accepted < 100 {
        let tau = rng.gen_range(10.0..120.0);
        let f0 = rng.gen_range(-1.5..-0.1);
        let f_tau = rng.gen_range(-1.0..1.5);
        let g = rng.gen_range(0.01..0.3);
        let Ok(p) = AdiabaticPulseParams::new(tau, f0, f_tau, g) else { continue };
        accepted += 1;
        let d0 = adiabatic_detuning(&p, 0.0)?;
        let d1 = adiabatic_detuning(&p, tau)?;
        endpoint = endpoint.max(((d0 - f0) / f0).abs()).max(((d1 - f_tau) / f_tau.abs().max(1e-12)).abs());
        for k in 1..10 {
            let t = tau * k as f64 / 10.0;
            let h = 1e-4 * tau;
            let fd = (adiabatic_detuning(&p, t + h)? - adiabatic_detuning(&p, t - h)?) / (2.0 * h);
            let exact = p.margin_rate(adiabatic_detuning(&p, t)?);
            slope = slope.max(((fd - exact) / exact).abs());
        }
        if accepted <= 10 {
            // two-level metric along the generated pulse
            let qubit = 5.0;
            let idle = qubit + f0;
            let s = pair_device(transmon("Q", qubit, 2, false), transmon("C", idle, 2, true), g)?;
            let pulse = PulseSpec::adiabatic("C", p, qubit, idle)?;
            let prof = adiabaticity_metric(&s, &pulse, 1, (0, 1), 40, Some((0.0, tau)))?;
            let mean = prof.ratios.iter().sum::<f64>() / prof.ratios.len() as f64;
            for r in &prof.ratios {
                flatness = flatness.max(((r - mean) / mean).abs());
            }
        }
    }
    let mut rep = report(
        "adiabatic-pulse",
        endpoint,
        1e-9,
        start,
        format!("endpoint rel. error; slope rel. error {slope:.3e}; metric spread {flatness:.3e}"),
    );
    rep.passed &= slope <= 1e-4 && flatness <= 0.05;
    Ok(rep)
}

/// Single- and two-excitation crossings of the qubit-coupler-qubit part of
/// the measured device: the qubit-coupler anticrossing and the |2⟩ ↔
/// |1⟩+coupler photon crossing. Resonators are left out of the scan.
pub fn spectrum_suite(device: &SystemModel, qubit: &str, coupler: &str, data: &str) -> Result<OracleReport> {
    let start = Instant::now();
    let keep = [qubit, coupler, data]
        .iter()
        .map(|n| device.mode_index(n))
        .collect::<Result<Vec<_>>>()?;
    let system = &device.subsystem(&keep)?;
    let qi = system.mode_index(qubit)?;
    let ci = system.mode_index(coupler)?;
    let di = system.mode_index(data)?;
    let wq = system.modes()[qi].frequency();
    let g = system.coupling(qubit, coupler).unwrap_or(0.0);
    let one = |m: usize, n: usize| {
        let mut v = vec![0; system.modes().len()];
        v[m] += n;
        v
    };
    let n1 = spectrum_scan(system, coupler, (wq - 0.3, wq + 0.3), 601, 1)?;
    let a = n1.trace(&BasisState(one(qi, 1))).unwrap_or(0);
    let b = n1.trace(&BasisState(one(ci, 1))).unwrap_or(0);
    let (loc, gap) = avoided_crossing(&n1, a, b)?;
    let loc_err = (loc - wq).abs();
    let gap_err = (gap - 2.0 * g).abs() / (2.0 * g);

    let dm = &system.modes()[di];
    let lru = dm.frequency() + dm.anharmonicity();
    let n2 = spectrum_scan(system, coupler, (lru - 0.2, lru + 0.2), 401, 2)?;
    let two = n2.trace(&BasisState(one(di, 2))).unwrap_or(0);
    let mut split = one(di, 1);
    split[ci] += 1;
    let pair = n2.trace(&BasisState(split)).unwrap_or(0);
    let (loc2, _) = avoided_crossing(&n2, two, pair)?;
    let loc2_err = (loc2 - lru).abs();
    let mut rep = report(
        "spectrum",
        loc_err.max(loc2_err),
        0.01,
        start,
        format!(
            "N=1 crossing at {loc:.4} GHz, gap {gap:.4} GHz (rel. error {gap_err:.3e}); N=2 crossing at {loc2:.4} GHz"
        ),
    );
    rep.passed &= gap_err <= 0.05;
    Ok(rep)
}

/// All suites, in order.
pub fn run_all(measured: &SystemModel, seed: u64) -> Result<Vec<OracleReport>> {
    Ok(vec![
        rabi_suite()?,
        damped_suite()?,
        critical_suite()?,
        lz_suite()?,
        adiabatic_suite(seed)?,
        spectrum_suite(measured, "Q0", "C0", "Q1")?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass() {
        for r in [rabi_suite(), damped_suite(), critical_suite(), lz_suite(), adiabatic_suite(7)] {
            let r = r.unwrap();
            println!("{} {:.3e} {:.2}s {}", r.name, r.max_error, r.seconds, r.detail);
            assert!(r.passed, "{r:?}");
        }
    }
}
