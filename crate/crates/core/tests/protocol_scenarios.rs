//! Protocol-level properties on the shipped reset scenario.

use resetlab::cli::load_scenario_with_devices;
use resetlab::protocol::{level, run_scenario, evolve, EvalOptions, StepKind};

fn reset_scenario() -> resetlab::cli::LoadedScenario {
    load_scenario_with_devices("full_reset_83ns", None, None).unwrap()
}

#[test]
fn vacuum_is_a_fixed_point() {
    let l = reset_scenario();
    let mut sc = l.scenario.clone();
    sc.initial_states = Some(vec![[0, 0]]);
    sc.spectator = None;
    let rep = run_scenario(&sc, &l.system, None, &EvalOptions::fast(0.002)).unwrap();
    assert!(rep.summary.vacuum_error.unwrap() < 1e-6, "{:?}", rep.summary);
}

#[test]
fn second_qc_stage_lowers_two_state_error() {
    let l = reset_scenario();
    let mut both = l.scenario.clone();
    both.initial_states = Some(vec![[2, 0]]);
    both.spectator = None;
    let single = both.without_step(StepKind::QcSwap, "C2");
    assert!(single.steps.len() < both.steps.len());
    let opts = EvalOptions::fast(0.002);
    let e2 = run_scenario(&both, &l.system, None, &opts).unwrap().summary.ancilla_error_2.unwrap();
    let e1 = run_scenario(&single, &l.system, None, &opts).unwrap().summary.ancilla_error_2.unwrap();
    assert!(e2 < e1, "two stages {e2:.3e}, one stage {e1:.3e}");
}

#[test]
fn lru_pulse_protects_computational_states() {
    let l = reset_scenario();
    let lru: Vec<_> = l
        .scenario
        .steps
        .iter()
        .filter(|s| s.kind == StepKind::Lru)
        .cloned()
        .collect();
    assert_eq!(lru.len(), 1);
    let pulse = resetlab::protocol::sequence(&lru).unwrap();
    let data = l.scenario.data.as_deref().unwrap();
    let opts = EvalOptions::fast(0.002);
    for d in 0..2 {
        let out = evolve(&l.system, &pulse, &[(data, level(d))], pulse.duration(), &opts).unwrap();
        let p = out.marginal(data).unwrap();
        let change = 1.0 - (p[0] + p[1]);
        assert!(change < 1e-2, "data |{d}⟩ leaves the computational subspace by {change:.3e}");
    }
}
