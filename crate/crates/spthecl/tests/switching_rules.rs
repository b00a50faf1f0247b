//! Generator/verifier closure and constraint-violation detection for the
//! dilated switching conditions.

use spthecl::dataset::ModePartition;
use spthecl::example;
use spthecl::gain::GainLaw;
use spthecl::hybrid::{integrate, IntegrateOptions, StopConditions};
use spthecl::switching::{
    automaton_initial_state, automaton_system, generate_switching, signal_from_arc, verify_daat,
    verify_dadt, JumpTrigger, SwitchingPolicy, SwitchingSignal,
};

fn partition() -> ModePartition {
    example::registry().partition()
}

#[test]
fn fifty_seeded_policies_pass_both_verifiers() {
    let params = example::automaton_params();
    let policy = example::random_policy();
    for (law, s_end) in [
        (GainLaw::prescribed_time(8.0).unwrap(), 36.0),
        (GainLaw::exponential(8.0).unwrap(), 13.5),
    ] {
        for seed in 0..50u64 {
            let sig = generate_switching(&params, &law, 1.0, &policy, seed, s_end)
                .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            let dadt = verify_dadt(&sig, &law, 1.0, params.tau_d(), params.n0()).unwrap();
            let daat = verify_daat(
                &sig,
                &law,
                1.0,
                params.tau_a(),
                params.t0(),
                params.partition(),
            )
            .unwrap();
            assert!(dadt.ok, "seed {seed}, {law:?}: {dadt}");
            assert!(daat.ok, "seed {seed}, {law:?}: {daat}");
            // closure is exact at the bookkeeping level; the only slack left
            // is dilate/contract round-off, far inside the pass tolerance
            assert!(dadt.worst_margin >= -1e-12, "seed {seed}: {}", dadt.worst_margin);
            assert!(daat.worst_margin >= -1e-12, "seed {seed}: {}", daat.worst_margin);
        }
    }
}

#[test]
fn dilated_and_classical_verdicts_agree() {
    // checking the real-time signal with the dilated verifiers must match
    // running the classical (undilated) bookkeeping on the dilated jump
    // times; the frozen law makes the dilation the identity, so the classical
    // check is the dilated verifier under the frozen law
    let params = example::automaton_params();
    let law = GainLaw::prescribed_time(8.0).unwrap();
    let frozen = GainLaw::frozen();
    let policy = example::random_policy();
    for seed in 0..20u64 {
        let sig = generate_switching(&params, &law, 1.0, &policy, seed, 30.0).unwrap();
        // map the signal into dilated time by hand
        let dilated_jumps: Vec<(f64, usize)> = sig
            .jumps()
            .iter()
            .map(|&(t, q)| (law.dilate(1.0, t).unwrap(), q))
            .collect();
        let dilated_sig = SwitchingSignal::new(
            sig.initial_mode(),
            dilated_jumps,
            law.dilate(1.0, sig.horizon()).unwrap(),
        )
        .unwrap();

        let dadt = verify_dadt(&sig, &law, 1.0, params.tau_d(), params.n0()).unwrap();
        let classical_dadt =
            verify_dadt(&dilated_sig, &frozen, 1.0, params.tau_d(), params.n0()).unwrap();
        assert_eq!(dadt.ok, classical_dadt.ok, "seed {seed}");
        assert!(
            (dadt.worst_margin - classical_dadt.worst_margin).abs() < 1e-9,
            "seed {seed}: margins {} vs {}",
            dadt.worst_margin,
            classical_dadt.worst_margin
        );

        let daat = verify_daat(
            &sig,
            &law,
            1.0,
            params.tau_a(),
            params.t0(),
            params.partition(),
        )
        .unwrap();
        let classical_daat = verify_daat(
            &dilated_sig,
            &frozen,
            1.0,
            params.tau_a(),
            params.t0(),
            params.partition(),
        )
        .unwrap();
        assert_eq!(daat.ok, classical_daat.ok, "seed {seed}");
        assert!((daat.worst_margin - classical_daat.worst_margin).abs() < 1e-9);
    }
}

#[test]
fn automaton_arcs_pass_both_verifiers() {
    // the mode component of automaton solutions satisfies the constraints by
    // construction, including the maximal-switching-rate selection
    let params = example::automaton_params();
    let law = GainLaw::prescribed_time(8.0).unwrap();

    // scheduled trigger
    let policy = example::scripted_policy();
    let schedule = generate_switching(&params, &law, 1.0, &policy, 0, 36.0).unwrap();
    let sys = automaton_system(&params, &law, JumpTrigger::Schedule(&schedule));
    let z0 = automaton_initial_state(&params, schedule.initial_mode(), 1.0).unwrap();
    let opts = IntegrateOptions::new(
        1e-3,
        StopConditions {
            horizon: 10.0,
            j_max: None,
            blow_up: Some(spthecl::hybrid::BlowUpGuard {
                time: 8.0,
                eps_stop: 0.01,
            }),
            converge: None,
        },
    );
    let arc = integrate(&sys, &z0, &opts).unwrap();
    assert!(arc.domain_is_valid());
    assert!(
        arc.jump_count() >= 10,
        "only {} jumps realized",
        arc.jump_count()
    );
    let realized = signal_from_arc(&arc, 0).unwrap();
    let dadt = verify_dadt(&realized, &law, 1.0, params.tau_d(), params.n0()).unwrap();
    let daat = verify_daat(
        &realized,
        &law,
        1.0,
        params.tau_a(),
        params.t0(),
        params.partition(),
    )
    .unwrap();
    assert!(dadt.ok, "{dadt}");
    assert!(daat.ok, "{daat}");

    // maximal-rate trigger over the two rich datasets (cycling through a
    // draining mode would exhaust the activation budget and die, and a
    // classical switching signal cannot carry two switches at one instant,
    // so the dwell budget starts empty)
    let sr_only = spthecl::dataset::DatasetRegistry::new(vec![
        example::registry().get(1).unwrap().clone(),
        example::registry().get(2).unwrap().clone(),
    ])
    .unwrap();
    let sr_params =
        spthecl::switching::AutomatonParams::new(2.0, 25.0, 2.0, 1.0, sr_only.partition()).unwrap();
    let sys = automaton_system(&sr_params, &law, JumpTrigger::WheneverEnabled);
    let z0 = vec![1.0, 0.0, sr_params.t0(), 1.0];
    let arc = integrate(&sys, &z0, &opts).unwrap();
    let realized = signal_from_arc(&arc, 0).unwrap();
    assert!(
        realized.jump_count() >= 5,
        "only {} jumps",
        realized.jump_count()
    );
    let dadt = verify_dadt(&realized, &law, 1.0, sr_params.tau_d(), sr_params.n0()).unwrap();
    assert!(dadt.ok, "max-rate selection: {dadt}");
    let daat = verify_daat(
        &realized,
        &law,
        1.0,
        sr_params.tau_a(),
        sr_params.t0(),
        sr_params.partition(),
    )
    .unwrap();
    assert!(daat.ok, "max-rate selection: {daat}");
}

#[test]
fn jump_burst_is_rejected_with_witness() {
    let params = example::automaton_params();
    let law = GainLaw::prescribed_time(8.0).unwrap();
    // five jumps within a hair of each other: far beyond N0 + dilated span
    let burst: Vec<(f64, usize)> = (0..5)
        .map(|k| (3.0 + 1e-8 * k as f64, [2, 3, 1, 2, 1][k]))
        .collect();
    let sig = SwitchingSignal::new(1, burst, 7.5).unwrap();
    let report = verify_dadt(&sig, &law, 1.0, params.tau_d(), params.n0()).unwrap();
    assert!(!report.ok);
    let w = report.witness.expect("violations carry a witness");
    assert!(w.observed > w.allowed);
    assert!(
        w.t_end >= 3.0 && w.t_end <= 3.0 + 1e-6,
        "witness window ends at {}",
        w.t_end
    );
}

#[test]
fn ir_overstay_is_rejected_with_witness() {
    let params = example::automaton_params();
    let law = GainLaw::prescribed_time(8.0).unwrap();
    // visit the IR mode and stay: dilated activation grows unboundedly while
    // the allowance grows only by span/25
    let sig = SwitchingSignal::new(1, vec![(1.0, 3)], 7.9).unwrap();
    let report = verify_daat(
        &sig,
        &law,
        1.0,
        params.tau_a(),
        params.t0(),
        params.partition(),
    )
    .unwrap();
    assert!(!report.ok);
    let w = report.witness.unwrap();
    assert!(w.observed > w.allowed);
    // the tightest window covers (part of) the IR stay
    assert!(w.t_end > 1.0);
}

#[test]
fn corrupt_overstay_is_rejected_with_witness() {
    let params = example::automaton_params();
    let law = GainLaw::prescribed_time(8.0).unwrap();
    let sig = SwitchingSignal::new(2, vec![(0.5, 4)], 7.9).unwrap();
    let report = verify_daat(
        &sig,
        &law,
        1.0,
        params.tau_a(),
        params.t0(),
        params.partition(),
    )
    .unwrap();
    assert!(!report.ok);
    let w = report.witness.unwrap();
    assert!(w.observed > w.allowed);
    assert!(w.t_start >= 0.5 - 1e-9, "drain starts at the corrupt entry");
}

#[test]
fn generated_signals_respect_the_partition() {
    let params = example::automaton_params();
    let law = GainLaw::exponential(8.0).unwrap();
    let sig = generate_switching(&params, &law, 1.0, &example::random_policy(), 7, 20.0).unwrap();
    let p = partition();
    for (_, q) in sig.jumps() {
        assert!(p.contains(*q));
    }
    // consecutive modes always differ
    let mut current = sig.initial_mode();
    for (_, q) in sig.jumps() {
        assert_ne!(current, *q);
        current = *q;
    }
}

#[test]
fn unknown_modes_are_rejected() {
    let params = example::automaton_params();
    let law = GainLaw::exponential(8.0).unwrap();
    let policy = SwitchingPolicy::Scripted {
        initial_mode: 9,
        steps: vec![],
    };
    assert!(generate_switching(&params, &law, 1.0, &policy, 0, 5.0).is_err());
}
