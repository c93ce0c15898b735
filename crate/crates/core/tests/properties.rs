use proptest::prelude::*;

use selftimed::adders::{functional_check, operand_assignments, Trials};
use selftimed::analysis::{asymptotic_check, ASYMPTOTIC_MS};
use selftimed::dualrail::{decode_word, encode_word};
use selftimed::netlist::{parse_netlist, serialize_netlist};
use selftimed::sim::{check_phase, Jitter, Phase};
use selftimed::stage::{build_completion_detector, ring_reference, run_closed_loop, StageRunner};
use selftimed::{
    build_full_adder, build_rca, build_stage, default_delay_table, AdderVariant, Architecture, Circuit, EventTrace,
    Simulator,
};

fn variant() -> impl Strategy<Value = AdderVariant> {
    prop::sample::select(AdderVariant::ALL.to_vec())
}

fn arch() -> impl Strategy<Value = Architecture> {
    prop::sample::select(Architecture::ALL.to_vec())
}

/// Width plus in-range operands.
fn operands(max_n: usize) -> impl Strategy<Value = (usize, u64, u64, bool)> {
    (1..=max_n).prop_flat_map(|n| {
        let top = (1u64 << n) - 1;
        (Just(n), 0..=top, 0..=top, any::<bool>())
    })
}

fn run_rca(v: AdderVariant, n: usize, a: u64, b: u64, cin: bool) -> (Circuit, Vec<bool>, EventTrace) {
    let rca = build_rca(v, n);
    let circuit = Circuit::compile(&rca.netlist, &default_delay_table()).unwrap();
    let trace = {
        let mut sim = Simulator::new(&circuit);
        let assign = operand_assignments(&circuit, &rca.ports.a, &rca.ports.b, &rca.ports.cin, a, b, cin).unwrap();
        sim.apply_inputs(&assign, 0).unwrap();
        sim.run_until_quiescent().unwrap().trace
    };
    // Adders contain no inverters, so every net starts low.
    let before = vec![false; circuit.net_count()];
    (circuit, before, trace)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dual_rail_round_trip(width in 1usize..=64, raw in any::<u64>()) {
        let value = if width == 64 { raw } else { raw & ((1u64 << width) - 1) };
        let word = encode_word(value, width).unwrap();
        prop_assert_eq!(word.width(), width);
        prop_assert_eq!(decode_word(&word).unwrap(), value);
    }

    #[test]
    fn simulation_is_deterministic(v in variant(), (n, a, b, cin) in operands(8)) {
        let (_, _, t1) = run_rca(v, n, a, b, cin);
        let (_, _, t2) = run_rca(v, n, a, b, cin);
        prop_assert_eq!(t1, t2);
    }

    #[test]
    fn generated_netlists_round_trip(v in variant(), n in 1usize..=6, a in arch(), stage in any::<bool>()) {
        let netlist = if stage {
            build_stage(a, v, n, true).unwrap().netlist
        } else {
            build_rca(v, n).netlist
        };
        let text = serialize_netlist(&netlist).unwrap();
        let back = parse_netlist(&text).unwrap();
        prop_assert_eq!(serialize_netlist(&back).unwrap(), text);
    }

    #[test]
    fn transitions_are_caused(v in variant(), (n, a, b, cin) in operands(6)) {
        let (circuit, _, trace) = run_rca(v, n, a, b, cin);
        for t in &trace.transitions {
            if circuit.is_input(t.net) {
                prop_assert_eq!(t.time, 0);
                continue;
            }
            let (delay, inputs) = circuit.driver_delay(t.net).unwrap();
            let cause = t.time - delay;
            prop_assert!(
                trace.transitions.iter().any(|u| u.time == cause && inputs.contains(&u.net)),
                "{} at {} has no input edge at {}", circuit.name(t.net), t.time, cause
            );
        }
    }

    #[test]
    fn one_monotonic_transition_per_net(v in variant(), (n, a, b, cin) in operands(6)) {
        let (circuit, before, trace) = run_rca(v, n, a, b, cin);
        let all: Vec<usize> = (0..circuit.net_count()).collect();
        let report = check_phase(&circuit, &before, &trace, Phase::Set, &all);
        prop_assert!(report.is_empty(), "{}", report.describe(&circuit));
        prop_assert!(trace.counts(circuit.net_count()).iter().all(|&c| c <= 1));
    }

    #[test]
    fn random_vectors_pass(v in variant(), n in 1usize..=12, seed in any::<u64>()) {
        let report = functional_check(&build_rca(v, n), &default_delay_table(), &Trials::Random { count: 8, seed }).unwrap();
        prop_assert!(report.passed(), "{:?}", report.failure);
    }

    #[test]
    fn jitter_does_not_change_results(a_ in arch(), seed in any::<u64>(), (n, a, b, cin) in operands(8)) {
        let stage = build_stage(a_, a_.default_variant(), n, false).unwrap();
        let circuit = Circuit::compile_with_jitter(&stage.netlist, &default_delay_table(), Jitter { max: 50, seed }).unwrap();
        let mut runner = StageRunner::new(&stage, &circuit).unwrap();
        let rec = runner.transaction(a, b, cin).unwrap();
        prop_assert_eq!(rec.result, a + b + cin as u64);
    }

    #[test]
    fn synchronizer_waits_for_completion((n, a, b, cin) in operands(16)) {
        let stage = build_stage(Architecture::Global, AdderVariant::EarlyOutput, n, false).unwrap();
        let circuit = Circuit::compile(&stage.netlist, &default_delay_table()).unwrap();
        let rec = StageRunner::new(&stage, &circuit).unwrap().transaction(a, b, cin).unwrap();
        prop_assert!(rec.sync_valid_at.unwrap() > rec.cd_rise);
        prop_assert!(rec.sync_spacer_at.unwrap() > rec.cd_fall);
        prop_assert!(rec.cd_rise > rec.registers_valid_at);
        prop_assert!(rec.cd_fall > rec.registers_spacer_at);
    }

    #[test]
    fn detector_depth_is_ceil_log2(pairs in 1usize..=200) {
        let cd = build_completion_detector(pairs);
        let want = (usize::BITS - (pairs - 1).leading_zeros()) as usize;
        prop_assert_eq!(cd.depth, if pairs == 1 { 0 } else { want });
    }

    #[test]
    fn closed_loop_matches_reference(
        a_ in arch(),
        stages in 2usize..=3,
        n in 2usize..=6,
        seeds in prop::collection::vec((any::<u64>(), any::<u64>(), any::<bool>()), 1..=4),
    ) {
        let mask = (1u64 << n) - 1;
        let txs: Vec<_> = seeds.iter().map(|&(a, b, c)| (a & mask, b & mask, c)).collect();
        let report = run_closed_loop(stages, a_.default_variant(), a_, n, &txs, &default_delay_table()).unwrap();
        let want: Vec<u64> = txs.iter().map(|&(a, b, c)| ring_reference(n, stages, a, b, c)).collect();
        prop_assert_eq!(report.outputs, want);
        prop_assert!(report.completions.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn full_adders_validate_and_round_trip() {
    for v in AdderVariant::ALL {
        let text = serialize_netlist(&build_full_adder(v)).unwrap();
        assert_eq!(serialize_netlist(&parse_netlist(&text).unwrap()).unwrap(), text, "{v}");
    }
}

#[test]
fn every_variant_has_its_expected_growth() {
    let d = default_delay_table();
    for v in AdderVariant::ALL {
        let r = asymptotic_check(v, 32, &ASYMPTOTIC_MS, &d).unwrap();
        assert!(
            r.conforms(),
            "{v}: FL {:?} ({}) RL {:?} ({})",
            r.forward,
            r.forward_growth,
            r.reverse,
            r.reverse_growth
        );
    }
}
