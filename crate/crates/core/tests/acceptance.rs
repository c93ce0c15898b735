//! Acceptance run: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use selftimed::adders::{functional_check, trial_vectors, Trials};
use selftimed::analysis::{
    asymptotic_check, classify_indication, crossover_m, expected_indication, sweep, Growth, ASYMPTOTIC_MS,
};
use selftimed::cells::{SymbolicCycle, GLOBAL_NUMERIC, LOCAL_NUMERIC};
use selftimed::netlist::gate_census;
use selftimed::sim::{EventTrace, NetId};
use selftimed::stage::{build_completion_detector, StageRunner};
use selftimed::{
    build_full_adder, build_rca, build_stage, default_delay_table, derive_pinned_delays, AdderVariant, Architecture,
    Circuit, GateKind, Simulator,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn delay_derivation() -> Check {
    let start = Instant::now();
    let p = derive_pinned_delays();
    ensure((p.ce2, p.or2, p.ao21, p.ao22) == (106, 60, 63, 72), || format!("derived {p:?}"))?;
    for m in 0..=30i64 {
        let local = SymbolicCycle::LOCAL.eval(&p, m);
        let global = SymbolicCycle::GLOBAL.eval(&p, m);
        ensure(local == LOCAL_NUMERIC.slope * m + LOCAL_NUMERIC.intercept, || format!("local m={m}: {local}"))?;
        ensure(global == GLOBAL_NUMERIC.slope * m + GLOBAL_NUMERIC.intercept, || format!("global m={m}: {global}"))?;
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(1), || format!("took {took:?}"))?;
    Ok(format!("CE2=106 OR2=60 AO21=63 AO22=72, both identities hold for m=0..30 ({took:?})"))
}

fn full_sweep() -> Result<selftimed::analysis::SweepReport, String> {
    let ms: Vec<usize> = (4..=28).collect();
    sweep(32, &ms, &default_delay_table()).map_err(|e| e.to_string())
}

fn local_cycle() -> Check {
    let report = full_sweep()?;
    for r in &report.rows {
        let want = 63 * r.m as u64 + 1002;
        ensure(r.cycle_local_sim == want, || format!("m={}: {} != {want}", r.m, r.cycle_local_sim))?;
    }
    let first = report.rows.first().unwrap().cycle_local_sim;
    let last = report.rows.last().unwrap().cycle_local_sim;
    Ok(format!("63m+1002 for m=4..28 (m=4: {first}, m=28: {last})"))
}

fn global_cycle() -> Check {
    let report = full_sweep()?;
    for r in &report.rows {
        let want = if r.m <= 8 { 2028 } else { 72 * r.m as u64 + 1430 };
        ensure(r.cycle_global_sim == want, || format!("m={}: {} != {want}", r.m, r.cycle_global_sim))?;
    }
    let x = crossover_m(32, &default_delay_table());
    ensure(x == 8, || format!("crossover {x}"))?;
    Ok("2028 for m=4..8, 72m+1430 for m=9..28, crossover m=8".into())
}

fn average_reduction() -> Check {
    let avg = full_sweep()?.average_reduction().unwrap();
    ensure((19.0..=26.0).contains(&avg), || format!("average {avg:.2}%"))?;
    Ok(format!("average reduction {avg:.2}% over m=4..28"))
}

fn asymptotics() -> Check {
    let d = default_delay_table();
    let run = |v| asymptotic_check(v, 32, &ASYMPTOTIC_MS, &d).map_err(|e| e.to_string());
    let strong = run(AdderVariant::DimsStrong)?;
    ensure(strong.forward_growth == Growth::Constant, || format!("dims-strong FL {:?}", strong.forward))?;

    let weak = run(AdderVariant::DimsWeak)?;
    let steps: Vec<i64> = weak.reverse.windows(2).map(|w| w[1] as i64 - w[0] as i64).collect();
    ensure(steps.iter().all(|&s| s > 0 && s == steps[0]), || format!("dims-weak RL {:?}", weak.reverse))?;

    let lob = run(AdderVariant::LatencyOptBiased)?;
    ensure(lob.reverse.iter().all(|&t| t == 501), || format!("latency-opt-biased RL {:?}", lob.reverse))?;

    let eo = run(AdderVariant::EarlyOutput)?;
    ensure(eo.reverse.iter().all(|&t| t == 416), || format!("early-output data RL {:?}", eo.reverse))?;
    Ok(format!(
        "dims-strong FL {} flat, dims-weak RL +{}/stage, latency-opt RL 501, early-output data RL 416",
        strong.forward[0],
        steps[0] / 8
    ))
}

/// Looks for an input order in which both outputs return to spacer before
/// the last input does.
fn resets_early(a: bool, b: bool, cin: bool) -> Result<bool, String> {
    let netlist = build_full_adder(AdderVariant::EarlyOutput);
    let circuit = Circuit::compile(&netlist, &default_delay_table()).map_err(|e| e.to_string())?;
    let net = |n: &str| circuit.net(n).unwrap();
    let rail = |base: &str, v: bool| net(&format!("{base}{}", if v { 1 } else { 0 }));
    let active = [rail("A", a), rail("B", b), rail("CIN", cin)];
    let outs = [net("SUM1"), net("SUM0"), net("COUT1"), net("COUT0")];
    for order in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        let mut sim = Simulator::new(&circuit);
        sim.apply_inputs(&active.map(|n| (n, true)), 0).unwrap();
        sim.run_until_quiescent().map_err(|e| e.to_string())?;
        let sum_ok = sim.value(if a ^ b ^ cin { outs[0] } else { outs[1] });
        let carry = (a && b) || (cin && (a || b));
        let cout_ok = sim.value(if carry { outs[2] } else { outs[3] });
        if !(sum_ok && cout_ok) {
            return Err(format!("wrong sum for ({a},{b},{cin})"));
        }
        for &i in &order[..2] {
            let t = sim.now();
            sim.apply_inputs(&[(active[i], false)], t).unwrap();
            sim.run_until_quiescent().map_err(|e| e.to_string())?;
        }
        if outs.iter().all(|&o| !sim.value(o)) {
            return Ok(true);
        }
    }
    Ok(false)
}

fn indication() -> Check {
    let d = default_delay_table();
    for v in AdderVariant::ALL {
        let got = classify_indication(&build_full_adder(v), &d).map_err(|e| e.to_string())?;
        ensure(got == expected_indication(v), || format!("{v}: {got}"))?;
    }
    for (name, a, b, cin) in
        [("propagate", true, false, true), ("generate", true, true, false), ("kill", false, false, true)]
    {
        ensure(resets_early(a, b, cin)?, || format!("early-output {name} scenario never resets early"))?;
    }
    Ok("all six variants match; early reset seen for propagate, generate and kill".into())
}

fn functional() -> Check {
    let start = Instant::now();
    let d = default_delay_table();
    for v in AdderVariant::ALL {
        let report = functional_check(&build_rca(v, 4), &d, &Trials::Exhaustive).map_err(|e| e.to_string())?;
        ensure(report.passed() && report.cases == 512, || format!("{v}: {:?}", report.failure))?;
    }
    let vectors = trial_vectors(32, &Trials::Random { count: 1000, seed: 1 });
    for arch in Architecture::ALL {
        let stage = build_stage(arch, arch.default_variant(), 32, false).map_err(|e| e.to_string())?;
        let circuit = Circuit::compile(&stage.netlist, &d).map_err(|e| e.to_string())?;
        let mut runner = StageRunner::new(&stage, &circuit).map_err(|e| e.to_string())?;
        for &(a, b, cin) in &vectors {
            let rec = runner.transaction(a, b, cin).map_err(|e| format!("{arch} a={a} b={b}: {e}"))?;
            ensure(rec.result == a + b + cin as u64, || format!("{arch} a={a} b={b} cin={cin}"))?;
            ensure(rec.set_report.is_empty() && rec.rtz_report.is_empty(), || format!("{arch}: phase violation"))?;
        }
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(60), || format!("took {took:?}"))?;
    Ok(format!("6x512 exhaustive n=4, 2x1000 random n=32 stage handshakes ({took:.1?})"))
}

fn structure() -> Check {
    let eo = gate_census(&build_full_adder(AdderVariant::EarlyOutput));
    let lob = gate_census(&build_full_adder(AdderVariant::LatencyOptBiased));
    ensure(eo.total == 10 && eo.complex == 8, || format!("early-output {} gates, {} complex", eo.total, eo.complex))?;
    ensure(eo.total < lob.total && eo.complex < lob.complex, || format!("{eo:?} vs {lob:?}"))?;
    let global = build_stage(Architecture::Global, AdderVariant::EarlyOutput, 32, false).unwrap();
    let forced = build_stage(Architecture::Local, AdderVariant::EarlyOutput, 32, true).unwrap();
    let extra = gate_census(&global.netlist).total - gate_census(&forced.netlist).total;
    let sync_c2 = global.netlist.gates().filter(|g| g.id.starts_with("sync.") && g.kind == GateKind::C2).count();
    ensure(extra == 2 && sync_c2 == 2, || format!("global adds {extra} gates"))?;
    Ok(format!(
        "early-output FA {}/{} gates/complex vs {}/{}; synchronizer adds 2 C2",
        eo.total, eo.complex, lob.total, lob.complex
    ))
}

fn completion_detector() -> Check {
    let cd = build_completion_detector(65);
    ensure(cd.depth == 7, || format!("depth {}", cd.depth))?;
    let circuit = Circuit::compile(&cd.netlist, &default_delay_table()).map_err(|e| e.to_string())?;
    let out = circuit.net(&cd.cd_out).unwrap();
    let pairs: Vec<(NetId, NetId)> =
        (0..65).map(|i| circuit.pair(cd.netlist.port(&format!("d{i}")).unwrap()).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut sim = Simulator::new(&circuit);
    for trial in 0..100 {
        // Each pair arrives at its own random offset.
        let active: Vec<(NetId, u64)> =
            pairs.iter().map(|&(r1, r0)| (if rng.gen() { r1 } else { r0 }, rng.gen_range(0..500))).collect();
        for value in [true, false] {
            let t0 = sim.now();
            for &(net, dt) in &active {
                sim.apply_inputs(&[(net, value)], t0 + dt).unwrap();
            }
            let settled = sim.run_until_quiescent().map_err(|e| e.to_string())?;
            let last_input = t0 + active.iter().map(|&(_, dt)| dt).max().unwrap();
            let edge = edge_of(&settled.trace, out).ok_or_else(|| format!("trial {trial}: cd_out never moved"))?;
            ensure(edge > last_input && sim.value(out) == value, || {
                format!("trial {trial}: cd_out moved at {edge} before last input at {last_input}")
            })?;
        }
    }
    Ok("65 pairs, depth 7; 100 random words rise/fall only after the last pair".into())
}

fn edge_of(trace: &EventTrace, net: NetId) -> Option<u64> {
    trace.first_time_on(net)
}

fn determinism() -> Check {
    let a = full_sweep()?.to_csv();
    let b = full_sweep()?.to_csv();
    ensure(a == b, || "sweep CSV differs between runs".into())?;
    Ok(format!("two sweeps byte-identical ({} bytes)", a.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("delay derivation", delay_derivation),
        ("local cycle time", local_cycle),
        ("global cycle time and crossover", global_cycle),
        ("average reduction", average_reduction),
        ("asymptotic latencies", asymptotics),
        ("indication classes", indication),
        ("functional correctness", functional),
        ("structural census", structure),
        ("completion detector", completion_detector),
        ("sweep determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
