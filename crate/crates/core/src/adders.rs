//! Dual-rail full-adder templates and ripple-carry cascades.
//!
//! Every template reads the rails `(A1, A0)`, `(B1, B0)`, `(CIN1, CIN0)` and
//! drives `(SUM1, SUM0)`, `(COUT1, COUT0)`. Wide ORs are left-balanced OR2
//! trees and DIMS minterms are shared between the output rails that use them.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cells::DelayTable;
use crate::dualrail::{decode_word, encode_bit, DualRailWord, PairClass};
use crate::netlist::{validate, GateKind, Netlist, RailPair};
use crate::sim::{check_phase, Circuit, NetId, Phase, SimError, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AdderVariant {
    DimsStrong,
    DimsWeak,
    Distributive,
    BiasedAo222,
    LatencyOptBiased,
    EarlyOutput,
}

impl AdderVariant {
    pub const ALL: [AdderVariant; 6] = [
        AdderVariant::DimsStrong,
        AdderVariant::DimsWeak,
        AdderVariant::Distributive,
        AdderVariant::BiasedAo222,
        AdderVariant::LatencyOptBiased,
        AdderVariant::EarlyOutput,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdderVariant::DimsStrong => "dims-strong",
            AdderVariant::DimsWeak => "dims-weak",
            AdderVariant::Distributive => "distributive",
            AdderVariant::BiasedAo222 => "biased-ao222",
            AdderVariant::LatencyOptBiased => "latency-opt-biased",
            AdderVariant::EarlyOutput => "early-output",
        }
    }
}

impl fmt::Display for AdderVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown adder variant `{0}`")]
pub struct UnknownVariant(pub String);

impl FromStr for AdderVariant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AdderVariant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| UnknownVariant(s.to_string()))
    }
}

/// Rail names of one full-adder instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaPorts {
    pub a: RailPair,
    pub b: RailPair,
    pub cin: RailPair,
    pub sum: RailPair,
    pub cout: RailPair,
}

/// Appends gates to a netlist under a common prefix. Gate ids and internal
/// nets share the `<prefix><local>` name.
struct Emitter<'n> {
    netlist: &'n mut Netlist,
    prefix: String,
}

impl Emitter<'_> {
    fn local(&self, name: &str) -> String {
        format!("{}{name}", self.prefix)
    }

    /// Gate `<prefix><id>` driving internal net `<prefix><id>`.
    fn internal(&mut self, id: &str, kind: GateKind, inputs: &[&str]) -> String {
        let net = self.local(id);
        self.netlist.add_gate(net.clone(), kind, inputs, net.clone()).expect("unique gate id");
        net
    }

    /// Gate `<prefix><id>` driving an externally named net.
    fn drive(&mut self, id: &str, kind: GateKind, inputs: &[&str], output: &str) {
        let gid = self.local(id);
        self.netlist.add_gate(gid, kind, inputs, output).expect("unique gate id");
    }

    /// Left-balanced OR2 tree over `terms`, driving `output`.
    fn or_tree(&mut self, id: &str, terms: &[String], output: &str) {
        fn build(e: &mut Emitter<'_>, id: &str, terms: &[String], output: Option<&str>) -> String {
            if terms.len() == 1 {
                return terms[0].clone();
            }
            let split = terms.len().div_ceil(2);
            let l = build(e, &format!("{id}l"), &terms[..split], None);
            let r = build(e, &format!("{id}r"), &terms[split..], None);
            match output {
                Some(out) => {
                    e.drive(id, GateKind::Or2, &[&l, &r], out);
                    out.to_string()
                }
                None => e.internal(id, GateKind::Or2, &[&l, &r]),
            }
        }
        assert!(terms.len() >= 2, "OR tree needs at least two terms");
        build(self, id, terms, Some(output));
    }
}

fn rail(p: &RailPair, one: bool) -> &str {
    if one {
        &p.rail1
    } else {
        &p.rail0
    }
}

fn emit_dims(e: &mut Emitter<'_>, p: &FaPorts, weak: bool) {
    // m[abc] = C3(A_a, B_b, CIN_c)
    let mut m: Vec<String> = Vec::with_capacity(8);
    for code in 0..8u8 {
        let (a, b, c) = (code & 4 != 0, code & 2 != 0, code & 1 != 0);
        let name = format!("m{}{}{}", a as u8, b as u8, c as u8);
        m.push(e.internal(&name, GateKind::C3, &[rail(&p.a, a), rail(&p.b, b), rail(&p.cin, c)]));
    }
    let t = |codes: &[usize]| codes.iter().map(|&c| m[c].clone()).collect::<Vec<_>>();
    e.or_tree("SUM1", &t(&[0b001, 0b010, 0b100, 0b111]), &p.sum.rail1);
    e.or_tree("SUM0", &t(&[0b000, 0b011, 0b101, 0b110]), &p.sum.rail0);
    if weak {
        let g = e.internal("G", GateKind::C2, &[&p.a.rail1, &p.b.rail1]);
        let k = e.internal("K", GateKind::C2, &[&p.a.rail0, &p.b.rail0]);
        let mut c1 = t(&[0b011, 0b101]);
        c1.push(g);
        let mut c0 = t(&[0b010, 0b100]);
        c0.push(k);
        e.or_tree("COUT1", &c1, &p.cout.rail1);
        e.or_tree("COUT0", &c0, &p.cout.rail0);
    } else {
        e.or_tree("COUT1", &t(&[0b011, 0b101, 0b110, 0b111]), &p.cout.rail1);
        e.or_tree("COUT0", &t(&[0b000, 0b001, 0b010, 0b100]), &p.cout.rail0);
    }
}

/// Pair detectors, E/D merge and the factored sum shared by the
/// distributive and biased styles. Returns `(K, G, D)`.
fn emit_factored_sum(e: &mut Emitter<'_>, p: &FaPorts) -> [String; 3] {
    let (a1, a0, b1, b0) = (&p.a.rail1, &p.a.rail0, &p.b.rail1, &p.b.rail0);
    let k = e.internal("K", GateKind::C2, &[a0, b0]);
    let g = e.internal("G", GateKind::C2, &[a1, b1]);
    let p0 = e.internal("P0", GateKind::C2, &[a0, b1]);
    let p1 = e.internal("P1", GateKind::C2, &[a1, b0]);
    let ee = e.internal("E", GateKind::Or2, &[&k, &g]);
    let d = e.internal("D", GateKind::Or2, &[&p0, &p1]);
    let e1 = e.internal("E1", GateKind::C2, &[&ee, &p.cin.rail1]);
    let d0 = e.internal("D0", GateKind::C2, &[&d, &p.cin.rail0]);
    let e0 = e.internal("E0", GateKind::C2, &[&ee, &p.cin.rail0]);
    let d1 = e.internal("D1", GateKind::C2, &[&d, &p.cin.rail1]);
    e.drive("SUM1", GateKind::Or2, &[&e1, &d0], &p.sum.rail1);
    e.drive("SUM0", GateKind::Or2, &[&e0, &d1], &p.sum.rail0);
    [k, g, d]
}

fn emit_early_output(e: &mut Emitter<'_>, p: &FaPorts) {
    let (a1, a0, b1, b0) = (&p.a.rail1, &p.a.rail0, &p.b.rail1, &p.b.rail0);
    let cg1 = e.internal("CG1", GateKind::Ao22, &[a0, b0, a1, b1]);
    let cg2 = e.internal("CG2", GateKind::Ao22, &[a0, b1, a1, b0]);
    let c1 = e.internal("C1", GateKind::C2, &[&cg1, &p.cin.rail1]);
    let c2 = e.internal("C2", GateKind::C2, &[&cg1, &p.cin.rail0]);
    let c3 = e.internal("C3", GateKind::C2, &[&cg2, &p.cin.rail1]);
    let c4 = e.internal("C4", GateKind::C2, &[&cg2, &p.cin.rail0]);
    e.drive("SUM1", GateKind::Or2, &[&c1, &c4], &p.sum.rail1);
    e.drive("SUM0", GateKind::Or2, &[&c2, &c3], &p.sum.rail0);
    e.drive("CG3", GateKind::Ao22, &[&cg2, &p.cin.rail1, a1, b1], &p.cout.rail1);
    e.drive("CG4", GateKind::Ao22, &[&cg2, &p.cin.rail0, a0, b0], &p.cout.rail0);
}

/// Appends one full adder of `variant` to `netlist`, prefixing every gate
/// id and internal net with `prefix`.
pub fn emit_full_adder(netlist: &mut Netlist, variant: AdderVariant, prefix: &str, ports: &FaPorts) {
    let mut e = Emitter { netlist, prefix: prefix.to_string() };
    match variant {
        AdderVariant::DimsStrong => emit_dims(&mut e, ports, false),
        AdderVariant::DimsWeak => emit_dims(&mut e, ports, true),
        AdderVariant::Distributive => {
            // Carry sets on D·CIN + G (resp. K) but resets only once the
            // operand pair has returned to spacer, whatever the carry in does.
            let [k, g, d] = emit_factored_sum(&mut e, ports);
            let (c1, c0) = (&ports.cin.rail1, &ports.cin.rail0);
            let u1 = e.internal("U1", GateKind::Or2, &[&d, &g]);
            let w1 = e.internal("W1", GateKind::Ao21, &[&d, c1, &g]);
            e.drive("COUT1", GateKind::C2, &[&u1, &w1], &ports.cout.rail1);
            let u0 = e.internal("U0", GateKind::Or2, &[&d, &k]);
            let w0 = e.internal("W0", GateKind::Ao21, &[&d, c0, &k]);
            e.drive("COUT0", GateKind::C2, &[&u0, &w0], &ports.cout.rail0);
        }
        AdderVariant::BiasedAo222 => {
            emit_factored_sum(&mut e, ports);
            let (a, b, c) = (&ports.a, &ports.b, &ports.cin);
            e.drive(
                "COUT1",
                GateKind::Ao222,
                &[&a.rail1, &b.rail1, &b.rail1, &c.rail1, &a.rail1, &c.rail1],
                &ports.cout.rail1,
            );
            e.drive(
                "COUT0",
                GateKind::Ao222,
                &[&a.rail0, &b.rail0, &b.rail0, &c.rail0, &a.rail0, &c.rail0],
                &ports.cout.rail0,
            );
        }
        AdderVariant::LatencyOptBiased => {
            let [k, g, d] = emit_factored_sum(&mut e, ports);
            let (c1, c0) = (&ports.cin.rail1, &ports.cin.rail0);
            e.drive("COUT1", GateKind::Ao21, &[&d, c1, &g], &ports.cout.rail1);
            e.drive("COUT0", GateKind::Ao21, &[&d, c0, &k], &ports.cout.rail0);
        }
        AdderVariant::EarlyOutput => emit_early_output(&mut e, ports),
    }
}

/// Stand-alone full adder on the rails `A1 A0 B1 B0 CIN1 CIN0` /
/// `SUM1 SUM0 COUT1 COUT0`, with ports `A B CIN SUM COUT`.
pub fn build_full_adder(variant: AdderVariant) -> Netlist {
    let p = |base: &str| RailPair::new(format!("{base}1"), format!("{base}0"));
    let ports = FaPorts { a: p("A"), b: p("B"), cin: p("CIN"), sum: p("SUM"), cout: p("COUT") };
    let mut n = Netlist::new();
    for pair in [&ports.a, &ports.b, &ports.cin] {
        n.add_input(pair.rail1.clone()).unwrap();
        n.add_input(pair.rail0.clone()).unwrap();
    }
    for pair in [&ports.sum, &ports.cout] {
        n.add_output(pair.rail1.clone()).unwrap();
        n.add_output(pair.rail0.clone()).unwrap();
    }
    for (name, pair) in
        [("A", &ports.a), ("B", &ports.b), ("CIN", &ports.cin), ("SUM", &ports.sum), ("COUT", &ports.cout)]
    {
        n.add_pair(name, pair.clone()).unwrap();
    }
    emit_full_adder(&mut n, variant, "", &ports);
    debug_assert!(validate(&n).is_empty());
    n
}

/// Bus-level rail names of a ripple-carry adder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RcaPorts {
    pub a: Vec<RailPair>,
    pub b: Vec<RailPair>,
    pub cin: RailPair,
    pub sum: Vec<RailPair>,
    pub cout: RailPair,
}

/// Appends an `n`-stage cascade reading the given operand rails. Stage `i`
/// is prefixed `<prefix>fa<i>.`; inter-stage carries are `<prefix>c<i>.{1,0}`.
/// Returns the per-stage port maps, LSB first.
pub fn emit_rca(netlist: &mut Netlist, variant: AdderVariant, prefix: &str, bus: &RcaPorts) -> Vec<FaPorts> {
    let n = bus.a.len();
    assert!(n >= 1 && bus.b.len() == n && bus.sum.len() == n);
    let mut stages = Vec::with_capacity(n);
    let mut carry = bus.cin.clone();
    for i in 0..n {
        let next = if i + 1 == n { bus.cout.clone() } else { RailPair::dotted(&format!("{prefix}c{}", i + 1)) };
        let ports = FaPorts {
            a: bus.a[i].clone(),
            b: bus.b[i].clone(),
            cin: carry,
            sum: bus.sum[i].clone(),
            cout: next.clone(),
        };
        emit_full_adder(netlist, variant, &format!("{prefix}fa{i}."), &ports);
        stages.push(ports);
        carry = next;
    }
    stages
}

#[derive(Debug, Clone)]
pub struct RcaDescriptor {
    pub variant: AdderVariant,
    pub width: usize,
    pub netlist: Netlist,
    pub ports: RcaPorts,
    pub stages: Vec<FaPorts>,
}

impl RcaDescriptor {
    /// Output pairs, sum bits LSB first followed by the carry out.
    pub fn output_pairs(&self) -> Vec<RailPair> {
        let mut v = self.ports.sum.clone();
        v.push(self.ports.cout.clone());
        v
    }
}

/// Largest supported adder width; operands and their sum must fit a `u64`.
pub const MAX_WIDTH: usize = 63;

/// `n`-bit cascade with ports `A<i> B<i> CIN S<i> COUT`, rails `<port>.1/.0`.
pub fn build_rca(variant: AdderVariant, n: usize) -> RcaDescriptor {
    assert!((1..=MAX_WIDTH).contains(&n), "adder width must be in 1..={MAX_WIDTH}");
    let bus = |p: &str| (0..n).map(|i| RailPair::dotted(&format!("{p}{i}"))).collect::<Vec<_>>();
    let ports = RcaPorts {
        a: bus("A"),
        b: bus("B"),
        cin: RailPair::dotted("CIN"),
        sum: bus("S"),
        cout: RailPair::dotted("COUT"),
    };
    let mut netlist = Netlist::new();
    let ins = (0..n).flat_map(|i| [&ports.a[i], &ports.b[i]]).chain([&ports.cin]);
    for pair in ins {
        netlist.add_input(pair.rail1.clone()).unwrap();
        netlist.add_input(pair.rail0.clone()).unwrap();
    }
    for pair in ports.sum.iter().chain([&ports.cout]) {
        netlist.add_output(pair.rail1.clone()).unwrap();
        netlist.add_output(pair.rail0.clone()).unwrap();
    }
    for i in 0..n {
        netlist.add_pair(format!("A{i}"), ports.a[i].clone()).unwrap();
        netlist.add_pair(format!("B{i}"), ports.b[i].clone()).unwrap();
        netlist.add_pair(format!("S{i}"), ports.sum[i].clone()).unwrap();
    }
    netlist.add_pair("CIN", ports.cin.clone()).unwrap();
    netlist.add_pair("COUT", ports.cout.clone()).unwrap();
    let stages = emit_rca(&mut netlist, variant, "", &ports);
    debug_assert!(validate(&netlist).is_empty());
    RcaDescriptor { variant, width: n, netlist, ports, stages }
}

/// Input assignments that drive operand rails to the codeword of `(a, b, cin)`.
pub fn operand_assignments(
    circuit: &Circuit,
    a_pairs: &[RailPair],
    b_pairs: &[RailPair],
    cin_pair: &RailPair,
    a: u64,
    b: u64,
    cin: bool,
) -> Result<Vec<(NetId, bool)>, SimError> {
    let mut v = Vec::with_capacity(4 * a_pairs.len() + 2);
    let mut push = |pair: &RailPair, bit: bool| -> Result<(), SimError> {
        let code = encode_bit(bit);
        v.push((circuit.net(&pair.rail1)?, code.rail1));
        v.push((circuit.net(&pair.rail0)?, code.rail0));
        Ok(())
    };
    for (i, p) in a_pairs.iter().enumerate() {
        push(p, a >> i & 1 == 1)?;
    }
    for (i, p) in b_pairs.iter().enumerate() {
        push(p, b >> i & 1 == 1)?;
    }
    push(cin_pair, cin)?;
    Ok(v)
}

/// Stimulus set for [`functional_check`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Trials {
    /// Seeded uniformly random operands.
    Random {
        count: usize,
        seed: u64,
    },
    /// Every `(a, b, cin)`; only for widths up to 8.
    Exhaustive,
    Explicit(Vec<(u64, u64, bool)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub a: u64,
    pub b: u64,
    pub cin: bool,
    pub reason: String,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a={} b={} cin={}: {}", self.a, self.b, self.cin as u8, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionalReport {
    pub cases: usize,
    pub failure: Option<Counterexample>,
}

impl FunctionalReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

fn mask(n: usize) -> u64 {
    (1u64 << n) - 1
}

/// Expands a stimulus set into concrete operand triples for width `n`.
pub fn trial_vectors(n: usize, trials: &Trials) -> Vec<(u64, u64, bool)> {
    match trials {
        Trials::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*count).map(|_| (rng.gen::<u64>() & mask(n), rng.gen::<u64>() & mask(n), rng.gen::<bool>())).collect()
        }
        Trials::Exhaustive => {
            assert!(n <= 8, "exhaustive checking is limited to 8-bit adders");
            let mut v = Vec::with_capacity(1 << (2 * n + 1));
            for a in 0..=mask(n) {
                for b in 0..=mask(n) {
                    for cin in [false, true] {
                        v.push((a, b, cin));
                    }
                }
            }
            v
        }
        Trials::Explicit(v) => v.clone(),
    }
}

/// Runs spacer -> valid -> spacer for each trial and compares the decoded
/// result with integer addition over `n + 1` bits. Also fails on (1,1)
/// pairs, non-monotonic transitions, nets toggling twice in one phase, or
/// any net left high after the return to zero.
pub fn functional_check(
    rca: &RcaDescriptor,
    delays: &DelayTable,
    trials: &Trials,
) -> Result<FunctionalReport, SimError> {
    let circuit = Circuit::compile(&rca.netlist, delays)?;
    let outs: Vec<(NetId, NetId)> = rca.output_pairs().iter().map(|p| circuit.pair(p)).collect::<Result<_, _>>()?;
    let all: Vec<NetId> = (0..circuit.net_count()).collect();
    let mut sim = Simulator::new(&circuit);
    let vectors = trial_vectors(rca.width, trials);
    for (idx, &(a, b, cin)) in vectors.iter().enumerate() {
        let fail =
            |reason: String| FunctionalReport { cases: idx + 1, failure: Some(Counterexample { a, b, cin, reason }) };
        let valid = operand_assignments(&circuit, &rca.ports.a, &rca.ports.b, &rca.ports.cin, a, b, cin)?;
        let before = sim.values().to_vec();
        let t0 = sim.now();
        sim.apply_inputs(&valid, t0)?;
        let set = sim.run_until_quiescent()?;
        let report = check_phase(&circuit, &before, &set.trace, Phase::Set, &all);
        if !report.is_empty() {
            return Ok(fail(format!("valid phase: {}", report.describe(&circuit))));
        }
        if let Some(net) = set.trace.counts(circuit.net_count()).iter().position(|&c| c > 1) {
            return Ok(fail(format!("{} toggled more than once", circuit.name(net))));
        }
        let expect = a + b + cin as u64;
        match decode_word(&sim.word(&outs)) {
            Ok(got) if got == expect => {}
            Ok(got) => return Ok(fail(format!("expected {expect}, decoded {got}"))),
            Err(e) => return Ok(fail(format!("outputs not valid: {e}"))),
        }

        let spacer: Vec<(NetId, bool)> = valid.iter().map(|&(net, _)| (net, false)).collect();
        let before = sim.values().to_vec();
        let t1 = sim.now();
        sim.apply_inputs(&spacer, t1)?;
        let rtz = sim.run_until_quiescent()?;
        let report = check_phase(&circuit, &before, &rtz.trace, Phase::Rtz, &all);
        if !report.is_empty() {
            return Ok(fail(format!("return to zero: {}", report.describe(&circuit))));
        }
        let word: DualRailWord = sim.word(&outs);
        if let Some(i) = word.pairs().iter().position(|p| p.class() != PairClass::Spacer) {
            return Ok(fail(format!("output pair {i} did not return to spacer")));
        }
        if let Some(net) = sim.values().iter().position(|&v| v) {
            return Ok(fail(format!("{} still high after return to zero", circuit.name(net))));
        }
    }
    Ok(FunctionalReport { cases: vectors.len(), failure: None })
}
