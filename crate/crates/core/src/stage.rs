//! Self-timed pipeline stage: input register bank, ripple-carry function
//! block, completion detector and, for the global architecture, a
//! synchronizer on the carry-out pair.
//!
//! ```text
//!            ackin
//!              |
//!  A,B,CIN --[C2 per rail]--+--> RCA --> S[0..n), COUT ------------> next stage
//!                           |                     \
//!                           |                      [C2 x2]  (GLOBAL only)
//!                           +--> OR2 per pair --> C2 tree --> cd_out (ackout)
//! ```

use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::adders::{emit_rca, operand_assignments, AdderVariant, RcaPorts, MAX_WIDTH};
use crate::cells::DelayTable;
use crate::dualrail::{decode_word, DecodeFailure, DualRailWord, PairClass};
use crate::netlist::{validate, GateKind, Netlist, RailPair};
use crate::sim::{check_phase, Circuit, EventTrace, NetId, Phase, PhaseCheckReport, SimError, Simulator, Time};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Architecture {
    /// All function-block outputs are forwarded directly.
    Local,
    /// The carry-out pair is forwarded through a synchronizer gated by the
    /// completion detector.
    Global,
}

impl Architecture {
    pub const ALL: [Architecture; 2] = [Architecture::Local, Architecture::Global];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Local => "local",
            Architecture::Global => "global",
        }
    }

    /// Function block used when none is requested.
    pub fn default_variant(self) -> AdderVariant {
        match self {
            Architecture::Local => AdderVariant::LatencyOptBiased,
            Architecture::Global => AdderVariant::EarlyOutput,
        }
    }

    pub fn accepts(self, variant: AdderVariant) -> bool {
        match self {
            Architecture::Local => variant != AdderVariant::EarlyOutput,
            Architecture::Global => variant == AdderVariant::EarlyOutput,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown architecture `{0}`")]
pub struct UnknownArchitecture(pub String);

impl FromStr for Architecture {
    type Err = UnknownArchitecture;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Architecture::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| UnknownArchitecture(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StageError {
    #[error("{arch} stage cannot be built from a {variant} adder (pass force to override)")]
    Incompatible { arch: Architecture, variant: AdderVariant },
    #[error("stage width must be in 1..={MAX_WIDTH}, got {0}")]
    Width(usize),
    #[error("operand does not fit in {width} bits")]
    OperandRange { width: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{phase:?} phase violations:\n{detail}")]
    PhaseViolation { phase: Phase, detail: String },
    #[error("stage outputs after {phase:?} phase: {failure}")]
    Outputs { phase: Phase, failure: DecodeFailure },
    #[error("{phase:?} phase left output pair {index} at {found:?}")]
    NotSpacer { phase: Phase, index: usize, found: PairClass },
    #[error("ring stalled at t={time} with {done} of {expected} transactions delivered")]
    Deadlock { time: Time, done: usize, expected: usize },
    #[error("a closed loop needs at least two stages, got {0}")]
    TooFewStages(usize),
}

/// Completion detector: one OR2 per pair, then a balanced C2 reduction.
#[derive(Debug, Clone)]
pub struct CompletionDetector {
    pub netlist: Netlist,
    pub cd_out: String,
    pub depth: usize,
}

fn emit_completion_detector(netlist: &mut Netlist, prefix: &str, pairs: &[RailPair], out: &str) -> usize {
    assert!(!pairs.is_empty());
    let leaves: Vec<String> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let net = if pairs.len() == 1 { out.to_string() } else { format!("{prefix}or{i}") };
            netlist
                .add_gate(format!("{prefix}or{i}"), GateKind::Or2, &[&p.rail1, &p.rail0], net.clone())
                .expect("unique id");
            net
        })
        .collect();

    // Returns (net, depth).
    fn reduce(
        netlist: &mut Netlist,
        prefix: &str,
        path: &str,
        leaves: &[String],
        out: Option<&str>,
    ) -> (String, usize) {
        if leaves.len() == 1 {
            return (leaves[0].clone(), 0);
        }
        let split = leaves.len().div_ceil(2);
        let (l, dl) = reduce(netlist, prefix, &format!("{path}l"), &leaves[..split], None);
        let (r, dr) = reduce(netlist, prefix, &format!("{path}r"), &leaves[split..], None);
        let id = format!("{prefix}c{path}");
        let net = out.map_or_else(|| id.clone(), str::to_string);
        netlist.add_gate(id, GateKind::C2, &[&l, &r], net.clone()).expect("unique id");
        (net, 1 + dl.max(dr))
    }

    if leaves.len() == 1 {
        return 0;
    }
    reduce(netlist, prefix, "", &leaves, Some(out)).1
}

/// Stand-alone detector over pairs `d<i>.{1,0}` driving `cd_out`.
pub fn build_completion_detector(pair_count: usize) -> CompletionDetector {
    assert!(pair_count >= 1, "completion detector needs at least one pair");
    let mut netlist = Netlist::new();
    let pairs: Vec<RailPair> = (0..pair_count).map(|i| RailPair::dotted(&format!("d{i}"))).collect();
    for (i, p) in pairs.iter().enumerate() {
        netlist.add_input(p.rail1.clone()).unwrap();
        netlist.add_input(p.rail0.clone()).unwrap();
        netlist.add_pair(format!("d{i}"), p.clone()).unwrap();
    }
    netlist.add_output("cd_out").unwrap();
    let depth = emit_completion_detector(&mut netlist, "cd.", &pairs, "cd_out");
    CompletionDetector { netlist, cd_out: "cd_out".to_string(), depth }
}

/// Nets of one stage instance inside a (possibly larger) netlist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageNets {
    /// Operand rails feeding the registers: `a`, `b`, then `cin`.
    pub inputs: RcaPorts,
    /// Register outputs, in the same order as `inputs`.
    pub registers: Vec<RailPair>,
    pub ackin: String,
    pub cd_out: String,
    pub cd_depth: usize,
    /// Raw function-block outputs, sums LSB first then carry out.
    pub data_outputs: Vec<RailPair>,
    /// Pairs delivered to the next stage, sums LSB first then carry out.
    pub forwarded: Vec<RailPair>,
    pub synchronizer: Option<RailPair>,
}

fn emit_stage(
    netlist: &mut Netlist,
    arch: Architecture,
    variant: AdderVariant,
    prefix: &str,
    inputs: &RcaPorts,
    ackin: &str,
    forwarded: &RcaPorts,
) -> StageNets {
    let n = inputs.a.len();
    let roles = (0..n)
        .map(|i| (format!("A{i}"), &inputs.a[i]))
        .chain((0..n).map(|i| (format!("B{i}"), &inputs.b[i])))
        .chain([("CIN".to_string(), &inputs.cin)]);
    let mut registers = Vec::with_capacity(2 * n + 1);
    for (role, p) in roles {
        let r = RailPair::dotted(&format!("{prefix}r.{role}"));
        for (src, dst, tag) in [(&p.rail1, &r.rail1, "1"), (&p.rail0, &r.rail0, "0")] {
            netlist
                .add_gate(format!("{prefix}reg.{role}.{tag}"), GateKind::C2, &[src, ackin], dst.clone())
                .expect("unique id");
        }
        registers.push(r);
    }
    let cd_out = format!("{prefix}cd_out");
    let cd_depth = emit_completion_detector(netlist, &format!("{prefix}cd."), &registers, &cd_out);

    let raw_cout = match arch {
        Architecture::Local => forwarded.cout.clone(),
        Architecture::Global => RailPair::dotted(&format!("{prefix}rca.COUT")),
    };
    let bus = RcaPorts {
        a: registers[..n].to_vec(),
        b: registers[n..2 * n].to_vec(),
        cin: registers[2 * n].clone(),
        sum: forwarded.sum.clone(),
        cout: raw_cout.clone(),
    };
    emit_rca(netlist, variant, &format!("{prefix}rca."), &bus);

    let synchronizer = (arch == Architecture::Global).then(|| {
        for (src, dst, tag) in
            [(&raw_cout.rail1, &forwarded.cout.rail1, "1"), (&raw_cout.rail0, &forwarded.cout.rail0, "0")]
        {
            netlist
                .add_gate(format!("{prefix}sync.{tag}"), GateKind::C2, &[src, &cd_out], dst.clone())
                .expect("unique id");
        }
        forwarded.cout.clone()
    });

    let mut data_outputs = forwarded.sum.clone();
    data_outputs.push(raw_cout);
    let mut fwd = forwarded.sum.clone();
    fwd.push(forwarded.cout.clone());
    StageNets {
        inputs: inputs.clone(),
        registers,
        ackin: ackin.to_string(),
        cd_out,
        cd_depth,
        data_outputs,
        forwarded: fwd,
        synchronizer,
    }
}

#[derive(Debug, Clone)]
pub struct StageDescriptor {
    pub architecture: Architecture,
    pub variant: AdderVariant,
    pub width: usize,
    pub netlist: Netlist,
    pub nets: StageNets,
}

impl StageDescriptor {
    pub fn cd_out(&self) -> &str {
        &self.nets.cd_out
    }
}

fn bus(prefix: &str, n: usize) -> RcaPorts {
    let v = |p: &str| (0..n).map(|i| RailPair::dotted(&format!("{prefix}{p}{i}"))).collect::<Vec<_>>();
    RcaPorts {
        a: v("A"),
        b: v("B"),
        cin: RailPair::dotted(&format!("{prefix}CIN")),
        sum: v("S"),
        cout: RailPair::dotted(&format!("{prefix}COUT")),
    }
}

/// Builds one open stage with primary inputs `A<i> B<i> CIN ackin` and
/// outputs `S<i> COUT cd_out`. Pairings other than LOCAL with a
/// weak/strong-indicating adder or GLOBAL with the early-output adder are
/// rejected unless `force` is set.
pub fn build_stage(
    arch: Architecture,
    variant: AdderVariant,
    n: usize,
    force: bool,
) -> Result<StageDescriptor, StageError> {
    if !(1..=MAX_WIDTH).contains(&n) {
        return Err(StageError::Width(n));
    }
    if !force && !arch.accepts(variant) {
        return Err(StageError::Incompatible { arch, variant });
    }
    let ports = bus("", n);
    let mut netlist = Netlist::new();
    for p in ports.a.iter().chain(&ports.b).chain([&ports.cin]) {
        netlist.add_input(p.rail1.clone()).unwrap();
        netlist.add_input(p.rail0.clone()).unwrap();
    }
    netlist.add_input("ackin").unwrap();
    let nets = emit_stage(&mut netlist, arch, variant, "", &ports, "ackin", &ports);
    for p in &nets.forwarded {
        netlist.add_output(p.rail1.clone()).unwrap();
        netlist.add_output(p.rail0.clone()).unwrap();
    }
    netlist.add_output(nets.cd_out.clone()).unwrap();
    for i in 0..n {
        netlist.add_pair(format!("A{i}"), ports.a[i].clone()).unwrap();
        netlist.add_pair(format!("B{i}"), ports.b[i].clone()).unwrap();
        netlist.add_pair(format!("S{i}"), ports.sum[i].clone()).unwrap();
        netlist.add_pair(format!("rA{i}"), nets.registers[i].clone()).unwrap();
        netlist.add_pair(format!("rB{i}"), nets.registers[n + i].clone()).unwrap();
    }
    netlist.add_pair("CIN", ports.cin.clone()).unwrap();
    netlist.add_pair("rCIN", nets.registers[2 * n].clone()).unwrap();
    netlist.add_pair("COUT", ports.cout.clone()).unwrap();
    if arch == Architecture::Global {
        netlist.add_pair("rawCOUT", nets.data_outputs[n].clone()).unwrap();
    }
    debug_assert!(validate(&netlist).is_empty(), "{}", validate(&netlist));
    Ok(StageDescriptor { architecture: arch, variant, width: n, netlist, nets })
}

/// One measured spacer -> valid -> spacer handshake.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionRecord {
    pub a: u64,
    pub b: u64,
    pub cin: bool,
    pub forward_latency: Time,
    pub reverse_latency: Time,
    pub cycle_time: Time,
    /// Decoded forwarded outputs: sum bits plus carry out at bit `n`.
    pub result: u64,
    /// Latencies of the raw function-block outputs.
    pub data_forward_latency: Time,
    pub data_reverse_latency: Time,
    /// Completion detector output edges, relative to each phase origin.
    pub cd_rise: Time,
    pub cd_fall: Time,
    /// When the last register pair became valid / spacer.
    pub registers_valid_at: Time,
    pub registers_spacer_at: Time,
    /// Synchronized pair edges (GLOBAL only).
    pub sync_valid_at: Option<Time>,
    pub sync_spacer_at: Option<Time>,
    pub set_report: PhaseCheckReport,
    pub rtz_report: PhaseCheckReport,
}

impl TransactionRecord {
    /// `arch,variant,n,a,b,cin,fl,rl,cycle`
    pub fn csv_row(&self, arch: Architecture, variant: AdderVariant, n: usize) -> String {
        format!(
            "{arch},{variant},{n},{},{},{},{},{},{}",
            self.a, self.b, self.cin as u8, self.forward_latency, self.reverse_latency, self.cycle_time
        )
    }
}

pub const TRANSACTION_CSV_HEADER: &str = "arch,variant,n,a,b,cin,fl,rl,cycle";

fn rails(pairs: &[(NetId, NetId)]) -> Vec<NetId> {
    pairs.iter().flat_map(|&(a, b)| [a, b]).collect()
}

/// Compiled stage plus a reusable simulator. Each transaction starts and
/// ends in the all-zero state.
pub struct StageRunner<'c> {
    stage: &'c StageDescriptor,
    sim: Simulator<'c>,
    inputs: RcaPorts,
    ackin: NetId,
    forwarded: Vec<(NetId, NetId)>,
    data: Vec<(NetId, NetId)>,
    registers: Vec<NetId>,
    cd_out: NetId,
    sync: Option<(NetId, NetId)>,
    all: Vec<NetId>,
    last_traces: Option<(EventTrace, EventTrace)>,
    keep_traces: bool,
}

impl<'c> StageRunner<'c> {
    pub fn new(stage: &'c StageDescriptor, circuit: &'c Circuit) -> Result<Self, StageError> {
        let pairs = |v: &[RailPair]| v.iter().map(|p| circuit.pair(p)).collect::<Result<Vec<_>, _>>();
        let registers = rails(&pairs(&stage.nets.registers)?);
        Ok(Self {
            stage,
            sim: Simulator::new(circuit),
            inputs: stage.nets.inputs.clone(),
            ackin: circuit.net(&stage.nets.ackin)?,
            forwarded: pairs(&stage.nets.forwarded)?,
            data: pairs(&stage.nets.data_outputs)?,
            registers,
            cd_out: circuit.net(&stage.nets.cd_out)?,
            sync: stage.nets.synchronizer.as_ref().map(|p| circuit.pair(p)).transpose()?,
            all: (0..circuit.net_count()).collect(),
            last_traces: None,
            keep_traces: false,
        })
    }

    /// Keeps the SET and RTZ traces of the most recent transaction.
    pub fn keep_traces(mut self, keep: bool) -> Self {
        self.keep_traces = keep;
        self
    }

    pub fn last_traces(&self) -> Option<&(EventTrace, EventTrace)> {
        self.last_traces.as_ref()
    }

    pub fn circuit(&self) -> &'c Circuit {
        self.sim.circuit()
    }

    fn check(&self, before: &[bool], trace: &EventTrace, phase: Phase) -> Result<PhaseCheckReport, StageError> {
        let circuit = self.sim.circuit();
        let report = check_phase(circuit, before, trace, phase, &self.all);
        let mut detail = report.describe(circuit);
        for (net, c) in trace.counts(circuit.net_count()).iter().enumerate() {
            if *c > 1 {
                writeln!(detail, "{} toggled {c} times", circuit.name(net)).unwrap();
            }
        }
        if detail.is_empty() {
            Ok(report)
        } else {
            Err(StageError::PhaseViolation { phase, detail })
        }
    }

    pub fn transaction(&mut self, a: u64, b: u64, cin: bool) -> Result<TransactionRecord, StageError> {
        let n = self.stage.width;
        if a >> n != 0 || b >> n != 0 {
            return Err(StageError::OperandRange { width: n });
        }
        let circuit = self.sim.circuit();
        let mut valid = operand_assignments(circuit, &self.inputs.a, &self.inputs.b, &self.inputs.cin, a, b, cin)?;
        valid.push((self.ackin, true));
        let fwd_rails = rails(&self.forwarded);
        let data_rails = rails(&self.data);

        let before = self.sim.values().to_vec();
        let t0 = self.sim.now();
        self.sim.apply_inputs(&valid, t0)?;
        let set = self.sim.run_until_quiescent()?;
        let set_report = self.check(&before, &set.trace, Phase::Set)?;
        let word: DualRailWord = self.sim.word(&self.forwarded);
        let result = decode_word(&word).map_err(|failure| StageError::Outputs { phase: Phase::Set, failure })?;
        let rel = |t: Option<Time>, origin: Time| t.map_or(0, |t| t - origin);
        let forward_latency = rel(set.trace.last_time_on(&fwd_rails), t0);
        let data_forward_latency = rel(set.trace.last_time_on(&data_rails), t0);
        let registers_valid_at = rel(set.trace.last_time_on(&self.registers), t0);
        let cd_rise = rel(set.trace.first_time_on(self.cd_out), t0);
        let sync_valid_at = self.sync.map(|(r1, r0)| rel(set.trace.last_time_on(&[r1, r0]), t0));

        let spacer: Vec<(NetId, bool)> = valid.iter().map(|&(net, _)| (net, false)).collect();
        let before = self.sim.values().to_vec();
        let t1 = self.sim.now();
        self.sim.apply_inputs(&spacer, t1)?;
        let rtz = self.sim.run_until_quiescent()?;
        let rtz_report = self.check(&before, &rtz.trace, Phase::Rtz)?;
        let word = self.sim.word(&self.forwarded);
        if let Some((index, p)) = word.pairs().iter().enumerate().find(|(_, p)| !p.is_spacer()) {
            return Err(StageError::NotSpacer { phase: Phase::Rtz, index, found: p.class() });
        }
        if let Some(net) = self.sim.values().iter().position(|&v| v) {
            let detail = format!("{} still high after return to zero", circuit.name(net));
            return Err(StageError::PhaseViolation { phase: Phase::Rtz, detail });
        }
        let reverse_latency = rel(rtz.trace.last_time_on(&fwd_rails), t1);
        let record = TransactionRecord {
            a,
            b,
            cin,
            forward_latency,
            reverse_latency,
            cycle_time: forward_latency + reverse_latency,
            result,
            data_forward_latency,
            data_reverse_latency: rel(rtz.trace.last_time_on(&data_rails), t1),
            cd_rise,
            cd_fall: rel(rtz.trace.first_time_on(self.cd_out), t1),
            registers_valid_at,
            registers_spacer_at: rel(rtz.trace.last_time_on(&self.registers), t1),
            sync_valid_at,
            sync_spacer_at: self.sync.map(|(r1, r0)| rel(rtz.trace.last_time_on(&[r1, r0]), t1)),
            set_report,
            rtz_report,
        };
        if self.keep_traces {
            self.last_traces = Some((set.trace, rtz.trace));
        }
        Ok(record)
    }
}

/// Compiles the stage and runs one open-loop transaction: `ackin` is held
/// high while valid operands are applied and low during the return to zero.
pub fn run_transaction(
    stage: &StageDescriptor,
    a: u64,
    b: u64,
    cin: bool,
    delays: &DelayTable,
) -> Result<TransactionRecord, StageError> {
    let circuit = Circuit::compile(&stage.netlist, delays)?;
    StageRunner::new(stage, &circuit)?.transaction(a, b, cin)
}

/// Result of a closed handshake ring.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThroughputReport {
    /// Times at which the sink observed each complete output word.
    pub completions: Vec<Time>,
    /// Decoded sink words: sum bits plus carry out at bit `n`.
    pub outputs: Vec<u64>,
    /// Mean spacing of consecutive completions, once at least two exist.
    pub mean_interval: Option<f64>,
    pub min_interval: Option<Time>,
    pub events: usize,
}

/// Reference result of a ring: stage 0 adds the operands, every later stage
/// adds its incoming sum to itself with the incoming carry as carry in.
pub fn ring_reference(n: usize, stage_count: usize, a: u64, b: u64, cin: bool) -> u64 {
    let mask = (1u64 << n) - 1;
    let mut word = a + b + cin as u64;
    for _ in 1..stage_count {
        let (s, c) = (word & mask, word >> n);
        word = s + s + c;
    }
    word
}

/// A ring of `stage_count` stages between a source and a sink that both
/// react with zero delay. Stage `k + 1` registers stage `k`'s sum word as
/// both operands and its carry out as carry in; `ackin` of each stage is
/// the inverted completion signal of its successor (or of the sink).
pub fn build_ring(
    stage_count: usize,
    variant: AdderVariant,
    arch: Architecture,
    n: usize,
    force: bool,
) -> Result<(Netlist, Vec<StageNets>), StageError> {
    if stage_count < 2 {
        return Err(StageError::TooFewStages(stage_count));
    }
    if !(1..=MAX_WIDTH).contains(&n) {
        return Err(StageError::Width(n));
    }
    if !force && !arch.accepts(variant) {
        return Err(StageError::Incompatible { arch, variant });
    }
    let mut netlist = Netlist::new();
    let src = bus("src.", n);
    for p in src.a.iter().chain(&src.b).chain([&src.cin]) {
        netlist.add_input(p.rail1.clone()).unwrap();
        netlist.add_input(p.rail0.clone()).unwrap();
    }
    netlist.add_input("sink_ack").unwrap();
    let mut stages = Vec::with_capacity(stage_count);
    let mut inputs = src;
    for k in 0..stage_count {
        let prefix = format!("s{k}.");
        let out = bus(&prefix, n);
        let ackin = format!("{prefix}ackin");
        let nets = emit_stage(&mut netlist, arch, variant, &prefix, &inputs, &ackin, &out);
        inputs = RcaPorts {
            a: out.sum.clone(),
            b: out.sum.clone(),
            cin: out.cout.clone(),
            sum: Vec::new(),
            cout: out.cout.clone(),
        };
        stages.push(nets);
    }
    for k in 0..stage_count {
        let ack_src = if k + 1 == stage_count { "sink_ack".to_string() } else { stages[k + 1].cd_out.clone() };
        netlist.add_gate(format!("ack{k}"), GateKind::Inv, &[&ack_src], stages[k].ackin.clone()).expect("unique id");
    }
    netlist.add_output(stages[0].cd_out.clone()).unwrap();
    for p in &stages[stage_count - 1].forwarded {
        netlist.add_output(p.rail1.clone()).unwrap();
        netlist.add_output(p.rail0.clone()).unwrap();
    }
    for (k, s) in stages.iter().enumerate() {
        for (i, p) in s.forwarded.iter().enumerate() {
            netlist.add_pair(format!("s{k}.out{i}"), p.clone()).unwrap();
        }
    }
    debug_assert!(validate(&netlist).is_empty(), "{}", validate(&netlist));
    Ok((netlist, stages))
}

/// Pushes `transactions` through a closed ring and records when each result
/// reaches the sink.
pub fn run_closed_loop(
    stage_count: usize,
    variant: AdderVariant,
    arch: Architecture,
    n: usize,
    transactions: &[(u64, u64, bool)],
    delays: &DelayTable,
) -> Result<ThroughputReport, StageError> {
    let (netlist, stages) = build_ring(stage_count, variant, arch, n, false)?;
    if transactions.is_empty() {
        return Ok(ThroughputReport::default());
    }
    if transactions.iter().any(|&(a, b, _)| a >> n != 0 || b >> n != 0) {
        return Err(StageError::OperandRange { width: n });
    }
    let circuit = Circuit::compile(&netlist, delays)?;
    let mut sim = Simulator::new(&circuit);
    let first = &stages[0];
    let src_cd = circuit.net(&first.cd_out)?;
    let sink_ack = circuit.net("sink_ack")?;
    let sink_pairs: Vec<(NetId, NetId)> =
        stages[stage_count - 1].forwarded.iter().map(|p| circuit.pair(p)).collect::<Result<_, _>>()?;
    let spacer_of = |assign: &[(NetId, bool)]| assign.iter().map(|&(net, _)| (net, false)).collect::<Vec<_>>();

    let mut report = ThroughputReport::default();
    let mut trace = EventTrace::default();
    let mut next = 0usize;
    // Assignments currently presented by the source, if valid.
    let mut presented: Option<Vec<(NetId, bool)>> = None;
    loop {
        let now = sim.now();
        let mut acted = false;

        let cd = sim.value(src_cd);
        match (&presented, cd) {
            (None, false) if next < transactions.len() => {
                let (a, b, cin) = transactions[next];
                let assign =
                    operand_assignments(&circuit, &first.inputs.a, &first.inputs.b, &first.inputs.cin, a, b, cin)?;
                sim.apply_inputs(&assign, now)?;
                presented = Some(assign);
                next += 1;
                acted = true;
            }
            (Some(assign), true) => {
                sim.apply_inputs(&spacer_of(assign), now)?;
                presented = None;
                acted = true;
            }
            _ => {}
        }

        let word = sim.word(&sink_pairs);
        let ack = sim.value(sink_ack);
        if !ack && word.pairs().iter().all(|p| p.is_valid()) {
            let value = decode_word(&word).expect("all pairs valid");
            report.completions.push(now);
            report.outputs.push(value);
            sim.apply_inputs(&[(sink_ack, true)], now)?;
            acted = true;
        } else if ack && word.pairs().iter().all(|p| p.is_spacer()) {
            sim.apply_inputs(&[(sink_ack, false)], now)?;
            acted = true;
        }

        if sim.step(&mut trace).is_none() && !acted {
            break;
        }
        if trace.len() as u64 > crate::sim::DEFAULT_EVENT_CAP {
            return Err(SimError::Oscillation { events: trace.len() as u64, time: sim.now(), nets: Vec::new() }.into());
        }
    }
    if report.outputs.len() != transactions.len() {
        return Err(StageError::Deadlock { time: sim.now(), done: report.outputs.len(), expected: transactions.len() });
    }
    report.events = trace.len();
    let gaps: Vec<Time> = report.completions.windows(2).map(|w| w[1] - w[0]).collect();
    if !gaps.is_empty() {
        report.mean_interval = Some(gaps.iter().sum::<Time>() as f64 / gaps.len() as f64);
        report.min_interval = gaps.iter().copied().min();
    }
    Ok(report)
}
