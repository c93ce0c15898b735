//! Deterministic discrete-event simulation with pure transport delays.
//!
//! A [`Circuit`] is the compiled, index-based form of a [`Netlist`]; a
//! [`Simulator`] owns the mutable state of one run over a borrowed circuit.
//! Events are ordered by `(time, insertion sequence)`, so identical stimulus
//! on identical state always yields identical traces.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cells::{eval_gate, DelayTable};
use crate::dualrail::{DualRailValue, DualRailWord};
use crate::netlist::{GateKind, Netlist, RailPair};

pub type NetId = usize;
pub type Time = u64;

pub const DEFAULT_EVENT_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("net `{0}` does not exist")]
    UnknownNet(String),
    #[error("net `{0}` is not a primary input")]
    NotAnInput(String),
    #[error("net `{0}` has more than one driver")]
    MultipleDrivers(String),
    #[error("{kind} gate `{gate}` has {got} inputs")]
    Arity { gate: String, kind: GateKind, got: usize },
    #[error("no quiescence after {events} events (t={time}); still toggling: {nets:?}")]
    Oscillation { events: u64, time: Time, nets: Vec<String> },
    #[error("cannot schedule at t={at}, simulation time is already {now}")]
    Past { at: Time, now: Time },
}

#[derive(Debug, Clone)]
struct CompiledGate {
    kind: GateKind,
    inputs: Vec<NetId>,
    output: NetId,
    delay: Time,
}

/// Uniform extra delay in `0..=max` drawn once per gate instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Jitter {
    pub max: Time,
    pub seed: u64,
}

/// Index-based, immutable form of a netlist with resolved delays.
#[derive(Debug, Clone)]
pub struct Circuit {
    names: Vec<String>,
    index: HashMap<String, NetId>,
    gates: Vec<CompiledGate>,
    gate_ids: Vec<String>,
    fanout: Vec<Vec<usize>>,
    is_input: Vec<bool>,
    ports: Vec<(String, NetId, NetId)>,
}

impl Circuit {
    pub fn compile(netlist: &Netlist, delays: &DelayTable) -> Result<Self, SimError> {
        Self::build(netlist, delays, None)
    }

    pub fn compile_with_jitter(netlist: &Netlist, delays: &DelayTable, jitter: Jitter) -> Result<Self, SimError> {
        Self::build(netlist, delays, Some(jitter))
    }

    fn build(netlist: &Netlist, delays: &DelayTable, jitter: Option<Jitter>) -> Result<Self, SimError> {
        let names = netlist.nets();
        let index: HashMap<String, NetId> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut is_input = vec![false; names.len()];
        let mut driven = vec![false; names.len()];
        for i in netlist.inputs() {
            is_input[index[i]] = true;
            driven[index[i]] = true;
        }
        let mut rng = jitter.map(|j| (j.max, ChaCha8Rng::seed_from_u64(j.seed)));
        let mut gates = Vec::with_capacity(netlist.gate_count());
        let mut gate_ids = Vec::with_capacity(netlist.gate_count());
        let mut fanout = vec![Vec::new(); names.len()];
        for g in netlist.gates() {
            if g.inputs.len() != g.kind.arity() {
                return Err(SimError::Arity { gate: g.id.clone(), kind: g.kind, got: g.inputs.len() });
            }
            let output = index[&g.output];
            if std::mem::replace(&mut driven[output], true) {
                return Err(SimError::MultipleDrivers(g.output.clone()));
            }
            let extra = match rng.as_mut() {
                Some((max, r)) => r.gen_range(0..=*max),
                None => 0,
            };
            let gi = gates.len();
            let inputs: Vec<NetId> = g.inputs.iter().map(|n| index[n]).collect();
            for &i in &inputs {
                if !fanout[i].contains(&gi) {
                    fanout[i].push(gi);
                }
            }
            gates.push(CompiledGate { kind: g.kind, inputs, output, delay: delays.get(g.kind) + extra });
            gate_ids.push(g.id.clone());
        }
        let ports =
            netlist.ports().iter().map(|(p, pair)| (p.clone(), index[&pair.rail1], index[&pair.rail0])).collect();
        Ok(Self { names, index, gates, gate_ids, fanout, is_input, ports })
    }

    pub fn net(&self, name: &str) -> Result<NetId, SimError> {
        self.index.get(name).copied().ok_or_else(|| SimError::UnknownNet(name.to_string()))
    }

    pub fn pair(&self, pair: &RailPair) -> Result<(NetId, NetId), SimError> {
        Ok((self.net(&pair.rail1)?, self.net(&pair.rail0)?))
    }

    pub fn name(&self, id: NetId) -> &str {
        &self.names[id]
    }

    pub fn net_count(&self) -> usize {
        self.names.len()
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn is_input(&self, id: NetId) -> bool {
        self.is_input[id]
    }

    /// Dual-rail ports as `(name, rail1, rail0)`.
    pub fn ports(&self) -> &[(String, NetId, NetId)] {
        &self.ports
    }

    /// Driver delay of a gate-driven net, `None` for primary inputs.
    pub fn driver_delay(&self, net: NetId) -> Option<(Time, Vec<NetId>)> {
        self.gates.iter().find(|g| g.output == net).map(|g| (g.delay, g.inputs.clone()))
    }

    pub fn gate_id_driving(&self, net: NetId) -> Option<&str> {
        self.gates.iter().position(|g| g.output == net).map(|i| self.gate_ids[i].as_str())
    }
}

/// One committed net transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transition {
    pub time: Time,
    pub net: NetId,
    pub value: bool,
}

/// Committed transitions in commit order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventTrace {
    pub transitions: Vec<Transition>,
}

impl EventTrace {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Latest transition time on any of `nets`.
    pub fn last_time_on(&self, nets: &[NetId]) -> Option<Time> {
        self.transitions.iter().filter(|t| nets.contains(&t.net)).map(|t| t.time).max()
    }

    pub fn first_time_on(&self, net: NetId) -> Option<Time> {
        self.transitions.iter().find(|t| t.net == net).map(|t| t.time)
    }

    /// Transition count per net, indexed by [`NetId`].
    pub fn counts(&self, net_count: usize) -> Vec<usize> {
        let mut c = vec![0; net_count];
        for t in &self.transitions {
            c[t.net] += 1;
        }
        c
    }

    /// `time,net,value` lines, times shifted so `origin` reads as zero.
    pub fn to_csv(&self, circuit: &Circuit, origin: Time) -> String {
        let mut s = String::new();
        for t in &self.transitions {
            writeln!(s, "{},{},{}", t.time - origin, circuit.name(t.net), t.value as u8).unwrap();
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    /// A scheduled transition was withdrawn before it committed.
    PendingReplaced { net: NetId, time: Time },
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    time: Time,
    value: bool,
    seq: u64,
}

/// Result of settling one phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settled {
    pub trace: EventTrace,
    /// Time of the last committed transition, or the current time if none.
    pub settle_time: Time,
}

/// Mutable simulation state over one circuit. All nets start at 0.
#[derive(Debug, Clone)]
pub struct Simulator<'c> {
    circuit: &'c Circuit,
    values: Vec<bool>,
    pending: Vec<Option<Pending>>,
    queue: BinaryHeap<Reverse<(Time, u64, NetId)>>,
    now: Time,
    seq: u64,
    event_cap: u64,
    diagnostics: Vec<Diagnostic>,
}

impl<'c> Simulator<'c> {
    /// Starts from the all-zero state. Gates whose output is not 0 under
    /// all-zero inputs (inverters) get their initial transition scheduled.
    pub fn new(circuit: &'c Circuit) -> Self {
        let mut sim = Self {
            circuit,
            values: vec![false; circuit.net_count()],
            pending: vec![None; circuit.net_count()],
            queue: BinaryHeap::new(),
            now: 0,
            seq: 0,
            event_cap: DEFAULT_EVENT_CAP,
            diagnostics: Vec::new(),
        };
        for gi in 0..circuit.gates.len() {
            sim.evaluate(gi);
        }
        sim
    }

    pub fn with_event_cap(mut self, cap: u64) -> Self {
        self.event_cap = cap;
        self
    }

    pub fn circuit(&self) -> &'c Circuit {
        self.circuit
    }

    pub fn now(&self) -> Time {
        self.now
    }

    pub fn value(&self, net: NetId) -> bool {
        self.values[net]
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn pending_count(&self) -> usize {
        self.pending.iter().filter(|p| p.is_some()).count()
    }

    pub fn is_quiescent(&self) -> bool {
        self.pending_count() == 0
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    pub fn pair_value(&self, (r1, r0): (NetId, NetId)) -> DualRailValue {
        DualRailValue::new(self.values[r1], self.values[r0])
    }

    pub fn word(&self, pairs: &[(NetId, NetId)]) -> DualRailWord {
        DualRailWord::from_pairs(pairs.iter().map(|p| self.pair_value(*p)).collect())
    }

    fn projected(&self, net: NetId) -> bool {
        self.pending[net].map_or(self.values[net], |p| p.value)
    }

    fn schedule(&mut self, net: NetId, time: Time, value: bool) {
        if let Some(p) = self.pending[net] {
            if p.value == value {
                return;
            }
            self.pending[net] = None;
            self.diagnostics.push(Diagnostic::PendingReplaced { net, time: p.time });
        }
        if value != self.values[net] {
            self.seq += 1;
            self.pending[net] = Some(Pending { time, value, seq: self.seq });
            self.queue.push(Reverse((time, self.seq, net)));
        }
    }

    fn evaluate(&mut self, gi: usize) {
        let g = &self.circuit.gates[gi];
        let mut buf = [false; 6];
        for (slot, &i) in buf.iter_mut().zip(&g.inputs) {
            *slot = self.values[i];
        }
        let prev = self.projected(g.output);
        let next = eval_gate(g.kind, &buf[..g.inputs.len()], prev);
        if next != prev {
            let (out, at) = (g.output, self.now + g.delay);
            self.schedule(out, at, next);
        }
    }

    /// Schedules primary-input transitions at `at`. Entries that would not
    /// change the net are dropped; returns how many were scheduled.
    pub fn apply_inputs(&mut self, assignments: &[(NetId, bool)], at: Time) -> Result<usize, SimError> {
        if at < self.now {
            return Err(SimError::Past { at, now: self.now });
        }
        for &(net, _) in assignments {
            if !self.circuit.is_input[net] {
                return Err(SimError::NotAnInput(self.circuit.name(net).to_string()));
            }
        }
        let mut n = 0;
        for &(net, value) in assignments {
            if self.projected(net) != value {
                self.schedule(net, at, value);
                n += 1;
            }
        }
        Ok(n)
    }

    /// Name-based variant of [`apply_inputs`](Self::apply_inputs).
    pub fn apply_named(&mut self, assignments: &[(&str, bool)], at: Time) -> Result<usize, SimError> {
        let ids =
            assignments.iter().map(|(n, v)| Ok((self.circuit.net(n)?, *v))).collect::<Result<Vec<_>, SimError>>()?;
        self.apply_inputs(&ids, at)
    }

    pub fn next_event_time(&mut self) -> Option<Time> {
        while let Some(Reverse((time, seq, net))) = self.queue.peek().copied() {
            match self.pending[net] {
                Some(p) if p.seq == seq => return Some(time),
                _ => {
                    self.queue.pop();
                }
            }
        }
        None
    }

    fn commit_next(&mut self, trace: &mut EventTrace) -> bool {
        let Some(Reverse((time, seq, net))) = self.queue.pop() else {
            return false;
        };
        match self.pending[net] {
            Some(p) if p.seq == seq => {}
            _ => return true,
        }
        let p = self.pending[net].take().expect("checked");
        self.now = time;
        self.values[net] = p.value;
        trace.transitions.push(Transition { time, net, value: p.value });
        for k in 0..self.circuit.fanout[net].len() {
            let gi = self.circuit.fanout[net][k];
            self.evaluate(gi);
        }
        true
    }

    /// Commits every event stamped with the earliest pending time.
    /// Returns that time, or `None` when nothing is pending.
    pub fn step(&mut self, trace: &mut EventTrace) -> Option<Time> {
        let t = self.next_event_time()?;
        while self.next_event_time() == Some(t) {
            self.commit_next(trace);
        }
        Some(t)
    }

    /// Processes events until the queue drains.
    pub fn run_until_quiescent(&mut self) -> Result<Settled, SimError> {
        let mut trace = EventTrace::default();
        let mut events = 0u64;
        while self.next_event_time().is_some() {
            self.commit_next(&mut trace);
            events += 1;
            if events > self.event_cap {
                let tail = trace.transitions.iter().rev().take(8);
                let mut nets: Vec<String> = tail.map(|t| self.circuit.name(t.net).to_string()).collect();
                nets.dedup();
                return Err(SimError::Oscillation { events, time: self.now, nets });
            }
        }
        let settle_time = trace.transitions.last().map_or(self.now, |t| t.time);
        Ok(Settled { trace, settle_time })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Spacer to valid data: every net may only rise.
    Set,
    /// Return to zero: every net may only fall.
    Rtz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Monotonicity {
    pub net: NetId,
    pub time: Time,
    pub value: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IllegalPair {
    pub port: usize,
    pub time: Time,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhaseCheckReport {
    pub monotonicity: Vec<Monotonicity>,
    /// Port indices into [`Circuit::ports`] seen with both rails high.
    pub illegal: Vec<IllegalPair>,
}

impl PhaseCheckReport {
    pub fn is_empty(&self) -> bool {
        self.monotonicity.is_empty() && self.illegal.is_empty()
    }

    pub fn describe(&self, circuit: &Circuit) -> String {
        let mut s = String::new();
        for m in &self.monotonicity {
            let dir = if m.value { "rose" } else { "fell" };
            writeln!(s, "t={}: {} {dir} against the phase", m.time, circuit.name(m.net)).unwrap();
        }
        for i in &self.illegal {
            writeln!(s, "t={}: port {} illegal (1,1)", i.time, circuit.ports()[i.port].0).unwrap();
        }
        s
    }
}

/// Checks one phase's trace. `before` holds the net values at the start of
/// the phase; every port of the circuit is replayed for (1,1) states.
pub fn check_phase(
    circuit: &Circuit,
    before: &[bool],
    trace: &EventTrace,
    phase: Phase,
    watched: &[NetId],
) -> PhaseCheckReport {
    let mut report = PhaseCheckReport::default();
    let mut watch = vec![false; circuit.net_count()];
    for &w in watched {
        watch[w] = true;
    }
    let mut port_of: Vec<Vec<usize>> = vec![Vec::new(); circuit.net_count()];
    for (pi, (_, r1, r0)) in circuit.ports.iter().enumerate() {
        port_of[*r1].push(pi);
        port_of[*r0].push(pi);
    }
    let mut values = before.to_vec();
    let mut flagged = vec![false; circuit.ports.len()];
    for (pi, (_, r1, r0)) in circuit.ports.iter().enumerate() {
        if values[*r1] && values[*r0] {
            flagged[pi] = true;
            report.illegal.push(IllegalPair { port: pi, time: 0 });
        }
    }
    let expected = phase == Phase::Set;
    for t in &trace.transitions {
        values[t.net] = t.value;
        if watch[t.net] && t.value != expected {
            report.monotonicity.push(Monotonicity { net: t.net, time: t.time, value: t.value });
        }
        for &pi in &port_of[t.net] {
            let (_, r1, r0) = circuit.ports[pi];
            if values[r1] && values[r0] && !flagged[pi] {
                flagged[pi] = true;
                report.illegal.push(IllegalPair { port: pi, time: t.time });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::default_delay_table;
    use crate::netlist::parse_netlist;

    fn circuit(text: &str) -> Circuit {
        Circuit::compile(&parse_netlist(text).unwrap(), &default_delay_table()).unwrap()
    }

    #[test]
    fn or2_rises_after_its_delay() {
        let c = circuit("input a\ninput b\noutput y\ngate g OR2 a b y");
        let mut sim = Simulator::new(&c);
        sim.apply_named(&[("a", true)], 0).unwrap();
        let s = sim.run_until_quiescent().unwrap();
        let y = c.net("y").unwrap();
        assert_eq!(s.trace.first_time_on(y), Some(60));
        assert_eq!(s.settle_time, 60);
    }

    #[test]
    fn c2_holds_on_partial_input() {
        let c = circuit("input a\ninput b\noutput y\ngate g C2 a b y");
        let mut sim = Simulator::new(&c);
        sim.apply_named(&[("a", true)], 0).unwrap();
        let s = sim.run_until_quiescent().unwrap();
        assert_eq!(s.trace.len(), 1);
        assert!(!sim.value(c.net("y").unwrap()));
        sim.apply_named(&[("b", true)], 10).unwrap();
        let s = sim.run_until_quiescent().unwrap();
        assert_eq!(s.trace.first_time_on(c.net("y").unwrap()), Some(116));
    }

    #[test]
    fn apply_inputs_contract() {
        let c = circuit("input A1\ninput b\noutput y\ngate g OR2 A1 b y");
        let mut sim = Simulator::new(&c);
        assert_eq!(sim.apply_named(&[("A1", true)], 0).unwrap(), 1);
        assert_eq!(sim.pending_count(), 1);
        assert_eq!(sim.apply_named(&[("b", false)], 0).unwrap(), 0);
        assert_eq!(sim.pending_count(), 1);
        assert_eq!(sim.apply_named(&[("y", true)], 0), Err(SimError::NotAnInput("y".into())));
        assert!(matches!(sim.apply_named(&[("nope", true)], 0), Err(SimError::UnknownNet(_))));
    }

    #[test]
    fn inverter_initialises_high() {
        let c = circuit("input a\noutput y\ngate g INV a y");
        let mut sim = Simulator::new(&c);
        let s = sim.run_until_quiescent().unwrap();
        assert_eq!(s.trace.first_time_on(c.net("y").unwrap()), Some(30));
        assert!(sim.value(c.net("y").unwrap()));
    }

    #[test]
    fn ring_oscillator_hits_the_cap() {
        let c = circuit("input a\ngate g1 INV z y\ngate g2 OR2 y a z");
        let mut sim = Simulator::new(&c).with_event_cap(1000);
        assert!(matches!(sim.run_until_quiescent(), Err(SimError::Oscillation { .. })));
    }

    #[test]
    fn identical_runs_identical_traces() {
        let text = "input a\ninput b\ninput c\noutput y\ngate g1 C2 a b x\ngate g2 AO21 x c a y";
        let c = circuit(text);
        let run = || {
            let mut sim = Simulator::new(&c);
            sim.apply_named(&[("a", true), ("b", true), ("c", true)], 0).unwrap();
            sim.run_until_quiescent().unwrap().trace.to_csv(&c, 0)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn withdrawn_event_is_diagnosed() {
        // y = a AND NOT a: the AND sees `a` rise before the inverter falls,
        // and the scheduled rise is withdrawn when `na` falls
        let c = circuit("input a\noutput y\ngate g1 INV a na\ngate g2 AND2 a na y");
        let mut sim = Simulator::new(&c);
        sim.run_until_quiescent().unwrap();
        sim.apply_named(&[("a", true)], 100).unwrap();
        let s = sim.run_until_quiescent().unwrap();
        assert_eq!(s.trace.counts(c.net_count())[c.net("y").unwrap()], 0);
        assert_eq!(sim.diagnostics(), &[Diagnostic::PendingReplaced { net: c.net("y").unwrap(), time: 160 }]);

        let c = circuit("input a\ninput b\noutput y\ngate g OR2 a b y");
        let mut sim = Simulator::new(&c);
        sim.apply_named(&[("a", true)], 0).unwrap();
        sim.apply_named(&[("a", false)], 0).unwrap();
        assert_eq!(sim.pending_count(), 0);
        assert_eq!(sim.diagnostics().len(), 1);
    }

    #[test]
    fn phase_checks() {
        let c = circuit("input a\ninput b\noutput y\ngate g INV a y\npair P a b");
        let mut sim = Simulator::new(&c);
        sim.run_until_quiescent().unwrap();
        let before = sim.values().to_vec();
        sim.apply_named(&[("a", true)], 100).unwrap();
        let s = sim.run_until_quiescent().unwrap();
        let all: Vec<NetId> = (0..c.net_count()).collect();
        let r = check_phase(&c, &before, &s.trace, Phase::Set, &all);
        assert_eq!(r.monotonicity.len(), 1);
        assert_eq!(c.name(r.monotonicity[0].net), "y");
        assert!(r.illegal.is_empty());

        let before = sim.values().to_vec();
        sim.apply_named(&[("b", true)], 500).unwrap();
        let s = sim.run_until_quiescent().unwrap();
        let r = check_phase(&c, &before, &s.trace, Phase::Set, &all);
        assert!(r.monotonicity.is_empty());
        assert_eq!(r.illegal, vec![IllegalPair { port: 0, time: 500 }]);
    }
}
