//! Gate-graph representation of a circuit and its line-oriented text form.
//!
//! ```text
//! # comment
//! input <net>
//! output <net>
//! gate <id> <KIND> <in...> <out>
//! pair <port> <rail1-net> <rail0-net>
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GateKind {
    Inv,
    And2,
    Or2,
    Ao21,
    Ao22,
    Ao222,
    C2,
    C3,
}

impl GateKind {
    pub const ALL: [GateKind; 8] = [
        GateKind::Inv,
        GateKind::And2,
        GateKind::Or2,
        GateKind::Ao21,
        GateKind::Ao22,
        GateKind::Ao222,
        GateKind::C2,
        GateKind::C3,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateKind::Inv => 1,
            GateKind::And2 | GateKind::Or2 | GateKind::C2 => 2,
            GateKind::Ao21 | GateKind::C3 => 3,
            GateKind::Ao22 => 4,
            GateKind::Ao222 => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Inv => "INV",
            GateKind::And2 => "AND2",
            GateKind::Or2 => "OR2",
            GateKind::Ao21 => "AO21",
            GateKind::Ao22 => "AO22",
            GateKind::Ao222 => "AO222",
            GateKind::C2 => "C2",
            GateKind::C3 => "C3",
        }
    }

    /// Muller C-elements are the only state-holding kinds.
    pub fn is_c_element(self) -> bool {
        matches!(self, GateKind::C2 | GateKind::C3)
    }

    /// AND-OR cells and C-elements count as complex gates.
    pub fn is_complex(self) -> bool {
        matches!(self, GateKind::Ao21 | GateKind::Ao22 | GateKind::Ao222 | GateKind::C2 | GateKind::C3)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown gate kind `{0}`")]
pub struct UnknownKind(pub String);

impl FromStr for GateKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GateKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub id: String,
    pub kind: GateKind,
    pub inputs: Vec<String>,
    pub output: String,
}

/// Names of the two rails carrying one dual-rail signal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RailPair {
    pub rail1: String,
    pub rail0: String,
}

impl RailPair {
    pub fn new(rail1: impl Into<String>, rail0: impl Into<String>) -> Self {
        Self { rail1: rail1.into(), rail0: rail0.into() }
    }

    /// `<base>.1` / `<base>.0`
    pub fn dotted(base: &str) -> Self {
        Self::new(format!("{base}.1"), format!("{base}.0"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error("duplicate gate id `{0}`")]
    DuplicateGate(String),
    #[error("net `{0}` declared as input twice")]
    DuplicateInput(String),
    #[error("net `{0}` declared as output twice")]
    DuplicateOutput(String),
    #[error("port `{0}` declared twice")]
    DuplicatePort(String),
    #[error("invalid net name `{0}`")]
    BadName(String),
}

/// A flat gate-level circuit.
///
/// Gates are kept keyed by id so two netlists holding the same gates compare
/// equal regardless of construction order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Netlist {
    gates: BTreeMap<String, Gate>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    ports: BTreeMap<String, RailPair>,
}

pub(crate) fn is_valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn check_name(s: &str) -> Result<(), NetlistError> {
    if is_valid_name(s) {
        Ok(())
    } else {
        Err(NetlistError::BadName(s.to_string()))
    }
}

impl Netlist {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_input(&mut self, net: impl Into<String>) -> Result<(), NetlistError> {
        let net = net.into();
        check_name(&net)?;
        if self.inputs.contains(&net) {
            return Err(NetlistError::DuplicateInput(net));
        }
        self.inputs.push(net);
        Ok(())
    }

    pub fn add_output(&mut self, net: impl Into<String>) -> Result<(), NetlistError> {
        let net = net.into();
        check_name(&net)?;
        if self.outputs.contains(&net) {
            return Err(NetlistError::DuplicateOutput(net));
        }
        self.outputs.push(net);
        Ok(())
    }

    /// Adds a gate without checking arity; [`validate`] reports mismatches.
    pub fn add_gate(
        &mut self,
        id: impl Into<String>,
        kind: GateKind,
        inputs: &[&str],
        output: impl Into<String>,
    ) -> Result<(), NetlistError> {
        let gate =
            Gate { id: id.into(), kind, inputs: inputs.iter().map(|s| s.to_string()).collect(), output: output.into() };
        self.insert_gate(gate)
    }

    pub fn insert_gate(&mut self, gate: Gate) -> Result<(), NetlistError> {
        check_name(&gate.id)?;
        check_name(&gate.output)?;
        for i in &gate.inputs {
            check_name(i)?;
        }
        if self.gates.contains_key(&gate.id) {
            return Err(NetlistError::DuplicateGate(gate.id));
        }
        self.gates.insert(gate.id.clone(), gate);
        Ok(())
    }

    pub fn add_pair(&mut self, port: impl Into<String>, pair: RailPair) -> Result<(), NetlistError> {
        let port = port.into();
        check_name(&port)?;
        if self.ports.contains_key(&port) {
            return Err(NetlistError::DuplicatePort(port));
        }
        self.ports.insert(port, pair);
        Ok(())
    }

    /// Gates in id order.
    pub fn gates(&self) -> impl ExactSizeIterator<Item = &Gate> {
        self.gates.values()
    }

    pub fn gate(&self, id: &str) -> Option<&Gate> {
        self.gates.get(id)
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn ports(&self) -> &BTreeMap<String, RailPair> {
        &self.ports
    }

    pub fn port(&self, name: &str) -> Option<&RailPair> {
        self.ports.get(name)
    }

    /// Every net mentioned anywhere, sorted.
    pub fn nets(&self) -> Vec<String> {
        let mut set: HashSet<&str> = HashSet::new();
        set.extend(self.inputs.iter().map(String::as_str));
        set.extend(self.outputs.iter().map(String::as_str));
        for g in self.gates.values() {
            set.insert(&g.output);
            set.extend(g.inputs.iter().map(String::as_str));
        }
        let mut v: Vec<String> = set.into_iter().map(str::to_string).collect();
        v.sort();
        v
    }

    /// Replaces every C-element with an AO222 majority gate whose output
    /// feeds back as its own third operand (`Z = XY + XZ + YZ`). C3 gates
    /// are left alone. The result contains combinational loops and is
    /// rejected by [`validate`]; it is only useful for simulation.
    pub fn expand_c2_feedback(&self) -> Netlist {
        let mut out = self.clone();
        for gate in out.gates.values_mut() {
            if gate.kind == GateKind::C2 {
                let (x, y, z) = (gate.inputs[0].clone(), gate.inputs[1].clone(), gate.output.clone());
                gate.kind = GateKind::Ao222;
                gate.inputs = vec![x.clone(), y.clone(), x, z.clone(), y, z];
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    SingleDriver,
    Arity,
    Undriven,
    PortMap,
    CombinationalCycle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    /// Offending net, gate id or port name.
    pub subject: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule, subject: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule && v.subject == subject)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{:?} `{}`: {}", v.rule, v.subject, v.detail)?;
        }
        Ok(())
    }
}

pub fn validate(n: &Netlist) -> ValidationReport {
    let mut violations = Vec::new();

    let mut drivers: HashMap<&str, Vec<String>> = HashMap::new();
    for i in &n.inputs {
        drivers.entry(i).or_default().push("<input>".to_string());
    }
    for g in n.gates.values() {
        drivers.entry(&g.output).or_default().push(g.id.clone());
        if g.inputs.len() != g.kind.arity() {
            violations.push(Violation {
                rule: Rule::Arity,
                subject: g.id.clone(),
                detail: format!("{} expects {} inputs, got {}", g.kind, g.kind.arity(), g.inputs.len()),
            });
        }
    }
    let mut multi: Vec<_> = drivers.iter().filter(|(_, d)| d.len() > 1).collect();
    multi.sort();
    for (net, d) in multi {
        violations.push(Violation {
            rule: Rule::SingleDriver,
            subject: net.to_string(),
            detail: format!("driven by {}", d.join(", ")),
        });
    }

    let mut undriven: Vec<&str> = Vec::new();
    let used = n.gates.values().flat_map(|g| g.inputs.iter()).chain(n.outputs.iter());
    for net in used {
        if !drivers.contains_key(net.as_str()) && !undriven.contains(&net.as_str()) {
            undriven.push(net);
        }
    }
    undriven.sort();
    for net in undriven {
        violations.push(Violation {
            rule: Rule::Undriven,
            subject: net.to_string(),
            detail: "net is read but never driven".to_string(),
        });
    }

    let known: HashSet<String> = n.nets().into_iter().collect();
    for (port, pair) in &n.ports {
        let detail = if pair.rail1 == pair.rail0 {
            Some("rails name the same net".to_string())
        } else if !known.contains(&pair.rail1) || !known.contains(&pair.rail0) {
            Some("rail names a net absent from the netlist".to_string())
        } else {
            None
        };
        if let Some(detail) = detail {
            violations.push(Violation { rule: Rule::PortMap, subject: port.clone(), detail });
        }
    }

    if let Some(net) = find_combinational_cycle(n) {
        violations.push(Violation {
            rule: Rule::CombinationalCycle,
            subject: net,
            detail: "cycle through non-C-element gates".to_string(),
        });
    }

    ValidationReport { violations }
}

/// Returns a net on a cycle formed only by combinational gates, if any.
fn find_combinational_cycle(n: &Netlist) -> Option<String> {
    let mut succ: HashMap<&str, Vec<&str>> = HashMap::new();
    for g in n.gates.values().filter(|g| !g.kind.is_c_element()) {
        for i in &g.inputs {
            succ.entry(i).or_default().push(&g.output);
        }
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color: HashMap<&str, u8> = HashMap::new();
    let mut roots: Vec<&str> = succ.keys().copied().collect();
    roots.sort();
    for root in roots {
        if color.get(root).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack: Vec<(&str, usize)> = vec![(root, 0)];
        color.insert(root, 1);
        while let Some((node, idx)) = stack.last_mut() {
            let next = succ.get(*node).and_then(|s| s.get(*idx)).copied();
            *idx += 1;
            match next {
                Some(m) => match color.get(m).copied().unwrap_or(0) {
                    0 => {
                        color.insert(m, 1);
                        stack.push((m, 0));
                    }
                    1 => return Some(m.to_string()),
                    _ => {}
                },
                None => {
                    color.insert(node, 2);
                    stack.pop();
                }
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error(transparent)]
    UnknownKind(#[from] UnknownKind),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

pub fn parse_netlist(text: &str) -> Result<Netlist, ParseError> {
    let mut n = Netlist::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |kind: ParseErrorKind| ParseError { line, kind };
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_ascii_whitespace().collect();
        let Some((&head, rest)) = toks.split_first() else {
            continue;
        };
        let syntax = |msg: &str| err(ParseErrorKind::Syntax(msg.to_string()));
        match head {
            "input" | "output" => {
                let [net] = rest else {
                    return Err(syntax(&format!("`{head}` takes exactly one net")));
                };
                let r = if head == "input" { n.add_input(*net) } else { n.add_output(*net) };
                r.map_err(|e| err(e.into()))?;
            }
            "gate" => {
                if rest.len() < 4 {
                    return Err(syntax("`gate` needs an id, a kind, inputs and an output"));
                }
                let kind: GateKind = rest[1].parse().map_err(|e: UnknownKind| err(e.into()))?;
                let (output, ins) = rest[2..].split_last().expect("len checked");
                n.add_gate(rest[0], kind, ins, *output).map_err(|e| err(e.into()))?;
            }
            "pair" => {
                let [port, r1, r0] = rest else {
                    return Err(syntax("`pair` takes a port and two rails"));
                };
                n.add_pair(*port, RailPair::new(*r1, *r0)).map_err(|e| err(e.into()))?;
            }
            other => return Err(syntax(&format!("unknown directive `{other}`"))),
        }
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("refusing to serialize an invalid netlist:\n{0}")]
pub struct SerializeError(pub ValidationReport);

pub fn serialize_netlist(n: &Netlist) -> Result<String, SerializeError> {
    let report = validate(n);
    if !report.is_empty() {
        return Err(SerializeError(report));
    }
    let mut out = String::new();
    for i in &n.inputs {
        writeln!(out, "input {i}").unwrap();
    }
    for o in &n.outputs {
        writeln!(out, "output {o}").unwrap();
    }
    for g in n.gates.values() {
        write!(out, "gate {} {}", g.id, g.kind).unwrap();
        for i in &g.inputs {
            write!(out, " {i}").unwrap();
        }
        writeln!(out, " {}", g.output).unwrap();
    }
    for (port, pair) in &n.ports {
        writeln!(out, "pair {port} {} {}", pair.rail1, pair.rail0).unwrap();
    }
    Ok(out)
}

/// Gate counts by kind.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Census {
    pub by_kind: BTreeMap<GateKind, usize>,
    pub total: usize,
    pub complex: usize,
}

impl Census {
    pub fn count(&self, kind: GateKind) -> usize {
        self.by_kind.get(&kind).copied().unwrap_or(0)
    }
}

pub fn gate_census(n: &Netlist) -> Census {
    let mut c = Census::default();
    for g in n.gates.values() {
        *c.by_kind.entry(g.kind).or_default() += 1;
        c.total += 1;
        if g.kind.is_complex() {
            c.complex += 1;
        }
    }
    c
}
