//! Carry-chain stimuli, closed-form latency models, parametric sweeps and
//! indication classification.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::adders::{AdderVariant, MAX_WIDTH};
use crate::cells::DelayTable;
use crate::netlist::{validate, Netlist};
use crate::sim::{Circuit, NetId, SimError, Simulator, Time};
use crate::stage::{build_stage, Architecture, StageError, StageRunner};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("chain length {m} does not fit in a {n}-bit adder (need m <= n - 2)")]
    Chain { n: usize, m: usize },
    #[error("width {0} outside 2..=63")]
    Width(usize),
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{arch} stage returned {got:#x} for chain m={m}, expected {want:#x}")]
    WrongSum { arch: Architecture, m: usize, got: u64, want: u64 },
    #[error("m={}: simulated/theoretical cycle mismatch (local {}/{}, global {}/{})",
        .0.m, .0.cycle_local_sim, .0.cycle_local_theory, .0.cycle_global_sim, .0.cycle_global_theory)]
    Mismatch(SweepRow),
    #[error("netlist not classifiable: {0}")]
    Unclassifiable(String),
}

/// Stimulus that drives a single carry through `m + 1` propagate positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainSpec {
    pub n: usize,
    pub m: usize,
}

/// Operands `(a, b, cin)` for a chain of length `m` in an `n`-bit adder.
///
/// The carry enters at bit 0 with `cin = 1`, bits `0..=m` propagate and
/// bit `m + 1` kills it, so the last sum bit to settle is `S[m+1]`. Every
/// higher bit is a kill position.
pub fn gen_carry_chain_vector(chain: ChainSpec) -> Result<(u64, u64, bool), AnalysisError> {
    let ChainSpec { n, m } = chain;
    if !(2..=MAX_WIDTH).contains(&n) {
        return Err(AnalysisError::Width(n));
    }
    if m + 2 > n {
        return Err(AnalysisError::Chain { n, m });
    }
    Ok(((1u64 << (m + 1)) - 1, 0, true))
}

/// Forward latency, reverse latency and their sum, in time units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Latencies {
    pub forward: Time,
    pub reverse: Time,
}

impl Latencies {
    pub fn cycle(&self) -> Time {
        self.forward + self.reverse
    }
}

/// LOCAL stage with the latency-optimised biased adder. The reverse figure
/// holds for m >= 3; shorter chains return to zero faster.
pub fn theory_local(m: usize, d: &DelayTable) -> Latencies {
    let base = 3 * d.ce2() + 2 * d.or2();
    Latencies { forward: base + (m as u64 + 1) * d.ao21(), reverse: base + d.ao21() }
}

/// Depth of the C-element tree that joins `2n + 1` OR-reduced pairs.
pub fn cd_depth(n: usize) -> u64 {
    let leaves = 2 * n + 1;
    (usize::BITS - (leaves - 1).leading_zeros()) as u64
}

/// Closed-form terms of the GLOBAL stage with the early-output adder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlobalTerms {
    /// Data-path forward latency.
    pub data_forward: Time,
    /// Data-path reverse latency.
    pub data_reverse: Time,
    /// Register, detector and synchronizer path.
    pub sync: Time,
}

pub fn global_terms(m: usize, n: usize, d: &DelayTable) -> GlobalTerms {
    let base = 2 * d.ce2() + d.or2();
    GlobalTerms {
        data_forward: base + (m as u64 + 2) * d.ao22(),
        data_reverse: base + 2 * d.ao22(),
        sync: base + cd_depth(n) * d.ce2(),
    }
}

pub fn theory_global(m: usize, n: usize, d: &DelayTable) -> Latencies {
    let t = global_terms(m, n, d);
    Latencies { forward: t.data_forward.max(t.sync), reverse: t.data_reverse.max(t.sync) }
}

/// Largest chain length whose data path is still hidden behind the
/// synchronizer, or -1 if even `m = 0` is not.
pub fn crossover_m(n: usize, d: &DelayTable) -> i64 {
    let t = global_terms(0, n, d);
    if t.data_forward > t.sync {
        return -1;
    }
    let slack = t.sync - (2 * d.ce2() + d.or2());
    (slack / d.ao22()) as i64 - 2
}

/// Simulates one transaction of the canonical chain vector.
pub fn measure(
    arch: Architecture,
    variant: AdderVariant,
    chain: ChainSpec,
    delays: &DelayTable,
) -> Result<Latencies, AnalysisError> {
    let stage = build_stage(arch, variant, chain.n, true)?;
    let circuit = Circuit::compile(&stage.netlist, delays)?;
    let mut runner = StageRunner::new(&stage, &circuit)?;
    measure_with(&mut runner, arch, chain).map(|(fwd, _)| fwd)
}

/// Returns forwarded and data-path latencies.
fn measure_with(
    runner: &mut StageRunner<'_>,
    arch: Architecture,
    chain: ChainSpec,
) -> Result<(Latencies, Latencies), AnalysisError> {
    let (a, b, cin) = gen_carry_chain_vector(chain)?;
    let rec = runner.transaction(a, b, cin)?;
    let want = a + b + cin as u64;
    if rec.result != want {
        return Err(AnalysisError::WrongSum { arch, m: chain.m, got: rec.result, want });
    }
    Ok((
        Latencies { forward: rec.forward_latency, reverse: rec.reverse_latency },
        Latencies { forward: rec.data_forward_latency, reverse: rec.data_reverse_latency },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub m: usize,
    pub cycle_local_sim: Time,
    pub cycle_local_theory: Time,
    pub cycle_global_sim: Time,
    pub cycle_global_theory: Time,
}

impl SweepRow {
    /// Cycle-time saving of LOCAL relative to GLOBAL, in percent.
    pub fn reduction_pct(&self) -> f64 {
        let g = self.cycle_global_sim as f64;
        100.0 * (g - self.cycle_local_sim as f64) / g
    }

    pub fn matches(&self) -> bool {
        self.cycle_local_sim == self.cycle_local_theory && self.cycle_global_sim == self.cycle_global_theory
    }
}

pub const SWEEP_CSV_HEADER: &str =
    "m,cycle_local_sim,cycle_local_theory,cycle_global_sim,cycle_global_theory,reduction_pct";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub n: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn average_reduction(&self) -> Option<f64> {
        if self.rows.is_empty() {
            return None;
        }
        Some(self.rows.iter().map(SweepRow::reduction_pct).sum::<f64>() / self.rows.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{:.2}\n",
                r.m,
                r.cycle_local_sim,
                r.cycle_local_theory,
                r.cycle_global_sim,
                r.cycle_global_theory,
                r.reduction_pct()
            ));
        }
        if let Some(avg) = self.average_reduction() {
            out.push_str(&format!("average,,,,,{avg:.2}\n"));
        }
        out
    }
}

/// Measures both architectures over `ms` and compares each cycle time with
/// its closed form. Rows come back in the order of `ms`; the first row that
/// disagrees with theory aborts the sweep.
pub fn sweep(n: usize, ms: &[usize], delays: &DelayTable) -> Result<SweepReport, AnalysisError> {
    let rows = sweep_unchecked(n, ms, delays)?;
    if let Some(bad) = rows.iter().find(|r| !r.matches()) {
        return Err(AnalysisError::Mismatch(*bad));
    }
    Ok(SweepReport { n, rows })
}

/// Same as [`sweep`] but returns mismatching rows instead of failing.
pub fn sweep_unchecked(n: usize, ms: &[usize], delays: &DelayTable) -> Result<Vec<SweepRow>, AnalysisError> {
    if let Some(&m) = ms.iter().find(|&&m| m + 2 > n) {
        return Err(AnalysisError::Chain { n, m });
    }
    let local = build_stage(Architecture::Local, Architecture::Local.default_variant(), n, false)?;
    let global = build_stage(Architecture::Global, Architecture::Global.default_variant(), n, false)?;
    let local_c = Circuit::compile(&local.netlist, delays)?;
    let global_c = Circuit::compile(&global.netlist, delays)?;
    ms.par_iter()
        .map(|&m| {
            let chain = ChainSpec { n, m };
            let mut lr = StageRunner::new(&local, &local_c)?;
            let mut gr = StageRunner::new(&global, &global_c)?;
            let (l, _) = measure_with(&mut lr, Architecture::Local, chain)?;
            let (g, _) = measure_with(&mut gr, Architecture::Global, chain)?;
            Ok(SweepRow {
                m,
                cycle_local_sim: l.cycle(),
                cycle_local_theory: theory_local(m, delays).cycle(),
                cycle_global_sim: g.cycle(),
                cycle_global_theory: theory_global(m, n, delays).cycle(),
            })
        })
        .collect()
}

/// How an adder's outputs acknowledge its inputs within one phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndicationClass {
    /// No output moves until every input has arrived.
    Strong,
    /// Some outputs may move early, but at least one waits for all inputs.
    Weak,
    /// All outputs can complete before every input has arrived.
    Early,
}

impl IndicationClass {
    pub fn name(self) -> &'static str {
        match self {
            IndicationClass::Strong => "STRONG",
            IndicationClass::Weak => "WEAK",
            IndicationClass::Early => "EARLY",
        }
    }
}

impl fmt::Display for IndicationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Indication {
    pub set: IndicationClass,
    pub rtz: IndicationClass,
}

impl fmt::Display for Indication {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "set={} rtz={}", self.set, self.rtz)
    }
}

/// What each full-adder template is designed to exhibit.
pub fn expected_indication(variant: AdderVariant) -> Indication {
    use IndicationClass::*;
    match variant {
        AdderVariant::DimsStrong => Indication { set: Strong, rtz: Strong },
        AdderVariant::EarlyOutput => Indication { set: Weak, rtz: Early },
        _ => Indication { set: Weak, rtz: Weak },
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(k - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out
}

/// Classifies a combinational dual-rail block by applying every codeword
/// with its input pairs arriving one at a time, in every order, letting the
/// circuit settle after each arrival. The return to zero is exercised the
/// same way from each settled codeword.
///
/// Input ports are the pairs whose rails are both primary inputs; every
/// primary input must belong to one. Output ports are pairs of primary
/// outputs. At most six input pairs are accepted.
pub fn classify_indication(netlist: &Netlist, delays: &DelayTable) -> Result<Indication, AnalysisError> {
    let report = validate(netlist);
    if !report.is_empty() {
        return Err(AnalysisError::Unclassifiable(report.to_string()));
    }
    let circuit = Circuit::compile(netlist, delays)?;
    let is_out = |net: &str| netlist.outputs().iter().any(|o| o == net);
    let mut ins = Vec::new();
    let mut outs = Vec::new();
    for (name, r1, r0) in circuit.ports() {
        if circuit.is_input(*r1) && circuit.is_input(*r0) {
            ins.push((*r1, *r0));
        } else if is_out(circuit.name(*r1)) && is_out(circuit.name(*r0)) {
            outs.push((*r1, *r0));
        } else if circuit.is_input(*r1) || circuit.is_input(*r0) {
            return Err(AnalysisError::Unclassifiable(format!("port {name} mixes inputs and internal nets")));
        }
    }
    let covered = ins.len() * 2;
    let primary = netlist.inputs().len();
    if covered != primary {
        return Err(AnalysisError::Unclassifiable(format!(
            "{} primary inputs are not part of an input pair",
            primary - covered
        )));
    }
    if ins.is_empty() || ins.len() > 6 || outs.is_empty() {
        return Err(AnalysisError::Unclassifiable(format!("{} input pairs, {} output pairs", ins.len(), outs.len())));
    }
    let out_rails: Vec<NetId> = outs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let orders = permutations(ins.len());
    let mut set = Observed::default();
    let mut rtz = Observed::default();
    for code in 0..1u64 << ins.len() {
        // Rail that goes high for each input pair under this codeword.
        let active: Vec<NetId> =
            ins.iter().enumerate().map(|(i, &(r1, r0))| if code >> i & 1 == 1 { r1 } else { r0 }).collect();
        for order in &orders {
            let mut sim = Simulator::new(&circuit);
            sim.run_until_quiescent()?;
            observe(&mut sim, order, &active, true, &outs, &out_rails, &mut set)?;
            observe(&mut sim, order, &active, false, &outs, &out_rails, &mut rtz)?;
        }
    }
    Ok(Indication { set: set.class(), rtz: rtz.class() })
}

#[derive(Default)]
struct Observed {
    moved_early: bool,
    completed_early: bool,
}

impl Observed {
    fn class(&self) -> IndicationClass {
        if self.completed_early {
            IndicationClass::Early
        } else if self.moved_early {
            IndicationClass::Weak
        } else {
            IndicationClass::Strong
        }
    }
}

fn observe(
    sim: &mut Simulator<'_>,
    order: &[usize],
    active: &[NetId],
    value: bool,
    outs: &[(NetId, NetId)],
    out_rails: &[NetId],
    seen: &mut Observed,
) -> Result<(), AnalysisError> {
    for (step, &i) in order.iter().enumerate() {
        let t = sim.now();
        sim.apply_inputs(&[(active[i], value)], t)?;
        let settled = sim.run_until_quiescent()?;
        if step + 1 == order.len() {
            break;
        }
        if settled.trace.last_time_on(out_rails).is_some() {
            seen.moved_early = true;
        }
        let done = outs.iter().all(|&p| {
            let v = sim.pair_value(p);
            if value {
                v.is_valid()
            } else {
                v.is_spacer()
            }
        });
        if done {
            seen.completed_early = true;
        }
    }
    Ok(())
}

/// How a latency responds to a growing carry chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Growth {
    Constant,
    Increasing,
    Irregular,
}

impl fmt::Display for Growth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Growth::Constant => "constant",
            Growth::Increasing => "increasing",
            Growth::Irregular => "irregular",
        })
    }
}

fn growth(values: &[Time]) -> Growth {
    if values.windows(2).all(|w| w[0] == w[1]) {
        Growth::Constant
    } else if values.windows(2).all(|w| w[0] < w[1]) {
        Growth::Increasing
    } else {
        Growth::Irregular
    }
}

/// Least-squares slope of `values` against `ms`.
fn slope(ms: &[usize], values: &[Time]) -> f64 {
    let k = ms.len() as f64;
    let mx = ms.iter().sum::<usize>() as f64 / k;
    let my = values.iter().sum::<Time>() as f64 / k;
    let (mut num, mut den) = (0.0, 0.0);
    for (&m, &v) in ms.iter().zip(values) {
        num += (m as f64 - mx) * (v as f64 - my);
        den += (m as f64 - mx).powi(2);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Chain lengths used by [`asymptotic_check`].
pub const ASYMPTOTIC_MS: [usize; 4] = [4, 12, 20, 28];

/// Data-path behaviour of one adder over chain lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticReport {
    pub variant: AdderVariant,
    pub architecture: Architecture,
    pub ms: Vec<usize>,
    pub forward: Vec<Time>,
    pub reverse: Vec<Time>,
    pub forward_slope: f64,
    pub reverse_slope: f64,
    pub forward_growth: Growth,
    pub reverse_growth: Growth,
    pub expected: (Growth, Growth),
}

impl AsymptoticReport {
    pub fn conforms(&self) -> bool {
        (self.forward_growth, self.reverse_growth) == self.expected
    }
}

/// Expected `(forward, reverse)` growth of the raw adder outputs.
pub fn expected_growth(variant: AdderVariant) -> (Growth, Growth) {
    match variant {
        AdderVariant::DimsStrong => (Growth::Constant, Growth::Constant),
        AdderVariant::DimsWeak => (Growth::Increasing, Growth::Increasing),
        _ => (Growth::Increasing, Growth::Constant),
    }
}

/// Measures the adder's own output latencies for each chain length in `ms`
/// inside a stage of width `n`. The early-output adder runs in a GLOBAL
/// stage, everything else in a LOCAL one.
pub fn asymptotic_check(
    variant: AdderVariant,
    n: usize,
    ms: &[usize],
    delays: &DelayTable,
) -> Result<AsymptoticReport, AnalysisError> {
    let arch = if variant == AdderVariant::EarlyOutput { Architecture::Global } else { Architecture::Local };
    let stage = build_stage(arch, variant, n, false)?;
    let circuit = Circuit::compile(&stage.netlist, delays)?;
    let mut runner = StageRunner::new(&stage, &circuit)?;
    let (mut forward, mut reverse) = (Vec::new(), Vec::new());
    for &m in ms {
        let (_, data) = measure_with(&mut runner, arch, ChainSpec { n, m })?;
        forward.push(data.forward);
        reverse.push(data.reverse);
    }
    Ok(AsymptoticReport {
        variant,
        architecture: arch,
        ms: ms.to_vec(),
        forward_slope: slope(ms, &forward),
        reverse_slope: slope(ms, &reverse),
        forward_growth: growth(&forward),
        reverse_growth: growth(&reverse),
        forward,
        reverse,
        expected: expected_growth(variant),
    })
}

/// Inclusive range of chain lengths written `a:b` or `a:b:step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MRange {
    pub start: usize,
    pub end: usize,
    pub step: usize,
}

impl MRange {
    pub fn values(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step).collect()
    }
}

impl Default for MRange {
    fn default() -> Self {
        MRange { start: 4, end: 28, step: 1 }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("bad m range {0:?}: expected a:b or a:b:step with a <= b and step > 0")]
pub struct BadRange(pub String);

impl FromStr for MRange {
    type Err = BadRange;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BadRange(s.to_string());
        let parts: Vec<usize> = s.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        let r = match parts[..] {
            [start, end] => MRange { start, end, step: 1 },
            [start, end, step] => MRange { start, end, step },
            _ => return Err(bad()),
        };
        if r.start > r.end || r.step == 0 {
            return Err(bad());
        }
        Ok(r)
    }
}
