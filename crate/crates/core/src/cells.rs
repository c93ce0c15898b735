//! Gate evaluation semantics and propagation-delay tables.
//!
//! Delays are integer time units (tu). Four of them (C2, OR2, AO21, AO22)
//! are not free parameters: they are the unique solution of the linear
//! identities between the symbolic cycle-time models and their reference
//! numeric instantiations, see [`derive_pinned_delays`].

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::netlist::{GateKind, UnknownKind};

/// Evaluates one gate. Combinational kinds ignore `previous`; C-elements
/// switch only when all inputs agree and hold otherwise.
pub fn eval_gate(kind: GateKind, inputs: &[bool], previous: bool) -> bool {
    assert_eq!(inputs.len(), kind.arity(), "{kind} evaluated with {} inputs", inputs.len());
    match kind {
        GateKind::Inv => !inputs[0],
        GateKind::And2 => inputs[0] && inputs[1],
        GateKind::Or2 => inputs[0] || inputs[1],
        GateKind::Ao21 => (inputs[0] && inputs[1]) || inputs[2],
        GateKind::Ao22 => (inputs[0] && inputs[1]) || (inputs[2] && inputs[3]),
        GateKind::Ao222 => (inputs[0] && inputs[1]) || (inputs[2] && inputs[3]) || (inputs[4] && inputs[5]),
        GateKind::C2 | GateKind::C3 => {
            if inputs.iter().all(|&b| b) {
                true
            } else if inputs.iter().all(|&b| !b) {
                false
            } else {
                previous
            }
        }
    }
}

/// Propagation delay per gate kind, in tu. Every kind has an entry >= 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DelayTable {
    delays: [u64; 8],
}

fn slot(kind: GateKind) -> usize {
    GateKind::ALL.iter().position(|k| *k == kind).expect("kind listed in ALL")
}

impl DelayTable {
    pub fn get(&self, kind: GateKind) -> u64 {
        self.delays[slot(kind)]
    }

    pub fn set(&mut self, kind: GateKind, delay: u64) -> Result<(), DelayError> {
        if delay == 0 {
            return Err(DelayError::NonPositive { kind, line: 0 });
        }
        self.delays[slot(kind)] = delay;
        Ok(())
    }

    /// Returns a copy with one entry replaced.
    pub fn with(mut self, kind: GateKind, delay: u64) -> Self {
        self.set(kind, delay).expect("positive delay");
        self
    }

    pub fn ce2(&self) -> u64 {
        self.get(GateKind::C2)
    }

    pub fn or2(&self) -> u64 {
        self.get(GateKind::Or2)
    }

    pub fn ao21(&self) -> u64 {
        self.get(GateKind::Ao21)
    }

    pub fn ao22(&self) -> u64 {
        self.get(GateKind::Ao22)
    }

    pub fn max_delay(&self) -> u64 {
        self.delays.iter().copied().max().unwrap_or(1)
    }

    /// `<KIND> <delay>` lines in kind order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in GateKind::ALL {
            writeln!(s, "{k} {}", self.get(k)).unwrap();
        }
        s
    }
}

impl Default for DelayTable {
    fn default() -> Self {
        default_delay_table()
    }
}

impl fmt::Display for DelayTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// The four delays fixed by the reference cycle-time identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PinnedDelays {
    pub ce2: u64,
    pub or2: u64,
    pub ao21: u64,
    pub ao22: u64,
}

/// A cycle-time model linear in the chain length `m`:
/// `sum(constant[i] * T_i) + m * sum(per_m[i] * T_i)` over
/// `T = (T_CE2, T_OR2, T_AO21, T_AO22)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymbolicCycle {
    pub constant: [i64; 4],
    pub per_m: [i64; 4],
}

impl SymbolicCycle {
    /// `6 T_CE2 + 4 T_OR2 + (m + 2) T_AO21`
    pub const LOCAL: Self = Self { constant: [6, 4, 2, 0], per_m: [0, 0, 1, 0] };
    /// `11 T_CE2 + 2 T_OR2 + (m + 2) T_AO22`
    pub const GLOBAL: Self = Self { constant: [11, 2, 0, 2], per_m: [0, 0, 0, 1] };

    pub fn eval(&self, d: &PinnedDelays, m: i64) -> i64 {
        let t = [d.ce2 as i64, d.or2 as i64, d.ao21 as i64, d.ao22 as i64];
        let dot = |c: &[i64; 4]| c.iter().zip(&t).map(|(a, b)| a * b).sum::<i64>();
        dot(&self.constant) + m * dot(&self.per_m)
    }
}

/// A reference numeric cycle time `slope * m + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NumericCycle {
    pub slope: i64,
    pub intercept: i64,
}

/// `63m + 1002`
pub const LOCAL_NUMERIC: NumericCycle = NumericCycle { slope: 63, intercept: 1002 };
/// `72m + 1430`
pub const GLOBAL_NUMERIC: NumericCycle = NumericCycle { slope: 72, intercept: 1430 };

fn det(m: &[[i64; 4]; 4]) -> i64 {
    fn minor(m: &[[i64; 4]; 4], col: usize) -> [[i64; 3]; 3] {
        let mut out = [[0; 3]; 3];
        for r in 1..4 {
            let kept = m[r].iter().enumerate().filter(|&(c, _)| c != col).map(|(_, v)| *v);
            for (slot, v) in out[r - 1].iter_mut().zip(kept) {
                *slot = v;
            }
        }
        out
    }
    fn det3(a: &[[i64; 3]; 3]) -> i64 {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }
    (0..4)
        .map(|c| {
            let sign = if c % 2 == 0 { 1 } else { -1 };
            sign * m[0][c] * det3(&minor(m, c))
        })
        .sum()
}

/// Matches the `m` coefficient and the constant of each symbolic model
/// against its numeric form and solves the resulting exactly-determined
/// 4x4 integer system by Cramer's rule.
pub fn solve_pinned(models: [(SymbolicCycle, NumericCycle); 2]) -> Option<PinnedDelays> {
    let mut a = [[0i64; 4]; 4];
    let mut rhs = [0i64; 4];
    for (k, (sym, num)) in models.iter().enumerate() {
        a[2 * k] = sym.per_m;
        rhs[2 * k] = num.slope;
        a[2 * k + 1] = sym.constant;
        rhs[2 * k + 1] = num.intercept;
    }
    let d = det(&a);
    if d == 0 {
        return None;
    }
    let mut x = [0u64; 4];
    for (col, xi) in x.iter_mut().enumerate() {
        let mut ai = a;
        for r in 0..4 {
            ai[r][col] = rhs[r];
        }
        let n = det(&ai);
        if n % d != 0 || n / d <= 0 {
            return None;
        }
        *xi = (n / d) as u64;
    }
    Some(PinnedDelays { ce2: x[0], or2: x[1], ao21: x[2], ao22: x[3] })
}

pub fn derive_pinned_delays() -> PinnedDelays {
    solve_pinned([(SymbolicCycle::LOCAL, LOCAL_NUMERIC), (SymbolicCycle::GLOBAL, GLOBAL_NUMERIC)])
        .expect("reference identities have a unique positive integer solution")
}

pub const DEFAULT_INV: u64 = 30;
pub const DEFAULT_AND2: u64 = 60;
pub const DEFAULT_AO222: u64 = 80;
pub const DEFAULT_C3: u64 = 150;

/// Derived delays for C2/OR2/AO21/AO22, configurable defaults for the rest.
pub fn default_delay_table() -> DelayTable {
    let p = derive_pinned_delays();
    let mut delays = [0u64; 8];
    for k in GateKind::ALL {
        delays[slot(k)] = match k {
            GateKind::C2 => p.ce2,
            GateKind::Or2 => p.or2,
            GateKind::Ao21 => p.ao21,
            GateKind::Ao22 => p.ao22,
            GateKind::Inv => DEFAULT_INV,
            GateKind::And2 => DEFAULT_AND2,
            GateKind::Ao222 => DEFAULT_AO222,
            GateKind::C3 => DEFAULT_C3,
        };
    }
    DelayTable { delays }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DelayError {
    #[error("line {line}: {source}")]
    UnknownKind { line: usize, source: UnknownKind },
    #[error("line {line}: delay for {kind} must be a positive integer")]
    NonPositive { kind: GateKind, line: usize },
    #[error("line {line}: expected `<KIND> <positive integer>`")]
    Syntax { line: usize },
}

/// Applies `<KIND> <delay>` overrides on top of [`default_delay_table`].
pub fn load_delay_table(text: &str) -> Result<DelayTable, DelayError> {
    let mut table = default_delay_table();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_ascii_whitespace().collect();
        match toks.as_slice() {
            [] => continue,
            [kind, value] => {
                let kind: GateKind = kind.parse().map_err(|source| DelayError::UnknownKind { line, source })?;
                let delay: i64 = value.parse().map_err(|_| DelayError::Syntax { line })?;
                if delay <= 0 {
                    return Err(DelayError::NonPositive { kind, line });
                }
                table.delays[slot(kind)] = delay as u64;
            }
            _ => return Err(DelayError::Syntax { line }),
        }
    }
    Ok(table)
}
