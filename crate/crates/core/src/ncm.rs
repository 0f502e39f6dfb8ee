//! Counter machines and their reduction to branching bisimilarity of
//! ε-pushing systems: the three-counter lift, the generated system, and
//! harnesses that check the gadgets on small counter values.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::equivalence::{branching_partition, EquivError};
use crate::game::{Config, Game, GameError, GameOptions, PlayOutcome, ScriptMove, Side, StutterCap, Strategy};
use crate::lts::{reachable_lts, Explore, Outcome};
use crate::system::{Label, PdaSystem, Pruner, SystemBuilder, SystemError};
use crate::term::{Constant, Process, StateId, SymbolId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Instr {
    Inc { counter: u8, goto: usize },
    /// `if c = 0 then goto zero; otherwise c := c - 1 and goto dec`.
    ZeroDec { counter: u8, zero: usize, dec: usize },
    Branch { first: usize, second: usize },
    /// `c := *` and then goto; only in lifted machines.
    Star { counter: u8, goto: usize },
    Halt,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MachineError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("instruction {0}: target out of range")]
    Target(usize),
    #[error("instruction {0}: counter out of range")]
    Counter(usize),
    #[error("the last instruction must be the only halt")]
    Halt,
    #[error("instruction {0}: nondeterministic assignment in a source machine")]
    Star(usize),
    #[error("the machine is empty")]
    Empty,
}

/// A program `1: I1; …; n: halt`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CounterMachine {
    instrs: Vec<Instr>,
}

impl CounterMachine {
    /// Checks targets, counters (at most `counters` of them) and the halt.
    pub fn new(instrs: Vec<Instr>, counters: u8) -> Result<Self, MachineError> {
        let n = instrs.len();
        if n == 0 {
            return Err(MachineError::Empty);
        }
        for (k, ins) in instrs.iter().enumerate() {
            let i = k + 1;
            let ok = |t: usize| (1..=n).contains(&t);
            let (targets, counter): (Vec<usize>, Option<u8>) = match *ins {
                Instr::Inc { counter, goto } | Instr::Star { counter, goto } => (vec![goto], Some(counter)),
                Instr::ZeroDec { counter, zero, dec } => (vec![zero, dec], Some(counter)),
                Instr::Branch { first, second } => (vec![first, second], None),
                Instr::Halt => (Vec::new(), None),
            };
            if !targets.into_iter().all(ok) {
                return Err(MachineError::Target(i));
            }
            if counter.is_some_and(|c| c == 0 || c > counters) {
                return Err(MachineError::Counter(i));
            }
            if (*ins == Instr::Halt) != (i == n) {
                return Err(MachineError::Halt);
            }
        }
        Ok(CounterMachine { instrs })
    }

    /// A two-counter source machine.
    pub fn source(instrs: Vec<Instr>) -> Result<Self, MachineError> {
        if let Some(k) = instrs.iter().position(|i| matches!(i, Instr::Star { .. })) {
            return Err(MachineError::Star(k + 1));
        }
        Self::new(instrs, 2)
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    /// Instruction `i`, 1-based.
    pub fn instr(&self, i: usize) -> Instr {
        self.instrs[i - 1]
    }

    pub fn instrs(&self) -> &[Instr] {
        &self.instrs
    }

    /// Parses `i: inc cE goto j`, `i: ifz cE goto j else dec goto k`,
    /// `i: goto j or goto k`, `i: star cE goto j` and `i: halt`, one per
    /// line in label order; `#` starts a comment. At most three counters.
    pub fn parse(src: &str) -> Result<Self, MachineError> {
        let mut instrs = Vec::new();
        for (k, raw) in src.lines().enumerate() {
            let line = k + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let err = |msg: &str| MachineError::Syntax {
                line,
                msg: msg.to_string(),
            };
            let (label, body) = text.split_once(':').ok_or_else(|| err("expected `label:`"))?;
            let label: usize = label.trim().parse().map_err(|_| err("bad label"))?;
            if label != instrs.len() + 1 {
                return Err(err("labels must be 1, 2, 3, … in order"));
            }
            let w: Vec<&str> = body.split_whitespace().collect();
            let num = |s: &str| s.parse::<usize>().map_err(|_| err(&format!("bad target `{s}`")));
            let counter = |s: &str| match s {
                "c1" => Ok(1u8),
                "c2" => Ok(2),
                "c3" => Ok(3),
                _ => Err(err(&format!("bad counter `{s}`"))),
            };
            let ins = match w.as_slice() {
                ["inc", c, "goto", j] => Instr::Inc {
                    counter: counter(c)?,
                    goto: num(j)?,
                },
                ["ifz", c, "goto", j, "else", "dec", "goto", k] => Instr::ZeroDec {
                    counter: counter(c)?,
                    zero: num(j)?,
                    dec: num(k)?,
                },
                ["goto", j, "or", "goto", k] => Instr::Branch {
                    first: num(j)?,
                    second: num(k)?,
                },
                ["star", c, "goto", j] => Instr::Star {
                    counter: counter(c)?,
                    goto: num(j)?,
                },
                ["halt"] => Instr::Halt,
                _ => return Err(err("unrecognised instruction")),
            };
            instrs.push(ins);
        }
        Self::new(instrs, 3)
    }

    /// `M'`: instruction 1 becomes `c3 := *` followed by `I1`; every later
    /// instruction `i` is guarded by a decrement of `c3` at `2i - 1` that
    /// jumps to the halt at `2n` when `c3` is zero; `goto j` becomes
    /// `goto 2j - 1`.
    pub fn lift(&self) -> Result<CounterMachine, MachineError> {
        if let Some(k) = self.instrs.iter().position(|i| matches!(i, Instr::Star { .. })) {
            return Err(MachineError::Star(k + 1));
        }
        let n = self.len();
        let g = |j: usize| 2 * j - 1;
        let mut out = Vec::with_capacity(2 * n);
        for (k, ins) in self.instrs.iter().enumerate() {
            let i = k + 1;
            if i == 1 {
                out.push(Instr::Star { counter: 3, goto: 2 });
            } else {
                out.push(Instr::ZeroDec {
                    counter: 3,
                    zero: 2 * n,
                    dec: 2 * i,
                });
            }
            out.push(match *ins {
                Instr::Inc { counter, goto } => Instr::Inc { counter, goto: g(goto) },
                Instr::ZeroDec { counter, zero, dec } => Instr::ZeroDec {
                    counter,
                    zero: g(zero),
                    dec: g(dec),
                },
                Instr::Branch { first, second } => Instr::Branch {
                    first: g(first),
                    second: g(second),
                },
                Instr::Star { .. } => unreachable!(),
                Instr::Halt => Instr::Halt,
            });
        }
        CounterMachine::new(out, 3)
    }
}

impl fmt::Display for CounterMachine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, ins) in self.instrs.iter().enumerate() {
            write!(f, "{}: ", k + 1)?;
            match *ins {
                Instr::Inc { counter, goto } => writeln!(f, "inc c{counter} goto {goto}")?,
                Instr::ZeroDec { counter, zero, dec } => writeln!(f, "ifz c{counter} goto {zero} else dec goto {dec}")?,
                Instr::Branch { first, second } => writeln!(f, "goto {first} or goto {second}")?,
                Instr::Star { counter, goto } => writeln!(f, "star c{counter} goto {goto}")?,
                Instr::Halt => writeln!(f, "halt")?,
            }
        }
        Ok(())
    }
}

/// Counter operations of the gadgets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Inc,
    Dec,
    Star,
}

impl Op {
    pub const ALL: [Op; 3] = [Op::Inc, Op::Dec, Op::Star];

    fn sign(self) -> &'static str {
        match self {
            Op::Inc => "+",
            Op::Dec => "-",
            Op::Star => "*",
        }
    }
}

/// The tests of the counter-test rows: `o` in `t(e, o)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Test {
    Op(Op),
    Zero,
    Positive,
}

impl Test {
    fn tag(self) -> &'static str {
        match self {
            Test::Op(o) => o.sign(),
            Test::Zero => "0",
            Test::Positive => "1",
        }
    }
}

pub fn t_state(e: u8, test: Test, primed: bool) -> String {
    format!("t{}<{e},{}>", if primed { "'" } else { "" }, test.tag())
}

fn gadget(name: &str, e: u8, o: Op, j: usize) -> String {
    format!("{name}<{e},{},{j}>", o.sign())
}

pub fn control_state(i: usize, primed: bool) -> String {
    format!("{}<{i}>", if primed { "q" } else { "p" })
}

/// Template rows; the audit counts instantiations per row.
pub const TEMPLATE_ROWS: &[&str] = &[
    "t-pop",
    "t'-pop",
    "t'-reset",
    "t+-below",
    "t+-emit",
    "t+-bottom",
    "t'+-pop",
    "t*-pop",
    "t*-reset",
    "t'*-pop",
    "t'*-reset",
    "t--pop",
    "t'--below",
    "t'--emit",
    "t'--bottom",
    "t0-pass",
    "t0-flag",
    "t'0-pass",
    "t'0-flag",
    "t1-below",
    "t1-hit",
    "t1-above",
    "t1-bottom",
    "t'1-below",
    "t'1-hit",
    "t'1-above",
    "t'1-bottom",
    "bottom-reset",
    "u-a",
    "u-force",
    "u'-force",
    "r'-start",
    "g'-x3",
    "g'-c3",
    "g'-x2",
    "g'-c2",
    "g'-x1",
    "g'-c1",
    "g'-restart",
    "g'-leave",
    "u1-a",
    "u1-test",
    "u1'-a",
    "u1'-test",
    "u2-force",
    "u2'-force",
    "u2'-a",
    "r-start",
    "g-x3",
    "g-c3",
    "g-x2",
    "g-c2",
    "g-x1",
    "g-c1",
    "g-restart",
    "g-leave",
    "u3-a",
    "u3-test",
    "u3'-a",
    "u3'-test",
    "inc",
    "star",
    "branch-p",
    "branch-q",
    "branch-p1",
    "branch-q1",
    "branch-q2",
    "zero-claim",
    "zero-p",
    "zero-q",
    "zero-v",
    "positive-v",
    "halt",
];

/// The generated system with the names the harnesses need.
#[derive(Clone, Debug)]
pub struct ReductionOutput {
    pub machine: CounterMachine,
    pub system: PdaSystem,
    /// `(p1 X ⊥, q1 X ⊥)`.
    pub root: Config,
    /// Rules generated per template row.
    pub template_counts: BTreeMap<&'static str, usize>,
}

struct Gen {
    b: SystemBuilder,
    counts: BTreeMap<&'static str, usize>,
    seen: std::collections::HashSet<(String, String, Option<String>, String, Vec<String>)>,
}

impl Gen {
    fn rule(&mut self, row: &'static str, p: &str, x: &str, l: Option<&str>, q: &str, w: &[&str]) {
        let key = (
            p.to_string(),
            x.to_string(),
            l.map(str::to_string),
            q.to_string(),
            w.iter().map(|s| s.to_string()).collect(),
        );
        if self.seen.insert(key) {
            self.b.rule_named(p, x, l, q, w);
            *self.counts.entry(row).or_default() += 1;
        }
    }
}

const C: [&str; 4] = ["", "C1", "C2", "C3"];
const CA: [&str; 4] = ["", "c1", "c2", "c3"];
const BOT: &str = "Bot";

fn counter_tests(g: &mut Gen) {
    for j in 1..=3 {
        g.rule("t-pop", "t", C[j], Some(CA[j]), "t", &[]);
    }
    g.rule("t'-pop", "t'", "C1", Some("c1"), "t'", &[]);
    g.rule("t'-pop", "t'", "C2", Some("c2"), "t'", &[]);
    g.rule("t'-reset", "t'", "C3", Some("b"), "t", &[BOT]);
    for e in 1..=3u8 {
        let ce = CA[e as usize];
        let (tp, tpp) = (t_state(e, Test::Op(Op::Inc), false), t_state(e, Test::Op(Op::Inc), true));
        let (ts, tsp) = (t_state(e, Test::Op(Op::Star), false), t_state(e, Test::Op(Op::Star), true));
        let (tm, tmp) = (t_state(e, Test::Op(Op::Dec), false), t_state(e, Test::Op(Op::Dec), true));
        let (t0, t0p) = (t_state(e, Test::Zero, false), t_state(e, Test::Zero, true));
        let (t1, t1p) = (t_state(e, Test::Positive, false), t_state(e, Test::Positive, true));
        for j in 1..=3u8 {
            let (cj, aj) = (C[j as usize], CA[j as usize]);
            if j < e {
                g.rule("t+-below", &tp, cj, Some(aj), &tp, &[]);
                g.rule("t'--below", &tmp, cj, Some(aj), &tmp, &[]);
                g.rule("t1-below", &t1, cj, Some(aj), &t1, &[]);
                g.rule("t'1-below", &t1p, cj, Some(aj), &t1p, &[]);
            } else {
                g.rule("t+-emit", &tp, cj, Some(ce), "t", &[cj]);
                g.rule("t'--emit", &tmp, cj, Some(ce), "t", &[cj]);
            }
            if j > e {
                g.rule("t1-above", &t1, cj, Some("f"), "t", &[]);
                g.rule("t'1-above", &t1p, cj, Some("f'"), "t", &[]);
            }
            g.rule("t'+-pop", &tpp, cj, Some(aj), "t", &[]);
            g.rule("t--pop", &tm, cj, Some(aj), "t", &[]);
            if j != e {
                g.rule("t0-pass", &t0, cj, Some(aj), &t0, &[]);
                // Stays primed so that the flag at `Ce` still differs.
                g.rule("t'0-pass", &t0p, cj, Some(aj), &t0p, &[]);
            }
        }
        g.rule("t+-bottom", &tp, BOT, Some(ce), "t", &[BOT]);
        g.rule("t'--bottom", &tmp, BOT, Some(ce), "t", &[BOT]);
        for j in 1..=2 {
            g.rule("t*-pop", &ts, C[j], Some(CA[j]), &ts, &[]);
            g.rule("t'*-pop", &tsp, C[j], Some(CA[j]), &ts, &[]);
        }
        g.rule("t*-reset", &ts, "C3", Some("b"), "t", &[BOT]);
        g.rule("t'*-reset", &tsp, "C3", Some("b"), "t", &[BOT]);
        g.rule("t0-flag", &t0, C[e as usize], Some("f"), &t0, &[]);
        g.rule("t'0-flag", &t0p, C[e as usize], Some("f'"), &t0, &[]);
        g.rule("t1-hit", &t1, C[e as usize], Some(ce), "t", &[]);
        g.rule("t'1-hit", &t1p, C[e as usize], Some(ce), "t", &[]);
        g.rule("t1-bottom", &t1, BOT, Some("f"), "t", &[BOT]);
        g.rule("t'1-bottom", &t1p, BOT, Some("f'"), "t", &[BOT]);
    }
    for p in reset_family() {
        g.rule("bottom-reset", &p, BOT, Some("b"), "t", &[BOT]);
    }
}

/// States with the `⊥`-reset rule `p⊥ -b-> t⊥`.
pub fn reset_family() -> Vec<String> {
    let mut out = vec!["t".to_string(), "t'".to_string()];
    for e in 1..=3 {
        out.push(t_state(e, Test::Op(Op::Inc), true));
        out.push(t_state(e, Test::Op(Op::Dec), false));
        out.push(t_state(e, Test::Op(Op::Star), false));
        out.push(t_state(e, Test::Op(Op::Star), true));
        for test in [Test::Zero, Test::Positive] {
            out.push(t_state(e, test, false));
            out.push(t_state(e, test, true));
        }
    }
    out
}

/// Every state of the counter-test rows.
pub fn test_family() -> Vec<String> {
    let mut out = vec!["t".to_string(), "t'".to_string()];
    for e in 1..=3 {
        for test in [Test::Op(Op::Inc), Test::Op(Op::Dec), Test::Op(Op::Star), Test::Zero, Test::Positive] {
            out.push(t_state(e, test, false));
            out.push(t_state(e, test, true));
        }
    }
    out
}

fn operation(g: &mut Gen, e: u8, o: Op, j: usize) {
    let s = |n: &str| gadget(n, e, o, j);
    let (u, up, u1, u1p, u2, u2p, u3, u3p) = (s("u"), s("u'"), s("u1"), s("u1'"), s("u2"), s("u2'"), s("u3"), s("u3'"));
    g.rule("u-a", &u, "X", Some("a"), &u1, &["X"]);
    g.rule("u-force", &u, "X", None, &s("r'"), &["X"]);
    g.rule("u'-force", &up, "X", None, &s("r'"), &["X"]);
    for (primed, r, gg, leave, row) in [
        (true, s("r'"), s("g'"), u1p.clone(), ["r'-start", "g'-x3", "g'-c3", "g'-x2", "g'-c2", "g'-x1", "g'-c1", "g'-restart", "g'-leave"]),
        (false, s("r"), s("g"), u3.clone(), ["r-start", "g-x3", "g-c3", "g-x2", "g-c2", "g-x1", "g-c1", "g-restart", "g-leave"]),
    ] {
        let _ = primed;
        g.rule(row[0], &r, "X", None, &gg, &["X", BOT]);
        g.rule(row[1], &gg, "X", None, &gg, &["X3"]);
        g.rule(row[2], &gg, "X3", None, &gg, &["X3", "C3"]);
        g.rule(row[3], &gg, "X3", None, &gg, &["X2"]);
        g.rule(row[4], &gg, "X2", None, &gg, &["X2", "C2"]);
        g.rule(row[5], &gg, "X2", None, &gg, &["X1"]);
        g.rule(row[6], &gg, "X1", None, &gg, &["X1", "C1"]);
        g.rule(row[7], &gg, "X1", None, &r, &["X"]);
        g.rule(row[8], &gg, "X1", Some("a"), &leave, &["X"]);
    }
    g.rule("u1-a", &u1, "X", Some("a"), &u2, &["X"]);
    g.rule("u1-test", &u1, "X", Some("c"), &t_state(e, Test::Op(o), false), &[]);
    g.rule("u1'-a", &u1p, "X", Some("a"), &u2p, &["X"]);
    g.rule("u1'-test", &u1p, "X", Some("c"), &t_state(e, Test::Op(o), true), &[]);
    g.rule("u2-force", &u2, "X", None, &s("r"), &["X"]);
    g.rule("u2'-force", &u2p, "X", None, &s("r"), &["X"]);
    g.rule("u2'-a", &u2p, "X", Some("a"), &u3p, &["X"]);
    g.rule("u3-a", &u3, "X", Some("a"), &control_state(j, false), &["X"]);
    g.rule("u3-test", &u3, "X", Some("c"), "t", &[]);
    g.rule("u3'-a", &u3p, "X", Some("a"), &control_state(j, true), &["X"]);
    g.rule("u3'-test", &u3p, "X", Some("c"), "t", &[]);
}

fn control(g: &mut Gen, m: &CounterMachine) {
    let n = m.len();
    for i in 1..=n {
        let (p, q) = (control_state(i, false), control_state(i, true));
        match m.instr(i) {
            Instr::Inc { counter, goto } => {
                g.rule("inc", &p, "X", Some("a"), &gadget("u", counter, Op::Inc, goto), &["X"]);
                g.rule("inc", &q, "X", Some("a"), &gadget("u'", counter, Op::Inc, goto), &["X"]);
            }
            Instr::Star { counter, goto } => {
                g.rule("star", &p, "X", Some("a"), &gadget("u", counter, Op::Star, goto), &["X"]);
                g.rule("star", &q, "X", Some("a"), &gadget("u'", counter, Op::Star, goto), &["X"]);
            }
            Instr::Branch { first: j, second: k } => {
                let (p1, q1, q2) = (format!("p1<{i}>"), format!("q1<{i}>"), format!("q2<{i}>"));
                for t in [&p1, &q1, &q2] {
                    g.rule("branch-p", &p, "X", Some("a"), t, &["X"]);
                }
                for t in [&q1, &q2] {
                    g.rule("branch-q", &q, "X", Some("a"), t, &["X"]);
                }
                g.rule("branch-p1", &p1, "X", Some("a"), &control_state(j, false), &["X"]);
                g.rule("branch-p1", &p1, "X", Some("a"), &control_state(k, false), &["X"]);
                g.rule("branch-q1", &q1, "X", Some("a"), &control_state(j, true), &["X"]);
                g.rule("branch-q1", &q1, "X", Some("a"), &control_state(k, false), &["X"]);
                g.rule("branch-q2", &q2, "X", Some("a"), &control_state(j, false), &["X"]);
                g.rule("branch-q2", &q2, "X", Some("a"), &control_state(k, true), &["X"]);
            }
            Instr::ZeroDec { counter: e, zero: j, dec: k } => {
                let pz = format!("pz<{i},{e},0,{j}>");
                let pp = format!("pz<{i},{e},1,{k}>");
                let qz = format!("qz<{i},{e},0,{j}>");
                let qp = format!("qz<{i},{e},1,{k}>");
                g.rule("zero-claim", &p, "X", Some("a"), &pz, &["X"]);
                g.rule("zero-claim", &p, "X", Some("c"), &pp, &["X"]);
                g.rule("zero-claim", &q, "X", Some("a"), &qz, &["X"]);
                g.rule("zero-claim", &q, "X", Some("c"), &qp, &["X"]);
                let v = |k: u8, b: u8, t: usize| format!("v{k}<{e},{b},{t}>");
                for s in 1..=3 {
                    g.rule("zero-p", &pz, "X", Some("a"), &v(s, 0, j), &["X"]);
                    g.rule("zero-p", &pp, "X", Some("a"), &v(s, 1, k), &["X"]);
                }
                for s in 2..=3 {
                    g.rule("zero-q", &qz, "X", Some("a"), &v(s, 0, j), &["X"]);
                    g.rule("zero-q", &qp, "X", Some("a"), &v(s, 1, k), &["X"]);
                }
                let (t1, t1p) = (t_state(e, Test::Positive, false), t_state(e, Test::Positive, true));
                let (t0, t0p) = (t_state(e, Test::Zero, false), t_state(e, Test::Zero, true));
                g.rule("zero-v", &v(1, 0, j), "X", Some("a"), &t1, &[]);
                g.rule("zero-v", &v(1, 0, j), "X", Some("a"), &control_state(j, false), &["X"]);
                g.rule("zero-v", &v(2, 0, j), "X", Some("a"), &t1p, &[]);
                g.rule("zero-v", &v(2, 0, j), "X", Some("a"), &control_state(j, false), &["X"]);
                g.rule("zero-v", &v(3, 0, j), "X", Some("a"), &t1, &[]);
                g.rule("zero-v", &v(3, 0, j), "X", Some("a"), &control_state(j, true), &["X"]);
                g.rule("positive-v", &v(1, 1, k), "X", Some("a"), &t0, &[]);
                g.rule("positive-v", &v(1, 1, k), "X", Some("a"), &gadget("u", e, Op::Dec, k), &["X"]);
                g.rule("positive-v", &v(2, 1, k), "X", Some("a"), &t0p, &[]);
                g.rule("positive-v", &v(2, 1, k), "X", Some("a"), &gadget("u", e, Op::Dec, k), &["X"]);
                g.rule("positive-v", &v(3, 1, k), "X", Some("a"), &t0, &[]);
                g.rule("positive-v", &v(3, 1, k), "X", Some("a"), &gadget("u'", e, Op::Dec, k), &["X"]);
            }
            Instr::Halt => {
                g.rule("halt", &p, "X", Some("f"), &p, &[BOT]);
                g.rule("halt", &q, "X", Some("f'"), &q, &[BOT]);
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum NcmError {
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Equiv(#[from] EquivError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("scripted play failed: {0}")]
    Script(String),
}

/// Generates the system for a lifted machine: counter tests, one operation
/// gadget per `(e, o, j)` with `e ≤ 3` and `j ≤ len`, and the control rules
/// of every instruction.
pub fn compile_reduction(m: &CounterMachine) -> Result<ReductionOutput, NcmError> {
    let mut g = Gen {
        b: SystemBuilder::new(),
        counts: BTreeMap::new(),
        seen: Default::default(),
    };
    // Declare names in a stable order.
    for i in 1..=m.len() {
        g.b.state(&control_state(i, false));
        g.b.state(&control_state(i, true));
    }
    for s in ["X", "X1", "X2", "X3", "C1", "C2", "C3", BOT] {
        g.b.symbol(s);
    }
    for a in ["a", "b", "c", "c1", "c2", "c3", "f", "f'"] {
        g.b.action(a);
    }
    counter_tests(&mut g);
    for e in 1..=3 {
        for o in Op::ALL {
            for j in 1..=m.len() {
                operation(&mut g, e, o, j);
            }
        }
    }
    control(&mut g, m);
    let system = g.b.build()?;
    let x = [sym(&system, "X"), sym(&system, BOT)];
    let p1 = system.state_id(&control_state(1, false)).expect("declared");
    let q1 = system.state_id(&control_state(1, true)).expect("declared");
    let root = Config::new(system.expand_standard(p1, &x), system.expand_standard(q1, &x));
    let mut counts: BTreeMap<&'static str, usize> = TEMPLATE_ROWS.iter().map(|r| (*r, 0)).collect();
    counts.extend(g.counts);
    Ok(ReductionOutput {
        machine: m.clone(),
        system,
        root,
        template_counts: counts,
    })
}

fn sym(sys: &PdaSystem, name: &str) -> SymbolId {
    sys.symbol_id(name).expect("generated symbol")
}

fn state(sys: &PdaSystem, name: &str) -> Result<StateId, NcmError> {
    sys.state_id(name)
        .ok_or_else(|| NcmError::Precondition(format!("no state `{name}`")))
}

/// Rows that produced no rule.
pub fn uncovered_rows(out: &ReductionOutput) -> Vec<&'static str> {
    out.template_counts.iter().filter(|(_, &c)| c == 0).map(|(r, _)| *r).collect()
}

/// A machine configuration: label and `(c1, c2, c3)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CounterConfig {
    pub label: usize,
    pub counters: [u32; 3],
}

fn counter_word(sys: &PdaSystem, n: [u32; 3]) -> Vec<SymbolId> {
    let mut w = Vec::new();
    for (e, &k) in n.iter().enumerate() {
        w.extend(std::iter::repeat(sym(sys, C[e + 1])).take(k as usize));
    }
    w
}

impl ReductionOutput {
    /// `(pi X C1^n1 C2^n2 C3^n3 ⊥, qi X C1^n1 C2^n2 C3^n3 ⊥)`.
    pub fn encode(&self, c: CounterConfig) -> Result<Config, NcmError> {
        if c.label == 0 || c.label > self.machine.len() {
            return Err(NcmError::Precondition(format!("label {} out of range", c.label)));
        }
        let mut w = vec![sym(&self.system, "X")];
        w.extend(counter_word(&self.system, c.counters));
        w.push(sym(&self.system, BOT));
        let p = state(&self.system, &control_state(c.label, false))?;
        let q = state(&self.system, &control_state(c.label, true))?;
        Ok(Config::new(self.system.expand_standard(p, &w), self.system.expand_standard(q, &w)))
    }

    /// Inverse of [`encode`](Self::encode) on one side: the configuration
    /// and whether the state was the primed copy. With `below` false the
    /// stack must end at the first `⊥`; with `below` true anything under
    /// it is ignored.
    pub fn decode(&self, p: &Process, below: bool) -> Option<(CounterConfig, bool)> {
        let (s, word) = stack_word(p);
        let name = self.system.state_name(s?);
        let (primed, label) = if let Some(r) = name.strip_prefix("p<") {
            (false, r)
        } else {
            (true, name.strip_prefix("q<")?)
        };
        let label: usize = label.strip_suffix('>')?.parse().ok()?;
        if word.first().map(|&y| self.system.symbol_name(y)) != Some("X") {
            return None;
        }
        let mut n = [0u32; 3];
        let mut e = 0;
        let mut it = word.iter().skip(1).map(|&y| self.system.symbol_name(y));
        for y in it.by_ref() {
            let k = match y {
                "C1" => 0,
                "C2" => 1,
                "C3" => 2,
                "Bot" => {
                    e = 4;
                    break;
                }
                _ => return None,
            };
            if k < e {
                return None;
            }
            e = k;
            n[k] += 1;
        }
        if e != 4 || (!below && it.next().is_some()) {
            return None;
        }
        Some((CounterConfig { label, counters: n }, primed))
    }
}

/// Top state and stack word of a term built from standard expansions.
pub fn stack_word(p: &Process) -> (Option<StateId>, Vec<SymbolId>) {
    let mut word = Vec::new();
    let Some((s, x, c)) = p.as_seq() else { return (None, word) };
    word.push(x);
    let mut cur = c.clone();
    loop {
        let next = cur.as_tuple().and_then(|t| t.entries().iter().find_map(|e| e.as_seq().map(|(_, y, c)| (y, c.clone()))));
        match next {
            Some((y, c)) => {
                word.push(y);
                cur = c;
            }
            None => break,
        }
    }
    (Some(s), word)
}

/// Outcome of one instance of a counter-test statement.
#[derive(Clone, Debug)]
pub struct Prop2Item {
    pub statement: u8,
    pub e: u8,
    pub alpha: [u32; 3],
    pub beta: [u32; 3],
    pub expected: bool,
    pub verdict: Outcome,
    pub left: Process,
    pub right: Process,
}

#[derive(Clone, Debug, Default)]
pub struct Prop2Report {
    pub items: Vec<Prop2Item>,
    /// Size of the fragment the classes were computed on.
    pub fragment: usize,
}

impl Prop2Report {
    pub fn violations(&self) -> impl Iterator<Item = &Prop2Item> {
        self.items
            .iter()
            .filter(|i| i.verdict != Outcome::Unknown && (i.verdict == Outcome::Yes) != i.expected)
    }

    pub fn unknown(&self) -> usize {
        self.items.iter().filter(|i| i.verdict == Outcome::Unknown).count()
    }

    pub fn holds(&self) -> bool {
        self.violations().next().is_none() && self.unknown() == 0
    }

    pub fn render(&self, sys: &PdaSystem) -> String {
        let mut pr = crate::parse::Printer::new(sys);
        let mut out = String::new();
        for s in 1..=7u8 {
            let all: Vec<&Prop2Item> = self.items.iter().filter(|i| i.statement == s).collect();
            let bad = all.iter().filter(|i| i.verdict != Outcome::Unknown && (i.verdict == Outcome::Yes) != i.expected).count();
            let unk = all.iter().filter(|i| i.verdict == Outcome::Unknown).count();
            let _ = writeln!(out, "statement {s}: {} instances, {bad} violations, {unk} unknown", all.len());
        }
        for v in self.violations().take(20) {
            let _ = writeln!(
                out,
                "violation ({}, e = {}): {} vs {} expected {}",
                v.statement,
                v.e,
                pr.term(&v.left),
                pr.term(&v.right),
                if v.expected { "equivalent" } else { "inequivalent" }
            );
        }
        out
    }
}

fn vectors(max: u32) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for a in 0..=max {
        for b in 0..=max {
            for c in 0..=max {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// `expand_standard` with the continuation of each word suffix built once;
/// the tuples are as wide as the state set, so sharing them matters.
struct Expander<'a> {
    sys: &'a PdaSystem,
    levels: HashMap<Vec<SymbolId>, Constant>,
}

impl<'a> Expander<'a> {
    fn new(sys: &'a PdaSystem) -> Self {
        Expander {
            sys,
            levels: HashMap::new(),
        }
    }

    fn level(&mut self, w: &[SymbolId]) -> Constant {
        if let Some(c) = self.levels.get(w) {
            return c.clone();
        }
        let c = match w.split_first() {
            None => Constant::identity(self.sys.num_states() as u32),
            Some((&y, rest)) => {
                let below = self.level(rest);
                Constant::tuple(self.sys.states().map(|s| Process::seq(s, y, below.clone())).collect())
            }
        };
        self.levels.insert(w.to_vec(), c.clone());
        c
    }

    fn expand(&mut self, p: StateId, w: &[SymbolId]) -> Process {
        match w.split_first() {
            None => Process::sel(p.selection()),
            Some((&x, rest)) => Process::seq(p, x, self.level(rest)),
        }
    }
}

/// Checks the seven counter-test statements at every pair of counter
/// vectors with entries up to `max`, exactly, on one fragment holding all
/// the roots. Statement 7 compares `pα⊥` with `pα⊥γ` for every
/// counter-test state `p` and a few words `γ` below the bottom.
pub fn prop2_suite(out: &ReductionOutput, max: u32, budget: usize) -> Result<Prop2Report, NcmError> {
    let sys = &out.system;
    let bot = sym(sys, BOT);
    let mut ex = Expander::new(sys);
    let mut term = |name: &str, n: [u32; 3], extra: &[SymbolId]| -> Result<Process, NcmError> {
        let mut w = counter_word(sys, n);
        w.push(bot);
        w.extend_from_slice(extra);
        Ok(ex.expand(state(sys, name)?, &w))
    };
    let vs = vectors(max);
    let mut pairs: Vec<(u8, u8, [u32; 3], [u32; 3], bool, Process, Process)> = Vec::new();
    for &a in &vs {
        for &b in &vs {
            pairs.push((1, 0, a, b, a == b, term("t", a, &[])?, term("t", b, &[])?));
            let s = (t_state(3, Test::Op(Op::Star), false), t_state(3, Test::Op(Op::Star), true));
            pairs.push((2, 3, a, b, a[0] == b[0] && a[1] == b[1], term(&s.0, a, &[])?, term(&s.1, b, &[])?));
            for e in 1..=3u8 {
                let k = e as usize - 1;
                let others = (0..3).all(|j| j == k || a[j] == b[j]);
                let tt = |t: Test| (t_state(e, t, false), t_state(e, t, true));
                let (x, y) = tt(Test::Op(Op::Inc));
                pairs.push((3, e, a, b, others && a[k] + 1 == b[k], term(&x, a, &[])?, term(&y, b, &[])?));
                let (x, y) = tt(Test::Op(Op::Dec));
                pairs.push((4, e, a, b, others && a[k] == b[k] + 1, term(&x, a, &[])?, term(&y, b, &[])?));
                let (x, y) = tt(Test::Zero);
                pairs.push((5, e, a, b, a == b && a[k] == 0, term(&x, a, &[])?, term(&y, b, &[])?));
                let (x, y) = tt(Test::Positive);
                pairs.push((6, e, a, b, a == b && a[k] > 0, term(&x, a, &[])?, term(&y, b, &[])?));
            }
        }
    }
    let below: Vec<Vec<SymbolId>> = vec![
        vec![sym(sys, "C1")],
        vec![sym(sys, "X"), bot],
        vec![sym(sys, "C3"), sym(sys, "C3"), bot],
    ];
    for p in test_family() {
        for &a in &vs {
            for g in &below {
                pairs.push((7, 0, a, a, true, term(&p, a, &[])?, term(&p, a, g)?));
            }
        }
    }
    let roots: Vec<Process> = pairs.iter().flat_map(|p| [p.5.clone(), p.6.clone()]).collect();
    let mut report = Prop2Report::default();
    let classes = match reachable_lts(sys, &roots, Explore { budget, prune: true }).map_err(EquivError::from)? {
        Ok(lts) => {
            report.fragment = lts.len();
            let class = branching_partition(&lts);
            let mut pr = Pruner::new(sys);
            let mut of = HashMap::new();
            for r in &roots {
                let i = lts.index_of(&pr.prune(r)).expect("root is explored");
                of.insert(r.clone(), class[i]);
            }
            Some(of)
        }
        Err(_) => None,
    };
    for (statement, e, alpha, beta, expected, left, right) in pairs {
        let verdict = match &classes {
            Some(c) if c[&left] == c[&right] => Outcome::Yes,
            Some(_) => Outcome::No,
            None => Outcome::Unknown,
        };
        report.items.push(Prop2Item {
            statement,
            e,
            alpha,
            beta,
            expected,
            verdict,
            left,
            right,
        });
    }
    Ok(report)
}

/// The counter operation a scripted scenario exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Inc { e: u8 },
    /// Requires the counter to be positive.
    Dec { e: u8 },
    /// Sets `c3` to `n`.
    Star { n: u32 },
}

#[derive(Clone, Debug)]
pub struct ScenarioReport {
    pub play: PlayOutcome,
    pub expected: [u32; 3],
    /// Decoded end configuration on both sides (content below the first
    /// `⊥` ignored).
    pub reached: Option<(CounterConfig, CounterConfig)>,
}

impl ScenarioReport {
    pub fn reached_target(&self, j: usize) -> bool {
        self.play.script_error.is_none()
            && self.reached.is_some_and(|(l, r)| {
                l.label == j && r.label == j && l.counters == self.expected && r.counters == self.expected
            })
    }
}

/// Options suited to the generated systems: a fixed stutter cap (the
/// forcing loops are silent cycles) and no pruning, so terms stay in the
/// standard shape the decoders read.
pub fn game_options(cap: usize) -> GameOptions {
    GameOptions {
        cap: StutterCap::Fixed(cap),
        prune: false,
        ..GameOptions::default()
    }
}

/// Plays the optimal lines of the operation gadget for `(e, o, j)` from
/// `(u X α⊥, u' X α⊥)`: Attacker's `a` from `u`, Defender's silent build-up
/// of the new counters through `g'` and then `a`, Attacker's `a` on both
/// sides of the test stage, Attacker's `a` from `u2'` answered through `g`,
/// and the final `a` into `(pj X β⊥α⊥, qj X β⊥α⊥)`.
pub fn lemma13_scenario(out: &ReductionOutput, scenario: Scenario, j: usize, alpha: [u32; 3]) -> Result<ScenarioReport, NcmError> {
    let sys = &out.system;
    let (e, op, beta) = match scenario {
        Scenario::Inc { e } => {
            let mut b = alpha;
            b[e as usize - 1] += 1;
            (e, Op::Inc, b)
        }
        Scenario::Dec { e } => {
            if alpha[e as usize - 1] == 0 {
                return Err(NcmError::Precondition(format!("counter {e} is zero")));
            }
            let mut b = alpha;
            b[e as usize - 1] -= 1;
            (e, Op::Dec, b)
        }
        Scenario::Star { n } => (3, Op::Star, [alpha[0], alpha[1], n]),
    };
    if j == 0 || j > out.machine.len() {
        return Err(NcmError::Precondition(format!("target {j} out of range")));
    }
    let x = sym(sys, "X");
    let bot = sym(sys, BOT);
    let mut low = counter_word(sys, alpha);
    low.push(bot);
    let mut high = counter_word(sys, beta);
    high.push(bot);
    high.extend_from_slice(&low);
    let at = |name: String, w: &[SymbolId]| -> Result<Process, NcmError> {
        let mut word = vec![x];
        word.extend_from_slice(w);
        Ok(sys.expand_standard(state(sys, &name)?, &word))
    };
    let s = |n: &str| gadget(n, e, op, j);
    let start = Config::new(at(s("u"), &low)?, at(s("u'"), &low)?);
    let a = sys.label_id("a").expect("generated action");
    let script = vec![
        ScriptMove::Attack {
            side: Side::Left,
            label: a,
            target: at(s("u1"), &low)?,
        },
        ScriptMove::Defend {
            label: a,
            target: at(s("u1'"), &high)?,
        },
        ScriptMove::Attack {
            side: Side::Left,
            label: a,
            target: at(s("u2"), &low)?,
        },
        ScriptMove::Defend {
            label: a,
            target: at(s("u2'"), &high)?,
        },
        ScriptMove::Attack {
            side: Side::Right,
            label: a,
            target: at(s("u3'"), &high)?,
        },
        ScriptMove::Defend {
            label: a,
            target: at(s("u3"), &high)?,
        },
        ScriptMove::Attack {
            side: Side::Left,
            label: a,
            target: at(control_state(j, false), &high)?,
        },
        ScriptMove::Defend {
            label: a,
            target: at(control_state(j, true), &high)?,
        },
    ];
    let cap = 8 + 2 * beta.iter().sum::<u32>() as usize;
    let mut game = Game::new(sys, game_options(cap))?;
    let play = game.play(&start, &Strategy::Scripted(script.clone()), &Strategy::Scripted(script), 4)?;
    if let Some(err) = &play.script_error {
        return Err(NcmError::Script(err.clone()));
    }
    let reached = match (out.decode(&play.last.left, true), out.decode(&play.last.right, true)) {
        (Some((l, false)), Some((r, true))) => Some((l, r)),
        _ => None,
    };
    Ok(ScenarioReport {
        play,
        expected: beta,
        reached,
    })
}

/// Spot check of the forcing loops: every term silently reachable from
/// `r X ⊥` of the gadget `(e, o, j)` (at most `limit`, breadth first, up
/// to pruning) reaches `r X ⊥` back silently, so all of them lie on one
/// silent cycle and are branching bisimilar. Returns the sampled terms
/// that fail to return within `limit` steps of search.
pub fn forcing_loop_check(out: &ReductionOutput, e: u8, o: Op, j: usize, primed: bool, limit: usize) -> Result<(usize, Vec<Process>), NcmError> {
    let sys = &out.system;
    let mut pr = Pruner::new(sys);
    let r = state(sys, &gadget(if primed { "r'" } else { "r" }, e, o, j))?;
    let root = pr.prune(&sys.expand_standard(r, &[sym(sys, "X"), sym(sys, BOT)]));
    let mut closure = |from: &Process, stop: Option<&Process>| -> Result<Vec<Process>, NcmError> {
        let mut seen = vec![from.clone()];
        let mut set = std::collections::HashSet::from([from.clone()]);
        let mut queue = VecDeque::from([from.clone()]);
        while let Some(p) = queue.pop_front() {
            for (l, q) in pr.step(&p).map_err(EquivError::from)? {
                if l == Label::Silent && set.len() < limit && set.insert(q.clone()) {
                    if Some(&q) == stop {
                        return Ok(vec![q]);
                    }
                    seen.push(q.clone());
                    queue.push_back(q);
                }
            }
        }
        Ok(seen)
    };
    let samples = closure(&root, None)?;
    let mut stuck = Vec::new();
    for p in &samples {
        if *p != root && closure(p, Some(&root))?.last() != Some(&root) {
            stuck.push(p.clone());
        }
    }
    Ok((samples.len(), stuck))
}

/// Iterative deepening on the root pair of a compiled source machine.
#[derive(Clone, Debug)]
pub struct ReductionReport {
    pub lifted: CounterMachine,
    pub cap: usize,
    /// Least scheduled depth at which Attacker wins.
    pub attacker_wins: Option<u32>,
    /// Largest scheduled depth Defender survived.
    pub survived: Option<u32>,
    /// The search budget ran out before the schedule was done.
    pub exhausted: bool,
}

impl ReductionReport {
    pub fn render(&self) -> String {
        match (self.attacker_wins, self.survived) {
            (Some(d), _) => format!(
                "attacker wins at depth {d} (stutter cap {}): the roots are not branching bisimilar, so the lifted machine has no infinite computation\n",
                self.cap
            ),
            (None, s) => format!(
                "defender survives depth {} (stutter cap {}){}; this is evidence only, equivalence of the roots is not decidable in general\n",
                s.map_or("none".to_string(), |d| d.to_string()),
                self.cap,
                if self.exhausted { " (budget exhausted)" } else { "" }
            ),
        }
    }
}

/// Reduction options: a fixed stutter cap, pruning on, and the
/// silent-cycle shortcut, since the forcing loops are silent cycles.
pub fn reduction_options(cap: usize, budget: u64) -> GameOptions {
    GameOptions {
        cap: StutterCap::Fixed(cap),
        budget,
        prune: true,
        silent_cycle_shortcut: true,
    }
}

pub fn bounded_reduction_check(source: &CounterMachine, schedule: &[u32], opts: GameOptions) -> Result<ReductionReport, NcmError> {
    let lifted = source.lift()?;
    let out = compile_reduction(&lifted)?;
    let mut game = Game::new(&out.system, opts)?;
    let (l, r) = (game.normalize(&out.root.left), game.normalize(&out.root.right));
    let cap = match opts.cap {
        StutterCap::Fixed(c) => c,
        StutterCap::Auto => 0,
    };
    let mut report = ReductionReport {
        lifted,
        cap,
        attacker_wins: None,
        survived: None,
        exhausted: false,
    };
    for &k in schedule {
        match game.survives(&l, &r, k) {
            Ok(true) => report.survived = Some(k),
            Ok(false) => {
                report.attacker_wins = Some(game.survival_depth(&l, &r, k)? + 1);
                break;
            }
            Err(GameError::Exhausted) => {
                report.exhausted = true;
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOOP: &str = "1: goto 1 or goto 1\n2: halt\n";

    #[test]
    fn parse_print_round_trip() {
        let src = "1: inc c1 goto 2\n2: ifz c2 goto 3 else dec goto 4\n3: goto 1 or goto 5\n4: star c3 goto 5\n5: halt\n";
        let m = CounterMachine::parse(src).unwrap();
        assert_eq!(m.to_string(), src);
        assert!(CounterMachine::parse("1: inc c4 goto 1\n2: halt").is_err());
        assert!(CounterMachine::parse("1: halt\n2: halt").is_err());
        assert!(CounterMachine::parse("1: inc c1 goto 3\n2: halt").is_err());
    }

    #[test]
    fn lift_doubles_and_rewrites() {
        let m = CounterMachine::parse(LOOP).unwrap();
        let l = m.lift().unwrap();
        assert_eq!(l.len(), 4);
        assert_eq!(l.instr(1), Instr::Star { counter: 3, goto: 2 });
        assert_eq!(l.instr(2), Instr::Branch { first: 1, second: 1 });
        assert_eq!(l.instr(3), Instr::ZeroDec { counter: 3, zero: 4, dec: 4 });
        assert_eq!(l.instr(4), Instr::Halt);
    }

    #[test]
    fn encode_decode() {
        let out = compile_reduction(&CounterMachine::parse(LOOP).unwrap().lift().unwrap()).unwrap();
        let c = CounterConfig { label: 3, counters: [1, 0, 2] };
        let cfg = out.encode(c).unwrap();
        assert_eq!(out.decode(&cfg.left, false), Some((c, false)));
        assert_eq!(out.decode(&cfg.right, false), Some((c, true)));
        let (_, w) = stack_word(&cfg.left);
        let names: Vec<&str> = w.iter().map(|&y| out.system.symbol_name(y)).collect();
        assert_eq!(names, ["X", "C1", "C3", "C3", "Bot"]);
        let root = out.encode(CounterConfig { label: 1, counters: [0; 3] }).unwrap();
        assert_eq!(root, out.root);
    }

    #[test]
    fn generated_system_is_pushing() {
        let out = compile_reduction(&CounterMachine::parse(LOOP).unwrap().lift().unwrap()).unwrap();
        assert!(out.system.flavor().eps_pushing);
        assert_eq!(out.template_counts["halt"], 2);
    }
}
