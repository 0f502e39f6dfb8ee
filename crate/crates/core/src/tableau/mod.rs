//! Tableau proofs of branching bisimilarity.
//!
//! Two rule sets share one tree representation: decomposition, cancellation
//! and match rules for ε-popping systems, and the simpler decompose/cancel
//! pair for normed ε-pushing systems. Semidecidable side conditions are
//! discharged by an equivalence oracle and every judgement is recorded on
//! the node that relied on it.

mod build;
mod decompose;
mod fixpoint;
mod matching;

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use crate::equivalence::{check_finite_exact, EquivError, Evidence, OracleId};
use crate::game::{Game, GameError, GameOptions};
use crate::lts::Outcome;
use crate::parse::Printer;
use crate::system::PdaSystem;
use crate::term::{Process, RecConstDef};

pub use build::{
    build_subtableau, search_tableau, verify_tableau, Audit, AuditIssue, SearchBudget, SearchOutcome, TableauFlavor,
};
pub use decompose::{decompose_left, decompose_right, is_normal, LeftDecomposition, Normality, RightDecomposition};
pub use fixpoint::{refine_fixpoints, FixpointCandidate, Refinement};
pub use matching::{compute_match, MatchError};

/// An equality to be proved.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Goal {
    pub left: Process,
    pub right: Process,
}

impl Goal {
    pub fn new(left: Process, right: Process) -> Self {
        Goal { left, right }
    }

    pub fn swapped(&self) -> Goal {
        Goal::new(self.right.clone(), self.left.clone())
    }

    pub fn is_trivial(&self) -> bool {
        self.left == self.right
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleKind {
    RdcpMinus,
    LdcpMinus,
    CancelMinus,
    Decmp,
    CancelPlus,
    /// One match rule serves both rule sets.
    Match,
    /// Sides exchanged, for the ε-pushing strategy.
    Swap,
}

impl RuleKind {
    pub fn name(self) -> &'static str {
        match self {
            RuleKind::RdcpMinus => "Rdcp-",
            RuleKind::LdcpMinus => "Ldcp-",
            RuleKind::CancelMinus => "Cancel-",
            RuleKind::Decmp => "Decmp+",
            RuleKind::CancelPlus => "Cancel+",
            RuleKind::Match => "Match",
            RuleKind::Swap => "Swap",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeafStatus {
    Successful,
    Unsuccessful,
    /// Coincides with the goal of this earlier node on the root path.
    PotentiallySuccessful(usize),
    /// Not yet expanded (only in partial trees).
    Pending,
}

/// A judgement that a rule application relied on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SideEvidence {
    pub condition: String,
    pub evidence: Evidence,
}

#[derive(Clone, Debug)]
pub struct TableauNode {
    pub goal: Goal,
    pub rule: Option<RuleKind>,
    pub children: Vec<usize>,
    pub leaf: Option<LeafStatus>,
    pub evidence: Vec<SideEvidence>,
    pub parent: Option<usize>,
    /// Index of the subtableau this node belongs to; subtableaux are
    /// numbered in creation order and linked through match nodes.
    pub subtableau: usize,
}

/// A tree of rule applications, stored as an arena with the root at 0.
#[derive(Clone, Debug)]
pub struct Tableau {
    pub nodes: Vec<TableauNode>,
    /// The system extended with every recursive constant the tableau
    /// introduced.
    pub system: PdaSystem,
    pub introduced: Vec<RecConstDef>,
}

impl Tableau {
    pub fn root(&self) -> &TableauNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, &TableauNode)> {
        self.nodes.iter().enumerate().filter(|(_, n)| n.children.is_empty())
    }

    /// Rule applications as (node, rule, children) triples.
    pub fn rule_instances(&self) -> impl Iterator<Item = (usize, RuleKind, &[usize])> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.rule.map(|r| (i, r, n.children.as_slice())))
    }

    /// Indented text, one node per line.
    pub fn render(&self) -> String {
        let mut pr = Printer::new(&self.system);
        let mut out = String::new();
        for d in &self.introduced {
            let body: Vec<String> = d.body.iter().map(|p| pr.term(p)).collect();
            let _ = writeln!(out, "rec {}[{}] = ({}) {}", d.name.as_str(), d.arity(), body.join(", "), d.name.as_str());
        }
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, depth)) = stack.pop() {
            let n = &self.nodes[i];
            let what = match (n.rule, n.leaf) {
                (Some(r), _) => r.name().to_string(),
                (None, Some(LeafStatus::Successful)) => "leaf successful".to_string(),
                (None, Some(LeafStatus::Unsuccessful)) => "leaf unsuccessful".to_string(),
                (None, Some(LeafStatus::PotentiallySuccessful(t))) => format!("leaf potentially-successful -> #{t}"),
                (None, Some(LeafStatus::Pending)) | (None, None) => "leaf pending".to_string(),
            };
            let ev: Vec<String> = n
                .evidence
                .iter()
                .map(|e| format!("{}: {:?} by {}", e.condition, e.evidence.verdict, e.evidence.oracle))
                .collect();
            let ev = if ev.is_empty() {
                String::new()
            } else {
                format!("  [{}]", ev.join("; "))
            };
            let _ = writeln!(
                out,
                "{:indent$}#{i} {what}: {} = {}{ev}",
                "",
                pr.term(&n.goal.left),
                pr.term(&n.goal.right),
                indent = 2 * depth
            );
            for &c in n.children.iter().rev() {
                stack.push((c, depth + 1));
            }
        }
        out
    }

    pub fn render_dot(&self) -> String {
        let mut pr = Printer::new(&self.system);
        let mut out = String::from("digraph tableau {\n  node [shape=box];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let head = match (n.rule, n.leaf) {
                (Some(r), _) => r.name().to_string(),
                (None, Some(LeafStatus::Successful)) => "successful".into(),
                (None, Some(LeafStatus::Unsuccessful)) => "unsuccessful".into(),
                (None, Some(LeafStatus::PotentiallySuccessful(_))) => "potentially successful".into(),
                _ => "pending".into(),
            };
            let label = format!("{head}\\n{} = {}", pr.term(&n.goal.left), pr.term(&n.goal.right)).replace('"', "\\\"");
            let _ = writeln!(out, "  n{i} [label=\"{label}\"];");
            for &c in &n.children {
                let _ = writeln!(out, "  n{i} -> n{c};");
            }
            if let Some(LeafStatus::PotentiallySuccessful(t)) = n.leaf {
                let _ = writeln!(out, "  n{i} -> n{t} [style=dashed];");
            }
        }
        out.push_str("}\n");
        out
    }
}

impl fmt::Display for Tableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Which checker discharges side conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleSpec {
    /// State budget for exact checks on finite fragments.
    pub budget: usize,
    /// Fall back to `≃ₖ` at this depth when the fragment does not close.
    pub fallback_depth: Option<u32>,
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec {
            budget: 2000,
            fallback_depth: None,
        }
    }
}

/// Cached judgements over a system that may grow new recursive constants.
/// Adding a constant never changes the meaning of existing terms, so the
/// cache stays valid across extensions.
#[derive(Debug, Default)]
pub struct Judge {
    spec: OracleSpec,
    cache: HashMap<(Process, Process), Evidence>,
}

impl Judge {
    pub fn new(spec: OracleSpec) -> Self {
        Judge {
            spec,
            cache: HashMap::new(),
        }
    }

    pub fn spec(&self) -> OracleSpec {
        self.spec
    }

    pub fn judge(&mut self, sys: &PdaSystem, p: &Process, q: &Process) -> Result<Evidence, EquivError> {
        let key = (p.clone(), q.clone());
        if let Some(e) = self.cache.get(&key) {
            return Ok(*e);
        }
        let exact = OracleId::Exact {
            budget: self.spec.budget,
        };
        let mut ev = Evidence {
            oracle: exact,
            verdict: if p == q {
                Outcome::Yes
            } else {
                check_finite_exact(sys, p, q, self.spec.budget)?.outcome()
            },
        };
        if ev.verdict == Outcome::Unknown {
            if let Some(depth) = self.spec.fallback_depth {
                ev = Evidence {
                    oracle: OracleId::Bounded { depth },
                    verdict: bounded(sys, p, q, depth)?,
                };
            }
        }
        self.cache.insert(key, ev);
        self.cache.insert((q.clone(), p.clone()), ev);
        Ok(ev)
    }

    /// `Yes` only on a positive judgement.
    pub fn holds(&mut self, sys: &PdaSystem, p: &Process, q: &Process) -> Result<bool, EquivError> {
        Ok(self.judge(sys, p, q)?.verdict == Outcome::Yes)
    }
}

fn bounded(sys: &PdaSystem, p: &Process, q: &Process, depth: u32) -> Result<Outcome, EquivError> {
    let mut game = match Game::new(sys, GameOptions::default()) {
        Ok(g) => g,
        Err(GameError::SilentHeadCycles) => return Ok(Outcome::Unknown),
        Err(e) => return Err(e.into()),
    };
    let (p, q) = (game.normalize(p), game.normalize(q));
    match game.survives(&p, &q, depth) {
        Ok(true) => Ok(Outcome::Yes),
        Ok(false) => Ok(Outcome::No),
        Err(GameError::Exhausted) => Ok(Outcome::Unknown),
        Err(e) => Err(e.into()),
    }
}
