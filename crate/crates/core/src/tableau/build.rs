//! Tableau construction and checking.

use std::collections::{HashMap, VecDeque};

use super::decompose::{decompose_left, decompose_right, DecomposeFailure, RightDecomposition};
use super::fixpoint::{rectify, refine_fixpoints, small_bodies};
use super::matching::{compute_match, is_match, MatchError};
use super::{Goal, Judge, LeafStatus, OracleSpec, RuleKind, SideEvidence, Tableau, TableauNode};
use crate::equivalence::{EquivError, OracleId};
use crate::lts::Outcome;
use crate::system::{PdaSystem, Pruner};
use crate::term::{compose, cut, validate_rec_const, Constant, Process, RecConstDef, RecName, Tuple};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableauFlavor {
    EpsPopping,
    EpsPushingNormed,
}

impl TableauFlavor {
    pub fn of(sys: &PdaSystem) -> Option<TableauFlavor> {
        let f = sys.flavor();
        if f.eps_popping {
            Some(TableauFlavor::EpsPopping)
        } else if f.eps_pushing && f.normed {
            Some(TableauFlavor::EpsPushingNormed)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchBudget {
    pub node_cap: usize,
    /// Largest depth of a body entry of an introduced constant.
    pub rec_size_cap: u32,
    /// Silent steps allowed in one response of a match.
    pub stutter_cap: usize,
    /// Nesting of rule applications inside one subtableau.
    pub nesting: usize,
    pub oracle: OracleSpec,
    /// Game depth used to locate differences during refinement.
    pub refine_depth: u32,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            node_cap: 5000,
            rec_size_cap: 4,
            stutter_cap: 16,
            nesting: 6,
            oracle: OracleSpec::default(),
            refine_depth: 12,
        }
    }
}

#[derive(Clone, Debug)]
pub enum SearchOutcome {
    /// Every leaf is successful or potentially successful.
    Found(Tableau),
    /// Some goal has no match; the tableau is unsuccessful.
    Refuted(Tableau),
    Unknown { nodes: usize, reason: String, partial: Tableau },
}

enum Stop {
    Cap,
    Refuted,
    Err(EquivError),
}

impl From<EquivError> for Stop {
    fn from(e: EquivError) -> Self {
        Stop::Err(e)
    }
}

impl From<crate::term::TermError> for Stop {
    fn from(e: crate::term::TermError) -> Self {
        Stop::Err(e.into())
    }
}

struct Builder<'j> {
    sys: PdaSystem,
    flavor: TableauFlavor,
    introduced: Vec<RecConstDef>,
    by_body: HashMap<Vec<Process>, RecName>,
    nodes: Vec<TableauNode>,
    judge: &'j mut Judge,
    budget: SearchBudget,
    subtableaux: usize,
    /// Subtableau roots waiting for expansion.
    queue: VecDeque<usize>,
}

impl Builder<'_> {
    fn prune(&self, p: &Process) -> Process {
        Pruner::new(&self.sys).prune(p)
    }

    fn add(&mut self, goal: Goal, parent: Option<usize>, subtableau: usize) -> Result<usize, Stop> {
        if self.nodes.len() >= self.budget.node_cap {
            return Err(Stop::Cap);
        }
        let goal = Goal::new(self.prune(&goal.left), self.prune(&goal.right));
        self.nodes.push(TableauNode {
            goal,
            rule: None,
            children: Vec::new(),
            leaf: None,
            evidence: Vec::new(),
            parent,
            subtableau,
        });
        let id = self.nodes.len() - 1;
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        Ok(id)
    }

    fn child(&mut self, parent: usize, goal: Goal) -> Result<usize, Stop> {
        let st = self.nodes[parent].subtableau;
        self.add(goal, Some(parent), st)
    }

    fn leaf(&mut self, id: usize, status: LeafStatus) {
        self.nodes[id].leaf = Some(status);
    }

    /// An ancestor in an earlier subtableau with the same goal.
    fn repeated(&self, id: usize) -> Option<usize> {
        let n = &self.nodes[id];
        let mut cur = n.parent;
        while let Some(a) = cur {
            let an = &self.nodes[a];
            if an.subtableau != n.subtableau && an.goal == n.goal {
                return Some(a);
            }
            cur = an.parent;
        }
        None
    }

    fn same_subtableau_repeat(&self, id: usize) -> bool {
        let n = &self.nodes[id];
        let mut cur = n.parent;
        while let Some(a) = cur {
            let an = &self.nodes[a];
            if an.subtableau != n.subtableau {
                return false;
            }
            if an.goal == n.goal {
                return true;
            }
            cur = an.parent;
        }
        false
    }

    fn run(&mut self, root: Goal) -> Result<(), Stop> {
        let r = self.add(root, None, 0)?;
        self.queue.push_back(r);
        while let Some(id) = self.queue.pop_front() {
            let mut terminals = Vec::new();
            self.expand(id, 0, &mut terminals)?;
            for t in terminals {
                self.close(t)?;
            }
        }
        Ok(())
    }

    /// Ends a terminal subtableau leaf: repetition, or a match whose
    /// children start new subtableaux.
    fn close(&mut self, id: usize) -> Result<(), Stop> {
        if let Some(a) = self.repeated(id) {
            self.leaf(id, LeafStatus::PotentiallySuccessful(a));
            return Ok(());
        }
        let goal = self.nodes[id].goal.clone();
        match compute_match(&self.sys, &goal, self.judge, self.budget.stutter_cap) {
            Ok((children, ev)) => {
                self.nodes[id].rule = Some(RuleKind::Match);
                self.nodes[id].evidence.extend(ev);
                for g in children {
                    self.subtableaux += 1;
                    let st = self.subtableaux;
                    let c = self.add(g, Some(id), st)?;
                    self.queue.push_back(c);
                }
                Ok(())
            }
            Err(MatchError::NoMatch) => {
                self.leaf(id, LeafStatus::Unsuccessful);
                Err(Stop::Refuted)
            }
            Err(MatchError::CapExhausted) => Err(Stop::Cap),
            Err(MatchError::Equiv(e)) => Err(Stop::Err(e)),
        }
    }

    /// Applies decomposition rules below `id`; terminal leaves are
    /// collected for the match phase.
    fn expand(&mut self, id: usize, nesting: usize, terminals: &mut Vec<usize>) -> Result<(), Stop> {
        let goal = self.nodes[id].goal.clone();
        if goal.is_trivial() {
            self.leaf(id, LeafStatus::Successful);
            return Ok(());
        }
        if let Some(a) = self.repeated(id) {
            self.leaf(id, LeafStatus::PotentiallySuccessful(a));
            return Ok(());
        }
        let m = self.sys.constants().m_bound as u32;
        let small = |p: &Process| p.as_seq().is_none() || p.depth() <= m + 1;
        if nesting >= self.budget.nesting || small(&goal.left) || small(&goal.right) || self.same_subtableau_repeat(id) {
            terminals.push(id);
            return Ok(());
        }
        match self.flavor {
            TableauFlavor::EpsPopping => self.popping(id, &goal, m, nesting, terminals),
            TableauFlavor::EpsPushingNormed => self.pushing(id, &goal, m, nesting, terminals),
        }
    }

    fn popping(&mut self, id: usize, goal: &Goal, m: u32, nesting: usize, terminals: &mut Vec<usize>) -> Result<(), Stop> {
        let mut at = id;
        let mut goal = goal.clone();
        let mut rd = decompose_right(&self.sys, &goal, m, self.judge)?;
        if rd.is_err() {
            let sw = goal.swapped();
            if let Ok(d) = decompose_right(&self.sys, &sw, m, self.judge)? {
                self.nodes[at].rule = Some(RuleKind::Swap);
                at = self.child(at, sw.clone())?;
                goal = sw;
                rd = Ok(d);
            }
        }
        let Ok(rd) = rd else {
            terminals.push(at);
            return Ok(());
        };
        if !rd.aux.is_empty() {
            self.nodes[at].rule = Some(RuleKind::RdcpMinus);
            self.nodes[at].evidence.extend(rd.evidence.iter().cloned());
            for a in rd.aux.clone() {
                let c = self.child(at, a.clone())?;
                let e = self.judge.judge(&self.sys, &a.left, &a.right)?;
                self.nodes[c].evidence.push(SideEvidence {
                    condition: "preserving step".into(),
                    evidence: e,
                });
                let st = if e.verdict == Outcome::Yes {
                    LeafStatus::Successful
                } else {
                    LeafStatus::Unsuccessful
                };
                self.leaf(c, st);
            }
            at = self.child(at, Goal::new(goal.left.clone(), rd.rewritten.clone()))?;
            goal = self.nodes[at].goal.clone();
        } else {
            self.nodes[at].evidence.extend(rd.evidence.iter().cloned());
        }
        self.left_and_cancel(at, &goal, &rd, RuleKind::LdcpMinus, RuleKind::CancelMinus, nesting, terminals)
    }

    fn pushing(&mut self, id: usize, goal: &Goal, m: u32, nesting: usize, terminals: &mut Vec<usize>) -> Result<(), Stop> {
        let mut at = id;
        let mut goal = goal.clone();
        if goal.left.depth() > goal.right.depth() {
            self.nodes[at].rule = Some(RuleKind::Swap);
            goal = goal.swapped();
            at = self.child(at, goal.clone())?;
        }
        let c = cut(&goal.right, m);
        let Some(ur) = c.prefix.as_seq().and_then(|(_, _, b)| b.as_tuple().cloned()) else {
            terminals.push(at);
            return Ok(());
        };
        if c.residual.arity() == 0 {
            terminals.push(at);
            return Ok(());
        }
        let rd = RightDecomposition {
            ur,
            d: c.residual.clone(),
            aux: Vec::new(),
            rewritten: goal.right.clone(),
            evidence: Vec::new(),
        };
        self.left_and_cancel(at, &goal, &rd, RuleKind::Decmp, RuleKind::CancelPlus, nesting, terminals)
    }

    #[allow(clippy::too_many_arguments)]
    fn left_and_cancel(
        &mut self,
        at: usize,
        goal: &Goal,
        rd: &RightDecomposition,
        dcp: RuleKind,
        cancel: RuleKind,
        nesting: usize,
        terminals: &mut Vec<usize>,
    ) -> Result<(), Stop> {
        let ld = match decompose_left(&self.sys, goal, rd, self.judge)? {
            Ok(ld) => ld,
            Err(DecomposeFailure::Shape | DecomposeFailure::NoCandidate(_) | DecomposeFailure::TooDeep(_))
            | Err(DecomposeFailure::NotNormal(_) | DecomposeFailure::Undetermined(_)) => {
                terminals.push(at);
                return Ok(());
            }
        };
        self.nodes[at].rule = Some(dcp);
        self.nodes[at].evidence.extend(ld.evidence.iter().cloned());
        for g in ld.children.clone() {
            let c = self.child(at, g)?;
            self.expand(c, nesting + 1, terminals)?;
        }
        let main = self.child(at, ld.main.clone())?;
        if rd.d.arity() == 0 {
            terminals.push(main);
            return Ok(());
        }
        let (r, x, _) = goal.left.as_seq().expect("decomposed goals are sequential");
        let (s, y, _) = rd.rewritten.as_seq().expect("decomposed goals are sequential");
        let p = Process::seq(r, x, Constant::Tuple(ld.ul.clone()));
        let q = Process::seq(s, y, Constant::Tuple(rd.ur.clone()));
        let Some((body, def, ev)) = self.choose_constant(&p, &q, &rd.d)? else {
            terminals.push(main);
            return Ok(());
        };
        self.nodes[main].rule = Some(cancel);
        self.nodes[main].evidence.extend(ev);
        let d = Constant::Tuple(rd.d.clone());
        for (i, li) in body.iter().enumerate() {
            let lhs = compose(li, &d, self.sys.recs())?;
            let rhs = compose(&Process::sel(i as u32 + 1), &d, self.sys.recs())?;
            let c = self.child(main, Goal::new(lhs, rhs))?;
            self.expand(c, nesting + 1, terminals)?;
        }
        let v = Constant::Rec(def.name.clone());
        let g = Goal::new(compose(&p, &v, self.sys.recs())?, compose(&q, &v, self.sys.recs())?);
        let c = self.child(main, g)?;
        terminals.push(c);
        Ok(())
    }

    /// A constant for cancelling `D` from `P·D = Q·D`: the refined
    /// candidate if it works, else the first small body that does, else
    /// the refined or identity vector anyway (the match phase decides).
    #[allow(clippy::type_complexity)]
    fn choose_constant(&mut self, p: &Process, q: &Process, d: &Tuple) -> Result<Option<(Vec<Process>, RecConstDef, Vec<SideEvidence>)>, Stop> {
        let n = d.arity();
        let mut bodies = Vec::new();
        let r = refine_fixpoints(&self.sys, p, q, d, self.judge, self.budget.refine_depth, self.budget.stutter_cap)?;
        let refined = r.candidates.first().map(|c| c.body.clone());
        if let Some(b) = &refined {
            bodies.push(b.clone());
        }
        bodies.extend(small_bodies(n, 64));
        let mut fallback = None;
        for body in bodies {
            if body.iter().any(|e| e.depth() > self.budget.rec_size_cap) {
                continue;
            }
            let def = self.intern(&body)?;
            let v = Constant::Rec(def.name.clone());
            let (pv, qv) = (compose(p, &v, self.sys.recs())?, compose(q, &v, self.sys.recs())?);
            let e = self.judge.judge(&self.sys, &pv, &qv)?;
            if fallback.is_none() {
                fallback = Some((body.clone(), def.clone(), e));
            }
            if e.verdict == Outcome::Yes {
                let ev = vec![SideEvidence {
                    condition: format!("P{} = Q{}", def.name, def.name),
                    evidence: e,
                }];
                return Ok(Some((body, def, ev)));
            }
        }
        Ok(fallback.map(|(b, d, e)| {
            let ev = vec![SideEvidence {
                condition: format!("P{} = Q{}", d.name, d.name),
                evidence: e,
            }];
            (b, d, ev)
        }))
    }

    /// Defines (or reuses) the constant for a body.
    fn intern(&mut self, body: &[Process]) -> Result<RecConstDef, Stop> {
        let mut def = rectify("_", body);
        if let Some(name) = self.by_body.get(&def.body) {
            return Ok(self.sys.recs().get(name)?.clone());
        }
        let mut k = self.introduced.len() + 1;
        loop {
            let name = RecName::new(&format!("V{k}"));
            if !self.sys.recs().contains(&name) {
                def.name = name;
                break;
            }
            k += 1;
        }
        self.sys = self.sys.with_recs([def.clone()]).map_err(EquivError::from)?;
        self.by_body.insert(def.body.clone(), def.name.clone());
        self.introduced.push(def.clone());
        Ok(def)
    }

    fn finish(self) -> Tableau {
        Tableau {
            nodes: self.nodes,
            system: self.sys,
            introduced: self.introduced,
        }
    }
}

/// Expands one subtableau rooted at `goal` without closing its leaves by
/// matches; terminal leaves are left pending.
pub fn build_subtableau(
    sys: &PdaSystem,
    goal: &Goal,
    flavor: TableauFlavor,
    budget: &SearchBudget,
    judge: &mut Judge,
) -> Result<Tableau, EquivError> {
    let mut b = builder(sys, flavor, budget, judge);
    let mut terminals = Vec::new();
    let res = b.add(goal.clone(), None, 0).and_then(|r| b.expand(r, 0, &mut terminals));
    match res {
        Ok(()) | Err(Stop::Cap) | Err(Stop::Refuted) => {}
        Err(Stop::Err(e)) => return Err(e),
    }
    for t in terminals {
        if b.nodes[t].leaf.is_none() {
            b.leaf(t, LeafStatus::Pending);
        }
    }
    Ok(b.finish())
}

fn builder<'j>(sys: &PdaSystem, flavor: TableauFlavor, budget: &SearchBudget, judge: &'j mut Judge) -> Builder<'j> {
    Builder {
        sys: sys.clone(),
        flavor,
        introduced: Vec::new(),
        by_body: HashMap::new(),
        nodes: Vec::new(),
        judge,
        budget: budget.clone(),
        subtableaux: 0,
        queue: VecDeque::new(),
    }
}

/// Builds a tableau for `goal`, alternating subtableau expansion and
/// matches until every leaf is closed or the node cap is reached.
pub fn search_tableau(sys: &PdaSystem, goal: &Goal, budget: &SearchBudget) -> Result<SearchOutcome, EquivError> {
    let flavor = match TableauFlavor::of(sys) {
        Some(f) => f,
        None if sys.flavor().eps_pushing => return Err(EquivError::NotPushingNormed),
        None => return Err(EquivError::NotPopping),
    };
    let mut judge = Judge::new(budget.oracle);
    let mut b = builder(sys, flavor, budget, &mut judge);
    let res = b.run(goal.clone());
    let nodes = b.nodes.len();
    let mut t = b.finish();
    let pend = |t: &mut Tableau| {
        for n in &mut t.nodes {
            if n.children.is_empty() && n.rule.is_none() && n.leaf.is_none() {
                n.leaf = Some(LeafStatus::Pending);
            }
        }
    };
    match res {
        Ok(()) => Ok(SearchOutcome::Found(t)),
        Err(Stop::Refuted) => {
            pend(&mut t);
            Ok(SearchOutcome::Refuted(t))
        }
        Err(Stop::Cap) => {
            pend(&mut t);
            Ok(SearchOutcome::Unknown {
                nodes,
                reason: "node cap or stutter cap reached".into(),
                partial: t,
            })
        }
        Err(Stop::Err(e)) => Err(e),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AuditIssue {
    OpenLeaf(usize),
    UnsuccessfulLeaf(usize),
    /// A successful leaf that is neither trivial nor backed by a positive
    /// judgement.
    UnbackedLeaf(usize),
    /// The target is not an ancestor with the same goal, or no match lies
    /// between them.
    BadBackEdge(usize),
    NotAMatch(usize),
    InvalidRecConst(String),
    Error(String),
}

#[derive(Clone, Debug, Default)]
pub struct Audit {
    pub issues: Vec<AuditIssue>,
    pub leaves: usize,
    pub matches: usize,
}

impl Audit {
    pub fn ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Checks the structural conditions of a successful tableau: closed leaves,
/// back edges to identical ancestors across a match, every match node a
/// match, and valid introduced constants.
pub fn verify_tableau(t: &Tableau, stutter_cap: usize) -> Audit {
    let mut a = Audit::default();
    for d in &t.introduced {
        if !validate_rec_const(d).is_empty() {
            a.issues.push(AuditIssue::InvalidRecConst(d.name.as_str().to_string()));
        }
    }
    for (i, n) in t.nodes.iter().enumerate() {
        if n.rule == Some(RuleKind::Match) {
            a.matches += 1;
            let gs: Vec<Goal> = n.children.iter().map(|&c| t.nodes[c].goal.clone()).collect();
            match is_match(&t.system, &n.goal, &gs, stutter_cap) {
                Ok(true) => {}
                Ok(false) => a.issues.push(AuditIssue::NotAMatch(i)),
                Err(e) => a.issues.push(AuditIssue::Error(e.to_string())),
            }
            continue;
        }
        if !n.children.is_empty() || n.rule.is_some() {
            continue;
        }
        a.leaves += 1;
        match n.leaf {
            Some(LeafStatus::Successful) => {
                let backed = n.goal.is_trivial()
                    || n.evidence
                        .iter()
                        .any(|e| e.evidence.verdict == Outcome::Yes && matches!(e.evidence.oracle, OracleId::Exact { .. }));
                if !backed {
                    a.issues.push(AuditIssue::UnbackedLeaf(i));
                }
            }
            Some(LeafStatus::PotentiallySuccessful(target)) => {
                let mut cur = n.parent;
                let mut crossed = false;
                let mut ok = false;
                while let Some(p) = cur {
                    crossed |= t.nodes[p].rule == Some(RuleKind::Match);
                    if p == target {
                        ok = crossed && t.nodes[p].goal == n.goal;
                        break;
                    }
                    cur = t.nodes[p].parent;
                }
                if !ok {
                    a.issues.push(AuditIssue::BadBackEdge(i));
                }
            }
            Some(LeafStatus::Unsuccessful) => a.issues.push(AuditIssue::UnsuccessfulLeaf(i)),
            Some(LeafStatus::Pending) | None => a.issues.push(AuditIssue::OpenLeaf(i)),
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_system, parse_term};

    fn search(src: &str, l: &str, r: &str) -> (PdaSystem, SearchOutcome) {
        let sys = parse_system(src).unwrap();
        let g = Goal::new(parse_term(&sys, l).unwrap(), parse_term(&sys, r).unwrap());
        let out = search_tableau(&sys, &g, &SearchBudget::default()).unwrap();
        (sys, out)
    }

    const COUNTER: &str = "states p q\nsymbols X Z\nactions a b c\n\
        rule p X a -> p X X\nrule p X b -> p\nrule p Z a -> p X Z\nrule p Z c -> p\n\
        rule q X a -> q X X\nrule q X eps -> p X\nrule q Z a -> q X Z\nrule q Z eps -> p Z\n";

    #[test]
    fn counter_with_silent_switch() {
        let (_, out) = search(COUNTER, "p [X Z]", "q [X Z]");
        match out {
            SearchOutcome::Found(t) => {
                let a = verify_tableau(&t, 16);
                assert!(a.ok(), "{:?}\n{}", a.issues, t);
            }
            SearchOutcome::Refuted(t) => panic!("refuted\n{t}"),
            SearchOutcome::Unknown { reason, partial, .. } => panic!("{reason}\n{partial}"),
        }
    }

    #[test]
    fn inequivalent_pair_is_not_found() {
        let (_, out) = search(COUNTER, "p [X Z]", "p [X X Z]");
        assert!(!matches!(out, SearchOutcome::Found(_)));
    }
}
