//! Branching bisimilarity: exact checking on finite fragments, the bounded
//! relations `≃ₖ`, silent-step classification, norms and chain bounds.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::game::{render_trace, same_status, Config, Game, GameError, GameOptions, Round, StutterCap, Winner};
use crate::graph::tarjan;
use crate::lts::{reachable_lts, Explore, Lts, Outcome};
use crate::system::{Label, PdaSystem, Pruner};
use crate::term::{Process, TermError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EquivError {
    #[error("the system is neither eps-popping nor eps-pushing and normed")]
    NotFinitelyBranching,
    #[error("the system is not eps-pushing and normed")]
    NotPushingNormed,
    #[error("the system is not eps-popping")]
    NotPopping,
    #[error("not a one-step silent transition")]
    NotSilentStep,
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    System(#[from] crate::system::SystemError),
}

/// An equivalence relation on the states of a finite fragment, given by
/// class numbers.
#[derive(Clone, Debug)]
pub struct Witness {
    pub lts: Lts,
    pub class: Vec<usize>,
}

impl Witness {
    pub fn related(&self, p: &Process, q: &Process) -> bool {
        match (self.lts.index_of(p), self.lts.index_of(q)) {
            (Some(i), Some(j)) => self.class[i] == self.class[j],
            _ => false,
        }
    }

    pub fn class_count(&self) -> usize {
        self.class.iter().copied().collect::<HashSet<_>>().len()
    }

    /// Number of ordered pairs in the relation.
    pub fn size(&self) -> usize {
        let mut count: HashMap<usize, usize> = HashMap::new();
        for &c in &self.class {
            *count.entry(c).or_default() += 1;
        }
        count.values().map(|n| n * n).sum()
    }
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Equivalent(Witness),
    /// `depth` is the least `k` with `≄ₖ`, when the game solver confirmed it.
    Inequivalent { depth: Option<u32>, line: Vec<Round> },
    Unknown { spent: u64 },
}

impl Verdict {
    pub fn outcome(&self) -> Outcome {
        match self {
            Verdict::Equivalent(_) => Outcome::Yes,
            Verdict::Inequivalent { .. } => Outcome::No,
            Verdict::Unknown { .. } => Outcome::Unknown,
        }
    }
}

/// Text report: a verdict line, then depth and script or witness size.
pub fn render_verdict(sys: &PdaSystem, v: &Verdict) -> String {
    match v {
        Verdict::Equivalent(w) => format!(
            "verdict: equivalent\nwitness-states: {}\nwitness-classes: {}\nwitness-pairs: {}\n",
            w.lts.len(),
            w.class_count(),
            w.size()
        ),
        Verdict::Inequivalent { depth, line } => {
            let mut s = String::from("verdict: inequivalent\n");
            match depth {
                Some(d) => s.push_str(&format!("depth: {d}\n")),
                None => s.push_str("depth: unconfirmed\n"),
            }
            s.push_str(&render_trace(sys, line));
            s
        }
        Verdict::Unknown { spent } => format!("verdict: unknown\nspent: {spent}\n"),
    }
}

/// The coarsest branching bisimulation of a finite fragment, as class
/// numbers per state.
pub fn branching_partition(lts: &Lts) -> Vec<usize> {
    let n = lts.len();
    // Silent strongly connected components are equivalent wholesale.
    let silent: Vec<Vec<usize>> = lts
        .edges
        .iter()
        .map(|es| es.iter().filter(|(l, _)| l.is_silent()).map(|&(_, v)| v).collect())
        .collect();
    let comp = tarjan(&silent);
    let ncomp = comp.iter().map(|&c| c + 1).max().unwrap_or(0);
    let mut cedges: Vec<Vec<(Label, usize)>> = vec![Vec::new(); ncomp];
    let mut sel: Vec<Option<u32>> = vec![None; ncomp];
    for u in 0..n {
        let c = comp[u];
        sel[c] = lts.states[u].as_sel();
        for &(l, v) in &lts.edges[u] {
            if !(l.is_silent() && comp[v] == c) {
                cedges[c].push((l, comp[v]));
            }
        }
    }
    for es in &mut cedges {
        es.sort();
        es.dedup();
    }
    let mut block: Vec<usize> = {
        let mut ids: HashMap<Option<u32>, usize> = HashMap::new();
        sel.iter()
            .map(|s| {
                let k = ids.len();
                *ids.entry(*s).or_insert(k)
            })
            .collect()
    };
    let mut count = block.iter().collect::<HashSet<_>>().len();
    loop {
        // Successor components have smaller ids, so one pass in id order
        // sees inert silent successors before their sources.
        let mut sig: Vec<BTreeSet<(Label, usize)>> = vec![BTreeSet::new(); ncomp];
        for c in 0..ncomp {
            let mut s = BTreeSet::new();
            for &(l, d) in &cedges[c] {
                if l.is_silent() && block[d] == block[c] {
                    s.extend(sig[d].iter().copied());
                } else {
                    s.insert((l, block[d]));
                }
            }
            sig[c] = s;
        }
        let mut ids: HashMap<(usize, &BTreeSet<(Label, usize)>), usize> = HashMap::new();
        let next: Vec<usize> = (0..ncomp)
            .map(|c| {
                let k = ids.len();
                *ids.entry((block[c], &sig[c])).or_insert(k)
            })
            .collect();
        let new_count = ids.len();
        block = next;
        if new_count == count {
            break;
        }
        count = new_count;
    }
    (0..n).map(|u| block[comp[u]]).collect()
}

/// A failed clause of the branching-bisimulation definition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub pair: (usize, usize),
    /// The offending move of the first component, if any.
    pub step: Option<(Label, usize)>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some((_, t)) => write!(f, "states {} and {}: move to {t} unmatched", self.pair.0, self.pair.1),
            None => write!(f, "states {} and {}: selection status differs", self.pair.0, self.pair.1),
        }
    }
}

/// Checks every clause of the definition directly for the relation "same
/// class", independent of how the classes were computed.
pub fn verify_branching_bisimulation(lts: &Lts, class: &[usize]) -> Result<(), Violation> {
    let n = lts.len();
    let closure: Vec<Vec<usize>> = (0..n)
        .map(|u| {
            let mut seen = vec![u];
            let mut set: HashSet<usize> = HashSet::from([u]);
            let mut i = 0;
            while i < seen.len() {
                for &(l, v) in &lts.edges[seen[i]] {
                    if l.is_silent() && set.insert(v) {
                        seen.push(v);
                    }
                }
                i += 1;
            }
            seen
        })
        .collect();
    let mut members: HashMap<usize, Vec<usize>> = HashMap::new();
    for u in 0..n {
        members.entry(class[u]).or_default().push(u);
    }
    for group in members.values() {
        for &p in group {
            for &q in group {
                if !same_status(&lts.states[p], &lts.states[q]) {
                    return Err(Violation { pair: (p, q), step: None });
                }
                for &(l, p2) in &lts.edges[p] {
                    if l.is_silent() && class[p2] == class[q] {
                        continue;
                    }
                    let matched = closure[q].iter().any(|&q1| {
                        class[q1] == class[p] && lts.edges[q1].iter().any(|&(m, q2)| m == l && class[q2] == class[p2])
                    });
                    if !matched {
                        return Err(Violation {
                            pair: (p, q),
                            step: Some((l, p2)),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Exact check on the union of the two reachable fragments, or `Unknown`
/// when they do not close within `budget` states.
pub fn check_finite_exact(sys: &PdaSystem, left: &Process, right: &Process, budget: usize) -> Result<Verdict, EquivError> {
    let lts = match reachable_lts(sys, &[left.clone(), right.clone()], Explore { budget, prune: true })? {
        Ok(l) => l,
        Err(e) => {
            return Ok(Verdict::Unknown {
                spent: e.explored as u64,
            })
        }
    };
    let class = branching_partition(&lts);
    let mut pruner = Pruner::new(sys);
    let i = lts.index_of(&pruner.prune(left)).expect("root is explored");
    let j = lts.index_of(&pruner.prune(right)).expect("root is explored");
    if class[i] == class[j] {
        debug_assert!(verify_branching_bisimulation(&lts, &class).is_ok());
        return Ok(Verdict::Equivalent(Witness { lts, class }));
    }
    // On a finite fragment a cap of its size is exact.
    let opts = GameOptions {
        cap: StutterCap::Fixed(lts.len()),
        ..GameOptions::default()
    };
    let mut game = Game::new(sys, opts)?;
    let start = Config::new(lts.states[i].clone(), lts.states[j].clone());
    let limit = (lts.len() * lts.len()) as u32 + 1;
    match game.solve(&start, limit) {
        Ok(s) => match s.winner {
            Winner::AttackerWins(d) => Ok(Verdict::Inequivalent {
                depth: Some(d),
                line: s.line,
            }),
            Winner::DefenderSurvives(_) => Ok(Verdict::Inequivalent {
                depth: None,
                line: Vec::new(),
            }),
        },
        Err(GameError::Exhausted) => Ok(Verdict::Inequivalent {
            depth: None,
            line: Vec::new(),
        }),
        Err(e) => Err(e.into()),
    }
}

/// Decides `≃ₖ` under the game's stutter cap; `Unknown` when the search
/// budget runs out.
pub fn check_bounded(
    sys: &PdaSystem,
    left: &Process,
    right: &Process,
    k: u32,
    opts: GameOptions,
) -> Result<Outcome, EquivError> {
    let mut game = Game::new(sys, opts)?;
    let (l, r) = (game.normalize(left), game.normalize(right));
    match game.survives(&l, &r, k) {
        Ok(true) => Ok(Outcome::Yes),
        Ok(false) => Ok(Outcome::No),
        Err(GameError::Exhausted) => Ok(Outcome::Unknown),
        Err(e) => Err(e.into()),
    }
}

/// Iterative deepening over `≃ₖ` along `schedule`. Only Attacker wins are
/// reported; surviving the whole schedule gives `Unknown`.
pub fn semidecide_inequivalence(
    sys: &PdaSystem,
    left: &Process,
    right: &Process,
    schedule: &[u32],
    opts: GameOptions,
) -> Result<Verdict, EquivError> {
    if !sys.flavor().finitely_branching() {
        return Err(EquivError::NotFinitelyBranching);
    }
    let mut game = Game::new(sys, opts)?;
    let start = Config::new(game.normalize(left), game.normalize(right));
    for &k in schedule {
        match game.survives(&start.left, &start.right, k) {
            Ok(true) => continue,
            Ok(false) => {
                let solved = game.solve(&start, k)?;
                let Winner::AttackerWins(d) = solved.winner else {
                    unreachable!("solver disagrees with its own memo")
                };
                return Ok(Verdict::Inequivalent {
                    depth: Some(d),
                    line: solved.line,
                });
            }
            Err(GameError::Exhausted) => break,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Verdict::Unknown { spent: game.work() })
}

/// Which checker produced a judgement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OracleId {
    /// Exact on fragments closing within this many states.
    Exact { budget: usize },
    /// `≃ₖ` at this depth.
    Bounded { depth: u32 },
}

impl fmt::Display for OracleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleId::Exact { budget } => write!(f, "exact(budget {budget})"),
            OracleId::Bounded { depth } => write!(f, "bounded(k = {depth})"),
        }
    }
}

/// A judgement of `P ≃ Q` with its source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Evidence {
    pub oracle: OracleId,
    pub verdict: Outcome,
}

/// Something that judges equivalence of two terms of one system.
pub trait Oracle<'a> {
    fn system(&self) -> &'a PdaSystem;
    fn judge(&mut self, p: &Process, q: &Process) -> Result<Evidence, EquivError>;
}

/// `check_finite_exact` with a cache.
pub struct ExactOracle<'a> {
    sys: &'a PdaSystem,
    budget: usize,
    cache: HashMap<(Process, Process), Outcome>,
}

impl<'a> ExactOracle<'a> {
    pub fn new(sys: &'a PdaSystem, budget: usize) -> Self {
        ExactOracle {
            sys,
            budget,
            cache: HashMap::new(),
        }
    }
}

impl<'a> Oracle<'a> for ExactOracle<'a> {
    fn system(&self) -> &'a PdaSystem {
        self.sys
    }

    fn judge(&mut self, p: &Process, q: &Process) -> Result<Evidence, EquivError> {
        let oracle = OracleId::Exact { budget: self.budget };
        let key = (p.clone(), q.clone());
        if let Some(&verdict) = self.cache.get(&key) {
            return Ok(Evidence { oracle, verdict });
        }
        let verdict = if p == q {
            Outcome::Yes
        } else {
            check_finite_exact(self.sys, p, q, self.budget)?.outcome()
        };
        self.cache.insert(key, verdict);
        Ok(Evidence { oracle, verdict })
    }
}

/// `≃ₖ` at a fixed depth, sharing one game memo across queries.
pub struct BoundedOracle<'a> {
    game: Game<'a>,
    depth: u32,
}

impl<'a> BoundedOracle<'a> {
    pub fn new(sys: &'a PdaSystem, depth: u32, opts: GameOptions) -> Result<Self, EquivError> {
        Ok(BoundedOracle {
            game: Game::new(sys, opts)?,
            depth,
        })
    }
}

impl<'a> Oracle<'a> for BoundedOracle<'a> {
    fn system(&self) -> &'a PdaSystem {
        self.game.system()
    }

    fn judge(&mut self, p: &Process, q: &Process) -> Result<Evidence, EquivError> {
        let (p, q) = (self.game.normalize(p), self.game.normalize(q));
        let verdict = match self.game.survives(&p, &q, self.depth) {
            Ok(true) => Outcome::Yes,
            Ok(false) => Outcome::No,
            Err(GameError::Exhausted) => Outcome::Unknown,
            Err(e) => return Err(e.into()),
        };
        Ok(Evidence {
            oracle: OracleId::Bounded { depth: self.depth },
            verdict,
        })
    }
}

/// Exact when the fragment closes, `≃ₖ` otherwise.
pub struct HybridOracle<'a> {
    exact: ExactOracle<'a>,
    bounded: BoundedOracle<'a>,
}

impl<'a> HybridOracle<'a> {
    pub fn new(sys: &'a PdaSystem, budget: usize, depth: u32, opts: GameOptions) -> Result<Self, EquivError> {
        Ok(HybridOracle {
            exact: ExactOracle::new(sys, budget),
            bounded: BoundedOracle::new(sys, depth, opts)?,
        })
    }
}

impl<'a> Oracle<'a> for HybridOracle<'a> {
    fn system(&self) -> &'a PdaSystem {
        self.exact.sys
    }

    fn judge(&mut self, p: &Process, q: &Process) -> Result<Evidence, EquivError> {
        let e = self.exact.judge(p, q)?;
        if e.verdict != Outcome::Unknown {
            return Ok(e);
        }
        self.bounded.judge(p, q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepClass {
    Preserving(Evidence),
    ChangeOfState(Evidence),
    /// The oracle could not decide; callers treat this conservatively.
    Unclassified(Evidence),
}

impl StepClass {
    pub fn evidence(&self) -> Evidence {
        match *self {
            StepClass::Preserving(e) | StepClass::ChangeOfState(e) | StepClass::Unclassified(e) => e,
        }
    }
}

/// Classifies the silent step `parent -ε-> child`.
pub fn classify_silent<'a>(oracle: &mut dyn Oracle<'a>, parent: &Process, child: &Process) -> Result<StepClass, EquivError> {
    let sys = oracle.system();
    let mut pr = Pruner::new(sys);
    let (pp, pc) = (pr.prune(parent), pr.prune(child));
    let is_step = pr.step(&pp)?.iter().any(|(l, t)| l.is_silent() && *t == pc);
    if !is_step {
        return Err(EquivError::NotSilentStep);
    }
    let e = oracle.judge(&pp, &pc)?;
    Ok(match e.verdict {
        Outcome::Yes => StepClass::Preserving(e),
        Outcome::No => StepClass::ChangeOfState(e),
        Outcome::Unknown => StepClass::Unclassified(e),
    })
}

/// `‖P‖`: least number of j-steps to each reachable selection.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Norm {
    pub values: BTreeMap<u32, u64>,
    /// False when the search ran out of budget or met unclassified steps;
    /// the table then holds upper bounds on a subset of the indices.
    pub complete: bool,
}

impl Norm {
    pub fn value(&self, h: u32) -> Option<u64> {
        self.values.get(&h).copied()
    }

    pub fn def_set(&self) -> BTreeSet<u32> {
        self.values.keys().copied().collect()
    }

    pub fn min_value(&self) -> Option<u64> {
        self.values.values().copied().min()
    }

    pub fn is_normed(&self) -> bool {
        !self.values.is_empty()
    }
}

/// 0-1 shortest paths where preserving silent steps are free and visible
/// or change-of-state steps cost one. Unclassified silent steps cost one
/// and mark the result incomplete.
pub fn norm<'a>(oracle: &mut dyn Oracle<'a>, term: &Process, budget: usize) -> Result<Norm, EquivError> {
    let sys = oracle.system();
    let mut pr = Pruner::new(sys);
    let start = pr.prune(term);
    let mut dist: HashMap<Process, u64> = HashMap::from([(start.clone(), 0)]);
    let mut deque = VecDeque::from([(start, 0u64)]);
    let mut out = Norm {
        values: BTreeMap::new(),
        complete: true,
    };
    let mut edges: Vec<(Process, Vec<(Label, Process)>)> = Vec::new();
    while let Some((p, d)) = deque.pop_front() {
        if dist.get(&p).is_some_and(|&e| e < d) {
            continue;
        }
        if let Some(h) = p.as_sel() {
            let e = out.values.entry(h).or_insert(d);
            *e = (*e).min(d);
            continue;
        }
        if dist.len() > budget {
            out.complete = false;
            break;
        }
        let succ = pr.step(&p)?;
        edges.push((p.clone(), succ.clone()));
        for (l, q) in succ {
            let w = if l.is_silent() {
                match classify_silent(oracle, &p, &q)? {
                    StepClass::Preserving(_) => 0,
                    StepClass::ChangeOfState(_) => 1,
                    StepClass::Unclassified(_) => {
                        out.complete = false;
                        1
                    }
                }
            } else {
                1
            };
            let nd = d + w;
            if dist.get(&q).is_none_or(|&e| nd < e) {
                dist.insert(q.clone(), nd);
                if w == 0 {
                    deque.push_front((q, nd));
                } else {
                    deque.push_back((q, nd));
                }
            }
        }
    }
    Ok(out)
}

/// Outcome of [`check_chain_bound`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainReport {
    /// `𝔮𝔫𝔯(𝔪 + 1)^𝔮`, saturating.
    pub bound: u128,
    /// Longest preserving silent chain seen.
    pub longest: usize,
    /// True when some step could not be classified or the search was cut.
    pub advisory: bool,
}

impl ChainReport {
    /// Without any preserving step there is no chain to bound; this matters
    /// when `𝔯 = 0` makes the bound itself zero.
    pub fn holds(&self) -> bool {
        self.longest == 0 || (self.longest as u128) < self.bound
    }
}

/// Longest chains of preserving silent steps from `roots`, against the
/// bound for ε-pushing normed systems.
pub fn check_chain_bound<'a>(oracle: &mut dyn Oracle<'a>, roots: &[Process], budget: usize) -> Result<ChainReport, EquivError> {
    let sys = oracle.system();
    let f = sys.flavor();
    if !(f.eps_pushing && f.normed) {
        return Err(EquivError::NotPushingNormed);
    }
    let c = sys.constants();
    let base = (c.q_count as u128) * (c.n_count as u128) * (c.r_max as u128);
    let bound = base.saturating_mul((c.m_bound as u128 + 1).saturating_pow(c.q_count as u32));
    let mut pr = Pruner::new(sys);
    let mut report = ChainReport {
        bound,
        longest: 0,
        advisory: false,
    };
    let mut explored = 0usize;
    for root in roots {
        // Depth-first over preserving steps, keeping the current path to
        // stop at cycles.
        let root = pr.prune(root);
        let mut stack: Vec<(Process, Vec<Process>, usize)> = Vec::new();
        let mut on_path: Vec<Process> = vec![root.clone()];
        let first = silent_children(&mut pr, &root)?;
        stack.push((root, first, 0));
        while let Some((p, kids, i)) = stack.last_mut() {
            if *i == kids.len() {
                stack.pop();
                on_path.pop();
                continue;
            }
            let q = kids[*i].clone();
            *i += 1;
            let p = p.clone();
            explored += 1;
            if explored > budget || on_path.len() as u128 > bound {
                report.advisory = true;
                stack.clear();
                break;
            }
            match classify_silent(oracle, &p, &q)? {
                StepClass::Preserving(_) => {}
                StepClass::ChangeOfState(_) => continue,
                StepClass::Unclassified(_) => {
                    report.advisory = true;
                    continue;
                }
            }
            report.longest = report.longest.max(on_path.len());
            if on_path.contains(&q) {
                continue;
            }
            let kids = silent_children(&mut pr, &q)?;
            on_path.push(q.clone());
            stack.push((q, kids, 0));
        }
    }
    Ok(report)
}

fn silent_children(pr: &mut Pruner, p: &Process) -> Result<Vec<Process>, TermError> {
    let mut v: Vec<Process> = pr.step(p)?.into_iter().filter(|(l, _)| l.is_silent()).map(|(_, q)| q).collect();
    v.dedup();
    Ok(v)
}
