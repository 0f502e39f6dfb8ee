//! Normal processes and the two decompositions behind `Rdcp-`/`Ldcp-`
//! (and the left part of `Decmp+`).

use std::collections::{HashMap, HashSet, VecDeque};

use super::{Goal, Judge, SideEvidence};
use crate::equivalence::EquivError;
use crate::lts::Outcome;
use crate::system::{Label, PdaSystem};
use crate::term::{compose, compose_constants, cut_tuple, Constant, Node, Process, TermError, Tuple};

/// Verdict of the normality check, with the subterm that decided it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Normality {
    Normal,
    NotNormal { blocking: Process },
    /// Some silent step could not be classified.
    Undetermined { blocking: Process },
}

/// Silent successors of `p` that the judge calls preserving; `None` when
/// some step is unclassified.
fn preserving_successors(
    sys: &PdaSystem,
    judge: &mut Judge,
    p: &Process,
    evidence: &mut Vec<SideEvidence>,
) -> Result<Option<Vec<Process>>, EquivError> {
    let mut out = Vec::new();
    let mut unknown = false;
    for (l, t) in sys.step(p)? {
        if !l.is_silent() {
            continue;
        }
        let e = judge.judge(sys, p, &t)?;
        match e.verdict {
            Outcome::Yes => {
                evidence.push(SideEvidence {
                    condition: "preserving step".into(),
                    evidence: e,
                });
                out.push(t)
            }
            Outcome::No => {}
            Outcome::Unknown => unknown = true,
        }
    }
    Ok(if unknown { None } else { Some(out) })
}

/// Whether `start →* target` along preserving silent steps. `None` when
/// the answer hinges on an unclassified step or the search is cut off.
fn preserving_path(
    sys: &PdaSystem,
    judge: &mut Judge,
    start: &Process,
    target: &Process,
    limit: usize,
    evidence: &mut Vec<SideEvidence>,
) -> Result<Option<bool>, EquivError> {
    if start == target {
        return Ok(Some(true));
    }
    let mut seen: HashSet<Process> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    let mut complete = true;
    while let Some(u) = queue.pop_front() {
        if seen.len() > limit {
            return Ok(None);
        }
        match preserving_successors(sys, judge, &u, evidence)? {
            None => complete = false,
            Some(vs) => {
                for v in vs {
                    if v == *target {
                        return Ok(Some(true));
                    }
                    if seen.insert(v.clone()) {
                        queue.push_back(v);
                    }
                }
            }
        }
    }
    Ok(if complete { Some(false) } else { None })
}

/// `P ◁ PC`: selections (and `0`) are normal; `pX(P1, …, Pn)` is normal
/// when every `Pi` is normal in `PiC` and no preserving silent path leads
/// from `pX(P1, …, Pn)C` to `PiC`.
pub fn is_normal(
    sys: &PdaSystem,
    term: &Process,
    cont: &Constant,
    judge: &mut Judge,
) -> Result<(Normality, Vec<SideEvidence>), EquivError> {
    let mut evidence = Vec::new();
    let n = normal_in(sys, term, cont, judge, &mut evidence)?;
    Ok((n, evidence))
}

fn normal_in(
    sys: &PdaSystem,
    term: &Process,
    cont: &Constant,
    judge: &mut Judge,
    evidence: &mut Vec<SideEvidence>,
) -> Result<Normality, EquivError> {
    let Some((_, _, c)) = term.as_seq() else {
        return Ok(if term.is_simple() {
            Normality::Normal
        } else {
            Normality::Undetermined { blocking: term.clone() }
        });
    };
    let Some(entries) = c.as_tuple() else {
        return Ok(Normality::Undetermined { blocking: term.clone() });
    };
    let whole = compose(term, cont, sys.recs())?;
    let limit = judge.spec().budget;
    for e in entries.entries() {
        match normal_in(sys, e, cont, judge, evidence)? {
            Normality::Normal => {}
            other => return Ok(other),
        }
        let target = compose(e, cont, sys.recs())?;
        match preserving_path(sys, judge, &whole, &target, limit, evidence)? {
            Some(false) => {}
            Some(true) => return Ok(Normality::NotNormal { blocking: term.clone() }),
            None => return Ok(Normality::Undetermined { blocking: term.clone() }),
        }
    }
    Ok(Normality::Normal)
}

/// Why a decomposition could not be built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecomposeFailure {
    /// The goal does not have the required shape.
    Shape,
    NotNormal(Process),
    Undetermined(Process),
    /// No response on the other side reaches the continuation.
    NoCandidate(u32),
    /// `|Ul|` exceeds `rm + 1`.
    TooDeep(u32),
}

/// `sYB = sY(Ur·D)` with `Ur` normal in `Ur·D` and `|Ur| ≤ m`.
#[derive(Clone, Debug)]
pub struct RightDecomposition {
    pub ur: Tuple,
    pub d: Tuple,
    /// One-step preserving silent rewrites `oZN = N'` used to reach `Ur·D`.
    pub aux: Vec<Goal>,
    /// `sY(Ur·D)`.
    pub rewritten: Process,
    pub evidence: Vec<SideEvidence>,
}

fn as_entries(sys: &PdaSystem, c: &Constant) -> Result<Vec<Process>, TermError> {
    match c {
        Constant::Tuple(t) => Ok(t.entries().to_vec()),
        Constant::Rec(_) => {
            let n = c.arity(sys.recs())?;
            (1..=n as u32).map(|i| c.select(i, sys.recs())).collect()
        }
    }
}

struct Reducer<'a, 'j> {
    sys: &'a PdaSystem,
    judge: &'j mut Judge,
    m: u32,
    aux: Vec<Goal>,
    evidence: Vec<SideEvidence>,
}

impl Reducer<'_, '_> {
    /// Follows preserving silent steps from `p` until one of them exposes
    /// the continuation; returns the step sequence.
    fn popping_path(&mut self, p: &Process) -> Result<Option<Vec<Process>>, EquivError> {
        let Some((_, _, n)) = p.as_seq() else { return Ok(None) };
        let n = n.clone();
        let limit = self.judge.spec().budget.min(256);
        let mut parent: HashMap<Process, Process> = HashMap::new();
        let mut queue = VecDeque::from([p.clone()]);
        let mut seen = HashSet::from([p.clone()]);
        while let Some(u) = queue.pop_front() {
            if seen.len() > limit {
                break;
            }
            let Some(succ) = preserving_successors(self.sys, self.judge, &u, &mut self.evidence)? else {
                continue;
            };
            for v in succ {
                if !seen.insert(v.clone()) {
                    continue;
                }
                parent.insert(v.clone(), u.clone());
                // A pop lands on an entry of the original continuation.
                let popped = (1..=n.arity(self.sys.recs())? as u32)
                    .any(|k| n.select(k, self.sys.recs()).ok().as_ref() == Some(&v));
                if popped || v.is_nil() || v.as_sel().is_some() {
                    let mut path = vec![v.clone()];
                    let mut cur = v;
                    while let Some(w) = parent.get(&cur) {
                        path.push(w.clone());
                        cur = w.clone();
                    }
                    path.reverse();
                    return Ok(Some(path));
                }
                if v.as_seq().is_some() && v.depth() == u.depth() {
                    queue.push_back(v);
                }
            }
        }
        Ok(None)
    }

    fn reduce(&mut self, p: &Process, level: u32) -> Result<Process, EquivError> {
        let mut cur = p.clone();
        let mut seen = HashSet::new();
        loop {
            if !seen.insert(cur.clone()) {
                return Ok(cur);
            }
            match cur.node() {
                Node::Nil | Node::Sel(_) => return Ok(cur),
                Node::RecSel { index, name } => {
                    cur = self.sys.recs().unfold(name, *index)?;
                }
                Node::Seq { state, symbol, cont } => {
                    if let Some(path) = self.popping_path(&cur)? {
                        for w in path.windows(2) {
                            self.aux.push(Goal::new(w[0].clone(), w[1].clone()));
                        }
                        cur = path.last().unwrap().clone();
                        continue;
                    }
                    if level >= self.m {
                        return Ok(cur);
                    }
                    let (state, symbol) = (*state, *symbol);
                    let entries = as_entries(self.sys, cont)?;
                    let reduced = entries
                        .iter()
                        .map(|e| self.reduce(e, level + 1))
                        .collect::<Result<Vec<_>, _>>()?;
                    return Ok(Process::seq(state, symbol, Constant::tuple(reduced)));
                }
            }
        }
    }
}

/// Rewrites the right side `sYB` into `sY(Ur·D)`: entries that silently
/// and preservingly pop are replaced by what they pop to (recording each
/// step as an auxiliary equality), recursive constants are unfolded down to
/// depth `m`, and the result is cut at depth `m`.
pub fn decompose_right(
    sys: &PdaSystem,
    goal: &Goal,
    m: u32,
    judge: &mut Judge,
) -> Result<Result<RightDecomposition, DecomposeFailure>, EquivError> {
    let Some((s, y, b)) = goal.right.as_seq() else {
        return Ok(Err(DecomposeFailure::Shape));
    };
    let mut r = Reducer {
        sys,
        judge,
        m,
        aux: Vec::new(),
        evidence: Vec::new(),
    };
    let entries = as_entries(sys, b)?;
    let u: Vec<Process> = entries
        .iter()
        .map(|e| r.reduce(e, 0))
        .collect::<Result<_, _>>()?;
    let cut = cut_tuple(&Tuple::new(u.clone()), m);
    let (ur, d) = (cut.prefix, cut.residual);
    let d_const = Constant::Tuple(d.clone());
    for e in ur.entries() {
        match normal_in(sys, e, &d_const, r.judge, &mut r.evidence)? {
            Normality::Normal => {}
            Normality::NotNormal { blocking } => return Ok(Err(DecomposeFailure::NotNormal(blocking))),
            Normality::Undetermined { blocking } => return Ok(Err(DecomposeFailure::Undetermined(blocking))),
        }
    }
    let rewritten = Process::seq(s, y, Constant::tuple(u));
    Ok(Ok(RightDecomposition {
        ur,
        d,
        aux: r.aux,
        rewritten,
        evidence: r.evidence,
    }))
}

/// `rXA` against `sY(Ur·D)`: `Ul = (G1, …, Gq)` with children `A(i) = Gi·D`.
#[derive(Clone, Debug)]
pub struct LeftDecomposition {
    pub ul: Tuple,
    /// `A(i) = Gi·D` for every index the head can pop to.
    pub children: Vec<Goal>,
    /// `rX(Ul·D) = sY(Ur·D)`.
    pub main: Goal,
    pub evidence: Vec<SideEvidence>,
}

/// Shortest label word taking the standard process `rX` to selection `h`.
fn emptying_word(sys: &PdaSystem, start: &Process, h: u32, limit: usize) -> Result<Option<Vec<Label>>, TermError> {
    let mut parent: HashMap<Process, (Process, Label)> = HashMap::new();
    let mut queue = VecDeque::from([start.clone()]);
    let mut seen = HashSet::from([start.clone()]);
    while let Some(u) = queue.pop_front() {
        if u.as_sel() == Some(h) {
            let mut word = Vec::new();
            let mut cur = u;
            while let Some((w, l)) = parent.get(&cur) {
                word.push(*l);
                cur = w.clone();
            }
            word.reverse();
            return Ok(Some(word));
        }
        if seen.len() > limit {
            break;
        }
        for (l, v) in sys.step(&u)? {
            if seen.insert(v.clone()) {
                parent.insert(v.clone(), (u.clone(), l));
                queue.push_back(v);
            }
        }
    }
    Ok(None)
}

/// Prefix terms reachable from `start` reading the visible projection of
/// `word`, silent steps being free, in breadth-first order.
fn responders(sys: &PdaSystem, start: &Process, word: &[Label], limit: usize) -> Result<Vec<Process>, TermError> {
    let visible: Vec<Label> = word.iter().copied().filter(|l| !l.is_silent()).collect();
    let mut seen: HashSet<(Process, usize)> = HashSet::from([(start.clone(), 0)]);
    let mut queue = VecDeque::from([(start.clone(), 0usize)]);
    let mut out = Vec::new();
    while let Some((u, k)) = queue.pop_front() {
        if k == visible.len() && !out.contains(&u) {
            out.push(u.clone());
        }
        if seen.len() > limit || u.as_sel().is_some() {
            continue;
        }
        for (l, v) in sys.step(&u)? {
            let nk = if l.is_silent() {
                k
            } else if k < visible.len() && visible[k] == l {
                k + 1
            } else {
                continue;
            };
            if seen.insert((v.clone(), nk)) {
                queue.push_back((v, nk));
            }
        }
    }
    Ok(out)
}

/// Decomposes the left side against a decomposed right side: for each
/// index `h` the head `rX` can pop to, the shortest emptying word of `rX`
/// is replayed from the right prefix `sY·Ur`, and a reached prefix `Q` with
/// `|Q| ≤ m + 1` becomes `Gh` (the first one the judge accepts for
/// `A(h) = Q·D`, else the first one). Other entries are `0`.
pub fn decompose_left(
    sys: &PdaSystem,
    goal: &Goal,
    right: &RightDecomposition,
    judge: &mut Judge,
) -> Result<Result<LeftDecomposition, DecomposeFailure>, EquivError> {
    let (Some((r, x, a)), Some((s, y, _))) = (goal.left.as_seq(), goal.right.as_seq()) else {
        return Ok(Err(DecomposeFailure::Shape));
    };
    let consts = sys.constants();
    let m = consts.m_bound as u32;
    let q = sys.num_states() as u32;
    let limit = judge.spec().budget;
    let prefix = Process::seq(s, y, Constant::Tuple(right.ur.clone()));
    let d = Constant::Tuple(right.d.clone());
    let head = sys.expand_standard(r, &[x]);
    let mut g = vec![Process::nil(); q as usize];
    let mut children = Vec::new();
    let mut evidence = Vec::new();
    for h in 1..=q {
        if sys.pop_distance(r, x, crate::term::StateId(h - 1)).is_none() {
            continue;
        }
        let Some(word) = emptying_word(sys, &head, h, limit)? else {
            continue;
        };
        let cands: Vec<Process> = responders(sys, &prefix, &word, limit)?
            .into_iter()
            .filter(|c| c.depth() <= m + 1)
            .collect();
        if cands.is_empty() {
            return Ok(Err(DecomposeFailure::NoCandidate(h)));
        }
        let ah = compose(&Process::sel(h), a, sys.recs())?;
        let mut chosen = None;
        for c in &cands {
            let full = compose(c, &d, sys.recs())?;
            let e = judge.judge(sys, &ah, &full)?;
            if e.verdict == Outcome::Yes {
                evidence.push(SideEvidence {
                    condition: format!("A({h}) = G{h}D"),
                    evidence: e,
                });
                chosen = Some(c.clone());
                break;
            }
        }
        let gh = chosen.unwrap_or_else(|| cands[0].clone());
        children.push(Goal::new(ah, compose(&gh, &d, sys.recs())?));
        g[h as usize - 1] = gh;
    }
    let ul = Tuple::new(g);
    let bound = consts.r_max as u32 * m + 1;
    let depth = Constant::Tuple(ul.clone()).depth();
    if depth > bound {
        return Ok(Err(DecomposeFailure::TooDeep(depth)));
    }
    let left = Process::seq(r, x, compose_constants(&Constant::Tuple(ul.clone()), &d, sys.recs())?);
    let main = Goal::new(left, right.rewritten.clone());
    Ok(Ok(LeftDecomposition {
        ul,
        children,
        main,
        evidence,
    }))
}
