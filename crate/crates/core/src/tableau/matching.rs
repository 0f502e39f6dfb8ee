//! Matches: the child equalities induced by all one-step transitions.

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use super::{Goal, Judge, SideEvidence};
use crate::equivalence::EquivError;
use crate::game::same_status;
use crate::system::{Label, PdaSystem, Pruner};
use crate::term::Process;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchError {
    #[error("no match: a transition has no response")]
    NoMatch,
    #[error("no match within the stutter cap")]
    CapExhausted,
    #[error(transparent)]
    Equiv(#[from] EquivError),
}

type Steps = HashMap<Process, Vec<(Label, Process)>>;

fn steps<'s>(pr: &mut Pruner, memo: &'s mut Steps, p: &Process) -> Result<&'s [(Label, Process)], EquivError> {
    if !memo.contains_key(p) {
        let mut v = pr.step(p)?;
        v.sort();
        v.dedup();
        memo.insert(p.clone(), v);
    }
    Ok(&memo[p])
}

/// One response to `attacker -ℓ-> target` from `defender`: the pairs it
/// requires, oriented (attacker side, defender side).
enum Found {
    Pairs(Vec<(Process, Process)>),
    None { capped: bool },
}

/// Shortest response, preferring one whose pairs `accept` approves.
#[allow(clippy::too_many_arguments)]
fn respond(
    pr: &mut Pruner,
    memo: &mut Steps,
    attacker: &Process,
    label: Label,
    target: &Process,
    defender: &Process,
    cap: usize,
    accept: &mut dyn FnMut(&Process, &Process) -> Result<bool, EquivError>,
) -> Result<Found, EquivError> {
    if label.is_silent() && accept(target, defender)? {
        return Ok(Found::Pairs(vec![(target.clone(), defender.clone())]));
    }
    let mut parent: HashMap<Process, Option<Process>> = HashMap::from([(defender.clone(), None)]);
    let mut layer = vec![defender.clone()];
    let mut capped = false;
    for depth in 0..=cap {
        for y in &layer {
            let succ = steps(pr, memo, y)?.to_vec();
            for (l, y2) in succ {
                if l == label && accept(target, &y2)? {
                    let mut pairs = vec![(target.clone(), y2.clone())];
                    let mut cur = y.clone();
                    while let Some(Some(p)) = parent.get(&cur) {
                        pairs.push((attacker.clone(), cur.clone()));
                        cur = p.clone();
                    }
                    return Ok(Found::Pairs(pairs));
                }
            }
        }
        let mut next = Vec::new();
        for y in &layer {
            let succ = steps(pr, memo, y)?.to_vec();
            for (l, y2) in succ {
                if l.is_silent() && !parent.contains_key(&y2) {
                    if depth == cap {
                        capped = true;
                        continue;
                    }
                    if accept(attacker, &y2)? {
                        parent.insert(y2.clone(), Some(y.clone()));
                        next.push(y2);
                    }
                }
            }
        }
        layer = next;
    }
    Ok(Found::None { capped })
}

/// A minimal match for `goal`, with responses chosen so that the oracle
/// accepts every child when it can. Without such a choice the shortest
/// legal response is used, so a match exists iff every transition has
/// some response within `cap` silent steps.
pub fn compute_match(
    sys: &PdaSystem,
    goal: &Goal,
    judge: &mut Judge,
    cap: usize,
) -> Result<(Vec<Goal>, Vec<SideEvidence>), MatchError> {
    let mut pr = Pruner::new(sys);
    let mut memo = Steps::new();
    let (p, q) = (pr.prune(&goal.left), pr.prune(&goal.right));
    if !same_status(&p, &q) {
        return Err(MatchError::NoMatch);
    }
    let mut set: BTreeSet<(Process, Process)> = BTreeSet::new();
    let mut evidence = Vec::new();
    for flip in [false, true] {
        let (a, d) = if flip { (&q, &p) } else { (&p, &q) };
        let moves = steps(&mut pr, &mut memo, a)?.to_vec();
        for (l, t) in moves {
            let mut guided = |x: &Process, y: &Process| -> Result<bool, EquivError> {
                let (l, r) = if flip { (y, x) } else { (x, y) };
                judge.holds(sys, l, r)
            };
            let found = match respond(&mut pr, &mut memo, a, l, &t, d, cap, &mut guided)? {
                Found::Pairs(v) => Found::Pairs(v),
                Found::None { .. } => respond(&mut pr, &mut memo, a, l, &t, d, cap, &mut |_, _| Ok(true))?,
            };
            match found {
                Found::Pairs(v) => {
                    for (x, y) in v {
                        set.insert(if flip { (y, x) } else { (x, y) });
                    }
                }
                Found::None { capped: true } => return Err(MatchError::CapExhausted),
                Found::None { capped: false } => return Err(MatchError::NoMatch),
            }
        }
    }
    // Drop elements that no clause needs.
    let mut kept: Vec<(Process, Process)> = set.into_iter().collect();
    let mut i = 0;
    while i < kept.len() {
        let trial: HashSet<(Process, Process)> = kept
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, e)| e.clone())
            .collect();
        if satisfies(&mut pr, &mut memo, &p, &q, &trial, cap)? {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    let children: Vec<Goal> = kept.into_iter().map(|(l, r)| Goal::new(l, r)).collect();
    for c in &children {
        evidence.push(SideEvidence {
            condition: "match child".into(),
            evidence: judge.judge(sys, &c.left, &c.right)?,
        });
    }
    Ok((children, evidence))
}

/// Whether `set` satisfies both match clauses for `(p, q)`.
pub(crate) fn satisfies(
    pr: &mut Pruner,
    memo: &mut Steps,
    p: &Process,
    q: &Process,
    set: &HashSet<(Process, Process)>,
    cap: usize,
) -> Result<bool, EquivError> {
    for flip in [false, true] {
        let (a, d) = if flip { (q, p) } else { (p, q) };
        let moves = steps(pr, memo, a)?.to_vec();
        for (l, t) in moves {
            let mut within = |x: &Process, y: &Process| -> Result<bool, EquivError> {
                let pair = if flip { (y.clone(), x.clone()) } else { (x.clone(), y.clone()) };
                Ok(set.contains(&pair))
            };
            if let Found::None { .. } = respond(pr, memo, a, l, &t, d, cap, &mut within)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Clause check for an arbitrary set of goals, used when verifying.
pub(crate) fn is_match(sys: &PdaSystem, goal: &Goal, children: &[Goal], cap: usize) -> Result<bool, EquivError> {
    let mut pr = Pruner::new(sys);
    let mut memo = Steps::new();
    let set: HashSet<(Process, Process)> = children
        .iter()
        .map(|g| (pr.prune(&g.left), pr.prune(&g.right)))
        .collect();
    let (p, q) = (pr.prune(&goal.left), pr.prune(&goal.right));
    if !same_status(&p, &q) {
        return Ok(false);
    }
    satisfies(&mut pr, &mut memo, &p, &q, &set, cap)
}

#[cfg(test)]
mod tests {
    use super::super::OracleSpec;
    use super::*;
    use crate::parse::{parse_system, parse_term};

    #[test]
    fn empty_matches() {
        let sys = parse_system("states p\nsymbols X\nactions a\nrule p X a -> p\n").unwrap();
        let mut j = Judge::new(OracleSpec::default());
        let nil = Goal::new(Process::nil(), Process::nil());
        assert!(compute_match(&sys, &nil, &mut j, 4).unwrap().0.is_empty());
        let one = Goal::new(Process::sel(1), Process::sel(1));
        assert!(compute_match(&sys, &one, &mut j, 4).unwrap().0.is_empty());
    }

    #[test]
    fn missing_response_is_no_match() {
        let sys = parse_system("states p q\nsymbols X\nactions a\nrule p X a -> p\n").unwrap();
        let mut j = Judge::new(OracleSpec::default());
        let g = Goal::new(parse_term(&sys, "p [X]").unwrap(), parse_term(&sys, "q [X]").unwrap());
        assert_eq!(compute_match(&sys, &g, &mut j, 4).unwrap_err(), MatchError::NoMatch);
    }

    #[test]
    fn match_is_minimal_and_valid() {
        let sys = parse_system(
            "states p q s z\nsymbols X\nactions a\nrule p X a -> z X\nrule q X eps -> s X\nrule s X a -> z X\nrule q X a -> z X\n",
        )
        .unwrap();
        let mut j = Judge::new(OracleSpec::default());
        let g = Goal::new(parse_term(&sys, "p [X]").unwrap(), parse_term(&sys, "q [X]").unwrap());
        let (m, _) = compute_match(&sys, &g, &mut j, 4).unwrap();
        assert!(is_match(&sys, &g, &m, 4).unwrap());
        for i in 0..m.len() {
            let mut fewer = m.clone();
            fewer.remove(i);
            assert!(!is_match(&sys, &g, &fewer, 4).unwrap());
        }
    }
}
