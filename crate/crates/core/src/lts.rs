//! Explicit reachable fragments and word acceptance.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use crate::parse::Printer;
use crate::system::{Label, PdaSystem, Pruner};
use crate::term::{Process, TermError};

/// A finite labelled transition graph over terms. State 0 is the first root.
#[derive(Clone, Debug)]
pub struct Lts {
    pub states: Vec<Process>,
    pub edges: Vec<Vec<(Label, usize)>>,
    index: HashMap<Process, usize>,
}

impl Lts {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, p: &Process) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Longest shortest-path distance from state 0, ignoring labels.
    pub fn diameter_from(&self, root: usize) -> usize {
        let mut dist = vec![usize::MAX; self.len()];
        dist[root] = 0;
        let mut q = VecDeque::from([root]);
        let mut best = 0;
        while let Some(u) = q.pop_front() {
            best = best.max(dist[u]);
            for &(_, v) in &self.edges[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        best
    }

    /// Text listing: one line per state, then one per transition.
    pub fn render(&self, sys: &PdaSystem) -> String {
        let mut pr = Printer::new(sys);
        let mut out = String::new();
        for (i, s) in self.states.iter().enumerate() {
            let _ = writeln!(out, "state {i} {}", pr.term(s));
        }
        for (i, es) in self.edges.iter().enumerate() {
            for (l, j) in es {
                let _ = writeln!(out, "edge {i} {} {j}", sys.label_name(*l));
            }
        }
        out
    }

    pub fn render_dot(&self, sys: &PdaSystem) -> String {
        let mut pr = Printer::new(sys);
        let mut out = String::from("digraph lts {\n");
        for (i, s) in self.states.iter().enumerate() {
            let _ = writeln!(out, "  n{i} [label=\"{}\"];", pr.term(s).replace('"', "\\\""));
        }
        for (i, es) in self.edges.iter().enumerate() {
            for (l, j) in es {
                let _ = writeln!(out, "  n{i} -> n{j} [label=\"{}\"];", sys.label_name(*l));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Result of an exploration that ran out of budget.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exceeded {
    pub explored: usize,
    pub frontier: usize,
}

/// Exploration settings.
#[derive(Clone, Copy, Debug)]
pub struct Explore {
    pub budget: usize,
    /// Rewrite unreachable continuation entries (see [`Pruner`]).
    pub prune: bool,
}

impl Default for Explore {
    fn default() -> Self {
        Explore {
            budget: 10_000,
            prune: true,
        }
    }
}

/// The fragment reachable from `roots`, or `Exceeded` if more than
/// `budget` states are reachable.
pub fn reachable_lts(
    sys: &PdaSystem,
    roots: &[Process],
    opts: Explore,
) -> Result<Result<Lts, Exceeded>, TermError> {
    let mut pr = Pruner::new(sys);
    let mut lts = Lts {
        states: Vec::new(),
        edges: Vec::new(),
        index: HashMap::new(),
    };
    let mut queue = VecDeque::new();
    let add = |lts: &mut Lts, p: Process, queue: &mut VecDeque<usize>| -> usize {
        if let Some(&i) = lts.index.get(&p) {
            return i;
        }
        let i = lts.states.len();
        lts.states.push(p.clone());
        lts.edges.push(Vec::new());
        lts.index.insert(p, i);
        queue.push_back(i);
        i
    };
    for r in roots {
        let r = if opts.prune { pr.prune(r) } else { r.clone() };
        add(&mut lts, r, &mut queue);
    }
    while let Some(i) = queue.pop_front() {
        if lts.states.len() > opts.budget {
            return Ok(Err(Exceeded {
                explored: i,
                frontier: queue.len() + 1,
            }));
        }
        let p = lts.states[i].clone();
        let succ = if opts.prune { pr.step(&p)? } else { sys.step(&p)? };
        let mut es = Vec::with_capacity(succ.len());
        for (l, d) in succ {
            let j = add(&mut lts, d, &mut queue);
            es.push((l, j));
        }
        es.sort();
        es.dedup();
        lts.edges[i] = es;
    }
    if lts.states.len() > opts.budget {
        let n = lts.states.len();
        return Ok(Err(Exceeded {
            explored: n,
            frontier: 0,
        }));
    }
    Ok(Ok(lts))
}

/// Three-valued outcome of a budgeted search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Yes,
    No,
    Unknown,
}

/// Whether `p` can reach a selection process along `word`, interleaving
/// silent steps. Explores at most `budget` (term, position) pairs.
pub fn accepts(sys: &PdaSystem, p: &Process, word: &[Label], budget: usize) -> Result<Outcome, TermError> {
    debug_assert!(word.iter().all(|l| !l.is_silent()));
    let mut pr = Pruner::new(sys);
    let start = pr.prune(p);
    let mut seen: HashSet<(Process, usize)> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert((start.clone(), 0));
    queue.push_back((start, 0));
    while let Some((t, pos)) = queue.pop_front() {
        if pos == word.len() && t.as_sel().is_some() {
            return Ok(Outcome::Yes);
        }
        if seen.len() > budget {
            return Ok(Outcome::Unknown);
        }
        for (l, d) in pr.step(&t)? {
            let next = if l.is_silent() {
                pos
            } else if pos < word.len() && word[pos] == l {
                pos + 1
            } else {
                continue;
            };
            if seen.insert((d.clone(), next)) {
                queue.push_back((d, next));
            }
        }
    }
    Ok(Outcome::No)
}
