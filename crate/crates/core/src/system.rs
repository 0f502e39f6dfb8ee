//! Pushdown systems, their one-step semantics and static constants.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::graph::tarjan;
use crate::term::{compose, Constant, Node, Process, RecConstDef, RecTable, StateId, SymbolId, TermError, Tuple};

#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ActionId(pub u32);

/// A transition label: silent or a visible action.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Label {
    Silent,
    Visible(ActionId),
}

impl Label {
    pub fn is_silent(self) -> bool {
        self == Label::Silent
    }
}

/// `pX -ℓ-> qα`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Rule {
    pub head_state: StateId,
    pub head_symbol: SymbolId,
    pub label: Label,
    pub target_state: StateId,
    pub target_word: Vec<SymbolId>,
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum FlavorTag {
    EpsPopping,
    EpsPushing,
    Normed,
}

impl FlavorTag {
    pub fn keyword(self) -> &'static str {
        match self {
            FlavorTag::EpsPopping => "eps-popping",
            FlavorTag::EpsPushing => "eps-pushing",
            FlavorTag::Normed => "normed",
        }
    }

    pub fn from_keyword(s: &str) -> Option<FlavorTag> {
        match s {
            "eps-popping" => Some(FlavorTag::EpsPopping),
            "eps-pushing" => Some(FlavorTag::EpsPushing),
            "normed" => Some(FlavorTag::Normed),
            _ => None,
        }
    }
}

/// Flavor flags recomputed from the rules.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub struct Flavor {
    pub eps_popping: bool,
    pub eps_pushing: bool,
    pub normed: bool,
}

impl Flavor {
    pub fn holds(&self, tag: FlavorTag) -> bool {
        match tag {
            FlavorTag::EpsPopping => self.eps_popping,
            FlavorTag::EpsPushing => self.eps_pushing,
            FlavorTag::Normed => self.normed,
        }
    }

    /// Flavors for which branching is finite up to equivalence.
    pub fn finitely_branching(&self) -> bool {
        self.eps_popping || (self.eps_pushing && self.normed)
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub struct SystemConstants {
    /// Longest right-hand word.
    pub r_max: usize,
    /// Largest least pop distance over normed heads.
    pub m_bound: u64,
    pub q_count: usize,
    pub n_count: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SystemError {
    #[error("declared flavor `{}` does not hold for the rules", .0.keyword())]
    FlavorMismatch(FlavorTag),
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("the system has no states")]
    NoStates,
    #[error(transparent)]
    Term(#[from] TermError),
}

/// Accumulates names, rules and definitions, then seals into a [`PdaSystem`].
#[derive(Default, Clone)]
pub struct SystemBuilder {
    states: Vec<String>,
    symbols: Vec<String>,
    actions: Vec<String>,
    rules: Vec<Rule>,
    recs: Vec<RecConstDef>,
    declared: Vec<FlavorTag>,
}

fn intern_name(names: &mut Vec<String>, name: &str) -> u32 {
    match names.iter().position(|n| n == name) {
        Some(i) => i as u32,
        None => {
            names.push(name.to_string());
            names.len() as u32 - 1
        }
    }
}

impl SystemBuilder {
    pub fn new() -> Self {
        SystemBuilder::default()
    }

    /// Returns the id of `name`, registering it if new.
    pub fn state(&mut self, name: &str) -> StateId {
        StateId(intern_name(&mut self.states, name))
    }

    pub fn symbol(&mut self, name: &str) -> SymbolId {
        SymbolId(intern_name(&mut self.symbols, name))
    }

    pub fn action(&mut self, name: &str) -> ActionId {
        ActionId(intern_name(&mut self.actions, name))
    }

    pub fn has_state(&self, name: &str) -> bool {
        self.states.iter().any(|n| n == name)
    }

    pub fn has_symbol(&self, name: &str) -> bool {
        self.symbols.iter().any(|n| n == name)
    }

    pub fn has_action(&self, name: &str) -> bool {
        self.actions.iter().any(|n| n == name)
    }

    pub fn rule(&mut self, p: StateId, x: SymbolId, label: Label, q: StateId, word: Vec<SymbolId>) {
        self.rules.push(Rule {
            head_state: p,
            head_symbol: x,
            label,
            target_state: q,
            target_word: word,
        });
    }

    /// Convenience form taking names; unknown names are registered.
    pub fn rule_named(&mut self, p: &str, x: &str, label: Option<&str>, q: &str, word: &[&str]) {
        let p = self.state(p);
        let x = self.symbol(x);
        let label = match label {
            None => Label::Silent,
            Some(a) => Label::Visible(self.action(a)),
        };
        let q = self.state(q);
        let word = word.iter().map(|y| self.symbol(y)).collect();
        self.rule(p, x, label, q, word);
    }

    /// A builder with the same names and nothing else.
    pub fn names_only(&self) -> SystemBuilder {
        SystemBuilder {
            states: self.states.clone(),
            symbols: self.symbols.clone(),
            actions: self.actions.clone(),
            ..SystemBuilder::default()
        }
    }

    pub fn rec(&mut self, def: RecConstDef) {
        self.recs.push(def);
    }

    pub fn declare(&mut self, tag: FlavorTag) {
        if !self.declared.contains(&tag) {
            self.declared.push(tag);
        }
    }

    pub fn build(mut self) -> Result<PdaSystem, SystemError> {
        if self.states.is_empty() {
            return Err(SystemError::NoStates);
        }
        self.rules.sort();
        self.rules.dedup();
        let mut recs = RecTable::new();
        for def in self.recs {
            recs.define(def)?;
        }
        let q = self.states.len();
        let n = self.symbols.len();
        let mut heads: HashMap<(StateId, SymbolId), Vec<usize>> = HashMap::new();
        for (i, r) in self.rules.iter().enumerate() {
            heads.entry((r.head_state, r.head_symbol)).or_default().push(i);
        }
        let mut sys = PdaSystem {
            states: self.states,
            symbols: self.symbols,
            actions: self.actions,
            rules: self.rules,
            heads,
            templates: Vec::new(),
            recs,
            declared: self.declared,
            dist: Vec::new(),
        };
        sys.templates = sys
            .rules
            .iter()
            .map(|r| sys.expand_standard(r.target_state, &r.target_word))
            .collect();
        sys.dist = pop_distance_table(&sys.rules, q, n);
        let flavor = sys.flavor();
        for &tag in &sys.declared {
            if !flavor.holds(tag) {
                return Err(SystemError::FlavorMismatch(tag));
            }
        }
        Ok(sys)
    }
}

/// A sealed pushdown system `(Q, V, L, R)` with its recursive constants.
#[derive(Clone)]
pub struct PdaSystem {
    states: Vec<String>,
    symbols: Vec<String>,
    actions: Vec<String>,
    rules: Vec<Rule>,
    heads: HashMap<(StateId, SymbolId), Vec<usize>>,
    templates: Vec<Process>,
    recs: RecTable,
    declared: Vec<FlavorTag>,
    dist: Vec<u64>,
}

impl fmt::Debug for PdaSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PdaSystem")
            .field("states", &self.states)
            .field("symbols", &self.symbols)
            .field("actions", &self.actions)
            .field("rules", &self.rules.len())
            .finish()
    }
}

const INF: u64 = u64::MAX;

fn pop_distance_table(rules: &[Rule], q: usize, n: usize) -> Vec<u64> {
    let idx = |p: StateId, x: SymbolId, t: usize| (p.0 as usize * n + x.0 as usize) * q + t;
    let mut dist = vec![INF; q * n * q];
    // Each round extends derivation trees by one level; optimal trees never
    // repeat a triple along a branch, so q*n*q rounds suffice.
    let rounds = q * n * q + 1;
    let mut cost = vec![INF; q];
    let mut next = vec![INF; q];
    for _ in 0..rounds {
        let mut changed = false;
        for r in rules {
            // cost[t]: least steps for q·α to pop to t.
            cost.iter_mut().for_each(|c| *c = INF);
            cost[r.target_state.0 as usize] = 0;
            for &y in &r.target_word {
                next.iter_mut().for_each(|c| *c = INF);
                for (s, &cs) in cost.iter().enumerate() {
                    if cs == INF {
                        continue;
                    }
                    let base = idx(StateId(s as u32), y, 0);
                    for t in 0..q {
                        let d = dist[base + t];
                        if d != INF {
                            let v = cs.saturating_add(d);
                            if v < next[t] {
                                next[t] = v;
                            }
                        }
                    }
                }
                std::mem::swap(&mut cost, &mut next);
            }
            let base = idx(r.head_state, r.head_symbol, 0);
            for t in 0..q {
                if cost[t] != INF {
                    let v = cost[t].saturating_add(1);
                    if v < dist[base + t] {
                        dist[base + t] = v;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

impl PdaSystem {
    /// A copy of the system with extra recursive constants. Rules, and so
    /// every static constant, are unchanged.
    pub fn with_recs(&self, defs: impl IntoIterator<Item = RecConstDef>) -> Result<PdaSystem, SystemError> {
        let mut sys = self.clone();
        for def in defs {
            sys.recs.define(def)?;
        }
        Ok(sys)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s.0 as usize]
    }

    pub fn symbol_name(&self, x: SymbolId) -> &str {
        &self.symbols[x.0 as usize]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.actions[a.0 as usize]
    }

    pub fn label_name(&self, l: Label) -> &str {
        match l {
            Label::Silent => "eps",
            Label::Visible(a) => self.action_name(a),
        }
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|n| n == name).map(|i| StateId(i as u32))
    }

    pub fn symbol_id(&self, name: &str) -> Option<SymbolId> {
        self.symbols.iter().position(|n| n == name).map(|i| SymbolId(i as u32))
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|n| n == name).map(|i| ActionId(i as u32))
    }

    /// Looks up a label by name; `eps` is the silent label.
    pub fn label_id(&self, name: &str) -> Option<Label> {
        if name == "eps" {
            Some(Label::Silent)
        } else {
            self.action_id(name).map(Label::Visible)
        }
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn symbol_names(&self) -> &[String] {
        &self.symbols
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len() as u32).map(StateId)
    }

    pub fn symbols(&self) -> impl Iterator<Item = SymbolId> {
        (0..self.symbols.len() as u32).map(SymbolId)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rules_for(&self, p: StateId, x: SymbolId) -> impl Iterator<Item = &Rule> {
        self.heads
            .get(&(p, x))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
            .iter()
            .map(move |&i| &self.rules[i])
    }

    pub fn recs(&self) -> &RecTable {
        &self.recs
    }

    pub fn declared_flavor(&self) -> &[FlavorTag] {
        &self.declared
    }

    /// `pα` as a simple process: `p_i ε = i`, `pXβ = pX(p_1β, …, p_qβ)`.
    pub fn expand_standard(&self, state: StateId, word: &[SymbolId]) -> Process {
        let q = self.num_states() as u32;
        // Build bottom-up; level k holds p_s · word[k..] for every state s.
        let mut level: Vec<Process> = (1..=q).map(Process::sel).collect();
        for &y in word.iter().skip(1).rev() {
            let cont = Constant::tuple(level.clone());
            level = (0..q).map(|s| Process::seq(StateId(s), y, cont.clone())).collect();
        }
        match word.first() {
            None => Process::sel(state.selection()),
            Some(&x) => Process::seq(state, x, Constant::tuple(level)),
        }
    }

    /// `qα · C`.
    pub fn expand_with(&self, state: StateId, word: &[SymbolId], cont: &Constant) -> Result<Process, TermError> {
        compose(&self.expand_standard(state, word), cont, &self.recs)
    }

    /// All one-step derivatives in rule order. Recursive selections are
    /// unfolded one level on demand.
    pub fn step(&self, p: &Process) -> Result<Vec<(Label, Process)>, TermError> {
        match p.node() {
            Node::Nil | Node::Sel(_) => Ok(Vec::new()),
            Node::RecSel { index, name } => self.step(&self.recs.unfold(name, *index)?),
            Node::Seq { state, symbol, cont } => {
                let mut out = Vec::new();
                if let Some(ids) = self.heads.get(&(*state, *symbol)) {
                    for &i in ids {
                        out.push((self.rules[i].label, compose(&self.templates[i], cont, &self.recs)?));
                    }
                }
                Ok(out)
            }
        }
    }

    /// Least number of transitions for `pX` to pop `X` ending in `t`.
    pub fn pop_distance(&self, p: StateId, x: SymbolId, t: StateId) -> Option<u64> {
        let q = self.num_states();
        let d = self.dist[(p.0 as usize * self.num_symbols() + x.0 as usize) * q + t.0 as usize];
        (d != INF).then_some(d)
    }

    pub fn is_normed_head(&self, p: StateId, x: SymbolId) -> bool {
        self.states().any(|t| self.pop_distance(p, x, t).is_some())
    }

    pub fn flavor(&self) -> Flavor {
        let silent = || self.rules.iter().filter(|r| r.label.is_silent());
        Flavor {
            eps_popping: silent().all(|r| r.target_word.len() <= 1),
            eps_pushing: silent().all(|r| !r.target_word.is_empty()),
            normed: self
                .states()
                .all(|p| self.symbols().all(|x| self.is_normed_head(p, x))),
        }
    }

    pub fn constants(&self) -> SystemConstants {
        let r_max = self.rules.iter().map(|r| r.target_word.len()).max().unwrap_or(0);
        let mut m_bound = 0;
        for p in self.states() {
            for x in self.symbols() {
                if let Some(d) = self.states().filter_map(|t| self.pop_distance(p, x, t)).min() {
                    m_bound = m_bound.max(d);
                }
            }
        }
        SystemConstants {
            r_max,
            m_bound,
            q_count: self.num_states(),
            n_count: self.num_symbols(),
        }
    }

    fn silent_head_graph(&self) -> Vec<Vec<usize>> {
        let n = self.num_symbols();
        let mut g = vec![Vec::new(); self.num_states() * n];
        for r in &self.rules {
            if r.label.is_silent() {
                if let Some(&y) = r.target_word.first() {
                    let from = r.head_state.0 as usize * n + r.head_symbol.0 as usize;
                    let to = r.target_state.0 as usize * n + y.0 as usize;
                    if !g[from].contains(&to) {
                        g[from].push(to);
                    }
                }
            }
        }
        g
    }

    fn head_of(&self, i: usize) -> (StateId, SymbolId) {
        let n = self.num_symbols();
        (StateId((i / n) as u32), SymbolId((i % n) as u32))
    }

    /// One elementary cycle per cyclic strongly connected component of the
    /// silent head graph. An empty result certifies the no-circularity
    /// convention.
    pub fn silent_head_cycles(&self) -> Vec<Vec<(StateId, SymbolId)>> {
        let g = self.silent_head_graph();
        let comp = tarjan(&g);
        let mut seen = vec![false; g.len()];
        let mut out = Vec::new();
        for v in 0..g.len() {
            let c = comp[v];
            if seen[v] {
                continue;
            }
            let members: Vec<usize> = (0..g.len()).filter(|&u| comp[u] == c).collect();
            for &u in &members {
                seen[u] = true;
            }
            let cyclic = members.len() > 1 || g[v].contains(&v);
            if !cyclic {
                continue;
            }
            // Shortest path from v back to v inside the component.
            let mut prev = vec![usize::MAX; g.len()];
            let mut queue = VecDeque::from([v]);
            let mut closing = None;
            while let Some(u) = queue.pop_front() {
                for &w in &g[u] {
                    if comp[w] != c {
                        continue;
                    }
                    if w == v {
                        closing = Some(u);
                        break;
                    }
                    if prev[w] == usize::MAX {
                        prev[w] = u;
                        queue.push_back(w);
                    }
                }
                if closing.is_some() {
                    break;
                }
            }
            let mut cycle = Vec::new();
            let mut u = closing.expect("cyclic component has a cycle through each member");
            while u != v {
                cycle.push(self.head_of(u));
                u = prev[u];
            }
            cycle.push(self.head_of(v));
            cycle.reverse();
            out.push(cycle);
        }
        out
    }

    /// Longest chain of silent head steps, or `None` if the graph is cyclic.
    pub fn longest_silent_head_chain(&self) -> Option<usize> {
        let g = self.silent_head_graph();
        let mut memo = vec![None; g.len()];
        let mut on_stack = vec![false; g.len()];
        fn go(v: usize, g: &[Vec<usize>], memo: &mut [Option<usize>], on: &mut [bool]) -> Option<usize> {
            if let Some(d) = memo[v] {
                return Some(d);
            }
            if on[v] {
                return None;
            }
            on[v] = true;
            let mut best = 0;
            for &w in &g[v] {
                best = best.max(1 + go(w, g, memo, on)?);
            }
            on[v] = false;
            memo[v] = Some(best);
            Some(best)
        }
        let mut best = 0;
        for v in 0..g.len() {
            best = best.max(go(v, &g, &mut memo, &mut on_stack)?);
        }
        Some(best)
    }
}

/// Rewrites continuation entries that the head can never pop into as their
/// own selection index, then trims trailing identity entries.
///
/// The pruned term has an isomorphic transition graph, with pruning commuting
/// with `step`. Continuations below a never-popped bottom symbol collapse to
/// `()`, which keeps explored state spaces small.
pub struct Pruner<'a> {
    sys: &'a PdaSystem,
    cache: HashMap<Process, Process>,
}

impl<'a> Pruner<'a> {
    pub fn new(sys: &'a PdaSystem) -> Self {
        Pruner {
            sys,
            cache: HashMap::new(),
        }
    }

    pub fn system(&self) -> &'a PdaSystem {
        self.sys
    }

    pub fn prune(&mut self, p: &Process) -> Process {
        if let Some(done) = self.cache.get(p) {
            return done.clone();
        }
        let out = match p.node() {
            Node::Seq {
                state,
                symbol,
                cont: Constant::Tuple(t),
            } => {
                let q = self.sys.num_states().min(t.arity());
                let mut entries: Vec<Process> = (0..q)
                    .map(|k| {
                        let live = self.sys.pop_distance(*state, *symbol, StateId(k as u32)).is_some();
                        if live {
                            self.prune(&t.entries()[k])
                        } else {
                            Process::sel(k as u32 + 1)
                        }
                    })
                    .collect();
                while entries.last().and_then(|e| e.as_sel()) == Some(entries.len() as u32) {
                    entries.pop();
                }
                Process::seq(*state, *symbol, Constant::Tuple(Tuple::new(entries)))
            }
            _ => p.clone(),
        };
        if self.cache.len() > 1 << 20 {
            self.cache.clear();
        }
        self.cache.insert(p.clone(), out.clone());
        out
    }

    /// `step` followed by pruning of every derivative.
    pub fn step(&mut self, p: &Process) -> Result<Vec<(Label, Process)>, TermError> {
        let mut out = self.sys.step(p)?;
        for (_, d) in out.iter_mut() {
            *d = self.prune(d);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(build: impl FnOnce(&mut SystemBuilder)) -> PdaSystem {
        let mut b = SystemBuilder::new();
        build(&mut b);
        b.build().unwrap()
    }

    #[test]
    fn expand_standard_unfolds_both_clauses() {
        let s = sys(|b| {
            b.state("p1");
            b.state("p2");
            b.symbol("X");
            b.symbol("Y");
        });
        let (p1, p2) = (StateId(0), StateId(1));
        let (x, y) = (SymbolId(0), SymbolId(1));
        assert_eq!(s.expand_standard(p2, &[]), Process::sel(2));
        assert_eq!(s.expand_standard(p1, &[x]), Process::seq(p1, x, Constant::identity(2)));
        let inner = |p| Process::seq(p, y, Constant::identity(2));
        assert_eq!(
            s.expand_standard(p1, &[x, y]),
            Process::seq(p1, x, Constant::tuple(vec![inner(p1), inner(p2)]))
        );
    }

    #[test]
    fn popping_rule_selects_target_entry() {
        let s = sys(|b| {
            b.state("p");
            b.rule_named("p", "X", Some("a"), "q", &[]);
        });
        let (p, x) = (s.state_id("p").unwrap(), s.symbol_id("X").unwrap());
        let m1 = Process::seq(p, x, Constant::empty());
        let m2 = Process::nil();
        let t = Process::seq(p, x, Constant::tuple(vec![m1, m2.clone()]));
        let a = s.label_id("a").unwrap();
        assert_eq!(s.step(&t).unwrap(), vec![(a, m2)]);
        assert!(s.step(&Process::sel(3)).unwrap().is_empty());
    }

    #[test]
    fn pop_distances() {
        let s = sys(|b| {
            b.rule_named("p", "X", Some("a"), "q", &["Y"]);
            b.rule_named("q", "Y", Some("b"), "q", &[]);
            b.rule_named("p", "Z", Some("a"), "p", &["Z"]);
        });
        let id = |n| s.state_id(n).unwrap();
        let sym = |n| s.symbol_id(n).unwrap();
        assert_eq!(s.pop_distance(id("p"), sym("X"), id("q")), Some(2));
        assert_eq!(s.pop_distance(id("q"), sym("Y"), id("q")), Some(1));
        assert!(!s.is_normed_head(id("p"), sym("Z")));
        assert_eq!(s.constants().m_bound, 2);
        assert_eq!(s.constants().r_max, 1);
    }

    #[test]
    fn head_cycles() {
        let s = sys(|b| {
            b.rule_named("p", "X", None, "q", &["Y"]);
            b.rule_named("q", "Y", None, "p", &["X"]);
        });
        let cycles = s.silent_head_cycles();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].len(), 2);
        assert_eq!(s.longest_silent_head_chain(), None);

        let s = sys(|b| {
            b.rule_named("p", "X", None, "q", &["Y"]);
            b.rule_named("q", "Y", None, "r", &["Z"]);
        });
        assert!(s.silent_head_cycles().is_empty());
        assert_eq!(s.longest_silent_head_chain(), Some(2));
        let c = s.constants();
        assert!(2 < c.q_count * c.n_count);
    }

    #[test]
    fn flavor_checks() {
        let mut b = SystemBuilder::new();
        b.rule_named("p", "X", None, "p", &["X", "X"]);
        b.declare(FlavorTag::EpsPopping);
        assert_eq!(b.build().unwrap_err(), SystemError::FlavorMismatch(FlavorTag::EpsPopping));
        let s = sys(|b| b.rule_named("p", "X", None, "p", &["X", "X"]));
        assert!(s.flavor().eps_pushing);
        assert!(!s.flavor().eps_popping);
    }

    #[test]
    fn pruning_drops_unreachable_entries() {
        let s = sys(|b| {
            b.state("p");
            b.state("q");
            b.rule_named("p", "X", Some("a"), "p", &[]);
            b.rule_named("p", "B", Some("a"), "p", &["B"]);
        });
        let (p, x, bot) = (StateId(0), s.symbol_id("X").unwrap(), s.symbol_id("B").unwrap());
        let below = Process::seq(p, x, Constant::identity(2));
        let t = Process::seq(p, bot, Constant::tuple(vec![below.clone(), below]));
        let mut pr = Pruner::new(&s);
        assert_eq!(pr.prune(&t), Process::seq(p, bot, Constant::empty()));
    }
}
