//! The Attacker/Defender game for branching bisimilarity.
//!
//! A round: Attacker picks a side and a transition `Pi -ℓ-> Pi'`. Defender
//! either does nothing (silent attacks only), moving to `(Pi', P1-i)`, or plays
//! a chain `P1-i -ε-> P¹ … -ε-> Pᵏ⁻¹ -ℓ-> Pᵏ`, after which Attacker picks one
//! of `(Pi, P¹) … (Pi, Pᵏ⁻¹), (Pi', Pᵏ)`. A configuration whose sides differ
//! in selection status is lost for Defender on the spot.
//!
//! `≃ₖ` is "Defender survives k rounds". Defender chains are limited to a
//! stutter cap of silent steps; see [`StutterCap`].

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::rc::Rc;

use thiserror::Error;

use crate::parse::{parse_term_at, ParseError, Printer};
use crate::system::{Label, PdaSystem, Pruner};
use crate::term::{Process, TermError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Config {
    pub left: Process,
    pub right: Process,
}

impl Config {
    pub fn new(left: Process, right: Process) -> Self {
        Config { left, right }
    }

    pub fn side(&self, s: Side) -> &Process {
        match s {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    fn with(side: Side, attacked: Process, other: Process) -> Config {
        match side {
            Side::Left => Config::new(attacked, other),
            Side::Right => Config::new(other, attacked),
        }
    }
}

/// Same selection status: both the same selection, or neither a selection.
pub fn same_status(a: &Process, b: &Process) -> bool {
    a.as_sel() == b.as_sel()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attack {
    pub side: Side,
    pub label: Label,
    pub target: Process,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Response {
    /// Only for silent attacks.
    Nothing,
    /// `silent` holds `P¹ … Pᵏ⁻¹`, `last` is `Pᵏ`.
    Chain { silent: Vec<Process>, last: Process },
}

impl Response {
    /// The configurations Attacker may choose from, final one last.
    pub fn choices(&self, before: &Config, attack: &Attack) -> Vec<Config> {
        let attacked = before.side(attack.side);
        match self {
            Response::Nothing => vec![Config::with(attack.side, attack.target.clone(), before.side(attack.side.other()).clone())],
            Response::Chain { silent, last } => {
                let mut out: Vec<Config> = silent
                    .iter()
                    .map(|q| Config::with(attack.side, attacked.clone(), q.clone()))
                    .collect();
                out.push(Config::with(attack.side, attack.target.clone(), last.clone()));
                out
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round {
    pub before: Config,
    pub attack: Attack,
    pub response: Option<Response>,
    /// 1-based index into the choice list.
    pub pick: usize,
    pub after: Option<Config>,
}

/// Upper bound on silent steps in a Defender chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StutterCap {
    /// Derived from the system: `𝔫𝔮` for ε-pushing systems and
    /// `(height + 1)·𝔫𝔮` for ε-popping ones, both exact when there are no
    /// silent head cycles. Systems with such cycles are refused.
    Auto,
    /// A fixed cap. Results are relative to the cap when it is not exact.
    Fixed(usize),
}

#[derive(Clone, Copy, Debug)]
pub struct GameOptions {
    pub cap: StutterCap,
    /// Work limit in explored configurations; exceeding it gives `Unknown`.
    pub budget: u64,
    pub prune: bool,
    /// Treat configurations whose sides reach each other silently as won by
    /// Defender. Sound for `≃`; for `≃ₖ` it assumes the cap covers the cycle.
    pub silent_cycle_shortcut: bool,
}

impl Default for GameOptions {
    fn default() -> Self {
        GameOptions {
            cap: StutterCap::Auto,
            budget: 5_000_000,
            prune: true,
            silent_cycle_shortcut: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("the system has silent head cycles; pass an explicit stutter cap")]
    SilentHeadCycles,
    #[error("search budget exhausted")]
    Exhausted,
    #[error(transparent)]
    Term(#[from] TermError),
}

#[derive(Clone, Copy, Debug, Default)]
struct Bound {
    /// Defender is known to survive this many rounds.
    survives: u32,
    /// Defender is known to lose within this many rounds.
    fails: Option<u32>,
}

type Succ = Rc<[(Label, Process)]>;

/// Memoizing solver for bounded games over one system.
pub struct Game<'a> {
    sys: &'a PdaSystem,
    opts: GameOptions,
    pruner: Pruner<'a>,
    succ: HashMap<Process, Succ>,
    memo: HashMap<(Process, Process), Bound>,
    reach: HashMap<(Process, Process), bool>,
    hubs: HashMap<Process, HashSet<Process>>,
    work: u64,
    pushing: bool,
    nq: usize,
}

fn key(a: &Process, b: &Process) -> (Process, Process) {
    if (a.hash_word(), a.addr()) <= (b.hash_word(), b.addr()) {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

impl<'a> Game<'a> {
    pub fn new(sys: &'a PdaSystem, opts: GameOptions) -> Result<Self, GameError> {
        if opts.cap == StutterCap::Auto && !sys.silent_head_cycles().is_empty() {
            return Err(GameError::SilentHeadCycles);
        }
        let flavor = sys.flavor();
        Ok(Game {
            sys,
            opts,
            pruner: Pruner::new(sys),
            succ: HashMap::new(),
            memo: HashMap::new(),
            reach: HashMap::new(),
            hubs: HashMap::new(),
            work: 0,
            pushing: flavor.eps_pushing,
            nq: sys.num_states() * sys.num_symbols().max(1),
        })
    }

    pub fn system(&self) -> &'a PdaSystem {
        self.sys
    }

    pub fn options(&self) -> &GameOptions {
        &self.opts
    }

    /// Work spent so far, in visited configurations.
    pub fn work(&self) -> u64 {
        self.work
    }

    pub fn normalize(&mut self, p: &Process) -> Process {
        if self.opts.prune {
            self.pruner.prune(p)
        } else {
            p.clone()
        }
    }

    pub fn successors(&mut self, p: &Process) -> Result<Succ, GameError> {
        if let Some(s) = self.succ.get(p) {
            return Ok(s.clone());
        }
        let mut v = if self.opts.prune {
            self.pruner.step(p)?
        } else {
            self.sys.step(p)?
        };
        v.dedup();
        let s: Succ = v.into();
        if self.succ.len() > 1_000_000 {
            self.succ.clear();
        }
        self.succ.insert(p.clone(), s.clone());
        Ok(s)
    }

    /// Silent-step cap for chains starting at `q`.
    pub fn cap_for(&self, q: &Process) -> usize {
        match self.opts.cap {
            StutterCap::Fixed(c) => c,
            StutterCap::Auto => {
                if self.pushing {
                    self.nq
                } else {
                    (q.depth() as usize + 1) * self.nq
                }
            }
        }
    }

    fn tick(&mut self) -> Result<(), GameError> {
        self.work += 1;
        if self.work > self.opts.budget {
            Err(GameError::Exhausted)
        } else {
            Ok(())
        }
    }

    /// Silent closure of `from`, at most `limit` terms, breadth first.
    fn silent_closure(&mut self, from: &Process, limit: usize, stop: Option<&Process>) -> Result<HashSet<Process>, GameError> {
        let mut seen = HashSet::from([from.clone()]);
        let mut queue = VecDeque::from([from.clone()]);
        while let Some(u) = queue.pop_front() {
            for (l, v) in self.successors(&u)?.iter() {
                if l.is_silent() && seen.insert(v.clone()) {
                    if Some(v) == stop || seen.len() >= limit {
                        return Ok(seen);
                    }
                    queue.push_back(v.clone());
                }
            }
        }
        Ok(seen)
    }

    /// Incomplete test for `from ⇒ to`: a small search from `from`, then a
    /// large cached one from the shallowest term it found. Silent loops
    /// usually pass through a short term, so the large closures are shared.
    fn silently_reaches(&mut self, from: &Process, to: &Process) -> Result<bool, GameError> {
        let k = (from.clone(), to.clone());
        if let Some(&r) = self.reach.get(&k) {
            return Ok(r);
        }
        let near = self.silent_closure(from, 256, Some(to))?;
        let mut found = near.contains(to);
        if !found {
            let hub = near.iter().min_by(|x, y| (x.depth(), *x).cmp(&(y.depth(), *y))).cloned();
            if let Some(h) = hub.filter(|h| h != from) {
                if !self.hubs.contains_key(&h) {
                    let far = self.silent_closure(&h, 4_000, None)?;
                    self.hubs.insert(h.clone(), far);
                }
                found = self.hubs[&h].contains(to);
            }
        }
        self.reach.insert(k, found);
        Ok(found)
    }

    /// Whether Defender survives `k` rounds from `(a, b)`.
    pub fn survives(&mut self, a: &Process, b: &Process, k: u32) -> Result<bool, GameError> {
        if !same_status(a, b) {
            return Ok(false);
        }
        if k == 0 || a == b {
            return Ok(true);
        }
        let key = key(a, b);
        if let Some(bd) = self.memo.get(&key) {
            if bd.survives >= k {
                return Ok(true);
            }
            if bd.fails.is_some_and(|f| f <= k) {
                return Ok(false);
            }
        }
        self.tick()?;
        if self.opts.silent_cycle_shortcut && self.silently_reaches(a, b)? && self.silently_reaches(b, a)? {
            self.memo.insert(key, Bound { survives: u32::MAX, fails: None });
            return Ok(true);
        }
        let ok = self.all_attacks_answered(a, b, k)?;
        let bd = self.memo.entry(key).or_default();
        if ok {
            bd.survives = bd.survives.max(k);
        } else {
            bd.fails = Some(bd.fails.map_or(k, |f| f.min(k)));
        }
        Ok(ok)
    }

    fn all_attacks_answered(&mut self, a: &Process, b: &Process, k: u32) -> Result<bool, GameError> {
        let sa = self.successors(a)?;
        let sb = self.successors(b)?;
        // Cheap pass first: visible labels the other side cannot produce at all.
        for (attacked, other, moves) in [(a, b, &sa), (b, a, &sb)] {
            for (l, t) in moves.iter() {
                if !l.is_silent() && self.find_response(attacked, t, other, *l, 1)?.is_none() {
                    return Ok(false);
                }
            }
        }
        for (attacked, other, moves) in [(a, b, &sa), (b, a, &sb)] {
            for (l, t) in moves.iter() {
                if self.find_response(attacked, t, other, *l, k)?.is_none() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// A Defender response to `attacked -ℓ-> target` from `other` under which
    /// every Attacker choice survives `k - 1` rounds.
    pub fn find_response(
        &mut self,
        attacked: &Process,
        target: &Process,
        other: &Process,
        label: Label,
        k: u32,
    ) -> Result<Option<Response>, GameError> {
        let k1 = k.saturating_sub(1);
        if label.is_silent() && self.survives(target, other, k1)? {
            return Ok(Some(Response::Nothing));
        }
        let cap = self.cap_for(other);
        // BFS over silent paths whose intermediates are good for Attacker's
        // unmoved side; `parent` lets us rebuild the chain.
        let mut parent: HashMap<Process, Option<Process>> = HashMap::new();
        parent.insert(other.clone(), None);
        let mut layer = vec![other.clone()];
        let mut depth = 0;
        while !layer.is_empty() {
            for y in &layer {
                let succ = self.successors(y)?;
                for (l, y2) in succ.iter() {
                    if *l == label && self.survives(target, y2, k1)? {
                        let mut silent = Vec::new();
                        let mut cur = y.clone();
                        while let Some(Some(p)) = parent.get(&cur) {
                            silent.push(cur.clone());
                            cur = p.clone();
                        }
                        silent.reverse();
                        return Ok(Some(Response::Chain { silent, last: y2.clone() }));
                    }
                }
            }
            if depth >= cap {
                break;
            }
            depth += 1;
            let mut next = Vec::new();
            for y in &layer {
                let succ = self.successors(y)?;
                for (l, y2) in succ.iter() {
                    if l.is_silent() && !parent.contains_key(y2) {
                        parent.insert(y2.clone(), Some(y.clone()));
                        if self.survives(attacked, y2, k1)? {
                            next.push(y2.clone());
                        }
                    }
                }
            }
            layer = next;
        }
        Ok(None)
    }

    /// Largest `d ≤ k` that Defender survives, and whether it fails at `d + 1`.
    pub fn survival_depth(&mut self, a: &Process, b: &Process, k: u32) -> Result<u32, GameError> {
        let mut d = 0;
        while d < k && self.survives(a, b, d + 1)? {
            d += 1;
        }
        Ok(d)
    }

    /// Attacker's winning line from a configuration Defender loses within `k`.
    fn winning_line(&mut self, start: &Config, k: u32) -> Result<Vec<Round>, GameError> {
        let mut line = Vec::new();
        let mut cfg = start.clone();
        let mut k = k;
        while same_status(&cfg.left, &cfg.right) {
            // Least depth at which this configuration is lost.
            let mut d = 1;
            while d <= k && self.survives(&cfg.left, &cfg.right, d)? {
                d += 1;
            }
            if d > k {
                break;
            }
            k = d;
            let mut chosen: Option<Attack> = None;
            for side in [Side::Left, Side::Right] {
                let attacked = cfg.side(side).clone();
                let other = cfg.side(side.other()).clone();
                for (l, t) in self.successors(&attacked)?.iter() {
                    let better = chosen.as_ref().is_none_or(|c| (*l, t) < (c.label, &c.target));
                    if better && self.find_response(&attacked, t, &other, *l, k)?.is_none() {
                        chosen = Some(Attack {
                            side,
                            label: *l,
                            target: t.clone(),
                        });
                    }
                }
            }
            let attack = chosen.expect("a lost configuration has a winning attack");
            // Defender plays its most resilient legal answer.
            let response = self.best_response(&cfg, &attack, k)?;
            let Some(response) = response else {
                line.push(Round {
                    before: cfg.clone(),
                    attack,
                    response: None,
                    pick: 0,
                    after: None,
                });
                break;
            };
            let choices = response.choices(&cfg, &attack);
            let mut pick = choices.len();
            for (i, c) in choices.iter().enumerate() {
                if !self.survives(&c.left, &c.right, k - 1)? {
                    pick = i + 1;
                    break;
                }
            }
            let after = choices[pick - 1].clone();
            line.push(Round {
                before: cfg.clone(),
                attack,
                response: Some(response),
                pick,
                after: Some(after.clone()),
            });
            cfg = after;
            k -= 1;
        }
        Ok(line)
    }

    /// The legal response whose worst choice survives longest (ties go to
    /// the first found in breadth-first order).
    fn best_response(&mut self, cfg: &Config, attack: &Attack, k: u32) -> Result<Option<Response>, GameError> {
        let mut best: Option<(u32, Response)> = None;
        for r in self.legal_responses(cfg, attack, 64)? {
            let mut worst = u32::MAX;
            for c in r.choices(cfg, attack) {
                worst = worst.min(self.survival_depth(&c.left, &c.right, k)?);
            }
            if best.as_ref().is_none_or(|(w, _)| worst > *w) {
                best = Some((worst, r));
            }
        }
        Ok(best.map(|(_, r)| r))
    }

    /// Every legal response up to the stutter cap: do-nothing for silent
    /// attacks, then the chains `ε*·ℓ` without repeated terms, in
    /// breadth-first order, at most `limit` of them.
    pub fn legal_responses(&mut self, cfg: &Config, attack: &Attack, limit: usize) -> Result<Vec<Response>, GameError> {
        let other = cfg.side(attack.side.other()).clone();
        let cap = self.cap_for(&other);
        let mut out = Vec::new();
        if attack.label.is_silent() {
            out.push(Response::Nothing);
        }
        let mut layer: Vec<Vec<Process>> = vec![vec![other]];
        let mut depth = 0;
        while !layer.is_empty() && out.len() < limit {
            for path in &layer {
                let y = path.last().unwrap().clone();
                for (l, y2) in self.successors(&y)?.iter() {
                    if *l == attack.label && out.len() < limit {
                        out.push(Response::Chain {
                            silent: path[1..].to_vec(),
                            last: y2.clone(),
                        });
                    }
                }
            }
            if depth >= cap {
                break;
            }
            depth += 1;
            let mut next = Vec::new();
            for path in &layer {
                let y = path.last().unwrap().clone();
                for (l, y2) in self.successors(&y)?.iter() {
                    if l.is_silent() && !path.contains(y2) {
                        let mut p = path.clone();
                        p.push(y2.clone());
                        next.push(p);
                    }
                }
            }
            if next.len() > 4 * limit {
                next.truncate(4 * limit);
            }
            layer = next;
        }
        Ok(out)
    }

    /// Bounded solve with a principal variation.
    pub fn solve(&mut self, start: &Config, depth: u32) -> Result<Solved, GameError> {
        let left = self.normalize(&start.left);
        let right = self.normalize(&start.right);
        let cfg = Config::new(left, right);
        if !same_status(&cfg.left, &cfg.right) {
            return Ok(Solved {
                winner: Winner::AttackerWins(0),
                line: Vec::new(),
            });
        }
        let d = self.survival_depth(&cfg.left, &cfg.right, depth)?;
        if d >= depth {
            return Ok(Solved {
                winner: Winner::DefenderSurvives(depth),
                line: Vec::new(),
            });
        }
        let line = self.winning_line(&cfg, d + 1)?;
        Ok(Solved {
            winner: Winner::AttackerWins(d + 1),
            line,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Winner {
    /// Attacker forces a win within this many rounds; a genuine
    /// distinguishing strategy when the stutter cap is exact.
    AttackerWins(u32),
    /// Defender survives this many rounds; evidence only.
    DefenderSurvives(u32),
}

#[derive(Clone, Debug)]
pub struct Solved {
    pub winner: Winner,
    pub line: Vec<Round>,
}

/// `solve` with a fresh solver.
pub fn solve_bounded(sys: &PdaSystem, start: &Config, depth: u32, opts: GameOptions) -> Result<Solved, GameError> {
    Game::new(sys, opts)?.solve(start, depth)
}

/// Every legal Defender response to `attack`, up to `limit` of them.
pub fn legal_defender_responses(
    sys: &PdaSystem,
    cfg: &Config,
    attack: &Attack,
    opts: GameOptions,
    limit: usize,
) -> Result<Vec<Response>, GameError> {
    Game::new(sys, opts)?.legal_responses(cfg, attack, limit)
}

/// One line of a play script.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScriptMove {
    Attack { side: Side, label: Label, target: Process },
    Pick(usize),
    DefendNothing,
    Defend { label: Label, target: Process },
}

/// Parses a script: `A left a -> <term>`, `A pick 2`, `D none`,
/// `D eps* a -> <term>`. Blank lines and `#` comments are skipped.
pub fn parse_script(sys: &PdaSystem, src: &str) -> Result<Vec<ScriptMove>, ParseError> {
    let mut out = Vec::new();
    for (k, raw) in src.lines().enumerate() {
        let line = k + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let err = |m: &str| ParseError::Syntax {
            line,
            msg: m.to_string(),
        };
        let words: Vec<&str> = text.split_whitespace().collect();
        let label = |w: &str| sys.label_id(w).ok_or_else(|| err(&format!("unknown label `{w}`")));
        let term_after_arrow = || -> Result<Process, ParseError> {
            let (_, t) = text.split_once("->").ok_or_else(|| err("expected `->`"))?;
            parse_term_at(sys, t.trim(), line)
        };
        match words.as_slice() {
            ["A", "pick", n] => out.push(ScriptMove::Pick(n.parse().map_err(|_| err("bad pick index"))?)),
            ["A", side, l, "->", ..] => {
                let side = match *side {
                    "left" => Side::Left,
                    "right" => Side::Right,
                    _ => return Err(err("side must be `left` or `right`")),
                };
                out.push(ScriptMove::Attack {
                    side,
                    label: label(l)?,
                    target: term_after_arrow()?,
                });
            }
            ["D", "none"] => out.push(ScriptMove::DefendNothing),
            ["D", "eps*", l, "->", ..] => out.push(ScriptMove::Defend {
                label: label(l)?,
                target: term_after_arrow()?,
            }),
            _ => return Err(err("unrecognized script line")),
        }
    }
    Ok(out)
}

/// A player's policy in [`run_play`].
#[derive(Clone, Debug)]
pub enum Strategy {
    /// Moves taken in order from a script; only this player's lines are used.
    Scripted(Vec<ScriptMove>),
    /// Bounded solver; the lookahead shrinks by one each round.
    Solver(u32),
    /// Placeholder for human play, which is not supported: using it ends
    /// the play with a script error.
    Interactive,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlayWinner {
    Attacker,
    Defender,
    Undetermined,
}

#[derive(Clone, Debug)]
pub struct PlayOutcome {
    pub winner: PlayWinner,
    pub trace: Vec<Round>,
    pub last: Config,
    /// Set when a scripted move was illegal; the play stopped there.
    pub script_error: Option<String>,
}

impl<'a> Game<'a> {
    /// Shortest silent path from `from` to a term with an `ℓ`-step to
    /// `target`, within the stutter cap.
    fn chain_to(&mut self, from: &Process, label: Label, target: &Process) -> Result<Option<Response>, GameError> {
        let cap = self.cap_for(from);
        let mut parent: HashMap<Process, Option<Process>> = HashMap::from([(from.clone(), None)]);
        let mut layer = vec![from.clone()];
        let mut depth = 0;
        while !layer.is_empty() {
            for y in &layer {
                if self.successors(y)?.iter().any(|(l, t)| *l == label && t == target) {
                    let mut silent = Vec::new();
                    let mut cur = y.clone();
                    while let Some(Some(p)) = parent.get(&cur) {
                        silent.push(cur.clone());
                        cur = p.clone();
                    }
                    silent.reverse();
                    return Ok(Some(Response::Chain {
                        silent,
                        last: target.clone(),
                    }));
                }
            }
            if depth >= cap {
                break;
            }
            depth += 1;
            let mut next = Vec::new();
            for y in &layer {
                for (l, y2) in self.successors(y)?.iter() {
                    if l.is_silent() && !parent.contains_key(y2) {
                        parent.insert(y2.clone(), Some(y.clone()));
                        next.push(y2.clone());
                    }
                }
            }
            layer = next;
        }
        Ok(None)
    }

    /// Plays up to `max_rounds` rounds.
    pub fn play(
        &mut self,
        start: &Config,
        attacker: &Strategy,
        defender: &Strategy,
        max_rounds: usize,
    ) -> Result<PlayOutcome, GameError> {
        let (mut a_moves, mut d_moves) = (VecDeque::new(), VecDeque::new());
        if let Strategy::Scripted(s) = attacker {
            a_moves.extend(s.iter().filter(|m| matches!(m, ScriptMove::Attack { .. } | ScriptMove::Pick(_))).cloned());
        }
        if let Strategy::Scripted(s) = defender {
            d_moves.extend(s.iter().filter(|m| matches!(m, ScriptMove::Defend { .. } | ScriptMove::DefendNothing)).cloned());
        }
        let mut cfg = Config::new(self.normalize(&start.left), self.normalize(&start.right));
        let mut trace = Vec::new();
        let outcome = |winner, trace, last, err: Option<String>| PlayOutcome {
            winner,
            trace,
            last,
            script_error: err,
        };
        if matches!(attacker, Strategy::Interactive) || matches!(defender, Strategy::Interactive) {
            let msg = "interactive play is not supported".to_string();
            return Ok(outcome(PlayWinner::Undetermined, trace, cfg, Some(msg)));
        }
        for round in 0..max_rounds {
            if !same_status(&cfg.left, &cfg.right) {
                return Ok(outcome(PlayWinner::Attacker, trace, cfg, None));
            }
            // Attacker's move.
            let attack = match attacker {
                Strategy::Scripted(_) => match a_moves.pop_front() {
                    None => return Ok(outcome(PlayWinner::Undetermined, trace, cfg, None)),
                    Some(ScriptMove::Attack { side, label, target }) => {
                        let target = self.normalize(&target);
                        let legal = self.successors(cfg.side(side))?.iter().any(|(l, t)| *l == label && *t == target);
                        if !legal {
                            let msg = format!("round {}: attack is not a legal transition", trace.len() + 1);
                            return Ok(outcome(PlayWinner::Undetermined, trace, cfg, Some(msg)));
                        }
                        Attack { side, label, target }
                    }
                    Some(_) => {
                        let msg = format!("round {}: expected an attack line", trace.len() + 1);
                        return Ok(outcome(PlayWinner::Undetermined, trace, cfg, Some(msg)));
                    }
                },
                Strategy::Interactive => unreachable!(),
                Strategy::Solver(depth) => {
                    let depth = &depth.saturating_sub(round as u32).max(1);
                    let mut chosen = None;
                    let mut fallback = None;
                    'pick: for side in [Side::Left, Side::Right] {
                        let attacked = cfg.side(side).clone();
                        let other = cfg.side(side.other()).clone();
                        for (l, t) in self.successors(&attacked)?.iter() {
                            let a = Attack { side, label: *l, target: t.clone() };
                            if fallback.is_none() {
                                fallback = Some(a.clone());
                            }
                            if self.find_response(&attacked, t, &other, *l, *depth)?.is_none() {
                                chosen = Some(a);
                                break 'pick;
                            }
                        }
                    }
                    match chosen.or(fallback) {
                        Some(a) => a,
                        None => return Ok(outcome(PlayWinner::Defender, trace, cfg, None)),
                    }
                }
            };
            // Defender's answer.
            let other = cfg.side(attack.side.other()).clone();
            let stuck = self.legal_responses(&cfg, &attack, 1)?.is_empty();
            let response = match defender {
                _ if stuck => None,
                Strategy::Scripted(_) => match d_moves.pop_front() {
                    None => return Ok(outcome(PlayWinner::Undetermined, trace, cfg, None)),
                    Some(ScriptMove::DefendNothing) if attack.label.is_silent() => Some(Response::Nothing),
                    Some(ScriptMove::Defend { label, target }) if label == attack.label => {
                        let target = self.normalize(&target);
                        match self.chain_to(&other, label, &target)? {
                            Some(r) => Some(r),
                            None => {
                                let msg = format!("round {}: defender chain not found", trace.len() + 1);
                                return Ok(outcome(PlayWinner::Undetermined, trace, cfg, Some(msg)));
                            }
                        }
                    }
                    Some(_) => {
                        let msg = format!("round {}: defender line does not fit the attack", trace.len() + 1);
                        return Ok(outcome(PlayWinner::Undetermined, trace, cfg, Some(msg)));
                    }
                },
                Strategy::Interactive => unreachable!(),
                Strategy::Solver(depth) => {
                    let depth = &depth.saturating_sub(round as u32).max(1);
                    let attacked = cfg.side(attack.side).clone();
                    match self.find_response(&attacked, &attack.target, &other, attack.label, *depth)? {
                        Some(r) => Some(r),
                        None => self.legal_responses(&cfg, &attack, 1)?.into_iter().next(),
                    }
                }
            };
            let Some(response) = response else {
                trace.push(Round {
                    before: cfg.clone(),
                    attack,
                    response: None,
                    pick: 0,
                    after: None,
                });
                return Ok(outcome(PlayWinner::Attacker, trace, cfg, None));
            };
            // Attacker's choice of configuration.
            let choices = response.choices(&cfg, &attack);
            let pick = match attacker {
                Strategy::Scripted(_) => match a_moves.front() {
                    Some(ScriptMove::Pick(i)) => {
                        let i = *i;
                        a_moves.pop_front();
                        if i == 0 || i > choices.len() {
                            let msg = format!("round {}: pick {i} out of range", trace.len() + 1);
                            return Ok(outcome(PlayWinner::Undetermined, trace, cfg, Some(msg)));
                        }
                        i
                    }
                    _ => choices.len(),
                },
                Strategy::Interactive => unreachable!(),
                Strategy::Solver(depth) => {
                    let depth = depth.saturating_sub(round as u32).max(1);
                    let mut pick = choices.len();
                    for (i, c) in choices.iter().enumerate() {
                        if !self.survives(&c.left, &c.right, depth.saturating_sub(1))? {
                            pick = i + 1;
                            break;
                        }
                    }
                    pick
                }
            };
            let after = choices[pick - 1].clone();
            trace.push(Round {
                before: cfg.clone(),
                attack,
                response: Some(response),
                pick,
                after: Some(after.clone()),
            });
            cfg = after;
        }
        let winner = if same_status(&cfg.left, &cfg.right) {
            PlayWinner::Undetermined
        } else {
            PlayWinner::Attacker
        };
        Ok(outcome(winner, trace, cfg, None))
    }
}

/// Runs a play with a fresh solver.
pub fn run_play(
    sys: &PdaSystem,
    start: &Config,
    attacker: &Strategy,
    defender: &Strategy,
    max_rounds: usize,
    opts: GameOptions,
) -> Result<PlayOutcome, GameError> {
    Game::new(sys, opts)?.play(start, attacker, defender, max_rounds)
}

/// Renders rounds in the script grammar, so traces can be replayed.
pub fn render_trace(sys: &PdaSystem, rounds: &[Round]) -> String {
    let mut pr = Printer::modulo_pruning(sys);
    let mut out = String::new();
    for r in rounds {
        let _ = writeln!(
            out,
            "A {} {} -> {}",
            r.attack.side.keyword(),
            sys.label_name(r.attack.label),
            pr.term(&r.attack.target)
        );
        match &r.response {
            None => {
                let _ = writeln!(out, "# defender is stuck");
            }
            Some(Response::Nothing) => {
                let _ = writeln!(out, "D none");
            }
            Some(Response::Chain { silent, last }) => {
                for s in silent {
                    let _ = writeln!(out, "#   eps -> {}", pr.term(s));
                }
                let _ = writeln!(out, "D eps* {} -> {}", sys.label_name(r.attack.label), pr.term(last));
                let _ = writeln!(out, "A pick {}", r.pick);
            }
        }
    }
    out
}

/// A principal variation as a DOT chain of configurations.
pub fn render_trace_dot(sys: &PdaSystem, start: &Config, rounds: &[Round]) -> String {
    let mut pr = Printer::modulo_pruning(sys);
    let mut out = String::from("digraph game {\n  node [shape=box];\n");
    let cfg_label = |pr: &mut Printer, c: &Config| format!("{} | {}", pr.term(&c.left), pr.term(&c.right)).replace('"', "\\\"");
    let _ = writeln!(out, "  c0 [label=\"{}\"];", cfg_label(&mut pr, start));
    for (i, r) in rounds.iter().enumerate() {
        let label = format!("{} {}", r.attack.side.keyword(), sys.label_name(r.attack.label));
        match &r.after {
            Some(c) => {
                let _ = writeln!(out, "  c{} [label=\"{}\"];", i + 1, cfg_label(&mut pr, c));
                let _ = writeln!(out, "  c{i} -> c{} [label=\"{label}\"];", i + 1);
            }
            None => {
                let _ = writeln!(out, "  stuck{i} [label=\"defender stuck\", shape=plaintext];");
                let _ = writeln!(out, "  c{i} -> stuck{i} [label=\"{label}\"];");
            }
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_system, parse_term};

    const SYS: &str = "\
states p q s z
symbols X
actions a b
rule p X eps -> z X
rule q X eps -> s X
rule s X a -> z X
rule p X a -> z X
";

    fn setup() -> (PdaSystem, GameOptions) {
        (parse_system(SYS).unwrap(), GameOptions::default())
    }

    #[test]
    fn silent_attack_against_stuck_side() {
        let (sys, opts) = setup();
        let p = parse_term(&sys, "p [X]").unwrap();
        let z = parse_term(&sys, "z [X]").unwrap();
        let cfg = Config::new(p, z.clone());
        let attack = Attack {
            side: Side::Left,
            label: Label::Silent,
            target: z,
        };
        let rs = legal_defender_responses(&sys, &cfg, &attack, opts, 10).unwrap();
        assert_eq!(rs, vec![Response::Nothing]);
    }

    #[test]
    fn visible_attack_with_one_chain() {
        let (sys, opts) = setup();
        let p = parse_term(&sys, "p [X]").unwrap();
        let q = parse_term(&sys, "q [X]").unwrap();
        let z = parse_term(&sys, "z [X]").unwrap();
        let cfg = Config::new(p, q);
        let attack = Attack {
            side: Side::Left,
            label: sys.label_id("a").unwrap(),
            target: z,
        };
        let rs = legal_defender_responses(&sys, &cfg, &attack, opts, 10).unwrap();
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].choices(&cfg, &attack).len(), 2);
        let b = Attack {
            label: sys.label_id("b").unwrap(),
            ..attack
        };
        assert!(legal_defender_responses(&sys, &cfg, &b, opts, 10).unwrap().is_empty());
    }

    #[test]
    fn plays_from_trivial_starts() {
        let (sys, opts) = setup();
        let nil = Config::new(Process::nil(), Process::nil());
        let out = run_play(&sys, &nil, &Strategy::Solver(3), &Strategy::Solver(3), 5, opts).unwrap();
        assert_eq!(out.winner, PlayWinner::Defender);
        let bad = Config::new(Process::sel(1), Process::nil());
        let out = run_play(&sys, &bad, &Strategy::Solver(3), &Strategy::Solver(3), 5, opts).unwrap();
        assert_eq!(out.winner, PlayWinner::Attacker);
        assert!(out.trace.is_empty());
        let out = run_play(&sys, &nil, &Strategy::Interactive, &Strategy::Solver(3), 5, opts).unwrap();
        assert!(out.script_error.is_some());
    }

    #[test]
    fn copycat_survives() {
        let (sys, opts) = setup();
        let p = parse_term(&sys, "q [X]").unwrap();
        let s = solve_bounded(&sys, &Config::new(p.clone(), p), 8, opts).unwrap();
        assert_eq!(s.winner, Winner::DefenderSurvives(8));
    }

    #[test]
    fn solved_line_replays_as_script() {
        let (sys, opts) = setup();
        // p's silent move to the stuck z cannot be matched by q.
        let p = parse_term(&sys, "p [X]").unwrap();
        let q = parse_term(&sys, "q [X]").unwrap();
        let start = Config::new(p, q);
        let s = solve_bounded(&sys, &start, 6, opts).unwrap();
        let Winner::AttackerWins(d) = s.winner else { panic!("{:?}", s.winner) };
        assert!(d >= 1 && d as usize >= s.line.len());
        let script = parse_script(&sys, &render_trace(&sys, &s.line)).unwrap();
        let out = run_play(
            &sys,
            &start,
            &Strategy::Scripted(script.clone()),
            &Strategy::Scripted(script),
            10,
            opts,
        )
        .unwrap();
        assert_eq!(out.script_error, None);
        assert_eq!(out.trace.len(), s.line.len());
    }

    #[test]
    fn head_cycles_need_a_cap() {
        let sys = parse_system("states p\nsymbols X\nrule p X eps -> p X X\n").unwrap();
        assert_eq!(Game::new(&sys, GameOptions::default()).err(), Some(GameError::SilentHeadCycles));
        let fixed = GameOptions {
            cap: StutterCap::Fixed(3),
            ..GameOptions::default()
        };
        assert!(Game::new(&sys, fixed).is_ok());
    }
}
