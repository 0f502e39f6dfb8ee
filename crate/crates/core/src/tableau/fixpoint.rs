//! Refinement of candidate bodies for the recursive constant introduced by
//! a cancellation.
//!
//! Given `P·D = Q·D` with `D` of arity `n`, start from `L = (1, …, n)` and
//! repeatedly compare `P·V` and `Q·V` where `V` is defined from the current
//! `L`. When they differ, a descent through the bounded game on the `V`
//! side, mirrored on the `D` side, ends at a selection `i` facing some
//! prefix `L'` with `D(i) = L'·D`, and `L` is refined with it.

use std::sync::atomic::{AtomicUsize, Ordering};

use super::Judge;
use crate::equivalence::EquivError;
use crate::game::{Game, GameError, GameOptions, StutterCap};
use crate::lts::Outcome;
use crate::system::{Label, PdaSystem};
use crate::term::{compose, Constant, Process, RecConstDef, Tuple};

#[derive(Clone, Debug)]
pub struct FixpointCandidate {
    /// The refined vector as found; entries may point at each other.
    pub body: Vec<Process>,
    /// A valid definition with the same meaning: number chains resolved.
    pub def: RecConstDef,
    /// Every intermediate vector, starting with the identity.
    pub history: Vec<Vec<Process>>,
}

#[derive(Clone, Debug)]
pub struct Refinement {
    pub candidates: Vec<FixpointCandidate>,
    /// Refinement steps taken.
    pub steps: usize,
    /// False when an undecided judgement or a failed descent stopped the
    /// refinement early.
    pub complete: bool,
}

static FRESH: AtomicUsize = AtomicUsize::new(0);

/// Follows number entries from `i`: the term at the end of the chain, or
/// `i` itself when the chain ends at an identity entry or cycles.
fn resolve(l: &[Process], i: u32) -> Process {
    let mut seen = vec![false; l.len() + 1];
    let mut j = i;
    loop {
        if seen[j as usize] {
            return Process::sel(i);
        }
        seen[j as usize] = true;
        let e = &l[j as usize - 1];
        match e.as_sel() {
            Some(k) if k == j => return Process::sel(i),
            Some(k) => j = k,
            None => return e.clone(),
        }
    }
}

/// A valid body with the same meaning as `l`.
pub(crate) fn rectify(name: &str, l: &[Process]) -> RecConstDef {
    RecConstDef::new(name, (1..=l.len() as u32).map(|i| resolve(l, i)).collect())
}

fn define(sys: &PdaSystem, l: &[Process]) -> Result<(PdaSystem, RecConstDef), EquivError> {
    loop {
        let name = format!("W{}", FRESH.fetch_add(1, Ordering::Relaxed));
        let def = rectify(&name, l);
        if sys.recs().contains(&def.name) {
            continue;
        }
        match sys.with_recs([def.clone()]) {
            Ok(ext) => return Ok((ext, def)),
            Err(_) => continue,
        }
    }
}

/// The side of a prefix as the descent sees it: selections whose entry is
/// not an identity are replaced by what they stand for.
fn view(l: &[Process], p: &Process) -> Process {
    let Some(mut j) = p.as_sel().filter(|&j| j as usize <= l.len()) else {
        return p.clone();
    };
    for _ in 0..l.len() {
        match l[j as usize - 1].as_sel() {
            Some(k) if k == j => break,
            Some(k) => j = k,
            None => return l[j as usize - 1].clone(),
        }
    }
    Process::sel(j)
}

enum Resp {
    Pairs(Vec<(Process, Process)>),
    Exit(u32, Process),
}

struct Descent<'a, 'g> {
    sys: &'a PdaSystem,
    game: Game<'g>,
    v: Constant,
    d: Constant,
    l: &'a [Process],
    judge: &'a mut Judge,
}

impl Descent<'_, '_> {
    fn on_v(&self, p: &Process) -> Result<Process, EquivError> {
        Ok(compose(p, &self.v, self.game.system().recs())?)
    }

    fn on_d(&mut self, a: &Process, b: &Process) -> Result<bool, EquivError> {
        let (a, b) = (compose(a, &self.d, self.sys.recs())?, compose(b, &self.d, self.sys.recs())?);
        self.judge.holds(self.sys, &a, &b)
    }

    fn fails(&mut self, a: &Process, b: &Process, k: u32) -> Result<bool, EquivError> {
        let (a, b) = (self.on_v(a)?, self.on_v(b)?);
        Ok(!self.game.survives(&a, &b, k).map_err(EquivError::from)?)
    }

    /// Prefix successors of a non-selection prefix.
    fn steps(&self, p: &Process) -> Result<Vec<(Label, Process)>, EquivError> {
        let mut v = self.sys.step(p)?;
        v.sort();
        v.dedup();
        Ok(v)
    }

    /// A response to `a -l-> t` from `b` that is good on the `D` side, as
    /// the pairs it requires; chains pass through selections via `L`. A
    /// silent chain that reaches an identity selection `i` with
    /// `D(i) = a·D` but `V(i) ≠ a·V` ends the descent there instead.
    fn response(&mut self, a: &Process, l: Label, t: &Process, b: &Process, m: u32, cap: usize) -> Result<Option<Resp>, EquivError> {
        if l.is_silent() && self.on_d(t, b)? {
            return Ok(Some(Resp::Pairs(vec![(t.clone(), b.clone())])));
        }
        let mut layer = vec![(b.clone(), Vec::<Process>::new())];
        let mut seen = vec![b.clone()];
        for depth in 0..=cap {
            let mut next = Vec::new();
            for (y, path) in &layer {
                if let Some(i) = y.as_sel() {
                    if self.fails(a, y, m)? {
                        return Ok(Some(Resp::Exit(i, a.clone())));
                    }
                    continue;
                }
                for (l2, y2) in self.steps(y)? {
                    if l2 == l && self.on_d(t, &y2)? {
                        let mut pairs = vec![(t.clone(), view(self.l, &y2))];
                        pairs.extend(path.iter().map(|p| (a.clone(), p.clone())));
                        return Ok(Some(Resp::Pairs(pairs)));
                    }
                    if l2.is_silent() && depth < cap {
                        let y2 = view(self.l, &y2);
                        if !seen.contains(&y2) && self.on_d(a, &y2)? {
                            seen.push(y2.clone());
                            let mut p = path.clone();
                            p.push(y2.clone());
                            next.push((y2, p));
                        }
                    }
                }
            }
            layer = next;
        }
        Ok(None)
    }

    /// Descends from `(p, q)`, which fail at `m`, to a selection facing a
    /// prefix. Returns `(i, L')`.
    fn run(&mut self, mut p: Process, mut q: Process, mut m: u32, cap: usize) -> Result<Option<(u32, Process)>, EquivError> {
        p = view(self.l, &p);
        q = view(self.l, &q);
        loop {
            if let Some(i) = p.as_sel() {
                return Ok(Some((i, q)));
            }
            if let Some(i) = q.as_sel() {
                return Ok(Some((i, p)));
            }
            if m == 0 {
                return Ok(None);
            }
            let mut next = None;
            'attacks: for (a, b) in [(p.clone(), q.clone()), (q.clone(), p.clone())] {
                let (av, bv) = (self.on_v(&a)?, self.on_v(&b)?);
                for (l, t) in self.steps(&a)? {
                    let tv = self.on_v(&t)?;
                    if self.game.find_response(&av, &tv, &bv, l, m).map_err(EquivError::from)?.is_some() {
                        continue;
                    }
                    let pairs = match self.response(&a, l, &t, &b, m, cap)? {
                        Some(Resp::Pairs(pairs)) => pairs,
                        Some(Resp::Exit(i, lp)) => return Ok(Some((i, lp))),
                        None => return Ok(None),
                    };
                    for (x, y) in pairs {
                        if self.fails(&x, &y, m - 1)? {
                            next = Some((view(self.l, &x), view(self.l, &y)));
                            break 'attacks;
                        }
                    }
                    return Ok(None);
                }
            }
            let Some((x, y)) = next else { return Ok(None) };
            p = x;
            q = y;
            m -= 1;
        }
    }
}

fn update(l: &mut [Process], i: u32, found: &Process) -> bool {
    let before = l.to_vec();
    match found.as_sel() {
        Some(j) if j != i && (j as usize) <= l.len() => {
            let (lo, hi) = (i.min(j), i.max(j));
            l[hi as usize - 1] = Process::sel(lo);
        }
        Some(_) => return false,
        None => {
            let chained: Vec<u32> = (i + 1..=l.len() as u32)
                .filter(|&j| {
                    let mut k = j;
                    let mut steps = 0;
                    while let Some(n) = l[k as usize - 1].as_sel() {
                        if n == i {
                            return true;
                        }
                        if n == k || steps > l.len() {
                            return false;
                        }
                        k = n;
                        steps += 1;
                    }
                    false
                })
                .collect();
            l[i as usize - 1] = found.clone();
            for j in chained {
                l[j as usize - 1] = found.clone();
            }
        }
    }
    l != before.as_slice()
}

/// Refines the identity vector until `P·V = Q·V` holds for the defined
/// constant, within `n(n-1)/2` steps plus one. `max_depth` bounds the game
/// used to locate a difference, `cap` the response chains.
pub fn refine_fixpoints(
    sys: &PdaSystem,
    p: &Process,
    q: &Process,
    d: &Tuple,
    judge: &mut Judge,
    max_depth: u32,
    cap: usize,
) -> Result<Refinement, EquivError> {
    let n = d.arity();
    let mut l: Vec<Process> = (1..=n as u32).map(Process::sel).collect();
    let mut history = vec![l.clone()];
    let limit = n * n.saturating_sub(1) / 2 + 1;
    let dc = Constant::Tuple(d.clone());
    for steps in 0..=limit {
        let (ext, def) = define(sys, &l)?;
        let v = Constant::Rec(def.name.clone());
        let (pv, qv) = (compose(p, &v, ext.recs())?, compose(q, &v, ext.recs())?);
        match judge.judge(&ext, &pv, &qv)?.verdict {
            Outcome::Yes => {
                return Ok(Refinement {
                    candidates: vec![FixpointCandidate {
                        body: l,
                        def,
                        history,
                    }],
                    steps,
                    complete: true,
                })
            }
            Outcome::Unknown => break,
            Outcome::No => {}
        }
        let opts = GameOptions {
            cap: StutterCap::Fixed(cap),
            ..GameOptions::default()
        };
        let mut game = Game::new(&ext, opts).map_err(EquivError::from)?;
        let mut m = None;
        for k in 0..=max_depth {
            match game.survives(&pv, &qv, k) {
                Ok(true) => {}
                Ok(false) => {
                    m = Some(k);
                    break;
                }
                Err(GameError::Exhausted) => break,
                Err(e) => return Err(e.into()),
            }
        }
        let Some(m) = m else { break };
        let mut descent = Descent {
            sys,
            game,
            v,
            d: dc.clone(),
            l: &l,
            judge,
        };
        let found = match descent.run(p.clone(), q.clone(), m, cap) {
            Ok(f) => f,
            Err(EquivError::Game(GameError::Exhausted)) => None,
            Err(e) => return Err(e),
        };
        let Some((i, lp)) = found else { break };
        if !update(&mut l, i, &lp) {
            break;
        }
        history.push(l.clone());
        if steps + 1 > limit {
            break;
        }
    }
    Ok(Refinement {
        candidates: Vec::new(),
        steps: history.len() - 1,
        complete: false,
    })
}

/// Bodies of arity `n` whose entries are selections or `0`, in a fixed
/// order; alternatives to the refined candidate.
pub(crate) fn small_bodies(n: usize, limit: usize) -> Vec<Vec<Process>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    loop {
        if out.len() >= limit {
            break;
        }
        // Entry i points to some j ≤ i (j = i is the identity) or is 0.
        out.push(
            cur.iter()
                .enumerate()
                .map(|(i, &c)| if c == 0 { Process::sel(i as u32 + 1) } else if c as usize == i + 1 { Process::nil() } else { Process::sel(c) })
                .collect(),
        );
        let mut k = 0;
        loop {
            if k == n {
                return out;
            }
            cur[k] += 1;
            if cur[k] as usize <= k + 1 {
                break;
            }
            cur[k] = 0;
            k += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::OracleSpec;
    use super::*;
    use crate::parse::{parse_system, parse_term};

    #[test]
    fn rectify_resolves_chains() {
        let l = vec![Process::sel(1), Process::sel(1), Process::sel(2)];
        let d = rectify("V", &l);
        assert_eq!(d.body, vec![Process::sel(1), Process::sel(2), Process::sel(3)]);
        assert!(crate::term::validate_rec_const(&d).is_empty());
    }

    #[test]
    fn small_bodies_are_valid() {
        let all = small_bodies(3, 1000);
        assert_eq!(all.len(), 2 * 3 * 4);
        for b in all {
            assert!(crate::term::validate_rec_const(&rectify("V", &b)).is_empty());
        }
    }

    #[test]
    fn identical_pops_need_no_refinement() {
        let sys = parse_system("states p q\nsymbols X\nactions a\nrule p X a -> p\nrule q X a -> p\n").unwrap();
        let mut j = Judge::new(OracleSpec::default());
        let p = parse_term(&sys, "p X (1)").unwrap();
        let q = parse_term(&sys, "q X (1)").unwrap();
        let d = Tuple::new(vec![parse_term(&sys, "p [X]").unwrap()]);
        let r = refine_fixpoints(&sys, &p, &q, &d, &mut j, 8, 8).unwrap();
        assert!(r.complete);
        assert_eq!(r.steps, 0);
    }

    #[test]
    fn identifies_equal_entries() {
        // pX pops to 1, qX pops to 2; D(1) = D(2) lets them agree.
        let sys = parse_system("states p q\nsymbols X\nactions a\nrule p X a -> p\nrule q X a -> q\n").unwrap();
        let mut j = Judge::new(OracleSpec::default());
        let p = parse_term(&sys, "p X (1, 2)").unwrap();
        let q = parse_term(&sys, "q X (1, 2)").unwrap();
        let x = parse_term(&sys, "p [X]").unwrap();
        let d = Tuple::new(vec![x.clone(), x]);
        let r = refine_fixpoints(&sys, &p, &q, &d, &mut j, 8, 8).unwrap();
        assert!(r.complete, "{r:?}");
        assert!(r.steps <= 1);
        let c = &r.candidates[0];
        let v = Constant::Rec(c.def.name.clone());
        let ext = sys.with_recs([c.def.clone()]).unwrap();
        let (pv, qv) = (compose(&p, &v, ext.recs()).unwrap(), compose(&q, &v, ext.recs()).unwrap());
        assert!(j.holds(&ext, &pv, &qv).unwrap());
    }

    #[test]
    fn response_through_a_selection_refines() {
        // pX0 pops silently into D(1); the matching b-moves live in D.
        let sys = parse_system(
            "states p\nsymbols X Y\nactions a b\nrule p X eps -> p\nrule p X a -> p\nrule p Y a -> p Y Y\n",
        )
        .unwrap();
        let mut j = Judge::new(OracleSpec::default());
        let p = parse_term(&sys, "p X (1)").unwrap();
        let q = parse_term(&sys, "p Y (1)").unwrap();
        let d = Tuple::new(vec![parse_term(&sys, "p [Y X]").unwrap()]);
        let r = refine_fixpoints(&sys, &p, &q, &d, &mut j, 8, 8).unwrap();
        assert!(r.complete, "{r:?}");
        // One entry and still one step: more than n(n-1)/2.
        assert_eq!(r.steps, 1);
        let c = &r.candidates[0];
        let v = Constant::Rec(c.def.name.clone());
        let ext = sys.with_recs([c.def.clone()]).unwrap();
        let (pv, qv) = (compose(&p, &v, ext.recs()).unwrap(), compose(&q, &v, ext.recs()).unwrap());
        assert!(j.holds(&ext, &pv, &qv).unwrap());
    }
}
