#![allow(dead_code)]

use std::collections::HashSet;

use pdbisim::game::same_status;
use pdbisim::{
    compose, reachable_lts, validate_rec_const, Constant, Explore, Label, Lts, PdaSystem, Process, RecConstDef,
    StateId, SymbolId, SystemBuilder, Tuple,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Silent {
    Any,
    Popping,
    Pushing,
}

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub states: usize,
    pub symbols: usize,
    pub actions: usize,
    pub max_word: usize,
    pub silent: Silent,
}

impl Shape {
    pub fn small(silent: Silent) -> Shape {
        Shape {
            states: 2,
            symbols: 2,
            actions: 2,
            max_word: 2,
            silent,
        }
    }
}

fn word_len(rng: &mut Rng8, lo: usize, hi: usize) -> usize {
    if lo >= hi {
        return lo;
    }
    // Short words are likelier, which keeps fragments finite more often.
    let mut n = lo;
    while n < hi && rng.gen_bool(0.45) {
        n += 1;
    }
    n
}

pub fn random_system(rng: &mut Rng8, shape: &Shape) -> PdaSystem {
    let mut b = SystemBuilder::new();
    let states: Vec<StateId> = (0..shape.states).map(|i| b.state(&format!("p{i}"))).collect();
    let symbols: Vec<SymbolId> = (0..shape.symbols).map(|i| b.symbol(&format!("X{i}"))).collect();
    let actions: Vec<_> = (0..shape.actions)
        .map(|i| b.action(&((b'a' + i as u8) as char).to_string()))
        .collect();
    for &p in &states {
        for &x in &symbols {
            let k = match rng.gen_range(0..20) {
                0..=2 => 0,
                3..=12 => 1,
                _ => 2,
            };
            for _ in 0..k {
                let silent = rng.gen_bool(0.3);
                let (lo, hi) = match (silent, shape.silent) {
                    (true, Silent::Popping) => (0, 1.min(shape.max_word)),
                    (true, Silent::Pushing) => (1, shape.max_word.max(1)),
                    _ => (0, shape.max_word),
                };
                let len = word_len(rng, lo, hi);
                let word = (0..len).map(|_| *symbols.choose(rng).unwrap()).collect();
                let label = if silent {
                    Label::Silent
                } else {
                    Label::Visible(*actions.choose(rng).unwrap())
                };
                b.rule(p, x, label, *states.choose(rng).unwrap(), word);
            }
        }
    }
    b.build().expect("generated systems are well formed")
}

pub fn random_word(rng: &mut Rng8, sys: &PdaSystem, lo: usize, hi: usize) -> Vec<SymbolId> {
    let n = rng.gen_range(lo..=hi);
    (0..n)
        .map(|_| SymbolId(rng.gen_range(0..sys.num_symbols() as u32)))
        .collect()
}

pub fn random_state(rng: &mut Rng8, sys: &PdaSystem) -> StateId {
    StateId(rng.gen_range(0..sys.num_states() as u32))
}

/// `pα` for a random state and a word of length `lo..=hi`.
pub fn random_standard(rng: &mut Rng8, sys: &PdaSystem, lo: usize, hi: usize) -> Process {
    let p = random_state(rng, sys);
    let w = random_word(rng, sys, lo, hi);
    sys.expand_standard(p, &w)
}

/// A random term of depth at most `depth` whose selections lie in `1..=q`
/// and whose continuations all have arity `q`.
pub fn random_term(rng: &mut Rng8, sys: &PdaSystem, depth: u32) -> Process {
    let q = sys.num_states() as u32;
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.1) {
            Process::nil()
        } else {
            Process::sel(rng.gen_range(1..=q))
        };
    }
    let s = random_state(rng, sys);
    let x = SymbolId(rng.gen_range(0..sys.num_symbols() as u32));
    let entries = (0..q).map(|_| random_term(rng, sys, depth - 1)).collect();
    Process::seq(s, x, Constant::tuple(entries))
}

pub fn random_tuple(rng: &mut Rng8, sys: &PdaSystem, depth: u32) -> Tuple {
    Tuple::new((0..sys.num_states()).map(|_| random_term(rng, sys, depth)).collect())
}

/// A valid recursive constant of arity `q` with random simple bodies.
pub fn random_rec(rng: &mut Rng8, sys: &PdaSystem, name: &str) -> RecConstDef {
    let q = sys.num_states() as u32;
    let body = (1..=q)
        .map(|i| {
            if rng.gen_bool(0.4) {
                return Process::sel(i);
            }
            let s = random_state(rng, sys);
            let x = SymbolId(rng.gen_range(0..sys.num_symbols() as u32));
            let entries = (0..q)
                .map(|_| {
                    if rng.gen_bool(0.2) {
                        Process::nil()
                    } else {
                        Process::sel(rng.gen_range(1..=q))
                    }
                })
                .collect();
            Process::seq(s, x, Constant::tuple(entries))
        })
        .collect();
    let def = RecConstDef::new(name, body);
    if validate_rec_const(&def).is_empty() {
        def
    } else {
        RecConstDef::identity(name, q)
    }
}

/// The reachable fragment of `roots` if it closes within `budget` states.
pub fn fragment(sys: &PdaSystem, roots: &[Process], budget: usize) -> Option<Lts> {
    reachable_lts(sys, roots, Explore { budget, prune: true }).ok()?.ok()
}

/// A system of the given shape together with roots whose joint fragment
/// closes within `budget`. Gives up after `tries` attempts.
pub fn closing_system(
    rng: &mut Rng8,
    shape: &Shape,
    roots: usize,
    budget: usize,
    tries: usize,
    accept: impl Fn(&PdaSystem) -> bool,
) -> Option<(PdaSystem, Vec<Process>, Lts)> {
    for _ in 0..tries {
        let sys = random_system(rng, shape);
        if !accept(&sys) {
            continue;
        }
        let rs: Vec<Process> = (0..roots).map(|_| random_standard(rng, &sys, 1, 3)).collect();
        if let Some(lts) = fragment(&sys, &rs, budget) {
            if lts.len() >= 3 {
                return Some((sys, rs, lts));
            }
        }
    }
    None
}

/// The largest symmetric relation on `lts` satisfying the branching
/// transfer clause and selection identity, computed by brute force.
pub fn brute_force_bisimilar(lts: &Lts) -> Vec<Vec<bool>> {
    let n = lts.len();
    let closure: Vec<Vec<usize>> = (0..n)
        .map(|u| {
            let mut seen = vec![u];
            let mut set = HashSet::from([u]);
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
    let mut r = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            r[i][j] = same_status(&lts.states[i], &lts.states[j]);
        }
    }
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if !r[i][j] {
                    continue;
                }
                let ok = lts.edges[i].iter().all(|&(l, i2)| {
                    (l.is_silent() && r[i2][j])
                        || closure[j].iter().any(|&j1| {
                            r[i][j1] && lts.edges[j1].iter().any(|&(m, j2)| m == l && r[i2][j2])
                        })
                });
                if !ok {
                    r[i][j] = false;
                    r[j][i] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            return r;
        }
    }
}

/// `c` applied to a random standard tuple of arity `q`.
pub fn random_standard_constant(rng: &mut Rng8, sys: &PdaSystem) -> Constant {
    Constant::tuple((0..sys.num_states()).map(|_| random_standard(rng, sys, 0, 2)).collect())
}

pub fn apply(sys: &PdaSystem, p: &Process, c: &Constant) -> Process {
    compose(p, c, sys.recs()).expect("constant is defined")
}
