//! The process term algebra.
//!
//! A process is `0`, a selection `l`, a sequential process `pXC`, or a
//! selection into a recursive constant `V(i)`. Constants are tuples of
//! processes or named recursive constants. Terms are kept in grammar-normal
//! form: the only way to build a composition is through [`compose`], which
//! collapses `l · (P1,…,Pn)` to `Pl` (or `l` when out of range) and `l · V` to
//! `V(l)`, `l`, or `0` as the equalities demand.
//!
//! Terms are hash-consed, so `==` is pointer equality and cloning is cheap.
//! Tree-shaped quantities ([`Process::size`]) are counted as trees even though
//! storage is shared.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::intern::{hash_str, mix, Interner, ShallowEq};

/// Index of a control state; state `#k` (0-based) is the selection `k + 1`.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct StateId(pub u32);

impl StateId {
    /// The selection index `i` with `p_i ε = i`.
    pub fn selection(self) -> u32 {
        self.0 + 1
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct SymbolId(pub u32);

/// Name of a recursive constant.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecName(Arc<str>);

impl RecName {
    pub fn new(name: &str) -> Self {
        RecName(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for RecName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for RecName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("unknown recursive constant `{0}`")]
    UnknownRecConst(RecName),
    #[error("recursive constant `{name}` declared with arity {declared} but used with arity {used}")]
    ArityMismatch {
        name: RecName,
        declared: usize,
        used: usize,
    },
    #[error("selection index must be positive")]
    ZeroSelection,
    #[error("recursive constant `{name}` is invalid: {violations:?}")]
    InvalidRecConst {
        name: RecName,
        violations: Vec<RecViolation>,
    },
    #[error("recursive constant `{0}` defined twice")]
    DuplicateRecConst(RecName),
}

/// The shape of a process node.
#[derive(Clone, Debug)]
pub enum Node {
    Nil,
    Sel(u32),
    Seq {
        state: StateId,
        symbol: SymbolId,
        cont: Constant,
    },
    /// `V(i)`, i.e. `i · V` with `i` within the arity of `V`.
    RecSel { index: u32, name: RecName },
}

pub struct ProcInner {
    node: Node,
    hash: u64,
    depth: u32,
    min_depth: u32,
    size: u64,
    max_sel: u32,
    simple: bool,
}

impl ShallowEq for ProcInner {
    fn shallow_eq(&self, other: &Self) -> bool {
        match (&self.node, &other.node) {
            (Node::Nil, Node::Nil) => true,
            (Node::Sel(a), Node::Sel(b)) => a == b,
            (
                Node::Seq {
                    state: s1,
                    symbol: x1,
                    cont: c1,
                },
                Node::Seq {
                    state: s2,
                    symbol: x2,
                    cont: c2,
                },
            ) => s1 == s2 && x1 == x2 && c1 == c2,
            (
                Node::RecSel { index: i, name: n },
                Node::RecSel { index: j, name: m },
            ) => i == j && n == m,
            _ => false,
        }
    }
}

pub struct TupleInner {
    entries: Box<[Process]>,
    hash: u64,
    depth: u32,
    min_depth: u32,
    size: u64,
    max_sel: u32,
    simple: bool,
}

impl ShallowEq for TupleInner {
    fn shallow_eq(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(other.entries.iter())
                .all(|(a, b)| a == b)
    }
}

fn proc_interner() -> &'static Interner<ProcInner> {
    static I: OnceLock<Interner<ProcInner>> = OnceLock::new();
    I.get_or_init(Interner::new)
}

fn tuple_interner() -> &'static Interner<TupleInner> {
    static I: OnceLock<Interner<TupleInner>> = OnceLock::new();
    I.get_or_init(Interner::new)
}

/// A process term in grammar-normal form.
#[derive(Clone)]
pub struct Process(Arc<ProcInner>);

/// An interned tuple of processes.
#[derive(Clone)]
pub struct Tuple(Arc<TupleInner>);

/// A constant: a tuple or a named recursive constant.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Constant {
    Tuple(Tuple),
    Rec(RecName),
}

impl PartialEq for Process {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}
impl Eq for Process {}
impl Hash for Process {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash)
    }
}

impl PartialEq for Tuple {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}
impl Eq for Tuple {}
impl Hash for Tuple {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash)
    }
}

impl Ord for Process {
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        fn rank(n: &Node) -> u8 {
            match n {
                Node::Nil => 0,
                Node::Sel(_) => 1,
                Node::RecSel { .. } => 2,
                Node::Seq { .. } => 3,
            }
        }
        match (self.node(), other.node()) {
            (Node::Sel(a), Node::Sel(b)) => a.cmp(b),
            (
                Node::RecSel { index: i, name: n },
                Node::RecSel { index: j, name: m },
            ) => n.cmp(m).then(i.cmp(j)),
            (
                Node::Seq {
                    state: s1,
                    symbol: x1,
                    cont: c1,
                },
                Node::Seq {
                    state: s2,
                    symbol: x2,
                    cont: c2,
                },
            ) => s1.cmp(s2).then(x1.cmp(x2)).then_with(|| c1.cmp(c2)),
            (a, b) => rank(a).cmp(&rank(b)),
        }
    }
}
impl PartialOrd for Process {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Tuple {
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        self.entries().cmp(other.entries())
    }
}
impl PartialOrd for Tuple {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Nil => write!(f, "0"),
            Node::Sel(l) => write!(f, "{l}"),
            Node::RecSel { index, name } => write!(f, "{index} . {name}"),
            Node::Seq {
                state,
                symbol,
                cont,
            } => write!(f, "s{} x{} {:?}", state.0, symbol.0, cont),
        }
    }
}

impl fmt::Debug for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.entries().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e:?}")?;
        }
        write!(f, ")")
    }
}

impl Process {
    fn intern(node: Node) -> Process {
        let (hash, depth, min_depth, size, max_sel, simple) = match &node {
            Node::Nil => (mix(1, 0), 0, 0, 0, 0, true),
            Node::Sel(l) => (mix(2, *l as u64), 0, 0, 0, *l, true),
            Node::RecSel { index, name } => {
                (mix(mix(3, *index as u64), hash_str(name.as_str())), 0, 0, 0, 0, false)
            }
            Node::Seq {
                state,
                symbol,
                cont,
            } => {
                let h = mix(mix(mix(4, state.0 as u64), symbol.0 as u64), cont.hash_word());
                (
                    h,
                    1 + cont.depth(),
                    1 + cont.min_depth(),
                    1u64.saturating_add(cont.size()),
                    cont.max_sel(),
                    cont.is_simple(),
                )
            }
        };
        Process(proc_interner().intern(
            hash,
            ProcInner {
                node,
                hash,
                depth,
                min_depth,
                size,
                max_sel,
                simple,
            },
        ))
    }

    pub fn nil() -> Process {
        Process::intern(Node::Nil)
    }

    /// The selection process `l`; `l` must be positive.
    pub fn sel(l: u32) -> Process {
        assert!(l > 0, "selection indices are positive");
        Process::intern(Node::Sel(l))
    }

    pub fn try_sel(l: u32) -> Result<Process, TermError> {
        if l == 0 {
            Err(TermError::ZeroSelection)
        } else {
            Ok(Process::sel(l))
        }
    }

    pub fn seq(state: StateId, symbol: SymbolId, cont: Constant) -> Process {
        Process::intern(Node::Seq {
            state,
            symbol,
            cont,
        })
    }

    /// `i · V`, normalized: `i` when `i` exceeds the arity, `0` when the
    /// defining body entry is the selection `i` itself.
    pub fn rec_sel(index: u32, name: &RecName, defs: &RecTable) -> Result<Process, TermError> {
        if index == 0 {
            return Err(TermError::ZeroSelection);
        }
        let def = defs.get(name)?;
        if index as usize > def.arity() {
            return Ok(Process::sel(index));
        }
        if def.body[index as usize - 1].as_sel() == Some(index) {
            return Ok(Process::nil());
        }
        Ok(Process::intern(Node::RecSel {
            index,
            name: name.clone(),
        }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn is_nil(&self) -> bool {
        matches!(self.node(), Node::Nil)
    }

    pub fn as_sel(&self) -> Option<u32> {
        match self.node() {
            Node::Sel(l) => Some(*l),
            _ => None,
        }
    }

    /// `(state, symbol, continuation)` for sequential processes.
    pub fn as_seq(&self) -> Option<(StateId, SymbolId, &Constant)> {
        match self.node() {
            Node::Seq {
                state,
                symbol,
                cont,
            } => Some((*state, *symbol, cont)),
            _ => None,
        }
    }

    /// Nesting depth of sequential nodes (0 for leaves).
    pub fn depth(&self) -> u32 {
        self.0.depth
    }

    /// Shortest sequential-node path from the root to a leaf.
    pub fn min_depth(&self) -> u32 {
        self.0.min_depth
    }

    /// Number of sequential nodes, counted as a tree (saturating).
    pub fn size(&self) -> u64 {
        self.0.size
    }

    /// Largest dangling selection index, or 0 if there is none.
    pub fn max_sel(&self) -> u32 {
        self.0.max_sel
    }

    /// No recursive constant occurs in the term.
    pub fn is_simple(&self) -> bool {
        self.0.simple
    }

    pub(crate) fn addr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub(crate) fn hash_word(&self) -> u64 {
        self.0.hash
    }
}

impl Tuple {
    pub fn new(entries: Vec<Process>) -> Tuple {
        let mut hash = mix(5, entries.len() as u64);
        let mut depth = 0;
        let mut min_depth = u32::MAX;
        let mut size = 0u64;
        let mut max_sel = 0;
        let mut simple = true;
        for e in &entries {
            hash = mix(hash, e.hash_word());
            depth = depth.max(e.depth());
            min_depth = min_depth.min(e.min_depth());
            size = size.saturating_add(e.size());
            max_sel = max_sel.max(e.max_sel());
            simple &= e.is_simple();
        }
        if entries.is_empty() {
            min_depth = 0;
        }
        Tuple(tuple_interner().intern(
            hash,
            TupleInner {
                entries: entries.into_boxed_slice(),
                hash,
                depth,
                min_depth,
                size,
                max_sel,
                simple,
            },
        ))
    }

    /// `(1, …, n)`.
    pub fn identity(n: u32) -> Tuple {
        Tuple::new((1..=n).map(Process::sel).collect())
    }

    pub fn empty() -> Tuple {
        Tuple::new(Vec::new())
    }

    pub fn entries(&self) -> &[Process] {
        &self.0.entries
    }

    pub fn arity(&self) -> usize {
        self.0.entries.len()
    }

    /// `C(i)` for `i` in `1..=arity`.
    pub fn get(&self, i: u32) -> Option<&Process> {
        if i == 0 {
            None
        } else {
            self.0.entries.get(i as usize - 1)
        }
    }

    fn addr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }
}

impl Constant {
    pub fn tuple(entries: Vec<Process>) -> Constant {
        Constant::Tuple(Tuple::new(entries))
    }

    pub fn rec(name: &str) -> Constant {
        Constant::Rec(RecName::new(name))
    }

    pub fn identity(n: u32) -> Constant {
        Constant::Tuple(Tuple::identity(n))
    }

    pub fn empty() -> Constant {
        Constant::Tuple(Tuple::empty())
    }

    fn hash_word(&self) -> u64 {
        match self {
            Constant::Tuple(t) => t.0.hash,
            Constant::Rec(n) => mix(6, hash_str(n.as_str())),
        }
    }

    pub fn depth(&self) -> u32 {
        match self {
            Constant::Tuple(t) => t.0.depth,
            Constant::Rec(_) => 0,
        }
    }

    pub fn min_depth(&self) -> u32 {
        match self {
            Constant::Tuple(t) => t.0.min_depth,
            Constant::Rec(_) => 0,
        }
    }

    pub fn size(&self) -> u64 {
        match self {
            Constant::Tuple(t) => t.0.size,
            Constant::Rec(_) => 0,
        }
    }

    pub fn max_sel(&self) -> u32 {
        match self {
            Constant::Tuple(t) => t.0.max_sel,
            Constant::Rec(_) => 0,
        }
    }

    pub fn is_simple(&self) -> bool {
        match self {
            Constant::Tuple(t) => t.0.simple,
            Constant::Rec(_) => false,
        }
    }

    /// Arity of the constant; recursive constants are looked up in `defs`.
    pub fn arity(&self, defs: &RecTable) -> Result<usize, TermError> {
        match self {
            Constant::Tuple(t) => Ok(t.arity()),
            Constant::Rec(n) => Ok(defs.get(n)?.arity()),
        }
    }

    /// `i · C`.
    pub fn select(&self, i: u32, defs: &RecTable) -> Result<Process, TermError> {
        match self {
            Constant::Tuple(t) => Ok(t.get(i).cloned().unwrap_or_else(|| Process::sel(i))),
            Constant::Rec(n) => Process::rec_sel(i, n, defs),
        }
    }

    pub fn as_tuple(&self) -> Option<&Tuple> {
        match self {
            Constant::Tuple(t) => Some(t),
            Constant::Rec(_) => None,
        }
    }
}

/// A violated side condition of a recursive constant definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecViolation {
    /// Body entry `index` mentions a recursive constant.
    NotSimple { index: u32 },
    /// Body entry `index` has a dangling selection outside `[n]`.
    EscapingSelection { index: u32, selection: u32 },
    /// Body entry `index` is a selection other than `index`.
    SelectionNotOwnIndex { index: u32, found: u32 },
}

/// `V[n] = (P1, …, Pn) V[n]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecConstDef {
    pub name: RecName,
    pub body: Vec<Process>,
}

impl RecConstDef {
    pub fn new(name: &str, body: Vec<Process>) -> Self {
        RecConstDef {
            name: RecName::new(name),
            body,
        }
    }

    pub fn arity(&self) -> usize {
        self.body.len()
    }

    /// `I[n] = (1, …, n) I[n]`.
    pub fn identity(name: &str, n: u32) -> Self {
        RecConstDef::new(name, (1..=n).map(Process::sel).collect())
    }
}

/// Every violated condition of a recursive constant definition.
pub fn validate_rec_const(def: &RecConstDef) -> Vec<RecViolation> {
    let n = def.arity() as u32;
    let mut out = Vec::new();
    for (k, body) in def.body.iter().enumerate() {
        let index = k as u32 + 1;
        if !body.is_simple() {
            out.push(RecViolation::NotSimple { index });
        }
        for l in ln(body) {
            if l > n {
                out.push(RecViolation::EscapingSelection {
                    index,
                    selection: l,
                });
            }
        }
        if let Some(found) = body.as_sel() {
            if found != index {
                out.push(RecViolation::SelectionNotOwnIndex { index, found });
            }
        }
    }
    out
}

/// Table of recursive constant definitions, keyed by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecTable {
    defs: BTreeMap<RecName, RecConstDef>,
}

impl RecTable {
    pub fn new() -> Self {
        RecTable::default()
    }

    /// Registers a definition after checking its side conditions.
    pub fn define(&mut self, def: RecConstDef) -> Result<(), TermError> {
        let violations = validate_rec_const(&def);
        if !violations.is_empty() {
            return Err(TermError::InvalidRecConst {
                name: def.name,
                violations,
            });
        }
        if self.defs.contains_key(&def.name) {
            return Err(TermError::DuplicateRecConst(def.name));
        }
        self.defs.insert(def.name.clone(), def);
        Ok(())
    }

    pub fn get(&self, name: &RecName) -> Result<&RecConstDef, TermError> {
        self.defs
            .get(name)
            .ok_or_else(|| TermError::UnknownRecConst(name.clone()))
    }

    pub fn contains(&self, name: &RecName) -> bool {
        self.defs.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RecConstDef> {
        self.defs.values()
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    /// `V(i) = Pi V`, one level of unfolding.
    pub fn unfold(&self, name: &RecName, index: u32) -> Result<Process, TermError> {
        let def = self.get(name)?;
        let body = def
            .body
            .get(index as usize - 1)
            .ok_or_else(|| TermError::ArityMismatch {
                name: name.clone(),
                declared: def.arity(),
                used: index as usize,
            })?;
        compose(body, &Constant::Rec(name.clone()), self)
    }
}

struct Composer<'a> {
    with: &'a Constant,
    defs: &'a RecTable,
    procs: HashMap<usize, Process>,
    tuples: HashMap<usize, Tuple>,
}

impl Composer<'_> {
    fn process(&mut self, p: &Process) -> Result<Process, TermError> {
        if p.max_sel() == 0 {
            return Ok(p.clone());
        }
        if let Some(done) = self.procs.get(&p.addr()) {
            return Ok(done.clone());
        }
        let out = match p.node() {
            Node::Nil | Node::RecSel { .. } => p.clone(),
            Node::Sel(l) => self.with.select(*l, self.defs)?,
            Node::Seq {
                state,
                symbol,
                cont,
            } => Process::seq(*state, *symbol, self.constant(cont)?),
        };
        self.procs.insert(p.addr(), out.clone());
        Ok(out)
    }

    fn constant(&mut self, c: &Constant) -> Result<Constant, TermError> {
        match c {
            Constant::Rec(_) => Ok(c.clone()),
            Constant::Tuple(t) => Ok(Constant::Tuple(self.tuple(t)?)),
        }
    }

    fn tuple(&mut self, t: &Tuple) -> Result<Tuple, TermError> {
        if t.0.max_sel == 0 {
            return Ok(t.clone());
        }
        if let Some(done) = self.tuples.get(&t.addr()) {
            return Ok(done.clone());
        }
        let entries = t
            .entries()
            .iter()
            .map(|e| self.process(e))
            .collect::<Result<Vec<_>, _>>()?;
        let out = Tuple::new(entries);
        self.tuples.insert(t.addr(), out.clone());
        Ok(out)
    }
}

fn check_rec(c: &Constant, defs: &RecTable) -> Result<(), TermError> {
    if let Constant::Rec(n) = c {
        defs.get(n)?;
    }
    Ok(())
}

/// The generalized composition `P · C`.
pub fn compose(p: &Process, c: &Constant, defs: &RecTable) -> Result<Process, TermError> {
    check_rec(c, defs)?;
    Composer {
        with: c,
        defs,
        procs: HashMap::new(),
        tuples: HashMap::new(),
    }
    .process(p)
}

/// The generalized composition `C · C'` of two constants.
pub fn compose_constants(c: &Constant, with: &Constant, defs: &RecTable) -> Result<Constant, TermError> {
    check_rec(with, defs)?;
    check_rec(c, defs)?;
    Composer {
        with,
        defs,
        procs: HashMap::new(),
        tuples: HashMap::new(),
    }
    .constant(c)
}

/// Dangling selection indices of a process.
pub fn ln(p: &Process) -> BTreeSet<u32> {
    fn go(p: &Process, seen: &mut HashMap<usize, ()>, out: &mut BTreeSet<u32>) {
        if p.max_sel() == 0 || seen.insert(p.addr(), ()).is_some() {
            return;
        }
        match p.node() {
            Node::Sel(l) => {
                out.insert(*l);
            }
            Node::Seq {
                cont: Constant::Tuple(t),
                ..
            } => {
                for e in t.entries() {
                    go(e, seen, out);
                }
            }
            _ => {}
        }
    }
    let mut out = BTreeSet::new();
    go(p, &mut HashMap::new(), &mut out);
    out
}

/// Dangling selection indices of a constant (empty for recursive constants).
pub fn ln_constant(c: &Constant) -> BTreeSet<u32> {
    match c {
        Constant::Rec(_) => BTreeSet::new(),
        Constant::Tuple(t) => t.entries().iter().flat_map(ln).collect(),
    }
}

/// Result of truncating a term at a sequential depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cut<T> {
    pub prefix: T,
    pub residual: Tuple,
}

struct Cutter {
    depth: u32,
    offset: u32,
    severed: Vec<Process>,
    index_of: HashMap<Process, u32>,
    memo: HashMap<(usize, u32), Process>,
}

impl Cutter {
    fn kept_max_sel(p: &Process, at: u32, depth: u32, memo: &mut HashMap<(usize, u32), u32>) -> u32 {
        if p.max_sel() == 0 || (at == depth && !(at == 0 && p.as_sel().is_some())) {
            return 0;
        }
        if let Some(v) = memo.get(&(p.addr(), at)) {
            return *v;
        }
        let v = match p.node() {
            Node::Sel(l) => *l,
            Node::Seq {
                cont: Constant::Tuple(t),
                ..
            } => t
                .entries()
                .iter()
                .map(|e| Cutter::kept_max_sel(e, at + 1, depth, memo))
                .max()
                .unwrap_or(0),
            _ => 0,
        };
        memo.insert((p.addr(), at), v);
        v
    }

    fn go(&mut self, p: &Process, at: u32) -> Process {
        if let Some(done) = self.memo.get(&(p.addr(), at)) {
            return done.clone();
        }
        let out = match p.node() {
            Node::Nil | Node::RecSel { .. } => p.clone(),
            Node::Sel(_) | Node::Seq { .. }
                if at == self.depth && (at > 0 || p.as_sel().is_none()) =>
            {
                let next = self.offset + self.severed.len() as u32 + 1;
                let idx = *self.index_of.entry(p.clone()).or_insert(next);
                if idx == next {
                    self.severed.push(p.clone());
                }
                Process::sel(idx)
            }
            Node::Sel(_) => p.clone(),
            Node::Seq {
                state,
                symbol,
                cont,
            } => match cont {
                Constant::Rec(_) => p.clone(),
                Constant::Tuple(t) => {
                    let entries = t.entries().iter().map(|e| self.go(e, at + 1)).collect();
                    Process::seq(*state, *symbol, Constant::tuple(entries))
                }
            },
        };
        self.memo.insert((p.addr(), at), out.clone());
        out
    }

    fn residual(&self) -> Tuple {
        if self.severed.is_empty() {
            return Tuple::empty();
        }
        let mut entries: Vec<Process> = (1..=self.offset).map(Process::sel).collect();
        entries.extend(self.severed.iter().cloned());
        Tuple::new(entries)
    }
}

/// Truncates `p` at sequential depth `depth`.
///
/// Every sequential node and selection sitting at depth `depth` is severed
/// (a selection at the root is left alone, it has no height to cut);
/// distinct severed subterms are numbered left to right after the largest
/// selection index kept in the prefix. The residual maps kept indices to
/// themselves and fresh indices to the severed subterms, so
/// `compose(prefix, residual) == p`. When nothing is severed the residual is
/// the empty tuple.
pub fn cut(p: &Process, depth: u32) -> Cut<Process> {
    let offset = Cutter::kept_max_sel(p, 0, depth, &mut HashMap::new());
    let mut c = Cutter {
        depth,
        offset,
        severed: Vec::new(),
        index_of: HashMap::new(),
        memo: HashMap::new(),
    };
    let prefix = c.go(p, 0);
    Cut {
        prefix,
        residual: c.residual(),
    }
}

/// Truncates every entry of a tuple at `depth` with a shared numbering.
pub fn cut_tuple(t: &Tuple, depth: u32) -> Cut<Tuple> {
    let mut memo = HashMap::new();
    let offset = t
        .entries()
        .iter()
        .map(|e| Cutter::kept_max_sel(e, 0, depth, &mut memo))
        .max()
        .unwrap_or(0);
    let mut c = Cutter {
        depth,
        offset,
        severed: Vec::new(),
        index_of: HashMap::new(),
        memo: HashMap::new(),
    };
    let entries = t.entries().iter().map(|e| c.go(e, 0)).collect();
    Cut {
        prefix: Tuple::new(entries),
        residual: c.residual(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(i: u32) -> StateId {
        StateId(i)
    }
    fn x(i: u32) -> SymbolId {
        SymbolId(i)
    }
    fn tup(v: Vec<Process>) -> Constant {
        Constant::tuple(v)
    }

    #[test]
    fn selection_into_tuple() {
        let defs = RecTable::new();
        let p1 = Process::seq(s(0), x(0), Constant::identity(1));
        let p2 = Process::seq(s(1), x(0), Constant::identity(1));
        let c = tup(vec![p1.clone(), p2.clone()]);
        assert_eq!(compose(&Process::sel(2), &c, &defs).unwrap(), p2);
        assert_eq!(compose(&Process::sel(5), &c, &defs).unwrap(), Process::sel(5));
        assert_eq!(compose(&Process::nil(), &c, &defs).unwrap(), Process::nil());
    }

    #[test]
    fn recursive_selection_is_stable_under_composition() {
        let mut defs = RecTable::new();
        let body = vec![
            Process::seq(s(0), x(0), Constant::identity(2)),
            Process::seq(s(1), x(0), Constant::identity(2)),
        ];
        defs.define(RecConstDef::new("V", body)).unwrap();
        let v = RecName::new("V");
        let v1 = Process::rec_sel(1, &v, &defs).unwrap();
        let c = tup(vec![Process::nil(), Process::nil()]);
        assert_eq!(compose(&v1, &c, &defs).unwrap(), v1);
        assert_eq!(Process::rec_sel(3, &v, &defs).unwrap(), Process::sel(3));
    }

    #[test]
    fn identity_rec_const_collapses_to_nil() {
        let mut defs = RecTable::new();
        defs.define(RecConstDef::identity("I", 3)).unwrap();
        let i = RecName::new("I");
        for k in 1..=3 {
            assert!(Process::rec_sel(k, &i, &defs).unwrap().is_nil());
        }
    }

    #[test]
    fn ln_cases() {
        assert!(ln(&Process::nil()).is_empty());
        assert_eq!(ln(&Process::sel(3)), BTreeSet::from([3]));
        let p = Process::seq(s(0), x(0), tup(vec![Process::sel(1), Process::nil()]));
        assert_eq!(ln(&p), BTreeSet::from([1]));
    }

    #[test]
    fn validation_reports_each_violation() {
        let mut defs = RecTable::new();
        defs.define(RecConstDef::identity("I", 2)).unwrap();
        let ok = RecConstDef::identity("J", 4);
        assert!(validate_rec_const(&ok).is_empty());

        let i1 = Process::rec_sel(1, &RecName::new("I"), &defs).unwrap();
        // I(1) collapses to 0, so build a genuinely non-simple body.
        assert!(i1.is_nil());
        let mut defs2 = RecTable::new();
        defs2
            .define(RecConstDef::new(
                "W",
                vec![Process::seq(s(0), x(0), Constant::identity(1))],
            ))
            .unwrap();
        let w1 = Process::rec_sel(1, &RecName::new("W"), &defs2).unwrap();
        let bad = RecConstDef::new("B", vec![w1]);
        assert_eq!(validate_rec_const(&bad), vec![RecViolation::NotSimple { index: 1 }]);

        let bad = RecConstDef::new("B", vec![Process::sel(2), Process::sel(2)]);
        assert_eq!(
            validate_rec_const(&bad),
            vec![RecViolation::SelectionNotOwnIndex { index: 1, found: 2 }]
        );

        let bad = RecConstDef::new("B", vec![Process::seq(s(0), x(0), tup(vec![Process::sel(3)]))]);
        assert_eq!(
            validate_rec_const(&bad),
            vec![RecViolation::EscapingSelection {
                index: 1,
                selection: 3
            }]
        );
    }

    #[test]
    fn cut_example() {
        let defs = RecTable::new();
        // pX(qY(1,2), 2) cut at 1
        let inner = Process::seq(s(1), x(1), Constant::identity(2));
        let p = Process::seq(s(0), x(0), tup(vec![inner.clone(), Process::sel(2)]));
        let c = cut(&p, 1);
        assert_eq!(c.prefix, Process::seq(s(0), x(0), Constant::identity(2)));
        assert_eq!(c.residual, Tuple::new(vec![inner, Process::sel(2)]));
        assert_eq!(compose(&c.prefix, &Constant::Tuple(c.residual), &defs).unwrap(), p);
    }

    #[test]
    fn cut_shallow_term_has_empty_residual() {
        let p = Process::seq(s(0), x(0), Constant::identity(2));
        let c = cut(&p, 3);
        assert_eq!(c.prefix, p);
        assert_eq!(c.residual.arity(), 0);
        let c = cut(&Process::sel(4), 0);
        assert_eq!(c.prefix, Process::sel(4));
        assert_eq!(c.residual.arity(), 0);
        let c = cut(&Process::sel(4), 2);
        assert_eq!(c.prefix, Process::sel(4));
        assert_eq!(c.residual.arity(), 0);
    }

    #[test]
    fn cut_keeps_shallow_selections_fixed() {
        let defs = RecTable::new();
        let deep = Process::seq(s(1), x(1), Constant::identity(2));
        let p = Process::seq(s(0), x(0), tup(vec![Process::sel(1), deep.clone()]));
        let c = cut(&p, 1);
        // 1 is at depth 1 and is severed too
        assert_eq!(c.residual.arity(), 2);
        let c2 = cut(&p, 2);
        assert_eq!(c2.prefix.depth(), 2);
        assert_eq!(compose(&c2.prefix, &Constant::Tuple(c2.residual), &defs).unwrap(), p);
    }

    #[test]
    fn structural_order_is_total_and_consistent() {
        let a = Process::seq(s(0), x(0), Constant::identity(2));
        let b = Process::seq(s(0), x(1), Constant::identity(2));
        assert!(a < b);
        assert_eq!(a.cmp(&a.clone()), Ordering::Equal);
        assert!(Process::nil() < Process::sel(1));
    }
}
