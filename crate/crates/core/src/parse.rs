//! Text syntax for terms and system files, and the matching printers.
//!
//! Terms:
//!
//! ```text
//! 0                 nil
//! 3                 selection
//! p X (T1, T2)      sequential process with a tuple continuation
//! p X V             sequential process over a recursive constant
//! p [X Y Z]         the standard process pXYZ, i.e. pXYZ(1, ..., q)
//! T . C             composition with a constant, e.g. 2 . V or p [X] . (0, 1)
//! ```
//!
//! System files hold one declaration per line:
//!
//! ```text
//! states p q
//! symbols X Y
//! actions a b
//! flavor eps-popping
//! rule p X a -> q Y X
//! rule p X eps -> q
//! rec V[2] = (p X (1, 2), 2) V
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use crate::system::{FlavorTag, Label, PdaSystem, Pruner, SystemBuilder, SystemError};
use crate::term::{compose, Constant, Node, Process, RecConstDef, RecName, StateId, SymbolId, TermError, Tuple};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Term { line: usize, source: TermError },
    #[error("{0}")]
    System(#[from] SystemError),
}

impl ParseError {
    fn at(line: usize, msg: impl Into<String>) -> Self {
        ParseError::Syntax { line, msg: msg.into() }
    }

}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u32),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Dot,
    Eq,
    Arrow,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

/// Identifiers may carry a parameter list in angle brackets, e.g. `t<1,+>`.
fn lex(src: &str, line: usize) -> Result<Vec<Tok>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push(Tok::LParen);
                i += 1
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1
            }
            '[' => {
                out.push(Tok::LBrack);
                i += 1
            }
            ']' => {
                out.push(Tok::RBrack);
                i += 1
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1
            }
            '.' => {
                out.push(Tok::Dot);
                i += 1
            }
            '=' => {
                out.push(Tok::Eq);
                i += 1
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push(Tok::Arrow);
                i += 2
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v = s
                    .parse()
                    .map_err(|_| ParseError::at(line, format!("integer `{s}` out of range")))?;
                out.push(Tok::Int(v));
            }
            c if is_ident_start(c) => {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                if chars.get(i) == Some(&'<') {
                    while i < chars.len() && chars[i] != '>' {
                        i += 1;
                    }
                    if i == chars.len() {
                        return Err(ParseError::at(line, "unterminated `<` in identifier"));
                    }
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            c => return Err(ParseError::at(line, format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    line: usize,
    sys: &'a PdaSystem,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(self.err(format!("expected {want:?}, found {t:?}"))),
            None => Err(self.err(format!("expected {want:?}, found end of input"))),
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::at(self.line, msg)
    }

    fn term_err(&self, e: TermError) -> ParseError {
        ParseError::Term { line: self.line, source: e }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            other => Err(self.err(format!("expected identifier, found {other:?}"))),
        }
    }

    fn state(&mut self) -> Result<StateId, ParseError> {
        let s = self.ident()?;
        self.sys.state_id(&s).ok_or_else(|| self.err(format!("unknown state `{s}`")))
    }

    fn symbol(&mut self) -> Result<SymbolId, ParseError> {
        let s = self.ident()?;
        self.sys.symbol_id(&s).ok_or_else(|| self.err(format!("unknown symbol `{s}`")))
    }

    fn term(&mut self) -> Result<Process, ParseError> {
        let mut t = self.atom()?;
        while self.peek() == Some(&Tok::Dot) {
            self.next();
            let c = self.constant()?;
            t = compose(&t, &c, self.sys.recs()).map_err(|e| self.term_err(e))?;
        }
        Ok(t)
    }

    fn atom(&mut self) -> Result<Process, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Int(0)) => {
                self.next();
                Ok(Process::nil())
            }
            Some(Tok::Int(l)) => {
                self.next();
                Ok(Process::sel(l))
            }
            Some(Tok::LParen) => {
                self.next();
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Some(Tok::Ident(_)) => {
                let p = self.state()?;
                if self.peek() == Some(&Tok::LBrack) {
                    self.next();
                    let mut word = Vec::new();
                    while self.peek() != Some(&Tok::RBrack) {
                        word.push(self.symbol()?);
                    }
                    self.next();
                    return Ok(self.sys.expand_standard(p, &word));
                }
                let x = self.symbol()?;
                let c = self.constant()?;
                Ok(Process::seq(p, x, c))
            }
            other => Err(self.err(format!("expected a term, found {other:?}"))),
        }
    }

    fn constant(&mut self) -> Result<Constant, ParseError> {
        match self.next() {
            Some(Tok::LParen) => {
                let mut entries = Vec::new();
                if self.peek() == Some(&Tok::RParen) {
                    self.next();
                    return Ok(Constant::empty());
                }
                loop {
                    entries.push(self.term()?);
                    match self.next() {
                        Some(Tok::Comma) => continue,
                        Some(Tok::RParen) => break,
                        other => return Err(self.err(format!("expected `,` or `)`, found {other:?}"))),
                    }
                }
                Ok(Constant::tuple(entries))
            }
            Some(Tok::Ident(name)) => {
                let n = RecName::new(&name);
                if !self.sys.recs().contains(&n) {
                    return Err(self.term_err(TermError::UnknownRecConst(n)));
                }
                Ok(Constant::Rec(n))
            }
            other => Err(self.err(format!("expected a constant, found {other:?}"))),
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.err(format!("trailing input at {t:?}"))),
        }
    }
}

/// Parses a single term against the names of `sys`.
pub fn parse_term(sys: &PdaSystem, src: &str) -> Result<Process, ParseError> {
    parse_term_at(sys, src, 1)
}

pub(crate) fn parse_term_at(sys: &PdaSystem, src: &str, line: usize) -> Result<Process, ParseError> {
    let mut p = Parser {
        toks: lex(src, line)?,
        pos: 0,
        line,
        sys,
    };
    let t = p.term()?;
    p.finish()?;
    Ok(t)
}

/// Parses a constant such as `(1, p X (2))` or `V`.
pub fn parse_constant(sys: &PdaSystem, src: &str) -> Result<Constant, ParseError> {
    let mut p = Parser {
        toks: lex(src, 1)?,
        pos: 0,
        line: 1,
        sys,
    };
    let c = p.constant()?;
    p.finish()?;
    Ok(c)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Parses a system file. Names must be declared before use.
pub fn parse_system(src: &str) -> Result<PdaSystem, ParseError> {
    let mut b = SystemBuilder::new();
    // Rec lines are parsed against the names known so far, so they may only
    // mention states and symbols declared above them.
    let mut pending_recs: Vec<(usize, String)> = Vec::new();
    for (k, raw) in src.lines().enumerate() {
        let line = k + 1;
        let text = strip_comment(raw).trim();
        if text.is_empty() {
            continue;
        }
        let (kw, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
        let words: Vec<&str> = rest.split_whitespace().collect();
        match kw {
            "states" | "symbols" | "actions" => {
                for w in &words {
                    let toks = lex(w, line)?;
                    if toks.len() != 1 || !matches!(toks[0], Tok::Ident(_)) {
                        return Err(ParseError::at(line, format!("`{w}` is not an identifier")));
                    }
                    let dup = match kw {
                        "states" => b.has_state(w),
                        "symbols" => b.has_symbol(w),
                        _ => b.has_action(w) || *w == "eps",
                    };
                    if dup {
                        return Err(ParseError::at(line, format!("`{w}` declared twice")));
                    }
                    match kw {
                        "states" => {
                            b.state(w);
                        }
                        "symbols" => {
                            b.symbol(w);
                        }
                        _ => {
                            b.action(w);
                        }
                    }
                }
            }
            "flavor" => {
                if words.is_empty() {
                    return Err(ParseError::at(line, "flavor needs at least one tag"));
                }
                for w in &words {
                    let tag = FlavorTag::from_keyword(w)
                        .ok_or_else(|| ParseError::at(line, format!("unknown flavor `{w}`")))?;
                    b.declare(tag);
                }
            }
            "rule" => {
                let arrow = words
                    .iter()
                    .position(|w| *w == "->")
                    .ok_or_else(|| ParseError::at(line, "rule needs `->`"))?;
                if arrow != 3 || words.len() < 5 {
                    return Err(ParseError::at(line, "expected `rule p X label -> q word...`"));
                }
                let need = |ok: bool, kind: &str, w: &str| {
                    if ok {
                        Ok(())
                    } else {
                        Err(ParseError::at(line, format!("unknown {kind} `{w}`")))
                    }
                };
                need(b.has_state(words[0]), "state", words[0])?;
                need(b.has_symbol(words[1]), "symbol", words[1])?;
                let label = if words[2] == "eps" {
                    None
                } else {
                    need(b.has_action(words[2]), "action", words[2])?;
                    Some(words[2])
                };
                need(b.has_state(words[4]), "state", words[4])?;
                for w in &words[5..] {
                    need(b.has_symbol(w), "symbol", w)?;
                }
                b.rule_named(words[0], words[1], label, words[4], &words[5..]);
            }
            "rec" => pending_recs.push((line, rest.to_string())),
            other => return Err(ParseError::at(line, format!("unknown declaration `{other}`"))),
        }
    }
    if pending_recs.is_empty() {
        return Ok(b.build()?);
    }
    // Parse rec bodies against a name-only system; bodies are simple so no
    // other definitions are needed.
    let names = b.names_only().build()?;
    for (line, text) in pending_recs {
        b.rec(parse_rec_line(&names, &text, line)?);
    }
    Ok(b.build()?)
}

fn parse_rec_line(names: &PdaSystem, text: &str, line: usize) -> Result<RecConstDef, ParseError> {
    let mut p = Parser {
        toks: lex(text, line)?,
        pos: 0,
        line,
        sys: names,
    };
    let name = p.ident()?;
    p.expect(Tok::LBrack)?;
    let arity = match p.next() {
        Some(Tok::Int(n)) => n as usize,
        other => return Err(p.err(format!("expected arity, found {other:?}"))),
    };
    p.expect(Tok::RBrack)?;
    p.expect(Tok::Eq)?;
    let body = match p.constant()? {
        Constant::Tuple(t) => t.entries().to_vec(),
        Constant::Rec(_) => return Err(p.err("rec body must be a tuple")),
    };
    let tail = p.ident()?;
    if tail != name {
        return Err(p.err(format!("rec `{name}` must end with `{name}`, found `{tail}`")));
    }
    p.finish()?;
    if body.len() != arity {
        return Err(p.err(format!("rec `{name}` declares arity {arity} but has {} entries", body.len())));
    }
    Ok(RecConstDef::new(&name, body))
}

/// Word spine of a term that looks like `pα · (1, …, q)`.
fn spine(p: &Process) -> Option<(StateId, Vec<SymbolId>)> {
    let (state, x, cont) = p.as_seq()?;
    let mut word = vec![x];
    let mut cur = cont.as_tuple()?.clone();
    loop {
        let next = cur.entries().iter().find_map(|e| e.as_seq().map(|(_, y, c)| (y, c.clone())));
        match next {
            Some((y, Constant::Tuple(t))) => {
                word.push(y);
                cur = t;
            }
            Some((_, Constant::Rec(_))) => return None,
            None => return Some((state, word)),
        }
    }
}

/// Prints terms; standard processes are abbreviated as `p [X Y]`.
pub struct Printer<'a> {
    sys: &'a PdaSystem,
    pruner: Option<Pruner<'a>>,
}

impl<'a> Printer<'a> {
    /// Exact printing: `parse_term(print(t)) == t`.
    pub fn new(sys: &'a PdaSystem) -> Self {
        Printer { sys, pruner: None }
    }

    /// Also abbreviates terms that equal a standard process after pruning
    /// dead continuation entries. Parsing such output gives the unpruned
    /// standard process, which prunes back to the printed term.
    pub fn modulo_pruning(sys: &'a PdaSystem) -> Self {
        Printer {
            sys,
            pruner: Some(Pruner::new(sys)),
        }
    }

    pub fn term(&mut self, p: &Process) -> String {
        let mut s = String::new();
        self.write_term(&mut s, p);
        s
    }

    pub fn constant(&mut self, c: &Constant) -> String {
        let mut s = String::new();
        self.write_constant(&mut s, c);
        s
    }

    fn abbreviation(&mut self, p: &Process) -> Option<String> {
        let (state, word) = spine(p)?;
        let std = self.sys.expand_standard(state, &word);
        let same = std == *p
            || match &mut self.pruner {
                Some(pr) => pr.prune(&std) == *p,
                None => false,
            };
        if !same {
            return None;
        }
        let mut s = format!("{} [", self.sys.state_name(state));
        for (i, y) in word.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(self.sys.symbol_name(*y));
        }
        s.push(']');
        Some(s)
    }

    fn write_term(&mut self, out: &mut String, p: &Process) {
        match p.node() {
            Node::Nil => out.push('0'),
            Node::Sel(l) => {
                let _ = write!(out, "{l}");
            }
            Node::RecSel { index, name } => {
                let _ = write!(out, "{index} . {name}");
            }
            Node::Seq { state, symbol, cont } => {
                if let Some(abbr) = self.abbreviation(p) {
                    out.push_str(&abbr);
                    return;
                }
                let _ = write!(out, "{} {} ", self.sys.state_name(*state), self.sys.symbol_name(*symbol));
                self.write_constant(out, cont);
            }
        }
    }

    fn write_constant(&mut self, out: &mut String, c: &Constant) {
        match c {
            Constant::Rec(n) => out.push_str(n.as_str()),
            Constant::Tuple(t) => self.write_tuple(out, t),
        }
    }

    fn write_tuple(&mut self, out: &mut String, t: &Tuple) {
        out.push('(');
        for (i, e) in t.entries().iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            self.write_term(out, e);
        }
        out.push(')');
    }
}

/// Exact printing of a term.
pub fn print_term(sys: &PdaSystem, p: &Process) -> String {
    Printer::new(sys).term(p)
}

/// Serializes a system in the file format accepted by [`parse_system`].
pub fn print_system(sys: &PdaSystem) -> String {
    let mut out = String::new();
    let list = |out: &mut String, kw: &str, names: &[String]| {
        if !names.is_empty() {
            let _ = writeln!(out, "{kw} {}", names.join(" "));
        }
    };
    list(&mut out, "states", sys.state_names());
    list(&mut out, "symbols", sys.symbol_names());
    list(&mut out, "actions", sys.action_names());
    if !sys.declared_flavor().is_empty() {
        let tags: Vec<&str> = sys.declared_flavor().iter().map(|t| t.keyword()).collect();
        let _ = writeln!(out, "flavor {}", tags.join(" "));
    }
    for r in sys.rules() {
        let _ = write!(
            out,
            "rule {} {} {} -> {}",
            sys.state_name(r.head_state),
            sys.symbol_name(r.head_symbol),
            match r.label {
                Label::Silent => "eps",
                Label::Visible(a) => sys.action_name(a),
            },
            sys.state_name(r.target_state)
        );
        for y in &r.target_word {
            let _ = write!(out, " {}", sys.symbol_name(*y));
        }
        out.push('\n');
    }
    let mut printer = Printer::new(sys);
    for def in sys.recs().iter() {
        let body = Tuple::new(def.body.clone());
        let _ = writeln!(
            out,
            "rec {}[{}] = {} {}",
            def.name,
            def.arity(),
            printer.constant(&Constant::Tuple(body)),
            def.name
        );
    }
    out
}
