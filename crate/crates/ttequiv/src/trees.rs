//! Ranked alphabets, trees, Dewey paths and the term syntax.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;

use crate::error::{Error, Result};

/// Shared symbol name.
pub type Sym = Arc<str>;

pub fn sym(s: &str) -> Sym {
    Arc::from(s)
}

/// A finite set of symbols, each with a rank. Iteration follows insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RankedAlphabet {
    symbols: IndexMap<Sym, usize>,
}

impl RankedAlphabet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an alphabet from `(name, rank)` pairs; later duplicates must agree.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, usize)>) -> Result<Self> {
        let mut a = Self::new();
        for (n, r) in pairs {
            a.insert(n, r)?;
        }
        Ok(a)
    }

    pub fn insert(&mut self, name: &str, rank: usize) -> Result<()> {
        match self.symbols.get(name) {
            Some(&r) if r != rank => Err(Error::AlphabetMismatch(format!(
                "symbol `{name}` declared with ranks {r} and {rank}"
            ))),
            Some(_) => Ok(()),
            None => {
                self.symbols.insert(sym(name), rank);
                Ok(())
            }
        }
    }

    pub fn rank(&self, name: &str) -> Option<usize> {
        self.symbols.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.symbols.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sym, usize)> + '_ {
        self.symbols.iter().map(|(s, &r)| (s, r))
    }

    pub fn symbols_of_rank(&self, k: usize) -> impl Iterator<Item = &Sym> + '_ {
        self.symbols
            .iter()
            .filter(move |(_, &r)| r == k)
            .map(|(s, _)| s)
    }

    pub fn max_rank(&self) -> usize {
        self.symbols.values().copied().max().unwrap_or(0)
    }

    /// Position of a symbol in insertion order; used for deterministic tie-breaks.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.symbols.get_index_of(name)
    }

    /// True when every symbol has rank 0 or 1.
    pub fn is_monadic(&self) -> bool {
        self.symbols.values().all(|&r| r <= 1)
    }

    /// Same symbols with the same ranks, ignoring order.
    pub fn same_as(&self, other: &Self) -> bool {
        self.len() == other.len() && self.iter().all(|(s, r)| other.rank(s) == Some(r))
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        let mut a = self.clone();
        for (s, r) in other.iter() {
            a.insert(s, r)?;
        }
        Ok(a)
    }
}

impl fmt::Display for RankedAlphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(s, r)| format!("{s}:{r}")).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// A finite ordered tree. Values are immutable in practice; every operation returns a new tree.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tree {
    pub label: Sym,
    pub children: Vec<Tree>,
}

impl Tree {
    pub fn new(label: &str, children: Vec<Tree>) -> Self {
        Tree {
            label: sym(label),
            children,
        }
    }

    pub fn with_sym(label: Sym, children: Vec<Tree>) -> Self {
        Tree { label, children }
    }

    pub fn leaf(label: &str) -> Self {
        Self::new(label, Vec::new())
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Tree::size).sum::<usize>()
    }

    pub fn height(&self) -> usize {
        1 + self.children.iter().map(Tree::height).max().unwrap_or(0)
    }

    pub fn subtree_at(&self, path: &Path) -> Option<&Tree> {
        let mut t = self;
        for &i in &path.0 {
            t = t.children.get(i.checked_sub(1)?)?;
        }
        Some(t)
    }

    /// All node addresses in pre-order.
    pub fn paths(&self) -> Vec<Path> {
        fn go(t: &Tree, cur: &mut Vec<usize>, out: &mut Vec<Path>) {
            out.push(Path(cur.clone()));
            for (i, c) in t.children.iter().enumerate() {
                cur.push(i + 1);
                go(c, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Checks the rank invariant against an alphabet.
    pub fn check(&self, alphabet: &RankedAlphabet) -> Result<()> {
        match alphabet.rank(&self.label) {
            None => Err(Error::UnknownSymbol {
                name: self.label.to_string(),
                pos: 0,
            }),
            Some(r) if r != self.children.len() => Err(Error::Arity {
                name: self.label.to_string(),
                expected: r,
                found: self.children.len(),
                pos: 0,
            }),
            Some(_) => self.children.iter().try_for_each(|c| c.check(alphabet)),
        }
    }

    /// Counts nodes whose label satisfies `pred`.
    pub fn count(&self, pred: &impl Fn(&str) -> bool) -> usize {
        usize::from(pred(&self.label)) + self.children.iter().map(|c| c.count(pred)).sum::<usize>()
    }

    /// Left-to-right sequence of leaf labels.
    pub fn leaves(&self) -> Vec<Sym> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<Sym>) {
        if self.children.is_empty() {
            out.push(self.label.clone());
        }
        for c in &self.children {
            c.collect_leaves(out);
        }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)?;
        if !self.children.is_empty() {
            write!(f, "(")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A Dewey address: 1-based child indices from the root. The empty path is the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(pub Vec<usize>);

impl Path {
    pub fn root() -> Self {
        Path(Vec::new())
    }

    pub fn child(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        Path(v)
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses `1.2.1`; the root is written `e`, `eps`, `ε` or the empty string.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.is_empty() || t == "e" || t == "eps" || t == "ε" {
            return Ok(Path::root());
        }
        t.split('.')
            .map(|p| match p.trim().parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i),
                _ => Err(Error::InvalidPath(text.to_string())),
            })
            .collect::<Result<Vec<_>>>()
            .map(Path)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

/// Cursor over term text. Names are `[A-Za-z0-9_']` runs in which `<...>` segments
/// (possibly containing commas) are taken verbatim.
pub(crate) struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0 }
    }

    pub(crate) fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub(crate) fn skip_ws(&mut self) {
        while let Some(c) = self.rest().chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    pub(crate) fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    pub(crate) fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    pub(crate) fn err(&self, msg: impl Into<String>) -> Error {
        Error::Syntax {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    pub(crate) fn name(&mut self) -> Result<(String, usize)> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        while i < bytes.len() {
            let c = bytes[i] as char;
            if c == '<' {
                let mut depth = 0usize;
                while i < bytes.len() {
                    match bytes[i] {
                        b'<' => depth += 1,
                        b'>' => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        b'(' | b')' => return Err(self.err("parenthesis inside `<...>` name")),
                        _ => {}
                    }
                    i += 1;
                }
                if i >= bytes.len() {
                    self.pos = i;
                    return Err(self.err("unterminated `<`"));
                }
                i += 1;
            } else if is_name_char(c) {
                i += 1;
            } else {
                break;
            }
        }
        if i == start {
            return Err(self.err("expected a name"));
        }
        self.pos = i;
        let raw = &self.src[start..i];
        // Whitespace inside angle brackets is insignificant.
        let name: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
        Ok((name, start))
    }

    pub(crate) fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }
}

/// A tree as parsed, with the source position of every node.
pub(crate) struct Positioned {
    pub(crate) label: String,
    pub(crate) pos: usize,
    pub(crate) children: Vec<Positioned>,
}

impl Positioned {
    pub(crate) fn into_tree(self) -> Tree {
        Tree::new(
            &self.label,
            self.children
                .into_iter()
                .map(Positioned::into_tree)
                .collect(),
        )
    }
}

pub(crate) fn parse_positioned(lx: &mut Lexer<'_>) -> Result<Positioned> {
    let (label, pos) = lx.name()?;
    let mut children = Vec::new();
    if lx.eat('(') && !lx.eat(')') {
        loop {
            children.push(parse_positioned(lx)?);
            if lx.eat(',') {
                continue;
            }
            lx.expect(')')?;
            break;
        }
    }
    Ok(Positioned {
        label,
        pos,
        children,
    })
}

fn check_positioned(t: &Positioned, alphabet: &RankedAlphabet) -> Result<()> {
    match alphabet.rank(&t.label) {
        None => Err(Error::UnknownSymbol {
            name: t.label.clone(),
            pos: t.pos,
        }),
        Some(r) if r != t.children.len() => Err(Error::Arity {
            name: t.label.clone(),
            expected: r,
            found: t.children.len(),
            pos: t.pos,
        }),
        Some(_) => t
            .children
            .iter()
            .try_for_each(|c| check_positioned(c, alphabet)),
    }
}

/// Parses a term without rank checking.
pub fn parse_term(text: &str) -> Result<Tree> {
    let mut lx = Lexer::new(text);
    let t = parse_positioned(&mut lx)?;
    if !lx.at_end() {
        return Err(lx.err("trailing input"));
    }
    Ok(t.into_tree())
}

/// Parses a term and checks it against `alphabet`. `a` is accepted for `a()`.
pub fn parse_tree(text: &str, alphabet: &RankedAlphabet) -> Result<Tree> {
    let mut lx = Lexer::new(text);
    let t = parse_positioned(&mut lx)?;
    if !lx.at_end() {
        return Err(lx.err("trailing input"));
    }
    check_positioned(&t, alphabet)?;
    Ok(t.into_tree())
}

/// Replaces every leaf labelled by a bound symbol with its binding, simultaneously:
/// replacement trees are not themselves rewritten.
pub fn substitute_leaves(t: &Tree, bindings: &HashMap<Sym, Tree>) -> Result<Tree> {
    fn go(t: &Tree, b: &HashMap<Sym, Tree>) -> Result<Tree> {
        if let Some(rep) = b.get(&t.label) {
            if !t.children.is_empty() {
                return Err(Error::Substitution(format!(
                    "bound symbol `{}` occurs with rank {}",
                    t.label,
                    t.children.len()
                )));
            }
            return Ok(rep.clone());
        }
        Ok(Tree::with_sym(
            t.label.clone(),
            t.children.iter().map(|c| go(c, b)).collect::<Result<_>>()?,
        ))
    }
    go(t, bindings)
}

/// Returns `t` with the subtree at `u` replaced by `t2`.
pub fn replace_at(t: &Tree, u: &Path, t2: &Tree) -> Result<Tree> {
    fn go(t: &Tree, steps: &[usize], t2: &Tree, u: &Path) -> Result<Tree> {
        match steps.split_first() {
            None => Ok(t2.clone()),
            Some((&i, rest)) => {
                if i == 0 || i > t.children.len() {
                    return Err(Error::InvalidPath(u.to_string()));
                }
                let mut children = t.children.clone();
                children[i - 1] = go(&t.children[i - 1], rest, t2, u)?;
                Ok(Tree::with_sym(t.label.clone(), children))
            }
        }
    }
    go(t, &u.0, t2, u)
}

/// `(size, height)` with `height(leaf) = 1`.
pub fn metrics(t: &Tree) -> (usize, usize) {
    (t.size(), t.height())
}
