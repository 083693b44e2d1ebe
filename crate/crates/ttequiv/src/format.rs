//! The line-oriented text format shared by transducers, automata and grammars.
//!
//! ```text
//! kind: dtop
//! input: a:1 e:0
//! output: d:2 e:0
//! states: q0
//! initial: q0
//! rule q0(a(x1)) -> d(q0(x1), q0(x1))
//! rule q0(e) -> e
//! ```
//!
//! Kinds are `dtop`, `mtt`, `butt`, `dbta`, `dfa`, `cfg` and `ydt`. Blank lines and lines
//! starting with `#` are ignored. States of an `mtt` carry ranks (`q:2`); a bare name has
//! rank 1. Look-ahead is declared with `la-states:` and `la-rule` lines in the `dbta` rule
//! syntax, and a transducer rule names its look-ahead tuple after the right-hand side, as
//! in `rule q(d(x1,x2)) -> e <p0 p1>`.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::automata::{Dbta, Dfa};
use crate::error::{Error, Result};
use crate::mtt::{var_index, Butt, ButtRule, Mtt, Rhs, Rule};
use crate::parikh::{Cfg, GSym, Item, YdtFc, YdtRule};
use crate::trees::{parse_positioned, sym, Lexer, Positioned, RankedAlphabet, Sym, Tree};

/// A parsed file.
#[derive(Debug, Clone, PartialEq)]
pub enum Document {
    Mtt(Mtt),
    Butt(Butt),
    Dbta(Dbta),
    Dfa(Dfa),
    Cfg(Cfg),
    Ydt(YdtFc),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Mtt(m) if m.is_dtop() => "dtop",
            Document::Mtt(_) => "mtt",
            Document::Butt(_) => "butt",
            Document::Dbta(_) => "dbta",
            Document::Dfa(_) => "dfa",
            Document::Cfg(_) => "cfg",
            Document::Ydt(_) => "ydt",
        }
    }
}

struct Line<'a> {
    no: usize,
    body: &'a str,
}

fn line_err(no: usize, e: Error) -> Error {
    match e {
        Error::Syntax { pos, msg } => Error::Syntax {
            pos,
            msg: format!("line {no}: {msg}"),
        },
        Error::UnknownSymbol { name, pos } => Error::Syntax {
            pos,
            msg: format!("line {no}: unknown symbol `{name}`"),
        },
        Error::Arity {
            name,
            expected,
            found,
            pos,
        } => Error::Syntax {
            pos,
            msg: format!("line {no}: `{name}` has rank {expected} but {found} children were given"),
        },
        other => other,
    }
}

fn syntax(no: usize, msg: impl Into<String>) -> Error {
    Error::Syntax {
        pos: 0,
        msg: format!("line {no}: {}", msg.into()),
    }
}

struct Sections<'a> {
    headers: HashMap<&'a str, (usize, &'a str)>,
    rules: Vec<Line<'a>>,
    la_rules: Vec<Line<'a>>,
}

impl<'a> Sections<'a> {
    fn split(text: &'a str) -> Result<Self> {
        let mut headers = HashMap::new();
        let mut rules = Vec::new();
        let mut la_rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(body) = line.strip_prefix("la-rule ") {
                la_rules.push(Line { no, body });
            } else if let Some(body) = line.strip_prefix("rule ") {
                rules.push(Line { no, body });
            } else if let Some((k, v)) = line.split_once(':') {
                let k = k.trim();
                if headers.insert(k, (no, v.trim())).is_some() {
                    return Err(syntax(no, format!("duplicate header `{k}`")));
                }
            } else {
                return Err(syntax(no, "expected `key: value` or a `rule` line"));
            }
        }
        Ok(Sections {
            headers,
            rules,
            la_rules,
        })
    }

    fn get(&self, key: &str) -> Option<(usize, &'a str)> {
        self.headers.get(key).copied()
    }

    fn require(&self, key: &str) -> Result<(usize, &'a str)> {
        self.get(key).ok_or_else(|| Error::Syntax {
            pos: 0,
            msg: format!("missing `{key}:` header"),
        })
    }

    fn words(&self, key: &str) -> Result<Vec<&'a str>> {
        Ok(self.require(key)?.1.split_whitespace().collect())
    }
}

fn parse_alphabet(no: usize, body: &str, default_rank: Option<usize>) -> Result<RankedAlphabet> {
    let mut a = RankedAlphabet::new();
    for w in body.split_whitespace() {
        let (name, rank) = match w.rsplit_once(':') {
            Some((n, r)) => (
                n,
                r.parse::<usize>()
                    .map_err(|_| syntax(no, format!("bad rank in `{w}`")))?,
            ),
            None => (
                w,
                default_rank.ok_or_else(|| syntax(no, format!("`{w}` needs a rank (`name:k`)")))?,
            ),
        };
        a.insert(name, rank).map_err(|e| line_err(no, e))?;
    }
    Ok(a)
}

fn parse_one_term(no: usize, text: &str) -> Result<Tree> {
    let mut lx = Lexer::new(text);
    let t = parse_positioned(&mut lx).map_err(|e| line_err(no, e))?;
    if !lx.at_end() {
        return Err(line_err(no, lx.err("trailing input")));
    }
    Ok(t.into_tree())
}

/// Splits `rhs [<tuple>]` into the rhs term and the tuple names.
fn split_tuple(no: usize, text: &str) -> Result<(Positioned, Vec<String>)> {
    let mut lx = Lexer::new(text);
    let t = parse_positioned(&mut lx).map_err(|e| line_err(no, e))?;
    let tuple = read_tuple(no, &mut lx)?;
    Ok((t, tuple))
}

fn read_tuple(no: usize, lx: &mut Lexer<'_>) -> Result<Vec<String>> {
    if lx.at_end() {
        return Ok(Vec::new());
    }
    let rest = lx.rest().trim();
    let inner = rest
        .strip_prefix('<')
        .and_then(|r| r.strip_suffix('>'))
        .ok_or_else(|| syntax(no, format!("unexpected `{rest}` after the right-hand side")))?;
    Ok(inner
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect())
}

fn split_arrow(no: usize, body: &str) -> Result<(&str, &str)> {
    body.split_once("->")
        .map(|(l, r)| (l.trim(), r.trim()))
        .ok_or_else(|| syntax(no, "expected `->`"))
}

fn state_idx(no: usize, states: &[String], name: &str) -> Result<usize> {
    states
        .iter()
        .position(|s| s == name)
        .ok_or_else(|| syntax(no, format!("undeclared state `{name}`")))
}

fn parse_dbta_rules(lines: &[Line<'_>], a: &mut Dbta) -> Result<()> {
    for l in lines {
        let (lhs, rhs) = split_arrow(l.no, l.body)?;
        let t = parse_one_term(l.no, lhs)?;
        let mut cs = Vec::new();
        for c in &t.children {
            if !c.children.is_empty() {
                return Err(syntax(l.no, "automaton rule children must be states"));
            }
            cs.push(state_idx(l.no, &a.states, &c.label)?);
        }
        let target = state_idx(l.no, &a.states, rhs)?;
        a.add_transition(&t.label, cs, target)
            .map_err(|e| line_err(l.no, e))?;
    }
    Ok(())
}

fn parse_lookahead(sec: &Sections<'_>, input: &RankedAlphabet) -> Result<Option<Dbta>> {
    let Some((_, body)) = sec.get("la-states") else {
        if let Some(l) = sec.la_rules.first() {
            return Err(syntax(l.no, "`la-rule` without `la-states:`"));
        }
        return Ok(None);
    };
    let mut a = Dbta::new(input.clone());
    for w in body.split_whitespace() {
        a.add_state(w);
    }
    parse_dbta_rules(&sec.la_rules, &mut a)?;
    Ok(Some(a))
}

fn parse_la_tuple(no: usize, names: &[String], la: &Option<Dbta>) -> Result<Vec<usize>> {
    match la {
        None if names.is_empty() => Ok(Vec::new()),
        None => Err(syntax(no, "look-ahead tuple without `la-states:`")),
        Some(a) => names.iter().map(|n| state_idx(no, &a.states, n)).collect(),
    }
}

fn parse_mtt(sec: &Sections<'_>, dtop: bool) -> Result<Mtt> {
    let (ino, ibody) = sec.require("input")?;
    let input = parse_alphabet(ino, ibody, None)?;
    let (ono, obody) = sec.require("output")?;
    let output = parse_alphabet(ono, obody, None)?;
    let (sno, sbody) = sec.require("states")?;
    let states = parse_alphabet(sno, sbody, Some(1))?;
    if dtop {
        if let Some((q, r)) = states.iter().find(|(_, r)| *r != 1) {
            return Err(syntax(sno, format!("dtop state `{q}` has rank {r}")));
        }
    }
    let initial = sec.require("initial")?.1;
    let lookahead = parse_lookahead(sec, &input)?;
    let mut rules = Vec::new();
    for l in &sec.rules {
        let (lhs, rhs_text) = split_arrow(l.no, l.body)?;
        let lhs = parse_one_term(l.no, lhs)?;
        let (rhs, tuple) = split_tuple(l.no, rhs_text)?;
        let q = &lhs.label;
        let Some(qr) = states.rank(q) else {
            return Err(syntax(l.no, format!("undeclared state `{q}`")));
        };
        if lhs.children.len() != qr {
            return Err(syntax(l.no, format!("state `{q}` has rank {qr}")));
        }
        let s = &lhs.children[0];
        for (i, c) in s.children.iter().enumerate() {
            if !c.children.is_empty() || var_index(&c.label, 'x') != Some(i + 1) {
                return Err(syntax(
                    l.no,
                    format!("expected x{} in the left-hand side", i + 1),
                ));
            }
        }
        for (j, c) in lhs.children.iter().enumerate().skip(1) {
            if !c.children.is_empty() || var_index(&c.label, 'y') != Some(j) {
                return Err(syntax(l.no, format!("expected y{j} in the left-hand side")));
            }
        }
        rules.push(Rule {
            state: q.clone(),
            symbol: s.label.clone(),
            lookahead: parse_la_tuple(l.no, &tuple, &lookahead)?,
            rhs: Rhs::from_tree(&rhs.into_tree(), &states),
        });
    }
    Ok(Mtt::new(states, input, output, initial, lookahead, rules))
}

fn parse_butt(sec: &Sections<'_>) -> Result<Butt> {
    let (ino, ibody) = sec.require("input")?;
    let input = parse_alphabet(ino, ibody, None)?;
    let (ono, obody) = sec.require("output")?;
    let output = parse_alphabet(ono, obody, None)?;
    let states: Vec<String> = sec.words("states")?.into_iter().map(String::from).collect();
    let finals = sec
        .words("finals")?
        .into_iter()
        .map(|f| state_idx(sec.require("finals")?.0, &states, f))
        .collect::<Result<BTreeSet<_>>>()?;
    let mut rules = Vec::new();
    for l in &sec.rules {
        let (lhs, rhs) = split_arrow(l.no, l.body)?;
        let lhs = parse_one_term(l.no, lhs)?;
        let rhs = parse_one_term(l.no, rhs)?;
        let mut children = Vec::new();
        for (i, c) in lhs.children.iter().enumerate() {
            let ok = c.children.len() == 1
                && c.children[0].children.is_empty()
                && var_index(&c.children[0].label, 'x') == Some(i + 1);
            if !ok {
                return Err(syntax(
                    l.no,
                    format!("expected q(x{}) in the left-hand side", i + 1),
                ));
            }
            children.push(state_idx(l.no, &states, &c.label)?);
        }
        if rhs.children.len() != 1 {
            return Err(syntax(l.no, "right-hand side must be q(t)"));
        }
        let target = state_idx(l.no, &states, &rhs.label)?;
        rules.push(ButtRule {
            symbol: lhs.label.clone(),
            children,
            target,
            output: Rhs::from_tree(&rhs.children[0], &RankedAlphabet::new()),
        });
    }
    Ok(Butt {
        states,
        finals,
        input,
        output,
        rules,
    })
}

fn parse_dbta(sec: &Sections<'_>) -> Result<Dbta> {
    let (ano, abody) = sec.require("alphabet")?;
    let mut a = Dbta::new(parse_alphabet(ano, abody, None)?);
    for w in sec.words("states")? {
        a.add_state(w);
    }
    if let Some((no, body)) = sec.get("finals") {
        for f in body.split_whitespace() {
            let i = state_idx(no, &a.states, f)?;
            a.finals.insert(i);
        }
    }
    parse_dbta_rules(&sec.rules, &mut a)?;
    Ok(a)
}

fn parse_dfa(sec: &Sections<'_>) -> Result<Dfa> {
    let letters: Vec<Sym> = sec.words("letters")?.into_iter().map(sym).collect();
    let states: Vec<String> = sec.words("states")?.into_iter().map(String::from).collect();
    let (ino, init) = sec.require("initial")?;
    let initial = state_idx(ino, &states, init)?;
    let mut finals = BTreeSet::new();
    if let Some((no, body)) = sec.get("finals") {
        for f in body.split_whitespace() {
            finals.insert(state_idx(no, &states, f)?);
        }
    }
    let mut delta = vec![vec![None; letters.len()]; states.len()];
    for l in &sec.rules {
        let (lhs, rhs) = split_arrow(l.no, l.body)?;
        let parts: Vec<&str> = lhs.split_whitespace().collect();
        let [from, letter] = parts[..] else {
            return Err(syntax(l.no, "expected `rule STATE LETTER -> STATE`"));
        };
        let from = state_idx(l.no, &states, from)?;
        let c = letters
            .iter()
            .position(|x| &**x == letter)
            .ok_or_else(|| syntax(l.no, format!("undeclared letter `{letter}`")))?;
        let to = state_idx(l.no, &states, rhs)?;
        if delta[from][c].replace(to).is_some_and(|old| old != to) {
            return Err(syntax(l.no, "conflicting transition"));
        }
    }
    Ok(Dfa {
        letters,
        states,
        initial,
        delta,
        finals,
    })
}

fn parse_cfg(sec: &Sections<'_>) -> Result<Cfg> {
    let terminals: Vec<String> = sec
        .words("terminals")?
        .into_iter()
        .map(String::from)
        .collect();
    let nonterminals: Vec<String> = sec
        .words("nonterminals")?
        .into_iter()
        .map(String::from)
        .collect();
    let (sno, start) = sec.require("start")?;
    let start = state_idx(sno, &nonterminals, start)?;
    let mut productions = Vec::new();
    for l in &sec.rules {
        let (lhs, rhs) = split_arrow(l.no, l.body)?;
        let n = state_idx(l.no, &nonterminals, lhs)?;
        let mut body = Vec::new();
        for w in rhs.split_whitespace() {
            if w == "ε" || w == "eps" {
                continue;
            }
            if let Some(i) = nonterminals.iter().position(|x| x == w) {
                body.push(GSym::N(i));
            } else if let Some(i) = terminals.iter().position(|x| x == w) {
                body.push(GSym::T(i));
            } else {
                return Err(syntax(l.no, format!("undeclared grammar symbol `{w}`")));
            }
        }
        productions.push((n, body));
    }
    Ok(Cfg {
        terminals,
        nonterminals,
        start,
        productions,
    })
}

fn parse_ydt(sec: &Sections<'_>) -> Result<YdtFc> {
    let (ino, ibody) = sec.require("input")?;
    let input = parse_alphabet(ino, ibody, None)?;
    let letters: Vec<String> = sec.words("output")?.into_iter().map(String::from).collect();
    let states: Vec<String> = sec.words("states")?.into_iter().map(String::from).collect();
    let (ino2, init) = sec.require("initial")?;
    let initial = state_idx(ino2, &states, init)?;
    let lookahead = parse_lookahead(sec, &input)?;
    let mut rules = Vec::new();
    for l in &sec.rules {
        let (lhs, rhs) = split_arrow(l.no, l.body)?;
        let lhs = parse_one_term(l.no, lhs)?;
        let state = state_idx(l.no, &states, &lhs.label)?;
        let [s] = &lhs.children[..] else {
            return Err(syntax(l.no, "left-hand side must be q(σ(x1..xk))"));
        };
        let k = input
            .rank(&s.label)
            .ok_or_else(|| syntax(l.no, format!("unknown input symbol `{}`", s.label)))?;
        if s.children.len() != k {
            return Err(syntax(l.no, format!("`{}` has rank {k}", s.label)));
        }
        let mut lx = Lexer::new(rhs);
        let mut items = Vec::new();
        while let Some(c) = lx.peek() {
            if c == '<' {
                break;
            }
            if lx.eat('ε') {
                continue;
            }
            let t = parse_positioned(&mut lx).map_err(|e| line_err(l.no, e))?;
            if let Some(q) = states.iter().position(|x| *x == t.label) {
                let i = match &t.children[..] {
                    [x] if x.children.is_empty() => var_index(&x.label, 'x'),
                    _ => None,
                };
                match i {
                    Some(i) if (1..=k).contains(&i) => items.push(Item::Call(q, i)),
                    _ => return Err(syntax(l.no, format!("bad call of `{}`", t.label))),
                }
            } else if let Some(a) = letters.iter().position(|x| *x == t.label) {
                if !t.children.is_empty() {
                    return Err(syntax(
                        l.no,
                        format!("letter `{}` takes no arguments", t.label),
                    ));
                }
                items.push(Item::Letter(a));
            } else if t.label == "ε" || t.label == "eps" {
            } else {
                return Err(syntax(
                    l.no,
                    format!("unknown letter or state `{}`", t.label),
                ));
            }
        }
        let tuple = read_tuple(l.no, &mut lx)?;
        rules.push(YdtRule {
            state,
            symbol: s.label.clone(),
            lookahead: parse_la_tuple(l.no, &tuple, &lookahead)?,
            rhs: items,
        });
    }
    let mut keys = BTreeSet::new();
    let nondeterministic = !rules
        .iter()
        .all(|r| keys.insert((r.state, r.symbol.clone(), r.lookahead.clone())));
    Ok(YdtFc {
        states,
        input,
        letters,
        initial,
        lookahead,
        rules,
        nondeterministic,
        bound: None,
    })
}

/// Parses a file in any supported kind.
pub fn parse_document(text: &str) -> Result<Document> {
    let sec = Sections::split(text)?;
    let (kno, kind) = sec.require("kind")?;
    match kind {
        "dtop" => Ok(Document::Mtt(parse_mtt(&sec, true)?)),
        "mtt" => Ok(Document::Mtt(parse_mtt(&sec, false)?)),
        "butt" => Ok(Document::Butt(parse_butt(&sec)?)),
        "dbta" => Ok(Document::Dbta(parse_dbta(&sec)?)),
        "dfa" => Ok(Document::Dfa(parse_dfa(&sec)?)),
        "cfg" => Ok(Document::Cfg(parse_cfg(&sec)?)),
        "ydt" => Ok(Document::Ydt(parse_ydt(&sec)?)),
        other => Err(syntax(kno, format!("unknown kind `{other}`"))),
    }
}

macro_rules! expect_kind {
    ($name:ident, $variant:ident, $ty:ty, $what:literal) => {
        #[doc = concat!("Parses a file that must hold a ", $what, ".")]
        pub fn $name(text: &str) -> Result<$ty> {
            match parse_document(text)? {
                Document::$variant(x) => Ok(x),
                other => Err(Error::Invalid(format!(
                    concat!("expected a ", $what, ", found kind `{}`"),
                    other.kind()
                ))),
            }
        }
    };
}

expect_kind!(parse_mtt_text, Mtt, Mtt, "transducer (dtop or mtt)");
expect_kind!(parse_butt_text, Butt, Butt, "bottom-up transducer");
expect_kind!(parse_dbta_text, Dbta, Dbta, "tree automaton");
expect_kind!(parse_dfa_text, Dfa, Dfa, "string automaton");
expect_kind!(parse_cfg_text, Cfg, Cfg, "grammar");
expect_kind!(parse_ydt_text, Ydt, YdtFc, "tree-to-string transducer");

/// Names that survive a round trip through the lexer; others are replaced by `s<i>`.
fn printable_names(names: &[String], prefix: &str) -> Vec<String> {
    let ok = |n: &str| {
        !n.is_empty()
            && !n.starts_with('<')
            && n.chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
    };
    let distinct = names.iter().collect::<BTreeSet<_>>().len() == names.len();
    if distinct && names.iter().all(|n| ok(n)) {
        names.to_vec()
    } else {
        (0..names.len()).map(|i| format!("{prefix}{i}")).collect()
    }
}

fn dbta_rules(a: &Dbta, names: &[String], prefix: &str, out: &mut String) {
    let mut ts: Vec<_> = a.transitions.iter().collect();
    ts.sort_by_key(|((s, cs), _)| (a.alphabet.index_of(s), (*cs).clone()));
    for ((s, cs), t) in ts {
        let lhs = if cs.is_empty() {
            s.to_string()
        } else {
            let c: Vec<&str> = cs.iter().map(|&c| names[c].as_str()).collect();
            format!("{s}({})", c.join(","))
        };
        let _ = writeln!(out, "{prefix}{lhs} -> {}", names[*t]);
    }
}

fn lookahead_lines(la: &Option<Dbta>, out: &mut String) -> Vec<String> {
    match la {
        None => Vec::new(),
        Some(a) => {
            let names = printable_names(&a.states, "p");
            let _ = writeln!(out, "la-states: {}", names.join(" "));
            dbta_rules(a, &names, "la-rule ", out);
            names
        }
    }
}

fn tuple_suffix(t: &[usize], names: &[String]) -> String {
    if t.is_empty() {
        String::new()
    } else {
        let n: Vec<&str> = t.iter().map(|&p| names[p].as_str()).collect();
        format!(" <{}>", n.join(" "))
    }
}

pub fn write_mtt(m: &Mtt) -> String {
    let mut out = String::new();
    let dtop = m.is_dtop();
    let _ = writeln!(out, "kind: {}", if dtop { "dtop" } else { "mtt" });
    let _ = writeln!(out, "input: {}", m.input);
    let _ = writeln!(out, "output: {}", m.output);
    let states: Vec<String> = m
        .states
        .iter()
        .map(|(q, r)| {
            if dtop {
                q.to_string()
            } else {
                format!("{q}:{r}")
            }
        })
        .collect();
    let _ = writeln!(out, "states: {}", states.join(" "));
    let _ = writeln!(out, "initial: {}", m.initial);
    let la = lookahead_lines(&m.lookahead, &mut out);
    for r in m.rules() {
        let k = m.input.rank(&r.symbol).unwrap_or(0);
        let xs: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
        let mut lhs = vec![if k == 0 {
            r.symbol.to_string()
        } else {
            format!("{}({})", r.symbol, xs.join(","))
        }];
        lhs.extend((1..=m.params(&r.state)).map(|j| format!("y{j}")));
        let _ = writeln!(
            out,
            "rule {}({}) -> {}{}",
            r.state,
            lhs.join(","),
            r.rhs,
            tuple_suffix(&r.lookahead, &la)
        );
    }
    out
}

pub fn write_butt(b: &Butt) -> String {
    let mut out = String::new();
    let names = printable_names(&b.states, "q");
    let _ = writeln!(out, "kind: butt");
    let _ = writeln!(out, "input: {}", b.input);
    let _ = writeln!(out, "output: {}", b.output);
    let _ = writeln!(out, "states: {}", names.join(" "));
    let f: Vec<&str> = b.finals.iter().map(|&i| names[i].as_str()).collect();
    let _ = writeln!(out, "finals: {}", f.join(" "));
    for r in &b.rules {
        let lhs = if r.children.is_empty() {
            r.symbol.to_string()
        } else {
            let cs: Vec<String> = r
                .children
                .iter()
                .enumerate()
                .map(|(i, &q)| format!("{}(x{})", names[q], i + 1))
                .collect();
            format!("{}({})", r.symbol, cs.join(","))
        };
        let _ = writeln!(out, "rule {lhs} -> {}({})", names[r.target], r.output);
    }
    out
}

pub fn write_dbta(a: &Dbta) -> String {
    let mut out = String::new();
    let names = printable_names(&a.states, "q");
    let _ = writeln!(out, "kind: dbta");
    let _ = writeln!(out, "alphabet: {}", a.alphabet);
    let _ = writeln!(out, "states: {}", names.join(" "));
    let f: Vec<&str> = a.finals.iter().map(|&i| names[i].as_str()).collect();
    let _ = writeln!(out, "finals: {}", f.join(" "));
    dbta_rules(a, &names, "rule ", &mut out);
    out
}

pub fn write_dfa(d: &Dfa) -> String {
    let mut out = String::new();
    let names = printable_names(&d.states, "r");
    let _ = writeln!(out, "kind: dfa");
    let letters: Vec<&str> = d.letters.iter().map(|l| &**l).collect();
    let _ = writeln!(out, "letters: {}", letters.join(" "));
    let _ = writeln!(out, "states: {}", names.join(" "));
    let _ = writeln!(out, "initial: {}", names[d.initial]);
    let f: Vec<&str> = d.finals.iter().map(|&i| names[i].as_str()).collect();
    let _ = writeln!(out, "finals: {}", f.join(" "));
    for (r, row) in d.delta.iter().enumerate() {
        for (c, t) in row.iter().enumerate() {
            if let Some(t) = t {
                let _ = writeln!(out, "rule {} {} -> {}", names[r], d.letters[c], names[*t]);
            }
        }
    }
    out
}

pub fn write_cfg(g: &Cfg) -> String {
    let mut out = String::new();
    let nts = printable_names(&g.nonterminals, "N");
    let _ = writeln!(out, "kind: cfg");
    let _ = writeln!(out, "terminals: {}", g.terminals.join(" "));
    let _ = writeln!(out, "nonterminals: {}", nts.join(" "));
    let _ = writeln!(out, "start: {}", nts[g.start]);
    for (n, body) in &g.productions {
        let b: Vec<&str> = body
            .iter()
            .map(|s| match s {
                GSym::T(t) => g.terminals[*t].as_str(),
                GSym::N(m) => nts[*m].as_str(),
            })
            .collect();
        let _ = writeln!(out, "rule {} -> {}", nts[*n], b.join(" "));
    }
    out.lines().map(|l| format!("{}\n", l.trim_end())).collect()
}

pub fn write_ydt(m: &YdtFc) -> String {
    let mut out = String::new();
    let names = printable_names(&m.states, "q");
    let _ = writeln!(out, "kind: ydt");
    let _ = writeln!(out, "input: {}", m.input);
    let _ = writeln!(out, "output: {}", m.letters.join(" "));
    let _ = writeln!(out, "states: {}", names.join(" "));
    let _ = writeln!(out, "initial: {}", names[m.initial]);
    let la = lookahead_lines(&m.lookahead, &mut out);
    for r in &m.rules {
        let k = m.input.rank(&r.symbol).unwrap_or(0);
        let xs: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
        let lhs = if k == 0 {
            r.symbol.to_string()
        } else {
            format!("{}({})", r.symbol, xs.join(","))
        };
        let rhs: Vec<String> = r
            .rhs
            .iter()
            .map(|it| match it {
                Item::Letter(a) => m.letters[*a].clone(),
                Item::Call(q, i) => format!("{}(x{i})", names[*q]),
            })
            .collect();
        let line = format!(
            "rule {}({lhs}) -> {}{}",
            names[r.state],
            rhs.join(" "),
            tuple_suffix(&r.lookahead, &la)
        );
        let _ = writeln!(out, "{}", line.trim_end());
    }
    out
}

pub fn write_document(d: &Document) -> String {
    match d {
        Document::Mtt(m) => write_mtt(m),
        Document::Butt(b) => write_butt(b),
        Document::Dbta(a) => write_dbta(a),
        Document::Dfa(a) => write_dfa(a),
        Document::Cfg(g) => write_cfg(g),
        Document::Ydt(y) => write_ydt(y),
    }
}

/// Convenience for tests and tools: parses an `mtt`/`dtop` file and panics on error.
#[doc(hidden)]
pub fn mtt_from_str(text: &str) -> Mtt {
    parse_mtt_text(text).unwrap_or_else(|e| panic!("{e}"))
}
