//! Finite-copying tree-to-string transducers, context-free grammars, semilinear sets and
//! the Parikh-image equivalence test.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::automata::{
    equiv_dbta, explore, intersect, Dbta, Exploration, LangEquiv, DEFAULT_STATE_LIMIT,
};
use crate::error::{Error, Result};
use crate::mtt::{Mtt, Rhs};
use crate::par::{self, Exec};
pub use crate::semilinear::{
    equal_count_feasible, parikh_image, parikh_image_with, Feasibility, LinearSet, SemilinearSet,
    Vector, DEFAULT_MAX_SETS,
};
use crate::trees::{RankedAlphabet, Sym, Tree};

/// Grammar symbol: terminal or nonterminal index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GSym {
    T(usize),
    N(usize),
}

/// Context-free grammar with indexed symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub terminals: Vec<String>,
    pub nonterminals: Vec<String>,
    pub start: usize,
    pub productions: Vec<(usize, Vec<GSym>)>,
}

/// Right-hand side item of a tree-to-string rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Item {
    /// Output letter index.
    Letter(usize),
    /// State call `q(x_i)` with 1-based child index.
    Call(usize, usize),
}

/// Rule `q(σ(x1..xk)) -> w <p1..pk>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct YdtRule {
    pub state: usize,
    pub symbol: Sym,
    /// Look-ahead states of the children; empty when there is no look-ahead.
    pub lookahead: Vec<usize>,
    pub rhs: Vec<Item>,
}

/// Top-down tree-to-string transducer with optional regular look-ahead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YdtFc {
    pub states: Vec<String>,
    pub input: RankedAlphabet,
    pub letters: Vec<String>,
    pub initial: usize,
    pub lookahead: Option<Dbta>,
    pub rules: Vec<YdtRule>,
    /// Several rules per key are allowed (internal constructions only).
    pub nondeterministic: bool,
    /// Finite-copying bound, once verified.
    pub bound: Option<usize>,
}

impl YdtFc {
    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn letter_index(&self, name: &str) -> Option<usize> {
        self.letters.iter().position(|s| s == name)
    }

    /// Rules grouped by `(state, symbol, look-ahead)`.
    pub fn rule_index(&self) -> HashMap<(usize, Sym, Vec<usize>), Vec<usize>> {
        let mut m: HashMap<_, Vec<usize>> = HashMap::new();
        for (i, r) in self.rules.iter().enumerate() {
            m.entry((r.state, r.symbol.clone(), r.lookahead.clone()))
                .or_default()
                .push(i);
        }
        m
    }
}

/// Look-ahead run annotated on an input tree.
struct Ann {
    la: usize,
    children: Vec<Ann>,
}

/// Outcome of [`check_finite_copying`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcCheck {
    Bound(usize),
    ExceededCutoff,
}

/// Default cutoff for the finite-copying semi-decision.
pub const DEFAULT_CUTOFF: usize = 8;

impl YdtFc {
    fn annotate(&self, t: &Tree) -> Option<Ann> {
        let children = t
            .children
            .iter()
            .map(|c| self.annotate(c))
            .collect::<Option<Vec<_>>>()?;
        let la = match &self.lookahead {
            None => 0,
            Some(a) => a.step(&t.label, &children.iter().map(|c| c.la).collect::<Vec<_>>())?,
        };
        Some(Ann { la, children })
    }

    fn key_of(&self, ann: &Ann) -> Vec<usize> {
        if self.lookahead.is_some() {
            ann.children.iter().map(|c| c.la).collect()
        } else {
            Vec::new()
        }
    }

    /// Output letters of `τ(s)`, or `None` outside the domain.
    pub fn eval(&self, s: &Tree) -> Result<Option<Vec<usize>>> {
        if self.nondeterministic {
            return Err(Error::Nondeterministic(
                "evaluation needs a deterministic transducer".into(),
            ));
        }
        s.check(&self.input)?;
        let Some(ann) = self.annotate(s) else {
            return Ok(None);
        };
        let idx = self.rule_index();
        let mut out = Vec::new();
        Ok(self
            .run(&idx, self.initial, s, &ann, &mut out)
            .then_some(out))
    }

    fn run(
        &self,
        idx: &HashMap<(usize, Sym, Vec<usize>), Vec<usize>>,
        q: usize,
        t: &Tree,
        ann: &Ann,
        out: &mut Vec<usize>,
    ) -> bool {
        let Some(rs) = idx.get(&(q, t.label.clone(), self.key_of(ann))) else {
            return false;
        };
        for it in &self.rules[rs[0]].rhs {
            match *it {
                Item::Letter(a) => out.push(a),
                Item::Call(p, i) => {
                    if !self.run(idx, p, &t.children[i - 1], &ann.children[i - 1], out) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Letter names of an output word.
    pub fn word(&self, w: &[usize]) -> Vec<&str> {
        w.iter().map(|&a| self.letters[a].as_str()).collect()
    }

    fn la_exploration(&self) -> Result<Exploration<usize>> {
        explore(&self.input, DEFAULT_STATE_LIMIT, |s, cs: &[&usize]| {
            Ok(match &self.lookahead {
                None => Some(0),
                Some(a) => a.step(s, &cs.iter().map(|&&c| c).collect::<Vec<_>>()),
            })
        })
    }

    /// Automaton accepting the domain.
    pub fn domain(&self) -> Result<Dbta> {
        let idx = self.rule_index();
        let n = self.states.len();
        let ex = explore(
            &self.input,
            DEFAULT_STATE_LIMIT,
            |s, cs: &[&(usize, Vec<bool>)]| {
                let la = match &self.lookahead {
                    None => 0,
                    Some(a) => match a.step(s, &cs.iter().map(|c| c.0).collect::<Vec<_>>()) {
                        Some(p) => p,
                        None => return Ok(None),
                    },
                };
                let key: Vec<usize> = if self.lookahead.is_some() {
                    cs.iter().map(|c| c.0).collect()
                } else {
                    Vec::new()
                };
                let defined = (0..n)
                    .map(|q| {
                        idx.get(&(q, s.clone(), key.clone())).is_some_and(|rs| {
                            rs.iter().any(|&r| {
                                self.rules[r].rhs.iter().all(|it| match *it {
                                    Item::Letter(_) => true,
                                    Item::Call(p, i) => cs[i - 1].1[p],
                                })
                            })
                        })
                    })
                    .collect();
                Ok(Some((la, defined)))
            },
        )?;
        let mut d = Dbta::new(self.input.clone());
        for (la, def) in &ex.states {
            let i = d.add_state(format!("d{}", d.states.len()));
            let _ = la;
            if def[self.initial] {
                d.finals.insert(i);
            }
        }
        d.transitions = ex.transitions;
        Ok(d)
    }

    /// Views a top-down transducer as a tree-to-string transducer producing the yield
    /// (leaf word) of its output.
    pub fn from_dtop_yield(m: &Mtt) -> Result<YdtFc> {
        if !m.is_dtop() {
            return Err(Error::NotDtop(
                m.states
                    .iter()
                    .find(|(_, k)| *k != 1)
                    .map(|(q, _)| q.to_string())
                    .unwrap_or_default(),
            ));
        }
        let states: Vec<String> = m.states.iter().map(|(q, _)| q.to_string()).collect();
        let letters: Vec<String> = m.output.symbols_of_rank(0).map(|s| s.to_string()).collect();
        fn flat(r: &Rhs, states: &[String], letters: &[String], out: &mut Vec<Item>) -> Result<()> {
            match r {
                Rhs::Out(s, cs) if cs.is_empty() => {
                    let a = letters
                        .iter()
                        .position(|l| **l == **s)
                        .ok_or_else(|| Error::Malformed(format!("`{s}` is not a leaf symbol")))?;
                    out.push(Item::Letter(a));
                }
                Rhs::Out(_, cs) => {
                    for c in cs {
                        flat(c, states, letters, out)?;
                    }
                }
                Rhs::Call(q, ps) => match ps.first() {
                    Some(Rhs::X(i)) => {
                        let q = states
                            .iter()
                            .position(|x| **x == **q)
                            .ok_or_else(|| Error::Malformed(format!("unknown state `{q}`")))?;
                        out.push(Item::Call(q, *i));
                    }
                    _ => return Err(Error::Malformed("call without input variable".into())),
                },
                Rhs::X(_) | Rhs::Y(_) => {
                    return Err(Error::Malformed("bare variable in right-hand side".into()))
                }
            }
            Ok(())
        }
        let mut rules = Vec::new();
        for r in m.rules() {
            let mut rhs = Vec::new();
            flat(&r.rhs, &states, &letters, &mut rhs)?;
            rules.push(YdtRule {
                state: states.iter().position(|x| **x == *r.state).unwrap_or(0),
                symbol: r.symbol.clone(),
                lookahead: r.lookahead.clone(),
                rhs,
            });
        }
        Ok(YdtFc {
            initial: states.iter().position(|x| **x == *m.initial).unwrap_or(0),
            states,
            input: m.input.clone(),
            letters,
            lookahead: m.lookahead.clone(),
            rules,
            nondeterministic: false,
            bound: None,
        })
    }

    /// Returns a copy carrying the finite-copying bound, or fails past `cutoff`.
    pub fn certify(&self, cutoff: usize) -> Result<YdtFc> {
        match check_finite_copying(self, cutoff)? {
            FcCheck::Bound(k) => Ok(YdtFc {
                bound: Some(k),
                ..self.clone()
            }),
            FcCheck::ExceededCutoff => Err(Error::NotFiniteCopying(format!(
                "state sequences longer than {cutoff}"
            ))),
        }
    }

    /// Splits the initial state so every output ends with the fresh letter `marker`.
    pub fn with_end_marker(&self, marker: &str) -> Result<YdtFc> {
        if self.letters.iter().any(|l| l == marker) {
            return Err(Error::Invalid(format!(
                "marker `{marker}` is already a letter"
            )));
        }
        let mut out = self.clone();
        out.letters.push(marker.to_string());
        let end = out.letters.len() - 1;
        let mut name = format!("{}$", self.states[self.initial]);
        while out.states.contains(&name) {
            name.push('\'');
        }
        out.states.push(name);
        let q = out.states.len() - 1;
        for r in &self.rules {
            if r.state == self.initial {
                let mut rhs = r.rhs.clone();
                rhs.push(Item::Letter(end));
                out.rules.push(YdtRule {
                    state: q,
                    rhs,
                    ..r.clone()
                });
            }
        }
        out.initial = q;
        Ok(out)
    }

    fn is_linear(&self) -> bool {
        self.rules.iter().all(|r| {
            let mut seen = HashSet::new();
            r.rhs.iter().all(|it| match it {
                Item::Call(_, i) => seen.insert(*i),
                Item::Letter(_) => true,
            })
        })
    }
}

fn cartesian(lists: &[&Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for l in lists {
        let mut next = Vec::with_capacity(out.len() * l.len());
        for pre in &out {
            for &x in l.iter() {
                let mut v = pre.clone();
                v.push(x);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Reachable state sequences and, on request, the rules of the linearized transducer.
struct Sequences {
    seqs: Vec<Vec<usize>>,
    rules: Vec<YdtRule>,
}

fn sequences(m: &YdtFc, cutoff: usize, build: bool) -> Result<Option<Sequences>> {
    let ex = m.la_exploration()?;
    let mut into: Vec<Vec<(Sym, Vec<usize>)>> = vec![Vec::new(); ex.states.len()];
    for ((s, cs), &t) in &ex.transitions {
        into[t].push((s.clone(), cs.clone()));
    }
    for l in &mut into {
        l.sort();
    }
    let idx = m.rule_index();
    let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut seqs = vec![vec![m.initial]];
    ids.insert(vec![m.initial], 0);
    let mut seen = HashSet::new();
    let mut queue: VecDeque<(usize, usize)> = (0..ex.states.len()).map(|n| (0, n)).collect();
    let mut rules = Vec::new();
    let mut rule_set = HashSet::new();
    if cutoff == 0 {
        return Ok(None);
    }
    while let Some((sid, node)) = queue.pop_front() {
        if !seen.insert((sid, node)) {
            continue;
        }
        let seq = seqs[sid].clone();
        for (sym, cs) in &into[node] {
            let key: Vec<usize> = if m.lookahead.is_some() {
                cs.iter().map(|&c| ex.states[c]).collect()
            } else {
                Vec::new()
            };
            let lists: Option<Vec<&Vec<usize>>> = seq
                .iter()
                .map(|&q| idx.get(&(q, sym.clone(), key.clone())))
                .collect();
            let Some(lists) = lists else { continue };
            for combo in cartesian(&lists) {
                let rhs: Vec<Item> = combo
                    .iter()
                    .flat_map(|&r| m.rules[r].rhs.iter().copied())
                    .collect();
                let mut child = vec![Vec::new(); cs.len()];
                for it in &rhs {
                    if let Item::Call(q, i) = *it {
                        child[i - 1].push(q);
                    }
                }
                let mut child_ids = vec![usize::MAX; cs.len()];
                for (i, c) in child.into_iter().enumerate() {
                    if c.is_empty() {
                        continue;
                    }
                    if c.len() > cutoff {
                        return Ok(None);
                    }
                    let id = match ids.get(&c) {
                        Some(&id) => id,
                        None => {
                            seqs.push(c.clone());
                            ids.insert(c, seqs.len() - 1);
                            seqs.len() - 1
                        }
                    };
                    child_ids[i] = id;
                    queue.push_back((id, cs[i]));
                }
                if build {
                    let mut done = vec![false; cs.len()];
                    let lin: Vec<Item> = rhs
                        .iter()
                        .filter_map(|it| match *it {
                            Item::Letter(a) => Some(Item::Letter(a)),
                            Item::Call(_, i) if !done[i - 1] => {
                                done[i - 1] = true;
                                Some(Item::Call(child_ids[i - 1], i))
                            }
                            Item::Call(..) => None,
                        })
                        .collect();
                    let r = YdtRule {
                        state: sid,
                        symbol: sym.clone(),
                        lookahead: key.clone(),
                        rhs: lin,
                    };
                    if rule_set.insert(r.clone()) {
                        rules.push(r);
                    }
                }
            }
        }
    }
    Ok(Some(Sequences { seqs, rules }))
}

/// Semi-decides finite copying: the longest reachable state sequence, if every sequence
/// stays within `cutoff`.
pub fn check_finite_copying(m: &YdtFc, cutoff: usize) -> Result<FcCheck> {
    Ok(match sequences(m, cutoff, false)? {
        Some(s) => FcCheck::Bound(s.seqs.iter().map(Vec::len).max().unwrap_or(1)),
        None => FcCheck::ExceededCutoff,
    })
}

/// Linear transducer over state sequences whose output on every input is a permutation
/// of the original output.
pub fn linearize_fc(m: &YdtFc) -> Result<YdtFc> {
    let k = m
        .bound
        .ok_or_else(|| Error::NotFiniteCopying("no finite-copying certificate".into()))?;
    let s = sequences(m, k, true)?
        .ok_or_else(|| Error::NotFiniteCopying(format!("certificate {k} is too small")))?;
    let states = s
        .seqs
        .iter()
        .map(|q| {
            let names: Vec<&str> = q.iter().map(|&x| m.states[x].as_str()).collect();
            format!("<{}>", names.join(","))
        })
        .collect();
    Ok(YdtFc {
        states,
        input: m.input.clone(),
        letters: m.letters.clone(),
        initial: 0,
        lookahead: m.lookahead.clone(),
        rules: s.rules,
        nondeterministic: m.nondeterministic,
        bound: Some(1),
    })
}

/// Grammar for the output language of a linear transducer on `L(d) ∩ dom(m)`.
pub fn image_cfg(m: &YdtFc, d: &Dbta) -> Result<Cfg> {
    if !m.is_linear() {
        return Err(Error::Invalid(
            "image grammar needs a linear transducer".into(),
        ));
    }
    if !d.alphabet.same_as(&m.input) {
        return Err(Error::AlphabetMismatch(format!(
            "{{{}}} vs {{{}}}",
            d.alphabet, m.input
        )));
    }
    let ex = explore(
        &m.input,
        DEFAULT_STATE_LIMIT,
        |s, cs: &[&(usize, usize)]| {
            let ds: Vec<usize> = cs.iter().map(|c| c.0).collect();
            let Some(dq) = d.step(s, &ds) else {
                return Ok(None);
            };
            let la = match &m.lookahead {
                None => Some(0),
                Some(a) => a.step(s, &cs.iter().map(|c| c.1).collect::<Vec<_>>()),
            };
            Ok(la.map(|p| (dq, p)))
        },
    )?;
    let mut into: Vec<Vec<(Sym, Vec<usize>)>> = vec![Vec::new(); ex.states.len()];
    for ((s, cs), &t) in &ex.transitions {
        into[t].push((s.clone(), cs.clone()));
    }
    for l in &mut into {
        l.sort();
    }
    let idx = m.rule_index();
    let mut nonterminals = vec!["S".to_string()];
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut productions = Vec::new();
    let mut intern =
        |q: usize, node: usize, nts: &mut Vec<String>, queue: &mut VecDeque<(usize, usize)>| {
            *ids.entry((q, node)).or_insert_with(|| {
                let (dq, p) = ex.states[node];
                let name = match &m.lookahead {
                    None => format!("{}/{}", m.states[q], d.states[dq]),
                    Some(a) => format!("{}/{}/{}", m.states[q], d.states[dq], a.states[p]),
                };
                nts.push(name);
                queue.push_back((q, node));
                nts.len() - 1
            })
        };
    for (node, &(dq, _)) in ex.states.iter().enumerate() {
        if d.finals.contains(&dq) {
            let n = intern(m.initial, node, &mut nonterminals, &mut queue);
            productions.push((0, vec![GSym::N(n)]));
        }
    }
    while let Some((q, node)) = queue.pop_front() {
        let lhs = intern(q, node, &mut nonterminals, &mut queue);
        for (sym, cs) in &into[node] {
            let key: Vec<usize> = if m.lookahead.is_some() {
                cs.iter().map(|&c| ex.states[c].1).collect()
            } else {
                Vec::new()
            };
            let Some(rs) = idx.get(&(q, sym.clone(), key)) else {
                continue;
            };
            for &r in rs {
                let body = m.rules[r]
                    .rhs
                    .iter()
                    .map(|it| match *it {
                        Item::Letter(a) => GSym::T(a),
                        Item::Call(p, i) => {
                            GSym::N(intern(p, cs[i - 1], &mut nonterminals, &mut queue))
                        }
                    })
                    .collect();
                productions.push((lhs, body));
            }
        }
    }
    let mut seen = HashSet::new();
    productions.retain(|p| seen.insert(p.clone()));
    Ok(Cfg {
        terminals: m.letters.clone(),
        nonterminals,
        start: 0,
        productions,
    }
    .trim())
}

/// Product look-ahead of two optional automata; components default to a single state.
fn product_lookahead(
    input: &RankedAlphabet,
    a: Option<&Dbta>,
    b: Option<&Dbta>,
) -> Result<(Dbta, Vec<(usize, usize)>)> {
    let ex = explore(input, DEFAULT_STATE_LIMIT, |s, cs: &[&(usize, usize)]| {
        let l = match a {
            None => Some(0),
            Some(a) => a.step(s, &cs.iter().map(|c| c.0).collect::<Vec<_>>()),
        };
        let r = match b {
            None => Some(0),
            Some(b) => b.step(s, &cs.iter().map(|c| c.1).collect::<Vec<_>>()),
        };
        Ok(l.zip(r))
    })?;
    let mut out = Dbta::new(input.clone());
    for &(p, q) in &ex.states {
        let name = |m: Option<&Dbta>, i: usize| m.map_or("*".to_string(), |m| m.states[i].clone());
        out.add_state(format!("({},{})", name(a, p), name(b, q)));
    }
    out.finals = (0..ex.states.len()).collect();
    out.transitions = ex.transitions;
    Ok((out, ex.states))
}

/// Grammar for `{a^m # b^n | s ∈ D, the m-th letter of M1(s) is a, the n-th letter of
/// M2(s) is b}`. Terminals are `[a, #, b]`.
pub fn build_lab(m1: &YdtFc, m2: &YdtFc, d: &Dbta, a: &str, b: &str) -> Result<Cfg> {
    if a == b {
        return Err(Error::Invalid("the two letters must differ".into()));
    }
    for x in [a, b] {
        if !m1.letters.iter().chain(&m2.letters).any(|l| l == x) {
            return Err(Error::Invalid(format!("`{x}` is not an output letter")));
        }
    }
    if m1.nondeterministic || m2.nondeterministic {
        return Err(Error::Nondeterministic(
            "both transducers must be deterministic".into(),
        ));
    }
    if !m1.input.same_as(&m2.input) {
        return Err(Error::AlphabetMismatch(format!(
            "{{{}}} vs {{{}}}",
            m1.input, m2.input
        )));
    }
    let (k1, k2) = match (m1.bound, m2.bound) {
        (Some(x), Some(y)) => (x, y),
        _ => {
            return Err(Error::NotFiniteCopying(
                "no finite-copying certificate".into(),
            ))
        }
    };
    let d = intersect(&intersect(d, &m1.domain()?)?, &m2.domain()?)?;
    let (la, pairs) = product_lookahead(&m1.input, m1.lookahead.as_ref(), m2.lookahead.as_ref())?;
    let (ta, hash, tb) = (0usize, 1usize, 2usize);
    let sep = if a == "#" || b == "#" { "##" } else { "#" };
    let (n1, n2) = (m1.states.len(), m2.states.len());
    let (off1, mark1) = (1, 1 + n1);
    let (off2, mark2) = (1 + 2 * n1, 1 + 2 * n1 + n2);
    let mut states = vec!["r0".to_string()];
    states.extend(m1.states.iter().map(|q| format!("1.{q}")));
    states.extend(m1.states.iter().map(|q| format!("1.{q}.mark")));
    states.extend(m2.states.iter().map(|q| format!("2.{q}")));
    states.extend(m2.states.iter().map(|q| format!("2.{q}.mark")));
    let mut trans: Vec<(Sym, Vec<usize>)> = la.transitions.keys().cloned().collect();
    trans.sort();
    let mut rules = Vec::new();
    let sides = [
        (m1, a, ta, off1, mark1, true),
        (m2, b, tb, off2, mark2, false),
    ];
    for (sym, cs) in &trans {
        let mut marked_init: [Vec<Vec<Item>>; 2] = [Vec::new(), Vec::new()];
        for (side, &(m, target, t, off, mark, first)) in sides.iter().enumerate() {
            let key: Vec<usize> = if m.lookahead.is_some() {
                cs.iter()
                    .map(|&c| if first { pairs[c].0 } else { pairs[c].1 })
                    .collect()
            } else {
                Vec::new()
            };
            let idx = m.rule_index();
            let map = |it: &Item| match *it {
                Item::Letter(_) => Item::Letter(t),
                Item::Call(q, i) => Item::Call(off + q, i),
            };
            for q in 0..m.states.len() {
                let Some(rs) = idx.get(&(q, sym.clone(), key.clone())) else {
                    continue;
                };
                let rhs = &m.rules[rs[0]].rhs;
                rules.push(YdtRule {
                    state: off + q,
                    symbol: sym.clone(),
                    lookahead: cs.clone(),
                    rhs: rhs.iter().map(map).collect(),
                });
                for (j, it) in rhs.iter().enumerate() {
                    let last = match *it {
                        Item::Letter(l) if m.letters[l] == target => Item::Letter(t),
                        Item::Call(p, i) => Item::Call(mark + p, i),
                        Item::Letter(_) => continue,
                    };
                    let mut w: Vec<Item> = rhs[..j].iter().map(map).collect();
                    w.push(last);
                    if q == m.initial {
                        marked_init[side].push(w.clone());
                    }
                    rules.push(YdtRule {
                        state: mark + q,
                        symbol: sym.clone(),
                        lookahead: cs.clone(),
                        rhs: w,
                    });
                }
            }
        }
        for u in &marked_init[0] {
            for w in &marked_init[1] {
                let mut rhs = u.clone();
                rhs.push(Item::Letter(hash));
                rhs.extend(w.iter().copied());
                rules.push(YdtRule {
                    state: 0,
                    symbol: sym.clone(),
                    lookahead: cs.clone(),
                    rhs,
                });
            }
        }
    }
    let joined = YdtFc {
        states,
        input: m1.input.clone(),
        letters: vec![a.to_string(), sep.to_string(), b.to_string()],
        initial: 0,
        lookahead: Some(la),
        rules,
        nondeterministic: true,
        bound: None,
    };
    let joined = match check_finite_copying(&joined, k1 + k2 + 1)? {
        FcCheck::Bound(k) => YdtFc {
            bound: Some(k),
            ..joined
        },
        FcCheck::ExceededCutoff => {
            return Err(Error::Internal(
                "marked transducer lost finite copying".into(),
            ));
        }
    };
    image_cfg(&linearize_fc(&joined)?, &d)
}

/// Verdict of [`decide_equiv_fc`]. `vector` counts `[a, #, b]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FcVerdict {
    Equivalent,
    NotEquivalent {
        a: String,
        b: String,
        vector: Vector,
    },
    DomainMismatch(Tree),
}

#[derive(Debug, Clone)]
pub struct FcOptions {
    /// Cutoff used when an input carries no finite-copying certificate.
    pub cutoff: usize,
    pub max_sets: usize,
    pub exec: Exec,
}

impl Default for FcOptions {
    fn default() -> Self {
        FcOptions {
            cutoff: DEFAULT_CUTOFF,
            max_sets: DEFAULT_MAX_SETS,
            exec: Exec::default(),
        }
    }
}

/// Fresh end marker for both transducers.
fn end_marker(m1: &YdtFc, m2: &YdtFc) -> String {
    let mut s = "$".to_string();
    while m1.letters.iter().chain(&m2.letters).any(|l| *l == s) {
        s.push('$');
    }
    s
}

pub fn decide_equiv_fc(m1: &YdtFc, m2: &YdtFc, d: &Dbta) -> Result<FcVerdict> {
    decide_equiv_fc_with(m1, m2, d, &FcOptions::default())
}

pub fn decide_equiv_fc_with(
    m1: &YdtFc,
    m2: &YdtFc,
    d: &Dbta,
    opts: &FcOptions,
) -> Result<FcVerdict> {
    if m1.nondeterministic || m2.nondeterministic {
        return Err(Error::Nondeterministic(
            "both transducers must be deterministic".into(),
        ));
    }
    if !m1.input.same_as(&m2.input) || !d.alphabet.same_as(&m1.input) {
        return Err(Error::AlphabetMismatch(format!(
            "{{{}}} vs {{{}}}",
            m1.input, m2.input
        )));
    }
    let certify = |m: &YdtFc| {
        if m.bound.is_some() {
            Ok(m.clone())
        } else {
            m.certify(opts.cutoff)
        }
    };
    let (m1, m2) = (certify(m1)?, certify(m2)?);
    let dom1 = intersect(d, &m1.domain()?)?;
    let dom2 = intersect(d, &m2.domain()?)?;
    if let LangEquiv::Separator(t) = equiv_dbta(&dom1, &dom2)? {
        return Ok(FcVerdict::DomainMismatch(t));
    }
    let marker = end_marker(&m1, &m2);
    let e1 = m1.with_end_marker(&marker)?;
    let e2 = m2.with_end_marker(&marker)?;
    let mut delta: Vec<String> = Vec::new();
    for l in e1.letters.iter().chain(&e2.letters) {
        if !delta.contains(l) {
            delta.push(l.clone());
        }
    }
    let mut pairs = Vec::new();
    for a in &delta {
        for b in &delta {
            if a != b && e1.letters.contains(a) && e2.letters.contains(b) {
                pairs.push((a.clone(), b.clone()));
            }
        }
    }
    let found = par::find_first(opts.exec, &pairs, |(a, b)| {
        let run = || -> Result<Option<FcVerdict>> {
            let g = build_lab(&e1, &e2, &dom1, a, b)?;
            let s = parikh_image_with(&g, opts.max_sets)?;
            Ok(match equal_count_feasible(&s, 0, 2, &[(1, 1)])? {
                Feasibility::Infeasible => None,
                Feasibility::Witness(v) => Some(FcVerdict::NotEquivalent {
                    a: a.clone(),
                    b: b.clone(),
                    vector: v,
                }),
            })
        };
        run().transpose()
    });
    match found {
        None => Ok(FcVerdict::Equivalent),
        Some(r) => r,
    }
}

/// Smallest input (by height, then enumeration order) in `L(d)` on which the two
/// deterministic transducers are both defined and differ, among at most `limit` trees.
pub fn search_counterexample(
    m1: &YdtFc,
    m2: &YdtFc,
    d: &Dbta,
    max_height: usize,
    limit: usize,
) -> Result<Option<Tree>> {
    let mut by_height: Vec<Vec<Tree>> = Vec::new();
    let mut all: Vec<Tree> = Vec::new();
    let mut count = 0usize;
    for h in 0..=max_height {
        let mut level = Vec::new();
        for (s, k) in m1.input.iter() {
            if k == 0 {
                if h == 0 {
                    level.push(Tree::with_sym(s.clone(), Vec::new()));
                }
                continue;
            }
            if h == 0 {
                continue;
            }
            // tuples of smaller trees with at least one of height h-1
            let lower: Vec<&Tree> = all.iter().collect();
            let top: &Vec<Tree> = &by_height[h - 1];
            let n = lower.len();
            let mut ix = vec![0usize; k];
            'outer: loop {
                let cs: Vec<&Tree> = ix.iter().map(|&i| lower[i]).collect();
                if cs.iter().any(|c| top.contains(c)) {
                    level.push(Tree::with_sym(s.clone(), cs.into_iter().cloned().collect()));
                    count += 1;
                    if count > limit {
                        return Ok(None);
                    }
                }
                for p in (0..k).rev() {
                    ix[p] += 1;
                    if ix[p] < n {
                        continue 'outer;
                    }
                    ix[p] = 0;
                }
                break;
            }
        }
        for t in &level {
            if d.accepts(t)? {
                if let (Some(x), Some(y)) = (m1.eval(t)?, m2.eval(t)?) {
                    if m1.word(&x) != m2.word(&y) {
                        return Ok(Some(t.clone()));
                    }
                }
            }
        }
        all.extend(level.iter().cloned());
        by_height.push(level);
    }
    Ok(None)
}
