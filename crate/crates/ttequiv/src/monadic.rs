//! Monadic macro tree transducers: normalization, the reductions to HDT0L sequence
//! equivalence, a bounded checker for HDT0L instances, and the end-to-end comparison.
//!
//! A normalized monadic transducer reads and writes chains `a1(…an(⊥)…)` over a single
//! leaf `⊥`, and every state has at most one parameter, which it always uses. Such a
//! chain is identified with the word `a1…an`, so the output of a state on an input word
//! is obtained by iterating one string homomorphism per input letter.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::automata::{equiv_dbta, intersect, monadic_to_dfa, Dbta, Dfa, LangEquiv};
use crate::domain::{domain_automaton, make_nondeleting};
use crate::error::{Error, Result};
use crate::lookahead::{eliminate_lookahead_mtt_pair, LaElimination};
use crate::mtt::{eval, Mtt, Rhs, Rule};
use crate::par::{self, Exec};
use crate::trees::{sym, RankedAlphabet, Sym, Tree};

/// Default cap on the length of a sentential form during [`check_hdt0l`].
pub const DEFAULT_FORM_BUDGET: usize = 1_000_000;

/// The unary symbols of a monadic tree from the root down; the leaf contributes nothing.
pub fn strip(t: &Tree) -> Result<Vec<Sym>> {
    let mut out = Vec::new();
    let mut cur = t;
    loop {
        match cur.children.as_slice() {
            [] => return Ok(out),
            [c] => {
                out.push(cur.label.clone());
                cur = c;
            }
            _ => {
                return Err(Error::NotMonadic(format!(
                    "`{}` has rank {}",
                    cur.label,
                    cur.children.len()
                )))
            }
        }
    }
}

/// [`strip`] for right-hand sides: unary outputs and state names in order, while leaves
/// and the parameter contribute nothing.
pub fn strip_rhs(r: &Rhs) -> Result<Vec<Sym>> {
    let mut out = Vec::new();
    let mut cur = r;
    loop {
        match cur {
            Rhs::Out(a, cs) => match cs.as_slice() {
                [] => return Ok(out),
                [c] => {
                    out.push(a.clone());
                    cur = c;
                }
                _ => {
                    return Err(Error::NotMonadic(format!(
                        "output `{a}` has rank {}",
                        cs.len()
                    )))
                }
            },
            Rhs::Call(q, args) => {
                out.push(q.clone());
                match args.as_slice() {
                    [_] => return Ok(out),
                    [_, p] => cur = p,
                    _ => {
                        return Err(Error::NotMonadic(format!(
                            "state `{q}` has more than one parameter"
                        )))
                    }
                }
            }
            Rhs::Y(_) => return Ok(out),
            Rhs::X(i) => return Err(Error::Invalid(format!("x{i} outside a state call"))),
        }
    }
}

fn fresh(base: &str, taken: &BTreeSet<String>) -> String {
    let mut n = base.to_string();
    while taken.contains(&n) {
        n.push('\'');
    }
    n
}

/// Replacement of every leaf `e` by the chain `e'(⊥)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expansion {
    pub bottom: Sym,
    /// Original leaf and its unary copy.
    pub leaves: Vec<(Sym, Sym)>,
}

impl Expansion {
    fn new(alphabets: &[&RankedAlphabet], bottom: &Sym) -> Self {
        let mut taken: BTreeSet<String> = alphabets
            .iter()
            .flat_map(|a| a.iter().map(|(s, _)| s.to_string()))
            .collect();
        taken.insert(bottom.to_string());
        let mut leaves: Vec<(Sym, Sym)> = Vec::new();
        for a in alphabets {
            for e in a.symbols_of_rank(0) {
                if leaves.iter().any(|(l, _)| l == e) {
                    continue;
                }
                let u = fresh(&format!("{e}'"), &taken);
                taken.insert(u.clone());
                leaves.push((e.clone(), sym(&u)));
            }
        }
        Expansion {
            bottom: bottom.clone(),
            leaves,
        }
    }

    fn unary(&self, leaf: &Sym) -> Option<&Sym> {
        self.leaves.iter().find(|(l, _)| l == leaf).map(|(_, u)| u)
    }

    fn original(&self, unary: &Sym) -> Option<&Sym> {
        self.leaves.iter().find(|(_, u)| u == unary).map(|(l, _)| l)
    }

    pub fn alphabet(&self, a: &RankedAlphabet) -> RankedAlphabet {
        let mut out = RankedAlphabet::new();
        for (s, k) in a.iter() {
            let (name, rank) = match k {
                0 => (self.unary(s).expect("known leaf").clone(), 1),
                _ => (s.clone(), k),
            };
            out.insert(&name, rank).expect("fresh names");
        }
        out.insert(&self.bottom, 0).expect("fresh bottom");
        out
    }

    pub fn expand(&self, t: &Tree) -> Tree {
        match (t.children.is_empty(), self.unary(&t.label)) {
            (true, Some(u)) => Tree::with_sym(
                u.clone(),
                vec![Tree::with_sym(self.bottom.clone(), Vec::new())],
            ),
            _ => Tree::with_sym(
                t.label.clone(),
                t.children.iter().map(|c| self.expand(c)).collect(),
            ),
        }
    }

    /// Inverse of [`Expansion::expand`], `None` on trees outside its image.
    pub fn unexpand(&self, t: &Tree) -> Option<Tree> {
        if let Some(l) = self.original(&t.label) {
            return match t.children.as_slice() {
                [b] if b.label == self.bottom && b.children.is_empty() => {
                    Some(Tree::with_sym(l.clone(), Vec::new()))
                }
                _ => None,
            };
        }
        if t.label == self.bottom || t.children.is_empty() {
            return None;
        }
        Some(Tree::with_sym(
            t.label.clone(),
            t.children
                .iter()
                .map(|c| self.unexpand(c))
                .collect::<Option<_>>()?,
        ))
    }

    fn expand_rhs(&self, r: &Rhs) -> Rhs {
        match r {
            Rhs::Out(d, cs) if cs.is_empty() => match self.unary(d) {
                Some(u) => Rhs::Out(u.clone(), vec![Rhs::Out(self.bottom.clone(), Vec::new())]),
                None => r.clone(),
            },
            Rhs::Out(d, cs) => Rhs::Out(d.clone(), cs.iter().map(|c| self.expand_rhs(c)).collect()),
            Rhs::Call(q, cs) => {
                Rhs::Call(q.clone(), cs.iter().map(|c| self.expand_rhs(c)).collect())
            }
            other => other.clone(),
        }
    }
}

fn expansions(ms: &[&Mtt]) -> (Expansion, Expansion) {
    let all: BTreeSet<String> = ms
        .iter()
        .flat_map(|m| {
            m.input
                .iter()
                .chain(m.output.iter())
                .map(|(s, _)| s.to_string())
        })
        .collect();
    let bottom = sym(&fresh("bot", &all));
    let inputs: Vec<&RankedAlphabet> = ms.iter().map(|m| &m.input).collect();
    let outputs: Vec<&RankedAlphabet> = ms.iter().map(|m| &m.output).collect();
    (
        Expansion::new(&inputs, &bottom),
        Expansion::new(&outputs, &bottom),
    )
}

fn require_monadic(m: &Mtt) -> Result<()> {
    if !m.is_monadic() {
        return Err(Error::NotMonadic(format!(
            "input {{{}}}, output {{{}}}",
            m.input, m.output
        )));
    }
    Ok(())
}

/// The expanded transducer, with a look-ahead that also admits only expanded inputs.
fn expand_mtt(m: &Mtt, inp: &Expansion, out: &Expansion) -> Result<Mtt> {
    let input = inp.alphabet(&m.input);
    let output = out.alphabet(&m.output);
    let orig = m.lookahead.as_ref();
    let n = orig.map_or(1, |a| a.states.len());
    let name = |p: usize| orig.map_or("_".to_string(), |a| a.states[p].clone());
    let mut la = Dbta::new(input.clone());
    let bot_state = la.add_state("bot");
    // (p, leaf) and (p, inner) for every original look-ahead state p
    for p in 0..n {
        la.add_state(format!("{}/leaf", name(p)));
        la.add_state(format!("{}/inner", name(p)));
    }
    let at = |p: usize, inner: bool| 1 + 2 * p + usize::from(inner);
    let step = |s: &Sym, cs: &[usize]| match orig {
        None => Some(0),
        Some(a) => a.step(s, cs),
    };
    la.add_transition(&inp.bottom, Vec::new(), bot_state)?;
    for (s, k) in m.input.iter() {
        if k == 0 {
            if let Some(p) = step(s, &[]) {
                la.add_transition(
                    inp.unary(s).expect("known leaf"),
                    vec![bot_state],
                    at(p, false),
                )?;
            }
            continue;
        }
        for c in 0..n {
            if let Some(p) = step(s, &[c]) {
                for inner in [false, true] {
                    la.add_transition(s, vec![at(c, inner)], at(p, true))?;
                }
            }
        }
    }
    let mut rules = Vec::new();
    for r in m.rules() {
        let rhs = out.expand_rhs(&r.rhs);
        if m.input.rank(&r.symbol) == Some(0) {
            rules.push(Rule {
                state: r.state.clone(),
                symbol: inp.unary(&r.symbol).expect("known leaf").clone(),
                lookahead: vec![bot_state],
                rhs,
            });
            continue;
        }
        let cs: Vec<usize> = if orig.is_some() {
            vec![r.lookahead[0]]
        } else {
            (0..n).collect()
        };
        for c in cs {
            for inner in [false, true] {
                rules.push(Rule {
                    state: r.state.clone(),
                    symbol: r.symbol.clone(),
                    lookahead: vec![at(c, inner)],
                    rhs: rhs.clone(),
                });
            }
        }
    }
    Ok(Mtt::new(
        m.states.clone(),
        input,
        output,
        &m.initial,
        Some(la),
        rules,
    ))
}

/// Checks that every state has at most one parameter, used exactly once in each of its
/// rules, and that input and output have a single leaf.
pub fn check_normalized(m: &Mtt) -> Result<()> {
    require_monadic(m)?;
    for a in [&m.input, &m.output] {
        if a.symbols_of_rank(0).count() != 1 {
            return Err(Error::Invalid(format!(
                "alphabet {{{a}}} needs exactly one leaf"
            )));
        }
    }
    for (q, r) in m.states.iter() {
        if r > 2 {
            return Err(Error::Invalid(format!(
                "state `{q}` has {} parameters",
                r - 1
            )));
        }
    }
    for r in m.rules() {
        if m.params(&r.state) == 1 && r.rhs.count_param(1) != 1 {
            return Err(Error::Invalid(format!(
                "rule of `{}` on `{}` deletes its parameter",
                r.state, r.symbol
            )));
        }
    }
    Ok(())
}

/// A normalized monadic transducer and the leaf expansions relating it to the original.
#[derive(Debug, Clone)]
pub struct NormalizedMonadic {
    pub mtt: Mtt,
    pub input: Expansion,
    pub output: Expansion,
}

/// Expands leaves to chains over a fresh `⊥`, restricts the look-ahead to expanded inputs,
/// and makes the result nondeleting.
pub fn normalize_monadic(m: &Mtt) -> Result<NormalizedMonadic> {
    require_monadic(m)?;
    let (inp, out) = expansions(&[m]);
    normalize_with(m, inp, out)
}

fn normalize_with(m: &Mtt, input: Expansion, output: Expansion) -> Result<NormalizedMonadic> {
    let mtt = make_nondeleting(&expand_mtt(m, &input, &output)?)?;
    check_normalized(&mtt)?;
    Ok(NormalizedMonadic { mtt, input, output })
}

/// An HDT0L sequence-equivalence instance: do `h(h_{i_k}(…h_{i_1}(w1)…))` and
/// `g(g_{i_k}(…g_{i_1}(w2)…))` agree for every index word `i_1…i_k`?
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HdtolInstance {
    pub letters: Vec<String>,
    pub output: Vec<String>,
    pub indices: Vec<String>,
    pub start1: Vec<usize>,
    pub start2: Vec<usize>,
    /// `h[j][letter]`
    pub h: Vec<Vec<Vec<usize>>>,
    pub g: Vec<Vec<Vec<usize>>>,
    /// Final images, over `output`.
    pub final1: Vec<Vec<usize>>,
    pub final2: Vec<Vec<usize>>,
    /// When present, index words driving this automaton into a state with no reachable
    /// final state have empty images on both sides for every extension.
    pub guard: Option<Dfa>,
}

fn apply(hom: &[Vec<usize>], w: &[usize]) -> Vec<usize> {
    w.iter().flat_map(|&l| hom[l].iter().copied()).collect()
}

impl HdtolInstance {
    /// The two final images on an index word.
    pub fn images(&self, word: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut a = self.start1.clone();
        let mut b = self.start2.clone();
        for &j in word {
            a = apply(&self.h[j], &a);
            b = apply(&self.g[j], &b);
        }
        (apply(&self.final1, &a), apply(&self.final2, &b))
    }

    pub fn word_names(&self, word: &[usize]) -> String {
        word.iter()
            .map(|&j| self.indices[j].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn output_names(&self, w: &[usize]) -> String {
        w.iter()
            .map(|&j| self.output[j].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn letter_names(&self, w: &[usize]) -> String {
        w.iter()
            .map(|&j| self.letters[j].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Text form: `h`/`g` lines are listed only for letters not mapped to themselves, and
/// `final` lines only for letters with a nonempty image.
impl fmt::Display for HdtolInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "kind: hdt0l")?;
        writeln!(f, "letters: {}", self.letters.join(" "))?;
        writeln!(f, "output: {}", self.output.join(" "))?;
        writeln!(f, "indices: {}", self.indices.join(" "))?;
        writeln!(f, "start1: {}", self.letter_names(&self.start1))?;
        writeln!(f, "start2: {}", self.letter_names(&self.start2))?;
        for (tag, hom) in [("h", &self.h), ("g", &self.g)] {
            for (j, images) in hom.iter().enumerate() {
                for (l, img) in images.iter().enumerate() {
                    if img.as_slice() != [l] {
                        let rhs = self.letter_names(img);
                        writeln!(f, "{tag} {} {} -> {rhs}", self.indices[j], self.letters[l])?;
                    }
                }
            }
        }
        for (tag, fin) in [("final1", &self.final1), ("final2", &self.final2)] {
            for (l, img) in fin.iter().enumerate() {
                if !img.is_empty() {
                    writeln!(f, "{tag} {} -> {}", self.letters[l], self.output_names(img))?;
                }
            }
        }
        Ok(())
    }
}

/// Outcome of [`check_hdt0l`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HdtolCheck {
    NoCounterexampleUpTo(usize),
    /// Shortest, then lexicographically least, failing index word.
    Counterexample(Vec<usize>),
}

#[derive(Debug, Clone, Copy)]
pub struct HdtolOptions {
    /// Longest sentential form allowed, in letters.
    pub budget: usize,
    pub exec: Exec,
}

impl Default for HdtolOptions {
    fn default() -> Self {
        HdtolOptions {
            budget: DEFAULT_FORM_BUDGET,
            exec: Exec::default(),
        }
    }
}

pub fn check_hdt0l(inst: &HdtolInstance, max_len: usize) -> Result<HdtolCheck> {
    check_hdt0l_with(inst, max_len, HdtolOptions::default())
}

struct Node {
    word: Vec<usize>,
    f1: Vec<usize>,
    f2: Vec<usize>,
    r: usize,
}

/// Checks every index word up to `max_len`, level by level, extending the sentential
/// forms of the previous level.
pub fn check_hdt0l_with(
    inst: &HdtolInstance,
    max_len: usize,
    opts: HdtolOptions,
) -> Result<HdtolCheck> {
    let live = inst.guard.as_ref().map(Dfa::live_states);
    let root = Node {
        word: Vec::new(),
        f1: inst.start1.clone(),
        f2: inst.start2.clone(),
        r: inst.guard.as_ref().map_or(0, |d| d.initial),
    };
    if apply(&inst.final1, &root.f1) != apply(&inst.final2, &root.f2) {
        return Ok(HdtolCheck::Counterexample(Vec::new()));
    }
    let mut frontier = vec![root];
    for _ in 0..max_len {
        let expanded = par::map(opts.exec, &frontier, |node| -> Result<Vec<(Node, bool)>> {
            let mut out = Vec::new();
            for j in 0..inst.indices.len() {
                let r = match &inst.guard {
                    None => 0,
                    Some(d) => match d.delta[node.r][j] {
                        Some(r) => r,
                        None => continue,
                    },
                };
                if live.as_ref().is_some_and(|l| !l[r]) {
                    continue;
                }
                let f1 = apply(&inst.h[j], &node.f1);
                let f2 = apply(&inst.g[j], &node.f2);
                if f1.len().max(f2.len()) > opts.budget {
                    return Err(Error::Budget(format!(
                        "sentential form longer than {} letters after {} steps",
                        opts.budget,
                        node.word.len() + 1
                    )));
                }
                let differs = apply(&inst.final1, &f1) != apply(&inst.final2, &f2);
                let mut word = node.word.clone();
                word.push(j);
                out.push((Node { word, f1, f2, r }, differs));
            }
            Ok(out)
        });
        let mut next = Vec::new();
        for batch in expanded {
            for (node, differs) in batch? {
                if differs {
                    return Ok(HdtolCheck::Counterexample(node.word));
                }
                next.push(node);
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(HdtolCheck::NoCounterexampleUpTo(max_len))
}

fn check_pair(m1: &Mtt, m2: &Mtt) -> Result<()> {
    for m in [m1, m2] {
        if m.lookahead.is_some() {
            return Err(Error::Invalid(
                "the reduction needs transducers without look-ahead".into(),
            ));
        }
        check_normalized(m)?;
        if let Some((q, s, _)) = m.first_missing_rule() {
            return Err(Error::NotTotal(format!("no rule for state `{q}` on `{s}`")));
        }
    }
    if !m1.input.same_as(&m2.input) {
        return Err(Error::AlphabetMismatch(
            "the transducers read different inputs".into(),
        ));
    }
    let outs: BTreeSet<&str> = m1
        .output
        .iter()
        .chain(m2.output.iter())
        .map(|(s, _)| &**s)
        .collect();
    let q1: BTreeSet<&str> = m1.states.iter().map(|(q, _)| &**q).collect();
    for (q, _) in m2.states.iter() {
        if q1.contains(&**q) {
            return Err(Error::Invalid(format!(
                "state `{q}` occurs in both transducers"
            )));
        }
    }
    if let Some(q) = m1
        .states
        .iter()
        .chain(m2.states.iter())
        .find(|(q, _)| outs.contains(&***q))
    {
        return Err(Error::Invalid(format!(
            "state `{}` is also an output symbol",
            q.0
        )));
    }
    Ok(())
}

/// Instance for two total normalized transducers without look-ahead: one index per
/// unary input symbol, letters are the unary outputs followed by the states.
pub fn to_hdt0l(m1: &Mtt, m2: &Mtt) -> Result<HdtolInstance> {
    build_instance(m1, m2, None)
}

/// As [`to_hdt0l`], with every letter tagged by the state a complete string automaton
/// reaches on the input read so far; letters tagged with a non-final state have empty
/// final images.
pub fn to_hdt0l_dfa(m1: &Mtt, m2: &Mtt, a: &Dfa) -> Result<HdtolInstance> {
    if !a.is_complete() {
        return Err(Error::Invalid(
            "the string automaton must be complete".into(),
        ));
    }
    build_instance(m1, m2, Some(a))
}

#[allow(clippy::needless_range_loop)]
fn build_instance(m1: &Mtt, m2: &Mtt, a: Option<&Dfa>) -> Result<HdtolInstance> {
    check_pair(m1, m2)?;
    let unary: Vec<Sym> = m1.input.symbols_of_rank(1).cloned().collect();
    let indices: Vec<Sym> = match a {
        None => unary.clone(),
        Some(d) => {
            let set: BTreeSet<&Sym> = unary.iter().collect();
            if d.letters.len() != set.len() || !d.letters.iter().all(|l| set.contains(l)) {
                return Err(Error::AlphabetMismatch(
                    "automaton letters differ from the unary inputs".into(),
                ));
            }
            d.letters.clone()
        }
    };
    let bottom = m1
        .input
        .symbols_of_rank(0)
        .next()
        .expect("normalized")
        .clone();
    let mut base: Vec<Sym> = Vec::new();
    for m in [m1, m2] {
        for o in m.output.symbols_of_rank(1) {
            if !base.contains(o) {
                base.push(o.clone());
            }
        }
    }
    let n_out = base.len();
    let q1: Vec<Sym> = m1.states.iter().map(|(q, _)| q.clone()).collect();
    let q2: Vec<Sym> = m2.states.iter().map(|(q, _)| q.clone()).collect();
    base.extend(q1.iter().cloned());
    base.extend(q2.iter().cloned());
    let bindex: HashMap<Sym, usize> = base
        .iter()
        .enumerate()
        .map(|(i, b)| (b.clone(), i))
        .collect();
    let nb = base.len();
    let nr = a.map_or(1, |d| d.states.len());
    let letter = |r: usize, b: usize| r * nb + b;
    let letters: Vec<String> = (0..nr)
        .flat_map(|r| {
            base.iter().map(move |b| match a {
                None => b.to_string(),
                Some(_) => format!("<r{r},{b}>"),
            })
        })
        .collect();
    let image = |m: &Mtt, q: &Sym, s: &Sym, r: usize| -> Result<Vec<usize>> {
        let rhs = m.rule(q, s, &[]).expect("total");
        Ok(strip_rhs(rhs)?
            .iter()
            .map(|t| letter(r, bindex[t]))
            .collect())
    };
    let first: BTreeSet<usize> = (n_out..n_out + q1.len()).collect();
    let second: BTreeSet<usize> = (n_out + q1.len()..nb).collect();
    let mut h = Vec::new();
    let mut g = Vec::new();
    for (j, s) in indices.iter().enumerate() {
        let mut hj = Vec::with_capacity(nr * nb);
        let mut gj = Vec::with_capacity(nr * nb);
        for r in 0..nr {
            let r2 = a.map_or(0, |d| d.delta[r][j].expect("complete"));
            for b in 0..nb {
                hj.push(if first.contains(&b) {
                    image(m1, &base[b], s, r2)?
                } else {
                    vec![letter(r2, b)]
                });
                gj.push(if second.contains(&b) {
                    image(m2, &base[b], s, r2)?
                } else {
                    vec![letter(r2, b)]
                });
            }
        }
        h.push(hj);
        g.push(gj);
    }
    let out_image = |m: &Mtt, q: &Sym| -> Result<Vec<usize>> {
        let rhs = m.rule(q, &bottom, &[]).expect("total");
        Ok(strip_rhs(rhs)?.iter().map(|t| bindex[t]).collect())
    };
    let mut final1 = Vec::with_capacity(nr * nb);
    let mut final2 = Vec::with_capacity(nr * nb);
    for r in 0..nr {
        let accepting = a.is_none_or(|d| d.finals.contains(&r));
        for b in 0..nb {
            let (x, y) = if !accepting {
                (Vec::new(), Vec::new())
            } else if b < n_out {
                (vec![b], vec![b])
            } else if first.contains(&b) {
                (out_image(m1, &base[b])?, Vec::new())
            } else {
                (Vec::new(), out_image(m2, &base[b])?)
            };
            final1.push(x);
            final2.push(y);
        }
    }
    let r0 = a.map_or(0, |d| d.initial);
    Ok(HdtolInstance {
        letters,
        output: base[..n_out].iter().map(|s| s.to_string()).collect(),
        indices: indices.iter().map(|s| s.to_string()).collect(),
        start1: vec![letter(r0, bindex[&m1.initial])],
        start2: vec![letter(r0, bindex[&m2.initial])],
        h,
        g,
        final1,
        final2,
        guard: a.cloned(),
    })
}

/// Adds the missing rules of a normalized transducer: they output nothing but the
/// parameter, or `⊥` for states without one.
pub fn totalize(m: &Mtt) -> Result<Mtt> {
    check_normalized(m)?;
    let bottom = m
        .output
        .symbols_of_rank(0)
        .next()
        .expect("normalized")
        .clone();
    let mut out = m.clone();
    let tuples: Vec<Vec<usize>> = match &m.lookahead {
        None => vec![Vec::new()],
        Some(_) => return Err(Error::Invalid("totalize expects no look-ahead".into())),
    };
    for (q, r) in m.states.iter() {
        for (s, _) in m.input.iter() {
            for la in &tuples {
                if m.rule(q, s, la).is_none() {
                    out.push_rule(Rule {
                        state: q.clone(),
                        symbol: s.clone(),
                        lookahead: la.clone(),
                        rhs: if r == 2 {
                            Rhs::Y(1)
                        } else {
                            Rhs::Out(bottom.clone(), Vec::new())
                        },
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Renames states that collide with `taken`, adding primes.
fn avoid(m: &Mtt, taken: &BTreeSet<String>) -> Mtt {
    let mut used = taken.clone();
    let mut map = HashMap::new();
    for (q, _) in m.states.iter() {
        let n = fresh(q, &used);
        used.insert(n.clone());
        map.insert(q.to_string(), n);
    }
    m.rename_states(|q| map[q].clone())
}

/// Everything built while reducing two monadic transducers to one HDT0L instance.
#[derive(Debug, Clone)]
pub struct MonadicReduction {
    /// Normalized, total, without look-ahead, over the annotated input alphabet.
    pub n1: Mtt,
    pub n2: Mtt,
    /// Top-down automaton for correctly annotated inputs in the common domain.
    pub dfa: Dfa,
    pub instance: HdtolInstance,
    input: Expansion,
    el: LaElimination,
}

impl MonadicReduction {
    /// Index word of an input tree: its expansion, annotated, read from the root.
    pub fn word_of(&self, s: &Tree) -> Option<Vec<usize>> {
        let a = self.el.annotate(&self.input.expand(s))?;
        let mut w = Vec::new();
        let mut cur = &a;
        while let [c] = cur.children.as_slice() {
            w.push(self.dfa.letter_index(&cur.label)?);
            cur = c;
        }
        Some(w)
    }

    /// Input tree of an index word, `None` when the word is not an expanded tree.
    pub fn tree_of(&self, w: &[usize]) -> Option<Tree> {
        let mut t = Tree::with_sym(self.input.bottom.clone(), Vec::new());
        for &j in w.iter().rev() {
            t = Tree::with_sym(self.dfa.letters[j].clone(), vec![t]);
        }
        self.input.unexpand(&self.el.erase(&t))
    }
}

#[derive(Debug, Clone)]
pub enum Reduced {
    DomainMismatch(Tree),
    Instance(Box<MonadicReduction>),
}

/// Compares the domains, then normalizes both transducers, moves the look-ahead into the
/// input alphabet, totalizes, and builds the guarded HDT0L instance.
pub fn reduce_monadic(m1: &Mtt, m2: &Mtt) -> Result<Reduced> {
    require_monadic(m1)?;
    require_monadic(m2)?;
    if !m1.input.same_as(&m2.input) {
        return Err(Error::AlphabetMismatch(
            "the transducers read different inputs".into(),
        ));
    }
    if let LangEquiv::Separator(t) = equiv_dbta(&domain_automaton(m1)?, &domain_automaton(m2)?)? {
        return Ok(Reduced::DomainMismatch(t));
    }
    let (inp, out) = expansions(&[m1, m2]);
    let a = normalize_with(m1, inp.clone(), out.clone())?.mtt;
    let b = normalize_with(m2, inp.clone(), out.clone())?.mtt;
    let outs: BTreeSet<String> = a
        .output
        .iter()
        .chain(b.output.iter())
        .map(|(s, _)| s.to_string())
        .collect();
    let a = avoid(&a, &outs);
    let mut taken = outs;
    taken.extend(a.states.iter().map(|(q, _)| q.to_string()));
    let b = avoid(&b, &taken);
    let el = eliminate_lookahead_mtt_pair(&a, &b)?;
    let e = intersect(
        &intersect(&el.e, &domain_automaton(&el.n1)?)?,
        &domain_automaton(&el.n2)?,
    )?;
    let dfa = monadic_to_dfa(&e, &inp.bottom)?;
    let n1 = totalize(&el.n1)?;
    let n2 = totalize(&el.n2)?;
    let instance = to_hdt0l_dfa(&n1, &n2, &dfa)?;
    Ok(Reduced::Instance(Box::new(MonadicReduction {
        n1,
        n2,
        dfa,
        instance,
        input: inp,
        el,
    })))
}

/// Outcome of [`decide_equiv_monadic`]; equivalence is only ever claimed up to a length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MonadicVerdict {
    NotEquivalent(Tree),
    NoCounterexampleUpTo(usize),
    DomainMismatch(Tree),
}

pub fn decide_equiv_monadic(m1: &Mtt, m2: &Mtt, max_len: usize) -> Result<MonadicVerdict> {
    decide_equiv_monadic_with(m1, m2, max_len, HdtolOptions::default())
}

pub fn decide_equiv_monadic_with(
    m1: &Mtt,
    m2: &Mtt,
    max_len: usize,
    opts: HdtolOptions,
) -> Result<MonadicVerdict> {
    let r = match reduce_monadic(m1, m2)? {
        Reduced::DomainMismatch(t) => return Ok(MonadicVerdict::DomainMismatch(t)),
        Reduced::Instance(r) => r,
    };
    match check_hdt0l_with(&r.instance, max_len, opts)? {
        HdtolCheck::NoCounterexampleUpTo(n) => Ok(MonadicVerdict::NoCounterexampleUpTo(n)),
        HdtolCheck::Counterexample(w) => {
            let t = r.tree_of(&w).ok_or_else(|| {
                Error::Internal(format!(
                    "counterexample `{}` is not an input tree",
                    r.instance.word_names(&w)
                ))
            })?;
            let (a, b) = (eval(m1, &t)?, eval(m2, &t)?);
            if a.is_some() && b.is_some() && a != b {
                Ok(MonadicVerdict::NotEquivalent(t))
            } else {
                Err(Error::Internal(format!(
                    "counterexample {t} does not separate the transducers"
                )))
            }
        }
    }
}
