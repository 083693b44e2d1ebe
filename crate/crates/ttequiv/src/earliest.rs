//! Earliest normal form and canonical transducers for total DTOPs.
//!
//! The common output prefix of every state is computed as a greatest fixpoint, pushed up
//! into the callers, and the remaining states are merged by partition refinement. Two
//! total DTOPs are equivalent exactly when their canonical forms are identical.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::mtt::{Mtt, Rhs, Rule};
use crate::trees::{sym, Path, RankedAlphabet, Sym, Tree};

/// A DTOP started from an axiom tree instead of an initial state. Axiom calls read the
/// whole input, written `q(x0)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxiomDtop {
    pub input: RankedAlphabet,
    pub output: RankedAlphabet,
    pub axiom: Rhs,
    pub states: Vec<Sym>,
    /// `rules[q][σ]`, indexed like `states` and `input`.
    pub rules: Vec<Vec<Rhs>>,
}

/// Outcome of [`equiv_total_dtop`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TotalEquiv {
    Equal,
    NotEqual(Tree),
}

impl AxiomDtop {
    fn state_index(&self) -> HashMap<Sym, usize> {
        self.states
            .iter()
            .enumerate()
            .map(|(i, q)| (q.clone(), i))
            .collect()
    }

    pub fn rule_count(&self) -> usize {
        self.rules.iter().map(Vec::len).sum()
    }

    /// Output on `s`; canonical transducers are total.
    pub fn eval(&self, s: &Tree) -> Result<Tree> {
        s.check(&self.input)?;
        let index = self.state_index();
        let sym_index: HashMap<Sym, usize> = self
            .input
            .iter()
            .enumerate()
            .map(|(i, (s, _))| (s.clone(), i))
            .collect();
        let ctx = EvalCtx {
            ax: self,
            index: &index,
            sym_index: &sym_index,
        };
        ctx.inst(&self.axiom, std::slice::from_ref(s))
    }

    /// An equivalent DTOP with an initial state. A single-call axiom keeps its state as the
    /// initial one; otherwise a fresh initial state inlines the axiom into its rules.
    pub fn to_dtop(&self) -> Mtt {
        let mut states = RankedAlphabet::new();
        let mut rules = Vec::new();
        let initial = match &self.axiom {
            Rhs::Call(q, _) => q.to_string(),
            _ => {
                let mut name = "init".to_string();
                while self.states.iter().any(|q| **q == *name) || self.output.contains(&name) {
                    name.push('\'');
                }
                states.insert(&name, 1).expect("fresh name");
                for (j, (s, _)) in self.input.iter().enumerate() {
                    let rhs = inline_axiom(&self.axiom, &|q| {
                        let qi = self
                            .states
                            .iter()
                            .position(|x| x == q)
                            .expect("known state");
                        self.rules[qi][j].clone()
                    });
                    rules.push(Rule {
                        state: sym(&name),
                        symbol: s.clone(),
                        lookahead: Vec::new(),
                        rhs,
                    });
                }
                name
            }
        };
        for q in &self.states {
            states.insert(q, 1).expect("distinct states");
        }
        for (qi, q) in self.states.iter().enumerate() {
            for (j, (s, _)) in self.input.iter().enumerate() {
                rules.push(Rule {
                    state: q.clone(),
                    symbol: s.clone(),
                    lookahead: Vec::new(),
                    rhs: self.rules[qi][j].clone(),
                });
            }
        }
        Mtt::new(
            states,
            self.input.clone(),
            self.output.clone(),
            &initial,
            None,
            rules,
        )
    }

    /// Every state has two rules with different root labels, or a rule rooted in a call.
    pub fn is_earliest(&self) -> bool {
        self.rules.iter().all(|rs| {
            let mut roots = rs.iter().map(|r| match r {
                Rhs::Out(d, _) => Some(d.clone()),
                _ => None,
            });
            let first = roots.next().flatten();
            match first {
                None => true,
                Some(d) => roots.any(|r| r.as_ref() != Some(&d)),
            }
        })
    }

    /// True when some rule uses an input variable more than once.
    pub fn has_nonlinear_rule(&self) -> bool {
        self.input.iter().enumerate().any(|(j, (_, k))| {
            self.rules
                .iter()
                .any(|rs| (1..=k).any(|i| rs[j].count_input(i) > 1))
        })
    }

    /// True when some rule of a symbol of rank `k` skips one of `x1..xk`.
    pub fn has_deleting_rule(&self) -> bool {
        self.input.iter().enumerate().any(|(j, (_, k))| {
            self.rules
                .iter()
                .any(|rs| (1..=k).any(|i| rs[j].count_input(i) == 0))
        })
    }
}

impl fmt::Display for AxiomDtop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "axiom: {}", self.axiom)?;
        for (qi, q) in self.states.iter().enumerate() {
            for (j, (s, k)) in self.input.iter().enumerate() {
                let xs: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
                let lhs = if k == 0 {
                    s.to_string()
                } else {
                    format!("{s}({})", xs.join(","))
                };
                writeln!(f, "{q}({lhs}) -> {}", self.rules[qi][j])?;
            }
        }
        Ok(())
    }
}

fn inline_axiom(t: &Rhs, rhs_of: &impl Fn(&Sym) -> Rhs) -> Rhs {
    match t {
        Rhs::Out(d, cs) => Rhs::Out(
            d.clone(),
            cs.iter().map(|c| inline_axiom(c, rhs_of)).collect(),
        ),
        Rhs::Call(q, _) => rhs_of(q),
        other => other.clone(),
    }
}

struct EvalCtx<'a> {
    ax: &'a AxiomDtop,
    index: &'a HashMap<Sym, usize>,
    sym_index: &'a HashMap<Sym, usize>,
}

impl EvalCtx<'_> {
    /// Instantiates `t`; `x_i` reads `inputs[i]` for axioms (`x0`) and `inputs[i-1]` for rules.
    fn inst(&self, t: &Rhs, inputs: &[Tree]) -> Result<Tree> {
        match t {
            Rhs::Out(d, cs) => Ok(Tree::with_sym(
                d.clone(),
                cs.iter()
                    .map(|c| self.inst(c, inputs))
                    .collect::<Result<_>>()?,
            )),
            Rhs::Call(q, args) => {
                let i = match args.first() {
                    Some(Rhs::X(0)) => 0,
                    Some(Rhs::X(i)) => i - 1,
                    _ => return Err(Error::Malformed("bad call".into())),
                };
                let s = &inputs[i];
                let rhs = &self.ax.rules[self.index[q]][self.sym_index[&s.label]];
                self.inst(rhs, &s.children)
            }
            _ => Err(Error::Malformed("variable outside a call".into())),
        }
    }
}

/// Output prefix with unknown (`Top`) and disagreeing (`Bot`) positions.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Pre {
    Top,
    Bot,
    Node(Sym, Vec<Pre>),
}

fn meet(a: &Pre, b: &Pre) -> Pre {
    match (a, b) {
        (Pre::Top, x) | (x, Pre::Top) => x.clone(),
        (Pre::Node(d, xs), Pre::Node(e, ys)) if d == e && xs.len() == ys.len() => Pre::Node(
            d.clone(),
            xs.iter().zip(ys).map(|(x, y)| meet(x, y)).collect(),
        ),
        _ => Pre::Bot,
    }
}

fn prefix_of(t: &Rhs, out: &HashMap<Sym, Pre>) -> Pre {
    match t {
        Rhs::Out(d, cs) => Pre::Node(d.clone(), cs.iter().map(|c| prefix_of(c, out)).collect()),
        Rhs::Call(q, _) => out[q].clone(),
        _ => Pre::Bot,
    }
}

fn require_total_dtop(m: &Mtt) -> Result<()> {
    if let Some((q, _)) = m.states.iter().find(|(_, r)| *r != 1) {
        return Err(Error::NotDtop(q.to_string()));
    }
    if m.lookahead.is_some() {
        return Err(Error::Invalid(
            "canonical forms are for DTOPs without look-ahead".into(),
        ));
    }
    if let Some((q, s, _)) = m.first_missing_rule() {
        return Err(Error::NotTotal(format!("no rule for state `{q}` on `{s}`")));
    }
    if m.input.symbols_of_rank(0).next().is_none() {
        return Err(Error::Invalid(
            "the input alphabet has no leaf symbol".into(),
        ));
    }
    Ok(())
}

/// Greatest common output prefix of every state over all inputs.
fn common_prefixes(m: &Mtt) -> HashMap<Sym, Pre> {
    let mut out: HashMap<Sym, Pre> = m
        .states
        .iter()
        .map(|(q, _)| (q.clone(), Pre::Top))
        .collect();
    loop {
        let mut next = HashMap::new();
        for (q, _) in m.states.iter() {
            let mut acc = Pre::Top;
            for (s, _) in m.input.iter() {
                let rhs = m.rule(q, s, &[]).expect("total");
                acc = meet(&acc, &prefix_of(rhs, &out));
            }
            next.insert(q.clone(), acc);
        }
        if next == out {
            return out;
        }
        out = next;
    }
}

fn earliest_name(q: &Sym, w: &[usize]) -> Sym {
    if w.is_empty() {
        q.clone()
    } else {
        sym(&format!("<{q},{}>", Path(w.to_vec())))
    }
}

struct Earliest<'a> {
    out: &'a HashMap<Sym, Pre>,
    ids: HashMap<(Sym, Vec<usize>), Sym>,
    queue: VecDeque<(Sym, Vec<usize>)>,
    taken: std::collections::HashSet<Sym>,
}

impl Earliest<'_> {
    fn state(&mut self, q: &Sym, w: &[usize]) -> Sym {
        if let Some(n) = self.ids.get(&(q.clone(), w.to_vec())) {
            return n.clone();
        }
        let mut name = earliest_name(q, w);
        while self.taken.contains(&name) {
            name = sym(&format!("{name}'"));
        }
        self.taken.insert(name.clone());
        self.ids.insert((q.clone(), w.to_vec()), name.clone());
        self.queue.push_back((q.clone(), w.to_vec()));
        name
    }

    fn fill(&mut self, p: &Pre, q: &Sym, i: usize, cur: &mut Vec<usize>) -> Rhs {
        match p {
            Pre::Node(d, cs) => {
                let mut v = Vec::with_capacity(cs.len());
                for (j, c) in cs.iter().enumerate() {
                    cur.push(j + 1);
                    v.push(self.fill(c, q, i, cur));
                    cur.pop();
                }
                Rhs::Out(d.clone(), v)
            }
            _ => {
                let s = self.state(q, cur);
                Rhs::Call(s, vec![Rhs::X(i)])
            }
        }
    }

    fn expand(&mut self, t: &Rhs) -> Rhs {
        match t {
            Rhs::Out(d, cs) => Rhs::Out(d.clone(), cs.iter().map(|c| self.expand(c)).collect()),
            Rhs::Call(q, args) => {
                let Some(Rhs::X(i)) = args.first() else {
                    return t.clone();
                };
                let p = self.out[q].clone();
                self.fill(&p, q, *i, &mut Vec::new())
            }
            other => other.clone(),
        }
    }
}

fn subtree(t: &Rhs, w: &[usize]) -> Rhs {
    match (w.split_first(), t) {
        (None, _) => t.clone(),
        (Some((i, rest)), Rhs::Out(_, cs)) => subtree(&cs[i - 1], rest),
        _ => unreachable!("common prefix positions exist in every expansion"),
    }
}

fn sorted_alphabet(a: &RankedAlphabet) -> RankedAlphabet {
    let mut v: Vec<(&Sym, usize)> = a.iter().collect();
    v.sort();
    RankedAlphabet::from_pairs(v.into_iter().map(|(s, r)| (&**s, r))).expect("distinct")
}

/// Pushes every output symbol shared by all rules of a state up into its callers.
pub fn make_earliest(m: &Mtt) -> Result<AxiomDtop> {
    require_total_dtop(m)?;
    let out = common_prefixes(m);
    let input = sorted_alphabet(&m.input);
    let mut e = Earliest {
        out: &out,
        ids: HashMap::new(),
        queue: VecDeque::new(),
        taken: m.output.iter().map(|(s, _)| s.clone()).collect(),
    };
    let axiom = e.expand(&Rhs::Call(m.initial.clone(), vec![Rhs::X(0)]));
    let mut states = Vec::new();
    let mut rules = Vec::new();
    while let Some((q, w)) = e.queue.pop_front() {
        states.push(e.ids[&(q.clone(), w.clone())].clone());
        let mut row = Vec::new();
        for (s, _) in input.iter() {
            let expanded = e.expand(m.rule(&q, s, &[]).expect("total"));
            row.push(subtree(&expanded, &w));
        }
        rules.push(row);
    }
    Ok(AxiomDtop {
        input,
        output: m.output.clone(),
        axiom,
        states,
        rules,
    })
}

fn abstract_calls(t: &Rhs, f: &impl Fn(&Sym) -> String) -> Rhs {
    match t {
        Rhs::Out(d, cs) => Rhs::Out(d.clone(), cs.iter().map(|c| abstract_calls(c, f)).collect()),
        Rhs::Call(q, args) => Rhs::Call(sym(&f(q)), args.clone()),
        other => other.clone(),
    }
}

fn bfs_order(ax: &AxiomDtop) -> Vec<usize> {
    let index = ax.state_index();
    let mut seen = vec![false; ax.states.len()];
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    let visit = |t: &Rhs, seen: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
        t.for_each_call(&mut |q, _| {
            let i = index[q];
            if !seen[i] {
                seen[i] = true;
                queue.push_back(i);
            }
        });
    };
    visit(&ax.axiom, &mut seen, &mut queue);
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for r in &ax.rules[i] {
            visit(r, &mut seen, &mut queue);
        }
    }
    order
}

/// Merges states with equal translations. The input must be earliest; blocks are
/// represented by their first state in breadth-first order from the axiom.
pub fn merge_equivalent_states(ax: &AxiomDtop) -> Result<AxiomDtop> {
    if !ax.is_earliest() {
        return Err(Error::Invalid("transducer is not earliest".into()));
    }
    let index = ax.state_index();
    let n = ax.states.len();
    let mut block: Vec<usize> = vec![0; n];
    let mut count = 0usize;
    let mut first = true;
    loop {
        let mut sigs: HashMap<(usize, Vec<Rhs>), usize> = HashMap::new();
        let mut next = vec![0; n];
        for q in 0..n {
            let row: Vec<Rhs> = ax.rules[q]
                .iter()
                .map(|r| {
                    abstract_calls(r, &|p| {
                        if first {
                            String::new()
                        } else {
                            block[index[p]].to_string()
                        }
                    })
                })
                .collect();
            let key = (if first { 0 } else { block[q] }, row);
            let len = sigs.len();
            next[q] = *sigs.entry(key).or_insert(len);
        }
        let new_count = sigs.len();
        block = next;
        if !first && new_count == count {
            break;
        }
        count = new_count;
        first = false;
    }
    let order = bfs_order(ax);
    let mut rep: HashMap<usize, usize> = HashMap::new();
    for &q in &order {
        rep.entry(block[q]).or_insert(q);
    }
    let rename = |p: &Sym| ax.states[rep[&block[index[p]]]].to_string();
    let kept: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&q| rep[&block[q]] == q)
        .collect();
    Ok(AxiomDtop {
        input: ax.input.clone(),
        output: ax.output.clone(),
        axiom: abstract_calls(&ax.axiom, &rename),
        states: kept.iter().map(|&q| ax.states[q].clone()).collect(),
        rules: kept
            .iter()
            .map(|&q| {
                ax.rules[q]
                    .iter()
                    .map(|r| abstract_calls(r, &rename))
                    .collect()
            })
            .collect(),
    })
}

/// Renames states `q0, q1, …` in breadth-first order from the axiom.
fn canonical_names(ax: &AxiomDtop) -> AxiomDtop {
    let order = bfs_order(ax);
    let mut prefix = "q".to_string();
    while (0..order.len()).any(|i| ax.output.contains(&format!("{prefix}{i}"))) {
        prefix.push('\'');
    }
    let mut names: HashMap<Sym, String> = HashMap::new();
    for (k, &q) in order.iter().enumerate() {
        names.insert(ax.states[q].clone(), format!("{prefix}{k}"));
    }
    let rename = |p: &Sym| names[p].clone();
    AxiomDtop {
        input: ax.input.clone(),
        output: sorted_alphabet(&ax.output),
        axiom: abstract_calls(&ax.axiom, &rename),
        states: order.iter().map(|&q| sym(&names[&ax.states[q]])).collect(),
        rules: order
            .iter()
            .map(|&q| {
                ax.rules[q]
                    .iter()
                    .map(|r| abstract_calls(r, &rename))
                    .collect()
            })
            .collect(),
    }
}

/// The canonical transducer: earliest, merged, renamed.
pub fn canonical(m: &Mtt) -> Result<AxiomDtop> {
    Ok(canonical_names(&merge_equivalent_states(&make_earliest(
        m,
    )?)?))
}

/// Equivalence of total DTOPs by comparing canonical forms; a witness comes from the
/// difference automaton and is checked by evaluation.
pub fn equiv_total_dtop(m1: &Mtt, m2: &Mtt) -> Result<TotalEquiv> {
    if !m1.input.same_as(&m2.input) {
        return Err(Error::AlphabetMismatch(
            "the transducers read different inputs".into(),
        ));
    }
    let c1 = canonical(m1)?;
    let c2 = canonical(m2)?;
    // Output alphabets may list unused symbols; only the translation matters.
    if (&c1.axiom, &c1.states, &c1.rules) == (&c2.axiom, &c2.states, &c2.rules) {
        return Ok(TotalEquiv::Equal);
    }
    match crate::dtop_equiv::decide_equiv_dtop(m1, m2)? {
        crate::dtop_equiv::Verdict::OutputMismatch(w)
        | crate::dtop_equiv::Verdict::DomainMismatch(w) => Ok(TotalEquiv::NotEqual(w)),
        crate::dtop_equiv::Verdict::Equivalent => Err(Error::Internal(
            "canonical forms differ but the difference automaton found no witness".into(),
        )),
    }
}
