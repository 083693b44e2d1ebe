//! Equivalence of DTOPs with regular look-ahead via a difference automaton, the balance
//! bound, and the intersection-emptiness instance generator.
//!
//! After the look-ahead is moved into the input alphabet and the domains are compared,
//! a top-down exploration tracks sets of pending output obligations. An obligation pairs
//! a partial output of one transducer with a partial output of the other on the same
//! input node; at least one side is a single state call. Obligations between different
//! children can only hold when the calls involved are constant on their input class, in
//! which case the constants are inlined. Every new obligation is tested on the smallest
//! tree of its class, which also bounds the height of the pending output difference.

use std::collections::{BTreeSet, HashMap};

use crate::automata::{equiv_dbta, explore, intersect, Dbta, LangEquiv, DEFAULT_STATE_LIMIT};
use crate::domain::domain_automaton;
use crate::error::{Error, Result};
use crate::lookahead::eliminate_lookahead_pair;
use crate::mtt::{eval, Mtt, Rhs, Rule};
use crate::par::{self, Exec};
use crate::trees::{sym, RankedAlphabet, Sym, Tree};

/// Outcome of [`decide_equiv_dtop`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Equivalent,
    /// An input in exactly one of the two domains.
    DomainMismatch(Tree),
    /// An input in both domains with different outputs.
    OutputMismatch(Tree),
}

/// Exploration limits and execution mode.
#[derive(Debug, Clone, Copy)]
pub struct DecideOptions {
    pub max_states: usize,
    pub exec: Exec,
}

impl Default for DecideOptions {
    fn default() -> Self {
        DecideOptions {
            max_states: DEFAULT_STATE_LIMIT,
            exec: Exec::default(),
        }
    }
}

/// Bound on the height difference of partial outputs of equivalent transducers: the
/// largest leaf-rule height when both are total, `2^(|Q1|+|Q2|) · h` otherwise.
pub fn balance_bound(m1: &Mtt, m2: &Mtt) -> usize {
    if m1.is_total() && m2.is_total() {
        [m1, m2]
            .iter()
            .flat_map(|m| {
                m.rules()
                    .iter()
                    .filter(|r| m.input.rank(&r.symbol) == Some(0))
                    .map(|r| r.rhs.height())
            })
            .max()
            .unwrap_or(0)
    } else {
        balance_bound_general(m1, m2)
    }
}

/// `2^(|Q1|+|Q2|) · h` with `h` the largest right-hand side height of either transducer.
pub fn balance_bound_general(m1: &Mtt, m2: &Mtt) -> usize {
    let n = (m1.states.len() + m2.states.len()) as u32;
    let d = 2usize.checked_pow(n).unwrap_or(usize::MAX);
    let h = m1.max_rhs_height().max(m2.max_rhs_height());
    d.saturating_mul(h)
}

fn require_dtop(m: &Mtt) -> Result<()> {
    match m.states.iter().find(|(_, r)| *r != 1) {
        Some((q, _)) => Err(Error::NotDtop(q.to_string())),
        None => Ok(()),
    }
}

pub fn decide_equiv_dtop(m1: &Mtt, m2: &Mtt) -> Result<Verdict> {
    decide_equiv_dtop_with(m1, m2, DecideOptions::default())
}

pub fn decide_equiv_dtop_with(m1: &Mtt, m2: &Mtt, opts: DecideOptions) -> Result<Verdict> {
    require_dtop(m1)?;
    require_dtop(m2)?;
    if !m1.input.same_as(&m2.input) {
        return Err(Error::AlphabetMismatch(
            "the transducers read different inputs".into(),
        ));
    }
    let el = eliminate_lookahead_pair(m1, m2)?;
    let has_la = m1.lookahead.is_some() || m2.lookahead.is_some();
    let mut d1 = domain_automaton(&el.n1)?;
    let mut d2 = domain_automaton(&el.n2)?;
    if has_la {
        d1 = intersect(&d1, &el.e)?;
        d2 = intersect(&d2, &el.e)?;
    }
    if let LangEquiv::Separator(t) = equiv_dbta(&d1, &d2)? {
        return Ok(Verdict::DomainMismatch(el.erase(&t)));
    }
    let e = if has_la { Some(&el.e) } else { None };
    match Difference::new(&el.n1, &el.n2, e, opts)?.search()? {
        None => Ok(Verdict::Equivalent),
        Some(w) => Ok(Verdict::OutputMismatch(el.erase(&w))),
    }
}

/// Input class: which states are defined, plus the correct-annotation state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Class {
    def1: Vec<bool>,
    def2: Vec<bool>,
    e: Option<usize>,
}

struct Side<'a> {
    m: &'a Mtt,
    index: HashMap<Sym, usize>,
    states: Vec<Sym>,
    /// `min_out[d][q]`: output of `q` on the smallest tree of class `d`.
    min_out: Vec<Vec<Option<Tree>>>,
    /// Whether `q` is constant on class `d`.
    constant: Vec<Vec<bool>>,
    /// Two trees of class `d` on which `q` differs, when not constant.
    pairs: Vec<Vec<Option<(Tree, Tree)>>>,
}

impl<'a> Side<'a> {
    fn new(m: &'a Mtt) -> Self {
        let states: Vec<Sym> = m.states.iter().map(|(q, _)| q.clone()).collect();
        let index = states
            .iter()
            .enumerate()
            .map(|(i, q)| (q.clone(), i))
            .collect();
        Side {
            m,
            index,
            states,
            min_out: Vec::new(),
            constant: Vec::new(),
            pairs: Vec::new(),
        }
    }

    fn rhs(&self, q: &Sym, s: &Sym) -> &Rhs {
        self.m.rule(q, s, &[]).expect("defined state has a rule")
    }

    fn defined(&self, s: &Sym, children: &[&Class], first: bool) -> Vec<bool> {
        self.states
            .iter()
            .map(|q| match self.m.rule(q, s, &[]) {
                None => false,
                Some(r) => r.calls().iter().all(|(p, i)| {
                    let c = children[i - 1];
                    let def = if first { &c.def1 } else { &c.def2 };
                    def[self.index[p]]
                }),
            })
            .collect()
    }
}

/// Parent state, symbol, child classes and child position of a search node.
type Link = (usize, Sym, Vec<usize>, usize);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct DiffState {
    items: Vec<(Rhs, Rhs)>,
    class: usize,
}

enum Step {
    Children(Vec<BTreeSet<(Rhs, Rhs)>>),
    /// Candidate subtrees for the current node, one of which violates an obligation.
    Fail(Vec<Tree>),
}

struct Difference<'a> {
    classes: Vec<Class>,
    min_tree: Vec<Tree>,
    /// Transitions into each class.
    into: Vec<Vec<(Sym, Vec<usize>)>>,
    finals: Vec<usize>,
    s1: Side<'a>,
    s2: Side<'a>,
    opts: DecideOptions,
}

fn inst(t: &Rhs, outs: &[Option<Tree>], index: &HashMap<Sym, usize>) -> Option<Tree> {
    match t {
        Rhs::Out(d, cs) => Some(Tree::with_sym(
            d.clone(),
            cs.iter()
                .map(|c| inst(c, outs, index))
                .collect::<Option<_>>()?,
        )),
        Rhs::Call(q, _) => outs[index[q]].clone(),
        _ => None,
    }
}

fn tree_to_rhs(t: &Tree) -> Rhs {
    Rhs::Out(
        t.label.clone(),
        t.children.iter().map(tree_to_rhs).collect(),
    )
}

fn at_node(t: &Rhs) -> Rhs {
    match t {
        Rhs::Out(d, cs) => Rhs::Out(d.clone(), cs.iter().map(at_node).collect()),
        Rhs::Call(q, _) => Rhs::Call(q.clone(), vec![Rhs::X(0)]),
        other => other.clone(),
    }
}

fn call_child(t: &Rhs) -> Option<usize> {
    match t {
        Rhs::Call(_, args) => match args.first() {
            Some(Rhs::X(i)) => Some(*i),
            _ => None,
        },
        _ => None,
    }
}

impl<'a> Difference<'a> {
    fn new(n1: &'a Mtt, n2: &'a Mtt, e: Option<&Dbta>, opts: DecideOptions) -> Result<Self> {
        let mut s1 = Side::new(n1);
        let mut s2 = Side::new(n2);
        let ex = explore(&n1.input, opts.max_states, |s, cs: &[&Class]| {
            let es = match e {
                None => None,
                Some(a) => {
                    let v: Vec<usize> = cs.iter().map(|c| c.e.expect("annotated")).collect();
                    match a.step(s, &v) {
                        Some(x) => Some(x),
                        None => return Ok(None),
                    }
                }
            };
            Ok(Some(Class {
                def1: s1.defined(s, cs, true),
                def2: s2.defined(s, cs, false),
                e: es,
            }))
        })?;
        let classes = ex.states.clone();
        let min_tree: Vec<Tree> = (0..classes.len()).map(|i| ex.witness_tree(i)).collect();
        let mut into = vec![Vec::new(); classes.len()];
        let mut trans: Vec<_> = ex.transitions.iter().collect();
        trans.sort_by_key(|((s, cs), _)| (n1.input.index_of(s), (*cs).clone()));
        for ((s, cs), &d) in trans {
            into[d].push((s.clone(), cs.clone()));
        }
        let i1 = s1.index[&n1.initial];
        let i2 = s2.index[&n2.initial];
        let finals = (0..classes.len())
            .filter(|&d| classes[d].def1[i1] && classes[d].def2[i2])
            .collect();
        for (side, first) in [(&mut s1, true), (&mut s2, false)] {
            side.min_out = (0..classes.len())
                .map(|d| {
                    let def = if first {
                        &classes[d].def1
                    } else {
                        &classes[d].def2
                    };
                    side.states
                        .iter()
                        .enumerate()
                        .map(|(qi, q)| {
                            if !def[qi] {
                                return Ok(None);
                            }
                            let mut tmp = side.m.clone();
                            tmp.initial = q.clone();
                            eval(&tmp, &min_tree[d])
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
        }
        let mut diff = Difference {
            classes,
            min_tree,
            into,
            finals,
            s1,
            s2,
            opts,
        };
        diff.constants(true);
        diff.constants(false);
        Ok(diff)
    }

    fn side(&self, first: bool) -> &Side<'a> {
        if first {
            &self.s1
        } else {
            &self.s2
        }
    }

    fn def(&self, d: usize, first: bool) -> &Vec<bool> {
        if first {
            &self.classes[d].def1
        } else {
            &self.classes[d].def2
        }
    }

    fn build(&self, s: &Sym, ds: &[usize], replace: Option<(usize, &Tree)>) -> Tree {
        Tree::with_sym(
            s.clone(),
            ds.iter()
                .enumerate()
                .map(|(i, &d)| match replace {
                    Some((j, t)) if j == i + 1 => t.clone(),
                    _ => self.min_tree[d].clone(),
                })
                .collect(),
        )
    }

    /// Greatest fixpoint of "state is constant on class", with a pair of distinguishing
    /// trees for every state that is not.
    fn constants(&mut self, first: bool) {
        let nq = self.side(first).states.len();
        let nd = self.classes.len();
        let mut valid: Vec<Vec<bool>> = (0..nq)
            .map(|q| (0..nd).map(|d| self.def(d, first)[q]).collect())
            .collect();
        let mut pairs: Vec<Vec<Option<(Tree, Tree)>>> = vec![vec![None; nd]; nq];
        loop {
            let mut changed = false;
            for d in 0..nd {
                for q in 0..nq {
                    if !valid[q][d] {
                        continue;
                    }
                    let side = self.side(first);
                    let cand = side.min_out[d][q].as_ref().expect("defined");
                    for (s, ds) in &self.into[d] {
                        let rhs = side.rhs(&side.states[q], s);
                        let mut bad_call = None;
                        rhs.for_each_call(&mut |p, i| {
                            if bad_call.is_none() && !valid[side.index[p]][ds[i - 1]] {
                                bad_call = Some((side.index[p], i));
                            }
                        });
                        let pair = match bad_call {
                            Some((p, i)) => {
                                let (a, b) = pairs[p][ds[i - 1]].clone().expect("earlier removal");
                                Some((
                                    self.build(s, ds, Some((i, &a))),
                                    self.build(s, ds, Some((i, &b))),
                                ))
                            }
                            None => {
                                let outs: Vec<Vec<Option<Tree>>> =
                                    ds.iter().map(|&c| side.min_out[c].clone()).collect();
                                let here = inst_children(rhs, &outs, &side.index);
                                (here.as_ref() != Some(cand))
                                    .then(|| (self.min_tree[d].clone(), self.build(s, ds, None)))
                            }
                        };
                        if let Some(p) = pair {
                            valid[q][d] = false;
                            pairs[q][d] = Some(p);
                            changed = true;
                            break;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let side = if first { &mut self.s1 } else { &mut self.s2 };
        side.constant = valid;
        side.pairs = pairs;
    }

    fn constant_of(&self, first: bool, q: &Sym, d: usize) -> Option<Tree> {
        let side = self.side(first);
        let qi = side.index[q];
        side.constant[qi][d].then(|| side.min_out[d][qi].clone().expect("defined"))
    }

    /// Inlines constants for calls off child `keep`; on failure returns the offending call.
    fn inline_others(
        &self,
        t: &Rhs,
        keep: usize,
        ds: &[usize],
        first: bool,
    ) -> std::result::Result<Rhs, (Sym, usize)> {
        match t {
            Rhs::Out(d, cs) => Ok(Rhs::Out(
                d.clone(),
                cs.iter()
                    .map(|c| self.inline_others(c, keep, ds, first))
                    .collect::<std::result::Result<_, _>>()?,
            )),
            Rhs::Call(q, _) => {
                let i = call_child(t).expect("call on a child");
                if i == keep {
                    Ok(at_node(t))
                } else {
                    match self.constant_of(first, q, ds[i - 1]) {
                        Some(c) => Ok(tree_to_rhs(&c)),
                        None => Err((q.clone(), i)),
                    }
                }
            }
            other => Ok(other.clone()),
        }
    }

    fn expand(&self, t: &Rhs, s: &Sym, first: bool) -> Rhs {
        match t {
            Rhs::Out(d, cs) => Rhs::Out(
                d.clone(),
                cs.iter().map(|c| self.expand(c, s, first)).collect(),
            ),
            Rhs::Call(q, _) => self.side(first).rhs(q, s).clone(),
            other => other.clone(),
        }
    }

    fn nonconst_fail(&self, s: &Sym, ds: &[usize], q: &Sym, i: usize, first: bool) -> Vec<Tree> {
        let side = self.side(first);
        let (a, b) = side.pairs[side.index[q]][ds[i - 1]]
            .clone()
            .expect("non-constant has a pair");
        vec![
            self.build(s, ds, Some((i, &a))),
            self.build(s, ds, Some((i, &b))),
        ]
    }

    fn align(
        &self,
        l: &Rhs,
        r: &Rhs,
        s: &Sym,
        ds: &[usize],
        out: &mut [BTreeSet<(Rhs, Rhs)>],
    ) -> std::result::Result<(), Vec<Tree>> {
        match (l, r) {
            (Rhs::Out(a, ls), Rhs::Out(b, rs)) => {
                if a != b || ls.len() != rs.len() {
                    return Err(vec![self.build(s, ds, None)]);
                }
                for (x, y) in ls.iter().zip(rs) {
                    self.align(x, y, s, ds, out)?;
                }
                Ok(())
            }
            (Rhs::Call(..), _) => {
                let i = call_child(l).expect("call on a child");
                let r2 = self
                    .inline_others(r, i, ds, false)
                    .map_err(|(q, j)| self.nonconst_fail(s, ds, &q, j, false))?;
                out[i - 1].insert((at_node(l), r2));
                Ok(())
            }
            (_, Rhs::Call(..)) => {
                let j = call_child(r).expect("call on a child");
                let l2 = self
                    .inline_others(l, j, ds, true)
                    .map_err(|(q, i)| self.nonconst_fail(s, ds, &q, i, true))?;
                out[j - 1].insert((l2, at_node(r)));
                Ok(())
            }
            _ => Err(vec![self.build(s, ds, None)]),
        }
    }

    /// All obligations hold on the smallest tree of the class.
    fn check(&self, items: &[(Rhs, Rhs)], d: usize) -> bool {
        items.iter().all(|(l, r)| {
            let a = inst(l, &self.s1.min_out[d], &self.s1.index);
            let b = inst(r, &self.s2.min_out[d], &self.s2.index);
            a.is_some() && a == b
        })
    }

    fn successors(&self, st: &DiffState) -> Vec<(Sym, Vec<usize>, Step)> {
        let mut v = Vec::new();
        for (s, ds) in &self.into[st.class] {
            let mut out = vec![BTreeSet::new(); ds.len()];
            let mut fail = None;
            for (l, r) in &st.items {
                let l2 = self.expand(l, s, true);
                let r2 = self.expand(r, s, false);
                if let Err(c) = self.align(&l2, &r2, s, ds, &mut out) {
                    fail = Some(c);
                    break;
                }
            }
            match fail {
                Some(c) => {
                    v.push((s.clone(), ds.clone(), Step::Fail(c)));
                    return v;
                }
                None => v.push((s.clone(), ds.clone(), Step::Children(out))),
            }
        }
        v
    }

    /// Breadth-first search for a violated obligation; returns a verified witness.
    fn search(&self) -> Result<Option<Tree>> {
        let mut states: Vec<DiffState> = Vec::new();
        let mut index: HashMap<DiffState, usize> = HashMap::new();
        let mut parent: Vec<Option<Link>> = Vec::new();
        let root_item = (
            Rhs::Call(self.s1.m.initial.clone(), vec![Rhs::X(0)]),
            Rhs::Call(self.s2.m.initial.clone(), vec![Rhs::X(0)]),
        );
        let mut frontier = Vec::new();
        for &d in &self.finals {
            let st = DiffState {
                items: vec![root_item.clone()],
                class: d,
            };
            if !self.check(&st.items, d) {
                return self
                    .witness(&parent, None, vec![self.min_tree[d].clone()])
                    .map(Some);
            }
            index.insert(st.clone(), states.len());
            states.push(st);
            parent.push(None);
            frontier.push(states.len() - 1);
        }
        while !frontier.is_empty() {
            let succ = par::map(self.opts.exec, &frontier, |&id| {
                self.successors(&states[id])
            });
            let mut next = Vec::new();
            for (&id, list) in frontier.iter().zip(succ) {
                for (s, ds, step) in list {
                    match step {
                        Step::Fail(cands) => {
                            return self.witness(&parent, Some((id, s, ds, 0)), cands).map(Some);
                        }
                        Step::Children(out) => {
                            for (i, items) in out.into_iter().enumerate() {
                                if items.is_empty() {
                                    continue;
                                }
                                let st = DiffState {
                                    items: items.into_iter().collect(),
                                    class: ds[i],
                                };
                                if index.contains_key(&st) {
                                    continue;
                                }
                                let link = Some((id, s.clone(), ds.clone(), i + 1));
                                if !self.check(&st.items, st.class) {
                                    let c = vec![self.min_tree[st.class].clone()];
                                    return self.witness(&parent, link, c).map(Some);
                                }
                                if states.len() >= self.opts.max_states {
                                    return Err(Error::Budget(format!(
                                        "difference automaton exceeds {} states",
                                        self.opts.max_states
                                    )));
                                }
                                index.insert(st.clone(), states.len());
                                states.push(st);
                                parent.push(link);
                                next.push(states.len() - 1);
                            }
                        }
                    }
                }
            }
            frontier = next;
        }
        Ok(None)
    }

    /// Plugs each candidate into the context above the failing node and keeps the first
    /// input on which both transducers are defined and differ.
    fn witness(
        &self,
        parent: &[Option<Link>],
        link: Option<Link>,
        candidates: Vec<Tree>,
    ) -> Result<Tree> {
        for c in candidates {
            let mut t = c;
            let mut cur = link.clone();
            while let Some((id, s, ds, i)) = cur {
                if i > 0 {
                    t = self.build(&s, &ds, Some((i, &t)));
                }
                cur = parent[id].clone();
            }
            let a = eval(self.s1.m, &t)?;
            let b = eval(self.s2.m, &t)?;
            if a.is_some() && b.is_some() && a != b {
                return Ok(t);
            }
        }
        Err(Error::Internal(
            "difference automaton produced no verifiable witness".into(),
        ))
    }
}

fn inst_children(t: &Rhs, outs: &[Vec<Option<Tree>>], index: &HashMap<Sym, usize>) -> Option<Tree> {
    match t {
        Rhs::Out(d, cs) => Some(Tree::with_sym(
            d.clone(),
            cs.iter()
                .map(|c| inst_children(c, outs, index))
                .collect::<Option<_>>()?,
        )),
        Rhs::Call(q, _) => {
            let i = call_child(t)?;
            outs[i - 1][index[q]].clone()
        }
        _ => None,
    }
}

fn fresh_name(base: &str, taken: &[&RankedAlphabet]) -> String {
    let mut n = base.to_string();
    while taken.iter().any(|a| a.contains(&n)) {
        n.push('\'');
    }
    n
}

/// From partial identity DTOPs `A1..An`, builds `M1` (which copies the first subtree of a
/// `σ`-rooted input into `n` checks under a fresh symbol of rank `n`, and maps the leaf `e`
/// to itself) and `M2` (defined on `e` only). They are equivalent iff the `A_i` have an
/// empty intersection.
pub fn gen_hard_instance(automata: &[Mtt]) -> Result<(Mtt, Mtt)> {
    let first = automata
        .first()
        .ok_or_else(|| Error::Invalid("at least one automaton is required".into()))?;
    let input = first.input.clone();
    for a in automata {
        require_dtop(a)?;
        if !a.input.same_as(&input) {
            return Err(Error::AlphabetMismatch(
                "automata read different alphabets".into(),
            ));
        }
    }
    let sigma = input
        .iter()
        .find(|(_, r)| *r >= 1)
        .map(|(s, r)| (s.clone(), r))
        .ok_or_else(|| Error::Invalid("the alphabet needs a symbol of rank at least 1".into()))?;
    let leaf = if input.rank("e") == Some(0) {
        sym("e")
    } else {
        input
            .symbols_of_rank(0)
            .next()
            .cloned()
            .ok_or_else(|| Error::Invalid("the alphabet needs a leaf symbol".into()))?
    };
    let n = automata.len();
    let mut output = input.clone();
    for a in automata {
        output = output.union(&a.output)?;
    }
    let delta = fresh_name("delta", &[&output]);
    output.insert(&delta, n)?;
    let mut states = RankedAlphabet::new();
    let q0 = fresh_name("q0", &[&output]);
    states.insert(&q0, 1)?;
    let mut rules = vec![Rule {
        state: sym(&q0),
        symbol: leaf.clone(),
        lookahead: Vec::new(),
        rhs: Rhs::Out(leaf.clone(), Vec::new()),
    }];
    let mut calls = Vec::new();
    for (k, a) in automata.iter().enumerate() {
        let rename = |q: &str| format!("a{}_{q}", k + 1);
        let ra = a.rename_states(rename);
        for (q, r) in ra.states.iter() {
            states.insert(q, r)?;
        }
        rules.extend(ra.rules().iter().cloned());
        calls.push(Rhs::Call(ra.initial.clone(), vec![Rhs::X(1)]));
    }
    rules.insert(
        0,
        Rule {
            state: sym(&q0),
            symbol: sigma.0.clone(),
            lookahead: Vec::new(),
            rhs: Rhs::Out(sym(&delta), calls),
        },
    );
    let m1 = Mtt::new(states, input.clone(), output.clone(), &q0, None, rules);
    let mut st2 = RankedAlphabet::new();
    let p0 = fresh_name("p0", &[&output]);
    st2.insert(&p0, 1)?;
    let m2 = Mtt::new(
        st2,
        input,
        output,
        &p0,
        None,
        vec![Rule {
            state: sym(&p0),
            symbol: leaf.clone(),
            lookahead: Vec::new(),
            rhs: Rhs::Out(leaf, Vec::new()),
        }],
    );
    Ok((m1, m2))
}
