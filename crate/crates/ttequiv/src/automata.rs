//! Deterministic bottom-up tree automata and the top-down string automata used for monadic trees.

use std::collections::{BTreeSet, HashMap};
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::trees::{RankedAlphabet, Sym, Tree};

/// Partial deterministic bottom-up tree automaton. States are indices into `states`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dbta {
    pub alphabet: RankedAlphabet,
    pub states: Vec<String>,
    pub transitions: HashMap<(Sym, Vec<usize>), usize>,
    pub finals: BTreeSet<usize>,
}

/// Outcome of an emptiness check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Emptiness {
    Empty,
    Witness(Tree),
}

/// Outcome of a language comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LangEquiv {
    Equal,
    Separator(Tree),
}

impl Dbta {
    pub fn new(alphabet: RankedAlphabet) -> Self {
        Dbta {
            alphabet,
            states: Vec::new(),
            transitions: HashMap::new(),
            finals: BTreeSet::new(),
        }
    }

    pub fn add_state(&mut self, name: impl Into<String>) -> usize {
        self.states.push(name.into());
        self.states.len() - 1
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn add_transition(
        &mut self,
        symbol: &str,
        children: Vec<usize>,
        target: usize,
    ) -> Result<()> {
        let rank = self
            .alphabet
            .rank(symbol)
            .ok_or_else(|| Error::UnknownSymbol {
                name: symbol.to_string(),
                pos: 0,
            })?;
        if rank != children.len() {
            return Err(Error::Arity {
                name: symbol.to_string(),
                expected: rank,
                found: children.len(),
                pos: 0,
            });
        }
        let n = self.states.len();
        if target >= n || children.iter().any(|&c| c >= n) {
            return Err(Error::Invalid(
                "transition mentions an undeclared state".into(),
            ));
        }
        let key = (self.symbol(symbol), children);
        match self.transitions.get(&key) {
            Some(&t) if t != target => Err(Error::Nondeterministic(format!(
                "two transitions for `{symbol}` on the same states"
            ))),
            _ => {
                self.transitions.insert(key, target);
                Ok(())
            }
        }
    }

    fn symbol(&self, name: &str) -> Sym {
        self.alphabet
            .iter()
            .find(|(s, _)| &***s == name)
            .map(|(s, _)| s.clone())
            .unwrap_or_else(|| crate::trees::sym(name))
    }

    pub fn step(&self, symbol: &Sym, children: &[usize]) -> Option<usize> {
        self.transitions
            .get(&(symbol.clone(), children.to_vec()))
            .copied()
    }

    /// True when every symbol has a transition on every state tuple.
    pub fn is_complete(&self) -> bool {
        let n = self.states.len();
        self.alphabet
            .iter()
            .all(|(s, k)| tuples(n, k).all(|t| self.transitions.contains_key(&(s.clone(), t))))
    }

    /// The automaton accepting every tree over `alphabet` with a single state.
    pub fn universal(alphabet: RankedAlphabet) -> Self {
        let mut a = Dbta::new(alphabet.clone());
        let q = a.add_state("all");
        for (s, k) in alphabet.iter() {
            a.transitions.insert((s.clone(), vec![q; k]), q);
        }
        a.finals.insert(q);
        a
    }

    pub fn accepts(&self, t: &Tree) -> Result<bool> {
        Ok(run_dbta(self, t)?.is_some_and(|q| self.finals.contains(&q)))
    }
}

/// Runs `a` on `t`; `Ok(None)` means the run is stuck on a missing transition.
pub fn run_dbta(a: &Dbta, t: &Tree) -> Result<Option<usize>> {
    match a.alphabet.rank(&t.label) {
        None => {
            return Err(Error::AlphabetMismatch(format!(
                "symbol `{}` is not in the automaton's alphabet",
                t.label
            )))
        }
        Some(k) if k != t.children.len() => {
            return Err(Error::AlphabetMismatch(format!(
                "symbol `{}` used with {} children",
                t.label,
                t.children.len()
            )))
        }
        _ => {}
    }
    let mut qs = Vec::with_capacity(t.children.len());
    for c in &t.children {
        match run_dbta(a, c)? {
            Some(q) => qs.push(q),
            None => return Ok(None),
        }
    }
    Ok(a.step(&t.label, &qs))
}

/// All `k`-tuples over `0..n` in lexicographic order.
pub(crate) fn tuples(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut cur: Option<Vec<usize>> = if k == 0 || n > 0 {
        Some(vec![0; k])
    } else {
        None
    };
    std::iter::from_fn(move || {
        let out = cur.clone()?;
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                cur = None;
                break;
            }
            i -= 1;
            next[i] += 1;
            if next[i] < n {
                cur = Some(next);
                break;
            }
            next[i] = 0;
        }
        Some(out)
    })
}

/// Result of a lazy bottom-up exploration: states in discovery order, the transition
/// table over their indices, and for each state the transition that first produced it.
pub(crate) struct Exploration<S> {
    pub states: Vec<S>,
    pub transitions: HashMap<(Sym, Vec<usize>), usize>,
    pub witness: Vec<(Sym, Vec<usize>)>,
}

impl<S> Exploration<S> {
    /// A minimal-height tree reaching state `i`.
    pub fn witness_tree(&self, i: usize) -> Tree {
        let (s, cs) = &self.witness[i];
        Tree::with_sym(
            s.clone(),
            cs.iter().map(|&c| self.witness_tree(c)).collect(),
        )
    }
}

/// Discovers every state reachable bottom-up under `step`, breadth-first by height.
/// Within a round symbols follow alphabet order and child tuples lexicographic order,
/// so witnesses are minimal in height and deterministic.
pub(crate) fn explore<S, F>(
    alphabet: &RankedAlphabet,
    limit: usize,
    mut step: F,
) -> Result<Exploration<S>>
where
    S: Clone + Eq + Hash,
    F: FnMut(&Sym, &[&S]) -> Result<Option<S>>,
{
    let mut states: Vec<S> = Vec::new();
    let mut index: HashMap<S, usize> = HashMap::new();
    let mut transitions = HashMap::new();
    let mut witness = Vec::new();
    let symbols: Vec<(Sym, usize)> = alphabet.iter().map(|(s, k)| (s.clone(), k)).collect();
    let mut lo = 0usize;
    let mut first = true;
    loop {
        let hi = states.len();
        if !first && lo == hi {
            break;
        }
        let mut found = Vec::new();
        for (s, k) in &symbols {
            if *k == 0 && !first {
                continue;
            }
            for tuple in tuples(hi, *k) {
                if !first && tuple.iter().all(|&c| c < lo) {
                    continue;
                }
                let args: Vec<&S> = tuple.iter().map(|&c| &states[c]).collect();
                if let Some(target) = step(s, &args)? {
                    found.push((s.clone(), tuple, target));
                }
            }
        }
        for (s, tuple, target) in found {
            let id = match index.get(&target) {
                Some(&id) => id,
                None => {
                    if states.len() >= limit {
                        return Err(Error::Budget(format!("more than {limit} automaton states")));
                    }
                    let id = states.len();
                    index.insert(target.clone(), id);
                    states.push(target);
                    witness.push((s.clone(), tuple.clone()));
                    id
                }
            };
            transitions.insert((s, tuple), id);
        }
        lo = hi;
        first = false;
    }
    Ok(Exploration {
        states,
        transitions,
        witness,
    })
}

/// Default cap on lazily built automata.
pub const DEFAULT_STATE_LIMIT: usize = 200_000;

fn require_same_alphabet(a: &Dbta, b: &Dbta) -> Result<()> {
    if a.alphabet.same_as(&b.alphabet) {
        Ok(())
    } else {
        Err(Error::AlphabetMismatch(format!(
            "{{{}}} vs {{{}}}",
            a.alphabet, b.alphabet
        )))
    }
}

/// Reachable product automaton accepting `L(a) ∩ L(b)`.
pub fn intersect(a: &Dbta, b: &Dbta) -> Result<Dbta> {
    require_same_alphabet(a, b)?;
    let ex = explore(
        &a.alphabet,
        DEFAULT_STATE_LIMIT,
        |s, cs: &[&(usize, usize)]| {
            let l: Vec<usize> = cs.iter().map(|c| c.0).collect();
            let r: Vec<usize> = cs.iter().map(|c| c.1).collect();
            Ok(a.step(s, &l).zip(b.step(s, &r)))
        },
    )?;
    let mut out = Dbta::new(a.alphabet.clone());
    for &(p, q) in &ex.states {
        let i = out.add_state(format!("({},{})", a.states[p], b.states[q]));
        if a.finals.contains(&p) && b.finals.contains(&q) {
            out.finals.insert(i);
        }
    }
    out.transitions = ex.transitions;
    Ok(out)
}

/// Completes `a` with a sink state (if needed) without changing its language.
pub fn complete(a: &Dbta) -> Dbta {
    if a.is_complete() {
        return a.clone();
    }
    let mut out = a.clone();
    let sink = out.add_state("sink");
    let n = out.states.len();
    for (s, k) in a.alphabet.iter() {
        for t in tuples(n, k) {
            out.transitions.entry((s.clone(), t)).or_insert(sink);
        }
    }
    out
}

/// Automaton for `T_Σ \ L(a)`: completes with a sink, then swaps finals.
pub fn complement(a: &Dbta) -> Dbta {
    let mut out = complete(a);
    out.finals = (0..out.states.len())
        .filter(|q| !out.finals.contains(q))
        .collect();
    out
}

/// Emptiness with a minimal-height witness (leftmost-smallest on ties).
pub fn is_empty(a: &Dbta) -> Emptiness {
    let ex = explore(&a.alphabet, usize::MAX, |s, cs: &[&usize]| {
        let qs: Vec<usize> = cs.iter().map(|&&c| c).collect();
        Ok(a.step(s, &qs))
    })
    .expect("exploration of a finite automaton cannot exceed an unbounded limit");
    best_witness(&ex, |q| a.finals.contains(q))
}

fn best_witness<S>(ex: &Exploration<S>, accept: impl Fn(&S) -> bool) -> Emptiness {
    // Discovery order is by height first, so the first accepting state is minimal.
    match ex.states.iter().position(accept) {
        Some(i) => Emptiness::Witness(ex.witness_tree(i)),
        None => Emptiness::Empty,
    }
}

/// Decides `L(a) = L(b)`; otherwise returns a minimal tree in the symmetric difference.
pub fn equiv_dbta(a: &Dbta, b: &Dbta) -> Result<LangEquiv> {
    require_same_alphabet(a, b)?;
    let ex = explore(
        &a.alphabet,
        DEFAULT_STATE_LIMIT,
        |s, cs: &[&(Option<usize>, Option<usize>)]| {
            let l: Option<Vec<usize>> = cs.iter().map(|c| c.0).collect();
            let r: Option<Vec<usize>> = cs.iter().map(|c| c.1).collect();
            let p = l.and_then(|l| a.step(s, &l));
            let q = r.and_then(|r| b.step(s, &r));
            Ok(if p.is_none() && q.is_none() {
                None
            } else {
                Some((p, q))
            })
        },
    )?;
    let fin = |x: &Option<usize>, m: &Dbta| x.is_some_and(|x| m.finals.contains(&x));
    Ok(match best_witness(&ex, |(p, q)| fin(p, a) != fin(q, b)) {
        Emptiness::Empty => LangEquiv::Equal,
        Emptiness::Witness(t) => LangEquiv::Separator(t),
    })
}

/// Deterministic string automaton reading the unary symbols of a monadic tree from the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    pub letters: Vec<Sym>,
    pub states: Vec<String>,
    pub initial: usize,
    /// `delta[state][letter]`
    pub delta: Vec<Vec<Option<usize>>>,
    pub finals: BTreeSet<usize>,
}

impl Dfa {
    pub fn is_complete(&self) -> bool {
        self.delta.iter().all(|row| row.iter().all(Option::is_some))
    }

    pub fn letter_index(&self, s: &str) -> Option<usize> {
        self.letters.iter().position(|l| &**l == s)
    }

    pub fn run(&self, word: &[usize]) -> Option<usize> {
        word.iter().try_fold(self.initial, |q, &a| self.delta[q][a])
    }

    pub fn accepts(&self, word: &[usize]) -> bool {
        self.run(word).is_some_and(|q| self.finals.contains(&q))
    }

    /// States from which some final state is reachable.
    pub fn live_states(&self) -> Vec<bool> {
        let n = self.states.len();
        let mut live: Vec<bool> = (0..n).map(|q| self.finals.contains(&q)).collect();
        loop {
            let mut changed = false;
            for q in 0..n {
                if !live[q] && self.delta[q].iter().flatten().any(|&r| live[r]) {
                    live[q] = true;
                    changed = true;
                }
            }
            if !changed {
                return live;
            }
        }
    }
}

/// Converts a bottom-up automaton over a monadic alphabet into a complete top-down string
/// automaton over its rank-1 symbols: the word `a1…an` is accepted iff `a1(…an(leaf)…)` is.
pub fn monadic_to_dfa(a: &Dbta, leaf: &str) -> Result<Dfa> {
    if !a.alphabet.is_monadic() {
        return Err(Error::NotMonadic(format!("alphabet {{{}}}", a.alphabet)));
    }
    if a.alphabet.rank(leaf) != Some(0) {
        return Err(Error::Invalid(format!(
            "`{leaf}` is not a leaf symbol of the automaton"
        )));
    }
    let letters: Vec<Sym> = a.alphabet.symbols_of_rank(1).cloned().collect();
    let leaf_state = a.step(&crate::trees::sym(leaf), &[]);
    // preimage[letter][q] = states p with δ_letter(p) = q
    let mut pre: Vec<HashMap<usize, Vec<usize>>> = vec![HashMap::new(); letters.len()];
    for ((s, cs), &t) in &a.transitions {
        if let Some(li) = letters.iter().position(|l| l == s) {
            pre[li].entry(t).or_default().push(cs[0]);
        }
    }
    let start: BTreeSet<usize> = a.finals.clone();
    let mut sets = vec![start.clone()];
    let mut index: HashMap<BTreeSet<usize>, usize> = HashMap::from([(start, 0)]);
    let mut delta: Vec<Vec<Option<usize>>> = Vec::new();
    let mut i = 0;
    while i < sets.len() {
        let mut row = Vec::with_capacity(letters.len());
        for p in &pre {
            let next: BTreeSet<usize> = sets[i]
                .iter()
                .filter_map(|q| p.get(q))
                .flatten()
                .copied()
                .collect();
            let id = *index.entry(next.clone()).or_insert_with(|| {
                sets.push(next);
                sets.len() - 1
            });
            row.push(Some(id));
        }
        delta.push(row);
        i += 1;
    }
    let finals = sets
        .iter()
        .enumerate()
        .filter(|(_, s)| leaf_state.is_some_and(|q| s.contains(&q)))
        .map(|(i, _)| i)
        .collect();
    let states = sets
        .iter()
        .map(|s| {
            let names: Vec<&str> = s.iter().map(|&q| a.states[q].as_str()).collect();
            format!("{{{}}}", names.join(","))
        })
        .collect();
    Ok(Dfa {
        letters,
        states,
        initial: 0,
        delta,
        finals,
    })
}
