//! Removing regular look-ahead from a pair of top-down transducers, and turning a
//! bottom-up transducer into a top-down one with look-ahead.

use std::collections::{BTreeSet, HashMap};

use crate::automata::{complete, explore, tuples, Dbta, DEFAULT_STATE_LIMIT};
use crate::error::{Error, Result};
use crate::mtt::{Butt, Mtt, Rhs, Rule};
use crate::trees::{sym, RankedAlphabet, Sym, Tree};

/// Result of [`eliminate_lookahead_pair`]: look-ahead-free transducers over an annotated
/// input alphabet, and the automaton of correctly annotated trees.
#[derive(Debug, Clone)]
pub struct LaElimination {
    pub n1: Mtt,
    pub n2: Mtt,
    /// Accepts exactly the trees whose annotations are correct runs of both look-aheads.
    pub e: Dbta,
    /// Annotated symbol to original symbol.
    pub origin: HashMap<Sym, Sym>,
    /// `(σ, p̄, q̄)` to annotated symbol.
    annotated: HashMap<(Sym, Vec<usize>, Vec<usize>), Sym>,
    la1: Option<Dbta>,
    la2: Option<Dbta>,
}

fn la_state(la: &Option<Dbta>, s: &Sym, cs: &[usize]) -> Option<usize> {
    match la {
        None => Some(0),
        Some(a) => a.step(s, cs),
    }
}

fn la_names(la: &Option<Dbta>) -> Vec<String> {
    match la {
        None => vec!["_".to_string()],
        Some(a) => {
            let distinct = a.states.iter().collect::<BTreeSet<_>>().len() == a.states.len();
            let plain = distinct
                && a.states.iter().all(|n| {
                    !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                });
            if plain {
                a.states.clone()
            } else {
                (0..a.states.len()).map(|i| i.to_string()).collect()
            }
        }
    }
}

impl LaElimination {
    /// The correct annotation of `s`, if both look-ahead runs succeed.
    pub fn annotate(&self, s: &Tree) -> Option<Tree> {
        self.annotate_run(s).map(|(t, _, _)| t)
    }

    fn annotate_run(&self, s: &Tree) -> Option<(Tree, usize, usize)> {
        let mut cs = Vec::new();
        let mut ps = Vec::new();
        let mut qs = Vec::new();
        for c in &s.children {
            let (t, p, q) = self.annotate_run(c)?;
            cs.push(t);
            ps.push(p);
            qs.push(q);
        }
        let p = la_state(&self.la1, &s.label, &ps)?;
        let q = la_state(&self.la2, &s.label, &qs)?;
        let label = if s.children.is_empty() || (self.la1.is_none() && self.la2.is_none()) {
            s.label.clone()
        } else {
            self.annotated.get(&(s.label.clone(), ps, qs))?.clone()
        };
        Some((Tree::with_sym(label, cs), p, q))
    }

    /// Erases annotations.
    pub fn erase(&self, t: &Tree) -> Tree {
        Tree::with_sym(
            self.origin
                .get(&t.label)
                .cloned()
                .unwrap_or_else(|| t.label.clone()),
            t.children.iter().map(|c| self.erase(c)).collect(),
        )
    }
}

fn require_dtop(m: &Mtt) -> Result<()> {
    match m.states.iter().find(|(_, r)| *r != 1) {
        Some((q, _)) => Err(Error::NotDtop(q.to_string())),
        None => Ok(()),
    }
}

/// Moves the look-ahead of two DTOPs into the input alphabet. Without any look-ahead the
/// transducers are returned unchanged and `e` accepts every tree. Both look-aheads are
/// completed first, so every input tree has an annotation; a transducer whose look-ahead
/// is stuck on it is undefined there.
pub fn eliminate_lookahead_pair(m1: &Mtt, m2: &Mtt) -> Result<LaElimination> {
    require_dtop(m1)?;
    require_dtop(m2)?;
    eliminate(m1, m2, true)
}

/// As [`eliminate_lookahead_pair`], for transducers whose states may take parameters.
/// The look-aheads are used as given: only trees on which both runs succeed are annotated.
pub fn eliminate_lookahead_mtt_pair(m1: &Mtt, m2: &Mtt) -> Result<LaElimination> {
    eliminate(m1, m2, false)
}

fn eliminate(m1: &Mtt, m2: &Mtt, completed: bool) -> Result<LaElimination> {
    if !m1.input.same_as(&m2.input) {
        return Err(Error::AlphabetMismatch(
            "the transducers read different inputs".into(),
        ));
    }
    let input = m1.input.clone();
    if m1.lookahead.is_none() && m2.lookahead.is_none() {
        let mut e = Dbta::universal(input.clone());
        e.finals = (0..e.states.len()).collect();
        return Ok(LaElimination {
            n1: m1.clone(),
            n2: m2.clone(),
            e,
            origin: HashMap::new(),
            annotated: HashMap::new(),
            la1: None,
            la2: None,
        });
    }
    let prepare = |la: &Option<Dbta>| {
        if completed {
            la.as_ref().map(complete)
        } else {
            la.clone()
        }
    };
    let (la1, la2) = (prepare(&m1.lookahead), prepare(&m2.lookahead));
    let reach = explore(&input, DEFAULT_STATE_LIMIT, |s, cs: &[&(usize, usize)]| {
        let ps: Vec<usize> = cs.iter().map(|c| c.0).collect();
        let qs: Vec<usize> = cs.iter().map(|c| c.1).collect();
        Ok(la_state(&la1, s, &ps).zip(la_state(&la2, s, &qs)))
    })?;
    let (n1names, n2names) = (la_names(&la1), la_names(&la2));
    let mut alphabet = RankedAlphabet::new();
    let mut origin = HashMap::new();
    let mut annotated = HashMap::new();
    let mut e_rules: Vec<(Sym, Vec<usize>, usize)> = Vec::new();
    for (s, k) in input.iter() {
        if k == 0 {
            if let Some(t) = reach.transitions.get(&(s.clone(), Vec::new())) {
                alphabet.insert(s, 0)?;
                e_rules.push((s.clone(), Vec::new(), *t));
            }
            continue;
        }
        for tuple in tuples(reach.states.len(), k) {
            let Some(&target) = reach.transitions.get(&(s.clone(), tuple.clone())) else {
                continue;
            };
            let ps: Vec<usize> = tuple.iter().map(|&i| reach.states[i].0).collect();
            let qs: Vec<usize> = tuple.iter().map(|&i| reach.states[i].1).collect();
            let mut parts = vec![s.to_string()];
            parts.extend(ps.iter().map(|&p| n1names[p].clone()));
            parts.extend(qs.iter().map(|&q| n2names[q].clone()));
            let name = sym(&format!("<{}>", parts.join(",")));
            alphabet.insert(&name, k)?;
            origin.insert(name.clone(), s.clone());
            annotated.insert((s.clone(), ps, qs), name.clone());
            e_rules.push((name, tuple, target));
        }
    }
    let mut e = Dbta::new(alphabet.clone());
    for (p, q) in &reach.states {
        e.add_state(format!("({},{})", n1names[*p], n2names[*q]));
    }
    e.finals = (0..e.states.len()).collect();
    for (s, cs, t) in e_rules {
        e.add_transition(&s, cs, t)?;
    }
    let key_of: HashMap<Sym, (Vec<usize>, Vec<usize>)> = annotated
        .iter()
        .map(|((_, ps, qs), name)| (name.clone(), (ps.clone(), qs.clone())))
        .collect();
    let strip = |m: &Mtt, first: bool| -> Mtt {
        let mut rules = Vec::new();
        for (q, _) in m.states.iter() {
            for (name, k) in alphabet.iter() {
                let (sigma, la): (Sym, Vec<usize>) = match origin.get(name) {
                    None => (name.clone(), Vec::new()),
                    Some(sigma) => {
                        let key = &key_of[name];
                        (
                            sigma.clone(),
                            if first { key.0.clone() } else { key.1.clone() },
                        )
                    }
                };
                let la = if m.lookahead.is_some() && k > 0 {
                    la
                } else {
                    Vec::new()
                };
                if let Some(rhs) = m.rule(q, &sigma, &la) {
                    rules.push(Rule {
                        state: q.clone(),
                        symbol: name.clone(),
                        lookahead: Vec::new(),
                        rhs: rhs.clone(),
                    });
                }
            }
        }
        Mtt::new(
            m.states.clone(),
            alphabet.clone(),
            m.output.clone(),
            &m.initial,
            None,
            rules,
        )
    };
    let n1 = strip(m1, true);
    let n2 = strip(m2, false);
    Ok(LaElimination {
        n1,
        n2,
        e,
        origin,
        annotated,
        la1,
        la2,
    })
}

fn fresh(base: &str, taken: &RankedAlphabet) -> String {
    let mut n = base.to_string();
    while taken.contains(&n) {
        n.push('\'');
    }
    n
}

fn calls_on_children(t: &Rhs, p: &Sym) -> Rhs {
    match t {
        Rhs::Out(d, cs) => Rhs::Out(
            d.clone(),
            cs.iter().map(|c| calls_on_children(c, p)).collect(),
        ),
        Rhs::X(i) => Rhs::Call(p.clone(), vec![Rhs::X(*i)]),
        other => other.clone(),
    }
}

/// Single-state DTOP whose look-ahead is the bottom-up transducer's automaton. When some
/// states of the bottom-up transducer are not final, a separate initial state only has
/// rules whose look-ahead ends in a final state.
pub fn from_bottom_up(b: &Butt) -> Result<Mtt> {
    let problems = b.validate();
    if let Some(p) = problems.iter().find(|p| p.contains("duplicate")) {
        return Err(Error::Nondeterministic(p.clone()));
    }
    if let Some(p) = problems.first() {
        return Err(Error::Malformed(p.clone()));
    }
    let mut la = Dbta::new(b.input.clone());
    for q in &b.states {
        la.add_state(q.clone());
    }
    for r in &b.rules {
        la.add_transition(&r.symbol, r.children.clone(), r.target)?;
    }
    let all_final = b.finals.len() == b.states.len();
    let p = sym(&fresh("p", &b.output));
    let mut states = RankedAlphabet::new();
    let initial = if all_final {
        p.clone()
    } else {
        let p0 = fresh("p0", &b.output);
        states.insert(&p0, 1)?;
        sym(&p0)
    };
    states.insert(&p, 1)?;
    let mut rules = Vec::new();
    let finals: BTreeSet<usize> = b.finals.clone();
    for r in &b.rules {
        let rhs = calls_on_children(&r.output, &p);
        if !all_final && finals.contains(&r.target) {
            rules.push(Rule {
                state: initial.clone(),
                symbol: r.symbol.clone(),
                lookahead: r.children.clone(),
                rhs: rhs.clone(),
            });
        }
        rules.push(Rule {
            state: p.clone(),
            symbol: r.symbol.clone(),
            lookahead: r.children.clone(),
            rhs,
        });
    }
    Ok(Mtt::new(
        states,
        b.input.clone(),
        b.output.clone(),
        &initial,
        Some(la),
        rules,
    ))
}
