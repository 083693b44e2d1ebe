//! Inverse images of regular tree languages under macro tree transducers, domains,
//! parameter usage, and the nondeleting transform.

use std::collections::{BTreeSet, HashMap};

use crate::automata::{complete, explore, Dbta, DEFAULT_STATE_LIMIT};
use crate::error::{Error, Result};
use crate::mtt::{Mtt, Rhs, Rule};
use crate::trees::{sym, RankedAlphabet, Sym};

/// Largest parameter count accepted by [`inverse_regular`] (tables have `|P|^m` entries).
pub const DEFAULT_MAX_PARAMS: usize = 4;

/// Per transducer state, a table from parameter states (mixed radix) to a result state;
/// `None` marks undefinedness.
type Alpha = Vec<Vec<Option<u32>>>;

fn la_tuple(m: &Mtt, children: &[Option<usize>]) -> Option<Vec<usize>> {
    if m.lookahead.is_some() {
        children.iter().copied().collect()
    } else {
        Some(Vec::new())
    }
}

fn la_step(m: &Mtt, s: &Sym, children: &[Option<usize>]) -> Option<Option<usize>> {
    match &m.lookahead {
        None => Some(None),
        Some(la) => {
            let cs: Option<Vec<usize>> = children.iter().copied().collect();
            la.step(s, &cs?).map(Some)
        }
    }
}

struct Inverse<'a> {
    m: &'a Mtt,
    b: &'a Dbta,
    states: Vec<(Sym, usize)>,
    index: HashMap<Sym, usize>,
}

impl Inverse<'_> {
    fn table_len(&self, params: usize) -> usize {
        self.b.states.len().pow(params as u32)
    }

    fn decode(&self, mut code: usize, params: usize) -> Vec<usize> {
        let n = self.b.states.len();
        let mut v = vec![0; params];
        for slot in v.iter_mut().rev() {
            *slot = code % n;
            code /= n;
        }
        v
    }

    fn encode(&self, ps: &[usize]) -> usize {
        ps.iter().fold(0, |acc, &p| acc * self.b.states.len() + p)
    }

    fn value(&self, t: &Rhs, ps: &[usize], children: &[&(Option<usize>, Alpha)]) -> Option<usize> {
        match t {
            Rhs::Out(d, cs) => {
                let mut v = Vec::with_capacity(cs.len());
                for c in cs {
                    v.push(self.value(c, ps, children)?);
                }
                self.b.step(d, &v)
            }
            Rhs::Y(j) => ps.get(j - 1).copied(),
            Rhs::X(_) => None,
            Rhs::Call(q, args) => {
                let Some(Rhs::X(i)) = args.first() else {
                    return None;
                };
                let mut v = Vec::with_capacity(args.len() - 1);
                for a in &args[1..] {
                    v.push(self.value(a, ps, children)?);
                }
                let alpha = &children.get(i - 1)?.1;
                alpha[self.index[q]][self.encode(&v)].map(|p| p as usize)
            }
        }
    }

    fn step(
        &self,
        s: &Sym,
        children: &[&(Option<usize>, Alpha)],
    ) -> Option<(Option<usize>, Alpha)> {
        let las: Vec<Option<usize>> = children.iter().map(|c| c.0).collect();
        let la = la_step(self.m, s, &las)?;
        let tuple = la_tuple(self.m, &las)?;
        let mut alpha = Vec::with_capacity(self.states.len());
        for (q, params) in &self.states {
            let rhs = self.m.rule(q, s, &tuple);
            let row = (0..self.table_len(*params))
                .map(|code| {
                    let ps = self.decode(code, *params);
                    rhs.and_then(|r| self.value(r, &ps, children))
                        .map(|p| p as u32)
                })
                .collect();
            alpha.push(row);
        }
        Some((la, alpha))
    }
}

fn check_params(m: &Mtt, limit: usize) -> Result<()> {
    for (q, r) in m.states.iter() {
        if r - 1 > limit {
            return Err(Error::Invalid(format!(
                "state `{q}` has {} parameters; the limit is {limit}",
                r - 1
            )));
        }
    }
    Ok(())
}

/// Automaton for `{ s | M(s) is defined and in L(B) }`, built lazily from the leaves.
pub fn inverse_regular(m: &Mtt, b: &Dbta) -> Result<Dbta> {
    if !b.alphabet.same_as(&m.output) {
        let missing: Vec<String> = m
            .output
            .iter()
            .filter(|(s, r)| b.alphabet.rank(s) != Some(*r))
            .map(|(s, _)| s.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::AlphabetMismatch(format!(
                "output symbols {} are not in the automaton's alphabet",
                missing.join(", ")
            )));
        }
    }
    check_params(m, DEFAULT_MAX_PARAMS)?;
    let b = if b.is_complete() {
        b.clone()
    } else {
        complete(b)
    };
    let states: Vec<(Sym, usize)> = m.states.iter().map(|(q, r)| (q.clone(), r - 1)).collect();
    let index = states
        .iter()
        .enumerate()
        .map(|(i, (q, _))| (q.clone(), i))
        .collect();
    let inv = Inverse {
        m,
        b: &b,
        states,
        index,
    };
    let ex = explore(&m.input, DEFAULT_STATE_LIMIT, |s, cs| Ok(inv.step(s, cs)))?;
    let q0 = inv.index[&m.initial];
    let mut a = Dbta::new(m.input.clone());
    for (i, (_, alpha)) in ex.states.iter().enumerate() {
        a.add_state(format!("s{i}"));
        if alpha[q0][0].is_some_and(|p| b.finals.contains(&(p as usize))) {
            a.finals.insert(i);
        }
    }
    a.transitions = ex.transitions;
    Ok(a)
}

/// Automaton accepting exactly the inputs on which `M` is defined.
pub fn domain_automaton(m: &Mtt) -> Result<Dbta> {
    let mut b = Dbta::universal(m.output.clone());
    b.finals = (0..b.states.len()).collect();
    inverse_regular(m, &b)
}

/// Parameters occurring in `M_q(s)`, or `None` when `M_q(s)` is undefined.
pub type Usage = Option<BTreeSet<usize>>;

/// Look-ahead automaton tracking, for every input subtree, the original look-ahead state
/// and the parameter usage of every transducer state.
#[derive(Debug, Clone)]
pub struct ParamUsage {
    /// States `u0, u1, …` in discovery order (no finals).
    pub automaton: Dbta,
    /// Original look-ahead state per automaton state.
    pub lookahead: Vec<Option<usize>>,
    /// `usage[u][q]` for automaton state `u` and transducer state index `q`.
    pub usage: Vec<Vec<Usage>>,
    pub state_order: Vec<Sym>,
}

impl ParamUsage {
    pub fn of(&self, u: usize, q: &str) -> &Usage {
        let i = self
            .state_order
            .iter()
            .position(|s| &**s == q)
            .expect("known state");
        &self.usage[u][i]
    }
}

fn used(t: &Rhs, children: &[&(Option<usize>, Vec<Usage>)], index: &HashMap<Sym, usize>) -> Usage {
    match t {
        Rhs::Out(_, cs) => {
            let mut acc = BTreeSet::new();
            for c in cs {
                acc.extend(used(c, children, index)?);
            }
            Some(acc)
        }
        Rhs::Y(j) => Some(BTreeSet::from([*j])),
        Rhs::X(_) => None,
        Rhs::Call(q, args) => {
            let Some(Rhs::X(i)) = args.first() else {
                return None;
            };
            let arg_usage: Vec<BTreeSet<usize>> = args[1..]
                .iter()
                .map(|a| used(a, children, index))
                .collect::<Option<_>>()?;
            let callee = children.get(i - 1)?.1[index[q]].as_ref()?;
            Some(
                callee
                    .iter()
                    .flat_map(|j| arg_usage[j - 1].iter().copied())
                    .collect(),
            )
        }
    }
}

/// Exact parameter usage of every state on every input, as a look-ahead automaton.
pub fn param_usage(m: &Mtt) -> Result<ParamUsage> {
    let order: Vec<Sym> = m.states.iter().map(|(q, _)| q.clone()).collect();
    let index: HashMap<Sym, usize> = order
        .iter()
        .enumerate()
        .map(|(i, q)| (q.clone(), i))
        .collect();
    let ex = explore(
        &m.input,
        DEFAULT_STATE_LIMIT,
        |s, cs: &[&(Option<usize>, Vec<Usage>)]| {
            let las: Vec<Option<usize>> = cs.iter().map(|c| c.0).collect();
            let Some(la) = la_step(m, s, &las) else {
                return Ok(None);
            };
            let Some(tuple) = la_tuple(m, &las) else {
                return Ok(None);
            };
            let usage = order
                .iter()
                .map(|q| m.rule(q, s, &tuple).and_then(|r| used(r, cs, &index)))
                .collect();
            Ok(Some((la, usage)))
        },
    )?;
    let mut a = Dbta::new(m.input.clone());
    for i in 0..ex.states.len() {
        a.add_state(format!("u{i}"));
    }
    a.transitions = ex.transitions;
    let (lookahead, usage) = ex.states.into_iter().unzip();
    Ok(ParamUsage {
        automaton: a,
        lookahead,
        usage,
        state_order: order,
    })
}

fn specialized_name(q: &str, a: &BTreeSet<usize>, all: usize) -> String {
    if a.len() == all {
        q.to_string()
    } else {
        let v: Vec<String> = a.iter().map(|j| j.to_string()).collect();
        format!("{q}<{}>", v.join(","))
    }
}

/// Equivalent transducer in which every parameter of every state occurs in every
/// right-hand side of that state. States `q<j,…>` keep only the parameters they use;
/// the parameter-usage automaton becomes the look-ahead.
pub fn make_nondeleting(m: &Mtt) -> Result<Mtt> {
    if !m.output.is_monadic() {
        return Err(Error::NotMonadic(
            "make_nondeleting needs a monadic output alphabet".into(),
        ));
    }
    let pu = param_usage(m)?;
    let index: HashMap<Sym, usize> = pu
        .state_order
        .iter()
        .enumerate()
        .map(|(i, q)| (q.clone(), i))
        .collect();
    let mut states = RankedAlphabet::new();
    let mut rules = Vec::new();
    let mut todo: Vec<(Sym, BTreeSet<usize>)> = vec![(m.initial.clone(), BTreeSet::new())];
    let mut seen: BTreeSet<(Sym, BTreeSet<usize>)> = todo.iter().cloned().collect();
    let mut trans: Vec<_> = pu.automaton.transitions.iter().collect();
    trans.sort_by_key(|((s, cs), _)| (m.input.index_of(s), (*cs).clone()));
    while let Some((q, a)) = todo.pop() {
        let all = m.params(&q);
        let name = specialized_name(&q, &a, all);
        states.insert(&name, a.len() + 1)?;
        let pos: HashMap<usize, usize> = a.iter().enumerate().map(|(i, &j)| (j, i + 1)).collect();
        for ((s, cs), &u) in &trans {
            if pu.usage[u][index[&q]].as_ref() != Some(&a) {
                continue;
            }
            let tuple: Vec<usize> = if m.lookahead.is_some() {
                cs.iter()
                    .map(|&c| pu.lookahead[c].expect("defined look-ahead"))
                    .collect()
            } else {
                Vec::new()
            };
            let rhs = m.rule(&q, s, &tuple).expect("defined usage implies a rule");
            let mut calls = Vec::new();
            let new_rhs = rewrite(rhs, cs, &pu, &index, &pos, m, &mut calls);
            for c in calls {
                if seen.insert(c.clone()) {
                    todo.push(c);
                }
            }
            rules.push(Rule {
                state: sym(&name),
                symbol: s.clone(),
                lookahead: cs.clone(),
                rhs: new_rhs,
            });
        }
    }
    let mut la = pu.automaton.clone();
    la.finals.clear();
    // Deterministic state order: initial first, then by name.
    let mut ordered = RankedAlphabet::new();
    let init = specialized_name(&m.initial, &BTreeSet::new(), 0);
    ordered.insert(&init, 1)?;
    let mut rest: Vec<(String, usize)> = states
        .iter()
        .filter(|(q, _)| ***q != *init)
        .map(|(q, r)| (q.to_string(), r))
        .collect();
    rest.sort();
    for (q, r) in rest {
        ordered.insert(&q, r)?;
    }
    rules.sort_by(|x, y| {
        (
            ordered.index_of(&x.state),
            m.input.index_of(&x.symbol),
            &x.lookahead,
        )
            .cmp(&(
                ordered.index_of(&y.state),
                m.input.index_of(&y.symbol),
                &y.lookahead,
            ))
    });
    Ok(Mtt::new(
        ordered,
        m.input.clone(),
        m.output.clone(),
        &init,
        Some(la),
        rules,
    ))
}

fn rewrite(
    t: &Rhs,
    cs: &[usize],
    pu: &ParamUsage,
    index: &HashMap<Sym, usize>,
    pos: &HashMap<usize, usize>,
    m: &Mtt,
    calls: &mut Vec<(Sym, BTreeSet<usize>)>,
) -> Rhs {
    match t {
        Rhs::Out(d, ch) => Rhs::Out(
            d.clone(),
            ch.iter()
                .map(|c| rewrite(c, cs, pu, index, pos, m, calls))
                .collect(),
        ),
        Rhs::Y(j) => Rhs::Y(pos[j]),
        Rhs::X(i) => Rhs::X(*i),
        Rhs::Call(q, args) => {
            let Some(Rhs::X(i)) = args.first() else {
                unreachable!("validated call")
            };
            let b = pu.usage[cs[i - 1]][index[q]]
                .clone()
                .expect("defined callee");
            let mut new_args = vec![Rhs::X(*i)];
            for &j in &b {
                new_args.push(rewrite(&args[j], cs, pu, index, pos, m, calls));
            }
            let name = specialized_name(q, &b, m.params(q));
            calls.push((q.clone(), b));
            Rhs::Call(sym(&name), new_args)
        }
    }
}
