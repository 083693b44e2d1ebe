//! Oracles shared by the integration tests. None of them use the decision procedures.
#![allow(dead_code)]

use std::path::PathBuf;

use ttequiv::format::parse_mtt_text;
use ttequiv::mtt::{eval, Mtt};
use ttequiv::{RankedAlphabet, Tree};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> Mtt {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    parse_mtt_text(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn mtt(text: &str) -> Mtt {
    parse_mtt_text(text).unwrap_or_else(|e| panic!("{e}"))
}

/// All trees of height at most `h`, smallest heights first.
pub fn trees_up_to(alpha: &RankedAlphabet, h: usize) -> Vec<Tree> {
    let mut by_height: Vec<Vec<Tree>> = Vec::new();
    let mut all: Vec<Tree> = Vec::new();
    for level in 0..h {
        let mut fresh = Vec::new();
        for (s, k) in alpha.iter() {
            if k == 0 {
                if level == 0 {
                    fresh.push(Tree::with_sym(s.clone(), Vec::new()));
                }
                continue;
            }
            if level == 0 {
                continue;
            }
            // At least one child comes from the previous level.
            let prev = &by_height[level - 1];
            let below: Vec<&Tree> = all.iter().collect();
            let mut tuples: Vec<Vec<&Tree>> = vec![Vec::new()];
            for _ in 0..k {
                tuples = tuples
                    .into_iter()
                    .flat_map(|t| {
                        below.iter().map(move |c| {
                            let mut t = t.clone();
                            t.push(*c);
                            t
                        })
                    })
                    .collect();
            }
            for t in tuples {
                if t.iter().any(|c| prev.contains(c)) {
                    fresh.push(Tree::with_sym(s.clone(), t.into_iter().cloned().collect()));
                }
            }
        }
        all.extend(fresh.iter().cloned());
        by_height.push(fresh);
    }
    all
}

/// First input up to height `h` on which the two translations differ, counting an
/// undefined output as a value.
pub fn brute_difference(m1: &Mtt, m2: &Mtt, h: usize) -> Option<Tree> {
    trees_up_to(&m1.input, h)
        .into_iter()
        .find(|s| eval(m1, s).unwrap() != eval(m2, s).unwrap())
}

/// Random DTOP over `input` and `output`; rules are omitted with probability `partial`.
pub fn random_dtop(
    seed: u64,
    states: usize,
    input: &RankedAlphabet,
    output: &RankedAlphabet,
    partial: f64,
) -> Mtt {
    use rand::{Rng, SeedableRng};
    use ttequiv::mtt::{Rhs, Rule};
    use ttequiv::trees::sym;

    fn rhs(
        rng: &mut impl Rng,
        depth: usize,
        k: usize,
        states: usize,
        output: &RankedAlphabet,
    ) -> Rhs {
        let leaves: Vec<_> = output.symbols_of_rank(0).cloned().collect();
        if k > 0 && (depth == 0 || rng.gen_bool(0.4)) {
            let q = rng.gen_range(0..states);
            return Rhs::Call(sym(&format!("q{q}")), vec![Rhs::X(rng.gen_range(1..=k))]);
        }
        if depth == 0 || rng.gen_bool(0.3) {
            return Rhs::Out(leaves[rng.gen_range(0..leaves.len())].clone(), Vec::new());
        }
        let syms: Vec<_> = output.iter().collect();
        let (d, r) = syms[rng.gen_range(0..syms.len())];
        Rhs::Out(
            d.clone(),
            (0..r)
                .map(|_| rhs(rng, depth - 1, k, states, output))
                .collect(),
        )
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut st = RankedAlphabet::new();
    for q in 0..states {
        st.insert(&format!("q{q}"), 1).unwrap();
    }
    let mut rules = Vec::new();
    for q in 0..states {
        for (s, k) in input.iter() {
            if partial > 0.0 && rng.gen_bool(partial) {
                continue;
            }
            rules.push(Rule {
                state: sym(&format!("q{q}")),
                symbol: s.clone(),
                lookahead: Vec::new(),
                rhs: rhs(&mut rng, 2, k, states, output),
            });
        }
    }
    Mtt::new(st, input.clone(), output.clone(), "q0", None, rules)
}

/// Random monadic transducer over `a:1 b:1 e:0` into `c:1 d:1 z:0 w:0`, with states
/// `q0` (no parameter) and `q1`, `q2` (one parameter, sometimes deleted). With `la`, a
/// parity look-ahead on `a` selects between two rule sets.
pub fn random_monadic(seed: u64, la: bool, partial: f64) -> Mtt {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    fn chain(rng: &mut impl Rng, len: usize, leaf: &str) -> String {
        let mut s = leaf.to_string();
        for _ in 0..len {
            s = format!("{}({s})", if rng.gen_bool(0.5) { "c" } else { "d" });
        }
        s
    }
    fn body(rng: &mut impl Rng, has_param: bool, leaf_rule: bool) -> String {
        let end = if has_param && rng.gen_bool(0.85) {
            "y1".to_string()
        } else if rng.gen_bool(0.5) {
            "z".to_string()
        } else {
            "w".to_string()
        };
        let n = rng.gen_range(0..2);
        let mut t = chain(rng, n, &end);
        if !leaf_rule {
            for _ in 0..rng.gen_range(0..3) {
                t = match rng.gen_range(0..3) {
                    0 => "q0(x1)".to_string(),
                    1 => format!("q1(x1,{t})"),
                    _ => format!("q2(x1,{t})"),
                };
                let n = rng.gen_range(0..2);
                t = chain(rng, n, &t);
                if t.starts_with("q0") {
                    break;
                }
            }
        }
        t
    }
    let mut text = String::from("kind: mtt\ninput: a:1 b:1 e:0\noutput: c:1 d:1 z:0 w:0\nstates: q0 q1:2 q2:2\ninitial: q0\n");
    if la {
        text.push_str("la-states: p0 p1\nla-rule e -> p0\nla-rule a(p0) -> p1\nla-rule a(p1) -> p0\nla-rule b(p0) -> p0\nla-rule b(p1) -> p1\n");
    }
    for (q, params) in [("q0", false), ("q1", true), ("q2", true)] {
        let head = |s: &str| {
            if params {
                format!("{q}({s},y1)")
            } else {
                format!("{q}({s})")
            }
        };
        for s in ["a", "b"] {
            let tuples: &[&str] = if la { &[" <p0>", " <p1>"] } else { &[""] };
            for t in tuples {
                if rng.gen_bool(partial) {
                    continue;
                }
                let b = body(&mut rng, params, false);
                text.push_str(&format!("rule {} -> {b}{t}\n", head(&format!("{s}(x1)"))));
            }
        }
        if !rng.gen_bool(partial) {
            let b = body(&mut rng, params, true);
            text.push_str(&format!("rule {} -> {b}\n", head("e")));
        }
    }
    mtt(&text)
}

pub fn ydt(text: &str) -> ttequiv::parikh::YdtFc {
    ttequiv::format::parse_ydt_text(text).unwrap_or_else(|e| panic!("{e}"))
}

/// Automaton accepting exactly the trees of height at most `h` (leaves have height 1).
pub fn height_automaton(alpha: &RankedAlphabet, h: usize) -> ttequiv::automata::Dbta {
    let mut a = ttequiv::automata::Dbta::new(alpha.clone());
    for i in 1..=h {
        a.add_state(format!("h{i}"));
        a.finals.insert(i - 1);
    }
    for (s, k) in alpha.iter() {
        let mut tuples: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..k {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    (0..h).map(move |c| {
                        let mut t = t.clone();
                        t.push(c);
                        t
                    })
                })
                .collect();
        }
        for t in tuples {
            let top = t.iter().map(|&c| c + 1).max().unwrap_or(0);
            if top < h {
                a.add_transition(s, t, top).unwrap();
            }
        }
    }
    a
}

/// Words of `L(g)` of length at most `n`, by a fixpoint over truncated word sets.
pub fn cfg_words(g: &ttequiv::parikh::Cfg, n: usize) -> std::collections::BTreeSet<Vec<usize>> {
    use std::collections::BTreeSet;
    use ttequiv::parikh::GSym;
    let mut w: Vec<BTreeSet<Vec<usize>>> = vec![BTreeSet::new(); g.nonterminals.len()];
    loop {
        let mut changed = false;
        for (a, body) in &g.productions {
            let mut acc: BTreeSet<Vec<usize>> = BTreeSet::from([Vec::new()]);
            for s in body {
                let parts: Vec<Vec<usize>> = match s {
                    GSym::T(t) => vec![vec![*t]],
                    GSym::N(b) => w[*b].iter().cloned().collect(),
                };
                let mut next = BTreeSet::new();
                for x in &acc {
                    for p in &parts {
                        if x.len() + p.len() <= n {
                            let mut y = x.clone();
                            y.extend(p);
                            next.insert(y);
                        }
                    }
                }
                acc = next;
            }
            for x in acc {
                changed |= w[*a].insert(x);
            }
        }
        if !changed {
            break;
        }
    }
    std::mem::take(&mut w[g.start])
}

/// Letter counts of a word.
pub fn parikh_of(w: &[usize], dim: usize) -> Vec<u64> {
    let mut v = vec![0u64; dim];
    for &a in w {
        v[a] += 1;
    }
    v
}

/// All vectors of dimension `dim` with coordinate sum at most `n`.
pub fn vectors_up_to(dim: usize, n: u64) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v: Vec<u64>| {
                let used: u64 = v.iter().sum();
                (0..=n - used).map(move |x| {
                    let mut v = v.clone();
                    v.push(x);
                    v
                })
            })
            .collect();
    }
    out
}

/// Random deterministic tree-to-string transducer over `f:2 g:1 e:0` into `a b`, with
/// states `q0..q{states-1}` and at most two calls per right-hand side.
pub fn random_fc(seed: u64, states: usize, partial: f64) -> ttequiv::parikh::YdtFc {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut text = format!(
        "kind: ydt\ninput: f:2 g:1 e:0\noutput: a b\nstates: {}\ninitial: q0\n",
        (0..states)
            .map(|q| format!("q{q}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    for q in 0..states {
        for (s, k) in [("f", 2), ("g", 1), ("e", 0)] {
            if q > 0 && rng.gen_bool(partial) {
                continue;
            }
            let mut items = Vec::new();
            let mut calls = 0;
            for _ in 0..rng.gen_range(0..4) {
                if k > 0 && calls < 2 && rng.gen_bool(0.5) {
                    calls += 1;
                    items.push(format!(
                        "q{}(x{})",
                        rng.gen_range(0..states),
                        rng.gen_range(1..=k)
                    ));
                } else {
                    items.push(if rng.gen_bool(0.5) { "a" } else { "b" }.to_string());
                }
            }
            if items.is_empty() {
                items.push("ε".into());
            }
            let lhs = match k {
                0 => s.to_string(),
                1 => format!("{s}(x1)"),
                _ => format!("{s}(x1,x2)"),
            };
            text.push_str(&format!("rule q{q}({lhs}) -> {}\n", items.join(" ")));
        }
    }
    ydt(&text)
}

/// Random partial automaton with `n` states.
pub fn random_dbta(seed: u64, alpha: &RankedAlphabet, n: usize) -> ttequiv::automata::Dbta {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut a = ttequiv::automata::Dbta::new(alpha.clone());
    for i in 0..n {
        a.add_state(format!("s{i}"));
        if rng.gen_bool(0.4) {
            a.finals.insert(i);
        }
    }
    for (s, k) in alpha.iter() {
        let mut tuples: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..k {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    (0..n).map(move |c| {
                        let mut t = t.clone();
                        t.push(c);
                        t
                    })
                })
                .collect();
        }
        for t in tuples {
            if rng.gen_bool(0.8) {
                let target = rng.gen_range(0..n);
                a.add_transition(s, t, target).unwrap();
            }
        }
    }
    a
}

/// Random deterministic bottom-up transducer over `f:2 g:1 c:0` into `h:2 k:1 z:0`.
/// Rules are omitted with probability `partial`; outputs may copy and delete subtrees.
pub fn random_butt(seed: u64, states: usize, partial: f64) -> ttequiv::mtt::Butt {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    fn out(rng: &mut impl Rng, depth: usize, k: usize) -> String {
        if k > 0 && (depth == 0 || rng.gen_bool(0.4)) {
            return format!("x{}", rng.gen_range(1..=k));
        }
        if depth == 0 || rng.gen_bool(0.25) {
            return "z".into();
        }
        match rng.gen_range(0..2) {
            0 => format!("k({})", out(rng, depth - 1, k)),
            _ => format!("h({},{})", out(rng, depth - 1, k), out(rng, depth - 1, k)),
        }
    }
    let names: Vec<String> = (0..states).map(|i| format!("s{i}")).collect();
    let mut finals: Vec<&str> = names
        .iter()
        .filter(|_| rng.gen_bool(0.6))
        .map(|s| s.as_str())
        .collect();
    if finals.is_empty() {
        finals.push(&names[0]);
    }
    let mut text = format!(
        "kind: butt\ninput: f:2 g:1 c:0\noutput: h:2 k:1 z:0\nstates: {}\nfinals: {}\n",
        names.join(" "),
        finals.join(" ")
    );
    let mut lhs: Vec<(String, usize)> = vec![("c".into(), 0)];
    for p in &names {
        lhs.push((format!("g({p}(x1))"), 1));
        for q in &names {
            lhs.push((format!("f({p}(x1),{q}(x2))"), 2));
        }
    }
    for (l, k) in lhs {
        if rng.gen_bool(partial) {
            continue;
        }
        let target = &names[rng.gen_range(0..states)];
        let o = out(&mut rng, 2, k);
        text.push_str(&format!("rule {l} -> {target}({o})\n"));
    }
    ttequiv::format::parse_butt_text(&text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

/// Reference bottom-up evaluation: the state reached and the output, if a rule applies
/// everywhere. Final states are not checked.
pub fn butt_run(b: &ttequiv::mtt::Butt, t: &Tree) -> Option<(usize, Tree)> {
    use ttequiv::mtt::Rhs;
    let mut states = Vec::new();
    let mut outs = Vec::new();
    for c in &t.children {
        let (q, o) = butt_run(b, c)?;
        states.push(q);
        outs.push(o);
    }
    let r = b
        .rules
        .iter()
        .find(|r| r.symbol == t.label && r.children == states)?;
    fn inst(r: &Rhs, outs: &[Tree]) -> Tree {
        match r {
            Rhs::Out(s, cs) => {
                Tree::with_sym(s.clone(), cs.iter().map(|c| inst(c, outs)).collect())
            }
            Rhs::X(i) => outs[i - 1].clone(),
            _ => panic!("bottom-up outputs hold only symbols and input variables"),
        }
    }
    Some((r.target, inst(&r.output, &outs)))
}

/// Reference translation of a bottom-up transducer.
pub fn butt_eval(b: &ttequiv::mtt::Butt, t: &Tree) -> Option<Tree> {
    butt_run(b, t)
        .filter(|(q, _)| b.finals.contains(q))
        .map(|(_, o)| o)
}
