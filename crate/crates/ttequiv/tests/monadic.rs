mod common;

use common::{brute_difference, fixture, fixture_path, mtt, random_monadic, trees_up_to};
use proptest::prelude::*;
use ttequiv::automata::Dfa;
use ttequiv::monadic::*;
use ttequiv::mtt::{eval, Mtt};
use ttequiv::par::Exec;
use ttequiv::{parse_term, Error, Tree};

fn names(w: &[ttequiv::trees::Sym]) -> Vec<String> {
    w.iter().map(|s| s.to_string()).collect()
}

fn words(out: &[String], w: &[usize]) -> Vec<String> {
    w.iter().map(|&i| out[i].clone()).collect()
}

fn fig3() -> (Mtt, Mtt) {
    (fixture("fig3-Mp.tt"), fixture("fig3-Np.tt"))
}

fn reduction(m1: &Mtt, m2: &Mtt) -> Box<MonadicReduction> {
    match reduce_monadic(m1, m2).unwrap() {
        Reduced::Instance(r) => r,
        Reduced::DomainMismatch(t) => panic!("domains differ on {t}"),
    }
}

fn all_words(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut level = vec![Vec::new()];
    for _ in 0..k {
        level = level
            .iter()
            .flat_map(|w: &Vec<usize>| {
                (0..n).map(move |j| {
                    let mut w = w.clone();
                    w.push(j);
                    w
                })
            })
            .collect();
        out.extend(level.iter().cloned());
    }
    out
}

#[test]
fn normalized_fig3_translates_expanded_trees() {
    let (m, _) = fig3();
    let n = normalize_monadic(&m).unwrap();
    check_normalized(&n.mtt).unwrap();
    let s = n.input.expand(&parse_term("a(a(e))").unwrap());
    let out = eval(&n.mtt, &s).unwrap().unwrap();
    assert_eq!(out, n.output.expand(&parse_term("a(a(a(a(e))))").unwrap()));
    assert_eq!(out.to_string(), "a(a(a(a(e'(bot)))))");
}

#[test]
fn leaf_outputs_become_unary() {
    let m = mtt(
        "kind: dtop\ninput: a:1 e:0\noutput: e1:0 e2:0 c:1\nstates: q\ninitial: q\n\
                 rule q(a(x1)) -> c(q(x1))\nrule q(e) -> e1\n",
    );
    let n = normalize_monadic(&m).unwrap();
    assert_eq!(n.mtt.output.rank("e1'"), Some(1));
    assert_eq!(n.mtt.output.rank("e2'"), Some(1));
    assert_eq!(n.mtt.output.symbols_of_rank(0).count(), 1);
}

#[test]
fn deleted_parameters_disappear() {
    let m = mtt("kind: mtt\ninput: a:1 e:0\noutput: c:1 z:0\nstates: q0 q:2\ninitial: q0\n\
                 rule q0(a(x1)) -> q(x1,c(z))\nrule q0(e) -> z\nrule q(a(x1),y1) -> c(q(x1,y1))\nrule q(e,y1) -> z\n");
    let n = normalize_monadic(&m).unwrap();
    assert!(n.mtt.states.iter().all(|(_, r)| r == 1));
    for s in trees_up_to(&m.input, 6) {
        let want = eval(&m, &s).unwrap().map(|t| n.output.expand(&t));
        assert_eq!(eval(&n.mtt, &n.input.expand(&s)).unwrap(), want);
    }
}

#[test]
fn rejects_branching_alphabets() {
    let m = fixture("fig4-M.tt");
    assert!(matches!(normalize_monadic(&m), Err(Error::NotMonadic(_))));
    let f1 = fixture("fig1.tt");
    assert!(matches!(
        decide_equiv_monadic(&f1, &f1, 3),
        Err(Error::NotMonadic(_))
    ));
}

#[test]
fn unguarded_instance_composes_to_the_outputs() {
    let (m, n) = fig3();
    let r = reduction(&m, &n);
    let inst = to_hdt0l(&r.n1, &r.n2).unwrap();
    let s = parse_term("a(a(e))").unwrap();
    let w = r.word_of(&s).unwrap();
    assert_eq!(w.len(), 3);
    let (x, y) = inst.images(&w);
    let expected = ["a", "a", "a", "a", "e'"].map(String::from);
    assert_eq!(words(&inst.output, &x), expected);
    assert_eq!(words(&inst.output, &y), expected);
    // Empty word: only the bottom rule of the initial state contributes.
    let (x, y) = inst.images(&[]);
    assert!(x.is_empty() && y.is_empty());
}

#[test]
fn identity_instances_agree_everywhere() {
    let id = |q: &str| {
        mtt(&format!(
            "kind: dtop\ninput: a:1 b:1 e:0\noutput: a:1 b:1 e:0\nstates: {q}\ninitial: {q}\n\
             rule {q}(a(x1)) -> a({q}(x1))\nrule {q}(b(x1)) -> b({q}(x1))\nrule {q}(e) -> e\n"
        ))
    };
    let r = reduction(&id("q"), &id("p"));
    let inst = to_hdt0l(&r.n1, &r.n2).unwrap();
    for w in all_words(inst.indices.len(), 8) {
        let (x, y) = inst.images(&w);
        assert_eq!(x, y);
    }
    assert_eq!(
        check_hdt0l(&inst, 8).unwrap(),
        HdtolCheck::NoCounterexampleUpTo(8)
    );
}

fn dfa(
    letters: &[ttequiv::trees::Sym],
    states: usize,
    step: impl Fn(usize) -> usize,
    finals: &[usize],
) -> Dfa {
    Dfa {
        letters: letters.to_vec(),
        states: (0..states).map(|i| format!("r{i}")).collect(),
        initial: 0,
        delta: (0..states)
            .map(|r| vec![Some(step(r)); letters.len()])
            .collect(),
        finals: finals.iter().copied().collect(),
    }
}

#[test]
fn guarded_instances() {
    let (m, n) = fig3();
    let r = reduction(&m, &n);
    let letters: Vec<_> = r.n1.input.symbols_of_rank(1).cloned().collect();
    let plain = to_hdt0l(&r.n1, &r.n2).unwrap();
    let all = to_hdt0l_dfa(&r.n1, &r.n2, &dfa(&letters, 1, |_| 0, &[0])).unwrap();
    let none = to_hdt0l_dfa(&r.n1, &r.n2, &dfa(&letters, 1, |_| 0, &[])).unwrap();
    let even = to_hdt0l_dfa(&r.n1, &r.n2, &dfa(&letters, 2, |r| 1 - r, &[0])).unwrap();
    for w in all_words(letters.len(), 6) {
        assert_eq!(all.images(&w), plain.images(&w));
        assert_eq!(none.images(&w), (Vec::new(), Vec::new()));
        let (x, y) = even.images(&w);
        if w.len() % 2 == 0 {
            assert_eq!((x, y), plain.images(&w));
        } else {
            assert!(x.is_empty() && y.is_empty());
        }
    }
    let incomplete = Dfa {
        delta: vec![vec![None; letters.len()]],
        ..dfa(&letters, 1, |_| 0, &[0])
    };
    assert!(to_hdt0l_dfa(&r.n1, &r.n2, &incomplete).is_err());
}

#[test]
fn reduction_checks_its_preconditions() {
    let (m, _) = fig3();
    let r = reduction(&m, &m);
    // Same state names on both sides.
    assert!(to_hdt0l(&r.n1, &r.n1).is_err());
    // Look-ahead present.
    let n = normalize_monadic(&m).unwrap();
    assert!(to_hdt0l(&n.mtt, &r.n2).is_err());
}

#[test]
fn empty_word_counterexample() {
    let (m, n) = fig3();
    let r = reduction(&m, &n);
    let mut inst = r.instance.clone();
    inst.final1 = inst.final1.iter().map(|_| vec![0]).collect();
    assert_eq!(
        check_hdt0l(&inst, 4).unwrap(),
        HdtolCheck::Counterexample(Vec::new())
    );
}

#[test]
fn fig3_pair() {
    let (m, n) = fig3();
    assert_eq!(
        decide_equiv_monadic(&m, &n, 10).unwrap(),
        MonadicVerdict::NoCounterexampleUpTo(10)
    );
    assert_eq!(
        decide_equiv_monadic(&m, &m, 12).unwrap(),
        MonadicVerdict::NoCounterexampleUpTo(12)
    );
}

fn mutated(file: &str, from: &str, to: &str) -> Mtt {
    let text = std::fs::read_to_string(fixture_path(file)).unwrap();
    assert!(text.contains(from));
    mtt(&text.replace(from, to))
}

#[test]
fn fig3_mutations_are_found() {
    let (m, n) = fig3();
    let bad_m = mutated(
        "fig3-Mp.tt",
        "rule q(e,y1) -> a(a(y1))",
        "rule q(e,y1) -> a(y1)",
    );
    let bad_n = mutated(
        "fig3-Np.tt",
        "rule p(e,y1) -> a(y1)",
        "rule p(e,y1) -> a(a(y1))",
    );
    for (x, y) in [(&bad_m, &n), (&m, &bad_n)] {
        match decide_equiv_monadic(x, y, 10).unwrap() {
            MonadicVerdict::NotEquivalent(t) => {
                assert_ne!(eval(x, &t).unwrap(), eval(y, &t).unwrap());
                assert!(t.height() >= 2);
            }
            v => panic!("{v:?}"),
        }
    }
}

#[test]
fn domains_are_compared_first() {
    let (m, _) = fig3();
    let partial = mutated("fig3-Mp.tt", "rule q0(e) -> e\n", "");
    match decide_equiv_monadic(&m, &partial, 5).unwrap() {
        MonadicVerdict::DomainMismatch(t) => assert_eq!(t.to_string(), "e"),
        v => panic!("{v:?}"),
    }
}

#[test]
fn form_budget_is_reported() {
    let (m, n) = fig3();
    let opts = HdtolOptions {
        budget: 3,
        exec: Exec::Sequential,
    };
    assert!(matches!(
        decide_equiv_monadic_with(&m, &n, 10, opts),
        Err(Error::Budget(_))
    ));
}

#[test]
fn export_lists_the_instance() {
    let (m, n) = fig3();
    let text = reduction(&m, &n).instance.to_string();
    assert!(text.starts_with("kind: hdt0l\n"));
    assert!(text.contains("start1: <r0,q0>"));
    assert!(text.lines().any(|l| l.starts_with("final1 ")));
}

/// Both sides computed independently: transducer outputs and composed homomorphisms.
fn reduction_is_sound(m1: &Mtt, m2: &Mtt, h: usize) {
    let r = reduction(m1, m2);
    let (_, out) = {
        let n = normalize_monadic(m1).unwrap();
        (n.input, n.output)
    };
    for s in trees_up_to(&m1.input, h) {
        let (a, b) = (eval(m1, &s).unwrap(), eval(m2, &s).unwrap());
        let Some(w) = r.word_of(&s) else {
            assert!(a.is_none() && b.is_none());
            continue;
        };
        let (x, y) = r.instance.images(&w);
        let (x, y) = (words(&r.instance.output, &x), words(&r.instance.output, &y));
        if let Some(a) = &a {
            assert_eq!(x, names(&strip(&out.expand(a)).unwrap()), "{s}");
        }
        if let Some(b) = &b {
            assert_eq!(y, names(&strip(&out.expand(b)).unwrap()), "{s}");
        }
        assert_eq!(a == b, x == y, "{s}");
        assert_eq!(r.tree_of(&w).as_ref(), Some(&s));
    }
}

#[test]
fn reduction_is_sound_on_fixtures() {
    let (m, n) = fig3();
    reduction_is_sound(&m, &n, 8);
    let bad = mutated(
        "fig3-Np.tt",
        "rule p(e,y1) -> a(y1)",
        "rule p(e,y1) -> a(a(y1))",
    );
    reduction_is_sound(&m, &bad, 8);
}

fn with_renamed(m: &Mtt) -> Mtt {
    m.rename_states(|q| format!("{q}r"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalization_preserves_the_translation(seed in any::<u64>(), la in any::<bool>()) {
        let m = random_monadic(seed, la, 0.1);
        let n = normalize_monadic(&m).unwrap();
        check_normalized(&n.mtt).unwrap();
        for s in trees_up_to(&m.input, 8) {
            let want: Option<Tree> = eval(&m, &s).unwrap().map(|t| n.output.expand(&t));
            prop_assert_eq!(eval(&n.mtt, &n.input.expand(&s)).unwrap(), want);
        }
    }

    #[test]
    fn random_reductions_are_sound(s1 in any::<u64>(), s2 in any::<u64>(), la in any::<bool>()) {
        let m1 = random_monadic(s1, la, 0.0);
        let m2 = if s2 % 2 == 0 { with_renamed(&m1) } else { random_monadic(s2, !la, 0.0) };
        reduction_is_sound(&m1, &m2, 7);
    }

    #[test]
    fn verdicts_agree_with_evaluation(s1 in any::<u64>(), s2 in any::<u64>(), la in any::<bool>()) {
        let m1 = random_monadic(s1, la, 0.15);
        let m2 = if s2 % 3 == 0 { with_renamed(&m1) } else { random_monadic(s2, la, 0.15) };
        match decide_equiv_monadic(&m1, &m2, 7).unwrap() {
            MonadicVerdict::NoCounterexampleUpTo(_) => prop_assert!(brute_difference(&m1, &m2, 7).is_none()),
            MonadicVerdict::NotEquivalent(t) => {
                let (a, b) = (eval(&m1, &t).unwrap(), eval(&m2, &t).unwrap());
                prop_assert!(a.is_some() && b.is_some() && a != b);
                // Shortest counterexample: nothing smaller separates the transducers.
                prop_assert!(brute_difference(&m1, &m2, t.height() - 1).is_none());
            }
            MonadicVerdict::DomainMismatch(t) => {
                prop_assert!(eval(&m1, &t).unwrap().is_some() != eval(&m2, &t).unwrap().is_some())
            }
        }
    }

    #[test]
    fn sequential_and_parallel_agree(s1 in any::<u64>(), s2 in any::<u64>()) {
        let m1 = random_monadic(s1, true, 0.0);
        let m2 = random_monadic(s2, false, 0.0);
        let seq = HdtolOptions { exec: Exec::Sequential, ..HdtolOptions::default() };
        let par = HdtolOptions { exec: Exec::Parallel, ..HdtolOptions::default() };
        prop_assert_eq!(
            decide_equiv_monadic_with(&m1, &m2, 6, seq).unwrap(),
            decide_equiv_monadic_with(&m1, &m2, 6, par).unwrap()
        );
    }
}
