//! End-to-end acceptance checks. Prints one PASS or FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttequiv::domain::inverse_regular;
use ttequiv::dtop_equiv::{decide_equiv_dtop, gen_hard_instance, Verdict};
use ttequiv::earliest::{canonical, equiv_total_dtop, TotalEquiv};
use ttequiv::format::parse_cfg_text;
use ttequiv::lookahead::from_bottom_up;
use ttequiv::monadic::{
    decide_equiv_monadic, normalize_monadic, reduce_monadic, strip, MonadicVerdict, Reduced,
};
use ttequiv::mtt::{balance, eval, eval_partial, Butt, Mtt, Rhs};
use ttequiv::parikh::{decide_equiv_fc, parikh_image, Cfg, FcVerdict, SemilinearSet, YdtFc};
use ttequiv::trees::Sym;
use ttequiv::{parse_tree, Path, RankedAlphabet, Tree};

type Check = fn() -> String;

fn main() {
    let checks: [(&str, Check); 11] = [
        ("worked evaluation", worked_evaluation),
        (
            "partial outputs and balance of the copying pair",
            copying_pair_balance,
        ),
        ("heights of the macro pair", macro_pair_heights),
        ("canonical form of the total pair", canonical_form),
        ("earliest form loses linearity", earliest_linearity),
        ("top-down equivalence against brute force", dtop_suite),
        (
            "hard instances against intersection emptiness",
            hard_instances,
        ),
        ("inverse images against evaluation", inverse_suite),
        ("monadic macro equivalence", monadic_suite),
        (
            "semilinear images and finite-copying equivalence",
            parikh_suite,
        ),
        ("bottom-up reduction", bottom_up_suite),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!(
                "criterion {:>2}: PASS  {name}: {detail} [{secs:.2}s]",
                i + 1
            ),
            Err(p) => {
                failed += 1;
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {:>2}: FAIL  {name}: {msg} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        checks.len() - failed,
        checks.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn timed<T>(limit: Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    assert!(
        start.elapsed() < limit,
        "took {:?}, limit {limit:?}",
        start.elapsed()
    );
    out
}

fn a_chain(n: usize) -> Tree {
    (0..n).fold(Tree::leaf("e"), |t, _| Tree::new("a", vec![t]))
}

/// `a^n(x)`: the chain `a^n(e)` with its hole at the leaf.
fn chain_hole(n: usize) -> (Tree, Path) {
    (a_chain(n), Path(vec![1; n]))
}

fn worked_evaluation() -> String {
    timed(Duration::from_secs(1), || {
        let m = fixture("fig1.tt");
        let s = parse_tree("d(d(a,a),a)", &m.input).unwrap();
        let out = eval(&m, &s).unwrap().expect("in the domain").to_string();
        assert_eq!(out, "d(d(a(1(1(e))),a(2(1(e)))),a(2(e)))");
        out
    })
}

fn copying_pair_balance() -> String {
    let (m, n) = (fixture("fig2-M.tt"), fixture("fig2-N.tt"));
    let (s, u) = chain_hole(2);
    assert_eq!(
        eval_partial(&m, &s, &u).unwrap().to_string(),
        "d(d(q0(x),q0(x)),d(q0(x),q0(x)))"
    );
    let mut sizes = Vec::new();
    for k in 1..=10 {
        let (s, u) = chain_hole(k);
        let (h, size) = balance(&m, &n, &s, &u).unwrap();
        assert_eq!(h, 1, "h_balance on a^{k}(x)");
        if k <= 8 {
            sizes.push(size);
        }
    }
    assert!(sizes.windows(2).all(|w| w[0] < w[1]), "s_balance {sizes:?}");
    format!("h_balance 1 for n = 1..10, s_balance {sizes:?}")
}

fn macro_pair_heights() -> String {
    let (m, n) = (fixture("fig3-Mp.tt"), fixture("fig3-Np.tt"));
    let (s, u) = chain_hole(2);
    let (hm, hn) = (
        eval_partial(&m, &s, &u).unwrap().height(),
        eval_partial(&n, &s, &u).unwrap().height(),
    );
    assert_eq!((hm, hn), (3, 5));
    for k in 1..=8 {
        let (s, u) = chain_hole(k);
        assert_eq!(
            balance(&m, &n, &s, &u).unwrap().0,
            k,
            "h_balance on a^{k}(x)"
        );
    }
    format!("heights {hm} and {hn}, h_balance = n for n = 1..8")
}

fn canonical_form() -> String {
    timed(Duration::from_secs(1), || {
        let (m, n) = (fixture("fig4-M.tt"), fixture("fig4-N.tt"));
        let (cm, cn) = (canonical(&m).unwrap(), canonical(&n).unwrap());
        assert_eq!(cm, cn);
        assert_eq!(cm.to_dtop(), fixture("fig4-canonical.tt"));
        assert_eq!(equiv_total_dtop(&m, &n).unwrap(), TotalEquiv::Equal);
        format!("{} rules", cm.rule_count())
    })
}

/// Occurrences of `x_i` in a right-hand side.
fn uses(r: &Rhs, i: usize) -> usize {
    match r {
        Rhs::X(j) => usize::from(*j == i),
        Rhs::Out(_, cs) | Rhs::Call(_, cs) => cs.iter().map(|c| uses(c, i)).sum(),
        Rhs::Y(_) => 0,
    }
}

fn earliest_linearity() -> String {
    let m = mtt("kind: dtop\ninput: a:2 f:1 e:0\noutput: d:2 e:0\nstates: q1 q\ninitial: q1\n\
                 rule q1(f(x1)) -> q(x1)\nrule q1(a(x1,x2)) -> e\nrule q1(e) -> e\n\
                 rule q(a(x1,x2)) -> d(q(x1),q(x2))\nrule q(e) -> d(e,e)\nrule q(f(x1)) -> d(e,e)\n");
    let c = canonical(&m).unwrap().to_dtop();
    let rank = |r: &ttequiv::mtt::Rule| c.input.rank(&r.symbol).unwrap();
    let nonlinear: Vec<String> = c
        .rules()
        .iter()
        .filter(|r| (1..=rank(r)).any(|i| uses(&r.rhs, i) > 1))
        .map(|r| format!("{} on {}: {}", r.state, r.symbol, r.rhs))
        .collect();
    let deleting = c
        .rules()
        .iter()
        .filter(|r| (1..=rank(r)).any(|i| uses(&r.rhs, i) == 0))
        .count();
    assert!(!nonlinear.is_empty(), "no non-linear rule");
    assert!(deleting > 0, "no deleting rule");
    format!("non-linear {}, {deleting} deleting", nonlinear[0])
}

/// Every input tree of height at most `h` over an alphabet of rank at most 2, stored
/// once by child indices in order of height.
struct Inputs {
    alpha: Vec<(Sym, usize)>,
    nodes: Vec<(usize, [u32; 2])>,
}

impl Inputs {
    fn new(alpha: &RankedAlphabet, h: usize) -> Inputs {
        let alpha: Vec<(Sym, usize)> = alpha.iter().map(|(s, k)| (s.clone(), k)).collect();
        assert!(alpha.iter().all(|(_, k)| *k <= 2));
        let mut nodes = Vec::new();
        let mut ends: Vec<u32> = Vec::new();
        for level in 0..h {
            let lo = if level >= 2 { ends[level - 2] } else { 0 };
            let hi = if level >= 1 { ends[level - 1] } else { 0 };
            for (i, (_, k)) in alpha.iter().enumerate() {
                match k {
                    0 if level == 0 => nodes.push((i, [0, 0])),
                    1 => nodes.extend((lo..hi).map(|c| (i, [c, 0]))),
                    2 => {
                        for a in 0..hi {
                            let from = if a < lo { lo } else { 0 };
                            nodes.extend((from..hi).map(|b| (i, [a, b])));
                        }
                    }
                    _ => {}
                }
            }
            ends.push(nodes.len() as u32);
        }
        Inputs { alpha, nodes }
    }

    fn tree(&self, id: usize) -> Tree {
        let (s, cs) = self.nodes[id];
        let (sym, k) = &self.alpha[s];
        Tree::with_sym(
            sym.clone(),
            cs[..*k].iter().map(|&c| self.tree(c as usize)).collect(),
        )
    }
}

/// Hash-consed output trees; equal ids mean equal trees.
#[derive(Default)]
struct Outputs {
    names: HashMap<Sym, u32>,
    table: HashMap<(u32, u32, u32), u32>,
}

impl Outputs {
    fn node(&mut self, s: &Sym, cs: &[u32]) -> u32 {
        let n = self.names.len() as u32;
        let s = *self.names.entry(s.clone()).or_insert(n);
        let key = (
            s,
            cs.first().map_or(u32::MAX, |c| *c),
            cs.get(1).map_or(u32::MAX, |c| *c),
        );
        let n = self.table.len() as u32;
        *self.table.entry(key).or_insert(n)
    }
}

/// Outputs of every state of a DTOP on every enumerated input, filled node by node.
struct Table<'a> {
    rules: Vec<Vec<Option<&'a Rhs>>>,
    states: HashMap<Sym, usize>,
    initial: usize,
    out: Vec<Option<u32>>,
}

impl<'a> Table<'a> {
    fn new(m: &'a Mtt, inputs: &Inputs) -> Table<'a> {
        assert!(m.is_dtop() && m.lookahead.is_none());
        let states: HashMap<Sym, usize> = m
            .states
            .iter()
            .enumerate()
            .map(|(i, (q, _))| (q.clone(), i))
            .collect();
        let rules = m
            .states
            .iter()
            .map(|(q, _)| {
                inputs
                    .alpha
                    .iter()
                    .map(|(s, _)| m.rule(q, s, &[]))
                    .collect()
            })
            .collect();
        Table {
            rules,
            initial: states[&m.initial],
            states,
            out: Vec::with_capacity(inputs.nodes.len() * 3),
        }
    }

    fn inst(&self, r: &Rhs, cs: &[u32; 2], outs: &mut Outputs) -> Option<u32> {
        match r {
            Rhs::Out(s, args) => {
                let mut ids = [0u32; 2];
                for (i, a) in args.iter().enumerate() {
                    ids[i] = self.inst(a, cs, outs)?;
                }
                Some(outs.node(s, &ids[..args.len()]))
            }
            Rhs::Call(q, args) => {
                let Rhs::X(i) = args[0] else {
                    unreachable!("calls read an input variable")
                };
                self.out[cs[i - 1] as usize * self.rules.len() + self.states[q]]
            }
            _ => unreachable!("top-down right-hand sides have no bare variables"),
        }
    }

    /// Fills the next node and returns the output of the initial state on it.
    fn push(&mut self, node: (usize, [u32; 2]), outs: &mut Outputs) -> Option<u32> {
        let at = self.out.len();
        for q in 0..self.rules.len() {
            let v = self.rules[q][node.0].and_then(|r| self.inst(r, &node.1, outs));
            self.out.push(v);
        }
        self.out[at + self.initial]
    }
}

/// Smallest input of height at most `h` on which the translations differ, counting an
/// undefined output as a value.
fn brute_dtop(m1: &Mtt, m2: &Mtt, inputs: &Inputs) -> Option<Tree> {
    let mut outs = Outputs::default();
    let (mut t1, mut t2) = (Table::new(m1, inputs), Table::new(m2, inputs));
    for (id, &node) in inputs.nodes.iter().enumerate() {
        if t1.push(node, &mut outs) != t2.push(node, &mut outs) {
            return Some(inputs.tree(id));
        }
    }
    None
}

fn check_verdict(m1: &Mtt, m2: &Mtt, v: &Verdict, brute: &Option<Tree>) {
    match v {
        Verdict::Equivalent => assert!(
            brute.is_none(),
            "equivalent, yet they differ on {}",
            brute.as_ref().unwrap()
        ),
        Verdict::OutputMismatch(w) => {
            let (a, b) = (eval(m1, w).unwrap(), eval(m2, w).unwrap());
            assert!(
                a.is_some() && b.is_some() && a != b,
                "witness {w} does not separate"
            );
            assert!(
                brute.is_some(),
                "no difference up to the height bound, witness {w}"
            );
        }
        Verdict::DomainMismatch(w) => {
            assert!(
                eval(m1, w).unwrap().is_some() != eval(m2, w).unwrap().is_some(),
                "witness {w}"
            );
            assert!(
                brute.is_some(),
                "no difference up to the height bound, witness {w}"
            );
        }
    }
}

/// `m` with the rule at `i` taking its right-hand side from `donor`, which has the same
/// state names.
fn swap_rule(m: &Mtt, donor: &Mtt, i: usize) -> Mtt {
    let mut rules = m.rules().to_vec();
    let k = i % rules.len();
    let r = &rules[k];
    rules[k].rhs = donor
        .rule(&r.state, &r.symbol, &[])
        .expect("donor is total")
        .clone();
    Mtt::new(
        m.states.clone(),
        m.input.clone(),
        m.output.clone(),
        &m.initial,
        None,
        rules,
    )
}

fn dtop_suite() -> String {
    timed(Duration::from_secs(300), || {
        let binary = RankedAlphabet::from_pairs([("f", 2), ("a", 0)]).unwrap();
        let unary = RankedAlphabet::from_pairs([("g", 1), ("h", 1), ("a", 0), ("b", 0)]).unwrap();
        let out = RankedAlphabet::from_pairs([("d", 2), ("k", 1), ("b", 0), ("c", 0)]).unwrap();
        let (bin6, un6) = (Inputs::new(&binary, 6), Inputs::new(&unary, 6));

        // The enumeration agrees with the plain evaluator on small heights.
        let small = Inputs::new(&binary, 4);
        for seed in 0..10 {
            let (m1, m2) = (
                random_dtop(seed, 2, &binary, &out, 0.0),
                random_dtop(seed + 50, 2, &binary, &out, 0.0),
            );
            assert_eq!(brute_dtop(&m1, &m2, &small), brute_difference(&m1, &m2, 4));
        }

        let mut equivalent = 0;
        for k in 0..200u64 {
            let (input, inputs) = if k % 2 == 0 {
                (&binary, &bin6)
            } else {
                (&unary, &un6)
            };
            let states = 1 + (k as usize / 2) % 3;
            let m1 = random_dtop(1000 + k, states, input, &out, 0.0);
            let donor = random_dtop(5000 + k, states, input, &out, 0.0);
            let m2 = match (k / 2) % 5 {
                0 => random_dtop(9000 + k, 1 + (k as usize / 6) % 3, input, &out, 0.0),
                1 => m1.rename_states(|q| format!("r{q}")),
                2 => canonical(&m1).unwrap().to_dtop(),
                3 => swap_rule(&m1, &donor, k as usize),
                _ => canonical(&swap_rule(&m1, &donor, k as usize / 3))
                    .unwrap()
                    .to_dtop(),
            };
            let v = decide_equiv_dtop(&m1, &m2).unwrap();
            check_verdict(&m1, &m2, &v, &brute_dtop(&m1, &m2, inputs));
            equivalent += usize::from(v == Verdict::Equivalent);
        }

        let pairs = [
            ("fig2-M.tt", "fig2-N.tt"),
            ("fig4-M.tt", "fig4-N.tt"),
            ("fig4-canonical.tt", "fig4-M.tt"),
        ];
        let mut fixture_equivalent = 0;
        for k in 0..50u64 {
            let (a, b) = pairs[k as usize % pairs.len()];
            let (a, b) = (fixture(a), fixture(b));
            let names: Vec<String> = b.states.iter().map(|(q, _)| q.to_string()).collect();
            let donor = random_dtop(k, names.len(), &b.input, &b.output, 0.0)
                .rename_states(|q| names[q[1..].parse::<usize>().unwrap()].clone());
            let mutant = swap_rule(&b, &donor, k as usize / pairs.len());
            let inputs = Inputs::new(&a.input, 6);
            let v = decide_equiv_dtop(&a, &mutant).unwrap();
            check_verdict(&a, &mutant, &v, &brute_dtop(&a, &mutant, &inputs));
            fixture_equivalent += usize::from(v == Verdict::Equivalent);
        }
        format!(
            "250 pairs agree to height 6 ({equivalent} of 200 random and {fixture_equivalent} of 50 mutated pairs equivalent)"
        )
    })
}

/// Random partial identity over `f:2 g:1 a:0 b:0` with `n` states.
fn random_automaton(rng: &mut impl Rng, n: usize) -> Mtt {
    let mut text =
        String::from("kind: dtop\ninput: f:2 g:1 a:0 b:0\noutput: f:2 g:1 a:0 b:0\nstates:");
    for i in 0..n {
        text.push_str(&format!(" s{i}"));
    }
    text.push_str("\ninitial: s0\n");
    for i in 0..n {
        let mut st = || rng.gen_range(0..n);
        let (j, l, m) = (st(), st(), st());
        if rng.gen_bool(0.7) {
            text.push_str(&format!("rule s{i}(f(x1,x2)) -> f(s{j}(x1),s{l}(x2))\n"));
        }
        if rng.gen_bool(0.7) {
            text.push_str(&format!("rule s{i}(g(x1)) -> g(s{m}(x1))\n"));
        }
        for leaf in ["a", "b"] {
            if rng.gen_bool(0.4) {
                text.push_str(&format!("rule s{i}({leaf}) -> {leaf}\n"));
            }
        }
    }
    mtt(&text)
}

fn hard_instances() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let alpha = RankedAlphabet::from_pairs([("f", 2), ("g", 1), ("a", 0), ("b", 0)]).unwrap();
    let trees = trees_up_to(&alpha, 4);
    let mut empty = 0;
    for i in 0..50 {
        let count = 1 + i % 3;
        let autos: Vec<Mtt> = (0..count)
            .map(|_| {
                let n = rng.gen_range(1..=3);
                random_automaton(&mut rng, n)
            })
            .collect();
        let nonempty = trees
            .iter()
            .any(|t| autos.iter().all(|a| eval(a, t).unwrap().is_some()));
        let (m1, m2) = gen_hard_instance(&autos).unwrap();
        let v = decide_equiv_dtop(&m1, &m2).unwrap();
        assert_eq!(v == Verdict::Equivalent, !nonempty, "instance {i}: {v:?}");
        if let Verdict::DomainMismatch(w) | Verdict::OutputMismatch(w) = &v {
            assert_ne!(
                eval(&m1, w).unwrap(),
                eval(&m2, w).unwrap(),
                "instance {i}: witness {w}"
            );
        }
        empty += usize::from(!nonempty);
    }
    format!("50 instances, {empty} with empty intersection")
}

/// Random macro transducer over `f:2 g:1 a:0` into `d:2 h:1 c:0 e:0` with states `q0`
/// and `q1`, `q2` of one parameter.
fn random_macro(seed: u64) -> Mtt {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fn term(rng: &mut impl Rng, depth: usize, k: usize, param: bool) -> String {
        if k > 0 && depth > 0 && rng.gen_bool(0.4) {
            let x = rng.gen_range(1..=k);
            return match rng.gen_range(0..3) {
                0 => format!("q0(x{x})"),
                q => format!("q{q}(x{x},{})", term(rng, depth - 1, k, param)),
            };
        }
        if depth == 0 || rng.gen_bool(0.3) {
            return if param && rng.gen_bool(0.5) {
                "y1".into()
            } else if rng.gen_bool(0.5) {
                "c".into()
            } else {
                "e".into()
            };
        }
        if rng.gen_bool(0.5) {
            format!("h({})", term(rng, depth - 1, k, param))
        } else {
            format!(
                "d({},{})",
                term(rng, depth - 1, k, param),
                term(rng, depth - 1, k, param)
            )
        }
    }
    let mut text =
        String::from("kind: mtt\ninput: f:2 g:1 a:0\noutput: d:2 h:1 c:0 e:0\nstates: q0 q1:2 q2:2\ninitial: q0\n");
    for (q, param) in [("q0", false), ("q1", true), ("q2", true)] {
        for (s, k) in [("f", 2), ("g", 1), ("a", 0)] {
            if rng.gen_bool(0.1) {
                continue;
            }
            let xs = match k {
                0 => s.to_string(),
                1 => format!("{s}(x1)"),
                _ => format!("{s}(x1,x2)"),
            };
            let lhs = if param {
                format!("{q}({xs},y1)")
            } else {
                format!("{q}({xs})")
            };
            text.push_str(&format!("rule {lhs} -> {}\n", term(&mut rng, 3, k, param)));
        }
    }
    mtt(&text)
}

fn inverse_suite() -> String {
    let mut checked = 0;
    for seed in 0..50u64 {
        let m = if seed % 2 == 0 {
            random_monadic(seed, seed % 4 == 0, 0.1)
        } else {
            random_macro(seed)
        };
        assert!(m.states.iter().all(|(_, r)| r <= 2));
        let b = random_dbta(seed + 100, &m.output, 1 + seed as usize % 3);
        let inv = inverse_regular(&m, &b).unwrap();
        for s in trees_up_to(&m.input, 4) {
            let expected = eval(&m, &s)
                .unwrap()
                .is_some_and(|t| b.accepts(&t).unwrap());
            assert_eq!(inv.accepts(&s).unwrap(), expected, "pair {seed} on {s}");
            checked += 1;
        }
    }
    format!("50 pairs, {checked} memberships")
}

fn words_of(r: &ttequiv::monadic::HdtolInstance, w: &[usize]) -> Vec<String> {
    w.iter().map(|&i| r.output[i].clone()).collect()
}

/// Strip equality of the outputs coincides with equality of the two composed images, on
/// every input up to height `h`.
fn reduction_is_sound(m1: &Mtt, m2: &Mtt, h: usize) {
    let Reduced::Instance(r) = reduce_monadic(m1, m2).unwrap() else {
        panic!("domains differ")
    };
    let out = normalize_monadic(m1).unwrap().output;
    let stripped = |t: &Tree| -> Vec<String> {
        strip(&out.expand(t))
            .unwrap()
            .iter()
            .map(|s| s.to_string())
            .collect()
    };
    for s in trees_up_to(&m1.input, h) {
        let (a, b) = (eval(m1, &s).unwrap(), eval(m2, &s).unwrap());
        if a.is_none() || b.is_none() {
            assert!(a.is_none() && b.is_none(), "domains differ on {s}");
            continue;
        }
        let w = r.word_of(&s).expect("inputs in the domain have a word");
        let (x, y) = r.instance.images(&w);
        let (x, y) = (words_of(&r.instance, &x), words_of(&r.instance, &y));
        let (a, b) = (a.expect("in the domain"), b.expect("in the domain"));
        assert_eq!(x, stripped(&a), "{s}");
        assert_eq!(y, stripped(&b), "{s}");
        assert_eq!(a == b, x == y, "{s}");
    }
}

fn monadic_suite() -> String {
    let (m, n) = (fixture("fig3-Mp.tt"), fixture("fig3-Np.tt"));
    assert_eq!(
        decide_equiv_monadic(&m, &n, 10).unwrap(),
        MonadicVerdict::NoCounterexampleUpTo(10)
    );
    let unary = [
        "e",
        "a(e)",
        "a(a(e))",
        "a(q0(x1))",
        "q0(x1)",
        "q(x1,e)",
        "q(x1,a(q0(x1)))",
        "p(x1,e)",
        "p(x1,p0(x1))",
    ];
    let binary = [
        "y1",
        "a(y1)",
        "e",
        "a(a(a(y1)))",
        "q(x1,a(y1))",
        "a(q(x1,y1))",
        "q0(x1)",
        "p(x1,a(y1))",
        "p0(x1)",
    ];
    let mut mutants = Vec::new();
    for (file, other) in [("fig3-Mp.tt", &n), ("fig3-Np.tt", &m)] {
        let text = std::fs::read_to_string(fixture_path(file)).unwrap();
        let base = fixture(file);
        for line in text.lines().filter(|l| l.starts_with("rule ")) {
            let (lhs, rhs) = line.split_once(" -> ").unwrap();
            let leaf = !lhs.contains("x1");
            let params = lhs.contains("y1");
            for cand in if params { &binary[..] } else { &unary[..] } {
                let bad_state =
                    |st: &str| base.states.rank(st).is_none() && cand.contains(&format!("{st}("));
                if *cand == rhs
                    || (leaf && cand.contains("x1"))
                    || ["q0", "q", "p0", "p"].iter().any(|s| bad_state(s))
                {
                    continue;
                }
                let mutant = mtt(&text.replace(line, &format!("{lhs} -> {cand}")));
                if brute_difference(&mutant, other, 10).is_some() {
                    mutants.push((mutant, other.clone()));
                }
            }
        }
    }
    assert!(
        mutants.len() >= 20,
        "only {} separating mutations",
        mutants.len()
    );
    for (x, y) in mutants.iter().take(20) {
        match decide_equiv_monadic(x, y, 10).unwrap() {
            MonadicVerdict::NotEquivalent(t) => {
                let (a, b) = (eval(x, &t).unwrap(), eval(y, &t).unwrap());
                assert!(a.is_some() && b.is_some() && a != b, "witness {t}");
            }
            v => panic!("mutation not found: {v:?}"),
        }
    }
    reduction_is_sound(&m, &n, 8);
    reduction_is_sound(&m, &m, 8);
    for (x, y) in mutants.iter().take(20) {
        reduction_is_sound(x, y, 8);
    }
    "20 mutations separated, reduction sound on 22 pairs to height 8".into()
}

/// Two-sided agreement of a semilinear set with enumeration on vectors of size ≤ `n`.
fn slice_agrees(g: &Cfg, s: &SemilinearSet, n: usize) {
    let dim = g.terminals.len();
    let image: BTreeSet<Vec<u64>> = cfg_words(g, n).iter().map(|w| parikh_of(w, dim)).collect();
    for v in vectors_up_to(dim, n as u64) {
        assert_eq!(s.contains(&v), image.contains(&v), "vector {v:?} in\n{s}");
    }
}

fn random_grammar(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=3);
    let nts: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
    let mut text = format!(
        "kind: cfg\nterminals: a b\nnonterminals: {}\nstart: N0\n",
        nts.join(" ")
    );
    for _ in 0..rng.gen_range(2..6) {
        let lhs = &nts[rng.gen_range(0..n)];
        let body: Vec<String> = (0..rng.gen_range(0..4))
            .map(|_| match rng.gen_range(0..4) {
                0 => "a".to_string(),
                1 => "b".to_string(),
                _ => nts[rng.gen_range(0..n)].clone(),
            })
            .collect();
        text.push_str(&format!(
            "rule {lhs} -> {}\n",
            if body.is_empty() {
                "ε".into()
            } else {
                body.join(" ")
            }
        ));
    }
    text
}

const GRAMMARS: [&str; 7] = [
    "kind: cfg\nterminals: a b\nnonterminals: S\nstart: S\nrule S -> a S b\nrule S -> ε\n",
    "kind: cfg\nterminals: a\nnonterminals: S\nstart: S\nrule S -> a\n",
    "kind: cfg\nterminals: a b\nnonterminals: S\nstart: S\nrule S -> a S\nrule S -> b S\nrule S -> ε\n",
    "kind: cfg\nterminals: a b\nnonterminals: S\nstart: S\nrule S -> S S\nrule S -> a S b b\nrule S -> a\n",
    "kind: cfg\nterminals: a b c\nnonterminals: S T\nstart: S\nrule S -> T T a\nrule T -> b T c T\nrule T -> S\nrule T -> ε\n",
    "kind: cfg\nterminals: a b\nnonterminals: S T U\nstart: S\nrule S -> T U\nrule T -> a T a\nrule T -> b\nrule U -> U U b\nrule U -> a a\n",
    "kind: cfg\nterminals: a\nnonterminals: S T\nstart: S\nrule S -> T\nrule T -> T\n",
];

/// Yield-like translation over `f:2 g:1 e:0`: `a` per `g`, `b` per leaf.
const FULL: &str = "kind: ydt\ninput: f:2 g:1 e:0\noutput: a b\nstates: q\ninitial: q\n\
                    rule q(f(x1,x2)) -> q(x1) q(x2)\nrule q(g(x1)) -> a q(x1)\nrule q(e) -> b\n";

/// `FULL` without its final `b`.
const CUT: &str = "kind: ydt\ninput: f:2 g:1 e:0\noutput: a b\nstates: r q\ninitial: r\n\
                   rule r(f(x1,x2)) -> q(x1) r(x2)\nrule r(g(x1)) -> a r(x1)\nrule r(e) -> ε\n\
                   rule q(f(x1,x2)) -> q(x1) q(x2)\nrule q(g(x1)) -> a q(x1)\nrule q(e) -> b\n";

/// `FULL` followed by one more `a`.
const LONGER: &str = "kind: ydt\ninput: f:2 g:1 e:0\noutput: a b\nstates: r q\ninitial: r\n\
                      rule r(f(x1,x2)) -> q(x1) r(x2)\nrule r(g(x1)) -> a r(x1)\nrule r(e) -> b a\n\
                      rule q(f(x1,x2)) -> q(x1) q(x2)\nrule q(g(x1)) -> a q(x1)\nrule q(e) -> b\n";

fn certified(seed: u64, states: usize) -> YdtFc {
    (seed..)
        .map(|s| random_fc(s, states, 0.0))
        .find_map(|m| m.certify(2).ok())
        .unwrap()
}

/// Exhaustive comparison over `trees` accepted by `d`; `None` when the domains differ.
fn brute_fc(m1: &YdtFc, m2: &YdtFc, trees: &[Tree]) -> Option<bool> {
    let mut same = true;
    for t in trees {
        match (m1.eval(t).unwrap(), m2.eval(t).unwrap()) {
            (None, None) => {}
            (Some(x), Some(y)) => same &= m1.word(&x) == m2.word(&y),
            _ => return None,
        }
    }
    Some(same)
}

fn parikh_suite() -> String {
    let mut grammars: Vec<String> = GRAMMARS.iter().map(|g| g.to_string()).collect();
    grammars.extend((0..23).map(random_grammar));
    for text in &grammars {
        let g = parse_cfg_text(text).unwrap();
        slice_agrees(&g, &parikh_image(&g).unwrap(), 12);
    }

    let alpha = RankedAlphabet::from_pairs([("f", 2), ("g", 1), ("e", 0)]).unwrap();
    let trees = trees_up_to(&alpha, 5);
    let d = height_automaton(&alpha, 5);
    let (full, cut, longer) = (
        ydt(FULL).certify(2).unwrap(),
        ydt(CUT).certify(2).unwrap(),
        ydt(LONGER).certify(2).unwrap(),
    );
    let mut pairs = vec![
        (full.clone(), cut.clone()),
        (cut.clone(), full.clone()),
        (full.clone(), longer),
        (cut.clone(), cut),
    ];
    for seed in 0..46u64 {
        let m1 = certified(seed * 17, 3);
        let m2 = match seed % 4 {
            0 => certified(seed * 17 + 5, 2 + seed as usize % 2),
            1 => {
                let mut m = m1.clone();
                let i = seed as usize % m.rules.len();
                m.rules[i].rhs.reverse();
                m
            }
            2 => {
                let mut m = m1.clone();
                let i = seed as usize % m.rules.len();
                m.rules[i].rhs.pop();
                m
            }
            _ => m1.clone(),
        };
        pairs.push((m1, m2));
    }
    let mut equivalent = 0;
    for (i, (m1, m2)) in pairs.iter().enumerate() {
        let expected = brute_fc(m1, m2, &trees);
        let got = decide_equiv_fc(m1, m2, &d).unwrap();
        match (&got, expected) {
            (FcVerdict::Equivalent, Some(true)) => equivalent += 1,
            (FcVerdict::NotEquivalent { vector, .. }, Some(false)) => {
                assert_eq!(vector[0], vector[2], "pair {i}")
            }
            (FcVerdict::DomainMismatch(_), None) => {}
            _ => panic!("pair {i}: {got:?} against {expected:?}"),
        }
    }
    for (m1, m2) in &pairs[..3] {
        assert!(matches!(
            decide_equiv_fc(m1, m2, &d).unwrap(),
            FcVerdict::NotEquivalent { .. }
        ));
    }
    format!(
        "30 grammars sliced at 12, {} transducer pairs agree ({equivalent} equivalent)",
        pairs.len()
    )
}

/// `b` with its states listed in reverse order.
fn reversed_states(b: &Butt) -> Butt {
    let n = b.states.len();
    let flip = |q: usize| n - 1 - q;
    let mut r = b.clone();
    r.states.reverse();
    r.finals = b.finals.iter().map(|&q| flip(q)).collect();
    for rule in &mut r.rules {
        rule.target = flip(rule.target);
        rule.children = rule.children.iter().map(|&q| flip(q)).collect();
    }
    r
}

fn bottom_up_suite() -> String {
    let alpha = RankedAlphabet::from_pairs([("f", 2), ("g", 1), ("c", 0)]).unwrap();
    let trees = trees_up_to(&alpha, 4);
    let butts: Vec<Butt> = (0..30u64)
        .map(|s| random_butt(s, 1 + s as usize % 3, 0.15))
        .collect();
    for (i, b) in butts.iter().enumerate() {
        let m = from_bottom_up(b).unwrap();
        for s in &trees {
            assert_eq!(
                eval(&m, s).unwrap(),
                butt_eval(b, s),
                "transducer {i} on {s}"
            );
        }
    }
    // One level deeper for the pairs: a single changed rule can first matter at height 5.
    let taller = trees_up_to(&alpha, 5);
    let mut equivalent = 0;
    for (i, b1) in butts.iter().enumerate() {
        let b2 = match i % 3 {
            0 => butts[(i + 7) % butts.len()].clone(),
            1 => reversed_states(b1),
            _ => {
                let mut b = b1.clone();
                let donor = random_butt(100 + i as u64, b.states.len(), 0.0);
                let j = i % b.rules.len();
                let r = &b.rules[j];
                let same = donor
                    .rules
                    .iter()
                    .find(|d| d.symbol == r.symbol && d.children == r.children)
                    .unwrap();
                b.rules[j].output = same.output.clone();
                b
            }
        };
        let (m1, m2) = (from_bottom_up(b1).unwrap(), from_bottom_up(&b2).unwrap());
        let differs = taller.iter().any(|s| butt_eval(b1, s) != butt_eval(&b2, s));
        let v = decide_equiv_dtop(&m1, &m2).unwrap();
        assert_eq!(v != Verdict::Equivalent, differs, "pair {i}: {v:?}");
        if let Verdict::DomainMismatch(w) | Verdict::OutputMismatch(w) = &v {
            assert_ne!(butt_eval(b1, w), butt_eval(&b2, w), "pair {i}: witness {w}");
        }
        equivalent += usize::from(!differs);
    }
    format!("30 transducers preserved to height 4, 30 pairs agree to height 5 ({equivalent} equivalent)")
}
