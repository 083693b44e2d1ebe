//! Semilinear sets of Parikh vectors, the Parikh image of a context-free grammar and the
//! equal-count feasibility test.
//!
//! The Parikh image is the least solution of the grammar read as a system of equations
//! over the commutative idempotent semiring of semilinear sets (union, Minkowski sum).
//! Each strongly connected component is solved with Newton's method, which reaches the
//! least fixpoint after as many steps as the component has variables; every Newton step
//! is a linear system solved by Gaussian elimination with the Kleene star.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::parikh::{Cfg, GSym};

pub type Vector = Vec<u64>;

/// `base + N·periods`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearSet {
    pub base: Vector,
    pub periods: Vec<Vector>,
}

/// Finite union of linear sets over one index set, named by `letters`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemilinearSet {
    pub letters: Vec<String>,
    pub sets: Vec<LinearSet>,
}

/// Outcome of [`equal_count_feasible`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Infeasible,
    Witness(Vector),
}

/// Default cap on the number of linear sets in one intermediate value.
pub const DEFAULT_MAX_SETS: usize = 4096;

/// Search cap for the pruning-only span test; giving up keeps a set, which is safe.
const PRUNE_CAP: usize = 4096;

fn is_zero(v: &[u64]) -> bool {
    v.iter().all(|&x| x == 0)
}

fn leq(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

fn vsub(a: &[u64], b: &[u64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn vadd(a: &[u64], b: &[u64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Whether `v` is a nonnegative integer combination of `periods`. `None` when the search
/// visits more than `cap` remainders.
fn in_span(v: &[u64], periods: &[Vector], cap: usize) -> Option<bool> {
    if is_zero(v) {
        return Some(true);
    }
    // coordinates no period can touch must already be zero
    for i in 0..v.len() {
        if v[i] > 0 && periods.iter().all(|p| p[i] == 0) {
            return Some(false);
        }
    }
    let mut seen: HashSet<(usize, Vector)> = HashSet::new();
    let mut stack = vec![(0usize, v.to_vec())];
    while let Some((j, r)) = stack.pop() {
        if is_zero(&r) {
            return Some(true);
        }
        if j == periods.len() || !seen.insert((j, r.clone())) {
            continue;
        }
        if seen.len() > cap {
            return None;
        }
        let p = &periods[j];
        let mut cur = r;
        loop {
            let ok = !is_zero(p) && leq(p, &cur);
            stack.push((j + 1, cur.clone()));
            if !ok {
                break;
            }
            cur = vsub(&cur, p);
        }
    }
    Some(false)
}

impl LinearSet {
    pub fn point(base: Vector) -> Self {
        LinearSet {
            base,
            periods: Vec::new(),
        }
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        leq(&self.base, v) && in_span(&vsub(v, &self.base), &self.periods, usize::MAX) == Some(true)
    }

    fn normalize(mut self) -> Self {
        self.periods.retain(|p| !is_zero(p));
        self.periods.sort();
        self.periods.dedup();
        let mut i = 0;
        while i < self.periods.len() && self.periods.len() <= 12 {
            let mut rest = self.periods.clone();
            let p = rest.remove(i);
            if in_span(&p, &rest, PRUNE_CAP) == Some(true) {
                self.periods = rest;
            } else {
                i += 1;
            }
        }
        self
    }

    /// Sufficient test for `self ⊆ other`.
    fn within(&self, other: &LinearSet) -> bool {
        if !leq(&other.base, &self.base) {
            return false;
        }
        let d = vsub(&self.base, &other.base);
        if in_span(&d, &other.periods, PRUNE_CAP) != Some(true) {
            return false;
        }
        self.periods.iter().all(|p| {
            other.periods.contains(p) || in_span(p, &other.periods, PRUNE_CAP) == Some(true)
        })
    }

    fn plus(&self, other: &LinearSet) -> LinearSet {
        let mut periods = self.periods.clone();
        periods.extend(other.periods.iter().cloned());
        LinearSet {
            base: vadd(&self.base, &other.base),
            periods,
        }
        .normalize()
    }
}

/// Replaces `(b, P) ∪ (b + d, P ∪ {d})` by `(b, P ∪ {d})`, which is the same set.
fn merge_steps(sets: &mut Vec<LinearSet>) {
    'again: loop {
        for i in 0..sets.len() {
            for j in 0..sets.len() {
                if i == j || !leq(&sets[i].base, &sets[j].base) {
                    continue;
                }
                let d = vsub(&sets[j].base, &sets[i].base);
                if is_zero(&d) || sets[i].periods.contains(&d) {
                    continue;
                }
                let mut grown = sets[i].periods.clone();
                grown.push(d);
                grown.sort();
                if grown == sets[j].periods {
                    sets[i].periods = grown;
                    sets.remove(j);
                    continue 'again;
                }
            }
        }
        break;
    }
}

impl SemilinearSet {
    pub fn empty(letters: Vec<String>) -> Self {
        SemilinearSet {
            letters,
            sets: Vec::new(),
        }
    }

    /// `{0}`.
    pub fn unit(letters: Vec<String>) -> Self {
        let n = letters.len();
        SemilinearSet {
            letters,
            sets: vec![LinearSet::point(vec![0; n])],
        }
    }

    pub fn single(letters: Vec<String>, v: Vector) -> Self {
        SemilinearSet {
            letters,
            sets: vec![LinearSet::point(v)],
        }
    }

    pub fn dim(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        v.len() == self.dim() && self.sets.iter().any(|l| l.contains(v))
    }

    fn with_sets(&self, sets: Vec<LinearSet>, max: usize) -> Result<Self> {
        let mut sets: Vec<LinearSet> = sets.into_iter().map(LinearSet::normalize).collect();
        sets.sort();
        sets.dedup();
        // drop sets covered by another; bigger period sets first as likely covers
        sets.sort_by(|a, b| b.periods.len().cmp(&a.periods.len()).then(a.cmp(b)));
        let mut kept: Vec<LinearSet> = Vec::new();
        for l in sets {
            if kept.iter().any(|k| l.within(k)) {
                continue;
            }
            kept.retain(|k| !k.within(&l));
            kept.push(l);
        }
        merge_steps(&mut kept);
        kept.sort();
        if kept.len() > max {
            return Err(Error::Budget(format!(
                "semilinear set with more than {max} linear sets"
            )));
        }
        Ok(SemilinearSet {
            letters: self.letters.clone(),
            sets: kept,
        })
    }

    pub fn union(&self, other: &Self, max: usize) -> Result<Self> {
        if other.is_empty() {
            return Ok(self.clone());
        }
        if self.is_empty() {
            return Ok(other.clone());
        }
        let mut sets = self.sets.clone();
        sets.extend(other.sets.iter().cloned());
        self.with_sets(sets, max)
    }

    /// Minkowski sum.
    pub fn plus(&self, other: &Self, max: usize) -> Result<Self> {
        let mut sets = Vec::with_capacity(self.sets.len() * other.sets.len());
        for a in &self.sets {
            for b in &other.sets {
                sets.push(a.plus(b));
            }
        }
        self.with_sets(sets, max)
    }

    /// Kleene star: the submonoid generated by the set.
    pub fn star(&self, max: usize) -> Result<Self> {
        let mut acc = SemilinearSet::unit(self.letters.clone());
        for l in &self.sets {
            let mut periods = l.periods.clone();
            periods.push(l.base.clone());
            let pumped = LinearSet {
                base: l.base.clone(),
                periods,
            };
            let one = if is_zero(&l.base) {
                self.with_sets(vec![pumped], max)?
            } else {
                self.with_sets(vec![LinearSet::point(vec![0; self.dim()]), pumped], max)?
            };
            acc = acc.plus(&one, max)?;
        }
        Ok(acc)
    }
}

impl fmt::Display for SemilinearSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = |v: &Vector| {
            let xs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            format!("({})", xs.join(","))
        };
        writeln!(f, "letters: {}", self.letters.join(" "))?;
        if self.sets.is_empty() {
            writeln!(f, "empty")?;
        }
        for l in &self.sets {
            write!(f, "linear base {}", v(&l.base))?;
            if !l.periods.is_empty() {
                let ps: Vec<String> = l.periods.iter().map(v).collect();
                write!(f, " periods {}", ps.join(" "))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl Cfg {
    /// Removes unproductive and unreachable nonterminals. The start symbol is always kept.
    pub fn trim(&self) -> Cfg {
        let n = self.nonterminals.len();
        let mut productive = vec![false; n];
        loop {
            let mut changed = false;
            for (a, body) in &self.productions {
                if !productive[*a]
                    && body.iter().all(|s| match s {
                        GSym::T(_) => true,
                        GSym::N(b) => productive[*b],
                    })
                {
                    productive[*a] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let live: Vec<&(usize, Vec<GSym>)> = self
            .productions
            .iter()
            .filter(|(a, body)| {
                productive[*a]
                    && body.iter().all(|s| {
                        matches!(s, GSym::T(_)) || matches!(s, GSym::N(b) if productive[*b])
                    })
            })
            .collect();
        let mut reach = vec![false; n];
        reach[self.start] = true;
        let mut queue = VecDeque::from([self.start]);
        while let Some(a) = queue.pop_front() {
            for (l, body) in &live {
                if *l != a {
                    continue;
                }
                for s in body {
                    if let GSym::N(b) = s {
                        if !reach[*b] {
                            reach[*b] = true;
                            queue.push_back(*b);
                        }
                    }
                }
            }
        }
        let mut map = vec![usize::MAX; n];
        let mut nonterminals = Vec::new();
        for a in 0..n {
            if reach[a] {
                map[a] = nonterminals.len();
                nonterminals.push(self.nonterminals[a].clone());
            }
        }
        let productions = live
            .into_iter()
            .filter(|(a, _)| reach[*a])
            .map(|(a, body)| {
                let body = body
                    .iter()
                    .map(|s| match s {
                        GSym::T(t) => GSym::T(*t),
                        GSym::N(b) => GSym::N(map[*b]),
                    })
                    .collect();
                (map[*a], body)
            })
            .collect();
        Cfg {
            terminals: self.terminals.clone(),
            nonterminals,
            start: map[self.start],
            productions,
        }
    }
}

/// Strongly connected components in dependency order (callees before callers).
fn components(n: usize, edges: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct Tarjan<'a> {
        edges: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    impl Tarjan<'_> {
        fn visit(&mut self, v: usize) {
            self.index[v] = Some(self.next);
            self.low[v] = self.next;
            self.next += 1;
            self.stack.push(v);
            self.on_stack[v] = true;
            for k in 0..self.edges[v].len() {
                let w = self.edges[v][k];
                match self.index[w] {
                    None => {
                        self.visit(w);
                        self.low[v] = self.low[v].min(self.low[w]);
                    }
                    Some(iw) if self.on_stack[w] => self.low[v] = self.low[v].min(iw),
                    _ => {}
                }
            }
            if Some(self.low[v]) == self.index[v] {
                let mut comp = Vec::new();
                while let Some(w) = self.stack.pop() {
                    self.on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort();
                self.out.push(comp);
            }
        }
    }
    let mut t = Tarjan {
        edges,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if t.index[v].is_none() {
            t.visit(v);
        }
    }
    t.out
}

/// A production inside one component: constant part and the component variables it uses.
struct LocalProd {
    lhs: usize,
    constant: SemilinearSet,
    vars: Vec<usize>,
}

/// Parikh image of `L(g)` with the default size cap.
pub fn parikh_image(g: &Cfg) -> Result<SemilinearSet> {
    parikh_image_with(g, DEFAULT_MAX_SETS)
}

pub fn parikh_image_with(g: &Cfg, max: usize) -> Result<SemilinearSet> {
    let letters = g.terminals.clone();
    let dim = letters.len();
    let g = g.trim();
    if !g.productions.iter().any(|(a, _)| *a == g.start) {
        return Ok(SemilinearSet::empty(letters));
    }
    let n = g.nonterminals.len();
    let mut edges = vec![Vec::new(); n];
    for (a, body) in &g.productions {
        for s in body {
            if let GSym::N(b) = s {
                if !edges[*a].contains(b) {
                    edges[*a].push(*b);
                }
            }
        }
    }
    let mut value: Vec<Option<SemilinearSet>> = vec![None; n];
    let empty = SemilinearSet::empty(letters.clone());
    for comp in components(n, &edges) {
        let local: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        let m = comp.len();
        let mut prods = Vec::new();
        for (a, body) in &g.productions {
            let Some(&lhs) = local.get(a) else { continue };
            let mut v = vec![0u64; dim];
            let mut constant = SemilinearSet::unit(letters.clone());
            let mut vars = Vec::new();
            for s in body {
                match s {
                    GSym::T(t) => v[*t] += 1,
                    GSym::N(b) => match local.get(b) {
                        Some(&j) => vars.push(j),
                        None => {
                            let val = value[*b].as_ref().ok_or_else(|| {
                                Error::Internal("component order violated".into())
                            })?;
                            constant = constant.plus(val, max)?;
                        }
                    },
                }
            }
            constant = constant.plus(&SemilinearSet::single(letters.clone(), v), max)?;
            prods.push(LocalProd {
                lhs,
                constant,
                vars,
            });
        }
        let apply = |nu: &[SemilinearSet]| -> Result<Vec<SemilinearSet>> {
            let mut out = vec![empty.clone(); m];
            for p in &prods {
                let mut acc = p.constant.clone();
                for &j in &p.vars {
                    acc = acc.plus(&nu[j], max)?;
                }
                out[p.lhs] = out[p.lhs].union(&acc, max)?;
            }
            Ok(out)
        };
        let zero = vec![empty.clone(); m];
        let mut nu = apply(&zero)?;
        let recursive = prods.iter().any(|p| !p.vars.is_empty());
        if recursive {
            let linear = prods.iter().all(|p| p.vars.len() <= 1);
            let steps = if linear { 1 } else { m };
            for _ in 0..steps {
                let c = apply(&nu)?;
                let mut jac = vec![vec![empty.clone(); m]; m];
                for p in &prods {
                    for (k, &b) in p.vars.iter().enumerate() {
                        if p.vars[..k].contains(&b) {
                            continue;
                        }
                        let mut acc = p.constant.clone();
                        let mut skipped = false;
                        for &j in &p.vars {
                            if j == b && !skipped {
                                skipped = true;
                                continue;
                            }
                            acc = acc.plus(&nu[j], max)?;
                        }
                        jac[p.lhs][b] = jac[p.lhs][b].union(&acc, max)?;
                    }
                }
                let next = solve_linear(c, jac, max)?;
                let mut grown = Vec::with_capacity(m);
                for (a, b) in next.iter().zip(&nu) {
                    grown.push(a.union(b, max)?);
                }
                if grown == nu {
                    break;
                }
                nu = grown;
            }
        }
        for (i, &a) in comp.iter().enumerate() {
            value[a] = Some(nu[i].clone());
        }
    }
    let mut out = value[g.start].take().unwrap_or(empty);
    out.letters = letters;
    Ok(out)
}

/// Least solution of `X = c + J·X` by Gauss-Jordan elimination.
#[allow(clippy::needless_range_loop)]
fn solve_linear(
    mut c: Vec<SemilinearSet>,
    mut jac: Vec<Vec<SemilinearSet>>,
    max: usize,
) -> Result<Vec<SemilinearSet>> {
    let m = c.len();
    for k in 0..m {
        let s = jac[k][k].star(max)?;
        jac[k][k] = SemilinearSet::empty(s.letters.clone());
        c[k] = s.plus(&c[k], max)?;
        for b in 0..m {
            if b != k && !jac[k][b].is_empty() {
                jac[k][b] = s.plus(&jac[k][b], max)?;
            }
        }
        for a in 0..m {
            if a == k || jac[a][k].is_empty() {
                continue;
            }
            let f = std::mem::replace(&mut jac[a][k], SemilinearSet::empty(s.letters.clone()));
            let add = f.plus(&c[k], max)?;
            c[a] = c[a].union(&add, max)?;
            for b in 0..m {
                if b != k && !jac[k][b].is_empty() {
                    let add = f.plus(&jac[k][b], max)?;
                    jac[a][b] = jac[a][b].union(&add, max)?;
                }
            }
        }
    }
    Ok(c)
}

/// Nonnegative solution of `Σ λ_j·coef_j = target`, searched over partial sums kept in
/// the window where a suitable reordering of any solution stays.
fn solve_one_equation(coef: &[i64], target: i64) -> Result<Option<Vec<u64>>> {
    let mut lam = vec![0u64; coef.len()];
    if target == 0 {
        return Ok(Some(lam));
    }
    let used: Vec<usize> = (0..coef.len()).filter(|&j| coef[j] != 0).collect();
    if used.is_empty() {
        return Ok(None);
    }
    let big = used.iter().map(|&j| coef[j].abs()).max().unwrap_or(0);
    let lo = target.min(0) - big;
    let hi = target.max(0) + big;
    let width = (hi - lo + 1) as usize;
    if width > 50_000_000 {
        return Err(Error::Budget(format!("equation window of width {width}")));
    }
    let mut parent: Vec<Option<(i64, usize)>> = vec![None; width];
    let mut seen = vec![false; width];
    let slot = |x: i64| (x - lo) as usize;
    seen[slot(0)] = true;
    let mut queue = VecDeque::from([0i64]);
    while let Some(x) = queue.pop_front() {
        for &j in &used {
            let y = x + coef[j];
            if y < lo || y > hi || seen[slot(y)] {
                continue;
            }
            seen[slot(y)] = true;
            parent[slot(y)] = Some((x, j));
            if y == target {
                let mut cur = y;
                while let Some((p, j)) = parent[slot(cur)] {
                    lam[j] += 1;
                    cur = p;
                }
                return Ok(Some(lam));
            }
            queue.push_back(y);
        }
    }
    Ok(None)
}

/// Looks for `v ∈ s` with `v[a] = v[b]` and `v[i] = n` for every `(i, n)` in `exact`.
pub fn equal_count_feasible(
    s: &SemilinearSet,
    a: usize,
    b: usize,
    exact: &[(usize, u64)],
) -> Result<Feasibility> {
    let dim = s.dim();
    if a >= dim || b >= dim || exact.iter().any(|&(i, _)| i >= dim) {
        return Err(Error::Invalid("letter index out of range".into()));
    }
    for l in &s.sets {
        if exact.iter().any(|&(i, n)| l.base[i] > n) {
            continue;
        }
        let (fixed, free): (Vec<&Vector>, Vec<&Vector>) = l
            .periods
            .iter()
            .partition(|p| exact.iter().any(|&(i, _)| p[i] > 0));
        let coef: Vec<i64> = free.iter().map(|p| p[a] as i64 - p[b] as i64).collect();
        // enumerate multiplicities of the periods that touch constrained letters
        let mut stack = vec![(0usize, l.base.clone())];
        while let Some((j, cur)) = stack.pop() {
            if j == fixed.len() {
                if exact.iter().any(|&(i, n)| cur[i] != n) {
                    continue;
                }
                let target = cur[b] as i64 - cur[a] as i64;
                if let Some(lam) = solve_one_equation(&coef, target)? {
                    let mut v = cur.clone();
                    for (p, &k) in free.iter().zip(&lam) {
                        for (x, y) in v.iter_mut().zip(p.iter()) {
                            *x += y * k;
                        }
                    }
                    return Ok(Feasibility::Witness(v));
                }
                continue;
            }
            let p = fixed[j];
            let mut v = cur;
            loop {
                stack.push((j + 1, v.clone()));
                v = vadd(&v, p);
                if exact.iter().any(|&(i, n)| v[i] > n) {
                    break;
                }
            }
        }
    }
    Ok(Feasibility::Infeasible)
}
