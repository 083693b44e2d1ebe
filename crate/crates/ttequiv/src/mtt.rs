//! Macro tree transducers (with DTOPs as the parameterless case), bottom-up transducers,
//! and their evaluation semantics.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::automata::Dbta;
use crate::error::{Error, Result};
use crate::trees::{sym, Path, RankedAlphabet, Sym, Tree};

/// Reserved hole symbol marking the blocked position of a partial input.
pub const HOLE: &str = "x";

/// True for names that the term syntax reserves: the hole and the variables `x_i`, `y_j`.
pub fn is_reserved(name: &str) -> bool {
    name == HOLE || var_index(name, 'x').is_some() || var_index(name, 'y').is_some()
}

pub(crate) fn var_index(name: &str, prefix: char) -> Option<usize> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

/// Right-hand side of a rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rhs {
    /// Output symbol with its children.
    Out(Sym, Vec<Rhs>),
    /// State call; the first argument must be an input variable, the rest are parameters.
    Call(Sym, Vec<Rhs>),
    /// Input variable `x_i` (1-based).
    X(usize),
    /// Parameter `y_j` (1-based).
    Y(usize),
}

impl Rhs {
    pub fn out(s: &str, cs: Vec<Rhs>) -> Rhs {
        Rhs::Out(sym(s), cs)
    }

    /// Call `q(x_i, params…)`.
    pub fn call(q: &str, i: usize, params: Vec<Rhs>) -> Rhs {
        let mut args = vec![Rhs::X(i)];
        args.extend(params);
        Rhs::Call(sym(q), args)
    }

    /// Reads a term: `x<i>`/`y<j>` are variables, names in `states` are calls, the rest output.
    pub fn from_tree(t: &Tree, states: &RankedAlphabet) -> Rhs {
        if t.children.is_empty() {
            if let Some(i) = var_index(&t.label, 'x') {
                return Rhs::X(i);
            }
            if let Some(j) = var_index(&t.label, 'y') {
                return Rhs::Y(j);
            }
        }
        let cs = t
            .children
            .iter()
            .map(|c| Rhs::from_tree(c, states))
            .collect();
        if states.contains(&t.label) {
            Rhs::Call(t.label.clone(), cs)
        } else {
            Rhs::Out(t.label.clone(), cs)
        }
    }

    pub fn to_tree(&self) -> Tree {
        match self {
            Rhs::Out(s, cs) | Rhs::Call(s, cs) => {
                Tree::with_sym(s.clone(), cs.iter().map(Rhs::to_tree).collect())
            }
            Rhs::X(i) => Tree::leaf(&format!("x{i}")),
            Rhs::Y(j) => Tree::leaf(&format!("y{j}")),
        }
    }

    /// Output height, where a state call is one node above its parameters.
    pub fn height(&self) -> usize {
        match self {
            Rhs::Out(_, cs) => 1 + cs.iter().map(Rhs::height).max().unwrap_or(0),
            Rhs::Call(_, ps) => 1 + ps.iter().skip(1).map(Rhs::height).max().unwrap_or(0),
            _ => 1,
        }
    }

    /// Visits every state call `(state, input variable index)` in pre-order.
    pub fn for_each_call(&self, f: &mut impl FnMut(&Sym, usize)) {
        match self {
            Rhs::Out(_, cs) => cs.iter().for_each(|c| c.for_each_call(f)),
            Rhs::Call(q, args) => {
                if let Some(Rhs::X(i)) = args.first() {
                    f(q, *i);
                }
                args.iter().for_each(|c| c.for_each_call(f));
            }
            _ => {}
        }
    }

    pub fn calls(&self) -> Vec<(Sym, usize)> {
        let mut v = Vec::new();
        self.for_each_call(&mut |q, i| v.push((q.clone(), i)));
        v
    }

    /// Number of occurrences of `y_j`.
    pub fn count_param(&self, j: usize) -> usize {
        match self {
            Rhs::Out(_, cs) | Rhs::Call(_, cs) => cs.iter().map(|c| c.count_param(j)).sum(),
            Rhs::Y(k) => usize::from(*k == j),
            Rhs::X(_) => 0,
        }
    }

    /// Number of occurrences of `x_i` (as call arguments).
    pub fn count_input(&self, i: usize) -> usize {
        match self {
            Rhs::Out(_, cs) | Rhs::Call(_, cs) => cs.iter().map(|c| c.count_input(i)).sum(),
            Rhs::X(k) => usize::from(*k == i),
            Rhs::Y(_) => 0,
        }
    }

    /// Renames called states.
    pub fn map_calls(&self, f: &impl Fn(&Sym, usize) -> Sym) -> Rhs {
        match self {
            Rhs::Out(s, cs) => Rhs::Out(s.clone(), cs.iter().map(|c| c.map_calls(f)).collect()),
            Rhs::Call(q, args) => {
                let i = match args.first() {
                    Some(Rhs::X(i)) => *i,
                    _ => 0,
                };
                Rhs::Call(f(q, i), args.iter().map(|c| c.map_calls(f)).collect())
            }
            other => other.clone(),
        }
    }
}

impl fmt::Display for Rhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_tree())
    }
}

/// One rule `q(σ(x1..xk), y1..ym) -> rhs <p1..pk>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub state: Sym,
    pub symbol: Sym,
    /// Look-ahead states of the children; empty when the transducer has no look-ahead.
    pub lookahead: Vec<usize>,
    pub rhs: Rhs,
}

type RuleKey = (Sym, Sym, Vec<usize>);

/// Deterministic macro tree transducer with optional regular look-ahead.
#[derive(Debug, Clone)]
pub struct Mtt {
    /// State name to rank (`m + 1` for `m` parameters).
    pub states: RankedAlphabet,
    pub input: RankedAlphabet,
    pub output: RankedAlphabet,
    pub initial: Sym,
    pub lookahead: Option<Dbta>,
    rules: Vec<Rule>,
    index: HashMap<RuleKey, usize>,
}

impl PartialEq for Mtt {
    fn eq(&self, other: &Self) -> bool {
        self.states == other.states
            && self.input == other.input
            && self.output == other.output
            && self.initial == other.initial
            && self.lookahead == other.lookahead
            && self.sorted_rules() == other.sorted_rules()
    }
}

impl Mtt {
    fn sorted_rules(&self) -> Vec<&Rule> {
        let mut v: Vec<&Rule> = self.rules.iter().collect();
        v.sort_by(|a, b| {
            (&a.state, &a.symbol, &a.lookahead).cmp(&(&b.state, &b.symbol, &b.lookahead))
        });
        v
    }

    pub fn new(
        states: RankedAlphabet,
        input: RankedAlphabet,
        output: RankedAlphabet,
        initial: &str,
        lookahead: Option<Dbta>,
        rules: Vec<Rule>,
    ) -> Self {
        let mut m = Mtt {
            states,
            input,
            output,
            initial: sym(initial),
            lookahead,
            rules: Vec::new(),
            index: HashMap::new(),
        };
        for r in rules {
            m.push_rule(r);
        }
        m
    }

    /// Adds a rule; a later rule with the same key is kept (for diagnostics) but never used.
    pub fn push_rule(&mut self, r: Rule) {
        let key = (r.state.clone(), r.symbol.clone(), r.lookahead.clone());
        self.index.entry(key).or_insert(self.rules.len());
        self.rules.push(r);
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, q: &str, sigma: &str, la: &[usize]) -> Option<&Rhs> {
        self.index
            .get(&(sym(q), sym(sigma), la.to_vec()))
            .map(|&i| &self.rules[i].rhs)
    }

    /// Number of parameters of `q`.
    pub fn params(&self, q: &str) -> usize {
        self.states.rank(q).unwrap_or(1).saturating_sub(1)
    }

    pub fn is_dtop(&self) -> bool {
        self.states.iter().all(|(_, r)| r == 1)
    }

    pub fn is_monadic(&self) -> bool {
        self.input.is_monadic() && self.output.is_monadic()
    }

    pub fn max_rhs_height(&self) -> usize {
        self.rules.iter().map(|r| r.rhs.height()).max().unwrap_or(0)
    }

    /// Every state has a rule for every symbol and look-ahead tuple, over a complete look-ahead.
    pub fn is_total(&self) -> bool {
        self.first_missing_rule().is_none()
    }

    /// Some `(state, symbol, look-ahead tuple)` lacking a rule, if any.
    pub fn first_missing_rule(&self) -> Option<(Sym, Sym, Vec<usize>)> {
        if let Some(la) = &self.lookahead {
            if !la.is_complete() {
                return Some((self.initial.clone(), sym("<incomplete look-ahead>"), vec![]));
            }
        }
        let n = self.lookahead.as_ref().map(|l| l.states.len());
        for (q, _) in self.states.iter() {
            for (s, k) in self.input.iter() {
                let tuples: Vec<Vec<usize>> = match n {
                    Some(n) => crate::automata::tuples(n, k).collect(),
                    None => vec![vec![]],
                };
                for t in tuples {
                    if self.rule(q, s, &t).is_none() {
                        return Some((q.clone(), s.clone(), t));
                    }
                }
            }
        }
        None
    }

    /// Renames every state through `f` (which must be injective).
    pub fn rename_states(&self, f: impl Fn(&str) -> String) -> Mtt {
        let mut states = RankedAlphabet::new();
        for (q, r) in self.states.iter() {
            states.insert(&f(q), r).expect("injective renaming");
        }
        let rules = self
            .rules
            .iter()
            .map(|r| Rule {
                state: sym(&f(&r.state)),
                symbol: r.symbol.clone(),
                lookahead: r.lookahead.clone(),
                rhs: r.rhs.map_calls(&|q, _| sym(&f(q))),
            })
            .collect();
        Mtt::new(
            states,
            self.input.clone(),
            self.output.clone(),
            &f(&self.initial),
            self.lookahead.clone(),
            rules,
        )
    }

    /// Returns a copy with the rule for `(q, σ, la)` replaced (or added).
    pub fn with_rule(&self, q: &str, sigma: &str, la: &[usize], rhs: Rhs) -> Mtt {
        let mut rules: Vec<Rule> = self
            .rules
            .iter()
            .filter(|r| !(&*r.state == q && &*r.symbol == sigma && r.lookahead == la))
            .cloned()
            .collect();
        rules.push(Rule {
            state: sym(q),
            symbol: sym(sigma),
            lookahead: la.to_vec(),
            rhs,
        });
        Mtt::new(
            self.states.clone(),
            self.input.clone(),
            self.output.clone(),
            &self.initial,
            self.lookahead.clone(),
            rules,
        )
    }
}

/// A structural problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Rule in `q(σ) <la>` form; `None` for transducer-level problems.
    pub rule: Option<String>,
    /// Node inside the right-hand side.
    pub path: Path,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rule {
            Some(r) => write!(f, "rule {r} at {}: {}", self.path, self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

fn rule_name(r: &Rule) -> String {
    if r.lookahead.is_empty() {
        format!("{}({})", r.state, r.symbol)
    } else {
        let la: Vec<String> = r.lookahead.iter().map(|p| p.to_string()).collect();
        format!("{}({}) <{}>", r.state, r.symbol, la.join(","))
    }
}

/// Lists every violated structural invariant; empty iff the transducer is well formed.
pub fn validate(m: &Mtt) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut top = |msg: String| {
        out.push(Diagnostic {
            rule: None,
            path: Path::root(),
            message: msg,
        })
    };
    match m.states.rank(&m.initial) {
        None => top(format!("initial state `{}` is not declared", m.initial)),
        Some(1) => {}
        Some(r) => top(format!(
            "initial state `{}` has rank {r}, expected 1",
            m.initial
        )),
    }
    for (q, r) in m.states.iter() {
        if r == 0 {
            top(format!("state `{q}` has rank 0"));
        }
        if is_reserved(q) {
            top(format!("state name `{q}` is reserved"));
        }
        if m.output.contains(q) {
            top(format!("`{q}` is both a state and an output symbol"));
        }
    }
    for (s, _) in m.input.iter().chain(m.output.iter()) {
        if is_reserved(s) {
            top(format!("symbol `{s}` is reserved"));
        }
    }
    if let Some(la) = &m.lookahead {
        if !la.alphabet.same_as(&m.input) {
            top("look-ahead alphabet differs from the input alphabet".to_string());
        }
    }
    let mut seen = BTreeSet::new();
    for r in &m.rules {
        let name = rule_name(r);
        let mut diag = |path: Path, message: String| {
            out.push(Diagnostic {
                rule: Some(name.clone()),
                path,
                message,
            })
        };
        if !seen.insert((r.state.clone(), r.symbol.clone(), r.lookahead.clone())) {
            diag(
                Path::root(),
                "duplicate rule for the same key (nondeterministic)".into(),
            );
        }
        let Some(qr) = m.states.rank(&r.state) else {
            diag(Path::root(), format!("undeclared state `{}`", r.state));
            continue;
        };
        let Some(k) = m.input.rank(&r.symbol) else {
            diag(
                Path::root(),
                format!("undeclared input symbol `{}`", r.symbol),
            );
            continue;
        };
        match &m.lookahead {
            None if !r.lookahead.is_empty() => diag(
                Path::root(),
                "look-ahead tuple without a look-ahead automaton".into(),
            ),
            Some(la)
                if r.lookahead.len() != k || r.lookahead.iter().any(|&p| p >= la.states.len()) =>
            {
                diag(
                    Path::root(),
                    format!("look-ahead tuple must name {k} look-ahead states"),
                )
            }
            _ => {}
        }
        check_rhs(m, &r.rhs, k, qr - 1, Path::root(), &mut diag);
    }
    out
}

fn check_rhs(
    m: &Mtt,
    t: &Rhs,
    k: usize,
    params: usize,
    path: Path,
    diag: &mut impl FnMut(Path, String),
) {
    match t {
        Rhs::Out(s, cs) => {
            match m.output.rank(s) {
                None => diag(path.clone(), format!("unknown output symbol `{s}`")),
                Some(r) if r != cs.len() => diag(
                    path.clone(),
                    format!("output symbol `{s}` has rank {r} but {} children", cs.len()),
                ),
                _ => {}
            }
            for (i, c) in cs.iter().enumerate() {
                check_rhs(m, c, k, params, path.child(i + 1), diag);
            }
        }
        Rhs::Call(q, args) => {
            if let Some(r) = m.states.rank(q) {
                if r != args.len() {
                    diag(
                        path.clone(),
                        format!("state `{q}` has rank {r} but {} arguments", args.len()),
                    );
                }
            }
            match args.first() {
                Some(Rhs::X(i)) if (1..=k).contains(i) => {}
                Some(Rhs::X(i)) => diag(path.child(1), format!("x{i} exceeds the input rank {k}")),
                _ => diag(
                    path.clone(),
                    format!("first argument of state call `{q}` must be an input variable x_i"),
                ),
            }
            for (i, c) in args.iter().enumerate().skip(1) {
                check_rhs(m, c, k, params, path.child(i + 1), diag);
            }
        }
        Rhs::X(i) => diag(
            path,
            format!("x{i} may only appear as the first argument of a state call"),
        ),
        Rhs::Y(j) => {
            if *j == 0 || *j > params {
                diag(path, format!("y{j} is not a parameter of this state"));
            }
        }
    }
}

/// Output of evaluation on a partial input: pending calls `q(x, t1..tm)` stand for
/// translations still blocked at the hole.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PartialOutput {
    Node(Sym, Vec<PartialOutput>),
    Pending(Sym, Vec<PartialOutput>),
}

impl PartialOutput {
    /// Node count; a pending call is one node and the hole is not counted.
    pub fn size(&self) -> usize {
        match self {
            PartialOutput::Node(_, cs) | PartialOutput::Pending(_, cs) => {
                1 + cs.iter().map(PartialOutput::size).sum::<usize>()
            }
        }
    }

    /// Height with the same accounting as [`PartialOutput::size`].
    pub fn height(&self) -> usize {
        match self {
            PartialOutput::Node(_, cs) | PartialOutput::Pending(_, cs) => {
                1 + cs.iter().map(PartialOutput::height).max().unwrap_or(0)
            }
        }
    }

    /// As a plain tree, pending calls written `q(x, t1..tm)`.
    pub fn to_tree(&self) -> Tree {
        match self {
            PartialOutput::Node(s, cs) => {
                Tree::with_sym(s.clone(), cs.iter().map(PartialOutput::to_tree).collect())
            }
            PartialOutput::Pending(q, cs) => {
                let mut v = vec![Tree::leaf(HOLE)];
                v.extend(cs.iter().map(PartialOutput::to_tree));
                Tree::with_sym(q.clone(), v)
            }
        }
    }

    /// The output tree, if no call is pending.
    pub fn complete(&self) -> Option<Tree> {
        match self {
            PartialOutput::Node(s, cs) => Some(Tree::with_sym(
                s.clone(),
                cs.iter()
                    .map(PartialOutput::complete)
                    .collect::<Option<_>>()?,
            )),
            PartialOutput::Pending(..) => None,
        }
    }

    fn from_tree(t: &Tree) -> PartialOutput {
        PartialOutput::Node(
            t.label.clone(),
            t.children.iter().map(PartialOutput::from_tree).collect(),
        )
    }

    pub fn pending_count(&self) -> usize {
        match self {
            PartialOutput::Node(_, cs) => cs.iter().map(PartialOutput::pending_count).sum(),
            PartialOutput::Pending(_, cs) => {
                1 + cs.iter().map(PartialOutput::pending_count).sum::<usize>()
            }
        }
    }

    /// Replaces every pending call `q(x, t̄)` by `M_q(s)[y_j ← t_j]`, innermost first.
    pub fn fill(&self, m: &Mtt, s: &Tree) -> Result<Option<Tree>> {
        match self {
            PartialOutput::Node(l, cs) => {
                let mut v = Vec::with_capacity(cs.len());
                for c in cs {
                    match c.fill(m, s)? {
                        Some(t) => v.push(t),
                        None => return Ok(None),
                    }
                }
                Ok(Some(Tree::with_sym(l.clone(), v)))
            }
            PartialOutput::Pending(q, cs) => {
                let mut params = Vec::with_capacity(cs.len());
                for c in cs {
                    match c.fill(m, s)? {
                        Some(t) => params.push(t),
                        None => return Ok(None),
                    }
                }
                eval_state(m, q, s, &params)
            }
        }
    }
}

impl fmt::Display for PartialOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_tree())
    }
}

/// Resource guards for evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EvalLimits {
    /// Maximum nesting of state calls along the input.
    pub max_depth: usize,
    /// Maximum number of output nodes built.
    pub max_output: usize,
}

impl Default for EvalLimits {
    fn default() -> Self {
        EvalLimits {
            max_depth: 1_000,
            max_output: 20_000_000,
        }
    }
}

/// Look-ahead states of every node of an input (`None` for stuck runs and the hole).
#[derive(Debug, Clone)]
pub struct Annot {
    pub state: Option<usize>,
    pub children: Vec<Annot>,
}

pub fn annotate(la: &Dbta, t: &Tree) -> Annot {
    let children: Vec<Annot> = t.children.iter().map(|c| annotate(la, c)).collect();
    let state = if &*t.label == HOLE && t.children.is_empty() {
        None
    } else {
        children
            .iter()
            .map(|c| c.state)
            .collect::<Option<Vec<_>>>()
            .and_then(|qs| la.step(&t.label, &qs))
    };
    Annot { state, children }
}

fn check_input(m: &Mtt, t: &Tree, allow_hole: bool) -> Result<usize> {
    if allow_hole && &*t.label == HOLE && t.children.is_empty() {
        return Ok(1);
    }
    match m.input.rank(&t.label) {
        Some(k) if k == t.children.len() => {}
        _ => {
            return Err(Error::AlphabetMismatch(format!(
                "input node `{}` with {} children is not over the input alphabet",
                t.label,
                t.children.len()
            )))
        }
    }
    let mut holes = 0;
    for c in &t.children {
        holes += check_input(m, c, allow_hole)?;
    }
    Ok(holes)
}

struct Evaluator<'a> {
    m: &'a Mtt,
    limits: EvalLimits,
    produced: usize,
}

impl Evaluator<'_> {
    fn state(
        &mut self,
        q: &Sym,
        s: &Tree,
        la: Option<&Annot>,
        params: Vec<PartialOutput>,
        depth: usize,
    ) -> Result<Option<PartialOutput>> {
        if depth > self.limits.max_depth {
            return Err(Error::Budget(format!(
                "evaluation depth exceeds {}",
                self.limits.max_depth
            )));
        }
        if &*s.label == HOLE && s.children.is_empty() {
            return Ok(Some(PartialOutput::Pending(q.clone(), params)));
        }
        let tuple: Vec<usize> = match la {
            None => Vec::new(),
            Some(a) => {
                let mut v = Vec::with_capacity(a.children.len());
                for (c, sc) in a.children.iter().zip(&s.children) {
                    match c.state {
                        Some(p) => v.push(p),
                        None if &*sc.label == HOLE && sc.children.is_empty() => {
                            return Err(Error::Invalid(
                                "look-ahead state at the hole is unknown".into(),
                            ))
                        }
                        None => return Ok(None),
                    }
                }
                v
            }
        };
        let Some(rhs) = self.m.rule(q, &s.label, &tuple) else {
            return Ok(None);
        };
        self.rhs(rhs, s, la, &params, depth)
    }

    fn rhs(
        &mut self,
        t: &Rhs,
        s: &Tree,
        la: Option<&Annot>,
        params: &[PartialOutput],
        depth: usize,
    ) -> Result<Option<PartialOutput>> {
        match t {
            Rhs::Out(d, cs) => {
                self.produced += 1;
                if self.produced > self.limits.max_output {
                    return Err(Error::Budget(format!(
                        "output exceeds {} nodes",
                        self.limits.max_output
                    )));
                }
                let mut v = Vec::with_capacity(cs.len());
                for c in cs {
                    match self.rhs(c, s, la, params, depth)? {
                        Some(o) => v.push(o),
                        None => return Ok(None),
                    }
                }
                Ok(Some(PartialOutput::Node(d.clone(), v)))
            }
            Rhs::Y(j) => params
                .get(j.wrapping_sub(1))
                .cloned()
                .map(Some)
                .ok_or_else(|| Error::Malformed(format!("y{j} is not bound"))),
            Rhs::X(i) => Err(Error::Malformed(format!("x{i} outside a state call"))),
            Rhs::Call(q, args) => {
                let i = match args.first() {
                    Some(Rhs::X(i)) if (1..=s.children.len()).contains(i) => *i,
                    _ => {
                        return Err(Error::Malformed(format!(
                            "bad first argument in call of `{q}`"
                        )))
                    }
                };
                let mut vals = Vec::with_capacity(args.len() - 1);
                for a in &args[1..] {
                    match self.rhs(a, s, la, params, depth)? {
                        Some(o) => vals.push(o),
                        None => return Ok(None),
                    }
                }
                let child_la = la.map(|a| &a.children[i - 1]);
                self.state(q, &s.children[i - 1], child_la, vals, depth + 1)
            }
        }
    }
}

fn run(
    m: &Mtt,
    q: &Sym,
    s: &Tree,
    la_source: &Tree,
    params: Vec<PartialOutput>,
    limits: EvalLimits,
) -> Result<Option<PartialOutput>> {
    let annot = m.lookahead.as_ref().map(|la| annotate(la, la_source));
    let mut ev = Evaluator {
        m,
        limits,
        produced: 0,
    };
    ev.state(q, s, annot.as_ref(), params, 0)
}

/// `M(s)`, or `None` when undefined.
pub fn eval(m: &Mtt, s: &Tree) -> Result<Option<Tree>> {
    eval_with(m, s, EvalLimits::default())
}

pub fn eval_with(m: &Mtt, s: &Tree, limits: EvalLimits) -> Result<Option<Tree>> {
    check_input(m, s, false)?;
    Ok(run(m, &m.initial, s, s, Vec::new(), limits)?.and_then(|o| o.complete()))
}

/// `M_q(s)[y_j ← params_j]`, or `None` when undefined.
pub fn eval_state(m: &Mtt, q: &str, s: &Tree, params: &[Tree]) -> Result<Option<Tree>> {
    check_input(m, s, false)?;
    if m.states.rank(q) != Some(params.len() + 1) {
        return Err(Error::Invalid(format!(
            "state `{q}` does not take {} parameters",
            params.len()
        )));
    }
    let ps = params.iter().map(PartialOutput::from_tree).collect();
    Ok(run(m, &sym(q), s, s, ps, EvalLimits::default())?.and_then(|o| o.complete()))
}

/// Evaluates `M` on `s[u ← x]`, leaving pending calls at the hole. Look-ahead is read from
/// the full tree `s`, which must lie in the domain of `M`.
pub fn eval_partial(m: &Mtt, s: &Tree, u: &Path) -> Result<PartialOutput> {
    check_input(m, s, false)?;
    if eval(m, s)?.is_none() {
        return Err(Error::NotInDomain);
    }
    eval_partial_unchecked(m, s, u)?
        .ok_or_else(|| Error::Internal("partial output undefined inside the domain".into()))
}

/// As [`eval_partial`] without the domain check; `None` when some call is undefined.
pub fn eval_partial_unchecked(m: &Mtt, s: &Tree, u: &Path) -> Result<Option<PartialOutput>> {
    check_input(m, s, false)?;
    if s.subtree_at(u).is_none() {
        return Err(Error::InvalidPath(u.to_string()));
    }
    let holed = crate::trees::replace_at(s, u, &Tree::leaf(HOLE))?;
    run(m, &m.initial, &holed, s, Vec::new(), EvalLimits::default())
}

/// Evaluates on a tree that already contains exactly one hole leaf `x`.
pub fn eval_holed(m: &Mtt, t: &Tree) -> Result<Option<PartialOutput>> {
    if check_input(m, t, true)? != 1 {
        return Err(Error::Invalid(
            "partial input must contain exactly one hole `x`".into(),
        ));
    }
    run(m, &m.initial, t, t, Vec::new(), EvalLimits::default())
}

/// `(h_balance, s_balance)`: absolute height and size differences of the two partial outputs.
pub fn balance(m1: &Mtt, m2: &Mtt, s: &Tree, u: &Path) -> Result<(usize, usize)> {
    let a = eval_partial(m1, s, u)?;
    let b = eval_partial(m2, s, u)?;
    Ok((a.height().abs_diff(b.height()), a.size().abs_diff(b.size())))
}

/// Balance on a partial input given directly with its hole.
pub fn balance_holed(m1: &Mtt, m2: &Mtt, t: &Tree) -> Result<(usize, usize)> {
    let a = eval_holed(m1, t)?.ok_or(Error::NotInDomain)?;
    let b = eval_holed(m2, t)?.ok_or(Error::NotInDomain)?;
    Ok((a.height().abs_diff(b.height()), a.size().abs_diff(b.size())))
}

/// Rule `σ(q1(x1),…,qk(xk)) -> q(t)` of a bottom-up transducer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ButtRule {
    pub symbol: Sym,
    pub children: Vec<usize>,
    pub target: usize,
    /// Output over Δ and `x_i` leaves (only `Out` and `X` nodes).
    pub output: Rhs,
}

/// Deterministic bottom-up tree transducer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Butt {
    pub states: Vec<String>,
    pub finals: BTreeSet<usize>,
    pub input: RankedAlphabet,
    pub output: RankedAlphabet,
    pub rules: Vec<ButtRule>,
}

impl Butt {
    /// Lists problems: duplicate keys, bad ranks, and non-`Out`/`X` output nodes.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for r in &self.rules {
            if !seen.insert((r.symbol.clone(), r.children.clone())) {
                out.push(format!(
                    "duplicate rule for `{}` on the same states",
                    r.symbol
                ));
            }
            match self.input.rank(&r.symbol) {
                Some(k) if k == r.children.len() => {}
                _ => out.push(format!(
                    "bad input symbol or arity in rule for `{}`",
                    r.symbol
                )),
            }
            if r.target >= self.states.len() || r.children.iter().any(|&c| c >= self.states.len()) {
                out.push(format!("undeclared state in rule for `{}`", r.symbol));
            }
            fn ok(t: &Rhs, m: &RankedAlphabet, k: usize) -> bool {
                match t {
                    Rhs::Out(s, cs) => {
                        m.rank(s) == Some(cs.len()) && cs.iter().all(|c| ok(c, m, k))
                    }
                    Rhs::X(i) => (1..=k).contains(i),
                    _ => false,
                }
            }
            if !ok(&r.output, &self.output, r.children.len()) {
                out.push(format!("bad output term in rule for `{}`", r.symbol));
            }
        }
        out
    }
}
