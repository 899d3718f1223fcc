//! Grounding over a fixed universe, Tseitin encoding, a DPLL solver with
//! optional clause learning, Herbrand grounding of ∃*∀* sentences, and DIMACS.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use itertools::Itertools;

use crate::formula::{Atom, Formula, Limits, PrenexForm, Quantifier, Term, Vocabulary};
use crate::structures::{pow, tuple_at, FiniteStructure};
use crate::{Error, Result};

/// A ground atom. Arguments index the table's ground terms: universe
/// elements for fixed-universe grounding, named constants for Herbrand
/// grounding.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroundAtom {
    Pred {
        name: String,
        args: Vec<usize>,
    },
    /// Equality between two distinct ground terms, smaller index first.
    Eq(usize, usize),
    /// The constant `name` denotes element `elem`.
    ConstIs {
        name: String,
        elem: usize,
    },
    /// The top-level existential `var` is witnessed by `elem`.
    Witness {
        var: String,
        elem: usize,
    },
}

/// Bijection between ground atoms and the ids `1..=len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AtomTable {
    atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, u32>,
    terms: Vec<String>,
}

impl AtomTable {
    pub fn new(terms: Vec<String>) -> Self {
        AtomTable { atoms: Vec::new(), index: HashMap::new(), terms }
    }

    pub fn intern(&mut self, atom: GroundAtom) -> u32 {
        if let Some(&id) = self.index.get(&atom) {
            return id;
        }
        self.atoms.push(atom.clone());
        let id = self.atoms.len() as u32;
        self.index.insert(atom, id);
        id
    }

    pub fn id(&self, atom: &GroundAtom) -> Option<u32> {
        self.index.get(atom).copied()
    }

    pub fn atom(&self, id: u32) -> &GroundAtom {
        &self.atoms[id as usize - 1]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &GroundAtom)> {
        self.atoms.iter().enumerate().map(|(i, a)| (i as u32 + 1, a))
    }

    /// Human-readable form of atom `id`, e.g. `P(0,1)` or `c_x=c_y`.
    pub fn name(&self, id: u32) -> String {
        let term = |i: usize| self.terms.get(i).cloned().unwrap_or_else(|| i.to_string());
        match self.atom(id) {
            GroundAtom::Pred { name, args } if args.is_empty() => name.clone(),
            GroundAtom::Pred { name, args } => format!("{name}({})", args.iter().map(|&a| term(a)).join(",")),
            GroundAtom::Eq(a, b) => format!("{}={}", term(*a), term(*b)),
            GroundAtom::ConstIs { name, elem } => format!("{name}={elem}"),
            GroundAtom::Witness { var, elem } => format!("?{var}={elem}"),
        }
    }
}

/// Propositional formula over atom ids. The smart constructors never build
/// empty `And`/`Or` nodes and fold constants away.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PropFormula {
    True,
    False,
    Lit(i32),
    Not(Box<PropFormula>),
    And(Vec<PropFormula>),
    Or(Vec<PropFormula>),
}

impl PropFormula {
    pub fn and(items: impl IntoIterator<Item = PropFormula>) -> PropFormula {
        let mut out = Vec::new();
        for p in items {
            match p {
                PropFormula::True => {}
                PropFormula::False => return PropFormula::False,
                PropFormula::And(xs) => out.extend(xs),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => PropFormula::True,
            1 => out.pop().unwrap(),
            _ => PropFormula::And(out),
        }
    }

    pub fn or(items: impl IntoIterator<Item = PropFormula>) -> PropFormula {
        let mut out = Vec::new();
        for p in items {
            match p {
                PropFormula::False => {}
                PropFormula::True => return PropFormula::True,
                PropFormula::Or(xs) => out.extend(xs),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => PropFormula::False,
            1 => out.pop().unwrap(),
            _ => PropFormula::Or(out),
        }
    }

    pub fn not(p: PropFormula) -> PropFormula {
        match p {
            PropFormula::True => PropFormula::False,
            PropFormula::False => PropFormula::True,
            PropFormula::Lit(l) => PropFormula::Lit(-l),
            PropFormula::Not(g) => *g,
            p => PropFormula::Not(Box::new(p)),
        }
    }

    pub fn constant(b: bool) -> PropFormula {
        if b {
            PropFormula::True
        } else {
            PropFormula::False
        }
    }

    /// Truth under `value(atom id)`.
    pub fn eval(&self, value: &impl Fn(u32) -> bool) -> bool {
        match self {
            PropFormula::True => true,
            PropFormula::False => false,
            PropFormula::Lit(l) => value(l.unsigned_abs()) == (*l > 0),
            PropFormula::Not(g) => !g.eval(value),
            PropFormula::And(xs) => xs.iter().all(|x| x.eval(value)),
            PropFormula::Or(xs) => xs.iter().any(|x| x.eval(value)),
        }
    }
}

/// Truth values fixed in advance for some ground atoms and constants.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Pinning {
    atoms: HashMap<(String, Vec<usize>), bool>,
    constants: HashMap<String, usize>,
}

impl Pinning {
    pub fn pin(&mut self, pred: &str, args: &[usize], value: bool) -> &mut Self {
        self.atoms.insert((pred.to_string(), args.to_vec()), value);
        self
    }

    pub fn pin_constant(&mut self, name: &str, elem: usize) -> &mut Self {
        self.constants.insert(name.to_string(), elem);
        self
    }

    /// Pins every atom of the `sigma` predicates, and every constant when
    /// `constants` is set, to its value in `m`.
    pub fn from_structure(m: &FiniteStructure, sigma: &BTreeSet<String>, constants: bool) -> Self {
        let mut pin = Pinning::default();
        for (name, arity) in m.vocabulary().predicates() {
            if sigma.contains(name) {
                for t in 0..pow(m.size(), *arity) {
                    let args = tuple_at(m.size(), *arity, t);
                    let v = m.holds(name, &args);
                    pin.pin(name, &args, v);
                }
            }
        }
        if constants {
            for c in m.vocabulary().constants() {
                pin.pin_constant(c, m.constant(c));
            }
        }
        pin
    }

    fn atom(&self, pred: &str, args: &[usize]) -> Option<bool> {
        if self.atoms.is_empty() {
            return None;
        }
        self.atoms.get(&(pred.to_string(), args.to_vec())).copied()
    }
}

/// Result of fixed-universe grounding. Every predicate atom over the
/// universe is registered, whether or not the formula mentions it, so ids
/// depend only on the vocabulary and `n`.
#[derive(Clone, Debug)]
pub struct Grounding {
    pub formula: PropFormula,
    pub table: AtomTable,
    pub n: usize,
    vocab: Arc<Vocabulary>,
    pinning: Pinning,
}

impl Grounding {
    /// Ids of all predicate atoms and constant selectors; projecting onto
    /// these identifies a structure.
    pub fn structure_atoms(&self) -> Vec<u32> {
        self.table
            .iter()
            .filter(|(_, a)| matches!(a, GroundAtom::Pred { .. } | GroundAtom::ConstIs { .. }))
            .map(|(id, _)| id)
            .collect()
    }

    /// The structure described by an assignment to the table's atoms.
    pub fn decode(&self, value: impl Fn(u32) -> bool) -> FiniteStructure {
        let mut m = FiniteStructure::new(self.vocab.clone(), self.n).expect("n >= 1");
        for (id, atom) in self.table.iter() {
            match atom {
                GroundAtom::Pred { name, args } => {
                    let v = self.pinning.atom(name, args).unwrap_or_else(|| value(id));
                    m.set(name, args, v);
                }
                GroundAtom::ConstIs { name, elem } => {
                    if value(id) {
                        m.set_constant(name, *elem);
                    }
                }
                GroundAtom::Eq(..) | GroundAtom::Witness { .. } => {}
            }
        }
        for (c, &e) in &self.pinning.constants {
            m.set_constant(c, e);
        }
        m
    }
}

pub fn ground_fixed_universe(
    vocab: &Vocabulary,
    pf: &PrenexForm,
    n: usize,
    fixed: Option<&Pinning>,
) -> Result<Grounding> {
    ground_formula(vocab, &pf.to_formula(), n, fixed, &Limits::default())
}

/// Expands quantifiers over `0..n`. Concrete equalities and pinned atoms
/// become constants. Unpinned constants are encoded with one-hot selector
/// atoms, as are existentials reached from the root through conjunctions
/// only.
pub fn ground_formula(
    vocab: &Vocabulary,
    f: &Formula,
    n: usize,
    fixed: Option<&Pinning>,
    limits: &Limits,
) -> Result<Grounding> {
    if n == 0 {
        return Err(Error::invalid("universes are nonempty"));
    }
    if let Some(v) = crate::formula::free_vars(f).into_iter().next() {
        return Err(Error::invalid(format!("grounding needs a sentence; {v} is free")));
    }
    let pinning = fixed.cloned().unwrap_or_default();
    let mut table = AtomTable::new((0..n).map(|e| e.to_string()).collect());
    for (name, arity) in vocab.predicates() {
        for t in 0..pow(n, *arity) {
            table.intern(GroundAtom::Pred { name: name.clone(), args: tuple_at(n, *arity, t) });
        }
    }
    let free_constants: Vec<String> =
        vocab.constants().iter().filter(|c| !pinning.constants.contains_key(*c)).cloned().collect();
    for c in &free_constants {
        for e in 0..n {
            table.intern(GroundAtom::ConstIs { name: c.clone(), elem: e });
        }
    }
    let mut witnesses = Vec::new();
    let f = peel_existentials(f, &mut witnesses);
    let mut symbols: Vec<(String, bool)> = vocab.constants().iter().map(|c| (c.clone(), false)).collect();
    symbols.extend(witnesses.iter().map(|v| (v.clone(), true)));
    for v in &witnesses {
        for e in 0..n {
            table.intern(GroundAtom::Witness { var: v.clone(), elem: e });
        }
    }
    let mut g = Grounder { vocab, n, table, pinning: &pinning, symbols, nodes: 0, cap: limits.ground_nodes };
    let body = g.ground(&f, &mut Vec::new())?;
    let mut parts = vec![body];
    let first_witness = vocab.constants().len();
    let open: Vec<usize> = free_constants
        .iter()
        .map(|c| vocab.constant_index(c).expect("declared"))
        .chain(first_witness..first_witness + witnesses.len())
        .collect();
    for s in open {
        let sel: Vec<i32> = (0..n).map(|e| g.selector(s, e)).collect();
        parts.push(PropFormula::or(sel.iter().map(|&s| PropFormula::Lit(s))));
        for (a, b) in sel.iter().tuple_combinations() {
            parts.push(PropFormula::or([PropFormula::Lit(-a), PropFormula::Lit(-b)]));
        }
    }
    let formula = PropFormula::and(parts);
    Ok(Grounding { formula, table: g.table, n, vocab: Arc::new(vocab.clone()), pinning })
}

/// Strips existentials reachable from the root through `∧`, recording the
/// bound names. A name already taken stays quantified.
fn peel_existentials(f: &Formula, out: &mut Vec<String>) -> Formula {
    match f {
        Formula::Exists(v, g) if !out.contains(v) => {
            out.push(v.clone());
            peel_existentials(g, out)
        }
        Formula::And(a, b) => {
            let a = peel_existentials(a, out);
            Formula::and(a, peel_existentials(b, out))
        }
        _ => f.clone(),
    }
}

#[derive(Clone, Copy)]
enum GTerm {
    Elem(usize),
    Sym(usize),
}

struct Grounder<'a> {
    vocab: &'a Vocabulary,
    n: usize,
    table: AtomTable,
    pinning: &'a Pinning,
    /// Constants, then witnessed variables.
    symbols: Vec<(String, bool)>,
    nodes: usize,
    cap: usize,
}

impl Grounder<'_> {
    fn tick(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.cap {
            return Err(Error::cap("grounding node", self.cap, None));
        }
        Ok(())
    }

    fn selector(&mut self, s: usize, e: usize) -> i32 {
        let (name, witness) = &self.symbols[s];
        let atom = if *witness {
            GroundAtom::Witness { var: name.clone(), elem: e }
        } else {
            GroundAtom::ConstIs { name: name.clone(), elem: e }
        };
        self.table.id(&atom).expect("registered") as i32
    }

    fn term(&self, t: &Term, env: &[(String, usize)]) -> Result<GTerm> {
        match t {
            Term::Var(v) => env
                .iter()
                .rev()
                .find(|(n, _)| n == v)
                .map(|&(_, e)| GTerm::Elem(e))
                .or_else(|| self.symbols.iter().position(|(n, w)| *w && n == v).map(GTerm::Sym))
                .ok_or_else(|| Error::invalid(format!("unbound variable {v}"))),
            Term::Const(c) => {
                if let Some(&e) = self.pinning.constants.get(c) {
                    return Ok(GTerm::Elem(e));
                }
                self.vocab
                    .constant_index(c)
                    .map(GTerm::Sym)
                    .ok_or_else(|| Error::invalid(format!("unknown constant {c}")))
            }
        }
    }

    fn pred_atom(&mut self, name: &str, args: &[usize]) -> PropFormula {
        if let Some(v) = self.pinning.atom(name, args) {
            return PropFormula::constant(v);
        }
        let id = self.table.id(&GroundAtom::Pred { name: name.to_string(), args: args.to_vec() }).expect("registered");
        PropFormula::Lit(id as i32)
    }

    fn atom(&mut self, a: &Atom, env: &[(String, usize)]) -> Result<PropFormula> {
        let args: Vec<GTerm> = a.args().into_iter().map(|t| self.term(t, env)).collect::<Result<_>>()?;
        let syms: Vec<usize> =
            args.iter().filter_map(|t| if let GTerm::Sym(c) = t { Some(*c) } else { None }).unique().collect();
        let mut cases = Vec::new();
        for vals in (0..syms.len()).map(|_| 0..self.n).multi_cartesian_product() {
            self.tick()?;
            let value = |t: &GTerm| match *t {
                GTerm::Elem(e) => e,
                GTerm::Sym(c) => vals[syms.iter().position(|&s| s == c).unwrap()],
            };
            let concrete: Vec<usize> = args.iter().map(value).collect();
            let body = match a {
                Atom::Pred { name, .. } => self.pred_atom(name, &concrete),
                Atom::Eq(..) => PropFormula::constant(concrete[0] == concrete[1]),
            };
            let sels: Vec<PropFormula> =
                syms.iter().zip(&vals).map(|(&c, &e)| PropFormula::Lit(self.selector(c, e))).collect();
            cases.push(PropFormula::and(sels.into_iter().chain([body])));
        }
        Ok(PropFormula::or(cases))
    }

    fn ground(&mut self, f: &Formula, env: &mut Vec<(String, usize)>) -> Result<PropFormula> {
        self.tick()?;
        Ok(match f {
            Formula::True => PropFormula::True,
            Formula::False => PropFormula::False,
            Formula::Atom(a) => self.atom(a, env)?,
            Formula::Not(g) => PropFormula::not(self.ground(g, env)?),
            Formula::And(a, b) => {
                let a = self.ground(a, env)?;
                if a == PropFormula::False {
                    return Ok(a);
                }
                PropFormula::and([a, self.ground(b, env)?])
            }
            Formula::Or(a, b) => {
                let a = self.ground(a, env)?;
                if a == PropFormula::True {
                    return Ok(a);
                }
                PropFormula::or([a, self.ground(b, env)?])
            }
            Formula::Implies(a, b) => {
                let a = PropFormula::not(self.ground(a, env)?);
                if a == PropFormula::True {
                    return Ok(a);
                }
                PropFormula::or([a, self.ground(b, env)?])
            }
            Formula::Iff(a, b) => {
                let (a, b) = (self.ground(a, env)?, self.ground(b, env)?);
                PropFormula::or([
                    PropFormula::and([a.clone(), b.clone()]),
                    PropFormula::and([PropFormula::not(a), PropFormula::not(b)]),
                ])
            }
            Formula::Forall(v, g) | Formula::Exists(v, g) => {
                let universal = matches!(f, Formula::Forall(..));
                let mut parts = Vec::with_capacity(self.n);
                for e in 0..self.n {
                    env.push((v.clone(), e));
                    let p = self.ground(g, env);
                    env.pop();
                    let p = p?;
                    match (&p, universal) {
                        (PropFormula::False, true) => return Ok(PropFormula::False),
                        (PropFormula::True, false) => return Ok(PropFormula::True),
                        _ => parts.push(p),
                    }
                }
                if universal {
                    PropFormula::and(parts)
                } else {
                    PropFormula::or(parts)
                }
            }
        })
    }
}

/// Clause list over variables `1..=num_vars`; literal sign is polarity.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundCnf {
    pub num_vars: u32,
    pub clauses: Vec<Vec<i32>>,
}

impl GroundCnf {
    pub fn satisfied_by(&self, value: impl Fn(u32) -> bool) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|&l| value(l.unsigned_abs()) == (l > 0)))
    }
}

/// Definitional CNF. Fresh variables are numbered after `num_atoms`.
pub fn tseitin(p: &PropFormula, num_atoms: u32) -> GroundCnf {
    let mut t = Tseitin { next: num_atoms, clauses: Vec::new() };
    t.assert(p);
    GroundCnf { num_vars: t.next, clauses: t.clauses }
}

struct Tseitin {
    next: u32,
    clauses: Vec<Vec<i32>>,
}

impl Tseitin {
    fn fresh(&mut self) -> i32 {
        self.next += 1;
        self.next as i32
    }

    fn assert(&mut self, p: &PropFormula) {
        match p {
            PropFormula::True => {}
            PropFormula::False => self.clauses.push(vec![]),
            PropFormula::And(xs) => xs.iter().for_each(|x| self.assert(x)),
            p => {
                let l = self.encode(p);
                self.clauses.push(vec![l]);
            }
        }
    }

    fn encode(&mut self, p: &PropFormula) -> i32 {
        match p {
            PropFormula::Lit(l) => *l,
            PropFormula::Not(g) => -self.encode(g),
            PropFormula::True | PropFormula::False => {
                let t = self.fresh();
                self.clauses.push(vec![if *p == PropFormula::True { t } else { -t }]);
                t
            }
            PropFormula::And(xs) => {
                let lits: Vec<i32> = xs.iter().map(|x| self.encode(x)).collect();
                let t = self.fresh();
                for &l in &lits {
                    self.clauses.push(vec![-t, l]);
                }
                self.clauses.push(std::iter::once(t).chain(lits.iter().map(|l| -l)).collect());
                t
            }
            PropFormula::Or(xs) => {
                let lits: Vec<i32> = xs.iter().map(|x| self.encode(x)).collect();
                let t = self.fresh();
                self.clauses.push(std::iter::once(-t).chain(lits.iter().copied()).collect());
                for &l in &lits {
                    self.clauses.push(vec![-l, t]);
                }
                t
            }
        }
    }
}

/// A total assignment; index 0 is unused.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn value(&self, var: u32) -> bool {
        self.0.get(var as usize).copied().unwrap_or(false)
    }

    pub fn num_vars(&self) -> u32 {
        self.0.len().saturating_sub(1) as u32
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Assignment),
    Unsat,
    /// The conflict limit ran out.
    Unknown,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolverOptions {
    /// First-UIP clause learning with backjumping.
    pub learning: bool,
    pub conflict_limit: Option<u64>,
}

impl SolverOptions {
    pub const LEARNING: SolverOptions = SolverOptions { learning: true, conflict_limit: None };
}

pub fn dpll_solve(c: &GroundCnf) -> SolveResult {
    solve_with(c, SolverOptions::default())
}

pub fn solve_with(c: &GroundCnf, opts: SolverOptions) -> SolveResult {
    let mut s = Solver::new(c.num_vars, opts);
    for cl in &c.clauses {
        s.add_clause(cl);
    }
    s.solve()
}

/// Watched-literal solver. Without learning it branches on the first
/// unassigned variable, false first, and backtracks chronologically. With
/// learning it branches on conflict activity with saved phases and restarts
/// on the Luby sequence; ties go to the smaller variable.
pub struct Solver {
    num_vars: usize,
    clauses: Vec<Vec<i32>>,
    watches: Vec<Vec<usize>>,
    value: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<Option<usize>>,
    trail: Vec<i32>,
    trail_lim: Vec<usize>,
    flipped: Vec<bool>,
    qhead: usize,
    unsat: bool,
    opts: SolverOptions,
    conflicts: u64,
    seen: Vec<bool>,
    activity: Vec<f64>,
    bump: f64,
    heap: BinaryHeap<(u64, Reverse<usize>)>,
    phase: Vec<bool>,
}

const DECAY: f64 = 0.95;
const RESTART_UNIT: u64 = 64;

fn luby(mut i: u64) -> u64 {
    // 1 1 2 1 1 2 4 1 1 2 ...
    loop {
        let mut k = 1;
        while (1u64 << k) - 1 < i + 1 {
            k += 1;
        }
        if (1u64 << k) - 1 == i + 1 {
            return 1 << (k - 1);
        }
        i -= (1 << (k - 1)) - 1;
    }
}

#[inline]
fn code(l: i32) -> usize {
    2 * l.unsigned_abs() as usize + (l < 0) as usize
}

impl Solver {
    pub fn new(num_vars: u32, opts: SolverOptions) -> Self {
        let n = num_vars as usize;
        Solver {
            num_vars: n,
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * n + 2],
            value: vec![0; n + 1],
            level: vec![0; n + 1],
            reason: vec![None; n + 1],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            flipped: Vec::new(),
            qhead: 0,
            unsat: false,
            opts,
            conflicts: 0,
            seen: vec![false; n + 1],
            activity: vec![0.0; n + 1],
            bump: 1.0,
            heap: (1..=n).map(|v| (0, Reverse(v))).collect(),
            phase: vec![false; n + 1],
        }
    }

    fn grow(&mut self, var: usize) {
        if var > self.num_vars {
            self.watches.resize(2 * var + 2, Vec::new());
            self.value.resize(var + 1, 0);
            self.level.resize(var + 1, 0);
            self.reason.resize(var + 1, None);
            self.seen.resize(var + 1, false);
            self.activity.resize(var + 1, 0.0);
            self.phase.resize(var + 1, false);
            for v in self.num_vars + 1..=var {
                self.heap.push((0, Reverse(v)));
            }
            self.num_vars = var;
        }
    }

    pub fn conflicts(&self) -> u64 {
        self.conflicts
    }

    #[inline]
    fn lit_value(&self, l: i32) -> i8 {
        let v = self.value[l.unsigned_abs() as usize];
        if l > 0 {
            v
        } else {
            -v
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: i32, reason: Option<usize>) {
        let v = l.unsigned_abs() as usize;
        self.value[v] = if l > 0 { 1 } else { -1 };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn backtrack_to(&mut self, lvl: usize) {
        if self.trail_lim.len() <= lvl {
            return;
        }
        let keep = self.trail_lim[lvl];
        for &l in &self.trail[keep..] {
            let v = l.unsigned_abs() as usize;
            self.value[v] = 0;
            self.reason[v] = None;
            self.phase[v] = l > 0;
            if self.opts.learning {
                self.heap.push((self.activity[v].to_bits(), Reverse(v)));
            }
        }
        self.trail.truncate(keep);
        self.trail_lim.truncate(lvl);
        self.flipped.truncate(lvl);
        self.qhead = self.qhead.min(keep);
    }

    /// Adds a clause; any search state is discarded first.
    pub fn add_clause(&mut self, lits: &[i32]) {
        self.backtrack_to(0);
        if self.unsat {
            return;
        }
        let mut c: Vec<i32> = Vec::with_capacity(lits.len());
        for &l in lits {
            assert!(l != 0, "zero literal");
            self.grow(l.unsigned_abs() as usize);
            if c.contains(&-l) {
                return;
            }
            if !c.contains(&l) {
                c.push(l);
            }
        }
        if c.iter().any(|&l| self.lit_value(l) == 1) {
            return;
        }
        c.retain(|&l| self.lit_value(l) == 0);
        match c.len() {
            0 => self.unsat = true,
            1 => {
                self.enqueue(c[0], None);
                if self.propagate().is_some() {
                    self.unsat = true;
                }
            }
            _ => {
                self.attach(c);
            }
        }
    }

    fn attach(&mut self, c: Vec<i32>) -> usize {
        let i = self.clauses.len();
        self.watches[code(c[0])].push(i);
        self.watches[code(c[1])].push(i);
        self.clauses.push(c);
        i
    }

    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = -p;
            let ws = std::mem::take(&mut self.watches[code(false_lit)]);
            let mut kept = Vec::with_capacity(ws.len());
            let mut conflict = None;
            let mut idx = 0;
            while idx < ws.len() {
                let ci = ws[idx];
                idx += 1;
                if self.clauses[ci][0] == false_lit {
                    self.clauses[ci].swap(0, 1);
                }
                let first = self.clauses[ci][0];
                if self.lit_value(first) == 1 {
                    kept.push(ci);
                    continue;
                }
                let mut moved = false;
                for k in 2..self.clauses[ci].len() {
                    let l = self.clauses[ci][k];
                    if self.lit_value(l) != -1 {
                        self.clauses[ci].swap(1, k);
                        self.watches[code(l)].push(ci);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                kept.push(ci);
                if self.lit_value(first) == -1 {
                    conflict = Some(ci);
                    kept.extend_from_slice(&ws[idx..]);
                    break;
                }
                self.enqueue(first, Some(ci));
            }
            self.watches[code(false_lit)] = kept;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn analyze(&mut self, conflict: usize) -> (Vec<i32>, usize) {
        let current = self.decision_level();
        let mut learnt = vec![0];
        let mut counter = 0;
        let mut clause = conflict;
        let mut idx = self.trail.len();
        let mut p: Option<i32> = None;
        loop {
            let lits = self.clauses[clause].clone();
            for &q in lits.iter() {
                if Some(q) == p {
                    continue;
                }
                let v = q.unsigned_abs() as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.level[v] == current {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].unsigned_abs() as usize] {
                    break;
                }
            }
            let lit = self.trail[idx];
            let v = lit.unsigned_abs() as usize;
            self.seen[v] = false;
            counter -= 1;
            p = Some(lit);
            if counter == 0 {
                break;
            }
            clause = self.reason[v].expect("implied literal has a reason");
        }
        learnt[0] = -p.unwrap();
        for &l in &learnt[1..] {
            self.seen[l.unsigned_abs() as usize] = false;
        }
        let mut back = 0;
        if learnt.len() > 1 {
            let (mut best, mut best_level) = (1, 0);
            for (i, &l) in learnt.iter().enumerate().skip(1) {
                let lv = self.level[l.unsigned_abs() as usize];
                if lv > best_level {
                    best = i;
                    best_level = lv;
                }
            }
            learnt.swap(1, best);
            back = best_level as usize;
        }
        (learnt, back)
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.bump;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.bump *= 1e-100;
            let vars: Vec<usize> = (1..=self.num_vars).collect();
            self.heap = vars.into_iter().map(|v| (self.activity[v].to_bits(), Reverse(v))).collect();
        } else {
            self.heap.push((self.activity[v].to_bits(), Reverse(v)));
        }
    }

    /// Most active unassigned variable. Entries whose key is stale or whose
    /// variable is assigned are dropped.
    fn pick_active(&mut self) -> Option<usize> {
        while let Some((key, Reverse(v))) = self.heap.pop() {
            if self.value[v] == 0 && key == self.activity[v].to_bits() {
                return Some(v);
            }
        }
        None
    }

    /// Chronological backtracking: flip the deepest unflipped decision.
    fn flip(&mut self) -> bool {
        while let Some(&done) = self.flipped.last() {
            let lvl = self.trail_lim.len();
            if done {
                self.backtrack_to(lvl - 1);
                continue;
            }
            let decision = self.trail[self.trail_lim[lvl - 1]];
            self.backtrack_to(lvl - 1);
            self.trail_lim.push(self.trail.len());
            self.flipped.push(true);
            self.enqueue(-decision, None);
            return true;
        }
        false
    }

    pub fn solve(&mut self) -> SolveResult {
        if self.unsat {
            return SolveResult::Unsat;
        }
        let mut scan = 1;
        let mut restarts = 0;
        let mut until_restart = RESTART_UNIT * luby(0);
        loop {
            if let Some(conflict) = self.propagate() {
                self.conflicts += 1;
                if self.decision_level() == 0 {
                    self.unsat = true;
                    return SolveResult::Unsat;
                }
                if self.opts.conflict_limit.is_some_and(|lim| self.conflicts > lim) {
                    self.backtrack_to(0);
                    return SolveResult::Unknown;
                }
                if self.opts.learning {
                    let (learnt, back) = self.analyze(conflict);
                    self.bump /= DECAY;
                    self.backtrack_to(back);
                    if learnt.len() == 1 {
                        self.enqueue(learnt[0], None);
                    } else {
                        let first = learnt[0];
                        let ci = self.attach(learnt);
                        self.enqueue(first, Some(ci));
                    }
                    until_restart -= 1;
                    if until_restart == 0 {
                        restarts += 1;
                        until_restart = RESTART_UNIT * luby(restarts);
                        self.backtrack_to(0);
                    }
                } else if !self.flip() {
                    self.unsat = true;
                    return SolveResult::Unsat;
                }
                scan = 1;
                continue;
            }
            let next = if self.opts.learning {
                self.pick_active()
            } else {
                while scan <= self.num_vars && self.value[scan] != 0 {
                    scan += 1;
                }
                (scan <= self.num_vars).then_some(scan)
            };
            let Some(v) = next else {
                let values = (0..=self.num_vars).map(|v| self.value[v] == 1).collect();
                return SolveResult::Sat(Assignment(values));
            };
            self.trail_lim.push(self.trail.len());
            self.flipped.push(false);
            let lit = if self.opts.learning && self.phase[v] { v as i32 } else { -(v as i32) };
            self.enqueue(lit, None);
        }
    }
}

/// Every satisfying assignment restricted to `projection`, each once. Values
/// are listed in projection order.
pub fn all_models(c: &GroundCnf, projection: &[u32]) -> ModelIter {
    let mut solver = Solver::new(c.num_vars, SolverOptions { learning: false, conflict_limit: None });
    for cl in &c.clauses {
        solver.add_clause(cl);
    }
    for &v in projection {
        solver.grow(v as usize);
    }
    ModelIter { solver, projection: projection.to_vec(), seen: HashSet::new(), started: false, done: false }
}

/// Walks the decision tree chronologically, so no blocking clauses are
/// needed. Projections already produced are skipped.
pub struct ModelIter {
    solver: Solver,
    projection: Vec<u32>,
    seen: HashSet<Vec<bool>>,
    started: bool,
    done: bool,
}

impl Iterator for ModelIter {
    type Item = Vec<bool>;

    fn next(&mut self) -> Option<Vec<bool>> {
        while !self.done {
            if self.started && !self.solver.flip() {
                self.done = true;
                break;
            }
            self.started = true;
            match self.solver.solve() {
                SolveResult::Sat(a) => {
                    let values: Vec<bool> = self.projection.iter().map(|&v| a.value(v)).collect();
                    if self.seen.insert(values.clone()) {
                        return Some(values);
                    }
                }
                _ => self.done = true,
            }
        }
        None
    }
}

/// Herbrand grounding of an ∃*∀* sentence over its named constants.
#[derive(Clone, Debug)]
pub struct BsrGrounding {
    pub cnf: GroundCnf,
    pub table: AtomTable,
    vocab: Arc<Vocabulary>,
    /// Ground term index of each vocabulary constant.
    constant_terms: Vec<usize>,
}

impl BsrGrounding {
    /// Quotient of the ground terms by the equality atoms of a model.
    pub fn decode(&self, value: impl Fn(u32) -> bool) -> FiniteStructure {
        let t = self.table.terms().len();
        let mut parent: Vec<usize> = (0..t).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for (id, atom) in self.table.iter() {
            if let GroundAtom::Eq(a, b) = atom {
                if value(id) {
                    let (ra, rb) = (find(&mut parent, *a), find(&mut parent, *b));
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let roots: Vec<usize> = (0..t).filter(|&x| find(&mut parent, x) == x).collect();
        let class = |p: &mut Vec<usize>, x: usize| roots.binary_search(&find(p, x)).unwrap();
        let mut m = FiniteStructure::new(self.vocab.clone(), roots.len()).expect("at least one term");
        for (id, atom) in self.table.iter() {
            if let GroundAtom::Pred { name, args } = atom {
                if value(id) {
                    let elems: Vec<usize> = args.iter().map(|&a| class(&mut parent, a)).collect();
                    m.set(name, &elems, true);
                }
            }
        }
        for (c, &term) in self.vocab.constants().iter().zip(&self.constant_terms) {
            let e = class(&mut parent, term);
            m.set_constant(c, e);
        }
        m
    }
}

pub fn bsr_ground(vocab: &Vocabulary, pf: &PrenexForm) -> Result<BsrGrounding> {
    bsr_ground_with(vocab, pf, &Limits::default())
}

/// Existential variables become constants `c_x`; universals range over all
/// constants. Equality between constants is axiomatized.
pub fn bsr_ground_with(vocab: &Vocabulary, pf: &PrenexForm, limits: &Limits) -> Result<BsrGrounding> {
    if !pf.is_bsr() {
        return Err(Error::invalid("bsr_ground needs an ∃*∀* prefix"));
    }
    if !pf.is_sentence() {
        return Err(Error::invalid("bsr_ground needs a sentence"));
    }
    let mut terms: Vec<String> = vocab.constants().to_vec();
    let constant_terms: Vec<usize> = (0..terms.len()).collect();
    let mut env: HashMap<String, usize> = HashMap::new();
    let fresh_term = |terms: &Vec<String>, base: String| {
        let mut name = base;
        while terms.contains(&name) || vocab.contains(&name) {
            name.push('_');
        }
        name
    };
    for (q, v) in &pf.prefix {
        if *q == Quantifier::Exists {
            let name = fresh_term(&terms, format!("c_{v}"));
            env.insert(v.clone(), terms.len());
            terms.push(name);
        }
    }
    if terms.is_empty() {
        let name = fresh_term(&terms, "c_0".to_string());
        terms.push(name);
    }
    let universals = pf.universals();
    let t = terms.len();
    let mut table = AtomTable::new(terms.clone());
    let mut clauses: Vec<Vec<i32>> = Vec::new();
    let push = |clauses: &mut Vec<Vec<i32>>, c: Vec<i32>| -> Result<()> {
        if clauses.len() >= limits.cnf_clauses {
            return Err(Error::cap("clause", limits.cnf_clauses, None));
        }
        clauses.push(c);
        Ok(())
    };
    let eq_atom = |table: &mut AtomTable, a: usize, b: usize| table.intern(GroundAtom::Eq(a.min(b), a.max(b))) as i32;

    for vals in (0..universals.len()).map(|_| 0..t).multi_cartesian_product() {
        for (u, &val) in universals.iter().zip(&vals) {
            env.insert(u.clone(), val);
        }
        let resolve = |term: &Term| match term {
            Term::Var(v) => env[v],
            Term::Const(c) => vocab.constant_index(c).expect("declared constant"),
        };
        'clause: for clause in &pf.matrix {
            let mut out: Vec<i32> = Vec::new();
            for lit in clause {
                let l = match &lit.atom {
                    Atom::Pred { name, args } => {
                        let args = args.iter().map(resolve).collect();
                        table.intern(GroundAtom::Pred { name: name.clone(), args }) as i32
                    }
                    Atom::Eq(s, u) => {
                        let (a, b) = (resolve(s), resolve(u));
                        if a == b {
                            if lit.positive {
                                continue 'clause;
                            }
                            continue;
                        }
                        eq_atom(&mut table, a, b)
                    }
                };
                let l = if lit.positive { l } else { -l };
                if out.contains(&-l) {
                    continue 'clause;
                }
                if !out.contains(&l) {
                    out.push(l);
                }
            }
            push(&mut clauses, out)?;
        }
    }

    if pf.has_equality() && t > 1 {
        for (i, j, k) in (0..t).tuple_combinations::<(_, _, _)>() {
            for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                let (ab, bc, ac) = (eq_atom(&mut table, a, b), eq_atom(&mut table, b, c), eq_atom(&mut table, a, c));
                push(&mut clauses, vec![-ab, -bc, ac])?;
            }
        }
        for (name, arity) in vocab.predicates() {
            for tup in 0..pow(t, *arity) {
                let args = tuple_at(t, *arity, tup);
                for pos in 0..*arity {
                    for alt in 0..t {
                        if alt == args[pos] {
                            continue;
                        }
                        let mut other = args.clone();
                        other[pos] = alt;
                        let e = eq_atom(&mut table, args[pos], alt);
                        let a = table.intern(GroundAtom::Pred { name: name.clone(), args: args.clone() }) as i32;
                        let b = table.intern(GroundAtom::Pred { name: name.clone(), args: other }) as i32;
                        push(&mut clauses, vec![-e, -a, b])?;
                    }
                }
            }
        }
    }
    let cnf = GroundCnf { num_vars: table.len() as u32, clauses };
    Ok(BsrGrounding { cnf, table, vocab: Arc::new(vocab.clone()), constant_terms })
}

/// DIMACS text: one `c <id> <atom>` comment per table entry, the header,
/// then zero-terminated clauses.
pub fn export_dimacs(c: &GroundCnf, t: &AtomTable) -> String {
    let mut out = String::new();
    for (id, _) in t.iter() {
        let _ = writeln!(out, "c {id} {}", t.name(id));
    }
    let _ = writeln!(out, "p cnf {} {}", c.num_vars, c.clauses.len());
    for clause in &c.clauses {
        for l in clause {
            let _ = write!(out, "{l} ");
        }
        out.push_str("0\n");
    }
    out
}

/// Grounds at size `n`, solves, and decodes a model if there is one.
pub(crate) fn find_model(
    vocab: &Vocabulary,
    f: &Formula,
    n: usize,
    fixed: Option<&Pinning>,
    limits: &Limits,
    opts: SolverOptions,
) -> Result<Option<FiniteStructure>> {
    let g = ground_formula(vocab, f, n, fixed, limits)?;
    let cnf = tseitin(&g.formula, g.table.len() as u32);
    if cnf.clauses.len() > limits.cnf_clauses {
        return Err(Error::cap("clause", limits.cnf_clauses, Some(cnf.clauses.len() as u128)));
    }
    match solve_with(&cnf, opts) {
        SolveResult::Sat(a) => Ok(Some(g.decode(|v| a.value(v)))),
        SolveResult::Unsat => Ok(None),
        SolveResult::Unknown => Err(Error::cap("conflict", opts.conflict_limit.unwrap_or(0) as usize, None)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::to_pcnf;
    use crate::parser::parse_problem;

    fn pf(text: &str) -> (Vocabulary, PrenexForm) {
        let p = parse_problem(text).unwrap();
        (p.vocabulary.clone(), to_pcnf(&p.formula).unwrap())
    }

    #[test]
    fn grounds_serial_relation() {
        let (v, f) = pf("vocab P/2; forall x. exists y. P(x,y)");
        let g = ground_fixed_universe(&v, &f, 2, None).unwrap();
        let expected = PropFormula::And(vec![
            PropFormula::Or(vec![PropFormula::Lit(1), PropFormula::Lit(2)]),
            PropFormula::Or(vec![PropFormula::Lit(3), PropFormula::Lit(4)]),
        ]);
        assert_eq!(g.formula, expected);
        assert_eq!(g.table.name(2), "P(0,1)");
    }

    #[test]
    fn concrete_equality_is_evaluated() {
        let (v, f) = pf("vocab ; forall x y. x = y");
        assert_eq!(ground_fixed_universe(&v, &f, 2, None).unwrap().formula, PropFormula::False);
        assert_eq!(ground_fixed_universe(&v, &f, 1, None).unwrap().formula, PropFormula::True);
    }

    #[test]
    fn pinned_atoms_become_constants() {
        let (v, f) = pf("vocab P/2; forall x. exists y. P(x,y)");
        let mut pin = Pinning::default();
        pin.pin("P", &[0, 0], true);
        assert_eq!(ground_fixed_universe(&v, &f, 1, Some(&pin)).unwrap().formula, PropFormula::True);
    }

    #[test]
    fn tseitin_shapes() {
        assert_eq!(tseitin(&PropFormula::Lit(1), 1).clauses, vec![vec![1]]);
        let c = tseitin(&PropFormula::Or(vec![PropFormula::Lit(1), PropFormula::Lit(2)]), 2);
        assert_eq!(c.clauses, vec![vec![-3, 1, 2], vec![-1, 3], vec![-2, 3], vec![3]]);
        assert_eq!(c.num_vars, 3);
        assert!(tseitin(&PropFormula::False, 0).clauses.contains(&vec![]));
    }

    #[test]
    fn solver_basics() {
        let empty = GroundCnf { num_vars: 0, clauses: vec![] };
        assert_eq!(dpll_solve(&empty), SolveResult::Sat(Assignment(vec![false])));
        let unsat = GroundCnf { num_vars: 2, clauses: vec![vec![1, -2], vec![2], vec![-1]] };
        assert_eq!(dpll_solve(&unsat), SolveResult::Unsat);
        let or = GroundCnf { num_vars: 2, clauses: vec![vec![1, 2]] };
        match dpll_solve(&or) {
            SolveResult::Sat(a) => assert!(a.value(1) || a.value(2)),
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn learning_agrees_on_pigeonhole() {
        // 4 pigeons, 3 holes.
        let var = |p: i32, h: i32| p * 3 + h + 1;
        let mut clauses = Vec::new();
        for p in 0..4 {
            clauses.push((0..3).map(|h| var(p, h)).collect());
        }
        for h in 0..3 {
            for (a, b) in (0..4).tuple_combinations() {
                clauses.push(vec![-var(a, h), -var(b, h)]);
            }
        }
        let cnf = GroundCnf { num_vars: 12, clauses };
        assert_eq!(dpll_solve(&cnf), SolveResult::Unsat);
        assert_eq!(solve_with(&cnf, SolverOptions { learning: true, conflict_limit: None }), SolveResult::Unsat);
    }

    #[test]
    fn model_enumeration() {
        let one = GroundCnf { num_vars: 1, clauses: vec![vec![1]] };
        assert_eq!(all_models(&one, &[1]).collect::<Vec<_>>(), vec![vec![true]]);
        let free = GroundCnf { num_vars: 0, clauses: vec![] };
        assert_eq!(all_models(&free, &[1]).count(), 2);
        let none = GroundCnf { num_vars: 1, clauses: vec![vec![1], vec![-1]] };
        assert_eq!(all_models(&none, &[1]).count(), 0);
    }

    #[test]
    fn bsr_grounding_examples() {
        let (v, f) = pf("vocab P/1; exists x. forall y. P(x) | !P(y)");
        let g = bsr_ground(&v, &f).unwrap();
        assert_eq!(g.table.terms(), &["c_x".to_string()]);
        assert_eq!(g.cnf.clauses, Vec::<Vec<i32>>::new());
        assert!(dpll_solve(&g.cnf).is_sat());

        let (v, f) = pf("vocab ; exists x y. x != y");
        let g = bsr_ground(&v, &f).unwrap();
        match dpll_solve(&g.cnf) {
            SolveResult::Sat(a) => assert_eq!(g.decode(|id| a.value(id)).size(), 2),
            r => panic!("{r:?}"),
        }

        let (v, f) = pf("vocab Q/1; exists x. forall y. Q(y) & !Q(x)");
        assert_eq!(dpll_solve(&bsr_ground(&v, &f).unwrap().cnf), SolveResult::Unsat);

        let (v, f) = pf("vocab P/2; forall x. exists y. P(x,y)");
        assert!(bsr_ground(&v, &f).is_err());
    }

    #[test]
    fn dimacs_format() {
        let c = GroundCnf { num_vars: 2, clauses: vec![vec![1, -2]] };
        assert_eq!(export_dimacs(&c, &AtomTable::default()), "p cnf 2 1\n1 -2 0\n");
        assert_eq!(export_dimacs(&GroundCnf::default(), &AtomTable::default()), "p cnf 0 0\n");
        let e = GroundCnf { num_vars: 0, clauses: vec![vec![]] };
        assert!(export_dimacs(&e, &AtomTable::default()).lines().any(|l| l == "0"));
        let mut t = AtomTable::new(vec!["0".into(), "1".into()]);
        t.intern(GroundAtom::Pred { name: "P".into(), args: vec![0, 1] });
        assert!(export_dimacs(&c, &t).starts_with("c 1 P(0,1)\n"));
    }

    #[test]
    fn constants_use_selectors() {
        let (v, f) = pf("vocab Q/1; const c; Q(c) & exists x. !Q(x)");
        let found =
            find_model(&v, &f.to_formula(), 2, None, &Limits::default(), SolverOptions::default()).unwrap().unwrap();
        assert!(crate::structures::evaluate(&found, &f, None).unwrap());
        assert!(find_model(&v, &f.to_formula(), 1, None, &Limits::default(), SolverOptions::default())
            .unwrap()
            .is_none());
    }
}
