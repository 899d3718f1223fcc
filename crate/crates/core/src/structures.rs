//! Finite structures over a relational vocabulary, evaluation, substructures
//! and exhaustive enumeration.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::formula::{Atom, Formula, Limits, PrenexForm, Quantifier, Term, Vocabulary};
use crate::{Error, Result};

/// A structure with universe `0..n`. Each predicate is stored as a bitmap
/// over its tuples in lexicographic order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FiniteStructure {
    vocab: Arc<Vocabulary>,
    n: usize,
    rels: Vec<Vec<bool>>,
    consts: Vec<usize>,
}

/// Index of `args` among all tuples of length `args.len()` over `0..n`.
pub fn tuple_index(n: usize, args: &[usize]) -> usize {
    args.iter().fold(0, |acc, &a| acc * n + a)
}

/// Inverse of [`tuple_index`].
pub fn tuple_at(n: usize, arity: usize, mut index: usize) -> Vec<usize> {
    let mut out = vec![0; arity];
    for slot in out.iter_mut().rev() {
        *slot = index % n;
        index /= n;
    }
    out
}

pub(crate) fn pow(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, _| acc.saturating_mul(n))
}

impl FiniteStructure {
    /// All predicates empty, all constants interpreted as 0.
    pub fn new(vocab: impl Into<Arc<Vocabulary>>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("universes are nonempty"));
        }
        let vocab = vocab.into();
        let rels = vocab.predicates().iter().map(|&(_, a)| vec![false; pow(n, a)]).collect();
        let consts = vec![0; vocab.constants().len()];
        Ok(FiniteStructure { vocab, n, rels, consts })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocabulary_arc(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn holds(&self, pred: &str, args: &[usize]) -> bool {
        let i = self.vocab.predicate_index(pred).unwrap_or_else(|| panic!("unknown predicate {pred}"));
        self.rels[i][tuple_index(self.n, args)]
    }

    pub fn set(&mut self, pred: &str, args: &[usize], value: bool) {
        let i = self.vocab.predicate_index(pred).unwrap_or_else(|| panic!("unknown predicate {pred}"));
        assert!(args.iter().all(|&a| a < self.n), "element out of range");
        let t = tuple_index(self.n, args);
        self.rels[i][t] = value;
    }

    pub(crate) fn bitmap(&self, pred: usize) -> &[bool] {
        &self.rels[pred]
    }

    pub fn constant(&self, name: &str) -> usize {
        self.consts[self.vocab.constant_index(name).unwrap_or_else(|| panic!("unknown constant {name}"))]
    }

    pub fn constant_values(&self) -> &[usize] {
        &self.consts
    }

    pub fn set_constant(&mut self, name: &str, value: usize) {
        assert!(value < self.n, "element out of range");
        let i = self.vocab.constant_index(name).unwrap_or_else(|| panic!("unknown constant {name}"));
        self.consts[i] = value;
    }

    /// Tuples of `pred` in lexicographic order.
    pub fn tuples(&self, pred: &str) -> Vec<Vec<usize>> {
        let i = self.vocab.predicate_index(pred).unwrap_or_else(|| panic!("unknown predicate {pred}"));
        let arity = self.vocab.predicates()[i].1;
        (0..self.rels[i].len()).filter(|&t| self.rels[i][t]).map(|t| tuple_at(self.n, arity, t)).collect()
    }

    /// Colour of `e`: bit i is set iff the i-th unary predicate holds of `e`.
    pub fn colour(&self, e: usize) -> Vec<bool> {
        self.vocab.predicates().iter().enumerate().filter(|(_, (_, a))| *a == 1).map(|(i, _)| self.rels[i][e]).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.json_repr()).expect("serializable")
    }

    /// Compact JSON text with keys in the order `n`, `pred`, `const`.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.json_repr()).expect("serializable")
    }

    fn json_repr(&self) -> StructureJson {
        let pred = self.vocab.predicates().iter().map(|(name, _)| (name.clone(), self.tuples(name))).collect();
        let constants = self.vocab.constants().iter().cloned().zip(self.consts.iter().copied()).collect();
        StructureJson { n: self.n, pred, constants }
    }

    pub fn from_json(vocab: impl Into<Arc<Vocabulary>>, text: &str) -> Result<Self> {
        let raw: StructureJson = serde_json::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
        let mut m = FiniteStructure::new(vocab, raw.n)?;
        for (name, tuples) in raw.pred {
            let arity = m.vocab.arity(&name).ok_or_else(|| Error::invalid(format!("unknown predicate {name}")))?;
            for t in tuples {
                if t.len() != arity || t.iter().any(|&e| e >= m.n) {
                    return Err(Error::invalid(format!("bad tuple {t:?} for {name}")));
                }
                m.set(&name, &t, true);
            }
        }
        for c in m.vocab.clone().constants() {
            match raw.constants.get(c) {
                Some(&v) if v < m.n => m.set_constant(c, v),
                _ => return Err(Error::invalid(format!("constant {c} needs a value below {}", m.n))),
            }
        }
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
struct StructureJson {
    n: usize,
    #[serde(default)]
    pred: BTreeMap<String, Vec<Vec<usize>>>,
    #[serde(rename = "const", default)]
    constants: BTreeMap<String, usize>,
}

impl fmt::Debug for FiniteStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for FiniteStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={}", self.n)?;
        for (name, _) in self.vocab.predicates() {
            let ts: Vec<String> = self
                .tuples(name)
                .iter()
                .map(|t| format!("({})", t.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")))
                .collect();
            write!(f, " {name}={{{}}}", ts.join(","))?;
        }
        for (c, v) in self.vocab.constants().iter().zip(&self.consts) {
            write!(f, " {c}={v}")?;
        }
        Ok(())
    }
}

/// A nonempty sorted set of elements of a parent structure that contains all
/// constant values.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubsetWitness {
    pub parent_size: usize,
    pub elements: Vec<usize>,
}

impl SubsetWitness {
    pub fn new(parent: &FiniteStructure, elements: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = elements.into_iter().collect();
        if set.is_empty() {
            return Err(Error::invalid("empty subset"));
        }
        if set.iter().any(|&e| e >= parent.n) {
            return Err(Error::invalid("subset element outside the universe"));
        }
        if let Some(c) = parent.consts.iter().find(|c| !set.contains(c)) {
            return Err(Error::invalid(format!("subset misses constant value {c}")));
        }
        Ok(SubsetWitness { parent_size: parent.n, elements: set.into_iter().collect() })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, e: usize) -> bool {
        self.elements.binary_search(&e).is_ok()
    }
}

/// The substructure generated by `subset`, relabeled by sorted order. The
/// second component maps new labels to old ones.
pub fn generated_substructure(m: &FiniteStructure, subset: &[usize]) -> Result<(FiniteStructure, Vec<usize>)> {
    let w = SubsetWitness::new(m, subset.iter().copied().chain(m.consts.iter().copied()))?;
    let old = w.elements;
    let k = old.len();
    let mut out = FiniteStructure::new(m.vocab.clone(), k)?;
    for (p, &(_, arity)) in m.vocab.predicates().iter().enumerate() {
        for t in 0..pow(k, arity) {
            let args: Vec<usize> = tuple_at(k, arity, t).iter().map(|&e| old[e]).collect();
            out.rels[p][t] = m.rels[p][tuple_index(m.n, &args)];
        }
    }
    for (i, c) in m.consts.iter().enumerate() {
        out.consts[i] = old.binary_search(c).expect("constant inside subset");
    }
    Ok((out, old))
}

/// True iff both structures interpret every predicate of `sigma` alike.
pub fn restrict_eq(m1: &FiniteStructure, m2: &FiniteStructure, sigma: &BTreeSet<String>) -> Result<bool> {
    if m1.vocab != m2.vocab {
        return Err(Error::invalid("vocabulary mismatch"));
    }
    if m1.n != m2.n {
        return Err(Error::invalid("universe sizes differ"));
    }
    for p in sigma {
        let i = m1.vocab.predicate_index(p).ok_or_else(|| Error::invalid(format!("unknown predicate {p}")))?;
        if m1.rels[i] != m2.rels[i] {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Number of structures of size `n`, if it fits in a `u128`.
pub fn count_structures(vocab: &Vocabulary, n: usize) -> Option<u128> {
    let bits: u128 = vocab
        .predicates()
        .iter()
        .try_fold(0u128, |acc, &(_, a)| acc.checked_add((n as u128).checked_pow(a as u32)?))?;
    if bits >= 128 {
        return None;
    }
    let consts = (n as u128).checked_pow(vocab.constants().len() as u32)?;
    (1u128 << bits).checked_mul(consts)
}

pub fn enumerate_structures(vocab: &Vocabulary, n: usize) -> Result<StructureIter> {
    enumerate_structures_with(vocab, n, &Limits::default(), false)
}

/// All structures of size `n`: predicate bitmaps in counting order, and for
/// each bitmap every constant valuation. With `break_constant_symmetry`,
/// only valuations whose values first appear in increasing order are kept;
/// every structure is then isomorphic to at least one produced.
pub fn enumerate_structures_with(
    vocab: &Vocabulary,
    n: usize,
    limits: &Limits,
    break_constant_symmetry: bool,
) -> Result<StructureIter> {
    if n == 0 {
        return Err(Error::invalid("universes are nonempty"));
    }
    let count = count_structures(vocab, n);
    match count {
        Some(c) if c <= limits.structures => {}
        _ => return Err(Error::CapExceeded { what: "structure enumeration", limit: limits.structures, needed: count }),
    }
    let base = FiniteStructure::new(vocab.clone(), n)?;
    let bits = base.rels.iter().map(Vec::len).sum::<usize>();
    let valuations = pow(n, vocab.constants().len()) as u128;
    Ok(StructureIter { base, bitmaps: 1u128 << bits, valuations, bitmap: 0, valuation: 0, break_constant_symmetry })
}

pub struct StructureIter {
    base: FiniteStructure,
    bitmaps: u128,
    valuations: u128,
    bitmap: u128,
    valuation: u128,
    break_constant_symmetry: bool,
}

impl StructureIter {
    fn canonical_valuation(vals: &[usize]) -> bool {
        let mut next = 0;
        for &v in vals {
            if v > next {
                return false;
            }
            if v == next {
                next += 1;
            }
        }
        true
    }
}

impl Iterator for StructureIter {
    type Item = FiniteStructure;

    fn next(&mut self) -> Option<FiniteStructure> {
        loop {
            if self.bitmap == self.bitmaps {
                return None;
            }
            let mut m = self.base.clone();
            let mut j = 0;
            for rel in m.rels.iter_mut() {
                for bit in rel.iter_mut() {
                    *bit = (self.bitmap >> j) & 1 == 1;
                    j += 1;
                }
            }
            let mut v = self.valuation;
            for c in m.consts.iter_mut().rev() {
                *c = (v % self.base.n as u128) as usize;
                v /= self.base.n as u128;
            }
            self.valuation += 1;
            if self.valuation == self.valuations {
                self.valuation = 0;
                self.bitmap += 1;
            }
            if self.break_constant_symmetry && !Self::canonical_valuation(&m.consts) {
                continue;
            }
            return Some(m);
        }
    }
}

/// Anything that can be evaluated as a first-order formula.
pub trait AsFormula {
    fn as_formula(&self) -> Cow<'_, Formula>;
}

impl AsFormula for Formula {
    fn as_formula(&self) -> Cow<'_, Formula> {
        Cow::Borrowed(self)
    }
}

impl AsFormula for PrenexForm {
    fn as_formula(&self) -> Cow<'_, Formula> {
        Cow::Owned(self.to_formula())
    }
}

/// Tarskian truth of `s` in `m`; free variables take values from `assignment`.
pub fn evaluate<S: AsFormula + ?Sized>(
    m: &FiniteStructure,
    s: &S,
    assignment: Option<&BTreeMap<String, usize>>,
) -> Result<bool> {
    let f = s.as_formula();
    let empty = BTreeMap::new();
    let assignment = assignment.unwrap_or(&empty);
    let mut scope: Vec<(String, usize)> = Vec::new();
    let mut env = Vec::new();
    for v in crate::formula::free_vars(&f) {
        let value = *assignment.get(&v).ok_or_else(|| Error::invalid(format!("no value for free variable {v}")))?;
        if value >= m.n {
            return Err(Error::invalid(format!("value {value} for {v} outside the universe")));
        }
        scope.push((v, env.len()));
        env.push(value);
    }
    let mut slots = env.len();
    let node = compile(&f, m, &mut scope, &mut slots)?;
    env.resize(slots, 0);
    Ok(eval(&node, m, &mut env))
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Var(usize),
    Elem(usize),
}

#[derive(Debug)]
enum Node {
    Const(bool),
    Pred(usize, Vec<Slot>),
    Eq(Slot, Slot),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Implies(Box<Node>, Box<Node>),
    Iff(Box<Node>, Box<Node>),
    Forall(usize, Box<Node>),
    Exists(usize, Box<Node>),
}

fn compile_term(t: &Term, m: &FiniteStructure, scope: &[(String, usize)]) -> Result<Slot> {
    match t {
        Term::Var(v) => scope
            .iter()
            .rev()
            .find(|(n, _)| n == v)
            .map(|&(_, s)| Slot::Var(s))
            .ok_or_else(|| Error::invalid(format!("unbound variable {v}"))),
        Term::Const(c) => m
            .vocab
            .constant_index(c)
            .map(|i| Slot::Elem(m.consts[i]))
            .ok_or_else(|| Error::invalid(format!("unknown constant {c}"))),
    }
}

fn compile_atom(a: &Atom, m: &FiniteStructure, scope: &[(String, usize)]) -> Result<Node> {
    match a {
        Atom::Pred { name, args } => {
            let i = m.vocab.predicate_index(name).ok_or_else(|| Error::invalid(format!("unknown predicate {name}")))?;
            if m.vocab.predicates()[i].1 != args.len() {
                return Err(Error::invalid(format!("arity mismatch for {name}")));
            }
            let slots = args.iter().map(|t| compile_term(t, m, scope)).collect::<Result<_>>()?;
            Ok(Node::Pred(i, slots))
        }
        Atom::Eq(s, t) => Ok(Node::Eq(compile_term(s, m, scope)?, compile_term(t, m, scope)?)),
    }
}

fn compile(f: &Formula, m: &FiniteStructure, scope: &mut Vec<(String, usize)>, slots: &mut usize) -> Result<Node> {
    let bin = |a: &Formula,
               b: &Formula,
               scope: &mut Vec<(String, usize)>,
               slots: &mut usize|
     -> Result<(Box<Node>, Box<Node>)> {
        Ok((Box::new(compile(a, m, scope, slots)?), Box::new(compile(b, m, scope, slots)?)))
    };
    Ok(match f {
        Formula::True => Node::Const(true),
        Formula::False => Node::Const(false),
        Formula::Atom(a) => compile_atom(a, m, scope)?,
        Formula::Not(g) => Node::Not(Box::new(compile(g, m, scope, slots)?)),
        Formula::And(a, b) => {
            let (a, b) = bin(a, b, scope, slots)?;
            Node::And(a, b)
        }
        Formula::Or(a, b) => {
            let (a, b) = bin(a, b, scope, slots)?;
            Node::Or(a, b)
        }
        Formula::Implies(a, b) => {
            let (a, b) = bin(a, b, scope, slots)?;
            Node::Implies(a, b)
        }
        Formula::Iff(a, b) => {
            let (a, b) = bin(a, b, scope, slots)?;
            Node::Iff(a, b)
        }
        Formula::Forall(v, g) | Formula::Exists(v, g) => {
            let slot = *slots;
            *slots += 1;
            scope.push((v.clone(), slot));
            let body = Box::new(compile(g, m, scope, slots)?);
            scope.pop();
            if matches!(f, Formula::Forall(..)) {
                Node::Forall(slot, body)
            } else {
                Node::Exists(slot, body)
            }
        }
    })
}

#[inline]
fn slot_value(s: Slot, env: &[usize]) -> usize {
    match s {
        Slot::Var(i) => env[i],
        Slot::Elem(e) => e,
    }
}

fn eval(node: &Node, m: &FiniteStructure, env: &mut Vec<usize>) -> bool {
    match node {
        Node::Const(b) => *b,
        Node::Pred(p, args) => {
            let t = args.iter().fold(0, |acc, &s| acc * m.n + slot_value(s, env));
            m.rels[*p][t]
        }
        Node::Eq(s, t) => slot_value(*s, env) == slot_value(*t, env),
        Node::Not(g) => !eval(g, m, env),
        Node::And(a, b) => eval(a, m, env) && eval(b, m, env),
        Node::Or(a, b) => eval(a, m, env) || eval(b, m, env),
        Node::Implies(a, b) => !eval(a, m, env) || eval(b, m, env),
        Node::Iff(a, b) => eval(a, m, env) == eval(b, m, env),
        Node::Forall(s, g) => (0..m.n).all(|e| {
            env[*s] = e;
            eval(g, m, env)
        }),
        Node::Exists(s, g) => (0..m.n).any(|e| {
            env[*s] = e;
            eval(g, m, env)
        }),
    }
}

/// Evaluator for a prenex form that can start from any prefix position with
/// a partial assignment. Slot `i` holds prefix variable `i`; free variables
/// follow the prefix.
pub(crate) struct PrenexEval<'a> {
    pf: &'a PrenexForm,
    m: &'a FiniteStructure,
    matrix: Vec<Vec<(bool, Node)>>,
}

impl<'a> PrenexEval<'a> {
    pub fn new(pf: &'a PrenexForm, m: &'a FiniteStructure) -> Result<Self> {
        let scope: Vec<(String, usize)> = pf
            .prefix
            .iter()
            .map(|(_, v)| v.clone())
            .chain(pf.free_vars.iter().cloned())
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        let matrix = pf
            .matrix
            .iter()
            .map(|c| c.iter().map(|l| Ok((l.positive, compile_atom(&l.atom, m, &scope)?))).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        Ok(PrenexEval { pf, m, matrix })
    }

    /// Environment with free variables set from `assignment`.
    pub fn env(&self, assignment: &BTreeMap<String, usize>) -> Result<Vec<usize>> {
        let mut env = vec![0; self.pf.prefix.len() + self.pf.free_vars.len()];
        for (i, v) in self.pf.free_vars.iter().enumerate() {
            env[self.pf.prefix.len() + i] =
                *assignment.get(v).ok_or_else(|| Error::invalid(format!("no value for free variable {v}")))?;
        }
        Ok(env)
    }

    pub fn matrix_holds(&self, env: &mut Vec<usize>) -> bool {
        self.matrix.iter().all(|c| c.iter().any(|(pos, a)| eval(a, self.m, env) == *pos))
    }

    /// Truth of the formula from prefix position `pos` on, with earlier
    /// prefix slots already set in `env`.
    pub fn holds_from(&self, pos: usize, env: &mut Vec<usize>) -> bool {
        match self.pf.prefix.get(pos) {
            None => self.matrix_holds(env),
            Some((q, _)) => {
                let q = *q;
                let mut check = |e| {
                    env[pos] = e;
                    self.holds_from(pos + 1, env)
                };
                match q {
                    Quantifier::Forall => (0..self.m.n).all(&mut check),
                    Quantifier::Exists => (0..self.m.n).any(&mut check),
                }
            }
        }
    }
}
