//! Relational first-order syntax with equality and constants, and prenex CNF.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use crate::{Error, Result};

/// Size limits shared by the normalizing, grounding and enumerating passes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Clauses produced by CNF distribution.
    pub pcnf_clauses: usize,
    /// Nodes produced by fixed-universe grounding.
    pub ground_nodes: usize,
    /// Clauses in a propositional CNF.
    pub cnf_clauses: usize,
    /// Structures produced by one enumeration.
    pub structures: u128,
    /// Disjuncts in a BSR translation.
    pub disjuncts: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            pcnf_clauses: 10_000,
            ground_nodes: 1_000_000,
            cnf_clauses: 1_000_000,
            structures: 1 << 22,
            disjuncts: 10_000,
        }
    }
}

/// Predicates with arities, and constants. Names are unique across both pools.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Vocabulary {
    predicates: Vec<(String, usize)>,
    constants: Vec<String>,
}

impl Vocabulary {
    pub fn new<P, C>(predicates: P, constants: C) -> Result<Self>
    where
        P: IntoIterator,
        P::Item: Into<(String, usize)>,
        C: IntoIterator,
        C::Item: Into<String>,
    {
        let mut vocab = Vocabulary::default();
        for p in predicates {
            let (name, arity) = p.into();
            vocab.add_predicate(name, arity)?;
        }
        for c in constants {
            vocab.add_constant(c.into())?;
        }
        Ok(vocab)
    }

    /// Shorthand for tests and examples: `Vocabulary::of(&[("P", 2)], &["c"])`.
    pub fn of(predicates: &[(&str, usize)], constants: &[&str]) -> Self {
        Vocabulary::new(predicates.iter().map(|&(n, a)| (n.to_string(), a)), constants.iter().map(|c| c.to_string()))
            .expect("valid vocabulary")
    }

    pub fn add_predicate(&mut self, name: String, arity: usize) -> Result<()> {
        self.check_fresh(&name)?;
        self.predicates.push((name, arity));
        Ok(())
    }

    pub fn add_constant(&mut self, name: String) -> Result<()> {
        self.check_fresh(&name)?;
        self.constants.push(name);
        Ok(())
    }

    fn check_fresh(&self, name: &str) -> Result<()> {
        if name == "=" {
            return Err(Error::invalid("\"=\" is reserved"));
        }
        if self.contains(name) {
            return Err(Error::invalid(format!("duplicate symbol {name}")));
        }
        Ok(())
    }

    pub fn predicates(&self) -> &[(String, usize)] {
        &self.predicates
    }

    pub fn constants(&self) -> &[String] {
        &self.constants
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.predicates.iter().find(|(n, _)| n == name).map(|&(_, a)| a)
    }

    pub fn predicate_index(&self, name: &str) -> Option<usize> {
        self.predicates.iter().position(|(n, _)| n == name)
    }

    pub fn constant_index(&self, name: &str) -> Option<usize> {
        self.constants.iter().position(|c| c == name)
    }

    pub fn is_constant(&self, name: &str) -> bool {
        self.constant_index(name).is_some()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.arity(name).is_some() || self.is_constant(name)
    }

    /// Unary predicates, in declaration order.
    pub fn unary(&self) -> impl Iterator<Item = &str> {
        self.predicates.iter().filter(|(_, a)| *a == 1).map(|(n, _)| n.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(untagged)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Var(n) | Term::Const(n) => n,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Pred { name: String, args: Vec<Term> },
    Eq(Term, Term),
}

impl Atom {
    pub fn args(&self) -> Vec<&Term> {
        match self {
            Atom::Pred { args, .. } => args.iter().collect(),
            Atom::Eq(s, t) => vec![s, t],
        }
    }

    /// Predicate name, with `"="` for equality.
    pub fn predicate(&self) -> &str {
        match self {
            Atom::Pred { name, .. } => name,
            Atom::Eq(..) => "=",
        }
    }

    fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> Atom {
        match self {
            Atom::Pred { name, args } => Atom::Pred { name: name.clone(), args: args.iter().map(&mut *f).collect() },
            Atom::Eq(s, t) => Atom::Eq(f(s), f(t)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Forall(String, Box<Formula>),
    Exists(String, Box<Formula>),
}

impl Formula {
    /// Atom with variable-or-constant arguments resolved later; all arguments
    /// given here are variables.
    pub fn pred(name: &str, vars: &[&str]) -> Formula {
        Formula::Atom(Atom::Pred { name: name.to_string(), args: vars.iter().map(|v| Term::var(v)).collect() })
    }

    pub fn app(name: &str, args: Vec<Term>) -> Formula {
        Formula::Atom(Atom::Pred { name: name.to_string(), args })
    }

    pub fn eq(s: Term, t: Term) -> Formula {
        Formula::Atom(Atom::Eq(s, t))
    }

    pub fn var_eq(s: &str, t: &str) -> Formula {
        Formula::eq(Term::var(s), Term::var(t))
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn forall(v: &str, f: Formula) -> Formula {
        Formula::Forall(v.to_string(), Box::new(f))
    }

    pub fn exists(v: &str, f: Formula) -> Formula {
        Formula::Exists(v.to_string(), Box::new(f))
    }

    pub fn forall_all<S: AsRef<str>>(vars: &[S], f: Formula) -> Formula {
        vars.iter().rev().fold(f, |acc, v| Formula::forall(v.as_ref(), acc))
    }

    pub fn exists_all<S: AsRef<str>>(vars: &[S], f: Formula) -> Formula {
        vars.iter().rev().fold(f, |acc, v| Formula::exists(v.as_ref(), acc))
    }

    /// Left-nested conjunction; `True` when empty.
    pub fn conj(items: impl IntoIterator<Item = Formula>) -> Formula {
        items.into_iter().reduce(Formula::and).unwrap_or(Formula::True)
    }

    /// Left-nested disjunction; `False` when empty.
    pub fn disj(items: impl IntoIterator<Item = Formula>) -> Formula {
        items.into_iter().reduce(Formula::or).unwrap_or(Formula::False)
    }

    pub fn is_sentence(&self) -> bool {
        free_vars(self).is_empty()
    }

    pub fn has_equality(&self) -> bool {
        let mut found = false;
        self.visit_atoms(&mut |a| found |= matches!(a, Atom::Eq(..)));
        found
    }

    pub fn visit_atoms(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => f(a),
            Formula::Not(g) | Formula::Forall(_, g) | Formula::Exists(_, g) => g.visit_atoms(f),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
        }
    }

    /// Every variable name occurring in the formula, bound or free.
    pub fn all_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_all_vars(&mut out);
        out
    }

    fn collect_all_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => {
                for t in a.args() {
                    if let Term::Var(v) = t {
                        out.insert(v.clone());
                    }
                }
            }
            Formula::Not(g) => g.collect_all_vars(out),
            Formula::Forall(v, g) | Formula::Exists(v, g) => {
                out.insert(v.clone());
                g.collect_all_vars(out);
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_all_vars(out);
                b.collect_all_vars(out);
            }
        }
    }

    /// Checks arities, declared symbols, and that every free variable is in
    /// `declared_free`.
    pub fn check(&self, vocab: &Vocabulary, declared_free: &[String]) -> Result<()> {
        let mut err = None;
        self.visit_atoms(&mut |a| {
            if err.is_some() {
                return;
            }
            if let Atom::Pred { name, args } = a {
                match vocab.arity(name) {
                    None => err = Some(Error::invalid(format!("undeclared predicate {name}"))),
                    Some(k) if k != args.len() => {
                        err = Some(Error::invalid(format!("{name} has arity {k}, applied to {} arguments", args.len())))
                    }
                    _ => {}
                }
            }
            for t in a.args() {
                if let Term::Const(c) = t {
                    if !vocab.is_constant(c) {
                        err = Some(Error::invalid(format!("undeclared constant {c}")));
                    }
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        for v in free_vars(self) {
            if !declared_free.contains(&v) {
                return Err(Error::invalid(format!("unbound variable {v}")));
            }
        }
        Ok(())
    }
}

pub fn free_vars(f: &Formula) -> BTreeSet<String> {
    fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match f {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => {
                for t in a.args() {
                    if let Term::Var(v) = t {
                        if !bound.contains(v) {
                            out.insert(v.clone());
                        }
                    }
                }
            }
            Formula::Not(g) => go(g, bound, out),
            Formula::Forall(v, g) | Formula::Exists(v, g) => {
                bound.push(v.clone());
                go(g, bound, out);
                bound.pop();
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(f, &mut Vec::new(), &mut out);
    out
}

/// Renames bound variables of `f` that clash with `avoid` or with each other.
pub fn standardize_apart(f: &Formula, avoid: &BTreeSet<String>) -> Formula {
    let mut used: HashSet<String> = f.all_vars().into_iter().chain(avoid.iter().cloned()).collect();
    let mut seen: HashSet<String> = free_vars(f).into_iter().chain(avoid.iter().cloned()).collect();
    standardize(f, &mut BTreeMap::new(), &mut seen, &mut used, &mut 0)
}

fn fresh(base: &str, used: &HashSet<String>, counter: &mut usize) -> String {
    loop {
        *counter += 1;
        let name = format!("{base}_{counter}");
        if !used.contains(&name) {
            return name;
        }
    }
}

/// Capture-avoiding substitution of free variable occurrences.
pub fn substitute(f: &Formula, m: &BTreeMap<String, Term>) -> Formula {
    let mut used: HashSet<String> = f.all_vars().into_iter().collect();
    for t in m.values() {
        used.insert(t.name().to_string());
    }
    let mut counter = 0;
    subst(f, m, &mut used, &mut counter)
}

fn subst(f: &Formula, m: &BTreeMap<String, Term>, used: &mut HashSet<String>, counter: &mut usize) -> Formula {
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(a) => Formula::Atom(a.map_terms(&mut |t| match t {
            Term::Var(v) => m.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Const(_) => t.clone(),
        })),
        Formula::Not(g) => Formula::not(subst(g, m, used, counter)),
        Formula::And(a, b) => Formula::and(subst(a, m, used, counter), subst(b, m, used, counter)),
        Formula::Or(a, b) => Formula::or(subst(a, m, used, counter), subst(b, m, used, counter)),
        Formula::Implies(a, b) => Formula::implies(subst(a, m, used, counter), subst(b, m, used, counter)),
        Formula::Iff(a, b) => Formula::iff(subst(a, m, used, counter), subst(b, m, used, counter)),
        Formula::Forall(v, g) | Formula::Exists(v, g) => {
            let mut inner = m.clone();
            inner.remove(v);
            let body_free = free_vars(g);
            let captures = inner.iter().any(|(x, t)| body_free.contains(x) && matches!(t, Term::Var(y) if y == v));
            let (name, body) = if captures {
                let renamed = fresh(v, used, counter);
                used.insert(renamed.clone());
                inner.insert(v.clone(), Term::Var(renamed.clone()));
                (renamed, subst(g, &inner, used, counter))
            } else {
                (v.clone(), subst(g, &inner, used, counter))
            };
            match f {
                Formula::Forall(..) => Formula::Forall(name, Box::new(body)),
                _ => Formula::Exists(name, Box::new(body)),
            }
        }
    }
}

/// Negation normal form: no `->`/`<->`, negations only on atoms.
pub fn to_nnf(f: &Formula) -> Formula {
    nnf(f, true)
}

fn nnf(f: &Formula, pos: bool) -> Formula {
    match f {
        Formula::True => {
            if pos {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::False => {
            if pos {
                Formula::False
            } else {
                Formula::True
            }
        }
        Formula::Atom(_) => {
            if pos {
                f.clone()
            } else {
                Formula::not(f.clone())
            }
        }
        Formula::Not(g) => nnf(g, !pos),
        Formula::And(a, b) if pos => Formula::and(nnf(a, true), nnf(b, true)),
        Formula::And(a, b) => Formula::or(nnf(a, false), nnf(b, false)),
        Formula::Or(a, b) if pos => Formula::or(nnf(a, true), nnf(b, true)),
        Formula::Or(a, b) => Formula::and(nnf(a, false), nnf(b, false)),
        Formula::Implies(a, b) if pos => Formula::or(nnf(a, false), nnf(b, true)),
        Formula::Implies(a, b) => Formula::and(nnf(a, true), nnf(b, false)),
        Formula::Iff(a, b) if pos => {
            Formula::and(Formula::or(nnf(a, false), nnf(b, true)), Formula::or(nnf(b, false), nnf(a, true)))
        }
        Formula::Iff(a, b) => {
            Formula::or(Formula::and(nnf(a, true), nnf(b, false)), Formula::and(nnf(b, true), nnf(a, false)))
        }
        Formula::Forall(v, g) if pos => Formula::Forall(v.clone(), Box::new(nnf(g, true))),
        Formula::Forall(v, g) => Formula::Exists(v.clone(), Box::new(nnf(g, false))),
        Formula::Exists(v, g) if pos => Formula::Exists(v.clone(), Box::new(nnf(g, true))),
        Formula::Exists(v, g) => Formula::Forall(v.clone(), Box::new(nnf(g, false))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Quantifier {
    Forall,
    Exists,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Literal {
        Literal { positive: true, atom }
    }

    pub fn neg(atom: Atom) -> Literal {
        Literal { positive: false, atom }
    }

    pub fn negated(&self) -> Literal {
        Literal { positive: !self.positive, atom: self.atom.clone() }
    }

    pub fn to_formula(&self) -> Formula {
        let a = Formula::Atom(self.atom.clone());
        if self.positive {
            a
        } else {
            Formula::not(a)
        }
    }
}

pub type Clause = Vec<Literal>;

/// Prenex CNF. `matrix == []` is the true matrix and `matrix == [[]]` the
/// canonical contradiction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrenexForm {
    pub prefix: Vec<(Quantifier, String)>,
    pub matrix: Vec<Clause>,
    pub free_vars: Vec<String>,
}

impl PrenexForm {
    pub fn to_formula(&self) -> Formula {
        let body = Formula::conj(self.matrix.iter().map(|c| Formula::disj(c.iter().map(Literal::to_formula))));
        self.prefix.iter().rev().fold(body, |acc, (q, v)| match q {
            Quantifier::Forall => Formula::Forall(v.clone(), Box::new(acc)),
            Quantifier::Exists => Formula::Exists(v.clone(), Box::new(acc)),
        })
    }

    /// Length of the maximal leftmost existential block.
    pub fn leftmost_len(&self) -> usize {
        self.prefix.iter().take_while(|(q, _)| *q == Quantifier::Exists).count()
    }

    /// Variables of the leftmost existential block.
    pub fn leftmost(&self) -> Vec<String> {
        self.prefix[..self.leftmost_len()].iter().map(|(_, v)| v.clone()).collect()
    }

    /// Existential variables after the leftmost block.
    pub fn inner_existentials(&self) -> Vec<String> {
        self.prefix[self.leftmost_len()..]
            .iter()
            .filter(|(q, _)| *q == Quantifier::Exists)
            .map(|(_, v)| v.clone())
            .collect()
    }

    pub fn universals(&self) -> Vec<String> {
        self.prefix.iter().filter(|(q, _)| *q == Quantifier::Forall).map(|(_, v)| v.clone()).collect()
    }

    pub fn existential_count(&self) -> usize {
        self.prefix.iter().filter(|(q, _)| *q == Quantifier::Exists).count()
    }

    /// True for the ∃*∀* prefix shape.
    pub fn is_bsr(&self) -> bool {
        self.inner_existentials().is_empty()
    }

    pub fn is_sentence(&self) -> bool {
        self.free_vars.is_empty()
    }

    pub fn has_equality(&self) -> bool {
        self.matrix.iter().flatten().any(|l| matches!(l.atom, Atom::Eq(..)))
    }
}

pub fn to_pcnf(f: &Formula) -> Result<PrenexForm> {
    to_pcnf_with(f, &Limits::default())
}

/// Prenex CNF by standardizing apart, pulling quantifiers out in left-to-right
/// order, and distributing. Equivalent to `f` on every structure.
pub fn to_pcnf_with(f: &Formula, limits: &Limits) -> Result<PrenexForm> {
    let free: Vec<String> = free_vars(f).into_iter().collect();
    let nnf = to_nnf(f);
    let mut used: HashSet<String> = nnf.all_vars().into_iter().collect();
    let mut seen: HashSet<String> = free.iter().cloned().collect();
    let mut counter = 0;
    let apart = standardize(&nnf, &mut BTreeMap::new(), &mut seen, &mut used, &mut counter);
    let mut prefix = Vec::new();
    let body = pull(&apart, &mut prefix);
    let mut matrix = cnf(&body, limits.pcnf_clauses)?;
    if matrix.iter().any(|c| c.is_empty()) {
        matrix = vec![vec![]];
    }
    Ok(PrenexForm { prefix, matrix, free_vars: free })
}

fn standardize(
    f: &Formula,
    env: &mut BTreeMap<String, String>,
    seen: &mut HashSet<String>,
    used: &mut HashSet<String>,
    counter: &mut usize,
) -> Formula {
    match f {
        Formula::Atom(a) => Formula::Atom(a.map_terms(&mut |t| match t {
            Term::Var(v) => Term::Var(env.get(v).cloned().unwrap_or_else(|| v.clone())),
            Term::Const(_) => t.clone(),
        })),
        Formula::Not(g) => Formula::not(standardize(g, env, seen, used, counter)),
        Formula::And(a, b) => {
            let a = standardize(a, env, seen, used, counter);
            Formula::and(a, standardize(b, env, seen, used, counter))
        }
        Formula::Or(a, b) => {
            let a = standardize(a, env, seen, used, counter);
            Formula::or(a, standardize(b, env, seen, used, counter))
        }
        Formula::Forall(v, g) | Formula::Exists(v, g) => {
            let name = if seen.contains(v) { fresh(v, used, counter) } else { v.clone() };
            used.insert(name.clone());
            seen.insert(name.clone());
            let saved = env.insert(v.clone(), name.clone());
            let body = standardize(g, env, seen, used, counter);
            match saved {
                Some(s) => env.insert(v.clone(), s),
                None => env.remove(v),
            };
            match f {
                Formula::Forall(..) => Formula::Forall(name, Box::new(body)),
                _ => Formula::Exists(name, Box::new(body)),
            }
        }
        _ => f.clone(),
    }
}

fn pull(f: &Formula, prefix: &mut Vec<(Quantifier, String)>) -> Formula {
    match f {
        Formula::Forall(v, g) => {
            prefix.push((Quantifier::Forall, v.clone()));
            pull(g, prefix)
        }
        Formula::Exists(v, g) => {
            prefix.push((Quantifier::Exists, v.clone()));
            pull(g, prefix)
        }
        Formula::And(a, b) => {
            let a = pull(a, prefix);
            Formula::and(a, pull(b, prefix))
        }
        Formula::Or(a, b) => {
            let a = pull(a, prefix);
            Formula::or(a, pull(b, prefix))
        }
        _ => f.clone(),
    }
}

/// CNF of a quantifier-free NNF formula by distribution. Literals are
/// deduplicated inside each clause; clause order follows the formula.
pub(crate) fn cnf(f: &Formula, cap: usize) -> Result<Vec<Clause>> {
    match f {
        Formula::True => Ok(vec![]),
        Formula::False => Ok(vec![vec![]]),
        Formula::Atom(a) => Ok(vec![vec![Literal::pos(a.clone())]]),
        Formula::Not(g) => match g.as_ref() {
            Formula::Atom(a) => Ok(vec![vec![Literal::neg(a.clone())]]),
            _ => Err(Error::invalid("cnf expects negation normal form")),
        },
        Formula::And(a, b) => {
            let mut left = cnf(a, cap)?;
            let right = cnf(b, cap)?;
            if left.len() + right.len() > cap {
                return Err(Error::cap("clause", cap, Some((left.len() + right.len()) as u128)));
            }
            left.extend(right);
            Ok(left)
        }
        Formula::Or(a, b) => {
            let left = cnf(a, cap)?;
            let right = cnf(b, cap)?;
            or_clauses(&left, &right, cap)
        }
        _ => Err(Error::invalid("cnf expects a quantifier-free formula")),
    }
}

pub(crate) fn or_clauses(left: &[Clause], right: &[Clause], cap: usize) -> Result<Vec<Clause>> {
    let needed = left.len() as u128 * right.len() as u128;
    if needed > cap as u128 {
        return Err(Error::cap("clause", cap, Some(needed)));
    }
    let mut out = Vec::with_capacity(needed as usize);
    for l in left {
        for r in right {
            let mut c = l.clone();
            for lit in r {
                if !c.contains(lit) {
                    c.push(lit.clone());
                }
            }
            out.push(c);
        }
    }
    Ok(out)
}
