//! Existentially distinguishable predicates: classification of a PCNF
//! sentence, the membership check and its variants, model-size bounds,
//! and the constructive sub-model repair behind the bound.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value};

use crate::formula::{standardize_apart, Atom, Formula, PrenexForm, Quantifier, Term, Vocabulary};
use crate::structures::{
    evaluate, generated_substructure, pow, restrict_eq, tuple_at, FiniteStructure, PrenexEval, SubsetWitness,
};
use crate::{Error, Result};

/// Role of an argument, class of an instance, or class of a predicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Free,
    Universal,
    Existential,
}

impl Role {
    pub fn tag(self) -> &'static str {
        match self {
            Role::Free => "free",
            Role::Universal => "universal",
            Role::Existential => "existential",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One occurrence of a predicate (or `=`) in the matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub predicate: String,
    pub clause: usize,
    pub literal: usize,
    pub positive: bool,
    pub args: Vec<Term>,
    pub roles: Vec<Role>,
    pub free_support: BTreeSet<String>,
    pub universal_support: BTreeSet<String>,
    pub existential_support: BTreeSet<String>,
    pub class: Role,
}

impl Instance {
    fn describe(&self, index: usize) -> String {
        let args: Vec<String> = self.args.iter().map(|t| t.name().to_string()).collect();
        format!(
            "#{index} {}{}({}) in clause {}",
            if self.positive { "" } else { "!" },
            self.predicate,
            args.join(","),
            self.clause
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    /// Leftmost existential variables together with free variables.
    pub v: Vec<String>,
    pub ev: Vec<String>,
    pub av: Vec<String>,
    pub eu: Vec<String>,
    pub eu_bar: Vec<String>,
    pub instances: Vec<Instance>,
    /// Class of every vocabulary predicate, plus `=` when it occurs.
    pub predicates: BTreeMap<String, Role>,
    pub unary: Vec<String>,
    pub free: Vec<String>,
    pub universal: Vec<String>,
    pub k: usize,
    pub m: usize,
    pub r: usize,
    pub q: usize,
    monadic: bool,
    arity: BTreeMap<String, usize>,
}

pub fn classify(vocab: &Vocabulary, pf: &PrenexForm) -> Classification {
    let lead = pf.leftmost_len();
    let mut v: Vec<String> = pf.free_vars.clone();
    v.extend(pf.leftmost());
    let ev = pf.inner_existentials();
    let av = pf.universals();
    debug_assert_eq!(pf.prefix.len(), lead + ev.len() + av.len());
    let mut role: HashMap<&str, Role> = HashMap::new();
    for x in &v {
        role.insert(x, Role::Free);
    }
    for x in &av {
        role.insert(x, Role::Universal);
    }
    for x in &ev {
        role.insert(x, Role::Existential);
    }

    let mut instances = Vec::new();
    let mut eu: BTreeSet<String> = BTreeSet::new();
    for (ci, clause) in pf.matrix.iter().enumerate() {
        for (li, lit) in clause.iter().enumerate() {
            let args: Vec<Term> = lit.atom.args().into_iter().cloned().collect();
            let roles: Vec<Role> = args
                .iter()
                .map(|t| match t {
                    Term::Var(x) => role.get(x.as_str()).copied().unwrap_or(Role::Free),
                    Term::Const(_) => Role::Free,
                })
                .collect();
            let support = |r: Role| -> BTreeSet<String> {
                args.iter()
                    .zip(&roles)
                    .filter(|(t, &q)| q == r && t.as_var().is_some())
                    .map(|(t, _)| t.name().to_string())
                    .collect()
            };
            let (fs, us, es) = (support(Role::Free), support(Role::Universal), support(Role::Existential));
            let class = if !es.is_empty() {
                Role::Existential
            } else if !us.is_empty() {
                Role::Universal
            } else {
                Role::Free
            };
            if let Atom::Pred { name, .. } = &lit.atom {
                if vocab.arity(name) == Some(1) {
                    eu.extend(es.iter().cloned());
                }
            }
            instances.push(Instance {
                predicate: lit.atom.predicate().to_string(),
                clause: ci,
                literal: li,
                positive: lit.positive,
                args,
                roles,
                free_support: fs,
                universal_support: us,
                existential_support: es,
                class,
            });
        }
    }

    let mut predicates: BTreeMap<String, Role> =
        vocab.predicates().iter().map(|(p, _)| (p.clone(), Role::Free)).collect();
    for inst in &instances {
        let entry = predicates.entry(inst.predicate.clone()).or_insert(Role::Free);
        *entry = (*entry).max(inst.class);
    }
    let unary: Vec<String> = vocab.unary().map(str::to_string).collect();
    let of_class = |r: Role| -> Vec<String> {
        vocab.predicates().iter().filter(|(p, _)| predicates[p] == r).map(|(p, _)| p.clone()).collect()
    };
    let eu_list: Vec<String> = ev.iter().filter(|x| eu.contains(*x)).cloned().collect();
    let eu_bar: Vec<String> = ev.iter().filter(|x| !eu.contains(*x)).cloned().collect();
    let mut arity: BTreeMap<String, usize> = vocab.predicates().iter().cloned().collect();
    arity.insert("=".into(), 2);
    Classification {
        free: of_class(Role::Free),
        universal: of_class(Role::Universal),
        k: unary.len(),
        m: vocab.constants().len(),
        r: ev.len(),
        q: pf.prefix.len(),
        monadic: vocab.predicates().iter().all(|(_, a)| *a <= 1),
        v,
        ev,
        av,
        eu: eu_list,
        eu_bar,
        instances,
        predicates,
        unary,
        arity,
    }
}

impl Classification {
    /// Some position is non-universal in both instances and holds `v` in
    /// exactly one of them.
    pub fn distinguishable(&self, i: usize, j: usize, v: &str) -> bool {
        let (a, b) = (&self.instances[i], &self.instances[j]);
        if a.predicate != b.predicate || a.args.len() != b.args.len() {
            return false;
        }
        (0..a.args.len()).any(|p| {
            a.roles[p] != Role::Universal
                && b.roles[p] != Role::Universal
                && (a.args[p].as_var() == Some(v)) != (b.args[p].as_var() == Some(v))
        })
    }

    pub fn class_of(&self, predicate: &str) -> Option<Role> {
        self.predicates.get(predicate).copied()
    }

    pub fn has_equality(&self) -> bool {
        self.predicates.contains_key("=")
    }

    fn is_eu(&self, x: &str) -> bool {
        self.eu.iter().any(|e| e == x)
    }

    pub fn to_json(&self) -> Value {
        let instances: Vec<Value> = self
            .instances
            .iter()
            .map(|i| {
                json!({
                    "predicate": i.predicate,
                    "clause": i.clause,
                    "polarity": if i.positive { "+" } else { "-" },
                    "args": i.args.iter().map(|t| t.name()).collect::<Vec<_>>(),
                    "roles": i.roles.iter().map(|r| r.tag()).collect::<Vec<_>>(),
                    "free": i.free_support,
                    "universal": i.universal_support,
                    "existential": i.existential_support,
                    "class": i.class.tag(),
                })
            })
            .collect();
        let predicates: BTreeMap<&str, &str> = self.predicates.iter().map(|(p, r)| (p.as_str(), r.tag())).collect();
        json!({
            "V": self.v,
            "EV": self.ev,
            "AV": self.av,
            "EU": self.eu,
            "EUbar": self.eu_bar,
            "U": self.unary,
            "F": self.free,
            "A": self.universal,
            "k": self.k,
            "m": self.m,
            "r": self.r,
            "q": self.q,
            "predicates": predicates,
            "instances": instances,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdpVariant {
    Base,
    /// Adds the all-E_U distinguishability alternative per predicate.
    RelaxedDistinguishability,
    /// Allows equalities between a free and an E_U variable.
    EqFreeEu,
    /// Additionally allows equalities between two E_U variables.
    EqEuEu,
    /// Both relaxations at once. Checkable, but no bound is claimed.
    RelaxedEqEuEu,
    /// Monadic, equality-free.
    Lowenheim,
    /// Monadic with free/universal/free-E_U equalities.
    LowenheimEq,
    /// Monadic, also with E_U-E_U equalities.
    LowenheimEqEu,
}

impl EdpVariant {
    pub const ALL: [EdpVariant; 8] = [
        EdpVariant::Base,
        EdpVariant::RelaxedDistinguishability,
        EdpVariant::EqFreeEu,
        EdpVariant::EqEuEu,
        EdpVariant::RelaxedEqEuEu,
        EdpVariant::Lowenheim,
        EdpVariant::LowenheimEq,
        EdpVariant::LowenheimEqEu,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            EdpVariant::Base => "base",
            EdpVariant::RelaxedDistinguishability => "relaxed-distinguishability",
            EdpVariant::EqFreeEu => "eq-free-EU",
            EdpVariant::EqEuEu => "eq-EU-EU",
            EdpVariant::RelaxedEqEuEu => "relaxed-eq-EU-EU",
            EdpVariant::Lowenheim => "lowenheim",
            EdpVariant::LowenheimEq => "lowenheim-eq",
            EdpVariant::LowenheimEqEu => "lowenheim-eq-EU",
        }
    }

    fn relaxed(self) -> bool {
        matches!(self, EdpVariant::RelaxedDistinguishability | EdpVariant::RelaxedEqEuEu)
    }

    fn monadic(self) -> bool {
        matches!(self, EdpVariant::Lowenheim | EdpVariant::LowenheimEq | EdpVariant::LowenheimEqEu)
    }

    fn equality_allowed(self, a: ArgKind, b: ArgKind) -> bool {
        use ArgKind::*;
        let plain = matches!(a, Free | Universal) && matches!(b, Free | Universal);
        let free_eu = matches!((a, b), (Free, Eu) | (Eu, Free));
        let eu_eu = a == Eu && b == Eu;
        match self {
            EdpVariant::Base | EdpVariant::RelaxedDistinguishability => plain,
            EdpVariant::EqFreeEu | EdpVariant::LowenheimEq => plain || free_eu,
            EdpVariant::EqEuEu | EdpVariant::RelaxedEqEuEu | EdpVariant::LowenheimEqEu => plain || free_eu || eu_eu,
            EdpVariant::Lowenheim => false,
        }
    }
}

impl fmt::Display for EdpVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EdpVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EdpVariant::ALL
            .into_iter()
            .find(|v| v.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown variant {s}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ArgKind {
    Free,
    Universal,
    Eu,
    EuBar,
}

/// Verdict with one line per violation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdpCheck {
    pub ok: bool,
    pub diagnostics: Vec<String>,
}

pub fn edp_check(vocab: &Vocabulary, pf: &PrenexForm, sigma: &BTreeSet<String>, variant: EdpVariant) -> EdpCheck {
    check_classified(&classify(vocab, pf), sigma, variant)
}

pub fn check_classified(c: &Classification, sigma: &BTreeSet<String>, variant: EdpVariant) -> EdpCheck {
    let mut diagnostics = Vec::new();
    for p in sigma {
        match c.predicates.get(p) {
            None => diagnostics.push(format!("{p} is not a predicate of the vocabulary")),
            Some(Role::Existential) if !c.unary.contains(p) => {
                diagnostics.push(format!("{p} is existential with arity {} and cannot be preserved", c.arity[p]))
            }
            _ => {}
        }
    }
    if variant.monadic() && !c.monadic {
        diagnostics.push("the vocabulary is not monadic".into());
    }
    for (i, inst) in c.instances.iter().enumerate() {
        if inst.predicate != "=" {
            continue;
        }
        let kind = |t: &Term, r: Role| match r {
            Role::Free => ArgKind::Free,
            Role::Universal => ArgKind::Universal,
            Role::Existential if c.is_eu(t.name()) => ArgKind::Eu,
            Role::Existential => ArgKind::EuBar,
        };
        let (a, b) = (kind(&inst.args[0], inst.roles[0]), kind(&inst.args[1], inst.roles[1]));
        if !variant.equality_allowed(a, b) {
            diagnostics.push(format!("equality {} is not allowed", inst.describe(i)));
        }
    }
    for (p, &class) in &c.predicates {
        if p == "=" || class != Role::Existential || c.arity[p] < 2 {
            continue;
        }
        let base = base_violations(c, p);
        if base.is_empty() {
            continue;
        }
        if variant.relaxed() {
            let relaxed = relaxed_violations(c, p);
            if relaxed.is_empty() {
                continue;
            }
            diagnostics.extend(relaxed);
        }
        diagnostics.extend(base);
    }
    EdpCheck { ok: diagnostics.is_empty(), diagnostics }
}

fn instances_of<'a>(c: &'a Classification, p: &'a str) -> impl Iterator<Item = usize> + 'a {
    c.instances.iter().enumerate().filter(move |(_, i)| i.predicate == p).map(|(i, _)| i)
}

fn base_violations(c: &Classification, p: &str) -> Vec<String> {
    let ids: Vec<usize> = instances_of(c, p).collect();
    let mut out = Vec::new();
    for (x, &i) in ids.iter().enumerate() {
        for &j in &ids[x + 1..] {
            let (a, b) = (&c.instances[i], &c.instances[j]);
            if a.clause == b.clause || a.positive == b.positive {
                continue;
            }
            if !c.eu_bar.iter().any(|v| c.distinguishable(i, j, v)) {
                out.push(format!(
                    "{} and {} are not distinguishable by a variable outside E_U",
                    a.describe(i),
                    b.describe(j)
                ));
            }
        }
    }
    out
}

fn relaxed_violations(c: &Classification, p: &str) -> Vec<String> {
    let ids: Vec<usize> = instances_of(c, p).collect();
    let mut out = Vec::new();
    for (x, &i) in ids.iter().enumerate() {
        for &j in &ids[x + 1..] {
            let (a, b) = (&c.instances[i], &c.instances[j]);
            if a.class != Role::Existential && b.class != Role::Existential {
                continue;
            }
            if c.eu_bar.iter().any(|v| c.distinguishable(i, j, v)) {
                continue;
            }
            let aligned = (0..a.args.len().min(b.args.len()))
                .all(|p| c.eu_bar.iter().all(|v| (a.args[p].as_var() == Some(v)) == (b.args[p].as_var() == Some(v))));
            if !aligned {
                out.push(format!(
                    "{} and {} place variables outside E_U at different positions",
                    a.describe(i),
                    b.describe(j)
                ));
                continue;
            }
            let shared: BTreeSet<&str> =
                a.args.iter().chain(&b.args).filter_map(Term::as_var).filter(|x| c.is_eu(x)).collect();
            if !shared.iter().all(|v| c.distinguishable(i, j, v)) {
                out.push(format!(
                    "{} and {} are not distinguishable by every E_U variable they mention",
                    a.describe(i),
                    b.describe(j)
                ));
            }
        }
    }
    out
}

/// Quick sufficient condition: if every existential predicate of
/// arity ≥ 2 has single-polarity or single-clause instances and equality is
/// free/universal, preserve the unary, free and universal predicates.
pub fn edp_simple_sigma(vocab: &Vocabulary, pf: &PrenexForm) -> Option<BTreeSet<String>> {
    let c = classify(vocab, pf);
    if c.predicates.get("=").is_some_and(|&r| r == Role::Existential) {
        return None;
    }
    for (p, &class) in &c.predicates {
        if p == "=" || class != Role::Existential || c.arity[p] < 2 {
            continue;
        }
        let ids: Vec<&Instance> = c.instances.iter().filter(|i| &i.predicate == p).collect();
        let same_polarity = ids.iter().all(|i| i.positive == ids[0].positive);
        let single_clause = ids.iter().all(|i| i.clause == ids[0].clause);
        if !same_polarity && !single_clause {
            return None;
        }
    }
    Some(
        vocab
            .predicates()
            .iter()
            .filter(|(p, a)| *a == 1 || c.predicates[p] != Role::Existential)
            .map(|(p, _)| p.clone())
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundReport {
    pub variant: String,
    pub b: usize,
    pub terms: BTreeMap<String, usize>,
}

impl BoundReport {
    pub fn to_json(&self) -> Value {
        json!({ "variant": self.variant, "B": self.b, "terms": self.terms })
    }
}

/// Model-size bound for a sentence passing `variant` (checked with σ = ∅).
pub fn edp_bound(c: &Classification, variant: EdpVariant) -> Result<BoundReport> {
    let check = check_classified(c, &BTreeSet::new(), variant);
    if !check.ok {
        return Err(Error::NotEdp { variant: variant.tag().to_string(), diagnostics: check.diagnostics.join("; ") });
    }
    let two_k = 1usize
        .checked_shl(c.k as u32)
        .filter(|_| c.k < usize::BITS as usize - 1)
        .ok_or_else(|| Error::cap("unary predicate", usize::BITS as usize - 2, Some(c.k as u128)))?;
    let (v, ebar, eu, m, q) = (c.v.len(), c.eu_bar.len(), c.eu.len(), c.m, c.q);
    let overflow = || Error::cap("bound", usize::MAX, None);
    let mut terms = BTreeMap::new();
    let mut put = |k: &str, x: usize| {
        terms.insert(k.to_string(), x);
    };
    let body = match variant {
        EdpVariant::Base | EdpVariant::EqFreeEu => {
            put("V", v);
            put("EUbar", ebar);
            put("2^k", two_k);
            v + ebar + two_k
        }
        EdpVariant::RelaxedDistinguishability | EdpVariant::EqEuEu => {
            put("V", v);
            put("EUbar", ebar);
            put("EU", eu);
            put("2^k", two_k);
            v + ebar + eu.checked_mul(two_k).ok_or_else(overflow)?
        }
        EdpVariant::RelaxedEqEuEu => {
            return Err(Error::invalid("no bound is established for the combined relaxation"));
        }
        EdpVariant::Lowenheim => {
            put("q", q);
            put("2^k", two_k);
            q.checked_mul(two_k).ok_or_else(overflow)?
        }
        EdpVariant::LowenheimEq => {
            put("V", v);
            put("2^k", two_k);
            v + two_k
        }
        EdpVariant::LowenheimEqEu => {
            put("V", v);
            put("EU", eu);
            put("2^k", two_k);
            v + eu.checked_mul(two_k).ok_or_else(overflow)?
        }
    };
    put("m", m);
    Ok(BoundReport { variant: variant.tag().to_string(), b: body + m, terms })
}

/// The small substructure a model is cut down to, with the allocation the
/// repair step needs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdpCore {
    pub subset: SubsetWitness,
    /// Values of free and leftmost existential variables.
    pub free_values: BTreeMap<String, usize>,
    /// Least element of each colour outside the free values, by colour.
    pub colour_reps: BTreeMap<Vec<bool>, usize>,
    /// Dedicated element of each existential variable outside E_U.
    pub eu_bar_values: BTreeMap<String, usize>,
    /// The universe was too small for a disjoint allocation; the whole
    /// universe is the core.
    pub degenerate: bool,
}

impl EdpCore {
    fn val_free(&self, m: &FiniteStructure) -> BTreeSet<usize> {
        self.free_values.values().chain(m.constant_values()).copied().collect()
    }
}

/// Least witness for the leftmost existential block, keeping any values
/// already given. Free variables must be given.
fn leftmost_witness(
    pf: &PrenexForm,
    m: &FiniteStructure,
    given: Option<&BTreeMap<String, usize>>,
) -> Result<BTreeMap<String, usize>> {
    let empty = BTreeMap::new();
    let given = given.unwrap_or(&empty);
    let eval = PrenexEval::new(pf, m)?;
    let mut env = eval.env(given)?;
    let lead = pf.leftmost_len();
    let mut fixed = vec![None; lead];
    for (i, (_, v)) in pf.prefix[..lead].iter().enumerate() {
        if let Some(&e) = given.get(v) {
            if e >= m.size() {
                return Err(Error::invalid(format!("witness value {e} for {v} outside the universe")));
            }
            fixed[i] = Some(e);
        }
    }
    fn search(
        pos: usize,
        lead: usize,
        fixed: &[Option<usize>],
        n: usize,
        eval: &PrenexEval,
        env: &mut Vec<usize>,
    ) -> bool {
        if pos == lead {
            return eval.holds_from(lead, env);
        }
        let choices: Vec<usize> = match fixed[pos] {
            Some(e) => vec![e],
            None => (0..n).collect(),
        };
        choices.into_iter().any(|e| {
            env[pos] = e;
            search(pos + 1, lead, fixed, n, eval, env)
        })
    }
    if !search(0, lead, &fixed, m.size(), &eval, &mut env) {
        return Err(Error::invalid("the structure does not satisfy the formula with this witness"));
    }
    let mut out: BTreeMap<String, usize> = pf.free_vars.iter().map(|v| (v.clone(), given[v])).collect();
    for (i, (_, v)) in pf.prefix[..lead].iter().enumerate() {
        out.insert(v.clone(), env[i]);
    }
    Ok(out)
}

/// Core of a model: constant and witness values, one fresh element per
/// existential variable outside E_U, and one least representative per
/// colour outside the witness values (only when some variable is in E_U).
pub fn edp_core(
    pf: &PrenexForm,
    sigma: &BTreeSet<String>,
    m: &FiniteStructure,
    witness: Option<&BTreeMap<String, usize>>,
) -> Result<EdpCore> {
    let c = classify(m.vocabulary(), pf);
    let check = check_classified(&c, sigma, EdpVariant::Base);
    if !check.ok {
        return Err(Error::NotEdp { variant: "base".into(), diagnostics: check.diagnostics.join("; ") });
    }
    let free_values = leftmost_witness(pf, m, witness)?;
    let mut used: BTreeSet<usize> = free_values.values().chain(m.constant_values()).copied().collect();
    let mut colour_reps = BTreeMap::new();
    if !c.eu.is_empty() {
        for e in 0..m.size() {
            if !used.contains(&e) {
                colour_reps.entry(m.colour(e)).or_insert(e);
            }
        }
        used.extend(colour_reps.values().copied());
    }
    let spare: Vec<usize> = (0..m.size()).filter(|e| !used.contains(e)).collect();
    if spare.len() < c.eu_bar.len() {
        let subset = SubsetWitness::new(m, 0..m.size())?;
        return Ok(EdpCore { subset, free_values, colour_reps, eu_bar_values: BTreeMap::new(), degenerate: true });
    }
    let eu_bar_values: BTreeMap<String, usize> = c.eu_bar.iter().cloned().zip(spare.iter().copied()).collect();
    used.extend(eu_bar_values.values().copied());
    if used.is_empty() {
        used.insert(0);
    }
    Ok(EdpCore { subset: SubsetWitness::new(m, used)?, free_values, colour_reps, eu_bar_values, degenerate: false })
}

#[derive(Clone, Copy)]
enum Arg {
    Slot(usize),
    Elem(usize),
}

/// Rebuilds a model on `mid` that agrees with `m` on σ: inner existentials
/// are re-chosen inside the core, instance truth values are copied from `m`
/// or forced by polarity, everything else is copied from `m`, and
/// same-clause conflicts are settled to true.
pub fn edp_extend(
    pf: &PrenexForm,
    sigma: &BTreeSet<String>,
    m: &FiniteStructure,
    core: &EdpCore,
    mid: &SubsetWitness,
) -> Result<FiniteStructure> {
    let vocab = m.vocabulary();
    let c = classify(vocab, pf);
    let check = check_classified(&c, sigma, EdpVariant::Base);
    if !check.ok {
        return Err(Error::NotEdp { variant: "base".into(), diagnostics: check.diagnostics.join("; ") });
    }
    if mid.parent_size != m.size() || core.subset.parent_size != m.size() {
        return Err(Error::invalid("subset taken from a different structure"));
    }
    if !core.subset.elements.iter().all(|&e| mid.contains(e)) {
        return Err(Error::invalid("the extension does not contain the core"));
    }
    let (m2, _) = generated_substructure(m, &mid.elements)?;
    let relabel = |e: usize| mid.elements.binary_search(&e).expect("element of mid");
    let new_assignment: BTreeMap<String, usize> =
        pf.free_vars.iter().map(|v| (v.clone(), relabel(core.free_values[v]))).collect();
    if core.degenerate {
        return if evaluate(&m2, pf, Some(&new_assignment))? {
            Ok(m2)
        } else {
            Err(Error::Internal("degenerate core whose substructure is not a model".into()))
        };
    }

    let eval = PrenexEval::new(pf, m)?;
    let mut env_m = eval.env(&core.free_values)?;
    let lead = pf.leftmost_len();
    for (i, (_, v)) in pf.prefix[..lead].iter().enumerate() {
        env_m[i] = core.free_values[v];
    }
    let mut env_3 = env_m.clone();
    let slot: HashMap<&str, usize> = pf
        .prefix
        .iter()
        .map(|(_, v)| v.as_str())
        .chain(pf.free_vars.iter().map(String::as_str))
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    let resolve = |t: &Term| match t {
        Term::Var(v) => Arg::Slot(slot[v.as_str()]),
        Term::Const(k) => Arg::Elem(m.constant(k)),
    };
    // (predicate index or None for equality, args, positive, copy-from-m)
    let lits: Vec<Vec<(Option<usize>, Vec<Arg>, bool, bool)>> = pf
        .matrix
        .iter()
        .map(|cl| {
            cl.iter()
                .map(|l| {
                    let args = l.atom.args().into_iter().map(resolve).collect();
                    let pred = match &l.atom {
                        Atom::Pred { name, .. } => vocab.predicate_index(name),
                        Atom::Eq(..) => None,
                    };
                    let name = l.atom.predicate();
                    let copy = c.arity[name] < 2 || c.predicates[name] != Role::Existential;
                    (pred, args, l.positive, copy)
                })
                .collect()
        })
        .collect();

    let val_free = core.val_free(m);
    let eu_bar: HashMap<usize, usize> =
        pf.prefix.iter().enumerate().filter_map(|(i, (_, v))| core.eu_bar_values.get(v).map(|&e| (i, e))).collect();
    let selector = |pos: usize, d: usize| -> Result<usize> {
        if let Some(&a) = eu_bar.get(&pos) {
            return Ok(a);
        }
        if val_free.contains(&d) {
            return Ok(d);
        }
        core.colour_reps
            .get(&m.colour(d))
            .copied()
            .ok_or_else(|| Error::Internal(format!("no representative for the colour of {d}")))
    };

    type Key = (usize, Vec<usize>);
    let mut assigned: HashMap<Key, (BTreeSet<usize>, BTreeSet<usize>)> = HashMap::new();
    struct Walk<'a, F: Fn(usize, usize) -> Result<usize>> {
        pf: &'a PrenexForm,
        m: &'a FiniteStructure,
        eval: &'a PrenexEval<'a>,
        mid: &'a [usize],
        selector: F,
        lits: &'a [Vec<(Option<usize>, Vec<Arg>, bool, bool)>],
    }
    impl<F: Fn(usize, usize) -> Result<usize>> Walk<'_, F> {
        fn go(
            &self,
            pos: usize,
            env_m: &mut Vec<usize>,
            env_3: &mut Vec<usize>,
            out: &mut HashMap<Key, (BTreeSet<usize>, BTreeSet<usize>)>,
        ) -> Result<()> {
            match self.pf.prefix.get(pos) {
                Some((Quantifier::Forall, _)) => {
                    for &e in self.mid {
                        env_m[pos] = e;
                        env_3[pos] = e;
                        self.go(pos + 1, env_m, env_3, out)?;
                    }
                    Ok(())
                }
                Some((Quantifier::Exists, v)) => {
                    let d = (0..self.m.size())
                        .find(|&d| {
                            env_m[pos] = d;
                            self.eval.holds_from(pos + 1, env_m)
                        })
                        .ok_or_else(|| Error::Internal(format!("no value for {v} in the model")))?;
                    env_m[pos] = d;
                    env_3[pos] = (self.selector)(pos, d)?;
                    self.go(pos + 1, env_m, env_3, out)
                }
                None => {
                    let get = |env: &[usize], a: &Arg| match *a {
                        Arg::Slot(s) => env[s],
                        Arg::Elem(e) => e,
                    };
                    for (ci, clause) in self.lits.iter().enumerate() {
                        for (pred, args, positive, copy) in clause {
                            let Some(p) = *pred else { continue };
                            let here: Vec<usize> = args.iter().map(|a| get(env_3, a)).collect();
                            let value = if *copy {
                                let there: Vec<usize> = args.iter().map(|a| get(env_m, a)).collect();
                                let name = &self.m.vocabulary().predicates()[p].0;
                                self.m.holds(name, &there)
                            } else {
                                *positive
                            };
                            let entry = out.entry((p, here)).or_default();
                            if value {
                                entry.0.insert(ci)
                            } else {
                                entry.1.insert(ci)
                            };
                        }
                    }
                    Ok(())
                }
            }
        }
    }
    let walk = Walk { pf, m, eval: &eval, mid: &mid.elements, selector, lits: &lits };
    walk.go(lead, &mut env_m, &mut env_3, &mut assigned)?;

    let mut out = m2.clone();
    for (p, (name, arity)) in vocab.predicates().iter().enumerate() {
        for t in 0..pow(mid.len(), *arity) {
            let local = tuple_at(mid.len(), *arity, t);
            let global: Vec<usize> = local.iter().map(|&e| mid.elements[e]).collect();
            let value = match assigned.get(&(p, global.clone())) {
                None => m.holds(name, &global),
                Some((t, f)) if f.is_empty() => {
                    debug_assert!(!t.is_empty());
                    true
                }
                Some((t, _)) if t.is_empty() => false,
                Some((t, f)) => {
                    if t.len() == 1 && t == f {
                        true
                    } else {
                        return Err(Error::Internal(format!(
                            "conflict on {name}{global:?} between clauses {t:?} and {f:?}"
                        )));
                    }
                }
            };
            out.set(name, &local, value);
        }
    }
    if !evaluate(&out, pf, Some(&new_assignment))? {
        return Err(Error::Internal("repaired structure is not a model".into()));
    }
    if !restrict_eq(&out, &m2, sigma)? {
        return Err(Error::Internal("repaired structure changed a preserved predicate".into()));
    }
    Ok(out)
}

fn full_sigma(vocab: &Vocabulary) -> BTreeSet<String> {
    vocab.predicates().iter().map(|(p, _)| p.clone()).collect()
}

/// Conjunction of two sentences that both preserve the whole vocabulary;
/// the bound is the sum.
pub fn combine_and(
    vocab: &Vocabulary,
    (f1, b1, s1): (&Formula, usize, &BTreeSet<String>),
    (f2, b2, s2): (&Formula, usize, &BTreeSet<String>),
) -> Result<(Formula, BoundReport, BTreeSet<String>)> {
    let all = full_sigma(vocab);
    if s1 != &all || s2 != &all {
        return Err(Error::invalid("conjunction is only closed when both sides preserve every predicate"));
    }
    let f = Formula::and(f1.clone(), standardize_apart(f2, &f1.all_vars()));
    let terms = BTreeMap::from([("B1".to_string(), b1), ("B2".to_string(), b2)]);
    Ok((f, BoundReport { variant: "and".into(), b: b1 + b2, terms }, all))
}

/// Disjunction; the bound is the maximum and σ the intersection.
pub fn combine_or(
    (f1, b1, s1): (&Formula, usize, &BTreeSet<String>),
    (f2, b2, s2): (&Formula, usize, &BTreeSet<String>),
) -> (Formula, BoundReport, BTreeSet<String>) {
    let f = Formula::or(f1.clone(), standardize_apart(f2, &f1.all_vars()));
    let terms = BTreeMap::from([("B1".to_string(), b1), ("B2".to_string(), b2)]);
    let sigma = s1.intersection(s2).cloned().collect();
    (f, BoundReport { variant: "or".into(), b: b1.max(b2), terms }, sigma)
}
