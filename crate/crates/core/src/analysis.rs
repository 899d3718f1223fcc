//! Semantic procedures over finite structures: bounded satisfiability, an
//! interleaved model/refutation search, spectra, bounded equivalence, the
//! extensible-sub-model oracle and the search for a witness bound.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use itertools::Itertools;
use serde_json::{json, Value};

use crate::formula::{to_pcnf_with, Atom, Formula, Limits, Quantifier, Term, Vocabulary};
use crate::ground::{find_model, solve_with, AtomTable, GroundAtom, GroundCnf, Pinning, SolveResult, SolverOptions};
use crate::structures::{
    count_structures, enumerate_structures_with, evaluate, generated_substructure, FiniteStructure,
};
use crate::translate::{translate, Mode, TranslationResult};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Sat(FiniteStructure),
    Unsat,
    Unknown,
}

impl Verdict {
    pub fn tag(&self) -> &'static str {
        match self {
            Verdict::Sat(_) => "SAT",
            Verdict::Unsat => "UNSAT",
            Verdict::Unknown => "UNKNOWN",
        }
    }

    pub fn model(&self) -> Option<&FiniteStructure> {
        match self {
            Verdict::Sat(m) => Some(m),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SatOutcome {
    pub verdict: Verdict,
    /// Universe sizes searched for a model.
    pub sizes_tried: usize,
    /// Deepest Herbrand level refuted against, if any.
    pub depth: Option<usize>,
    pub steps: u64,
}

impl SatOutcome {
    pub fn to_json(&self) -> Value {
        json!({
            "verdict": self.verdict.tag(),
            "model": self.verdict.model().map(|m| m.to_json()),
            "sizes_tried": self.sizes_tried,
            "depth": self.depth,
            "steps": self.steps,
        })
    }
}

fn check_sentence(vocab: &Vocabulary, s: &Formula) -> Result<()> {
    s.check(vocab, &[])?;
    if !s.is_sentence() {
        return Err(Error::invalid("expected a sentence"));
    }
    Ok(())
}

fn model_at(vocab: &Vocabulary, s: &Formula, n: usize, limits: &Limits) -> Result<Option<FiniteStructure>> {
    let m = find_model(vocab, s, n, None, limits, SolverOptions::LEARNING)?;
    if let Some(m) = &m {
        if !evaluate(m, s, None)? {
            return Err(Error::Internal(format!("decoded structure of size {n} is not a model")));
        }
    }
    Ok(m)
}

/// Searches sizes 1..=max(b,1). Complete only when `s` has a model of size
/// at most `b` whenever it has any.
pub fn decide_sat_bounded(vocab: &Vocabulary, s: &Formula, b: usize, limits: &Limits) -> Result<SatOutcome> {
    check_sentence(vocab, s)?;
    let top = b.max(1);
    for n in 1..=top {
        if let Some(m) = model_at(vocab, s, n, limits)? {
            return Ok(SatOutcome { verdict: Verdict::Sat(m), sizes_tried: n, depth: None, steps: 0 });
        }
    }
    Ok(SatOutcome { verdict: Verdict::Unsat, sizes_tried: top, depth: None, steps: 0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_size: usize,
    pub max_depth: usize,
    pub max_steps: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_size: 4, max_depth: 2, max_steps: 100_000 }
    }
}

/// Round i looks for a model of size i and refutes against ground instances
/// of depth i-1, until one side gives a firm answer or the budget runs out.
pub fn interleaved_sat(vocab: &Vocabulary, s: &Formula, budget: Budget) -> Result<SatOutcome> {
    check_sentence(vocab, s)?;
    let limits = Limits::default();
    let mut steps = 0u64;
    let mut sizes_tried = 0;
    let mut depth = None;
    let herbrand = Herbrand::new(vocab, s, &limits)?;
    let rounds = budget.max_size.max(budget.max_depth + 1);
    for i in 1..=rounds {
        if i <= budget.max_size {
            sizes_tried = i;
            match find_model(vocab, s, i, None, &limits, SolverOptions::LEARNING) {
                Ok(Some(m)) => {
                    if !evaluate(&m, s, None)? {
                        return Err(Error::Internal("decoded structure is not a model".into()));
                    }
                    return Ok(SatOutcome { verdict: Verdict::Sat(m), sizes_tried, depth, steps });
                }
                Ok(None) => {}
                Err(Error::CapExceeded { .. }) => break,
                Err(e) => return Err(e),
            }
            steps += 1;
        }
        if i - 1 <= budget.max_depth {
            match herbrand.refutes(i - 1, budget.max_steps.saturating_sub(steps)) {
                Some((true, used)) => {
                    steps += used;
                    return Ok(SatOutcome { verdict: Verdict::Unsat, sizes_tried, depth: Some(i - 1), steps });
                }
                Some((false, used)) => {
                    steps += used;
                    depth = Some(i - 1);
                }
                None => break,
            }
        }
        if steps >= budget.max_steps {
            break;
        }
    }
    Ok(SatOutcome { verdict: Verdict::Unknown, sizes_tried, depth, steps })
}

/// Terms of the Skolemized sentence: constants and Skolem functions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum STerm {
    Var(usize),
    Sym(usize, Vec<STerm>),
}

#[derive(Clone, Debug)]
enum SAtom {
    Pred(String, Vec<STerm>),
    Eq(STerm, STerm),
}

struct Herbrand {
    /// Symbol name and arity; constants have arity 0.
    symbols: Vec<(String, usize)>,
    universals: usize,
    clauses: Vec<Vec<(bool, SAtom)>>,
    equality: bool,
    predicates: Vec<(String, usize)>,
}

impl Herbrand {
    fn new(vocab: &Vocabulary, s: &Formula, limits: &Limits) -> Result<Self> {
        let pf = to_pcnf_with(s, limits)?;
        let mut symbols: Vec<(String, usize)> = vocab.constants().iter().map(|c| (c.clone(), 0)).collect();
        let mut env: HashMap<String, STerm> = HashMap::new();
        let mut universals = 0;
        for (q, v) in &pf.prefix {
            match q {
                Quantifier::Forall => {
                    env.insert(v.clone(), STerm::Var(universals));
                    universals += 1;
                }
                Quantifier::Exists => {
                    symbols.push((format!("sk_{v}"), universals));
                    let args = (0..universals).map(STerm::Var).collect();
                    env.insert(v.clone(), STerm::Sym(symbols.len() - 1, args));
                }
            }
        }
        if !symbols.iter().any(|(_, a)| *a == 0) {
            symbols.push(("c0".into(), 0));
        }
        let term = |t: &Term| match t {
            Term::Var(v) => env[v].clone(),
            Term::Const(c) => STerm::Sym(vocab.constant_index(c).expect("declared"), vec![]),
        };
        let clauses = pf
            .matrix
            .iter()
            .map(|c| {
                c.iter()
                    .map(|l| {
                        let a = match &l.atom {
                            Atom::Pred { name, args } => SAtom::Pred(name.clone(), args.iter().map(term).collect()),
                            Atom::Eq(x, y) => SAtom::Eq(term(x), term(y)),
                        };
                        (l.positive, a)
                    })
                    .collect()
            })
            .collect();
        Ok(Herbrand {
            symbols,
            universals,
            clauses,
            equality: pf.has_equality(),
            predicates: vocab.predicates().to_vec(),
        })
    }

    /// Ground terms of depth ≤ d, shallow first.
    fn universe(&self, d: usize, cap: u64) -> Option<Vec<STerm>> {
        let mut terms: Vec<STerm> =
            self.symbols.iter().enumerate().filter(|(_, (_, a))| *a == 0).map(|(i, _)| STerm::Sym(i, vec![])).collect();
        for _ in 0..d {
            let mut next = terms.clone();
            for (i, (_, arity)) in self.symbols.iter().enumerate() {
                if *arity == 0 {
                    continue;
                }
                for args in (0..*arity).map(|_| terms.iter()).multi_cartesian_product() {
                    let t = STerm::Sym(i, args.into_iter().cloned().collect());
                    if !next.contains(&t) {
                        next.push(t);
                    }
                    if next.len() as u64 > cap {
                        return None;
                    }
                }
            }
            terms = next;
        }
        Some(terms)
    }

    /// `Some((refuted, steps))`, or `None` when the step allowance ran out.
    fn refutes(&self, d: usize, allowance: u64) -> Option<(bool, u64)> {
        let universe = self.universe(d, allowance)?;
        let mut index: HashMap<STerm, usize> = HashMap::new();
        let mut names = Vec::new();
        let mut steps = 0u64;
        let mut table = AtomTable::default();
        let mut clauses: Vec<Vec<i32>> = Vec::new();
        let intern_term = |t: &STerm, index: &mut HashMap<STerm, usize>, names: &mut Vec<STerm>| -> usize {
            if let Some(&i) = index.get(t) {
                return i;
            }
            names.push(t.clone());
            index.insert(t.clone(), names.len() - 1);
            names.len() - 1
        };
        fn inst(t: &STerm, z: &[&STerm]) -> STerm {
            match t {
                STerm::Var(i) => z[*i].clone(),
                STerm::Sym(f, args) => STerm::Sym(*f, args.iter().map(|a| inst(a, z)).collect()),
            }
        }
        for z in (0..self.universals).map(|_| universe.iter()).multi_cartesian_product() {
            'clause: for clause in &self.clauses {
                steps += 1;
                if steps > allowance {
                    return None;
                }
                let mut out: Vec<i32> = Vec::new();
                for (pos, atom) in clause {
                    let id = match atom {
                        SAtom::Pred(name, args) => {
                            let args = args.iter().map(|a| intern_term(&inst(a, &z), &mut index, &mut names)).collect();
                            table.intern(GroundAtom::Pred { name: name.clone(), args }) as i32
                        }
                        SAtom::Eq(a, b) => {
                            let (a, b) = (
                                intern_term(&inst(a, &z), &mut index, &mut names),
                                intern_term(&inst(b, &z), &mut index, &mut names),
                            );
                            if a == b {
                                if *pos {
                                    continue 'clause;
                                }
                                continue;
                            }
                            table.intern(GroundAtom::Eq(a.min(b), a.max(b))) as i32
                        }
                    };
                    out.push(if *pos { id } else { -id });
                }
                clauses.push(out);
            }
        }
        if self.equality {
            // Close the occurring terms under subterms so congruence can
            // relate them.
            let mut i = 0;
            while i < names.len() {
                if let STerm::Sym(_, args) = names[i].clone() {
                    for a in &args {
                        intern_term(a, &mut index, &mut names);
                    }
                }
                i += 1;
            }
            let t = names.len();
            let eq =
                |a: usize, b: usize, table: &mut AtomTable| table.intern(GroundAtom::Eq(a.min(b), a.max(b))) as i32;
            steps += (t * t * t) as u64;
            if steps > allowance {
                return None;
            }
            for (a, b, c) in (0..t).tuple_combinations::<(_, _, _)>() {
                for (x, y, z) in [(a, b, c), (b, c, a), (c, a, b)] {
                    let (xy, yz, xz) = (eq(x, y, &mut table), eq(y, z, &mut table), eq(x, z, &mut table));
                    clauses.push(vec![-xy, -yz, xz]);
                }
            }
            // Function congruence between occurring terms.
            for i in 0..t {
                for j in i + 1..t {
                    if let (STerm::Sym(f, xs), STerm::Sym(g, ys)) = (&names[i], &names[j]) {
                        if f != g || xs.is_empty() {
                            continue;
                        }
                        let mut premise = Vec::new();
                        for (x, y) in xs.iter().zip(ys) {
                            let (x, y) = (index[x], index[y]);
                            if x != y {
                                premise.push(-eq(x, y, &mut table));
                            }
                        }
                        premise.push(eq(i, j, &mut table));
                        clauses.push(premise);
                    }
                }
            }
            // Predicate congruence, one position at a time.
            let atoms: Vec<(String, Vec<usize>)> = table
                .iter()
                .filter_map(|(_, a)| match a {
                    GroundAtom::Pred { name, args } => Some((name.clone(), args.clone())),
                    _ => None,
                })
                .collect();
            for (name, args) in atoms {
                for p in 0..args.len() {
                    for alt in 0..t {
                        if alt == args[p] {
                            continue;
                        }
                        steps += 1;
                        if steps > allowance {
                            return None;
                        }
                        let mut other = args.clone();
                        other[p] = alt;
                        let e = eq(args[p], alt, &mut table);
                        let a = table.intern(GroundAtom::Pred { name: name.clone(), args: args.clone() }) as i32;
                        let b = table.intern(GroundAtom::Pred { name: name.clone(), args: other }) as i32;
                        clauses.push(vec![-e, -a, b]);
                    }
                }
            }
        }
        let _ = &self.predicates;
        let cnf = GroundCnf { num_vars: table.len() as u32, clauses };
        let limit = allowance.saturating_sub(steps);
        match solve_with(&cnf, SolverOptions { learning: true, conflict_limit: Some(limit) }) {
            SolveResult::Unsat => Some((true, steps)),
            SolveResult::Sat(_) => Some((false, steps)),
            SolveResult::Unknown => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpectrumResult {
    pub n_max: usize,
    /// Entry `n-1` tells whether size `n` has a model.
    pub realizable: Vec<bool>,
    pub witnesses: Vec<Option<FiniteStructure>>,
}

impl SpectrumResult {
    pub fn sizes(&self) -> Vec<usize> {
        (1..=self.n_max).filter(|&n| self.realizable[n - 1]).collect()
    }

    pub fn contains(&self, n: usize) -> bool {
        n >= 1 && n <= self.n_max && self.realizable[n - 1]
    }

    pub fn to_json(&self) -> Value {
        json!({
            "nMax": self.n_max,
            "sizes": self.sizes(),
            "witnesses": self.witnesses.iter().flatten().map(|m| m.to_json()).collect::<Vec<_>>(),
        })
    }
}

pub fn spectrum(vocab: &Vocabulary, s: &Formula, n_max: usize, limits: &Limits) -> Result<SpectrumResult> {
    check_sentence(vocab, s)?;
    let mut realizable = Vec::with_capacity(n_max);
    let mut witnesses = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let m = model_at(vocab, s, n, limits)?;
        realizable.push(m.is_some());
        witnesses.push(m);
    }
    Ok(SpectrumResult { n_max, realizable, witnesses })
}

/// Every realizable size n forces all sizes in [b, n], as it does for
/// sentences whose extensible cores have at most b elements and σ = ∅.
pub fn interval_property(spec: &SpectrumResult, b: usize) -> bool {
    spec.sizes().into_iter().all(|n| (b.max(1)..=n).all(|m| spec.contains(m)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivResult {
    pub equivalent: bool,
    pub countermodel: Option<FiniteStructure>,
    /// Sizes above this were not examined.
    pub n_cap: usize,
}

impl EquivResult {
    pub fn to_json(&self) -> Value {
        json!({
            "equivalent": self.equivalent,
            "countermodel": self.countermodel.as_ref().map(|m| m.to_json()),
            "nCap": self.n_cap,
            "note": format!("checked on structures of size at most {}", self.n_cap),
        })
    }
}

/// No structure of size ≤ `n_cap` separates `f` and `g`.
pub fn bounded_equiv(
    vocab: &Vocabulary,
    f: &Formula,
    g: &Formula,
    n_cap: usize,
    limits: &Limits,
) -> Result<EquivResult> {
    check_sentence(vocab, f)?;
    check_sentence(vocab, g)?;
    if f == g {
        return Ok(EquivResult { equivalent: true, countermodel: None, n_cap });
    }
    let differ = Formula::not(Formula::iff(f.clone(), g.clone()));
    for n in 1..=n_cap {
        if let Some(m) = model_at(vocab, &differ, n, limits)? {
            return Ok(EquivResult { equivalent: false, countermodel: Some(m), n_cap });
        }
    }
    Ok(EquivResult { equivalent: true, countermodel: None, n_cap })
}

/// A core that was tried, with an extension of it admitting no repair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreEvidence {
    pub core: Vec<usize>,
    pub extension: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EbsFailure {
    pub model: FiniteStructure,
    /// The unrepairable extension of the first core tried (the whole model
    /// when no core fits).
    pub extension: Vec<usize>,
    /// One entry per admissible-size core.
    pub evidence: Vec<CoreEvidence>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EbsVerdict {
    pub pass: bool,
    pub sigma: BTreeSet<String>,
    pub b: usize,
    pub n_max: usize,
    pub models_checked: u64,
    pub failure: Option<EbsFailure>,
}

impl EbsVerdict {
    pub fn to_json(&self) -> Value {
        json!({
            "pass": self.pass,
            "sigma": self.sigma,
            "B": self.b,
            "nMax": self.n_max,
            "models_checked": self.models_checked,
            "failure": self.failure.as_ref().map(|f| json!({
                "model": f.model.to_json(),
                "extension": f.extension,
                "evidence": f.evidence.iter().map(|e| json!({"core": e.core, "extension": e.extension})).collect::<Vec<_>>(),
            })),
        })
    }
}

/// Outcome for one model: a working core, or evidence against every core.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelCheck {
    Core(Vec<usize>),
    NoCore(Vec<CoreEvidence>),
}

/// Memoized "some structure on this universe agrees with the extension on
/// σ and the constants and satisfies s".
pub struct RepairQueries<'a> {
    vocab: &'a Vocabulary,
    s: &'a Formula,
    sigma: &'a BTreeSet<String>,
    sigma_idx: Vec<usize>,
    limits: &'a Limits,
    memo: HashMap<(usize, Vec<Vec<bool>>, Vec<usize>), bool>,
}

impl<'a> RepairQueries<'a> {
    pub fn new(vocab: &'a Vocabulary, s: &'a Formula, sigma: &'a BTreeSet<String>, limits: &'a Limits) -> Result<Self> {
        check_sentence(vocab, s)?;
        let sigma_idx = sigma
            .iter()
            .map(|p| vocab.predicate_index(p).ok_or_else(|| Error::invalid(format!("{p} is not in the vocabulary"))))
            .collect::<Result<_>>()?;
        Ok(RepairQueries { vocab, s, sigma, sigma_idx, limits, memo: HashMap::new() })
    }

    pub fn repairable(&mut self, m: &FiniteStructure, subset: &[usize]) -> Result<bool> {
        let (sub, _) = generated_substructure(m, subset)?;
        let key = (
            sub.size(),
            self.sigma_idx.iter().map(|&p| sub.bitmap(p).to_vec()).collect(),
            sub.constant_values().to_vec(),
        );
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let pin = Pinning::from_structure(&sub, self.sigma, true);
        let v = find_model(self.vocab, self.s, sub.size(), Some(&pin), self.limits, SolverOptions::LEARNING)?.is_some();
        self.memo.insert(key, v);
        Ok(v)
    }

    /// Tries cores of size ≤ b (containing the constant values) in order of
    /// size, then lexicographically.
    pub fn check_model(&mut self, m: &FiniteStructure, b: usize) -> Result<ModelCheck> {
        let consts: BTreeSet<usize> = m.constant_values().iter().copied().collect();
        let others: Vec<usize> = (0..m.size()).filter(|e| !consts.contains(e)).collect();
        let mut evidence = Vec::new();
        if consts.len() > b {
            return Ok(ModelCheck::NoCore(evidence));
        }
        for extra in 0..=(b - consts.len()).min(others.len()) {
            for pick in others.iter().copied().combinations(extra) {
                let core: Vec<usize> = consts.iter().copied().chain(pick).sorted().collect();
                let rest: Vec<usize> = (0..m.size()).filter(|e| !core.contains(e)).collect();
                let mut failing = None;
                for mask in 0u64..(1u64 << rest.len()) {
                    let ext: Vec<usize> = core
                        .iter()
                        .copied()
                        .chain(rest.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e))
                        .sorted()
                        .collect();
                    if ext.is_empty() {
                        continue;
                    }
                    if !self.repairable(m, &ext)? {
                        failing = Some(ext);
                        break;
                    }
                }
                match failing {
                    None => return Ok(ModelCheck::Core(core)),
                    Some(extension) => evidence.push(CoreEvidence { core, extension }),
                }
            }
        }
        Ok(ModelCheck::NoCore(evidence))
    }
}

/// Checks every model of size ≤ `n_max` for a core of size ≤ `b` all of
/// whose extensions can be repaired while keeping σ. Stops at the first
/// model without one.
pub fn ebs_oracle(
    vocab: &Vocabulary,
    s: &Formula,
    sigma: &BTreeSet<String>,
    b: usize,
    n_max: usize,
    limits: &Limits,
) -> Result<EbsVerdict> {
    let mut q = RepairQueries::new(vocab, s, sigma, limits)?;
    let mut models_checked = 0u64;
    for n in 1..=n_max {
        let g = crate::ground::ground_formula(vocab, s, n, None, limits)?;
        let cnf = crate::ground::tseitin(&g.formula, g.table.len() as u32);
        let projection = g.structure_atoms();
        for values in crate::ground::all_models(&cnf, &projection) {
            models_checked += 1;
            if u128::from(models_checked) > limits.structures {
                return Err(Error::cap("model", limits.structures as usize, None));
            }
            let lookup: HashMap<u32, bool> = projection.iter().copied().zip(values).collect();
            let m = g.decode(|id| lookup.get(&id).copied().unwrap_or(false));
            if let ModelCheck::NoCore(evidence) = q.check_model(&m, b)? {
                let extension = evidence.first().map_or_else(|| (0..m.size()).collect(), |e| e.extension.clone());
                let failure = EbsFailure { model: m, extension, evidence };
                return Ok(EbsVerdict {
                    pass: false,
                    sigma: sigma.clone(),
                    b,
                    n_max,
                    models_checked,
                    failure: Some(failure),
                });
            }
        }
    }
    Ok(EbsVerdict { pass: true, sigma: sigma.clone(), b, n_max, models_checked, failure: None })
}

/// Re-checks a failure by brute force: every core of size ≤ b has an
/// evidence entry whose extension contains it, and no structure on that
/// extension agrees with the model on σ and satisfies s.
pub fn replay_failure(
    vocab: &Vocabulary,
    s: &Formula,
    sigma: &BTreeSet<String>,
    b: usize,
    f: &EbsFailure,
) -> Result<bool> {
    let m = &f.model;
    if !evaluate(m, s, None)? {
        return Ok(false);
    }
    let consts: BTreeSet<usize> = m.constant_values().iter().copied().collect();
    let others: Vec<usize> = (0..m.size()).filter(|e| !consts.contains(e)).collect();
    let limits = Limits::default();
    let mut cores = 0;
    if consts.len() <= b {
        for extra in 0..=(b - consts.len()).min(others.len()) {
            for pick in others.iter().copied().combinations(extra) {
                cores += 1;
                let core: Vec<usize> = consts.iter().copied().chain(pick).sorted().collect();
                let Some(e) = f.evidence.iter().find(|e| e.core == core) else { return Ok(false) };
                if !core.iter().all(|c| e.extension.contains(c)) {
                    return Ok(false);
                }
                let (sub, _) = generated_substructure(m, &e.extension)?;
                for cand in enumerate_structures_with(vocab, sub.size(), &limits, false)? {
                    if cand.constant_values() == sub.constant_values()
                        && crate::structures::restrict_eq(&cand, &sub, sigma)?
                        && evaluate(&cand, s, None)?
                    {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(cores == f.evidence.len())
}

/// Least b ≤ b_max whose equivalent translation agrees with `s` on all
/// structures of size ≤ n_cap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundSearch {
    pub b: usize,
    pub translation: TranslationResult,
    pub n_cap: usize,
}

impl BoundSearch {
    pub fn note(&self) -> String {
        format!("equivalence verified up to size {} only", self.n_cap)
    }
}

pub fn find_bound_bounded(
    vocab: &Vocabulary,
    s: &Formula,
    b_max: usize,
    n_cap: usize,
    limits: &Limits,
) -> Result<Option<BoundSearch>> {
    check_sentence(vocab, s)?;
    let pf = to_pcnf_with(s, limits)?;
    for b in 0..=b_max {
        let t = translate(&pf, b, Mode::Equivalent, limits)?;
        if bounded_equiv(vocab, s, &t.bsr.to_formula(), n_cap, limits)?.equivalent {
            return Ok(Some(BoundSearch { b, translation: t, n_cap }));
        }
    }
    Ok(None)
}

/// Number of structures a bounded search up to size max(b,1) ranges over,
/// saturating at `u128::MAX`.
pub fn search_space(vocab: &Vocabulary, b: usize) -> u128 {
    (1..=b.max(1)).fold(0u128, |acc, n| acc.saturating_add(count_structures(vocab, n).unwrap_or(u128::MAX)))
}

/// Per-size structure counts for reports.
pub fn search_space_report(vocab: &Vocabulary, b: usize) -> Value {
    let per_size: BTreeMap<String, String> = (1..=b.max(1))
        .map(|n| (n.to_string(), count_structures(vocab, n).map_or("overflow".into(), |c| c.to_string())))
        .collect();
    json!({ "B": b, "per_size": per_size, "total": search_space(vocab, b).to_string() })
}
