//! Translations into ∃*∀* form: the bounded-witness construction (equivalent
//! for sentences whose bound is at most `b`), its equispectral counterpart,
//! and sentences realizing a given finite or cofinite spectrum.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use itertools::Itertools;
use serde_json::{json, Value};

use crate::formula::{or_clauses, Atom, Clause, Formula, Limits, Literal, PrenexForm, Quantifier, Term, Vocabulary};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Witness pools hold the fresh variables and the preceding universals.
    Equivalent,
    /// Witness pools hold the fresh variables only.
    Equispectral,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Equivalent => "equivalent",
            Mode::Equispectral => "equispectral",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranslationResult {
    pub bsr: PrenexForm,
    /// Variables of the leading ∃ block that stand for the `b` witnesses.
    pub fresh: Vec<String>,
    pub mode: Mode,
    /// Number of substituted copies of the matrix.
    pub disjuncts: u128,
    pub pool_sizes: Vec<usize>,
    /// Every pool contained every universal, so restricting pools to the
    /// universals that precede each existential changed nothing.
    pub unrestricted: bool,
}

impl TranslationResult {
    pub fn clauses(&self) -> usize {
        self.bsr.matrix.len()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "mode": self.mode.to_string(),
            "fresh": self.fresh,
            "disjuncts": self.disjuncts.to_string(),
            "pool_sizes": self.pool_sizes,
            "clauses": self.clauses(),
            "unrestricted": self.unrestricted,
        })
    }
}

pub fn to_bsr_equivalent(pf: &PrenexForm, b: usize) -> Result<TranslationResult> {
    translate(pf, b, Mode::Equivalent, &Limits::default())
}

pub fn to_bsr_equispectral(pf: &PrenexForm, b: usize) -> Result<TranslationResult> {
    translate(pf, b, Mode::Equispectral, &Limits::default())
}

/// ∃x₁…∃x_b ∀z̄ ⋁ matrix[v₁↦u₁,…,v_r↦u_r], one disjunct per choice of the
/// u_i from their pools. The leading ∃ block of the input supplies the
/// first pool variables when `b` is large enough to cover it.
pub fn translate(pf: &PrenexForm, b: usize, mode: Mode, limits: &Limits) -> Result<TranslationResult> {
    if !pf.is_sentence() {
        return Err(Error::invalid("translation needs a sentence"));
    }
    let lead: Vec<String> = pf.leftmost();
    let mut taken: HashSet<String> = pf.prefix.iter().map(|(_, v)| v.clone()).collect();
    pf.matrix.iter().flatten().for_each(|l| {
        for t in l.atom.args() {
            taken.insert(t.name().to_string());
        }
    });
    let mut fresh_name = |j: usize| {
        let base = format!("x{j}");
        let mut name = base.clone();
        let mut i = 0;
        while taken.contains(&name) {
            i += 1;
            name = format!("{base}_{i}");
        }
        taken.insert(name.clone());
        name
    };
    let (mut prefix_vars, fresh): (Vec<String>, Vec<String>) = if b >= lead.len() {
        let mut pool = lead.clone();
        pool.extend((lead.len() + 1..=b).map(&mut fresh_name));
        (Vec::new(), pool)
    } else {
        (lead.clone(), (1..=b).map(&mut fresh_name).collect())
    };
    prefix_vars.extend(fresh.iter().cloned());

    let mut pools: Vec<(String, Vec<String>)> = Vec::new();
    let mut universals: Vec<String> = Vec::new();
    let mut unrestricted = true;
    let all_universals = pf.universals();
    for (q, v) in &pf.prefix[lead.len()..] {
        match q {
            Quantifier::Forall => universals.push(v.clone()),
            Quantifier::Exists => {
                let mut pool = fresh.clone();
                if mode == Mode::Equivalent {
                    pool.extend(universals.iter().cloned());
                    if universals.len() < all_universals.len() {
                        unrestricted = false;
                    }
                }
                pools.push((v.clone(), pool));
            }
        }
    }
    let pool_sizes: Vec<usize> = pools.iter().map(|(_, p)| p.len()).collect();
    let disjuncts = pool_sizes.iter().try_fold(1u128, |acc, &s| acc.checked_mul(s as u128));
    match disjuncts {
        Some(d) if d <= limits.disjuncts as u128 => {}
        _ => return Err(Error::cap("disjunct", limits.disjuncts, disjuncts)),
    }
    let disjuncts = disjuncts.unwrap();

    let mut matrix: Vec<Clause> = vec![vec![]];
    for choice in pools.iter().map(|(_, p)| p.iter()).multi_cartesian_product() {
        let map: BTreeMap<&str, &str> = pools.iter().zip(&choice).map(|((v, _), u)| (v.as_str(), u.as_str())).collect();
        let copy = simplify(pf.matrix.iter().map(|c| substitute_clause(c, &map)).collect());
        matrix = simplify(or_clauses(&matrix, &copy, limits.pcnf_clauses)?);
    }
    if pools.is_empty() {
        matrix = simplify(pf.matrix.clone());
    }
    if matrix.iter().any(|c| c.is_empty()) {
        matrix = vec![vec![]];
    }
    let mut prefix: Vec<(Quantifier, String)> = prefix_vars.into_iter().map(|v| (Quantifier::Exists, v)).collect();
    prefix.extend(universals.into_iter().map(|v| (Quantifier::Forall, v)));
    let bsr = PrenexForm { prefix, matrix, free_vars: Vec::new() };
    Ok(TranslationResult { bsr, fresh, mode, disjuncts, pool_sizes, unrestricted })
}

fn substitute_clause(c: &Clause, map: &BTreeMap<&str, &str>) -> Clause {
    let sub = |t: &Term| match t {
        Term::Var(v) => Term::Var(map.get(v.as_str()).map_or_else(|| v.clone(), |u| u.to_string())),
        t => t.clone(),
    };
    c.iter()
        .map(|l| {
            let atom = match &l.atom {
                Atom::Pred { name, args } => Atom::Pred { name: name.clone(), args: args.iter().map(sub).collect() },
                Atom::Eq(s, t) => Atom::Eq(sub(s), sub(t)),
            };
            Literal { positive: l.positive, atom }
        })
        .collect()
}

/// Drops `t ≠ t` literals, duplicate literals and tautological clauses.
fn simplify(clauses: Vec<Clause>) -> Vec<Clause> {
    let mut out = Vec::with_capacity(clauses.len());
    'clause: for c in clauses {
        let mut kept: Clause = Vec::with_capacity(c.len());
        for l in c {
            if let Atom::Eq(s, t) = &l.atom {
                if s == t {
                    if l.positive {
                        continue 'clause;
                    }
                    continue;
                }
            }
            if kept.contains(&l.negated()) {
                continue 'clause;
            }
            if !kept.contains(&l) {
                kept.push(l);
            }
        }
        out.push(kept);
    }
    out
}

/// A set of universe sizes: a finite part plus optionally every size from
/// `cofinite_from` on.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpectrumSpec {
    pub finite: BTreeSet<usize>,
    pub cofinite_from: Option<usize>,
}

impl SpectrumSpec {
    pub fn finite(sizes: impl IntoIterator<Item = usize>) -> Self {
        SpectrumSpec { finite: sizes.into_iter().collect(), cofinite_from: None }
    }

    pub fn cofinite(sizes: impl IntoIterator<Item = usize>, from: usize) -> Self {
        SpectrumSpec { finite: sizes.into_iter().collect(), cofinite_from: Some(from) }
    }

    pub fn contains(&self, n: usize) -> bool {
        self.finite.contains(&n) || self.cofinite_from.is_some_and(|b| n >= b)
    }
}

/// An ∃*∀* sentence whose spectrum is `spec`. Each finite size k becomes
/// "exactly k elements", the threshold becomes "at least b distinct
/// elements", and over a nonempty vocabulary every predicate is made
/// universally true.
pub fn spectrum_to_bsr(spec: &SpectrumSpec, vocab: &Vocabulary) -> Result<Formula> {
    if spec.finite.is_empty() && spec.cofinite_from.is_none() {
        return Err(Error::invalid("empty spectrum"));
    }
    if spec.finite.contains(&0) {
        return Err(Error::invalid("universes are nonempty; size 0 cannot occur"));
    }
    let parts = spec.finite.len() + spec.cofinite_from.is_some() as usize;
    let mut exists: Vec<String> = Vec::new();
    let mut forall: Vec<String> = Vec::new();
    let mut disjuncts: Vec<Formula> = Vec::new();
    let fresh = |exists: &mut Vec<String>, k: usize| -> Vec<String> {
        let start = exists.len();
        exists.extend((start + 1..=start + k).map(|i| format!("x{i}")));
        exists[start..].to_vec()
    };
    let distinct =
        |xs: &[String]| Formula::conj(xs.iter().tuple_combinations().map(|(a, b)| Formula::not(Formula::var_eq(a, b))));
    for (j, &k) in spec.finite.iter().enumerate() {
        let xs = fresh(&mut exists, k);
        let y = if parts == 1 { "y".to_string() } else { format!("y{}", j + 1) };
        let cover = Formula::disj(xs.iter().map(|x| Formula::var_eq(&y, x)));
        forall.push(y);
        disjuncts.push(Formula::and(distinct(&xs), cover));
    }
    if let Some(b) = spec.cofinite_from {
        let xs = fresh(&mut exists, b);
        disjuncts.push(distinct(&xs));
    }
    let mut body = Formula::disj(disjuncts);
    for (name, arity) in vocab.predicates() {
        let zs: Vec<String> = (1..=*arity).map(|i| format!("z_{name}{i}")).collect();
        body = Formula::and(body, Formula::app(name, zs.iter().map(|z| Term::var(z)).collect()));
        forall.extend(zs);
    }
    Ok(Formula::exists_all(&exists, Formula::forall_all(&forall, body)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::to_pcnf;
    use crate::parser::parse_problem;

    fn pcnf(text: &str) -> PrenexForm {
        to_pcnf(&parse_problem(text).unwrap().formula).unwrap()
    }

    #[test]
    fn serial_equivalent_b2() {
        let t = to_bsr_equivalent(&pcnf("vocab P/2; forall x. exists y. P(x,y)"), 2).unwrap();
        assert_eq!(t.bsr.to_formula().to_string(), "exists x1. exists x2. forall x. P(x, x1) | P(x, x2) | P(x, x)");
        assert_eq!(t.disjuncts, 3);
        assert!(t.bsr.is_bsr());
    }

    #[test]
    fn serial_equispectral_b2() {
        let t = to_bsr_equispectral(&pcnf("vocab P/2; forall x. exists y. P(x,y)"), 2).unwrap();
        assert_eq!(t.bsr.to_formula().to_string(), "exists x1. exists x2. forall x. P(x, x1) | P(x, x2)");
        assert_eq!(t.disjuncts, 2);
    }

    #[test]
    fn universal_sentence_is_unchanged() {
        let pf = pcnf("vocab P/2; forall x. P(x,x)");
        let t = to_bsr_equivalent(&pf, 0).unwrap();
        assert_eq!(t.bsr, pf);
        assert_eq!(t.disjuncts, 1);
    }

    #[test]
    fn tautology_with_b0() {
        let t = to_bsr_equivalent(&pcnf("vocab Q/1; forall x. exists y. Q(y) | !Q(x)"), 0).unwrap();
        assert_eq!(t.bsr.prefix, vec![(Quantifier::Forall, "x".to_string())]);
        assert!(t.bsr.matrix.is_empty());
    }

    #[test]
    fn empty_pool_gives_false() {
        let t = to_bsr_equispectral(&pcnf("vocab P/2; forall x. exists y. P(x,y)"), 0).unwrap();
        assert_eq!(t.bsr.matrix, vec![vec![]]);
        assert_eq!(t.disjuncts, 0);
    }

    #[test]
    fn leading_block_is_reused() {
        let t = to_bsr_equispectral(
            &pcnf("vocab P/2, Q/1; exists x. forall z. exists v. (P(v,z) | Q(z)) & (P(x,v) | !Q(v))"),
            3,
        )
        .unwrap();
        assert_eq!(t.fresh, vec!["x", "x2", "x3"]);
        assert_eq!(t.disjuncts, 3);
        assert_eq!(t.bsr.leftmost_len(), 3);
    }

    #[test]
    fn alternation_restricts_pools() {
        let t = to_bsr_equivalent(&pcnf("vocab P/2; forall a. exists v. forall b. !P(v,b)"), 1).unwrap();
        assert_eq!(t.pool_sizes, vec![2]);
        assert!(!t.unrestricted);
    }

    #[test]
    fn spectrum_sentences() {
        let v = Vocabulary::default();
        let f = spectrum_to_bsr(&SpectrumSpec::finite([2]), &v).unwrap();
        assert_eq!(f.to_string(), "exists x1. exists x2. forall y. x1 != x2 & (y = x1 | y = x2)");
        let f = spectrum_to_bsr(&SpectrumSpec::cofinite([], 3), &v).unwrap();
        assert_eq!(f.to_string(), "exists x1. exists x2. exists x3. x1 != x2 & x1 != x3 & x2 != x3");
        assert!(spectrum_to_bsr(&SpectrumSpec::default(), &v).is_err());
        assert_eq!(spectrum_to_bsr(&SpectrumSpec::cofinite([], 0), &v).unwrap(), Formula::True);
        let with_p = spectrum_to_bsr(&SpectrumSpec::finite([1]), &Vocabulary::of(&[("P", 2)], &[])).unwrap();
        assert!(to_pcnf(&with_p).unwrap().is_bsr());
    }
}
