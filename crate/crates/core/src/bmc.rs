//! Bounded model checking by unrolling a first-order transition system into
//! an existential sentence and deciding it up to the witness bound.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::analysis::{decide_sat_bounded, SatOutcome};
use crate::edp::{check_classified, classify, edp_bound, BoundReport, EdpVariant};
use crate::formula::{free_vars, substitute, to_pcnf_with, Formula, Limits, Term, Vocabulary};
use crate::parser::{parse_formula, Problem, NEXT_SUFFIX};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionSystem {
    pub vocab: Vocabulary,
    /// State variable names; `T` also sees `{x}_next` for each.
    pub state: Vec<String>,
    pub init: Formula,
    pub trans: Formula,
    pub prop: Formula,
}

impl TransitionSystem {
    pub fn new(vocab: Vocabulary, state: Vec<String>, init: Formula, trans: Formula, prop: Formula) -> Result<Self> {
        if state.is_empty() {
            return Err(Error::invalid("a transition system needs at least one state variable"));
        }
        let current: BTreeSet<String> = state.iter().cloned().collect();
        if current.len() != state.len() {
            return Err(Error::invalid("duplicate state variable"));
        }
        let next: BTreeSet<String> = state.iter().map(|v| format!("{v}{NEXT_SUFFIX}")).collect();
        for (what, f, allowed) in [
            ("init", &init, current.clone()),
            ("prop", &prop, current.clone()),
            ("trans", &trans, current.union(&next).cloned().collect()),
        ] {
            f.check(&vocab, &allowed.iter().cloned().collect::<Vec<_>>())?;
            if let Some(v) = free_vars(f).into_iter().find(|v| !allowed.contains(v)) {
                return Err(Error::invalid(format!("{what} mentions undeclared variable {v}")));
            }
        }
        Ok(TransitionSystem { vocab, state, init, trans, prop })
    }

    /// Reads `@statevars`, `@init`, `@trans` and `@prop`; a missing formula
    /// directive means `true`.
    pub fn from_problem(p: &Problem) -> Result<Self> {
        let state = p.state_vars();
        let next: Vec<String> =
            state.iter().cloned().chain(state.iter().map(|v| format!("{v}{NEXT_SUFFIX}"))).collect();
        let get = |key: &str, free: &[String]| -> Result<Formula> {
            match p.directives.get(key) {
                Some(text) => parse_formula(&p.vocabulary, free, text),
                None => Ok(Formula::True),
            }
        };
        let init = get("init", &state)?;
        let trans = get("trans", &next)?;
        let prop = get("prop", &state)?;
        TransitionSystem::new(p.vocabulary.clone(), state, init, trans, prop)
    }

    pub fn arity(&self) -> usize {
        self.state.len()
    }

    /// Step variables `s{i}_1..s{i}_d`.
    pub fn step_vars(&self, i: usize) -> Vec<String> {
        (1..=self.arity()).map(|j| format!("s{i}_{j}")).collect()
    }

    fn at(&self, f: &Formula, i: usize) -> Formula {
        let m: BTreeMap<String, Term> =
            self.state.iter().cloned().zip(self.step_vars(i).into_iter().map(Term::Var)).collect();
        substitute(f, &m)
    }

    fn step(&self, i: usize) -> Formula {
        let mut m: BTreeMap<String, Term> =
            self.state.iter().cloned().zip(self.step_vars(i).into_iter().map(Term::Var)).collect();
        m.extend(
            self.state
                .iter()
                .map(|v| format!("{v}{NEXT_SUFFIX}"))
                .zip(self.step_vars(i + 1).into_iter().map(Term::Var)),
        );
        substitute(&self.trans, &m)
    }

    fn close(&self, k: usize, body: Formula) -> Formula {
        let vars: Vec<String> = (0..=k).flat_map(|i| self.step_vars(i)).collect();
        Formula::exists_all(&vars, body)
    }
}

/// `I(s0) ∧ T(s0,s1) ∧ … ∧ T(s{k-1},s{k}) ∧ P(s{k})` under existentials.
pub fn unroll_bmc(ts: &TransitionSystem, k: usize) -> Formula {
    let body = Formula::conj(
        std::iter::once(ts.at(&ts.init, 0))
            .chain((0..k).map(|i| ts.step(i)))
            .chain(std::iter::once(ts.at(&ts.prop, k))),
    );
    ts.close(k, body)
}

/// `P(s0) ∧ T(s0,s1) ∧ … ∧ P(s{k-1}) ∧ T(s{k-1},s{k}) ∧ ¬P(s{k})`.
pub fn unroll_ind(ts: &TransitionSystem, k: usize) -> Result<Formula> {
    if k == 0 {
        return Err(Error::invalid("the inductive step needs k ≥ 1"));
    }
    let body = Formula::conj(
        (0..k).flat_map(|i| [ts.at(&ts.prop, i), ts.step(i)]).chain(std::iter::once(Formula::not(ts.at(&ts.prop, k)))),
    );
    Ok(ts.close(k, body))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BmcReport {
    pub k: usize,
    pub sentence: Formula,
    pub bound: BoundReport,
    pub outcome: SatOutcome,
}

impl BmcReport {
    pub fn to_json(&self) -> Value {
        json!({
            "k": self.k,
            "B": self.bound.b,
            "bound": self.bound.to_json(),
            "result": self.outcome.to_json(),
        })
    }
}

/// First variant (in declaration order) under which the sentence has the
/// property for σ = ∅ and a bound is known.
pub fn sentence_bound(vocab: &Vocabulary, s: &Formula, limits: &Limits) -> Result<BoundReport> {
    let pf = to_pcnf_with(s, limits)?;
    let c = classify(vocab, &pf);
    let mut diagnostics = Vec::new();
    for v in EdpVariant::ALL {
        if v == EdpVariant::RelaxedEqEuEu {
            continue;
        }
        let check = check_classified(&c, &BTreeSet::new(), v);
        if check.ok {
            return edp_bound(&c, v);
        }
        if v == EdpVariant::Base {
            diagnostics = check.diagnostics;
        }
    }
    Err(Error::NotEdp { variant: EdpVariant::Base.tag().into(), diagnostics: diagnostics.join("; ") })
}

fn solve(vocab: &Vocabulary, k: usize, sentence: Formula, limits: &Limits) -> Result<BmcReport> {
    let bound = sentence_bound(vocab, &sentence, limits)?;
    let outcome = decide_sat_bounded(vocab, &sentence, bound.b, limits)?;
    Ok(BmcReport { k, sentence, bound, outcome })
}

pub fn bmc_solve(ts: &TransitionSystem, k: usize, limits: &Limits) -> Result<BmcReport> {
    solve(&ts.vocab, k, unroll_bmc(ts, k), limits)
}

pub fn ind_solve(ts: &TransitionSystem, k: usize, limits: &Limits) -> Result<BmcReport> {
    solve(&ts.vocab, k, unroll_ind(ts, k)?, limits)
}

/// Bounds of the unrolled sentences for each k in `ks`.
pub fn bound_series(ts: &TransitionSystem, ks: impl IntoIterator<Item = usize>, limits: &Limits) -> Result<Vec<usize>> {
    ks.into_iter().map(|k| Ok(sentence_bound(&ts.vocab, &unroll_bmc(ts, k), limits)?.b)).collect()
}

/// Consecutive differences are all equal.
pub fn is_affine(values: &[usize]) -> bool {
    values.windows(3).all(|w| w[1] as i128 - w[0] as i128 == w[2] as i128 - w[1] as i128)
}
