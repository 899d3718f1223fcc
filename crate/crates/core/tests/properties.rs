use std::collections::BTreeSet;

use proptest::prelude::*;

use ebs_core::analysis::decide_sat_bounded;
use ebs_core::edp::{edp_check, EdpVariant};
use ebs_core::formula::{free_vars, to_nnf, to_pcnf};
use ebs_core::ground::{dpll_solve, ground_formula, solve_with, tseitin, GroundCnf, SolverOptions};
use ebs_core::structures::enumerate_structures;
use ebs_core::{evaluate, parse_problem, render, FiniteStructure, Formula, Limits, Problem, Term, Vocabulary};

const VARS: [&str; 3] = ["x", "y", "z"];

fn vocab() -> Vocabulary {
    Vocabulary::of(&[("P", 2), ("Q", 1), ("R", 1)], &[])
}

fn var() -> impl Strategy<Value = &'static str> {
    prop::sample::select(&VARS[..])
}

fn atom() -> impl Strategy<Value = Formula> {
    prop_oneof![
        (var(), var()).prop_map(|(a, b)| Formula::pred("P", &[a, b])),
        var().prop_map(|a| Formula::pred("Q", &[a])),
        var().prop_map(|a| Formula::pred("R", &[a])),
        (var(), var()).prop_map(|(a, b)| Formula::eq(Term::var(a), Term::var(b))),
    ]
}

fn formula() -> impl Strategy<Value = Formula> {
    atom().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::iff(a, b)),
            (var(), inner.clone()).prop_map(|(v, f)| Formula::forall(v, f)),
            (var(), inner).prop_map(|(v, f)| Formula::exists(v, f)),
        ]
    })
}

/// Closes free variables, universally or existentially by `mask`.
fn sentence() -> impl Strategy<Value = Formula> {
    (formula(), any::<u8>()).prop_map(|(f, mask)| {
        free_vars(&f).into_iter().enumerate().fold(f, |g, (i, v)| {
            if mask >> i & 1 == 1 {
                Formula::forall(&v, g)
            } else {
                Formula::exists(&v, g)
            }
        })
    })
}

fn structures(n: usize) -> Vec<FiniteStructure> {
    enumerate_structures(&vocab(), n).unwrap().collect()
}

fn cnf() -> impl Strategy<Value = GroundCnf> {
    let lit = (1i32..=8, any::<bool>()).prop_map(|(v, s)| if s { v } else { -v });
    prop::collection::vec(prop::collection::vec(lit, 1..4), 0..30)
        .prop_map(|clauses| GroundCnf { num_vars: 8, clauses })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn render_then_parse_is_identity(f in sentence()) {
        let text = render(&Problem::new(vocab(), f.clone()));
        let back = parse_problem(&text).unwrap();
        prop_assert_eq!(back.formula, f);
    }

    #[test]
    fn normal_forms_preserve_truth(f in sentence()) {
        let pcnf = to_pcnf(&f).unwrap();
        prop_assert!(pcnf.is_sentence());
        let g = pcnf.to_formula();
        let nnf = to_nnf(&f);
        for n in 1..=2 {
            for m in structures(n) {
                let want = evaluate(&m, &f, None).unwrap();
                prop_assert_eq!(evaluate(&m, &nnf, None).unwrap(), want);
                prop_assert_eq!(evaluate(&m, &g, None).unwrap(), want);
            }
        }
    }

    #[test]
    fn pcnf_is_idempotent(f in sentence()) {
        let once = to_pcnf(&f).unwrap();
        let twice = to_pcnf(&once.to_formula()).unwrap();
        prop_assert_eq!(twice.to_formula(), once.to_formula());
    }

    #[test]
    fn grounding_agrees_with_enumeration(f in sentence()) {
        let limits = Limits::default();
        for n in 1..=2 {
            let g = ground_formula(&vocab(), &f, n, None, &limits).unwrap();
            let sat = dpll_solve(&tseitin(&g.formula, g.table.len() as u32)).is_sat();
            let brute = structures(n).iter().any(|m| evaluate(m, &f, None).unwrap());
            prop_assert_eq!(sat, brute, "size {}", n);
        }
    }

    #[test]
    fn bounded_search_finds_small_models(f in sentence()) {
        let brute = (1..=2).any(|n| structures(n).iter().any(|m| evaluate(m, &f, None).unwrap()));
        let found = decide_sat_bounded(&vocab(), &f, 2, &Limits::default()).unwrap().verdict.model().is_some();
        prop_assert_eq!(found, brute);
    }

    #[test]
    fn learning_does_not_change_verdicts(c in cnf()) {
        let plain = dpll_solve(&c);
        let learnt = solve_with(&c, SolverOptions::LEARNING);
        prop_assert_eq!(plain.is_sat(), learnt.is_sat());
        let brute = (0u32..1 << 8).any(|bits| c.satisfied_by(|v| bits >> (v - 1) & 1 == 1));
        prop_assert_eq!(plain.is_sat(), brute);
    }

    #[test]
    fn shrinking_sigma_keeps_the_property(f in sentence(), keep in prop::collection::vec(any::<bool>(), 3)) {
        let pf = to_pcnf(&f).unwrap();
        let all: BTreeSet<String> = ["P", "Q", "R"].iter().map(|s| s.to_string()).collect();
        let some: BTreeSet<String> = all.iter().zip(&keep).filter(|(_, &k)| k).map(|(p, _)| p.clone()).collect();
        for v in EdpVariant::ALL {
            if edp_check(&vocab(), &pf, &all, v).ok {
                prop_assert!(edp_check(&vocab(), &pf, &some, v).ok, "{}", v.tag());
            }
        }
    }
}
