mod common;

use std::collections::BTreeSet;

use common::load;
use ebs_core::analysis::spectrum;
use ebs_core::edp::{edp_check, EdpVariant};
use ebs_core::formula::to_pcnf;
use ebs_core::translate::to_bsr_equivalent;
use ebs_core::{parse_problem, Formula, Limits};

#[test]
fn translation_without_a_valid_bound_can_admit_non_models() {
    let it = load("misc/alt.fol");
    let psi = to_bsr_equivalent(&it.pf, it.bound().unwrap()).unwrap().bsr.to_formula();
    let bad = Formula::and(psi, Formula::not(it.formula().clone()));
    let s = spectrum(it.vocab(), &bad, 4, &Limits::default()).unwrap();
    assert_eq!(s.sizes(), vec![3, 4]);
}

#[test]
fn relaxed_check_requires_aligned_outer_existentials() {
    let it = load("misc/alt.fol");
    for v in EdpVariant::ALL {
        let c = edp_check(it.vocab(), &it.pf, &BTreeSet::new(), v);
        assert!(!c.ok, "{}", v.tag());
    }
    let c = edp_check(it.vocab(), &it.pf, &BTreeSet::new(), EdpVariant::RelaxedDistinguishability);
    assert!(c.diagnostics.iter().any(|d| d.contains("different positions")));
}

#[test]
fn relaxed_check_accepts_pairs_separated_by_e_u_variables() {
    let p =
        parse_problem("vocab P/2, Q/1, U/1;\nforall z. exists v w. U(v) & U(w) & P(v, w) & (!P(w, v) | Q(z))").unwrap();
    let pf = to_pcnf(&p.formula).unwrap();
    let none = BTreeSet::new();
    assert!(!edp_check(&p.vocabulary, &pf, &none, EdpVariant::Base).ok);
    assert!(edp_check(&p.vocabulary, &pf, &none, EdpVariant::RelaxedDistinguishability).ok);
}
