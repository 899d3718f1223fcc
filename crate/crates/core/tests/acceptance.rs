//! One line per acceptance criterion. Runs without the test harness so the
//! lines are always printed. The process fails if any criterion fails, except
//! when the failure only reports that a check could not be completed at this
//! scale (see `INCOMPLETE`).

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use ebs_core::analysis::{
    bounded_equiv, decide_sat_bounded, ebs_oracle, interval_property, replay_failure, spectrum, ModelCheck,
    RepairQueries,
};
use ebs_core::bmc::{bmc_solve, bound_series, is_affine, sentence_bound, TransitionSystem};
use ebs_core::edp::{
    check_classified, classify, edp_bound, edp_check, edp_core, edp_extend, edp_simple_sigma, Classification,
    EdpVariant, Role,
};
use ebs_core::formula::to_pcnf;
use ebs_core::ground::{
    all_models, bsr_ground, dpll_solve, ground_formula, solve_with, tseitin, GroundCnf, SolverOptions,
};
use ebs_core::structures::restrict_eq;
use ebs_core::translate::{spectrum_to_bsr, to_bsr_equispectral, to_bsr_equivalent, SpectrumSpec};
use ebs_core::{evaluate, parse_problem, Error, FiniteStructure, Formula, Limits, SubsetWitness, Vocabulary};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn edp_items() -> Vec<Item> {
    let mut items = load_dir("edp");
    items.extend(["examples/example_a.fol", "examples/example_b.fol", "examples/example_c.fol"].map(load));
    items
}

fn all_items() -> Vec<Item> {
    let mut items = Vec::new();
    for dir in ["examples", "bsr", "edp", "misc"] {
        items.extend(load_dir(dir));
    }
    items
}

fn criterion_1() -> Outcome {
    let a = load("examples/example_a.fol");
    let c = classify(a.vocab(), &a.pf);
    let roles: Vec<(String, Role)> = ["P", "Q", "R"].iter().map(|p| (p.to_string(), c.predicates[*p])).collect();
    ensure(
        roles == vec![("P".into(), Role::Free), ("Q".into(), Role::Universal), ("R".into(), Role::Existential)],
        || format!("example A roles {roles:?}"),
    )?;
    let r: Vec<usize> = (0..c.instances.len()).filter(|&i| c.instances[i].predicate == "R").collect();
    ensure(r.len() == 2 && c.distinguishable(r[0], r[1], "w"), || "R instances not distinguishable by w".into())?;

    let b = load("examples/example_b.fol");
    for sigma in ["", "P", "R", "P,R"] {
        let s: BTreeSet<String> = sigma.split(',').filter(|x| !x.is_empty()).map(String::from).collect();
        let ok = edp_check(b.vocab(), &b.pf, &s, EdpVariant::Base).ok;
        ensure(ok == !s.contains("P"), || format!("example B with σ={s:?} gave {ok}"))?;
    }
    let cc = load("examples/example_c.fol");
    ensure(edp_check(cc.vocab(), &cc.pf, &set(&["Q"]), EdpVariant::Base).ok, || "example C, σ={Q}".into())?;
    ensure(!edp_check(cc.vocab(), &cc.pf, &set(&["P", "Q"]), EdpVariant::Base).ok, || "example C, σ=Σ".into())?;
    Ok("example A roles; B iff P∉σ over 4 σ; C for {Q} and not Σ".into())
}

fn expected_bound(c: &Classification, v: EdpVariant) -> Option<usize> {
    let two_k = 1usize << c.k;
    let (vv, ebar, eu, m, q) = (c.v.len(), c.eu_bar.len(), c.eu.len(), c.m, c.q);
    Some(match v {
        EdpVariant::Base | EdpVariant::EqFreeEu => vv + ebar + two_k + m,
        EdpVariant::RelaxedDistinguishability | EdpVariant::EqEuEu => vv + ebar + eu * two_k + m,
        EdpVariant::RelaxedEqEuEu => return None,
        EdpVariant::Lowenheim => q * two_k + m,
        EdpVariant::LowenheimEq => vv + two_k + m,
        EdpVariant::LowenheimEqEu => vv + eu * two_k + m,
    })
}

fn criterion_2() -> Outcome {
    for (file, b) in [("examples/example_c.fol", 3), ("examples/example_b.fol", 4), ("examples/serial.fol", 2)] {
        let it = load(file);
        let got = edp_bound(&classify(it.vocab(), &it.pf), EdpVariant::Base).map_err(|e| e.to_string())?.b;
        ensure(got == b, || format!("{file}: B={got}, want {b}"))?;
    }
    let items = all_items();
    let mut counts = Vec::new();
    for v in EdpVariant::ALL {
        if v == EdpVariant::RelaxedEqEuEu {
            continue;
        }
        let mut n = 0;
        for it in &items {
            let c = classify(it.vocab(), &it.pf);
            if !check_classified(&c, &BTreeSet::new(), v).ok {
                continue;
            }
            let got = edp_bound(&c, v).map_err(|e| format!("{}: {e}", it.name))?.b;
            let want = expected_bound(&c, v).unwrap();
            ensure(got == want, || format!("{} under {}: {got} ≠ {want}", it.name, v.tag()))?;
            n += 1;
        }
        ensure(n >= 5, || format!("only {n} corpus formulas pass {}", v.tag()))?;
        counts.push(format!("{}:{n}", v.tag()));
    }
    Ok(format!("C=3 B=4 serial=2; variant formulas on {}", counts.join(" ")))
}

fn criterion_3() -> Outcome {
    let limits = Limits::default();
    let mut checked = 0;
    let mut brute = 0;
    let mut skipped = Vec::new();
    let mut uncertified = Vec::new();
    for it in all_items() {
        if !it.formula().is_sentence() {
            continue;
        }
        let b = match sentence_bound(it.vocab(), it.formula(), &limits) {
            Ok(r) => r.b,
            Err(_) if it.pf.is_bsr() => it.pf.leftmost_len(),
            Err(_) => {
                uncertified.push(it.name.clone());
                continue;
            }
        };
        let psi = match to_bsr_equivalent(&it.pf, b) {
            Ok(t) => t.bsr.to_formula(),
            Err(Error::CapExceeded { .. }) => {
                skipped.push(it.name.clone());
                continue;
            }
            Err(e) => return Err(format!("{}: {e}", it.name)),
        };
        let bad = Formula::and(psi.clone(), Formula::not(it.formula().clone()));
        let s = spectrum(it.vocab(), &bad, 4, &limits).map_err(|e| format!("{}: {e}", it.name))?;
        ensure(s.sizes().is_empty(), || format!("{}: ψ has a non-model of φ at sizes {:?}", it.name, s.sizes()))?;
        for n in 1..=4 {
            if enumerable(it.vocab(), n, 1 << 12) {
                for m in brute_models(it.vocab(), &psi, n) {
                    ensure(evaluate(&m, it.formula(), None).unwrap(), || {
                        format!("{}: brute-force violation", it.name)
                    })?;
                }
                brute += 1;
            }
        }
        checked += 1;
    }
    ensure(checked >= 20, || format!("only {checked} sentences"))?;
    let mut bsr = 0;
    for it in all_items().into_iter().filter(|it| it.pf.is_bsr() && it.formula().is_sentence()) {
        let psi = to_bsr_equivalent(&it.pf, it.pf.leftmost_len()).unwrap().bsr.to_formula();
        let r = bounded_equiv(it.vocab(), it.formula(), &psi, 4, &limits).map_err(|e| e.to_string())?;
        ensure(r.equivalent, || format!("{}: BSR translation differs", it.name))?;
        bsr += 1;
    }
    Ok(format!(
        "{checked} sentences, 0 violations ({brute} sizes also enumerated, translation over cap: {skipped:?}, no certified bound: {uncertified:?}); {bsr} BSR items equivalent to size 4"
    ))
}

fn criterion_4() -> Outcome {
    let limits = Limits::default();
    let mut n = 0;
    for it in load_dir("edp") {
        let b = it.bound().ok_or_else(|| format!("{} has no bound", it.name))?;
        let psi = to_bsr_equispectral(&it.pf, b).map_err(|e| e.to_string())?.bsr.to_formula();
        let s1 = spectrum(it.vocab(), it.formula(), 5, &limits).map_err(|e| e.to_string())?.sizes();
        let s2 = spectrum(it.vocab(), &psi, 5, &limits).map_err(|e| e.to_string())?.sizes();
        ensure(s1 == s2, || format!("{}: {s1:?} vs {s2:?}", it.name))?;
        n += 1;
    }
    ensure(n >= 10, || format!("only {n} sentences"))?;
    Ok(format!("{n} sentences, spectra equal to size 5"))
}

/// Marks a failure that only says a check could not be completed.
const INCOMPLETE: &str = "not exhaustive:";

const MODEL_CAP: usize = 2000;
const RANDOM_TRIES: usize = 4000;

fn random_structure(vocab: &Vocabulary, n: usize, rng: &mut ChaCha8Rng) -> FiniteStructure {
    let mut m = FiniteStructure::new(vocab.clone(), n).unwrap();
    for (p, arity) in vocab.predicates() {
        for args in (0..*arity).map(|_| 0..n).multi_cartesian_product() {
            m.set(p, &args, rng.gen_bool(0.5));
        }
    }
    for c in vocab.constants() {
        m.set_constant(c, rng.gen_range(0..n));
    }
    m
}

/// Models of size n: all of them when there are at most MODEL_CAP, else the
/// first MODEL_CAP in solver order plus seeded random ones.
fn models_of(vocab: &Vocabulary, f: &Formula, n: usize, rng: &mut ChaCha8Rng) -> (Vec<FiniteStructure>, bool) {
    let g = ground_formula(vocab, f, n, None, &Limits::default()).unwrap();
    let cnf = tseitin(&g.formula, g.table.len() as u32);
    let proj = g.structure_atoms();
    let mut out = Vec::new();
    let mut iter = all_models(&cnf, &proj);
    for vals in iter.by_ref() {
        let lookup: BTreeMap<u32, bool> = proj.iter().copied().zip(vals).collect();
        out.push(g.decode(|id| lookup.get(&id).copied().unwrap_or(false)));
        if out.len() > MODEL_CAP {
            break;
        }
    }
    if out.len() <= MODEL_CAP {
        return (out, true);
    }
    for _ in 0..RANDOM_TRIES {
        let m = random_structure(vocab, n, rng);
        if evaluate(&m, f, None).unwrap() {
            out.push(m);
        }
    }
    (out, false)
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut models, mut extensions, mut sampled, mut pairs) = (0usize, 0usize, 0usize, 0usize);
    for it in edp_items() {
        let mut sigmas = vec![BTreeSet::new()];
        sigmas.extend(it.problem.sigma());
        sigmas.extend(edp_simple_sigma(it.vocab(), &it.pf));
        sigmas.dedup();
        for n in 1..=5 {
            let (ms, exhaustive) = models_of(it.vocab(), it.formula(), n, &mut rng);
            pairs += 1;
            if !exhaustive {
                sampled += 1;
            }
            for m in &ms {
                for sigma in &sigmas {
                    let core = edp_core(&it.pf, sigma, m, None).map_err(|e| format!("{}: {e}", it.name))?;
                    let rest: Vec<usize> = (0..n).filter(|e| !core.subset.contains(*e)).collect();
                    for mask in 0u32..1 << rest.len() {
                        let mid: Vec<usize> = core
                            .subset
                            .elements
                            .iter()
                            .copied()
                            .chain(rest.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e))
                            .collect();
                        let mid = SubsetWitness::new(m, mid).unwrap();
                        let out = edp_extend(&it.pf, sigma, m, &core, &mid)
                            .map_err(|e| format!("{} n={n} σ={sigma:?}: {e}", it.name))?;
                        let (restricted, _) = ebs_core::structures::generated_substructure(m, &mid.elements).unwrap();
                        ensure(evaluate(&out, it.formula(), None).unwrap(), || {
                            format!("{}: extension is not a model", it.name)
                        })?;
                        ensure(restrict_eq(&out, &restricted, sigma).unwrap(), || format!("{}: σ changed", it.name))?;
                        extensions += 1;
                    }
                }
                models += 1;
            }
        }
    }
    let summary = format!("{models} models, {extensions} extensions, 0 repair failures");
    if sampled > 0 {
        return Err(format!(
            "{INCOMPLETE} {sampled} of {pairs} sentence/size pairs have more than {MODEL_CAP} models and were only sampled; {summary}"
        ));
    }
    Ok(summary)
}

fn is_single_cycle(m: &FiniteStructure) -> bool {
    let n = m.size();
    let succ: Vec<Vec<usize>> = (0..n).map(|a| (0..n).filter(|&b| m.holds("P", &[a, b])).collect()).collect();
    if n < 3 || succ.iter().any(|s| s.len() != 1) {
        return false;
    }
    let mut seen = vec![false; n];
    let mut a = 0;
    for _ in 0..n {
        if seen[a] {
            return false;
        }
        seen[a] = true;
        a = succ[a][0];
    }
    a == 0
}

fn cycle(n: usize) -> FiniteStructure {
    let mut m = FiniteStructure::new(Vocabulary::of(&[("P", 2)], &[]), n).unwrap();
    for i in 0..n {
        m.set("P", &[i, (i + 1) % n], true);
    }
    m
}

fn criterion_6() -> Outcome {
    let it = load("examples/serial.fol");
    let l = Limits::default();
    let all = set(&["P"]);
    let pass = ebs_oracle(it.vocab(), it.formula(), &BTreeSet::new(), 1, 4, &l).map_err(|e| e.to_string())?;
    ensure(pass.pass, || "σ=∅, B=1 failed".into())?;
    let fail = ebs_oracle(it.vocab(), it.formula(), &all, 2, 4, &l).map_err(|e| e.to_string())?;
    let f = fail.failure.as_ref().ok_or("σ=Σ, B=2 passed")?;
    ensure(is_single_cycle(&f.model), || format!("witness is not a cycle: {}", f.model.to_json_string()))?;
    ensure(replay_failure(it.vocab(), it.formula(), &all, 2, f).unwrap(), || "witness does not replay".into())?;
    let mut q = RepairQueries::new(it.vocab(), it.formula(), &all, &l).unwrap();
    for n in [3, 4] {
        ensure(matches!(q.check_model(&cycle(n), 2).unwrap(), ModelCheck::NoCore(_)), || {
            format!("{n}-cycle has a core")
        })?;
    }
    Ok(format!(
        "pass after {} models; fail on a {}-cycle, replayed; 3- and 4-cycles rejected",
        pass.models_checked,
        f.model.size()
    ))
}

fn criterion_7() -> Outcome {
    let v = Vocabulary::default();
    let l = Limits::default();
    for (spec, want) in [(SpectrumSpec::finite([2]), vec![2]), (SpectrumSpec::cofinite([], 3), vec![3, 4, 5])] {
        let f = spectrum_to_bsr(&spec, &v).map_err(|e| e.to_string())?;
        let got = spectrum(&v, &f, 5, &l).map_err(|e| e.to_string())?.sizes();
        let brute: Vec<usize> = (1..=5).filter(|&n| brute_models(&v, &f, n).next().is_some()).collect();
        ensure(got == want && brute == want, || format!("{spec:?}: solver {got:?}, enumeration {brute:?}"))?;
    }
    Ok("{2} and [3,∞) reproduce exactly at nMax=5".into())
}

fn random_cnf(rng: &mut ChaCha8Rng) -> GroundCnf {
    let n = rng.gen_range(1..=16u32);
    let clauses = (0..rng.gen_range(0..=(4 * n as usize)))
        .map(|_| {
            (0..rng.gen_range(1..=3))
                .map(|_| {
                    let v = rng.gen_range(1..=n) as i32;
                    if rng.gen_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect()
        })
        .collect();
    GroundCnf { num_vars: n, clauses }
}

fn criterion_8() -> Outcome {
    let l = Limits::default();
    let mut cnfs: Vec<GroundCnf> = Vec::new();
    for it in all_items() {
        if it.pf.is_bsr() {
            if let Ok(g) = bsr_ground(it.vocab(), &it.pf) {
                cnfs.push(g.cnf);
            }
        }
        for n in 1..=2 {
            if let Ok(g) = ground_formula(it.vocab(), it.formula(), n, None, &l) {
                cnfs.push(tseitin(&g.formula, g.table.len() as u32));
            }
        }
    }
    cnfs.retain(|c| c.num_vars <= 16);
    let corpus_cnfs = cnfs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    cnfs.extend((0..300).map(|_| random_cnf(&mut rng)));
    for c in &cnfs {
        let want = truth_table_sat(c);
        for r in [dpll_solve(c), solve_with(c, SolverOptions { learning: true, conflict_limit: None })] {
            ensure(r.is_sat() == want, || format!("solver disagrees on {c:?}"))?;
            if let ebs_core::ground::SolveResult::Sat(a) = r {
                ensure(c.satisfied_by(|v| a.value(v)), || "assignment does not satisfy".into())?;
            }
        }
    }

    let mut pairs = 0;
    let mut skipped = 0;
    for it in all_items().into_iter().filter(|it| it.formula().is_sentence()) {
        let s = spectrum(it.vocab(), it.formula(), 3, &l).map_err(|e| e.to_string())?;
        for n in 1..=3 {
            if !enumerable(it.vocab(), n, 1 << 20) {
                skipped += 1;
                continue;
            }
            let brute = brute_models(it.vocab(), it.formula(), n).next().is_some();
            ensure(brute == s.contains(n), || {
                format!("{} at size {n}: solver {}, enumeration {brute}", it.name, s.contains(n))
            })?;
            pairs += 1;
        }
    }

    let mut bsr = 0;
    for it in load_dir("bsr") {
        let g = bsr_ground(it.vocab(), &it.pf).map_err(|e| e.to_string())?;
        let ground = dpll_solve(&g.cnf).is_sat();
        let bounded =
            decide_sat_bounded(it.vocab(), it.formula(), it.pf.leftmost_len(), &l).unwrap().verdict.model().is_some();
        ensure(ground == bounded, || format!("{}: grounding {ground}, bounded search {bounded}", it.name))?;
        bsr += 1;
    }
    ensure(bsr >= 10, || format!("only {bsr} BSR sentences"))?;
    Ok(format!(
        "{} CNFs ({corpus_cnfs} from corpus) match truth tables; {pairs} (sentence,n) pairs match enumeration, {skipped} over 2^20 structures skipped; {bsr} BSR verdicts agree",
        cnfs.len()
    ))
}

fn random_pcnf_text(rng: &mut ChaCha8Rng) -> String {
    let nv = rng.gen_range(1..=4);
    let vars: Vec<String> = (0..nv).map(|i| format!("v{i}")).collect();
    let prefix: String =
        vars.iter().map(|v| format!("{} {v}. ", if rng.gen_bool(0.5) { "forall" } else { "exists" })).collect();
    let pick = |rng: &mut ChaCha8Rng| vars[rng.gen_range(0..nv)].clone();
    let clauses: Vec<String> = (0..rng.gen_range(1..=3))
        .map(|_| {
            let lits: Vec<String> = (0..rng.gen_range(1..=3))
                .map(|_| {
                    let neg = if rng.gen_bool(0.5) { "!" } else { "" };
                    match rng.gen_range(0..7) {
                        0 | 1 | 2 => format!("{neg}P({}, {})", pick(rng), pick(rng)),
                        3 | 4 => format!("{neg}Q({})", pick(rng)),
                        5 => format!("{neg}R({})", pick(rng)),
                        _ => format!("{}{}{}", pick(rng), if neg.is_empty() { " = " } else { " != " }, pick(rng)),
                    }
                })
                .collect();
            format!("({})", lits.join(" | "))
        })
        .collect();
    format!("vocab P/2, Q/1, R/1; {prefix}{}", clauses.join(" & "))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sigma_all = ["P", "Q", "R"];
    let subsets: Vec<BTreeSet<String>> = (0..8u32)
        .map(|m| sigma_all.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, s)| s.to_string()).collect())
        .collect();
    let unary = set(&["Q", "R"]);
    let mut accepted = 0;
    for _ in 0..200 {
        let text = random_pcnf_text(&mut rng);
        let p = parse_problem(&text).map_err(|e| format!("{text}: {e}"))?;
        let pf = to_pcnf(&p.formula).unwrap();
        let c = classify(&p.vocabulary, &pf);
        for v in EdpVariant::ALL {
            let ok: Vec<bool> = subsets.iter().map(|s| check_classified(&c, s, v).ok).collect();
            for (i, si) in subsets.iter().enumerate() {
                for (j, sj) in subsets.iter().enumerate() {
                    if sj.is_subset(si) && ok[i] {
                        ensure(ok[j], || format!("{text} ({}): σ={si:?} passes but {sj:?} fails", v.tag()))?;
                    }
                }
                let widened: BTreeSet<String> = si.union(&unary).cloned().collect();
                ensure(check_classified(&c, &widened, v).ok == ok[i], || {
                    format!("{text} ({}): σ∪U differs at {si:?}", v.tag())
                })?;
            }
            accepted += ok[0] as usize;
        }
    }
    let l = Limits::default();
    let mut spectra = 0;
    for it in edp_items() {
        let b = it.bound().unwrap();
        let s = spectrum(it.vocab(), it.formula(), 5, &l).map_err(|e| e.to_string())?;
        ensure(interval_property(&s, b), || format!("{}: sizes {:?} with B={b}", it.name, s.sizes()))?;
        spectra += 1;
    }
    Ok(format!(
        "200 formulas × {} variants ({accepted} accepted at σ=∅); interval property on {spectra} spectra",
        EdpVariant::ALL.len()
    ))
}

fn criterion_10() -> Outcome {
    let l = Limits::default();
    let mut lines = Vec::new();
    for name in ["reach", "closed", "ladder"] {
        let it = load(&format!("bmc/{name}.fol"));
        let ts = TransitionSystem::from_problem(&it.problem).map_err(|e| e.to_string())?;
        for k in 0..=3 {
            let r = bmc_solve(&ts, k, &l).map_err(|e| format!("{name} k={k}: {e}"))?;
            let phi = &r.sentence;
            let top = r.bound.b.min(4);
            let brute = (1..=top).find(|&n| brute_models(&ts.vocab, phi, n).next().is_some());
            match (r.outcome.verdict.model(), brute) {
                (Some(m), Some(_)) => ensure(evaluate(m, phi, None).unwrap(), || format!("{name} k={k}: bad model"))?,
                (None, None) => {}
                (Some(m), None) => ensure(m.size() > top && evaluate(m, phi, None).unwrap(), || {
                    format!("{name} k={k}: SAT vs enumeration")
                })?,
                (None, Some(n)) => return Err(format!("{name} k={k}: UNSAT but enumeration found size {n}")),
            }
        }
        let bs = bound_series(&ts, 0..=3, &l).map_err(|e| e.to_string())?;
        ensure(is_affine(&bs), || format!("{name}: B(k) = {bs:?}"))?;
        lines.push(format!("{name} B={bs:?}"));
    }
    Ok(format!("k≤3 verdicts match enumeration; {}", lines.join(", ")))
}

fn main() {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, f) in criteria {
        if only.is_some_and(|o| o != i) {
            continue;
        }
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(msg) => println!("criterion {i:>2}: PASS ({secs:.1}s) {msg}"),
            Err(msg) => {
                if !msg.starts_with(INCOMPLETE) {
                    failed += 1;
                }
                println!("criterion {i:>2}: FAIL ({secs:.1}s) {msg}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
