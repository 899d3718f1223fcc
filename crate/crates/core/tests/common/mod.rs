#![allow(dead_code)]

use std::path::{Path, PathBuf};

use ebs_core::edp::{classify, edp_bound, EdpVariant};
use ebs_core::formula::to_pcnf;
use ebs_core::ground::GroundCnf;
use ebs_core::structures::{count_structures, enumerate_structures};
use ebs_core::{evaluate, parse_problem, FiniteStructure, Formula, PrenexForm, Problem, Vocabulary};

pub struct Item {
    pub name: String,
    pub problem: Problem,
    pub pf: PrenexForm,
}

impl Item {
    pub fn vocab(&self) -> &Vocabulary {
        &self.problem.vocabulary
    }

    pub fn formula(&self) -> &Formula {
        &self.problem.formula
    }

    /// `@bound`, else the base bound for σ = ∅.
    pub fn bound(&self) -> Option<usize> {
        self.problem
            .bound()
            .or_else(|| edp_bound(&classify(self.vocab(), &self.pf), EdpVariant::Base).ok().map(|r| r.b))
    }
}

pub fn corpus_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn load(rel: &str) -> Item {
    let path = corpus_root().join(rel);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let problem = parse_problem(&text).unwrap_or_else(|e| panic!("{rel}: {e}"));
    let pf = to_pcnf(&problem.formula).unwrap();
    Item { name: rel.to_string(), problem, pf }
}

pub fn load_dir(dir: &str) -> Vec<Item> {
    let mut names: Vec<String> = std::fs::read_dir(corpus_root().join(dir))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".fol"))
        .collect();
    names.sort();
    names.iter().map(|n| load(&format!("{dir}/{n}"))).collect()
}

/// Every structure of size `n` satisfying `f`, by enumeration.
pub fn brute_models<'a>(vocab: &Vocabulary, f: &'a Formula, n: usize) -> impl Iterator<Item = FiniteStructure> + 'a {
    enumerate_structures(vocab, n).unwrap().filter(move |m| evaluate(m, f, None).unwrap())
}

pub fn enumerable(vocab: &Vocabulary, n: usize, cap: u128) -> bool {
    count_structures(vocab, n).is_some_and(|c| c <= cap)
}

/// Satisfiability by trying all assignments.
pub fn truth_table_sat(c: &GroundCnf) -> bool {
    let n = c.num_vars as usize;
    assert!(n <= 20, "truth table over {n} variables");
    (0u64..1 << n).any(|bits| c.satisfied_by(|v| bits >> (v - 1) & 1 == 1))
}
