//! Classification of first-order sentences into the EDP fragment, extensible
//! bounded-submodel bounds, translation into Bernays-Schönfinkel-Ramsey form,
//! and bounded finite-model search.
//!
//! Every semantic claim made by the library can be checked at small universe
//! sizes with [`structures::evaluate`] and [`structures::enumerate_structures`].

pub mod analysis;
pub mod bmc;
pub mod edp;
mod error;
pub mod formula;
pub mod ground;
pub mod parser;
pub mod structures;
pub mod translate;

pub use error::{Error, Result};
pub use formula::{Atom, Formula, Limits, Literal, PrenexForm, Quantifier, Term, Vocabulary};
pub use parser::{parse_problem, render, Problem};
pub use structures::{evaluate, FiniteStructure, SubsetWitness};
