//! Cathoristic logic: a negation-free multi-modal logic with a tantum operator `!A`.
//!
//! The crate covers parsing and printing ([`syntax`]), models ([`model`]),
//! satisfaction ([`semantics`]), the simulation order ([`order`]), the model
//! lattice ([`lattice`]), decision procedures ([`decide`]), a sequent-style proof
//! system ([`proof`]), first-order and Hennessy-Milner translations ([`fol`]) and
//! a small knowledge-base engine ([`kb`]).

pub mod bench;
pub mod decide;
pub mod fixtures;
pub mod fol;
pub mod kb;
pub mod lattice;
pub mod model;
pub mod order;
pub mod proof;
pub mod semantics;
pub mod syntax;

pub use decide::{entails, entails_neg, incompatible, incompatibility_witness};
pub use fol::{eval_fol, extract_model, guards, translate_fol1, translate_fol2, translate_hml, translate_model, FolFormula, FolModel, FolTarget};
pub use kb::{optimize_query, KnowledgeBase, QueryLiteral};
pub use lattice::{char_formula, char_raw, glb, lub, simpl, LatticeModel};
pub use model::{tree_unfold, Model, PureModel, RawModel, StateId, StateLabel};
pub use proof::{check_derivation, derive, Derivation, Rule, Sequent};
pub use order::{bisimilar, distinguishing_formula, equivalent, preceq, simulation_exists};
pub use semantics::{eval_extended, from_pure, satisfies, satisfies_pure, satisfies_quantified, to_pure, LabelMode};
pub use syntax::{parse_core, parse_neg, parse_quantified, Action, ActionSet, Alphabet, Formula, QFormula};
