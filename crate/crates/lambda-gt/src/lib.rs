//! λ_GT: a call-by-value functional language whose values are hypergraphs,
//! typed by graph grammars and checked by structural induction.

pub mod canon;
pub mod grammar;
pub mod matcher;
pub mod dot;
pub mod eval;
pub mod graph;
pub mod name;
pub mod syntax;
pub mod verifier;

pub use canon::{congruent, embed, normalize, Canon};
pub use graph::{Atom, AtomName, Case, Expr, Graph, Lambda, TypeAtom, TypeHead};
pub use name::Name;
