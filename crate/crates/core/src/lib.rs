//! Finite relational structures over small universes, Fraïssé-class
//! machinery (membership, bounded enumeration, hereditary and disjoint
//! amalgamation checks, with and without equivalence-relation allowances),
//! blur-indexed canonical exchangeable samplers with statistical verifiers,
//! the equivalence-relation elimination transforms with their representation
//! lifts, and the hierarchical-array instantiation on grid index structures.
//!
//! Everything is deterministic: sampling is driven by a keyed PRF so the
//! same seed reproduces the same run bit-for-bit, and every search reports
//! its lexicographically least witness.

pub mod amalgam;
pub mod classdef;
pub mod eliminate;
pub mod equiv;
pub mod hierarchy;
pub mod kspec;
pub mod relstruct;
pub mod sampler;
pub mod search;
pub mod stats;

pub use classdef::{ClassSpec, EqClassCount, EqRelDecl, StarRef};
pub use relstruct::{Element, Signature, Structure, SymbolId};
