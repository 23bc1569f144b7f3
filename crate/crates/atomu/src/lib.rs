//! Symbolic computation with orbit-finite sets over equality and ordered
//! atoms, and a toolkit for the atomic modal mu-calculus built on top:
//! model checking (scalar and vectorial), atomic parity games, bisimulation
//! game deciders, a decision procedure for fresh-path existence, and the
//! Turing-machine-to-LTL reduction constructions.

pub mod atoms;
pub mod bisim;
pub mod check;
pub mod games;
pub mod kripke;
pub mod mu;
pub mod orbits;
pub mod surface;

pub use atoms::{Atom, AtomSort, Context, Ctx};
pub use mu::Formula;
pub use orbits::{Element, Orbit, OrbitRelation, OrbitSet, Tag};
