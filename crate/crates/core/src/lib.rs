//! Exact and p-adic q-expansions of Eisenstein series, the measures and
//! weight-space families built from them, and a truncated cocycle calculus.

pub mod arith;
pub mod cyclotomic;
pub mod qseries;
pub mod lfunctions;
pub mod eisenstein;
pub mod measures;
pub mod family;
pub mod weightrep;
pub mod cocycle;
