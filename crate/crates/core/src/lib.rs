//! Deterministic judge toolkit for scientific simulation problems.
//!
//! Parses `spec.md` problem documents, runs pre-execution gates over the
//! spec and a solver plan, budgets error over a primitive operator graph,
//! audits computed solutions, probes for bifurcation proximity and seals
//! the outcome in a hash-verified certificate.

pub mod specmd;
pub mod units;
pub mod canonical;
pub mod gates;
pub mod opgraph;
pub mod audit;
pub mod solvers;
pub mod probes;
pub mod certify;
