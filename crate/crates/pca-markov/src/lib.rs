//! Invariant Markov laws of probabilistic cellular automata on the line and
//! the cycle.
//!
//! A PCA updates every cell of a one-dimensional lattice simultaneously,
//! drawing each new state from a transition matrix `T(a, b, ·)` indexed by
//! the two neighbors above. This crate decides — by exact algebraic
//! criteria, not simulation — whether such a rule admits an invariant law
//! that is a (possibly cyclic, possibly zigzag) Markov chain, and when one
//! exists it constructs the kernels explicitly.
//!
//! The pieces:
//!
//! * [`types`] — validated transition matrices, stochastic kernels,
//!   probability vectors, shared tolerances.
//! * [`spectral`] — Perron eigendata by power iteration and stationary
//!   vectors by direct solve, kept as two independent routes.
//! * [`hz`] — the zigzag analysis: Gibbs conditions, the ν → X → (γ, λ, μ)
//!   spectral pipeline, candidate kernels D^γ/U^γ, commutation, verdicts.
//! * [`cyclic`] — the finite-cycle variant, where commutation relaxes to
//!   equality of diagonal powers.
//! * [`line`] — invariance of a given (ρ, M) chain on the line and cycle
//!   via the weighted word-product matrices Q_x, the binary classification,
//!   and spectral necessity diagnostics.
//! * [`oracle`] — brute-force stationary laws on small cycles and
//!   ratio-based Markov/zigzag fits, used to cross-check everything above.
//! * [`sim`] — counter-seeded Monte Carlo on a cylinder for sizes the
//!   oracle cannot reach.
//! * [`gen`] — deterministic instance generators for every regime.
//! * [`report`] — the combined condition report with per-structure
//!   verdicts.

mod linalg;

pub mod cyclic;
pub mod gen;
pub mod hz;
pub mod line;
pub mod oracle;
pub mod report;
pub mod sim;
pub mod spectral;
pub mod types;

pub use report::{analyze_full, ConditionReport, Verdict};
pub use types::{Error, ProbVector, Result, StochasticKernel, TransitionMatrix};
