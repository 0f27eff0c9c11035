//! Linearization of energy-dependent Hamiltonians.
//!
//! Self-consistent states of `H(E) ψ = E ψ` are found branch by branch, a
//! dual basis is built from their overlaps, and two constant matrices `K`, `L`
//! are assembled that reproduce the right and left action of `H(E)` on those
//! states, together with the metrics relating them to their adjoints.

// `!(a < b)` is the idiom used throughout to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod biortho;
pub mod feshbach;
pub mod io;
pub mod linalg;
pub mod linearize;
pub mod models;
pub mod nlevp;
pub mod oracles;
pub mod pipeline;
pub mod random;

pub use biortho::{DualBasis, OverlapMatrix, Scheme};
pub use feshbach::{feshbach_model_as_ed, feshbach_reduce, recoverable_spectrum, FeshbachModel};
pub use linalg::{CMatrix, CVector, EigenPair};
pub use linearize::{build_k, build_l, intertwining_residuals, metric_xi, LinearizedPair, Metrics};
pub use models::{make_constant, make_ed_mass_oscillator, make_sextic_qes, make_step, EdHamiltonian};
pub use nlevp::{solve_all, trace_branches, Alpha, BoundState, BranchTable, SolveOptions};
pub use pipeline::{run, Report, RunConfig, RunError};

/// Polynomials over the rationals.
pub type RationalPoly = oracles::RationalPoly;
/// Polynomials with floating-point coefficients.
pub type FloatPoly = oracles::Poly<f64>;
/// Polynomials over `Q[E]/(χ)`, exact at an algebraic energy.
pub type AlgebraicPoly = oracles::Poly<oracles::ExtRational>;
