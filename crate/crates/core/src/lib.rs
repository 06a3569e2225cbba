//! Common quadratic Lyapunov functions (CQLFs) for pairs of stable matrices
//! whose difference has rank one.
//!
//! A pair `(A, B)` of Hurwitz matrices with `A - B = d eᵀ` has a CQLF, i.e. a
//! `P ≻ 0` with `PA + AᵀP ≺ 0` and `PB + BᵀP ≺ 0`, exactly when the product
//! `AB` has no real negative eigenvalue. This crate decides that question and
//! backs every verdict with a certificate that can be checked independently:
//!
//! * a matrix `P` when a CQLF exists ([`certificates::construct_cqlf`]);
//! * a pair of vectors `(v, w)` with
//!   `Avvᵀ + vvᵀAᵀ + Bwwᵀ + wwᵀBᵀ = 0` when it does not
//!   ([`certificates::construct_witness`]).
//!
//! Beyond the decision itself the crate exposes the constructive machinery
//! that turns an arbitrary positive semidefinite solution `(X, Y)` of
//! `AX + XAᵀ + BY + YBᵀ = 0` into a rank-one witness: reduction to a
//! controllable companion form ([`pair_model`]), signed Hankel matrices and
//! their moment decompositions ([`moment_hankel`]), and the extraction
//! pipeline itself ([`witness_extraction`]).
//!
//! ```
//! use cqlf_core::{decide, Matrix, ToleranceConfig};
//!
//! let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -2.0]);
//! let b = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
//! let report = decide(&a, &b, &ToleranceConfig::default()).unwrap();
//! assert!(report.has_cqlf);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod decision;
pub mod error;
pub mod moment_hankel;
pub mod numerics;
pub mod pair_model;
pub mod selftest;
pub mod witness_extraction;

pub use certificates::{
    construct_cqlf, construct_witness, verify_cqlf, verify_pair_solution, verify_witness,
    CqlfCertificate, CqlfMargins, InfeasibilityWitness,
};
pub use decision::{
    circle_criterion_scan, convex_combination_det, decide, decide_pair, spectral_test, CircleScan,
    DecisionReport,
};
pub use error::{Error, ExtractionFailure, ExtractionStage, Result};
pub use moment_hankel::{
    atom, moment_decompose, signed_hankel, CompanionVectors, MomentDecomposition, SignedHankel,
};
pub use numerics::{Matrix, Spectrum, ToleranceConfig, Vector};
pub use pair_model::{CompanionForm, CompanionReduction, ControllableRestriction, RankOnePair};
pub use witness_extraction::{
    extract_for_pair, extract_rank_one, root_find_f_equal_one, ExtractionTrace, PairExtraction,
};
