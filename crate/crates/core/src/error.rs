use thiserror::Error;

use crate::witness_extraction::ExtractionTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Stage of the extraction pipeline at which a hypothesis failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionStage {
    /// `(X, Y)` is not an admissible solution (PSD, Lyapunov residual, structure).
    Input,
    /// `⟨k−h, Y(k−h)⟩` vanished, so the initial `w` is undefined.
    InitialW,
    /// The moment decomposition left a mass at infinity.
    TrailingMass,
    /// No atom satisfied `0 < F(Z(x)) ≤ F(Z)`.
    AtomSelection,
    /// The root of `F(Z(y)) = 1` could not be located.
    RootFinding,
    /// `Z(y) − wwᵀ` was not rank one.
    RankOne,
    /// The final vectors failed the independent residual check.
    Verification,
}

impl std::fmt::Display for ExtractionStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExtractionStage::Input => "input",
            ExtractionStage::InitialW => "initial-w",
            ExtractionStage::TrailingMass => "trailing-mass",
            ExtractionStage::AtomSelection => "atom-selection",
            ExtractionStage::RootFinding => "root-finding",
            ExtractionStage::RankOne => "rank-one",
            ExtractionStage::Verification => "verification",
        };
        f.write_str(s)
    }
}

/// Extraction failure, carrying whatever part of the trace was computed.
#[derive(Debug, Clone)]
pub struct ExtractionFailure {
    pub stage: ExtractionStage,
    pub detail: String,
    pub trace: ExtractionTrace,
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is empty")]
    Empty,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite entry in input")]
    NonFinite,
    #[error("invalid tolerance configuration: {0}")]
    InvalidTolerance(&'static str),
    #[error("eigenvalue iteration did not converge")]
    EigenFailed,
    #[error("matrix {which} is not stable")]
    NotStable { which: &'static str },
    #[error("matrix is not symmetric (deviation {deviation:.3e} exceeds {tolerance:.3e})")]
    Asymmetric { deviation: f64, tolerance: f64 },
    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.6e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("vector is not in the range of the matrix (projection residual {residual:.3e})")]
    NotInRange { residual: f64 },
    #[error("linear system is singular")]
    Singular,
    #[error("A − B is zero; the pair differs by a rank-0 matrix")]
    RankZeroDifference,
    #[error("A − B has numerical rank {rank}, expected 1")]
    NotRankOne { rank: usize },
    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,
    #[error("pair is not completely controllable (Krylov dimension {dim} < {n})")]
    NotControllable { dim: usize, n: usize },
    #[error("companion basis is ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },
    #[error("parameter {name} = {value} is outside its admissible range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("wrong branch: {0}")]
    WrongBranch(&'static str),
    #[error("eigenvector extraction failed (eigen-residual {residual:.3e})")]
    DefectiveEigenvector { residual: f64 },
    #[error("certificate search failed after {iterations} iterations (best objective {best_objective:.3e}); the verdict stands")]
    CertificateSearchFailed {
        iterations: usize,
        best_objective: f64,
    },
    #[error("X and Y are both zero")]
    BothZero,
    #[error("matrix does not have signed Hankel structure (residual {residual:.3e})")]
    NotSignedHankel { residual: f64 },
    #[error("recovered node {node:.6e} is negative")]
    NegativeNode { node: f64 },
    #[error("moment decomposition failed (best reconstruction residual {residual:.3e})")]
    DecompositionFailed { residual: f64 },
    #[error("denominator ⟨h−k, ξ⟩ = {denominator:.3e} is numerically zero")]
    Pole { denominator: f64 },
    #[error("denominator ⟨h−k, ξ⟩ = {denominator:.3e} is not positive")]
    NonPositiveDenominator { denominator: f64 },
    #[error("F(Z(0)) = {value:.6e} lies in [0, 1]; the zero atom cannot bound a root")]
    ZeroAtomInUnitInterval { value: f64 },
    #[error("no root of F(Z(y)) = 1 found in [0, {x_hi}] ({samples} samples)")]
    NoBracket {
        x_hi: f64,
        samples: usize,
        /// Sampled `(y, F(Z(y)) - 1)` profile, poles omitted.
        profile: Vec<(f64, f64)>,
    },
    #[error("extraction failed at stage {}: {}", .0.stage, .0.detail)]
    Extraction(Box<ExtractionFailure>),
}
