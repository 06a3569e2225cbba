//! Fixed benchmark inputs shared by the criterion benches.

use cqlf_core::numerics::companion_matrix;
use cqlf_core::selftest::{random_fattened_case, random_moment_case, random_pair, rng_for};
use cqlf_core::{Matrix, RankOnePair, SignedHankel, ToleranceConfig, Vector};

pub const SEED: u64 = 42;

pub fn cfg() -> ToleranceConfig {
    ToleranceConfig::default()
}

/// The 2×2 pair with `AB` spectrum `{1, 2}`.
pub fn golden_cqlf_pair() -> RankOnePair {
    let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -2.0]);
    let b = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
    RankOnePair::new(a, b, &cfg()).unwrap()
}

/// Random pairs of dimension `n`, split by verdict on demand by the caller.
pub fn random_pairs(n: usize, count: usize) -> Vec<RankOnePair> {
    let mut rng = rng_for(SEED, n as u64);
    (0..count)
        .map(|_| random_pair(&mut rng, n, &cfg()).unwrap())
        .collect()
}

pub fn moment_input(n: usize) -> SignedHankel {
    let mut rng = rng_for(SEED, 100 + n as u64);
    random_moment_case(&mut rng, n).hankel
}

/// Companion pair `(A, B)` with a fattened PSD solution `(X, Y)`.
pub struct ExtractionInput {
    pub h: Vector,
    pub k: Vector,
    pub a: Matrix,
    pub b: Matrix,
    pub x: Matrix,
    pub y: Matrix,
}

pub fn extraction_input(n: usize) -> ExtractionInput {
    let cfg = cfg();
    let mut rng = rng_for(SEED, 200 + n as u64);
    let case = loop {
        if let Some(c) = random_fattened_case(&mut rng, n, &cfg).unwrap() {
            break c;
        }
    };
    ExtractionInput {
        a: companion_matrix(&case.h),
        b: companion_matrix(&case.k),
        h: case.h,
        k: case.k,
        x: case.x,
        y: case.y,
    }
}
