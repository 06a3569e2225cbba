//! Stable pairs with rank-one difference, their controllable restriction and
//! the change of basis to companion form.
//!
//! With `A − B = d eᵀ`, the Krylov space `V = span{d, Ad, A²d, …}` is
//! invariant under both `A` and `B`. Restricting to `V` keeps every question
//! asked by this crate unchanged, and on `V` the pair `(A, d)` is completely
//! controllable, so a basis exists in which
//!
//! ```text
//! R A R⁻¹ = S + g hᵀ,   R B R⁻¹ = S + g kᵀ,   R d = g.
//! ```

use crate::error::{Error, Result};
use crate::numerics::{
    check_square, check_vector, companion_matrix, condition_number, is_stable, last_basis_vector,
    normalize_sign, Matrix, Svd, ToleranceConfig, Vector,
};

/// A validated pair of stable matrices with `A − B = d eᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOnePair {
    a: Matrix,
    b: Matrix,
    d: Vector,
    e: Vector,
    cfg: ToleranceConfig,
}

impl RankOnePair {
    /// Validates stability of both matrices and factors their difference.
    pub fn new(a: Matrix, b: Matrix, cfg: &ToleranceConfig) -> Result<Self> {
        cfg.validate()?;
        for (m, which) in [(&a, "A"), (&b, "B")] {
            check_square(m)?;
            if !is_stable(m, cfg)? {
                return Err(Error::NotStable { which });
            }
        }
        let (d, e) = factor_rank_one(&a, &b, cfg)?;
        Self::with_factors(a, b, d, e, cfg)
    }

    /// Builds `B = A − d eᵀ` from a stable `A` and explicit factors.
    pub fn from_factors(a: Matrix, d: Vector, e: Vector, cfg: &ToleranceConfig) -> Result<Self> {
        let n = check_square(&a)?;
        check_vector(&d, n)?;
        check_vector(&e, n)?;
        let b = &a - &d * e.transpose();
        let scale = d.norm();
        if scale == 0.0 || e.norm() == 0.0 {
            return Err(Error::RankZeroDifference);
        }
        let d_unit = &d / scale;
        let e_scaled = &e * scale;
        let (d_unit, e_scaled) = if d_unit
            .iter()
            .find(|x| x.abs() > cfg.psd_tol)
            .is_some_and(|x| *x < 0.0)
        {
            (-d_unit, -e_scaled)
        } else {
            (d_unit, e_scaled)
        };
        Self::with_factors(a, b, d_unit, e_scaled, cfg)
    }

    pub(crate) fn with_factors(
        a: Matrix,
        b: Matrix,
        d: Vector,
        e: Vector,
        cfg: &ToleranceConfig,
    ) -> Result<Self> {
        let n = check_square(&a)?;
        let nb = check_square(&b)?;
        if nb != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: nb,
            });
        }
        if !is_stable(&a, cfg)? {
            return Err(Error::NotStable { which: "A" });
        }
        if !is_stable(&b, cfg)? {
            return Err(Error::NotStable { which: "B" });
        }
        let diff = &a - &b;
        let residual = (&diff - &d * e.transpose()).norm();
        if residual > cfg.residual_tol * diff.norm() {
            return Err(Error::NotRankOne { rank: 2 });
        }
        Ok(Self {
            a,
            b,
            d,
            e,
            cfg: *cfg,
        })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    /// Left factor of `A − B`, unit norm.
    pub fn d(&self) -> &Vector {
        &self.d
    }

    /// Right factor of `A − B`.
    pub fn e(&self) -> &Vector {
        &self.e
    }

    pub fn cfg(&self) -> &ToleranceConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// The same pair with both matrices multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::OutOfRange {
                name: "scale",
                value: c,
            });
        }
        Self::with_factors(
            &self.a * c,
            &self.b * c,
            self.d.clone(),
            &self.e * c,
            &self.cfg,
        )
    }
}

/// Factors `A − B = d eᵀ` with `‖d‖ = 1` and the first nonzero entry of `d`
/// positive.
pub fn factor_rank_one(a: &Matrix, b: &Matrix, cfg: &ToleranceConfig) -> Result<(Vector, Vector)> {
    let n = check_square(a)?;
    let nb = check_square(b)?;
    if nb != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: nb,
        });
    }
    let diff = a - b;
    let scale = a.norm().max(b.norm());
    let svd = Svd::new(&diff).ok_or(Error::EigenFailed)?;
    let sigma_max = svd.s[0];
    if sigma_max <= cfg.psd_tol * scale {
        return Err(Error::RankZeroDifference);
    }
    let rank = svd
        .s
        .iter()
        .filter(|&&s| s > cfg.psd_tol * sigma_max)
        .count();
    if rank != 1 {
        return Err(Error::NotRankOne { rank });
    }
    let d = normalize_sign(svd.u.column(0).into_owned(), cfg.psd_tol);
    let e = diff.transpose() * &d;
    let residual = (&diff - &d * e.transpose()).norm();
    if residual > cfg.residual_tol * diff.norm() {
        return Err(Error::NotRankOne { rank: 2 });
    }
    Ok((d, e))
}

/// Orthonormal basis of the Krylov space generated by `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrylovBasis {
    /// `n × dim` matrix with orthonormal columns; the first column is `x/‖x‖`.
    pub basis: Matrix,
    pub dim: usize,
}

/// Arnoldi iteration with full re-orthogonalization; the space is exhausted
/// when the new direction falls below `psd_tol · ‖A‖`.
pub fn krylov_controllable(a: &Matrix, x: &Vector, cfg: &ToleranceConfig) -> Result<KrylovBasis> {
    let n = check_square(a)?;
    check_vector(x, n)?;
    let xn = x.norm();
    if xn == 0.0 {
        return Err(Error::ZeroVector);
    }
    let threshold = cfg.psd_tol * a.norm().max(f64::MIN_POSITIVE);
    let mut columns: Vec<Vector> = vec![x / xn];
    while columns.len() < n {
        let mut w = a * columns.last().unwrap();
        for _ in 0..2 {
            for q in &columns {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm <= threshold {
            break;
        }
        columns.push(w / norm);
    }
    let dim = columns.len();
    Ok(KrylovBasis {
        basis: Matrix::from_columns(&columns),
        dim,
    })
}

/// Restriction of a pair to the Krylov space of its left factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllableRestriction {
    /// The restricted pair `(A₁, B₁)`, completely controllable.
    pub pair: RankOnePair,
    /// Columns span the controllable subspace; `A₁ = QᵀAQ`.
    pub basis: Matrix,
}

impl ControllableRestriction {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_full(&self) -> bool {
        self.basis.ncols() == self.basis.nrows()
    }

    /// Pads a symmetric matrix on the subspace with zeros: `Q M Qᵀ`.
    pub fn embed_symmetric(&self, m: &Matrix) -> Matrix {
        &self.basis * m * self.basis.transpose()
    }

    /// Maps a vector on the subspace back to the full space.
    pub fn embed_vector(&self, v: &Vector) -> Vector {
        &self.basis * v
    }

    /// Compresses a symmetric matrix onto the subspace: `Qᵀ M Q`.
    pub fn restrict_symmetric(&self, m: &Matrix) -> Matrix {
        self.basis.transpose() * m * &self.basis
    }
}

pub fn reduce_to_controllable(pair: &RankOnePair) -> Result<ControllableRestriction> {
    let cfg = pair.cfg();
    let krylov = krylov_controllable(pair.a(), pair.d(), cfg)?;
    let n = pair.dim();
    if krylov.dim == n {
        return Ok(ControllableRestriction {
            pair: pair.clone(),
            basis: Matrix::identity(n, n),
        });
    }
    let q = krylov.basis;
    let a1 = q.transpose() * pair.a() * &q;
    let d1 = q.transpose() * pair.d();
    let e1 = q.transpose() * pair.e();
    let b1 = &a1 - &d1 * e1.transpose();
    // Stability is re-verified on the projected blocks.
    let reduced = RankOnePair::with_factors(a1, b1, d1, e1, cfg)?;
    Ok(ControllableRestriction {
        pair: reduced,
        basis: q,
    })
}

/// Change of basis `R` bringing `(A, x)` to companion form.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionForm {
    /// `R`, with `R A R⁻¹ = S + g hᵀ` and `R x = g`.
    pub r: Matrix,
    /// `R⁻¹`, whose columns are the basis vectors `e₁, …, eₙ`.
    pub r_inv: Matrix,
    pub h: Vector,
    /// Characteristic polynomial `λⁿ + aₙλⁿ⁻¹ + … + a₁`, stored as `(a₁, …, aₙ)`.
    pub char_poly: Vector,
    pub controllable_dim: usize,
    /// `‖R A R⁻¹ − (S + g hᵀ)‖_F`.
    pub residual: f64,
    /// 2-norm condition number of `R`.
    pub condition: f64,
}

/// Builds `R` row by row: `RA = (S + ghᵀ)R` forces `rᵢ₊₁ = rᵢA`, and
/// `Rx = g` fixes `r₁` through `r₁Aʲx = 0` for `j < n−1`, `r₁Aⁿ⁻¹x = 1`.
/// The columns of `R⁻¹` are then `eₙ = x`, `eₖ₋₁ = A eₖ + aₖ x` with `aₖ`
/// the characteristic polynomial coefficients.
pub fn to_companion(a: &Matrix, x: &Vector, cfg: &ToleranceConfig) -> Result<CompanionForm> {
    let n = check_square(a)?;
    check_vector(x, n)?;
    let krylov = krylov_controllable(a, x, cfg)?;
    if krylov.dim < n {
        return Err(Error::NotControllable { dim: krylov.dim, n });
    }

    let mut powers: Vec<Vector> = Vec::with_capacity(n);
    powers.push(x.clone());
    for j in 1..n {
        let next = a * &powers[j - 1];
        powers.push(next);
    }
    let krylov_matrix = Matrix::from_columns(&powers);
    let first = krylov_matrix
        .transpose()
        .lu()
        .solve(&last_basis_vector(n))
        .ok_or(Error::NotControllable { dim: n - 1, n })?;
    let mut rows = vec![first.transpose()];
    for i in 1..n {
        let next = &rows[i - 1] * a;
        rows.push(next);
    }
    let r = Matrix::from_rows(&rows);
    let condition = condition_number(&r);
    if !(condition <= 1.0 / cfg.psd_tol) {
        return Err(Error::IllConditioned { condition });
    }
    let r_inv = r.clone().lu().try_inverse().ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
    })?;
    let transformed = &r * a * &r_inv;
    let h = transformed.row(n - 1).transpose();
    let residual = (&transformed - companion_matrix(&h)).norm();
    // λⁿ − hₙλⁿ⁻¹ − … − h₁ is the characteristic polynomial of S + ghᵀ.
    let char_poly = -&h;
    Ok(CompanionForm {
        r,
        r_inv,
        h,
        char_poly,
        controllable_dim: n,
        residual,
        condition,
    })
}

/// Companion coordinates for a completely controllable pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionReduction {
    pub form: CompanionForm,
    /// `R B R⁻¹ = S + g kᵀ`.
    pub k: Vector,
    /// `‖R B R⁻¹ − (S + g kᵀ)‖_F`.
    pub residual_b: f64,
}

impl CompanionReduction {
    pub fn h(&self) -> &Vector {
        &self.form.h
    }

    pub fn k(&self) -> &Vector {
        &self.k
    }

    /// `R M Rᵀ`: congruence carrying solutions of the Lyapunov-type equations
    /// to companion coordinates.
    pub fn to_companion_symmetric(&self, m: &Matrix) -> Matrix {
        &self.form.r * m * self.form.r.transpose()
    }

    /// `R⁻¹ v`: maps companion-coordinate vectors back.
    pub fn from_companion_vector(&self, v: &Vector) -> Vector {
        &self.form.r_inv * v
    }
}

/// Companion form of a completely controllable pair, using `x = d` so that
/// `R d = g` and both matrices share the shift structure.
pub fn companion_reduction(pair: &RankOnePair) -> Result<CompanionReduction> {
    let form = to_companion(pair.a(), pair.d(), pair.cfg())?;
    let n = pair.dim();
    let transformed = &form.r * pair.b() * &form.r_inv;
    let k = transformed.row(n - 1).transpose();
    let residual_b = (&transformed - companion_matrix(&k)).norm();
    Ok(CompanionReduction {
        form,
        k,
        residual_b,
    })
}

/// `g`, for callers that work in companion coordinates.
pub fn companion_input_vector(n: usize) -> Vector {
    last_basis_vector(n)
}
