//! Dense real linear algebra: spectra, stability, Lyapunov solves, PSD and
//! rank decisions, and quadratic forms against a pseudo-inverse.
//!
//! Every tolerance used by the crate lives in [`ToleranceConfig`]. Rank and
//! definiteness decisions are relative to the spectral norm of the matrix at
//! hand so that verdicts do not change when inputs are rescaled.

use nalgebra::{linalg::Schur, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Tolerances shared by every module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    /// Relative tolerance for classifying eigenvalues as real / negative.
    pub eig_tol: f64,
    /// Relative floor for PSD and rank decisions.
    pub psd_tol: f64,
    /// Relative residual accepted for certificates.
    pub residual_tol: f64,
    /// Number of samples for frequency and parameter scans.
    pub scan_points: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self::with_residual_tol(1e-9)
    }
}

impl ToleranceConfig {
    /// Ratio `eig_tol / residual_tol` kept when rescaling.
    const EIG_RATIO: f64 = 100.0;
    const PSD_RATIO: f64 = 1.0;

    /// Configuration with the given residual tolerance; the other
    /// tolerances scale proportionally.
    pub fn with_residual_tol(residual_tol: f64) -> Self {
        Self {
            eig_tol: residual_tol * Self::EIG_RATIO,
            psd_tol: residual_tol * Self::PSD_RATIO,
            residual_tol,
            scan_points: 512,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.eig_tol) {
            return Err(Error::InvalidTolerance("eig_tol must be positive"));
        }
        if !positive(self.psd_tol) {
            return Err(Error::InvalidTolerance("psd_tol must be positive"));
        }
        if !positive(self.residual_tol) {
            return Err(Error::InvalidTolerance("residual_tol must be positive"));
        }
        if self.scan_points < 16 {
            return Err(Error::InvalidTolerance("scan_points must be at least 16"));
        }
        Ok(())
    }
}

/// Eigenvalues of a real matrix together with the real negative ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// All eigenvalues with multiplicity, sorted by real then imaginary part.
    pub values: Vec<Complex64>,
    /// Real parts of the eigenvalues classified as real and negative.
    pub real_negative: Vec<f64>,
}

impl Spectrum {
    pub fn max_real_part(&self) -> f64 {
        self.values
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn check_square(m: &Matrix) -> Result<usize> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Empty);
    }
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(m.nrows())
}

pub(crate) fn check_vector(v: &Vector, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Relative scale used by the eigenvalue classification: `1 + |λ|`.
fn eig_scale(z: Complex64) -> f64 {
    1.0 + z.norm()
}

pub(crate) fn is_classified_real(z: Complex64, cfg: &ToleranceConfig) -> bool {
    z.im.abs() <= cfg.eig_tol * eig_scale(z)
}

pub fn eigenvalues(m: &Matrix, cfg: &ToleranceConfig) -> Result<Spectrum> {
    check_square(m)?;
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000).ok_or(Error::EigenFailed)?;
    let mut values: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    // Im is cleared first, then the sign of the real part is tested.
    let real_negative = values
        .iter()
        .filter(|z| is_classified_real(**z, cfg) && z.re < -cfg.eig_tol * eig_scale(**z))
        .map(|z| z.re)
        .collect();
    Ok(Spectrum {
        values,
        real_negative,
    })
}

pub fn is_stable(m: &Matrix, cfg: &ToleranceConfig) -> Result<bool> {
    let spectrum = eigenvalues(m, cfg)?;
    Ok(spectrum
        .values
        .iter()
        .all(|z| z.re < -cfg.eig_tol * eig_scale(*z)))
}

/// Solves `PA + AᵀP = −Q` for symmetric `P` through the Kronecker form
/// `(Aᵀ ⊗ I + I ⊗ Aᵀ) vec(P) = −vec(Q)`.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix, cfg: &ToleranceConfig) -> Result<Matrix> {
    let n = check_square(a)?;
    let nq = check_square(q)?;
    if nq != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: nq,
        });
    }
    check_symmetric(q, cfg.psd_tol)?;
    if !is_stable(a, cfg)? {
        return Err(Error::NotStable { which: "A" });
    }

    // Column-major vec: P[i, j] ↦ i + j n.
    let nn = n * n;
    let mut kron = Matrix::zeros(nn, nn);
    for j in 0..n {
        for i in 0..n {
            let row = i + j * n;
            for k in 0..n {
                // (PA)_{ij} = Σ_k P_{ik} A_{kj}
                kron[(row, i + k * n)] += a[(k, j)];
                // (AᵀP)_{ij} = Σ_k A_{ki} P_{kj}
                kron[(row, k + j * n)] += a[(k, i)];
            }
        }
    }
    let rhs = Vector::from_iterator(nn, q.iter().map(|x| -x));
    let sol = kron.lu().solve(&rhs).ok_or(Error::Singular)?;
    let p = Matrix::from_column_slice(n, n, sol.as_slice());
    Ok(symmetrize(&p))
}

pub fn lyapunov_residual(a: &Matrix, p: &Matrix, q: &Matrix) -> f64 {
    (p * a + a.transpose() * p + q).norm()
}

pub(crate) fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub(crate) fn check_symmetric(m: &Matrix, tol: f64) -> Result<()> {
    let deviation = (m - m.transpose()).norm();
    let tolerance = tol * m.norm();
    if deviation > tolerance {
        return Err(Error::Asymmetric {
            deviation,
            tolerance,
        });
    }
    Ok(())
}

/// Ascending eigen-decomposition of the symmetric part of `m`.
pub(crate) fn sym_eigen(m: &Matrix) -> (Vec<f64>, Matrix) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Outcome of a PSD / rank decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdReport {
    pub is_psd: bool,
    pub rank: usize,
    pub min_eigenvalue: f64,
    /// Spectral norm used as the reference scale.
    pub norm: f64,
}

pub fn psd_check(m: &Matrix, cfg: &ToleranceConfig) -> Result<PsdReport> {
    check_square(m)?;
    check_symmetric(m, cfg.psd_tol)?;
    let (values, _) = sym_eigen(m);
    let norm = values.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let floor = cfg.psd_tol * norm;
    Ok(PsdReport {
        is_psd: values[0] >= -floor,
        rank: values.iter().filter(|&&x| x.abs() > floor).count(),
        min_eigenvalue: values[0],
        norm,
    })
}

/// `⟨v, Z⁺v⟩` for symmetric PSD `Z` and `v ∈ Ran(Z)`.
pub fn quadratic_form_pinv(z: &Matrix, v: &Vector, cfg: &ToleranceConfig) -> Result<f64> {
    let n = check_square(z)?;
    check_vector(v, n)?;
    check_symmetric(z, cfg.psd_tol)?;
    let (values, vectors) = sym_eigen(z);
    let norm = values.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if values[0] < -cfg.psd_tol * norm {
        return Err(Error::NotPsd {
            min_eigenvalue: values[0],
        });
    }
    // Inversion uses the numerical rank rather than psd_tol: directions with
    // eigenvalues between the two still carry v exactly when Z is exact.
    let floor = 100.0 * n as f64 * f64::EPSILON * norm;
    let mut form = 0.0;
    let mut projected = Vector::zeros(n);
    for (k, &lambda) in values.iter().enumerate() {
        if lambda > floor {
            let q = vectors.column(k);
            let c = q.dot(v);
            form += c * c / lambda;
            projected.axpy(c, &q, 1.0);
        }
    }
    let residual = (v - &projected).norm();
    if residual > cfg.psd_tol * v.norm() {
        return Err(Error::NotInRange { residual });
    }
    Ok(form)
}

/// Upper shift `S` with ones on the superdiagonal.
pub fn shift_matrix(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

/// Last standard basis vector `g`.
pub fn last_basis_vector(n: usize) -> Vector {
    let mut g = Vector::zeros(n);
    g[n - 1] = 1.0;
    g
}

/// Companion matrix `S + g hᵀ`.
pub fn companion_matrix(h: &Vector) -> Matrix {
    let n = h.len();
    let mut m = shift_matrix(n);
    for j in 0..n {
        m[(n - 1, j)] += h[j];
    }
    m
}

/// Projector `Π = I − g gᵀ` onto the complement of the last coordinate.
pub fn last_coordinate_projector(n: usize) -> Matrix {
    let mut p = Matrix::identity(n, n);
    p[(n - 1, n - 1)] = 0.0;
    p
}

/// Unit vector whose first entry above `tol` in magnitude is positive.
pub(crate) fn normalize_sign(mut v: Vector, tol: f64) -> Vector {
    let norm = v.norm();
    if norm > 0.0 {
        v /= norm;
    }
    if let Some(first) = v.iter().find(|x| x.abs() > tol) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// Thin singular value decomposition `M = U diag(s) Vᵀ`, `s` decreasing.
///
/// Backed by faer: nalgebra's SVD returns inaccurate factors for some
/// rank-deficient inputs, which is exactly where this crate needs them.
#[derive(Debug, Clone)]
pub(crate) struct Svd {
    pub u: Matrix,
    pub s: Vector,
    pub v: Matrix,
}

impl Svd {
    pub(crate) fn new(m: &Matrix) -> Option<Self> {
        let (r, c) = m.shape();
        let f = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)]);
        let svd = f.thin_svd().ok()?;
        let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
        let k = r.min(c);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
        Some(Self {
            u: Matrix::from_fn(r, k, |i, j| u[(i, order[j])]),
            s: Vector::from_fn(k, |i, _| s[order[i]]),
            v: Matrix::from_fn(c, k, |i, j| v[(i, order[j])]),
        })
    }

    /// Minimum-norm least-squares solution of `M X = rhs`, ignoring singular
    /// values at or below `floor`.
    pub(crate) fn solve(&self, rhs: &Matrix, floor: f64) -> Matrix {
        let mut c = self.u.transpose() * rhs;
        for (i, &sigma) in self.s.iter().enumerate() {
            let scale = if sigma > floor { 1.0 / sigma } else { 0.0 };
            c.row_mut(i).scale_mut(scale);
        }
        &self.v * c
    }

    pub(crate) fn solve_vector(&self, rhs: &Vector, floor: f64) -> Vector {
        let x = self.solve(
            &Matrix::from_column_slice(rhs.len(), 1, rhs.as_slice()),
            floor,
        );
        x.column(0).into_owned()
    }

    pub(crate) fn smallest(&self) -> f64 {
        self.s.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Condition number in the 2-norm, `inf` for singular input.
pub(crate) fn condition_number(m: &Matrix) -> f64 {
    let Some(svd) = Svd::new(m) else {
        return f64::INFINITY;
    };
    let min = svd.smallest();
    if min == 0.0 {
        f64::INFINITY
    } else {
        svd.s[0] / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn m2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    #[test]
    fn svd_reconstructs_rank_deficient_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=7 {
            for _ in 0..300 {
                let mut m = Matrix::zeros(n, n);
                for _ in 0..2 {
                    let d = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                    let e = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                    m += d * e.transpose();
                }
                let svd = Svd::new(&m).unwrap();
                let r = &svd.u * Matrix::from_diagonal(&svd.s) * svd.v.transpose();
                assert!((r - &m).norm() <= 1e-13 * m.norm());
                assert!(svd.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
                assert!(svd.s[2.min(n - 1)] <= 1e-14 * svd.s[0] || n == 2);
            }
        }
    }

    #[test]
    fn svd_solve_is_least_squares() {
        let m = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let rhs = Vector::from_vec(vec![1.0, 2.0, 0.0]);
        let x = Svd::new(&m).unwrap().solve_vector(&rhs, 1e-14);
        let normal = m.transpose() * (&m * &x - &rhs);
        assert!(normal.norm() <= 1e-14);
    }

    #[test]
    fn eigenvalues_of_negative_identity() {
        let s = eigenvalues(&(-Matrix::identity(2, 2)), &cfg()).unwrap();
        assert_eq!(s.real_negative, vec![-1.0, -1.0]);
    }

    #[test]
    fn eigenvalues_of_swap() {
        let s = eigenvalues(&m2(0.0, 1.0, 1.0, 0.0), &cfg()).unwrap();
        assert_relative_eq!(s.values[0].re, -1.0, epsilon = 1e-14);
        assert_relative_eq!(s.values[1].re, 1.0, epsilon = 1e-14);
        assert_eq!(s.real_negative.len(), 1);
    }

    #[test]
    fn eigenvalues_from_characteristic_polynomial() {
        // λ² − 3λ + 2
        let s = eigenvalues(&m2(-2.0, -3.0, 4.0, 5.0), &cfg()).unwrap();
        assert_relative_eq!(s.values[0].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.values[1].re, 2.0, epsilon = 1e-12);
        assert!(s.real_negative.is_empty());
    }

    #[test]
    fn eigenvalue_errors() {
        let rect = Matrix::zeros(2, 3);
        assert!(matches!(
            eigenvalues(&rect, &cfg()),
            Err(Error::NotSquare { .. })
        ));
        let mut m = Matrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(eigenvalues(&m, &cfg()), Err(Error::NonFinite)));
    }

    #[test]
    fn stability_examples() {
        assert!(is_stable(&(-Matrix::identity(2, 2)), &cfg()).unwrap());
        assert!(is_stable(&m2(0.0, 1.0, -1.0, -2.0), &cfg()).unwrap());
        assert!(!is_stable(&m2(0.0, 1.0, 1.0, 0.0), &cfg()).unwrap());
    }

    #[test]
    fn lyapunov_examples() {
        let p = solve_lyapunov(
            &(-Matrix::identity(2, 2)),
            &(Matrix::identity(2, 2) * 2.0),
            &cfg(),
        )
        .unwrap();
        assert_relative_eq!(p, Matrix::identity(2, 2), epsilon = 1e-14);

        let a = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, -2.0]));
        let p = solve_lyapunov(&a, &Matrix::identity(2, 2), &cfg()).unwrap();
        assert_relative_eq!(p[(0, 0)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(p[(1, 1)], 0.25, epsilon = 1e-14);
        assert_relative_eq!(p[(0, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let r = solve_lyapunov(&m2(0.0, 1.0, 1.0, 0.0), &Matrix::identity(2, 2), &cfg());
        assert!(matches!(r, Err(Error::NotStable { .. })));
    }

    #[test]
    fn lyapunov_residual_on_random_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 4;
            let mut a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let shift = eigenvalues(&a, &cfg()).unwrap().max_real_part() + 0.5;
            for i in 0..n {
                a[(i, i)] -= shift;
            }
            let q = Matrix::identity(n, n);
            let p = solve_lyapunov(&a, &q, &cfg()).unwrap();
            assert!(lyapunov_residual(&a, &p, &q) <= 1e-10 * q.norm());
            assert!((&p - p.transpose()).norm() <= 1e-12);
        }
    }

    #[test]
    fn psd_examples() {
        let r = psd_check(&Matrix::identity(3, 3), &cfg()).unwrap();
        assert_eq!((r.is_psd, r.rank), (true, 3));
        let mut e1 = Matrix::zeros(3, 3);
        e1[(0, 0)] = 1.0;
        let r = psd_check(&e1, &cfg()).unwrap();
        assert_eq!((r.is_psd, r.rank), (true, 1));
        let r = psd_check(&m2(1.0, 0.0, 0.0, -1.0), &cfg()).unwrap();
        assert_eq!((r.is_psd, r.rank), (false, 2));
        assert!(matches!(
            psd_check(&m2(1.0, 1.0, 0.0, 1.0), &cfg()),
            Err(Error::Asymmetric { .. })
        ));
    }

    #[test]
    fn pinv_quadratic_form_examples() {
        let v = Vector::from_vec(vec![3.0, 4.0]);
        let q = quadratic_form_pinv(&Matrix::identity(2, 2), &v, &cfg()).unwrap();
        assert_relative_eq!(q, 25.0, epsilon = 1e-12);

        let z = m2(2.0, 0.0, 0.0, 0.0);
        let q = quadratic_form_pinv(&z, &Vector::from_vec(vec![4.0, 0.0]), &cfg()).unwrap();
        assert_relative_eq!(q, 8.0, epsilon = 1e-12);

        let out = quadratic_form_pinv(&z, &Vector::from_vec(vec![4.0, 1.0]), &cfg());
        assert!(matches!(out, Err(Error::NotInRange { .. })));
    }

    #[test]
    fn companion_helpers() {
        let h = Vector::from_vec(vec![-1.0, -2.0]);
        assert_eq!(companion_matrix(&h), m2(0.0, 1.0, -1.0, -2.0));
        assert_eq!(last_basis_vector(3), Vector::from_vec(vec![0.0, 0.0, 1.0]));
        let pi = last_coordinate_projector(2);
        assert_eq!(pi, m2(1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn tolerance_validation() {
        assert!(cfg().validate().is_ok());
        let mut bad = cfg();
        bad.scan_points = 4;
        assert!(bad.validate().is_err());
        bad = cfg();
        bad.psd_tol = 0.0;
        assert!(bad.validate().is_err());
        let scaled = ToleranceConfig::with_residual_tol(1e-6);
        assert_relative_eq!(scaled.eig_tol / scaled.residual_tol, 100.0);
    }
}
