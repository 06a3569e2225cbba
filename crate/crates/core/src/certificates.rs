//! Certificates for both verdicts and their independent verifiers.
//!
//! * A CQLF is a symmetric `P ≻ 0` with `PA + AᵀP ≺ 0` and `PB + BᵀP ≺ 0`.
//! * An infeasibility witness is a pair of nonzero vectors with
//!   `Avvᵀ + vvᵀAᵀ + Bwwᵀ + wwᵀBᵀ = 0`. If `ABw = λw` with `λ = −α⁻² < 0`
//!   then `v = αBw` gives `Avvᵀ = α²ABw(Bw)ᵀ = −w(Bw)ᵀ` and the equation
//!   collapses identically.
//!
//! Witnesses are not canonical: any vector in the eigenspace works.

use nalgebra::{Cholesky, SymmetricEigen};

use crate::error::{Error, Result};
use crate::numerics::{
    check_square, check_symmetric, check_vector, eigenvalues, normalize_sign, psd_check,
    solve_lyapunov, sym_eigen, symmetrize, Matrix, Svd, ToleranceConfig, Vector,
};
use crate::pair_model::RankOnePair;

pub const CQLF_ITERATION_BUDGET: usize = 10_000;

/// Extreme eigenvalues defining the CQLF inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CqlfMargins {
    /// `λmin(P)`.
    pub margin_p: f64,
    /// `λmax(PA + AᵀP)`.
    pub margin_a: f64,
    /// `λmax(PB + BᵀP)`.
    pub margin_b: f64,
    /// All three inequalities hold beyond tolerance.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CqlfCertificate {
    pub p: Matrix,
    pub margins: CqlfMargins,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityWitness {
    pub v: Vector,
    pub w: Vector,
    pub alpha: f64,
    pub lambda: f64,
    /// Normalized residual, as returned by [`verify_witness`].
    pub residual: f64,
    /// `‖(AB − λ)w‖ / (‖AB‖‖w‖)`.
    pub eigen_residual: f64,
}

/// Frobenius residual of `Avvᵀ + vvᵀAᵀ + Bwwᵀ + wwᵀBᵀ`, normalized by
/// `‖A‖‖v‖² + ‖B‖‖w‖²`.
pub fn verify_witness(
    a: &Matrix,
    b: &Matrix,
    v: &Vector,
    w: &Vector,
    cfg: &ToleranceConfig,
) -> Result<f64> {
    cfg.validate()?;
    let n = check_square(a)?;
    let nb = check_square(b)?;
    if nb != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: nb,
        });
    }
    check_vector(v, n)?;
    check_vector(w, n)?;
    if v.norm() == 0.0 || w.norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    let av = a * v;
    let bw = b * w;
    let m = &av * v.transpose() + v * av.transpose() + &bw * w.transpose() + w * bw.transpose();
    let scale = a.norm() * v.norm_squared() + b.norm() * w.norm_squared();
    Ok(m.norm() / scale)
}

/// Normalized residual of `AX + XAᵀ + BY + YBᵀ = 0` for PSD `X`, `Y`.
pub fn verify_pair_solution(
    a: &Matrix,
    b: &Matrix,
    x: &Matrix,
    y: &Matrix,
    cfg: &ToleranceConfig,
) -> Result<f64> {
    cfg.validate()?;
    let n = check_square(a)?;
    for m in [b, x, y] {
        let k = check_square(m)?;
        if k != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: k,
            });
        }
    }
    if x.norm() == 0.0 && y.norm() == 0.0 {
        return Err(Error::BothZero);
    }
    for m in [x, y] {
        if m.norm() > 0.0 {
            let report = psd_check(m, cfg)?;
            if !report.is_psd {
                return Err(Error::NotPsd {
                    min_eigenvalue: report.min_eigenvalue,
                });
            }
        }
    }
    let ax = a * x;
    let by = b * y;
    let m = &ax + ax.transpose() + &by + by.transpose();
    Ok(m.norm() / (a.norm() * x.norm() + b.norm() * y.norm()))
}

/// Extreme eigenvalues of `P`, `PA + AᵀP`, `PB + BᵀP`, with acceptance
/// requiring margins beyond `residual_tol` relative to `‖P‖` and `‖P‖‖A‖`
/// and successful Cholesky factorizations of `P`, `−(PA + AᵀP)` and
/// `−(PB + BᵀP)`.
pub fn verify_cqlf(
    a: &Matrix,
    b: &Matrix,
    p: &Matrix,
    cfg: &ToleranceConfig,
) -> Result<CqlfMargins> {
    cfg.validate()?;
    let n = check_square(a)?;
    for m in [b, p] {
        let k = check_square(m)?;
        if k != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: k,
            });
        }
    }
    check_symmetric(p, cfg.psd_tol)?;
    let p = symmetrize(p);
    let la = &p * a + a.transpose() * &p;
    let lb = &p * b + b.transpose() * &p;
    let min_eig = |m: &Matrix| SymmetricEigen::new(m.clone()).eigenvalues.min();
    let max_eig = |m: &Matrix| SymmetricEigen::new(m.clone()).eigenvalues.max();
    let margin_p = min_eig(&p);
    let margin_a = max_eig(&la);
    let margin_b = max_eig(&lb);
    let pn = p.norm();
    let factors = Cholesky::new(p.clone()).is_some()
        && Cholesky::new(-&la).is_some()
        && Cholesky::new(-&lb).is_some();
    let accepted = factors
        && margin_p > cfg.residual_tol * pn
        && margin_a < -cfg.residual_tol * pn * a.norm()
        && margin_b < -cfg.residual_tol * pn * b.norm();
    Ok(CqlfMargins {
        margin_p,
        margin_a,
        margin_b,
        accepted,
    })
}

/// Builds a witness from a real negative eigenvalue of `AB`.
///
/// Eigenvalues are clustered so that a defective eigenvalue split by
/// rounding (the two computed copies of a Jordan block) is treated as one;
/// the eigenvector is the smallest right singular vector of `AB − λ̄I`,
/// polished by inverse iteration, and `λ` is then re-estimated by the
/// Rayleigh quotient so that residuals are consistent. Every cluster is
/// tried and the best witness kept.
pub fn construct_witness(
    pair: &RankOnePair,
    cfg: &ToleranceConfig,
) -> Result<InfeasibilityWitness> {
    let a = pair.a();
    let b = pair.b();
    let ab = a * b;
    let n = pair.dim();
    let spectrum = eigenvalues(&ab, cfg)?;
    if spectrum.real_negative.is_empty() {
        return Err(Error::WrongBranch("AB has no real negative eigenvalue"));
    }

    let abn = ab.norm();
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for &l in &spectrum.real_negative {
        match clusters.last_mut() {
            Some(c) if (l - c[c.len() - 1]).abs() <= 1e-6 * (1.0 + l.abs()) => c.push(l),
            _ => clusters.push(vec![l]),
        }
    }

    let mut best: Option<InfeasibilityWitness> = None;
    for cluster in clusters {
        let mean = cluster.iter().sum::<f64>() / cluster.len() as f64;
        let shifted = &ab - Matrix::identity(n, n) * mean;
        let svd = Svd::new(&shifted).ok_or(Error::EigenFailed)?;
        let mut w: Vector = svd.v.column(n - 1).into_owned();
        let eigen_residual = |w: &Vector| -> (f64, f64) {
            let lambda = w.dot(&(&ab * w)) / w.norm_squared();
            let r = (&ab * w - w * lambda).norm() / (abn * w.norm());
            (lambda, r)
        };
        let (mut lambda, mut res) = eigen_residual(&w);
        let lu = shifted.lu();
        for _ in 0..3 {
            let Some(next) = lu.solve(&w) else { break };
            let next = &next / next.norm();
            let (l2, r2) = eigen_residual(&next);
            if !(r2 < res) {
                break;
            }
            w = next;
            lambda = l2;
            res = r2;
        }
        if !(lambda < 0.0) {
            continue;
        }
        let w = normalize_sign(w, cfg.psd_tol);
        let alpha = (-lambda).powf(-0.5);
        let v = (b * &w) * alpha;
        let residual = verify_witness(a, b, &v, &w, cfg)?;
        let cand = InfeasibilityWitness {
            v,
            w,
            alpha,
            lambda,
            residual,
            eigen_residual: res,
        };
        if best.as_ref().is_none_or(|b| cand.residual < b.residual) {
            best = Some(cand);
        }
    }
    match best {
        Some(w) if w.residual <= cfg.residual_tol && w.eigen_residual <= cfg.residual_tol => Ok(w),
        Some(w) => Err(Error::DefectiveEigenvector {
            residual: w.residual.max(w.eigen_residual),
        }),
        None => Err(Error::DefectiveEigenvector {
            residual: f64::INFINITY,
        }),
    }
}

/// Smoothed maximum `μ log Σ exp(λ/μ)` over the eigenvalues of
/// `L_A(P) = PA + AᵀP` and `L_B(P)`, with its gradient in `P`.
struct Smoothed<'a> {
    a: &'a Matrix,
    b: &'a Matrix,
}

struct Evaluation {
    value: f64,
    max_eig: f64,
    grad: Matrix,
}

impl Smoothed<'_> {
    fn lyap(m: &Matrix, p: &Matrix) -> Matrix {
        symmetrize(&(p * m + m.transpose() * p))
    }

    fn eval(&self, p: &Matrix, mu: f64) -> Evaluation {
        let (va, qa) = sym_eigen(&Self::lyap(self.a, p));
        let (vb, qb) = sym_eigen(&Self::lyap(self.b, p));
        let top = va[va.len() - 1].max(vb[vb.len() - 1]);
        let wa: Vec<f64> = va.iter().map(|l| ((l - top) / mu).exp()).collect();
        let wb: Vec<f64> = vb.iter().map(|l| ((l - top) / mu).exp()).collect();
        let total: f64 = wa.iter().sum::<f64>() + wb.iter().sum::<f64>();
        let n = p.nrows();
        let dual = |q: &Matrix, w: &[f64]| {
            let mut g = Matrix::zeros(n, n);
            for (j, wj) in w.iter().enumerate() {
                if *wj > 1e-300 {
                    let c = q.column(j);
                    g += (c * c.transpose()) * (wj / total);
                }
            }
            g
        };
        let ga = dual(&qa, &wa);
        let gb = dual(&qb, &wb);
        // Adjoint of P ↦ PM + MᵀP is G ↦ MG + GMᵀ.
        let grad = symmetrize(
            &(self.a * &ga + &ga * self.a.transpose() + self.b * &gb + &gb * self.b.transpose()),
        );
        Evaluation {
            value: top + mu * total.ln(),
            max_eig: top,
            grad,
        }
    }
}

/// Euclidean projection onto `{P : Tr P = n, P ⪰ εI}`.
fn project(p: &Matrix, eps: f64) -> Matrix {
    let n = p.nrows();
    let (vals, vecs) = sym_eigen(p);
    let target = n as f64;
    // Find θ with Σ max(λᵢ − θ, ε) = n.
    let f = |theta: f64| vals.iter().map(|l| (l - theta).max(eps)).sum::<f64>() - target;
    let mut lo = vals[0] - target - 1.0;
    let mut hi = vals[n - 1];
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let d = Vector::from_iterator(n, vals.iter().map(|l| (l - theta).max(eps)));
    symmetrize(&(&vecs * Matrix::from_diagonal(&d) * vecs.transpose()))
}

/// Matrix sign function by the Newton iteration, with determinant scaling
/// until the iterates settle. Converged once the change is at rounding
/// level or stops shrinking after becoming small.
fn matrix_sign(h: &Matrix) -> Option<Matrix> {
    let m = h.nrows() as f64;
    let mut z = h.clone();
    let mut last = f64::INFINITY;
    for _ in 0..100 {
        let c = if last > 1e-2 * z.norm() {
            let det = z.determinant().abs();
            if !(det.is_finite() && det > 0.0) {
                return None;
            }
            det.powf(-1.0 / m)
        } else {
            1.0
        };
        let inv = z.clone().lu().try_inverse()?;
        let next = (&z * c + inv / c) * 0.5;
        let change = (&next - &z).norm();
        z = next;
        let scale = z.norm();
        if !scale.is_finite() {
            return None;
        }
        if change <= 1e-13 * scale || (change <= 1e-8 * scale && change >= last) {
            return Some(z);
        }
        last = change;
    }
    None
}

/// Candidate from the positive-real Riccati equation
///
/// ```text
/// PA + AᵀP + δI + ½(e − Pd)(e − Pd)ᵀ = 0.
/// ```
///
/// For stable `A` any symmetric solution is positive definite, and for
/// every `t ∈ [0, 1]`, with `f = e − Pd`,
/// `P(A − t deᵀ) + (A − t deᵀ)ᵀP = −δI − ½(f − 2t e)(f − 2t e)ᵀ − 2t(1 − t) eeᵀ`,
/// so it is a CQLF for the whole segment with margin at least `δ`. A
/// solution exists for small `δ` exactly when the circle criterion holds
/// strictly. It is read off the stable invariant subspace of the
/// Hamiltonian matrix, found with the matrix sign function.
fn riccati_candidate(a: &Matrix, d: &Vector, e: &Vector, delta: f64) -> Option<Matrix> {
    let n = a.nrows();
    let ah = a - d * e.transpose() * 0.5;
    let r = d * d.transpose() * 0.5;
    let q = e * e.transpose() * 0.5 + Matrix::identity(n, n) * delta;
    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&ah);
    h.view_mut((0, n), (n, n)).copy_from(&r);
    h.view_mut((n, 0), (n, n)).copy_from(&(-&q));
    h.view_mut((n, n), (n, n)).copy_from(&(-ah.transpose()));
    let w = matrix_sign(&h)?;
    // [W₁₂; W₂₂ + I] P = −[W₁₁ + I; W₂₁].
    let mut lhs = Matrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n))
        .copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(w.view((n, n), (n, n)) + Matrix::identity(n, n)));
    let mut rhs = Matrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(w.view((0, 0), (n, n)) + Matrix::identity(n, n))));
    rhs.view_mut((n, 0), (n, n))
        .copy_from(&(-w.view((n, 0), (n, n))));
    let mut p = symmetrize(&Svd::new(&lhs)?.solve(&rhs, 1e-14));
    if !p.iter().all(|x| x.is_finite()) {
        return None;
    }
    // Newton steps: (Â + RP)ᵀΔ + Δ(Â + RP) = −(ÂᵀP + PÂ + PRP + Q).
    let cfg = ToleranceConfig::default();
    let residual = |p: &Matrix| symmetrize(&(ah.transpose() * p + p * &ah + p * &r * p + &q));
    let mut res = residual(&p);
    for _ in 0..8 {
        let closed = &ah + &r * &p;
        let Ok(step) = solve_lyapunov(&closed, &res, &cfg) else {
            break;
        };
        let next = &p + step;
        let next_res = residual(&next);
        if !(next_res.norm() < res.norm()) {
            break;
        }
        p = next;
        res = next_res;
    }
    Some(p)
}

/// Searches for a CQLF.
///
/// `P = I` is tried first, then solutions of the positive-real Riccati
/// equation for decreasing margins. As a fallback, starting from
/// `P_A + P_B` where `P_M` solves `P_M M + MᵀP_M = −I`, the smoothed
/// maximum eigenvalue of
/// `PA + AᵀP` and `PB + BᵀP` is minimized by projected gradient descent with
/// backtracking over `{Tr P = n, P ⪰ εI}` on the pair scaled to unit norm,
/// decreasing the smoothing parameter as progress stalls.
pub fn construct_cqlf(pair: &RankOnePair, cfg: &ToleranceConfig) -> Result<CqlfCertificate> {
    let report = crate::decision::spectral_test(pair, cfg)?;
    if !report.has_cqlf {
        return Err(Error::WrongBranch("AB has a real negative eigenvalue"));
    }
    let a = pair.a();
    let b = pair.b();
    let n = pair.dim();

    let identity = Matrix::identity(n, n);
    let m = verify_cqlf(a, b, &identity, cfg)?;
    if m.accepted {
        return Ok(CqlfCertificate {
            p: identity,
            margins: m,
            iterations: 0,
        });
    }

    let scale = a.norm().max(b.norm());
    let an = a / scale;
    let en = pair.e() / scale;
    for delta in [
        0.1, 3e-2, 1e-2, 3e-3, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10,
    ] {
        if let Some(q) = riccati_candidate(&an, pair.d(), &en, delta) {
            let m = verify_cqlf(a, b, &q, cfg)?;
            if m.accepted {
                return Ok(CqlfCertificate {
                    p: q,
                    margins: m,
                    iterations: 0,
                });
            }
        }
    }
    gradient_search(a, b, cfg)
}

/// Projected gradient descent on the smoothed maximum eigenvalue, started
/// from `P_A + P_B`.
fn gradient_search(a: &Matrix, b: &Matrix, cfg: &ToleranceConfig) -> Result<CqlfCertificate> {
    let n = a.nrows();
    let identity = Matrix::identity(n, n);
    let scale = a.norm().max(b.norm());
    let an = a / scale;
    let bn = b / scale;
    let eps = 10.0 * cfg.residual_tol * n as f64;
    let p0 = solve_lyapunov(&an, &identity, cfg)? + solve_lyapunov(&bn, &identity, cfg)?;
    let mut p = project(&(&p0 * (n as f64 / p0.trace())), eps);

    let accept = |p: &Matrix| -> Result<Option<CqlfCertificate>> {
        let m = verify_cqlf(a, b, p, cfg)?;
        Ok(m.accepted.then(|| CqlfCertificate {
            p: p.clone(),
            margins: m,
            iterations: 0,
        }))
    };
    if let Some(c) = accept(&p)? {
        return Ok(c);
    }

    let objective = Smoothed { a: &an, b: &bn };
    let target = -1e-3;
    let mut mu = 0.05;
    let mut step = 1.0;
    let mut current = objective.eval(&p, mu);
    let mut best = (current.max_eig, p.clone());
    let mut iterations = 0;
    while iterations < CQLF_ITERATION_BUDGET {
        iterations += 1;
        let mut moved = false;
        for _ in 0..40 {
            let trial = project(&(&p - &current.grad * step), eps);
            let delta = &trial - &p;
            let next = objective.eval(&trial, mu);
            let bound =
                current.value + current.grad.dot(&delta) + delta.norm_squared() / (2.0 * step);
            if next.value <= bound {
                moved = delta.norm() > 1e-14 * p.norm();
                p = trial;
                current = next;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if current.max_eig < best.0 {
            best = (current.max_eig, p.clone());
        }
        if best.0 < target {
            break;
        }
        // Shrink the smoothing once it dominates the objective or stalls it.
        if !moved || mu * (2.0 * n as f64).ln() > 0.25 * current.max_eig.abs() {
            if mu > 1e-12 {
                mu *= 0.5;
                current = objective.eval(&p, mu);
                step = step.max(1e-6);
            } else if !moved {
                break;
            }
        }
    }
    match accept(&best.1)? {
        Some(mut c) => {
            c.iterations = iterations;
            Ok(c)
        }
        None => Err(Error::CertificateSearchFailed {
            iterations,
            best_objective: best.0 * scale,
        }),
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

    fn golden_no() -> RankOnePair {
        RankOnePair::new(m2(0.0, 1.0, -1.0, -2.0), m2(0.0, 1.0, -9.0, -2.0), &cfg()).unwrap()
    }

    fn golden_yes() -> RankOnePair {
        RankOnePair::new(m2(0.0, 1.0, -1.0, -2.0), m2(0.0, 1.0, -2.0, -3.0), &cfg()).unwrap()
    }

    fn parallel(x: &Vector, y: &Vector) -> f64 {
        1.0 - (x.dot(y) / (x.norm() * y.norm())).abs()
    }

    #[test]
    fn golden_witness() {
        let pair = golden_no();
        let w = construct_witness(&pair, &cfg()).unwrap();
        assert_relative_eq!(w.lambda, -3.0, epsilon = 1e-8);
        assert_relative_eq!(w.alpha, 3f64.powf(-0.5), epsilon = 1e-6);
        assert!(parallel(&w.w, &Vector::from_vec(vec![1.0, -3.0])) < 1e-10);
        assert!(parallel(&w.v, &Vector::from_vec(vec![1.0, 1.0])) < 1e-10);
        assert!(w.residual <= 1e-10);
        assert_relative_eq!(w.w.norm(), 1.0, epsilon = 1e-14);
        assert!(w.w[0] > 0.0);
    }

    #[test]
    fn witness_on_wrong_branch() {
        assert!(matches!(
            construct_witness(&golden_yes(), &cfg()),
            Err(Error::WrongBranch(_))
        ));
    }

    #[test]
    fn witness_directions_are_scale_invariant() {
        let pair = golden_no();
        let w1 = construct_witness(&pair, &cfg()).unwrap();
        let w2 = construct_witness(&pair.scaled(3.5).unwrap(), &cfg()).unwrap();
        assert!(parallel(&w1.w, &w2.w) < 1e-8);
        assert!(parallel(&w1.v, &w2.v) < 1e-8);
    }

    #[test]
    fn verify_witness_examples() {
        let a = -Matrix::identity(2, 2);
        let e1 = Vector::from_vec(vec![1.0, 0.0]);
        let r = verify_witness(&a, &a, &e1, &e1, &cfg()).unwrap();
        // ‖−4 e₁e₁ᵀ‖ / (‖I‖ + ‖I‖) with Frobenius norms √2.
        assert_relative_eq!(r, 4.0 / (2.0 * 2f64.sqrt()), epsilon = 1e-14);
        assert!(matches!(
            verify_witness(&a, &a, &Vector::zeros(2), &e1, &cfg()),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn perturbed_witness_is_rejected() {
        let pair = golden_no();
        let w = construct_witness(&pair, &cfg()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Vector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let w2 = &w.w + noise * 0.1;
        let r = verify_witness(pair.a(), pair.b(), &w.v, &w2, &cfg()).unwrap();
        assert!(r > 10.0 * cfg().residual_tol);
    }

    #[test]
    fn pair_solution_examples() {
        let pair = golden_no();
        let w = construct_witness(&pair, &cfg()).unwrap();
        let x = &w.v * w.v.transpose();
        let y = &w.w * w.w.transpose();
        assert!(verify_pair_solution(pair.a(), pair.b(), &x, &y, &cfg()).unwrap() <= 1e-10);
        let z = Matrix::zeros(2, 2);
        assert!(matches!(
            verify_pair_solution(pair.a(), pair.b(), &z, &z, &cfg()),
            Err(Error::BothZero)
        ));
        let bad = m2(1.0, 0.0, 0.0, -1.0);
        assert!(matches!(
            verify_pair_solution(pair.a(), pair.b(), &bad, &y, &cfg()),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn random_psd_pairs_do_not_solve_cqlf_pair() {
        let pair = golden_yes();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut min = f64::INFINITY;
        for _ in 0..100 {
            let g = Matrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
            let h = Matrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
            let x = &g * g.transpose();
            let y = &h * h.transpose();
            min = min.min(verify_pair_solution(pair.a(), pair.b(), &x, &y, &cfg()).unwrap());
        }
        assert!(min > 1e-3, "observed minimum {min}");
    }

    #[test]
    fn verify_cqlf_examples() {
        let a = -Matrix::identity(2, 2);
        let m = verify_cqlf(&a, &a, &Matrix::identity(2, 2), &cfg()).unwrap();
        assert_relative_eq!(m.margin_p, 1.0);
        assert_relative_eq!(m.margin_a, -2.0);
        assert_relative_eq!(m.margin_b, -2.0);
        assert!(m.accepted);
        let m = verify_cqlf(&a, &a, &Matrix::zeros(2, 2), &cfg()).unwrap();
        assert_eq!(m.margin_p, 0.0);
        assert!(!m.accepted);
        let asym = m2(1.0, 0.5, 0.0, 1.0);
        assert!(matches!(
            verify_cqlf(&a, &a, &asym, &cfg()),
            Err(Error::Asymmetric { .. })
        ));
    }

    #[test]
    fn identity_certifies_dissipative_pair() {
        let a = -Matrix::identity(2, 2);
        let pair = RankOnePair::from_factors(
            a,
            Vector::from_vec(vec![1.0, 0.0]),
            Vector::from_vec(vec![0.1, 0.05]),
            &cfg(),
        )
        .unwrap();
        let c = construct_cqlf(&pair, &cfg()).unwrap();
        assert_eq!(c.p, Matrix::identity(2, 2));
        assert_eq!(c.iterations, 0);
    }

    #[test]
    fn golden_cqlf() {
        let pair = golden_yes();
        let c = construct_cqlf(&pair, &cfg()).unwrap();
        let m = verify_cqlf(pair.a(), pair.b(), &c.p, &cfg()).unwrap();
        assert!(m.accepted);
        assert!(m.margin_a < -1e-6 && m.margin_b < -1e-6);
        assert!(matches!(
            construct_cqlf(&golden_no(), &cfg()),
            Err(Error::WrongBranch(_))
        ));
    }
    #[test]
    fn matrix_sign_of_diagonal() {
        let h = Matrix::from_diagonal(&Vector::from_vec(vec![-2.0, 3.0, 0.5]));
        let s = matrix_sign(&h).unwrap();
        let expect = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 1.0, 1.0]));
        assert!((s - expect).norm() < 1e-12);
    }

    #[test]
    fn riccati_candidate_covers_the_segment() {
        let pair = golden_yes();
        let p = riccati_candidate(pair.a(), pair.d(), pair.e(), 1e-2).unwrap();
        for j in 0..=10 {
            let t = j as f64 / 10.0;
            let bt = pair.a() - pair.d() * pair.e().transpose() * t;
            let m = verify_cqlf(pair.a(), &bt, &p, &cfg()).unwrap();
            assert!(m.accepted, "t = {t}: {m:?}");
            assert!(m.margin_b <= -1e-2 * (1.0 - 1e-9));
        }
    }

    #[test]
    fn riccati_candidate_fails_without_cqlf() {
        let pair = golden_no();
        for delta in [1e-2, 1e-4, 1e-8] {
            if let Some(p) = riccati_candidate(pair.a(), pair.d(), pair.e(), delta) {
                assert!(
                    !verify_cqlf(pair.a(), pair.b(), &p, &cfg())
                        .unwrap()
                        .accepted
                );
            }
        }
    }

    #[test]
    fn gradient_search_certifies_golden_pair() {
        let pair = golden_yes();
        let c = gradient_search(pair.a(), pair.b(), &cfg()).unwrap();
        assert!(
            verify_cqlf(pair.a(), pair.b(), &c.p, &cfg())
                .unwrap()
                .accepted
        );
    }
}
