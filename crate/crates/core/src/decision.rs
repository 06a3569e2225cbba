//! Deciding whether a CQLF exists.
//!
//! The authoritative test is spectral: a CQLF exists iff `AB` has no real
//! negative eigenvalue. The frequency-domain circle criterion
//! `1 + Re eᵀ(iω − A)⁻¹d > 0` is evaluated independently as a cross-check.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{eigenvalues, Matrix, Spectrum, ToleranceConfig};
use crate::pair_model::{reduce_to_controllable, RankOnePair};

/// Verdict with supporting data from both routes.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionReport {
    pub has_cqlf: bool,
    pub ab_spectrum: Spectrum,
    pub negative_real_eigs: Vec<f64>,
    /// Minimum of the circle-criterion function; `None` when not scanned.
    pub circle_min: Option<f64>,
    /// Sign of `circle_min` agrees with the verdict, or `|circle_min|` lies
    /// in the boundary band `10 · residual_tol`.
    pub methods_agree: Option<bool>,
    /// An eigenvalue of `AB` sits within `10 · eig_tol` of the negative
    /// real axis without being exactly real.
    pub marginal: bool,
    pub dim: usize,
    /// Dimension of the controllable subspace of `(A, d)`.
    pub reduced_dim: usize,
}

impl DecisionReport {
    /// `|circle_min| < 10 · residual_tol`.
    pub fn in_boundary_band(&self, cfg: &ToleranceConfig) -> bool {
        self.circle_min
            .is_some_and(|m| m.abs() < 10.0 * cfg.residual_tol)
    }
}

fn is_marginal(spectrum: &Spectrum, cfg: &ToleranceConfig) -> bool {
    spectrum.values.iter().any(|z| {
        let scale = 1.0 + z.norm();
        z.re < 0.0 && z.im != 0.0 && z.im.abs() <= 10.0 * cfg.eig_tol * scale
    })
}

pub fn spectral_test(pair: &RankOnePair, cfg: &ToleranceConfig) -> Result<DecisionReport> {
    let ab = pair.a() * pair.b();
    let spectrum = eigenvalues(&ab, cfg)?;
    let negative = spectrum.real_negative.clone();
    Ok(DecisionReport {
        has_cqlf: negative.is_empty(),
        marginal: is_marginal(&spectrum, cfg),
        ab_spectrum: spectrum,
        negative_real_eigs: negative,
        circle_min: None,
        methods_agree: None,
        dim: pair.dim(),
        reduced_dim: pair.dim(),
    })
}

/// Samples of `f(ω) = 1 + Re eᵀ(iω − A)⁻¹d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleScan {
    pub circle_min: f64,
    pub argmin: f64,
    /// Frequencies in increasing order, including `0`; the value at infinity
    /// is `1` and is not stored.
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

fn circle_value(pair: &RankOnePair, omega: f64) -> Result<f64> {
    let n = pair.dim();
    let a = pair.a();
    let m: DMatrix<Complex64> = DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { omega } else { 0.0 };
        Complex64::new(-a[(i, j)], diag)
    });
    let rhs = pair.d().map(|x| Complex64::new(x, 0.0));
    let x = m.lu().solve(&rhs).ok_or(Error::Singular)?;
    let e = pair.e();
    let dot: Complex64 = (0..n).map(|i| x[i] * e[i]).sum();
    Ok(1.0 + dot.re)
}

/// Golden-section minimization of `f` over `log ω` in `[lo, hi]`.
fn refine_min(pair: &RankOnePair, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = circle_value(pair, c.exp())?;
    let mut fd = circle_value(pair, d.exp())?;
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = circle_value(pair, c.exp())?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = circle_value(pair, d.exp())?;
        }
    }
    Ok(if fc < fd {
        (c.exp(), fc)
    } else {
        (d.exp(), fd)
    })
}

/// Scans the circle criterion on a logarithmic grid spanning
/// `[10⁻⁶, 10⁶] · ‖A‖_F` plus `ω = 0`, then refines every local minimum.
pub fn circle_criterion_scan(pair: &RankOnePair, cfg: &ToleranceConfig) -> Result<CircleScan> {
    let scale = pair.a().norm();
    let points = cfg.scan_points;
    let (lo, hi) = ((1e-6 * scale).ln(), (1e6 * scale).ln());
    let mut grid = Vec::with_capacity(points + 1);
    grid.push(0.0);
    for j in 0..points {
        grid.push((lo + (hi - lo) * j as f64 / (points - 1) as f64).exp());
    }
    let values = grid
        .iter()
        .map(|&w| circle_value(pair, w))
        .collect::<Result<Vec<f64>>>()?;

    // The value at infinity is 1.
    let (mut argmin, mut circle_min) = (f64::INFINITY, 1.0);
    for (w, v) in grid.iter().zip(&values) {
        if *v < circle_min {
            circle_min = *v;
            argmin = *w;
        }
    }
    for j in 1..grid.len() - 1 {
        if values[j] <= values[j - 1] && values[j] <= values[j + 1] && grid[j - 1] > 0.0 {
            let (w, v) = refine_min(pair, grid[j - 1], grid[j + 1])?;
            if v < circle_min {
                circle_min = v;
                argmin = w;
            }
        }
    }
    Ok(CircleScan {
        circle_min,
        argmin,
        grid,
        values,
    })
}

/// `det((1−x)A + xB)` and its distance from `det A · (1 − x Tr(A⁻¹(A − B)))`.
pub fn convex_combination_det(pair: &RankOnePair, x: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange {
            name: "x",
            value: x,
        });
    }
    let a = pair.a();
    let b = pair.b();
    let value = (a * (1.0 - x) + b * x).determinant();
    let det_a = a.determinant();
    let a_inv = a.clone().lu().try_inverse().ok_or(Error::Singular)?;
    let r: Matrix = a - b;
    let predicted = det_a * (1.0 - x * (a_inv * r).trace());
    Ok((value, (value - predicted).abs()))
}

/// Validates `(A, B)`, runs the spectral test on the pair and the circle
/// criterion as a cross-check, and records the controllable dimension.
pub fn decide(a: &Matrix, b: &Matrix, cfg: &ToleranceConfig) -> Result<DecisionReport> {
    let pair = RankOnePair::new(a.clone(), b.clone(), cfg)?;
    decide_pair(&pair)
}

pub fn decide_pair(pair: &RankOnePair) -> Result<DecisionReport> {
    let cfg = pair.cfg();
    let reduced = reduce_to_controllable(pair)?;
    let mut report = spectral_test(pair, cfg)?;
    report.reduced_dim = reduced.dim();
    let scan = circle_criterion_scan(pair, cfg)?;
    let band = scan.circle_min.abs() < 10.0 * cfg.residual_tol;
    report.methods_agree = Some(band || (scan.circle_min > 0.0) == report.has_cqlf);
    report.circle_min = Some(scan.circle_min);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Vector;
    use approx::assert_relative_eq;

    fn cfg() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn m2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    fn cqlf_pair() -> (Matrix, Matrix) {
        (m2(0.0, 1.0, -1.0, -2.0), m2(0.0, 1.0, -2.0, -3.0))
    }

    fn no_cqlf_pair() -> (Matrix, Matrix) {
        (m2(0.0, 1.0, -1.0, -2.0), m2(0.0, 1.0, -9.0, -2.0))
    }

    #[test]
    fn spectral_examples() {
        let (a, b) = cqlf_pair();
        let pair = RankOnePair::new(a, b, &cfg()).unwrap();
        let r = spectral_test(&pair, &cfg()).unwrap();
        assert!(r.has_cqlf);
        assert_relative_eq!(r.ab_spectrum.values[0].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.ab_spectrum.values[1].re, 2.0, epsilon = 1e-12);

        let (a, b) = no_cqlf_pair();
        let pair = RankOnePair::new(a, b, &cfg()).unwrap();
        let r = spectral_test(&pair, &cfg()).unwrap();
        assert!(!r.has_cqlf);
        assert_eq!(r.negative_real_eigs.len(), 2);
        for l in &r.negative_real_eigs {
            assert!((l + 3.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn nearly_equal_pair_has_cqlf() {
        let a = m2(-1.0, 0.3, 0.0, -2.0);
        let d = Vector::from_vec(vec![1.0, 0.0]);
        let e = Vector::from_vec(vec![1e-6, 1e-6]);
        let pair = RankOnePair::from_factors(a, d, e, &cfg()).unwrap();
        assert!(spectral_test(&pair, &cfg()).unwrap().has_cqlf);
    }

    #[test]
    fn circle_examples() {
        let (a, b) = cqlf_pair();
        let pair = RankOnePair::new(a, b, &cfg()).unwrap();
        let scan = circle_criterion_scan(&pair, &cfg()).unwrap();
        assert!(scan.circle_min > 0.0);
        // 1 + 1/(1 + ω²) decays to 1 at large ω.
        assert!((scan.values.last().unwrap() - 1.0).abs() < 1e-9);

        let (a, b) = no_cqlf_pair();
        let pair = RankOnePair::new(a, b, &cfg()).unwrap();
        let scan = circle_criterion_scan(&pair, &cfg()).unwrap();
        // f(ω) = 1 + 8(1 − ω²)/(1 + ω²)² touches zero at ω = √3.
        assert!(scan.circle_min <= 1e-12);
        assert_relative_eq!(scan.argmin, 3f64.sqrt(), epsilon = 1e-4);
    }

    #[test]
    fn vanishing_perturbation_gives_unit_circle_value() {
        let a = m2(0.0, 1.0, -1.0, -2.0);
        let pair = RankOnePair::from_factors(
            a,
            Vector::from_vec(vec![1.0, 0.0]),
            Vector::from_vec(vec![1e-13, 0.0]),
            &cfg(),
        )
        .unwrap();
        let scan = circle_criterion_scan(&pair, &cfg()).unwrap();
        assert_relative_eq!(scan.circle_min, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn determinant_identity() {
        let (a, b) = no_cqlf_pair();
        let pair = RankOnePair::new(a.clone(), b.clone(), &cfg()).unwrap();
        let (v0, r0) = convex_combination_det(&pair, 0.0).unwrap();
        assert_relative_eq!(v0, a.determinant(), epsilon = 1e-12);
        assert!(r0 <= 1e-12);
        let (v1, r1) = convex_combination_det(&pair, 1.0).unwrap();
        assert_relative_eq!(v1, b.determinant(), epsilon = 1e-12);
        assert!(r1 <= 1e-12 * a.determinant().abs());
        for j in 0..=100 {
            let (v, _) = convex_combination_det(&pair, j as f64 / 100.0).unwrap();
            assert!(v > 0.0);
        }
        assert!(convex_combination_det(&pair, 1.5).is_err());
    }

    #[test]
    fn decide_examples() {
        let (a, b) = cqlf_pair();
        let r = decide(&a, &b, &cfg()).unwrap();
        assert!(r.has_cqlf);
        assert_eq!(r.methods_agree, Some(true));
        assert_eq!(r.reduced_dim, 2);

        let (a, b) = no_cqlf_pair();
        let r = decide(&a, &b, &cfg()).unwrap();
        assert!(!r.has_cqlf);
        assert_eq!(r.methods_agree, Some(true));

        let bad = m2(1.0, 0.0, 0.0, -1.0);
        assert!(matches!(
            decide(&bad, &b, &cfg()),
            Err(Error::NotStable { which: "A" })
        ));
    }

    #[test]
    fn verdict_is_scale_invariant() {
        for (a, b) in [cqlf_pair(), no_cqlf_pair()] {
            let r = decide(&a, &b, &cfg()).unwrap();
            for c in [1e-3, 0.5, 7.0, 1e3] {
                let s = decide(&(&a * c), &(&b * c), &cfg()).unwrap();
                assert_eq!(r.has_cqlf, s.has_cqlf);
            }
        }
    }
}
