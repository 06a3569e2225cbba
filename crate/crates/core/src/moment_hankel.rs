//! Signed Hankel matrices, the rank-two atoms `Z(x)`, moment decompositions
//! and the functional `F(Z)`.
//!
//! A symmetric `Z` with `ΠSZΠ + ΠZSᵀΠ = 0` is determined by its diagonal
//! `z₀, …, z_{n−1}`:
//!
//! ```text
//!     ⎡ z₀   0  −z₁   0   z₂ ⋯ ⎤
//! Z = ⎢  0  z₁    0 −z₂    0 ⋯ ⎥
//!     ⎢−z₁   0   z₂   0  −z₃ ⋯ ⎥
//!     ⎣  ⋮                     ⎦
//! ```
//!
//! Conjugating by `D = diag(+, +, −, −, …)` removes the signs and splits `Z`
//! into two ordinary Hankel matrices on the even and odd indices. `Z` is a
//! positive combination of atoms `Z(x)` exactly when `z` is a moment sequence
//! `z_j = Σ μᵢ xᵢʲ` with nonnegative nodes.

use nalgebra::{Cholesky, SymmetricEigen};

use crate::error::{Error, Result};
use crate::numerics::{
    check_square, check_vector, last_basis_vector, psd_check, quadratic_form_pinv, shift_matrix,
    Matrix, Svd, ToleranceConfig, Vector,
};

/// Nodes closer to zero than this (relative to `max(1, largest node)`) are
/// treated as zero.
pub const NODE_TOL: f64 = 1e-8;

/// Nodes closer than this fraction of the largest node are merged.
const MERGE_GAP: f64 = 1e-6;

fn signed(i: usize, j: usize) -> f64 {
    if (i.abs_diff(j) / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// A signed Hankel matrix stored by its generating sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedHankel {
    z: Vec<f64>,
}

impl SignedHankel {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::Empty);
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { z })
    }

    /// Projects a symmetric matrix onto the signed Hankel pattern by
    /// averaging each anti-diagonal, rejecting matrices whose distance from
    /// the pattern exceeds `tol · ‖m‖`.
    pub fn from_matrix(m: &Matrix, tol: f64) -> Result<Self> {
        let n = check_square(m)?;
        let mut sums = vec![0.0; n];
        let mut counts = vec![0usize; n];
        for i in 0..n {
            for j in 0..n {
                if (i + j) % 2 == 0 {
                    let s = (i + j) / 2;
                    sums[s] += signed(i, j) * m[(i, j)];
                    counts[s] += 1;
                }
            }
        }
        let z: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| s / c as f64)
            .collect();
        let hankel = Self { z };
        let residual = (m - hankel.matrix()).norm();
        if residual > tol * m.norm() {
            return Err(Error::NotSignedHankel { residual });
        }
        Ok(hankel)
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn matrix(&self) -> Matrix {
        sequence_matrix(&self.z, self.z.len())
    }

    /// The Hankel matrices `[z_{a+b}]` on the even indices and `[z_{a+b+1}]`
    /// on the odd indices; `Z ⪰ 0` iff both are.
    pub fn hankel_blocks(&self) -> (Matrix, Matrix) {
        let n = self.dim();
        let m0 = n.div_ceil(2);
        let m1 = n / 2;
        let h0 = Matrix::from_fn(m0, m0, |a, b| self.z[a + b]);
        let h1 = Matrix::from_fn(m1, m1, |a, b| self.z[a + b + 1]);
        (h0, h1)
    }
}

/// Materializes the `n × n` signed Hankel matrix for a sequence of length
/// at least `n`.
fn sequence_matrix(z: &[f64], n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| {
        if (i + j) % 2 == 0 {
            signed(i, j) * z[(i + j) / 2]
        } else {
            0.0
        }
    })
}

pub fn signed_hankel(z: &[f64]) -> Result<SignedHankel> {
    SignedHankel::new(z.to_vec())
}

/// `‖ΠSZΠ + ΠZSᵀΠ‖_F`, which vanishes on signed Hankel matrices.
pub fn projected_lyapunov_residual(z: &Matrix) -> f64 {
    let n = z.nrows();
    let s = shift_matrix(n);
    let mut pi = Matrix::identity(n, n);
    pi[(n - 1, n - 1)] = 0.0;
    (&pi * &s * z * &pi + &pi * z * s.transpose() * &pi).norm()
}

/// `u(x)`: entries `(−x)^{i/2}` on even indices, zero on odd ones.
pub fn u_vec(x: f64, n: usize) -> Vector {
    Vector::from_fn(n, |i, _| {
        if i % 2 == 0 {
            (-x).powi((i / 2) as i32)
        } else {
            0.0
        }
    })
}

/// `v(x) = Sᵀu(x)`.
pub fn v_vec(x: f64, n: usize) -> Vector {
    Vector::from_fn(n, |i, _| {
        if i % 2 == 1 {
            (-x).powi((i / 2) as i32)
        } else {
            0.0
        }
    })
}

fn check_node(x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    if x < 0.0 {
        return Err(Error::OutOfRange {
            name: "x",
            value: x,
        });
    }
    Ok(())
}

/// The atom `Z(x) = u(x)u(x)ᵀ + x v(x)v(x)ᵀ`.
pub fn atom(x: f64, n: usize) -> Result<Matrix> {
    check_node(x)?;
    if n == 0 {
        return Err(Error::Empty);
    }
    let z: Vec<f64> = (0..n).map(|j| x.powi(j as i32)).collect();
    Ok(sequence_matrix(&z, n))
}

/// Companion rows `h`, `k` of `A = S + ghᵀ` and `B = S + gkᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionVectors {
    pub h: Vector,
    pub k: Vector,
}

impl CompanionVectors {
    pub fn new(h: Vector, k: Vector) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::Empty);
        }
        check_vector(&h, h.len())?;
        check_vector(&k, h.len())?;
        if h == k {
            return Err(Error::RankZeroDifference);
        }
        Ok(Self { h, k })
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    pub fn h_minus_k(&self) -> Vector {
        &self.h - &self.k
    }
}

/// `ξ = SZg + Zh`.
pub fn xi_of(z: &Matrix, h: &Vector) -> Vector {
    let n = z.nrows();
    shift_matrix(n) * z * last_basis_vector(n) + z * h
}

/// `F(Z) = ⟨ξ, Z⁺ξ⟩ / ⟨h − k, ξ⟩`, returned together with the denominator.
pub fn f_of(z: &Matrix, cv: &CompanionVectors, cfg: &ToleranceConfig) -> Result<(f64, f64)> {
    let n = check_square(z)?;
    if n != cv.dim() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: cv.dim(),
        });
    }
    let xi = xi_of(z, &cv.h);
    let hk = cv.h_minus_k();
    let denominator = hk.dot(&xi);
    if denominator.abs() <= cfg.psd_tol * hk.norm() * xi.norm() {
        return Err(Error::Pole { denominator });
    }
    let numerator = quadratic_form_pinv(z, &xi, cfg)?;
    Ok((numerator / denominator, denominator))
}

/// `w = ⟨h − k, ξ⟩^{−1/2} ξ`.
pub fn w_from_xi(xi: &Vector, cv: &CompanionVectors) -> Result<Vector> {
    let denominator = cv.h_minus_k().dot(xi);
    if !(denominator > 0.0) {
        return Err(Error::NonPositiveDenominator { denominator });
    }
    Ok(xi / denominator.sqrt())
}

/// Closed-form pieces of `F(Z(x))`.
///
/// `ξ(x) = a u(x) + x b v(x)` with `u ⊥ v`, so `⟨ξ, Z(x)⁺ξ⟩ = a² + x b²`
/// and `⟨h − k, ξ⟩ = a ⟨h − k, u⟩ + x b ⟨h − k, v⟩`; both are polynomials
/// in `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomTerms {
    pub a: f64,
    pub b: f64,
    pub numerator: f64,
    pub denominator: f64,
}

impl AtomTerms {
    pub fn f(&self) -> f64 {
        self.numerator / self.denominator
    }

    /// `numerator − denominator`; its zeros with positive denominator are
    /// the solutions of `F(Z(x)) = 1`.
    pub fn gap(&self) -> f64 {
        self.numerator - self.denominator
    }
}

pub fn atom_terms(x: f64, cv: &CompanionVectors) -> AtomTerms {
    let n = cv.dim();
    let u = u_vec(x, n);
    let v = v_vec(x, n);
    let (a, b) = if n.is_multiple_of(2) {
        (u.dot(&cv.h) - (-x).powi((n / 2) as i32), v.dot(&cv.h))
    } else {
        (u.dot(&cv.h), v.dot(&cv.h) - (-x).powi(((n - 1) / 2) as i32))
    };
    let hk = cv.h_minus_k();
    AtomTerms {
        a,
        b,
        numerator: a * a + x * b * b,
        denominator: a * hk.dot(&u) + x * b * hk.dot(&v),
    }
}

/// Nodes `x₀ < … < x_{p−1}`, weights and trailing mass `M` with
/// `Z = Σ μᵢ Z(xᵢ) + M ggᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentDecomposition {
    pub n: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Coefficient of `ggᵀ`; zero whenever a representation without it exists.
    pub trailing_mass: f64,
    /// `‖Z − Σ μᵢZ(xᵢ) − M ggᵀ‖_F / ‖Z‖_F`.
    pub residual: f64,
    /// Some Hankel eigenvalue sits within two decades of the rank cutoff.
    pub rank_ambiguous: bool,
    /// `p = (n+1)/2` but the smallest node is not zero.
    pub zero_node_violation: bool,
}

impl MomentDecomposition {
    pub fn p(&self) -> usize {
        self.nodes.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        let z = moments(&self.nodes, &self.weights, self.n);
        let mut m = sequence_matrix(&z, self.n);
        m[(self.n - 1, self.n - 1)] += self.trailing_mass;
        m
    }
}

fn moments(nodes: &[f64], weights: &[f64], len: usize) -> Vec<f64> {
    (0..len)
        .map(|j| {
            nodes
                .iter()
                .zip(weights)
                .map(|(x, mu)| mu * x.powi(j as i32))
                .sum()
        })
        .collect()
}

/// Number of entries of an `n × n` signed Hankel matrix carrying `z_s`.
fn multiplicity(s: usize, n: usize) -> f64 {
    (0..n).filter(|&i| 2 * s >= i && 2 * s - i < n).count() as f64
}

/// Frobenius norm of the signed Hankel matrix generated by `r`.
fn sequence_norm(r: &[f64], n: usize) -> f64 {
    r.iter()
        .enumerate()
        .map(|(s, x)| multiplicity(s, n) * x * x)
        .sum::<f64>()
        .sqrt()
}

/// Eigenvalues of the pencil `(g1, g0)` for `g0 ≻ 0`.
fn pencil_nodes(g0: &Matrix, g1: &Matrix) -> Option<Vec<f64>> {
    let chol = Cholesky::new(g0.clone())?;
    let l = chol.l();
    let x = l.solve_lower_triangular(g1)?;
    let c = l.solve_lower_triangular(&x.transpose())?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    Some(nodes)
}

/// Node sets proposed by Gaussian quadrature on the leading `r × r` blocks
/// of the moment Hankel matrices of `s`, with and without a node at zero.
fn node_candidates(s: &[f64]) -> Vec<Vec<f64>> {
    let len = s.len();
    let mut out = vec![vec![0.0]];
    for r in 1..=len.div_ceil(2) {
        if 2 * r < len + 1 {
            let g0 = Matrix::from_fn(r, r, |a, b| s[a + b]);
            let g1 = Matrix::from_fn(r, r, |a, b| s[a + b + 1]);
            if let Some(nodes) = pencil_nodes(&g0, &g1) {
                out.push(nodes);
            }
        }
        if 2 * r < len {
            // Moments of x·μ, whose atoms are the positive nodes.
            let g0 = Matrix::from_fn(r, r, |a, b| s[a + b + 1]);
            let g1 = Matrix::from_fn(r, r, |a, b| s[a + b + 2]);
            if let Some(mut nodes) = pencil_nodes(&g0, &g1) {
                nodes.insert(0, 0.0);
                out.push(nodes);
            }
        }
    }
    out
}

/// Clamps tiny negative nodes to zero, merges near-coincident nodes and
/// rejects clearly negative ones.
fn clean_nodes(mut nodes: Vec<f64>) -> std::result::Result<Vec<f64>, f64> {
    nodes.sort_by(f64::total_cmp);
    let scale = nodes.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let mut out: Vec<f64> = Vec::with_capacity(nodes.len());
    for x in nodes {
        if !x.is_finite() {
            return Err(f64::NAN);
        }
        if x < -NODE_TOL * scale {
            return Err(x);
        }
        let x = x.max(0.0);
        match out.last() {
            Some(&last) if x - last <= MERGE_GAP * scale.max(f64::MIN_POSITIVE) => {}
            _ => out.push(x),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct Candidate {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    trailing_mass: f64,
    residual: f64,
}

/// Weighted least squares for `(μ, M)` against the first `n` moments, with
/// rows scaled so that the residual is the Frobenius distance of matrices.
fn fit_weights(z: &[f64], nodes: &[f64], with_mass: bool) -> Option<(Vec<f64>, f64)> {
    let n = z.len();
    let cols = nodes.len() + usize::from(with_mass);
    if cols == 0 || cols > n {
        return None;
    }
    let scale: Vec<f64> = (0..n).map(|s| multiplicity(s, n).sqrt()).collect();
    let v = Matrix::from_fn(n, cols, |j, i| {
        let entry = if i < nodes.len() {
            nodes[i].powi(j as i32)
        } else if j == n - 1 {
            1.0
        } else {
            0.0
        };
        entry * scale[j]
    });
    let rhs = Vector::from_fn(n, |j, _| z[j] * scale[j]);
    let svd = Svd::new(&v)?;
    let sol = svd.solve_vector(&rhs, svd.s[0] * f64::EPSILON * n as f64);
    let weights = sol.rows(0, nodes.len()).iter().copied().collect();
    let mass = if with_mass { sol[nodes.len()] } else { 0.0 };
    Some((weights, mass))
}

fn evaluate(z: &[f64], nodes: Vec<f64>, with_mass: bool) -> Option<Candidate> {
    let n = z.len();
    let (mut nodes, mut weights, mut mass) = {
        let (w, m) = fit_weights(z, &nodes, with_mass)?;
        (nodes, w, m)
    };
    // Atoms with nonpositive weight are dropped and the rest refitted.
    for _ in 0..nodes.len() {
        if weights.iter().all(|&w| w > 0.0) {
            break;
        }
        let keep: Vec<usize> = (0..nodes.len()).filter(|&i| weights[i] > 0.0).collect();
        nodes = keep.iter().map(|&i| nodes[i]).collect();
        if nodes.is_empty() && !with_mass {
            return None;
        }
        let (w, m) = if nodes.is_empty() {
            (Vec::new(), z[n - 1])
        } else {
            fit_weights(z, &nodes, with_mass)?
        };
        weights = w;
        mass = m;
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return None;
    }
    let mut best = Candidate {
        residual: misfit(z, &nodes, &weights, mass),
        nodes,
        weights,
        trailing_mass: mass,
    };
    polish(z, &mut best);
    Some(best)
}

fn misfit(z: &[f64], nodes: &[f64], weights: &[f64], mass: f64) -> f64 {
    let n = z.len();
    let mut r = moments(nodes, weights, n);
    for (rj, zj) in r.iter_mut().zip(z) {
        *rj -= zj;
    }
    r[n - 1] += mass;
    sequence_norm(&r, n)
}

/// Gauss–Newton refinement of positive nodes, weights and mass jointly.
/// Quadrature nodes lose accuracy when atoms are close; a few steps on the
/// moment equations restore it. Steps are kept only if they reduce the
/// misfit and keep nodes nonnegative and weights positive.
fn polish(z: &[f64], c: &mut Candidate) {
    let n = z.len();
    let p = c.nodes.len();
    let free: Vec<usize> = (0..p).filter(|&i| c.nodes[i] > 0.0).collect();
    let with_mass = c.trailing_mass != 0.0;
    let cols = p + free.len() + usize::from(with_mass);
    if cols > n {
        return;
    }
    let scale: Vec<f64> = (0..n).map(|s| multiplicity(s, n).sqrt()).collect();
    for _ in 0..20 {
        let mut r = moments(&c.nodes, &c.weights, n);
        for (rj, zj) in r.iter_mut().zip(z) {
            *rj = zj - *rj;
        }
        r[n - 1] -= c.trailing_mass;
        let jac = Matrix::from_fn(n, cols, |j, col| {
            let entry = if col < p {
                c.nodes[col].powi(j as i32)
            } else if col < p + free.len() {
                let i = free[col - p];
                if j == 0 {
                    0.0
                } else {
                    c.weights[i] * j as f64 * c.nodes[i].powi(j as i32 - 1)
                }
            } else if j == n - 1 {
                1.0
            } else {
                0.0
            };
            entry * scale[j]
        });
        let rhs = Vector::from_fn(n, |j, _| r[j] * scale[j]);
        let Some(svd) = Svd::new(&jac) else {
            return;
        };
        let step = svd.solve_vector(&rhs, svd.s[0] * f64::EPSILON * n as f64);
        let weights: Vec<f64> = (0..p).map(|i| c.weights[i] + step[i]).collect();
        let mut nodes = c.nodes.clone();
        for (k, &i) in free.iter().enumerate() {
            nodes[i] += step[p + k];
        }
        let mass = if with_mass {
            c.trailing_mass + step[cols - 1]
        } else {
            0.0
        };
        if weights.iter().any(|&w| !(w > 0.0)) || nodes.iter().any(|&x| !(x >= 0.0)) {
            return;
        }
        let residual = misfit(z, &nodes, &weights, mass);
        if !(residual < c.residual) {
            return;
        }
        *c = Candidate {
            nodes,
            weights,
            trailing_mass: mass,
            residual,
        };
    }
}

/// Even-length sequences are extended by one moment so that the signed
/// Hankel matrix of the extension stays PSD; the new corner is twice the
/// smallest admissible value.
fn extend_even(z: &[f64], cfg: &ToleranceConfig) -> Option<Vec<f64>> {
    let n = z.len();
    let m = n / 2;
    let h0 = Matrix::from_fn(m, m, |a, b| z[a + b]);
    let c = Vector::from_fn(m, |a, _| z[a + m]);
    let corner = if c.norm() == 0.0 {
        0.0
    } else {
        2.0 * quadratic_form_pinv(&h0, &c, cfg).ok()?
    };
    let mut ext = z.to_vec();
    ext.push(corner);
    Some(ext)
}

fn rank_ambiguous(hankel: &SignedHankel, cfg: &ToleranceConfig) -> bool {
    let (h0, h1) = hankel.hankel_blocks();
    [h0, h1].iter().filter(|m| m.nrows() > 0).any(|m| {
        let eig = SymmetricEigen::new(m.clone());
        let norm = eig.eigenvalues.amax();
        let cut = cfg.psd_tol * norm;
        eig.eigenvalues
            .iter()
            .any(|&l| l.abs() > cut * 1e-2 && l.abs() < cut * 1e2)
    })
}

/// Decomposes a PSD signed Hankel matrix into atoms.
///
/// Candidate node sets come from Gaussian quadrature on leading blocks of
/// the moment Hankel matrices (with and without a node at zero, and for
/// even `n` also on the one-step extension); weights are fitted by least
/// squares, polished, and checked against the input. Among those
/// reproducing `Z` within `residual_tol`, representations without a
/// trailing mass are preferred, then those exact to rounding, then fewer
/// atoms.
pub fn moment_decompose(
    hankel: &SignedHankel,
    cfg: &ToleranceConfig,
) -> Result<MomentDecomposition> {
    let n = hankel.dim();
    let z = hankel.z();
    let zm = hankel.matrix();
    let norm = zm.norm();
    if norm == 0.0 {
        return Ok(MomentDecomposition {
            n,
            nodes: Vec::new(),
            weights: Vec::new(),
            trailing_mass: 0.0,
            residual: 0.0,
            rank_ambiguous: false,
            zero_node_violation: false,
        });
    }
    let report = psd_check(&zm, cfg)?;
    if !report.is_psd {
        return Err(Error::NotPsd {
            min_eigenvalue: report.min_eigenvalue,
        });
    }

    let mut node_sets = node_candidates(z);
    if n.is_multiple_of(2) {
        if let Some(ext) = extend_even(z, cfg) {
            node_sets.extend(node_candidates(&ext));
        }
    }

    let mut candidates = Vec::new();
    let mut negative: Option<f64> = None;
    for nodes in node_sets {
        let nodes = match clean_nodes(nodes) {
            Ok(nodes) => nodes,
            Err(x) => {
                if x.is_finite() {
                    negative = Some(negative.map_or(x, |m: f64| m.min(x)));
                }
                continue;
            }
        };
        for with_mass in [false, true] {
            if let Some(c) = evaluate(z, nodes.clone(), with_mass) {
                candidates.push(c);
            }
        }
    }

    let tol = cfg.residual_tol * norm;
    let mass_tol = cfg.residual_tol * norm;
    // Fits at rounding level beat fits that merely meet the tolerance, so
    // close atoms in exact data are not merged.
    let exact = 1e3 * n as f64 * f64::EPSILON * norm;
    let best = candidates
        .iter()
        .filter(|c| c.residual <= tol && c.trailing_mass >= -mass_tol)
        .min_by(|a, b| {
            let ma = a.trailing_mass.abs() > mass_tol;
            let mb = b.trailing_mass.abs() > mass_tol;
            ma.cmp(&mb)
                .then((a.residual > exact).cmp(&(b.residual > exact)))
                .then(a.nodes.len().cmp(&b.nodes.len()))
                .then(a.residual.total_cmp(&b.residual))
        });
    let Some(best) = best else {
        if let Some(node) = negative {
            return Err(Error::NegativeNode { node });
        }
        let residual = candidates
            .iter()
            .map(|c| c.residual)
            .fold(f64::INFINITY, f64::min);
        return Err(Error::DecompositionFailed {
            residual: residual / norm,
        });
    };

    let mut trailing_mass = best.trailing_mass;
    if trailing_mass.abs() <= mass_tol {
        trailing_mass = 0.0;
    }
    let p = best.nodes.len();
    let scale = best.nodes.iter().fold(1.0_f64, |m, x| m.max(*x));
    Ok(MomentDecomposition {
        n,
        nodes: best.nodes.clone(),
        weights: best.weights.clone(),
        trailing_mass,
        residual: best.residual / norm,
        rank_ambiguous: rank_ambiguous(hankel, cfg),
        zero_node_violation: n % 2 == 1 && p == n.div_ceil(2) && best.nodes[0] > NODE_TOL * scale,
    })
}

/// Right-hand side of the additivity identity for `F`:
/// `Σ μᵢ⟨ξᵢ, Z(xᵢ)⁺ξᵢ⟩ / Σ μᵢ⟨h − k, ξᵢ⟩` with `ξᵢ = SZ(xᵢ)g + Z(xᵢ)h`.
pub fn f_over_atoms(decomp: &MomentDecomposition, cv: &CompanionVectors) -> Result<f64> {
    if decomp.n != cv.dim() {
        return Err(Error::DimensionMismatch {
            expected: decomp.n,
            found: cv.dim(),
        });
    }
    let (num, den) =
        decomp
            .nodes
            .iter()
            .zip(&decomp.weights)
            .fold((0.0, 0.0), |(num, den), (&x, &mu)| {
                let t = atom_terms(x, cv);
                (num + mu * t.numerator, den + mu * t.denominator)
            });
    if den == 0.0 {
        return Err(Error::Pole { denominator: den });
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadratic_form_pinv;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn golden() -> CompanionVectors {
        CompanionVectors::new(
            Vector::from_vec(vec![-1.0, -2.0]),
            Vector::from_vec(vec![-9.0, -2.0]),
        )
        .unwrap()
    }

    fn combo(terms: &[(f64, f64)], n: usize) -> SignedHankel {
        let nodes: Vec<f64> = terms.iter().map(|t| t.1).collect();
        let weights: Vec<f64> = terms.iter().map(|t| t.0).collect();
        SignedHankel::new(moments(&nodes, &weights, n)).unwrap()
    }

    #[test]
    fn signed_hankel_examples() {
        let m = signed_hankel(&[1.0, 0.0, 0.0]).unwrap().matrix();
        let mut e = Matrix::zeros(3, 3);
        e[(0, 0)] = 1.0;
        assert_eq!(m, e);

        let x: f64 = 1.7;
        let z: Vec<f64> = (0..5).map(|j| x.powi(j)).collect();
        assert_relative_eq!(signed_hankel(&z).unwrap().matrix(), atom(x, 5).unwrap());
    }

    #[test]
    fn signed_hankel_pattern() {
        let m = signed_hankel(&[1.0, 2.0, 3.0, 4.0]).unwrap().matrix();
        let expect = Matrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, -2.0, 0.0, //
                0.0, 2.0, 0.0, -3.0, //
                -2.0, 0.0, 3.0, 0.0, //
                0.0, -3.0, 0.0, 4.0,
            ],
        );
        assert_eq!(m, expect);
    }

    #[test]
    fn atom_examples() {
        let mut e = Matrix::zeros(3, 3);
        e[(0, 0)] = 1.0;
        assert_eq!(atom(0.0, 3).unwrap(), e);
        assert_eq!(
            atom(2.0, 2).unwrap(),
            Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0])
        );
        assert!(matches!(atom(-1.0, 3), Err(Error::OutOfRange { .. })));
        for n in 2..7 {
            let r = psd_check(&atom(0.3, n).unwrap(), &cfg()).unwrap();
            assert_eq!(r.rank, 2);
        }
    }

    #[test]
    fn atom_factorization() {
        for n in 1..7 {
            let x = 1.3;
            let u = u_vec(x, n);
            let v = v_vec(x, n);
            let m = &u * u.transpose() + x * &v * v.transpose();
            assert_relative_eq!(m, atom(x, n).unwrap(), epsilon = 1e-12);
            assert_relative_eq!(v, shift_matrix(n).transpose() * &u);
        }
    }

    #[test]
    fn shifted_atom_identity() {
        for n in 2..8 {
            let x: f64 = 0.7;
            let z = atom(x, n).unwrap();
            let lhs = shift_matrix(n) * &z * last_basis_vector(n);
            let rhs = if n % 2 == 0 {
                -(-x).powi((n / 2) as i32) * u_vec(x, n)
            } else {
                (-x).powi(n.div_ceil(2) as i32) * v_vec(x, n)
            };
            assert_relative_eq!(lhs, rhs, epsilon = 1e-14);
        }
    }

    #[test]
    fn xi_examples() {
        let h = Vector::from_vec(vec![0.4, -1.1]);
        let x = 2.5;
        let xi = xi_of(&atom(x, 2).unwrap(), &h);
        assert_relative_eq!(
            xi,
            Vector::from_vec(vec![x + h[0], x * h[1]]),
            epsilon = 1e-14
        );

        let h = Vector::from_vec(vec![0.4, -1.1, 0.3, 2.0]);
        let xi = xi_of(&atom(0.0, 4).unwrap(), &h);
        assert_relative_eq!(xi, Vector::from_vec(vec![0.4, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn xi_lies_in_atom_range() {
        let h = Vector::from_vec(vec![0.4, -1.1, 0.3, 2.0, -0.6]);
        for x in [0.1, 1.0, 2.5] {
            let z = atom(x, 5).unwrap();
            let xi = xi_of(&z, &h);
            let SymmetricEigen {
                eigenvalues: values,
                eigenvectors: vectors,
            } = SymmetricEigen::new(z.clone());
            let mut proj = Vector::zeros(5);
            for (k, &l) in values.iter().enumerate() {
                if l > 1e-12 {
                    proj.axpy(vectors.column(k).dot(&xi), &vectors.column(k), 1.0);
                }
            }
            assert!((&xi - proj).norm() <= 1e-10 * xi.norm());
        }
    }

    #[test]
    fn f_of_golden() {
        let cv = golden();
        for x in [0.5, 2.0, 3.0, 4.5] {
            let (f, _) = f_of(&atom(x, 2).unwrap(), &cv, &cfg()).unwrap();
            assert_relative_eq!(f, (x + 1.0).powi(2) / (8.0 * (x - 1.0)), epsilon = 1e-12);
        }
        let (f, _) = f_of(&atom(2.0, 2).unwrap(), &cv, &cfg()).unwrap();
        assert_relative_eq!(f, 9.0 / 8.0, epsilon = 1e-14);
        let (f, _) = f_of(&atom(3.0, 2).unwrap(), &cv, &cfg()).unwrap();
        assert_relative_eq!(f, 1.0, epsilon = 1e-14);
        let (f, _) = f_of(&atom(0.0, 2).unwrap(), &cv, &cfg()).unwrap();
        assert_relative_eq!(f, -1.0 / 8.0, epsilon = 1e-14);
        assert!(matches!(
            f_of(&atom(1.0, 2).unwrap(), &cv, &cfg()),
            Err(Error::Pole { .. })
        ));
    }

    #[test]
    fn closed_form_matches_pinv() {
        let cv = CompanionVectors::new(
            Vector::from_vec(vec![-0.5, -1.5, -2.0, 0.3, -1.0]),
            Vector::from_vec(vec![-1.0, 0.5, -2.5, -0.2, -3.0]),
        )
        .unwrap();
        for n in [5usize] {
            for x in [0.0, 0.3, 1.1, 2.7] {
                let t = atom_terms(x, &cv);
                let z = atom(x, n).unwrap();
                let xi = xi_of(&z, &cv.h);
                assert_relative_eq!(t.denominator, cv.h_minus_k().dot(&xi), epsilon = 1e-10);
                let q = quadratic_form_pinv(&z, &xi, &cfg()).unwrap();
                assert_relative_eq!(t.numerator, q, epsilon = 1e-9, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn w_from_xi_golden() {
        let cv = golden();
        let z = atom(3.0, 2).unwrap();
        let xi = xi_of(&z, &cv.h);
        assert_relative_eq!(xi, Vector::from_vec(vec![2.0, -6.0]), epsilon = 1e-14);
        assert_relative_eq!(cv.h_minus_k().dot(&xi), 16.0, epsilon = 1e-14);
        let w = w_from_xi(&xi, &cv).unwrap();
        assert_relative_eq!(w, Vector::from_vec(vec![0.5, -1.5]), epsilon = 1e-14);
        // SZg + Zh + ⟨w, k − h⟩ w = 0
        let kh = &cv.k - &cv.h;
        let residual = &xi + kh.dot(&w) * &w;
        assert!(residual.norm() <= 1e-12);
        assert!(matches!(
            w_from_xi(&(-xi), &cv),
            Err(Error::NonPositiveDenominator { .. })
        ));
    }

    #[test]
    fn decompose_examples() {
        let d = moment_decompose(&combo(&[(1.0, 2.0)], 3), &cfg()).unwrap();
        assert_eq!(d.p(), 1);
        assert_relative_eq!(d.nodes[0], 2.0, epsilon = 1e-10);
        assert_relative_eq!(d.weights[0], 1.0, epsilon = 1e-10);

        let d = moment_decompose(&combo(&[(2.0, 1.0), (3.0, 4.0)], 5), &cfg()).unwrap();
        assert_eq!(d.p(), 2);
        assert_relative_eq!(d.nodes[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(d.nodes[1], 4.0, epsilon = 1e-9);
        assert_relative_eq!(d.weights[0], 2.0, epsilon = 1e-9);
        assert_relative_eq!(d.weights[1], 3.0, epsilon = 1e-9);
        assert_eq!(d.trailing_mass, 0.0);

        for n in 1..7 {
            let d = moment_decompose(&combo(&[(1.0, 0.0)], n), &cfg()).unwrap();
            assert_eq!(d.nodes, vec![0.0]);
            assert_relative_eq!(d.weights[0], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn decompose_even_dimension() {
        let d = moment_decompose(&combo(&[(1.0, 2.0)], 2), &cfg()).unwrap();
        assert_eq!(d.p(), 1);
        assert_relative_eq!(d.nodes[0], 2.0, epsilon = 1e-12);

        let d = moment_decompose(&combo(&[(0.5, 0.0), (1.5, 0.7), (2.0, 2.2)], 6), &cfg()).unwrap();
        assert_eq!(d.p(), 3);
        assert_relative_eq!(d.nodes[0], 0.0, epsilon = 1e-9);
        assert_relative_eq!(d.nodes[2], 2.2, epsilon = 1e-9);
    }

    #[test]
    fn decompose_with_zero_node_at_full_count() {
        let d = moment_decompose(&combo(&[(0.5, 0.0), (1.5, 0.7), (2.0, 2.2)], 5), &cfg()).unwrap();
        assert_eq!(d.p(), 3);
        assert!(!d.zero_node_violation);
        assert_relative_eq!(d.weights[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(d.nodes[1], 0.7, epsilon = 1e-9);
    }

    #[test]
    fn decompose_reports_trailing_mass() {
        // z = (0, 1) is g gᵀ: no atom reproduces it.
        let d = moment_decompose(&signed_hankel(&[0.0, 1.0]).unwrap(), &cfg()).unwrap();
        assert_eq!(d.p(), 0);
        assert_relative_eq!(d.trailing_mass, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn decompose_rejects_indefinite() {
        let r = moment_decompose(&signed_hankel(&[0.0, 1.0, 0.0]).unwrap(), &cfg());
        assert!(matches!(r, Err(Error::NotPsd { .. })));
    }

    #[test]
    fn f_over_atoms_matches_f_of() {
        let cv = CompanionVectors::new(
            Vector::from_vec(vec![-0.5, -1.5, -2.0, 0.3, -1.0]),
            Vector::from_vec(vec![-1.0, 0.5, -2.5, -0.2, -3.0]),
        )
        .unwrap();
        let z = combo(&[(2.0, 1.0), (3.0, 4.0)], 5);
        let d = moment_decompose(&z, &cfg()).unwrap();
        let (f, _) = f_of(&z.matrix(), &cv, &cfg()).unwrap();
        let g = f_over_atoms(&d, &cv).unwrap();
        assert!((f - g).abs() <= 1e-9 * f.abs());
    }

    #[test]
    fn f_is_monotone_in_each_weight() {
        let cv = CompanionVectors::new(
            Vector::from_vec(vec![-0.5, -1.5, -2.0, 0.3, -1.0]),
            Vector::from_vec(vec![-1.0, 0.5, -2.5, -0.2, -3.0]),
        )
        .unwrap();
        let f = |mu0: f64| {
            let z = combo(&[(mu0, 1.0), (3.0, 4.0)], 5);
            f_of(&z.matrix(), &cv, &cfg()).unwrap().0
        };
        let (a, b, c) = (f(0.5), f(1.0), f(4.0));
        assert!((b - a) * (c - b) >= 0.0);
    }

    proptest! {
        #[test]
        fn signed_hankel_round_trip(z in prop::collection::vec(-10.0..10.0f64, 1..8)) {
            let h = signed_hankel(&z).unwrap();
            let back = SignedHankel::from_matrix(&h.matrix(), 1e-12).unwrap();
            for (p, q) in back.z().iter().zip(&z) {
                prop_assert!((p - q).abs() <= 1e-14 * q.abs().max(1.0));
            }
            prop_assert_eq!(projected_lyapunov_residual(&h.matrix()), 0.0);
        }

        #[test]
        fn decomposition_reconstructs(
            n in 2usize..8,
            raw in prop::collection::vec((0.5..2.0f64, 0.0..3.0f64), 1..4),
        ) {
            let p_max = n.div_ceil(2);
            let mut nodes: Vec<f64> = raw.iter().map(|t| t.1).collect();
            nodes.sort_by(f64::total_cmp);
            nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-2);
            nodes.truncate(p_max);
            if nodes.len() == p_max && n % 2 == 1 {
                nodes[0] = 0.0;
            }
            let terms: Vec<(f64, f64)> = nodes.iter().zip(&raw).map(|(x, t)| (t.0, *x)).collect();
            let z = combo(&terms, n);
            let d = moment_decompose(&z, &cfg()).unwrap();
            let err = (z.matrix() - d.reconstruct()).norm();
            prop_assert!(err <= 1e-9 * z.matrix().norm());
            prop_assert!(d.p() <= n.div_ceil(2));
            prop_assert!(d.weights.iter().all(|&w| w > 0.0));
            prop_assert!(d.nodes.iter().all(|&x| x >= 0.0));
        }
    }
}
