//! Turning an arbitrary PSD solution `(X, Y)` of
//! `AX + XAᵀ + BY + YBᵀ = 0` into a rank-one witness `(vvᵀ, wwᵀ)`.
//!
//! In companion coordinates `A = S + ghᵀ`, `B = S + gkᵀ`, the sum
//! `Z = X + Y` is a PSD signed Hankel matrix with `0 < F(Z) ≤ 1`. It
//! decomposes into atoms `Z(xᵢ)`, and because `F` of a positive combination
//! is a ratio of the atoms' numerators and denominators, some atom has
//! `0 < F(Z(xᵢ)) ≤ F(Z)`. Along `y ∈ [0, xᵢ]` the rational function
//! `F(Z(y))` starts outside `[0, 1]` and ends inside, so it crosses or
//! touches `1`; at that `y`, `Z(y) − wwᵀ` has rank one.

use crate::certificates::{verify_pair_solution, verify_witness};
use crate::error::{Error, ExtractionFailure, ExtractionStage, Result};
use crate::moment_hankel::{
    atom, atom_terms, f_of, moment_decompose, w_from_xi, xi_of, AtomTerms, CompanionVectors,
    MomentDecomposition, SignedHankel,
};
use crate::numerics::{
    check_square, companion_matrix, is_stable, psd_check, sym_eigen, Matrix, ToleranceConfig,
    Vector,
};
use crate::pair_model::{companion_reduction, reduce_to_controllable, RankOnePair};

/// Per-atom quantities examined during selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomEvaluation {
    pub node: f64,
    pub weight: f64,
    /// `⟨h − k, ξᵢ⟩`.
    pub denominator: f64,
    /// `F(Z(xᵢ))`, meaningful when the denominator is positive.
    pub f: f64,
}

/// Intermediate values of an extraction; fields are filled as stages
/// complete, so a failure carries everything computed before it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractionTrace {
    /// `Z = X + Y` projected onto the signed Hankel pattern.
    pub z: Option<SignedHankel>,
    /// Distance of `X + Y` from the signed Hankel pattern, relative.
    pub structure_residual: Option<f64>,
    /// `w = Y(k−h) / ⟨k−h, Y(k−h)⟩^{1/2}`.
    pub w_init: Option<Vector>,
    pub f_z: Option<f64>,
    pub decomposition: Option<MomentDecomposition>,
    pub atoms: Vec<AtomEvaluation>,
    pub selected_node: Option<f64>,
    pub f_at_selected: Option<f64>,
    /// Root of `F(Z(y)) = 1`; absent when the selected atom already has `F = 1`.
    pub root_y: Option<f64>,
    pub v_out: Option<Vector>,
    pub w_out: Option<Vector>,
    /// Normalized witness residual of `(v_out, w_out)`.
    pub residual: Option<f64>,
}

fn fail(stage: ExtractionStage, detail: impl Into<String>, trace: &ExtractionTrace) -> Error {
    Error::Extraction(Box::new(ExtractionFailure {
        stage,
        detail: detail.into(),
        trace: trace.clone(),
    }))
}

/// `F(Z(y))` from the closed form, or `None` at a pole.
fn f_atom(y: f64, cv: &CompanionVectors, cfg: &ToleranceConfig) -> Option<f64> {
    let t = atom_terms(y, cv);
    (t.denominator.abs() > cfg.psd_tol * t.numerator.abs().max(1e-300)).then(|| t.f())
}

fn bisect(cv: &CompanionVectors, mut lo: f64, mut hi: f64) -> f64 {
    let gap = |y: f64| atom_terms(y, cv).gap();
    let mut glo = gap(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = gap(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `|F − 1|` where the denominator is positive, infinity elsewhere.
fn distance_from_one(t: &AtomTerms) -> f64 {
    if t.denominator > 0.0 {
        (t.gap() / t.denominator).abs()
    } else {
        f64::INFINITY
    }
}

/// Golden-section minimization of `|F(Z(y)) − 1|` on `[lo, hi]`.
fn touch(cv: &CompanionVectors, lo: f64, hi: f64) -> f64 {
    let obj = |y: f64| distance_from_one(&atom_terms(y, cv));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (obj(c), obj(d));
    for _ in 0..300 {
        if b - a <= f64::EPSILON * b.abs().max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = obj(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

struct Scan {
    roots: Vec<f64>,
    touches: Vec<f64>,
    profile: Vec<(f64, f64)>,
}

fn scan(cv: &CompanionVectors, x_hi: f64, samples: usize, cfg: &ToleranceConfig) -> Scan {
    let ys: Vec<f64> = (0..samples)
        .map(|j| x_hi * j as f64 / (samples - 1) as f64)
        .collect();
    let terms: Vec<AtomTerms> = ys.iter().map(|&y| atom_terms(y, cv)).collect();
    let mut roots = Vec::new();
    let mut touches = Vec::new();
    let profile = ys
        .iter()
        .filter_map(|&y| f_atom(y, cv, cfg).map(|f| (y, f - 1.0)))
        .collect();
    for j in 0..samples - 1 {
        let (t0, t1) = (&terms[j], &terms[j + 1]);
        // A sign change of the denominator marks a pole; such segments are
        // never searched.
        if !(t0.denominator > 0.0 && t1.denominator > 0.0) {
            continue;
        }
        if t0.gap() == 0.0 {
            roots.push(ys[j]);
        } else if (t0.gap() > 0.0) != (t1.gap() > 0.0) {
            roots.push(bisect(cv, ys[j], ys[j + 1]));
        }
    }
    // Local minima of |F − 1| are tangency candidates.
    let r: Vec<f64> = terms.iter().map(distance_from_one).collect();
    for j in 1..samples - 1 {
        if r[j].is_finite() && r[j] <= r[j - 1] && r[j] <= r[j + 1] {
            touches.push(touch(cv, ys[j - 1], ys[j + 1]));
        }
    }
    if r[samples - 1] < r[samples - 2] {
        touches.push(touch(cv, ys[samples - 2], ys[samples - 1]));
    }
    Scan {
        roots,
        touches,
        profile,
    }
}

/// Finds `y ∈ [0, x_hi]` with `F(Z(y)) = 1`.
///
/// `F(Z(y))` is a ratio of polynomials, so the search works on the
/// numerator-minus-denominator polynomial: segments where the denominator
/// changes sign contain poles and are skipped, sign changes are bisected,
/// and touching roots are located by minimizing `|F − 1|`. The largest root
/// is returned. The scan is repeated with `scan_points²` samples before
/// giving up.
pub fn root_find_f_equal_one(
    h: &Vector,
    k: &Vector,
    x_hi: f64,
    cfg: &ToleranceConfig,
) -> Result<f64> {
    cfg.validate()?;
    let cv = CompanionVectors::new(h.clone(), k.clone())?;
    if !(x_hi.is_finite() && x_hi > 0.0) {
        return Err(Error::OutOfRange {
            name: "x_hi",
            value: x_hi,
        });
    }
    let t0 = atom_terms(0.0, &cv);
    if t0.denominator.abs() <= cfg.psd_tol * cv.h_minus_k().norm() * cv.h.norm().max(1.0) {
        return Err(Error::Pole {
            denominator: t0.denominator,
        });
    }
    let f0 = t0.f();
    if (0.0..=1.0).contains(&f0) {
        return Err(Error::ZeroAtomInUnitInterval { value: f0 });
    }
    if let Some(f) = f_atom(x_hi, &cv, cfg) {
        if (f - 1.0).abs() <= cfg.residual_tol {
            return Ok(x_hi);
        }
    }

    let mut first_profile = None;
    for samples in [cfg.scan_points, cfg.scan_points * cfg.scan_points] {
        let s = scan(&cv, x_hi, samples, cfg);
        let accept = |y: &f64| {
            atom_terms(*y, &cv).denominator > 0.0
                && f_atom(*y, &cv, cfg).is_some_and(|f| (f - 1.0).abs() <= cfg.residual_tol)
        };
        let best = s
            .roots
            .iter()
            .chain(&s.touches)
            .copied()
            .filter(accept)
            .fold(None, |m: Option<f64>, y| Some(m.map_or(y, |m| m.max(y))));
        if let Some(y) = best {
            return Ok(y);
        }
        first_profile.get_or_insert(s.profile);
    }
    Err(Error::NoBracket {
        x_hi,
        samples: cfg.scan_points * cfg.scan_points,
        profile: first_profile.unwrap_or_default(),
    })
}

/// Extracts a rank-one witness from a PSD solution in companion coordinates.
///
/// Returns `(v, w)` with `Avvᵀ + vvᵀAᵀ + Bwwᵀ + wwᵀBᵀ = 0` for
/// `A = S + ghᵀ`, `B = S + gkᵀ`, plus the trace of intermediate values.
pub fn extract_rank_one(
    x: &Matrix,
    y: &Matrix,
    h: &Vector,
    k: &Vector,
    cfg: &ToleranceConfig,
) -> Result<(Vector, Vector, ExtractionTrace)> {
    cfg.validate()?;
    let mut trace = ExtractionTrace::default();
    let input =
        |e: Error, trace: &ExtractionTrace| fail(ExtractionStage::Input, e.to_string(), trace);

    let cv = CompanionVectors::new(h.clone(), k.clone()).map_err(|e| input(e, &trace))?;
    let n = cv.dim();
    let a = companion_matrix(h);
    let b = companion_matrix(k);
    for (m, which) in [(&a, "A"), (&b, "B")] {
        if !is_stable(m, cfg).map_err(|e| input(e, &trace))? {
            return Err(input(Error::NotStable { which }, &trace));
        }
    }
    for m in [x, y] {
        let d = check_square(m).map_err(|e| input(e, &trace))?;
        if d != n {
            return Err(input(
                Error::DimensionMismatch {
                    expected: n,
                    found: d,
                },
                &trace,
            ));
        }
    }
    let residual = verify_pair_solution(&a, &b, x, y, cfg).map_err(|e| input(e, &trace))?;
    if residual > cfg.residual_tol {
        return Err(fail(
            ExtractionStage::Input,
            format!("(X, Y) does not solve the Lyapunov pair equation (residual {residual:.3e})"),
            &trace,
        ));
    }

    // Off-pattern entries of X + Y come from the equation residual,
    // amplified by at most n along each anti-diagonal.
    let zm = x + y;
    let structure_tol = 10.0 * n as f64 * cfg.residual_tol * (a.norm() + b.norm());
    let z = SignedHankel::from_matrix(&zm, structure_tol).map_err(|e| input(e, &trace))?;
    let zh = z.matrix();
    trace.structure_residual = Some((&zm - &zh).norm() / zm.norm());
    trace.z = Some(z.clone());

    let kh = &cv.k - &cv.h;
    let ykh = y * &kh;
    let q = kh.dot(&ykh);
    if !(q > cfg.psd_tol * y.norm() * kh.norm_squared()) {
        return Err(fail(
            ExtractionStage::InitialW,
            format!("⟨k−h, Y(k−h)⟩ = {q:.3e} is not positive"),
            &trace,
        ));
    }
    trace.w_init = Some(&ykh / q.sqrt());
    let (f_z, _) = f_of(&zh, &cv, cfg).map_err(|e| input(e, &trace))?;
    trace.f_z = Some(f_z);

    let decomp = moment_decompose(&z, cfg)
        .map_err(|e| fail(ExtractionStage::TrailingMass, e.to_string(), &trace))?;
    trace.decomposition = Some(decomp.clone());
    if decomp.trailing_mass != 0.0 {
        return Err(fail(
            ExtractionStage::TrailingMass,
            format!("decomposition leaves M = {:.3e}", decomp.trailing_mass),
            &trace,
        ));
    }

    trace.atoms = decomp
        .nodes
        .iter()
        .zip(&decomp.weights)
        .map(|(&node, &weight)| {
            let t = atom_terms(node, &cv);
            AtomEvaluation {
                node,
                weight,
                denominator: t.denominator,
                f: t.f(),
            }
        })
        .collect();
    // Atoms with nonpositive denominator only raise F(Z), so they are
    // dropped; among the rest, the smallest F is at most F(Z).
    let admissible = trace
        .atoms
        .iter()
        .filter(|e| e.denominator > 0.0 && e.f > 0.0)
        .min_by(|p, q| p.f.total_cmp(&q.f))
        .copied();
    let Some(selected) = admissible else {
        return Err(fail(
            ExtractionStage::AtomSelection,
            "no atom has a positive denominator",
            &trace,
        ));
    };
    trace.selected_node = Some(selected.node);
    trace.f_at_selected = Some(selected.f);
    if selected.f > f_z + cfg.residual_tol || selected.f > 1.0 + 2.0 * cfg.residual_tol {
        return Err(fail(
            ExtractionStage::AtomSelection,
            format!(
                "smallest atom value F = {:.6e} exceeds F(Z) = {f_z:.6e}",
                selected.f
            ),
            &trace,
        ));
    }

    let y_root = if (selected.f - 1.0).abs() <= cfg.residual_tol {
        selected.node
    } else {
        let y = root_find_f_equal_one(h, k, selected.node, cfg)
            .map_err(|e| fail(ExtractionStage::RootFinding, e.to_string(), &trace))?;
        trace.root_y = Some(y);
        y
    };

    let zy =
        atom(y_root, n).map_err(|e| fail(ExtractionStage::RootFinding, e.to_string(), &trace))?;
    let xi = xi_of(&zy, h);
    let w =
        w_from_xi(&xi, &cv).map_err(|e| fail(ExtractionStage::RankOne, e.to_string(), &trace))?;
    let xp = &zy - &w * w.transpose();
    let (vals, vecs) = sym_eigen(&xp);
    let top = vals[n - 1];
    let second = if n >= 2 { vals[n - 2] } else { 0.0 };
    let floor = cfg.psd_tol * top.abs().max(zy.norm());
    if !(top > 0.0) || second > floor || vals[0] < -floor {
        return Err(fail(
            ExtractionStage::RankOne,
            format!("Z(y) − wwᵀ is not rank one (eigenvalues {vals:?})"),
            &trace,
        ));
    }
    let v = vecs.column(n - 1) * top.sqrt();
    trace.v_out = Some(v.clone());
    trace.w_out = Some(w.clone());

    let residual = verify_witness(&a, &b, &v, &w, cfg)
        .map_err(|e| fail(ExtractionStage::Verification, e.to_string(), &trace))?;
    trace.residual = Some(residual);
    if residual > cfg.residual_tol {
        return Err(fail(
            ExtractionStage::Verification,
            format!("witness residual {residual:.3e} exceeds tolerance"),
            &trace,
        ));
    }
    Ok((v, w, trace))
}

/// Result of an extraction performed on a pair in arbitrary coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PairExtraction {
    /// Witness in the caller's coordinates.
    pub v: Vector,
    pub w: Vector,
    /// Witness residual re-verified in the caller's coordinates.
    pub residual: f64,
    pub h: Vector,
    pub k: Vector,
    pub reduced_dim: usize,
    pub trace: ExtractionTrace,
}

/// Restricts `(X, Y)` to the controllable subspace, moves to companion
/// coordinates, extracts, and maps the witness back.
pub fn extract_for_pair(pair: &RankOnePair, x: &Matrix, y: &Matrix) -> Result<PairExtraction> {
    let cfg = pair.cfg();
    let n = pair.dim();
    for m in [x, y] {
        let d = check_square(m)?;
        if d != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: d,
            });
        }
    }
    let residual = verify_pair_solution(pair.a(), pair.b(), x, y, cfg)?;
    if residual > cfg.residual_tol {
        return Err(fail(
            ExtractionStage::Input,
            format!("(X, Y) does not solve the Lyapunov pair equation (residual {residual:.3e})"),
            &ExtractionTrace::default(),
        ));
    }
    let restriction = reduce_to_controllable(pair)?;
    let companion = companion_reduction(&restriction.pair)?;
    let to_companion = |m: &Matrix| {
        let r = companion.to_companion_symmetric(&restriction.restrict_symmetric(m));
        (&r + r.transpose()) * 0.5
    };
    let xc = to_companion(x);
    let yc = to_companion(y);
    let (vc, wc, trace) = extract_rank_one(&xc, &yc, companion.h(), companion.k(), cfg)?;
    let v = restriction.embed_vector(&companion.from_companion_vector(&vc));
    let w = restriction.embed_vector(&companion.from_companion_vector(&wc));
    let residual = verify_witness(pair.a(), pair.b(), &v, &w, cfg)?;
    if residual > cfg.residual_tol {
        return Err(fail(
            ExtractionStage::Verification,
            format!("witness residual {residual:.3e} in original coordinates exceeds tolerance"),
            &trace,
        ));
    }
    Ok(PairExtraction {
        v,
        w,
        residual,
        h: companion.h().clone(),
        k: companion.k().clone(),
        reduced_dim: restriction.dim(),
        trace,
    })
}

/// Checks that `m` is PSD, for callers assembling inputs.
pub fn is_psd(m: &Matrix, cfg: &ToleranceConfig) -> Result<bool> {
    Ok(psd_check(m, cfg)?.is_psd)
}
