use std::path::Path;

use cqlf_core::selftest::run_selftest;
use cqlf_core::{
    construct_cqlf, construct_witness, decide_pair, extract_for_pair, moment_decompose,
    verify_cqlf, verify_witness, ExtractionTrace, RankOnePair, SignedHankel,
};

use crate::input::{self, Certificate};
use crate::json::Json;
use crate::{echo, exit, Failure, Outcome};

pub fn decide(path: &Path, tol: Option<f64>, certify: bool) -> Result<Outcome, Failure> {
    let doc = input::read_document(path)?;
    let cfg = input::tolerances(Some(&doc), tol)?;
    let a = input::required_matrix(&doc, "A")?;
    let b = input::required_matrix(&doc, "B")?;
    let pair = RankOnePair::new(a.clone(), b.clone(), &cfg)?;
    let r = decide_pair(&pair)?;

    let eigenvalues: Vec<Json> = r
        .ab_spectrum
        .values
        .iter()
        .map(|z| vec![z.re, z.im].into())
        .collect();
    let mut report = Json::obj()
        .with("verdict", if r.has_cqlf { "cqlf" } else { "no-cqlf" })
        .with("dim", r.dim)
        .with("reduced_dim", r.reduced_dim)
        .with("ab_eigenvalues", eigenvalues)
        .with("negative_real", r.negative_real_eigs.clone())
        .with("circle_min", r.circle_min)
        .with("methods_agree", r.methods_agree)
        .with("marginal", r.marginal);

    let verdict_code = if r.has_cqlf { exit::OK } else { exit::NO_CQLF };
    let (certificate, code) = if !certify {
        (Json::Null, verdict_code)
    } else if r.has_cqlf {
        match construct_cqlf(&pair, &cfg) {
            Ok(c) => {
                let m = verify_cqlf(&a, &b, &c.p, &cfg)?;
                let cert = Json::obj()
                    .with("P", &c.p)
                    .with("margins", vec![m.margin_p, m.margin_a, m.margin_b])
                    .with("iterations", c.iterations);
                (
                    cert,
                    if m.accepted {
                        verdict_code
                    } else {
                        exit::UNCERTIFIED
                    },
                )
            }
            Err(e) => {
                eprintln!("error: {e}");
                report = report.with("certificate_error", e.to_string());
                (Json::Null, exit::UNCERTIFIED)
            }
        }
    } else {
        match construct_witness(&pair, &cfg) {
            Ok(w) => {
                let residual = verify_witness(&a, &b, &w.v, &w.w, &cfg)?;
                let cert = Json::obj()
                    .with("v", &w.v)
                    .with("w", &w.w)
                    .with("alpha", w.alpha)
                    .with("lambda", w.lambda)
                    .with("residual", residual);
                let ok = residual <= cfg.residual_tol;
                (cert, if ok { verdict_code } else { exit::UNCERTIFIED })
            }
            Err(e) => {
                eprintln!("error: {e}");
                report = report.with("certificate_error", e.to_string());
                (Json::Null, exit::UNCERTIFIED)
            }
        }
    };
    if code == exit::UNCERTIFIED {
        eprintln!("error: verdict reached but no certificate passed verification");
    }
    let report = report
        .with("certificate", certificate)
        .with("A", &a)
        .with("B", &b);
    Ok(Outcome {
        code,
        report: echo(report, Some(&cfg)),
    })
}

pub fn verify(path: &Path, tol: Option<f64>) -> Result<Outcome, Failure> {
    let doc = input::read_document(path)?;
    let cfg = input::tolerances(Some(&doc), tol)?;
    let a = input::required_matrix(&doc, "A")?;
    let b = input::required_matrix(&doc, "B")?;
    let (report, ok) = match input::certificate(&doc)? {
        Certificate::Cqlf(p) => {
            let m = verify_cqlf(&a, &b, &p, &cfg)?;
            let report = Json::obj()
                .with("certificate_kind", "cqlf")
                .with("verified", m.accepted)
                .with("margins", vec![m.margin_p, m.margin_a, m.margin_b]);
            (report, m.accepted)
        }
        Certificate::Witness(v, w) => {
            let residual = verify_witness(&a, &b, &v, &w, &cfg)?;
            let ok = residual <= cfg.residual_tol;
            let report = Json::obj()
                .with("certificate_kind", "witness")
                .with("verified", ok)
                .with("residual", residual);
            (report, ok)
        }
    };
    if !ok {
        eprintln!("error: certificate does not verify");
    }
    Ok(Outcome {
        code: if ok { exit::OK } else { exit::UNCERTIFIED },
        report: echo(report, Some(&cfg)),
    })
}

pub fn moment(path: &Path, tol: Option<f64>) -> Result<Outcome, Failure> {
    let doc = input::read_document(path)?;
    let cfg = input::tolerances(Some(&doc), tol)?;
    let z = input::vector(&doc, "z")?.ok_or_else(|| Failure::input("missing \"z\""))?;
    let hankel = SignedHankel::new(z.as_slice().to_vec())?;
    let d = moment_decompose(&hankel, &cfg)?;
    let report = Json::obj()
        .with("n", d.n)
        .with("nodes", d.nodes.clone())
        .with("weights", d.weights.clone())
        .with("trailing_mass", d.trailing_mass)
        .with("residual", d.residual)
        .with("rank_ambiguous", d.rank_ambiguous)
        .with("zero_node_violation", d.zero_node_violation);
    Ok(Outcome {
        code: exit::OK,
        report: echo(report, Some(&cfg)),
    })
}

pub fn extract(path: &Path, tol: Option<f64>) -> Result<Outcome, Failure> {
    let doc = input::read_document(path)?;
    let cfg = input::tolerances(Some(&doc), tol)?;
    let a = input::required_matrix(&doc, "A")?;
    let b = input::required_matrix(&doc, "B")?;
    let x = input::required_matrix(&doc, "X")?;
    let y = input::required_matrix(&doc, "Y")?;
    let pair = RankOnePair::new(a.clone(), b.clone(), &cfg)?;
    let out = extract_for_pair(&pair, &x, &y)?;
    let residual = verify_witness(&a, &b, &out.v, &out.w, &cfg)?;
    let ok = residual <= cfg.residual_tol;
    let report = Json::obj()
        .with("v", &out.v)
        .with("w", &out.w)
        .with("residual", residual)
        .with("verified", ok)
        .with("h", &out.h)
        .with("k", &out.k)
        .with("reduced_dim", out.reduced_dim)
        .with("trace", trace_json(&out.trace));
    Ok(Outcome {
        code: if ok { exit::OK } else { exit::UNCERTIFIED },
        report: echo(report, Some(&cfg)),
    })
}

pub fn trace_json(t: &ExtractionTrace) -> Json {
    let decomposition = t.decomposition.as_ref().map(|d| {
        Json::obj()
            .with("nodes", d.nodes.clone())
            .with("weights", d.weights.clone())
            .with("trailing_mass", d.trailing_mass)
            .with("residual", d.residual)
    });
    let atoms: Vec<Json> = t
        .atoms
        .iter()
        .map(|a| {
            Json::obj()
                .with("node", a.node)
                .with("weight", a.weight)
                .with("denominator", a.denominator)
                .with("f", a.f)
        })
        .collect();
    Json::obj()
        .with("z", t.z.as_ref().map(|z| Json::from(z.z())))
        .with("structure_residual", t.structure_residual)
        .with("w_init", t.w_init.as_ref())
        .with("f_z", t.f_z)
        .with("decomposition", decomposition)
        .with("atoms", atoms)
        .with("selected_node", t.selected_node)
        .with("f_at_selected", t.f_at_selected)
        .with("root_y", t.root_y)
        .with("v_companion", t.v_out.as_ref())
        .with("w_companion", t.w_out.as_ref())
        .with("residual_companion", t.residual)
}

pub fn selftest(cases: usize, seed: u64, tol: Option<f64>) -> Result<Outcome, Failure> {
    let cfg = input::tolerances(None, tol)?;
    if cases == 0 {
        eprintln!("warning: zero cases requested; every suite passes trivially");
    }
    let summaries = run_selftest(cases, seed, &cfg)?;
    let passed = summaries.iter().all(|s| s.passed());
    for s in &summaries {
        eprintln!(
            "{:<5} {:<28} cases {:>5}  failed {:>3}  marginal {:>3}  worst {:.3e}",
            if s.passed() { "ok" } else { "FAIL" },
            s.name,
            s.cases,
            s.failed,
            s.marginal,
            s.worst
        );
    }
    let suites: Vec<Json> = summaries
        .iter()
        .map(|s| {
            Json::obj()
                .with("name", s.name)
                .with("passed", s.passed())
                .with("cases", s.cases)
                .with("failed", s.failed)
                .with("marginal", s.marginal)
                .with("worst", s.worst)
                .with("notes", s.notes.clone())
        })
        .collect();
    let mut report = Json::obj()
        .with("cases", cases)
        .with("seed", seed)
        .with("passed", passed);
    if cases == 0 {
        report = report.with("warning", "zero cases requested");
    }
    let report = report.with("suites", suites);
    Ok(Outcome {
        code: if passed { exit::OK } else { exit::UNCERTIFIED },
        report: echo(report, Some(&cfg)),
    })
}
