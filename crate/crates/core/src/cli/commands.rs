use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{RunConfig, EXIT_HYPOTHESIS, EXIT_NUMERICAL, EXIT_OK};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::heteroclinic::{check_positive, compute_heteroclinic, fit_decay, linear_window, DecayFit, PositivityReport, Trajectory};
use crate::model::hypotheses::{check_h1, h3_evidence, positivity_margin, H1Report, H3Report};
use crate::model::{Model, ModelKind};
use crate::numerics::max_norm;
use crate::output::{write_csv, write_json};
use crate::pde::{translation_error, validate_profile};
use crate::profile::{solve_profile, verify_front, wave_params, FrontReport, WaveProfile};
use crate::spectrum::{spectrum_report, SpectrumReport, StripCount};

/// Exit code and a human-readable summary of a finished command.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub summary: String,
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.pipeline.out.clone().unwrap_or_else(|| PathBuf::from("wavefront_out"))
}

fn speed_tag(c: f64) -> String {
    format!("c{c}")
}

#[derive(Serialize)]
struct SpeedRoot {
    c: f64,
    epsilon: f64,
    lambda: f64,
    v: Vec<f64>,
}

#[derive(Serialize)]
struct SpectrumArtifact<'a> {
    model: &'a str,
    params: serde_json::Value,
    lambda0: f64,
    eigvec: &'a [f64],
    simple: bool,
    dominant: bool,
    positive: bool,
    strip_counts: &'a [StripCount],
    speeds: Vec<SpeedRoot>,
}

fn write_spectrum(dir: &Path, model: &dyn Model, report: &SpectrumReport) -> Result<()> {
    let artifact = SpectrumArtifact {
        model: model.name(),
        params: model.params(),
        lambda0: report.lambda0,
        eigvec: &report.eigvec,
        simple: report.simple,
        dominant: report.dominant,
        positive: report.positive,
        strip_counts: &report.strip_counts,
        speeds: report.lambda_of_eps.iter().map(|p| SpeedRoot { c: 1.0 / p.0, epsilon: p.0, lambda: p.1, v: p.2.clone() }).collect(),
    };
    write_json(&dir.join("spectrum.json"), &artifact)
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Outcome> {
    let kind = cfg.build_model()?;
    let model = kind.as_model();
    let report = spectrum_report(model, &cfg.pipeline.speeds, &cfg.pipeline.tolerances)?;
    write_spectrum(&out_dir(cfg), model, &report)?;
    let mut summary = format!("lambda0 = {:.12} eigvec = {:?}", report.lambda0, report.eigvec);
    for p in &report.lambda_of_eps {
        let _ = write!(summary, "\nc = {} lambda(eps) = {:.12}", 1.0 / p.0, p.1);
    }
    if !report.positive {
        return Ok(Outcome { code: EXIT_HYPOTHESIS, summary: format!("{summary}\neigenvector is not positive") });
    }
    Ok(Outcome { code: EXIT_OK, summary })
}

/// Chemostat results in original coordinates: range of `S` along a solution.
#[derive(Serialize)]
struct OriginalRange {
    s_min: f64,
    s_max: f64,
    s0: f64,
    inside: bool,
}

fn original_range<'a>(kind: &ModelKind, states: impl Iterator<Item = &'a [f64]>) -> Option<OriginalRange> {
    let ModelKind::Chemostat(chem) = kind else { return None };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for u in states {
        let (s, _) = chem.to_original(u);
        lo = lo.min(s);
        hi = hi.max(s);
    }
    Some(OriginalRange { s_min: lo, s_max: hi, s0: chem.s0, inside: lo > 0.0 && hi < chem.s0 })
}

#[derive(Serialize)]
struct HeteroclinicArtifact {
    lambda0: f64,
    step: f64,
    t_start: f64,
    t_end: f64,
    converged_to_k: Option<f64>,
    positivity: PositivityReport,
    decay: Option<DecayFit>,
    decay_error: Option<String>,
    original: Option<OriginalRange>,
}

fn heteroclinic_artifact(kind: &ModelKind, spec: &SpectrumReport, traj: &Trajectory, tol: &Tolerances) -> HeteroclinicArtifact {
    let model = kind.as_model();
    let k_norm = max_norm(model.equilibrium());
    let fit = linear_window(traj, k_norm, tol)
        .ok_or_else(|| Error::FitRejected("no linear window".into()))
        .and_then(|w| fit_decay(traj, w, k_norm, tol));
    let (decay, decay_error) = match fit {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    HeteroclinicArtifact {
        lambda0: spec.lambda0,
        step: traj.step(),
        t_start: traj.t_start(),
        t_end: traj.t_end(),
        converged_to_k: traj.converged_to_k,
        positivity: check_positive(traj),
        decay,
        decay_error,
        original: original_range(kind, (0..traj.len()).map(|k| traj.value(k))),
    }
}

fn write_heteroclinic(dir: &Path, artifact: &HeteroclinicArtifact, traj: &Trajectory) -> Result<()> {
    traj.write_csv(&dir.join("heteroclinic.csv"))?;
    write_json(&dir.join("heteroclinic.json"), artifact)
}

pub fn cmd_heteroclinic(cfg: &RunConfig) -> Result<Outcome> {
    let kind = cfg.build_model()?;
    let model = kind.as_model();
    let tol = &cfg.pipeline.tolerances;
    let dir = out_dir(cfg);
    let spec = spectrum_report(model, &[], tol)?;
    if cfg.pipeline.write_upstream {
        write_spectrum(&dir, model, &spec)?;
    }
    let traj = compute_heteroclinic(model, &spec, tol)?;
    let artifact = heteroclinic_artifact(&kind, &spec, &traj, tol);
    write_heteroclinic(&dir, &artifact, &traj)?;
    let mut summary = format!("heteroclinic on [{}, {}], positive = {}", traj.t_start(), traj.t_end(), artifact.positivity.positive);
    if let Some(f) = &artifact.decay {
        let _ = write!(summary, ", lambda_fit = {:.8} (lambda0 = {:.8}), remainder slope = {:.4}", f.lambda_fit, spec.lambda0, f.remainder_slope);
    }
    let code = if artifact.positivity.positive { EXIT_OK } else { EXIT_HYPOTHESIS };
    Ok(Outcome { code, summary })
}

#[derive(Serialize)]
struct ProfileRow {
    c: f64,
    converged: bool,
    iterations: usize,
    rho_final: Option<f64>,
    residual: Option<f64>,
    positive: Option<bool>,
    monotone_left: Option<bool>,
    lambda_fit: Option<f64>,
    lambda_eps: Option<f64>,
    lambda_rel_err: Option<f64>,
    ok: bool,
    error: Option<String>,
}

#[derive(Serialize)]
struct ProfileArtifact<'a> {
    front: &'a FrontReport,
    final_change: f64,
    tail_mismatch: f64,
    right_gap: f64,
    tail_amplitude: f64,
    original: Option<OriginalRange>,
}

fn solve_speed(model: &dyn Model, spec: &SpectrumReport, het: &Trajectory, c: f64, tol: &Tolerances) -> Result<(WaveProfile, FrontReport)> {
    let params = wave_params(model, c, spec, tol)?;
    let psi = solve_profile(model, het, &params, tol)?;
    let report = verify_front(&psi, model, &params, tol);
    Ok((psi, report))
}

fn write_profile(dir: &Path, kind: &ModelKind, psi: &WaveProfile, front: &FrontReport) -> Result<()> {
    let tag = speed_tag(psi.c);
    psi.write_csv(&dir.join(format!("profile_{tag}.csv")))?;
    let artifact = ProfileArtifact {
        front,
        final_change: psi.diagnostics.final_change,
        tail_mismatch: psi.diagnostics.tail_mismatch,
        right_gap: psi.diagnostics.right_gap,
        tail_amplitude: psi.tail().amplitude,
        original: original_range(kind, (0..psi.len()).map(|j| psi.value(j))),
    };
    write_json(&dir.join(format!("front_{tag}.json")), &artifact)
}

/// Spectrum and heteroclinic, written when `write_upstream` is set.
fn upstream(cfg: &RunConfig, kind: &ModelKind) -> Result<(SpectrumReport, Trajectory)> {
    let model = kind.as_model();
    let tol = &cfg.pipeline.tolerances;
    let dir = out_dir(cfg);
    let spec = spectrum_report(model, &[], tol)?;
    let het = compute_heteroclinic(model, &spec, tol)?;
    if cfg.pipeline.write_upstream {
        write_spectrum(&dir, model, &spec)?;
        write_heteroclinic(&dir, &heteroclinic_artifact(kind, &spec, &het, tol), &het)?;
    }
    Ok((spec, het))
}

pub fn cmd_profile(cfg: &RunConfig) -> Result<Outcome> {
    let speeds = &cfg.pipeline.speeds;
    if speeds.is_empty() {
        return Err(Error::Config("profile needs at least one speed (pipeline.speeds or --speeds)".into()));
    }
    let kind = cfg.build_model()?;
    let model = kind.as_model();
    let tol = &cfg.pipeline.tolerances;
    let dir = out_dir(cfg);
    let (spec, het) = upstream(cfg, &kind)?;
    let results: Vec<Result<(WaveProfile, FrontReport)>> = speeds.par_iter().map(|&c| solve_speed(model, &spec, &het, c, tol)).collect();

    let mut rows = Vec::with_capacity(speeds.len());
    let mut summary = String::from("c  converged  rho_final  residual  positive  lambda_fit  lambda_eps");
    for (&c, res) in speeds.iter().zip(&results) {
        let row = match res {
            Ok((psi, front)) => {
                write_profile(&dir, &kind, psi, front)?;
                ProfileRow {
                    c,
                    converged: psi.diagnostics.converged,
                    iterations: psi.diagnostics.iterations,
                    rho_final: front.contraction_ratios.last().copied(),
                    residual: Some(front.residual),
                    positive: Some(front.positive),
                    monotone_left: Some(front.monotone_left),
                    lambda_fit: Some(front.lambda_fit),
                    lambda_eps: Some(front.lambda_eps),
                    lambda_rel_err: Some(front.lambda_rel_err),
                    ok: front.ok,
                    error: None,
                }
            }
            Err(e) => ProfileRow {
                c,
                converged: false,
                iterations: 0,
                rho_final: None,
                residual: None,
                positive: None,
                monotone_left: None,
                lambda_fit: None,
                lambda_eps: None,
                lambda_rel_err: None,
                ok: false,
                error: Some(e.to_string()),
            },
        };
        let num = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6e}"));
        let _ = write!(
            summary,
            "\n{}  {}  {}  {}  {}  {}  {}",
            c,
            row.converged,
            num(row.rho_final),
            num(row.residual),
            row.positive.map_or("-".to_string(), |p| p.to_string()),
            num(row.lambda_fit),
            num(row.lambda_eps),
        );
        if let Some(e) = &row.error {
            let _ = write!(summary, "  ({e})");
        }
        rows.push(row);
    }
    write_json(&dir.join("profile_summary.json"), &rows)?;

    let code = if rows.iter().all(|r| r.error.is_some()) {
        summary.push_str("\nno speed converged; the fixed-point map contracts only for larger c");
        EXIT_NUMERICAL
    } else if rows.iter().any(|r| r.positive == Some(false)) {
        EXIT_HYPOTHESIS
    } else if rows.iter().any(|r| !r.ok) {
        EXIT_NUMERICAL
    } else {
        EXIT_OK
    };
    Ok(Outcome { code, summary })
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<Outcome> {
    let c = cfg
        .pipeline
        .validate_speed
        .or_else(|| cfg.pipeline.speeds.first().copied())
        .ok_or_else(|| Error::Config("validate needs pipeline.validate_speed or a speed".into()))?;
    let kind = cfg.build_model()?;
    let model = kind.as_model();
    let tol = &cfg.pipeline.tolerances;
    let dir = out_dir(cfg);
    cfg.pipeline.pde.check(model)?;
    let (spec, het) = upstream(cfg, &kind)?;
    let (psi, front) = solve_speed(model, &spec, &het, c, tol)?;
    if cfg.pipeline.write_upstream {
        write_profile(&dir, &kind, &psi, &front)?;
    }
    let (report, record, series) = validate_profile(model, &psi, &cfg.pipeline.pde)?;
    let translation = record
        .snapshots
        .iter()
        .map(|snap| translation_error(&record, snap, &psi, c, report.x0).map(|te| vec![snap.t, te.l2, te.shift]))
        .collect::<Result<Vec<_>>>()?;
    write_json(&dir.join("validation.json"), &report)?;
    series.write_csv(&dir.join("front.csv"))?;
    write_csv(&dir.join("translation.csv"), &["t".into(), "l2".into(), "shift".into()], translation)?;
    record.write(&dir.join("snapshots"))?;
    let summary = format!(
        "c = {c}: measured speed {:.6} (r2 {:.6}), relative L2 error {:.3e}, wrong-speed error {:.3e}, {}",
        report.speed,
        report.r2,
        report.relative_error,
        report.wrong_speed_error,
        if report.ok { "PASS" } else { "FAIL" }
    );
    Ok(Outcome { code: if report.ok { EXIT_OK } else { EXIT_NUMERICAL }, summary })
}

#[derive(Serialize)]
struct Verdict<T: Serialize> {
    ok: bool,
    evidence: T,
}

#[derive(Serialize)]
struct H2Evidence {
    bound: f64,
    samples: usize,
    beta: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct H3Evidence {
    report: Option<H3Report>,
    b_tau: Option<f64>,
    condition_met: Option<bool>,
    note: Option<String>,
}

#[derive(Serialize)]
struct H4Evidence {
    report: Option<SpectrumReport>,
    error: Option<String>,
}

#[derive(Serialize)]
struct HypothesesArtifact {
    model: String,
    params: serde_json::Value,
    seed: u64,
    h1: Verdict<H1Report>,
    h2: Verdict<H2Evidence>,
    h3: Verdict<H3Evidence>,
    h4: Verdict<H4Evidence>,
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome> {
    let kind = cfg.build_model()?;
    let model = kind.as_model();
    let tol = &cfg.pipeline.tolerances;
    let seed = cfg.pipeline.seed;

    let h1 = check_h1(model, tol);
    let h1_ok = h1.ok;
    let bound = max_norm(model.equilibrium());
    let (beta, h2_error) = match positivity_margin(model, bound, tol, seed) {
        Ok(b) => (b, None),
        Err(e) => (None, Some(e.to_string())),
    };
    let h2 = Verdict { ok: beta.is_some(), evidence: H2Evidence { bound, samples: tol.positivity_samples, beta, error: h2_error } };

    let (b_tau, condition_met) = match &kind {
        ModelKind::Logistic(l) => {
            let (bt, met) = l.attractivity_condition();
            (Some(bt), Some(met))
        }
        _ => (None, None),
    };
    let (report, h3_error) = match h1_ok.then(|| h3_evidence(model, tol, seed)) {
        Some(Ok(r)) => (Some(r), None),
        Some(Err(e)) => (None, Some(e.to_string())),
        None => (None, None),
    };
    let note = match (condition_met, &report) {
        (_, None) if !h1_ok => Some("skipped: no positive equilibrium".to_string()),
        (_, None) => h3_error,
        (Some(false), _) => Some("condition b*tau <= 3/2 not met; simulation evidence may still pass".to_string()),
        _ => None,
    };
    let h3 = Verdict { ok: report.as_ref().is_some_and(|r| r.ok), evidence: H3Evidence { report, b_tau, condition_met, note } };

    let h4 = match spectrum_report(model, &[], tol) {
        Ok(r) => Verdict { ok: r.positive && r.simple && r.dominant, evidence: H4Evidence { report: Some(r), error: None } },
        Err(e) => Verdict { ok: false, evidence: H4Evidence { report: None, error: Some(e.to_string()) } },
    };

    let verdicts = [("H1", h1_ok), ("H2", h2.ok), ("H3", h3.ok), ("H4", h4.ok)];
    let artifact = HypothesesArtifact {
        model: model.name().to_string(),
        params: model.params(),
        seed,
        h1: Verdict { ok: h1_ok, evidence: h1 },
        h2,
        h3,
        h4,
    };
    write_json(&out_dir(cfg).join("hypotheses.json"), &artifact)?;
    let summary = verdicts.iter().map(|(h, ok)| format!("{h}: {}", if *ok { "pass" } else { "FAIL" })).collect::<Vec<_>>().join("\n");
    let code = if verdicts.iter().all(|(_, ok)| *ok) { EXIT_OK } else { EXIT_HYPOTHESIS };
    Ok(Outcome { code, summary })
}
