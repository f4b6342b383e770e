use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use crate::classifier::{
    constant_k1_diagnosis, crosscheck_theorem, select_modal_order, Diagnosis, GawkReport, Verdict,
};
use crate::frenet::{analyze_at, KappaDerivs, DEFAULT_ORDER_TOL};
use crate::normal_parts::{assemble_normals, NormalParts};
use crate::synthesis::{integrate_frenet, solve_ode as solve, CurvatureProfile, OdeFlags, OdeKind, OdeSetup, SynthesisError};
use crate::verification::{
    ambient_dim, render_text, run_pipeline, run_suite, window_indices, PipelineOptions, SuiteReport, SuiteSpec,
};

use super::output::{csv_float, emit, svg_polyline, to_json, validate_projection, Csv};
use super::source::{linspace, load, Source};
use super::{AnalyzeArgs, ClassifyArgs, CliError, Format, PlotdataArgs, SolveOdeArgs, SynthesizeArgs, VerifyArgs};

const SIMPSON_PANELS: usize = 8;

fn numeric(e: impl ToString) -> CliError {
    CliError::numeric(e.to_string())
}

fn synthesis_error(e: SynthesisError) -> CliError {
    match e {
        SynthesisError::InvalidParameter(_)
        | SynthesisError::InvalidProfile(_)
        | SynthesisError::NonPositive { .. }
        | SynthesisError::OutOfRange { .. }
        | SynthesisError::ConstantKappa3
        | SynthesisError::Parse(_) => CliError::input(e.to_string()),
        _ => CliError::numeric(e.to_string()),
    }
}

fn check_samples(n: usize) -> Result<(), CliError> {
    if n < 2 {
        return Err(CliError::input(format!("--samples must be at least 2, got {n}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct AnalyzeRow {
    t: f64,
    s: f64,
    d: usize,
    kappas: [f64; 4],
    derivs: KappaDerivs,
    lambda: [f64; 3],
    mu: [f64; 4],
    n_norms: [f64; 4],
}

impl AnalyzeRow {
    fn new(t: f64, s: f64, p: &NormalParts) -> AnalyzeRow {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        AnalyzeRow {
            t,
            s,
            d: p.d,
            kappas: p.kappas,
            derivs: p.derivs,
            lambda: [p.lambda2, p.lambda3, p.lambda4],
            mu: [p.mu2, p.mu3, p.mu4, p.mu5],
            n_norms: std::array::from_fn(|k| norm(&p.n[k])),
        }
    }
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    command: &'static str,
    source: String,
    rows: &'a [AnalyzeRow],
}

/// Arclength from `ts[0]` to each entry by composite Simpson on the speed.
fn arclengths(def: &crate::expr::CurveDef, ts: &[f64]) -> Result<Vec<f64>, CliError> {
    let speed = |t: f64| -> Result<f64, CliError> { Ok(def.eval_jet(t).map_err(numeric)?.speed()) };
    let mut out = Vec::with_capacity(ts.len());
    let mut acc = 0.0;
    for (i, &t) in ts.iter().enumerate() {
        if i > 0 {
            let (a, h) = (ts[i - 1], (t - ts[i - 1]) / (2 * SIMPSON_PANELS) as f64);
            let mut sum = speed(a)? + speed(t)?;
            for j in 1..2 * SIMPSON_PANELS {
                sum += if j % 2 == 1 { 4.0 } else { 2.0 } * speed(a + j as f64 * h)?;
            }
            acc += sum * h / 3.0;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Parameters, arclengths and normal parts of a sampled curve.
type CurveParts = (Vec<f64>, Vec<f64>, Vec<NormalParts>);

fn curve_parts(def: &crate::expr::CurveDef, samples: usize) -> Result<CurveParts, CliError> {
    let ts = linspace(def.t_lo, def.t_hi, samples);
    let s = arclengths(def, &ts)?;
    let parts = ts
        .iter()
        .zip(&s)
        .map(|(&t, &si)| {
            let mut f = analyze_at(def, t, DEFAULT_ORDER_TOL).map_err(|e| numeric(format!("t = {t}: {e}")))?;
            f.s = si;
            assemble_normals(&f).map_err(numeric)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((ts, s, parts))
}

fn profile_parts(profile: &CurvatureProfile, step: f64, samples: usize) -> Result<Vec<NormalParts>, CliError> {
    let curve = integrate_frenet(profile, ambient_dim(profile.d), None, step).map_err(synthesis_error)?;
    let frames = curve.frames.as_ref().expect("integration records frames");
    window_indices(&curve, profile.s_range, samples)
        .into_iter()
        .map(|i| {
            let f = profile.frenet_data(curve.s[i], frames[i].clone()).map_err(synthesis_error)?;
            assemble_normals(&f).map_err(numeric)
        })
        .collect()
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    check_samples(args.samples)?;
    let source = load(&args.source)?;
    let rows: Vec<AnalyzeRow> = match &source {
        Source::Curve(def) => {
            let (ts, s, parts) = curve_parts(def, args.samples)?;
            parts.iter().zip(ts.iter().zip(&s)).map(|(p, (&t, &si))| AnalyzeRow::new(t, si, p)).collect()
        }
        Source::Profile(p) => profile_parts(p, args.source.step, args.samples)?
            .iter()
            .map(|x| AnalyzeRow::new(x.s, x.s, x))
            .collect(),
    };
    let text = match args.format {
        Format::Json => to_json(&AnalyzeReport { command: "analyze", source: source.label(), rows: &rows })?,
        Format::Csv => {
            let mut csv = Csv::new(&[
                "t", "s", "d", "kappa1", "kappa2", "kappa3", "kappa4", "kappa1_d1", "kappa1_d2", "kappa1_d3", "kappa2_d1",
                "kappa2_d2", "kappa3_d1", "lambda2", "lambda3", "lambda4", "mu2", "mu3", "mu4", "mu5", "n1_norm", "n2_norm",
                "n3_norm", "n4_norm",
            ]);
            for r in &rows {
                let kd = r.derivs;
                let floats = [r.t, r.s]
                    .into_iter()
                    .map(csv_float)
                    .chain(std::iter::once(r.d.to_string()))
                    .chain(r.kappas.iter().copied().map(csv_float))
                    .chain([kd.k1p, kd.k1pp, kd.k1ppp, kd.k2p, kd.k2pp, kd.k3p].map(csv_float))
                    .chain(r.lambda.iter().copied().map(csv_float))
                    .chain(r.mu.iter().copied().map(csv_float))
                    .chain(r.n_norms.iter().copied().map(csv_float));
                csv.row(floats);
            }
            csv.into_string()
        }
    };
    emit(args.out.out.as_deref(), &text)
}

#[derive(Serialize)]
struct ClassifyReport {
    command: &'static str,
    source: String,
    d: usize,
    samples: usize,
    excluded_samples: usize,
    mu5_max: f64,
    /// Vector-form verdicts of types 1 to 7.
    verdicts: [Verdict; 7],
    agree: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    roundtrip_error: Option<f64>,
    vector: GawkReport,
    scalar: GawkReport,
    diagnosis: Option<Diagnosis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnosis_note: Option<String>,
}

pub fn classify(args: &ClassifyArgs) -> Result<(), CliError> {
    check_samples(args.samples)?;
    let cfg = args.tol.config(args.samples)?;
    let source = load(&args.source)?;
    let (parts, excluded, roundtrip, crosscheck, diagnosis) = match &source {
        Source::Curve(def) => {
            let (_, _, parts) = curve_parts(def, args.samples)?;
            let (parts, excluded) = select_modal_order(parts);
            if excluded > 0 {
                log::warn!("{excluded} samples of a different osculating order were excluded");
            }
            let x = crosscheck_theorem(&parts, &cfg).map_err(numeric)?;
            let diag = constant_k1_diagnosis(&parts, &cfg);
            (parts, excluded, None, x, diag)
        }
        Source::Profile(p) => {
            let opts = PipelineOptions { step: args.source.step, ..PipelineOptions::default() };
            let out = run_pipeline(p, &cfg, &opts).map_err(numeric)?;
            (out.parts, 0, Some(out.roundtrip_error), out.crosscheck, out.diagnosis)
        }
    };
    let (diagnosis, diagnosis_note) = match diagnosis {
        Ok(d) => (Some(d), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = ClassifyReport {
        command: "classify",
        source: source.label(),
        d: crosscheck.vector.d,
        samples: parts.len(),
        excluded_samples: excluded,
        mu5_max: crosscheck.vector.mu5_max,
        verdicts: crosscheck.vector.verdicts(),
        agree: crosscheck.all_agree(),
        roundtrip_error: roundtrip,
        vector: crosscheck.vector,
        scalar: crosscheck.scalar,
        diagnosis,
        diagnosis_note,
    };
    emit(args.out.out.as_deref(), &to_json(&report)?)
}

fn require_profile(source: Source, what: &str) -> Result<CurvatureProfile, CliError> {
    match source {
        Source::Profile(p) => Ok(p),
        Source::Curve(_) => Err(CliError::input(format!("{what} needs --profile or --canonical"))),
    }
}

pub fn synthesize(args: &SynthesizeArgs) -> Result<(), CliError> {
    let profile = require_profile(load(&args.source)?, "synthesize")?;
    let dim = args.dim.unwrap_or_else(|| ambient_dim(profile.d));
    let curve = integrate_frenet(&profile, dim, None, args.source.step).map_err(synthesis_error)?;
    let header: Vec<String> = std::iter::once("s".to_string()).chain((1..=dim).map(|i| format!("x{i}"))).collect();
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (s, p) in curve.s.iter().zip(&curve.points) {
        csv.row(std::iter::once(csv_float(*s)).chain(p.iter().copied().map(csv_float)));
    }
    emit(args.out.out.as_deref(), &csv.into_string())
}

#[derive(Serialize)]
struct OdeMeta {
    command: &'static str,
    equation: OdeKind,
    kappa1: f64,
    c: f64,
    initial_value: f64,
    initial_derivative: f64,
    requested_range: [f64; 2],
    s_range: [f64; 2],
    nodes: usize,
    out_step: f64,
    tol: f64,
    method: String,
    flags: OdeFlags,
    max_residual: f64,
}

pub fn solve_ode(args: &SolveOdeArgs) -> Result<(), CliError> {
    let kind = args.equation;
    let (y0, wrong) = if kind.solves_kappa3() { (args.k3, args.k2) } else { (args.k2, args.k3) };
    let name = if kind.solves_kappa3() { "--k3" } else { "--k2" };
    let y0 = y0.ok_or_else(|| CliError::input(format!("{kind} needs the initial value {name}")))?;
    if wrong.is_some() {
        return Err(CliError::input(format!("{kind} takes its initial value from {name} only")));
    }
    let needs_c = matches!(kind, OdeKind::Gaw3Order4 | OdeKind::Gaw4Order4);
    let c = match (needs_c, args.c) {
        (true, Some(c)) => c,
        (true, None) => return Err(CliError::input(format!("{kind} needs --c"))),
        (false, Some(_)) => return Err(CliError::input(format!("{kind} takes no --c"))),
        (false, None) => 0.0,
    };
    let range = [args.range[0], args.range[1]];
    let setup = OdeSetup { kappa1: args.k1, c, y0, yp0: args.dk, s_range: range, tol: args.tol, out_step: args.step };
    let sol = solve(kind, &setup).map_err(synthesis_error)?;

    let idx = sol.solved_index();
    let mut header = vec!["s".to_string(), format!("kappa{idx}"), format!("kappa{idx}_d1")];
    if let Some(comp) = &sol.companion {
        header.push(format!("kappa{}", comp.index));
        header.push(format!("kappa{}_d1", comp.index));
    }
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for i in 0..sol.s.len() {
        let mut row = vec![csv_float(sol.s[i]), csv_float(sol.value[i]), csv_float(sol.deriv[i])];
        if let Some(comp) = &sol.companion {
            row.push(csv_float(comp.value[i]));
            row.push(csv_float(comp.deriv[i]));
        }
        csv.row(row);
    }
    let meta = OdeMeta {
        command: "solve-ode",
        equation: kind,
        kappa1: sol.kappa1,
        c: sol.c,
        initial_value: y0,
        initial_derivative: args.dk,
        requested_range: sol.requested_range,
        s_range: sol.s_range(),
        nodes: sol.s.len(),
        out_step: sol.out_step,
        tol: sol.tol,
        method: sol.method.clone(),
        flags: sol.flags,
        max_residual: sol.max_residual,
    };
    let meta_json = to_json(&meta)?;
    emit(args.out.out.as_deref(), &csv.into_string())?;
    let meta_path: Option<PathBuf> = args.meta.clone().or_else(|| {
        args.out.out.as_ref().map(|p| {
            let mut name = p.as_os_str().to_owned();
            name.push(".meta.json");
            PathBuf::from(name)
        })
    });
    match meta_path {
        Some(p) => fs::write(&p, &meta_json).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?,
        None => eprint!("{meta_json}"),
    }
    if sol.flags.any() {
        let [a, b] = sol.s_range();
        return Err(CliError::ode(format!(
            "solution stopped at s = {b} (blow_up={}, order_collapse={}, singularity={}); output covers [{a}, {b}]",
            sol.flags.blow_up, sol.flags.order_collapse, sol.flags.singularity
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    command: &'static str,
    #[serde(flatten)]
    report: &'a SuiteReport,
}

pub fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    let cfg = args.tol.config(args.samples)?;
    let spec = match &args.suite {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            SuiteSpec::from_toml(&text).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?
        }
        None => SuiteSpec::default_suite(),
    };
    let report = run_suite(&spec, &cfg, args.probes);
    let json = to_json(&VerifyReport { command: "verify", report: &report })?;
    if let Some(p) = &args.out.out {
        emit(Some(p), &json)?;
    }
    match args.format {
        Some(Format::Json) => emit(None, &json)?,
        Some(Format::Csv) => return Err(CliError::input("verify writes a text summary or JSON, not CSV")),
        None => emit(None, &render_text(&report))?,
    }
    if report.all_passed {
        Ok(())
    } else {
        Err(CliError::suite(format!("{} of {} checks failed", report.failed, report.passed + report.failed)))
    }
}

pub fn plotdata(args: &PlotdataArgs) -> Result<(), CliError> {
    check_samples(args.samples)?;
    let source = load(&args.source)?;
    let (first, params, points): (&str, Vec<f64>, Vec<Vec<f64>>) = match &source {
        Source::Curve(def) => {
            let ts = linspace(def.t_lo, def.t_hi, args.samples);
            let pts = ts
                .iter()
                .map(|&t| def.eval_point(t).map_err(|e| numeric(format!("t = {t}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            ("t", ts, pts)
        }
        Source::Profile(p) => {
            let curve = integrate_frenet(p, ambient_dim(p.d), None, args.source.step).map_err(synthesis_error)?;
            let idx = window_indices(&curve, p.s_range, args.samples);
            ("s", idx.iter().map(|&i| curve.s[i]).collect(), idx.iter().map(|&i| curve.points[i].clone()).collect())
        }
    };
    let dim = points.first().map_or(0, Vec::len);
    let proj = validate_projection(&args.proj, dim).map_err(CliError::input)?;
    let header: Vec<String> = std::iter::once(first.to_string()).chain(proj.iter().map(|i| format!("x{}", i + 1))).collect();
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (t, p) in params.iter().zip(&points) {
        csv.row(std::iter::once(csv_float(*t)).chain(proj.iter().map(|&i| csv_float(p[i]))));
    }
    if let Some(path) = &args.svg {
        let xy: Vec<(f64, f64)> = points.iter().map(|p| (p[proj[0]], p[proj[1]])).collect();
        let svg = svg_polyline(&xy, &source.label());
        fs::write(path, svg).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    }
    emit(args.out.out.as_deref(), &csv.into_string())
}
