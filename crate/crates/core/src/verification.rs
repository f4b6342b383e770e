//! End-to-end proposition suite: synthesize, extract, classify, compare.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{
    constant_k1_diagnosis, crosscheck_theorem, ClassifyConfig, ClassifyError, Clause, Diagnosis, GawkReport,
    TheoremCrosscheck, Verdict,
};
use crate::frenet::{extract_at, CurveSamples, ExtractConfig, FrenetError};
use crate::normal_parts::{assemble_normals, NormalParts, NormalPartsError};
use crate::synthesis::{
    canonical, gaw5_profile, integrate_frenet, solve_ode, CanonicalKind, CurvatureProfile, KappaFn, OdeFlags,
    OdeKind, OdeSetup, SynthesisError, DEFAULT_STEP,
};

pub const DEFAULT_SUITE: &str = include_str!("../data/default_suite.toml");
pub const PROBE_AMPLITUDES: [f64; 3] = [0.01, 0.05, 0.1];
/// Amplitude at which a probed verdict must already fail.
pub const PROBE_FLIP_AMPLITUDE: f64 = 0.05;
pub const ROUNDTRIP_TOL: f64 = 1e-5;
pub const ODE_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaseError {
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Frenet(#[from] FrenetError),
    #[error(transparent)]
    NormalParts(#[from] NormalPartsError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("extracted osculating orders {found:?} differ from the profile order {expected}")]
    OrderMismatch { expected: usize, found: Vec<usize> },
    #[error("window of {0} samples is too small")]
    Window(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SuiteError {
    #[error("suite file: {0}")]
    Parse(String),
    #[error("case {id}: {msg}")]
    InvalidCase { id: String, msg: String },
}

/// How a case builds its curvature profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Recipe {
    Canonical {
        curve: CanonicalKind,
        kappas: Vec<f64>,
        range: [f64; 2],
    },
    Ode {
        equation: OdeKind,
        kappa1: f64,
        #[serde(default)]
        c: f64,
        y0: f64,
        #[serde(default)]
        yp0: f64,
        range: [f64; 2],
    },
    Gaw5 {
        kappa1: f64,
        c: f64,
        kappa3: KappaFn,
        range: [f64; 2],
    },
    Profile(CurvatureProfile),
}

/// A built recipe.
#[derive(Debug, Clone)]
pub struct Construction {
    pub profile: CurvatureProfile,
    pub ode_residual: Option<f64>,
    pub ode_flags: Option<OdeFlags>,
    pub warnings: Vec<String>,
}

impl Recipe {
    pub fn build(&self) -> Result<Construction, SynthesisError> {
        let plain = |profile| Construction { profile, ode_residual: None, ode_flags: None, warnings: Vec::new() };
        Ok(match self {
            Recipe::Canonical { curve, kappas, range } => plain(canonical(*curve, kappas, *range)?),
            Recipe::Ode { equation, kappa1, c, y0, yp0, range } => {
                let sol = solve_ode(*equation, &OdeSetup::new(*kappa1, *y0, *yp0, *range).with_c(*c))?;
                let mut warnings = Vec::new();
                if sol.flags.any() {
                    let [a, b] = sol.s_range();
                    warnings.push(format!("solution stops early ({:?}); using [{a}, {b}]", sol.flags));
                }
                Construction {
                    profile: sol.profile()?,
                    ode_residual: Some(sol.max_residual),
                    ode_flags: Some(sol.flags),
                    warnings,
                }
            }
            Recipe::Gaw5 { kappa1, c, kappa3, range } => {
                let (profile, warnings) = gaw5_profile(*kappa1, *c, kappa3.clone(), *range)?;
                Construction { profile, ode_residual: None, ode_flags: None, warnings }
            }
            Recipe::Profile(p) => {
                p.validate()?;
                plain(p.clone())
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSpec {
    /// Curvature index to perturb; an index at or beyond the order
    /// introduces a new curvature.
    pub kappa: usize,
    /// Type expected to stop holding.
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionCase {
    pub id: String,
    pub recipe: Recipe,
    pub verdicts: [Verdict; 7],
    #[serde(default)]
    pub clauses: Vec<Clause>,
    #[serde(default)]
    pub probes: Vec<ProbeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    #[serde(default)]
    pub checker_only: Vec<Clause>,
    #[serde(rename = "case")]
    pub cases: Vec<PropositionCase>,
}

impl SuiteSpec {
    pub fn from_toml(text: &str) -> Result<SuiteSpec, SuiteError> {
        let spec: SuiteSpec = toml::from_str(text).map_err(|e| SuiteError::Parse(e.to_string()))?;
        for case in &spec.cases {
            for p in &case.probes {
                if !(1..=7).contains(&p.target) || !(1..=4).contains(&p.kappa) {
                    return Err(SuiteError::InvalidCase {
                        id: case.id.clone(),
                        msg: format!("probe {p:?} is out of range"),
                    });
                }
            }
        }
        Ok(spec)
    }

    pub fn default_suite() -> SuiteSpec {
        SuiteSpec::from_toml(DEFAULT_SUITE).expect("built-in suite parses")
    }

    /// Clauses neither expected by a case nor declared checker-only.
    pub fn uncovered_clauses(&self) -> Vec<Clause> {
        let covered: BTreeSet<Clause> =
            self.cases.iter().flat_map(|c| c.clauses.iter().copied()).chain(self.checker_only.iter().copied()).collect();
        Clause::ALL.into_iter().filter(|c| !covered.contains(c)).collect()
    }
}

/// Sampling and extraction settings of one pipeline run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub step: f64,
    /// Window as fractions of the profile range.
    pub window: [f64; 2],
    pub extract: ExtractConfig,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { step: DEFAULT_STEP, window: [0.1, 0.9], extract: ExtractConfig::default() }
    }
}

impl PipelineOptions {
    /// Same sampling geometry for a curve rescaled by `c`.
    pub fn scaled(&self, c: f64) -> PipelineOptions {
        PipelineOptions { step: self.step * c, ..*self }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub samples: CurveSamples,
    pub window: [f64; 2],
    pub parts: Vec<NormalParts>,
    /// Largest relative error of extracted against profile curvatures.
    pub roundtrip_error: f64,
    pub crosscheck: TheoremCrosscheck,
    pub diagnosis: Result<Diagnosis, ClassifyError>,
}

/// Ambient dimension used to realize a profile.
pub fn ambient_dim(d: usize) -> usize {
    d.max(3)
}

/// Grid indices of `count` points spread evenly over `window`.
pub fn window_indices(samples: &CurveSamples, window: [f64; 2], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..count)
        .map(|j| {
            let f = if count > 1 { j as f64 / (count - 1) as f64 } else { 0.5 };
            samples.nearest(window[0] + f * (window[1] - window[0]))
        })
        .collect();
    idx.dedup();
    idx
}

/// Integrates the profile, extracts the frame on the window and classifies
/// with the profile's curvatures and derivatives on the extracted frame.
pub fn run_pipeline(
    profile: &CurvatureProfile,
    cfg: &ClassifyConfig,
    opts: &PipelineOptions,
) -> Result<PipelineOutput, CaseError> {
    let samples = integrate_frenet(profile, ambient_dim(profile.d), None, opts.step)?;
    let [lo, hi] = profile.s_range;
    let window = [lo + opts.window[0] * (hi - lo), lo + opts.window[1] * (hi - lo)];
    let indices = window_indices(&samples, window, cfg.window_samples);
    if indices.len() < 2 {
        return Err(CaseError::Window(indices.len()));
    }
    let extracted = extract_at(&samples, &indices, &opts.extract)?;
    let found: BTreeSet<usize> = extracted.iter().map(|f| f.d).collect();
    if found.len() != 1 || !found.contains(&profile.d) {
        return Err(CaseError::OrderMismatch { expected: profile.d, found: found.into_iter().collect() });
    }
    let mut roundtrip_error: f64 = 0.0;
    let mut parts = Vec::with_capacity(extracted.len());
    for f in extracted {
        let truth = profile.kappas_at(f.s)?;
        for (k, t) in f.kappas.iter().zip(&truth) {
            roundtrip_error = roundtrip_error.max((k - t).abs() / t.abs());
        }
        parts.push(assemble_normals(&profile.frenet_data(f.s, f.frame)?)?);
    }
    let crosscheck = crosscheck_theorem(&parts, cfg)?;
    let diagnosis = constant_k1_diagnosis(&parts, cfg);
    Ok(PipelineOutput { samples, window, parts, roundtrip_error, crosscheck, diagnosis })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub id: String,
    pub passed: bool,
    /// Reasons the case failed, one per violated expectation.
    pub failures: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub warnings: Vec<String>,
    pub d: usize,
    pub window: [f64; 2],
    pub expected: [Verdict; 7],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<GawkReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalar: Option<GawkReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<Diagnosis>,
    pub roundtrip_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ode_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ode_flags: Option<OdeFlags>,
}

impl CaseReport {
    fn errored(case: &PropositionCase, d: usize, warnings: Vec<String>, err: impl ToString) -> CaseReport {
        let error = err.to_string();
        CaseReport {
            id: case.id.clone(),
            passed: false,
            failures: vec![error.clone()],
            error: Some(error),
            warnings,
            d,
            window: [0.0, 0.0],
            expected: case.verdicts,
            vector: None,
            scalar: None,
            diagnosis: None,
            roundtrip_error: 0.0,
            ode_residual: None,
            ode_flags: None,
        }
    }
}

/// Runs one case; errors are recorded in the report.
pub fn run_case(case: &PropositionCase, cfg: &ClassifyConfig, opts: &PipelineOptions) -> CaseReport {
    let built = match case.recipe.build() {
        Ok(b) => b,
        Err(e) => return CaseReport::errored(case, 0, Vec::new(), e),
    };
    let d = built.profile.d;
    let out = match run_pipeline(&built.profile, cfg, opts) {
        Ok(o) => o,
        Err(e) => return CaseReport::errored(case, d, built.warnings, e),
    };
    let mut failures = Vec::new();
    let TheoremCrosscheck { vector, scalar, disagreements, .. } = out.crosscheck;
    for report in [&vector, &scalar] {
        let got = report.verdicts();
        if got != case.verdicts {
            failures.push(format!("{:?} verdicts {} differ from expected {}", report.method, fmt_verdicts(&got), fmt_verdicts(&case.verdicts)));
        }
    }
    for dis in &disagreements {
        failures.push(format!("type {}: vector {} but scalar {}", dis.gaw_type, dis.vector, dis.scalar));
    }
    let diagnosis = match out.diagnosis {
        Ok(diag) => {
            let expected: BTreeSet<Clause> = case.clauses.iter().copied().collect();
            let matched: BTreeSet<Clause> = diag.matched.iter().copied().collect();
            if matched != expected {
                failures.push(format!("matched clauses {matched:?}, expected {expected:?}"));
            }
            if diag.predicted_types != vector.satisfied_types() {
                failures.push(format!(
                    "clauses predict types {:?} but {:?} are satisfied",
                    diag.predicted_types,
                    vector.satisfied_types()
                ));
            }
            Some(diag)
        }
        Err(e) => {
            if !case.clauses.is_empty() {
                failures.push(format!("diagnosis unavailable: {e}"));
            }
            None
        }
    };
    if !(out.roundtrip_error <= ROUNDTRIP_TOL) {
        failures.push(format!("curvature round trip error {:.3e} exceeds {ROUNDTRIP_TOL:e}", out.roundtrip_error));
    }
    if let Some(r) = built.ode_residual {
        if !(r <= ODE_RESIDUAL_TOL) {
            failures.push(format!("ODE residual {r:.3e} exceeds {ODE_RESIDUAL_TOL:e}"));
        }
    }
    CaseReport {
        id: case.id.clone(),
        passed: failures.is_empty(),
        failures,
        error: None,
        warnings: built.warnings,
        d,
        window: out.window,
        expected: case.verdicts,
        vector: Some(vector),
        scalar: Some(scalar),
        diagnosis,
        roundtrip_error: out.roundtrip_error,
        ode_residual: built.ode_residual,
        ode_flags: built.ode_flags,
    }
}

fn fmt_verdicts(v: &[Verdict; 7]) -> String {
    let names: Vec<&str> = v.iter().map(|x| x.name()).collect();
    format!("[{}]", names.join(", "))
}

/// Perturbed profile of a probe, or `None` when the probe targets κ₁ and
/// would leave the constant-κ₁ setting.
pub fn perturb(profile: &CurvatureProfile, kappa: usize, amplitude: f64) -> Result<Option<CurvatureProfile>, SynthesisError> {
    if kappa == 1 {
        return Ok(None);
    }
    let [lo, hi] = profile.s_range;
    let mut p = profile.clone();
    if kappa >= p.d {
        // A new curvature ε(1 + (s − lo)/(hi − lo)) raises the order by one.
        let eps = 1.0 / (hi - lo);
        p.kappa.push(KappaFn::Modulated { base: Box::new(KappaFn::Constant(amplitude)), eps, s0: lo });
        p.d += 1;
    } else {
        let base = Box::new(p.kappa[kappa - 1].clone());
        p.kappa[kappa - 1] = KappaFn::Modulated { base, eps: amplitude, s0: 0.5 * (lo + hi) };
    }
    p.label = profile.label.as_ref().map(|l| format!("{l}+probe"));
    p.validate()?;
    Ok(Some(p))
}

/// Outcome of one perturbation amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbePoint {
    pub amplitude: f64,
    pub vector: Verdict,
    pub scalar: Verdict,
    pub vector_residual: f64,
    pub scalar_residual: f64,
}

/// Perturbs curvature `spec.kappa` by `amplitude` and re-classifies.
pub fn converse_probe(
    case: &PropositionCase,
    spec: ProbeSpec,
    amplitude: f64,
    cfg: &ClassifyConfig,
    opts: &PipelineOptions,
) -> Result<Option<ProbePoint>, CaseError> {
    if !(amplitude > 0.0) {
        return Err(SynthesisError::InvalidParameter(format!("perturbation {amplitude} must be positive")).into());
    }
    let built = case.recipe.build()?;
    let Some(profile) = perturb(&built.profile, spec.kappa, amplitude)? else {
        return Ok(None);
    };
    let out = run_pipeline(&profile, cfg, opts)?;
    let (v, s) = (out.crosscheck.vector.result(spec.target), out.crosscheck.scalar.result(spec.target));
    Ok(Some(ProbePoint {
        amplitude,
        vector: v.verdict,
        scalar: s.verdict,
        vector_residual: v.max_residual,
        scalar_residual: s.max_residual,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub case: String,
    pub kappa: usize,
    pub target: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub points: Vec<ProbePoint>,
    /// The target fails in both forms at the flip amplitude.
    pub flipped: bool,
    /// Residuals increase strictly with the amplitude in both forms.
    pub monotone: bool,
    pub passed: bool,
}

/// Runs a probe over [`PROBE_AMPLITUDES`].
pub fn probe_sweep(case: &PropositionCase, spec: ProbeSpec, cfg: &ClassifyConfig, opts: &PipelineOptions) -> ProbeReport {
    let mut report = ProbeReport {
        case: case.id.clone(),
        kappa: spec.kappa,
        target: spec.target,
        skipped: None,
        error: None,
        points: Vec::new(),
        flipped: false,
        monotone: false,
        passed: false,
    };
    for amp in PROBE_AMPLITUDES {
        match converse_probe(case, spec, amp, cfg, opts) {
            Ok(Some(p)) => report.points.push(p),
            Ok(None) => {
                report.skipped = Some("perturbing kappa1 leaves the constant-kappa1 setting; probe skipped".into());
                report.passed = true;
                return report;
            }
            Err(e) => {
                report.error = Some(format!("amplitude {amp}: {e}"));
                return report;
            }
        }
    }
    report.flipped = report
        .points
        .iter()
        .filter(|p| p.amplitude == PROBE_FLIP_AMPLITUDE)
        .all(|p| p.vector == Verdict::Fails && p.scalar == Verdict::Fails);
    report.monotone = report.points.windows(2).all(|w| {
        w[1].vector_residual > w[0].vector_residual && w[1].scalar_residual > w[0].scalar_residual
    });
    report.passed = report.flipped && report.monotone;
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub config: ClassifyConfig,
    pub cases: Vec<CaseReport>,
    pub probes: Vec<ProbeReport>,
    pub checker_only: Vec<Clause>,
    pub uncovered_clauses: Vec<Clause>,
    pub passed: usize,
    pub failed: usize,
    pub all_passed: bool,
}

/// Runs every case (and, if asked, every probe) in parallel; reports are
/// ordered by case id.
pub fn run_suite(spec: &SuiteSpec, cfg: &ClassifyConfig, with_probes: bool) -> SuiteReport {
    let opts = PipelineOptions::default();
    let mut cases: Vec<CaseReport> = spec.cases.par_iter().map(|c| run_case(c, cfg, &opts)).collect();
    cases.sort_by(|a, b| a.id.cmp(&b.id));
    let mut probes: Vec<ProbeReport> = if with_probes {
        spec.cases
            .par_iter()
            .flat_map_iter(|c| c.probes.iter().map(move |&p| (c, p)))
            .map(|(c, p)| probe_sweep(c, p, cfg, &opts))
            .collect()
    } else {
        Vec::new()
    };
    probes.sort_by(|a, b| (&a.case, a.kappa, a.target).cmp(&(&b.case, b.kappa, b.target)));
    let uncovered_clauses = spec.uncovered_clauses();
    let failed = cases.iter().filter(|c| !c.passed).count() + probes.iter().filter(|p| !p.passed).count();
    let passed = cases.len() + probes.len() - failed;
    SuiteReport {
        config: *cfg,
        all_passed: failed == 0 && uncovered_clauses.is_empty(),
        cases,
        probes,
        checker_only: spec.checker_only.clone(),
        uncovered_clauses,
        passed,
        failed,
    }
}

/// Plain-text summary, one line per case and probe.
pub fn render_text(report: &SuiteReport) -> String {
    let mut out = String::new();
    for c in &report.cases {
        let verdicts = c.vector.as_ref().map_or_else(|| "-".to_string(), |v| {
            v.verdicts().iter().map(|x| match x {
                Verdict::Holds => 'H',
                Verdict::Fails => 'F',
                Verdict::DegenerateHolds => 'D',
            }).collect()
        });
        let _ = writeln!(
            out,
            "{} {:<22} d={} verdicts={} roundtrip={:.2e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.id,
            c.d,
            verdicts,
            c.roundtrip_error
        );
        for f in &c.failures {
            let _ = writeln!(out, "     {f}");
        }
    }
    for p in &report.probes {
        let status = match (&p.skipped, p.passed) {
            (Some(_), _) => "SKIP",
            (None, true) => "PASS",
            (None, false) => "FAIL",
        };
        let residuals: Vec<String> = p.points.iter().map(|x| format!("{:.2e}", x.vector_residual)).collect();
        let _ = writeln!(
            out,
            "{status} probe {} kappa{} -> GAW({}) residuals=[{}]",
            p.case,
            p.kappa,
            p.target,
            residuals.join(", ")
        );
        if let Some(msg) = p.skipped.as_ref().or(p.error.as_ref()) {
            let _ = writeln!(out, "     {msg}");
        }
    }
    if !report.uncovered_clauses.is_empty() {
        let _ = writeln!(out, "uncovered clauses: {:?}", report.uncovered_clauses);
    }
    let _ = writeln!(out, "{} passed, {} failed", report.passed, report.failed);
    out
}
