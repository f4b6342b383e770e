//! Generalized AW(k)-type classification over a window of samples.
//!
//! Every quantity is made dimensionless with the window scale
//! `K = max κ_i` before thresholds apply: `N_k / K^k`, `λ / K³`, `μ / K⁴`,
//! and an m-th curvature derivative divided by `K^{m+1}`. Residuals are
//! `‖LHS − RHS‖ / max(1, ‖LHS‖, ‖RHS‖)` on these normalized values, and
//! coefficient traces are reported back in curve units.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frenet::{dot, norm, KappaDerivs};
use crate::normal_parts::NormalParts;

pub const GAW_TYPES: [usize; 7] = [1, 2, 3, 4, 5, 6, 7];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("classification window is empty")]
    EmptyWindow,
    #[error("window mixes osculating orders {0:?}")]
    MixedOrders(Vec<usize>),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("kappa1 is not constant over the window (spread {spread:.3e} around {mean})")]
    NotConstantK1 { mean: f64, spread: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyConfig {
    pub rel_tol: f64,
    pub coeff_tol: f64,
    pub const_tol: f64,
    pub window_samples: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig { rel_tol: 1e-6, coeff_tol: 1e-8, const_tol: 1e-7, window_samples: 64 }
    }
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        for (name, v) in [("rel_tol", self.rel_tol), ("coeff_tol", self.coeff_tol), ("const_tol", self.const_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ClassifyError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.window_samples == 0 {
            return Err(ClassifyError::InvalidConfig("window_samples must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Fails,
    DegenerateHolds,
}

impl Verdict {
    pub fn satisfied(self) -> bool {
        self != Verdict::Fails
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::DegenerateHolds => "degenerate-holds",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Vector,
    Scalar,
}

/// Fitted `a(s)`, `b(s)` of a linear-dependence type, in curve units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientTrace {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Minimum over non-degenerate samples.
    pub min_abs_a: f64,
    pub min_abs_b: f64,
    /// Samples where one coefficient is unconstrained and was set to 1.
    pub free_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeResult {
    pub gaw_type: usize,
    pub verdict: Verdict,
    pub max_residual: f64,
    pub failing_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GawkReport {
    pub method: Method,
    pub d: usize,
    pub window: [f64; 2],
    pub samples: usize,
    pub degenerate_samples: usize,
    /// Window scale `K`.
    pub scale: f64,
    pub mu5_max: f64,
    /// `max |μ₅| / K⁴` exceeded `rel_tol`, so no type can hold.
    pub mu5_gate: bool,
    pub types: Vec<TypeResult>,
}

impl GawkReport {
    pub fn verdict(&self, k: usize) -> Verdict {
        self.types[k - 1].verdict
    }

    pub fn result(&self, k: usize) -> &TypeResult {
        &self.types[k - 1]
    }

    pub fn satisfied_types(&self) -> BTreeSet<usize> {
        self.types.iter().filter(|t| t.verdict.satisfied()).map(|t| t.gaw_type).collect()
    }

    pub fn verdicts(&self) -> [Verdict; 7] {
        std::array::from_fn(|i| self.types[i].verdict)
    }
}

/// `max_s |x(s) − mean| ≤ tol · (1 + |mean|)`.
pub fn is_constant(values: &[f64], tol: f64) -> bool {
    let (mean, spread) = mean_and_spread(values);
    spread <= tol * (1.0 + mean.abs())
}

fn mean_and_spread(values: &[f64]) -> (f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let spread = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    (mean, spread)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    diff / 1f64.max(norm(a)).max(norm(b))
}

/// Window scale `K = max κ_i` (1 for a straight line).
pub fn window_scale(parts: &[NormalParts]) -> f64 {
    let k = parts
        .iter()
        .flat_map(|p| p.kappas.iter().copied())
        .fold(0.0, f64::max);
    if k > 0.0 && k.is_finite() {
        k
    } else {
        1.0
    }
}

/// Dimensionless copy of one sample.
#[derive(Debug, Clone)]
struct Normalized {
    k: [f64; 4],
    kd: KappaDerivs,
    lambda: [f64; 3],
    mu: [f64; 4],
    n: [Vec<f64>; 4],
}

impl Normalized {
    fn new(p: &NormalParts, scale: f64) -> Normalized {
        let n = std::array::from_fn(|i| p.n[i].iter().map(|x| x / scale.powi(i as i32 + 1)).collect());
        Normalized {
            k: p.kappas.map(|x| x / scale),
            kd: p.derivs.scaled(scale),
            lambda: [p.lambda2, p.lambda3, p.lambda4].map(|x| x / scale.powi(3)),
            mu: [p.mu2, p.mu3, p.mu4, p.mu5].map(|x| x / scale.powi(4)),
            n,
        }
    }

    /// `N_k` coefficients on `v₂ … v₅`.
    fn coeffs(&self, k: usize) -> [f64; 4] {
        match k {
            1 => [self.k[0], 0.0, 0.0, 0.0],
            2 => [self.kd.k1p, self.k[0] * self.k[1], 0.0, 0.0],
            3 => [self.lambda[0], self.lambda[1], self.lambda[2], 0.0],
            _ => self.mu,
        }
    }
}

/// Which coefficient of a pair fit is unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FreeCoefficient {
    A,
    B,
}

/// Result of fitting `t ≈ a·x + b·y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairFit {
    pub a: f64,
    pub b: f64,
    pub residual: f64,
    pub free: Option<FreeCoefficient>,
    /// Both columns vanish.
    pub degenerate: bool,
}

/// Rank-aware least-squares fit of `t ≈ a·x + b·y`.
///
/// Columns with norm at most `coeff_tol` count as zero. When only one column
/// survives, its coefficient is forced and the other is set to 1. For
/// collinear nonzero columns the one-parameter family of solutions is
/// searched for a member with both coefficients away from zero.
pub fn pair_fit(t: &[f64], x: &[f64], y: &[f64], coeff_tol: f64) -> PairFit {
    let (nx, ny) = (norm(x), norm(y));
    let combo = |a: f64, b: f64| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| a * p + b * q).collect() };
    let finish = |a: f64, b: f64, free: Option<FreeCoefficient>| PairFit {
        a,
        b,
        residual: rel_vec(t, &combo(a, b)),
        free,
        degenerate: false,
    };
    match (nx > coeff_tol, ny > coeff_tol) {
        (false, false) => PairFit {
            a: 0.0,
            b: 0.0,
            residual: rel_vec(t, &vec![0.0; t.len()]),
            free: None,
            degenerate: true,
        },
        (true, false) => finish(dot(t, x) / (nx * nx), 1.0, Some(FreeCoefficient::B)),
        (false, true) => finish(1.0, dot(t, y) / (ny * ny), Some(FreeCoefficient::A)),
        (true, true) => {
            let e: Vec<f64> = x.iter().map(|v| v / nx).collect();
            let beta = dot(y, &e);
            let y_perp = y.iter().zip(&e).map(|(q, u)| (q - beta * u).powi(2)).sum::<f64>().sqrt();
            if y_perp > coeff_tol {
                let (xx, xy, yy) = (nx * nx, dot(x, y), ny * ny);
                let (xt, yt) = (dot(x, t), dot(y, t));
                let det = xx * yy - xy * xy;
                finish((xt * yy - yt * xy) / det, (yt * xx - xt * xy) / det, None)
            } else {
                let alpha = nx;
                let rho = dot(t, &e);
                if rho.abs() / (alpha.abs() + beta.abs()) > coeff_tol {
                    let (plus, minus) = (alpha + beta, alpha - beta);
                    if plus.abs() >= minus.abs() {
                        let a = rho / plus;
                        finish(a, a, None)
                    } else {
                        let a = rho / minus;
                        finish(a, -a, None)
                    }
                } else {
                    let m = alpha.abs().max(beta.abs());
                    finish(beta / m, -alpha / m, None)
                }
            }
        }
    }
}

/// Columns `(x, y)` of the linear-dependence types: `N₄ = a·N_x + b·N_y`.
fn pair_columns(k: usize) -> (usize, usize) {
    match k {
        5 => (1, 2),
        6 => (1, 3),
        7 => (2, 3),
        _ => panic!("type {k} is not a linear-dependence type"),
    }
}

/// Both sides of the vector identity of types 1 to 4, in curve units.
pub fn identity_sides(p: &NormalParts, k: usize) -> (Vec<f64>, Vec<f64>) {
    let n4 = p.n(4);
    match k {
        1 => (n4.to_vec(), vec![0.0; n4.len()]),
        2..=4 => {
            let j = [2, 1, 3][k - 2];
            let nj = p.n(j);
            let lhs = n4.iter().map(|x| dot(nj, nj) * x).collect();
            let rhs = nj.iter().map(|x| dot(nj, n4) * x).collect();
            (lhs, rhs)
        }
        _ => panic!("type {k} has no identity form"),
    }
}

/// Distance of `t` from the line spanned by `j`, relative to `max(1, ‖t‖)`;
/// zero when `j` itself vanishes. This is the type 2 to 4 identity divided by
/// `⟨N_j, N_j⟩`.
fn off_line_residual(t: &[f64], j: &[f64], ct: f64) -> f64 {
    let jj = dot(j, j);
    if jj.sqrt() <= ct {
        return 0.0;
    }
    let c = dot(j, t) / jj;
    let off: Vec<f64> = t.iter().zip(j).map(|(x, y)| x - c * y).collect();
    norm(&off) / norm(t).max(1.0)
}

fn identity_residual(n: &[Vec<f64>; 4], k: usize, ct: f64) -> f64 {
    let n4 = &n[3];
    if k == 1 {
        return rel_vec(n4, &vec![0.0; n4.len()]);
    }
    off_line_residual(n4, &n[[2, 1, 3][k - 2] - 1], ct)
}

struct SampleOutcome {
    residual: f64,
    fit: Option<PairFit>,
}

fn check_uniform_order(parts: &[NormalParts]) -> Result<usize, ClassifyError> {
    let first = parts.first().ok_or(ClassifyError::EmptyWindow)?;
    let orders: BTreeSet<usize> = parts.iter().map(|p| p.d).collect();
    if orders.len() > 1 {
        return Err(ClassifyError::MixedOrders(orders.into_iter().collect()));
    }
    Ok(first.d)
}

/// Keeps the samples of the most common osculating order and reports how
/// many were dropped.
pub fn select_modal_order(parts: Vec<NormalParts>) -> (Vec<NormalParts>, usize) {
    let mut counts = [0usize; 6];
    for p in &parts {
        counts[p.d.min(5)] += 1;
    }
    let modal = (0..6).rev().max_by_key(|&d| counts[d]).unwrap_or(0);
    let total = parts.len();
    let kept: Vec<NormalParts> = parts.into_iter().filter(|p| p.d.min(5) == modal).collect();
    let dropped = total - kept.len();
    (kept, dropped)
}

fn classify_with(
    parts: &[NormalParts],
    cfg: &ClassifyConfig,
    method: Method,
    per_sample: impl Fn(&Normalized, usize) -> SampleOutcome,
    degenerate: impl Fn(&Normalized) -> bool,
) -> Result<GawkReport, ClassifyError> {
    cfg.validate()?;
    let d = check_uniform_order(parts)?;
    let scale = window_scale(parts);
    let normalized: Vec<Normalized> = parts.iter().map(|p| Normalized::new(p, scale)).collect();
    let mu5_max = parts.iter().map(|p| p.mu5.abs()).fold(0.0, f64::max);
    let mu5_gate = mu5_max / scale.powi(4) > cfg.rel_tol;
    let degenerate_flags: Vec<bool> = normalized.iter().map(&degenerate).collect();
    let degenerate_samples = degenerate_flags.iter().filter(|&&x| x).count();
    let all_degenerate = degenerate_samples == parts.len();

    let types = GAW_TYPES
        .iter()
        .map(|&k| {
            let outcomes: Vec<SampleOutcome> = normalized.iter().map(|n| per_sample(n, k)).collect();
            let mut failing = 0;
            let mut max_residual: f64 = 0.0;
            for (o, &deg) in outcomes.iter().zip(&degenerate_flags) {
                if deg {
                    continue;
                }
                max_residual = max_residual.max(o.residual);
                let coeffs_ok = o.fit.is_none_or(|f| {
                    !f.degenerate && f.a.abs() > cfg.coeff_tol && f.b.abs() > cfg.coeff_tol
                });
                if !(o.residual <= cfg.rel_tol && coeffs_ok) {
                    failing += 1;
                }
            }
            let verdict = if mu5_gate {
                Verdict::Fails
            } else if all_degenerate {
                Verdict::DegenerateHolds
            } else if failing == 0 {
                Verdict::Holds
            } else {
                Verdict::Fails
            };
            let coefficients = (k >= 5).then(|| {
                let (x, y) = pair_columns(k);
                let (ua, ub) = (scale.powi(4 - x as i32), scale.powi(4 - y as i32));
                let a: Vec<f64> = outcomes.iter().map(|o| o.fit.map_or(0.0, |f| f.a) * ua).collect();
                let b: Vec<f64> = outcomes.iter().map(|o| o.fit.map_or(0.0, |f| f.b) * ub).collect();
                let live = || (0..a.len()).filter(|&i| !degenerate_flags[i]);
                let min_abs = |v: &[f64]| live().map(|i| v[i].abs()).reduce(f64::min).unwrap_or(0.0);
                CoefficientTrace {
                    s: parts.iter().map(|p| p.s).collect(),
                    min_abs_a: min_abs(&a),
                    min_abs_b: min_abs(&b),
                    free_samples: outcomes.iter().filter(|o| o.fit.is_some_and(|f| f.free.is_some())).count(),
                    a,
                    b,
                }
            });
            TypeResult { gaw_type: k, verdict, max_residual, failing_samples: failing, coefficients }
        })
        .collect();
    Ok(GawkReport {
        method,
        d,
        window: [parts[0].s, parts[parts.len() - 1].s],
        samples: parts.len(),
        degenerate_samples,
        scale,
        mu5_max,
        mu5_gate,
        types,
    })
}

/// Classification by the vector identities on `N₁ … N₄`.
pub fn classify_vector(parts: &[NormalParts], cfg: &ClassifyConfig) -> Result<GawkReport, ClassifyError> {
    let ct = cfg.coeff_tol;
    classify_with(
        parts,
        cfg,
        Method::Vector,
        |n, k| match k {
            1..=4 => SampleOutcome { residual: identity_residual(&n.n, k, ct), fit: None },
            _ => {
                let (x, y) = pair_columns(k);
                let fit = pair_fit(&n.n[3], &n.n[x - 1], &n.n[y - 1], ct);
                SampleOutcome { residual: fit.residual, fit: Some(fit) }
            }
        },
        |n| n.n.iter().all(|v| norm(v) <= ct),
    )
}

/// Classification by the scalar conditions on `κ`, `λ`, `μ`.
pub fn classify_scalar(parts: &[NormalParts], cfg: &ClassifyConfig) -> Result<GawkReport, ClassifyError> {
    let ct = cfg.coeff_tol;
    classify_with(
        parts,
        cfg,
        Method::Scalar,
        |n, k| {
            let [l2, l3, l4] = n.lambda;
            let [m2, m3, m4, m5] = n.mu;
            let (k1, k2) = (n.k[0], n.k[1]);
            let k1p = n.kd.k1p;
            // Each condition is scaled to the distance of N₄ from span(N_j),
            // matching the vector identities; μ₅ is gated separately.
            let n4 = norm(&[m2, m3, m4, m5]).max(1.0);
            let residual = match k {
                1 => norm(&[m2, m3, m4, m5]) / n4,
                2 => {
                    let n2 = k1p.hypot(k1 * k2);
                    if n2 <= ct {
                        0.0
                    } else {
                        norm(&[(k1 * k2 * m2 - k1p * m3) / n2, m4, m5]) / n4
                    }
                }
                3 if k1.abs() <= ct => 0.0,
                3 => norm(&[m3, m4, m5]) / n4,
                4 => {
                    let n3 = (l2 * l2 + l3 * l3 + l4 * l4).sqrt();
                    if n3 <= ct {
                        0.0
                    } else {
                        let minors = [l2 * m3 - l3 * m2, l2 * m4 - l4 * m2, l3 * m4 - l4 * m3, n3 * m5];
                        norm(&minors) / n3 / n4
                    }
                }
                _ => {
                    let (x, y) = pair_columns(k);
                    let (cx, cy, t) = (n.coeffs(x), n.coeffs(y), n.coeffs(4));
                    let fit = closed_form_fit(n, k, ct).map_or_else(
                        || pair_fit(&t, &cx, &cy, ct),
                        |(a, b)| {
                            let combo: Vec<f64> = cx.iter().zip(&cy).map(|(p, q)| a * p + b * q).collect();
                            PairFit { a, b, residual: rel_vec(&t, &combo), free: None, degenerate: false }
                        },
                    );
                    return SampleOutcome { residual: fit.residual, fit: Some(fit) };
                }
            };
            SampleOutcome { residual, fit: None }
        },
        |n| (1..=4).all(|k| norm(&n.coeffs(k)) <= ct),
    )
}

/// Closed-form `(a, b)` where the relevant denominators are safely nonzero.
fn closed_form_fit(n: &Normalized, k: usize, ct: f64) -> Option<(f64, f64)> {
    let [l2, l3, l4] = n.lambda;
    let [m2, m3, m4, _] = n.mu;
    let (k1, k2, k1p) = (n.k[0], n.k[1], n.kd.k1p);
    let k1k2 = k1 * k2;
    match k {
        5 => (k1k2.abs() > ct && k1.abs() > ct).then(|| {
            let b = m3 / k1k2;
            ((m2 - b * k1p) / k1, b)
        }),
        6 => {
            if k1.abs() <= ct || l3.abs().max(l4.abs()) <= ct {
                return None;
            }
            let b = if l4.abs() >= l3.abs() { m4 / l4 } else { m3 / l3 };
            Some(((m2 - b * l2) / k1, b))
        }
        7 => {
            if l4.abs() > ct {
                let b = m4 / l4;
                if k1k2.abs() >= k1p.abs() && k1k2.abs() > ct {
                    Some(((m3 - b * l3) / k1k2, b))
                } else if k1p.abs() > ct {
                    Some(((m2 - b * l2) / k1p, b))
                } else {
                    None
                }
            } else {
                let det = k1p * l3 - l2 * k1k2;
                (det.abs() > ct).then(|| ((m2 * l3 - l2 * m3) / det, (k1p * m3 - k1k2 * m2) / det))
            }
        }
        _ => None,
    }
}

/// Per-type comparison of the vector and scalar classifications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremCrosscheck {
    pub vector: GawkReport,
    pub scalar: GawkReport,
    pub agree: [bool; 7],
    pub disagreements: Vec<Disagreement>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Disagreement {
    pub gaw_type: usize,
    pub vector: Verdict,
    pub scalar: Verdict,
    pub vector_residual: f64,
    pub scalar_residual: f64,
}

impl TheoremCrosscheck {
    pub fn all_agree(&self) -> bool {
        self.disagreements.is_empty()
    }
}

pub fn crosscheck_theorem(parts: &[NormalParts], cfg: &ClassifyConfig) -> Result<TheoremCrosscheck, ClassifyError> {
    let vector = classify_vector(parts, cfg)?;
    let scalar = classify_scalar(parts, cfg)?;
    let agree = std::array::from_fn(|i| vector.types[i].verdict == scalar.types[i].verdict);
    let disagreements = (0..7)
        .filter(|&i| !agree[i])
        .map(|i| Disagreement {
            gaw_type: i + 1,
            vector: vector.types[i].verdict,
            scalar: scalar.types[i].verdict,
            vector_residual: vector.types[i].max_residual,
            scalar_residual: scalar.types[i].max_residual,
        })
        .collect();
    Ok(TheoremCrosscheck { vector, scalar, agree, disagreements })
}

/// Clauses of the constant-κ₁ characterizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    Line,
    Circle,
    Helix3,
    Helix4,
    #[serde(rename = "gaw3-o3")]
    Gaw3Order3,
    #[serde(rename = "gaw3-o4")]
    Gaw3Order4,
    #[serde(rename = "gaw4-o3")]
    Gaw4Order3,
    #[serde(rename = "gaw4-o4")]
    Gaw4Order4,
    #[serde(rename = "gaw5-o3")]
    Gaw5Order3,
    #[serde(rename = "gaw5-o4")]
    Gaw5Order4,
    #[serde(rename = "gaw6-o3")]
    Gaw6Order3,
    #[serde(rename = "gaw6-o4")]
    Gaw6Order4,
    #[serde(rename = "gaw7-o3")]
    Gaw7Order3,
    #[serde(rename = "gaw7-o4")]
    Gaw7Order4,
}

impl Clause {
    pub const ALL: [Clause; 14] = [
        Clause::Line,
        Clause::Circle,
        Clause::Helix3,
        Clause::Helix4,
        Clause::Gaw3Order3,
        Clause::Gaw3Order4,
        Clause::Gaw4Order3,
        Clause::Gaw4Order4,
        Clause::Gaw5Order3,
        Clause::Gaw5Order4,
        Clause::Gaw6Order3,
        Clause::Gaw6Order4,
        Clause::Gaw7Order3,
        Clause::Gaw7Order4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Clause::Line => "line",
            Clause::Circle => "circle",
            Clause::Helix3 => "helix3",
            Clause::Helix4 => "helix4",
            Clause::Gaw3Order3 => "gaw3-o3",
            Clause::Gaw3Order4 => "gaw3-o4",
            Clause::Gaw4Order3 => "gaw4-o3",
            Clause::Gaw4Order4 => "gaw4-o4",
            Clause::Gaw5Order3 => "gaw5-o3",
            Clause::Gaw5Order4 => "gaw5-o4",
            Clause::Gaw6Order3 => "gaw6-o3",
            Clause::Gaw6Order4 => "gaw6-o4",
            Clause::Gaw7Order3 => "gaw7-o3",
            Clause::Gaw7Order4 => "gaw7-o4",
        }
    }

    pub fn from_name(name: &str) -> Option<Clause> {
        Clause::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Osculating order the clause applies to.
    pub fn order(self) -> usize {
        match self {
            Clause::Line => 1,
            Clause::Circle => 2,
            Clause::Helix3 | Clause::Gaw3Order3 | Clause::Gaw4Order3 | Clause::Gaw5Order3 | Clause::Gaw6Order3 | Clause::Gaw7Order3 => 3,
            _ => 4,
        }
    }

    /// Types whose characterization lists this clause.
    pub fn types(self) -> &'static [usize] {
        match self {
            Clause::Line => &GAW_TYPES,
            Clause::Circle => &[1, 2, 3, 4, 6],
            Clause::Helix3 | Clause::Helix4 => &[2],
            Clause::Gaw3Order3 | Clause::Gaw3Order4 => &[3],
            Clause::Gaw4Order3 | Clause::Gaw4Order4 => &[4],
            Clause::Gaw5Order3 | Clause::Gaw5Order4 => &[5],
            Clause::Gaw6Order3 | Clause::Gaw6Order4 => &[6],
            Clause::Gaw7Order3 | Clause::Gaw7Order4 => &[7],
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClauseCheck {
    pub clause: Clause,
    pub matched: bool,
    /// Largest residual of the clause's equalities (0 if it has none).
    pub residual: f64,
    /// Smallest normalized gap of its inequalities (infinite if none).
    #[serde(serialize_with = "finite_or_null")]
    pub margin: f64,
}

fn finite_or_null<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnosis {
    pub kappa1: f64,
    pub d: usize,
    pub checks: Vec<ClauseCheck>,
    pub matched: Vec<Clause>,
    pub predicted_types: BTreeSet<usize>,
}

impl Diagnosis {
    pub fn matches(&self, clause: Clause) -> bool {
        self.matched.contains(&clause)
    }
}

/// Accumulates the conditions of one clause over the window.
struct ClauseEval {
    residual: f64,
    margin: f64,
    holds: bool,
}

impl ClauseEval {
    fn new() -> Self {
        ClauseEval { residual: 0.0, margin: f64::INFINITY, holds: true }
    }

    fn equal(&mut self, lhs: f64, rhs: f64, tol: f64) {
        let r = rel(lhs, rhs);
        self.residual = self.residual.max(r);
        if !(r <= tol) {
            self.holds = false;
        }
    }

    fn unequal(&mut self, lhs: f64, rhs: f64, tol: f64) {
        let gap = (lhs - rhs).abs();
        self.margin = self.margin.min(gap);
        if !(gap > tol) {
            self.holds = false;
        }
    }

    fn require(&mut self, cond: bool) {
        self.holds &= cond;
    }
}

/// Matches a constant-κ₁ window against every clause of the
/// characterizations.
///
/// Equalities must hold within `rel_tol` at every sample; inequalities
/// (including "κ non-constant", read as a nowhere-vanishing derivative) need
/// a gap above `coeff_tol` at every sample. Order-5 windows match nothing.
pub fn constant_k1_diagnosis(parts: &[NormalParts], cfg: &ClassifyConfig) -> Result<Diagnosis, ClassifyError> {
    cfg.validate()?;
    let d = check_uniform_order(parts)?;
    let scale = window_scale(parts);
    let n: Vec<Normalized> = parts.iter().map(|p| Normalized::new(p, scale)).collect();
    let k1_values: Vec<f64> = n.iter().map(|x| x.k[0]).collect();
    let (k1_mean, k1_spread) = mean_and_spread(&k1_values);
    if !is_constant(&k1_values, cfg.const_tol) {
        return Err(ClassifyError::NotConstantK1 { mean: k1_mean * scale, spread: k1_spread * scale });
    }
    let (tol, ct) = (cfg.rel_tol, cfg.coeff_tol);
    let column = |i: usize| -> Vec<f64> { n.iter().map(|x| x.k[i]).collect() };
    let const_k2 = is_constant(&column(1), cfg.const_tol);
    let const_k3 = is_constant(&column(2), cfg.const_tol);
    let k2sq_k3: Vec<f64> = n.iter().map(|x| x.k[1] * x.k[1] * x.k[2]).collect();
    let k2sq_k3_const = is_constant(&k2sq_k3, cfg.const_tol);
    let c_sqrt = {
        let c: Vec<f64> = k2sq_k3.iter().map(|v| v.sqrt()).collect();
        c.iter().sum::<f64>() / c.len() as f64
    };
    let e11_c = {
        let num: f64 = n.iter().map(|x| x.k[1] * x.k[1] * x.k[2] * (x.k[0].powi(2) + x.k[1].powi(2)).powf(1.5)).sum();
        let den: f64 = n.iter().map(|x| (x.k[0].powi(2) + x.k[1].powi(2)).powi(3)).sum();
        num / den
    };

    let checks = Clause::ALL
        .iter()
        .map(|&clause| {
            let mut e = ClauseEval::new();
            e.require(d == clause.order());
            if e.holds {
                match clause {
                    Clause::Line | Clause::Circle => {}
                    Clause::Helix3 => e.require(const_k2),
                    Clause::Helix4 => e.require(const_k2 && const_k3),
                    Clause::Gaw3Order4 => e.require(k2sq_k3_const),
                    Clause::Gaw5Order4 => e.require(k2sq_k3_const),
                    _ => {}
                }
                for x in &n {
                    let [k1, k2, k3, _] = x.k;
                    let KappaDerivs { k2p, k2pp, k3p, .. } = x.kd;
                    let q = k1 * k1 + k2 * k2;
                    let q3 = q + k3 * k3;
                    match clause {
                        Clause::Gaw3Order3 => e.equal(k2pp, k2 * q, tol),
                        Clause::Gaw3Order4 => {
                            let c2 = c_sqrt * c_sqrt;
                            let k3pp = -2.0 * c2 * (k2pp / k2.powi(3) - 3.0 * k2p * k2p / k2.powi(4));
                            e.equal(k3pp - 1.5 * k3p * k3p / k3, -2.0 * k3 * (k1 * k1 + k3 * k3) - 2.0 * c2, tol);
                        }
                        Clause::Gaw4Order3 => e.equal(3.0 * k2 * k2p * k2p, q * (k2pp - k2 * q), tol),
                        Clause::Gaw4Order4 => {
                            e.equal(k2 * k2 * k3, e11_c * q.powf(1.5), tol);
                            e.equal(3.0 * k2 * k2p * k2p, q * (k2pp - k2 * q3), tol);
                        }
                        Clause::Gaw5Order3 => {
                            e.unequal(k2p, 0.0, ct);
                            e.unequal(k2pp, k2 * q, ct);
                        }
                        Clause::Gaw5Order4 => {
                            e.unequal(k2p, 0.0, ct);
                            e.unequal(k3p, 0.0, ct);
                            e.unequal(k2pp, k2 * q3, ct);
                        }
                        Clause::Gaw6Order3 => {
                            e.unequal(k2p, 0.0, ct);
                            e.unequal(k2pp, k2 * q, ct);
                            e.unequal(k2pp, k2 * q + 3.0 * k2 * k2p * k2p / q, ct);
                        }
                        Clause::Gaw6Order4 => {
                            e.unequal(k2p, 0.0, ct);
                            e.unequal(2.0 * k2p * k3 + k2 * k3p, 0.0, ct);
                            e.equal((2.0 * k2p / k2 + k3p / k3) * k2p, k2pp - k2 * q3, tol);
                            e.unequal(k2pp, k2 * q3 + 3.0 * k2 * k2p * k2p / q, ct);
                        }
                        Clause::Gaw7Order3 => {
                            e.unequal(k2p, 0.0, ct);
                            e.unequal(k2pp, 3.0 * k2 * k2p * k2p / q + k2 * q, ct);
                        }
                        Clause::Gaw7Order4 => {
                            e.unequal(k2p, 0.0, ct);
                            e.unequal(2.0 * k2p * k3 + k2 * k3p, 0.0, ct);
                            e.equal(3.0 * k2 * k2p / q, 2.0 * k2p / k2 + k3p / k3, tol);
                            e.unequal(k2pp, 3.0 * k2 * k2p * k2p / q + k2 * q3, ct);
                        }
                        Clause::Line | Clause::Circle | Clause::Helix3 | Clause::Helix4 => {}
                    }
                }
            }
            ClauseCheck { clause, matched: e.holds, residual: e.residual, margin: e.margin }
        })
        .collect::<Vec<_>>();
    let matched: Vec<Clause> = checks.iter().filter(|c| c.matched).map(|c| c.clause).collect();
    let predicted_types = matched.iter().flat_map(|c| c.types().iter().copied()).collect();
    Ok(Diagnosis { kappa1: k1_mean * scale, d, checks, matched, predicted_types })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frenet::FrenetData;
    use crate::normal_parts::assemble_normals;
    use proptest::prelude::*;

    fn sample(s: f64, kappas: &[f64], kd: KappaDerivs) -> NormalParts {
        let d = kappas.len() + 1;
        let n = d.max(2);
        let f = FrenetData {
            s,
            d,
            frame: (0..d).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
            kappas: kappas.to_vec(),
            kappa_derivs: Some(kd),
            ambiguous: false,
        };
        assemble_normals(&f).unwrap()
    }

    fn constant_window(kappas: &[f64]) -> Vec<NormalParts> {
        (0..16).map(|i| sample(i as f64 * 0.1, kappas, KappaDerivs::default())).collect()
    }

    fn both(parts: &[NormalParts]) -> (GawkReport, GawkReport) {
        let cfg = ClassifyConfig::default();
        (classify_vector(parts, &cfg).unwrap(), classify_scalar(parts, &cfg).unwrap())
    }

    fn satisfied(types: &[usize]) -> BTreeSet<usize> {
        types.iter().copied().collect()
    }

    #[test]
    fn line_is_degenerate_for_every_type() {
        let (v, s) = both(&constant_window(&[]));
        for r in [&v, &s] {
            assert!(r.types.iter().all(|t| t.verdict == Verdict::DegenerateHolds));
        }
    }

    #[test]
    fn circle_verdicts() {
        let (v, s) = both(&constant_window(&[0.5]));
        for r in [&v, &s] {
            assert_eq!(r.satisfied_types(), satisfied(&[1, 2, 3, 4, 6]));
            assert_eq!(r.verdict(1), Verdict::Holds);
            assert_eq!(r.verdict(5), Verdict::Fails);
        }
        // a₂ = b₂κ₁² in curve units
        let trace = v.result(6).coefficients.as_ref().unwrap();
        assert!((trace.a[0] - trace.b[0] * 0.25).abs() < 1e-12);
    }

    #[test]
    fn helix_verdicts_and_sides() {
        let parts = constant_window(&[0.5, 0.5]);
        let (v, s) = both(&parts);
        assert_eq!(v.satisfied_types(), satisfied(&[2]));
        assert_eq!(s.satisfied_types(), satisfied(&[2]));
        let (lhs, rhs) = identity_sides(&parts[0], 2);
        let expected = [0.0, 0.0, -1.0 / 128.0];
        for i in 0..3 {
            assert!((lhs[i] - expected[i]).abs() < 1e-15);
            assert!((rhs[i] - expected[i]).abs() < 1e-15);
        }
        let (lhs, rhs) = identity_sides(&parts[0], 3);
        assert!((lhs[2] + 1.0 / 32.0).abs() < 1e-15);
        assert!(rhs.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn order_four_helix_is_gaw2() {
        let (v, s) = both(&constant_window(&[1.0, 0.5, 0.25]));
        assert_eq!(v.satisfied_types(), satisfied(&[2]));
        assert_eq!(s.satisfied_types(), satisfied(&[2]));
    }

    #[test]
    fn order_five_curve_fails_everything() {
        let (v, s) = both(&constant_window(&[1.0, 1.0, 1.0, 1.0]));
        for r in [&v, &s] {
            assert!(r.mu5_gate);
            assert!(r.satisfied_types().is_empty());
            assert!((r.mu5_max - 1.0).abs() < 1e-15);
        }
    }

    fn gaw5_window() -> Vec<NormalParts> {
        // κ₁ = 1, κ₃ = 1 + s, κ₂ = (1 + s)^{-1/2}
        (0..=20)
            .map(|i| {
                let s = i as f64 / 20.0;
                let u = 1.0 + s;
                let kd = KappaDerivs {
                    k2p: -0.5 * u.powf(-1.5),
                    k2pp: 0.75 * u.powf(-2.5),
                    k3p: 1.0,
                    ..Default::default()
                };
                sample(s, &[1.0, u.powf(-0.5), u], kd)
            })
            .collect()
    }

    #[test]
    fn gaw5_construction() {
        let parts = gaw5_window();
        let (v, s) = both(&parts);
        assert_eq!(v.satisfied_types(), satisfied(&[5]));
        assert_eq!(s.satisfied_types(), satisfied(&[5]));
        for r in [&v, &s] {
            let trace = r.result(5).coefficients.as_ref().unwrap();
            for (i, p) in parts.iter().enumerate() {
                let u = 1.0 + p.s;
                let a1 = 1.5 / (u * u);
                let b1 = 0.75 / (u * u) - 1.0 - 1.0 / u - u * u;
                assert!((trace.a[i] - a1).abs() < 1e-9, "{} vs {a1}", trace.a[i]);
                assert!((trace.b[i] - b1).abs() < 1e-9);
            }
            assert!(trace.min_abs_a > 1e-3 && trace.min_abs_b > 1e-3);
        }
        let diag = constant_k1_diagnosis(&parts, &ClassifyConfig::default()).unwrap();
        assert_eq!(diag.matched, vec![Clause::Gaw5Order4]);
    }

    #[test]
    fn perturbed_helix() {
        let parts: Vec<NormalParts> = (0..=20)
            .map(|i| {
                let s = i as f64 / 20.0;
                sample(s, &[0.5, 0.5 + 0.01 * s], KappaDerivs { k2p: 0.01, ..Default::default() })
            })
            .collect();
        let (v, s) = both(&parts);
        assert_eq!(v.verdict(2), Verdict::Fails);
        assert_eq!(v.satisfied_types(), s.satisfied_types());
        assert_eq!(v.satisfied_types(), satisfied(&[5, 6, 7]));
        let diag = constant_k1_diagnosis(&parts, &ClassifyConfig::default()).unwrap();
        assert_eq!(diag.predicted_types, satisfied(&[5, 6, 7]));
    }

    #[test]
    fn diagnosis_clauses_for_constant_curves() {
        let cfg = ClassifyConfig::default();
        let line = constant_k1_diagnosis(&constant_window(&[]), &cfg).unwrap();
        assert_eq!(line.matched, vec![Clause::Line]);
        let circle = constant_k1_diagnosis(&constant_window(&[1.0]), &cfg).unwrap();
        assert_eq!(circle.matched, vec![Clause::Circle]);
        let helix = constant_k1_diagnosis(&constant_window(&[1.0, 0.5, 0.25]), &cfg).unwrap();
        assert_eq!(helix.matched, vec![Clause::Helix4]);
        assert_eq!(helix.predicted_types, satisfied(&[2]));
        let w = constant_k1_diagnosis(&constant_window(&[1.0, 1.0, 1.0, 1.0]), &cfg).unwrap();
        assert!(w.matched.is_empty());
    }

    #[test]
    fn varying_kappa1_is_rejected() {
        let parts: Vec<NormalParts> = (0..8)
            .map(|i| sample(i as f64, &[1.0 + 0.1 * i as f64], KappaDerivs { k1p: 0.1, ..Default::default() }))
            .collect();
        assert!(matches!(
            constant_k1_diagnosis(&parts, &ClassifyConfig::default()),
            Err(ClassifyError::NotConstantK1 { .. })
        ));
    }

    #[test]
    fn mixed_orders_are_rejected() {
        let mut parts = constant_window(&[1.0]);
        parts.push(sample(9.0, &[1.0, 0.5], KappaDerivs::default()));
        assert!(matches!(classify_vector(&parts, &ClassifyConfig::default()), Err(ClassifyError::MixedOrders(_))));
        let (kept, dropped) = select_modal_order(parts);
        assert_eq!((kept.len(), dropped), (16, 1));
    }

    #[test]
    fn pair_fit_cases() {
        let ct = 1e-8;
        let f = pair_fit(&[1.0, 2.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], ct);
        assert!((f.a - 1.0).abs() < 1e-15 && (f.b - 2.0).abs() < 1e-15 && f.residual < 1e-15);
        let f = pair_fit(&[0.0; 3], &[0.0; 3], &[0.0; 3], ct);
        assert!(f.degenerate);
        let f = pair_fit(&[0.0; 3], &[1.0, 0.0, 0.0], &[0.0; 3], ct);
        assert_eq!((f.a, f.free), (0.0, Some(FreeCoefficient::B)));
        let f = pair_fit(&[3.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[2.0, 0.0, 0.0], ct);
        assert!((f.a - 1.0).abs() < 1e-15 && (f.b - 1.0).abs() < 1e-15 && f.residual < 1e-15);
    }

    fn arb_window() -> impl Strategy<Value = Vec<NormalParts>> {
        (0usize..4, prop::array::uniform4(0.1f64..2.0), prop::array::uniform6(-0.5f64..0.5)).prop_map(|(extra, k, kd)| {
            let kappas = &k[..extra + 1];
            let kd = KappaDerivs { k1p: 0.0, k1pp: 0.0, k1ppp: 0.0, k2p: kd[3], k2pp: kd[4], k3p: kd[5] };
            (0..4).map(|i| sample(i as f64, kappas, kd)).collect()
        })
    }

    proptest! {
        #[test]
        fn mu5_gate_blocks_every_type(parts in arb_window()) {
            let (v, s) = both(&parts);
            for r in [v, s] {
                if r.mu5_gate {
                    prop_assert!(r.satisfied_types().is_empty());
                }
            }
        }

        #[test]
        fn gaw1_implies_gaw2_to_gaw4(parts in arb_window()) {
            let (v, s) = both(&parts);
            for r in [v, s] {
                if r.verdict(1).satisfied() {
                    for k in 2..=4 {
                        prop_assert!(r.verdict(k).satisfied());
                    }
                }
            }
        }

        #[test]
        fn vector_and_scalar_forms_agree(parts in arb_window()) {
            let x = crosscheck_theorem(&parts, &ClassifyConfig::default()).unwrap();
            prop_assert!(x.all_agree(), "{:?}", x.disagreements);
        }

        #[test]
        fn looser_tolerance_never_breaks_a_verdict(parts in arb_window(), factor in 1.0f64..1e4) {
            let cfg = ClassifyConfig::default();
            let loose = ClassifyConfig { rel_tol: cfg.rel_tol * factor, ..cfg };
            for (a, b) in [
                (classify_vector(&parts, &cfg).unwrap(), classify_vector(&parts, &loose).unwrap()),
                (classify_scalar(&parts, &cfg).unwrap(), classify_scalar(&parts, &loose).unwrap()),
            ] {
                for k in GAW_TYPES {
                    if a.verdict(k).satisfied() {
                        prop_assert!(b.verdict(k).satisfied());
                    }
                }
            }
        }

        #[test]
        fn rescaling_keeps_verdicts(parts in arb_window(), c in prop::sample::select(vec![0.5, 2.0, 10.0])) {
            let rescaled: Vec<NormalParts> = parts.iter().map(|p| {
                let kd = p.derivs;
                let kappas: Vec<f64> = p.kappas[..p.d - 1].iter().map(|k| k / c).collect();
                let kd = KappaDerivs {
                    k1p: kd.k1p / c.powi(2), k1pp: kd.k1pp / c.powi(3), k1ppp: kd.k1ppp / c.powi(4),
                    k2p: kd.k2p / c.powi(2), k2pp: kd.k2pp / c.powi(3), k3p: kd.k3p / c.powi(2),
                };
                sample(p.s * c, &kappas, kd)
            }).collect();
            let (v, s) = both(&parts);
            let (v2, s2) = both(&rescaled);
            prop_assert_eq!(v.verdicts(), v2.verdicts());
            prop_assert_eq!(s.verdicts(), s2.verdicts());
        }
    }
}
