//! Frenet apparatus: osculating order, frame, curvatures and their arclength
//! derivatives.
//!
//! The frame comes from modified Gram–Schmidt on `γ′, …, γ⁽ᵛ⁾`, carried out
//! in jet arithmetic. With residual vectors `E_i`, the curvatures of a
//! unit-speed curve are `κ_i = ‖E_{i+1}‖ / ‖E_i‖`; as jets these also give
//! `κ₁′, κ₁″, κ₁‴, κ₂′, κ₂″, κ₃′`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{CurveDef, EvalError};
use crate::jet::{unit_speed_lift, Jet5, JetError, JetPoint};
use crate::synthesis::{CurvatureProfile, SynthesisError};

pub const MAX_ORDER: usize = 5;
pub const DEFAULT_ORDER_TOL: f64 = 1e-7;
const UNIT_SPEED_TOL: f64 = 1e-9;
const AMBIGUITY_FACTOR: f64 = 10.0;
const MIN_SAMPLES: usize = 9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrenetError {
    #[error("curve is not unit speed at the expansion point (|γ′| = {0})")]
    NotUnitSpeed(f64),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("need at least {need} samples, got {got}")]
    InsufficientSamples { got: usize, need: usize },
    #[error("arclength grid is not strictly increasing at sample {0}")]
    NonMonotone(usize),
    #[error("arclength spacing at sample {index} deviates more than 10% from the nominal step {nominal}")]
    IrregularSpacing { index: usize, nominal: f64 },
    #[error("samples have inconsistent dimension at sample {0}")]
    DimensionMismatch(usize),
    #[error("least-squares fit is singular near s = {0}")]
    SingularFit(f64),
    #[error(transparent)]
    Profile(#[from] SynthesisError),
}

/// Arclength derivatives of the curvatures that enter `λ` and `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct KappaDerivs {
    pub k1p: f64,
    pub k1pp: f64,
    pub k1ppp: f64,
    pub k2p: f64,
    pub k2pp: f64,
    pub k3p: f64,
}

impl KappaDerivs {
    /// Rescales for `κ ↦ κ / k`: an m-th derivative of a curvature scales by
    /// `k^{-(m+1)}`.
    pub fn scaled(&self, k: f64) -> KappaDerivs {
        KappaDerivs {
            k1p: self.k1p / k.powi(2),
            k1pp: self.k1pp / k.powi(3),
            k1ppp: self.k1ppp / k.powi(4),
            k2p: self.k2p / k.powi(2),
            k2pp: self.k2pp / k.powi(3),
            k3p: self.k3p / k.powi(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrenetData {
    pub s: f64,
    /// Osculating order.
    pub d: usize,
    /// `v₁ … v_d`.
    pub frame: Vec<Vec<f64>>,
    /// `κ₁ … κ_{d−1}`.
    pub kappas: Vec<f64>,
    pub kappa_derivs: Option<KappaDerivs>,
    /// Some Gram–Schmidt residual sat within a factor 10 of the order threshold.
    pub ambiguous: bool,
}

impl FrenetData {
    /// `κ_i` (1-based), zero beyond the osculating order.
    pub fn kappa(&self, i: usize) -> f64 {
        self.kappas.get(i.wrapping_sub(1)).copied().unwrap_or(0.0)
    }

    /// `v_i` (1-based) if it exists.
    pub fn v(&self, i: usize) -> Option<&[f64]> {
        self.frame.get(i.wrapping_sub(1)).map(Vec::as_slice)
    }

    pub fn dim(&self) -> usize {
        self.frame.first().map_or(0, Vec::len)
    }
}

fn jet_dot(a: &[Jet5], b: &[Jet5]) -> Jet5 {
    a.iter().zip(b).fold(Jet5::ZERO, |acc, (x, y)| acc + *x * *y)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Frenet apparatus of a unit-speed jet.
///
/// `E_i` counts as nonzero when `‖E_i‖ > order_tol · max(1, ‖γ⁽ⁱ⁾‖)`; the
/// osculating order is the number of leading nonzero residuals.
pub fn frenet_apparatus(jets: &JetPoint, order_tol: f64) -> Result<FrenetData, FrenetError> {
    let speed = jets.speed();
    if (speed - 1.0).abs() > UNIT_SPEED_TOL {
        return Err(FrenetError::NotUnitSpeed(speed));
    }
    let n = jets.dim();
    let mut residuals: Vec<Vec<Jet5>> = Vec::new();
    let mut norms_sq: Vec<Jet5> = Vec::new();
    let mut ambiguous = false;
    for i in 1..=MAX_ORDER.min(n) {
        let g = jets.derivative_jets(i);
        let mut e = g.clone();
        for (prev, prev_sq) in residuals.iter().zip(&norms_sq) {
            let coef = jet_dot(&e, prev).try_div(prev_sq)?;
            for (x, p) in e.iter_mut().zip(prev) {
                *x -= coef * *p;
            }
        }
        let e_norm = e.iter().map(|x| x.value() * x.value()).sum::<f64>().sqrt();
        let g_norm = g.iter().map(|x| x.value() * x.value()).sum::<f64>().sqrt();
        let threshold = order_tol * g_norm.max(1.0);
        if e_norm > threshold / AMBIGUITY_FACTOR && e_norm < threshold * AMBIGUITY_FACTOR {
            ambiguous = true;
        }
        if e_norm <= threshold {
            break;
        }
        norms_sq.push(jet_dot(&e, &e));
        residuals.push(e);
    }
    let d = residuals.len();
    let norms = norms_sq
        .iter()
        .map(Jet5::sqrt)
        .collect::<Result<Vec<_>, _>>()?;
    let kappa_jets = (1..d)
        .map(|i| norms[i].try_div(&norms[i - 1]))
        .collect::<Result<Vec<_>, _>>()?;
    let deriv = |i: usize, k: usize| kappa_jets.get(i).map_or(0.0, |j| j.derivative(k));
    let kappa_derivs = KappaDerivs {
        k1p: deriv(0, 1),
        k1pp: deriv(0, 2),
        k1ppp: deriv(0, 3),
        k2p: deriv(1, 1),
        k2pp: deriv(1, 2),
        k3p: deriv(2, 1),
    };
    let frame = residuals
        .iter()
        .zip(&norms)
        .map(|(e, nrm)| e.iter().map(|x| x.value() / nrm.value()).collect())
        .collect();
    Ok(FrenetData {
        s: jets.t0,
        d,
        frame,
        kappas: kappa_jets.iter().map(Jet5::value).collect(),
        kappa_derivs: Some(kappa_derivs),
        ambiguous,
    })
}

/// Frenet apparatus of a closed-form curve at parameter `t`.
pub fn analyze_at(def: &CurveDef, t: f64, order_tol: f64) -> Result<FrenetData, FrenetError> {
    let jets = unit_speed_jets(def, t)?;
    frenet_apparatus(&jets, order_tol)
}

/// Arclength jet of a closed-form curve at parameter `t`.
pub fn unit_speed_jets(def: &CurveDef, t: f64) -> Result<JetPoint, FrenetError> {
    Ok(unit_speed_lift(&def.eval_jet(t)?)?)
}

/// Where curvature derivatives come from.
#[derive(Debug, Clone, Copy)]
pub enum KappaSource<'a> {
    /// Closed-form curve; the point is given by its parameter value.
    Curve { def: &'a CurveDef, order_tol: f64 },
    /// Curvature profile; the point is given by arclength.
    Profile(&'a CurvatureProfile),
}

/// `κ₁′, κ₁″, κ₁‴, κ₂′, κ₂″, κ₃′` at a point.
///
/// Closed forms go through jets; tabulated profiles use fourth-order central
/// differences of their stored derivative column.
pub fn kappa_derivatives(source: KappaSource<'_>, at: f64) -> Result<KappaDerivs, FrenetError> {
    match source {
        KappaSource::Curve { def, order_tol } => {
            let f = analyze_at(def, at, order_tol)?;
            Ok(f.kappa_derivs.unwrap_or_default())
        }
        KappaSource::Profile(profile) => Ok(profile.kappa_derivs(at)?),
    }
}

/// Arclength samples of a curve, optionally with the frames and curvatures
/// that produced them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveSamples {
    pub s: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub frames: Option<Vec<Vec<Vec<f64>>>>,
    pub kappas: Option<Vec<Vec<f64>>>,
}

impl CurveSamples {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Index of the sample closest to `s`.
    pub fn nearest(&self, s: f64) -> usize {
        match self.s.binary_search_by(|x| x.total_cmp(&s)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.s.len() => self.s.len() - 1,
            Err(i) => {
                if s - self.s[i - 1] <= self.s[i] - s {
                    i - 1
                } else {
                    i
                }
            }
        }
    }
}

/// Local polynomial fit used to differentiate sampled curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractConfig {
    /// Polynomial degree of the local fit.
    pub degree: usize,
    /// Largest number of samples on each side of the fit centre.
    pub half_width: usize,
    /// Smallest half-width tried when the widest fit shows bias.
    pub min_half_width: usize,
    pub order_tol: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { degree: 14, half_width: 250, min_half_width: 60, order_tol: 1e-5 }
    }
}

impl ExtractConfig {
    /// Single fixed window.
    pub fn fixed(degree: usize, half_width: usize, order_tol: f64) -> ExtractConfig {
        ExtractConfig { degree, half_width, min_half_width: half_width, order_tol }
    }

    /// Candidate half-widths, widest first.
    fn half_widths(&self) -> Vec<usize> {
        let floor = self.min_half_width.min(self.half_width).max(1);
        let mut out = vec![self.half_width.max(floor)];
        while let Some(&last) = out.last() {
            let next = last * 2 / 3;
            if next <= floor {
                break;
            }
            out.push(next);
        }
        if *out.last().unwrap() != floor {
            out.push(floor);
        }
        out
    }
}

/// A wider window is kept while its fit residual stays within this factor of
/// the narrowest window's.
const BIAS_FACTOR: f64 = 4.0;

/// Frenet apparatus at every interior sample (all but the two endpoints).
///
/// Derivatives come from a least-squares polynomial fit over a window of
/// `2·h + 1` samples, shifted inward near the ends of the grid. `h` is the
/// widest candidate whose residual shows no bias over the narrowest fit.
/// Curvature derivatives are not estimated.
pub fn extract_from_samples(samples: &CurveSamples) -> Result<Vec<FrenetData>, FrenetError> {
    extract_with(samples, &ExtractConfig::default())
}

pub fn extract_with(samples: &CurveSamples, cfg: &ExtractConfig) -> Result<Vec<FrenetData>, FrenetError> {
    validate_samples(samples)?;
    let indices: Vec<usize> = (1..samples.len() - 1).collect();
    extract_at(samples, &indices, cfg)
}

/// Frenet apparatus at the given sample indices.
pub fn extract_at(
    samples: &CurveSamples,
    indices: &[usize],
    cfg: &ExtractConfig,
) -> Result<Vec<FrenetData>, FrenetError> {
    validate_samples(samples)?;
    indices
        .par_iter()
        .map(|&i| {
            let jets = fit_jet(samples, i, cfg)?;
            let lifted = unit_speed_lift(&jets)?;
            let mut f = frenet_apparatus(&lifted, cfg.order_tol)?;
            f.s = samples.s[i];
            f.kappa_derivs = None;
            Ok(f)
        })
        .collect()
}

fn validate_samples(samples: &CurveSamples) -> Result<(), FrenetError> {
    let n = samples.len();
    if n < MIN_SAMPLES || samples.points.len() != n {
        return Err(FrenetError::InsufficientSamples { got: n.min(samples.points.len()), need: MIN_SAMPLES });
    }
    let dim = samples.dim();
    if let Some(i) = samples.points.iter().position(|p| p.len() != dim || dim < 2) {
        return Err(FrenetError::DimensionMismatch(i));
    }
    if let Some(i) = samples.s.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(FrenetError::NonMonotone(i + 1));
    }
    let nominal = (samples.s[n - 1] - samples.s[0]) / (n - 1) as f64;
    if let Some(i) = samples
        .s
        .windows(2)
        .position(|w| ((w[1] - w[0]) - nominal).abs() > 0.1 * nominal)
    {
        return Err(FrenetError::IrregularSpacing { index: i + 1, nominal });
    }
    Ok(())
}

fn fit_jet(samples: &CurveSamples, center: usize, cfg: &ExtractConfig) -> Result<JetPoint, FrenetError> {
    let widths = cfg.half_widths();
    let narrowest = fit_window(samples, center, *widths.last().unwrap(), cfg.degree)?;
    if widths.len() == 1 {
        return Ok(narrowest.0);
    }
    let magnitude = samples.points[center].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let limit = BIAS_FACTOR * narrowest.1.max(1e-15 * (1.0 + magnitude));
    for &hw in &widths[..widths.len() - 1] {
        let (jets, rms) = fit_window(samples, center, hw, cfg.degree)?;
        if rms <= limit {
            return Ok(jets);
        }
    }
    Ok(narrowest.0)
}

/// Jets at `center` and the RMS residual of the fit.
fn fit_window(samples: &CurveSamples, center: usize, half_width: usize, degree: usize) -> Result<(JetPoint, f64), FrenetError> {
    let n = samples.len();
    let width = (2 * half_width + 1).min(n);
    let lo = center.saturating_sub(half_width).min(n - width);
    let window = lo..lo + width;
    let degree = degree.min(width - 2).max(MAX_ORDER);
    let s0 = samples.s[center];
    let scale = window
        .clone()
        .map(|j| (samples.s[j] - s0).abs())
        .fold(0.0, f64::max);
    let a = DMatrix::from_fn(width, degree + 1, |r, c| ((samples.s[lo + r] - s0) / scale).powi(c as i32));
    let dim = samples.dim();
    let b = DMatrix::from_fn(width, dim, |r, c| samples.points[lo + r][c]);
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * &b;
    let r = qr.r();
    if (0..=degree).any(|k| r[(k, k)].abs() < 1e-12) {
        return Err(FrenetError::SingularFit(s0));
    }
    let coeffs = r
        .solve_upper_triangular(&qtb)
        .ok_or(FrenetError::SingularFit(s0))?;
    let rms = ((&a * &coeffs - &b).norm_squared() / (width * dim) as f64).sqrt();
    let components = (0..dim)
        .map(|c| {
            let column: DVector<f64> = coeffs.column(c).into();
            let mut taylor = [0.0; MAX_ORDER + 1];
            for (k, t) in taylor.iter_mut().enumerate() {
                *t = column[k] / scale.powi(k as i32);
            }
            Jet5::from_coeffs(taylor)
        })
        .collect();
    Ok((JetPoint::new(s0, components), rms))
}
