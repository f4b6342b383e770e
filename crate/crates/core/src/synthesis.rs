//! Curve construction: curvature profiles, the Frenet integrator and the
//! characterizing curvature ODEs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_expr, Expr, ParseError};
use crate::frenet::{CurveSamples, FrenetData, KappaDerivs, MAX_ORDER};
use crate::jet::{Jet5, JetError};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_ODE_TOL: f64 = 1e-9;
pub const BLOW_UP_LIMIT: f64 = 1e6;
pub const SINGULAR_LIMIT: f64 = 1e-9;
const DRIFT_LIMIT: f64 = 1e-6;
const POSITIVITY_GRID: usize = 1000;
const CONST_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("kappa{index} is not positive at s = {s} (value {value})")]
    NonPositive { index: usize, s: f64, value: f64 },
    #[error("s = {s} lies outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { s: f64, lo: f64, hi: f64 },
    #[error("tabulated curvature needs at least 5 nodes, got {0}")]
    Resolution(usize),
    #[error("frame drift {drift:.3e} at s = {s} exceeds 1e-6; use a smaller step")]
    FrameDrift { s: f64, drift: f64 },
    #[error("kappa3 is constant; a non-constant third curvature is required")]
    ConstantKappa3,
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// A closed-form curvature function of `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ExprFn {
    text: String,
    ast: Expr,
}

impl ExprFn {
    pub fn parse(text: &str) -> Result<ExprFn, ParseError> {
        Ok(ExprFn { text: text.to_owned(), ast: parse_expr(text, "s")? })
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

impl TryFrom<String> for ExprFn {
    type Error = ParseError;
    fn try_from(text: String) -> Result<Self, Self::Error> {
        ExprFn::parse(&text)
    }
}

impl From<ExprFn> for String {
    fn from(f: ExprFn) -> String {
        f.text
    }
}

/// Tabulated curvature with its first derivative.
///
/// Second and third derivatives at the nodes come from five-point finite
/// differences of the derivative column; between nodes every derivative level
/// is interpolated by cubic Hermite on the next level (the third linearly).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableData", into = "TableData")]
pub struct Table {
    s: Vec<f64>,
    value: Vec<f64>,
    deriv: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableData {
    pub s: Vec<f64>,
    pub value: Vec<f64>,
    pub deriv: Vec<f64>,
}

impl TryFrom<TableData> for Table {
    type Error = SynthesisError;
    fn try_from(t: TableData) -> Result<Self, Self::Error> {
        Table::new(t.s, t.value, t.deriv)
    }
}

impl From<Table> for TableData {
    fn from(t: Table) -> TableData {
        TableData { s: t.s, value: t.value, deriv: t.deriv }
    }
}

impl Table {
    pub fn new(s: Vec<f64>, value: Vec<f64>, deriv: Vec<f64>) -> Result<Table, SynthesisError> {
        let n = s.len();
        if n < 5 {
            return Err(SynthesisError::Resolution(n));
        }
        if value.len() != n || deriv.len() != n {
            return Err(SynthesisError::InvalidProfile("table columns differ in length".into()));
        }
        if s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SynthesisError::InvalidProfile("table grid is not strictly increasing".into()));
        }
        if value.iter().chain(&deriv).any(|x| !x.is_finite()) {
            return Err(SynthesisError::InvalidProfile("table holds non-finite values".into()));
        }
        let mut d2 = vec![0.0; n];
        let mut d3 = vec![0.0; n];
        for i in 0..n {
            let lo = i.saturating_sub(2).min(n - 5);
            let offsets: Vec<f64> = (lo..lo + 5).map(|j| s[j] - s[i]).collect();
            let w = fd_weights(&offsets, 2);
            d2[i] = (0..5).map(|k| w[1][k] * deriv[lo + k]).sum();
            d3[i] = (0..5).map(|k| w[2][k] * deriv[lo + k]).sum();
        }
        Ok(Table { s, value, deriv, d2, d3 })
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub fn derivs(&self) -> &[f64] {
        &self.deriv
    }

    pub fn range(&self) -> [f64; 2] {
        [self.s[0], self.s[self.s.len() - 1]]
    }

    fn locate(&self, s: f64) -> Result<(usize, f64), SynthesisError> {
        let [lo, hi] = self.range();
        let slack = 1e-9 * (hi - lo);
        if !(s >= lo - slack && s <= hi + slack) {
            return Err(SynthesisError::OutOfRange { s, lo, hi });
        }
        let s = s.clamp(lo, hi);
        let i = match self.s.binary_search_by(|x| x.total_cmp(&s)) {
            Ok(i) => return Ok((i.min(self.s.len() - 2), if i == self.s.len() - 1 { 1.0 } else { 0.0 })),
            Err(i) => i - 1,
        };
        Ok((i, (s - self.s[i]) / (self.s[i + 1] - self.s[i])))
    }

    /// `κ, κ′, κ″, κ‴` at `s`.
    pub fn derivatives(&self, s: f64) -> Result<[f64; 4], SynthesisError> {
        let (i, u) = self.locate(s)?;
        let h = self.s[i + 1] - self.s[i];
        let levels = [&self.value, &self.deriv, &self.d2, &self.d3];
        let mut out = [0.0; 4];
        for k in 0..3 {
            out[k] = hermite(levels[k][i], levels[k][i + 1], levels[k + 1][i], levels[k + 1][i + 1], h, u);
        }
        out[3] = self.d3[i] + u * (self.d3[i + 1] - self.d3[i]);
        Ok(out)
    }
}

fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, h: f64, u: f64) -> f64 {
    if u == 0.0 {
        return y0;
    }
    if u == 1.0 {
        return y1;
    }
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0) * y0
        + (u3 - 2.0 * u2 + u) * h * m0
        + (-2.0 * u3 + 3.0 * u2) * y1
        + (u3 - u2) * h * m1
}

/// Finite-difference weights for derivatives `0..=m` at offset 0 from the
/// given node offsets (Fornberg's recursion).
pub fn fd_weights(offsets: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = offsets.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// One curvature function of arclength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaFn {
    Constant(f64),
    Expr(ExprFn),
    Table(Table),
    /// `base(s) · (1 + eps · (s − s0))`.
    Modulated { base: Box<KappaFn>, eps: f64, s0: f64 },
    /// `c / √of(s)`.
    COverSqrt { c: f64, of: Box<KappaFn> },
    /// `base(s / c) / c`, the curvature of a curve rescaled by `c`.
    Scaled { base: Box<KappaFn>, c: f64 },
}

impl KappaFn {
    pub fn expr(text: &str) -> Result<KappaFn, SynthesisError> {
        Ok(KappaFn::Expr(ExprFn::parse(text)?))
    }

    pub fn value(&self, s: f64) -> Result<f64, SynthesisError> {
        Ok(match self {
            KappaFn::Constant(v) => *v,
            KappaFn::Expr(f) => f.ast.eval(s)?,
            KappaFn::Table(t) => t.derivatives(s)?[0],
            KappaFn::Modulated { base, eps, s0 } => base.value(s)? * (1.0 + eps * (s - s0)),
            KappaFn::COverSqrt { c, of } => {
                let v = of.value(s)?;
                if !(v > 0.0) {
                    return Err(JetError::Domain { func: "sqrt", value: v }.into());
                }
                c / v.sqrt()
            }
            KappaFn::Scaled { base, c } => base.value(s / c)? / c,
        })
    }

    /// Jet in `s`. Closed forms are exact to order 5; anything built on a
    /// table is valid to order 3.
    pub fn jet(&self, s: f64) -> Result<Jet5, SynthesisError> {
        Ok(match self {
            KappaFn::Constant(v) => Jet5::constant(*v),
            KappaFn::Expr(f) => f.ast.eval_jet(Jet5::variable(s))?,
            KappaFn::Table(t) => {
                let [v, d1, d2, d3] = t.derivatives(s)?;
                Jet5::from_coeffs([v, d1, d2 / 2.0, d3 / 6.0, 0.0, 0.0])
            }
            KappaFn::Modulated { base, eps, s0 } => {
                base.jet(s)? * Jet5::from_coeffs([1.0 + eps * (s - s0), *eps, 0.0, 0.0, 0.0, 0.0])
            }
            KappaFn::COverSqrt { c, of } => of.jet(s)?.sqrt()?.recip()?.scale(*c),
            KappaFn::Scaled { base, c } => {
                let inner = base.jet(s / c)?;
                let mut coeffs = *inner.coeffs();
                for (k, x) in coeffs.iter_mut().enumerate() {
                    *x /= c.powi(k as i32 + 1);
                }
                Jet5::from_coeffs(coeffs)
            }
        })
    }

    pub fn is_constant_fn(&self) -> bool {
        match self {
            KappaFn::Constant(_) => true,
            KappaFn::Expr(f) => !f.ast.depends_on_var(),
            KappaFn::Table(_) => false,
            KappaFn::Modulated { base, eps, .. } => *eps == 0.0 && base.is_constant_fn(),
            KappaFn::COverSqrt { of, .. } => of.is_constant_fn(),
            KappaFn::Scaled { base, .. } => base.is_constant_fn(),
        }
    }

    /// Domain of a tabulated function, if any.
    pub fn table_range(&self) -> Option<[f64; 2]> {
        match self {
            KappaFn::Constant(_) | KappaFn::Expr(_) => None,
            KappaFn::Table(t) => Some(t.range()),
            KappaFn::Modulated { base, .. } | KappaFn::COverSqrt { of: base, .. } => base.table_range(),
            KappaFn::Scaled { base, c } => base.table_range().map(|[a, b]| [a * c, b * c]),
        }
    }
}

/// `κ₁ … κ_{d−1}` as functions of arclength on `s_range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureProfile {
    /// Intended osculating order.
    pub d: usize,
    pub s_range: [f64; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kappa: Vec<KappaFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl CurvatureProfile {
    pub fn new(d: usize, kappa: Vec<KappaFn>, s_range: [f64; 2]) -> Result<CurvatureProfile, SynthesisError> {
        let p = CurvatureProfile { d, s_range, kappa, label: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn from_toml(text: &str) -> Result<CurvatureProfile, String> {
        let p: CurvatureProfile = toml::from_str(text).map_err(|e| e.to_string())?;
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("profiles serialize to TOML")
    }

    /// Checks shape, range and strict positivity on a dense grid.
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if !(1..=MAX_ORDER).contains(&self.d) {
            return Err(SynthesisError::InvalidProfile(format!("order {} outside 1..=5", self.d)));
        }
        if self.kappa.len() != self.d - 1 {
            return Err(SynthesisError::InvalidProfile(format!(
                "order {} needs {} curvature functions, got {}",
                self.d,
                self.d - 1,
                self.kappa.len()
            )));
        }
        let [lo, hi] = self.s_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SynthesisError::InvalidProfile(format!("invalid range [{lo}, {hi}]")));
        }
        for (i, k) in self.kappa.iter().enumerate() {
            if let Some([a, b]) = k.table_range() {
                let slack = 1e-9 * (hi - lo);
                if a > lo + slack || b < hi - slack {
                    return Err(SynthesisError::OutOfRange { s: if a > lo { lo } else { hi }, lo: a, hi: b });
                }
            }
            for j in 0..=POSITIVITY_GRID {
                let s = lo + (hi - lo) * j as f64 / POSITIVITY_GRID as f64;
                let value = k.value(s)?;
                if !(value > 0.0) || !value.is_finite() {
                    return Err(SynthesisError::NonPositive { index: i + 1, s, value });
                }
            }
        }
        Ok(())
    }

    /// `κ_i(s)` (1-based), zero beyond the order.
    pub fn kappa(&self, i: usize, s: f64) -> Result<f64, SynthesisError> {
        match self.kappa.get(i.wrapping_sub(1)) {
            Some(k) => k.value(s),
            None => Ok(0.0),
        }
    }

    pub fn kappas_at(&self, s: f64) -> Result<Vec<f64>, SynthesisError> {
        self.kappa.iter().map(|k| k.value(s)).collect()
    }

    pub fn kappa_derivs(&self, s: f64) -> Result<KappaDerivs, SynthesisError> {
        let jets = self.kappa.iter().take(3).map(|k| k.jet(s)).collect::<Result<Vec<_>, _>>()?;
        let d = |i: usize, k: usize| jets.get(i).map_or(0.0, |j| j.derivative(k));
        Ok(KappaDerivs {
            k1p: d(0, 1),
            k1pp: d(0, 2),
            k1ppp: d(0, 3),
            k2p: d(1, 1),
            k2pp: d(1, 2),
            k3p: d(2, 1),
        })
    }

    /// Frenet data at `s` from the profile's curvatures and a supplied frame.
    pub fn frenet_data(&self, s: f64, frame: Vec<Vec<f64>>) -> Result<FrenetData, SynthesisError> {
        Ok(FrenetData {
            s,
            d: self.d,
            frame,
            kappas: self.kappas_at(s)?,
            kappa_derivs: Some(self.kappa_derivs(s)?),
            ambiguous: false,
        })
    }

    /// Profile of the curve `c·γ(s/c)`.
    pub fn scaled(&self, c: f64) -> CurvatureProfile {
        CurvatureProfile {
            d: self.d,
            s_range: [self.s_range[0] * c, self.s_range[1] * c],
            kappa: self
                .kappa
                .iter()
                .map(|k| match k {
                    KappaFn::Constant(v) => KappaFn::Constant(v / c),
                    other => KappaFn::Scaled { base: Box::new(other.clone()), c },
                })
                .collect(),
            label: self.label.clone(),
        }
    }

    /// Same curvatures on a narrower range.
    pub fn restricted(&self, s_range: [f64; 2]) -> CurvatureProfile {
        CurvatureProfile { s_range, ..self.clone() }
    }
}

/// Starting point and frame for [`integrate_frenet`].
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub point: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
}

impl InitialState {
    /// Origin with `v_i = e_i`.
    pub fn standard(n: usize, d: usize) -> InitialState {
        InitialState {
            point: vec![0.0; n],
            frame: (0..d)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }
}

fn frame_rhs(frame: &[Vec<f64>], kappas: &[f64], out: &mut [Vec<f64>]) {
    let d = frame.len();
    for i in 0..d {
        for c in 0..frame[i].len() {
            let mut v = 0.0;
            if i > 0 {
                v -= kappas[i - 1] * frame[i - 1][c];
            }
            if i + 1 < d {
                v += kappas[i] * frame[i + 1][c];
            }
            out[i][c] = v;
        }
    }
}

pub(crate) fn orthonormality_defect(frame: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..frame.len() {
        for j in 0..=i {
            let target = if i == j { 1.0 } else { 0.0 };
            let dot: f64 = frame[i].iter().zip(&frame[j]).map(|(a, b)| a * b).sum();
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

pub(crate) fn modified_gram_schmidt(frame: &mut [Vec<f64>]) {
    for i in 0..frame.len() {
        for j in 0..i {
            let (head, tail) = frame.split_at_mut(i);
            let dot: f64 = tail[0].iter().zip(&head[j]).map(|(a, b)| a * b).sum();
            for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                *x -= dot * y;
            }
        }
        let norm = frame[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in frame[i].iter_mut() {
            *x /= norm;
        }
    }
}

/// Integrates `γ′ = v₁` with the Frenet equations by classical RK4.
///
/// The step is shrunk so that it divides the profile range exactly; the frame
/// is re-orthonormalized after every step.
pub fn integrate_frenet(
    profile: &CurvatureProfile,
    n: usize,
    init: Option<&InitialState>,
    step: f64,
) -> Result<CurveSamples, SynthesisError> {
    profile.validate()?;
    let d = profile.d;
    if n < d.max(2) || n > crate::expr::MAX_DIM {
        return Err(SynthesisError::InvalidParameter(format!("dimension {n} cannot host order {d}")));
    }
    if !(step > 0.0) {
        return Err(SynthesisError::InvalidParameter(format!("step {step} must be positive")));
    }
    let standard = InitialState::standard(n, d);
    let init = init.unwrap_or(&standard);
    if init.point.len() != n || init.frame.len() != d || init.frame.iter().any(|v| v.len() != n) {
        return Err(SynthesisError::InvalidParameter("initial state has the wrong shape".into()));
    }
    if orthonormality_defect(&init.frame) > 1e-12 {
        return Err(SynthesisError::InvalidParameter("initial frame is not orthonormal".into()));
    }
    let [lo, hi] = profile.s_range;
    let steps = ((hi - lo) / step).ceil().max(1.0) as usize;
    let h = (hi - lo) / steps as f64;

    let mut point = init.point.clone();
    let mut frame = init.frame.clone();
    let mut out = CurveSamples {
        s: Vec::with_capacity(steps + 1),
        points: Vec::with_capacity(steps + 1),
        frames: Some(Vec::with_capacity(steps + 1)),
        kappas: Some(Vec::with_capacity(steps + 1)),
    };
    let record = |out: &mut CurveSamples, s: f64, point: &[f64], frame: &[Vec<f64>]| -> Result<(), SynthesisError> {
        out.s.push(s);
        out.points.push(point.to_vec());
        out.frames.as_mut().unwrap().push(frame.to_vec());
        out.kappas.as_mut().unwrap().push(profile.kappas_at(s)?);
        Ok(())
    };
    record(&mut out, lo, &point, &frame)?;

    let zeros = || vec![vec![0.0; n]; d];
    let (mut k_frame, mut tmp) = ([zeros(), zeros(), zeros(), zeros()], zeros());
    for j in 0..steps {
        let s = lo + j as f64 * h;
        let s_next = if j + 1 == steps { hi } else { lo + (j + 1) as f64 * h };
        let kap = [
            profile.kappas_at(s)?,
            profile.kappas_at(s + h / 2.0)?,
            profile.kappas_at(s_next)?,
        ];
        let stage_kappa = [&kap[0], &kap[1], &kap[1], &kap[2]];
        let stage_scale = [0.0, 0.5, 0.5, 1.0];
        // position derivative is v₁ at each stage
        let mut k_point = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for st in 0..4 {
            for i in 0..d {
                for c in 0..n {
                    tmp[i][c] = if st == 0 {
                        frame[i][c]
                    } else {
                        frame[i][c] + stage_scale[st] * h * k_frame[st - 1][i][c]
                    };
                }
            }
            k_point[st].clone_from(&tmp[0]);
            let (stage, _) = k_frame.split_at_mut(st + 1);
            frame_rhs(&tmp, stage_kappa[st], &mut stage[st]);
        }
        for c in 0..n {
            point[c] += h / 6.0 * (k_point[0][c] + 2.0 * k_point[1][c] + 2.0 * k_point[2][c] + k_point[3][c]);
        }
        for i in 0..d {
            for c in 0..n {
                frame[i][c] += h / 6.0
                    * (k_frame[0][i][c] + 2.0 * k_frame[1][i][c] + 2.0 * k_frame[2][i][c] + k_frame[3][i][c]);
            }
        }
        let drift = orthonormality_defect(&frame);
        if drift > DRIFT_LIMIT {
            return Err(SynthesisError::FrameDrift { s: s_next, drift });
        }
        modified_gram_schmidt(&mut frame);
        record(&mut out, s_next, &point, &frame)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OdeKind {
    #[serde(rename = "gaw3-o3")]
    Gaw3Order3,
    #[serde(rename = "gaw3-o4")]
    Gaw3Order4,
    #[serde(rename = "gaw4-o3")]
    Gaw4Order3,
    #[serde(rename = "gaw4-o4")]
    Gaw4Order4,
}

impl OdeKind {
    pub const ALL: [OdeKind; 4] = [OdeKind::Gaw3Order3, OdeKind::Gaw3Order4, OdeKind::Gaw4Order3, OdeKind::Gaw4Order4];

    pub fn name(self) -> &'static str {
        match self {
            OdeKind::Gaw3Order3 => "gaw3-o3",
            OdeKind::Gaw3Order4 => "gaw3-o4",
            OdeKind::Gaw4Order3 => "gaw4-o3",
            OdeKind::Gaw4Order4 => "gaw4-o4",
        }
    }

    /// Whether the solved unknown is κ₃ (otherwise κ₂).
    pub fn solves_kappa3(self) -> bool {
        self == OdeKind::Gaw3Order4
    }

    /// Right-hand side of the second-order equation for the unknown `y`.
    pub fn rhs(self, k1: f64, c: f64, y: f64, yp: f64) -> f64 {
        let k1s = k1 * k1;
        match self {
            OdeKind::Gaw3Order3 => y * (k1s + y * y),
            OdeKind::Gaw3Order4 => 1.5 * yp * yp / y - 2.0 * y * (k1s + y * y) - 2.0 * c * c,
            OdeKind::Gaw4Order3 => {
                let q = k1s + y * y;
                3.0 * y * yp * yp / q + y * q
            }
            OdeKind::Gaw4Order4 => {
                let q = k1s + y * y;
                let k3 = gaw4_o4_kappa3(k1, c, y);
                3.0 * y * yp * yp / q + y * (q + k3 * k3)
            }
        }
    }
}

impl fmt::Display for OdeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OdeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OdeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown ODE '{s}' (expected gaw3-o3, gaw3-o4, gaw4-o3 or gaw4-o4)"))
    }
}

/// κ₃ eliminated from `κ₂²κ₃ = c(κ₁² + κ₂²)^{3/2}`.
pub fn gaw4_o4_kappa3(k1: f64, c: f64, k2: f64) -> f64 {
    c * (k1 * k1 + k2 * k2).powf(1.5) / (k2 * k2)
}

fn gaw4_o4_kappa3_prime(k1: f64, c: f64, k2: f64, k2p: f64) -> f64 {
    let q = k1 * k1 + k2 * k2;
    c * q.sqrt() * (k2 * k2 - 2.0 * k1 * k1) / k2.powi(3) * k2p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OdeFlags {
    /// The unknown exceeded 1e6 or the step size underflowed.
    pub blow_up: bool,
    /// The unknown reached zero: the curve leaves the admissible order.
    pub order_collapse: bool,
    /// κ₃ fell below 1e-9 where the equation is singular.
    pub singularity: bool,
}

impl OdeFlags {
    pub fn any(&self) -> bool {
        self.blow_up || self.order_collapse || self.singularity
    }
}

/// Companion curvature grid derived from the solved one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Companion {
    /// 2 or 3: which curvature the column holds.
    pub index: usize,
    pub value: Vec<f64>,
    pub deriv: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSolution {
    pub kind: OdeKind,
    pub kappa1: f64,
    pub c: f64,
    pub s: Vec<f64>,
    pub value: Vec<f64>,
    pub deriv: Vec<f64>,
    pub companion: Option<Companion>,
    pub flags: OdeFlags,
    pub method: String,
    pub tol: f64,
    pub out_step: f64,
    /// Largest finite-difference residual of the equation on the output grid,
    /// relative to `max(1, |rhs|)`.
    pub max_residual: f64,
    /// Requested range; the solution may stop earlier when a flag is raised.
    pub requested_range: [f64; 2],
}

impl OdeSolution {
    pub fn s_range(&self) -> [f64; 2] {
        [self.s[0], self.s[self.s.len() - 1]]
    }

    /// Index (2 or 3) of the curvature the equation was solved for.
    pub fn solved_index(&self) -> usize {
        if self.kind.solves_kappa3() {
            3
        } else {
            2
        }
    }

    /// Curvature profile of the curve this solution drives.
    pub fn profile(&self) -> Result<CurvatureProfile, SynthesisError> {
        let table = KappaFn::Table(Table::new(self.s.clone(), self.value.clone(), self.deriv.clone())?);
        let k1 = KappaFn::Constant(self.kappa1);
        let kappa = match self.kind {
            OdeKind::Gaw3Order3 | OdeKind::Gaw4Order3 => vec![k1, table],
            OdeKind::Gaw3Order4 => vec![k1, KappaFn::COverSqrt { c: self.c, of: Box::new(table.clone()) }, table],
            OdeKind::Gaw4Order4 => {
                let comp = self
                    .companion
                    .as_ref()
                    .ok_or_else(|| SynthesisError::InvalidProfile("missing kappa3 grid".into()))?;
                let k3 = KappaFn::Table(Table::new(self.s.clone(), comp.value.clone(), comp.deriv.clone())?);
                vec![k1, table, k3]
            }
        };
        let d = kappa.len() + 1;
        Ok(CurvatureProfile::new(d, kappa, self.s_range())?.with_label(self.kind.name()))
    }
}

/// Initial data and settings for the curvature ODE solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeSetup {
    pub kappa1: f64,
    pub c: f64,
    pub y0: f64,
    pub yp0: f64,
    pub s_range: [f64; 2],
    pub tol: f64,
    pub out_step: f64,
}

impl OdeSetup {
    pub fn new(kappa1: f64, y0: f64, yp0: f64, s_range: [f64; 2]) -> OdeSetup {
        OdeSetup { kappa1, c: 0.0, y0, yp0, s_range, tol: DEFAULT_ODE_TOL, out_step: DEFAULT_STEP }
    }

    pub fn with_c(mut self, c: f64) -> OdeSetup {
        self.c = c;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> OdeSetup {
        self.tol = tol;
        self
    }
}

/// `κ₂″ = κ₂(κ₁² + κ₂²)`.
pub fn solve_gaw3_order3(kappa1: f64, kappa2_0: f64, kappa2_prime_0: f64, s_range: [f64; 2], tol: f64) -> Result<OdeSolution, SynthesisError> {
    solve_ode(OdeKind::Gaw3Order3, &OdeSetup::new(kappa1, kappa2_0, kappa2_prime_0, s_range).with_tol(tol))
}

/// `κ₃″ = 3κ₃′²/(2κ₃) − 2κ₃(κ₁² + κ₃²) − 2c²` with `κ₂ = c/√κ₃`.
pub fn solve_gaw3_order4(
    kappa1: f64,
    c: f64,
    kappa3_0: f64,
    kappa3_prime_0: f64,
    s_range: [f64; 2],
    tol: f64,
) -> Result<OdeSolution, SynthesisError> {
    solve_ode(
        OdeKind::Gaw3Order4,
        &OdeSetup::new(kappa1, kappa3_0, kappa3_prime_0, s_range).with_c(c).with_tol(tol),
    )
}

/// `κ₂″ = 3κ₂κ₂′²/(κ₁² + κ₂²) + κ₂(κ₁² + κ₂²)`.
pub fn solve_gaw4_order3(kappa1: f64, kappa2_0: f64, kappa2_prime_0: f64, s_range: [f64; 2], tol: f64) -> Result<OdeSolution, SynthesisError> {
    solve_ode(OdeKind::Gaw4Order3, &OdeSetup::new(kappa1, kappa2_0, kappa2_prime_0, s_range).with_tol(tol))
}

/// `κ₂″ = 3κ₂κ₂′²/(κ₁² + κ₂²) + κ₂(κ₁² + κ₂² + κ₃²)` with
/// `κ₃ = c(κ₁² + κ₂²)^{3/2}/κ₂²`.
pub fn solve_gaw4_order4(
    kappa1: f64,
    c: f64,
    kappa2_0: f64,
    kappa2_prime_0: f64,
    s_range: [f64; 2],
    tol: f64,
) -> Result<OdeSolution, SynthesisError> {
    solve_ode(
        OdeKind::Gaw4Order4,
        &OdeSetup::new(kappa1, kappa2_0, kappa2_prime_0, s_range).with_c(c).with_tol(tol),
    )
}

const A: [[f64; 5]; 6] = [
    [0.0; 5],
    [1.0 / 4.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0];
const B5: [f64; 6] = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];

/// Adaptive Runge–Kutta–Fehlberg 4(5) for `y″ = rhs(y, y′)`.
///
/// Steps never cross an output node, so the solution is reported exactly on
/// the uniform grid. Flags stop the integration at the last completed node.
pub fn solve_ode(kind: OdeKind, setup: &OdeSetup) -> Result<OdeSolution, SynthesisError> {
    let OdeSetup { kappa1, c, y0, yp0, s_range: [lo, hi], tol, out_step } = *setup;
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(SynthesisError::InvalidParameter(format!("{name} must be positive, got {v}")))
        }
    };
    positive("kappa1", kappa1)?;
    positive("initial curvature", y0)?;
    positive("tol", tol)?;
    positive("step", out_step)?;
    if matches!(kind, OdeKind::Gaw3Order4 | OdeKind::Gaw4Order4) {
        positive("c", c)?;
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || !yp0.is_finite() {
        return Err(SynthesisError::InvalidParameter(format!("invalid range [{lo}, {hi}]")));
    }
    let nodes = ((hi - lo) / out_step).round().max(4.0) as usize;
    let dh = (hi - lo) / nodes as f64;
    let f = |y: [f64; 2]| [y[1], kind.rhs(kappa1, c, y[0], y[1])];
    let guard = |y: [f64; 2]| -> Option<OdeFlags> {
        let mut flags = OdeFlags::default();
        if !y[0].is_finite() || !y[1].is_finite() || y[0].abs() > BLOW_UP_LIMIT {
            flags.blow_up = true;
        } else if kind == OdeKind::Gaw3Order4 && y[0] < SINGULAR_LIMIT {
            flags.singularity = true;
        } else if y[0] <= 0.0 {
            flags.order_collapse = true;
        }
        flags.any().then_some(flags)
    };

    let mut s_out = vec![lo];
    let mut values = vec![y0];
    let mut derivs = vec![yp0];
    let mut flags = OdeFlags::default();
    let mut y = [y0, yp0];
    let mut s = lo;
    let mut h = dh;
    'nodes: for k in 1..=nodes {
        let target = if k == nodes { hi } else { lo + k as f64 * dh };
        while s < target {
            let last = h >= target - s;
            let step = if last { target - s } else { h };
            let mut stages = [[0.0; 2]; 6];
            for i in 0..6 {
                let mut yi = y;
                for (j, stage) in stages.iter().enumerate().take(i) {
                    yi[0] += step * A[i][j] * stage[0];
                    yi[1] += step * A[i][j] * stage[1];
                }
                stages[i] = f(yi);
            }
            let mut y4 = y;
            let mut y5 = y;
            for i in 0..6 {
                for c in 0..2 {
                    y4[c] += step * B4[i] * stages[i][c];
                    y5[c] += step * B5[i] * stages[i][c];
                }
            }
            let err = (0..2)
                .map(|c| (y5[c] - y4[c]).abs() / (tol * (1.0 + y5[c].abs().max(y[c].abs()))))
                .fold(0.0, f64::max);
            if err <= 1.0 && y5.iter().all(|v| v.is_finite()) {
                if let Some(fl) = guard(y5) {
                    flags = fl;
                    break 'nodes;
                }
                s = if last { target } else { s + step };
                y = y5;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).min(5.0) };
                h = if last { h.max(step * grow) } else { step * grow };
            } else {
                let shrink = if err.is_finite() { (0.9 * err.powf(-0.25)).max(0.1) } else { 0.1 };
                h = step * shrink;
            }
            if h < 1e-13 * (1.0 + s.abs()) {
                flags.blow_up = true;
                break 'nodes;
            }
        }
        s_out.push(target);
        values.push(y[0]);
        derivs.push(y[1]);
    }
    if s_out.len() < 5 {
        return Err(SynthesisError::InvalidParameter(format!(
            "solution stopped after {} nodes ({:?}); shrink the range or change initial data",
            s_out.len(),
            flags
        )));
    }
    let companion = match kind {
        OdeKind::Gaw3Order4 => Some(Companion {
            index: 2,
            value: values.iter().map(|k3| c / k3.sqrt()).collect(),
            deriv: values
                .iter()
                .zip(&derivs)
                .map(|(k3, k3p)| -c * k3p / (2.0 * k3.powf(1.5)))
                .collect(),
        }),
        OdeKind::Gaw4Order4 => Some(Companion {
            index: 3,
            value: values.iter().map(|&k2| gaw4_o4_kappa3(kappa1, c, k2)).collect(),
            deriv: values
                .iter()
                .zip(&derivs)
                .map(|(&k2, &k2p)| gaw4_o4_kappa3_prime(kappa1, c, k2, k2p))
                .collect(),
        }),
        _ => None,
    };
    let max_residual = fd_residual(kind, kappa1, c, &s_out, &values, &derivs);
    Ok(OdeSolution {
        kind,
        kappa1,
        c,
        s: s_out,
        value: values,
        deriv: derivs,
        companion,
        flags,
        method: "rkf45".into(),
        tol,
        out_step: dh,
        max_residual,
        requested_range: [lo, hi],
    })
}

/// Largest `|D²y − rhs| / max(1, |rhs|)` over interior nodes, with `D²` the
/// fourth-order five-point second difference of the value column.
pub fn fd_residual(kind: OdeKind, k1: f64, c: f64, s: &[f64], y: &[f64], yp: &[f64]) -> f64 {
    let n = s.len();
    if n < 5 {
        return f64::NAN;
    }
    let mut worst: f64 = 0.0;
    for i in 2..n - 2 {
        let offsets: Vec<f64> = (i - 2..=i + 2).map(|j| s[j] - s[i]).collect();
        let w = fd_weights(&offsets, 2);
        let d2: f64 = (0..5).map(|k| w[2][k] * y[i - 2 + k]).sum();
        let rhs = kind.rhs(k1, c, y[i], yp[i]);
        worst = worst.max((d2 - rhs).abs() / rhs.abs().max(1.0));
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CanonicalKind {
    Line,
    Circle,
    Helix3,
    Helix4,
    Wcurve5,
}

impl CanonicalKind {
    pub const ALL: [CanonicalKind; 5] =
        [CanonicalKind::Line, CanonicalKind::Circle, CanonicalKind::Helix3, CanonicalKind::Helix4, CanonicalKind::Wcurve5];

    pub fn name(self) -> &'static str {
        match self {
            CanonicalKind::Line => "line",
            CanonicalKind::Circle => "circle",
            CanonicalKind::Helix3 => "helix3",
            CanonicalKind::Helix4 => "helix4",
            CanonicalKind::Wcurve5 => "wcurve5",
        }
    }

    /// Osculating order of the generated curve.
    pub fn order(self) -> usize {
        match self {
            CanonicalKind::Line => 1,
            CanonicalKind::Circle => 2,
            CanonicalKind::Helix3 => 3,
            CanonicalKind::Helix4 => 4,
            CanonicalKind::Wcurve5 => 5,
        }
    }
}

impl fmt::Display for CanonicalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CanonicalKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CanonicalKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown canonical curve '{s}' (expected line, circle, helix3, helix4 or wcurve5)"))
    }
}

/// Constant-curvature profile of the requested kind; `kappas` must hold
/// exactly `order − 1` positive values.
pub fn canonical(kind: CanonicalKind, kappas: &[f64], s_range: [f64; 2]) -> Result<CurvatureProfile, SynthesisError> {
    let need = kind.order() - 1;
    if kappas.len() != need {
        return Err(SynthesisError::InvalidParameter(format!(
            "{kind} needs {need} curvature value(s), got {}",
            kappas.len()
        )));
    }
    if let Some((i, k)) = kappas.iter().enumerate().find(|(_, k)| !(**k > 0.0 && k.is_finite())) {
        return Err(SynthesisError::InvalidParameter(format!("kappa{} must be positive, got {k}", i + 1)));
    }
    Ok(CurvatureProfile::new(kind.order(), kappas.iter().map(|&k| KappaFn::Constant(k)).collect(), s_range)?
        .with_label(kind.name()))
}

/// Order-4 profile `κ₁, c/√κ₃, κ₃` with non-constant κ₃, together with
/// warnings for grid points where the exclusions `κ₂′ ≠ 0` or
/// `κ₂″ ≠ κ₂(κ₁² + κ₂² + κ₃²)` fail.
pub fn gaw5_profile(
    kappa1: f64,
    c: f64,
    kappa3: KappaFn,
    s_range: [f64; 2],
) -> Result<(CurvatureProfile, Vec<String>), SynthesisError> {
    for (name, v) in [("kappa1", kappa1), ("c", c)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(SynthesisError::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    let [lo, hi] = s_range;
    let grid: Vec<f64> = (0..=POSITIVITY_GRID).map(|j| lo + (hi - lo) * j as f64 / POSITIVITY_GRID as f64).collect();
    let k3_values = grid.iter().map(|&s| kappa3.value(s)).collect::<Result<Vec<_>, _>>()?;
    let mean = k3_values.iter().sum::<f64>() / k3_values.len() as f64;
    let spread = k3_values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if spread <= CONST_TOL * (1.0 + mean.abs()) {
        return Err(SynthesisError::ConstantKappa3);
    }
    let kappa2 = KappaFn::COverSqrt { c, of: Box::new(kappa3.clone()) };
    let profile = CurvatureProfile::new(4, vec![KappaFn::Constant(kappa1), kappa2, kappa3], s_range)?.with_label("gaw5");
    let mut warnings = Vec::new();
    for &s in &grid {
        let kd = profile.kappa_derivs(s)?;
        let k = profile.kappas_at(s)?;
        if kd.k2p.abs() <= 1e-8 {
            warnings.push(format!("kappa2' vanishes at s = {s}"));
        }
        let b1 = kd.k2pp / k[1] - k[0] * k[0] - k[1] * k[1] - k[2] * k[2];
        if b1.abs() <= 1e-8 {
            warnings.push(format!("kappa2'' = kappa2(kappa1^2 + kappa2^2 + kappa3^2) at s = {s}"));
        }
    }
    Ok((profile, warnings))
}
