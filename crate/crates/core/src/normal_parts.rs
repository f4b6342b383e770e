//! Normal parts `N₁ … N₄` of `γ″ … γ⁽ᵛ⁾` and their frame coefficients `λ`, `μ`.

use serde::Serialize;
use thiserror::Error;

use crate::frenet::{dot, norm, FrenetData, KappaDerivs};
use crate::jet::JetPoint;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalPartsError {
    #[error("curvature derivatives are missing at s = {0}")]
    MissingDerivatives(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalParts {
    pub s: f64,
    pub d: usize,
    /// `κ₁ … κ₄`, zero beyond the osculating order.
    pub kappas: [f64; 4],
    pub derivs: KappaDerivs,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
    pub mu5: f64,
    /// `N₁ … N₄` in ambient coordinates.
    pub n: [Vec<f64>; 4],
}

impl NormalParts {
    /// `N_k` (1-based).
    pub fn n(&self, k: usize) -> &[f64] {
        &self.n[k - 1]
    }

    /// Coefficients of `N_k` on `v₂ … v₅`.
    pub fn frame_coeffs(&self, k: usize) -> [f64; 4] {
        let [k1, k2, _, _] = self.kappas;
        match k {
            1 => [k1, 0.0, 0.0, 0.0],
            2 => [self.derivs.k1p, k1 * k2, 0.0, 0.0],
            3 => [self.lambda2, self.lambda3, self.lambda4, 0.0],
            4 => [self.mu2, self.mu3, self.mu4, self.mu5],
            _ => panic!("normal part index {k} outside 1..=4"),
        }
    }
}

/// Derivatives of curvatures that vanish at this order are zeroed.
fn derivs_of(f: &FrenetData) -> Result<KappaDerivs, NormalPartsError> {
    let mut kd = f
        .kappa_derivs
        .ok_or_else(|| NormalPartsError::MissingDerivatives(f.s.to_string()))?;
    if f.d < 2 {
        (kd.k1p, kd.k1pp, kd.k1ppp) = (0.0, 0.0, 0.0);
    }
    if f.d < 3 {
        (kd.k2p, kd.k2pp) = (0.0, 0.0);
    }
    if f.d < 4 {
        kd.k3p = 0.0;
    }
    Ok(kd)
}

/// `(λ₂, λ₃, λ₄)`; curvatures beyond the order count as zero.
pub fn compute_lambdas(f: &FrenetData) -> Result<(f64, f64, f64), NormalPartsError> {
    let kd = derivs_of(f)?;
    Ok(lambdas(f.kappa(1), f.kappa(2), f.kappa(3), &kd))
}

fn lambdas(k1: f64, k2: f64, k3: f64, kd: &KappaDerivs) -> (f64, f64, f64) {
    (
        kd.k1pp - k1.powi(3) - k1 * k2 * k2,
        2.0 * kd.k1p * k2 + k1 * kd.k2p,
        k1 * k2 * k3,
    )
}

/// `(μ₂, μ₃, μ₄, μ₅)`; curvatures beyond the order count as zero.
pub fn compute_mus(f: &FrenetData) -> Result<(f64, f64, f64, f64), NormalPartsError> {
    let kd = derivs_of(f)?;
    Ok(mus(f.kappa(1), f.kappa(2), f.kappa(3), f.kappa(4), &kd))
}

fn mus(k1: f64, k2: f64, k3: f64, k4: f64, kd: &KappaDerivs) -> (f64, f64, f64, f64) {
    let KappaDerivs { k1p, k1pp, k1ppp, k2p, k2pp, k3p } = *kd;
    (
        k1ppp - 6.0 * k1 * k1 * k1p - 3.0 * k1p * k2 * k2 - 3.0 * k1 * k2 * k2p,
        3.0 * k1pp * k2 + 3.0 * k1p * k2p - k1.powi(3) * k2 - k1 * k2.powi(3) + k1 * k2pp - k1 * k2 * k3 * k3,
        3.0 * k1p * k2 * k3 + 2.0 * k1 * k2p * k3 + k1 * k2 * k3p,
        k1 * k2 * k3 * k4,
    )
}

/// `λ`, `μ` and the vectors `N₁ … N₄` built on the frame.
pub fn assemble_normals(f: &FrenetData) -> Result<NormalParts, NormalPartsError> {
    let kd = derivs_of(f)?;
    let kappas = [f.kappa(1), f.kappa(2), f.kappa(3), f.kappa(4)];
    let [k1, k2, k3, k4] = kappas;
    let (lambda2, lambda3, lambda4) = lambdas(k1, k2, k3, &kd);
    let (mu2, mu3, mu4, mu5) = mus(k1, k2, k3, k4, &kd);
    let dim = f.dim();
    let combine = |coeffs: [f64; 4]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (j, &c) in coeffs.iter().enumerate() {
            if let Some(v) = f.v(j + 2) {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += c * x;
                }
            }
        }
        out
    };
    let n = [
        combine([k1, 0.0, 0.0, 0.0]),
        combine([kd.k1p, k1 * k2, 0.0, 0.0]),
        combine([lambda2, lambda3, lambda4, 0.0]),
        combine([mu2, mu3, mu4, mu5]),
    ];
    Ok(NormalParts {
        s: f.s,
        d: f.d,
        kappas,
        derivs: kd,
        lambda2,
        lambda3,
        lambda4,
        mu2,
        mu3,
        mu4,
        mu5,
        n,
    })
}

/// Differences between jet derivatives and their Frenet expansions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeCrosscheck {
    /// `‖γ⁽ᵏ⁾_jet − γ⁽ᵏ⁾_frenet‖ / max(1, ‖γ⁽ᵏ⁾_jet‖)` for `k = 2..5`.
    pub derivative_residuals: [f64; 4],
    /// `‖(γ⁽ᵏ⁺¹⁾ − ⟨γ⁽ᵏ⁺¹⁾, v₁⟩v₁) − N_k‖ / max(1, ‖γ⁽ᵏ⁺¹⁾‖)` for `k = 1..4`.
    pub normal_residuals: [f64; 4],
    /// Largest `|⟨N_k, v₁⟩|`.
    pub tangential_leak: f64,
    /// `|⟨γ⁽ᵛ⁾, v₅⟩ − μ₅|`, zero when there is no `v₅`.
    pub mu5_residual: f64,
}

impl DerivativeCrosscheck {
    pub fn max_residual(&self) -> f64 {
        self.derivative_residuals
            .iter()
            .chain(&self.normal_residuals)
            .fold(0.0, |a, &b| a.max(b))
    }
}

/// Compares `γ″ … γ⁽ᵛ⁾` of a unit-speed jet with the Frenet expansion built
/// from `f`; the tangential part is projected out explicitly.
pub fn derivative_crosscheck(jets: &JetPoint, f: &FrenetData) -> Result<DerivativeCrosscheck, NormalPartsError> {
    let parts = assemble_normals(f)?;
    let v1 = f.v(1).unwrap_or(&[]);
    let k1 = parts.kappas[0];
    let kd = parts.derivs;
    let tangential = [
        0.0,
        -k1 * k1,
        -3.0 * k1 * kd.k1p,
        -3.0 * kd.k1p * kd.k1p - 4.0 * k1 * kd.k1pp + k1.powi(4) + k1 * k1 * parts.kappas[1] * parts.kappas[1],
    ];
    let mut derivative_residuals = [0.0; 4];
    let mut normal_residuals = [0.0; 4];
    let mut tangential_leak: f64 = 0.0;
    for k in 1..=4 {
        let g = jets.derivative(k + 1);
        let scale = norm(&g).max(1.0);
        let nk = parts.n(k);
        let expansion: Vec<f64> = nk.iter().zip(v1).map(|(n, v)| n + tangential[k - 1] * v).collect();
        derivative_residuals[k - 1] = distance(&g, &expansion) / scale;
        let g_dot_v1 = dot(&g, v1);
        let normal: Vec<f64> = g.iter().zip(v1).map(|(x, v)| x - g_dot_v1 * v).collect();
        normal_residuals[k - 1] = distance(&normal, nk) / scale;
        tangential_leak = tangential_leak.max(dot(nk, v1).abs());
    }
    let mu5_residual = f.v(5).map_or(0.0, |v5| (dot(&jets.derivative(5), v5) - parts.mu5).abs());
    Ok(DerivativeCrosscheck { derivative_residuals, normal_residuals, tangential_leak, mu5_residual })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_curve;
    use crate::frenet::{analyze_at, unit_speed_jets, DEFAULT_ORDER_TOL};

    fn constant_frenet(kappas: &[f64]) -> FrenetData {
        let d = kappas.len() + 1;
        FrenetData {
            s: 0.0,
            d,
            frame: (0..d).map(|i| (0..d.max(2)).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
            kappas: kappas.to_vec(),
            kappa_derivs: Some(KappaDerivs::default()),
            ambiguous: false,
        }
    }

    #[test]
    fn line_has_no_normal_parts() {
        let f = constant_frenet(&[]);
        assert_eq!(compute_lambdas(&f).unwrap(), (0.0, 0.0, 0.0));
        assert_eq!(compute_mus(&f).unwrap(), (0.0, 0.0, 0.0, 0.0));
        let p = assemble_normals(&f).unwrap();
        assert!(p.n.iter().all(|v| v.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn helix_coefficients() {
        let f = constant_frenet(&[0.5, 0.5]);
        assert_eq!(compute_lambdas(&f).unwrap(), (-0.25, 0.0, 0.0));
        assert_eq!(compute_mus(&f).unwrap(), (0.0, -0.125, 0.0, 0.0));
        let p = assemble_normals(&f).unwrap();
        assert_eq!(p.n(1), &[0.0, 0.5, 0.0]);
        assert_eq!(p.n(2), &[0.0, 0.0, 0.25]);
        assert_eq!(p.n(3), &[0.0, -0.25, 0.0]);
        assert_eq!(p.n(4), &[0.0, 0.0, -0.125]);
    }

    #[test]
    fn circle_coefficients() {
        let c = 0.7;
        let f = constant_frenet(&[c]);
        let (l2, l3, l4) = compute_lambdas(&f).unwrap();
        assert!((l2 + c * c * c).abs() < 1e-15 && l3 == 0.0 && l4 == 0.0);
        let p = assemble_normals(&f).unwrap();
        assert_eq!(p.n(1), &[0.0, c]);
        assert!(p.n(4).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn missing_derivatives_are_a_contract_violation() {
        let mut f = constant_frenet(&[1.0]);
        f.kappa_derivs = None;
        assert!(compute_lambdas(&f).is_err());
        assert!(assemble_normals(&f).is_err());
    }

    fn crosscheck(text: &str, t: f64) -> (DerivativeCrosscheck, FrenetData) {
        let def = parse_curve(text).unwrap();
        let jets = unit_speed_jets(&def, t).unwrap();
        let f = analyze_at(&def, t, DEFAULT_ORDER_TOL).unwrap();
        (derivative_crosscheck(&jets, &f).unwrap(), f)
    }

    #[test]
    fn helix_and_circle_expansions_are_exact() {
        let (c, _) = crosscheck("x1 = cos(t); x2 = sin(t); x3 = t; t in [0, 10]", 0.0);
        assert!(c.max_residual() < 1e-9, "{c:?}");
        let (c, _) = crosscheck("x1 = 3*cos(t); x2 = 3*sin(t); t in [0, 10]", 1.3);
        assert!(c.max_residual() < 1e-9, "{c:?}");
    }

    #[test]
    fn polynomial_curve_in_four_space() {
        let (c, f) = crosscheck(
            "x1 = t + 0.5*t*t - 0.2*t*t*t; x2 = 0.3*t*t + 0.1*t*t*t*t; x3 = 0.2*t*t*t - 0.05*t*t*t*t*t; \
             x4 = 0.4*t - 0.1*t*t*t*t + 0.02*t*t*t*t*t; t in [-1, 1]",
            0.35,
        );
        assert_eq!(f.d, 4);
        assert!(c.max_residual() < 1e-7, "{c:?}");
        assert!(c.tangential_leak < 1e-9);
    }

    #[test]
    fn w_curve_in_five_space_has_mu5() {
        let (c, f) = crosscheck(
            "x1 = cos(t); x2 = sin(t); x3 = 0.5*cos(2*t); x4 = 0.5*sin(2*t); x5 = t; t in [0, 6]",
            0.4,
        );
        assert_eq!(f.d, 5);
        assert!(c.max_residual() < 1e-7, "{c:?}");
        assert!(c.mu5_residual < 1e-7);
        let p = assemble_normals(&f).unwrap();
        let product: f64 = f.kappas.iter().product();
        assert!((p.mu5 - product).abs() < 1e-12);
        assert!(p.mu5 > 0.0);
    }
}
