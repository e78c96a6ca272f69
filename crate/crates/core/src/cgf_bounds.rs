//! Relative entropy bounds driven by the nominal cumulant-generating
//! function of the squared noise drift.
//!
//! Given a CGF `Ψ(θ) = ln E* exp(θ|h|²)` with domain edge `θ*`, this
//! module evaluates the Bregman divergence `ν(θ) = θΨ'(θ) − Ψ(θ)`, solves
//! `(θ − 2K)Ψ'(θ) = Ψ(θ)` for the bound parameter `θ_K ∈ (2K, θ*)`, and
//! reports `ν(θ_K) = 2KΨ'(θ_K)` together with its small-`K` expansion,
//! Pinsker's L¹ bound, the `(K, ε)` small-gain curve and the dual
//! function `Φ(ε) = Ψ'(ν⁻¹(ε))`.
//!
//! At `θ = 0` the dual ratio `(Ψ(θ) + ε)/θ` is taken at its limit by
//! continuity: `Ψ'(0)` when `ε = 0`, `+∞` otherwise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::{find_root_increasing, NumError};

/// Right end of the CGF domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Option<f64>", from = "Option<f64>")]
pub enum DomainEdge {
    Finite(f64),
    Unbounded,
}

impl DomainEdge {
    pub fn contains(&self, theta: f64) -> bool {
        match *self {
            DomainEdge::Finite(t) => theta < t,
            DomainEdge::Unbounded => theta.is_finite(),
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            DomainEdge::Finite(t) => Some(t),
            DomainEdge::Unbounded => None,
        }
    }
}

impl From<DomainEdge> for Option<f64> {
    fn from(e: DomainEdge) -> Self {
        e.finite()
    }
}

impl From<Option<f64>> for DomainEdge {
    fn from(v: Option<f64>) -> Self {
        v.map_or(DomainEdge::Unbounded, DomainEdge::Finite)
    }
}

/// Cumulant-generating function of `|h|²` under the nominal invariant law.
///
/// Implementations must be pure. `psi(0) = 0`, and unless the model is
/// degenerate `psi_prime` and `psi_second` are positive on `[0, θ*)`.
pub trait CgfModel {
    fn psi(&self, theta: f64) -> f64;
    fn psi_prime(&self, theta: f64) -> f64;
    fn psi_second(&self, theta: f64) -> f64;
    fn theta_star(&self) -> DomainEdge;

    /// `ν(θ) = θΨ'(θ) − Ψ(θ)`; override when a cancellation-free form exists.
    fn nu(&self, theta: f64) -> f64 {
        theta * self.psi_prime(theta) - self.psi(theta)
    }

    /// `Ψ ≡ 0`, i.e. `h = 0` almost surely.
    fn is_degenerate(&self) -> bool {
        self.psi_prime(0.0) == 0.0 && self.psi_second(0.0) == 0.0
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BoundError {
    #[error("θ = {theta} lies outside the CGF domain [0, {edge:?})")]
    OutOfDomain { theta: f64, edge: DomainEdge },

    #[error("gain K = {k} must be positive and finite")]
    InvalidGain { k: f64 },

    #[error("gain K = {k} violates K < θ*/2 = {half_edge}; the bound is unavailable")]
    KTooLarge { k: f64, half_edge: f64 },

    #[error("noise drift is degenerate (Ψ ≡ 0)")]
    Degenerate,

    #[error("ε = {eps} is not below sup ν = {sup}")]
    EpsBeyondRange { eps: f64, sup: f64 },

    #[error("negative relative entropy {0}")]
    NegativeInput(f64),

    #[error(transparent)]
    Numeric(#[from] NumError),
}

pub type Result<T> = std::result::Result<T, BoundError>;

const ROOT_TOL: f64 = 1e-14;
const MAX_GROWTH_STEPS: usize = 200;
/// Absolute tolerance on ν-values when inverting ν.
pub const NU_INVERSE_TOL: f64 = 1e-12;

fn check_domain(model: &impl CgfModel, theta: f64) -> Result<()> {
    let edge = model.theta_star();
    if !(theta >= 0.0) || !edge.contains(theta) {
        return Err(BoundError::OutOfDomain { theta, edge });
    }
    Ok(())
}

pub fn nu(model: &impl CgfModel, theta: f64) -> Result<f64> {
    check_domain(model, theta)?;
    Ok(model.nu(theta))
}

/// `ν_K(θ) = (θ − 2K)Ψ'(θ) − Ψ(θ)`.
pub fn nu_k(model: &impl CgfModel, k: f64, theta: f64) -> Result<f64> {
    check_domain(model, theta)?;
    if !(k > 0.0 && k.is_finite()) {
        return Err(BoundError::InvalidGain { k });
    }
    Ok(model.nu(theta) - 2.0 * k * model.psi_prime(theta))
}

/// Finds an upper end `hi > lo` with `g(hi) > 0` for a function that
/// grows toward the domain edge.
fn upper_bracket(
    model: &impl CgfModel,
    lo: f64,
    g: impl Fn(f64) -> f64,
) -> std::result::Result<f64, f64> {
    match model.theta_star() {
        DomainEdge::Finite(edge) => {
            let mut gap = edge * 1e-9;
            let mut last = f64::NAN;
            for _ in 0..20 {
                let hi = edge - gap;
                if hi <= lo {
                    break;
                }
                let v = g(hi);
                if v > 0.0 {
                    return Ok(hi);
                }
                last = v;
                gap *= 1e-3;
                if gap < edge * f64::EPSILON {
                    break;
                }
            }
            Err(last)
        }
        DomainEdge::Unbounded => {
            let mut hi = (2.0 * lo).max(1e-6);
            let mut last = f64::NAN;
            for _ in 0..MAX_GROWTH_STEPS {
                let v = g(hi);
                if v > 0.0 {
                    return Ok(hi);
                }
                if !v.is_finite() {
                    break;
                }
                last = v;
                hi *= 2.0;
            }
            Err(last)
        }
    }
}

/// Unique root `θ_K ∈ (2K, θ*)` of `ν_K`.
pub fn solve_theta_k(model: &impl CgfModel, k: f64) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(BoundError::InvalidGain { k });
    }
    if model.is_degenerate() {
        return Err(BoundError::Degenerate);
    }
    if let DomainEdge::Finite(edge) = model.theta_star() {
        if 2.0 * k >= edge {
            return Err(BoundError::KTooLarge {
                k,
                half_edge: 0.5 * edge,
            });
        }
    }
    let f = |t: f64| model.nu(t) - 2.0 * k * model.psi_prime(t);
    let lo = 2.0 * k * (1.0 + 1e-12);
    let hi = upper_bracket(model, lo, f).map_err(|_| BoundError::KTooLarge {
        k,
        half_edge: model.theta_star().finite().map_or(f64::INFINITY, |e| 0.5 * e),
    })?;
    Ok(find_root_increasing(f, lo, hi, ROOT_TOL)?)
}

/// `4√(Ψ'(0)Ψ''(0))`: the `K^{3/2}` coefficient of the small-gain expansion.
pub fn asymptotic_coefficient(model: &impl CgfModel) -> f64 {
    4.0 * (model.psi_prime(0.0) * model.psi_second(0.0)).sqrt()
}

/// Two-term expansion `2Ψ'(0)K + 4√(Ψ'(0)Ψ''(0)) K^{3/2}` of `ν(θ_K)`.
pub fn asymptotic_bound(model: &impl CgfModel, k: f64) -> Result<f64> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(BoundError::InvalidGain { k });
    }
    if model.is_degenerate() {
        return Err(BoundError::Degenerate);
    }
    Ok(2.0 * model.psi_prime(0.0) * k + asymptotic_coefficient(model) * k.powf(1.5))
}

/// `D(p‖p*) ≤ 4Kγ` for a γ-stealthy drift.
pub fn stealthy_bound(k: f64, gamma: f64) -> f64 {
    4.0 * k * gamma
}

/// Pinsker's `‖p − p*‖₁ ≤ √(2 D)`; `trivial` marks values above 2, where
/// the bound says nothing beyond `‖·‖₁ ≤ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Bound {
    pub value: f64,
    pub trivial: bool,
}

pub fn pinsker_l1(kl: f64) -> Result<L1Bound> {
    if !(kl >= 0.0) {
        return Err(BoundError::NegativeInput(kl));
    }
    let value = (2.0 * kl).sqrt();
    Ok(L1Bound {
        value,
        trivial: value > 2.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub k: f64,
    pub theta_k: Option<f64>,
    pub kl_bound: f64,
    pub kl_bound_asymptotic: f64,
    /// `|ν(θ_K) − 2KΨ'(θ_K)|`.
    pub consistency_gap: f64,
    pub l1_bound: L1Bound,
    pub gamma: Option<f64>,
    pub stealthy_bound: Option<f64>,
    pub degenerate: bool,
}

impl BoundReport {
    /// Adds the γ-stealthy bound `4Kγ`.
    pub fn with_stealth(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self.stealthy_bound = Some(stealthy_bound(self.k, gamma));
        self
    }
}

/// `D(p‖p*) ≤ ν(θ_K)`.
///
/// A degenerate model short-circuits to a zero bound without touching the
/// root solver.
pub fn kl_upper_bound(model: &impl CgfModel, k: f64) -> Result<BoundReport> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(BoundError::InvalidGain { k });
    }
    if model.is_degenerate() {
        return Ok(BoundReport {
            k,
            theta_k: None,
            kl_bound: 0.0,
            kl_bound_asymptotic: 0.0,
            consistency_gap: 0.0,
            l1_bound: pinsker_l1(0.0)?,
            gamma: None,
            stealthy_bound: None,
            degenerate: true,
        });
    }
    let theta_k = solve_theta_k(model, k)?;
    let kl_bound = model.nu(theta_k);
    let alt = 2.0 * k * model.psi_prime(theta_k);
    Ok(BoundReport {
        k,
        theta_k: Some(theta_k),
        kl_bound,
        kl_bound_asymptotic: asymptotic_bound(model, k)?,
        consistency_gap: (kl_bound - alt).abs(),
        l1_bound: pinsker_l1(kl_bound)?,
        gamma: None,
        stealthy_bound: None,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub theta: f64,
    /// `ν(θ) / (2Ψ'(θ))`
    pub k_coord: f64,
    /// `ν(θ)`
    pub eps_coord: f64,
}

/// `θ ↦ (ν(θ)/(2Ψ'(θ)), ν(θ))` over the grid.
pub fn small_gain_curve(model: &impl CgfModel, thetas: &[f64]) -> Result<Vec<CurvePoint>> {
    thetas
        .iter()
        .map(|&theta| {
            check_domain(model, theta)?;
            let eps = model.nu(theta);
            let dpsi = model.psi_prime(theta);
            let k_coord = if dpsi > 0.0 { eps / (2.0 * dpsi) } else { 0.0 };
            Ok(CurvePoint {
                theta,
                k_coord,
                eps_coord: eps,
            })
        })
        .collect()
}

pub const DEFAULT_CURVE_POINTS: usize = 256;

/// `points` values in `[0, θ*)`, cosine-spaced (`θ*·sin` of a uniform
/// angle) so they crowd toward `θ*` where `ν` steepens. For an unbounded
/// domain the grid spans `[0, 20 / Ψ'(0)]` uniformly.
pub fn default_theta_grid(model: &impl CgfModel, points: usize) -> Vec<f64> {
    let points = points.max(2);
    match model.theta_star() {
        DomainEdge::Finite(edge) => (0..points)
            .map(|i| edge * (std::f64::consts::FRAC_PI_2 * i as f64 / points as f64).sin())
            .collect(),
        DomainEdge::Unbounded => {
            let top = 20.0 / model.psi_prime(0.0).max(1e-12);
            (0..points)
                .map(|i| top * i as f64 / (points - 1) as f64)
                .collect()
        }
    }
}

/// `ν⁻¹(ε)` on `[0, θ*)`.
pub fn nu_inverse(model: &impl CgfModel, eps: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(BoundError::NegativeInput(eps));
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    if model.is_degenerate() {
        return Err(BoundError::EpsBeyondRange { eps, sup: 0.0 });
    }
    let g = |t: f64| model.nu(t) - eps;
    let hi = upper_bracket(model, 0.0, g).map_err(|last| BoundError::EpsBeyondRange {
        eps,
        sup: if last.is_finite() { last + eps } else { f64::INFINITY },
    })?;
    Ok(find_root_increasing(g, 0.0, hi, NU_INVERSE_TOL)?)
}

/// `Φ(ε) = Ψ'(ν⁻¹(ε))`, the largest `E|h|²` over laws within relative
/// entropy `ε` of the nominal one.
pub fn phi_of_eps(model: &impl CgfModel, eps: f64) -> Result<f64> {
    let theta = nu_inverse(model, eps)?;
    Ok(model.psi_prime(theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar Gaussian CGF `−½ ln(1 − 2θs)`.
    struct OneMode(f64);

    impl CgfModel for OneMode {
        fn psi(&self, t: f64) -> f64 {
            -0.5 * (-2.0 * t * self.0).ln_1p()
        }
        fn psi_prime(&self, t: f64) -> f64 {
            self.0 / (1.0 - 2.0 * t * self.0)
        }
        fn psi_second(&self, t: f64) -> f64 {
            2.0 * self.0 * self.0 / (1.0 - 2.0 * t * self.0).powi(2)
        }
        fn theta_star(&self) -> DomainEdge {
            if self.0 > 0.0 {
                DomainEdge::Finite(0.5 / self.0)
            } else {
                DomainEdge::Unbounded
            }
        }
    }

    /// Two-point law for `|h|²` on {0, 1}: bounded drift, unbounded domain.
    struct Coin;

    impl CgfModel for Coin {
        fn psi(&self, t: f64) -> f64 {
            (0.5 * (1.0 + t.exp())).ln()
        }
        fn psi_prime(&self, t: f64) -> f64 {
            1.0 / (1.0 + (-t).exp())
        }
        fn psi_second(&self, t: f64) -> f64 {
            let p = self.psi_prime(t);
            p * (1.0 - p)
        }
        fn theta_star(&self) -> DomainEdge {
            DomainEdge::Unbounded
        }
    }

    #[test]
    fn nu_hand_values() {
        let m = OneMode(0.5);
        assert_eq!(nu(&m, 0.0).unwrap(), 0.0);
        // 0.5·1 − (−½ ln 0.5)
        let expect = 0.5 - 0.5 * 2f64.ln();
        assert!((nu(&m, 0.5).unwrap() - expect).abs() < 1e-15);
        assert!(matches!(nu(&m, 1.0), Err(BoundError::OutOfDomain { .. })));
        assert!(matches!(nu(&m, -0.1), Err(BoundError::OutOfDomain { .. })));
    }

    #[test]
    fn nu_k_hand_values() {
        let m = OneMode(0.5);
        let v = nu_k(&m, 0.1, 0.5).unwrap();
        assert!((v - (0.3 - 0.5 * 2f64.ln())).abs() < 1e-15);
        assert!((nu_k(&m, 0.1, 0.2).unwrap() + m.psi(0.2)).abs() < 1e-15);
        assert!((nu_k(&m, 0.1, 0.0).unwrap() + 0.2 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn theta_k_brackets_zero() {
        let m = OneMode(0.5);
        let t = solve_theta_k(&m, 0.1).unwrap();
        assert!(t > 0.2 && t < 1.0);
        assert!(nu_k(&m, 0.1, t - 1e-6).unwrap() < 0.0);
        assert!(nu_k(&m, 0.1, t + 1e-6).unwrap() > 0.0);
        assert!(solve_theta_k(&m, 1e-6).unwrap() < 1e-2);
    }

    #[test]
    fn k_too_large_and_degenerate() {
        let m = OneMode(0.5);
        assert!(matches!(solve_theta_k(&m, 0.5), Err(BoundError::KTooLarge { .. })));
        assert!(matches!(solve_theta_k(&OneMode(0.0), 0.1), Err(BoundError::Degenerate)));
        let r = kl_upper_bound(&OneMode(0.0), 0.3).unwrap();
        assert!(r.degenerate && r.kl_bound == 0.0 && r.theta_k.is_none());
    }

    #[test]
    fn unbounded_domain_grows_bracket() {
        // ν → ln 2 as θ → ∞, so roots exist only for 2K < ln 2
        let k = 0.1;
        let t = solve_theta_k(&Coin, k).unwrap();
        assert!(t > 2.0 * k);
        let r = kl_upper_bound(&Coin, k).unwrap();
        assert!(r.consistency_gap <= 1e-8 * (1.0 + r.kl_bound));
        assert!(matches!(solve_theta_k(&Coin, 0.4), Err(BoundError::KTooLarge { .. })));
        assert!(matches!(
            phi_of_eps(&Coin, 0.8),
            Err(BoundError::EpsBeyondRange { .. })
        ));
    }

    #[test]
    fn scalar_asymptote_coefficients() {
        // Ψ'(0) = s, Ψ''(0) = 2s²  → for s = 0.5: K + 2K^{3/2}
        let m = OneMode(0.5);
        for k in [0.0, 1e-3, 0.01] {
            let v = asymptotic_bound(&m, k).unwrap();
            assert!((v - (k + 2.0 * k.powf(1.5))).abs() < 1e-15);
        }
    }

    #[test]
    fn pinsker_cases() {
        assert_eq!(pinsker_l1(0.0).unwrap().value, 0.0);
        let b = pinsker_l1(0.4544).unwrap();
        assert!((b.value - 0.9088f64.sqrt()).abs() < 1e-15 && !b.trivial);
        let b = pinsker_l1(2.4894).unwrap();
        assert!((b.value - 4.9788f64.sqrt()).abs() < 1e-15 && b.trivial);
        assert!(matches!(pinsker_l1(-1.0), Err(BoundError::NegativeInput(_))));
    }

    #[test]
    fn stealthy_arithmetic() {
        assert_eq!(stealthy_bound(2.0, 0.0), 0.0);
        assert_eq!(stealthy_bound(1.0, 0.25), 1.0);
    }

    #[test]
    fn phi_round_trip() {
        let m = OneMode(0.5);
        assert_eq!(phi_of_eps(&m, 0.0).unwrap(), 0.5);
        let eps = m.nu(0.5);
        assert!((phi_of_eps(&m, eps).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn curve_starts_at_origin() {
        let m = OneMode(0.5);
        let c = small_gain_curve(&m, &[0.0, 0.3]).unwrap();
        assert_eq!((c[0].k_coord, c[0].eps_coord), (0.0, 0.0));
        assert!(small_gain_curve(&m, &[1.0]).is_err());
    }
}
