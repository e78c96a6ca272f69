//! Linear stochastic systems `dX = (A + BN)X dt + B dV` with a linear noise
//! drift `h = NX`.
//!
//! Both invariant laws are zero-mean Gaussians, so every quantity of the
//! entropy chain has a matrix form: the covariances `P*` and `P` solve
//! Lyapunov equations, the log-ratio gradient is carried by the precision
//! gap `Π = P*⁻¹ − P⁻¹`, and the nominal CGF of `|h|²` is a finite sum over
//! the spectrum of `N P* Nᵀ`.

use serde::Serialize;
use thiserror::Error;

use crate::cgf_bounds::{CgfModel, DomainEdge};
use crate::numkit::{
    complex_embedding, hinf_norm, integrate_adaptive, is_controllable, logdet_spd,
    solve_lyapunov, spectral_abscissa, sqrt_psd, sym_eig, transfer_at, Lu, Matrix, NumError,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinGaussError {
    #[error("nominal drift A is not Hurwitz (spectral abscissa {0:e})")]
    NotHurwitzNominal(f64),

    #[error("perturbed drift A + BN is not Hurwitz (spectral abscissa {0:e})")]
    NotHurwitzPerturbed(f64),

    #[error("(A, B) is not controllable")]
    NotControllable,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("diffusion matrix is not uniformly elliptic (λ_min(D) = {0:e})")]
    NotElliptic(f64),

    #[error("nominal system is not reversible (‖H‖_F = {0:e})")]
    NotReversible(f64),

    #[error("dispersion matrix B must be square and invertible")]
    NotInvertibleB,

    #[error("‖NF‖∞ = {0} is not below 1")]
    NotContractive(f64),

    #[error(transparent)]
    Numeric(#[from] NumError),
}

pub type Result<T> = std::result::Result<T, LinGaussError>;

/// Relative size of `‖H‖_F` below which the nominal system counts as reversible.
pub const REVERSIBILITY_TOL: f64 = 1e-8;

/// Validated `(A, B, N)` with `D = BBᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearGaussianSystem {
    a: Matrix,
    b: Matrix,
    n: Matrix,
    d: Matrix,
}

impl LinearGaussianSystem {
    /// Checks shapes, stability of `A` and `A + BN`, and controllability.
    pub fn new(a: Matrix, b: Matrix, n: Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(LinGaussError::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let order = a.rows();
        let m = b.cols();
        if b.rows() != order || n.shape() != (m, order) {
            return Err(LinGaussError::DimensionMismatch(format!(
                "A is {order}x{order}, B is {}x{}, N is {}x{} (expected {m}x{order})",
                b.rows(),
                b.cols(),
                n.rows(),
                n.cols()
            )));
        }
        let nominal = spectral_abscissa(&a)?;
        if nominal >= 0.0 {
            return Err(LinGaussError::NotHurwitzNominal(nominal));
        }
        let closed = a.add(&(&b * &n))?;
        let perturbed = spectral_abscissa(&closed)?;
        if perturbed >= 0.0 {
            return Err(LinGaussError::NotHurwitzPerturbed(perturbed));
        }
        if !is_controllable(&a, &b)? {
            return Err(LinGaussError::NotControllable);
        }
        let d = (&b * &b.transpose()).symmetrize();
        Ok(Self { a, b, n, d })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn n(&self) -> &Matrix {
        &self.n
    }

    pub fn d(&self) -> &Matrix {
        &self.d
    }

    pub fn order(&self) -> usize {
        self.a.rows()
    }

    pub fn inputs(&self) -> usize {
        self.b.cols()
    }

    /// `A + BN`.
    pub fn closed_loop(&self) -> Matrix {
        self.a.add(&(&self.b * &self.n)).expect("shapes validated")
    }

    /// The same plant with a different noise-drift gain.
    pub fn with_drift(&self, n: Matrix) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), n)
    }

    /// `P*` solving `AP* + P*Aᵀ + D = 0`.
    pub fn nominal_covariance(&self) -> Result<Matrix> {
        Ok(solve_lyapunov(&self.a, &self.d)?)
    }

    /// `P` solving `(A+BN)P + P(A+BN)ᵀ + D = 0`.
    pub fn perturbed_covariance(&self) -> Result<Matrix> {
        Ok(solve_lyapunov(&self.closed_loop(), &self.d)?)
    }
}

fn spd_inverse(m: &Matrix) -> Result<Matrix> {
    m.cholesky()?;
    Ok(m.inverse()?.symmetrize())
}

/// `Π = P*⁻¹ − P⁻¹`.
pub fn precision_gap(p_star: &Matrix, p: &Matrix) -> Result<Matrix> {
    Ok(spd_inverse(p_star)?.sub(&spd_inverse(p)?)?.symmetrize())
}

/// `D(N(0,P) ‖ N(0,P*)) = ½(Tr χ − ln det χ − n)` with `χ = P*⁻¹P`, in nats.
pub fn exact_kl(p_star: &Matrix, p: &Matrix) -> Result<f64> {
    let n = p_star.rows() as f64;
    let chi_trace = p_star.solve(p)?.trace();
    let logdet = logdet_spd(p)? - logdet_spd(p_star)?;
    Ok((0.5 * (chi_trace - logdet - n)).max(0.0))
}

/// `E = P − P*` from its own Lyapunov equation
/// `(A+BN)E + E(A+BN)ᵀ + BNP* + P*NᵀBᵀ = 0`, which avoids subtracting two
/// nearly equal covariances.
pub fn covariance_shift(sys: &LinearGaussianSystem, p_star: &Matrix) -> Result<Matrix> {
    let bn_p = &(&sys.b * &sys.n) * p_star;
    let q = bn_p.add(&bn_p.transpose())?;
    Ok(solve_lyapunov(&sys.closed_loop(), &q)?.symmetrize())
}

/// `BᵀΠ`, the gain of `ψ(x) = BᵀΠx`, as `BᵀP*⁻¹EP⁻¹`. Forming `Π` by
/// subtracting inverses loses all accuracy when `P*` is ill-conditioned in
/// directions `B` barely excites; this route only solves with `P*` and `P`.
pub fn psi_gain(sys: &LinearGaussianSystem, p_star: &Matrix, p: &Matrix) -> Result<Matrix> {
    let y = p_star.solve(&covariance_shift(sys, p_star)?)?;
    let gp = &sys.b.transpose() * &y;
    Ok(p.solve(&gp.transpose())?.transpose())
}

/// `⟨BN − ½DΠ, ΠP⟩_F`, the matrix form of `E(hᵀψ − ½|ψ|²)` under `p`,
/// evaluated as `⟨N, GP⟩ − ½⟨G, GP⟩` with `G = BᵀΠ`.
pub fn dirichlet_identity_residual(sys: &LinearGaussianSystem, p_star: &Matrix, p: &Matrix) -> Result<f64> {
    let g = psi_gain(sys, p_star, p)?;
    let gp = &g * p;
    Ok(sys.n.frobenius_inner(&gp)? - 0.5 * g.frobenius_inner(&gp)?)
}

/// `(‖√D Π √P‖_F, 2‖N√P‖_F)`: the root-mean-square of `ψ` and twice that of
/// `h`. The left side equals `‖BᵀΠ√P‖_F` because `D = BBᵀ`.
pub fn dirichlet_bound_sides(sys: &LinearGaussianSystem, p_star: &Matrix, p: &Matrix) -> Result<(f64, f64)> {
    let sqrt_p = sqrt_psd(p)?;
    let lhs = (&psi_gain(sys, p_star, p)? * &sqrt_p).frobenius_norm();
    let rhs = 2.0 * (&sys.n * &sqrt_p).frobenius_norm();
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ellipticity {
    /// `λ_min(D)`
    pub lambda: f64,
    /// `1/λ_max(P*)`
    pub mu: f64,
    /// `1/(λμ)`
    pub k: f64,
}

/// `λ`, `μ` and the gain `K`; fails unless `D` is positive definite.
pub fn ellipticity_constants(d: &Matrix, p_star: &Matrix) -> Result<Ellipticity> {
    let de = sym_eig(d)?;
    let lambda = de.min();
    if !(lambda > 1e-12 * de.max().max(1.0)) {
        return Err(LinGaussError::NotElliptic(lambda));
    }
    let mu = 1.0 / sym_eig(p_star)?.max();
    Ok(Ellipticity {
        lambda,
        mu,
        k: 1.0 / (lambda * mu),
    })
}

/// `−n / (2 Tr A)`, a lower bound on `K` for Hurwitz `A`.
pub fn k_lower_bound(a: &Matrix) -> f64 {
    -(a.rows() as f64) / (2.0 * a.trace())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flux {
    /// `A + ½DP*⁻¹`
    pub h: Matrix,
    /// `AP* + ½D`, antisymmetric
    pub mho: Matrix,
    /// `‖mho + mhoᵀ‖_F`
    pub mho_asymmetry: f64,
    /// `‖HP + PHᵀ‖_F`; zero iff the flux preserves the perturbed law
    pub flux_residual: f64,
}

pub fn hamiltonian_flux(a: &Matrix, d: &Matrix, p_star: &Matrix, p: &Matrix) -> Result<Flux> {
    let h = a.add(&(d * &spd_inverse(p_star)?).scale(0.5))?;
    let mho = (a * p_star).add(&d.scale(0.5))?;
    let mho_asymmetry = mho.add(&mho.transpose())?.frobenius_norm();
    let hp = &h * p;
    let flux_residual = hp.add(&hp.transpose())?.frobenius_norm();
    Ok(Flux {
        h,
        mho,
        mho_asymmetry,
        flux_residual,
    })
}

/// `N = ½Bᵀ(P*⁻¹ − T⁻¹)`, the linear drift whose perturbed covariance is the
/// target `T`; requires `H = 0` and square invertible `B`.
pub fn saturating_drift(a: &Matrix, b: &Matrix, target_p: &Matrix) -> Result<Matrix> {
    if !b.is_square() || b.rows() != a.rows() {
        return Err(LinGaussError::NotInvertibleB);
    }
    if target_p.shape() != a.shape() {
        return Err(LinGaussError::DimensionMismatch(format!(
            "target covariance is {}x{}, A is {}x{}",
            target_p.rows(),
            target_p.cols(),
            a.rows(),
            a.cols()
        )));
    }
    if Lu::factor(b).is_err() {
        return Err(LinGaussError::NotInvertibleB);
    }
    let d = (b * &b.transpose()).symmetrize();
    let p_star = solve_lyapunov(a, &d).map_err(|e| match e {
        NumError::NotHurwitz(s) => LinGaussError::NotHurwitzNominal(s),
        other => other.into(),
    })?;
    let h = a.add(&(&d * &spd_inverse(&p_star)?).scale(0.5))?;
    let h_norm = h.frobenius_norm();
    if h_norm > REVERSIBILITY_TOL * (1.0 + a.frobenius_norm()) {
        return Err(LinGaussError::NotReversible(h_norm));
    }
    let pi = precision_gap(&p_star, target_p)?;
    Ok((&b.transpose() * &pi).scale(0.5))
}

/// Nominal CGF `Ψ(θ) = −½ Σ ln(1 − 2θsᵢ)` of `|NX|²`, `X ~ N(0, P*)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianCgf {
    /// Eigenvalues of `N P* Nᵀ`, nonincreasing and clipped at 0.
    pub s: Vec<f64>,
    pub theta_star: DomainEdge,
}

impl GaussianCgf {
    pub fn new(n: &Matrix, p_star: &Matrix) -> Result<Self> {
        let m = (&(n * p_star) * &n.transpose()).symmetrize();
        let mut s: Vec<f64> = sym_eig(&m)?.values.into_iter().map(|v| v.max(0.0)).collect();
        s.reverse();
        let theta_star = match s.first() {
            Some(&top) if top > 0.0 => DomainEdge::Finite(0.5 / top),
            _ => DomainEdge::Unbounded,
        };
        Ok(Self { s, theta_star })
    }

    pub fn from_system(sys: &LinearGaussianSystem) -> Result<Self> {
        Self::new(&sys.n, &sys.nominal_covariance()?)
    }

    /// `Ψ'(0) = ‖N√P*‖_F² = E*|h|²`.
    pub fn mean(&self) -> f64 {
        self.s.iter().sum()
    }

    /// `Ψ''(0) = 2‖N√P*‖₄⁴ = var*|h|²`.
    pub fn variance(&self) -> f64 {
        self.s.iter().map(|v| 2.0 * v * v).sum()
    }
}

impl CgfModel for GaussianCgf {
    fn psi(&self, theta: f64) -> f64 {
        self.s.iter().map(|&v| -0.5 * (-2.0 * theta * v).ln_1p()).sum()
    }

    fn psi_prime(&self, theta: f64) -> f64 {
        self.s.iter().map(|&v| v / (1.0 - 2.0 * theta * v)).sum()
    }

    fn psi_second(&self, theta: f64) -> f64 {
        self.s
            .iter()
            .map(|&v| 2.0 * v * v / (1.0 - 2.0 * theta * v).powi(2))
            .sum()
    }

    fn theta_star(&self) -> DomainEdge {
        self.theta_star
    }

    fn nu(&self, theta: f64) -> f64 {
        // ½[u/(1−u) + ln(1−u)] per mode, u = 2θs
        self.s
            .iter()
            .map(|&v| {
                let u = 2.0 * theta * v;
                0.5 * (u / (1.0 - u) + (-u).ln_1p())
            })
            .sum()
    }

    fn is_degenerate(&self) -> bool {
        self.s.iter().all(|&v| v == 0.0)
    }
}

/// `‖NF‖∞` with `F(s) = (sI − A)⁻¹B`.
pub fn nf_hinf(sys: &LinearGaussianSystem) -> Result<f64> {
    Ok(hinf_norm(&sys.a, &sys.b, &sys.n)?)
}

pub const QEF_TOL: f64 = 1e-6;

/// `−(1/4π) ∫ ln det(I − N Σ(ω) Nᵀ) dω` with `Σ = F F*`.
///
/// `hinf` is `‖NF‖∞`; it must be below 1 for the integrand to stay finite.
pub fn qef_rate(sys: &LinearGaussianSystem, hinf: f64) -> Result<f64> {
    if hinf >= 1.0 {
        return Err(LinGaussError::NotContractive(hinf));
    }
    if sys.n.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let m = sys.inputs();
    let eye = Matrix::identity(2 * m);
    let log_det = |omega: f64| -> f64 {
        let eval = || -> Result<f64> {
            let (gr, gi) = transfer_at(&sys.a, &sys.b, &sys.n, omega)?;
            let g = complex_embedding(&gr, &gi);
            let gram = (&g * &g.transpose()).symmetrize();
            // the real embedding doubles every eigenvalue's multiplicity
            Ok(0.5 * logdet_spd(&eye.sub(&gram)?)?)
        };
        eval().unwrap_or(f64::NAN)
    };
    // even integrand: fold onto [0, ∞)
    let integral = integrate_adaptive(log_det, 0.0, f64::INFINITY, QEF_TOL * std::f64::consts::PI)?;
    Ok(-integral / (2.0 * std::f64::consts::PI))
}

/// Every exact quantity for one linear system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianAnalysis {
    pub n: usize,
    pub m: usize,
    pub p_star: Matrix,
    pub p: Matrix,
    pub pi: Matrix,
    /// Absent when `D` is singular.
    pub ellipticity: Option<Ellipticity>,
    pub k_lower: f64,
    pub kl_exact: f64,
    pub identity_residual: f64,
    /// `1 + ‖N‖_F‖P‖_F`, the scale the residual is judged against.
    pub identity_scale: f64,
    pub bound_lhs: f64,
    pub bound_rhs: f64,
    pub flux: Flux,
    pub nf_hinf: f64,
    pub qef_rate: Option<f64>,
    pub cgf: GaussianCgf,
    /// `E|h|² = ⟨NᵀN, P⟩_F` under the perturbed law.
    pub e_h2: f64,
    /// `E|ψ|² = bound_lhs²`.
    pub e_psi2: f64,
}

impl GaussianAnalysis {
    pub fn compute(sys: &LinearGaussianSystem) -> Result<Self> {
        let p_star = sys.nominal_covariance()?;
        let p = sys.perturbed_covariance()?;
        let pi = precision_gap(&p_star, &p)?;
        let ellipticity = match ellipticity_constants(&sys.d, &p_star) {
            Ok(e) => Some(e),
            Err(LinGaussError::NotElliptic(_)) => None,
            Err(e) => return Err(e),
        };
        let (bound_lhs, bound_rhs) = dirichlet_bound_sides(sys, &p_star, &p)?;
        let nf = nf_hinf(sys)?;
        let qef = if nf < 1.0 { Some(qef_rate(sys, nf)?) } else { None };
        let e_h2 = (&sys.n.transpose() * &sys.n).frobenius_inner(&p)?;
        Ok(Self {
            n: sys.order(),
            m: sys.inputs(),
            kl_exact: exact_kl(&p_star, &p)?,
            identity_residual: dirichlet_identity_residual(sys, &p_star, &p)?,
            identity_scale: 1.0 + sys.n.frobenius_norm() * p.frobenius_norm(),
            bound_lhs,
            bound_rhs,
            flux: hamiltonian_flux(&sys.a, &sys.d, &p_star, &p)?,
            nf_hinf: nf,
            qef_rate: qef,
            cgf: GaussianCgf::new(&sys.n, &p_star)?,
            k_lower: k_lower_bound(&sys.a),
            ellipticity,
            e_h2,
            e_psi2: bound_lhs * bound_lhs,
            p_star,
            p,
            pi,
        })
    }
}
