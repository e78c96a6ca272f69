//! One-dimensional stationary Fokker–Planck densities and the entropy chain
//! they support.
//!
//! With zero stationary flux in 1-D, the invariant density of
//! `dX = f_h dt + g dW` is `p ∝ D⁻¹ exp ∫ 2f_h/D` with `D = g²`. Densities
//! are tabulated in the log domain on a uniform grid, the antiderivative is
//! accumulated with a fourth-order rule, and ratios `r = p/p*` are formed
//! from log differences so tails never underflow.
//!
//! Note that in one dimension the log-ratio gradient is forced:
//! `ln r = ∫ 2h/g`, hence `ψ = g (ln r)' = 2h` pointwise and the Dirichlet
//! bound `E|ψ|² ≤ 4E|h|²` always holds with equality.
//!
//! The decay conditions that justify the integrations by parts behind these
//! identities are assumed, not checked; they hold analytically for the
//! polynomial models accepted here.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FpkError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("drift is not confining: {0}")]
    NotConfining(String),

    #[error("dispersion vanishes or is too small on the grid (min D = {0:e})")]
    NotElliptic(f64),

    #[error("density is not normalizable: {0}")]
    NotNormalizable(String),

    #[error("tables live on different grids")]
    GridMismatch,

    #[error("density is not positive at node {0}")]
    NonPositiveDensity(usize),

    #[error("target ratio is not positive at node {0}")]
    NonPositiveRatio(usize),
}

pub type Result<T> = std::result::Result<T, FpkError>;

/// Real polynomial, coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Polynomial {
    type Error = String;

    fn try_from(coeffs: Vec<f64>) -> std::result::Result<Self, String> {
        match coeffs.iter().position(|c| !c.is_finite()) {
            Some(i) => Err(format!("coefficient {i} is not finite")),
            None => Ok(Self::new(coeffs)),
        }
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    /// Trailing zero coefficients are dropped.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        Self::new((0..len).map(|i| at(&self.coeffs, i) + at(&rhs.coeffs, i)).collect())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Odd degree with negative leading coefficient.
    pub fn is_confining(&self) -> bool {
        matches!(self.degree(), Some(d) if d % 2 == 1) && self.leading() < 0.0
    }
}

/// Initial extent and resolution; the extent is refitted to the densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: -8.0,
            hi: 8.0,
            points: 4096,
        }
    }
}

impl GridSpec {
    pub const MIN_POINTS: usize = 64;

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(FpkError::InvalidGrid(format!("need lo < hi, got [{}, {}]", self.lo, self.hi)));
        }
        if self.points < Self::MIN_POINTS {
            return Err(FpkError::InvalidGrid(format!(
                "need at least {} points, got {}",
                Self::MIN_POINTS,
                self.points
            )));
        }
        Ok(())
    }

    pub fn nodes(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.lo + step * i as f64).collect()
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }
}

/// Relative boundary density the fitted grid must reach.
pub const BOUNDARY_REL: f64 = 1e-12;
/// Lower floor on `D` relative to its peak on the grid.
pub const ELLIPTIC_FLOOR: f64 = 1e-10;

/// Normalized density on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityTable {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    /// `ln p`, finite everywhere even where `values` underflow.
    pub log_values: Vec<f64>,
    /// `ln Z` of the unnormalized form `D⁻¹ exp ∫ 2f_h/D` with the
    /// antiderivative anchored at the left node.
    pub log_norm: f64,
}

impl DensityTable {
    pub fn step(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    /// Trapezoid `∫ p·φ`.
    pub fn expect(&self, phi: &[f64]) -> f64 {
        trapezoid_weighted(self.step(), &self.values, phi)
    }

    /// `max(p(lo), p(hi)) / max p`.
    pub fn boundary_ratio(&self) -> f64 {
        let peak = self.values.iter().cloned().fold(0.0, f64::max);
        self.values[0].max(*self.values.last().unwrap()) / peak
    }
}

fn trapezoid_weighted(step: f64, p: &[f64], phi: &[f64]) -> f64 {
    let n = p.len();
    let inner: f64 = (1..n - 1).map(|i| p[i] * phi[i]).sum();
    step * (inner + 0.5 * (p[0] * phi[0] + p[n - 1] * phi[n - 1]))
}

/// Cumulative `∫_{x₀}^{xᵢ} q` on a uniform grid, exact for cubics.
pub fn cumulative_integral(step: f64, q: &[f64]) -> Vec<f64> {
    let n = q.len();
    assert!(n >= 4, "cumulative rule needs four nodes");
    let mut out = vec![0.0; n];
    let c = step / 24.0;
    for i in 0..n - 1 {
        let piece = if i == 0 {
            c * (9.0 * q[0] + 19.0 * q[1] - 5.0 * q[2] + q[3])
        } else if i == n - 2 {
            c * (q[n - 4] - 5.0 * q[n - 3] + 19.0 * q[n - 2] + 9.0 * q[n - 1])
        } else {
            c * (-q[i - 1] + 13.0 * q[i] + 13.0 * q[i + 1] - q[i + 2])
        };
        out[i + 1] = out[i] + piece;
    }
    out
}

/// First derivative: fourth-order central differences inside, second-order
/// one-sided at the two outermost nodes on each end.
pub fn derivative(step: f64, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    assert!(n >= 5, "derivative stencil needs five nodes");
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (-y[i + 2] + 8.0 * y[i + 1] - 8.0 * y[i - 1] + y[i - 2]) / (12.0 * step);
    }
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * step);
    d[1] = (y[2] - y[0]) / (2.0 * step);
    d[n - 2] = (y[n - 1] - y[n - 3]) / (2.0 * step);
    d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * step);
    d
}

/// `p ∝ D⁻¹ exp ∫ 2·drift/D` from node values on a uniform grid.
pub fn stationary_density(x: &[f64], drift: &[f64], diffusion: &[f64]) -> Result<DensityTable> {
    let n = x.len();
    if n < GridSpec::MIN_POINTS || drift.len() != n || diffusion.len() != n {
        return Err(FpkError::GridMismatch);
    }
    let peak_d = diffusion.iter().cloned().fold(0.0, f64::max);
    let min_d = diffusion.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_d > ELLIPTIC_FLOOR * peak_d) {
        return Err(FpkError::NotElliptic(min_d));
    }
    let step = x[1] - x[0];
    let q: Vec<f64> = drift.iter().zip(diffusion).map(|(f, d)| 2.0 * f / d).collect();
    let anti = cumulative_integral(step, &q);
    let u: Vec<f64> = anti.iter().zip(diffusion).map(|(a, d)| a - d.ln()).collect();
    let top = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(FpkError::NotNormalizable("non-finite log density".into()));
    }
    let shifted: Vec<f64> = u.iter().map(|v| (v - top).exp()).collect();
    let z = trapezoid_weighted(step, &shifted, &vec![1.0; n]);
    if !(z > 0.0 && z.is_finite()) {
        return Err(FpkError::NotNormalizable(format!("grid mass {z}")));
    }
    let log_norm = top + z.ln();
    let log_values: Vec<f64> = u.iter().map(|v| v - log_norm).collect();
    Ok(DensityTable {
        x: x.to_vec(),
        values: log_values.iter().map(|v| v.exp()).collect(),
        log_values,
        log_norm,
    })
}

/// `r = p/p*` and `ψ = g·(ln r)'` on the shared grid.
pub fn log_ratio_and_psi(
    p: &DensityTable,
    p_star: &DensityTable,
    g: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if p.x != p_star.x || g.len() != p.x.len() {
        return Err(FpkError::GridMismatch);
    }
    for (i, (a, b)) in p.log_values.iter().zip(&p_star.log_values).enumerate() {
        if !a.is_finite() || !b.is_finite() {
            return Err(FpkError::NonPositiveDensity(i));
        }
    }
    let ln_r: Vec<f64> = p.log_values.iter().zip(&p_star.log_values).map(|(a, b)| a - b).collect();
    let d = derivative(p.step(), &ln_r);
    let psi = d.iter().zip(g).map(|(v, g)| v * g).collect();
    Ok((ln_r.iter().map(|v| v.exp()).collect(), psi))
}

/// `dX = f dt + g (dW + h dt)` with polynomial `f`, `g`, `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarDiffusionModel {
    pub f: Polynomial,
    pub g: Polynomial,
    pub h: Polynomial,
    pub grid: GridSpec,
}

impl ScalarDiffusionModel {
    /// Checks grid validity and confinement of `f` and `f + gh`.
    pub fn new(f: Polynomial, g: Polynomial, h: Polynomial, grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        if g.is_zero() {
            return Err(FpkError::NotElliptic(0.0));
        }
        let model = Self { f, g, h, grid };
        if !model.f.is_confining() {
            return Err(FpkError::NotConfining(
                "nominal drift needs odd degree and negative leading coefficient".into(),
            ));
        }
        if !model.perturbed_drift().is_confining() {
            return Err(FpkError::NotConfining(
                "perturbed drift f + gh needs odd degree and negative leading coefficient".into(),
            ));
        }
        Ok(model)
    }

    /// `f + g·h`.
    pub fn perturbed_drift(&self) -> Polynomial {
        self.f.add(&self.g.mul(&self.h))
    }

    pub fn with_h(&self, h: Polynomial) -> Result<Self> {
        Self::new(self.f.clone(), self.g.clone(), h, self.grid)
    }

    /// Nodes, `p*`, `p` and the node values of `g` and `h` on a grid fitted
    /// so both densities fall below [`BOUNDARY_REL`] of their peaks at the
    /// ends.
    pub fn densities(&self) -> Result<ModelDensities> {
        let f = self.f.clone();
        let fh = self.perturbed_drift();
        let g = self.g.clone();
        let (spec, mut tables) = fit_grid(self.grid, |x| {
            let d = diffusion_on(&g, x)?;
            let fn_ = x.iter().map(|&v| f.eval(v)).collect::<Vec<_>>();
            let fhn = x.iter().map(|&v| fh.eval(v)).collect::<Vec<_>>();
            Ok(vec![stationary_density(x, &fn_, &d)?, stationary_density(x, &fhn, &d)?])
        })?;
        let x = spec.nodes();
        let p = tables.pop().expect("two tables");
        let p_star = tables.pop().expect("two tables");
        Ok(ModelDensities {
            g: x.iter().map(|&v| self.g.eval(v)).collect(),
            h: x.iter().map(|&v| self.h.eval(v)).collect(),
            grid: spec,
            p_star,
            p,
        })
    }

    /// Same model on a grid with `factor` times the points.
    pub fn refined(&self, factor: usize) -> Self {
        let mut out = self.clone();
        out.grid.points = (self.grid.points - 1) * factor + 1;
        out
    }

    /// Identity and bound moments.
    pub fn dirichlet_check(&self) -> Result<EntropyChain> {
        Ok(self.analyze()?.chain)
    }

    /// Full chain including the Fisher, log-Sobolev and gain links.
    pub fn fisher_kl_check(&self) -> Result<EntropyChain> {
        self.dirichlet_check()
    }

    pub fn analyze(&self) -> Result<ScalarAnalysis> {
        ScalarAnalysis::from_densities(self.densities()?)
    }
}

/// `D = g²` at the nodes. A sign change of `g` between nodes means `D`
/// touches zero even if no node lands on the root.
fn diffusion_on(g: &Polynomial, x: &[f64]) -> Result<Vec<f64>> {
    let gv: Vec<f64> = x.iter().map(|&v| g.eval(v)).collect();
    if gv.windows(2).any(|w| w[0] * w[1] <= 0.0) {
        return Err(FpkError::NotElliptic(0.0));
    }
    Ok(gv.iter().map(|v| v * v).collect())
}

/// Densities of a model on its fitted grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelDensities {
    pub grid: GridSpec,
    pub p_star: DensityTable,
    pub p: DensityTable,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

const MAX_EXPANSIONS: usize = 30;
/// Support threshold used when shrinking an over-wide grid.
const SUPPORT_REL: f64 = 1e-18;

/// Expands the extent until every table meets [`BOUNDARY_REL`], then trims
/// it once to the joint support so the resolution is not wasted on tails.
pub fn fit_grid(
    start: GridSpec,
    compute: impl Fn(&[f64]) -> Result<Vec<DensityTable>>,
) -> Result<(GridSpec, Vec<DensityTable>)> {
    start.validate()?;
    let mut spec = start;
    let mut shrunk = false;
    for _ in 0..MAX_EXPANSIONS {
        let tables = compute(&spec.nodes())?;
        let worst = tables.iter().map(|t| t.boundary_ratio()).fold(0.0, f64::max);
        if !(worst <= BOUNDARY_REL) {
            let c = 0.5 * (spec.lo + spec.hi);
            let w = 0.75 * (spec.hi - spec.lo);
            spec.lo = c - w;
            spec.hi = c + w;
            continue;
        }
        if shrunk {
            return Ok((spec, tables));
        }
        shrunk = true;
        let x = spec.nodes();
        let mut first = x.len() - 1;
        let mut last = 0;
        for t in &tables {
            let peak = t.values.iter().cloned().fold(0.0, f64::max);
            for (i, v) in t.values.iter().enumerate() {
                if *v >= SUPPORT_REL * peak {
                    first = first.min(i);
                    last = last.max(i);
                }
            }
        }
        let (lo, hi) = (x[first], x[last]);
        if hi - lo >= 0.6 * (spec.hi - spec.lo) {
            return Ok((spec, tables));
        }
        let pad = 0.1 * (hi - lo);
        spec.lo = (lo - pad).max(spec.lo);
        spec.hi = (hi + pad).min(spec.hi);
    }
    Err(FpkError::NotNormalizable(format!(
        "boundary density stays above {BOUNDARY_REL:e} of the peak after {MAX_EXPANSIONS} expansions"
    )))
}

/// Moments of the entropy chain under the perturbed law `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyChain {
    pub e_psi2: f64,
    pub e_h2: f64,
    /// `E(hψ − ½ψ²)`
    pub identity_residual: f64,
    /// `∫ p |(ln r)'|²`
    pub fisher: f64,
    /// `∫ p ln r`
    pub kl: f64,
    /// `min D` on the grid
    pub lambda: f64,
    /// `−max (ln p*)''` on the grid; may be nonpositive.
    pub mu: f64,
    /// `1/(λμ)` when `μ > 0`.
    pub k: Option<f64>,
    pub log_concave: bool,
    pub identity_ok: bool,
    pub bound_ok: bool,
    /// `fisher ≤ E|ψ|²/λ`
    pub fisher_ok: bool,
    /// `kl ≤ fisher/(2μ)`; skipped unless log-concave.
    pub log_sobolev_ok: Option<bool>,
    /// `kl ≤ 2K·E|h|²`; skipped unless log-concave.
    pub gain_ok: Option<bool>,
}

pub const IDENTITY_REL_TOL: f64 = 1e-5;
pub const BOUND_ABS_TOL: f64 = 1e-6;
pub const CHAIN_REL_TOL: f64 = 1e-5;

fn le_rel(a: f64, b: f64) -> bool {
    a <= b + CHAIN_REL_TOL * (1.0 + b.abs())
}

impl EntropyChain {
    pub fn from_nodes(
        p_star: &DensityTable,
        p: &DensityTable,
        g: &[f64],
        h: &[f64],
    ) -> Result<(Self, Vec<f64>, Vec<f64>)> {
        let (r, psi) = log_ratio_and_psi(p, p_star, g)?;
        let step = p.step();
        let ln_r: Vec<f64> = p.log_values.iter().zip(&p_star.log_values).map(|(a, b)| a - b).collect();
        let dln_r = derivative(step, &ln_r);
        let e_psi2 = p.expect(&psi.iter().map(|v| v * v).collect::<Vec<_>>());
        let e_h2 = p.expect(&h.iter().map(|v| v * v).collect::<Vec<_>>());
        let identity_residual = p.expect(
            &h.iter().zip(&psi).map(|(h, s)| h * s - 0.5 * s * s).collect::<Vec<_>>(),
        );
        let fisher = p.expect(&dln_r.iter().map(|v| v * v).collect::<Vec<_>>());
        let kl = p.expect(&ln_r);
        let lambda = g.iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
        let l = &p_star.log_values;
        let mu = -(1..l.len() - 1)
            .map(|i| (l[i + 1] - 2.0 * l[i] + l[i - 1]) / (step * step))
            .fold(f64::NEG_INFINITY, f64::max);
        let log_concave = mu > 0.0;
        let k = log_concave.then(|| 1.0 / (lambda * mu));
        let chain = Self {
            identity_ok: identity_residual.abs() <= IDENTITY_REL_TOL * (1.0 + e_h2),
            bound_ok: e_psi2 <= 4.0 * e_h2 + BOUND_ABS_TOL,
            fisher_ok: le_rel(fisher, e_psi2 / lambda),
            log_sobolev_ok: log_concave.then(|| le_rel(kl, fisher / (2.0 * mu))),
            gain_ok: k.map(|k| le_rel(kl, 2.0 * k * e_h2)),
            e_psi2,
            e_h2,
            identity_residual,
            fisher,
            kl,
            lambda,
            mu,
            k,
            log_concave,
        };
        Ok((chain, r, psi))
    }

    /// `E|ψ|² / (4E|h|²)`, or 1 when both vanish.
    pub fn saturation_ratio(&self) -> f64 {
        if self.e_h2 == 0.0 {
            1.0
        } else {
            self.e_psi2 / (4.0 * self.e_h2)
        }
    }
}

/// Tables, ratio, `ψ` and the chain for one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarAnalysis {
    pub densities: ModelDensities,
    pub r: Vec<f64>,
    pub psi: Vec<f64>,
    pub chain: EntropyChain,
}

impl ScalarAnalysis {
    pub fn from_densities(densities: ModelDensities) -> Result<Self> {
        let (chain, r, psi) =
            EntropyChain::from_nodes(&densities.p_star, &densities.p, &densities.g, &densities.h)?;
        Ok(Self {
            densities,
            r,
            psi,
            chain,
        })
    }
}

/// `h = ½ g (ln r)'` for a positive target ratio on the grid.
pub fn saturating_drift_1d(step: f64, g: &[f64], target_r: &[f64]) -> Result<Vec<f64>> {
    if g.len() != target_r.len() {
        return Err(FpkError::GridMismatch);
    }
    if let Some(i) = target_r.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(FpkError::NonPositiveRatio(i));
    }
    let ln_r: Vec<f64> = target_r.iter().map(|v| v.ln()).collect();
    Ok(derivative(step, &ln_r)
        .iter()
        .zip(g)
        .map(|(d, g)| 0.5 * g * d)
        .collect())
}

/// Outcome of building the saturating drift for a target log-ratio and
/// re-solving for the perturbed density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaturationReport {
    pub grid: GridSpec,
    pub h: Vec<f64>,
    /// Largest `|p − r·p*| / (r·p*)` over the nodes.
    pub max_rel_density_error: f64,
    pub analysis: ScalarAnalysis,
}

/// Round trip for `r ∝ exp(log_r)` against the nominal part of `model`.
///
/// `log_r` is taken as a function because targets need only be positive
/// and smooth, not polynomial.
pub fn saturation_round_trip(
    model: &ScalarDiffusionModel,
    log_r: impl Fn(f64) -> f64,
) -> Result<SaturationReport> {
    let f = &model.f;
    let g = &model.g;
    let targets = |x: &[f64]| -> Result<Vec<DensityTable>> {
        let d = diffusion_on(g, x)?;
        let fn_: Vec<f64> = x.iter().map(|&v| f.eval(v)).collect();
        let p_star = stationary_density(x, &fn_, &d)?;
        let target = reweight(&p_star, x.iter().map(|&v| log_r(v)));
        Ok(vec![p_star, target])
    };
    let (grid, mut tables) = fit_grid(model.grid, targets)?;
    let target = tables.pop().expect("two tables");
    let p_star = tables.pop().expect("two tables");
    let x = grid.nodes();
    let gn: Vec<f64> = x.iter().map(|&v| g.eval(v)).collect();
    let r: Vec<f64> = target
        .log_values
        .iter()
        .zip(&p_star.log_values)
        .map(|(a, b)| (a - b).exp())
        .collect();
    let h = saturating_drift_1d(grid.step(), &gn, &r)?;
    let drift: Vec<f64> = x.iter().zip(&gn).zip(&h).map(|((&v, g), h)| f.eval(v) + g * h).collect();
    let d: Vec<f64> = gn.iter().map(|v| v * v).collect();
    let p = stationary_density(&x, &drift, &d)?;
    let max_rel_density_error = p
        .log_values
        .iter()
        .zip(&target.log_values)
        .map(|(a, b)| (a - b).exp_m1().abs())
        .fold(0.0, f64::max);
    let densities = ModelDensities {
        grid,
        p_star,
        p,
        g: gn,
        h: h.clone(),
    };
    Ok(SaturationReport {
        grid,
        h,
        max_rel_density_error,
        analysis: ScalarAnalysis::from_densities(densities)?,
    })
}

/// `r·p*` renormalized, with `ln r` given per node.
fn reweight(p_star: &DensityTable, log_r: impl Iterator<Item = f64>) -> DensityTable {
    let u: Vec<f64> = p_star.log_values.iter().zip(log_r).map(|(a, b)| a + b).collect();
    let top = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = u.iter().map(|v| (v - top).exp()).collect();
    let z = trapezoid_weighted(p_star.step(), &shifted, &vec![1.0; u.len()]);
    let log_norm = top + z.ln();
    let log_values: Vec<f64> = u.iter().map(|v| v - log_norm).collect();
    DensityTable {
        x: p_star.x.clone(),
        values: log_values.iter().map(|v| v.exp()).collect(),
        log_values,
        log_norm: p_star.log_norm + log_norm,
    }
}
