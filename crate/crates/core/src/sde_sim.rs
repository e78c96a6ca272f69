//! Euler–Maruyama ergodic averages for the perturbed dynamics
//! `dX = f_h(X) dt + g(X) dW`.
//!
//! Each trajectory owns a counter-based Gaussian stream keyed by
//! `(seed, trajectory index)` and reduces its sampling window to a fixed
//! number of batch means. Trajectories run in parallel and are collected in
//! index order, so results are bit-identical for a given seed whatever the
//! thread count. Standard errors come from the spread of the batch means.
//!
//! Novikov-type admissibility of a nonlinear `h` is not certified here;
//! only the linear spectral gate `‖NF‖∞ < 1` is checked elsewhere.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lingauss::{psi_gain, LinGaussError, LinearGaussianSystem};
use crate::numkit::{gaussian_stream, Matrix};
use crate::scalar_fpk::{FpkError, Polynomial, ScalarAnalysis};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("state norm exceeded {limit:e} on trajectory {trajectory} at step {step}")]
    Unstable {
        trajectory: usize,
        step: usize,
        limit: f64,
    },

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Linear(#[from] LinGaussError),

    #[error(transparent)]
    Scalar(#[from] FpkError),
}

pub type Result<T> = std::result::Result<T, SimError>;

pub const DIVERGENCE_LIMIT: f64 = 1e8;
pub const BATCHES_PER_TRAJECTORY: usize = 32;
/// Bound on `dt` times the drift's stiffness proxy.
pub const STABILITY_PROXY_MAX: f64 = 0.1;
pub const MIN_SAMPLE_TIME: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub burn_in_steps: usize,
    pub sample_steps: usize,
    pub n_trajectories: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::with_horizon(0.005, 4_000.0, 16, 1)
    }
}

impl SimConfig {
    /// `sample_time` per trajectory, burn-in 20% of the total steps.
    pub fn with_horizon(dt: f64, sample_time: f64, n_trajectories: usize, seed: u64) -> Self {
        let sample_steps = (sample_time / dt).round() as usize;
        Self {
            dt,
            burn_in_steps: sample_steps / 4,
            sample_steps,
            n_trajectories,
            seed,
        }
    }

    /// Checks the explicit-scheme heuristics against `stiffness`, a bound on
    /// the drift's local rate.
    pub fn validate(&self, stiffness: f64) -> Result<()> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.n_trajectories == 0 {
            return bad("need at least one trajectory".into());
        }
        if self.sample_steps < BATCHES_PER_TRAJECTORY {
            return bad(format!("need at least {BATCHES_PER_TRAJECTORY} sample steps"));
        }
        if self.dt * (self.sample_steps as f64) < MIN_SAMPLE_TIME {
            return bad(format!(
                "sampling window {} is shorter than {MIN_SAMPLE_TIME} time units",
                self.dt * self.sample_steps as f64
            ));
        }
        if self.dt * stiffness > STABILITY_PROXY_MAX {
            return bad(format!(
                "dt·stiffness = {} exceeds {STABILITY_PROXY_MAX}",
                self.dt * stiffness
            ));
        }
        Ok(())
    }
}

/// Batch-means estimate of a stationary expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Number of batch means behind the estimate.
    pub n_effective: usize,
}

impl MomentEstimate {
    pub fn from_batches(batches: &[f64]) -> Self {
        let k = batches.len();
        let mean = batches.iter().sum::<f64>() / k as f64;
        let var = batches.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (k as f64 - 1.0);
        Self {
            value: mean,
            std_error: (var / k as f64).sqrt(),
            n_effective: k,
        }
    }

    /// As [`Self::from_batches`] with the standard error raised to at least
    /// `floor`; used for observables that vanish identically up to rounding.
    pub fn from_batches_with_floor(batches: &[f64], floor: f64) -> Self {
        let mut e = Self::from_batches(batches);
        e.std_error = e.std_error.max(floor);
        e
    }

    /// `|value − target| ≤ z·std_error`.
    pub fn covers(&self, target: f64, z: f64) -> bool {
        (self.value - target).abs() <= z * self.std_error
    }
}

/// Perturbed dynamics plus the observables to average.
#[derive(Debug, Clone)]
pub enum SimModel {
    Linear {
        closed_loop: Matrix,
        b: Matrix,
        n: Matrix,
        /// `BᵀΠ`, so that `ψ = BᵀΠx`.
        psi_gain: Matrix,
    },
    Scalar {
        drift: Polynomial,
        g: Polynomial,
        h: Polynomial,
        psi_x: Vec<f64>,
        psi: Vec<f64>,
    },
}

impl SimModel {
    pub fn linear(sys: &LinearGaussianSystem) -> Result<Self> {
        let p_star = sys.nominal_covariance()?;
        let psi_gain = psi_gain(sys, &p_star, &sys.perturbed_covariance()?)?;
        Ok(SimModel::Linear {
            closed_loop: sys.closed_loop(),
            b: sys.b().clone(),
            n: sys.n().clone(),
            psi_gain,
        })
    }

    /// `ψ` is read off the tabulated log-ratio gradient.
    pub fn scalar(analysis: &ScalarAnalysis, f: &Polynomial, g: &Polynomial, h: &Polynomial) -> Self {
        SimModel::Scalar {
            drift: f.add(&g.mul(h)),
            g: g.clone(),
            h: h.clone(),
            psi_x: analysis.densities.grid.nodes(),
            psi: analysis.psi.clone(),
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            SimModel::Linear { closed_loop, .. } => closed_loop.rows(),
            SimModel::Scalar { .. } => 1,
        }
    }

    fn noise_dim(&self) -> usize {
        match self {
            SimModel::Linear { b, .. } => b.cols(),
            SimModel::Scalar { .. } => 1,
        }
    }

    /// Stiffness proxy: `‖A+BN‖_F`, or `max |f_h'|` over the tabulated grid.
    pub fn stiffness(&self) -> f64 {
        match self {
            SimModel::Linear { closed_loop, .. } => closed_loop.frobenius_norm(),
            SimModel::Scalar { drift, psi_x, .. } => {
                let c = drift.coeffs();
                let d = Polynomial::new((1..c.len()).map(|k| k as f64 * c[k]).collect());
                let (lo, hi) = (psi_x[0], psi_x[psi_x.len() - 1]);
                (0..=200)
                    .map(|i| d.eval(lo + (hi - lo) * i as f64 / 200.0).abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Observables, in order: second moments `x_i x_j` for `i ≤ j`, then
    /// `|h|²`, `|ψ|²`, `hᵀψ − ½|ψ|²`, `|ψ|² − 4|h|²`, and the magnitudes
    /// `|hᵀψ| + ½|ψ|²` and `|ψ|² + 4|h|²` that scale the last two.
    pub fn observable_labels(&self) -> Vec<String> {
        let n = self.state_dim();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i..n {
                out.push(format!("x{i}x{j}"));
            }
        }
        out.extend(
            ["h2", "psi2", "identity", "bound_gap", "identity_scale", "bound_scale"].map(String::from),
        );
        out
    }

    fn n_observables(&self) -> usize {
        let n = self.state_dim();
        n * (n + 1) / 2 + 6
    }

    fn observe(&self, x: &[f64], out: &mut [f64], work: &mut Work) {
        let n = x.len();
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                out[k] = x[i] * x[j];
                k += 1;
            }
        }
        let (h2, psi2, cross) = match self {
            SimModel::Linear { n: nm, psi_gain, .. } => {
                mat_vec(nm, x, &mut work.h);
                mat_vec(psi_gain, x, &mut work.psi);
                let h2: f64 = work.h.iter().map(|v| v * v).sum();
                let psi2: f64 = work.psi.iter().map(|v| v * v).sum();
                let cross: f64 = work.h.iter().zip(&work.psi).map(|(a, b)| a * b).sum();
                (h2, psi2, cross)
            }
            SimModel::Scalar { h, psi_x, psi, .. } => {
                let hv = h.eval(x[0]);
                let pv = interpolate(psi_x, psi, x[0]);
                (hv * hv, pv * pv, hv * pv)
            }
        };
        out[k] = h2;
        out[k + 1] = psi2;
        out[k + 2] = cross - 0.5 * psi2;
        out[k + 3] = psi2 - 4.0 * h2;
        out[k + 4] = cross.abs() + 0.5 * psi2;
        out[k + 5] = psi2 + 4.0 * h2;
    }

    /// One Euler–Maruyama step with standard normals `xi`.
    fn step(&self, x: &mut [f64], xi: &[f64], dt: f64, work: &mut Work) {
        let sq = dt.sqrt();
        match self {
            SimModel::Linear { closed_loop, b, .. } => {
                mat_vec(closed_loop, x, &mut work.drift);
                mat_vec(b, xi, &mut work.noise);
                for i in 0..x.len() {
                    x[i] += work.drift[i] * dt + work.noise[i] * sq;
                }
            }
            SimModel::Scalar { drift, g, .. } => {
                let v = x[0];
                x[0] = v + drift.eval(v) * dt + g.eval(v) * sq * xi[0];
            }
        }
    }
}

struct Work {
    drift: Vec<f64>,
    noise: Vec<f64>,
    h: Vec<f64>,
    psi: Vec<f64>,
}

fn mat_vec(m: &Matrix, x: &[f64], out: &mut [f64]) {
    let c = m.cols();
    let data = m.as_slice();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &data[i * c..(i + 1) * c];
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// Four-point Lagrange interpolation on a uniform table, clamped outside
/// it. Linear interpolation is not enough: its `O(step²)` bias in `ψ`
/// shows up as a systematic nonzero `|ψ|² − 4|h|²` in one dimension.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let step = xs[1] - xs[0];
    let i = (((x - xs[0]) / step) as usize).min(n - 2);
    if n < 4 {
        let t = (x - xs[i]) / step;
        return ys[i] + t * (ys[i + 1] - ys[i]);
    }
    // stencil i0..i0+3 around the cell, shifted inward at the ends
    let i0 = i.saturating_sub(1).min(n - 4);
    let t = (x - xs[i0]) / step;
    let (y0, y1, y2, y3) = (ys[i0], ys[i0 + 1], ys[i0 + 2], ys[i0 + 3]);
    -y0 * (t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0 + y1 * t * (t - 2.0) * (t - 3.0) / 2.0
        - y2 * t * (t - 1.0) * (t - 3.0) / 2.0
        + y3 * t * (t - 1.0) * (t - 2.0) / 6.0
}

/// Euler–Maruyama path of `dX = AX dt + B dW` from `x0`; returns the final state.
pub fn linear_path(a: &Matrix, b: &Matrix, x0: &[f64], dt: f64, steps: usize, seed: u64) -> Vec<f64> {
    let mut rng = gaussian_stream(seed, 0);
    let mut x = x0.to_vec();
    let mut drift = vec![0.0; x.len()];
    let mut noise = vec![0.0; x.len()];
    let mut xi = vec![0.0; b.cols()];
    for _ in 0..steps {
        rng.fill_normal(&mut xi);
        mat_vec(a, &x, &mut drift);
        mat_vec(b, &xi, &mut noise);
        for i in 0..x.len() {
            x[i] += drift[i] * dt + noise[i] * dt.sqrt();
        }
    }
    x
}

/// Batch means of every observable, `[trajectory × batch][observable]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    pub labels: Vec<String>,
    pub batch_means: Vec<Vec<f64>>,
    pub config: SimConfig,
}

impl SimStats {
    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let k = self.labels.iter().position(|l| l == label)?;
        Some(self.batch_means.iter().map(|b| b[k]).collect())
    }

    pub fn estimate(&self, label: &str) -> Option<MomentEstimate> {
        Some(MomentEstimate::from_batches(&self.column(label)?))
    }
}

/// Relative floor on the standard error of the identity and bound-gap
/// estimates. In one dimension both vanish pathwise, and what remains is
/// rounding plus the tabulation error of `ψ`.
pub const CANCELLATION_FLOOR: f64 = 1e-9;

fn floored(stats: &SimStats, label: &str, scale_label: &str) -> MomentEstimate {
    let scale = stats.estimate(scale_label).expect("label present").value;
    MomentEstimate::from_batches_with_floor(
        &stats.column(label).expect("label present"),
        CANCELLATION_FLOOR * scale,
    )
}

fn run_trajectory(model: &SimModel, cfg: &SimConfig, index: usize) -> Result<Vec<Vec<f64>>> {
    let mut rng = gaussian_stream(cfg.seed, index as u64);
    let n = model.state_dim();
    let mut work = Work {
        drift: vec![0.0; n],
        noise: vec![0.0; n],
        h: vec![0.0; model.noise_dim()],
        psi: vec![0.0; model.noise_dim()],
    };
    let mut x = vec![0.0; n];
    let mut xi = vec![0.0; model.noise_dim()];
    let n_obs = model.n_observables();
    let mut obs = vec![0.0; n_obs];
    let check = |x: &[f64], step: usize| -> Result<()> {
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        if !(norm2 <= DIVERGENCE_LIMIT * DIVERGENCE_LIMIT) {
            return Err(SimError::Unstable {
                trajectory: index,
                step,
                limit: DIVERGENCE_LIMIT,
            });
        }
        Ok(())
    };
    for s in 0..cfg.burn_in_steps {
        rng.fill_normal(&mut xi);
        model.step(&mut x, &xi, cfg.dt, &mut work);
        if s % 64 == 0 {
            check(&x, s)?;
        }
    }
    let per_batch = cfg.sample_steps / BATCHES_PER_TRAJECTORY;
    let mut out = Vec::with_capacity(BATCHES_PER_TRAJECTORY);
    for batch in 0..BATCHES_PER_TRAJECTORY {
        let mut acc = vec![0.0; n_obs];
        for s in 0..per_batch {
            rng.fill_normal(&mut xi);
            model.step(&mut x, &xi, cfg.dt, &mut work);
            model.observe(&x, &mut obs, &mut work);
            for (a, o) in acc.iter_mut().zip(&obs) {
                *a += o;
            }
            if s % 64 == 0 {
                check(&x, cfg.burn_in_steps + batch * per_batch + s)?;
            }
        }
        check(&x, cfg.burn_in_steps + (batch + 1) * per_batch)?;
        out.push(acc.iter().map(|a| a / per_batch as f64).collect());
    }
    Ok(out)
}

/// Runs every trajectory and collects batch means in trajectory order.
pub fn simulate_em(model: &SimModel, cfg: &SimConfig) -> Result<SimStats> {
    cfg.validate(model.stiffness())?;
    let per_traj: Vec<Result<Vec<Vec<f64>>>> = (0..cfg.n_trajectories)
        .into_par_iter()
        .map(|i| run_trajectory(model, cfg, i))
        .collect();
    let mut batch_means = Vec::with_capacity(cfg.n_trajectories * BATCHES_PER_TRAJECTORY);
    for r in per_traj {
        batch_means.extend(r?);
    }
    Ok(SimStats {
        labels: model.observable_labels(),
        batch_means,
        config: *cfg,
    })
}

/// Monte Carlo estimates of the entropy-chain moments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicMoments {
    pub e_h2: MomentEstimate,
    pub e_psi2: MomentEstimate,
    /// `E(hᵀψ − ½|ψ|²)`, zero in theory.
    pub identity: MomentEstimate,
    /// `E(|ψ|² − 4|h|²)`, nonpositive in theory.
    pub bound_gap: MomentEstimate,
    /// `½E|h|²`, the relative entropy rate of the noise.
    pub rate: MomentEstimate,
    /// `E x_i x_j`, full symmetric layout.
    pub second_moments: Vec<Vec<MomentEstimate>>,
}

impl ErgodicMoments {
    pub fn from_stats(stats: &SimStats, state_dim: usize) -> Self {
        let get = |l: &str| stats.estimate(l).expect("label present");
        let e_h2 = get("h2");
        let second_moments = (0..state_dim)
            .map(|i| {
                (0..state_dim)
                    .map(|j| get(&format!("x{}x{}", i.min(j), i.max(j))))
                    .collect()
            })
            .collect();
        Self {
            rate: MomentEstimate {
                value: 0.5 * e_h2.value,
                std_error: 0.5 * e_h2.std_error,
                n_effective: e_h2.n_effective,
            },
            e_h2,
            e_psi2: get("psi2"),
            identity: floored(stats, "identity", "identity_scale"),
            bound_gap: floored(stats, "bound_gap", "bound_scale"),
            second_moments,
        }
    }

    /// Identity CI covers zero at `z` standard errors.
    pub fn identity_covers_zero(&self, z: f64) -> bool {
        self.identity.covers(0.0, z)
    }

    /// `E|ψ|² ≤ 4E|h|² + z·σ` with σ the standard error of the paired difference.
    pub fn bound_holds(&self, z: f64) -> bool {
        self.bound_gap.value <= z * self.bound_gap.std_error
    }

    /// `max |E x_i x_j − P_ij| / σ_ij`.
    pub fn covariance_z_max(&self, p: &Matrix) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.second_moments.iter().enumerate() {
            for (j, est) in row.iter().enumerate() {
                worst = worst.max((est.value - p[(i, j)]).abs() / est.std_error);
            }
        }
        worst
    }
}

pub fn ergodic_moments(model: &SimModel, cfg: &SimConfig) -> Result<ErgodicMoments> {
    let stats = simulate_em(model, cfg)?;
    Ok(ErgodicMoments::from_stats(&stats, model.state_dim()))
}

/// `½E|h|²`.
pub fn relative_entropy_rate(model: &SimModel, cfg: &SimConfig) -> Result<MomentEstimate> {
    Ok(ergodic_moments(model, cfg)?.rate)
}
