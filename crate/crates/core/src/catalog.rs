//! Reference systems: the four-state Langevin benchmark, a 1-D model
//! catalog, and seeded generators of random valid linear systems.

use crate::lingauss::{LinearGaussianSystem, Result};
use crate::numkit::{gaussian_stream, Matrix, RngStream};
use crate::scalar_fpk::{GridSpec, Polynomial, ScalarDiffusionModel};

/// Temperature-like scale of the benchmark: `B = √(2τ) I`.
pub const BENCH_TAU: f64 = 0.3463;

/// Symmetric positive definite `R`, with `A = −R`.
pub const BENCH_R: [[f64; 4]; 4] = [
    [1.7833, 0.5123, -0.1783, 0.1760],
    [0.5123, 5.2275, -3.4186, -1.7825],
    [-0.1783, -3.4186, 4.3321, 0.2209],
    [0.1760, -1.7825, 0.2209, 1.4656],
];

pub const BENCH_N: [[f64; 4]; 4] = [
    [-0.0291, 0.0520, -0.0007, -0.0424],
    [-0.0807, 0.0783, 0.0474, -0.0066],
    [0.0570, -0.0590, 0.0574, 0.0137],
    [0.0091, 0.0333, 0.0425, 0.1638],
];

/// Published perturbed covariance (four decimals).
pub const BENCH_P: [[f64; 4]; 4] = [
    [0.3949, -0.5799, -0.3971, -0.7857],
    [-0.5799, 1.6852, 1.1883, 2.1990],
    [-0.3971, 1.1883, 0.9194, 1.5359],
    [-0.7857, 2.1990, 1.5359, 3.1403],
];

/// Published scalar results for the benchmark, four decimals each.
#[derive(Debug, Clone, Copy)]
pub struct BenchReference {
    pub lambda_min_r: f64,
    pub k: f64,
    pub theta_star: f64,
    pub nf_hinf: f64,
    pub kl_exact: f64,
    pub kl_bound: f64,
}

pub const BENCH_REFERENCE: BenchReference = BenchReference {
    lambda_min_r: 0.1779,
    k: 2.8099,
    theta_star: 9.1946,
    nf_hinf: 0.7807,
    kl_exact: 0.4544,
    kl_bound: 2.4894,
};

pub fn bench_r() -> Matrix {
    Matrix::from_rows(&BENCH_R).expect("static data")
}

pub fn bench_p() -> Matrix {
    Matrix::from_rows(&BENCH_P).expect("static data")
}

/// `A = −R`, `B = √(2τ) I`, `N` as published.
pub fn bench_system() -> LinearGaussianSystem {
    langevin(&bench_r(), BENCH_TAU, Matrix::from_rows(&BENCH_N).expect("static data"))
        .expect("benchmark is valid")
}

/// `A = −R`, `B = √(2τ) I`; reversible with `P* = τR⁻¹`.
pub fn langevin(r: &Matrix, tau: f64, n: Matrix) -> Result<LinearGaussianSystem> {
    let order = r.rows();
    LinearGaussianSystem::new(
        r.scale(-1.0),
        Matrix::identity(order).scale((2.0 * tau).sqrt()),
        n,
    )
}

fn normal_matrix(rng: &mut RngStream, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * rng.next_normal())
}

/// `GGᵀ/n + floor·I` for Gaussian `G`.
pub fn random_spd(rng: &mut RngStream, n: usize, floor: f64) -> Matrix {
    let g = normal_matrix(rng, n, n, 1.0);
    (&g * &g.transpose())
        .scale(1.0 / n as f64)
        .add(&Matrix::identity(n).scale(floor))
        .expect("square")
        .symmetrize()
}

/// Random `A`: Gaussian matrix shifted left of its spectral abscissa.
fn random_hurwitz(rng: &mut RngStream, n: usize) -> Matrix {
    let g = normal_matrix(rng, n, n, 1.0 / (n as f64).sqrt());
    let shift = crate::numkit::spectral_abscissa(&g).expect("small order");
    let margin = 0.2 + 0.8 * rng.next_open_unit();
    g.sub(&Matrix::identity(n).scale(shift + margin)).expect("square")
}

/// A random valid system of order `n` with `m` inputs. The noise-drift gain
/// is scaled so that `‖BN‖` is a fraction of the stability margin, which
/// keeps `A + BN` Hurwitz; rejected draws are resampled.
pub fn random_system(rng: &mut RngStream, n: usize, m: usize) -> LinearGaussianSystem {
    loop {
        let a = random_hurwitz(rng, n);
        let b = normal_matrix(rng, n, m, 1.0 / (m as f64).sqrt());
        let raw = normal_matrix(rng, m, n, 1.0);
        let gain = (&b * &raw).frobenius_norm().max(1e-12);
        let margin = -crate::numkit::spectral_abscissa(&a).expect("small order");
        let frac = 0.9 * rng.next_open_unit();
        let nmat = raw.scale(frac * margin / gain);
        if let Ok(sys) = LinearGaussianSystem::new(a, b, nmat) {
            return sys;
        }
    }
}

/// Deterministic population of `count` random systems with orders in `1..=max_n`
/// and square, full-rank `B` (elliptic).
pub fn random_elliptic_population(seed: u64, count: usize, max_n: usize) -> Vec<LinearGaussianSystem> {
    (0..count)
        .map(|i| {
            let mut rng = gaussian_stream(seed, i as u64);
            let n = 1 + (rng.next_u64() % max_n as u64) as usize;
            random_system(&mut rng, n, n)
        })
        .collect()
}

/// Random Langevin plant `(−R, σI)` with `R = random_spd` and `σ ∈ (0.5, 2)`.
pub fn random_langevin_plant(rng: &mut RngStream, n: usize) -> (Matrix, Matrix) {
    let r = random_spd(rng, n, 0.3);
    let sigma = 0.5 + 1.5 * rng.next_open_unit();
    (r.scale(-1.0), Matrix::identity(n).scale(sigma))
}

/// Ten polynomial 1-D models: OU, cubic and quintic drifts; constant and
/// `1 + 0.1x²` dispersions; linear and cubic noise drifts.
pub fn scalar_catalog() -> Vec<(&'static str, ScalarDiffusionModel)> {
    let s2 = 2f64.sqrt();
    let grid = GridSpec::default();
    let model = |f: &[f64], g: &[f64], h: &[f64]| {
        ScalarDiffusionModel::new(
            Polynomial::new(f.to_vec()),
            Polynomial::new(g.to_vec()),
            Polynomial::new(h.to_vec()),
            grid,
        )
        .expect("catalog model is valid")
    };
    vec![
        ("ou-linear", model(&[0.0, -1.0], &[s2], &[0.0, 0.25])),
        ("ou-cubic-h", model(&[0.0, -1.0], &[s2], &[0.0, 0.1, 0.0, -0.05])),
        ("cubic", model(&[0.0, -0.5, 0.0, -1.0], &[1.0], &[0.0, 0.3])),
        ("cubic-cubic-h", model(&[0.0, -1.0, 0.0, -1.0], &[1.0], &[0.0, 0.0, 0.0, 0.1])),
        ("double-well", model(&[0.0, 1.0, 0.0, -1.0], &[s2], &[0.0, 0.1])),
        ("double-well-cubic-h", model(&[0.0, 1.0, 0.0, -1.0], &[s2], &[0.0, 0.05, 0.0, 0.1])),
        ("asymmetric-cubic", model(&[0.5, -1.0, 0.3, -1.0], &[1.2], &[0.1, -0.2])),
        ("quintic", model(&[0.0, -1.0, 0.0, 0.0, 0.0, -0.5], &[1.0], &[0.0, 0.4])),
        // D grows like x⁴, so only a quintic drift keeps Gaussian-type tails
        ("quintic-state-dispersion", model(&[0.0, -1.0, 0.0, 0.0, 0.0, -0.5], &[1.0, 0.0, 0.1], &[0.0, 0.2])),
        (
            "quintic-state-dispersion-cubic-h",
            model(&[0.0, -1.0, 0.0, -0.3, 0.0, -0.2], &[1.0, 0.0, 0.1], &[0.0, 0.2, 0.0, 0.05]),
        ),
    ]
}
