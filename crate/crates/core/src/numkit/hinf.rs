//! H∞ norm of a stable state-space transfer `C (sI − A)⁻¹ B`.
//!
//! Bisection on γ, where each trial level is tested through the
//! imaginary-axis eigenvalues of the Hamiltonian
//! `[[A, BBᵀ/γ], [−CᵀC/γ, −Aᵀ]]`. Candidate crossing frequencies are
//! validated by direct evaluation of `σ_max(G(iω))`, so the lower end of
//! the bracket is always an attained value.

use super::eig::{eigenvalues, singular_values, spectral_abscissa};
use super::{Lu, Matrix, NumError, Result};

#[derive(Debug, Clone, Copy)]
pub struct HinfOptions {
    /// Relative width of the final bracket.
    pub rel_tol: f64,
    /// Log-spaced frequencies probed to seed the bracket.
    pub bracket_points: usize,
    /// Log-spaced frequencies in the fallback sweep.
    pub sweep_points: usize,
    pub max_iter: usize,
}

impl Default for HinfOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            bracket_points: 128,
            sweep_points: 4096,
            max_iter: 200,
        }
    }
}

/// Real and imaginary parts of `C (iωI − A)⁻¹ B`.
pub fn transfer_at(a: &Matrix, b: &Matrix, c: &Matrix, omega: f64) -> Result<(Matrix, Matrix)> {
    let n = a.rows();
    let m = b.cols();
    let p = c.rows();
    // [[-A, -ωI], [ωI, -A]] [Xr; Xi] = [B; 0]
    let big = Matrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        match (bi, bj) {
            (0, 0) | (1, 1) => -a[(ii, jj)],
            (0, 1) if ii == jj => -omega,
            (1, 0) if ii == jj => omega,
            _ => 0.0,
        }
    });
    let rhs = Matrix::from_fn(2 * n, m, |i, j| if i < n { b[(i, j)] } else { 0.0 });
    let x = Lu::factor(&big)?.solve(&rhs)?;
    let gr = Matrix::from_fn(p, m, |i, j| (0..n).map(|k| c[(i, k)] * x[(k, j)]).sum());
    let gi = Matrix::from_fn(p, m, |i, j| (0..n).map(|k| c[(i, k)] * x[(n + k, j)]).sum());
    Ok((gr, gi))
}

/// Real symmetric embedding `[[Re, −Im], [Im, Re]]` of a complex matrix.
pub(crate) fn complex_embedding(re: &Matrix, im: &Matrix) -> Matrix {
    let (p, m) = re.shape();
    Matrix::from_fn(2 * p, 2 * m, |i, j| {
        let (bi, ii) = (i / p, i % p);
        let (bj, jj) = (j / m, j % m);
        match (bi, bj) {
            (0, 0) | (1, 1) => re[(ii, jj)],
            (0, 1) => -im[(ii, jj)],
            _ => im[(ii, jj)],
        }
    })
}

/// `σ_max(C (iωI − A)⁻¹ B)`.
pub fn sigma_max_at(a: &Matrix, b: &Matrix, c: &Matrix, omega: f64) -> Result<f64> {
    let (gr, gi) = transfer_at(a, b, c, omega)?;
    Ok(singular_values(&complex_embedding(&gr, &gi))?[0])
}

pub fn hinf_norm(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<f64> {
    hinf_norm_with(a, b, c, &HinfOptions::default())
}

pub fn hinf_norm_with(a: &Matrix, b: &Matrix, c: &Matrix, opts: &HinfOptions) -> Result<f64> {
    if !a.is_square() {
        return Err(NumError::NonSquare(a.rows(), a.cols()));
    }
    let n = a.rows();
    if b.rows() != n || c.cols() != n {
        return Err(NumError::DimensionMismatch(format!(
            "A is {n}x{n}, B is {}x{}, C is {}x{}",
            b.rows(),
            b.cols(),
            c.rows(),
            c.cols()
        )));
    }
    let abscissa = spectral_abscissa(a)?;
    if abscissa >= 0.0 {
        return Err(NumError::NotHurwitz(abscissa));
    }
    if b.max_abs() == 0.0 || c.max_abs() == 0.0 {
        return Ok(0.0);
    }

    let (mags, modal) = modal_frequencies(a)?;
    let (mut lo, mut peak) = sweep(a, b, c, &frequency_grid(&mags, &modal, opts.bracket_points))?;
    let eval = |w: f64| sigma_max_at(a, b, c, w);
    let fallback = |lo: f64, peak: f64| -> Result<f64> {
        let freqs = frequency_grid(&mags, &modal, opts.sweep_points);
        let (best, at) = sweep(a, b, c, &freqs)?;
        let (lo, peak) = if best > lo { (best, at) } else { (lo, peak) };
        Ok(refine_peak(&eval, &freqs, lo, peak))
    };

    // Upper end: twice the sweep maximum, doubled until no crossing survives.
    let mut hi = 2.0 * lo;
    let mut guard = 0;
    loop {
        match crossings(a, b, c, hi) {
            Ok(ws) => {
                let best = best_candidate(&ws, &eval)?;
                if best.0 >= hi {
                    lo = lo.max(best.0);
                    peak = best.1;
                    hi *= 2.0;
                } else {
                    break;
                }
            }
            Err(_) => return fallback(lo, peak),
        }
        guard += 1;
        if guard > 60 {
            return Err(NumError::NoConvergence(
                "H-infinity upper bracket kept growing".into(),
            ));
        }
    }

    for _ in 0..opts.max_iter {
        if hi - lo <= opts.rel_tol * hi {
            return Ok(lo);
        }
        let mid = 0.5 * (lo + hi);
        match crossings(a, b, c, mid) {
            Ok(ws) if !ws.is_empty() => {
                let (sig, w) = best_candidate(&ws, &eval)?;
                if sig >= mid {
                    lo = sig;
                    peak = w;
                } else {
                    hi = mid;
                }
            }
            Ok(_) => hi = mid,
            // Hamiltonian spectrum unavailable: fall back to the dense sweep.
            Err(_) => return fallback(lo, peak),
        }
    }
    fallback(lo, peak)
}

/// Eigenvalue magnitudes and imaginary parts of `A`.
fn modal_frequencies(a: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let eig = eigenvalues(a)?;
    let mags = eig.iter().map(|z| z.norm()).filter(|&v| v > 0.0).collect();
    let modal = eig.iter().map(|z| z.im.abs()).collect();
    Ok((mags, modal))
}

/// `points` log-spaced frequencies spanning three decades beyond the modal
/// range, plus zero and the modal frequencies themselves.
fn frequency_grid(mags: &[f64], modal: &[f64], points: usize) -> Vec<f64> {
    let wmin = mags.iter().cloned().fold(f64::INFINITY, f64::min).min(1.0);
    let wmax = mags.iter().cloned().fold(0.0, f64::max).max(1.0);
    let (l0, l1) = ((wmin * 1e-3).log10(), (wmax * 1e3).log10());
    let k = points.max(2);
    let mut freqs: Vec<f64> = (0..k)
        .map(|i| 10f64.powf(l0 + (l1 - l0) * i as f64 / (k - 1) as f64))
        .collect();
    freqs.push(0.0);
    freqs.extend_from_slice(modal);
    freqs.extend_from_slice(mags);
    freqs.sort_by(f64::total_cmp);
    freqs.dedup();
    freqs
}

/// Largest `σ_max` over `freqs` and where it occurs.
fn sweep(a: &Matrix, b: &Matrix, c: &Matrix, freqs: &[f64]) -> Result<(f64, f64)> {
    let mut best = (0.0, 0.0);
    for &w in freqs {
        let s = sigma_max_at(a, b, c, w)?;
        if s > best.0 {
            best = (s, w);
        }
    }
    Ok(best)
}

/// Positive frequencies of (near-)imaginary eigenvalues of the Hamiltonian.
fn crossings(a: &Matrix, b: &Matrix, c: &Matrix, gamma: f64) -> Result<Vec<f64>> {
    let n = a.rows();
    let bbt = (b * &b.transpose()).scale(1.0 / gamma);
    let ctc = (&c.transpose() * c).scale(-1.0 / gamma);
    let h = Matrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        match (bi, bj) {
            (0, 0) => a[(ii, jj)],
            (0, 1) => bbt[(ii, jj)],
            (1, 0) => ctc[(ii, jj)],
            _ => -a[(jj, ii)],
        }
    });
    let scale = h.frobenius_norm().max(1.0);
    let mut ws: Vec<f64> = eigenvalues(&h)?
        .into_iter()
        .filter(|z| z.re.abs() <= 1e-6 * scale)
        .map(|z| z.im.abs())
        .collect();
    ws.sort_by(f64::total_cmp);
    ws.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * y.abs().max(1.0));
    Ok(ws)
}

/// Largest `σ_max` over the crossing frequencies and their midpoints.
fn best_candidate(ws: &[f64], eval: &impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let mut best = (0.0, 0.0);
    let mut probe = |w: f64| -> Result<()> {
        let s = eval(w)?;
        if s > best.0 {
            best = (s, w);
        }
        Ok(())
    };
    if let Some(&first) = ws.first() {
        probe(0.5 * first)?;
    }
    for (i, &w) in ws.iter().enumerate() {
        probe(w)?;
        if let Some(&next) = ws.get(i + 1) {
            probe(0.5 * (w + next))?;
        }
    }
    Ok(best)
}

/// Golden-section polish of the best sweep point; used when the
/// Hamiltonian test cannot be evaluated.
fn refine_peak(eval: &impl Fn(f64) -> Result<f64>, freqs: &[f64], lo: f64, peak: f64) -> f64 {
    let idx = freqs
        .iter()
        .position(|&w| w >= peak)
        .unwrap_or(freqs.len() - 1);
    let mut a = freqs[idx.saturating_sub(1)];
    let mut b = freqs[(idx + 1).min(freqs.len() - 1)];
    let f = |w: f64| eval(w).unwrap_or(0.0);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut best = lo;
    for _ in 0..100 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        let (f1, f2) = (f(x1), f(x2));
        best = best.max(f1).max(f2);
        if f1 > f2 {
            b = x2;
        } else {
            a = x1;
        }
        if (b - a).abs() <= 1e-12 * b.abs().max(1.0) {
            break;
        }
    }
    best
}
