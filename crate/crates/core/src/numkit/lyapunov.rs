//! Continuous-time algebraic Lyapunov equations and the stability and
//! controllability gates around them.

use super::eig::{singular_values, spectral_abscissa};
use super::{Lu, Matrix, NumError, Result};

/// `true` iff every eigenvalue of `a` has negative real part.
pub fn is_hurwitz(a: &Matrix) -> Result<bool> {
    if !a.is_square() {
        return Err(NumError::NonSquare(a.rows(), a.cols()));
    }
    if a.rows() > 64 {
        return Err(NumError::DimensionMismatch(format!(
            "stability test limited to order 64, got {}",
            a.rows()
        )));
    }
    Ok(spectral_abscissa(a)? < 0.0)
}

/// Kalman rank test on `[B, AB, …, Aⁿ⁻¹B]`, with rank judged against
/// `n·ε·σ_max`.
pub fn is_controllable(a: &Matrix, b: &Matrix) -> Result<bool> {
    if !a.is_square() {
        return Err(NumError::NonSquare(a.rows(), a.cols()));
    }
    let n = a.rows();
    if b.rows() != n {
        return Err(NumError::DimensionMismatch(format!(
            "B has {} rows, A is {n}x{n}",
            b.rows()
        )));
    }
    let m = b.cols();
    let mut ctrb = Matrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        for i in 0..n {
            for j in 0..m {
                ctrb[(i, k * m + j)] = block[(i, j)];
            }
        }
        if k + 1 < n {
            block = a * &block;
        }
    }
    let sv = singular_values(&ctrb)?;
    let smax = sv[0];
    if smax == 0.0 {
        return Ok(false);
    }
    let thresh = n as f64 * f64::EPSILON * smax;
    Ok(sv.iter().filter(|&&s| s > thresh).count() == n)
}

/// Solves `A P + P Aᵀ + Q = 0` for Hurwitz `A` through the Kronecker
/// system `(I⊗A + A⊗I) vec P = −vec Q`.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(NumError::NonSquare(a.rows(), a.cols()));
    }
    if !q.is_square() {
        return Err(NumError::NonSquare(q.rows(), q.cols()));
    }
    let n = a.rows();
    if q.rows() != n {
        return Err(NumError::DimensionMismatch(format!(
            "A is {n}x{n} but Q is {}x{}",
            q.rows(),
            q.cols()
        )));
    }
    let asym = q.asymmetry();
    if asym > 1e-12 {
        return Err(NumError::NotSymmetric(asym));
    }
    let abscissa = spectral_abscissa(a)?;
    if abscissa >= 0.0 {
        return Err(NumError::NotHurwitz(abscissa));
    }

    // Row-major vec: index i*n + j holds P[i][j].
    // (A P)[i][j] = Σ_k A[i][k] P[k][j];  (P Aᵀ)[i][j] = Σ_k P[i][k] A[j][k].
    let nn = n * n;
    let mut kron = Matrix::zeros(nn, nn);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                kron[(row, k * n + j)] += a[(i, k)];
                kron[(row, i * n + k)] += a[(j, k)];
            }
        }
    }
    let rhs = Matrix::from_fn(nn, 1, |r, _| -q.as_slice()[r]);
    let sol = Lu::factor(&kron)?.solve(&rhs)?;
    let p = Matrix::new(n, n, sol.as_slice().to_vec())?;
    Ok(p.symmetrize())
}

/// `‖A P + P Aᵀ + Q‖_F`.
pub fn lyapunov_residual(a: &Matrix, p: &Matrix, q: &Matrix) -> f64 {
    let ap = a * p;
    let r = ap.add(&ap.transpose()).and_then(|m| m.add(q));
    r.map_or(f64::INFINITY, |m| m.frobenius_norm())
}
