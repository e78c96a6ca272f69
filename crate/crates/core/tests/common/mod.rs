//! Independent oracles shared by the integration tests. Nothing here calls
//! into the crate's numerical kernel.

#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};
use noisebound::numkit::Matrix;

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Nodes and weights for `E f(Z)`, `Z ~ N(0, 1)`, by Newton iteration on
/// the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // weight e^{-x²} → standard normal
    let s = std::f64::consts::PI.sqrt();
    (
        x.iter().map(|v| v * 2f64.sqrt()).collect(),
        w.iter().map(|v| v / s).collect(),
    )
}

/// `E f(Z)` for `Z ~ N(0, I_d)` by tensor Gauss–Hermite.
pub fn gh_expect(dim: usize, nodes: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let (x, w) = gauss_hermite(nodes);
    let mut idx = vec![0usize; dim];
    let mut z = vec![0.0; dim];
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        for k in 0..dim {
            z[k] = x[idx[k]];
            weight *= w[idx[k]];
        }
        total += weight * f(&z);
        let mut k = 0;
        loop {
            if k == dim {
                return total;
            }
            idx[k] += 1;
            if idx[k] < nodes {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Lower Cholesky factor, plain loops.
pub fn cholesky(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().cholesky().expect("SPD").l()
}

/// `N (iωI − A)⁻¹ B` in complex arithmetic.
pub fn transfer(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, w: f64) -> DMatrix<Complex<f64>> {
    let n = a.nrows();
    let m = DMatrix::<Complex<f64>>::from_fn(n, n, |i, j| {
        Complex::new(-a[(i, j)], if i == j { w } else { 0.0 })
    });
    let bc = b.map(|v| Complex::new(v, 0.0));
    let x = m.lu().solve(&bc).expect("regular");
    c.map(|v| Complex::new(v, 0.0)) * x
}

pub fn sigma_max(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, w: f64) -> f64 {
    transfer(a, b, c, w).singular_values().max()
}

/// Continuous Lyapunov solve by Kronecker sums in nalgebra.
pub fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(a) + a.kronecker(&eye);
    // column-major vec
    let rhs = DMatrix::from_column_slice(n * n, 1, q.as_slice()).scale(-1.0);
    let v = k.lu().solve(&rhs).expect("regular");
    DMatrix::from_column_slice(n, n, v.as_slice())
}

/// `−(1/4π)∫ ln det(I − GG*) dω` by a dense trapezoid in `u = atan ω`.
pub fn qef_trapezoid(a: &DMatrix<f64>, b: &DMatrix<f64>, n: &DMatrix<f64>, points: usize) -> f64 {
    let m = n.nrows();
    let eye = DMatrix::<Complex<f64>>::identity(m, m);
    let top = std::f64::consts::FRAC_PI_2;
    let h = top / points as f64;
    let mut sum = 0.0;
    for i in 0..points {
        // the integrand vanishes at u = π/2
        let u = i as f64 * h;
        let w = u.tan();
        let g = transfer(a, b, n, w);
        let det = (&eye - &g * g.adjoint()).determinant();
        let val = det.re.ln() / u.cos().powi(2);
        sum += if i == 0 { 0.5 * val } else { val };
    }
    -sum * h / (2.0 * std::f64::consts::PI)
}
