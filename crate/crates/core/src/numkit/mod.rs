//! Small self-contained dense numerical kernel.
//!
//! Everything here works on modest orders (tens of states) and favours
//! simple, verifiable algorithms: cyclic Jacobi for symmetric spectra,
//! Francis double-shift QR for general spectra, Kronecker-vectorised
//! Lyapunov solves, and Hamiltonian bisection for H∞ norms.

mod eig;
mod hinf;
mod lyapunov;
mod matrix;
mod quad;
mod rng;
mod roots;

use thiserror::Error;

pub use eig::{
    eigenvalues, logdet_spd, singular_values, spectral_abscissa, sqrt_psd, sym_eig, sym_eig_with,
    Complex, SymEig,
};
pub(crate) use hinf::complex_embedding;
pub use hinf::{hinf_norm, hinf_norm_with, sigma_max_at, transfer_at, HinfOptions};
pub use lyapunov::{is_controllable, is_hurwitz, lyapunov_residual, solve_lyapunov};
pub use matrix::{Lu, Matrix};
pub use quad::{integrate_adaptive, integrate_adaptive_with};
pub use rng::{gaussian_stream, RngStream};
pub use roots::find_root_increasing;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumError {
    #[error("matrix is not square ({0}x{1})")]
    NonSquare(usize, usize),

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("matrix is not Hurwitz (spectral abscissa {0:e})")]
    NotHurwitz(f64),

    #[error("linear system is numerically singular: {0}")]
    SingularSystem(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("root is not bracketed: f({lo}) = {f_lo:e}, f({hi}) = {f_hi:e}")]
    BadBracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("adaptive quadrature exceeded maximum depth on [{0}, {1}]")]
    MaxDepth(f64, f64),
}

pub type Result<T> = std::result::Result<T, NumError>;
