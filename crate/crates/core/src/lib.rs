//! Entropy bounds for invariant measures of diffusions whose driving noise
//! carries a state-dependent drift.
//!
//! - [`numkit`]: dense numerical kernel (eigen, Lyapunov, H∞, roots, quadrature, RNG)
//! - [`lingauss`]: exact linear-Gaussian analysis
//! - [`cgf_bounds`]: CGF-based relative entropy bound machinery
//! - [`scalar_fpk`]: 1-D stationary Fokker–Planck verification bed
//! - [`sde_sim`]: Euler–Maruyama Monte Carlo cross-checks

// Index loops mirror the textbook kernels; negated comparisons are how NaN is rejected.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod cgf_bounds;
pub mod lingauss;
pub mod numkit;
pub mod scalar_fpk;
pub mod sde_sim;
