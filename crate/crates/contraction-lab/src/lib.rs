//! contraction-lab: a numerical laboratory for products of decreasing
//! sequences of positive contractions.
//!
//! Given `I >= T_1 >= T_2 >= ... >= 0` on a finite-dimensional real inner
//! product space, the products `S_n = T_n ... T_1` converge strongly to the
//! spectral projection `P` of the limit at eigenvalue 1, and the same holds
//! for generalized products `S_n^sigma = T_sigma(n) ... T_sigma(1)` under
//! proper reorderings in the cases this crate checks. The crate provides:
//!
//! - [`symmat`]: dense symmetric-matrix core (Jacobi eigensolver, Loewner
//!   comparisons, spectral calculus, the `S^{1/2} = x T^{1/2}` primitive);
//! - [`seqgen`]: seeded generators of decreasing chains and chain
//!   factorization;
//! - [`rotation2d`]: the explicit 2x2 chain whose product rotates `e1`
//!   toward the `e2` axis, with all per-step bounds;
//! - [`products`]: proper reorderings, products, and convergence traces;
//! - [`diagnostics`]: the `f_k` family, dissipation inequality, rate bound,
//!   spectral gap, summability, and norm-convergence checks;
//! - [`harness`]: experiment configs, sweeps, CSV traces, SVG plots.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod products;
pub mod rng;
pub mod rotation2d;
pub mod seqgen;
pub mod symmat;

pub use error::{Error, Result};
