//! Gauge functions and atomic norms for atom sets defined by matrix pencils.
//!
//! An atom set is `𝒜 = {a : (μG − νF) a = 0, (μ,ν) ∈ 𝒞}` for a pencil
//! `(F, G)` and a curve segment `𝒞` of the closed complex plane. Its gauge
//! is a semidefinite program in a matrix `X = Σ a_k a_k^H`, and every
//! feasible `X` decomposes constructively back into atoms.
//!
//! Modules, bottom up:
//!
//! - [`numkern`]: dense complex linear algebra.
//! - [`region`]: curves and segments as Hermitian 2×2 forms.
//! - [`pencil`]: pencil families, atom bases and the LMI maps.
//! - [`decomp`]: connectors, pair factorization and atomic decomposition.
//! - [`conic`]: a self-contained conic interior-point solver.
//! - [`gauge`]: program builders, gauge values and dual certificates.
//! - [`apps`]: covariance fitting, robust line spectra, DOA and MMV drivers.
//!
//! ```
//! use pencil_gauge::decomp::{caratheodory_toeplitz, vandermonde};
//! use pencil_gauge::numkern::CMat;
//!
//! let n = 6;
//! let mut x = CMat::zeros(n, n);
//! for w in [-1.0, 0.7] {
//!     let a = vandermonde(n, w);
//!     x += &a * a.adjoint();
//! }
//! let d = caratheodory_toeplitz(&x).unwrap();
//! assert_eq!(d.len(), 2);
//! ```

pub mod numkern;
pub mod region;
pub mod pencil;
pub mod decomp;
pub mod conic;
pub mod gauge;
pub mod apps;
