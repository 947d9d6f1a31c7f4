//! Spectral Galerkin toolkit for problems whose boundary conditions do not
//! admit an orthogonal trial basis.
//!
//! A Galerkin problem `P_V(A v - f) = 0, v in V` is solved by first solving
//! the cheaper problem in an enclosing space `W` (all Chebyshev polynomials up
//! to a fixed degree) and then applying a low-rank correction built once per
//! operator from an orthonormal basis of the orthogonal complement of `V`.
//!
//! On top of the 1D machinery sits a Fourier–Chebyshev magnetoconvection
//! simulator for a rotating plane layer (Navier–Stokes, induction and heat
//! equations) with explicit Euler, RK4 and implicit-explicit Euler stepping.
//!
//! Module map:
//! - [`chebyshev`]: series, inner products, recurrences, boundary functionals
//! - [`galerkin`]: constraint sets, complement bases, the correction step
//! - [`solvers`]: boundary projection, Helmholtz and fourth-order solvers
//! - [`transforms`]: Fourier/Chebyshev transforms and dealiased products
//! - [`fields`]: toroidal–poloidal–mean decomposition and boundary constraints
//! - [`mhd`]: the magnetoconvection model and time steppers
//! - [`config`], [`checkpoint`], [`driver`]: batch-run plumbing

pub mod checkpoint;
pub mod chebyshev;
pub mod config;
pub mod driver;
mod error;
pub mod fields;
pub mod galerkin;
pub mod mhd;
mod scalar;
pub mod solvers;
pub mod transforms;

pub use chebyshev::ChebSeries;
pub use error::{Error, Result};
pub use scalar::Scalar;

pub use num_complex::Complex64;
