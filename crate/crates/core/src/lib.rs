//! Stein kernels and density representation for nonlinear statistics of
//! independent random variables.
//!
//! A statistic `T(X_1, ..., X_n)` of independent inputs with connected
//! supports is paired with a decomposition `T - E[T] = h_1 + ... + h_m`.
//! From it the crate builds the kernel
//!
//! ```text
//! Theta(X) = sum_k d_k T(X) * L_k h_k(X),   L_k h(x) = int_x^b h(y) p_k(y) dy / p_k(x)
//! ```
//!
//! which satisfies `E[g(T) T] = E[g'(T) Theta]` for smooth `g`. Its
//! conditional mean `theta(t) = E[Theta | T = t]` decides whether `T` has a
//! density (it does iff `theta(T) > 0` almost surely) and reconstructs it:
//!
//! ```text
//! p_T(x) = c / theta(x) * exp(-int_0^x u / theta(u) du)
//! ```
//!
//! The crate is `no_std` and only needs `alloc`. Threading, file formats and
//! the command-line front end live in the `stein-density` crate.
//!
//! Module map:
//!
//! - [`distributions`]: input laws (uniform, standard normal, Curie-Weiss,
//!   tabulated) with density, CDF, quantile and sampling.
//! - [`expressions`]: parser and evaluator for scalar functions of
//!   `x1..xn`, with forward-mode partial derivatives.
//! - [`decomposition`]: explicit and martingale decompositions and their
//!   validation.
//! - [`stein`]: covariance kernel, the `L_k` operator and `Theta`.
//! - [`conditional`]: Monte Carlo collection and binned estimation of
//!   `theta(t)`.
//! - [`density`]: existence verdicts, reconstruction, envelopes and the
//!   inverse relation `theta = phi / p`.
//! - [`reference`]: closed-form densities used as oracles.

#![no_std]
#![warn(missing_debug_implementations)]
// f64 methods come from `Float` in pure no_std builds and are inherent
// whenever std is linked into the build graph.
#![allow(unused_imports)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod conditional;
pub mod decomposition;
pub mod density;
pub mod distributions;
mod error;
pub mod expressions;
pub mod quadrature;
pub mod reference;
pub mod rng;
pub mod stats;
pub mod stein;

pub use error::{Error, Result};
