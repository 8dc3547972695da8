//! Spectral-Galerkin simulator and experiment harness for slow-fast
//! semilinear parabolic SPDEs on (0,1) with Dirichlet boundary conditions.
//!
//! The slow component follows
//! `dX = AX dt + F(X, Y(t / epsilon)) dt + dW^Q`, where `A` is the
//! Dirichlet Laplacian, `F` a Nemytskii nonlinearity and `W^Q` a diagonal
//! Q-Wiener process; the fast component `Y` is a linear
//! Ornstein-Uhlenbeck process with closed-form invariant law. As
//! `epsilon -> 0` the slow component approaches the averaged equation
//! `dX = AX dt + F_bar(X) dt + dW^Q`, and the crate measures the strong
//! and weak rates of that convergence, plus the behaviour of a multiscale
//! macro/micro scheme whose macro step does not resolve `epsilon`.
//!
//! Modules:
//! - [`spectral`]: eigenbasis, fields, diagonal operator calculus;
//! - [`forcing`]: Q-Wiener covariances and deterministic noise streams;
//! - [`fast`]: the fast OU process, its micro-scheme and invariant laws;
//! - [`reaction`]: nonlinearities and closed-form averaged coefficients;
//! - [`schemes`]: direct, averaged and multiscale time integrators;
//! - [`poisson`]: numerical probes of the corrector equation;
//! - [`harness`]: Monte Carlo error estimation and rate regression.

pub mod error;
pub mod exec;
pub mod fast;
pub mod forcing;
pub mod harness;
pub mod poisson;
pub mod quad;
pub mod reaction;
pub mod schemes;
pub mod spectral;

pub use error::{Result, SimError};
