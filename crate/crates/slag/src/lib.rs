//! Constructive numerical toolkit for the three-dimensional special
//! Lagrangian equation and the minimal surface system.
//!
//! The crate builds, exactly where exactness matters and by verified
//! sampling elsewhere:
//!
//! * truncated power-series potentials solving `sigma2(D^2 u) = 1` from
//!   polynomial Cauchy data ([`seed`], [`cksolve`]);
//! * U(3) rotations of the resulting Lagrangian graphs with pushforward
//!   Hessians and graph-condition checks ([`geometry`]);
//! * the inversion rotation backed by a monotone bisection / damped Newton
//!   gradient-map inverter ([`invert`]);
//! * end-to-end pipelines producing singular potentials, a priori estimate
//!   breaking smooth families, and the weak minimal-surface-system checks,
//!   with every quantitative property verified and reported ([`analysis`]);
//! * a reproducible command-line front end ([`cli`]).

pub mod analysis;
pub mod cksolve;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod invert;
pub mod mpoly;
pub mod numerics;
pub mod report;
pub mod seed;

pub use error::{Result, SlagError};
