//! Weighted, uniform-in-bandwidth kernel density estimation.
//!
//! The crate is `no_std` (with `alloc`) and holds the numerical core:
//!
//! - [`kernel`]: compactly supported product kernels on `[-1/2, 1/2]^d` and their validation.
//! - [`model`] and [`weight`]: analytic densities with exact samplers, and weight functions `ψ`.
//! - [`conditions`]: grid auditors for the regularity and tail conditions.
//! - [`bandwidth`] and [`selector`]: the bandwidth window `[a_n, b_n]`, rate functions,
//!   dyadic and geometric bandwidth grids, and window-clamped selectors.
//! - [`deviation`]: brute-force and fast estimators, evaluation grids restricted to the
//!   weighted region, the weighted sup-norm deviation and its uniform-in-bandwidth maximum.
//! - [`functional`]: plug-in estimation of `∫φ(f)` with the weighted sup-norm error bound.
//!
//! IO, parallel experiments and the command line live in the `wkde-lab` crate.

#![no_std]
// negated float comparisons are how NaN gets rejected; index loops walk parallel coordinate arrays
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;

pub mod bandwidth;
pub mod centering;
pub mod conditions;
pub mod deviation;
pub mod error;
pub mod estimator;
pub mod functional;
pub mod kernel;
pub mod model;
pub mod quadrature;
pub mod sample;
pub mod selector;
pub mod weight;

pub use bandwidth::{BandwidthWindow, SlowlyVarying};
pub use error::{Error, Result};
pub use kernel::{Kernel, KernelFamily};
pub use model::{BoxRegion, Density, DensityModel};
pub use sample::{Sample, StreamId};
pub use selector::BandwidthSelector;
pub use weight::WeightFunction;
