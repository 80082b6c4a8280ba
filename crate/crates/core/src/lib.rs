//! Backward (scattering) solver for the one-dimensional Vlasov-Poisson system
//! with massless electrons on the torus.
//!
//! Given an asymptotic state `f*`, the crate iterates
//! `E_0 = 0 -> f_1 -> rho_1 -> E_1 -> f_2 -> ...`, where each `f_{n+1}` is the
//! pullback of `f*` along characteristics of `E_n` that become free at
//! `t -> infinity`, and each field is split into a linear part (convolution of
//! the density with the periodic Green's function) and a nonlinear
//! Boltzmann-electron correction solved by damped Newton.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. With `std`, density columns and Poisson slices are computed in
//! parallel; summation order is fixed either way, so results are bitwise
//! identical.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > y)` rejects NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod math;

pub mod characteristics;
pub mod datum;
pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod poisson;
pub mod scheme;
pub mod spline;
pub mod tridiag;

pub use characteristics::{FieldHistory, Flow, ForceField, PhaseLabel, PhasePoint, TimeGrid};
pub use datum::{AsymptoticDatum, ClassParameters, Family, TabulatedGrid, ValidationReport};
pub use error::{Error, Result};
pub use poisson::{FieldSlice, NewtonOptions, SpatialGrid};
pub use scheme::{DensityHistory, Mode, SchemeConfig, SchemeResult, VelocityGrid};
