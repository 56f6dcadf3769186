//! Parametric finite element schemes for curve shortening flow and mean
//! curvature flow, reparametrized by a harmonic map heat flow (the DeTurck
//! trick) so that the discrete flows carry a controllable tangential motion.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! file system (mesh formats, CSV output, experiment configuration) lives in
//! the companion `curvflow` crate.
//!
//! Layout:
//!
//! * [`mesh`]: polygonal curves, closed triangulated surfaces, shape
//!   generators and per-element geometry.
//! * [`fem`]: block sparse assembly, iterative solvers and a dense LU oracle.
//! * [`csf`]: curve steppers (the α-family and the BGN fixed point scheme).
//! * [`mcf`]: surface steppers (transport-form DeTurck, divergence-form
//!   DeTurck and the BGN benchmark).
//! * [`diagnostics`]: mesh quality, closed-form error measurement and EOC.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod csf;
pub mod diagnostics;
mod error;
pub mod fem;
pub mod math;
pub mod mcf;
pub mod mesh;

pub use error::{Error, Result};
