//! Simulator for `u_t + (−Δ)^s_g u = f(x, u)` on an interval: generalized N-function kernels,
//! nonlocal discretization, potential-well analysis and time integration.
//!
//! The numerical core is generic over the scalar type; the aliases below fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod field;
pub mod io;
pub mod linalg;
pub mod mesh_space;
pub mod nfunction;
pub mod operator;
#[doc(hidden)]
pub mod oracle;
pub mod quad;
pub mod roots;
pub mod sampler;
pub mod scalar;
pub mod source;
pub mod variational;

pub use error::{Error, Result};

pub type Kernel = nfunction::KernelFamily<f64>;
pub type Source = source::SourceFamily<f64>;
pub type Mesh = mesh_space::Mesh1D<f64>;
pub type Grid = mesh_space::GridFunction<f64>;
pub type Disc = mesh_space::Discretization<f64>;
pub type GalerkinProblem = operator::Problem<f64>;
pub type Field = field::Field<f64>;
