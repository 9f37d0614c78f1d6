//! Pseudo-spectral simulation of two-dimensional periodic incompressible
//! viscoelastic flow, in deformation-tensor form `(u, F)` and rotation-strain
//! form `(u, V, θ)`, with checks of the identities linking the two.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod init;
pub mod integrator;
pub mod models;
pub mod output;
pub mod simulation;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use field::{GridField, ScalarField, SymTensorField, Tensor2Field, VectorField};
pub use grid::{Axis, Grid};
pub use tensor::Mat2;
