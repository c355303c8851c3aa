//! Dense kernels, the primitive layers with their analytic gradients, Adam, and
//! a finite-difference gradient oracle.

mod adam;
pub mod gradcheck;
mod layers;
mod matrix;
mod params;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{relu_backward, relu_forward, AffineLayer, ReluMask};
pub use matrix::{axpy, dot, DenseMatrix};
pub use params::ParamSet;
