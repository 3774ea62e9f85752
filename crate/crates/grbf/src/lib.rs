//! Gaussian radial basis functions as a Galerkin trial space.
//!
//! Every integral the method needs (mass, stiffness, Whitney-form matrices and
//! forcing projections) is a Gaussian product times a polynomial, so assembly
//! is exact and quadrature-free. The crate builds and solves those systems and
//! trains the Gaussians' means and covariances against data.

pub mod error;
pub mod forcing;
pub mod galerkin;
pub mod gaussian;
pub mod linalg;
pub mod moments;
pub mod optim;
pub mod oracles;
pub mod poly;
pub mod problems;
pub mod selftest;
pub mod tensor;
pub mod training;
pub mod whitney;

pub use error::{Error, Result};
pub use gaussian::{product, Gaussian, WeightedGaussian};
pub use tensor::DenseTensor;
pub use whitney::{Basis, Domain};
