//! Dense and Gaussian simulation of quantum Hamiltonian-based models.
//!
//! A model is a diagonal latent distribution pushed through a parameterized
//! unitary. The qubit path is simulated with dense density matrices, while the
//! bosonic and fermionic paths stay in covariance-matrix form.

pub mod densesim;
pub mod error;
pub mod hamiltonians;
pub mod latent;
pub mod gaussboson;
pub mod gaussfermion;
pub mod linalg;
pub mod matio;
pub mod optim;
pub mod parallel;
pub mod qhbm;
pub mod qnn;
pub mod rng;

pub use error::{QhbmError, Result};
