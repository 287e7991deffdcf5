//! Reconstruction of the radiativity coefficient `q` in
//! `−∇·(a∇u) + qu = f` and its parabolic counterpart from noisy interior
//! data, by Tikhonov regularization with exact discrete adjoint gradients,
//! together with the numerical probes used to study stability estimates,
//! variational source conditions and convergence rates.

pub mod analysis;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod inverse;
pub mod linalg;
pub mod parabolic;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{BoundaryValues, EdgeVectorField, Grid, NormKind, ScalarField};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
