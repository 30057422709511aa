//! Proxy surface interpolative decomposition for 3D Laplace kernel matrices.
//!
//! For source points `X0` in a ball `B(0, r1)` and target points `Y0` outside
//! the concentric sphere `Γ = ∂B(0, r2)`, the row ID of `K(X0, Y0)` is taken
//! from a row ID of the much smaller `K(X0, Yp)`, where `Yp` is an
//! equal-weight spherical design on `Γ`:
//!
//! ```text
//! K(X0, Yp) ≈ U K(Xrep, Yp)   ⇒   K(X0, Y0) ≈ U K(Xrep, Y0)
//! ```
//!
//! When the design integrates spherical polynomials of degree `2c` exactly,
//! the pointwise error of every row over the whole far field is bounded by a
//! computable quantity; see [`proxy::bound_proposition`].
//!
//! Modules:
//! - [`geometry`], [`kernel`], [`sampling`], [`matrix`]: shared plumbing
//! - [`harmonics`]: real spherical harmonics and the multipole expansion
//! - [`design`]: spherical design loading, certification and generation
//! - [`lowrank`]: strong rank-revealing QR and the row ID
//! - [`proxy`]: the proxy surface method and its error bounds

pub mod design;
pub mod error;
pub mod geometry;
pub mod harmonics;
pub mod kernel;
pub mod lowrank;
pub mod matrix;
pub mod proxy;
pub mod sampling;

pub use error::{Error, Result};
pub use geometry::{Point3, PointSet, RunConfig, ShellGeometry};
pub use matrix::DenseMatrix;
