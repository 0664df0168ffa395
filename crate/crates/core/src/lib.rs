//! Two-dimensional scalar transport on logically rectangular, distorted
//! planar meshes.
//!
//! Two conservative schemes are provided:
//!
//! * a dimensionally split scheme built from one-dimensional PPM with the
//!   long time-step flux-form semi-Lagrangian extension ([`ppm1d`]) and
//!   COSMIC splitting with Jacobian weighting ([`cosmic`]);
//! * a genuinely multi-dimensional method-of-lines scheme using an
//!   upwind-biased cubic least-squares reconstruction with Crank-Nicolson
//!   (deferred correction) or Heun time-stepping ([`mol`]), whose implicit
//!   systems are solved with DILU-preconditioned bi-conjugate gradients
//!   ([`linsolve`]).
//!
//! [`harness`] defines the solid body rotation, orography and deformational
//! flow test cases together with error norms, cost accounting and the run
//! driver behind the `advecta` command-line tool.

pub mod cosmic;
pub mod error;
pub mod field;
pub mod harness;
pub mod linsolve;
pub mod mesh;
pub mod mol;
pub mod ppm1d;
pub mod velocity;

pub use error::{Error, Result};
pub use field::{Field2D, Vec2};
