//! Equivariant Lagrangian mean curvature flow in C².
//!
//! A rotationally symmetric Lagrangian surface `L = {(γ cos α, γ sin α)}` is
//! determined by its profile curve `γ` in the complex plane, and mean curvature
//! flow of `L` reduces to the curve evolution `dz/dt = k − z⊥/|z|²`. This crate
//! discretizes that evolution (graph, radial and closed parametrizations),
//! evaluates the monotone quantities that control it (Gaussian densities,
//! weighted angle moments), and analyzes the finite-time singularities it
//! develops through parabolic rescaling.
//!
//! Module map:
//!
//! * [`geometry`]: curve snapshots and pointwise quantities of the induced surface.
//! * [`flow`]: explicit method-of-lines stepping and the run loop.
//! * [`monotonicity`]: backward heat kernel, densities, rescaling.
//! * [`singularity`]: blow-up detection, singular time estimate, tangent-flow report.
//! * [`monitors`]: residuals of the evolution identities and shape invariants.
//! * [`io`]: snapshot JSON and CSV formats.

// `!(x > 0.0)` is used on purpose: it also rejects NaN. Index loops mirror
// the stencil formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod exec;
pub mod flow;
pub mod geometry;
pub mod interp;
pub mod io;
pub mod monitors;
pub mod monotonicity;
pub mod quad;
pub mod singularity;
pub mod stencil;

pub use error::{Error, Result};
pub use exec::Executor;
pub use geometry::{CurveSnapshot, Mode};

pub use num_complex::Complex64 as C64;
