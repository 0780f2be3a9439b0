//! Simulation laboratory for the log-gamma directed polymer and the
//! associated random operator on the honeycomb lattice.
//!
//! The crate is organized around six subsystems:
//!
//! * [`specialfn`] — digamma/polygamma series and the model constants
//!   derived from them (critical shape parameter, scale functions).
//! * [`sampler`] — reproducible inverse-gamma weight fields with
//!   counter-based per-cell seeding.
//! * [`polymer`] — log-space dynamic programming for point-to-point,
//!   restricted and hexagon-constrained partition functions, and the
//!   maximal free energy over all start/end pairs.
//! * [`operator`] — the lower-triangular honeycomb adjacency block, its
//!   matrix-free solves, and the smallest-positive-eigenvalue estimate.
//! * [`tw`] — a GUE Tracy-Widom distribution evaluator (Airy-kernel
//!   Fredholm determinant) plus Kolmogorov-Smirnov utilities.
//! * [`harness`] — Monte Carlo phase-scan driver, growth-law fits, and
//!   CSV/JSON persistence.

pub mod error;
pub mod harness;
pub mod numeric;
pub mod operator;
pub mod polymer;
pub mod sampler;
pub mod specialfn;
pub mod tw;

pub use error::{Error, Result};
pub use operator::{SpectralResult, TriangularOperator};
pub use polymer::{Hexagon, LatticePoint, LogZGrid, MaxFreeEnergyResult};
pub use sampler::WeightField;
pub use specialfn::{PolymerParams, ScaleFunctions};
pub use tw::TwEvaluator;
