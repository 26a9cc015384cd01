//! Deterministic seeded numerics: dense matrices and counter-based random
//! streams.
//!
//! Two properties make everything above this module reproducible:
//!
//! 1. **Pinned summation order.** Every reduction (matrix products, norms,
//!    dot products) accumulates left to right in index order, so a result is
//!    a single well-defined `f64`, not "whatever the optimizer reassociated".
//! 2. **Counter-based randomness.** A draw is a pure function of
//!    `(seed, stream_id, counter)`. Any draw can be replayed in isolation,
//!    and parallel consumers get independent streams by construction instead
//!    of by carefully sequenced mutation.

mod matrix;
mod rng;

pub use matrix::{dot, l2_norm, Matrix};
pub use rng::{sample_gaussian, RngStream};
