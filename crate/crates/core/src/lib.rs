//! A desk-scale large-deviations laboratory.
//!
//! The crate simulates stochastic integrals and differential equations driven
//! by three families of infinite-dimensional semimartingales — space-time
//! Gaussian white noise, Poisson random measures, and Markov-chain counting
//! measures — and checks the exponential decay rates of rare-event
//! probabilities against numerically computed rate functions
//! (Fenchel–Legendre transforms, Schilder and Lévy path actions,
//! Donsker–Varadhan occupation costs).
//!
//! Everything is discretized: mark spaces become finite cell decompositions,
//! time becomes a uniform grid on `[0, T]`, and randomness comes from
//! counter-based streams so that parallel Monte Carlo is reproducible
//! bit-for-bit regardless of scheduling.

// `!(x > 0.0)` rejects NaN along with the out-of-range values; `x <= 0.0`
// would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod drivers;
pub mod error;
pub mod grid;
pub mod integrate;
pub mod mc;
pub mod orlicz;
pub mod rate;
pub mod sde;
pub mod space;
pub mod stream;

pub use error::{Error, Result};
pub use grid::{uniform_metric, CadlagPath, Interpolation, TimeGrid};
pub use space::{integrate_measure, DiscreteMeasureSpace, GridFunction};
pub use stream::RandomStream;
