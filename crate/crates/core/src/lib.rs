//! Gaussian approximation of `k`-dimensional marginals of symmetric convex
//! bodies.
//!
//! * [`rng`], [`config`]: deterministic splittable randomness and the
//!   configurable universal constants.
//! * [`frames`]: Walsh, Haar, and coordinate frames and their functionals.
//! * [`bodies`]: isotropic samplers, regular-simplex geometry, and moment checks.
//! * [`stein`]: reflection and transposition exchangeable pairs, Stein
//!   conditions, Monte-Carlo error terms, and bound calculators.
//! * [`gauss`]: 1-D smoothing inequalities on grids.
//! * [`metrics`]: empirical `W1`, Kolmogorov, and histogram TV distances.
//! * [`harness`]: parameter sweeps and CSV output.

pub mod bodies;
pub mod config;
pub mod error;
pub mod frames;
pub mod gauss;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod stats;
pub mod stein;

pub use config::ConstantsConfig;
pub use error::{MgError, Result};
pub use rng::{substream, RandomStream};
