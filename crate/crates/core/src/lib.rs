//! Information-geometric optimization (IGO) with Gaussian distributions, the
//! rank-μ update CMA-ES, driven by a surrogate objective whose use is gated
//! on a correlation measure against the true objective.
//!
//! The crate is `no_std` with `alloc`. The `std` feature adds
//! `std::error::Error` plumbing and the [`surrogate::Serialized`] wrapper; the
//! `parallel` feature fans Monte-Carlo replicates out over rayon. Results are
//! identical with and without `parallel`: every replicate draws from its own
//! counter-based stream and reductions run in index order.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`ranking`] | weight schemes, rank counts, tie-averaged utilities |
//! | [`utility`] | the utility polynomial `u(p)` and the constants `L_u`, `M_w`, `U_u` |
//! | [`gaussian`] | Gaussian parameters, natural-gradient steps, quadratic closed forms |
//! | [`correlation`] | Kendall τ-b, Pearson on weights, population estimators, `K_w` |
//! | [`surrogate`] | synthetic surrogate family, correlation gate, admissible thresholds |
//! | [`harness`] | Monte-Carlo bound and identity checks, drift trajectories |
//! | [`experiment`] | experiment configuration and the verification suite |

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod correlation;
pub mod error;
pub mod experiment;
pub mod gaussian;
pub mod harness;
mod math;
pub mod objective;
mod par;
pub mod ranking;
pub mod rng;
pub mod surrogate;
pub mod utility;

pub use correlation::{CorrelationEstimate, CorrelationKind};
pub use error::{Error, Result};
pub use gaussian::{GaussianParams, NaturalGradientStep, QuadraticObjective};
pub use harness::{BoundCheckReport, DriftRecord, Verdict};
pub use objective::Evaluate;
pub use ranking::{RankCounts, WeightScheme};
pub use rng::StreamKey;
pub use surrogate::{GateDecision, SurrogateSpec};
pub use utility::UtilityPolynomial;

/// Largest supported population size λ.
pub const MAX_LAMBDA: usize = 256;
