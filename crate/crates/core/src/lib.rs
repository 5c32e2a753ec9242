//! Stability certification for Markov chains via state-dependent
//! Foster-Lyapunov drift conditions.
//!
//! The library verifies drift inequalities over state grids (exactly where
//! the kernel allows, by Monte Carlo elsewhere), plans state-dependent
//! subsampling schedules from convergence rates, estimates modulated
//! return-time moments, classifies tame chains, and implements the
//! dominating process used in perfect simulation of tame chains.
//!
//! A quick taste — solving for the tameness exponent bound and building a
//! subsampling plan:
//!
//! ```
//! use driftcert::domproc::alpha_beta;
//! use driftcert::rates::{gen_inverse, RateSeq};
//!
//! // the largest admissible moment exponent for beta = e^{-2}
//! let ab = alpha_beta((-2.0f64).exp()).unwrap();
//! assert!((ab - 0.7968).abs() < 1e-3);
//!
//! // generalized inverse of r(k) = k: smallest k with r(k) >= 4.2
//! assert_eq!(gen_inverse(&RateSeq::linear(), 4.2), 5);
//! ```

pub mod domproc;
pub mod drift;
pub mod engine;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod moments;
pub mod planner;
pub mod rates;
pub mod rng;
pub mod scale;
pub mod state;
pub mod zoo;

pub use engine::{Estimate, McEngine, StoppingKind, StoppingRecord, StoppingValue, Trajectory};
pub use error::{CertError, Result};
pub use kernel::{FiniteKernel, Kernel};
pub use rng::RngStream;
pub use scale::{ScaleFn, SetPredicate, SubsampleFn};
pub use state::State;
