use serde::{Deserialize, Serialize};

/// A point in the state space of a chain.
///
/// Scalar and lattice states cover the usual one-dimensional chains; the
/// `Dom` variant is the pair state `(z, m)` of the dominating process, where
/// `z` is the level and `m` counts down the steps until the next jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum State {
    Scalar(f64),
    Lattice(i64),
    Dom { z: f64, m: u32 },
}

impl State {
    /// Principal real coordinate: the scalar value, the lattice point as a
    /// float, or the level `z` of a pair state. Scale functions and set
    /// predicates built from config descriptors key on this.
    pub fn coord(&self) -> f64 {
        match *self {
            State::Scalar(v) => v,
            State::Lattice(n) => n as f64,
            State::Dom { z, .. } => z,
        }
    }

    /// Countdown coordinate of a pair state, if any.
    pub fn countdown(&self) -> Option<u32> {
        match *self {
            State::Dom { m, .. } => Some(m),
            _ => None,
        }
    }

    pub fn lattice(&self) -> Option<i64> {
        match *self {
            State::Lattice(n) => Some(n),
            _ => None,
        }
    }
}

impl std::fmt::Display for State {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            State::Scalar(v) => write!(f, "{v}"),
            State::Lattice(n) => write!(f, "{n}"),
            State::Dom { z, m } => write!(f, "({z},{m})"),
        }
    }
}
