//! Small family of test chains with known stability behaviour.

use crate::kernel::Kernel;
use crate::rng::RngStream;
use crate::state::State;

/// The identity kernel on the integer lattice: `Phi_{n+1} = Phi_n`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityKernel;

impl Kernel for IdentityKernel {
    fn sample(&self, x: &State, _rng: &mut RngStream) -> State {
        *x
    }

    fn contains(&self, x: &State) -> bool {
        x.lattice().is_some() || matches!(x, State::Scalar(_))
    }

    fn transition_support(&self, x: &State) -> Option<Vec<(State, f64)>> {
        Some(vec![(*x, 1.0)])
    }
}

/// Birth-death chain on `{0, 1, 2, ...}` with upward probability
/// `p(x) = clamp(1/2 - d/(x+1), 0, 1/2)` and reflection at 0.
///
/// For `d` large enough the inward drift `-2d/(x+1)` balances the diffusion
/// term of polynomial Lyapunov functions, making the chain polynomially
/// ergodic. It is the workhorse for exact drift verification: the one-step
/// expectation is a two-point sum.
#[derive(Debug, Clone, Copy)]
pub struct BirthDeathChain {
    pub d: f64,
}

impl BirthDeathChain {
    pub fn new(d: f64) -> Self {
        BirthDeathChain { d }
    }

    pub fn p_up(&self, x: i64) -> f64 {
        (0.5 - self.d / (x as f64 + 1.0)).clamp(0.0, 0.5)
    }
}

impl Kernel for BirthDeathChain {
    fn sample(&self, x: &State, rng: &mut RngStream) -> State {
        let n = x.lattice().expect("birth-death state must be a lattice point");
        if rng.bernoulli(self.p_up(n)) {
            State::Lattice(n + 1)
        } else {
            State::Lattice((n - 1).max(0))
        }
    }

    fn contains(&self, x: &State) -> bool {
        matches!(x.lattice(), Some(n) if n >= 0)
    }

    fn transition_support(&self, x: &State) -> Option<Vec<(State, f64)>> {
        let n = x.lattice()?;
        let p = self.p_up(n);
        let down = State::Lattice((n - 1).max(0));
        if p == 0.0 {
            Some(vec![(down, 1.0)])
        } else {
            Some(vec![(State::Lattice(n + 1), p), (down, 1.0 - p)])
        }
    }
}

/// Deterministic cycle `0 -> 1 -> ... -> n-1 -> 0` on the lattice.
#[derive(Debug, Clone, Copy)]
pub struct CycleKernel {
    pub period: i64,
}

impl Kernel for CycleKernel {
    fn sample(&self, x: &State, _rng: &mut RngStream) -> State {
        let n = x.lattice().expect("cycle state must be a lattice point");
        State::Lattice((n + 1) % self.period)
    }

    fn contains(&self, x: &State) -> bool {
        matches!(x.lattice(), Some(n) if (0..self.period).contains(&n))
    }

    fn transition_support(&self, x: &State) -> Option<Vec<(State, f64)>> {
        let n = x.lattice()?;
        Some(vec![(State::Lattice((n + 1) % self.period), 1.0)])
    }
}

/// Strictly outward-drifting walk on the lattice, `x -> x+1` surely.
/// Useful as a counterexample chain.
#[derive(Debug, Clone, Copy, Default)]
pub struct DriftAwayKernel;

impl Kernel for DriftAwayKernel {
    fn sample(&self, x: &State, _rng: &mut RngStream) -> State {
        State::Lattice(x.lattice().unwrap() + 1)
    }

    fn contains(&self, x: &State) -> bool {
        x.lattice().is_some()
    }

    fn transition_support(&self, x: &State) -> Option<Vec<(State, f64)>> {
        Some(vec![(State::Lattice(x.lattice()? + 1), 1.0)])
    }
}

/// Pre-calibrated parameters for the birth-death chain under the
/// phi-subgeometric drift `PV <= V - phi(V) + b 1_C` with
/// `V = (x+1)^8` and `phi(t) = c t^{3/4}`.
///
/// Produced by running the exact verifier over `x = 0..10^4`; see the
/// calibration test in `drift.rs`.
#[derive(Debug, Clone, Copy)]
pub struct BirthDeathCalibration {
    pub d: f64,
    pub v_exponent: f64,
    pub phi_c: f64,
    pub phi_exponent: f64,
    pub b: f64,
    pub c_threshold: i64,
}

impl BirthDeathCalibration {
    pub fn shipped() -> Self {
        BirthDeathCalibration {
            d: 2.0,
            v_exponent: 8.0,
            phi_c: 1.0,
            phi_exponent: 0.75,
            b: 1.0,
            c_threshold: 0,
        }
    }
}
