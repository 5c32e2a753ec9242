//! Scale (Lyapunov) functions, subsampling schedules and set predicates.
//!
//! Scale functions are stored in log-space: Lyapunov functions like
//! `V(x) = (x+1)^8` overflow `f64` long before the states of interest run
//! out, so every evaluation goes through `ln_eval` and `eval` is just its
//! exponential.

use crate::state::State;
use std::sync::Arc;

type LnFn = Arc<dyn Fn(&State) -> f64 + Send + Sync>;

/// A function `X -> [1, \infty)` used as a Lyapunov scale.
#[derive(Clone)]
pub struct ScaleFn {
    name: String,
    ln_f: LnFn,
}

impl ScaleFn {
    /// Build from a direct evaluator. Prefer [`ScaleFn::from_ln`] when the
    /// function can exceed ~1e300 on the grids of interest.
    pub fn new(name: impl Into<String>, f: impl Fn(&State) -> f64 + Send + Sync + 'static) -> Self {
        ScaleFn {
            name: name.into(),
            ln_f: Arc::new(move |x| f(x).ln()),
        }
    }

    /// Build from a log-space evaluator.
    pub fn from_ln(
        name: impl Into<String>,
        ln_f: impl Fn(&State) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScaleFn {
            name: name.into(),
            ln_f: Arc::new(ln_f),
        }
    }

    /// The constant function `c`.
    pub fn constant(c: f64) -> Self {
        ScaleFn::from_ln(format!("const({c})"), move |_| c.ln())
    }

    /// `V(x) = (coord(x) + shift)^exponent`.
    pub fn coord_power(shift: f64, exponent: f64) -> Self {
        ScaleFn::from_ln(format!("(x+{shift})^{exponent}"), move |x| {
            exponent * (x.coord() + shift).ln()
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &State) -> f64 {
        (self.ln_f)(x).exp()
    }

    pub fn ln_eval(&self, x: &State) -> f64 {
        (self.ln_f)(x)
    }

    /// Pointwise power `self^a`.
    pub fn powf(&self, a: f64) -> ScaleFn {
        let inner = self.ln_f.clone();
        ScaleFn::from_ln(format!("{}^{a}", self.name), move |x| a * inner(x))
    }

    /// Pointwise constant multiple `c * self`.
    pub fn scale(&self, c: f64) -> ScaleFn {
        let inner = self.ln_f.clone();
        ScaleFn::from_ln(format!("{c}*{}", self.name), move |x| c.ln() + inner(x))
    }
}

impl std::fmt::Debug for ScaleFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ScaleFn({})", self.name)
    }
}

/// A state-dependent subsampling schedule `n : X -> {1, 2, ...}`.
#[derive(Clone)]
pub struct SubsampleFn {
    name: String,
    f: Arc<dyn Fn(&State) -> u64 + Send + Sync>,
}

impl SubsampleFn {
    pub fn new(name: impl Into<String>, f: impl Fn(&State) -> u64 + Send + Sync + 'static) -> Self {
        SubsampleFn {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// The constant schedule `n(x) = c`.
    pub fn constant(c: u64) -> Self {
        SubsampleFn::new(format!("const({c})"), move |_| c)
    }

    /// The countdown coordinate of a pair state (the time until the next
    /// jump of the dominating process); 1 elsewhere.
    pub fn countdown() -> Self {
        SubsampleFn::new("countdown", |x| x.countdown().map_or(1, u64::from))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &State) -> u64 {
        (self.f)(x)
    }
}

impl std::fmt::Debug for SubsampleFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SubsampleFn({})", self.name)
    }
}

/// A measurable set, given by its membership test.
#[derive(Clone)]
pub struct SetPredicate {
    name: String,
    f: Arc<dyn Fn(&State) -> bool + Send + Sync>,
}

impl SetPredicate {
    pub fn new(name: impl Into<String>, f: impl Fn(&State) -> bool + Send + Sync + 'static) -> Self {
        SetPredicate {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// `{x : coord(x) <= hi}`.
    pub fn coord_le(hi: f64) -> Self {
        SetPredicate::new(format!("{{x <= {hi}}}"), move |x| x.coord() <= hi)
    }

    /// `{x : lo <= coord(x) <= hi}`.
    pub fn coord_range(lo: f64, hi: f64) -> Self {
        SetPredicate::new(format!("{{{lo} <= x <= {hi}}}"), move |x| {
            let c = x.coord();
            lo <= c && c <= hi
        })
    }

    /// The whole state space.
    pub fn everything() -> Self {
        SetPredicate::new("X", |_| true)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn contains(&self, x: &State) -> bool {
        (self.f)(x)
    }

    pub fn indicator(&self, x: &State) -> f64 {
        if self.contains(x) {
            1.0
        } else {
            0.0
        }
    }
}

impl std::fmt::Debug for SetPredicate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SetPredicate({})", self.name)
    }
}
