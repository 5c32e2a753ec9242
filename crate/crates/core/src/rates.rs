//! Convergence-rate sequences, the parametric moment-rate families and the
//! admissibility checkers that decide which rate a subsampling plan controls.

use crate::error::{CertError, Result};
use crate::scale::{ScaleFn, SubsampleFn};
use crate::state::State;
use serde::Serialize;
use std::sync::Arc;

/// Relative tolerance for the numerical convexity / log-concavity checks.
pub const SHAPE_TOL: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Discrete rate sequences r : N -> (0, \infty)
// ---------------------------------------------------------------------------

#[derive(Clone)]
enum SeqFamily {
    /// `r(k) = k`
    Linear,
    /// `r(k) = (k+1)^p`
    Polynomial { p: f64 },
    /// `r(k) = (1 + ln(1+k))^alpha`
    LogPower { alpha: f64 },
    Custom(Arc<dyn Fn(u64) -> f64 + Send + Sync>),
}

/// A non-decreasing rate sequence with `r(k) -> \infty`.
#[derive(Clone)]
pub struct RateSeq {
    family: SeqFamily,
    name: String,
}

impl RateSeq {
    pub fn linear() -> Self {
        RateSeq {
            family: SeqFamily::Linear,
            name: "k".into(),
        }
    }

    pub fn polynomial(p: f64) -> Result<Self> {
        if p <= 0.0 {
            return Err(CertError::Domain("polynomial rate needs p > 0".into()));
        }
        Ok(RateSeq {
            family: SeqFamily::Polynomial { p },
            name: format!("(k+1)^{p}"),
        })
    }

    pub fn log_power(alpha: f64) -> Result<Self> {
        if alpha <= 0.0 {
            return Err(CertError::Domain("log-power rate needs alpha > 0".into()));
        }
        Ok(RateSeq {
            family: SeqFamily::LogPower { alpha },
            name: format!("(1+ln(1+k))^{alpha}"),
        })
    }

    /// A custom non-decreasing unbounded sequence. The caller owns those
    /// promises; they are not decidable from finitely many evaluations.
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(u64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        RateSeq {
            family: SeqFamily::Custom(Arc::new(f)),
            name: name.into(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, k: u64) -> f64 {
        match &self.family {
            SeqFamily::Linear => k as f64,
            SeqFamily::Polynomial { p } => (k as f64 + 1.0).powf(*p),
            SeqFamily::LogPower { alpha } => (1.0 + (1.0 + k as f64).ln()).powf(*alpha),
            SeqFamily::Custom(f) => f(k),
        }
    }

    /// Certified membership in the subgeometric class. Only the named
    /// parametric families carry the certificate; custom sequences never do.
    pub fn is_subgeometric_family(&self) -> bool {
        !matches!(self.family, SeqFamily::Custom(_))
    }
}

impl std::fmt::Debug for RateSeq {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RateSeq({})", self.name)
    }
}

/// Generalized inverse `r^{-1}(t) = inf {k in N : r(k) >= t}`.
///
/// Returns 0 for `t <= 0`. Gallops to bracket the level and then bisects,
/// relying only on monotonicity of `r`.
pub fn gen_inverse(r: &RateSeq, t: f64) -> u64 {
    if t <= 0.0 || r.eval(0) >= t {
        return 0;
    }
    let mut lo = 0u64; // r(lo) < t
    let mut hi = 1u64;
    while r.eval(hi) < t {
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi == u64::MAX {
            break;
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if r.eval(mid) >= t {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

// ---------------------------------------------------------------------------
// Continuous moment rates R : (0, \infty) -> (0, \infty)
// ---------------------------------------------------------------------------

/// Parametric family tag for a moment rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RateFamily {
    /// `R(t) = kappa^t`
    Geometric { kappa: f64 },
    /// `R(t) = t^{(1-alpha)/alpha}`
    Polynomial { alpha: f64 },
    /// `R(t) = exp(c t^{1/(1+alpha)})`
    Subgeometric { c: f64, alpha: f64 },
    /// `R(t) = [ln(1+t)]^alpha`
    Logarithmic { alpha: f64 },
}

/// A strictly increasing moment rate with inverse and derivative.
#[derive(Debug, Clone, Copy)]
pub struct RateFn {
    pub family: RateFamily,
}

impl RateFn {
    pub fn geometric(kappa: f64) -> Result<Self> {
        if kappa <= 1.0 {
            return Err(CertError::Domain("geometric rate needs kappa > 1".into()));
        }
        Ok(RateFn {
            family: RateFamily::Geometric { kappa },
        })
    }

    /// Polynomial rate with exponent `(1-alpha)/alpha`. Requires
    /// `alpha in (0,1)`: at `alpha = 1` the exponent degenerates to zero and
    /// the function is no longer invertible.
    pub fn polynomial(alpha: f64) -> Result<Self> {
        if !(0.0 < alpha && alpha < 1.0) {
            return Err(CertError::Domain(
                "polynomial rate needs alpha in (0,1)".into(),
            ));
        }
        Ok(RateFn {
            family: RateFamily::Polynomial { alpha },
        })
    }

    pub fn subgeometric(c: f64, alpha: f64) -> Result<Self> {
        if c <= 0.0 || alpha <= 0.0 {
            return Err(CertError::Domain(
                "subgeometric rate needs c > 0 and alpha > 0".into(),
            ));
        }
        Ok(RateFn {
            family: RateFamily::Subgeometric { c, alpha },
        })
    }

    pub fn logarithmic(alpha: f64) -> Result<Self> {
        if alpha <= 0.0 {
            return Err(CertError::Domain(
                "logarithmic rate needs alpha > 0".into(),
            ));
        }
        Ok(RateFn {
            family: RateFamily::Logarithmic { alpha },
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.ln_eval(t).exp()
    }

    /// `ln R(t)`, safe for arguments where `R` itself overflows.
    pub fn ln_eval(&self, t: f64) -> f64 {
        match self.family {
            RateFamily::Geometric { kappa } => t * kappa.ln(),
            RateFamily::Polynomial { alpha } => (1.0 - alpha) / alpha * t.ln(),
            RateFamily::Subgeometric { c, alpha } => c * t.powf(1.0 / (1.0 + alpha)),
            RateFamily::Logarithmic { alpha } => alpha * (1.0 + t).ln().ln(),
        }
    }

    pub fn inverse(&self, t: f64) -> f64 {
        self.inverse_from_ln(t.ln())
    }

    /// `R^{-1}(exp(ln_t))`, safe for levels beyond float range.
    pub fn inverse_from_ln(&self, ln_t: f64) -> f64 {
        match self.family {
            RateFamily::Geometric { kappa } => ln_t / kappa.ln(),
            RateFamily::Polynomial { alpha } => (ln_t * alpha / (1.0 - alpha)).exp(),
            RateFamily::Subgeometric { c, alpha } => (ln_t / c).powf(1.0 + alpha),
            RateFamily::Logarithmic { alpha } => (ln_t / alpha).exp().exp_m1(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self.family {
            RateFamily::Geometric { kappa } => kappa.ln() * (t * kappa.ln()).exp(),
            RateFamily::Polynomial { alpha } => {
                let p = (1.0 - alpha) / alpha;
                p * t.powf(p - 1.0)
            }
            RateFamily::Subgeometric { c, alpha } => {
                let e = 1.0 / (1.0 + alpha);
                self.eval(t) * c * e * t.powf(e - 1.0)
            }
            RateFamily::Logarithmic { alpha } => {
                alpha * (1.0 + t).ln().powf(alpha - 1.0) / (1.0 + t)
            }
        }
    }

    /// Whether the family grows slower than every geometric rate.
    pub fn is_subgeometric(&self) -> bool {
        !matches!(self.family, RateFamily::Geometric { .. })
    }

    /// Whether a closed-form derivative is available (family metadata).
    pub fn has_derivative(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// Admissibility checkers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckCase {
    /// `R(t)/t` non-increasing and `R(n(x)) <= W(x)`
    SublinearDominated,
    /// `R` convex with log-concave derivative and
    /// `R^{-1}(W) - R^{-1}(beta W) >= n`
    InverseGap,
}

/// Outcome of an admissibility check over a state grid. Violations are data,
/// not errors: `pass` aggregates them.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub case: CheckCase,
    /// Per-state slack; non-negative means the condition holds there.
    /// For the sublinear case this is `ln W(x) - ln R(n(x))`.
    pub margins: Vec<(State, f64)>,
    /// Shape conditions on `R` (monotone ratio / convexity / log-concavity),
    /// checked by second differences on a log-spaced grid.
    pub shape_ok: bool,
    pub notes: Vec<String>,
    pub pass: bool,
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (l, h) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (l + (h - l) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Case (i): `t -> R(t)/t` non-increasing and `R(n(x)) <= W(x)` on the grid.
pub fn check_case_i(
    r: &RateFn,
    n_fn: &SubsampleFn,
    w: &ScaleFn,
    grid: &[State],
) -> Result<CheckReport> {
    if grid.is_empty() {
        return Err(CertError::Contract("grid must be nonempty".into()));
    }
    let margins: Vec<(State, f64)> = grid
        .iter()
        .map(|x| {
            let n = n_fn.eval(x) as f64;
            (*x, w.ln_eval(x) - r.ln_eval(n))
        })
        .collect();

    let n_max = grid.iter().map(|x| n_fn.eval(x)).max().unwrap() as f64;
    let ts = log_grid(1.0, (10.0 * n_max).max(100.0), 64);
    let mut shape_ok = true;
    let mut notes = Vec::new();
    for pair in ts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        // ln(R(t)/t) must not increase
        if (r.ln_eval(b) - b.ln()) > (r.ln_eval(a) - a.ln()) + SHAPE_TOL {
            shape_ok = false;
            notes.push(format!("R(t)/t increases between t={a:.3e} and t={b:.3e}"));
            break;
        }
    }
    let pass = shape_ok && margins.iter().all(|&(_, m)| m >= -SHAPE_TOL);
    Ok(CheckReport {
        case: CheckCase::SublinearDominated,
        margins,
        shape_ok,
        notes,
        pass,
    })
}

/// Case (ii): `R` convex with log-concave derivative and
/// `R^{-1}(W(x)) - R^{-1}(beta W(x)) >= n(x)` on the grid.
pub fn check_case_ii(
    r: &RateFn,
    n_fn: &SubsampleFn,
    w: &ScaleFn,
    beta: f64,
    grid: &[State],
) -> Result<CheckReport> {
    if grid.is_empty() {
        return Err(CertError::Contract("grid must be nonempty".into()));
    }
    if !(0.0 < beta && beta < 1.0) {
        return Err(CertError::Domain("beta must lie in (0,1)".into()));
    }
    if !r.has_derivative() {
        return Err(CertError::Capability(
            "case (ii) needs a rate family with derivative metadata".into(),
        ));
    }
    let margins: Vec<(State, f64)> = grid
        .iter()
        .map(|x| {
            let ln_w = w.ln_eval(x);
            let gap = r.inverse_from_ln(ln_w) - r.inverse_from_ln(ln_w + beta.ln());
            (*x, gap - n_fn.eval(x) as f64)
        })
        .collect();

    // Shape checks run on the t-range the margins actually use. The theorem
    // tolerates modifying R on a bounded initial interval, so arguments below
    // the smallest inverse image are not probed.
    let t_hi = grid
        .iter()
        .map(|x| r.inverse_from_ln(w.ln_eval(x)))
        .fold(10.0f64, f64::max);
    let t_lo = grid
        .iter()
        .map(|x| r.inverse_from_ln(w.ln_eval(x) + beta.ln()))
        .fold(f64::INFINITY, f64::min)
        .max(1.0);
    let ts = log_grid(t_lo, t_hi.max(10.0 * t_lo), 96);
    let mut shape_ok = true;
    let mut notes = Vec::new();
    for win in ts.windows(3) {
        let (a, b, c) = (win[0], win[1], win[2]);
        // convexity of R via the chord test at the midpoint
        let lam = (b - a) / (c - a);
        let chord = (1.0 - lam) * r.eval(a) + lam * r.eval(c);
        if r.eval(b) > chord * (1.0 + SHAPE_TOL) + SHAPE_TOL {
            shape_ok = false;
            notes.push(format!("R not convex near t={b:.3e}"));
            break;
        }
        // log-concavity of R' via the same chord test on ln R'
        let ld = |t: f64| r.derivative(t).ln();
        let chord_ld = (1.0 - lam) * ld(a) + lam * ld(c);
        if ld(b) < chord_ld - SHAPE_TOL.max(1e-8 * chord_ld.abs()) {
            shape_ok = false;
            notes.push(format!("R' not log-concave near t={b:.3e}"));
            break;
        }
    }
    let pass = shape_ok && margins.iter().all(|&(_, m)| m >= -SHAPE_TOL);
    Ok(CheckReport {
        case: CheckCase::InverseGap,
        margins,
        shape_ok,
        notes,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Catalog pairs (n, W) from the phi-drift families
// ---------------------------------------------------------------------------

/// The three phi-drift families with their catalog subsampling pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PhiFamily {
    /// `phi(t) ~ c [1+ln t]^alpha` (logarithmically ergodic):
    /// `n = ceil(c' V / [1+ln V]^alpha)`, `W = [1+ln V]^alpha`.
    LogPower { alpha: f64 },
    /// `phi(t) ~ c t^{1-alpha}` (polynomially ergodic):
    /// `n = ceil(c' V^alpha)`, `W = V^{1-alpha}`.
    Polynomial { alpha: f64 },
    /// `phi(t) ~ c t [ln t]^{-alpha}` (subgeometrically ergodic):
    /// `n = ceil(c' [ln V]^alpha)`, `W = V [ln V]^{-alpha}`.
    NearLinear { alpha: f64 },
}

fn ceil_at_least_one(x: f64) -> u64 {
    if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        (x.ceil() as u64).max(1)
    }
}

/// The catalog `(n, W)` pair for a phi family over the Lyapunov scale `V`,
/// with explicit constant `c'`.
pub fn catalog_pair_from_phi(
    family: PhiFamily,
    v: &ScaleFn,
    c_prime: f64,
) -> Result<(SubsampleFn, ScaleFn)> {
    if c_prime <= 0.0 {
        return Err(CertError::Contract("c' must be positive".into()));
    }
    match family {
        PhiFamily::LogPower { alpha } => {
            if alpha <= 0.0 {
                return Err(CertError::Domain("log-power family needs alpha > 0".into()));
            }
            let (vn, vw) = (v.clone(), v.clone());
            let n = SubsampleFn::new(format!("ceil({c_prime} V/[1+lnV]^{alpha})"), move |x| {
                let ln_v = vn.ln_eval(x);
                ceil_at_least_one((c_prime.ln() + ln_v - alpha * (1.0 + ln_v).ln()).exp())
            });
            let w = ScaleFn::from_ln(format!("[1+ln {}]^{alpha}", v.name()), move |x| {
                alpha * (1.0 + vw.ln_eval(x)).ln()
            });
            Ok((n, w))
        }
        PhiFamily::Polynomial { alpha } => {
            if !(0.0 < alpha && alpha < 1.0) {
                return Err(CertError::Domain(
                    "polynomial family needs alpha in (0,1)".into(),
                ));
            }
            let (vn, vw) = (v.clone(), v.clone());
            let n = SubsampleFn::new(format!("ceil({c_prime} V^{alpha})"), move |x| {
                ceil_at_least_one((c_prime.ln() + alpha * vn.ln_eval(x)).exp())
            });
            let w = vw.powf(1.0 - alpha);
            Ok((n, w))
        }
        PhiFamily::NearLinear { alpha } => {
            if alpha <= 0.0 {
                return Err(CertError::Domain(
                    "near-linear family needs alpha > 0".into(),
                ));
            }
            let (vn, vw) = (v.clone(), v.clone());
            let n = SubsampleFn::new(format!("ceil({c_prime} [lnV]^{alpha})"), move |x| {
                ceil_at_least_one(c_prime * vn.ln_eval(x).max(f64::MIN_POSITIVE).powf(alpha))
            });
            let w = ScaleFn::from_ln(format!("{} [ln]^-{alpha}", v.name()), move |x| {
                let ln_v = vw.ln_eval(x);
                ln_v - alpha * ln_v.max(f64::MIN_POSITIVE).ln()
            });
            Ok((n, w))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gen_inverse_linear_exact_hit() {
        assert_eq!(gen_inverse(&RateSeq::linear(), 5.0), 5);
    }

    #[test]
    fn gen_inverse_linear_rounds_up() {
        assert_eq!(gen_inverse(&RateSeq::linear(), 4.2), 5);
    }

    #[test]
    fn gen_inverse_quadratic() {
        // r(k) = (k+1)^2: r(2) = 9 < 10 <= r(3) = 16
        let r = RateSeq::polynomial(2.0).unwrap();
        assert_eq!(gen_inverse(&r, 10.0), 3);
    }

    #[test]
    fn gen_inverse_nonpositive_level_is_zero() {
        assert_eq!(gen_inverse(&RateSeq::linear(), -1.0), 0);
        assert_eq!(gen_inverse(&RateSeq::linear(), 0.0), 0);
    }

    #[test]
    fn geometric_rate_powers_of_two() {
        let r = RateFn::geometric(2.0).unwrap();
        assert!((r.eval(3.0) - 8.0).abs() < 1e-12);
        assert!((r.inverse(8.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn polynomial_rate_half_is_identity() {
        let r = RateFn::polynomial(0.5).unwrap();
        for t in [0.5, 1.0, 7.0, 1e6] {
            assert!((r.eval(t) - t).abs() / t < 1e-12);
        }
    }

    #[test]
    fn polynomial_rate_quarter() {
        let r = RateFn::polynomial(0.25).unwrap();
        assert!((r.eval(16.0) - 4096.0).abs() < 1e-9);
    }

    #[test]
    fn subgeometric_sanity_ln_r_over_t_decreases() {
        let fams = [
            RateFn::polynomial(0.3).unwrap(),
            RateFn::subgeometric(1.0, 0.5).unwrap(),
            RateFn::logarithmic(2.0).unwrap(),
        ];
        for r in fams {
            let mut prev = f64::INFINITY;
            for k in 2..=8 {
                let t = 10f64.powi(k);
                let v = r.ln_eval(t) / t;
                assert!(v < prev, "{:?} not subgeometric at t=1e{k}", r.family);
                prev = v;
            }
        }
        // geometric: ln R(t)/t is constant, not decreasing
        let g = RateFn::geometric(2.0).unwrap();
        let a = g.ln_eval(1e2) / 1e2;
        let b = g.ln_eval(1e8) / 1e8;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn case_i_equality_passes_with_zero_margin() {
        // R(t) = t, n = W: margins identically zero
        let r = RateFn::polynomial(0.5).unwrap();
        let w = ScaleFn::new("x", |x: &State| x.coord());
        let n = SubsampleFn::new("x", |x: &State| x.coord() as u64);
        let grid: Vec<State> = (1..20).map(|k| State::Scalar(k as f64)).collect();
        let rep = check_case_i(&r, &n, &w, &grid).unwrap();
        assert!(rep.pass);
        assert!(rep.margins.iter().all(|&(_, m)| m.abs() < 1e-9));
    }

    #[test]
    fn case_i_superlinear_rate_fails_shape() {
        // R(t) = t^2 (polynomial alpha = 1/3): R(t)/t increasing
        let r = RateFn::polynomial(1.0 / 3.0).unwrap();
        let w = ScaleFn::new("x", |x: &State| x.coord());
        let n = SubsampleFn::constant(1);
        let grid = vec![State::Scalar(10.0)];
        let rep = check_case_i(&r, &n, &w, &grid).unwrap();
        assert!(!rep.shape_ok);
        assert!(!rep.pass);
    }

    #[test]
    fn case_i_logarithmic_catalog_pair_passes() {
        // n = V/[1+lnV]^alpha, W = [1+lnV]^alpha, R = [ln(1+t)]^alpha
        let alpha = 0.5;
        let v = ScaleFn::new("V", |x: &State| x.coord());
        let (n, w) = catalog_pair_from_phi(PhiFamily::LogPower { alpha }, &v, 1.0).unwrap();
        let r = RateFn::logarithmic(alpha).unwrap();
        let grid: Vec<State> = (2..=20).map(|k| State::Scalar((k as f64).exp())).collect();
        let rep = check_case_i(&r, &n, &w, &grid).unwrap();
        assert!(rep.pass, "margins: {:?}", rep.margins);
    }

    #[test]
    fn case_ii_geometric_zero_margin() {
        // kappa = 1/beta, n = 1: the gap is exactly 1 for every state
        let beta = 0.25;
        let r = RateFn::geometric(1.0 / beta).unwrap();
        let w = ScaleFn::coord_power(1.0, 1.0);
        let n = SubsampleFn::constant(1);
        let grid: Vec<State> = (1..50).map(|k| State::Scalar(k as f64)).collect();
        let rep = check_case_ii(&r, &n, &w, beta, &grid).unwrap();
        assert!(rep.pass);
        assert!(rep.margins.iter().all(|&(_, m)| m.abs() < 1e-9));
    }

    #[test]
    fn case_ii_polynomial_pair_passes_above_threshold() {
        // n = ceil(0.1 V^{1/4}), W = V^{3/4}, R polynomial alpha = 1/4
        let alpha = 0.25;
        let v = ScaleFn::new("V", |x: &State| x.coord());
        let (n, w) = catalog_pair_from_phi(PhiFamily::Polynomial { alpha }, &v, 0.1).unwrap();
        let r = RateFn::polynomial(alpha).unwrap();
        let grid: Vec<State> = (4..=8).map(|k| State::Scalar(10f64.powi(k))).collect();
        let rep = check_case_ii(&r, &n, &w, 0.5, &grid).unwrap();
        assert!(rep.pass, "margins: {:?}", rep.margins);
    }

    #[test]
    fn case_ii_too_fast_geometric_fails() {
        // kappa = 2 > 1/beta with beta = 0.99: gap = log2(1/0.99) < 1
        let r = RateFn::geometric(2.0).unwrap();
        let w = ScaleFn::coord_power(1.0, 1.0);
        let n = SubsampleFn::constant(1);
        let grid = vec![State::Scalar(5.0)];
        let rep = check_case_ii(&r, &n, &w, 0.99, &grid).unwrap();
        assert!(!rep.pass);
        assert!(rep.margins[0].1 < 0.0);
    }

    #[test]
    fn case_ii_margin_monotone_decreasing_in_beta() {
        // the inverse gap R^{-1}(W) - R^{-1}(beta W) shrinks as beta grows,
        // so passing for beta implies passing for any smaller beta
        let r = RateFn::geometric(4.0).unwrap();
        let w = ScaleFn::coord_power(1.0, 2.0);
        let n = SubsampleFn::constant(1);
        let grid: Vec<State> = (1..10).map(|k| State::Scalar(k as f64)).collect();
        let m = |beta: f64| {
            check_case_ii(&r, &n, &w, beta, &grid)
                .unwrap()
                .margins
                .iter()
                .map(|&(_, m)| m)
                .fold(f64::INFINITY, f64::min)
        };
        let mut prev = m(0.30);
        for beta in [0.5, 0.7, 0.9, 0.99] {
            let cur = m(beta);
            assert!(cur <= prev + 1e-12);
            prev = cur;
        }
    }

    #[test]
    fn catalog_poly_half_is_linear_pair() {
        // V(x) = x^2, alpha = 1/2, c' = 1: n(x) = x, W(x) = x
        let v = ScaleFn::new("x^2", |x: &State| x.coord() * x.coord());
        let (n, w) = catalog_pair_from_phi(PhiFamily::Polynomial { alpha: 0.5 }, &v, 1.0).unwrap();
        for k in [2.0, 5.0, 17.0] {
            let x = State::Scalar(k);
            assert_eq!(n.eval(&x), k as u64);
            assert!((w.eval(&x) - k).abs() < 1e-9);
        }
    }

    #[test]
    fn catalog_log_power_substitution() {
        // V = e^t: n ~ e^t/(1+t), W = (1+t) for alpha = 1
        let v = ScaleFn::from_ln("e^t", |x: &State| x.coord());
        let (n, w) = catalog_pair_from_phi(PhiFamily::LogPower { alpha: 1.0 }, &v, 1.0).unwrap();
        let t = 5.0;
        let x = State::Scalar(t);
        assert!((w.eval(&x) - (1.0 + t)).abs() < 1e-9);
        let expect = (t.exp() / (1.0 + t)).ceil() as u64;
        assert_eq!(n.eval(&x), expect);
    }

    #[test]
    fn catalog_near_linear_small_alpha_tends_to_constant_pair() {
        // alpha -> 0: (n, W) -> (c', V)
        let v = ScaleFn::new("V", |x: &State| x.coord());
        let x = State::Scalar(1e6);
        let (n, w) =
            catalog_pair_from_phi(PhiFamily::NearLinear { alpha: 1e-6 }, &v, 2.5).unwrap();
        assert_eq!(n.eval(&x), 3); // ceil(2.5 (ln V)^alpha) -> ceil(c') in the limit
        assert!((w.eval(&x) - 1e6).abs() / 1e6 < 1e-4);
    }

    #[test]
    fn inverse_round_trip_all_families() {
        let fams = [
            RateFn::geometric(3.0).unwrap(),
            RateFn::polynomial(0.25).unwrap(),
            RateFn::subgeometric(0.7, 1.5).unwrap(),
            RateFn::logarithmic(2.0).unwrap(),
        ];
        for r in fams {
            for k in -4..=8 {
                let t = 10f64.powi(k);
                // log-space route: R itself overflows f64 for geometric rates
                // long before t leaves the grid
                let back = r.inverse_from_ln(r.ln_eval(t));
                assert!(
                    (back - t).abs() / t <= 1e-9,
                    "{:?} round trip failed at t=1e{k}: {back}",
                    r.family
                );
            }
        }
    }
}
