//! Modulated return-time moments `E_x[R(tau_C)]` and their comparison
//! against the certified bounds.
//!
//! Return times under subgeometric drift are heavy-tailed, so every
//! estimator is censoring-aware and reports two numbers: the truncated mean
//! over uncensored paths and a censor-inflated lower bound. A single point
//! estimate would silently hide the tail.

use crate::engine::{Estimate, McEngine};
use crate::error::{CertError, Result};
use crate::kernel::Kernel;
use crate::planner::SubsamplePlan;
use crate::rates::{check_case_i, check_case_ii, RateFn};
use crate::rng::RngStream;
use crate::scale::SetPredicate;
use crate::state::State;
use serde::Serialize;

/// Largest `ln R(cap)` allowed; beyond this the statistic overflows `f64`.
const LN_GUARD: f64 = 700.0;

/// A censoring-aware moment estimate at one start state.
#[derive(Debug, Clone, Serialize)]
pub struct RMomentEstimate {
    /// Mean of `R(tau)` over the uncensored paths only.
    pub truncated: Estimate,
    /// `(sum of uncensored R(tau) + censored * R(cap)) / replicates` — a
    /// valid lower bound on the true moment since `R` is increasing.
    pub lower_bound: f64,
    pub censored_fraction: f64,
    /// More than 5% of paths censored: the truncated mean is unreliable.
    pub flagged: bool,
    /// `std_error/mean > 10` on the uncensored sample.
    pub variance_warning: bool,
}

/// One grid state of a bound sweep.
#[derive(Debug, Clone, Serialize)]
pub struct MomentPoint {
    pub state: State,
    pub estimate: RMomentEstimate,
    /// `truncated mean / denominator`, the empirical existential constant.
    pub bound_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub points: Vec<MomentPoint>,
    /// Log-log regression slope of the truncated mean against the state
    /// coordinate, when the grid spans more than one coordinate.
    pub slope: Option<f64>,
    /// Stabilization verdict: max bound_ratio on the outer grid half does
    /// not exceed the inner-half max by more than the tolerance.
    pub pass: Option<bool>,
    pub notes: Vec<String>,
}

/// Monte Carlo budget for moment sweeps.
#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub replicates: u64,
    pub cap: u64,
    pub master_seed: u64,
    pub workers: Option<usize>,
    /// Relative tolerance for the stabilization rule.
    pub ratio_tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            replicates: 2_000,
            cap: 1_000_000,
            master_seed: 0,
            workers: None,
            ratio_tol: 0.25,
        }
    }
}

fn guard_cap(r: &RateFn, cap: u64) -> Result<()> {
    if cap < 1 {
        return Err(CertError::Contract("cap must be >= 1".into()));
    }
    if r.ln_eval(cap as f64) > LN_GUARD {
        return Err(CertError::Contract(format!(
            "R(cap) overflows: ln R({cap}) = {:.1} > {LN_GUARD}; lower the cap",
            r.ln_eval(cap as f64)
        )));
    }
    Ok(())
}

fn assemble(samples: &[(u64, bool)], r: &RateFn, cap: u64) -> RMomentEstimate {
    let replicates = samples.len() as u64;
    let uncensored: Vec<f64> = samples
        .iter()
        .filter(|&&(_, cen)| !cen)
        .map(|&(t, _)| r.eval(t as f64))
        .collect();
    let censored = replicates - uncensored.len() as u64;
    let mut truncated = Estimate::from_samples(&uncensored);
    truncated.replicates = replicates;
    truncated.censored_count = censored;
    let lower_bound = (uncensored.iter().sum::<f64>() + censored as f64 * r.eval(cap as f64))
        / replicates as f64;
    let censored_fraction = censored as f64 / replicates as f64;
    let variance_warning =
        truncated.mean != 0.0 && truncated.std_error / truncated.mean.abs() > 10.0;
    RMomentEstimate {
        truncated,
        lower_bound,
        censored_fraction,
        flagged: censored_fraction > 0.05,
        variance_warning,
    }
}

/// Estimate `E_x[R(tau_C)]` by Monte Carlo, censored at `cap` steps.
///
/// ```
/// use driftcert::moments::estimate_r_moment;
/// use driftcert::rates::RateFn;
/// use driftcert::zoo::CycleKernel;
/// use driftcert::{SetPredicate, State};
///
/// // the 3-cycle returns to 0 in exactly three steps, so E[R(tau)] = R(3)
/// let kernel = CycleKernel { period: 3 };
/// let c = SetPredicate::new("{0}", |s: &State| s.lattice() == Some(0));
/// let r = RateFn::polynomial(0.5)?; // R(t) = t
/// let est = estimate_r_moment(&kernel, &State::Lattice(0), &c, &r, 100, 50, 1, None)?;
/// assert!((est.truncated.mean - 3.0).abs() < 1e-12);
/// assert_eq!(est.censored_fraction, 0.0);
/// # Ok::<(), driftcert::CertError>(())
/// ```
pub fn estimate_r_moment(
    kernel: &dyn Kernel,
    x0: &State,
    c: &SetPredicate,
    r: &RateFn,
    replicates: u64,
    cap: u64,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<RMomentEstimate> {
    guard_cap(r, cap)?;
    if replicates < 2 {
        return Err(CertError::Contract("replicates must be >= 2".into()));
    }
    let engine = McEngine::with_workers(master_seed, workers);
    let samples = engine.run_replicates(0, replicates, |_, rng: &mut RngStream| {
        sample_return(kernel, x0, c, cap, rng)
    });
    Ok(assemble(&samples, r, cap))
}

/// `(tau_C or cap, censored?)` for one path.
fn sample_return(
    kernel: &dyn Kernel,
    x0: &State,
    c: &SetPredicate,
    cap: u64,
    rng: &mut RngStream,
) -> (u64, bool) {
    let mut x = *x0;
    for n in 1..=cap {
        x = kernel.sample(&x, rng);
        if c.contains(&x) {
            return (n, false);
        }
    }
    (cap, true)
}

fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(x, y)| x > 0.0 && y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 || pts.iter().all(|&(x, _)| x == pts[0].0) {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Stabilization rule shared by the sweeps: the outer-half maximum of the
/// bound ratios must not exceed the inner-half maximum by more than
/// `ratio_tol` relative.
pub fn ratios_stabilize(ratios: &[f64], ratio_tol: f64) -> bool {
    if ratios.len() < 2 {
        return true;
    }
    let split = ratios.len().div_ceil(2);
    let inner = ratios[..split].iter().cloned().fold(f64::MIN, f64::max);
    let outer = ratios[split..].iter().cloned().fold(f64::MIN, f64::max);
    outer <= inner * (1.0 + ratio_tol)
}

fn sweep(
    kernel: &dyn Kernel,
    target: &SetPredicate,
    denom: &dyn Fn(&State) -> f64,
    r: &RateFn,
    x_grid: &[State],
    opts: &SweepOptions,
) -> Result<MomentReport> {
    guard_cap(r, opts.cap)?;
    if x_grid.is_empty() {
        return Err(CertError::Contract("x_grid must be nonempty".into()));
    }
    let engine = McEngine::with_workers(opts.master_seed, opts.workers);
    let mut points = Vec::with_capacity(x_grid.len());
    for (idx, x0) in x_grid.iter().enumerate() {
        let samples = engine.run_replicates(
            idx as u64 * opts.replicates,
            opts.replicates,
            |_, rng: &mut RngStream| sample_return(kernel, x0, target, opts.cap, rng),
        );
        let estimate = assemble(&samples, r, opts.cap);
        let bound_ratio = estimate.truncated.mean / denom(x0);
        points.push(MomentPoint {
            state: *x0,
            estimate,
            bound_ratio,
        });
    }
    let slope = loglog_slope(
        &points
            .iter()
            .map(|p| (p.state.coord(), p.estimate.truncated.mean))
            .collect::<Vec<_>>(),
    );
    let ratios: Vec<f64> = points.iter().map(|p| p.bound_ratio).collect();
    let pass = ratios_stabilize(&ratios, opts.ratio_tol);
    let mut notes = Vec::new();
    if points.iter().any(|p| p.estimate.flagged) {
        notes.push("some states exceed 5% censoring; ratios there are unreliable".into());
    }
    Ok(MomentReport {
        points,
        slope,
        pass: Some(pass),
        notes,
    })
}

/// Sweep `E_x[R(tau_C)] / (W(x) + b 1_C(x))` over a grid and test that the
/// empirical existential constant stabilizes.
///
/// Refuses to run unless `(R, n, W, beta)` passes one of the admissibility
/// checks — without that the bound is a misapplication of the theory, and a
/// FAIL would say nothing.
pub fn bound_sweep(
    kernel: &dyn Kernel,
    plan: &SubsamplePlan,
    r: &RateFn,
    x_grid: &[State],
    opts: &SweepOptions,
) -> Result<MomentReport> {
    let case_i = check_case_i(r, &plan.n_fn, &plan.w, x_grid)?;
    let admissible = case_i.pass || {
        let case_ii = check_case_ii(r, &plan.n_fn, &plan.w, plan.beta, x_grid)?;
        case_ii.pass
    };
    if !admissible {
        return Err(CertError::Scope(
            "rate fails both admissibility checks for this plan; the moment bound does not apply"
                .into(),
        ));
    }
    let (w, b, c) = (plan.w.clone(), plan.b, plan.c.clone());
    sweep(
        kernel,
        &plan.c,
        &move |x| w.eval(x) + b * c.indicator(x),
        r,
        x_grid,
        opts,
    )
}

/// Sweep `E_x[R(tau_D)] / W(x)` for an accessible set `D` in place of the
/// plan's small set. Requires a subgeometric rate family.
pub fn accessible_set_experiment(
    kernel: &dyn Kernel,
    plan: &SubsamplePlan,
    r: &RateFn,
    d: &SetPredicate,
    x_grid: &[State],
    opts: &SweepOptions,
) -> Result<MomentReport> {
    if !r.is_subgeometric() {
        return Err(CertError::Scope(
            "accessible-set moment bounds require a subgeometric rate family".into(),
        ));
    }
    let w = plan.w.clone();
    sweep(kernel, d, &move |x| w.eval(x), r, x_grid, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{plan_from_rate, Provenance, SubsamplePlan};
    use crate::rates::RateSeq;
    use crate::scale::{ScaleFn, SubsampleFn};
    use crate::zoo::{BirthDeathChain, CycleKernel, DriftAwayKernel};

    #[test]
    fn period_two_cycle_square_moment_is_four() {
        let k = CycleKernel { period: 2 };
        let c = SetPredicate::new("{0}", |s: &State| s.lattice() == Some(0));
        let r = RateFn::polynomial(1.0 / 3.0).unwrap(); // R(t) = t^2
        let est =
            estimate_r_moment(&k, &State::Lattice(0), &c, &r, 100, 1000, 7, None).unwrap();
        assert!((est.truncated.mean - 4.0).abs() < 1e-12);
        assert_eq!(est.truncated.std_error, 0.0);
        assert_eq!(est.censored_fraction, 0.0);
        assert!(!est.flagged);
    }

    #[test]
    fn never_returning_chain_is_fully_censored_and_flagged() {
        let c = SetPredicate::coord_le(0.0);
        let r = RateFn::polynomial(0.5).unwrap(); // R(t) = t
        let est = estimate_r_moment(
            &DriftAwayKernel,
            &State::Lattice(0),
            &c,
            &r,
            50,
            200,
            7,
            None,
        )
        .unwrap();
        assert_eq!(est.censored_fraction, 1.0);
        assert!(est.flagged);
        assert!((est.lower_bound - 200.0).abs() < 1e-9); // R(cap) * 100% censored
        assert!(est.truncated.mean.is_nan()); // no uncensored paths
    }

    #[test]
    fn cap_guard_rejects_overflowing_rate() {
        let k = CycleKernel { period: 2 };
        let c = SetPredicate::coord_le(0.0);
        let r = RateFn::geometric(2.0).unwrap();
        let res = estimate_r_moment(&k, &State::Lattice(0), &c, &r, 10, 10_000, 7, None);
        assert!(matches!(res, Err(CertError::Contract(_))));
    }

    fn zoo_linear_plan() -> SubsamplePlan {
        // V = (x+1)^4, W = V^{1/2} = (x+1)^2, n = ceil(0.1 (x+1)^2)
        let w = ScaleFn::coord_power(1.0, 2.0);
        SubsamplePlan {
            n_fn: SubsampleFn::new("ceil(0.1(x+1)^2)", |x: &State| {
                ((0.1 * (x.coord() + 1.0).powi(2)).ceil() as u64).max(1)
            }),
            w,
            beta: 0.5,
            beta_prime: 0.6,
            b: 2.0,
            c: SetPredicate::new("{(x+1)^2 <= 20}", |x: &State| {
                (x.coord() + 1.0).powi(2) <= 20.0
            }),
            provenance: Provenance::Manual,
        }
    }

    #[test]
    fn linear_rate_sweep_on_zoo_chain_stabilizes() {
        // R(t) = t with n <= W: case (i) admissible; E_x[tau_C] ~ x^2/8
        // against W = (x+1)^2 gives bounded ratios.
        let kernel = BirthDeathChain::new(2.0);
        let plan = zoo_linear_plan();
        let r = RateFn::polynomial(0.5).unwrap();
        let grid = vec![State::Lattice(16), State::Lattice(32), State::Lattice(64)];
        let opts = SweepOptions {
            replicates: 1500,
            cap: 200_000,
            master_seed: 31,
            ..Default::default()
        };
        let report = bound_sweep(&kernel, &plan, &r, &grid, &opts).unwrap();
        assert_eq!(report.pass, Some(true), "ratios: {:?}", report.points.iter().map(|p| p.bound_ratio).collect::<Vec<_>>());
        let slope = report.slope.unwrap();
        assert!((slope - 2.0).abs() < 0.3, "slope {slope}");
        assert!(report.points.iter().all(|p| !p.estimate.flagged));
    }

    #[test]
    fn bound_sweep_refuses_inadmissible_rate() {
        // geometric kappa=2 with beta=0.99 and n=1 fails both checks
        let kernel = BirthDeathChain::new(2.0);
        let w = ScaleFn::coord_power(1.0, 1.0);
        let plan = SubsamplePlan {
            n_fn: SubsampleFn::constant(1),
            w: w.clone(),
            beta: 0.99,
            beta_prime: 0.995,
            b: 1.0,
            c: SetPredicate::coord_le(3.0),
            provenance: Provenance::Manual,
        };
        let r = RateFn::geometric(2.0).unwrap();
        let grid = vec![State::Lattice(10)];
        let opts = SweepOptions::default();
        assert!(matches!(
            bound_sweep(&kernel, &plan, &r, &grid, &opts),
            Err(CertError::Scope(_))
        ));
    }

    #[test]
    fn accessible_set_rejects_geometric_rate() {
        let kernel = BirthDeathChain::new(2.0);
        let v = ScaleFn::coord_power(1.0, 2.0);
        let plan = plan_from_rate(&RateSeq::linear(), &v, &v, 1.0, 0.4, 0.5, 10.0).unwrap();
        let r = RateFn::geometric(1.01).unwrap();
        let d = SetPredicate::coord_le(5.0);
        let res = accessible_set_experiment(
            &kernel,
            &plan,
            &r,
            &d,
            &[State::Lattice(10)],
            &SweepOptions::default(),
        );
        assert!(matches!(res, Err(CertError::Scope(_))));
    }

    #[test]
    fn enlarging_target_shrinks_ratios() {
        // D contains C => tau_D <= tau_C pathwise, so with identical seeds
        // the accessible-set ratios cannot exceed the C-set ratios.
        let kernel = BirthDeathChain::new(2.0);
        let plan = zoo_linear_plan();
        let r = RateFn::polynomial(0.5).unwrap();
        let grid = vec![State::Lattice(24)];
        let opts = SweepOptions {
            replicates: 400,
            cap: 100_000,
            master_seed: 5,
            ..Default::default()
        };
        let with_c = accessible_set_experiment(&kernel, &plan, &r, &plan.c.clone(), &grid, &opts)
            .unwrap();
        let d = SetPredicate::new("{(x+1)^2 <= 80}", |x: &State| {
            (x.coord() + 1.0).powi(2) <= 80.0
        });
        let with_d = accessible_set_experiment(&kernel, &plan, &r, &d, &grid, &opts).unwrap();
        assert!(with_d.points[0].bound_ratio <= with_c.points[0].bound_ratio);
    }

    #[test]
    fn stabilization_rule_arithmetic() {
        assert!(ratios_stabilize(&[1.0, 1.1, 1.2], 0.25));
        assert!(!ratios_stabilize(&[1.0, 1.0, 2.0], 0.25));
        assert!(ratios_stabilize(&[5.0], 0.0));
    }
}
