//! Subsampling plans from rates, scale functions from return-time moments,
//! and tame-chain classification/construction.

use crate::engine::{Estimate, McEngine};
use crate::error::{CertError, Result};
use crate::kernel::{FiniteKernel, Kernel};
use crate::rates::{catalog_pair_from_phi, gen_inverse, PhiFamily, RateSeq};
use crate::scale::{ScaleFn, SetPredicate, SubsampleFn};
use crate::state::State;
use serde::Serialize;

/// Where a plan's `(n, W, beta)` tuple came from.
#[derive(Debug, Clone, Serialize)]
pub enum Provenance {
    /// Built from a rate sequence: `n(x) = r^{-1}((C/beta) V(x)/W(x))`.
    FromRate { rate: String, c_const: f64 },
    /// A catalog pair for one of the phi-drift families.
    Catalog { family: PhiFamily, c_prime: f64 },
    /// The tame construction: `n = ceil(c_beta V^alpha)`, `W = V^{1-alpha}`.
    TameConstruction {
        alpha: f64,
        delta: f64,
        c_beta: f64,
    },
    Manual,
}

/// A state-dependent subsampling plan: observe the chain every `n(x)` steps
/// and expect the geometric drift `E_x[W(Phi_{n(x)})] <= beta' W(x) + b 1_C`.
#[derive(Debug, Clone)]
pub struct SubsamplePlan {
    pub n_fn: SubsampleFn,
    pub w: ScaleFn,
    pub beta: f64,
    pub beta_prime: f64,
    pub b: f64,
    pub c: SetPredicate,
    pub provenance: Provenance,
}

impl SubsamplePlan {
    /// Both scale functions must be >= 1; that cannot be decided globally,
    /// so callers check it on the grids they actually use.
    pub fn validate_scales(&self, v: &ScaleFn, grid: &[State]) -> Result<()> {
        for x in grid {
            if v.ln_eval(x) < -1e-12 || self.w.ln_eval(x) < -1e-12 {
                return Err(CertError::Contract(format!(
                    "scale functions must be >= 1; violated at {x}"
                )));
            }
        }
        Ok(())
    }
}

/// Build a plan from a rate sequence and a double-control pair `(V, W)`:
/// `n(x) = max(1, r^{-1}((C_const/beta) V(x)/W(x)))` and
/// `C = {x : W(x) <= b/(beta' - beta)}`.
///
/// ```
/// use driftcert::planner::plan_from_rate;
/// use driftcert::rates::RateSeq;
/// use driftcert::{ScaleFn, State};
///
/// // equal scales make the schedule constant: n = r^{-1}(C/beta) = 3
/// let v = ScaleFn::coord_power(1.0, 2.0);
/// let plan = plan_from_rate(&RateSeq::linear(), &v, &v, 1.0, 0.4, 0.5, 10.0)?;
/// assert_eq!(plan.n_fn.eval(&State::Scalar(7.0)), 3);
/// // the small set is the W-sublevel set at b/(beta' - beta) = 100
/// assert!(plan.c.contains(&State::Scalar(9.0)));
/// assert!(!plan.c.contains(&State::Scalar(10.0)));
/// # Ok::<(), driftcert::CertError>(())
/// ```
pub fn plan_from_rate(
    r: &RateSeq,
    v: &ScaleFn,
    w: &ScaleFn,
    c_const: f64,
    beta: f64,
    beta_prime: f64,
    b: f64,
) -> Result<SubsamplePlan> {
    if !(0.0 < beta && beta < beta_prime && beta_prime < 1.0) {
        return Err(CertError::Domain(format!(
            "need 0 < beta < beta' < 1, got beta={beta}, beta'={beta_prime}"
        )));
    }
    if c_const <= 0.0 {
        return Err(CertError::Domain("C_const must be positive".into()));
    }
    if b <= 0.0 {
        return Err(CertError::Domain("b must be positive".into()));
    }
    let (vn, wn) = (v.clone(), w.clone());
    let rr = r.clone();
    let ln_scale = c_const.ln() - beta.ln();
    let n_fn = SubsampleFn::new(
        format!("inv[{}]({c_const}/{beta} {}/{})", r.name(), v.name(), w.name()),
        move |x| {
            let t = (ln_scale + vn.ln_eval(x) - wn.ln_eval(x)).exp();
            gen_inverse(&rr, t).max(1)
        },
    );
    let ln_level = (b / (beta_prime - beta)).ln();
    let wc = w.clone();
    let c = SetPredicate::new(format!("{{{} <= {:.6e}}}", w.name(), ln_level.exp()), move |x| {
        wc.ln_eval(x) <= ln_level
    });
    Ok(SubsamplePlan {
        n_fn,
        w: w.clone(),
        beta,
        beta_prime,
        b,
        c,
        provenance: Provenance::FromRate {
            rate: r.name().to_string(),
            c_const,
        },
    })
}

/// Tameness verdict for a plan at a given exponent `delta`.
#[derive(Debug, Clone, Serialize)]
pub struct TameVerdict {
    pub is_tame: bool,
    pub delta: f64,
    pub beta: f64,
    /// Per-state slack of `n(x) <= W^delta(x)` in log-space:
    /// `delta ln W(x) - ln n(x)`.
    pub margins: Vec<(State, f64)>,
    /// Slack of `ln beta < delta^{-1} ln(1-delta)`; positive means satisfied.
    pub condition2_margin: f64,
}

/// Check Definition-4.1 tameness of a plan over a grid.
pub fn classify_tame(plan: &SubsamplePlan, delta: f64, grid: &[State]) -> Result<TameVerdict> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(CertError::Domain(format!("delta = {delta} not in (0,1)")));
    }
    if grid.is_empty() {
        return Err(CertError::Contract("grid must be nonempty".into()));
    }
    let margins: Vec<(State, f64)> = grid
        .iter()
        .map(|x| {
            let n = plan.n_fn.eval(x);
            (*x, delta * plan.w.ln_eval(x) - (n as f64).ln())
        })
        .collect();
    let condition2_margin = (1.0 - delta).ln() / delta - plan.beta.ln();
    let is_tame = condition2_margin > 0.0 && margins.iter().all(|&(_, m)| m >= 0.0);
    Ok(TameVerdict {
        is_tame,
        delta,
        beta: plan.beta,
        margins,
        condition2_margin,
    })
}

/// Invert a monotone scale function on scalar states by bisection:
/// the coordinate where `ln V` first reaches `target_ln`.
fn invert_scale(v: &ScaleFn, target_ln: f64) -> f64 {
    let mut hi = 1.0f64;
    while v.ln_eval(&State::Scalar(hi)) < target_ln && hi < 1e300 {
        hi *= 2.0;
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if v.ln_eval(&State::Scalar(mid)) < target_ln {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// The tame construction for a polynomial phi family with exponent
/// `1 - alpha`, `alpha < 1/2`.
///
/// Free constants follow fixed selection rules: `delta` is the midpoint of
/// its admissible window `(alpha/(1-alpha), 1)`, `beta` is half its upper
/// bound `(1-delta)^{1/delta}`, and `c_beta = 1/beta`. The verdict is
/// evaluated on an automatic log-spaced grid above the threshold where the
/// ceiling in `n` stops mattering; the construction guarantees `is_tame`
/// there.
///
/// ```
/// use driftcert::planner::construct_tame_from_phi;
/// use driftcert::ScaleFn;
///
/// let v = ScaleFn::coord_power(1.0, 1.0);
/// let (_, verdict) = construct_tame_from_phi(0.25, &v, 1.0)?;
/// assert!(verdict.is_tame);
/// // exponents at or above 1/2 fall outside the construction
/// assert!(construct_tame_from_phi(0.5, &v, 1.0).is_err());
/// # Ok::<(), driftcert::CertError>(())
/// ```
pub fn construct_tame_from_phi(
    alpha: f64,
    v: &ScaleFn,
    b: f64,
) -> Result<(SubsamplePlan, TameVerdict)> {
    if !(0.0 < alpha && alpha < 0.5) {
        return Err(CertError::Scope(format!(
            "tame construction requires alpha in (0, 1/2); alpha = {alpha} is outside the covered range"
        )));
    }
    if b <= 0.0 {
        return Err(CertError::Domain("b must be positive".into()));
    }
    let lo = alpha / (1.0 - alpha);
    let delta = 0.5 * (lo + 1.0);
    let beta = 0.5 * (1.0 - delta).powf(1.0 / delta);
    let c_beta = 1.0 / beta;
    let (n_fn, w) = catalog_pair_from_phi(PhiFamily::Polynomial { alpha }, v, c_beta)?;
    let beta_prime = 0.5 * (1.0 + beta);
    let ln_level = (b / (beta_prime - beta)).ln();
    let wc = w.clone();
    let c = SetPredicate::new(format!("{{{} <= {:.6e}}}", w.name(), ln_level.exp()), move |x| {
        wc.ln_eval(x) <= ln_level
    });
    let plan = SubsamplePlan {
        n_fn,
        w,
        beta,
        beta_prime,
        b,
        c,
        provenance: Provenance::TameConstruction {
            alpha,
            delta,
            c_beta,
        },
    };
    // condition (i) reads ceil(c_beta V^alpha) <= V^{(1-alpha) delta}; it
    // holds once V exceeds v_star = c_beta^{1/((1-alpha) delta - alpha)}
    // with room to spare, so the grid starts a decade above v_star
    let gap = (1.0 - alpha) * delta - alpha;
    let ln_v_star = c_beta.ln() / gap;
    let points = 24usize;
    let grid: Vec<State> = (0..points)
        .map(|i| {
            let ln_v = ln_v_star
                + (10.0f64).ln()
                + (1e6f64).ln() * i as f64 / (points - 1) as f64;
            State::Scalar(invert_scale(v, ln_v))
        })
        .collect();
    let verdict = classify_tame(&plan, delta, &grid)?;
    Ok((plan, verdict))
}

// ---------------------------------------------------------------------------
// Scale functions from return-time moments (estimated and exact)
// ---------------------------------------------------------------------------

/// A scale function known only at tabulated states, interpolated piecewise
/// log-linearly in the principal coordinate. Queries outside the tabulated
/// range are errors, never extrapolations.
#[derive(Debug, Clone, Serialize)]
pub struct TabulatedScale {
    name: String,
    /// `(coord, ln value)`, sorted by coord.
    points: Vec<(f64, f64)>,
}

impl TabulatedScale {
    pub fn new(name: impl Into<String>, mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(CertError::Contract(
                "tabulated scale needs at least two points".into(),
            ));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(TabulatedScale {
            name: name.into(),
            points,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ln_eval(&self, x: &State) -> Result<f64> {
        let c = x.coord();
        let (lo, hi) = (self.points[0].0, self.points[self.points.len() - 1].0);
        if c < lo || c > hi {
            return Err(CertError::OutOfGrid(format!(
                "coordinate {c} outside tabulated range [{lo}, {hi}]"
            )));
        }
        let j = self.points.partition_point(|&(pc, _)| pc < c);
        if j == 0 || self.points[j.min(self.points.len() - 1)].0 == c {
            let k = if j >= self.points.len() { j - 1 } else { j };
            if self.points[k].0 == c {
                return Ok(self.points[k].1);
            }
        }
        let (c0, v0) = self.points[j - 1];
        let (c1, v1) = self.points[j];
        // interpolate ln value linearly in ln(1 + coord)
        let t = ((1.0 + c).ln() - (1.0 + c0).ln()) / ((1.0 + c1).ln() - (1.0 + c0).ln());
        Ok(v0 + t * (v1 - v0))
    }

    pub fn eval(&self, x: &State) -> Result<f64> {
        Ok(self.ln_eval(x)?.exp())
    }
}

/// One tabulated state of a return-moment estimation run.
#[derive(Debug, Clone, Serialize)]
pub struct ReturnMomentRow {
    pub state: State,
    /// Estimate of `E_x[sum_{k=0}^{sigma_C} r(k)]`.
    pub v: Estimate,
    /// Estimate of `E_x[r(sigma_C)]`.
    pub w: Estimate,
    pub censored_fraction: f64,
    /// True when more than 1% of the paths were censored at the cap.
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReturnMomentScales {
    pub v: TabulatedScale,
    pub w: TabulatedScale,
    pub rows: Vec<ReturnMomentRow>,
}

/// Monte Carlo budget for moment estimation.
#[derive(Debug, Clone, Copy)]
pub struct McBudget {
    pub replicates: u64,
    pub cap: u64,
    pub master_seed: u64,
    pub workers: Option<usize>,
}

/// Estimate the scale pair `V(x) = E_x[sum_{k=0}^{sigma_C} r(k)]`,
/// `W(x) = E_x[r(sigma_C)]` at the grid states, with censoring diagnostics.
///
/// Censored paths contribute their partial sums (a lower bound) and are
/// counted; states with more than 1% censoring are flagged unreliable.
pub fn scales_from_return_moments(
    kernel: &dyn Kernel,
    c: &SetPredicate,
    r: &RateSeq,
    grid: &[State],
    budget: &McBudget,
) -> Result<ReturnMomentScales> {
    if grid.len() < 2 {
        return Err(CertError::Contract(
            "need at least two grid states to tabulate a scale".into(),
        ));
    }
    if budget.replicates < 2 || budget.cap < 1 {
        return Err(CertError::Contract(
            "budget needs replicates >= 2 and cap >= 1".into(),
        ));
    }
    let engine = McEngine::with_workers(budget.master_seed, budget.workers);
    let mut rows = Vec::with_capacity(grid.len());
    for (idx, x0) in grid.iter().enumerate() {
        let samples = engine.run_replicates(
            idx as u64 * budget.replicates,
            budget.replicates,
            |_, rng| {
                // sigma_C: first n >= 0 in C
                let mut x = *x0;
                let mut vsum = r.eval(0);
                if c.contains(&x) {
                    return (vsum, r.eval(0), false);
                }
                for k in 1..=budget.cap {
                    x = kernel.sample(&x, rng);
                    vsum += r.eval(k);
                    if c.contains(&x) {
                        return (vsum, r.eval(k), false);
                    }
                }
                (vsum, r.eval(budget.cap), true)
            },
        );
        let censored = samples.iter().filter(|&&(_, _, cen)| cen).count() as u64;
        let vs: Vec<f64> = samples.iter().map(|&(v, _, _)| v).collect();
        let ws: Vec<f64> = samples.iter().map(|&(_, w, _)| w).collect();
        let mut v_est = Estimate::from_samples(&vs);
        let mut w_est = Estimate::from_samples(&ws);
        v_est.censored_count = censored;
        w_est.censored_count = censored;
        let censored_fraction = censored as f64 / budget.replicates as f64;
        rows.push(ReturnMomentRow {
            state: *x0,
            v: v_est,
            w: w_est,
            censored_fraction,
            flagged: censored_fraction > 0.01,
        });
    }
    let v_tab = TabulatedScale::new(
        format!("Vhat[{}]", r.name()),
        rows.iter().map(|r| (r.state.coord(), r.v.mean.ln())).collect(),
    )?;
    let w_tab = TabulatedScale::new(
        format!("What[{}]", r.name()),
        rows.iter().map(|r| (r.state.coord(), r.w.mean.ln())).collect(),
    )?;
    Ok(ReturnMomentScales {
        v: v_tab,
        w: w_tab,
        rows,
    })
}

/// Exact additive functional `F(x) = E_x[sum_{k=0}^{sigma_C} f(Phi_k)]` on a
/// finite kernel, by Gaussian elimination on the one-step recursion
/// `F = f` on `C`, `F = f + PF` off `C`.
pub fn exact_additive_functional(
    kernel: &FiniteKernel,
    c: &SetPredicate,
    f: &dyn Fn(usize) -> f64,
) -> Result<Vec<f64>> {
    let n = kernel.len();
    let in_c: Vec<bool> = (0..n).map(|i| c.contains(&State::Lattice(i as i64))).collect();
    if in_c.iter().all(|&b| !b) {
        return Err(CertError::Contract(
            "C contains no state of the finite kernel".into(),
        ));
    }
    // unknowns: F at the off-C states
    let free: Vec<usize> = (0..n).filter(|&i| !in_c[i]).collect();
    let pos: Vec<Option<usize>> = {
        let mut p = vec![None; n];
        for (j, &i) in free.iter().enumerate() {
            p[i] = Some(j);
        }
        p
    };
    let m = free.len();
    let rows = kernel.rows();
    let mut a = vec![vec![0.0f64; m + 1]; m];
    for (j, &i) in free.iter().enumerate() {
        a[j][j] = 1.0;
        a[j][m] = f(i);
        for (y, &p) in rows[i].iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            match pos[y] {
                Some(jy) => a[j][jy] -= p,
                None => a[j][m] += p * f(y),
            }
        }
    }
    solve_in_place(&mut a)?;
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = match pos[i] {
            Some(j) => a[j][m],
            None => f(i),
        };
    }
    Ok(out)
}

/// Gaussian elimination with partial pivoting on an augmented matrix;
/// leaves the solution in the last column.
fn solve_in_place(a: &mut [Vec<f64>]) -> Result<()> {
    let m = a.len();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-300 {
            return Err(CertError::Contract(
                "singular system: the chain may never reach C from some state".into(),
            ));
        }
        a.swap(col, piv);
        for row in 0..m {
            if row == col {
                continue;
            }
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..=m {
                let v = a[col][k];
                a[row][k] -= factor * v;
            }
        }
    }
    for row in 0..m {
        a[row][m] /= a[row][row];
    }
    Ok(())
}
