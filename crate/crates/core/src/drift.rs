//! Drift-inequality verification over state grids.
//!
//! Every verifier computes, per grid state, the slack of the inequality
//! (positive = satisfied). When the kernel supports exact expectations the
//! margins are exact and the verdict is PASS/FAIL; otherwise they are Monte
//! Carlo estimates with confidence intervals and INCONCLUSIVE is a
//! first-class outcome whenever the interval straddles zero.

use crate::engine::{Estimate, McEngine};
use crate::error::{CertError, Result};
use crate::kernel::Kernel;
use crate::rates::{PhiFamily, RateSeq};
use crate::rng::RngStream;
use crate::scale::{ScaleFn, SetPredicate, SubsampleFn};
use crate::state::State;
use serde::Serialize;
use std::sync::Arc;

/// A concave modulating function `phi : [1,\infty) -> (0,\infty)` with an
/// explicit constant, evaluated in log-space.
#[derive(Debug, Clone, Copy)]
pub struct PhiFn {
    pub family: PhiFamily,
    pub c: f64,
}

impl PhiFn {
    pub fn new(family: PhiFamily, c: f64) -> Result<Self> {
        if c <= 0.0 {
            return Err(CertError::Domain("phi constant must be positive".into()));
        }
        Ok(PhiFn { family, c })
    }

    /// `ln phi(exp(ln_t))`.
    pub fn ln_eval(&self, ln_t: f64) -> f64 {
        match self.family {
            PhiFamily::LogPower { alpha } => self.c.ln() + alpha * (1.0 + ln_t).ln(),
            PhiFamily::Polynomial { alpha } => self.c.ln() + (1.0 - alpha) * ln_t,
            PhiFamily::NearLinear { alpha } => self.c.ln() + ln_t - alpha * (1.0 + ln_t).ln(),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.ln_eval(t.ln()).exp()
    }

    /// Numeric sanity: increasing, concave and bounded away from zero on a
    /// log grid of `[1, t_hi]`.
    pub fn check_shape(&self, t_hi: f64) -> Result<()> {
        let n = 64;
        let h = t_hi.ln() / (n - 1) as f64;
        let ts: Vec<f64> = (0..n).map(|i| (i as f64 * h).exp()).collect();
        let vals: Vec<f64> = ts.iter().map(|&t| self.eval(t)).collect();
        if vals.iter().any(|&v| v <= 0.0) {
            return Err(CertError::Contract("phi must be positive on [1,inf)".into()));
        }
        for w in vals.windows(2) {
            if w[1] < w[0] - 1e-12 {
                return Err(CertError::Contract("phi must be non-decreasing".into()));
            }
        }
        for i in 1..n - 1 {
            let lam = (ts[i] - ts[i - 1]) / (ts[i + 1] - ts[i - 1]);
            let chord = (1.0 - lam) * vals[i - 1] + lam * vals[i + 1];
            if vals[i] < chord - 1e-8 * chord.abs().max(1.0) {
                return Err(CertError::Contract("phi must be concave".into()));
            }
        }
        Ok(())
    }
}

/// The drift inequalities the verifier understands.
#[derive(Debug, Clone)]
pub enum DriftSpec {
    /// `PV <= beta V + b 1_C`
    OneStepGeometric {
        v: ScaleFn,
        beta: f64,
        b: f64,
        c: SetPredicate,
    },
    /// `PV <= V - phi(V) + b 1_C`
    PhiSubgeometric {
        v: ScaleFn,
        phi: PhiFn,
        b: f64,
        c: SetPredicate,
    },
    /// `PV <= V - W + b 1_C` and `PW <= W + b 1_C`
    DoubleControl {
        v: ScaleFn,
        w: ScaleFn,
        b: f64,
        c: SetPredicate,
    },
    /// `E_x[W(Phi_{n(x)})] <= beta W(x) + b 1_C(x)`
    Subsampled {
        w: ScaleFn,
        n: SubsampleFn,
        beta: f64,
        b: f64,
        c: SetPredicate,
    },
}

impl DriftSpec {
    fn validate(&self) -> Result<()> {
        let beta = match self {
            DriftSpec::OneStepGeometric { beta, .. } | DriftSpec::Subsampled { beta, .. } => {
                Some(*beta)
            }
            _ => None,
        };
        if let Some(beta) = beta {
            if !(0.0 < beta && beta < 1.0) {
                return Err(CertError::Domain(format!("beta = {beta} not in (0,1)")));
            }
        }
        let b = match self {
            DriftSpec::OneStepGeometric { b, .. }
            | DriftSpec::PhiSubgeometric { b, .. }
            | DriftSpec::DoubleControl { b, .. }
            | DriftSpec::Subsampled { b, .. } => *b,
        };
        if !b.is_finite() {
            return Err(CertError::Domain("b must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerifyMode {
    Exact,
    MonteCarlo,
}

/// Per-state outcome: the inequality slack (positive = satisfied) and, in
/// Monte Carlo mode, the estimate behind it.
#[derive(Debug, Clone, Serialize)]
pub struct StateMargin {
    pub state: State,
    pub margin: f64,
    pub estimate: Option<Estimate>,
    pub verdict: Verdict,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftCertificate {
    pub mode: VerifyMode,
    pub margins: Vec<StateMargin>,
    /// Second margin track for the double-control variant.
    pub secondary: Option<Vec<StateMargin>>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl DriftCertificate {
    fn aggregate(tracks: &[&[StateMargin]]) -> Verdict {
        let mut verdict = Verdict::Pass;
        for track in tracks {
            for m in *track {
                match m.verdict {
                    Verdict::Fail => return Verdict::Fail,
                    Verdict::Inconclusive => verdict = Verdict::Inconclusive,
                    Verdict::Pass => {}
                }
            }
        }
        verdict
    }

    pub fn failing_states(&self) -> Vec<State> {
        self.margins
            .iter()
            .chain(self.secondary.iter().flatten())
            .filter(|m| m.verdict == Verdict::Fail)
            .map(|m| m.state)
            .collect()
    }
}

/// Verification knobs.
#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Skip exact expectations even when the kernel offers them.
    pub force_mc: bool,
    pub replicates: u64,
    /// On INCONCLUSIVE, multiply replicates by 10 up to this many rounds.
    pub escalation_rounds: u32,
    pub master_seed: u64,
    pub workers: Option<usize>,
    /// Width of the margin confidence interval, in standard errors.
    pub ci_z: f64,
    /// Per-state simulation budget for subsampled checks.
    pub step_budget: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            force_mc: false,
            replicates: 10_000,
            escalation_rounds: 2,
            master_seed: 0,
            workers: None,
            ci_z: 3.0,
            step_budget: 10_000_000,
        }
    }
}

/// How a margin decomposes: `margin(x) = bound(x) - E_x[g(Phi_n)]` with a
/// per-state step count.
struct MarginProblem<'a> {
    bound: Box<dyn Fn(&State) -> f64 + 'a>,
    g: &'a ScaleFn,
    steps: Box<dyn Fn(&State) -> u64 + 'a>,
}

fn verify_margin_track(
    kernel: &dyn Kernel,
    problem: &MarginProblem<'_>,
    grid: &[State],
    opts: &VerifyOptions,
    stream_base: u64,
) -> Result<(VerifyMode, Vec<StateMargin>)> {
    // exact route: every grid state must support the n-step expectation
    let exact_all = !opts.force_mc
        && grid.iter().all(|x| {
            kernel
                .exact_nstep_expectation(x, (problem.steps)(x), &|y| problem.g.eval(y))
                .is_some()
        });
    if exact_all {
        let margins = grid
            .iter()
            .map(|x| {
                let e = kernel
                    .exact_nstep_expectation(x, (problem.steps)(x), &|y| problem.g.eval(y))
                    .expect("checked above");
                let margin = (problem.bound)(x) - e;
                StateMargin {
                    state: *x,
                    margin,
                    estimate: None,
                    verdict: if margin >= 0.0 {
                        Verdict::Pass
                    } else {
                        Verdict::Fail
                    },
                    note: None,
                }
            })
            .collect();
        return Ok((VerifyMode::Exact, margins));
    }

    // Monte Carlo route with escalation on inconclusive states
    let mut margins = Vec::with_capacity(grid.len());
    for (idx, x) in grid.iter().enumerate() {
        let n_steps = (problem.steps)(x);
        if n_steps > opts.step_budget {
            margins.push(StateMargin {
                state: *x,
                margin: f64::NAN,
                estimate: None,
                verdict: Verdict::Inconclusive,
                note: Some(format!(
                    "n(x) = {n_steps} exceeds step budget {}",
                    opts.step_budget
                )),
            });
            continue;
        }
        let mut replicates = opts.replicates;
        let mut round = 0u32;
        loop {
            let engine = McEngine::with_workers(opts.master_seed, opts.workers);
            // disjoint stream blocks per (track, state, escalation round)
            let offset = stream_base
                .wrapping_add(idx as u64 * 1_000_000_000)
                .wrapping_add(round as u64 * 107_374_182_400);
            let est = engine.mc_expectation(offset, replicates, |rng: &mut RngStream| {
                let mut y = *x;
                for _ in 0..n_steps {
                    y = kernel.sample(&y, rng);
                }
                problem.g.eval(&y)
            })?;
            let margin = (problem.bound)(x) - est.mean;
            let half = opts.ci_z * est.std_error;
            let mut note = None;
            if est.mean != 0.0 && est.std_error / est.mean.abs() > 10.0 {
                note = Some("exploding variance: std_error/mean > 10".into());
            }
            let verdict = if margin - half > 0.0 {
                Verdict::Pass
            } else if margin + half < 0.0 {
                Verdict::Fail
            } else {
                Verdict::Inconclusive
            };
            if verdict == Verdict::Inconclusive && round < opts.escalation_rounds {
                round += 1;
                replicates *= 10;
                continue;
            }
            margins.push(StateMargin {
                state: *x,
                margin,
                estimate: Some(est),
                verdict,
                note,
            });
            break;
        }
    }
    Ok((VerifyMode::MonteCarlo, margins))
}

/// Verify a one-step drift inequality (geometric or phi-subgeometric) on a
/// grid.
///
/// ```
/// use driftcert::drift::{verify_onestep, DriftSpec, Verdict, VerifyOptions};
/// use driftcert::zoo::BirthDeathChain;
/// use driftcert::{ScaleFn, SetPredicate, State};
///
/// // inward-drifting birth-death chain: PV <= V - V^{3/4} + 1_{x=0}
/// let kernel = BirthDeathChain::new(2.0);
/// let spec = DriftSpec::PhiSubgeometric {
///     v: ScaleFn::coord_power(1.0, 8.0),
///     phi: driftcert::drift::PhiFn::new(
///         driftcert::rates::PhiFamily::Polynomial { alpha: 0.25 },
///         1.0,
///     )?,
///     b: 1.0,
///     c: SetPredicate::coord_le(0.0),
/// };
/// let grid: Vec<State> = (0..50).map(State::Lattice).collect();
/// let cert = verify_onestep(&kernel, &spec, &grid, &VerifyOptions::default())?;
/// assert_eq!(cert.verdict, Verdict::Pass);
/// # Ok::<(), driftcert::CertError>(())
/// ```
pub fn verify_onestep(
    kernel: &dyn Kernel,
    spec: &DriftSpec,
    grid: &[State],
    opts: &VerifyOptions,
) -> Result<DriftCertificate> {
    spec.validate()?;
    if grid.is_empty() {
        return Err(CertError::Contract("grid must be nonempty".into()));
    }
    let (bound, v): (Box<dyn Fn(&State) -> f64>, &ScaleFn) = match spec {
        DriftSpec::OneStepGeometric { v, beta, b, c } => {
            let (beta, b, c) = (*beta, *b, c.clone());
            (
                Box::new(move |x: &State| beta * v.eval(x) + b * c.indicator(x)),
                v,
            )
        }
        DriftSpec::PhiSubgeometric { v, phi, b, c } => {
            let t_hi = grid
                .iter()
                .map(|x| v.eval(x))
                .fold(1.0f64, f64::max)
                .min(1e300);
            phi.check_shape(t_hi)?;
            let (phi, b, c) = (*phi, *b, c.clone());
            (
                Box::new(move |x: &State| {
                    v.eval(x) - phi.ln_eval(v.ln_eval(x)).exp() + b * c.indicator(x)
                }),
                v,
            )
        }
        _ => {
            return Err(CertError::Contract(
                "verify_onestep takes a one-step-geometric or phi-subgeometric spec".into(),
            ))
        }
    };
    let problem = MarginProblem {
        bound,
        g: v,
        steps: Box::new(|_| 1),
    };
    let (mode, margins) = verify_margin_track(kernel, &problem, grid, opts, 0)?;
    let verdict = DriftCertificate::aggregate(&[&margins]);
    Ok(DriftCertificate {
        mode,
        margins,
        secondary: None,
        verdict,
        notes: vec![],
    })
}

/// Verify both inequalities of the double-control condition. The certificate
/// carries one margin track per inequality.
pub fn verify_double_control(
    kernel: &dyn Kernel,
    spec: &DriftSpec,
    grid: &[State],
    opts: &VerifyOptions,
) -> Result<DriftCertificate> {
    spec.validate()?;
    let DriftSpec::DoubleControl { v, w, b, c } = spec else {
        return Err(CertError::Contract(
            "verify_double_control takes a double-control spec".into(),
        ));
    };
    if grid.is_empty() {
        return Err(CertError::Contract("grid must be nonempty".into()));
    }
    let (b, cset) = (*b, c.clone());
    let w1 = w.clone();
    let first = MarginProblem {
        bound: Box::new(move |x: &State| v.eval(x) - w1.eval(x) + b * cset.indicator(x)),
        g: v,
        steps: Box::new(|_| 1),
    };
    let cset2 = c.clone();
    let second = MarginProblem {
        bound: Box::new(move |x: &State| w.eval(x) + b * cset2.indicator(x)),
        g: w,
        steps: Box::new(|_| 1),
    };
    let (mode1, margins1) = verify_margin_track(kernel, &first, grid, opts, 0)?;
    let (mode2, margins2) =
        verify_margin_track(kernel, &second, grid, opts, 1 << 60)?;
    let verdict = DriftCertificate::aggregate(&[&margins1, &margins2]);
    Ok(DriftCertificate {
        mode: if mode1 == VerifyMode::Exact && mode2 == VerifyMode::Exact {
            VerifyMode::Exact
        } else {
            VerifyMode::MonteCarlo
        },
        margins: margins1,
        secondary: Some(margins2),
        verdict,
        notes: vec![],
    })
}

/// Verify the subsampled drift `E_x[W(Phi_{n(x)})] <= beta W(x) + b 1_C(x)`.
pub fn verify_subsampled(
    kernel: &dyn Kernel,
    spec: &DriftSpec,
    grid: &[State],
    opts: &VerifyOptions,
) -> Result<DriftCertificate> {
    spec.validate()?;
    let DriftSpec::Subsampled { w, n, beta, b, c } = spec else {
        return Err(CertError::Contract(
            "verify_subsampled takes a subsampled spec".into(),
        ));
    };
    if grid.is_empty() {
        return Err(CertError::Contract("grid must be nonempty".into()));
    }
    if let Some(x) = grid.iter().find(|x| n.eval(x) == 0) {
        return Err(CertError::Contract(format!(
            "subsample schedule is 0 at {x}"
        )));
    }
    let (beta, b, cset) = (*beta, *b, c.clone());
    let problem = MarginProblem {
        bound: Box::new(move |x: &State| beta * w.eval(x) + b * cset.indicator(x)),
        g: w,
        steps: Box::new(|x| n.eval(x)),
    };
    let (mode, margins) = verify_margin_track(kernel, &problem, grid, opts, 0)?;
    let verdict = DriftCertificate::aggregate(&[&margins]);
    Ok(DriftCertificate {
        mode,
        margins,
        secondary: None,
        verdict,
        notes: vec![],
    })
}

/// An indexed family of scale functions `k -> V_k`.
#[derive(Clone)]
pub struct IndexedScale {
    name: String,
    f: Arc<dyn Fn(u64, &State) -> f64 + Send + Sync>,
}

impl IndexedScale {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(u64, &State) -> f64 + Send + Sync + 'static,
    ) -> Self {
        IndexedScale {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, k: u64, x: &State) -> f64 {
        (self.f)(k, x)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl std::fmt::Debug for IndexedScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "IndexedScale({})", self.name)
    }
}

/// The nested family of drift conditions: for each index `k` and state `x`,
///
/// `E_x[V_{k+n(x)}(Phi_{n(x)})] + E_x[sum_{j<n(x)} r(k+j) f(Phi_j)]
///   <= V_k(x) + S_k(x) 1_C(x)`.
#[derive(Debug, Clone)]
pub struct NestedSpec {
    pub v_family: IndexedScale,
    pub s_family: IndexedScale,
    pub r: RateSeq,
    pub f: ScaleFn,
    pub n: SubsampleFn,
    pub c: SetPredicate,
}

/// Verify the nested family over `grid` for each `k` in `k_range`.
pub fn verify_nested_family(
    kernel: &dyn Kernel,
    spec: &NestedSpec,
    grid: &[State],
    k_range: std::ops::Range<u64>,
    opts: &VerifyOptions,
) -> Result<DriftCertificate> {
    if grid.is_empty() || k_range.is_empty() {
        return Err(CertError::Contract(
            "grid and k_range must be nonempty".into(),
        ));
    }
    let mut margins = Vec::new();
    let mut mode = VerifyMode::Exact;
    let mut stream = 0u64;
    for k in k_range {
        for x in grid {
            let n = spec.n.eval(x);
            if n == 0 {
                return Err(CertError::Contract(format!(
                    "subsample schedule is 0 at {x}"
                )));
            }
            let rhs = spec.v_family.eval(k, x) + spec.s_family.eval(k, x) * spec.c.indicator(x);
            let exact = (!opts.force_mc)
                .then(|| nested_lhs_exact(kernel, spec, k, x, n))
                .flatten();
            let (margin, estimate, verdict, note) = match exact {
                Some(lhs) => {
                    let m = rhs - lhs;
                    (
                        m,
                        None,
                        if m >= 0.0 { Verdict::Pass } else { Verdict::Fail },
                        None,
                    )
                }
                None => {
                    mode = VerifyMode::MonteCarlo;
                    let engine = McEngine::with_workers(opts.master_seed, opts.workers);
                    let est = engine.mc_expectation(
                        stream.wrapping_mul(1_000_000_000),
                        opts.replicates,
                        |rng: &mut RngStream| {
                            let mut y = *x;
                            let mut modulated = 0.0;
                            for j in 0..n {
                                modulated += spec.r.eval(k + j) * spec.f.eval(&y);
                                y = kernel.sample(&y, rng);
                            }
                            spec.v_family.eval(k + n, &y) + modulated
                        },
                    )?;
                    let m = rhs - est.mean;
                    let half = opts.ci_z * est.std_error;
                    let v = if m - half > 0.0 {
                        Verdict::Pass
                    } else if m + half < 0.0 {
                        Verdict::Fail
                    } else {
                        Verdict::Inconclusive
                    };
                    (m, Some(est), v, Some(format!("k={k}")))
                }
            };
            margins.push(StateMargin {
                state: *x,
                margin,
                estimate,
                verdict,
                note: note.or(Some(format!("k={k}"))),
            });
            stream += 1;
        }
    }
    let verdict = DriftCertificate::aggregate(&[&margins]);
    Ok(DriftCertificate {
        mode,
        margins,
        secondary: None,
        verdict,
        notes: vec![],
    })
}

/// Exact nested left-hand side by pushing the point mass at `x` through the
/// transition support, accumulating the modulated sum along the way.
fn nested_lhs_exact(
    kernel: &dyn Kernel,
    spec: &NestedSpec,
    k: u64,
    x: &State,
    n: u64,
) -> Option<f64> {
    let mut dist = vec![(*x, 1.0f64)];
    let mut modulated = 0.0;
    for j in 0..n {
        let ef: f64 = dist.iter().map(|(y, p)| p * spec.f.eval(y)).sum();
        modulated += spec.r.eval(k + j) * ef;
        let mut next: Vec<(State, f64)> = Vec::with_capacity(dist.len() * 2);
        for (y, p) in &dist {
            for (z, q) in kernel.transition_support(y)? {
                match next.iter_mut().find(|(s, _)| *s == z) {
                    Some((_, acc)) => *acc += p * q,
                    None => next.push((z, p * q)),
                }
            }
        }
        next.retain(|&(_, p)| p > 1e-300);
        dist = next;
    }
    let ev: f64 = dist
        .iter()
        .map(|(y, p)| p * spec.v_family.eval(k + n, y))
        .sum();
    Some(ev + modulated)
}

/// One row of the finite-state norm-difference diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct WnormPair {
    pub x: usize,
    pub x_other: usize,
    /// `n * ||P^n(x,.) - P^n(x',.)||_W / (V(x) + V(x'))` for `n = 1..=n_max`.
    pub ratios: Vec<f64>,
    pub sup_ratio: f64,
    /// Running-max stabilization: no new maximum appears in the second half.
    pub stabilized: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WnormDiagnostic {
    pub n_max: u64,
    pub pairs: Vec<WnormPair>,
    pub pass: bool,
}

/// Tabulate `n ||P^n(x,.) - P^n(x',.)||_W / (V(x) + V(x'))` for each pair
/// and flag whether the running maximum has stabilized (no new maximum in
/// the second half of the horizon).
///
/// ```
/// use driftcert::drift::wnorm_difference_diagnostic;
/// use driftcert::{FiniteKernel, ScaleFn};
///
/// // the periodic swap chain never mixes: the ratio grows linearly in n
/// let w = ScaleFn::coord_power(1.0, 1.0);
/// let diag = wnorm_difference_diagnostic(&FiniteKernel::swap(), &w, &w, 100, &[(0, 1)])?;
/// assert!(!diag.pass);
/// # Ok::<(), driftcert::CertError>(())
/// ```
pub fn wnorm_difference_diagnostic(
    kernel: &dyn Kernel,
    w: &ScaleFn,
    v: &ScaleFn,
    n_max: u64,
    pairs: &[(usize, usize)],
) -> Result<WnormDiagnostic> {
    let fin = kernel
        .finite()
        .ok_or_else(|| CertError::Capability("W-norm diagnostic needs a finite kernel".into()))?;
    let dim = fin.len();
    let w_vals: Vec<f64> = (0..dim).map(|j| w.eval(&State::Lattice(j as i64))).collect();
    let mut out = Vec::with_capacity(pairs.len());
    for &(x, xp) in pairs {
        if x >= dim || xp >= dim {
            return Err(CertError::Contract(format!(
                "pair ({x},{xp}) out of range (dim {dim})"
            )));
        }
        let denom = v.eval(&State::Lattice(x as i64)) + v.eval(&State::Lattice(xp as i64));
        let mut p = vec![0.0; dim];
        p[x] = 1.0;
        let mut q = vec![0.0; dim];
        q[xp] = 1.0;
        let mut ratios = Vec::with_capacity(n_max as usize);
        for n in 1..=n_max {
            p = fin.step_distribution(&p);
            q = fin.step_distribution(&q);
            let norm: f64 = (0..dim).map(|j| (p[j] - q[j]).abs() * w_vals[j]).sum();
            ratios.push(n as f64 * norm / denom);
        }
        let half = ratios.len() / 2;
        let first_max = ratios[..half.max(1)].iter().cloned().fold(0.0, f64::max);
        let second_max = ratios[half..].iter().cloned().fold(0.0, f64::max);
        let sup_ratio = first_max.max(second_max);
        let stabilized = second_max <= first_max * (1.0 + 1e-12);
        out.push(WnormPair {
            x,
            x_other: xp,
            ratios,
            sup_ratio,
            stabilized,
        });
    }
    let pass = out.iter().all(|p| p.stabilized);
    Ok(WnormDiagnostic {
        n_max,
        pairs: out,
        pass,
    })
}

/// Running values of `P^k W(x0)` for `k = 0..=n_max` — the empirical probe
/// of the bounded-orbit hypothesis behind subsampling plans.
pub fn pkw_running(kernel: &dyn Kernel, x0: usize, w: &ScaleFn, n_max: u64) -> Result<Vec<f64>> {
    let fin = kernel
        .finite()
        .ok_or_else(|| CertError::Capability("P^k W probe needs a finite kernel".into()))?;
    let dim = fin.len();
    let w_vals: Vec<f64> = (0..dim).map(|j| w.eval(&State::Lattice(j as i64))).collect();
    let mut p = vec![0.0; dim];
    p[x0] = 1.0;
    let mut out = Vec::with_capacity(n_max as usize + 1);
    out.push(w_vals[x0]);
    for _ in 1..=n_max {
        p = fin.step_distribution(&p);
        out.push((0..dim).map(|j| p[j] * w_vals[j]).sum());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::FiniteKernel;
    use crate::zoo::{BirthDeathCalibration, BirthDeathChain, IdentityKernel};

    fn opts() -> VerifyOptions {
        VerifyOptions {
            master_seed: 2024,
            ..Default::default()
        }
    }

    /// The shipped birth-death calibration passes the phi-subgeometric
    /// drift exactly on 0..10^4.
    #[test]
    fn zoo_calibration_passes_exactly() {
        let cal = BirthDeathCalibration::shipped();
        let kernel = BirthDeathChain::new(cal.d);
        let spec = DriftSpec::PhiSubgeometric {
            v: ScaleFn::coord_power(1.0, cal.v_exponent),
            phi: PhiFn::new(
                PhiFamily::Polynomial {
                    alpha: 1.0 - cal.phi_exponent,
                },
                cal.phi_c,
            )
            .unwrap(),
            b: cal.b,
            c: SetPredicate::coord_le(cal.c_threshold as f64),
        };
        let mut grid = crate::grid::lattice_range(0, 64);
        grid.extend(crate::grid::lattice_log(64, 10_000, 16));
        let cert = verify_onestep(&kernel, &spec, &grid, &opts()).unwrap();
        assert_eq!(cert.mode, VerifyMode::Exact);
        assert_eq!(cert.verdict, Verdict::Pass, "{:?}", cert.failing_states());
    }

    #[test]
    fn identity_kernel_fails_geometric_off_c() {
        let spec = DriftSpec::OneStepGeometric {
            v: ScaleFn::coord_power(1.0, 2.0),
            beta: 0.5,
            b: 8.0, // covers beta V + b >= V up to V = 16 on C
            c: SetPredicate::coord_le(3.0),
        };
        let grid = crate::grid::lattice_range(0, 20);
        let cert = verify_onestep(&IdentityKernel, &spec, &grid, &opts()).unwrap();
        assert_eq!(cert.verdict, Verdict::Fail);
        // failures exactly off C (where beta V < V = PV)
        assert!(cert
            .failing_states()
            .iter()
            .all(|s| s.coord() > 3.0));
    }

    #[test]
    fn constant_v_passes_on_swap_with_full_c() {
        let spec = DriftSpec::OneStepGeometric {
            v: ScaleFn::constant(1.0),
            beta: 0.5,
            b: 0.5,
            c: SetPredicate::everything(),
        };
        let grid = vec![State::Lattice(0), State::Lattice(1)];
        let cert = verify_onestep(&FiniteKernel::swap(), &spec, &grid, &opts()).unwrap();
        assert_eq!(cert.verdict, Verdict::Pass);
        for m in &cert.margins {
            assert!(m.margin.abs() < 1e-12); // beta + b - 1 = 0 exactly
        }
    }

    #[test]
    fn double_control_from_phi_on_zoo_chain() {
        // Prop 2.3 route: W proportional to phi(V) satisfies both inequalities
        let cal = BirthDeathCalibration::shipped();
        let kernel = BirthDeathChain::new(cal.d);
        let v = ScaleFn::coord_power(1.0, cal.v_exponent);
        let w = ScaleFn::coord_power(1.0, cal.v_exponent * cal.phi_exponent).scale(cal.phi_c);
        let spec = DriftSpec::DoubleControl {
            v,
            w,
            b: cal.b,
            c: SetPredicate::coord_le(cal.c_threshold as f64),
        };
        let mut grid = crate::grid::lattice_range(0, 64);
        grid.extend(crate::grid::lattice_log(64, 10_000, 16));
        let cert = verify_double_control(&kernel, &spec, &grid, &opts()).unwrap();
        assert_eq!(cert.mode, VerifyMode::Exact);
        assert_eq!(cert.verdict, Verdict::Pass, "{:?}", cert.failing_states());
    }

    #[test]
    fn double_control_with_unit_w_second_track_trivial() {
        let cal = BirthDeathCalibration::shipped();
        let kernel = BirthDeathChain::new(cal.d);
        let spec = DriftSpec::DoubleControl {
            v: ScaleFn::coord_power(1.0, cal.v_exponent),
            w: ScaleFn::constant(1.0),
            b: cal.b,
            c: SetPredicate::coord_le(cal.c_threshold as f64),
        };
        let grid = crate::grid::lattice_range(0, 100);
        let cert = verify_double_control(&kernel, &spec, &grid, &opts()).unwrap();
        assert_eq!(cert.verdict, Verdict::Pass);
        // PW = W = 1, so the second margin is b 1_C >= 0 everywhere
        for m in cert.secondary.as_ref().unwrap() {
            assert!(m.margin >= 0.0);
        }
    }

    #[test]
    fn double_control_with_w_equal_v_fails() {
        // V - V + b 1_C < PV away from C on a chain that actually moves
        let cal = BirthDeathCalibration::shipped();
        let kernel = BirthDeathChain::new(cal.d);
        let v = ScaleFn::coord_power(1.0, cal.v_exponent);
        let spec = DriftSpec::DoubleControl {
            v: v.clone(),
            w: v,
            b: cal.b,
            c: SetPredicate::coord_le(cal.c_threshold as f64),
        };
        let grid = crate::grid::lattice_log(100, 10_000, 8);
        let cert = verify_double_control(&kernel, &spec, &grid, &opts()).unwrap();
        assert_eq!(cert.verdict, Verdict::Fail);
    }

    #[test]
    fn subsampled_with_unit_schedule_matches_onestep() {
        let kernel = BirthDeathChain::new(2.0);
        let w = ScaleFn::coord_power(1.0, 2.0);
        let c = SetPredicate::coord_le(10.0);
        let grid = crate::grid::lattice_range(0, 50);
        let sub = DriftSpec::Subsampled {
            w: w.clone(),
            n: SubsampleFn::constant(1),
            beta: 0.9,
            b: 50.0,
            c: c.clone(),
        };
        let one = DriftSpec::OneStepGeometric {
            v: w,
            beta: 0.9,
            b: 50.0,
            c,
        };
        let cs = verify_subsampled(&kernel, &sub, &grid, &opts()).unwrap();
        let co = verify_onestep(&kernel, &one, &grid, &opts()).unwrap();
        for (a, b) in cs.margins.iter().zip(co.margins.iter()) {
            assert_eq!(a.margin, b.margin);
        }
    }

    #[test]
    fn nested_vacuous_family_passes() {
        let spec = NestedSpec {
            v_family: IndexedScale::new("1", |_, _| 1.0),
            s_family: IndexedScale::new("1", |_, _| 1.0),
            r: RateSeq::custom("0", |_| 0.0),
            f: ScaleFn::constant(1.0),
            n: SubsampleFn::constant(1),
            c: SetPredicate::everything(),
        };
        let grid = crate::grid::lattice_range(0, 5);
        let cert =
            verify_nested_family(&IdentityKernel, &spec, &grid, 0..3, &opts()).unwrap();
        assert_eq!(cert.verdict, Verdict::Pass);
    }

    #[test]
    fn nested_unit_schedule_recovers_one_step_check() {
        // V_k(x) = V(x) + sum_{j<k} r(j) with r = 1, f = 1, n = 1 reduces to
        // PV <= V - 1 + S_0 1_C in disguise; exact on the zoo chain.
        let cal = BirthDeathCalibration::shipped();
        let kernel = BirthDeathChain::new(cal.d);
        let v = ScaleFn::coord_power(1.0, cal.v_exponent);
        let vf = v.clone();
        let spec = NestedSpec {
            v_family: IndexedScale::new("V+k", move |k, x| vf.eval(x) + k as f64),
            s_family: IndexedScale::new("S", {
                let b = cal.b;
                move |_, _| b
            }),
            r: RateSeq::custom("1", |_| 1.0),
            f: ScaleFn::constant(1.0),
            n: SubsampleFn::constant(1),
            c: SetPredicate::coord_le(cal.c_threshold as f64),
        };
        let grid = crate::grid::lattice_log(cal.c_threshold, 10_000, 8);
        let cert = verify_nested_family(&kernel, &spec, &grid, 0..4, &opts()).unwrap();
        assert_eq!(cert.mode, VerifyMode::Exact);
        assert_eq!(cert.verdict, Verdict::Pass, "{:?}", cert.failing_states());
    }

    #[test]
    fn wnorm_identical_rows_ratio_zero() {
        let k = FiniteKernel::lazy_birth_death(10, 0.5, |_| 0.4).unwrap();
        let w = ScaleFn::constant(1.0);
        let v = ScaleFn::coord_power(1.0, 1.0);
        let diag = wnorm_difference_diagnostic(&k, &w, &v, 50, &[(3, 3)]).unwrap();
        assert!(diag.pairs[0].ratios.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn wnorm_periodic_swap_fails() {
        let k = FiniteKernel::swap();
        let w = ScaleFn::constant(1.0);
        let v = ScaleFn::constant(1.0);
        let diag = wnorm_difference_diagnostic(&k, &w, &v, 200, &[(0, 1)]).unwrap();
        assert!(!diag.pass);
        // the TV distance stays 2, so the ratio grows linearly
        let r = &diag.pairs[0].ratios;
        assert!(r[199] > r[99]);
    }
}
