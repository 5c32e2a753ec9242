//! The dominating process `D = (Z, M)`: a slowed-down exponentiated D/M/1
//! workload whose level `Z` jumps by a Pareto-tailed kernel every `M` steps.
//!
//! `U_{n+1} = max(U_n + E_{n+1} - ln(1/beta), 0)` is the workload chain,
//! `Y = kappa e^U` its exponentiated version with tail
//! `P[Y_1 > v | Y_0 = u] = beta u / v` for `v >= max(beta u, kappa)`, and
//! `D` holds its level for a state-dependent countdown `m` before each jump.

use crate::engine::McEngine;
use crate::error::{CertError, Result};
use crate::kernel::Kernel;
use crate::moments::{self, MomentReport, SweepOptions};
use crate::rng::RngStream;
use crate::scale::{SetPredicate, SubsampleFn};
use crate::state::State;
use serde::{Deserialize, Serialize};

/// The jump-spacing family `n*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NStar {
    /// `n*(z) = ceil(z^gamma)`
    Power { gamma: f64 },
    /// `n*(z) = ceil((ln z)^gamma) \/ 1`
    LogPower { gamma: f64 },
    /// `n*(z) = n`
    Constant { n: u64 },
}

impl NStar {
    pub fn eval(&self, z: f64) -> u64 {
        let v = match *self {
            NStar::Power { gamma } => z.powf(gamma).ceil(),
            NStar::LogPower { gamma } => z.ln().max(0.0).powf(gamma).ceil(),
            NStar::Constant { n } => return n,
        };
        if v >= u64::MAX as f64 {
            u64::MAX
        } else {
            (v as u64).max(1)
        }
    }
}

/// Parameters of the dominating process.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DomParams {
    pub beta: f64,
    pub kappa: f64,
    pub n_star: NStar,
}

impl DomParams {
    pub fn new(beta: f64, kappa: f64, n_star: NStar) -> Result<Self> {
        let e_inv = (-1.0f64).exp();
        if !(0.0 < beta && beta < e_inv) {
            return Err(CertError::Domain(format!(
                "beta = {beta} must lie strictly inside (0, e^-1 = {e_inv:.6})"
            )));
        }
        if kappa < 1.0 {
            return Err(CertError::Domain(format!(
                "kappa = {kappa} must be >= 1 so levels stay in [1, inf)"
            )));
        }
        match n_star {
            NStar::Power { gamma } | NStar::LogPower { gamma } if gamma < 0.0 => {
                return Err(CertError::Domain("n* exponent must be >= 0".into()));
            }
            NStar::Constant { n } if n == 0 => {
                return Err(CertError::Domain("constant n* must be >= 1".into()));
            }
            _ => {}
        }
        Ok(DomParams {
            beta,
            kappa,
            n_star,
        })
    }

    pub fn n_star_of(&self, z: f64) -> u64 {
        self.n_star.eval(z)
    }

    /// The small set: levels in `[kappa, kappa/beta]`, any countdown.
    pub fn small_set(&self) -> SetPredicate {
        let (k, hi) = (self.kappa, self.kappa / self.beta);
        SetPredicate::new(format!("{{z in [{k}, {hi:.4}]}}"), move |x| {
            matches!(*x, State::Dom { z, .. } if k <= z && z <= hi)
        })
    }

    /// Fresh-jump start state `(z, n*(z))`.
    pub fn start(&self, z: f64) -> State {
        State::Dom {
            z,
            m: clamp_u32(self.n_star_of(z)),
        }
    }

    /// Start state one step before a jump.
    pub fn start_pre_jump(&self, z: f64) -> State {
        State::Dom { z, m: 1 }
    }

    /// The countdown subsampling schedule `n(z, m) = m`.
    pub fn schedule(&self) -> SubsampleFn {
        SubsampleFn::countdown()
    }
}

fn clamp_u32(n: u64) -> u32 {
    n.min(u32::MAX as u64) as u32
}

/// One step of the D/M/1 workload `U_{n+1} = max(U_n + E - ln(1/beta), 0)`.
pub fn step_u(u: f64, beta: f64, rng: &mut RngStream) -> f64 {
    (u + rng.exp1() + beta.ln()).max(0.0)
}

/// One jump of the level kernel, by inverse CDF.
///
/// `max(beta y / Uniform(0,1], kappa)` realizes the tail
/// `P[Y_1 > v] = beta y / v` on `v >= max(beta y, kappa)` in one formula:
/// for `beta y < kappa` it places an atom of mass `1 - beta y / kappa`
/// at `kappa`, and a Pareto(1) tail beyond.
pub fn step_y(y: f64, params: &DomParams, rng: &mut RngStream) -> f64 {
    (params.beta * y / rng.uniform_oc()).max(params.kappa)
}

/// One step of `D`: count down, or jump the level and reset the countdown.
pub fn step_d(s: &State, params: &DomParams, rng: &mut RngStream) -> Result<State> {
    let State::Dom { z, m } = *s else {
        return Err(CertError::Contract(format!(
            "dominating process state must be a (z, m) pair, got {s}"
        )));
    };
    if m >= 2 {
        Ok(State::Dom { z, m: m - 1 })
    } else {
        let z1 = step_y(z, params, rng);
        Ok(State::Dom {
            z: z1,
            m: clamp_u32(params.n_star_of(z1)),
        })
    }
}

/// `D` as a [`Kernel`]. Exact expectations are available for horizons up to
/// the current countdown (deterministic holds plus at most one jump,
/// integrated by quadrature over the jump law).
#[derive(Debug, Clone, Copy)]
pub struct DomKernel {
    pub params: DomParams,
}

impl DomKernel {
    pub fn new(params: DomParams) -> Self {
        DomKernel { params }
    }

    /// Exact `E[f(D_1) | level jumps from z]`: atom at `kappa` plus the
    /// Pareto integral, via the substitution `y = lo e^s`.
    fn jump_expectation(&self, z: f64, f: &dyn Fn(&State) -> f64) -> Option<f64> {
        let p = &self.params;
        let lo = (p.beta * z).max(p.kappa);
        let atom_mass = (1.0 - p.beta * z / p.kappa).max(0.0);
        let atom = if atom_mass > 0.0 {
            atom_mass
                * f(&State::Dom {
                    z: p.kappa,
                    m: clamp_u32(p.n_star_of(p.kappa)),
                })
        } else {
            0.0
        };
        // integral part: (beta z / lo) * \int_0^inf f(lo e^s, n*(.)) e^{-s} ds
        let g = |s: f64| {
            let y = lo * s.exp();
            f(&State::Dom {
                z: y,
                m: clamp_u32(p.n_star_of(y)),
            }) * (-s).exp()
        };
        let mut upper = 80.0f64;
        // extend the horizon until the integrand has died; bail out if it
        // refuses to decay (f grows at least linearly in the level)
        while g(upper) > 1e-14 * (1.0 + g(0.0).abs()) {
            upper *= 2.0;
            if upper > 20_000.0 {
                return None;
            }
        }
        let integral = simpson(&g, 0.0, upper, (upper as usize * 64).max(4096));
        Some(atom + (p.beta * z / lo) * integral)
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

impl Kernel for DomKernel {
    fn sample(&self, x: &State, rng: &mut RngStream) -> State {
        step_d(x, &self.params, rng).expect("dominating process state")
    }

    fn contains(&self, x: &State) -> bool {
        matches!(*x, State::Dom { z, m } if z >= self.params.kappa - 1e-12
            && m >= 1
            && u64::from(m) <= self.params.n_star_of(z))
    }

    fn exact_nstep_expectation(&self, x: &State, n: u64, f: &dyn Fn(&State) -> f64) -> Option<f64> {
        let State::Dom { z, m } = *x else {
            return None;
        };
        if n == 0 {
            return Some(f(x));
        }
        let m = u64::from(m);
        if n < m {
            // pure countdown, deterministic
            return Some(f(&State::Dom {
                z,
                m: clamp_u32(m - n),
            }));
        }
        if n == m {
            return self.jump_expectation(z, f);
        }
        None // more than one jump: fall back to Monte Carlo
    }
}

/// The tameness-exponent bound `alpha_beta`: the unique root in (0,1) of
/// `ln(1 - alpha) = alpha ln beta`, which exists only for `beta < e^{-1}`.
pub fn alpha_beta(beta: f64) -> Result<f64> {
    let e_inv = (-1.0f64).exp();
    if !(0.0 < beta && beta < e_inv) {
        return Err(CertError::Domain(format!(
            "alpha_beta needs beta in (0, e^-1); the equation has no root in (0,1) for beta = {beta}"
        )));
    }
    let f = |a: f64| (1.0 - a).ln() - a * beta.ln();
    let (mut lo, mut hi) = (1e-9, 1.0 - 1e-15);
    if f(hi) > 0.0 {
        // root indistinguishable from 1 at f64 resolution (tiny beta)
        return Ok(hi);
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Drift constants of the level kernel for the scale `z^alpha`:
/// `beta' = beta^alpha/(1-alpha)` off the small set, and the on-set bound
/// `b' = ((1-beta^alpha)/(1-alpha)) kappa^alpha`.
pub fn drift_constants(alpha: f64, params: &DomParams) -> Result<(f64, f64)> {
    let ab = alpha_beta(params.beta)?;
    if !(0.0 < alpha && alpha < ab) {
        return Err(CertError::Domain(format!(
            "alpha = {alpha} outside (0, alpha_beta = {ab:.6}); beta' would reach 1"
        )));
    }
    let beta_prime = params.beta.powf(alpha) / (1.0 - alpha);
    let b_prime = (1.0 - params.beta.powf(alpha)) / (1.0 - alpha) * params.kappa.powf(alpha);
    Ok((beta_prime, b_prime))
}

/// The three moment experiments on `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Prop42Case {
    /// Power spacing `n* = ceil(z^gamma)`: polynomial moment
    /// `E[(tau_C)^{1/eta}] <= C z^alpha`.
    PowerMoment,
    /// Log-power spacing: stretched-exponential moment
    /// `E[exp(eta alpha tau_C^{1/(1+gamma)})] <= C z^alpha`.
    ExpMoment,
    /// `n* = 1` (D degenerates to Y): geometric moment with base
    /// `(1-alpha) beta^{-alpha} = 1/beta'`.
    Geometric,
}

/// Run one of the moment experiments over a level grid, starting each path
/// one step before a jump.
///
/// All parameter constraints are validated before any simulation; a
/// violation is a scope error naming the failed inequality.
#[allow(clippy::too_many_arguments)]
pub fn prop42_experiment(
    case: Prop42Case,
    params: &DomParams,
    alpha: f64,
    eta: f64,
    z_grid: &[f64],
    opts: &SweepOptions,
) -> Result<MomentReport> {
    if z_grid.is_empty() {
        return Err(CertError::Contract("z_grid must be nonempty".into()));
    }
    let ab = alpha_beta(params.beta)?;
    if !(0.0 < alpha && alpha < ab) {
        return Err(CertError::Scope(format!(
            "violated: 0 < alpha < alpha_beta (alpha = {alpha}, alpha_beta = {ab:.6})"
        )));
    }
    // per-case constraint validation and the statistic ln-transform of tau
    let ln_stat: Box<dyn Fn(u64) -> f64 + Sync> = match case {
        Prop42Case::PowerMoment => {
            let NStar::Power { gamma } = params.n_star else {
                return Err(CertError::Contract(
                    "case PowerMoment needs the power spacing family".into(),
                ));
            };
            if gamma < ab {
                if !(gamma / alpha < eta && eta <= 1.0) {
                    return Err(CertError::Scope(format!(
                        "violated: eta in (gamma/alpha, 1] for gamma < alpha_beta \
                         (eta = {eta}, gamma/alpha = {:.6})",
                        gamma / alpha
                    )));
                }
            } else if eta <= gamma / alpha {
                return Err(CertError::Scope(format!(
                    "violated: eta > gamma/alpha for gamma >= alpha_beta \
                     (eta = {eta}, gamma/alpha = {:.6})",
                    gamma / alpha
                )));
            }
            Box::new(move |t: u64| (t as f64).ln() / eta)
        }
        Prop42Case::ExpMoment => {
            let NStar::LogPower { gamma } = params.n_star else {
                return Err(CertError::Contract(
                    "case ExpMoment needs the log-power spacing family".into(),
                ));
            };
            let bound = ((1.0 + gamma) / alpha * ((1.0 - alpha) / params.beta.powf(alpha)).ln())
                .powf(1.0 / (1.0 + gamma));
            if !(0.0 < eta && eta < bound) {
                return Err(CertError::Scope(format!(
                    "violated: eta < {{(1+gamma)/alpha ln((1-alpha)/beta^alpha)}}^{{1/(1+gamma)}} \
                     (eta = {eta}, bound = {bound:.6})"
                )));
            }
            let e = 1.0 / (1.0 + gamma);
            Box::new(move |t: u64| eta * alpha * (t as f64).powf(e))
        }
        Prop42Case::Geometric => {
            if params.n_star != (NStar::Constant { n: 1 }) {
                return Err(CertError::Contract(
                    "case Geometric needs n* = 1".into(),
                ));
            }
            let base = (1.0 - alpha) * params.beta.powf(-alpha);
            if base <= 1.0 {
                return Err(CertError::Scope(format!(
                    "violated: (1-alpha) beta^-alpha > 1 (value = {base:.6})"
                )));
            }
            let ln_base = base.ln();
            Box::new(move |t: u64| t as f64 * ln_base)
        }
    };
    // cap guard in log-space
    let worst = ln_stat(opts.cap);
    if worst > 700.0 {
        return Err(CertError::Contract(format!(
            "statistic overflows at the cap: ln value {worst:.1} > 700; lower the cap"
        )));
    }

    let kernel = DomKernel::new(*params);
    let c = params.small_set();
    let engine = McEngine::with_workers(opts.master_seed, opts.workers);
    let mut points = Vec::with_capacity(z_grid.len());
    for (idx, &z) in z_grid.iter().enumerate() {
        if z < params.kappa {
            return Err(CertError::Contract(format!(
                "grid level {z} below kappa = {}",
                params.kappa
            )));
        }
        let x0 = params.start_pre_jump(z);
        let samples = engine.run_replicates(
            idx as u64 * opts.replicates,
            opts.replicates,
            |_, rng: &mut RngStream| {
                let mut x = x0;
                for n in 1..=opts.cap {
                    x = kernel.sample(&x, rng);
                    if c.contains(&x) {
                        return (n, false);
                    }
                }
                (opts.cap, true)
            },
        );
        let replicates = samples.len() as u64;
        let uncensored: Vec<f64> = samples
            .iter()
            .filter(|&&(_, cen)| !cen)
            .map(|&(t, _)| ln_stat(t).exp())
            .collect();
        let censored = replicates - uncensored.len() as u64;
        let mut truncated = crate::engine::Estimate::from_samples(&uncensored);
        truncated.replicates = replicates;
        truncated.censored_count = censored;
        let censored_fraction = censored as f64 / replicates as f64;
        let lower_bound = (uncensored.iter().sum::<f64>()
            + censored as f64 * ln_stat(opts.cap).exp())
            / replicates as f64;
        let estimate = moments::RMomentEstimate {
            variance_warning: truncated.mean != 0.0
                && truncated.std_error / truncated.mean.abs() > 10.0,
            flagged: censored_fraction > 0.05,
            censored_fraction,
            lower_bound,
            truncated,
        };
        let bound_ratio = estimate.truncated.mean / z.powf(alpha);
        points.push(moments::MomentPoint {
            state: x0,
            estimate,
            bound_ratio,
        });
    }
    let slope_pts: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.state.coord(), p.estimate.truncated.mean))
        .collect();
    let slope = {
        let lp: Vec<(f64, f64)> = slope_pts
            .iter()
            .filter(|&&(x, y)| x > 0.0 && y > 0.0)
            .map(|&(x, y)| (x.ln(), y.ln()))
            .collect();
        if lp.len() < 2 {
            None
        } else {
            let n = lp.len() as f64;
            let mx = lp.iter().map(|p| p.0).sum::<f64>() / n;
            let my = lp.iter().map(|p| p.1).sum::<f64>() / n;
            let sxx: f64 = lp.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let sxy: f64 = lp.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            Some(sxy / sxx)
        }
    };
    let ratios: Vec<f64> = points.iter().map(|p| p.bound_ratio).collect();
    let pass = moments::ratios_stabilize(&ratios, opts.ratio_tol);
    Ok(MomentReport {
        points,
        slope,
        pass: Some(pass),
        notes: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(beta: f64, kappa: f64, n_star: NStar) -> DomParams {
        DomParams::new(beta, kappa, n_star).unwrap()
    }

    #[test]
    fn alpha_beta_at_e_minus_two() {
        let a = alpha_beta((-2.0f64).exp()).unwrap();
        assert!((a - 0.7968).abs() < 1e-3);
        // root certificate
        assert!(((1.0 - a).ln() + 2.0 * a).abs() <= 1e-10);
    }

    #[test]
    fn alpha_beta_at_one_tenth() {
        let a = alpha_beta(0.1).unwrap();
        assert!((a - 0.863).abs() < 2e-3, "{a}");
    }

    #[test]
    fn alpha_beta_monotone_decreasing() {
        let betas = [(-4.0f64).exp(), (-3.0f64).exp(), (-2.0f64).exp(), 0.3];
        let mut prev = 1.0;
        for b in betas {
            let a = alpha_beta(b).unwrap();
            assert!(a < prev, "alpha_beta({b}) = {a} not below {prev}");
            prev = a;
        }
    }

    #[test]
    fn alpha_beta_domain_error_above_e_inv() {
        assert!(matches!(alpha_beta(0.37), Err(CertError::Domain(_))));
        // 0.35 sits just below e^-1 ~ 0.3679, so a (small) root exists
        assert!(alpha_beta(0.35).unwrap() > 0.0);
        assert!(matches!(
            alpha_beta((-1.0f64).exp()),
            Err(CertError::Domain(_))
        ));
    }

    #[test]
    fn drift_constants_reference_values() {
        // beta = 0.1, alpha = 0.3: beta' = 10^{-0.3}/0.7, b' = (1-10^{-0.3})/0.7
        let p = params(0.1, 1.0, NStar::Constant { n: 1 });
        let (bp, b) = drift_constants(0.3, &p).unwrap();
        assert!((bp - 10f64.powf(-0.3) / 0.7).abs() < 1e-12);
        assert!((bp - 0.7160).abs() < 1e-4);
        assert!((b - (1.0 - 10f64.powf(-0.3)) / 0.7).abs() < 1e-12);
        assert!((b - 0.7125).abs() < 1e-4);
    }

    #[test]
    fn drift_constants_reject_alpha_past_bound() {
        let p = params(0.1, 1.0, NStar::Constant { n: 1 });
        assert!(matches!(
            drift_constants(0.87, &p),
            Err(CertError::Domain(_))
        ));
    }

    #[test]
    fn workload_step_reflects_at_zero_and_shifts() {
        let beta = (-2.0f64).exp();
        let mut rng = RngStream::new(3, 0);
        for _ in 0..200 {
            assert!(step_u(0.0, beta, &mut rng) >= 0.0);
            // from u = 5: result = max(3 + E, 0) = 3 + E >= 3
            assert!(step_u(5.0, beta, &mut rng) >= 3.0);
        }
    }

    #[test]
    fn level_jump_respects_floor_and_atom() {
        // beta y < kappa: atom at kappa with mass 1 - beta y / kappa
        let p = params(0.1, 1.0, NStar::Constant { n: 1 });
        let mut rng = RngStream::new(9, 0);
        let y = 2.0; // beta y = 0.2 < kappa
        let n = 200_000;
        let mut at_kappa = 0u64;
        for _ in 0..n {
            let y1 = step_y(y, &p, &mut rng);
            assert!(y1 >= 1.0);
            if y1 == 1.0 {
                at_kappa += 1;
            }
        }
        let mass = at_kappa as f64 / n as f64;
        let expect = 1.0 - 0.2;
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((mass - expect).abs() < 3.0 * se, "atom mass {mass}");
    }

    #[test]
    fn countdown_is_deterministic() {
        let p = params(0.1, 1.0, NStar::Power { gamma: 0.5 });
        let k = DomKernel::new(p);
        let mut rng = RngStream::new(1, 0);
        let s0 = State::Dom { z: 9.0, m: 3 };
        let s1 = k.sample(&s0, &mut rng);
        let s2 = k.sample(&s1, &mut rng);
        assert_eq!(s1, State::Dom { z: 9.0, m: 2 });
        assert_eq!(s2, State::Dom { z: 9.0, m: 1 });
        // next step jumps and resets m to n*(z') = ceil(sqrt(z'))
        let s3 = k.sample(&s2, &mut rng);
        let State::Dom { z, m } = s3 else { panic!() };
        assert_eq!(u64::from(m), p.n_star_of(z));
    }

    #[test]
    fn exact_jump_moment_matches_closed_form() {
        // E[Y_1^alpha | y] = (beta y)^alpha/(1-alpha) = beta' y^alpha
        // whenever beta y >= kappa
        let p = params(0.1, 1.0, NStar::Constant { n: 1 });
        let k = DomKernel::new(p);
        let alpha = 0.3;
        for z in [10.0, 100.0, 1000.0] {
            let e = k
                .exact_nstep_expectation(&State::Dom { z, m: 1 }, 1, &|s| s.coord().powf(alpha))
                .unwrap();
            let expect = (0.1 * z).powf(alpha) / 0.7;
            assert!(
                (e - expect).abs() / expect < 1e-9,
                "z = {z}: {e} vs {expect}"
            );
        }
    }

    #[test]
    fn exact_jump_moment_with_atom() {
        // beta z < kappa: E[Y^alpha] = (1 - beta z/kappa) kappa^alpha
        //   + (beta z/kappa) * kappa^alpha / (1-alpha)
        let p = params(0.1, 1.0, NStar::Constant { n: 1 });
        let k = DomKernel::new(p);
        let (alpha, z) = (0.4, 5.0); // beta z = 0.5 < 1
        let e = k
            .exact_nstep_expectation(&State::Dom { z, m: 1 }, 1, &|s| s.coord().powf(alpha))
            .unwrap();
        let expect = 0.5 + 0.5 / 0.6;
        assert!((e - expect).abs() < 1e-9, "{e} vs {expect}");
    }

    #[test]
    fn exact_countdown_expectation_is_pointwise() {
        let p = params(0.1, 1.0, NStar::Power { gamma: 1.0 });
        let k = DomKernel::new(p);
        let e = k
            .exact_nstep_expectation(&State::Dom { z: 50.0, m: 7 }, 4, &|s| {
                s.coord() + f64::from(s.countdown().unwrap())
            })
            .unwrap();
        assert_eq!(e, 53.0);
    }

    #[test]
    fn prop42_constraint_violations_are_scope_errors() {
        let p = params(0.1, 1.0, NStar::Power { gamma: 0.2 });
        let opts = SweepOptions::default();
        // eta must exceed gamma/alpha = 0.666 for gamma < alpha_beta
        let err = prop42_experiment(Prop42Case::PowerMoment, &p, 0.3, 0.5, &[10.0], &opts);
        match err {
            Err(CertError::Scope(msg)) => assert!(msg.contains("gamma/alpha")),
            other => panic!("expected scope error, got {other:?}"),
        }
        // alpha above alpha_beta
        let err = prop42_experiment(Prop42Case::PowerMoment, &p, 0.9, 1.0, &[10.0], &opts);
        assert!(matches!(err, Err(CertError::Scope(_))));
    }

    #[test]
    fn prop42_geometric_needs_unit_spacing_and_valid_base() {
        let opts = SweepOptions::default();
        let p2 = params(0.1, 1.0, NStar::Power { gamma: 0.2 });
        assert!(matches!(
            prop42_experiment(Prop42Case::Geometric, &p2, 0.3, 1.0, &[10.0], &opts),
            Err(CertError::Contract(_))
        ));
    }

    #[test]
    fn prop42_geometric_short_run() {
        // n* = 1: D is Y itself; the geometric moment with base 1/beta'
        // stays bounded relative to z^alpha
        let p = params(0.1, 1.0, NStar::Constant { n: 1 });
        let opts = SweepOptions {
            replicates: 2000,
            cap: 1500,
            master_seed: 17,
            ..Default::default()
        };
        // alpha kept small so the statistic has finite variance
        let rep =
            prop42_experiment(Prop42Case::Geometric, &p, 0.15, 1.0, &[20.0, 100.0, 500.0], &opts)
                .unwrap();
        assert_eq!(rep.pass, Some(true), "ratios: {:?}", rep.points.iter().map(|p| p.bound_ratio).collect::<Vec<_>>());
        for pt in &rep.points {
            assert!(pt.estimate.censored_fraction < 0.01);
        }
    }
}
