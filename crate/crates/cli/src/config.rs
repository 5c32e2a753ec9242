//! The experiment config schema and its conversion into library objects.
//!
//! Everything is schema-validated up front: unknown keys are rejected by
//! serde, and semantic violations are reported with the offending field
//! name before any computation starts.

use driftcert::domproc::{DomParams, NStar, Prop42Case};
use driftcert::drift::{DriftSpec, PhiFn};
use driftcert::kernel::FiniteKernel;
use driftcert::rates::{PhiFamily, RateFn, RateSeq};
use driftcert::scale::{ScaleFn, SetPredicate, SubsampleFn};
use driftcert::state::State;
use driftcert::zoo::{BirthDeathChain, CycleKernel, DriftAwayKernel, IdentityKernel};
use driftcert::Kernel;
use serde::Deserialize;

pub type CliResult<T> = Result<T, String>;

/// Top-level config. `master_seed` has no default on purpose: every run
/// must pin its randomness explicitly.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub workers: Option<usize>,
    pub kernel: Option<KernelDesc>,
    pub grid: Option<GridDesc>,
    pub drift: Option<DriftDesc>,
    pub plan: Option<PlanDesc>,
    pub tame: Option<TameDesc>,
    pub moment: Option<MomentDesc>,
    pub domproc: Option<DomprocDesc>,
    pub wnorm: Option<WnormDesc>,
    pub mc: Option<McDesc>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelDesc {
    BirthDeath { d: f64 },
    Identity,
    Cycle { period: i64 },
    DriftAway,
    /// Row-stochastic matrix from a CSV file; header row = state labels.
    Matrix { path: String },
    Dominating { beta: f64, kappa: f64, n_star: NStarDesc },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NStarDesc {
    Power { gamma: f64 },
    LogPower { gamma: f64 },
    Constant { n: u64 },
}

impl NStarDesc {
    pub fn build(self) -> NStar {
        match self {
            NStarDesc::Power { gamma } => NStar::Power { gamma },
            NStarDesc::LogPower { gamma } => NStar::LogPower { gamma },
            NStarDesc::Constant { n } => NStar::Constant { n },
        }
    }
}

/// `factor * (coord + shift)^exponent`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleDesc {
    #[serde(default)]
    pub shift: f64,
    pub exponent: f64,
    #[serde(default = "one")]
    pub factor: f64,
}

fn one() -> f64 {
    1.0
}

impl ScaleDesc {
    pub fn build(&self) -> CliResult<ScaleFn> {
        if self.factor <= 0.0 {
            return Err(format!("scale factor = {} must be positive", self.factor));
        }
        Ok(ScaleFn::coord_power(self.shift, self.exponent).scale(self.factor))
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridDesc {
    LatticeRange { lo: i64, hi: i64 },
    LatticeLog { lo: i64, hi: i64, per_decade: usize },
    ScalarLog { lo: f64, hi: f64, per_decade: usize },
}

impl GridDesc {
    pub fn build(&self) -> CliResult<Vec<State>> {
        let grid = match *self {
            GridDesc::LatticeRange { lo, hi } => driftcert::grid::lattice_range(lo, hi),
            GridDesc::LatticeLog { lo, hi, per_decade } => {
                driftcert::grid::lattice_log(lo, hi, per_decade)
            }
            GridDesc::ScalarLog { lo, hi, per_decade } => {
                if lo <= 0.0 || hi < lo {
                    return Err(format!("grid.lo/hi: need 0 < lo <= hi, got {lo}, {hi}"));
                }
                driftcert::grid::scalar_log(lo, hi, per_decade)
            }
        };
        if grid.is_empty() {
            return Err("grid is empty".into());
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiDesc {
    pub family: PhiFamilyTag,
    pub alpha: f64,
    #[serde(default = "one")]
    pub c: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiFamilyTag {
    LogPower,
    Polynomial,
    NearLinear,
}

impl PhiDesc {
    pub fn family(&self) -> PhiFamily {
        match self.family {
            PhiFamilyTag::LogPower => PhiFamily::LogPower { alpha: self.alpha },
            PhiFamilyTag::Polynomial => PhiFamily::Polynomial { alpha: self.alpha },
            PhiFamilyTag::NearLinear => PhiFamily::NearLinear { alpha: self.alpha },
        }
    }

    pub fn build(&self) -> CliResult<PhiFn> {
        PhiFn::new(self.family(), self.c).map_err(|e| format!("drift.phi: {e}"))
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleDesc {
    Constant { value: u64 },
    /// `n(x) = max(1, ceil(c * coord(x)^exponent))`.
    CoordPower { c: f64, exponent: f64 },
    /// The countdown coordinate of a dominating-process state.
    Countdown,
}

impl ScheduleDesc {
    pub fn build(&self) -> CliResult<SubsampleFn> {
        match *self {
            ScheduleDesc::Constant { value } => {
                if value == 0 {
                    return Err("schedule constant value must be >= 1".into());
                }
                Ok(SubsampleFn::constant(value))
            }
            ScheduleDesc::CoordPower { c, exponent } => {
                if c <= 0.0 {
                    return Err(format!("schedule c = {c} must be positive"));
                }
                Ok(SubsampleFn::new(
                    format!("ceil({c} x^{exponent})"),
                    move |x: &State| (c * x.coord().powf(exponent)).ceil().max(1.0) as u64,
                ))
            }
            ScheduleDesc::Countdown => Ok(SubsampleFn::countdown()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "condition", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftDesc {
    OneStepGeometric { v: ScaleDesc, beta: f64, b: f64, c_max: f64 },
    PhiSubgeometric { v: ScaleDesc, phi: PhiDesc, b: f64, c_max: f64 },
    DoubleControl { v: ScaleDesc, w: ScaleDesc, b: f64, c_max: f64 },
    Subsampled { w: ScaleDesc, n: ScheduleDesc, beta: f64, b: f64, c_max: f64 },
}

fn check_beta(beta: f64) -> CliResult<()> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(format!("drift.beta = {beta} not in (0,1)"));
    }
    Ok(())
}

impl DriftDesc {
    pub fn build(&self) -> CliResult<DriftSpec> {
        Ok(match self {
            DriftDesc::OneStepGeometric { v, beta, b, c_max } => {
                check_beta(*beta)?;
                DriftSpec::OneStepGeometric {
                    v: v.build()?,
                    beta: *beta,
                    b: *b,
                    c: SetPredicate::coord_le(*c_max),
                }
            }
            DriftDesc::PhiSubgeometric { v, phi, b, c_max } => DriftSpec::PhiSubgeometric {
                v: v.build()?,
                phi: phi.build()?,
                b: *b,
                c: SetPredicate::coord_le(*c_max),
            },
            DriftDesc::DoubleControl { v, w, b, c_max } => DriftSpec::DoubleControl {
                v: v.build()?,
                w: w.build()?,
                b: *b,
                c: SetPredicate::coord_le(*c_max),
            },
            DriftDesc::Subsampled { w, n, beta, b, c_max } => {
                check_beta(*beta)?;
                DriftSpec::Subsampled {
                    w: w.build()?,
                    n: n.build()?,
                    beta: *beta,
                    b: *b,
                    c: SetPredicate::coord_le(*c_max),
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SeqDesc {
    Linear,
    Polynomial { p: f64 },
    LogPower { alpha: f64 },
}

impl SeqDesc {
    pub fn build(&self) -> CliResult<RateSeq> {
        match *self {
            SeqDesc::Linear => Ok(RateSeq::linear()),
            SeqDesc::Polynomial { p } => {
                RateSeq::polynomial(p).map_err(|e| format!("plan.rate: {e}"))
            }
            SeqDesc::LogPower { alpha } => {
                RateSeq::log_power(alpha).map_err(|e| format!("plan.rate: {e}"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateFnDesc {
    Geometric { kappa: f64 },
    Polynomial { alpha: f64 },
    Subgeometric { c: f64, alpha: f64 },
    Logarithmic { alpha: f64 },
}

impl RateFnDesc {
    pub fn build(&self) -> CliResult<RateFn> {
        match *self {
            RateFnDesc::Geometric { kappa } => RateFn::geometric(kappa),
            RateFnDesc::Polynomial { alpha } => RateFn::polynomial(alpha),
            RateFnDesc::Subgeometric { c, alpha } => RateFn::subgeometric(c, alpha),
            RateFnDesc::Logarithmic { alpha } => RateFn::logarithmic(alpha),
        }
        .map_err(|e| format!("moment.rate: {e}"))
    }
}

/// Inputs for `plan-subsample`, `classify-tame` and `bound-sweep`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDesc {
    pub rate: SeqDesc,
    pub v: ScaleDesc,
    pub w: ScaleDesc,
    pub c_const: f64,
    pub beta: f64,
    pub beta_prime: f64,
    pub b: f64,
    /// Tameness exponent, used by `classify-tame` only.
    pub delta: Option<f64>,
}

/// Inputs for `construct-tame`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TameDesc {
    pub alpha: f64,
    pub v: ScaleDesc,
    pub b: f64,
}

/// Inputs for `estimate-moment` and `bound-sweep`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentDesc {
    pub rate: RateFnDesc,
    /// Start coordinate for `estimate-moment`.
    pub x0: Option<f64>,
    /// Target set `{coord <= c_max}` for `estimate-moment`.
    pub c_max: Option<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default = "default_cap")]
    pub cap: u64,
    #[serde(default = "default_ratio_tol")]
    pub ratio_tol: f64,
}

fn default_replicates() -> u64 {
    2_000
}

fn default_cap() -> u64 {
    1_000_000
}

fn default_ratio_tol() -> f64 {
    0.25
}

/// Inputs for `domproc-experiment`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomprocDesc {
    pub case: DomprocCase,
    pub alpha: f64,
    pub eta: f64,
    pub z_grid: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default = "default_cap")]
    pub cap: u64,
    #[serde(default = "default_ratio_tol")]
    pub ratio_tol: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomprocCase {
    PowerMoment,
    ExpMoment,
    Geometric,
}

impl DomprocCase {
    pub fn build(self) -> Prop42Case {
        match self {
            DomprocCase::PowerMoment => Prop42Case::PowerMoment,
            DomprocCase::ExpMoment => Prop42Case::ExpMoment,
            DomprocCase::Geometric => Prop42Case::Geometric,
        }
    }
}

/// Inputs for `wnorm-diagnostic`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WnormDesc {
    pub v: ScaleDesc,
    pub w: ScaleDesc,
    pub n_max: u64,
    pub pairs: Vec<[usize; 2]>,
}

/// Verifier knobs for `verify-drift`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McDesc {
    #[serde(default)]
    pub force_mc: bool,
    #[serde(default = "default_verify_replicates")]
    pub replicates: u64,
    #[serde(default = "default_escalation_rounds")]
    pub escalation_rounds: u32,
    #[serde(default = "default_ci_z")]
    pub ci_z: f64,
    #[serde(default = "default_step_budget")]
    pub step_budget: u64,
}

fn default_verify_replicates() -> u64 {
    10_000
}

fn default_escalation_rounds() -> u32 {
    2
}

fn default_ci_z() -> f64 {
    3.0
}

fn default_step_budget() -> u64 {
    10_000_000
}

impl Default for McDesc {
    fn default() -> Self {
        McDesc {
            force_mc: false,
            replicates: default_verify_replicates(),
            escalation_rounds: default_escalation_rounds(),
            ci_z: default_ci_z(),
            step_budget: default_step_budget(),
        }
    }
}

/// Load a finite kernel from a CSV matrix file. The header row carries the
/// state labels; each data row is one row of the transition matrix.
pub fn load_matrix(path: &str) -> CliResult<FiniteKernel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("kernel.path {path}: {e}"))?;
    let labels: Vec<String> = reader
        .headers()
        .map_err(|e| format!("kernel.path {path}: {e}"))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format!("kernel.path {path} row {i}: {e}"))?;
        let row: Vec<f64> = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| format!("kernel.path {path} row {i}: {e}"))
            })
            .collect::<CliResult<_>>()?;
        rows.push(row);
    }
    FiniteKernel::new(labels, rows).map_err(|e| format!("kernel.path {path}: {e}"))
}

/// Build the kernel described by the config.
pub fn build_kernel(desc: &KernelDesc) -> CliResult<Box<dyn Kernel>> {
    Ok(match desc {
        KernelDesc::BirthDeath { d } => Box::new(BirthDeathChain::new(*d)),
        KernelDesc::Identity => Box::new(IdentityKernel),
        KernelDesc::Cycle { period } => {
            if *period < 1 {
                return Err(format!("kernel.period = {period} must be >= 1"));
            }
            Box::new(CycleKernel { period: *period })
        }
        KernelDesc::DriftAway => Box::new(DriftAwayKernel),
        KernelDesc::Matrix { path } => Box::new(load_matrix(path)?),
        KernelDesc::Dominating { beta, kappa, n_star } => Box::new(
            driftcert::domproc::DomKernel::new(
                DomParams::new(*beta, *kappa, n_star.build())
                    .map_err(|e| format!("kernel: {e}"))?,
            ),
        ),
    })
}

/// The dominating-process parameters, when the kernel section describes one.
pub fn dom_params(desc: &KernelDesc) -> CliResult<DomParams> {
    match desc {
        KernelDesc::Dominating { beta, kappa, n_star } => {
            DomParams::new(*beta, *kappa, n_star.build()).map_err(|e| format!("kernel: {e}"))
        }
        _ => Err("this command needs [kernel] type = \"dominating\"".into()),
    }
}
