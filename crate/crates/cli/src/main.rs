//! Batch front door: experiment configs in, deterministic reports out.

mod config;
mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{CliResult, ExperimentConfig, KernelDesc};
use driftcert::drift::{
    verify_double_control, verify_onestep, verify_subsampled, wnorm_difference_diagnostic,
    DriftCertificate, DriftSpec, Verdict, VerifyOptions,
};
use driftcert::moments::{bound_sweep, estimate_r_moment, MomentReport, SweepOptions};
use driftcert::planner::{classify_tame, construct_tame_from_phi, plan_from_rate, SubsamplePlan};
use driftcert::{domproc, State};
use report::{config_hash, fmt_f64, Outcome, Report, Table};
use serde_json::json;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "driftcert",
    version,
    about = "Markov-chain stability certification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify a drift inequality on a state grid.
    VerifyDrift(RunArgs),
    /// Build a subsampling plan from a rate sequence.
    PlanSubsample(RunArgs),
    /// Check tameness of a subsampling plan.
    ClassifyTame(RunArgs),
    /// Construct a tame plan from a polynomial phi family.
    ConstructTame(RunArgs),
    /// Estimate a modulated return-time moment at one state.
    EstimateMoment(RunArgs),
    /// Sweep a return-moment bound ratio over a grid.
    BoundSweep(RunArgs),
    /// Run a dominating-process moment experiment.
    DomprocExperiment(RunArgs),
    /// Tabulate the finite-state norm-difference diagnostic.
    WnormDiagnostic(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyDrift(_) => "verify-drift",
            Command::PlanSubsample(_) => "plan-subsample",
            Command::ClassifyTame(_) => "classify-tame",
            Command::ConstructTame(_) => "construct-tame",
            Command::EstimateMoment(_) => "estimate-moment",
            Command::BoundSweep(_) => "bound-sweep",
            Command::DomprocExperiment(_) => "domproc-experiment",
            Command::WnormDiagnostic(_) => "wnorm-diagnostic",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::VerifyDrift(a)
            | Command::PlanSubsample(a)
            | Command::ClassifyTame(a)
            | Command::ConstructTame(a)
            | Command::EstimateMoment(a)
            | Command::BoundSweep(a)
            | Command::DomprocExperiment(a)
            | Command::WnormDiagnostic(a) => a,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for Monte Carlo; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full JSON report, or just the result table as CSV.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(&cli.command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    });
}

fn run(command: &Command) -> CliResult<i32> {
    let args = command.args();
    let raw = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("{}: {e}", args.config.display()))?;
    let cfg: ExperimentConfig =
        toml::from_str(&raw).map_err(|e| format!("{}: {e}", args.config.display()))?;
    let workers = args.workers.or(cfg.workers);

    let started = Instant::now();
    let (outcome, result, table) = dispatch(command, &cfg, workers)?;
    let report = Report {
        command: command.name().to_string(),
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: config_hash(&raw),
        config: toml::from_str(&raw).expect("config re-parse"),
        workers,
        outcome,
        result,
        table,
        wall_seconds: started.elapsed().as_secs_f64(),
    };

    let payload = match args.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report).expect("report json");
            s.push('\n');
            s
        }
        Format::Csv => report.table.to_csv(),
    };
    match &args.out {
        Some(path) => {
            std::fs::write(path, payload).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => print!("{payload}"),
    }
    Ok(report.outcome.exit_code())
}

fn dispatch(
    command: &Command,
    cfg: &ExperimentConfig,
    workers: Option<usize>,
) -> CliResult<(Outcome, serde_json::Value, Table)> {
    match command {
        Command::VerifyDrift(_) => cmd_verify_drift(cfg, workers),
        Command::PlanSubsample(_) => cmd_plan_subsample(cfg),
        Command::ClassifyTame(_) => cmd_classify_tame(cfg),
        Command::ConstructTame(_) => cmd_construct_tame(cfg),
        Command::EstimateMoment(_) => cmd_estimate_moment(cfg, workers),
        Command::BoundSweep(_) => cmd_bound_sweep(cfg, workers),
        Command::DomprocExperiment(_) => cmd_domproc(cfg, workers),
        Command::WnormDiagnostic(_) => cmd_wnorm(cfg),
    }
}

fn need<'a, T>(section: &'a Option<T>, name: &str) -> CliResult<&'a T> {
    section
        .as_ref()
        .ok_or_else(|| format!("missing config section [{name}]"))
}

fn build_plan(cfg: &ExperimentConfig) -> CliResult<(SubsamplePlan, driftcert::ScaleFn)> {
    let desc = need(&cfg.plan, "plan")?;
    let r = desc.rate.build()?;
    let v = desc.v.build()?;
    let w = desc.w.build()?;
    let plan = plan_from_rate(&r, &v, &w, desc.c_const, desc.beta, desc.beta_prime, desc.b)
        .map_err(|e| format!("plan: {e}"))?;
    Ok((plan, v))
}

fn verdict_outcome(v: Verdict) -> Outcome {
    match v {
        Verdict::Pass => Outcome::Pass,
        Verdict::Fail => Outcome::Fail,
        Verdict::Inconclusive => Outcome::Inconclusive,
    }
}

fn margins_table(cert: &DriftCertificate) -> Table {
    let mut table = Table::new(&["track", "state", "margin", "verdict", "mean", "std_error"]);
    let tracks = std::iter::repeat("primary")
        .zip(cert.margins.iter())
        .chain(std::iter::repeat("secondary").zip(cert.secondary.iter().flatten()));
    for (track, m) in tracks {
        table.push(vec![
            track.to_string(),
            m.state.to_string(),
            fmt_f64(m.margin),
            format!("{:?}", m.verdict),
            m.estimate.map(|e| fmt_f64(e.mean)).unwrap_or_default(),
            m.estimate.map(|e| fmt_f64(e.std_error)).unwrap_or_default(),
        ]);
    }
    table
}

fn cmd_verify_drift(
    cfg: &ExperimentConfig,
    workers: Option<usize>,
) -> CliResult<(Outcome, serde_json::Value, Table)> {
    let kernel = config::build_kernel(need(&cfg.kernel, "kernel")?)?;
    let spec = need(&cfg.drift, "drift")?.build()?;
    let grid = need(&cfg.grid, "grid")?.build()?;
    let mc = cfg.mc.unwrap_or_default();
    let opts = VerifyOptions {
        force_mc: mc.force_mc,
        replicates: mc.replicates,
        escalation_rounds: mc.escalation_rounds,
        master_seed: cfg.master_seed,
        workers,
        ci_z: mc.ci_z,
        step_budget: mc.step_budget,
    };
    let cert = match &spec {
        DriftSpec::OneStepGeometric { .. } | DriftSpec::PhiSubgeometric { .. } => {
            verify_onestep(kernel.as_ref(), &spec, &grid, &opts)
        }
        DriftSpec::DoubleControl { .. } => {
            verify_double_control(kernel.as_ref(), &spec, &grid, &opts)
        }
        DriftSpec::Subsampled { .. } => verify_subsampled(kernel.as_ref(), &spec, &grid, &opts),
    }
    .map_err(|e| e.to_string())?;
    let table = margins_table(&cert);
    let outcome = verdict_outcome(cert.verdict);
    Ok((outcome, serde_json::to_value(&cert).expect("certificate json"), table))
}

fn cmd_plan_subsample(cfg: &ExperimentConfig) -> CliResult<(Outcome, serde_json::Value, Table)> {
    let (plan, v) = build_plan(cfg)?;
    let grid = need(&cfg.grid, "grid")?.build()?;
    plan.validate_scales(&v, &grid).map_err(|e| e.to_string())?;
    let mut table = Table::new(&["state", "n", "w", "in_small_set"]);
    for x in &grid {
        table.push(vec![
            x.to_string(),
            plan.n_fn.eval(x).to_string(),
            fmt_f64(plan.w.eval(x)),
            plan.c.contains(x).to_string(),
        ]);
    }
    let result = json!({
        "provenance": plan.provenance,
        "beta": plan.beta,
        "beta_prime": plan.beta_prime,
        "b": plan.b,
        "schedule": plan.n_fn.name(),
        "w": plan.w.name(),
        "small_set": plan.c.name(),
    });
    Ok((Outcome::Pass, result, table))
}

fn tame_table(margins: &[(State, f64)]) -> Table {
    let mut table = Table::new(&["state", "margin"]);
    for &(x, m) in margins {
        table.push(vec![x.to_string(), fmt_f64(m)]);
    }
    table
}

fn cmd_classify_tame(cfg: &ExperimentConfig) -> CliResult<(Outcome, serde_json::Value, Table)> {
    let (plan, _) = build_plan(cfg)?;
    let delta = need(&cfg.plan, "plan")?
        .delta
        .ok_or("classify-tame needs plan.delta")?;
    let grid = need(&cfg.grid, "grid")?.build()?;
    let verdict = classify_tame(&plan, delta, &grid).map_err(|e| e.to_string())?;
    let outcome = if verdict.is_tame {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    let table = tame_table(&verdict.margins);
    Ok((outcome, serde_json::to_value(&verdict).expect("verdict json"), table))
}

fn cmd_construct_tame(cfg: &ExperimentConfig) -> CliResult<(Outcome, serde_json::Value, Table)> {
    let desc = need(&cfg.tame, "tame")?;
    let v = desc.v.build()?;
    let (plan, verdict) =
        construct_tame_from_phi(desc.alpha, &v, desc.b).map_err(|e| e.to_string())?;
    let outcome = if verdict.is_tame {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    let table = tame_table(&verdict.margins);
    let result = json!({
        "provenance": plan.provenance,
        "beta": plan.beta,
        "beta_prime": plan.beta_prime,
        "schedule": plan.n_fn.name(),
        "w": plan.w.name(),
        "small_set": plan.c.name(),
        "verdict": verdict,
    });
    Ok((outcome, result, table))
}

/// Map a config coordinate onto a start state for the configured kernel.
fn state_at(desc: &KernelDesc, coord: f64) -> State {
    match desc {
        KernelDesc::Dominating { .. } => {
            // a level observed right after a jump
            State::Dom { z: coord, m: 1 }
        }
        KernelDesc::BirthDeath { .. }
        | KernelDesc::Identity
        | KernelDesc::Cycle { .. }
        | KernelDesc::DriftAway
        | KernelDesc::Matrix { .. } => State::Lattice(coord.round() as i64),
    }
}

fn cmd_estimate_moment(
    cfg: &ExperimentConfig,
    workers: Option<usize>,
) -> CliResult<(Outcome, serde_json::Value, Table)> {
    let kdesc = need(&cfg.kernel, "kernel")?;
    let kernel = config::build_kernel(kdesc)?;
    let desc = need(&cfg.moment, "moment")?;
    let x0 = state_at(kdesc, desc.x0.ok_or("estimate-moment needs moment.x0")?);
    let c_max = desc.c_max.ok_or("estimate-moment needs moment.c_max")?;
    let c = driftcert::SetPredicate::coord_le(c_max);
    let r = desc.rate.build()?;
    let est = estimate_r_moment(
        kernel.as_ref(),
        &x0,
        &c,
        &r,
        desc.replicates,
        desc.cap,
        cfg.master_seed,
        workers,
    )
    .map_err(|e| e.to_string())?;
    let outcome = if est.flagged || est.variance_warning {
        Outcome::Inconclusive
    } else {
        Outcome::Pass
    };
    let mut table = Table::new(&[
        "state",
        "truncated_mean",
        "std_error",
        "lower_bound",
        "censored_fraction",
    ]);
    table.push(vec![
        x0.to_string(),
        fmt_f64(est.truncated.mean),
        fmt_f64(est.truncated.std_error),
        fmt_f64(est.lower_bound),
        fmt_f64(est.censored_fraction),
    ]);
    Ok((outcome, serde_json::to_value(&est).expect("estimate json"), table))
}

fn sweep_table(report: &MomentReport) -> Table {
    let mut table = Table::new(&[
        "state",
        "truncated_mean",
        "std_error",
        "lower_bound",
        "censored_fraction",
        "bound_ratio",
    ]);
    for p in &report.points {
        table.push(vec![
            p.state.to_string(),
            fmt_f64(p.estimate.truncated.mean),
            fmt_f64(p.estimate.truncated.std_error),
            fmt_f64(p.estimate.lower_bound),
            fmt_f64(p.estimate.censored_fraction),
            fmt_f64(p.bound_ratio),
        ]);
    }
    table
}

fn sweep_outcome(report: &MomentReport) -> Outcome {
    match report.pass {
        Some(true) => Outcome::Pass,
        Some(false) => Outcome::Fail,
        None => Outcome::Inconclusive,
    }
}

fn cmd_bound_sweep(
    cfg: &ExperimentConfig,
    workers: Option<usize>,
) -> CliResult<(Outcome, serde_json::Value, Table)> {
    let kernel = config::build_kernel(need(&cfg.kernel, "kernel")?)?;
    let (plan, _) = build_plan(cfg)?;
    let desc = need(&cfg.moment, "moment")?;
    let r = desc.rate.build()?;
    let grid = need(&cfg.grid, "grid")?.build()?;
    let opts = SweepOptions {
        replicates: desc.replicates,
        cap: desc.cap,
        master_seed: cfg.master_seed,
        workers,
        ratio_tol: desc.ratio_tol,
    };
    let report =
        bound_sweep(kernel.as_ref(), &plan, &r, &grid, &opts).map_err(|e| e.to_string())?;
    let table = sweep_table(&report);
    Ok((
        sweep_outcome(&report),
        serde_json::to_value(&report).expect("report json"),
        table,
    ))
}

fn cmd_domproc(
    cfg: &ExperimentConfig,
    workers: Option<usize>,
) -> CliResult<(Outcome, serde_json::Value, Table)> {
    let params = config::dom_params(need(&cfg.kernel, "kernel")?)?;
    let desc = need(&cfg.domproc, "domproc")?;
    let opts = SweepOptions {
        replicates: desc.replicates,
        cap: desc.cap,
        master_seed: cfg.master_seed,
        workers,
        ratio_tol: desc.ratio_tol,
    };
    let report = domproc::prop42_experiment(
        desc.case.build(),
        &params,
        desc.alpha,
        desc.eta,
        &desc.z_grid,
        &opts,
    )
    .map_err(|e| e.to_string())?;
    let table = sweep_table(&report);
    Ok((
        sweep_outcome(&report),
        serde_json::to_value(&report).expect("report json"),
        table,
    ))
}

fn cmd_wnorm(cfg: &ExperimentConfig) -> CliResult<(Outcome, serde_json::Value, Table)> {
    let kernel = config::build_kernel(need(&cfg.kernel, "kernel")?)?;
    let desc = need(&cfg.wnorm, "wnorm")?;
    let v = desc.v.build()?;
    let w = desc.w.build()?;
    let pairs: Vec<(usize, usize)> = desc.pairs.iter().map(|&[a, b]| (a, b)).collect();
    let diag = wnorm_difference_diagnostic(kernel.as_ref(), &w, &v, desc.n_max, &pairs)
        .map_err(|e| e.to_string())?;
    let outcome = if diag.pass { Outcome::Pass } else { Outcome::Fail };
    let mut table = Table::new(&["x", "x_other", "sup_ratio", "stabilized"]);
    for p in &diag.pairs {
        table.push(vec![
            p.x.to_string(),
            p.x_other.to_string(),
            fmt_f64(p.sup_ratio),
            p.stabilized.to_string(),
        ]);
    }
    // drop the long per-n ratio vectors from the JSON result; the table
    // keeps the per-pair summary
    let mut result = serde_json::to_value(&diag).expect("diagnostic json");
    if let Some(pairs) = result.get_mut("pairs").and_then(|p| p.as_array_mut()) {
        for p in pairs {
            if let Some(obj) = p.as_object_mut() {
                obj.remove("ratios");
            }
        }
    }
    Ok((outcome, result, table))
}
