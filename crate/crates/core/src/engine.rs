//! Trajectory simulation, stopping times and the reproducible parallel
//! Monte Carlo engine.

use crate::error::{CertError, Result};
use crate::kernel::Kernel;
use crate::rng::RngStream;
use crate::scale::{SetPredicate, SubsampleFn};
use crate::state::State;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A simulated path, replayable from its stream key.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub master_seed: u64,
    pub stream_index: u64,
}

impl Trajectory {
    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.states.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Outcome of a stopping-time simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StoppingValue {
    Observed(u64),
    Censored { cap: u64 },
}

impl StoppingValue {
    pub fn observed(&self) -> Option<u64> {
        match *self {
            StoppingValue::Observed(n) => Some(n),
            StoppingValue::Censored { .. } => None,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, StoppingValue::Censored { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StoppingKind {
    /// First `n >= 1` with `Phi_n` in the target set.
    Return,
    /// First `n >= 0` with `Phi_n` in the target set.
    Hitting,
    /// First subsampled index `k >= 1` with `Phi_{tau^k}` in the target set.
    SubsampledReturn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingRecord {
    pub value: StoppingValue,
    pub kind: StoppingKind,
}

/// Subsampled return record: the skeleton index count and the wall-clock
/// step count `tau^{bar tau_C}` when uncensored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampledReturn {
    pub skeleton: StoppingRecord,
    pub wall_steps: Option<u64>,
}

/// Monte Carlo point estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicates: u64,
    pub censored_count: u64,
    pub non_finite_count: u64,
}

impl Estimate {
    /// Mean and standard error of the finite entries of `values`;
    /// non-finite entries are excluded and counted.
    pub fn from_samples(values: &[f64]) -> Estimate {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let non_finite = (values.len() - finite.len()) as u64;
        let n = finite.len() as f64;
        if finite.is_empty() {
            return Estimate {
                mean: f64::NAN,
                std_error: f64::NAN,
                replicates: values.len() as u64,
                censored_count: 0,
                non_finite_count: non_finite,
            };
        }
        let mean = finite.iter().sum::<f64>() / n;
        let var = if finite.len() < 2 {
            0.0
        } else {
            finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        };
        Estimate {
            mean,
            std_error: (var / n).sqrt(),
            replicates: values.len() as u64,
            censored_count: 0,
            non_finite_count: non_finite,
        }
    }

    pub fn ci(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.std_error, self.mean + z * self.std_error)
    }
}

/// Simulate `horizon` transitions from `x0`.
///
/// Fails hard if the sampler ever leaves the declared state space, naming the
/// offending state.
pub fn simulate_path(
    kernel: &dyn Kernel,
    x0: State,
    horizon: u64,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    if !kernel.contains(&x0) {
        return Err(CertError::Contract(format!("x0 = {x0} not in state space")));
    }
    let mut states = Vec::with_capacity(horizon as usize + 1);
    states.push(x0);
    let mut x = x0;
    for _ in 0..horizon {
        x = kernel.sample(&x, rng);
        if !kernel.contains(&x) {
            return Err(CertError::OutOfSpace(format!("{x}")));
        }
        states.push(x);
    }
    Ok(Trajectory {
        states,
        master_seed: rng.master_seed(),
        stream_index: rng.stream_index(),
    })
}

/// First return (`n >= 1`) or hitting (`n >= 0`) time on `target`, censored
/// at `cap`.
pub fn stopping_time(
    kernel: &dyn Kernel,
    x0: State,
    target: &SetPredicate,
    kind: StoppingKind,
    cap: u64,
    rng: &mut RngStream,
) -> Result<StoppingRecord> {
    if cap < 1 {
        return Err(CertError::Contract("cap must be >= 1".into()));
    }
    if kind == StoppingKind::SubsampledReturn {
        return Err(CertError::Contract(
            "use subsampled_return_time for the subsampled kind".into(),
        ));
    }
    if kind == StoppingKind::Hitting && target.contains(&x0) {
        return Ok(StoppingRecord {
            value: StoppingValue::Observed(0),
            kind,
        });
    }
    let mut x = x0;
    for n in 1..=cap {
        x = kernel.sample(&x, rng);
        if !kernel.contains(&x) {
            return Err(CertError::OutOfSpace(format!("{x}")));
        }
        if target.contains(&x) {
            return Ok(StoppingRecord {
                value: StoppingValue::Observed(n),
                kind,
            });
        }
    }
    Ok(StoppingRecord {
        value: StoppingValue::Censored { cap },
        kind,
    })
}

/// Chain values along the state-dependent subsampling times
/// `tau^0 = 0`, `tau^{k+1} = tau^k + n(Phi_{tau^k})`.
///
/// Returns `(tau^k, Phi_{tau^k})` for `k = 0..=k_max`.
pub fn subsampled_iterates(
    kernel: &dyn Kernel,
    x0: State,
    n_fn: &SubsampleFn,
    k_max: u64,
    rng: &mut RngStream,
) -> Result<Vec<(u64, State)>> {
    if k_max < 1 {
        return Err(CertError::Contract("k_max must be >= 1".into()));
    }
    let mut out = Vec::with_capacity(k_max as usize + 1);
    let mut t = 0u64;
    let mut x = x0;
    out.push((t, x));
    for _ in 0..k_max {
        let n = n_fn.eval(&x);
        if n == 0 {
            return Err(CertError::Contract(format!(
                "subsample schedule returned 0 at {x}"
            )));
        }
        for _ in 0..n {
            x = kernel.sample(&x, rng);
            if !kernel.contains(&x) {
                return Err(CertError::OutOfSpace(format!("{x}")));
            }
        }
        t += n;
        out.push((t, x));
    }
    Ok(out)
}

/// Return time of the subsampled skeleton to `target`: the first `k >= 1`
/// with `Phi_{tau^k}` in the set, censored after `cap` skeleton steps.
pub fn subsampled_return_time(
    kernel: &dyn Kernel,
    x0: State,
    n_fn: &SubsampleFn,
    target: &SetPredicate,
    cap: u64,
    rng: &mut RngStream,
) -> Result<SubsampledReturn> {
    if cap < 1 {
        return Err(CertError::Contract("cap must be >= 1".into()));
    }
    let mut t = 0u64;
    let mut x = x0;
    for k in 1..=cap {
        let n = n_fn.eval(&x);
        if n == 0 {
            return Err(CertError::Contract(format!(
                "subsample schedule returned 0 at {x}"
            )));
        }
        for _ in 0..n {
            x = kernel.sample(&x, rng);
            if !kernel.contains(&x) {
                return Err(CertError::OutOfSpace(format!("{x}")));
            }
        }
        t += n;
        if target.contains(&x) {
            return Ok(SubsampledReturn {
                skeleton: StoppingRecord {
                    value: StoppingValue::Observed(k),
                    kind: StoppingKind::SubsampledReturn,
                },
                wall_steps: Some(t),
            });
        }
    }
    Ok(SubsampledReturn {
        skeleton: StoppingRecord {
            value: StoppingValue::Censored { cap },
            kind: StoppingKind::SubsampledReturn,
        },
        wall_steps: None,
    })
}

/// The reproducible parallel Monte Carlo engine.
///
/// Replicate `i` always draws from stream `(master_seed, stream_offset + i)`,
/// and reductions run in replicate order, so results are byte-identical for
/// any worker count.
#[derive(Debug, Clone, Copy)]
pub struct McEngine {
    pub master_seed: u64,
    pub workers: Option<usize>,
}

impl McEngine {
    pub fn new(master_seed: u64) -> Self {
        McEngine {
            master_seed,
            workers: None,
        }
    }

    pub fn with_workers(master_seed: u64, workers: Option<usize>) -> Self {
        McEngine {
            master_seed,
            workers,
        }
    }

    /// Ordered map of `f` over replicate indices, fanned across workers.
    pub fn run_replicates<T: Send>(
        &self,
        stream_offset: u64,
        replicates: u64,
        f: impl Fn(u64, &mut RngStream) -> T + Sync,
    ) -> Vec<T> {
        let job = |i: u64| {
            let mut rng = RngStream::new(self.master_seed, stream_offset + i);
            f(i, &mut rng)
        };
        match self.workers {
            Some(w) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(w.max(1))
                    .build()
                    .expect("worker pool");
                pool.install(|| (0..replicates).into_par_iter().map(job).collect())
            }
            None => (0..replicates).into_par_iter().map(job).collect(),
        }
    }

    /// Mean and standard error of i.i.d. draws from `sampler`.
    ///
    /// Non-finite samples are excluded from the moments and counted in
    /// `non_finite_count`.
    pub fn mc_expectation(
        &self,
        stream_offset: u64,
        replicates: u64,
        sampler: impl Fn(&mut RngStream) -> f64 + Sync,
    ) -> Result<Estimate> {
        if replicates < 2 {
            return Err(CertError::Contract("replicates must be >= 2".into()));
        }
        let values = self.run_replicates(stream_offset, replicates, |_, rng| sampler(rng));
        Ok(Estimate::from_samples(&values))
    }
}

/// Row `x` of `P^n` for a finite kernel, by repeated squaring.
pub fn matrix_power_distribution(kernel: &dyn Kernel, x: usize, n: u64) -> Result<Vec<f64>> {
    let fin = kernel
        .finite()
        .ok_or_else(|| CertError::Capability("matrix power needs a finite kernel".into()))?;
    if x >= fin.len() {
        return Err(CertError::Contract(format!(
            "state index {x} out of range (dim {})",
            fin.len()
        )));
    }
    let row = fin.power_row(x, n);
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > 1e-10 {
        return Err(CertError::Contract(format!(
            "matrix power row sums to {s}; kernel not stochastic enough"
        )));
    }
    Ok(row)
}
