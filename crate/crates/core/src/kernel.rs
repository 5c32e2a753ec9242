//! Transition kernels.
//!
//! A [`Kernel`] must be able to sample one step; kernels with extra structure
//! additionally expose exact one-step expectations (through an explicit
//! transition support) or a full row-stochastic matrix. The Monte Carlo engine
//! and the drift verifiers pick the strongest capability available.

use crate::error::{CertError, Result};
use crate::rng::RngStream;
use crate::state::State;

/// Tolerance for row-stochasticity of explicit matrices.
pub const ROW_SUM_TOL: f64 = 1e-12;

pub trait Kernel: Send + Sync {
    /// Sample one step of the chain from `x`.
    fn sample(&self, x: &State, rng: &mut RngStream) -> State;

    /// Membership test for the declared state space.
    fn contains(&self, x: &State) -> bool;

    /// Explicit one-step transition law from `x`, when the kernel is
    /// discrete with enumerable support. Probabilities sum to 1.
    fn transition_support(&self, _x: &State) -> Option<Vec<(State, f64)>> {
        None
    }

    /// Explicit matrix representation, when the state space is finite.
    fn finite(&self) -> Option<&FiniteKernel> {
        None
    }

    /// Exact `E_x[f(Phi_1)]`, when computable.
    fn exact_step_expectation(&self, x: &State, f: &dyn Fn(&State) -> f64) -> Option<f64> {
        self.transition_support(x)
            .map(|supp| supp.iter().map(|(y, p)| p * f(y)).sum())
    }

    /// Exact `E_x[f(Phi_n)]`, when computable. The default pushes the point
    /// mass at `x` forward `n` steps through the transition support.
    fn exact_nstep_expectation(&self, x: &State, n: u64, f: &dyn Fn(&State) -> f64) -> Option<f64> {
        if n == 0 {
            return Some(f(x));
        }
        let mut dist = vec![(*x, 1.0f64)];
        for _ in 0..n {
            let mut next: Vec<(State, f64)> = Vec::with_capacity(dist.len() * 2);
            for (y, p) in &dist {
                let supp = self.transition_support(y)?;
                for (z, q) in supp {
                    match next.iter_mut().find(|(s, _)| *s == z) {
                        Some((_, acc)) => *acc += p * q,
                        None => next.push((z, p * q)),
                    }
                }
            }
            // drop negligible mass to keep the support from exploding
            next.retain(|&(_, p)| p > 1e-300);
            dist = next;
        }
        Some(dist.iter().map(|(y, p)| p * f(y)).sum())
    }
}

/// A kernel on a finite, enumerated state set with an explicit
/// row-stochastic matrix. States are `State::Lattice(i)` with `i` the row
/// index.
#[derive(Debug, Clone)]
pub struct FiniteKernel {
    labels: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl FiniteKernel {
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || labels.len() != n {
            return Err(CertError::Contract(
                "finite kernel needs one label per row and at least one state".into(),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(CertError::Contract(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(CertError::Contract(format!(
                    "row {i} has entries outside [0,1]"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(CertError::Contract(format!(
                    "row {i} sums to {s}, not 1 within {ROW_SUM_TOL}"
                )));
            }
        }
        Ok(FiniteKernel { labels, rows })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..rows.len()).map(|i| i.to_string()).collect();
        FiniteKernel::new(labels, rows)
    }

    /// The deterministic two-state swap `0 <-> 1`.
    pub fn swap() -> Self {
        FiniteKernel::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    /// Lazy birth-death chain on `{0, .., n-1}`: hold with probability
    /// `hold`, otherwise step up with probability `p_up(x)` (reflecting at
    /// the boundaries).
    pub fn lazy_birth_death(n: usize, hold: f64, p_up: impl Fn(usize) -> f64) -> Result<Self> {
        let mut rows = vec![vec![0.0; n]; n];
        for x in 0..n {
            let p = p_up(x).clamp(0.0, 1.0);
            let up = if x + 1 < n { x + 1 } else { x };
            let down = if x > 0 { x - 1 } else { x };
            rows[x][x] += hold;
            rows[x][up] += (1.0 - hold) * p;
            rows[x][down] += (1.0 - hold) * (1.0 - p);
        }
        FiniteKernel::from_rows(rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Row `x` of `P^n`, computed by repeated squaring. Entries are
    /// renormalised only by construction; callers may assert the 1e-10 sum
    /// invariant.
    pub fn power_row(&self, x: usize, n: u64) -> Vec<f64> {
        let dim = self.len();
        let mut base = self.rows.clone();
        let mut acc: Option<Vec<Vec<f64>>> = None;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => mat_mul(&a, &base),
                });
            }
            k >>= 1;
            if k > 0 {
                base = mat_mul(&base, &base);
            }
        }
        match acc {
            None => {
                let mut e = vec![0.0; dim];
                e[x] = 1.0;
                e
            }
            Some(a) => a[x].clone(),
        }
    }

    /// Push a distribution one step forward: `v P`.
    pub fn step_distribution(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for (x, &px) in v.iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            for (y, &q) in self.rows[x].iter().enumerate() {
                out[y] += px * q;
            }
        }
        out
    }
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

impl Kernel for FiniteKernel {
    fn sample(&self, x: &State, rng: &mut RngStream) -> State {
        let i = x.lattice().expect("finite kernel state must be an index") as usize;
        let u = rng.uniform();
        let mut acc = 0.0;
        for (j, &p) in self.rows[i].iter().enumerate() {
            acc += p;
            if u < acc {
                return State::Lattice(j as i64);
            }
        }
        State::Lattice((self.len() - 1) as i64)
    }

    fn contains(&self, x: &State) -> bool {
        matches!(x.lattice(), Some(i) if i >= 0 && (i as usize) < self.len())
    }

    fn transition_support(&self, x: &State) -> Option<Vec<(State, f64)>> {
        let i = x.lattice()? as usize;
        Some(
            self.rows[i]
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(j, &p)| (State::Lattice(j as i64), p))
                .collect(),
        )
    }

    fn finite(&self) -> Option<&FiniteKernel> {
        Some(self)
    }

    fn exact_nstep_expectation(&self, x: &State, n: u64, f: &dyn Fn(&State) -> f64) -> Option<f64> {
        let i = x.lattice()? as usize;
        let row = self.power_row(i, n);
        Some(
            row.iter()
                .enumerate()
                .map(|(j, &p)| p * f(&State::Lattice(j as i64)))
                .sum(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_stochastic_rows() {
        assert!(FiniteKernel::from_rows(vec![vec![0.5, 0.4], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn power_row_zero_is_point_mass() {
        let k = FiniteKernel::swap();
        assert_eq!(k.power_row(0, 0), vec![1.0, 0.0]);
    }

    #[test]
    fn swap_squared_is_identity() {
        let k = FiniteKernel::swap();
        let row = k.power_row(0, 2);
        assert!((row[0] - 1.0).abs() < 1e-15 && row[1].abs() < 1e-15);
    }

    #[test]
    fn pushforward_matches_power_row() {
        let k = FiniteKernel::lazy_birth_death(5, 0.3, |_| 0.4).unwrap();
        let f = |s: &State| (s.coord() + 1.0).powi(2);
        let exact = k
            .exact_nstep_expectation(&State::Lattice(2), 7, &f)
            .unwrap();
        // independent route: evolve the distribution step by step
        let mut v = vec![0.0; 5];
        v[2] = 1.0;
        for _ in 0..7 {
            v = k.step_distribution(&v);
        }
        let alt: f64 = v
            .iter()
            .enumerate()
            .map(|(j, &p)| p * f(&State::Lattice(j as i64)))
            .sum();
        assert!((exact - alt).abs() < 1e-12);
    }
}
