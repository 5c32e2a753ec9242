//! State-grid builders. Drift margins vary on the scale of the Lyapunov
//! function, so grids are log-spaced in the principal coordinate by default.

use crate::state::State;

/// Log-spaced scalar states over `[lo, hi]` with `per_decade` points per
/// decade (at least two points total).
pub fn scalar_log(lo: f64, hi: f64, per_decade: usize) -> Vec<State> {
    log_coords(lo, hi, per_decade)
        .into_iter()
        .map(State::Scalar)
        .collect()
}

/// Log-spaced lattice states over `[lo, hi]`, deduplicated after rounding.
pub fn lattice_log(lo: i64, hi: i64, per_decade: usize) -> Vec<State> {
    let mut xs: Vec<i64> = log_coords(lo.max(1) as f64, hi as f64, per_decade)
        .into_iter()
        .map(|v| v.round() as i64)
        .collect();
    xs.sort_unstable();
    xs.dedup();
    xs.into_iter().map(State::Lattice).collect()
}

/// Consecutive lattice states `lo..=hi` (dense sample of a small set).
pub fn lattice_range(lo: i64, hi: i64) -> Vec<State> {
    (lo..=hi).map(State::Lattice).collect()
}

/// Log-spaced dominating-process states at level `z` with countdown `m(z)`.
pub fn dom_log(lo: f64, hi: f64, per_decade: usize, m: impl Fn(f64) -> u32) -> Vec<State> {
    log_coords(lo, hi, per_decade)
        .into_iter()
        .map(|z| State::Dom { z, m: m(z) })
        .collect()
}

fn log_coords(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo, "need 0 < lo <= hi");
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(1) + 1;
    let (l, h) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (l + (h - l) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
