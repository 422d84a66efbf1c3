//! Extraction of self-similar structure from recorded runs: sliding
//! log-log slopes, rescaled profile collapses, and plateau-averaged
//! exponent estimates.
//!
//! The central observables are the effective exponents
//! `sigma(s) = d ln v(0,t) / d ln t` and `sigma*(s) = d ln min v / d ln t`
//! as functions of `s = ln t`. For mobility exponents `n > 2` these dip to
//! `-1/n` while the center still follows the touchdown point, then climb to
//! the plateaus `alpha = -1/(2(n-1))` and `beta = -1/(n-1)` of the final
//! self-similar regime.

use thiserror::Error;

use crate::diagnostics::{self, DiagnosticsSeries};
use crate::model::{RadialGrid, RadialState};

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    /// A log-log fit saw a zero, negative, or non-finite value.
    #[error("non-positive or non-finite data at index {index}: {value}")]
    NonPositiveData { index: usize, value: f64 },
    /// The profile has no interior minimum to rescale around.
    #[error("profile has no interior extremum")]
    NoExtremum,
    /// The rescaled profile never reaches the reference level right of the
    /// minimum, so no width can be defined.
    #[error("no crossing of the reference level right of the minimum")]
    NoCrossing,
    /// The effective exponent is still drifting over the requested tail.
    #[error("exponent plateau not reached: tail variance {variance}")]
    PlateauNotReached { variance: f64 },
}

/// Default half-width of the sliding log-log fit window.
pub const DEFAULT_WINDOW: usize = 8;

/// Default fraction of the `ln t` range averaged for plateau estimates.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.2;

/// Sliding-window log-log slopes `(t_j, d ln y / d ln t |_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogSlopeSeries {
    pub points: Vec<(f64, f64)>,
    pub window: usize,
}

/// Plateau-averaged similarity exponents. `gamma_hat = beta_hat / 2` holds
/// by construction (the interface width exponent is slaved to the depth).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentEstimate {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub gamma_hat: f64,
}

/// Sliding least-squares slope of `ln y` against `ln t` with half-width
/// `window`: one point per sample that has a full window on both sides.
pub fn log_slope(
    times: &[f64],
    values: &[f64],
    window: usize,
) -> Result<LogSlopeSeries, SimilarityError> {
    assert_eq!(times.len(), values.len());
    assert!(window >= 1);
    for (i, seq) in [times, values].iter().enumerate() {
        if let Some(j) = seq.iter().position(|&y| !(y > 0.0) || !y.is_finite()) {
            let _ = i;
            return Err(SimilarityError::NonPositiveData {
                index: j,
                value: seq[j],
            });
        }
    }
    let xs: Vec<f64> = times.iter().map(|&t| t.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|&v| v.ln()).collect();
    let mut points = Vec::new();
    if xs.len() >= 2 * window + 1 {
        for j in window..xs.len() - window {
            let lo = j - window;
            let hi = j + window;
            let m = (hi - lo + 1) as f64;
            let xbar = xs[lo..=hi].iter().sum::<f64>() / m;
            let ybar = ys[lo..=hi].iter().sum::<f64>() / m;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for i in lo..=hi {
                sxy += (xs[i] - xbar) * (ys[i] - ybar);
                sxx += (xs[i] - xbar) * (xs[i] - xbar);
            }
            points.push((times[j], sxy / sxx));
        }
    }
    Ok(LogSlopeSeries { points, window })
}

/// Central collapse: `r -> v(r,t)/v(0,t)` restricted to `[0, rbar]`. In the
/// self-similar regime these curves are t-independent.
pub fn collapse_central(
    state: &RadialState,
    grid: &RadialGrid,
) -> Result<Vec<(f64, f64)>, SimilarityError> {
    let ex = diagnostics::track_extrema(state, grid).map_err(|_| SimilarityError::NoExtremum)?;
    let v0 = 1.0 - state.values[0];
    if !(v0 > 0.0) {
        return Err(SimilarityError::NonPositiveData { index: 0, value: v0 });
    }
    Ok(grid
        .nodes
        .iter()
        .zip(&state.values)
        .take_while(|(&r, _)| r <= ex.rbar)
        .map(|(&r, &u)| (r, (1.0 - u) / v0))
        .collect())
}

/// Touchdown collapse: `rho -> w(rho) = v/vmin` against
/// `rho = (r - rbar)/Delta(t)`, where `Delta(t)` is the first radius right
/// of `rbar` with `w = 3` (linear interpolation). By construction
/// `w(0) = 1` and `w(1) = 3`.
pub fn collapse_touchdown(
    state: &RadialState,
    grid: &RadialGrid,
) -> Result<Vec<(f64, f64)>, SimilarityError> {
    let ex = diagnostics::track_extrema(state, grid).map_err(|_| SimilarityError::NoExtremum)?;
    if !(ex.vmin > 0.0) {
        return Err(SimilarityError::NonPositiveData {
            index: 0,
            value: ex.vmin,
        });
    }
    let v: Vec<f64> = state.values.iter().map(|&u| 1.0 - u).collect();
    let w: Vec<f64> = v.iter().map(|&vi| vi / ex.vmin).collect();
    // First w = 3 crossing right of the minimum.
    let mut delta = None;
    for k in 0..grid.num_cells {
        let (r0, r1) = (grid.nodes[k], grid.nodes[k + 1]);
        if r1 <= ex.rbar {
            continue;
        }
        if (w[k] - 3.0) * (w[k + 1] - 3.0) <= 0.0 && w[k + 1] != w[k] {
            let rc = r0 + (3.0 - w[k]) / (w[k + 1] - w[k]) * (r1 - r0);
            if rc > ex.rbar {
                delta = Some(rc - ex.rbar);
                break;
            }
        }
    }
    let delta = delta.ok_or(SimilarityError::NoCrossing)?;
    Ok(grid
        .nodes
        .iter()
        .zip(&w)
        .map(|(&r, &wi)| ((r - ex.rbar) / delta, wi))
        .collect())
}

/// Most negative value of `sigma(s)` and the time where it is attained —
/// the dip that marks the center following the touchdown point (depth
/// `-1/n` for mobility exponent `n`).
pub fn min_sigma(diag: &DiagnosticsSeries) -> Result<(f64, f64), SimilarityError> {
    let (times, v0): (Vec<f64>, Vec<f64>) =
        diag.rows.iter().map(|r| (r.t, r.v0)).unzip();
    let sl = log_slope(&times, &v0, DEFAULT_WINDOW)?;
    sl.points
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(SimilarityError::NoExtremum)
}

/// Plateau-averaged exponents over the final `tail_fraction` of the `ln t`
/// range: `alpha_hat` from `v(0,t)`, `beta_hat` from `min v`, and
/// `gamma_hat = beta_hat/2`. Errors if either effective exponent still
/// drifts (tail variance above `1e-3`).
pub fn estimate_exponents(
    diag: &DiagnosticsSeries,
    tail_fraction: f64,
) -> Result<ExponentEstimate, SimilarityError> {
    assert!(tail_fraction > 0.0 && tail_fraction <= 1.0);
    let alpha_hat = plateau_mean(
        diag.rows.iter().map(|r| (r.t, r.v0)),
        tail_fraction,
    )?;
    let beta_hat = plateau_mean(
        diag.rows
            .iter()
            .filter(|r| r.vmin.is_finite())
            .map(|r| (r.t, r.vmin)),
        tail_fraction,
    )?;
    Ok(ExponentEstimate {
        alpha_hat,
        beta_hat,
        gamma_hat: 0.5 * beta_hat,
    })
}

fn plateau_mean(
    rows: impl Iterator<Item = (f64, f64)>,
    tail_fraction: f64,
) -> Result<f64, SimilarityError> {
    let (times, values): (Vec<f64>, Vec<f64>) = rows.unzip();
    let sl = log_slope(&times, &values, DEFAULT_WINDOW)?;
    if sl.points.is_empty() {
        return Err(SimilarityError::NoExtremum);
    }
    let s_first = sl.points.first().unwrap().0.ln();
    let s_last = sl.points.last().unwrap().0.ln();
    let s_cut = s_last - tail_fraction * (s_last - s_first);
    let tail: Vec<f64> = sl
        .points
        .iter()
        .filter(|(t, _)| t.ln() >= s_cut)
        .map(|&(_, s)| s)
        .collect();
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let variance = tail.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / tail.len() as f64;
    if variance > 1e-3 {
        return Err(SimilarityError::PlateauNotReached { variance });
    }
    Ok(mean)
}
