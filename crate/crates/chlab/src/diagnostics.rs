//! Scalar observables recorded along a run: mass, energy, dissipation, and
//! the tracked interface extremum of `v = 1 - u`.
//!
//! Mass and energy use trapezoidal quadrature in the cylindrical measure
//! `r dr`; gradients at the endpoints are second-order one-sided so the
//! energy of smooth profiles with `u_r = 0` at both walls converges at
//! second order. The dissipation is the midpoint-rule counterpart of the
//! scheme's own energy identity `dE/dt = -sum_k r_{k+1/2} M (d mu/dr)^2 dr`,
//! so it tracks centered differences of the recorded energy to a few
//! percent once the transient is resolved.

use serde::Serialize;
use thiserror::Error;

use crate::dd::{self, DdAcc};
use crate::model::{free_energy_terms, ModelParams, RadialGrid, RadialState};
use crate::solver::chemical_potential;

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    /// `v` is monotone across the grid: there is no interface minimum to
    /// track (early times, before the interface forms).
    #[error("v = 1 - u has no interior minimum")]
    NoInteriorMinimum,
}

/// Interface extremum of `v = 1 - u`, refined by parabolic interpolation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Extrema {
    /// Center value `v(r = 0)`.
    pub v0: f64,
    /// Sub-grid location of the interior minimum.
    pub rbar: f64,
    /// Parabolically refined minimum value.
    pub vmin: f64,
    /// Curvature `v''` at the minimum.
    pub d2v: f64,
}

/// One diagnostics record. `rbar`, `vmin`, `d2v` are NaN while the profile
/// is still monotone (no interface minimum yet).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagRow {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub v0: f64,
    pub rbar: f64,
    pub vmin: f64,
    pub d2v: f64,
}

/// Time-ordered diagnostics records of a run.
#[derive(Clone, Debug, Default)]
pub struct DiagnosticsSeries {
    pub rows: Vec<DiagRow>,
}

impl DiagnosticsSeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a record; times must be strictly increasing.
    pub fn append(&mut self, row: DiagRow) {
        if let Some(last) = self.rows.last() {
            assert!(
                row.t > last.t,
                "diagnostics times must increase: {} after {}",
                row.t,
                last.t
            );
        }
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Trapezoidal mass `int_0^1 u r dr`. Exactly `c/2` for `u = c` (the
/// trapezoid rule is exact for the linear integrand `c r`).
pub fn mass(state: &RadialState, grid: &RadialGrid) -> f64 {
    let dr = grid.spacing;
    let u = &state.values;
    let r = &grid.nodes;
    let n = grid.num_cells;
    let mut acc = DdAcc::new();
    // Endpoint r = 0 contributes nothing (weight r_0 = 0).
    for i in 1..n {
        acc.add_prod(u[i] * r[i], dr);
    }
    acc.add_prod(u[n] * r[n], 0.5 * dr);
    acc.value()
}

/// Second-order gradient on the uniform grid: centered inside, one-sided
/// three-point stencils at the walls.
fn gradient(u: &[f64], dr: f64) -> Vec<f64> {
    let n = u.len() - 1;
    assert!(n >= 2);
    let mut g = vec![0.0; n + 1];
    g[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dr);
    for i in 1..n {
        g[i] = (u[i + 1] - u[i - 1]) / (2.0 * dr);
    }
    g[n] = (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * dr);
    g
}

/// Trapezoidal free energy `int_0^1 [eps^2/2 (u_r)^2 + f(u)] r dr`.
pub fn energy(state: &RadialState, params: &ModelParams, grid: &RadialGrid) -> f64 {
    let u = &state.values;
    let grad = gradient(u, grid.spacing);
    let e2h = 0.5 * params.epsilon * params.epsilon;
    let n = grid.num_cells;
    let dr = grid.spacing;
    let mut acc = DdAcc::new();
    for i in 1..=n {
        let density = e2h * grad[i] * grad[i] + free_energy_terms(u[i]).0;
        let w = if i == n { 0.5 * dr } else { dr };
        acc.add_prod(density * grid.nodes[i], w);
    }
    acc.value()
}

/// Energy dissipation rate `-int M(u) (mu_r)^2 r dr <= 0`, assembled on
/// interfaces exactly as the scheme's flux dissipation.
pub fn dissipation(state: &RadialState, params: &ModelParams, grid: &RadialGrid) -> f64 {
    let mu = chemical_potential(state, params, grid);
    let u = &state.values;
    let dr = grid.spacing;
    let mut acc = DdAcc::new();
    for k in 0..grid.num_cells {
        let m = params.mobility_and_deriv(0.5 * (u[k] + u[k + 1])).0;
        let dmu = (mu[k + 1] - mu[k]) / dr;
        acc.add_prod(grid.interfaces[k] * m * dmu, dmu * dr);
    }
    -acc.value()
}

/// Locate the interface minimum of `v = 1 - u` with parabolic sub-grid
/// refinement. Errors while the profile is monotone (minimum on the wall).
pub fn track_extrema(state: &RadialState, grid: &RadialGrid) -> Result<Extrema, DiagnosticsError> {
    let n = grid.num_cells;
    let v = |i: usize| 1.0 - state.values[i];
    let mut k = 0usize;
    for i in 1..=n {
        if v(i) < v(k) {
            k = i;
        }
    }
    if k == 0 || k == n {
        return Err(DiagnosticsError::NoInteriorMinimum);
    }
    let (vm, v0, vp) = (v(k - 1), v(k), v(k + 1));
    let denom = vm - 2.0 * v0 + vp;
    let dr = grid.spacing;
    let (rbar, vmin) = if denom > 0.0 {
        let off = (0.5 * dr * (vm - vp) / denom).clamp(-0.5 * dr, 0.5 * dr);
        let vert = v0 - (vm - vp) * (vm - vp) / (8.0 * denom);
        (grid.nodes[k] + off, vert)
    } else {
        (grid.nodes[k], v0)
    };
    Ok(Extrema {
        v0: v(0),
        rbar,
        vmin,
        d2v: denom / (dr * dr),
    })
}

/// FV mass of the same state, re-exported here for convenience in reports.
pub fn fv_mass(state: &RadialState, grid: &RadialGrid) -> f64 {
    dd::dot(&grid.volumes, &state.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        initial_profile, MobilityVariant, DEFAULT_AMPLITUDE, DEFAULT_CENTER, DEFAULT_M0,
    };

    fn params_n(n: f64) -> ModelParams {
        ModelParams::new(0.1, n, MobilityVariant::Plain)
    }

    #[test]
    fn mass_of_constant_is_half_c() {
        let g = RadialGrid::new(128);
        for &c in &[0.0, 1.0, -0.95, 0.3] {
            let s = RadialState::new(0.0, vec![c; 129]);
            assert!((mass(&s, &g) - 0.5 * c).abs() < 1e-15);
        }
    }

    #[test]
    fn initial_mass_matches_quadrature_oracle() {
        // int_0^1 -0.95 tanh((r - 1/2)/0.1) r dr, 30-digit value frozen
        // from an arbitrary-precision quadrature.
        let g = RadialGrid::new(200_000);
        let s = initial_profile(&g, 0.1, DEFAULT_AMPLITUDE, DEFAULT_CENTER, false);
        assert!(
            (mass(&s, &g) - DEFAULT_M0).abs() < 1e-10,
            "mass {m}",
            m = mass(&s, &g)
        );
    }

    #[test]
    fn energy_of_flat_states() {
        let g = RadialGrid::new(64);
        let p = params_n(0.0);
        // u = 0: density f(0) = 1/2, integral = 1/4. u = 1: zero energy.
        let e0 = energy(&RadialState::new(0.0, vec![0.0; 65]), &p, &g);
        assert!((e0 - 0.25).abs() < 1e-14);
        let e1 = energy(&RadialState::new(0.0, vec![1.0; 65]), &p, &g);
        assert!(e1.abs() < 1e-14);
    }

    #[test]
    fn energy_second_order_convergence() {
        // u = cos(pi r): E = int [eps^2/2 pi^2 sin^2(pi r) + f(cos pi r)] r dr.
        // Reference from a 1e6-panel trapezoid refinement (converged value).
        let p = params_n(0.0);
        let e_at = |n: usize| {
            let g = RadialGrid::new(n);
            let u: Vec<f64> = g
                .nodes
                .iter()
                .map(|&r| (std::f64::consts::PI * r).cos())
                .collect();
            energy(&RadialState::new(0.0, u), &p, &g)
        };
        let fine = e_at(1 << 16);
        let (e1, e2) = (e_at(256), e_at(512));
        let ratio = (e1 - fine).abs() / (e2 - fine).abs();
        assert!((3.0..5.0).contains(&ratio), "convergence ratio {ratio}");
    }

    #[test]
    fn dissipation_of_constant_vanishes_and_tanh_is_negative() {
        let g = RadialGrid::new(256);
        let p = params_n(0.0);
        let flat = RadialState::new(0.0, vec![0.4; 257]);
        assert_eq!(dissipation(&flat, &p, &g), 0.0);
        let s = initial_profile(&g, 0.1, DEFAULT_AMPLITUDE, DEFAULT_CENTER, false);
        assert!(dissipation(&s, &p, &g) < 0.0);
    }

    #[test]
    fn extrema_exact_on_parabola() {
        // v = 1 + (r - 0.305)^2, i.e. u = -(r - 0.305)^2: parabolic
        // refinement recovers center, value, and curvature exactly.
        let g = RadialGrid::new(100);
        let u: Vec<f64> = g.nodes.iter().map(|&r| -(r - 0.305) * (r - 0.305)).collect();
        let ex = track_extrema(&RadialState::new(0.0, u), &g).unwrap();
        assert!((ex.rbar - 0.305).abs() < 1e-10);
        assert!((ex.vmin - 1.0).abs() < 1e-10);
        assert!((ex.d2v - 2.0).abs() < 1e-10);
        assert!((ex.v0 - (1.0 + 0.305 * 0.305)).abs() < 1e-15);
    }

    #[test]
    fn extrema_rejects_monotone_profiles() {
        let g = RadialGrid::new(50);
        // u increasing => v decreasing: minimum on the outer wall.
        let u: Vec<f64> = g.nodes.iter().map(|&r| r).collect();
        assert_eq!(
            track_extrema(&RadialState::new(0.0, u), &g),
            Err(DiagnosticsError::NoInteriorMinimum)
        );
        // u decreasing => v increasing: minimum at the origin.
        let u: Vec<f64> = g.nodes.iter().map(|&r| -r).collect();
        assert_eq!(
            track_extrema(&RadialState::new(0.0, u), &g),
            Err(DiagnosticsError::NoInteriorMinimum)
        );
    }

    #[test]
    fn series_appends_in_order() {
        let mut s = DiagnosticsSeries::new();
        let row = |t| DiagRow {
            t,
            mass: 0.0,
            energy: 0.0,
            dissipation: 0.0,
            v0: 1.0,
            rbar: f64::NAN,
            vmin: f64::NAN,
            d2v: f64::NAN,
        };
        s.append(row(1.0));
        s.append(row(2.0));
        assert_eq!(s.len(), 2);
    }

    #[test]
    #[should_panic(expected = "must increase")]
    fn series_rejects_nonmonotone_times() {
        let mut s = DiagnosticsSeries::new();
        let row = |t| DiagRow {
            t,
            mass: 0.0,
            energy: 0.0,
            dissipation: 0.0,
            v0: 1.0,
            rbar: f64::NAN,
            vmin: f64::NAN,
            d2v: f64::NAN,
        };
        s.append(row(2.0));
        s.append(row(2.0));
    }
}
