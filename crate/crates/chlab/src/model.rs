//! PDE instance: parameters, radial grid, state, free energy, mobility
//! variants, and initial data.
//!
//! The equation lives on the unit disk in radial symmetry,
//!
//! ```text
//!   u_t = (1/r) (r M(u) mu_r)_r,    mu = -(eps^2/r)(r u_r)_r + f'(u),
//! ```
//!
//! with the double well `f(u) = (1/2)(1-u^2)^2` and degenerate mobility
//! `M(u) = (1-u^2)^n`. Everything here is pure: parameters, the equidistant
//! grid with its finite-volume weights, pointwise free-energy and mobility
//! evaluation, and the tanh initial profile. The discrete operators built
//! from these live in [`crate::solver`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    /// `(1-u^2)^n` with non-integer `n` and `u^2 > 1` would be complex;
    /// the plain variant is undefined there.
    #[error("plain mobility with non-integer n = {n} is undefined for |u| > 1 (u = {u})")]
    MobilityDomain { u: f64, n: f64 },
}

/// How the degenerate factor `1 - u^2` enters the mobility.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MobilityVariant {
    /// `(1 - u^2)^n`: can go negative past `|u| = 1` for odd integer `n`.
    Plain,
    /// `(max(1 - u^2, 0))^n`: clipped at the degeneracy.
    Truncated,
    /// `|1 - u^2|^n`: reflected at the degeneracy.
    Absolute,
}

/// Parameters selecting the PDE instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Interface-width parameter `eps > 0`.
    pub epsilon: f64,
    /// Degeneracy exponent `n >= 0` of the mobility (`n = 0`: constant 1).
    pub n: f64,
    pub mobility_variant: MobilityVariant,
}

impl ModelParams {
    pub fn new(epsilon: f64, n: f64, mobility_variant: MobilityVariant) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        assert!(n >= 0.0, "degeneracy exponent must be nonnegative");
        Self {
            epsilon,
            n,
            mobility_variant,
        }
    }

    /// Mobility `M(u)` under the configured variant.
    pub fn mobility(&self, u: f64) -> Result<f64, ModelError> {
        if self.mobility_variant == MobilityVariant::Plain
            && self.n.fract() != 0.0
            && u * u > 1.0
        {
            return Err(ModelError::MobilityDomain { u, n: self.n });
        }
        Ok(self.mobility_and_deriv(u).0)
    }

    /// `(M(u), dM/du)` without the domain guard; the implicit solver calls
    /// this in its innermost loop and treats any NaN (plain variant,
    /// non-integer `n`, `|u| > 1`) as a failed Newton iterate.
    #[inline]
    pub fn mobility_and_deriv(&self, u: f64) -> (f64, f64) {
        let s = 1.0 - u * u;
        let n = self.n;
        if n == 0.0 {
            return (1.0, 0.0);
        }
        // ds/du = -2u; dM/du = n * g(s)^{n-1} * g'(s) * (-2u) per variant.
        match self.mobility_variant {
            MobilityVariant::Plain => {
                let (p, pm1) = pow_pair(s, n);
                (p, -2.0 * u * n * pm1)
            }
            MobilityVariant::Truncated => {
                if s > 0.0 {
                    let (p, pm1) = pow_pair(s, n);
                    (p, -2.0 * u * n * pm1)
                } else {
                    (0.0, 0.0)
                }
            }
            MobilityVariant::Absolute => {
                let (p, pm1) = pow_pair(s.abs(), n);
                (p, -2.0 * u * n * pm1 * s.signum())
            }
        }
    }
}

/// `(x^n, x^{n-1})` with the integer fast path the long runs rely on.
#[inline]
fn pow_pair(x: f64, n: f64) -> (f64, f64) {
    if n.fract() == 0.0 && (0.0..=16.0).contains(&n) {
        let pm1 = x.powi(n as i32 - 1);
        (pm1 * x, pm1)
    } else {
        (x.powf(n), x.powf(n - 1.0))
    }
}

/// Double-well free energy and its derivative: `f(u) = (1/2)(1-u^2)^2`,
/// `f'(u) = -2u(1-u^2)`.
#[inline]
pub fn free_energy_terms(u: f64) -> (f64, f64) {
    let s = 1.0 - u * u;
    (0.5 * s * s, -2.0 * u * s)
}

/// Second derivative `f''(u) = 6u^2 - 2`, needed by the solver Jacobian.
#[inline]
pub fn free_energy_second(u: f64) -> f64 {
    6.0 * u * u - 2.0
}

/// Equidistant radial grid on `[0, 1]` with finite-volume weights.
///
/// Nodes `r_i = i/N`. The cell around node `i` runs between the interface
/// radii `r_{i-1/2}` and `r_{i+1/2}`, and `volumes[i]` is the exact measure
/// `int r dr` over that cell (half-cells at the ends):
/// `vol_0 = dr^2/8`, `vol_i = r_i dr`, `vol_N = dr (1 - dr/4)/2`.
/// The weights sum to exactly 1/2, the measure of the unit interval.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    pub num_cells: usize,
    pub spacing: f64,
    /// Node radii `r_i`, length `N + 1`.
    pub nodes: Vec<f64>,
    /// Interface radii `r_{i+1/2}`, length `N`.
    pub interfaces: Vec<f64>,
    /// Finite-volume weights per node, length `N + 1`.
    pub volumes: Vec<f64>,
}

impl RadialGrid {
    pub fn new(num_cells: usize) -> Self {
        assert!(num_cells >= 4, "grid needs at least a few cells");
        let n = num_cells;
        let dr = 1.0 / n as f64;
        let nodes: Vec<f64> = (0..=n).map(|i| i as f64 * dr).collect();
        let interfaces: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * dr).collect();
        let mut volumes = vec![0.0; n + 1];
        volumes[0] = dr * dr / 8.0;
        for i in 1..n {
            volumes[i] = nodes[i] * dr;
        }
        volumes[n] = dr * (1.0 - dr / 4.0) / 2.0;
        Self {
            num_cells: n,
            spacing: dr,
            nodes,
            interfaces,
            volumes,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_cells + 1
    }
}

/// Solution values on a [`RadialGrid`] at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialState {
    pub time: f64,
    /// Order parameter `u_i` at the grid nodes.
    pub values: Vec<f64>,
}

impl RadialState {
    pub fn new(time: f64, values: Vec<f64>) -> Self {
        Self { time, values }
    }

    /// The distance-from-touchdown view `v = 1 - u` the analysis modules use.
    pub fn v(&self) -> Vec<f64> {
        self.values.iter().map(|&u| 1.0 - u).collect()
    }
}

/// Tanh interface profile `u_i = -amplitude * tanh((r_i - center)/epsilon)`
/// at time zero. Defaults elsewhere: `amplitude = 0.95`, `center = 0.5`.
///
/// With `clamp_endpoints` the two boundary nodes are hard-set to
/// `+/- amplitude`, the robustness variant in which the exponentially small
/// boundary mismatch of the tanh is removed entirely.
pub fn initial_profile(
    grid: &RadialGrid,
    epsilon: f64,
    amplitude: f64,
    center: f64,
    clamp_endpoints: bool,
) -> RadialState {
    assert!(0.0 < center && center < 1.0, "center must lie inside (0,1)");
    let mut values: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&r| -amplitude * ((r - center) / epsilon).tanh())
        .collect();
    if clamp_endpoints {
        let n = grid.num_cells;
        values[0] = amplitude;
        values[n] = -amplitude;
    }
    RadialState::new(0.0, values)
}

/// Default initial-data parameters used throughout the study.
pub const DEFAULT_AMPLITUDE: f64 = 0.95;
pub const DEFAULT_CENTER: f64 = 0.5;

/// Mass of the default tanh profile at `eps = 0.1`, frozen from an adaptive
/// quadrature of `int_0^1 u_init(r) r dr` at 30-digit precision.
pub const DEFAULT_M0: f64 = -0.229_691_307_372_334_13;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn free_energy_at_well_minima_and_origin() {
        assert_eq!(free_energy_terms(1.0), (0.0, 0.0));
        assert_eq!(free_energy_terms(-1.0), (0.0, 0.0));
        assert_eq!(free_energy_terms(0.0), (0.5, 0.0));
    }

    #[test]
    fn mobility_constant_for_n_zero() {
        for variant in [
            MobilityVariant::Plain,
            MobilityVariant::Truncated,
            MobilityVariant::Absolute,
        ] {
            let p = ModelParams::new(0.1, 0.0, variant);
            for u in [-1.5, -1.0, 0.0, 0.3, 1.0, 2.0] {
                assert_eq!(p.mobility(u).unwrap(), 1.0, "{variant:?} at u = {u}");
                assert_eq!(p.mobility_and_deriv(u), (1.0, 0.0));
            }
        }
    }

    #[test]
    fn mobility_vanishes_at_pure_phases() {
        for variant in [
            MobilityVariant::Plain,
            MobilityVariant::Truncated,
            MobilityVariant::Absolute,
        ] {
            let p = ModelParams::new(0.1, 4.0, variant);
            assert_eq!(p.mobility(1.0).unwrap(), 0.0);
            assert_eq!(p.mobility(-1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn mobility_variants_disagree_past_degeneracy() {
        // (1 - 1.1^2)^3 = (-0.21)^3 = -0.009261 exactly in decimal.
        let u = 1.1;
        let plain = ModelParams::new(0.1, 3.0, MobilityVariant::Plain);
        let trunc = ModelParams::new(0.1, 3.0, MobilityVariant::Truncated);
        let abs = ModelParams::new(0.1, 3.0, MobilityVariant::Absolute);
        assert!((plain.mobility(u).unwrap() - (-0.009261)).abs() < 1e-15);
        assert_eq!(trunc.mobility(u).unwrap(), 0.0);
        assert!((abs.mobility(u).unwrap() - 0.009261).abs() < 1e-15);
    }

    #[test]
    fn plain_mobility_rejects_non_integer_power_past_one() {
        let p = ModelParams::new(0.1, 2.5, MobilityVariant::Plain);
        assert!(matches!(
            p.mobility(1.2),
            Err(ModelError::MobilityDomain { .. })
        ));
        // Inside |u| <= 1 it is fine, as are the other variants outside.
        assert!(p.mobility(0.9).is_ok());
        let a = ModelParams::new(0.1, 2.5, MobilityVariant::Absolute);
        assert!(a.mobility(1.2).is_ok());
    }

    #[test]
    fn mobility_nonnegative_for_safe_variants() {
        for variant in [MobilityVariant::Truncated, MobilityVariant::Absolute] {
            for n in [0.5, 1.0, 3.0, 4.0] {
                let p = ModelParams::new(0.1, n, variant);
                let mut u = -2.0;
                while u <= 2.0 {
                    assert!(p.mobility(u).unwrap() >= 0.0, "{variant:?} n={n} u={u}");
                    u += 0.05;
                }
            }
        }
    }

    #[test]
    fn grid_weights_are_exact_cell_measures() {
        let g = RadialGrid::new(64);
        assert_eq!(g.nodes[0], 0.0);
        assert_eq!(g.nodes[64], 1.0);
        assert_eq!(g.interfaces.len(), 64);
        // Sum of int r dr over all cells is int_0^1 r dr = 1/2.
        let total: f64 = g.volumes.iter().sum();
        assert!((total - 0.5).abs() < 1e-15);
        assert!(g.volumes.iter().all(|&v| v > 0.0));
        // Interior weight is the exact annulus measure r_i * dr.
        let i = 17;
        let exact = (g.interfaces[i].powi(2) - g.interfaces[i - 1].powi(2)) / 2.0;
        assert!((g.volumes[i] - exact).abs() < 1e-18);
    }

    #[test]
    fn initial_profile_matches_tanh_pointwise() {
        let g = RadialGrid::new(1000);
        let s = initial_profile(&g, 0.1, DEFAULT_AMPLITUDE, DEFAULT_CENTER, false);
        assert_eq!(s.time, 0.0);
        // Node at the center: tanh(0) = 0.
        assert_eq!(s.values[500], 0.0);
        // At r = 0: 0.95 * tanh(5) ~ 0.94991.
        let expect = 0.95 * (5.0f64).tanh();
        assert!((s.values[0] - expect).abs() < 1e-16);
        assert!((s.values[0] - 0.949_913_744_049_465_3).abs() < 1e-12);
        // v-view complements u.
        let v = s.v();
        assert!((v[500] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn initial_profile_is_flat_at_boundaries() {
        // Exponentially small boundary mismatch: the slope at each end is
        // bounded by 4(A/eps) e^{-2c/eps} (~1.7e-3 at the defaults), tiny
        // against the interior interface slope A/eps.
        let g = RadialGrid::new(1000);
        let eps = 0.1;
        let s = initial_profile(&g, eps, DEFAULT_AMPLITUDE, DEFAULT_CENTER, false);
        let n = g.num_cells;
        let dl = (s.values[1] - s.values[0]) / g.spacing;
        let dr = (s.values[n] - s.values[n - 1]) / g.spacing;
        // 1.5x headroom over the analytic bound covers the one-sided
        // stencil's truncation error on top of the continuum slope.
        let bound = 1.5 * 4.0 * (DEFAULT_AMPLITUDE / eps) * (-2.0 * DEFAULT_CENTER / eps).exp();
        assert!(dl.abs() < bound, "left slope {dl} vs bound {bound}");
        assert!(dr.abs() < bound, "right slope {dr} vs bound {bound}");
        // And the mismatch really is exponentially separated from the
        // interior scale A/eps.
        assert!(dl.abs() < 1e-3 * (DEFAULT_AMPLITUDE / eps));
    }

    #[test]
    fn clamped_profile_pins_the_endpoints() {
        let g = RadialGrid::new(100);
        let s = initial_profile(&g, 0.1, DEFAULT_AMPLITUDE, DEFAULT_CENTER, true);
        assert_eq!(s.values[0], DEFAULT_AMPLITUDE);
        assert_eq!(s.values[100], -DEFAULT_AMPLITUDE);
    }

    proptest! {
        /// f' is the exact derivative of f: centered differences converge
        /// at second order.
        #[test]
        fn prop_free_energy_derivative_consistent(u in -2.0f64..2.0) {
            let h = 1e-5;
            let (fp, _) = free_energy_terms(u + h);
            let (fm, _) = free_energy_terms(u - h);
            let (_, fprime) = free_energy_terms(u);
            let fd = (fp - fm) / (2.0 * h);
            // Third derivative of f is -12u, so the h^2 remainder is small.
            prop_assert!((fd - fprime).abs() < 1e-8 * (1.0 + fprime.abs()));
        }

        /// The mobility derivative returned with the value matches a
        /// centered difference of the value, for every variant away from
        /// the kinks at |u| = 1.
        #[test]
        fn prop_mobility_derivative_consistent(
            u in -0.95f64..0.95,
            n in 1.0f64..6.0,
            variant in prop::sample::select(vec![
                MobilityVariant::Plain,
                MobilityVariant::Truncated,
                MobilityVariant::Absolute,
            ]),
        ) {
            let p = ModelParams::new(0.1, n, variant);
            let h = 1e-6;
            let (m, dm) = p.mobility_and_deriv(u);
            let fd = (p.mobility_and_deriv(u + h).0 - p.mobility_and_deriv(u - h).0) / (2.0 * h);
            prop_assert!((fd - dm).abs() < 1e-6 * (1.0 + dm.abs()), "M={m} dM={dm} fd={fd}");
        }
    }
}
