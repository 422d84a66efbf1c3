//! Numerical laboratory for the radially symmetric degenerate Cahn-Hilliard
//! equation
//!
//! ```text
//!   u_t = -(1/r) (r j)_r,    j = -M(u) mu_r,
//!   mu  = -(eps^2/r) (r u_r)_r + f'(u),     f(u) = (1/2)(1 - u^2)^2,
//! ```
//!
//! on the unit disk with degenerate mobility `M(u) = (1 - u^2)^n`, no-flux
//! boundary conditions, and symmetric initial data. The crate has three legs:
//!
//! * **Simulation** ([`model`], [`solver`]): a conservative finite-volume
//!   discretization in the radius, integrated implicitly with adaptive step
//!   doubling so trajectories reach times of order `1e15` where the solution
//!   flattens toward the degenerate value `u = 1` (equivalently `v = 1 - u`
//!   touches down toward zero).
//! * **Asymptotics** ([`annular`], [`touchdown`], [`composite`]): the pieces of
//!   the matched long-time description -- the stationary annular outer
//!   solution, the self-similar touchdown profile `phi0` solving
//!   `phi0^n phi0''' = 1`, and the matching constants that glue them into a
//!   uniform composite approximation with exact rational decay exponents.
//! * **Diagnostics** ([`similarity`], [`diagnostics`]): extraction of decay
//!   exponents and touchdown structure from simulated trajectories, used to
//!   cross-validate the two independent routes to the long-time solution.
//!
//! Supporting layers: [`band`] (banded LU with iteratively refined solves,
//! which the stiff Jacobians require), [`dd`] (compensated floating-point
//! accumulation), [`specfun`] (modified Bessel functions in the inner
//! expansion), [`bvp`] (collocation boundary-value solver), [`config`] /
//! [`io`] / [`pipeline`] (reproducible runs: TOML round-trip configs, hashed
//! deterministic outputs, end-to-end validation).

pub mod annular;
pub mod band;
pub mod bvp;
pub mod composite;
pub mod config;
pub mod dd;
pub mod diagnostics;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod similarity;
pub mod solver;
pub mod specfun;
pub mod touchdown;
