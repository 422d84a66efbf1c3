//! Conservative spatial discretization and fully implicit adaptive time
//! integration to times up to `1e15`.
//!
//! Space: finite volumes on the equidistant radial grid. With interface
//! fluxes `G_k = r_{k+1/2} M((u_k + u_{k+1})/2) (mu_{k+1} - mu_k)/dr` the
//! semi-discrete system is `du_i/dt = (G_i - G_{i-1}) / vol_i`,
//! `G_{-1} = G_N = 0`, which telescopes: the finite-volume mass
//! `sum_i vol_i u_i` is conserved identically. The chemical potential uses
//! the centered discretization of `(1/r)(r u_r)_r` with the symmetric
//! closure `4(u_1 - u_0)/dr^2` at the origin and a mirror ghost node at
//! `r = 1`.
//!
//! Time: implicit Euler with classic step doubling (one `dt` step against
//! two `dt/2` steps). Each nonlinear system is solved by a damped
//! affine-covariant Newton iteration on the banded Jacobian (pentadiagonal,
//! held in 7-row LAPACK band storage) with iteratively refined LU solves.
//! Three ingredients keep this robust over 25 decades of `t`, where the
//! Jacobian condition number reaches `~1e17` and the residual has enormous
//! third derivatives near the touchdown minimum:
//!
//! * refined LU directions (plain f64 LU directions stop being descent
//!   directions beyond condition `~1e15`),
//! * predictors extrapolated from the previous accepted step, which start
//!   Newton inside its quadratic basin,
//! * a stall acceptance: an iterate whose correction has stagnated below
//!   a small fraction of the step-doubling tolerance is converged for every
//!   purpose the error controller can see.
//!
//! After every accepted sub-step the conserved-mass defect (a compensated
//! sum; the flux part cancels identically) is removed by a uniform shift,
//! pinning relative mass drift near machine precision over full runs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::band::BandMatrix;
use crate::dd::{self, DdAcc};
use crate::diagnostics::{self, DiagRow, DiagnosticsSeries};
use crate::model::{
    free_energy_second, free_energy_terms, ModelParams, RadialGrid, RadialState,
};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    /// Newton failed to converge within `newton_max_iter`; for single steps
    /// the caller is expected to halve `dt` and retry.
    #[error("Newton iteration diverged at t = {t}, dt = {dt}")]
    NewtonDivergence { t: f64, dt: f64 },
    /// The adaptive controller pushed `dt` below `dt_min`.
    #[error("time step underflow at t = {t}: dt = {dt} < dt_min")]
    StepSizeUnderflow { t: f64, dt: f64 },
}

/// Tolerances and controls of the implicit integrator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Max-norm tolerance on the Newton correction.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Step-doubling error tolerance, relative to `max(1, max|u|)`.
    pub time_tol: f64,
    pub dt_init: f64,
    /// Largest growth factor of `dt` per accepted step (>= 1).
    pub dt_max_growth: f64,
    pub dt_min: f64,
    /// Threshold on `min v` for the touchdown event.
    pub touchdown_tol: f64,
    /// Halt `adaptive_advance` on a touchdown event (default). Disable to
    /// integrate past the `u = 1` crossing, e.g. for the n = 0 relaxation
    /// to the stationary solution.
    pub halt_on_touchdown: bool,
    /// Diagnostics rows per decade of `t` (log-spaced output times).
    pub outputs_per_decade: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-11,
            newton_max_iter: 14,
            time_tol: 1e-7,
            dt_init: 1e-10,
            dt_max_growth: 2.0,
            dt_min: 1e-14,
            touchdown_tol: 1e-13,
            halt_on_touchdown: true,
            outputs_per_decade: 32,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.newton_tol > 0.0 && self.time_tol > 0.0 && self.touchdown_tol > 0.0) {
            return Err("tolerances must be strictly positive".into());
        }
        if !(self.dt_init > 0.0 && self.dt_min > 0.0 && self.dt_min < self.dt_init) {
            return Err("need 0 < dt_min < dt_init".into());
        }
        if self.dt_max_growth < 1.0 {
            return Err("dt_max_growth must be >= 1".into());
        }
        if self.newton_max_iter == 0 || self.outputs_per_decade == 0 {
            return Err("iteration and output counts must be positive".into());
        }
        Ok(())
    }
}

/// What kind of touchdown terminated (or was observed in) a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TouchdownKind {
    /// `v` dipped to (or below) `touchdown_tol` while still nonnegative.
    ReachedThreshold,
    /// `u` exceeded 1 (`v < 0`): the solution left the admissible branch.
    CrossedOne,
}

/// First time/location at which `v = 1 - u` reached the touchdown criterion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TouchdownEvent {
    pub time: f64,
    /// Sub-grid location of the offending extremum of `v`.
    pub radius: f64,
    pub kind: TouchdownKind,
}

/// Result of one accepted adaptive step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: RadialState,
    pub dt_used: f64,
    pub dt_next: f64,
    /// Newton iterations summed over the three sub-solves of the accepted
    /// attempt.
    pub newton_iters: usize,
    /// Step-doubling estimate `max|u_small - u_big|` of the accepted step.
    pub error_estimate: f64,
}

/// Collects solution snapshots at requested times.
///
/// The controller lands on each requested time exactly (clamping `dt`), so
/// snapshot times are reproducible and exactly log-spaced when generated by
/// [`SnapshotSink::log_spaced`].
#[derive(Clone, Debug, Default)]
pub struct SnapshotSink {
    times: Vec<f64>,
    next: usize,
    pub taken: Vec<RadialState>,
}

impl SnapshotSink {
    /// No snapshots.
    pub fn none() -> Self {
        Self::default()
    }

    /// Snapshots at the given times (sorted, deduplicated).
    pub fn at_times(times: &[f64]) -> Self {
        let mut ts: Vec<f64> = times.iter().copied().filter(|t| t.is_finite()).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        Self {
            times: ts,
            next: 0,
            taken: Vec::new(),
        }
    }

    /// `per_decade` log-spaced times `10^{j/per_decade}` covering
    /// `(t_from, t_to]`.
    pub fn log_spaced(t_from: f64, t_to: f64, per_decade: usize) -> Self {
        Self::at_times(&log_times(t_from, t_to, per_decade))
    }

    fn pending(&self) -> Option<f64> {
        self.times.get(self.next).copied()
    }
}

/// The log-spaced grid `10^{j/per_decade}` restricted to `(t_from, t_to]`.
fn log_times(t_from: f64, t_to: f64, per_decade: usize) -> Vec<f64> {
    assert!(per_decade > 0 && t_to > 0.0);
    let lo = t_from.max(1e-300);
    let p = per_decade as f64;
    let mut j = (p * lo.log10()).floor() as i64;
    // Find the first strictly greater grid point (float-safe).
    while tenpow(j, p) <= lo {
        j += 1;
    }
    let mut out = Vec::new();
    while tenpow(j, p) <= t_to {
        out.push(tenpow(j, p));
        j += 1;
    }
    out
}

fn tenpow(j: i64, per_decade: f64) -> f64 {
    10f64.powf(j as f64 / per_decade)
}

/// Flux-form conserved mass `sum_i vol_i u_i` (compensated). This is the
/// functional the conservative scheme preserves exactly by telescoping; the
/// diagnostics module's `mass` is the trapezoidal quadrature of the same
/// integral and differs by a boundary-weight term.
pub fn fv_mass(grid: &RadialGrid, state: &RadialState) -> f64 {
    dd::dot(&grid.volumes, &state.values)
}

/// Chemical potential `mu_i = -eps^2 L_h(u)_i + f'(u_i)` on the grid, with
/// the symmetric origin closure and the mirror ghost node at `r = 1`.
pub fn chemical_potential(state: &RadialState, params: &ModelParams, grid: &RadialGrid) -> Vec<f64> {
    let mut mu = vec![0.0; grid.num_nodes()];
    chemical_potential_into(&state.values, params, grid, &mut mu);
    mu
}

fn chemical_potential_into(u: &[f64], params: &ModelParams, grid: &RadialGrid, mu: &mut [f64]) {
    let n = grid.num_cells;
    let dr = grid.spacing;
    let e2 = params.epsilon * params.epsilon;
    let r = &grid.nodes;
    let rh = &grid.interfaces;
    let dr2 = dr * dr;

    mu[0] = -e2 * 4.0 * (u[1] - u[0]) / dr2 + free_energy_terms(u[0]).1;
    for i in 1..n {
        let lap = (rh[i] * (u[i + 1] - u[i]) - rh[i - 1] * (u[i] - u[i - 1])) / (r[i] * dr2);
        mu[i] = -e2 * lap + free_energy_terms(u[i]).1;
    }
    mu[n] = -e2 * 2.0 * (u[n - 1] - u[n]) / dr2 + free_energy_terms(u[n]).1;
}

/// The discrete radial Laplacian `L_h(u)` used inside the chemical
/// potential, exposed for convergence tests.
pub fn radial_laplacian(u: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let n = grid.num_cells;
    let dr = grid.spacing;
    let dr2 = dr * dr;
    let r = &grid.nodes;
    let rh = &grid.interfaces;
    let mut lap = vec![0.0; n + 1];
    lap[0] = 4.0 * (u[1] - u[0]) / dr2;
    for i in 1..n {
        lap[i] = (rh[i] * (u[i + 1] - u[i]) - rh[i - 1] * (u[i] - u[i - 1])) / (r[i] * dr2);
    }
    lap[n] = 2.0 * (u[n - 1] - u[n]) / dr2;
    lap
}

/// Scan for the first node violating the touchdown criterion, with parabolic
/// sub-grid refinement of the extremum location.
pub fn detect_touchdown(
    state: &RadialState,
    grid: &RadialGrid,
    touchdown_tol: f64,
) -> Option<TouchdownEvent> {
    let n = grid.num_cells;
    let u = &state.values;
    for i in 0..=n {
        let v = 1.0 - u[i];
        if v <= touchdown_tol {
            let kind = if v < 0.0 {
                TouchdownKind::CrossedOne
            } else {
                TouchdownKind::ReachedThreshold
            };
            let radius = if i == 0 || i == n {
                grid.nodes[i]
            } else {
                // Vertex of the parabola through the node and neighbors,
                // clamped to the cell (degenerate data can push it out).
                let (vm, v0, vp) = (1.0 - u[i - 1], v, 1.0 - u[i + 1]);
                let denom = vm - 2.0 * v0 + vp;
                let mut off = if denom != 0.0 {
                    0.5 * grid.spacing * (vm - vp) / denom
                } else {
                    0.0
                };
                off = off.clamp(-0.5 * grid.spacing, 0.5 * grid.spacing);
                grid.nodes[i] + off
            };
            return Some(TouchdownEvent {
                time: state.time,
                radius,
                kind,
            });
        }
    }
    None
}

/// One implicit Euler step `u_new = u_old + dt (1/vol) D(G(u_new))`, solved
/// by damped Newton from the old state; strict convergence (no stall
/// acceptance). The conserved-mass defect of the accepted solution is
/// removed before returning.
pub fn implicit_euler_step(
    state: &RadialState,
    dt: f64,
    params: &ModelParams,
    grid: &RadialGrid,
    config: &SolverConfig,
) -> Result<RadialState, SolverError> {
    assert!(dt > 0.0, "dt must be positive");
    let mut stepper = Stepper::new(params, grid, config);
    let uo = &state.values;
    match stepper.newton(uo, dt, uo, 0.0) {
        Some((mut u, _iters)) => {
            restore_mass(&grid.volumes, stepper.volsum, &mut u, uo);
            Ok(RadialState::new(state.time + dt, u))
        }
        None => Err(SolverError::NewtonDivergence {
            t: state.time,
            dt,
        }),
    }
}

/// Advance `state` to `t_end` with adaptive step doubling, appending
/// diagnostics rows at log-spaced output times and capturing any requested
/// snapshots. Halts early with a [`TouchdownEvent`] when configured to.
pub fn adaptive_advance(
    state: &RadialState,
    t_end: f64,
    params: &ModelParams,
    grid: &RadialGrid,
    config: &SolverConfig,
    sink: &mut DiagnosticsSeries,
    snapshots: &mut SnapshotSink,
) -> Result<(RadialState, Option<TouchdownEvent>), SolverError> {
    assert!(t_end > state.time, "t_end must exceed the state time");
    config.validate().expect("invalid solver config");

    if let Some(ev) = detect_touchdown(state, grid, config.touchdown_tol) {
        if config.halt_on_touchdown {
            return Ok((state.clone(), Some(ev)));
        }
    }

    let mut stepper = Stepper::new(params, grid, config);
    let mut current = state.clone();
    // No output can precede the first step; floor the grid at dt_init.
    let out_times = log_times(
        state.time.max(config.dt_init),
        t_end,
        config.outputs_per_decade,
    );
    let mut next_out = 0usize;
    let mut dt = config.dt_init;
    let mut prev: Option<(Vec<f64>, f64)> = None; // (u_prev, dt_prev) for predictors

    while current.time < t_end {
        // Land exactly on the next output / snapshot time or the horizon.
        let mut target = t_end;
        if let Some(&tout) = out_times.get(next_out) {
            target = target.min(tout);
        }
        if let Some(tsnap) = snapshots.pending() {
            target = target.min(tsnap);
        }
        let dtc = dt.min(target - current.time);

        let attempt = stepper.try_double_step(&current.values, dtc, prev.as_ref())?;
        match attempt {
            Attempt::Rejected { dt_next } => {
                dt = dt_next;
                if dt < config.dt_min {
                    return Err(SolverError::StepSizeUnderflow {
                        t: current.time,
                        dt,
                    });
                }
            }
            Attempt::Accepted {
                u_new,
                newton_iters: _,
                error_estimate: _,
                dt_next,
            } => {
                prev = Some((std::mem::take(&mut current.values), dtc));
                let landed = dtc >= target - current.time;
                current.time = if landed { target } else { current.time + dtc };
                current.values = u_new;
                dt = dt_next;

                if out_times.get(next_out) == Some(&current.time) {
                    sink.append(diag_row(&current, params, grid));
                    next_out += 1;
                }
                if snapshots.pending() == Some(current.time) {
                    snapshots.taken.push(current.clone());
                    snapshots.next += 1;
                }
                if let Some(ev) = detect_touchdown(&current, grid, config.touchdown_tol) {
                    if config.halt_on_touchdown {
                        return Ok((current, Some(ev)));
                    }
                }
            }
        }
    }
    Ok((current, None))
}

/// Perform exactly one *accepted* adaptive step (internally retrying with
/// smaller `dt` on rejection) and report the step-doubling bookkeeping.
pub fn adaptive_step(
    state: &RadialState,
    dt_start: f64,
    params: &ModelParams,
    grid: &RadialGrid,
    config: &SolverConfig,
) -> Result<StepOutcome, SolverError> {
    let mut stepper = Stepper::new(params, grid, config);
    let mut dt = dt_start;
    loop {
        match stepper.try_double_step(&state.values, dt, None)? {
            Attempt::Rejected { dt_next } => {
                dt = dt_next;
                if dt < config.dt_min {
                    return Err(SolverError::StepSizeUnderflow {
                        t: state.time,
                        dt,
                    });
                }
            }
            Attempt::Accepted {
                u_new,
                newton_iters,
                error_estimate,
                dt_next,
            } => {
                return Ok(StepOutcome {
                    state: RadialState::new(state.time + dt, u_new),
                    dt_used: dt,
                    dt_next,
                    newton_iters,
                    error_estimate,
                });
            }
        }
    }
}

fn diag_row(state: &RadialState, params: &ModelParams, grid: &RadialGrid) -> DiagRow {
    let extrema = diagnostics::track_extrema(state, grid).ok();
    DiagRow {
        t: state.time,
        mass: diagnostics::mass(state, grid),
        energy: diagnostics::energy(state, params, grid),
        dissipation: diagnostics::dissipation(state, params, grid),
        v0: 1.0 - state.values[0],
        rbar: extrema.as_ref().map_or(f64::NAN, |e| e.rbar),
        vmin: extrema.as_ref().map_or(f64::NAN, |e| e.vmin),
        d2v: extrema.as_ref().map_or(f64::NAN, |e| e.d2v),
    }
}

/// Remove the conserved-mass defect `sum vol (u - uo)` by a uniform shift.
fn restore_mass(volumes: &[f64], volsum: f64, u: &mut [f64], uo: &[f64]) {
    let mut acc = DdAcc::new();
    for i in 0..u.len() {
        acc.add_prod(volumes[i], u[i] - uo[i]);
    }
    let shift = acc.value() / volsum;
    for ui in u.iter_mut() {
        *ui -= shift;
    }
}

enum Attempt {
    Accepted {
        u_new: Vec<f64>,
        newton_iters: usize,
        error_estimate: f64,
        dt_next: f64,
    },
    Rejected {
        dt_next: f64,
    },
}

/// Workspaces plus the Newton/step-doubling kernels.
struct Stepper<'a> {
    params: &'a ModelParams,
    grid: &'a RadialGrid,
    config: &'a SolverConfig,
    volsum: f64,
    mu: Vec<f64>,
    // Tridiagonal d(mu)/d(u): sub[m] = dmu_m/du_{m-1}, etc.
    dmu_sub: Vec<f64>,
    dmu_diag: Vec<f64>,
    dmu_sup: Vec<f64>,
    flux: Vec<f64>,
    jac: BandMatrix,
}

impl<'a> Stepper<'a> {
    fn new(params: &'a ModelParams, grid: &'a RadialGrid, config: &'a SolverConfig) -> Self {
        let nn = grid.num_nodes();
        Self {
            params,
            grid,
            config,
            volsum: dd::sum(&grid.volumes),
            mu: vec![0.0; nn],
            dmu_sub: vec![0.0; nn],
            dmu_diag: vec![0.0; nn],
            dmu_sup: vec![0.0; nn],
            flux: vec![0.0; nn - 1],
            jac: BandMatrix::zeros(nn, 2, 2),
        }
    }

    /// Interface fluxes `G_k` from the current `mu` buffer.
    fn fluxes_from_mu(&mut self, u: &[f64]) {
        let n = self.grid.num_cells;
        let dr = self.grid.spacing;
        for k in 0..n {
            let m = self.params.mobility_and_deriv(0.5 * (u[k] + u[k + 1])).0;
            self.flux[k] = self.grid.interfaces[k] * m * (self.mu[k + 1] - self.mu[k]) / dr;
        }
    }

    /// Residual `F_i = u_i - uo_i - dt (G_i - G_{i-1})/vol_i`.
    fn residual_into(&mut self, u: &[f64], uo: &[f64], dt: f64, out: &mut [f64]) {
        chemical_potential_into(u, self.params, self.grid, &mut self.mu);
        self.fluxes_from_mu(u);
        let n = self.grid.num_cells;
        let vol = &self.grid.volumes;
        out[0] = u[0] - uo[0] - dt * self.flux[0] / vol[0];
        for i in 1..n {
            out[i] = u[i] - uo[i] - dt * (self.flux[i] - self.flux[i - 1]) / vol[i];
        }
        out[n] = u[n] - uo[n] - dt * (-self.flux[n - 1]) / vol[n];
    }

    /// Analytic pentadiagonal Jacobian `dF/du` for the current `mu` buffer
    /// (i.e. call after `residual_into` on the same `u`).
    fn jacobian_into(&mut self, u: &[f64], dt: f64) {
        let n = self.grid.num_cells;
        let dr = self.grid.spacing;
        let dr2 = dr * dr;
        let e2 = self.params.epsilon * self.params.epsilon;
        let r = &self.grid.nodes;
        let rh = &self.grid.interfaces;

        // d(mu)/d(u) tridiagonal, boundary closures included.
        self.dmu_diag[0] = 4.0 * e2 / dr2 + free_energy_second(u[0]);
        self.dmu_sup[0] = -4.0 * e2 / dr2;
        for i in 1..n {
            let w = e2 / (r[i] * dr2);
            self.dmu_sub[i] = -w * rh[i - 1];
            self.dmu_diag[i] = w * (rh[i] + rh[i - 1]) + free_energy_second(u[i]);
            self.dmu_sup[i] = -w * rh[i];
        }
        self.dmu_sub[n] = -2.0 * e2 / dr2;
        self.dmu_diag[n] = 2.0 * e2 / dr2 + free_energy_second(u[n]);

        self.jac.clear();
        for i in 0..=n {
            self.jac.set(i, i, 1.0);
        }
        let vol = &self.grid.volumes;
        for k in 0..n {
            let (m, mprime) = self.params.mobility_and_deriv(0.5 * (u[k] + u[k + 1]));
            let base = rh[k] / dr;
            let dmu_gap = self.mu[k + 1] - self.mu[k];
            // dG_k/du_j for j = k-1 .. k+2.
            let mob_term = 0.5 * mprime * dmu_gap * base;
            let dg = [
                if k > 0 { -m * base * self.dmu_sub[k] } else { 0.0 },
                mob_term + m * base * (self.dmu_sub[k + 1] - self.dmu_diag[k]),
                mob_term + m * base * (self.dmu_diag[k + 1] - self.dmu_sup[k]),
                if k + 2 <= n {
                    m * base * self.dmu_sup[k + 1]
                } else {
                    0.0
                },
            ];
            let ck = dt / vol[k];
            let ck1 = dt / vol[k + 1];
            for (o, &g) in dg.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let j = (k + o).wrapping_sub(1);
                // F_k carries -dt/vol_k * G_k; F_{k+1} carries +dt/vol_{k+1} * G_k.
                self.jac.add(k, j, -ck * g);
                self.jac.add(k + 1, j, ck1 * g);
            }
        }
    }

    /// Damped Newton with refined banded solves. Returns the solution and
    /// iteration count, or `None` on failure. `stall` is the correction
    /// norm below which a stagnating iterate is accepted as converged
    /// (0 disables stall acceptance).
    fn newton(&mut self, uo: &[f64], dt: f64, pred: &[f64], stall: f64) -> Option<(Vec<f64>, usize)> {
        let nn = uo.len();
        let mut u = pred.to_vec();
        let mut f = vec![0.0; nn];
        let mut fbar = vec![0.0; nn];
        let tol = self.config.newton_tol;
        let maxit = self.config.newton_max_iter;

        let mut nd = f64::INFINITY;
        for it in 1..=maxit {
            self.residual_into(&u, uo, dt, &mut f);
            if !f.iter().all(|x| x.is_finite()) {
                return None;
            }
            self.jacobian_into(&u, dt);
            let lu = match self.jac.factor() {
                Ok(lu) => lu,
                Err(_) => return None,
            };
            let d = lu.solve_refined(&f);
            nd = max_abs(&d);
            if !nd.is_finite() {
                return None;
            }
            if nd < tol {
                for (ui, di) in u.iter_mut().zip(&d) {
                    *ui -= di;
                }
                return Some((u, it));
            }
            // Affine-covariant line search: accept u - lambda*d when the
            // simplified correction shrinks by the Armijo-like factor.
            let mut lambda = 1.0f64;
            let mut accepted = false;
            for _ in 0..=8 {
                let utrial: Vec<f64> = u
                    .iter()
                    .zip(&d)
                    .map(|(ui, di)| ui - lambda * di)
                    .collect();
                self.residual_into(&utrial, uo, dt, &mut fbar);
                if fbar.iter().all(|x| x.is_finite()) {
                    let dbar = lu.solve_refined(&fbar);
                    let ndbar = max_abs(&dbar);
                    if ndbar.is_finite() && (ndbar <= (1.0 - 0.5 * lambda) * nd || ndbar < tol) {
                        u = utrial;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                // Stagnation at the rounding floor of the outer tolerance
                // is convergence, not failure.
                if nd <= stall {
                    return Some((u, it));
                }
                return None;
            }
        }
        if nd <= stall {
            return Some((u, maxit));
        }
        None
    }

    /// One step-doubling attempt at step `dtc`: a full step and two half
    /// steps, error estimate from their difference. `prev` carries the
    /// previous accepted state and its step for the extrapolation
    /// predictors.
    fn try_double_step(
        &mut self,
        uo: &[f64],
        dtc: f64,
        prev: Option<&(Vec<f64>, f64)>,
    ) -> Result<Attempt, SolverError> {
        let cfg = self.config;
        let scale = 1.0f64.max(max_abs(uo));
        let tol = cfg.time_tol * scale;
        let stall = 0.1 * tol;
        let vol = &self.grid.volumes;

        // Extrapolation predictors from the previous accepted step.
        let (pred_big, pred_half): (Vec<f64>, Vec<f64>) = match prev {
            Some((uprev, dtprev)) if *dtprev > 0.0 => {
                let w_big = dtc / dtprev;
                let w_half = 0.5 * dtc / dtprev;
                let pb = uo
                    .iter()
                    .zip(uprev)
                    .map(|(c, p)| c + w_big * (c - p))
                    .collect();
                let ph = uo
                    .iter()
                    .zip(uprev)
                    .map(|(c, p)| c + w_half * (c - p))
                    .collect();
                (pb, ph)
            }
            _ => (uo.to_vec(), uo.to_vec()),
        };

        let reject_half = |_t: ()| Attempt::Rejected { dt_next: dtc * 0.5 };

        let Some((mut u_big, it_big)) = self.newton(uo, dtc, &pred_big, stall) else {
            return Ok(reject_half(()));
        };
        restore_mass(vol, self.volsum, &mut u_big, uo);

        let Some((mut u_h1, it_h1)) = self.newton(uo, 0.5 * dtc, &pred_half, stall) else {
            return Ok(reject_half(()));
        };
        restore_mass(vol, self.volsum, &mut u_h1, uo);

        // Second half: extrapolate through the first half step.
        let pred2: Vec<f64> = u_h1.iter().zip(uo).map(|(h, o)| 2.0 * h - o).collect();
        let Some((mut u_small, it_h2)) = self.newton(&u_h1, 0.5 * dtc, &pred2, stall) else {
            return Ok(reject_half(()));
        };
        restore_mass(vol, self.volsum, &mut u_small, &u_h1);

        let e = u_small
            .iter()
            .zip(&u_big)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

        if e < tol {
            let growth = if e > 0.0 {
                cfg.dt_max_growth.min(0.9 * (tol / e).sqrt())
            } else {
                cfg.dt_max_growth
            };
            Ok(Attempt::Accepted {
                u_new: u_small,
                newton_iters: it_big + it_h1 + it_h2,
                error_estimate: e,
                dt_next: dtc * growth.max(0.1),
            })
        } else {
            let shrink = (0.9 * (tol / e).sqrt()).clamp(0.1, 0.5);
            Ok(Attempt::Rejected {
                dt_next: dtc * shrink,
            })
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{initial_profile, MobilityVariant, DEFAULT_AMPLITUDE, DEFAULT_CENTER};
    use proptest::prelude::*;

    fn params_n(n: f64) -> ModelParams {
        ModelParams::new(0.1, n, MobilityVariant::Plain)
    }

    #[test]
    fn laplacian_exact_on_quadratic_away_from_outer_wall() {
        // (1/r)(r (r^2)')' = 4; the origin closure is exact for quadratics,
        // the r = 1 closure encodes u_r = 0 which r^2 violates, so skip it.
        let g = RadialGrid::new(50);
        let u: Vec<f64> = g.nodes.iter().map(|&r| r * r).collect();
        let lap = radial_laplacian(&u, &g);
        for i in 0..50 {
            assert!((lap[i] - 4.0).abs() < 1e-10, "node {i}: {v}", v = lap[i]);
        }
    }

    #[test]
    fn chemical_potential_of_quadratic_at_origin() {
        let g = RadialGrid::new(100);
        let a = 0.7;
        let u: Vec<f64> = g.nodes.iter().map(|&r| a * r * r).collect();
        let p = params_n(4.0);
        let mu = chemical_potential(&RadialState::new(0.0, u), &p, &g);
        // mu_0 = -4 a eps^2 + f'(0), and f'(0) = 0.
        assert!((mu[0] - (-4.0 * a * p.epsilon * p.epsilon)).abs() < 1e-10);
    }

    #[test]
    fn chemical_potential_of_constant_is_f_prime() {
        let g = RadialGrid::new(64);
        let c = 0.37;
        let p = params_n(4.0);
        let mu = chemical_potential(&RadialState::new(0.0, vec![c; 65]), &p, &g);
        let fp = free_energy_terms(c).1;
        for &m in &mu {
            assert_eq!(m, fp);
        }
    }

    #[test]
    fn laplacian_second_order_convergence_on_smooth_profile() {
        // u = cos(pi r) has u_r = 0 at both ends, compatible with the
        // closures; discrete Laplacian error must shrink ~4x per halving.
        let analytic = |r: f64| {
            if r == 0.0 {
                -2.0 * std::f64::consts::PI.powi(2)
            } else {
                let pi = std::f64::consts::PI;
                -pi * pi * (pi * r).cos() - pi * (pi * r).sin() / r
            }
        };
        let err = |n: usize| {
            let g = RadialGrid::new(n);
            let u: Vec<f64> = g.nodes.iter().map(|&r| (std::f64::consts::PI * r).cos()).collect();
            let lap = radial_laplacian(&u, &g);
            g.nodes
                .iter()
                .zip(&lap)
                .map(|(&r, &l)| (l - analytic(r)).abs())
                .fold(0.0f64, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "convergence ratio {ratio}");
    }

    #[test]
    fn constant_states_are_stationary() {
        let g = RadialGrid::new(32);
        let p = params_n(4.0);
        let cfg = SolverConfig::default();
        let s = RadialState::new(0.0, vec![0.3; 33]);
        let s1 = implicit_euler_step(&s, 1.0, &p, &g, &cfg).unwrap();
        assert_eq!(s1.values, s.values);
        assert_eq!(s1.time, 1.0);
    }

    #[test]
    fn single_step_conserves_fv_mass() {
        let g = RadialGrid::new(200);
        let p = params_n(4.0);
        let cfg = SolverConfig::default();
        let s = initial_profile(&g, 0.1, DEFAULT_AMPLITUDE, DEFAULT_CENTER, false);
        let m0 = fv_mass(&g, &s);
        let s1 = implicit_euler_step(&s, 1e-9, &p, &g, &cfg).unwrap();
        let m1 = fv_mass(&g, &s1);
        assert!(
            ((m1 - m0) / m0).abs() < 1e-13,
            "mass drift {d}",
            d = (m1 - m0) / m0
        );
    }

    #[test]
    fn newton_divergence_reported_for_absurd_step() {
        let g = RadialGrid::new(64);
        let p = params_n(4.0);
        let mut cfg = SolverConfig::default();
        cfg.newton_max_iter = 3;
        let s = initial_profile(&g, 0.1, DEFAULT_AMPLITUDE, DEFAULT_CENTER, false);
        // A gigantic first step from cold data cannot converge in 3 iterations.
        let r = implicit_euler_step(&s, 1e6, &p, &g, &cfg);
        assert!(matches!(r, Err(SolverError::NewtonDivergence { .. })));
    }

    #[test]
    fn detect_touchdown_cases() {
        let g = RadialGrid::new(10);
        let tol = 1e-12;
        // v = 0.1 everywhere: no event.
        let s = RadialState::new(1.0, vec![0.9; 11]);
        assert_eq!(detect_touchdown(&s, &g, tol), None);
        // Exact zero of v at an interior node: event there.
        let mut u = vec![0.5; 11];
        u[4] = 1.0;
        let s = RadialState::new(2.0, u);
        let ev = detect_touchdown(&s, &g, tol).unwrap();
        assert_eq!(ev.kind, TouchdownKind::ReachedThreshold);
        assert_eq!(ev.time, 2.0);
        assert!((ev.radius - g.nodes[4]).abs() <= 0.5 * g.spacing);
        // u beyond 1: crossing.
        let mut u = vec![0.5; 11];
        u[7] = 1.01;
        let ev = detect_touchdown(&RadialState::new(3.0, u), &g, tol).unwrap();
        assert_eq!(ev.kind, TouchdownKind::CrossedOne);
    }

    #[test]
    fn log_times_cover_range_exclusively() {
        let ts = log_times(1e-3, 1.0, 4);
        assert_eq!(ts.len(), 12);
        assert!(ts[0] > 1e-3);
        assert_eq!(*ts.last().unwrap(), 1.0);
        for w in ts.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    /// Explicit RK4 on the same semi-discrete system, used as an
    /// independent oracle for the implicit path.
    fn rk4_oracle(
        s0: &RadialState,
        t_end: f64,
        dt: f64,
        params: &ModelParams,
        grid: &RadialGrid,
    ) -> RadialState {
        let cfg = SolverConfig::default();
        let mut stepper = Stepper::new(params, grid, &cfg);
        let nn = grid.num_nodes();
        let rate = |st: &mut Stepper, u: &[f64], out: &mut [f64]| {
            // du/dt = (G_i - G_{i-1})/vol_i, reusing the stepper's residual
            // with uo = u, dt = -1 so F = rate.
            st.residual_into(u, u, -1.0, out);
        };
        let mut u = s0.values.clone();
        let mut t = 0.0;
        let (mut k1, mut k2, mut k3, mut k4) = (
            vec![0.0; nn],
            vec![0.0; nn],
            vec![0.0; nn],
            vec![0.0; nn],
        );
        let mut tmp = vec![0.0; nn];
        while t < t_end - 0.5 * dt {
            rate(&mut stepper, &u, &mut k1);
            for i in 0..nn {
                tmp[i] = u[i] + 0.5 * dt * k1[i];
            }
            rate(&mut stepper, &tmp, &mut k2);
            for i in 0..nn {
                tmp[i] = u[i] + 0.5 * dt * k2[i];
            }
            rate(&mut stepper, &tmp, &mut k3);
            for i in 0..nn {
                tmp[i] = u[i] + dt * k3[i];
            }
            rate(&mut stepper, &tmp, &mut k4);
            for i in 0..nn {
                u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += dt;
        }
        RadialState::new(t, u)
    }

    #[test]
    fn implicit_path_matches_explicit_rk4_oracle() {
        // n=4 short horizon: implicit Euler at dt=1e-8 vs RK4 at the same
        // forced step size on the identical semi-discrete system.
        let g = RadialGrid::new(100);
        let p = params_n(4.0);
        let cfg = SolverConfig::default();
        let s0 = initial_profile(&g, 0.1, DEFAULT_AMPLITUDE, DEFAULT_CENTER, false);
        let t_end = 1e-4;
        let dt = 1e-8;
        let oracle = rk4_oracle(&s0, t_end, dt, &p, &g);

        let mut s = s0;
        let steps = (t_end / dt).round() as usize;
        for _ in 0..steps {
            s = implicit_euler_step(&s, dt, &p, &g, &cfg).unwrap();
        }
        let diff = s
            .values
            .iter()
            .zip(&oracle.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-6, "implicit vs RK4 max-norm {diff}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// The analytic banded Jacobian matches a centered finite
        /// difference of the residual along random directions.
        #[test]
        fn prop_jacobian_matches_directional_fd(
            seed in 0u64..1_000_000,
            n_exp in prop::sample::select(vec![1.0f64, 3.0, 4.0]),
            variant in prop::sample::select(vec![
                MobilityVariant::Plain,
                MobilityVariant::Truncated,
                MobilityVariant::Absolute,
            ]),
            dt in 1e-9f64..1e-3,
        ) {
            let g = RadialGrid::new(16);
            let p = ModelParams::new(0.1, n_exp, variant);
            let cfg = SolverConfig::default();
            let nn = g.num_nodes();
            // Deterministic pseudo-random smooth-ish state and direction.
            let mut x = seed as f64 / 1e6 + 0.123;
            let mut rnd = || {
                x = (x * 997.0 + 0.456).fract();
                x - 0.5
            };
            let u: Vec<f64> = (0..nn).map(|_| 0.9 * rnd()).collect();
            let uo = u.clone();
            let e: Vec<f64> = (0..nn).map(|_| rnd()).collect();

            let mut st = Stepper::new(&p, &g, &cfg);
            let mut f = vec![0.0; nn];
            st.residual_into(&u, &uo, dt, &mut f);
            st.jacobian_into(&u, dt);
            let je = st.jac.matvec(&e);

            let h = 1e-6;
            let up: Vec<f64> = u.iter().zip(&e).map(|(a, b)| a + h * b).collect();
            let um: Vec<f64> = u.iter().zip(&e).map(|(a, b)| a - h * b).collect();
            let mut fp = vec![0.0; nn];
            let mut fm = vec![0.0; nn];
            st.residual_into(&up, &uo, dt, &mut fp);
            st.residual_into(&um, &uo, dt, &mut fm);

            let scale = je.iter().fold(1.0f64, |m, &v| m.max(v.abs()));
            for i in 0..nn {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                prop_assert!(
                    (fd - je[i]).abs() < 2e-4 * scale,
                    "row {}: fd {} vs J·e {} (scale {})", i, fd, je[i], scale
                );
            }
        }

        /// Uniform states stay exactly uniform under single steps for any
        /// admissible dt and mobility exponent.
        #[test]
        fn prop_uniform_states_stationary(
            c in -0.99f64..0.99,
            dt in 1e-10f64..1.0,
            n_exp in prop::sample::select(vec![0.0f64, 1.0, 4.0]),
        ) {
            let g = RadialGrid::new(24);
            let p = params_n(n_exp);
            let cfg = SolverConfig::default();
            let s = RadialState::new(0.0, vec![c; 25]);
            let s1 = implicit_euler_step(&s, dt, &p, &g, &cfg).unwrap();
            prop_assert_eq!(s1.values, s.values);
        }
    }
}
