//! The annular free-boundary equilibrium: the stationary profile `U(r)` on
//! `(r*, 1]` that touches `U = 1` tangentially at the free boundary `r*`,
//! plus the smooth stationary solution of the full problem on `[0, 1]`.
//!
//! The annular problem is the constrained ODE system
//!
//! ```text
//! eps^2 (U'' + U'/r) = f'(U) - mu0,   U(r*) = 1, U'(r*) = 0, U'(1) = 0,
//! ```
//!
//! with the constant chemical potential `mu0` as an unknown and the free
//! boundary `r*` fixed by the mass constraint
//! `int_{r*}^1 U r dr = m0 - r*^2/2` (the inner disc sits at `u = 1`).
//! For each trial `r*` the first-order system in `y = (U, W, S, mu0)` with
//! `S' = U r` is solved by collocation; a safeguarded secant iteration on
//! `r*` drives the mass mismatch `S(1) - (m0 - r*^2/2)` to zero. Near `r*`
//! the profile departs quadratically, `1 - U ~ b2 (r - r*)^2` with
//! `b2 = mu0 / (2 eps^2)`, which is the outer anchor the composite
//! expansion matches onto.

use thiserror::Error;

use crate::bvp::{self, BvpSystem};

#[derive(Debug, Error, PartialEq)]
pub enum AnnularError {
    /// The mass constraint admits only the flat `U = 1` branch (its mass
    /// over the unit disc is exactly 1/2 for every `r*`).
    #[error("mass constraint only supports the trivial branch U = 1")]
    TrivialBranch,
    /// Secant bracketing or the collocation Newton failed.
    #[error("annular solve failed to converge: {reason}")]
    NoConvergence { reason: String },
}

/// Converged annular equilibrium.
#[derive(Clone, Debug)]
pub struct AnnularSolution {
    pub epsilon: f64,
    pub m0: f64,
    /// Free boundary radius.
    pub r_star: f64,
    /// Constant chemical potential of the branch.
    pub mu0: f64,
    /// Collocation mesh on `[r_star, 1]`.
    pub r: Vec<f64>,
    /// Profile `U` on the mesh.
    pub u_star: Vec<f64>,
    /// Derivative `W = U'` on the mesh.
    pub w: Vec<f64>,
    /// Cumulative mass `S(r) = int_{r*}^r U s ds` on the mesh.
    pub s: Vec<f64>,
}

impl AnnularSolution {
    /// Quadratic departure coefficient `b2 = mu0/(2 eps^2)` of
    /// `1 - U ~ b2 (r - r*)^2` at the free boundary.
    pub fn taylor_coefficient_b2(&self) -> f64 {
        self.mu0 / (2.0 * self.epsilon * self.epsilon)
    }

    /// Cubic Hermite evaluation of `U` at radius `r` (clamped to the
    /// domain), using the stored derivative values.
    pub fn u_star_at(&self, r: f64) -> f64 {
        let r = r.clamp(self.r_star, 1.0);
        // Uniform mesh: locate the interval directly.
        let m = self.r.len() - 1;
        let h = (1.0 - self.r_star) / m as f64;
        let i = (((r - self.r_star) / h) as usize).min(m - 1);
        let (ra, rb) = (self.r[i], self.r[i + 1]);
        let t = (r - ra) / (rb - ra);
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t),
            t * (1.0 - t) * (1.0 - t),
            t * t * (3.0 - 2.0 * t),
            t * t * (t - 1.0),
        );
        h00 * self.u_star[i]
            + h10 * (rb - ra) * self.w[i]
            + h01 * self.u_star[i + 1]
            + h11 * (rb - ra) * self.w[i + 1]
    }
}

/// Default number of collocation intervals.
pub const DEFAULT_INTERVALS: usize = 4000;

/// First-order annular system in `y = (U, W, S, mu0)` on `[r*, 1]`.
struct AnnularSystem {
    epsilon2: f64,
}

impl BvpSystem for AnnularSystem {
    fn dim(&self) -> usize {
        4
    }
    fn num_left_bcs(&self) -> usize {
        3
    }
    fn rhs(&self, x: f64, y: &[f64], out: &mut [f64]) {
        let (u, w, mu) = (y[0], y[1], y[3]);
        out[0] = w;
        out[1] = (2.0 * u * (u * u - 1.0) - mu) / self.epsilon2 - w / x;
        out[2] = u * x;
        out[3] = 0.0;
    }
    fn rhs_jac(&self, x: f64, y: &[f64], out: &mut [f64]) {
        let u = y[0];
        out.fill(0.0);
        out[1] = 1.0; // dU'/dW
        out[4] = (6.0 * u * u - 2.0) / self.epsilon2; // dW'/dU
        out[5] = -1.0 / x; // dW'/dW
        out[7] = -1.0 / self.epsilon2; // dW'/dmu0
        out[8] = x; // dS'/dU
    }
    fn bc_left(&self, ya: &[f64], out: &mut [f64]) {
        out[0] = ya[0] - 1.0;
        out[1] = ya[1];
        out[2] = ya[2];
    }
    fn bc_left_jac(&self, _ya: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[0] = 1.0;
        out[5] = 1.0;
        out[10] = 1.0;
    }
    fn bc_right(&self, yb: &[f64], out: &mut [f64]) {
        out[0] = yb[1];
    }
    fn bc_right_jac(&self, _yb: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[1] = 1.0;
    }
}

/// Solve the annular BVP for a fixed free boundary. Returns the converged
/// node-major state (for warm starts) and the full solution fields.
fn solve_fixed_rstar(
    epsilon: f64,
    r_star: f64,
    intervals: usize,
    tol: f64,
    warm: Option<&[f64]>,
) -> Result<bvp::BvpSolution, AnnularError> {
    let sys = AnnularSystem {
        epsilon2: epsilon * epsilon,
    };
    let mesh = bvp::uniform_mesh(r_star, 1.0, intervals);
    let y0: Vec<f64> = match warm {
        Some(w) => w.to_vec(),
        None => {
            // Interface guess: U relaxes from 1 at r* toward the outer
            // plateau near -1 over the interface width eps.
            let mut y = Vec::with_capacity(4 * mesh.len());
            let mut s_acc = 0.0f64;
            let mut prev: Option<(f64, f64)> = None;
            for &r in &mesh {
                let x = (r - r_star) / epsilon;
                let u = 1.0 - 1.96 * (0.5 * x).tanh();
                let w = -1.96 * 0.5 / epsilon / (0.5 * x).cosh().powi(2);
                if let Some((rp, up)) = prev {
                    s_acc += 0.5 * (u * r + up * rp) * (r - rp);
                }
                prev = Some((r, u));
                y.extend_from_slice(&[u, w, s_acc, 1.3 * epsilon]);
            }
            y
        }
    };
    bvp::solve_bvp(&sys, &mesh, &y0, tol, 40).map_err(|e| AnnularError::NoConvergence {
        reason: format!("BVP at r* = {r_star}: {e}"),
    })
}

/// Solve the annular free-boundary problem: secant on `r*` against the
/// mass mismatch, collocation in the inner loop.
pub fn solve_annular(epsilon: f64, m0: f64, tol: f64) -> Result<AnnularSolution, AnnularError> {
    solve_annular_with(epsilon, m0, tol, DEFAULT_INTERVALS)
}

/// As [`solve_annular`] with an explicit mesh resolution.
pub fn solve_annular_with(
    epsilon: f64,
    m0: f64,
    tol: f64,
    intervals: usize,
) -> Result<AnnularSolution, AnnularError> {
    assert!(epsilon > 0.0 && tol > 0.0 && intervals >= 16);
    assert!(
        m0 > -0.5 && m0 < 0.5 + 1e-6,
        "m0 must lie in the attainable range (-1/2, 1/2]"
    );
    // The flat branch U = 1 has mass exactly 1/2 for every r*; the mass
    // constraint then carries no information about the free boundary.
    if (m0 - 0.5).abs() < 1e-6 {
        return Err(AnnularError::TrivialBranch);
    }

    // Nontrivial anchor at a moderate free boundary (the BVP itself does
    // not depend on m0); later probes warm-start from it so Newton stays
    // on the nontrivial branch wherever it exists.
    let anchor = solve_fixed_rstar(epsilon, 0.25, intervals, tol, None)?;
    let mut warm: Option<Vec<f64>> = Some(anchor.y);

    // Mass mismatch at a trial free boundary. Where Newton lands on (or
    // only finds) the flat branch, its exact mass 1/2 supplies the
    // mismatch; `None` marks those probes as trivially resolved.
    let mismatch = |r_star: f64,
                    warm: &mut Option<Vec<f64>>|
     -> (f64, Option<bvp::BvpSolution>) {
        let attempt = solve_fixed_rstar(epsilon, r_star, intervals, tol, warm.as_deref())
            .or_else(|_| solve_fixed_rstar(epsilon, r_star, intervals, tol, None));
        match attempt {
            Ok(sol) => {
                let flat = sol
                    .component(0)
                    .iter()
                    .fold(0.0f64, |m, &u| m.max((u - 1.0).abs()));
                if flat < 1e-6 {
                    (0.5 - m0, None)
                } else {
                    *warm = Some(sol.y.clone());
                    let s1 = sol.node(sol.num_nodes() - 1)[2];
                    (s1 - (m0 - 0.5 * r_star * r_star), Some(sol))
                }
            }
            Err(_) => (0.5 - m0, None),
        }
    };

    let (mut lo, mut hi) = (0.05f64, 0.95f64);
    let (f_lo, _) = mismatch(lo, &mut warm);
    let (f_hi, _) = mismatch(hi, &mut warm);
    if f_lo.signum() == f_hi.signum() {
        return Err(AnnularError::NoConvergence {
            reason: format!(
                "no sign change of the mass mismatch on [{lo}, {hi}] ({f_lo:.3e}, {f_hi:.3e})"
            ),
        });
    }
    // Safeguarded secant on the bracket.
    let (mut a, mut fa) = (lo, f_lo);
    let (mut b, mut fb) = (hi, f_hi);
    let mut best: Option<(f64, Option<bvp::BvpSolution>)> = None;
    for _ in 0..80 {
        let mut c = b - fb * (b - a) / (fb - fa);
        if !(c > lo && c < hi) || !c.is_finite() {
            c = 0.5 * (lo + hi);
        }
        let (fc, sol) = mismatch(c, &mut warm);
        if fc.signum() == f_lo.signum() {
            lo = c;
        } else {
            hi = c;
        }
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        let done = fc.abs() < 1e-12 || (hi - lo) < 1e-13;
        best = Some((c, sol));
        if done {
            break;
        }
    }
    match best {
        Some((r_star, Some(sol))) if fb.abs() <= 1e-9 => Ok(AnnularSolution {
            epsilon,
            m0,
            r_star,
            mu0: sol.node(0)[3],
            r: sol.mesh.clone(),
            u_star: sol.component(0),
            w: sol.component(1),
            s: sol.component(2),
        }),
        Some((_, None)) => Err(AnnularError::TrivialBranch),
        _ => Err(AnnularError::NoConvergence {
            reason: format!("mass mismatch {fb:.3e} after secant"),
        }),
    }
}

/// Smooth stationary solution on the full disc `[0, 1]` with mass `m0`:
/// `y = (U, W, S, mu_c)` with `W(0) = 0`, `S(0) = 0`, `W(1) = 0`,
/// `S(1) = m0`. The `W/r` singularity at the origin is closed by the
/// symmetric limit `W'(0) = (f'(U) - mu_c)/(2 eps^2)`.
pub struct StationarySolution {
    pub epsilon: f64,
    pub m0: f64,
    /// Constant chemical potential.
    pub mu_c: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

struct StationarySystem {
    epsilon2: f64,
    m0_value: f64,
}

impl BvpSystem for StationarySystem {
    fn dim(&self) -> usize {
        4
    }
    fn num_left_bcs(&self) -> usize {
        2
    }
    fn rhs(&self, x: f64, y: &[f64], out: &mut [f64]) {
        let (u, w, mu) = (y[0], y[1], y[3]);
        let force = (2.0 * u * (u * u - 1.0) - mu) / self.epsilon2;
        out[0] = w;
        out[1] = if x == 0.0 { 0.5 * force } else { force - w / x };
        out[2] = u * x;
        out[3] = 0.0;
    }
    fn rhs_jac(&self, x: f64, y: &[f64], out: &mut [f64]) {
        let u = y[0];
        out.fill(0.0);
        out[1] = 1.0;
        let du = (6.0 * u * u - 2.0) / self.epsilon2;
        let dmu = -1.0 / self.epsilon2;
        if x == 0.0 {
            out[4] = 0.5 * du;
            out[7] = 0.5 * dmu;
        } else {
            out[4] = du;
            out[5] = -1.0 / x;
            out[7] = dmu;
        }
        out[8] = x;
    }
    fn bc_left(&self, ya: &[f64], out: &mut [f64]) {
        out[0] = ya[1];
        out[1] = ya[2];
    }
    fn bc_left_jac(&self, _ya: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[1] = 1.0;
        out[6] = 1.0;
    }
    fn bc_right(&self, yb: &[f64], out: &mut [f64]) {
        out[0] = yb[1];
        out[1] = yb[2] - self.m0();
    }
    fn bc_right_jac(&self, _yb: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[1] = 1.0;
        out[6] = 1.0;
    }
}

impl StationarySystem {
    fn m0(&self) -> f64 {
        self.m0_value
    }
}

/// Solve the smooth stationary problem on `[0, 1]`.
pub fn solve_stationary(
    epsilon: f64,
    m0: f64,
    tol: f64,
    intervals: usize,
) -> Result<StationarySolution, AnnularError> {
    assert!(epsilon > 0.0 && tol > 0.0 && intervals >= 16);
    let sys = StationarySystem {
        epsilon2: epsilon * epsilon,
        m0_value: m0,
    };
    let mesh = bvp::uniform_mesh(0.0, 1.0, intervals);
    // Interface radius from the two-plateau mass balance.
    let rc2 = ((2.0 * m0 + 0.96) / 1.96).clamp(0.01, 0.99);
    let rc = rc2.sqrt();
    let mut y0 = Vec::with_capacity(4 * mesh.len());
    let mut s_acc = 0.0f64;
    let mut prev: Option<(f64, f64)> = None;
    for &r in &mesh {
        let x = (r - rc) / epsilon;
        let u = -0.98 * x.tanh();
        let w = -0.98 / epsilon / x.cosh().powi(2);
        if let Some((rp, up)) = prev {
            s_acc += 0.5 * (u * r + up * rp) * (r - rp);
        }
        prev = Some((r, u));
        y0.extend_from_slice(&[u, w, s_acc, 1.3 * epsilon]);
    }
    let sol = bvp::solve_bvp(&sys, &mesh, &y0, tol, 60).map_err(|e| {
        AnnularError::NoConvergence {
            reason: format!("stationary BVP: {e}"),
        }
    })?;
    Ok(StationarySolution {
        epsilon,
        m0,
        mu_c: sol.node(0)[3],
        r: sol.mesh.clone(),
        u: sol.component(0),
        w: sol.component(1),
    })
}
