//! The inner similarity profile of the near-touchdown region: the positive
//! solution of
//!
//! ```text
//! phi0(y)^n phi0'''(y) = 1,    n > 2,
//! ```
//!
//! that leaves the touchdown point linearly on the left and opens
//! quadratically on the right:
//!
//! ```text
//! y -> -inf:  phi0 ~ -y + xi(-y),  xi(x) = x^{3-n}/((n-1)(n-2)(n-3))
//!                                   (xi = -ln(x)/2 at n = 3),
//! y -> +inf:  phi0 ~ A+ y^2 + D y + E
//!                    - A+^{-n} y^{3-2n}/((2n-1)(2n-2)(2n-3)).
//! ```
//!
//! The left far field fixes all three boundary values at `y = -L` (the
//! additive constant of the expansion is a pure translation, removed after
//! the solve by shifting the minimizer to `y = 0`), so the profile is
//! computed as an implicit initial value problem with the collocation
//! solver, warm-started by explicit RK4. Two curvatures matter downstream:
//! `kappa` at the minimizer (a local observable) and `kappa_far = 2 A+`,
//! the parabolic opening that the outer expansion matches onto.

use thiserror::Error;

use crate::bvp::{self, BvpSystem};

#[derive(Debug, Error, PartialEq)]
pub enum TouchdownError {
    /// The far-field expansions need `n > 2` (left) and `n > 3/2` (right).
    #[error("mobility exponent {n} outside the admissible range (> {bound})")]
    UnsupportedExponent { n: f64, bound: f64 },
    /// The iteration produced (or was handed) a profile touching zero,
    /// where `phi^{-n}` is undefined.
    #[error("profile dipped to a non-positive value")]
    NegativeExcursion,
    /// The collocation Newton failed.
    #[error("touchdown profile solve failed: {reason}")]
    NoConvergence { reason: String },
}

/// Default half-width of the computational window `[-L, L]`.
pub const DEFAULT_HALF_WIDTH: f64 = 200.0;
/// Default number of collocation intervals.
pub const DEFAULT_INTERVALS: usize = 16_000;
/// Default Newton tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Converged inner profile, translated so the minimizer sits at `y = 0`.
#[derive(Clone, Debug)]
pub struct TouchdownProfile {
    pub n: f64,
    /// Collocation mesh (translated frame).
    pub mesh: Vec<f64>,
    pub phi0: Vec<f64>,
    pub dphi0: Vec<f64>,
    pub d2phi0: Vec<f64>,
    /// Minimizer location in the untranslated (far-field) frame; also the
    /// shift applied to the mesh.
    pub y_min: f64,
    /// Minimum value of the profile.
    pub phi_min: f64,
    /// Curvature `phi0''` at the minimizer.
    pub kappa: f64,
    /// Far-field curvature `2 A+` of the right parabolic opening.
    pub kappa_far: f64,
    /// Right far-field coefficients in the translated frame.
    pub a_plus: f64,
    pub d_coef: f64,
    pub e_coef: f64,
    /// Relative size of the first neglected far-field term at the window
    /// edge (controls how honest the boundary closure is).
    pub truncation: f64,
}

/// Left far field at `x = -y > 0`: returns `(xi, xi', xi'')` with respect
/// to `x`. Requires `n > 2`.
pub fn far_field_left(n: f64, x: f64) -> Result<(f64, f64, f64), TouchdownError> {
    if !(n > 2.0) {
        return Err(TouchdownError::UnsupportedExponent { n, bound: 2.0 });
    }
    assert!(x > 0.0);
    let xi = if (n - 3.0).abs() < 1e-12 {
        -x.ln() / 2.0
    } else {
        x.powf(3.0 - n) / ((n - 1.0) * (n - 2.0) * (n - 3.0))
    };
    let xi_p = -x.powf(2.0 - n) / ((n - 1.0) * (n - 2.0));
    let xi_pp = x.powf(1.0 - n) / (n - 1.0);
    Ok((xi, xi_p, xi_pp))
}

/// Right far-field correction at `y > 0` for opening coefficient `a_plus`:
/// returns `(c, c', c'')` of `c(y) = -a_plus^{-n} y^{3-2n}/((2n-1)(2n-2)(2n-3))`.
/// Requires `n > 3/2`.
pub fn far_field_right(n: f64, a_plus: f64, y: f64) -> Result<(f64, f64, f64), TouchdownError> {
    if !(n > 1.5) {
        return Err(TouchdownError::UnsupportedExponent { n, bound: 1.5 });
    }
    assert!(y > 0.0 && a_plus > 0.0);
    let k = -a_plus.powf(-n) / ((2.0 * n - 1.0) * (2.0 * n - 2.0) * (2.0 * n - 3.0));
    let c = k * y.powf(3.0 - 2.0 * n);
    let c_p = k * (3.0 - 2.0 * n) * y.powf(2.0 - 2.0 * n);
    let c_pp = k * (3.0 - 2.0 * n) * (2.0 - 2.0 * n) * y.powf(1.0 - 2.0 * n);
    Ok((c, c_p, c_pp))
}

/// `phi''' = phi^{-n}` as a first-order system `y = (phi, phi', phi'')`.
struct PhiSystem {
    n: f64,
}

impl PhiSystem {
    fn inv_pow(&self, phi: f64) -> f64 {
        if phi > 0.0 {
            phi.powf(-self.n)
        } else {
            f64::NAN // barrier: the line search rejects non-finite residuals
        }
    }
}

impl BvpSystem for PhiSystem {
    fn dim(&self) -> usize {
        3
    }
    fn num_left_bcs(&self) -> usize {
        3
    }
    fn rhs(&self, _x: f64, y: &[f64], out: &mut [f64]) {
        out[0] = y[1];
        out[1] = y[2];
        out[2] = self.inv_pow(y[0]);
    }
    fn rhs_jac(&self, _x: f64, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[1] = 1.0;
        out[5] = 1.0;
        out[6] = if y[0] > 0.0 {
            -self.n * y[0].powf(-self.n - 1.0)
        } else {
            f64::NAN
        };
    }
    fn bc_left(&self, ya: &[f64], out: &mut [f64]) {
        // Filled in by the caller through `LeftPinned`.
        out[..3].copy_from_slice(&ya[..3]);
    }
    fn bc_left_jac(&self, _ya: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[0] = 1.0;
        out[4] = 1.0;
        out[8] = 1.0;
    }
    fn bc_right(&self, _yb: &[f64], _out: &mut [f64]) {}
    fn bc_right_jac(&self, _yb: &[f64], _out: &mut [f64]) {}
}

/// Wrapper pinning the left state to given values.
struct LeftPinned {
    inner: PhiSystem,
    left: [f64; 3],
}

impl BvpSystem for LeftPinned {
    fn dim(&self) -> usize {
        3
    }
    fn num_left_bcs(&self) -> usize {
        3
    }
    fn rhs(&self, x: f64, y: &[f64], out: &mut [f64]) {
        self.inner.rhs(x, y, out);
    }
    fn rhs_jac(&self, x: f64, y: &[f64], out: &mut [f64]) {
        self.inner.rhs_jac(x, y, out);
    }
    fn bc_left(&self, ya: &[f64], out: &mut [f64]) {
        for c in 0..3 {
            out[c] = ya[c] - self.left[c];
        }
    }
    fn bc_left_jac(&self, ya: &[f64], out: &mut [f64]) {
        self.inner.bc_left_jac(ya, out);
    }
    fn bc_right(&self, _yb: &[f64], _out: &mut [f64]) {}
    fn bc_right_jac(&self, _yb: &[f64], _out: &mut [f64]) {}
}

/// Solve for the inner profile on the default symmetric window.
pub fn solve_phi0(n: f64, l: f64, tol: f64) -> Result<TouchdownProfile, TouchdownError> {
    solve_phi0_with(n, l, l, DEFAULT_INTERVALS, tol)
}

/// Solve on `[-l_minus, l_plus]` with an explicit mesh resolution.
pub fn solve_phi0_with(
    n: f64,
    l_minus: f64,
    l_plus: f64,
    intervals: usize,
    tol: f64,
) -> Result<TouchdownProfile, TouchdownError> {
    if !(n > 2.0) {
        return Err(TouchdownError::UnsupportedExponent { n, bound: 2.0 });
    }
    assert!(l_minus >= 10.0 && l_plus >= 10.0 && intervals >= 100 && tol > 0.0);

    // Left boundary state from the far field (additive constant = 0; any
    // other choice is the same orbit translated).
    let (xi, xi_p, xi_pp) = far_field_left(n, l_minus)?;
    let left = [l_minus + xi, -1.0 - xi_p, xi_pp];
    let sys = LeftPinned {
        inner: PhiSystem { n },
        left,
    };
    let mesh = bvp::uniform_mesh(-l_minus, l_plus, intervals);

    // RK4 warm start: the profile is an implicit IVP, so a forward sweep
    // lands close to the collocation solution.
    let mut y0 = Vec::with_capacity(3 * mesh.len());
    let mut state = left;
    y0.extend_from_slice(&state);
    let f = |s: &[f64; 3]| -> [f64; 3] {
        [
            s[1],
            s[2],
            if s[0] > 0.0 { s[0].powf(-n) } else { f64::NAN },
        ]
    };
    for w in mesh.windows(2) {
        let h = w[1] - w[0];
        let k1 = f(&state);
        let mut s2 = state;
        for i in 0..3 {
            s2[i] += 0.5 * h * k1[i];
        }
        let k2 = f(&s2);
        let mut s3 = state;
        for i in 0..3 {
            s3[i] += 0.5 * h * k2[i];
        }
        let k3 = f(&s3);
        let mut s4 = state;
        for i in 0..3 {
            s4[i] += h * k3[i];
        }
        let k4 = f(&s4);
        for i in 0..3 {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !(state[0] > 0.0) || !state[0].is_finite() {
            return Err(TouchdownError::NegativeExcursion);
        }
        y0.extend_from_slice(&state);
    }

    let sol = bvp::solve_bvp(&sys, &mesh, &y0, tol, 30).map_err(|e| {
        TouchdownError::NoConvergence {
            reason: e.to_string(),
        }
    })?;

    let phi = sol.component(0);
    let dphi = sol.component(1);
    let d2phi = sol.component(2);
    if phi.iter().any(|&p| !(p > 0.0)) {
        return Err(TouchdownError::NegativeExcursion);
    }

    // Minimizer: the zero crossing of the carried slope component. Bisect
    // on its cubic Hermite interpolant (slope values + curvature values as
    // derivatives), which keeps the full collocation accuracy; a parabola
    // through phi nodes would lose four orders here because phi''' = phi^{-n}
    // is order one at the minimum.
    let mut k = 0usize;
    for i in 1..phi.len() {
        if phi[i] < phi[k] {
            k = i;
        }
    }
    if k == 0 || k == phi.len() - 1 {
        return Err(TouchdownError::NoConvergence {
            reason: "minimum on the window edge".into(),
        });
    }
    let i0 = if dphi[k] > 0.0 { k - 1 } else { k };
    if !(dphi[i0] <= 0.0 && dphi[i0 + 1] >= 0.0) {
        return Err(TouchdownError::NoConvergence {
            reason: "slope does not bracket the minimum".into(),
        });
    }
    let h = mesh[i0 + 1] - mesh[i0];
    let hermite = |t: f64, va: f64, da: f64, vb: f64, db: f64| -> f64 {
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        h00 * va + h10 * h * da + h01 * vb + h11 * h * db
    };
    let slope_at = |t: f64| hermite(t, dphi[i0], d2phi[i0], dphi[i0 + 1], d2phi[i0 + 1]);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if slope_at(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_min = 0.5 * (lo + hi);
    let y_min = mesh[i0] + t_min * h;
    let phi_min = hermite(t_min, phi[i0], dphi[i0], phi[i0 + 1], dphi[i0 + 1]);
    if !(phi_min > 0.0) {
        return Err(TouchdownError::NegativeExcursion);
    }
    // Curvature at the minimizer, interpolated the same way (the node
    // derivative of phi'' is phi''' = phi^{-n} from the equation itself).
    let kappa = hermite(
        t_min,
        d2phi[i0],
        phi[i0].powf(-n),
        d2phi[i0 + 1],
        phi[i0 + 1].powf(-n),
    );

    // Right far-field coefficients in the translated frame, one fixed-point
    // pass for the (tiny) curvature correction.
    let mesh_t: Vec<f64> = mesh.iter().map(|&y| y - y_min).collect();
    let y_end = *mesh_t.last().unwrap();
    let (phi_end, p_end, q_end) = (
        *phi.last().unwrap(),
        *dphi.last().unwrap(),
        *d2phi.last().unwrap(),
    );
    let mut a_plus = 0.5 * q_end;
    let (c, c_p, c_pp) = far_field_right(n, a_plus, y_end)?;
    a_plus = 0.5 * (q_end - c_pp);
    let d_coef = p_end - 2.0 * a_plus * y_end - c_p;
    let e_coef = phi_end - a_plus * y_end * y_end - d_coef * y_end - c;

    // First neglected left-tail term relative to the leading linear part.
    let truncation = (far_field_left(n, l_minus)?.0 / l_minus).abs();

    Ok(TouchdownProfile {
        n,
        mesh: mesh_t,
        phi0: phi,
        dphi0: dphi,
        d2phi0: d2phi,
        y_min,
        phi_min,
        kappa,
        kappa_far: 2.0 * a_plus,
        a_plus,
        d_coef,
        e_coef,
        truncation,
    })
}

impl TouchdownProfile {
    /// Where the right parabolic far field `a+ y^2 + d y + e` is centered,
    /// in the stored (minimizer-at-zero) frame. The outer quadratic it must
    /// merge into is frozen with its vertex at the free boundary, so a
    /// uniform approximation has to place this point — not the minimizer —
    /// at `r*`; the profile itself is translation-invariant either way.
    pub fn vertex_offset(&self) -> f64 {
        -self.d_coef / (2.0 * self.a_plus)
    }

    /// Evaluate `phi0` at any `y` of the translated frame: cubic Hermite on
    /// the mesh, exact far-field expansions beyond it (never polynomial
    /// extrapolation).
    pub fn eval(&self, y: f64) -> f64 {
        let (lo, hi) = (self.mesh[0], *self.mesh.last().unwrap());
        if y < lo {
            // Untranslated coordinate; the expansion is exact continuation
            // of the boundary data.
            let x = -(y + self.y_min);
            let (xi, _, _) = far_field_left(self.n, x).expect("validated n");
            return x + xi;
        }
        if y > hi {
            let (c, _, _) = far_field_right(self.n, self.a_plus, y).expect("validated n");
            return self.a_plus * y * y + self.d_coef * y + self.e_coef + c;
        }
        let h = self.mesh[1] - self.mesh[0];
        let i = (((y - lo) / h) as usize).min(self.mesh.len() - 2);
        let (ya, yb) = (self.mesh[i], self.mesh[i + 1]);
        let t = (y - ya) / (yb - ya);
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t),
            t * (1.0 - t) * (1.0 - t),
            t * t * (3.0 - 2.0 * t),
            t * t * (t - 1.0),
        );
        h00 * self.phi0[i]
            + h10 * (yb - ya) * self.dphi0[i]
            + h01 * self.phi0[i + 1]
            + h11 * (yb - ya) * self.dphi0[i + 1]
    }

    /// Max-norm collocation residual of the stored solution, per unit
    /// mesh length (the ODE is autonomous, so the translated frame is
    /// equivalent).
    pub fn residual_norm(&self) -> f64 {
        let sys = PhiSystem { n: self.n };
        let m = self.mesh.len() - 1;
        let mut worst = 0.0f64;
        let mut fa = [0.0; 3];
        let mut fb = [0.0; 3];
        let mut fm = [0.0; 3];
        for i in 0..m {
            let h = self.mesh[i + 1] - self.mesh[i];
            let ya = [self.phi0[i], self.dphi0[i], self.d2phi0[i]];
            let yb = [self.phi0[i + 1], self.dphi0[i + 1], self.d2phi0[i + 1]];
            sys.rhs(self.mesh[i], &ya, &mut fa);
            sys.rhs(self.mesh[i + 1], &yb, &mut fb);
            let mut ym = [0.0; 3];
            for c in 0..3 {
                ym[c] = 0.5 * (ya[c] + yb[c]) - h / 8.0 * (fb[c] - fa[c]);
            }
            sys.rhs(0.5 * (self.mesh[i] + self.mesh[i + 1]), &ym, &mut fm);
            for c in 0..3 {
                let r = yb[c] - ya[c] - h / 6.0 * (fa[c] + 4.0 * fm[c] + fb[c]);
                worst = worst.max((r / h).abs());
            }
        }
        worst
    }
}
