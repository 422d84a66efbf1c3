//! Two-point boundary value solver: three-stage Lobatto IIIA collocation
//! (the classic fourth-order Simpson scheme) with a damped Newton iteration
//! on the banded linearization.
//!
//! For `y' = f(x, y)` on a mesh `x_0 < ... < x_M` the interval residual is
//!
//! ```text
//! R_i = y_{i+1} - y_i - h/6 (f_i + 4 f(x_mid, y_mid) + f_{i+1}),
//! y_mid = (y_i + y_{i+1})/2 - h/8 (f_{i+1} - f_i),
//! ```
//!
//! which is exact on cubics and fourth-order accurate in general. With
//! unknowns ordered node-major and rows ordered (left BCs, interval
//! residuals, right BCs) the Jacobian is banded with `kl = n_left + d - 1`,
//! `ku = 2d - 1 - n_left`, so the global solve stays linear in the mesh
//! size. Separated boundary conditions only; `n_left = d` (no right
//! conditions) makes the solver an implicit initial value integrator, which
//! is how the touchdown profile with its fully determined left far field is
//! computed.

use thiserror::Error;

use crate::band::BandMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum BvpError {
    /// The banded collocation Jacobian lost rank.
    #[error("singular collocation Jacobian (column {col})")]
    Singular { col: usize },
    /// Newton failed to converge within the iteration budget.
    #[error("collocation Newton stalled after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// A first-order ODE system with separated boundary conditions.
pub trait BvpSystem {
    /// State dimension `d`.
    fn dim(&self) -> usize;
    /// Number of conditions imposed at the left end (the remaining
    /// `d - n_left` are imposed at the right end).
    fn num_left_bcs(&self) -> usize;
    /// `out = f(x, y)`, `out.len() == d`.
    fn rhs(&self, x: f64, y: &[f64], out: &mut [f64]);
    /// `out = df/dy (x, y)` in row-major `d x d` layout.
    fn rhs_jac(&self, x: f64, y: &[f64], out: &mut [f64]);
    /// Left boundary residuals `g_L(y(a))`, `out.len() == n_left`.
    fn bc_left(&self, ya: &[f64], out: &mut [f64]);
    /// Row-major `n_left x d` Jacobian of `bc_left`.
    fn bc_left_jac(&self, ya: &[f64], out: &mut [f64]);
    /// Right boundary residuals, `out.len() == d - n_left`.
    fn bc_right(&self, yb: &[f64], out: &mut [f64]);
    /// Row-major `(d - n_left) x d` Jacobian of `bc_right`.
    fn bc_right_jac(&self, yb: &[f64], out: &mut [f64]);
}

/// Converged collocation solution: node values on the mesh.
#[derive(Clone, Debug)]
pub struct BvpSolution {
    pub mesh: Vec<f64>,
    /// Flat node-major storage, `y[i*d..(i+1)*d]` is the state at node i.
    pub y: Vec<f64>,
    pub dim: usize,
    pub newton_iterations: usize,
}

impl BvpSolution {
    pub fn node(&self, i: usize) -> &[f64] {
        &self.y[i * self.dim..(i + 1) * self.dim]
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.len()
    }

    /// Component `c` as a contiguous vector over the mesh.
    pub fn component(&self, c: usize) -> Vec<f64> {
        (0..self.num_nodes()).map(|i| self.node(i)[c]).collect()
    }
}

/// Uniform mesh of `m` intervals on `[a, b]`.
pub fn uniform_mesh(a: f64, b: f64, m: usize) -> Vec<f64> {
    assert!(m >= 1 && b > a);
    (0..=m)
        .map(|i| a + (b - a) * i as f64 / m as f64)
        .collect()
}

/// Solve the BVP by damped Newton from the initial guess `y0` (flat
/// node-major, same layout as [`BvpSolution::y`]).
pub fn solve_bvp<S: BvpSystem>(
    sys: &S,
    mesh: &[f64],
    y0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<BvpSolution, BvpError> {
    let d = sys.dim();
    let nl = sys.num_left_bcs();
    let m = mesh.len() - 1;
    let nn = d * (m + 1);
    assert!(d >= 1 && nl <= d && mesh.len() >= 2);
    assert_eq!(y0.len(), nn);
    assert!(mesh.windows(2).all(|w| w[1] > w[0]), "mesh must increase");

    let kl = nl + d - 1;
    let ku = 2 * d - 1 - nl;
    let mut jac = BandMatrix::zeros(nn, kl, ku);
    let mut work = Workspace::new(d);
    let mut y = y0.to_vec();
    let mut res = vec![0.0; nn];
    let mut res_trial = vec![0.0; nn];

    residual(sys, mesh, &y, &mut work, &mut res);
    let mut rnorm = max_abs(&res);
    for it in 1..=max_iter {
        assemble_jacobian(sys, mesh, &y, &mut work, &mut jac);
        let lu = jac.factor().map_err(|e| match e {
            crate::band::BandError::Singular { col } => BvpError::Singular { col },
        })?;
        let delta = lu.solve_refined(&res);
        let nd = max_abs(&delta);
        if !nd.is_finite() {
            return Err(BvpError::NoConvergence {
                iterations: it,
                residual: rnorm,
            });
        }
        let ymax = max_abs(&y);
        // Damped update: accept the first lambda that reduces the residual.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=10 {
            let ytrial: Vec<f64> = y
                .iter()
                .zip(&delta)
                .map(|(yi, di)| yi - lambda * di)
                .collect();
            residual(sys, mesh, &ytrial, &mut work, &mut res_trial);
            let rt = max_abs(&res_trial);
            if rt.is_finite() && (rt <= (1.0 - 0.25 * lambda) * rnorm || rt < tol) {
                y = ytrial;
                std::mem::swap(&mut res, &mut res_trial);
                rnorm = rt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(BvpError::NoConvergence {
                iterations: it,
                residual: rnorm,
            });
        }
        if lambda == 1.0 && nd <= tol * (1.0 + ymax) {
            return Ok(BvpSolution {
                mesh: mesh.to_vec(),
                y,
                dim: d,
                newton_iterations: it,
            });
        }
    }
    Err(BvpError::NoConvergence {
        iterations: max_iter,
        residual: rnorm,
    })
}

/// Scratch buffers sized for state dimension `d`.
struct Workspace {
    fa: Vec<f64>,
    fb: Vec<f64>,
    fm: Vec<f64>,
    ymid: Vec<f64>,
    ja: Vec<f64>,
    jb: Vec<f64>,
    jm: Vec<f64>,
    tmp: Vec<f64>,
    bc: Vec<f64>,
    bc_jac: Vec<f64>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Self {
            fa: vec![0.0; d],
            fb: vec![0.0; d],
            fm: vec![0.0; d],
            ymid: vec![0.0; d],
            ja: vec![0.0; d * d],
            jb: vec![0.0; d * d],
            jm: vec![0.0; d * d],
            tmp: vec![0.0; d * d],
            bc: vec![0.0; d],
            bc_jac: vec![0.0; d * d],
        }
    }
}

fn residual<S: BvpSystem>(sys: &S, mesh: &[f64], y: &[f64], w: &mut Workspace, out: &mut [f64]) {
    let d = sys.dim();
    let nl = sys.num_left_bcs();
    let m = mesh.len() - 1;

    sys.bc_left(&y[0..d], &mut w.bc[..nl]);
    out[..nl].copy_from_slice(&w.bc[..nl]);

    for i in 0..m {
        let (xa, xb) = (mesh[i], mesh[i + 1]);
        let h = xb - xa;
        let ya = &y[i * d..(i + 1) * d];
        let yb = &y[(i + 1) * d..(i + 2) * d];
        sys.rhs(xa, ya, &mut w.fa);
        sys.rhs(xb, yb, &mut w.fb);
        for c in 0..d {
            w.ymid[c] = 0.5 * (ya[c] + yb[c]) - h / 8.0 * (w.fb[c] - w.fa[c]);
        }
        sys.rhs(0.5 * (xa + xb), &w.ymid, &mut w.fm);
        let row = nl + i * d;
        for c in 0..d {
            out[row + c] =
                yb[c] - ya[c] - h / 6.0 * (w.fa[c] + 4.0 * w.fm[c] + w.fb[c]);
        }
    }

    let nr = d - nl;
    if nr > 0 {
        sys.bc_right(&y[m * d..(m + 1) * d], &mut w.bc[..nr]);
        out[nl + m * d..].copy_from_slice(&w.bc[..nr]);
    }
}

fn assemble_jacobian<S: BvpSystem>(
    sys: &S,
    mesh: &[f64],
    y: &[f64],
    w: &mut Workspace,
    jac: &mut BandMatrix,
) {
    let d = sys.dim();
    let nl = sys.num_left_bcs();
    let m = mesh.len() - 1;
    jac.clear();

    sys.bc_left_jac(&y[0..d], &mut w.bc_jac[..nl * d]);
    for r in 0..nl {
        for c in 0..d {
            jac.set(r, c, w.bc_jac[r * d + c]);
        }
    }

    for i in 0..m {
        let (xa, xb) = (mesh[i], mesh[i + 1]);
        let h = xb - xa;
        let ya = &y[i * d..(i + 1) * d];
        let yb = &y[(i + 1) * d..(i + 2) * d];
        sys.rhs(xa, ya, &mut w.fa);
        sys.rhs(xb, yb, &mut w.fb);
        for c in 0..d {
            w.ymid[c] = 0.5 * (ya[c] + yb[c]) - h / 8.0 * (w.fb[c] - w.fa[c]);
        }
        let xm = 0.5 * (xa + xb);
        sys.rhs_jac(xa, ya, &mut w.ja);
        sys.rhs_jac(xb, yb, &mut w.jb);
        sys.rhs_jac(xm, &w.ymid, &mut w.jm);

        let row = nl + i * d;
        // dR/dya = -I - h/6 (Ja + 4 Jm (I/2 + h/8 Ja))
        mat_affine(&w.jm, &w.ja, 0.5, h / 8.0, d, &mut w.tmp);
        for r in 0..d {
            for c in 0..d {
                let val = -(ident(r, c))
                    - h / 6.0 * (w.ja[r * d + c] + 4.0 * w.tmp[r * d + c]);
                jac.add(row + r, i * d + c, val);
            }
        }
        // dR/dyb = I - h/6 (Jb + 4 Jm (I/2 - h/8 Jb))
        mat_affine(&w.jm, &w.jb, 0.5, -h / 8.0, d, &mut w.tmp);
        for r in 0..d {
            for c in 0..d {
                let val =
                    ident(r, c) - h / 6.0 * (w.jb[r * d + c] + 4.0 * w.tmp[r * d + c]);
                jac.add(row + r, (i + 1) * d + c, val);
            }
        }
    }

    let nr = d - nl;
    if nr > 0 {
        sys.bc_right_jac(&y[m * d..(m + 1) * d], &mut w.bc_jac[..nr * d]);
        for r in 0..nr {
            for c in 0..d {
                jac.set(nl + m * d + r, m * d + c, w.bc_jac[r * d + c]);
            }
        }
    }
}

/// `out = Jm (a I + b Jx)`, all row-major `d x d`.
fn mat_affine(jm: &[f64], jx: &[f64], a: f64, b: f64, d: usize, out: &mut [f64]) {
    for r in 0..d {
        for c in 0..d {
            let mut acc = a * jm[r * d + c];
            for k in 0..d {
                acc += b * jm[r * d + k] * jx[k * d + c];
            }
            out[r * d + c] = acc;
        }
    }
}

fn ident(r: usize, c: usize) -> f64 {
    if r == c {
        1.0
    } else {
        0.0
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}
