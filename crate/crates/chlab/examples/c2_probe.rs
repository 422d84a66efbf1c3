//! Scratch: inspect the stored inner-profile far-field coefficients.

use chlab::touchdown::{solve_phi0, DEFAULT_HALF_WIDTH};

fn main() {
    for n in [3.0, 4.0, 5.0] {
        let p = solve_phi0(n, DEFAULT_HALF_WIDTH, 1e-10).unwrap();
        println!(
            "n={n}: y_min={:.6} phi_min={:.6} a_plus={:.6} d_coef={:.6} e_coef={:.6} vertex_y={:.6}",
            p.y_min,
            p.phi_min,
            p.a_plus,
            p.d_coef,
            p.e_coef,
            -p.d_coef / (2.0 * p.a_plus),
        );
    }
}
