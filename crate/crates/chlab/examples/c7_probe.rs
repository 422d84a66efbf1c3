//! Scratch: the long cross-validation run planned for the acceptance gate.
//! Simulates n = 4 on candidate fine grids to t = 1e15 and prints the
//! composite comparison errors at the two snapshot times for each.

use std::time::Instant;

use chlab::composite::{compare_error, composite_model};
use chlab::config::RunConfig;
use chlab::model::{initial_profile, RadialGrid};
use chlab::pipeline::run_simulation;
use chlab::{annular, diagnostics, touchdown};

fn probe(cells: usize) {
    let mut cfg = RunConfig::default();
    cfg.model.n = 4.0;
    cfg.grid.cells = cells;
    cfg.run.t_end = 1e15;
    cfg.run.snapshot_times = vec![1e13, 1e15];
    cfg.run.snapshots_per_decade = 0;

    let t0 = Instant::now();
    let art = match run_simulation(&cfg) {
        Ok(a) => a,
        Err(e) => {
            println!(
                "cells={cells}: sim ERROR after {:.1}s: {e}",
                t0.elapsed().as_secs_f64()
            );
            return;
        }
    };
    println!(
        "cells={cells}: sim done in {:.1}s, rows={}, snaps={}, vmin_final={:.3e}",
        t0.elapsed().as_secs_f64(),
        art.diagnostics.len(),
        art.snapshots.len(),
        art.final_state
            .values
            .iter()
            .fold(f64::INFINITY, |m, &u| m.min(1.0 - u)),
    );

    let grid = RadialGrid::new(cells);
    let state0 = initial_profile(
        &grid,
        cfg.model.epsilon,
        cfg.initial.amplitude,
        cfg.initial.center,
        cfg.initial.clamp_endpoints,
    );
    let m0 = diagnostics::mass(&state0, &grid);
    let ann = annular::solve_annular(cfg.model.epsilon, m0, 1e-10).unwrap();
    let inner = touchdown::solve_phi0(4.0, touchdown::DEFAULT_HALF_WIDTH, 1e-10).unwrap();
    let model = composite_model(&ann, &inner).unwrap();

    let mut errs = Vec::new();
    for snap in &art.snapshots {
        let v: Vec<f64> = snap.values.iter().map(|&u| 1.0 - u).collect();
        let err = compare_error(&model, snap.time, &grid.nodes, &v);
        println!(
            "cells={cells}: t={:.3e} max_err={:.6e} at r={:.6}",
            snap.time, err.max_abs_error, err.location
        );
        let wall = v.last().unwrap() - (1.0 - ann.u_star_at(1.0));
        println!("cells={cells}:   wall v_pde - v_ann = {wall:.3e}");
        for (lo, hi) in [(0.0, 0.2), (0.2, 0.3), (0.3, 0.7), (0.7, 1.0)] {
            let seg = grid
                .nodes
                .iter()
                .zip(&v)
                .filter(|(r, _)| (lo..=hi).contains(*r))
                .map(|(&r, &vi)| (model.eval(snap.time, r) - vi).abs())
                .fold(0.0f64, f64::max);
            println!("cells={cells}:   max err on [{lo},{hi}] = {seg:.3e}");
        }
        errs.push(err.max_abs_error);
    }
    if errs.len() == 2 {
        println!("cells={cells}: ratio = {:.4}", errs[0] / errs[1]);
    }
}

fn main() {
    probe(20_000);
    probe(40_000);
}
