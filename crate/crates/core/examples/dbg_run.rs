use nkflow_core::flow::*;
use nkflow_core::grid::{PolarGrid, SectionField};
use nkflow_core::slopes::compute_slopes;

fn main() {
    let cfg = FlowConfig { c0: 1.0, r0: 0.2, s_max: 0.01, sigma_tol: 1e-4, ..Default::default() };
    let grid = PolarGrid::new(33, 64, 0.2).unwrap();
    let zero = SectionField::zero(grid);
    let b = make_boundary_surface(&zero, cfg.c0).unwrap();
    let mut state = make_initial_disc(&b, &cfg).unwrap();
    let s0 = compute_slopes(&state.f).unwrap();
    println!("initial sup|sigma| = {:.3e}, min_margin = {:.3e}", s0.max_abs_sigma(), state.min_margin);
    for i in 0..200 {
        state = step(&state, &b, &cfg).unwrap();
        if i % 20 == 0 {
            let s = compute_slopes(&state.f).unwrap();
            println!("step {i:4} s = {:.4e} dt = {:.3e} sup|sigma| = {:.4e}", state.s, state.dt_last, s.max_abs_sigma());
        }
    }
}
