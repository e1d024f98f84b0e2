use nkflow_core::euclid::{normal_congruence, SurfacePatch};
use nkflow_core::flow::*;
use nkflow_core::grid::{PolarGrid, SectionField};
use nkflow_core::slopes::compute_slopes;

fn main() {
    let cfg = FlowConfig {
        c0: 0.5, r0: 0.05, n_r: 33, n_theta: 64, epsilon: 0.05,
        boundary_mode: BoundaryMode::PaperNeumann,
        s_max: 1.0, sigma_tol: 1e-12, snapshot_every: 100,
        ..Default::default()
    };
    let gridn = PolarGrid::new(33, 64, 0.05).unwrap();
    let patchn = SurfacePatch::rotational_bump(0.125, 0.4, 48);
    let (zero, _) = normal_congruence(&patchn, &gridn).unwrap();
    let b = make_boundary_surface(&zero, cfg.c0).unwrap();
    let mut state = make_initial_disc(&b, &cfg).unwrap();
    for _ in 0..300 { state = step(&state, &b, &cfg).unwrap(); }
    let rb = state.r_boundary.clone().unwrap();
    let slopes = compute_slopes(&state.f).unwrap();
    // per-ray N and root locations
    let mut nvals = vec![];
    for k in 0..gridn.n_theta {
        nvals.push(neumann_interp(&slopes, &b.slopes_tilde, cfg.epsilon, rb[k], k));
    }
    let nmax = nvals.iter().cloned().fold(0.0f64, |a,b| a.max(b.abs()));
    println!("after 300 steps: max|N| = {nmax:.3e}");
    print!("N by ray (every 8): ");
    for k in (0..64).step_by(8) { print!("{:+.2e} ", nvals[k]); }
    println!();
    print!("rb by ray (every 8): ");
    for k in (0..64).step_by(8) { print!("{:.5} ", rb[k]); }
    println!();
    // N as a function of r along ray 0 near the curve
    for dj in -6i64..=2 {
        let r = rb[0] + dj as f64 * gridn.dr();
        let n = neumann_interp(&slopes, &b.slopes_tilde, cfg.epsilon, r, 0);
        println!("  N(rb {dj:+} cells) = {n:+.4e}");
    }
}
