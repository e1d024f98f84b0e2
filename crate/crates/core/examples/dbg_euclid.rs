use nkflow_core::euclid::*;
use nkflow_core::flow::make_boundary_surface;
use nkflow_core::grid::PolarGrid;
use nkflow_core::slopes::compute_slopes;

fn main() {
    let patch = SurfacePatch::rotational_bump(1.0, 0.4, 32);
    let grid = PolarGrid::new(17, 32, 0.15).unwrap();
    let (sec, _) = normal_congruence(&patch, &grid).unwrap();
    let s = compute_slopes(&sec).unwrap();
    println!("max|lambda| = {:.3e}  max|sigma| = {:.3e}", s.max_abs_lambda(), s.max_abs_sigma());
    match make_boundary_surface(&sec, 0.1) {
        Ok(b) => println!("Ok: min margin = {:.3e}", b.slopes_tilde.min_margin()),
        Err(e) => println!("Err: {e}"),
    }
}
