use nkflow_core::grid::{PolarGrid, SectionField};
use nkflow_core::frames::*;
use num_complex::Complex64;

fn main() {
    let grid = PolarGrid::new(65, 128, 0.4).unwrap();
    let sec = SectionField::from_fn(grid.clone(), |xi| {
        Complex64::new(0.0, -1.0) * xi + 0.1 * xi.conj() + 0.02 * xi.conj().powu(2)
    }).unwrap();
    let h1 = mean_curvature(&sec, 1e-9).unwrap();
    let h2 = mean_curvature_gamma(&sec, 1e-9).unwrap();
    let h3 = mean_curvature_expanded(&sec, 1e-9).unwrap();
    let sff = second_fundamental_form(&sec, 1e-9).unwrap();
    let (mut w12, mut w13, mut wtr) = (0.0f64, 0.0f64, 0.0f64);
    let mut at = (0,0);
    for j in 0..grid.n_r { for k in 0..grid.n_theta {
        let d = (h1[[j,k]]-h2[[j,k]]).norm();
        if d > w12 { w12 = d; at = (j,k); }
        w13 = w13.max((h1[[j,k]]-h3[[j,k]]).norm());
        let trace = sff.beta11[[j,k]] + sff.beta22[[j,k]];
        wtr = wtr.max((trace-h1[[j,k]]).norm());
    }}
    println!("w12 (div vs gamma) = {w12:.3e} at {at:?}");
    println!("w13 (div vs expanded) = {w13:.3e}");
    println!("wtr (trace vs div) = {wtr:.3e}");
    let (j,k) = at;
    println!("h1 = {:?}", h1[[j,k]]);
    println!("h2 = {:?}", h2[[j,k]]);
    println!("h3 = {:?}", h3[[j,k]]);
    println!("trace = {:?}", sff.beta11[[j,k]] + sff.beta22[[j,k]]);
}
