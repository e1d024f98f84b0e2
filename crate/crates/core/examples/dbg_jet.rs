use nkflow_core::grid::{PolarGrid, SectionField};
use nkflow_core::deriv::{complex_derivatives, second_derivatives};
use nkflow_core::slopes::compute_slopes;
use num_complex::Complex64;

fn main() {
    let grid = PolarGrid::new(65, 128, 0.5).unwrap();
    let sec = SectionField::from_fn(grid.clone(), |xi| Complex64::new(0.0, -1.0) * xi).unwrap();
    let slopes = compute_slopes(&sec).unwrap();
    let mut packed = slopes.sigma.clone();
    for j in 0..grid.n_r { for k in 0..grid.n_theta {
        let w = 1.0 + grid.xi(j,k).norm_sqr();
        packed[[j,k]] = slopes.sigma[[j,k]].conj() / (w*w);
    }}
    println!("max |sigma| = {:.3e}", slopes.max_abs_sigma());
    let (dpacked, _) = complex_derivatives(&grid, &packed).unwrap();
    let mut inner = dpacked.clone();
    for j in 0..grid.n_r { for k in 0..grid.n_theta {
        let w = 1.0 + grid.xi(j,k).norm_sqr();
        inner[[j,k]] = dpacked[[j,k]] * w * w;
    }}
    let maxinner = inner.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    println!("max |inner| = {maxinner:.3e}");
    let (dinner, _) = complex_derivatives(&grid, &inner).unwrap();
    for j in (0..grid.n_r).rev().take(3) {
        let e = (0..grid.n_theta).map(|k| dinner[[j,k]].im.abs()).fold(0.0f64, f64::max);
        println!("ring {j:2} |Im dinner| {e:.3e}");
    }
    let lam_c = slopes.lambda.mapv(|x| Complex64::new(x, 0.0));
    let (mix, _, _) = second_derivatives(&grid, &lam_c).unwrap();
    let j = grid.n_r-1;
    let r = grid.r(j); let w = 1.0+r*r;
    let exact = 2.0*(1.0-r*r)/(w*w*w);
    let e = (0..grid.n_theta).map(|k| (mix[[j,k]].re-exact).abs()).fold(0.0f64, f64::max);
    println!("ring {j} mix.re err {e:.3e}");
}
