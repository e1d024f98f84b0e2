use nkflow_core::euclid::{normal_congruence, SurfacePatch};
use nkflow_core::flow::*;
use nkflow_core::grid::{PolarGrid, SectionField};
use nkflow_core::slopes::compute_slopes;
use std::time::Instant;

fn main() {
    // ---- criterion 4-7 run ----
    let patch = SurfacePatch::rotational_bump(0.125, 0.4, 48);
    let grid = PolarGrid::new(33, 64, 0.05).unwrap();
    let (sigma_surface, _) = normal_congruence(&patch, &grid).unwrap();
    let cfg = FlowConfig {
        c0: 0.5, r0: 0.05, n_r: 33, n_theta: 64,
        s_max: 2e-3, sigma_tol: 4e-4, snapshot_every: 100,
        ..Default::default()
    };
    let t1 = Instant::now();
    let outcome = run(&cfg, &sigma_surface).unwrap();
    println!("run: {} steps={} s={:.3e} elapsed {:?}",
        outcome.termination, outcome.final_state.step_count, outcome.final_state.s, t1.elapsed());
    let tr = &outcome.trajectory;
    let (first, last) = (&tr[0], &tr[tr.len()-1]);
    println!("sup|sigma| {:.4e} -> {:.4e} ratio {:.1}", first.sup_abs_sigma, last.sup_abs_sigma, first.sup_abs_sigma/last.sup_abs_sigma);
    println!("area {:.6e} -> {:.6e} (max {:.6e}, bound {:.4})", first.area_g, last.area_g,
        tr.iter().map(|r| r.area_g).fold(0.0,f64::max), std::f64::consts::PI*0.5*1.01);
    let mut run_max = f64::NEG_INFINITY; let mut mono = true; let mut amono = true; let mut prev_a = f64::NEG_INFINITY;
    for r in tr {
        if run_max > 0.0 && r.sup_sigma2_over_lambda2 > run_max*(1.0+1e-6) { mono = false; }
        run_max = run_max.max(r.sup_sigma2_over_lambda2);
        if r.area_g < prev_a - 1e-8 { amono = false; }
        prev_a = r.area_g;
    }
    println!("s2l2 mono {mono}, area mono {amono}, s2margin {:.3e} -> {:.3e}", first.sup_sigma2_over_margin, last.sup_sigma2_over_margin);
    println!("compactness max {:.4e} vs C2 {:.4e}", tr.iter().map(|r| r.compactness_value).fold(0.0,f64::max), first.compactness_value*1.01);
    println!("premise 9*s2l2(0) = {:.3e}", 9.0*first.sup_sigma2_over_lambda2);

    // ---- criterion 12: paper_neumann smoke ----
    let t2 = Instant::now();
    let cfg_n = FlowConfig {
        c0: 0.5, r0: 0.05, n_r: 33, n_theta: 64, epsilon: 0.05,
        boundary_mode: BoundaryMode::PaperNeumann,
        s_max: 1.0, sigma_tol: 1e-12, snapshot_every: 100,
        ..Default::default()
    };
    let gridn = PolarGrid::new(33, 64, 0.05).unwrap();
    let patchn = SurfacePatch::rotational_bump(0.125, 0.4, 48);
    let (zero, _) = normal_congruence(&patchn, &gridn).unwrap();
    let b = make_boundary_surface(&zero, cfg_n.c0).unwrap();
    let mut state = match make_initial_disc(&b, &cfg_n) {
        Ok(s) => s, Err(e) => { println!("neumann initial disc FAILED: {e}"); return; }
    };
    let s0 = compute_slopes(&state.f).unwrap();
    println!("neumann init: sup|sigma| {:.4e} rb {:?}", s0.max_abs_sigma(), state.r_boundary.as_ref().map(|r| r[0]));
    let mut worst_resid = 0.0f64;
    let mut ok = true;
    for i in 0..500 {
        state = match step(&state, &b, &cfg_n) {
            Ok(s) => s,
            Err(e) => { println!("step {i} FAILED: {e}"); ok = false; break; }
        };
        let slopes = compute_slopes(&state.f).unwrap();
        let rb = state.r_boundary.as_ref().unwrap();
        // spectrally resolved residual: the curve carries |k| <= 6 modes
        let nvals: Vec<f64> = (0..gridn.n_theta)
            .map(|k| neumann_interp(&slopes, &b.slopes_tilde, cfg_n.epsilon, rb[k], k))
            .collect();
        let n = nvals.len();
        let mut resid = 0.0f64;
        for k in 0..n {
            let mut acc = 0.0;
            for m in 0..=6usize {
                let mut re = 0.0; let mut im = 0.0;
                for (kk, &v) in nvals.iter().enumerate() {
                    let th = std::f64::consts::TAU * (m * kk) as f64 / n as f64;
                    re += v * th.cos(); im -= v * th.sin();
                }
                re /= n as f64; im /= n as f64;
                let th = std::f64::consts::TAU * (m * k) as f64 / n as f64;
                let term = re * th.cos() - im * th.sin();
                acc += if m == 0 { term } else { 2.0 * term };
            }
            resid = resid.max(acc.abs());
        }
        worst_resid = worst_resid.max(resid);
        if i % 100 == 0 {
            println!("nstep {i:3} s={:.3e} resid={:.3e} rb=[{:.4},{:.4}]", state.s, resid,
                rb.iter().cloned().fold(f64::INFINITY,f64::min), rb.iter().cloned().fold(0.0f64,f64::max));
        }
    }
    println!("neumann 500 steps ok={ok} worst residual {:.3e} elapsed {:?} min rb {:.4}", worst_resid, t2.elapsed(),
        state.r_boundary.as_ref().unwrap().iter().cloned().fold(f64::INFINITY,f64::min));
}
