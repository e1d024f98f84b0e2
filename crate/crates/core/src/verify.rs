//! Built-in identity and oracle suite behind the `verify` CLI verb: every
//! cheap cross-formula check on canonical test sections, reported as a
//! residual table.

use num_complex::Complex64;

use crate::deriv::complex_derivatives;
use crate::euclid::{line_reconstruct, stereo, OrientedLine};
use crate::frames::{adapted_frames, f_dot_from_mean_curvature, mean_curvature};
use crate::grid::{PolarGrid, SectionField};
use crate::metric::{ambient_metric, induced_metric};
use crate::onm::{onm_normal_form, random_onm};
use crate::slopes::{compute_slopes, verify_jet_identities};
use crate::tilt::{multitime_check, tilt_v};
use crate::Result;

/// One row of the verification table.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.residual < self.tolerance
    }
}

fn max_cerr(a: &crate::grid::ComplexField, b: &crate::grid::ComplexField) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Run the full oracle suite on built-in sections.
pub fn run_suite() -> Result<Vec<CheckResult>> {
    let mut results = Vec::new();

    // derivative oracle on a mixed monomial
    {
        let grid = PolarGrid::new(33, 64, 0.5)?;
        let f = grid.sample(|xi| xi * xi * xi.conj().powu(3));
        let (dp, _) = complex_derivatives(&grid, &f)?;
        let exact = grid.sample(|xi| 2.0 * xi * xi.conj().powu(3));
        results.push(CheckResult {
            name: "derivative of xi^2 xibar^3",
            residual: max_cerr(&dp, &exact),
            tolerance: 1e-8,
        });
    }

    // jet identities on the linear twist
    {
        let grid = PolarGrid::new(65, 128, 0.5)?;
        let sec = SectionField::from_fn(grid, |xi| Complex64::new(0.0, -1.0) * xi)?;
        let (r1, r2) = verify_jet_identities(&sec)?;
        results.push(CheckResult { name: "jet identity 1 (twist)", residual: r1, tolerance: 5e-8 });
        results.push(CheckResult { name: "jet identity 2 (twist)", residual: r2, tolerance: 5e-8 });
    }

    let sheared = |grid: PolarGrid| {
        SectionField::from_fn(grid, |xi| {
            Complex64::new(0.0, -1.0) * xi + 0.05 * xi.conj().powu(2)
                + Complex64::new(0.01, -0.02) * xi * xi.conj()
        })
    };

    // metric inverse
    {
        let grid = PolarGrid::new(33, 64, 0.4)?;
        let sec = sheared(grid.clone())?;
        let slopes = compute_slopes(&sec)?;
        let metric = induced_metric(&slopes, 1e-9, true)?;
        let mut worst = 0.0f64;
        for j in 0..grid.n_r {
            for k in 0..grid.n_theta {
                let a = metric.g_xixi[[j, k]];
                let b = Complex64::new(metric.g_mixed[[j, k]], 0.0);
                let ia = metric.ginv_xixi[[j, k]];
                let ib = Complex64::new(metric.ginv_mixed[[j, k]], 0.0);
                worst = worst
                    .max((a * ia + b * ib - 1.0).norm())
                    .max((a * ib + b * ia.conj()).norm());
            }
        }
        results.push(CheckResult { name: "g * g^-1 = I", residual: worst, tolerance: 1e-12 });
    }

    // holomorphic graphs are minimal
    {
        let grid = PolarGrid::new(65, 128, 0.4)?;
        let sec = SectionField::from_fn(grid, |xi| {
            Complex64::new(0.0, -1.0) * xi + 0.1 * xi * xi
        })?;
        let h = mean_curvature(&sec, 1e-9)?;
        let worst = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
        results.push(CheckResult { name: "holomorphic => H = 0", residual: worst, tolerance: 1e-8 });
    }

    // dual flow formulas
    {
        let grid = PolarGrid::new(65, 128, 0.3)?;
        let sec = sheared(grid)?;
        let direct = crate::flow::flow_rhs(&sec, 1e-9)?;
        let slopes = compute_slopes(&sec)?;
        let h = mean_curvature(&sec, 1e-9)?;
        let via_h = f_dot_from_mean_curvature(&slopes, &h);
        let rough = crate::flow::flow_rhs_rough(&sec, 1e-9)?;
        results.push(CheckResult {
            name: "flow eq vs fdot1+meanc",
            residual: max_cerr(&direct, &via_h),
            tolerance: 1e-6,
        });
        results.push(CheckResult {
            name: "flow eq vs rough Laplacian",
            residual: max_cerr(&direct, &rough),
            tolerance: 1e-6,
        });
    }

    // frame orthonormality
    {
        let grid = PolarGrid::new(33, 64, 0.4)?;
        let sec = SectionField::from_fn(grid.clone(), |xi| {
            Complex64::new(0.0, -1.0) * xi + 0.1 * xi.conj() + 0.02 * xi.conj().powu(2)
        })?;
        let frames = adapted_frames(&sec, 1e-9)?;
        let target = [1.0, 1.0, -1.0, -1.0];
        let mut worst = 0.0f64;
        for j in 0..grid.n_r {
            for k in (0..grid.n_theta).step_by(5) {
                for a in 0..4 {
                    for b in 0..4 {
                        let g = ambient_metric(&frames.vector(a, j, k), &frames.vector(b, j, k));
                        let expect = if a == b { target[a] } else { 0.0 };
                        worst = worst.max((g - expect).abs());
                    }
                }
            }
        }
        results.push(CheckResult { name: "adapted frame orthonormality", residual: worst, tolerance: 1e-10 });
    }

    // Stokes on a generic section
    {
        let grid = PolarGrid::new(65, 128, 0.5)?;
        let sec = sheared(grid)?;
        let (_, omega, theta) = crate::area::area_and_symplectic(&sec, crate::area::Region::FullDisc)?;
        results.push(CheckResult {
            name: "Stokes: int Omega vs oint Theta",
            residual: (omega - theta).abs(),
            tolerance: 1e-6,
        });
    }

    // tilt closed form at the origin
    {
        let grid = PolarGrid::new(33, 64, 0.5)?;
        let sec = SectionField::from_fn(grid, |xi| Complex64::new(0.0, -1.0) * xi)?;
        let tilt = tilt_v(&sec, 0, 0, 2.0, 1e-9)?;
        let residual = (tilt.v_matrix[0][0] + 1.5)
            .abs()
            .max((tilt.v_matrix[0][1] + 1.5).abs())
            .max((tilt.v_matrix[1][1] + 1.5).abs())
            .max((tilt.v_matrix[1][0] - 1.5).abs());
        results.push(CheckResult { name: "tilt closed form at origin", residual, tolerance: 1e-8 });
    }

    // multi-time scan
    {
        let report = multitime_check(1.0, 1.0, 2.0, 10_000, false)?;
        results.push(CheckResult {
            name: "multi-time gradients negative",
            residual: report.worst.max(0.0),
            tolerance: 1e-30,
        });
    }

    // O(3,2) normal form roundtrip
    {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let mat = random_onm(3, 2, &mut rng);
            let nf = onm_normal_form(&mat)?;
            worst = worst.max((nf.reconstruct() - &mat.entries).norm());
            let (n1, n2) = nf.d_norms();
            worst = worst.max((n1 - n2).abs());
        }
        results.push(CheckResult { name: "O(3,2) normal form roundtrip", residual: worst, tolerance: 1e-10 });
    }

    // oriented-line roundtrip
    {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut worst = 0.0f64;
        for _ in 0..500 {
            let xi = Complex64::new(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9));
            let eta = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let line = OrientedLine { xi, eta };
            let (p, n) = line_reconstruct(&line);
            let back = OrientedLine::through(stereo(n)?, Complex64::new(p.x, p.y), p.z);
            worst = worst.max((back.eta - eta).norm()).max((back.xi - xi).norm());
        }
        results.push(CheckResult { name: "oriented line roundtrip", residual: worst, tolerance: 1e-10 });
    }

    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_is_green() {
        let results = run_suite().unwrap();
        for r in &results {
            assert!(r.passed(), "{}: residual {} >= tol {}", r.name, r.residual, r.tolerance);
        }
        assert!(results.len() >= 10);
    }
}
