//! Area of a positive graph, the symplectic integral `∬Ω` and its boundary
//! primitive `∮Θ` with `Θ = 2(η dξ̄ + η̄ dξ)/(1+ξξ̄)²`.
//!
//! The three return values feed the a priori area bound `Area ≤ πC₀` and a
//! discrete Stokes check `∬Ω = ∮Θ` (the primitive satisfies `dΘ = Ω`
//! identically, so the difference is pure quadrature error).

use num_complex::Complex64;

use crate::deriv::complex_derivatives;
use crate::error::NkError;
use crate::grid::SectionField;
use crate::metric::{ambient_symplectic, AmbientTangent};
use crate::slopes::compute_slopes;
use crate::Result;

/// Integration region: the full disc or the node-aligned sub-disc `r ≤ r_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    FullDisc,
    SubDisc { j_max: usize },
}

impl Region {
    fn ring(self, n_r: usize) -> usize {
        match self {
            Region::FullDisc => n_r - 1,
            Region::SubDisc { j_max } => j_max.min(n_r - 1),
        }
    }
}

/// `(area_G, ∬Ω, ∮Θ)` over the region.
///
/// `area_G = ∬ √(λ²−σσ̄) · dA/(1+ξξ̄)²` with `dA` the Riemannian area measure
/// of the graph (the conformal prefactor of the induced metric squared);
/// errors with `DegenerateMetric` if the margin is negative anywhere in the
/// region.
pub fn area_and_symplectic(section: &SectionField, region: Region) -> Result<(f64, f64, f64)> {
    let grid = &section.grid;
    let slopes = compute_slopes(section)?;
    let j_max = region.ring(grid.n_r);

    let margin = slopes.margin();
    let mut worst = f64::INFINITY;
    for j in 0..=j_max {
        for k in 0..grid.n_theta {
            worst = worst.min(margin[[j, k]]);
        }
    }
    if worst < 0.0 {
        return Err(NkError::DegenerateMetric { min_margin: worst, floor: 0.0 });
    }

    // √det of the real induced metric: 4√(λ²−|σ|²)/(1+ξξ̄)²
    let mut density = margin.clone();
    for j in 0..grid.n_r {
        for k in 0..grid.n_theta {
            let w = 1.0 + grid.xi(j, k).norm_sqr();
            density[[j, k]] = 4.0 * margin[[j, k]].max(0.0).sqrt() / (w * w);
        }
    }
    let area = grid.integrate_rings(&density, j_max);

    // Ω pulled back onto the graph via the coordinate tangents
    // f_x = (1, F_x), f_y = (i, F_y)
    let (df, dbf) = complex_derivatives(grid, &section.f)?;
    let mut omega_density = margin.clone();
    for j in 0..grid.n_r {
        for k in 0..grid.n_theta {
            let xi = grid.xi(j, k);
            let eta = section.f[[j, k]];
            let fx = df[[j, k]] + dbf[[j, k]];
            let fy = Complex64::i() * (df[[j, k]] - dbf[[j, k]]);
            let tx = AmbientTangent::new(xi, eta, Complex64::new(1.0, 0.0), fx);
            let ty = AmbientTangent::new(xi, eta, Complex64::i(), fy);
            omega_density[[j, k]] = ambient_symplectic(&tx, &ty);
        }
    }
    let omega = grid.integrate_rings(&omega_density, j_max);

    let theta = boundary_theta_integral(section, j_max);
    Ok((area, omega, theta))
}

/// `∮Θ` along the ring `r = r_j`, counterclockwise.
pub fn boundary_theta_integral(section: &SectionField, j: usize) -> f64 {
    let grid = &section.grid;
    let w = 1.0 + grid.r(j) * grid.r(j);
    grid.integrate_ring_theta(|k| {
        let xi = grid.xi(j, k);
        let eta = section.f[[j, k]];
        // Θ(∂_θ) = −4 Im(η̄ ξ)/(1+r²)²
        -4.0 * (eta.conj() * xi).im / (w * w)
    })
}
