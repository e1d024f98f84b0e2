//! Complex slopes of a section: shear `σ = −∂F̄` and
//! `ρ = θ + iλ = (1+ξξ̄)² ∂(F(1+ξξ̄)^{−2})`.
//!
//! `λ = Im ρ` is the twist, `θ = Re ρ` the remaining slope. A section is
//! Lagrangian iff `λ = 0` and holomorphic iff `σ = 0`. The two 3-jet
//! identities tying `σ`, `ρ` and `F` together are exposed as residuals so
//! discretisation error can be measured directly.

use num_complex::Complex64;

use crate::deriv::complex_derivatives;
use crate::grid::{ComplexField, PolarGrid, RealField, SectionField};
use crate::Result;

/// Slopes derived from a [`SectionField`]; drives all of the geometry.
#[derive(Debug, Clone)]
pub struct SlopeField {
    pub grid: PolarGrid,
    /// shear `σ = −∂F̄`
    pub sigma: ComplexField,
    /// `ρ = θ + iλ`
    pub rho: ComplexField,
    /// twist `λ = Im ρ`
    pub lambda: RealField,
    /// `θ = Re ρ`
    pub theta_slope: RealField,
    /// `∂F` (kept for frame and flow work)
    pub df: ComplexField,
    /// `∂̄F`
    pub dbf: ComplexField,
}

/// Compute the slope field of a section.
pub fn compute_slopes(section: &SectionField) -> Result<SlopeField> {
    let grid = section.grid.clone();
    let (df, dbf) = complex_derivatives(&grid, &section.f)?;
    // σ = −∂F̄ = −conj(∂̄F)
    let sigma = dbf.mapv(|z| -z.conj());
    // ρ = (1+ξξ̄)²∂(F(1+ξξ̄)^{−2}) = ∂F − 2ξ̄F/(1+ξξ̄)
    let mut rho = df.clone();
    for j in 0..grid.n_r {
        for k in 0..grid.n_theta {
            let xi = grid.xi(j, k);
            let w = 1.0 + xi.norm_sqr();
            rho[[j, k]] -= 2.0 * xi.conj() * section.f[[j, k]] / w;
        }
    }
    let lambda = rho.mapv(|z| z.im);
    let theta_slope = rho.mapv(|z| z.re);
    Ok(SlopeField { grid, sigma, rho, lambda, theta_slope, df, dbf })
}

impl SlopeField {
    /// Positivity margin `λ² − |σ|²` per node.
    pub fn margin(&self) -> RealField {
        let mut m = self.lambda.mapv(|l| l * l);
        for (mv, s) in m.iter_mut().zip(self.sigma.iter()) {
            *mv -= s.norm_sqr();
        }
        m
    }

    pub fn min_margin(&self) -> f64 {
        self.margin().iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }

    pub fn max_abs_sigma(&self) -> f64 {
        self.sigma.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_lambda(&self) -> f64 {
        self.lambda.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    }
}

/// Max-norm residuals of the two jet identities, evaluated with discrete
/// derivatives. Residuals are reported, never thrown.
pub fn verify_jet_identities(section: &SectionField) -> Result<(f64, f64)> {
    let grid = &section.grid;
    let slopes = compute_slopes(section)?;

    // shared inner field (1+ξξ̄)² ∂[ σ̄ (1+ξξ̄)^{−2} ]
    let packed = field_map(grid, &slopes.sigma, |xi, s| {
        let w = 1.0 + xi.norm_sqr();
        s.conj() / (w * w)
    });
    let (dpacked, _) = complex_derivatives(grid, &packed)?;
    let inner = field_map(grid, &dpacked, |xi, d| {
        let w = 1.0 + xi.norm_sqr();
        w * w * d
    });

    // identity 1: −inner = ∂̄ρ + 2F/(1+ξξ̄)²
    let (_, dbrho) = complex_derivatives(grid, &slopes.rho)?;
    let mut res1 = 0.0f64;
    for j in 0..grid.n_r {
        for k in 0..grid.n_theta {
            let xi = grid.xi(j, k);
            let w = 1.0 + xi.norm_sqr();
            let rhs = dbrho[[j, k]] + 2.0 * section.f[[j, k]] / (w * w);
            res1 = res1.max((-inner[[j, k]] - rhs).norm());
        }
    }

    // identity 2: Im ∂(inner) = ∂∂̄λ + 2λ/(1+ξξ̄)²
    let (dinner, _) = complex_derivatives(grid, &inner)?;
    let lambda_c = slopes.lambda.mapv(|x| Complex64::new(x, 0.0));
    let (ddblam, _, _) = crate::deriv::second_derivatives(grid, &lambda_c)?;
    let mut res2 = 0.0f64;
    for j in 0..grid.n_r {
        for k in 0..grid.n_theta {
            let xi = grid.xi(j, k);
            let w = 1.0 + xi.norm_sqr();
            let rhs = ddblam[[j, k]].re + 2.0 * slopes.lambda[[j, k]] / (w * w);
            res2 = res2.max((dinner[[j, k]].im - rhs).abs());
        }
    }
    Ok((res1, res2))
}

pub(crate) fn field_map(
    grid: &PolarGrid,
    f: &ComplexField,
    op: impl Fn(Complex64, Complex64) -> Complex64,
) -> ComplexField {
    let mut out = f.clone();
    for j in 0..grid.n_r {
        for k in 0..grid.n_theta {
            out[[j, k]] = op(grid.xi(j, k), f[[j, k]]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_cerr(a: &ComplexField, b: &ComplexField) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn shear_of_antiholomorphic_square() {
        // F = ξ̄² → σ = −2ξ
        let grid = PolarGrid::new(17, 32, 0.5).unwrap();
        let sec = SectionField::from_fn(grid.clone(), |xi| xi.conj() * xi.conj()).unwrap();
        let slopes = compute_slopes(&sec).unwrap();
        let exact = grid.sample(|xi| -2.0 * xi);
        assert!(max_cerr(&slopes.sigma, &exact) < 1e-12);
    }

    #[test]
    fn linear_holomorphic_twist_slopes() {
        // F = −iC₀ξ, C₀ = 1 → σ = 0 and λ = −(1−ξξ̄)/(1+ξξ̄)
        let grid = PolarGrid::new(33, 64, 0.6).unwrap();
        let sec = SectionField::from_fn(grid.clone(), |xi| Complex64::new(0.0, -1.0) * xi).unwrap();
        let slopes = compute_slopes(&sec).unwrap();
        assert!(slopes.max_abs_sigma() < 1e-12);
        for j in 0..grid.n_r {
            for k in 0..grid.n_theta {
                let r2 = grid.xi(j, k).norm_sqr();
                let exact = -(1.0 - r2) / (1.0 + r2);
                assert!((slopes.lambda[[j, k]] - exact).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn constant_section_rho() {
        // F = c → σ = 0, ρ = −2cξ̄/(1+ξξ̄)   (hand-computed from ∂(1+ξξ̄)^{−2})
        let c = Complex64::new(0.3, -0.7);
        let grid = PolarGrid::new(17, 32, 0.5).unwrap();
        let sec = SectionField::from_fn(grid.clone(), |_| c).unwrap();
        let slopes = compute_slopes(&sec).unwrap();
        assert!(slopes.max_abs_sigma() < 1e-13);
        let exact = grid.sample(|xi| -2.0 * c * xi.conj() / (1.0 + xi.norm_sqr()));
        assert!(max_cerr(&slopes.rho, &exact) < 1e-12);
    }

    #[test]
    fn jet_identities_zero_section() {
        let grid = PolarGrid::new(17, 16, 0.4).unwrap();
        let sec = SectionField::zero(grid);
        let (r1, r2) = verify_jet_identities(&sec).unwrap();
        assert_eq!(r1, 0.0);
        assert_eq!(r2, 0.0);
    }

    #[test]
    fn jet_identities_twist_section() {
        // Identities hold exactly for F = −iC₀ξ; the discrete residual is
        // scheme error. Measured floor at 65×128 is ~1.6e-8, set by FFT
        // round-off pushed through three derivative stages at the outer ring
        // (the truncation part alone is ~7e-9 and converges at order 6).
        let grid = PolarGrid::new(65, 128, 0.5).unwrap();
        let sec = SectionField::from_fn(grid, |xi| Complex64::new(0.0, -1.0) * xi).unwrap();
        let (r1, r2) = verify_jet_identities(&sec).unwrap();
        assert!(r1 < 5e-8, "id1 residual {r1}");
        assert!(r2 < 5e-8, "id2 residual {r2}");
    }

    #[test]
    fn lambda_is_im_rho_exactly() {
        let grid = PolarGrid::new(17, 32, 0.5).unwrap();
        let sec = SectionField::from_fn(grid, |xi| {
            xi.conj() * xi.conj() + Complex64::new(0.0, -0.8) * xi
        })
        .unwrap();
        let slopes = compute_slopes(&sec).unwrap();
        for (r, (&l, &t)) in slopes
            .rho
            .iter()
            .zip(slopes.lambda.iter().zip(slopes.theta_slope.iter()))
        {
            assert_eq!(r.im, l);
            assert_eq!(r.re, t);
        }
    }
}
