//! Polar grid over a disc in the ξ-plane and fields living on it.
//!
//! Nodes sit at `r_j = j·R/(n_r−1)`, `θ_k = 2πk/n_θ`. The row `j = 0` is the
//! single origin point; fields keep all angular samples of that row equal.
//! Angular resolution must be even for spectral differentiation.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::NkError;
use crate::Result;

/// Complex field sampled on a [`PolarGrid`], shape `(n_r, n_theta)`.
pub type ComplexField = Array2<Complex64>;
/// Real field sampled on a [`PolarGrid`], shape `(n_r, n_theta)`.
pub type RealField = Array2<f64>;

/// Uniform polar grid over the disc `|ξ| ≤ R`, `0 < R < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    pub n_r: usize,
    pub n_theta: usize,
    pub r_outer: f64,
}

impl PolarGrid {
    pub fn new(n_r: usize, n_theta: usize, r_outer: f64) -> Result<Self> {
        if n_r < 8 {
            return Err(NkError::FormatError {
                what: "grid",
                msg: format!("n_r must be >= 8, got {n_r}"),
            });
        }
        if n_theta < 16 || n_theta % 2 != 0 {
            return Err(NkError::FormatError {
                what: "grid",
                msg: format!("n_theta must be even and >= 16, got {n_theta}"),
            });
        }
        if !(r_outer > 0.0 && r_outer < 1.0) {
            return Err(NkError::FormatError {
                what: "grid",
                msg: format!("outer radius must lie in (0, 1), got {r_outer}"),
            });
        }
        Ok(Self { n_r, n_theta, r_outer })
    }

    /// Radial spacing `Δr`.
    pub fn dr(&self) -> f64 {
        self.r_outer / (self.n_r - 1) as f64
    }

    /// Angular spacing `Δθ`.
    pub fn dtheta(&self) -> f64 {
        std::f64::consts::TAU / self.n_theta as f64
    }

    pub fn r(&self, j: usize) -> f64 {
        j as f64 * self.dr()
    }

    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * self.dtheta()
    }

    /// Node coordinate `ξ = r e^{iθ}`.
    pub fn xi(&self, j: usize, k: usize) -> Complex64 {
        Complex64::from_polar(self.r(j), self.theta(k))
    }

    /// All node coordinates as a field.
    pub fn xi_field(&self) -> ComplexField {
        let mut f = Array2::zeros((self.n_r, self.n_theta));
        for j in 0..self.n_r {
            for k in 0..self.n_theta {
                f[[j, k]] = self.xi(j, k);
            }
        }
        f
    }

    /// Evaluate a closure of `ξ` on every node.
    pub fn sample(&self, f: impl Fn(Complex64) -> Complex64) -> ComplexField {
        let mut out = Array2::zeros((self.n_r, self.n_theta));
        for j in 0..self.n_r {
            for k in 0..self.n_theta {
                out[[j, k]] = f(self.xi(j, k));
            }
        }
        out
    }

    pub fn sample_real(&self, f: impl Fn(Complex64) -> f64) -> RealField {
        let mut out = Array2::zeros((self.n_r, self.n_theta));
        for j in 0..self.n_r {
            for k in 0..self.n_theta {
                out[[j, k]] = f(self.xi(j, k));
            }
        }
        out
    }

    /// Integrate a real field over the disc with measure `r dr dθ`.
    ///
    /// Trapezoid in θ (spectrally accurate for periodic data), composite
    /// Simpson in r when the interval count is even, trapezoid tail
    /// otherwise. The integrand is taken as `f·r`, which vanishes at the
    /// origin row.
    pub fn integrate_disc(&self, f: &RealField) -> f64 {
        self.integrate_rings(f, self.n_r - 1)
    }

    /// Integrate over the sub-disc `r ≤ r_j_max` (node-aligned region).
    pub fn integrate_rings(&self, f: &RealField, j_max: usize) -> f64 {
        let j_max = j_max.min(self.n_r - 1);
        let dth = self.dtheta();
        // Angular average per ring, times 2π.
        let mut ring = vec![0.0; j_max + 1];
        for (j, rv) in ring.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in 0..self.n_theta {
                s += f[[j, k]];
            }
            *rv = s * dth * self.r(j);
        }
        radial_quadrature(&ring, self.dr())
    }

    /// Integrate a function over the ring `r = r_j`: `∮ g(k) dθ`.
    pub fn integrate_ring_theta(&self, g: impl Fn(usize) -> f64) -> f64 {
        let dth = self.dtheta();
        (0..self.n_theta).map(|k| g(k) * dth).sum()
    }
}

/// Composite 1-d quadrature on uniformly spaced samples starting at 0.
///
/// Simpson on the even-interval prefix, trapezoid on a final odd interval.
fn radial_quadrature(vals: &[f64], h: f64) -> f64 {
    let n = vals.len();
    if n < 2 {
        return 0.0;
    }
    let intervals = n - 1;
    let simpson_intervals = if intervals % 2 == 0 { intervals } else { intervals - 1 };
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 <= simpson_intervals {
        total += h / 3.0 * (vals[i] + 4.0 * vals[i + 1] + vals[i + 2]);
        i += 2;
    }
    if simpson_intervals < intervals {
        total += h / 2.0 * (vals[n - 2] + vals[n - 1]);
    }
    total
}

/// A surface in TS² given as the graph of a section: `ξ ↦ (ξ, η = F(ξ, ξ̄))`.
#[derive(Debug, Clone)]
pub struct SectionField {
    pub grid: PolarGrid,
    pub f: ComplexField,
}

impl SectionField {
    /// Wrap a field, checking finiteness and single-valuedness at the origin.
    pub fn new(grid: PolarGrid, f: ComplexField) -> Result<Self> {
        if f.dim() != (grid.n_r, grid.n_theta) {
            return Err(NkError::DimensionMismatch {
                expected: grid.n_r * grid.n_theta,
                got: f.len(),
            });
        }
        if f.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NkError::NonFiniteInput);
        }
        let origin = f[[0, 0]];
        if f.row(0).iter().any(|z| (z - origin).norm() > 1e-13 * (1.0 + origin.norm())) {
            return Err(NkError::FormatError {
                what: "section",
                msg: "origin row is not single-valued".into(),
            });
        }
        Ok(Self { grid, f })
    }

    /// Sample a closed-form section `F(ξ)` on the grid.
    pub fn from_fn(grid: PolarGrid, f: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        let field = grid.sample(f);
        Self::new(grid, field)
    }

    /// The zero section.
    pub fn zero(grid: PolarGrid) -> Self {
        let f = Array2::zeros((grid.n_r, grid.n_theta));
        Self { grid, f }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(PolarGrid::new(4, 64, 0.5).is_err());
        assert!(PolarGrid::new(33, 63, 0.5).is_err());
        assert!(PolarGrid::new(33, 64, 1.5).is_err());
        assert!(PolarGrid::new(33, 64, 0.5).is_ok());
    }

    #[test]
    fn disc_integral_matches_closed_forms() {
        let grid = PolarGrid::new(65, 64, 0.8).unwrap();
        let one = grid.sample_real(|_| 1.0);
        let area = grid.integrate_disc(&one);
        let exact = std::f64::consts::PI * 0.8 * 0.8;
        assert!((area - exact).abs() < 1e-12, "area err {}", (area - exact).abs());

        let r2 = grid.sample_real(|xi| xi.norm_sqr());
        let int = grid.integrate_disc(&r2);
        let exact = std::f64::consts::PI / 2.0 * 0.8f64.powi(4);
        assert!((int - exact).abs() < 1e-12);
    }

    #[test]
    fn section_rejects_multivalued_origin() {
        let grid = PolarGrid::new(9, 16, 0.5).unwrap();
        let mut f: ComplexField = Array2::zeros((9, 16));
        f[[0, 3]] = Complex64::new(1.0, 0.0);
        assert!(SectionField::new(grid, f).is_err());
    }
}
