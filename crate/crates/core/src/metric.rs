//! The neutral Kähler structure `(𝕁, Ω, 𝔾)` on TS² and the metric induced on
//! graphs of sections.
//!
//! Induced metric in `(ξ, ξ̄)` components:
//!
//! ```text
//! g     = 2/(1+ξξ̄)² [[ iσ, −λ ], [ −λ, −iσ̄ ]]
//! g⁻¹   = (1+ξξ̄)²/(2(λ²−σσ̄)) [[ iσ̄, −λ ], [ −λ, −iσ ]]
//! ```
//!
//! Two determinant conventions are carried side by side: `det_matrix` is the
//! literal determinant of the component matrix above (the square of the
//! conformal prefactor appears), while `det_paper` is the first-power
//! expression `2(1+ξξ̄)^{−2}(λ²−σσ̄)`. They differ by the exact factor
//! `−2(1+ξξ̄)^{−2}`; both are reported and the relation is asserted in tests
//! rather than resolved silently.
//!
//! Ambient evaluation: the frame formulas and the multi-time gradients in the
//! source material are normalised with respect to *twice* the metric whose
//! pullback gives the matrix above. [`ambient_metric`] therefore evaluates at
//! that frame scale (`𝔾_frame = 2·𝔾_graph`); `pullback` tests pin the factor.

use num_complex::Complex64;

use crate::error::NkError;
use crate::grid::{PolarGrid, RealField};
use crate::slopes::SlopeField;
use crate::Result;

/// A real tangent vector to TS² at `base`, stored through its `(1,0)`
/// components on `(∂/∂ξ, ∂/∂η)`; the conjugate components are implied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbientTangent {
    pub base_xi: Complex64,
    pub base_eta: Complex64,
    /// coefficient on ∂/∂ξ
    pub d_xi: Complex64,
    /// coefficient on ∂/∂η
    pub d_eta: Complex64,
}

impl AmbientTangent {
    pub fn new(base_xi: Complex64, base_eta: Complex64, d_xi: Complex64, d_eta: Complex64) -> Self {
        Self { base_xi, base_eta, d_xi, d_eta }
    }
}

/// Neutral metric `𝔾` evaluated on two real tangent vectors at a common base
/// point, in the frame normalisation (twice the graph-pullback scale).
pub fn ambient_metric(x: &AmbientTangent, y: &AmbientTangent) -> f64 {
    let xi = x.base_xi;
    let eta = x.base_eta;
    let w = 1.0 + xi.norm_sqr();
    let (ax, bx) = (x.d_xi, x.d_eta);
    let (ay, by) = (y.d_xi, y.d_eta);
    let hermitian = bx.conj() * ay + by.conj() * ax;
    let mixed = (2.0 * xi.conj() * eta / w) * (ax * ay.conj() + ay * ax.conj());
    4.0 / (w * w) * (hermitian + mixed).im
}

/// Symplectic form `Ω` on two real tangent vectors (graph-pullback scale;
/// exact exterior derivative of the primitive `Θ` used for Stokes checks).
pub fn ambient_symplectic(x: &AmbientTangent, y: &AmbientTangent) -> f64 {
    let xi = x.base_xi;
    let eta = x.base_eta;
    let w = 1.0 + xi.norm_sqr();
    let (ax, bx) = (x.d_xi, x.d_eta);
    let (ay, by) = (y.d_xi, y.d_eta);
    let wedge = bx * ay.conj() - by * ax.conj();
    let mixed = (2.0 * xi.conj() * eta / w) * (ax * ay.conj() - ay * ax.conj());
    4.0 / (w * w) * (wedge - mixed).re
}

/// Complex structure `𝕁` (multiplication by `i` on `(1,0)` components).
pub fn ambient_j(x: &AmbientTangent) -> AmbientTangent {
    AmbientTangent {
        d_xi: Complex64::i() * x.d_xi,
        d_eta: Complex64::i() * x.d_eta,
        ..*x
    }
}

/// Induced metric data on the graph of a section.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub grid: PolarGrid,
    /// `g_ξξ` component (the `ξ̄ξ̄` component is its conjugate)
    pub g_xixi: crate::grid::ComplexField,
    /// `g_ξξ̄ = g_ξ̄ξ` component (real)
    pub g_mixed: RealField,
    /// `g⁻¹` components, same layout
    pub ginv_xixi: crate::grid::ComplexField,
    pub ginv_mixed: RealField,
    /// determinant of the component matrix (real by structure)
    pub det_matrix: RealField,
    /// the first-power convention `2(1+ξξ̄)^{−2}(λ²−σσ̄)`
    pub det_paper: RealField,
    /// positivity margin `λ² − |σ|²`
    pub positivity_margin: RealField,
}

/// Build the induced metric from slopes.
///
/// With `require_invertible`, errors if `|λ²−|σ|²| < delta_pos` anywhere;
/// otherwise degenerate nodes carry non-finite inverse entries and callers
/// must consult `positivity_margin`.
pub fn induced_metric(
    slopes: &SlopeField,
    delta_pos: f64,
    require_invertible: bool,
) -> Result<MetricField> {
    let grid = slopes.grid.clone();
    let margin = slopes.margin();
    if require_invertible {
        let worst = margin.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
        if worst < delta_pos {
            return Err(NkError::DegenerateMetric { min_margin: worst, floor: delta_pos });
        }
    }
    let mut g_xixi = slopes.sigma.clone();
    let mut g_mixed = slopes.lambda.clone();
    let mut ginv_xixi = slopes.sigma.clone();
    let mut ginv_mixed = slopes.lambda.clone();
    let mut det_matrix = margin.clone();
    let mut det_paper = margin.clone();
    for j in 0..grid.n_r {
        for k in 0..grid.n_theta {
            let w = 1.0 + grid.xi(j, k).norm_sqr();
            let c = 2.0 / (w * w);
            let s = slopes.sigma[[j, k]];
            let l = slopes.lambda[[j, k]];
            let delta = margin[[j, k]];
            g_xixi[[j, k]] = Complex64::i() * s * c;
            g_mixed[[j, k]] = -l * c;
            let ci = w * w / (2.0 * delta);
            ginv_xixi[[j, k]] = Complex64::i() * s.conj() * ci;
            ginv_mixed[[j, k]] = -l * ci;
            det_matrix[[j, k]] = -c * c * delta;
            det_paper[[j, k]] = c * delta;
        }
    }
    Ok(MetricField {
        grid,
        g_xixi,
        g_mixed,
        ginv_xixi,
        ginv_mixed,
        det_matrix,
        det_paper,
        positivity_margin: margin,
    })
}

impl MetricField {
    /// `‖g⁻¹‖` (Frobenius norm of the component matrix) at a node.
    pub fn ginv_norm(&self, j: usize, k: usize) -> f64 {
        let a = self.ginv_xixi[[j, k]].norm_sqr();
        let b = self.ginv_mixed[[j, k]];
        (2.0 * a + 2.0 * b * b).sqrt()
    }

    pub fn max_ginv_norm(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.grid.n_r {
            for k in 0..self.grid.n_theta {
                worst = worst.max(self.ginv_norm(j, k));
            }
        }
        worst
    }
}

/// Squared `g`-norm of the real covector `X = a dξ + ā dξ̄` at a node.
pub fn covector_norm_sq(slopes: &SlopeField, j: usize, k: usize, a: Complex64) -> f64 {
    let w = 1.0 + slopes.grid.xi(j, k).norm_sqr();
    let l = slopes.lambda[[j, k]];
    let s = slopes.sigma[[j, k]];
    let delta = l * l - s.norm_sqr();
    (w * w / delta) * (-l * a.norm_sqr() - (s.conj() * a * a).im)
}

/// The sharp flat-norm sandwich factors for covectors at a node:
/// `lower ≤ ‖X‖²_g / |X|² ≤ upper` with `|X|² = |a|²`.
pub fn metric_sandwich_factors(slopes: &SlopeField, j: usize, k: usize) -> (f64, f64) {
    let w = 1.0 + slopes.grid.xi(j, k).norm_sqr();
    let l = slopes.lambda[[j, k]];
    let s = slopes.sigma[[j, k]].norm();
    let delta = l * l - s * s;
    ((w * w) * (-l - s) / delta, (w * w) * (-l + s) / delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SectionField;
    use crate::slopes::compute_slopes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn positive_test_section(grid: PolarGrid) -> SectionField {
        SectionField::from_fn(grid, |xi| {
            Complex64::new(0.0, -1.0) * xi + 0.08 * xi.conj().powu(2)
                + Complex64::new(0.02, 0.01) * xi * xi.conj()
        })
        .unwrap()
    }

    #[test]
    fn lagrangian_data_is_lorentz() {
        // λ = 0, σ ≠ 0 → margin < 0
        let grid = PolarGrid::new(17, 32, 0.5).unwrap();
        let sec = SectionField::from_fn(grid, |xi| xi.conj().powu(2)).unwrap();
        let slopes = compute_slopes(&sec).unwrap();
        let metric = induced_metric(&slopes, 1e-6, false).unwrap();
        for j in 1..slopes.grid.n_r {
            for k in 0..slopes.grid.n_theta {
                assert!(metric.positivity_margin[[j, k]] < 0.0);
            }
        }
    }

    #[test]
    fn diagonal_twist_node_is_positive() {
        // λ = −1, σ = 0 → margin 1, metric positive definite
        let grid = PolarGrid::new(33, 64, 0.5).unwrap();
        let sec = SectionField::from_fn(grid.clone(), |xi| Complex64::new(0.0, -1.0) * xi).unwrap();
        let slopes = compute_slopes(&sec).unwrap();
        let metric = induced_metric(&slopes, 1e-9, true).unwrap();
        assert!((metric.positivity_margin[[0, 0]] - 1.0).abs() < 1e-10);
        // positive definiteness of the real 2×2: trace = 4 g_mixed > 0, det > 0
        for j in 0..grid.n_r {
            for k in 0..grid.n_theta {
                assert!(metric.g_mixed[[j, k]] > 0.0);
                let det_real = -4.0 * metric.det_matrix[[j, k]];
                assert!(det_real > 0.0);
            }
        }
    }

    #[test]
    fn g_times_ginv_is_identity() {
        let grid = PolarGrid::new(17, 32, 0.5).unwrap();
        let sec = positive_test_section(grid.clone());
        let slopes = compute_slopes(&sec).unwrap();
        let metric = induced_metric(&slopes, 1e-9, true).unwrap();
        let mut worst = 0.0f64;
        for j in 0..grid.n_r {
            for k in 0..grid.n_theta {
                let a = metric.g_xixi[[j, k]];
                let b = Complex64::new(metric.g_mixed[[j, k]], 0.0);
                let ia = metric.ginv_xixi[[j, k]];
                let ib = Complex64::new(metric.ginv_mixed[[j, k]], 0.0);
                // rows of g times columns of g⁻¹ (matrix [[a, b],[b, ā]]·[[ia, ib],[ib, īa]])
                let e11 = a * ia + b * ib;
                let e12 = a * ib + b * ia.conj();
                let e21 = b * ia + a.conj() * ib;
                let e22 = b * ib + a.conj() * ia.conj();
                worst = worst
                    .max((e11 - 1.0).norm())
                    .max(e12.norm())
                    .max(e21.norm())
                    .max((e22 - 1.0).norm());
            }
        }
        assert!(worst < 1e-12, "‖g·g⁻¹ − I‖ = {worst}");
    }

    #[test]
    fn determinant_conventions_differ_by_conformal_factor() {
        let grid = PolarGrid::new(17, 32, 0.5).unwrap();
        let sec = positive_test_section(grid.clone());
        let slopes = compute_slopes(&sec).unwrap();
        let metric = induced_metric(&slopes, 1e-9, true).unwrap();
        for j in 0..grid.n_r {
            for k in 0..grid.n_theta {
                let w = 1.0 + grid.xi(j, k).norm_sqr();
                let rel = metric.det_matrix[[j, k]] + 2.0 / (w * w) * metric.det_paper[[j, k]];
                assert!(rel.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_norm_sandwich_holds_sharply() {
        // Lemma bounds on 1000 random covectors at positive nodes
        let grid = PolarGrid::new(17, 32, 0.5).unwrap();
        let sec = positive_test_section(grid.clone());
        let slopes = compute_slopes(&sec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let j = rng.gen_range(0..grid.n_r);
            let k = rng.gen_range(0..grid.n_theta);
            let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if a.norm() < 1e-3 {
                continue;
            }
            let ratio = covector_norm_sq(&slopes, j, k, a) / a.norm_sqr();
            let (lo, hi) = metric_sandwich_factors(&slopes, j, k);
            assert!(
                ratio >= lo - 1e-10 && ratio <= hi + 1e-10,
                "ratio {ratio} outside [{lo}, {hi}]"
            );
        }
    }

    #[test]
    fn ambient_pullback_is_twice_graph_metric() {
        // frame-scale 𝔾 restricted to graph tangents = 2 × induced matrix
        let grid = PolarGrid::new(17, 32, 0.5).unwrap();
        let sec = positive_test_section(grid.clone());
        let slopes = compute_slopes(&sec).unwrap();
        let metric = induced_metric(&slopes, 1e-9, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let j = rng.gen_range(0..grid.n_r);
            let k = rng.gen_range(0..grid.n_theta);
            let xi = grid.xi(j, k);
            let eta = sec.f[[j, k]];
            let tangent = |alpha: Complex64| {
                AmbientTangent::new(
                    xi,
                    eta,
                    alpha,
                    slopes.df[[j, k]] * alpha + slopes.dbf[[j, k]] * alpha.conj(),
                )
            };
            let alpha = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let beta = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let ambient = ambient_metric(&tangent(alpha), &tangent(beta));
            let a = metric.g_xixi[[j, k]];
            let b = metric.g_mixed[[j, k]];
            // g(X,Y) = g_ξξ αβ + g_ξξ̄(αβ̄+ᾱβ) + conj(g_ξξ) ᾱβ̄ = 2Re(g_ξξ αβ) + 2 g_ξξ̄ Re(αβ̄)
            let graph = 2.0 * (a * alpha * beta).re + 2.0 * b * (alpha * beta.conj()).re;
            assert!(
                (ambient - 2.0 * graph).abs() < 1e-11,
                "ambient {ambient} vs 2·graph {}",
                2.0 * graph
            );
        }
    }

    #[test]
    fn degenerate_metric_refused_when_invertibility_required() {
        let grid = PolarGrid::new(17, 32, 0.5).unwrap();
        let sec = SectionField::from_fn(grid, |xi| xi.conj().powu(2)).unwrap(); // Lagrangian: margin ≤ 0, zero at origin
        let slopes = compute_slopes(&sec).unwrap();
        assert!(matches!(
            induced_metric(&slopes, 1e-6, true),
            Err(NkError::DegenerateMetric { .. })
        ));
    }
}
