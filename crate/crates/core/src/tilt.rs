//! The multi-time function `t = η + iC₃ξ`, its background orthonormal frame,
//! and the tilt `v` between background and adapted frames.
//!
//! On the ball `B = {C₁ξξ̄ + ηη̄ < C₂, ξξ̄ < 1}` and for `C₃² > C₂`, both
//! components of `t` have timelike gradient:
//!
//! ```text
//! 𝔾(∇̄t₁,∇̄t₁) = 𝔾(∇̄t₂,∇̄t₂) = ½(1+R²)(C₃R² − 2R(A₂cos ϑ − A₁sin ϑ) − C₃)
//! ```
//!
//! with `ξ = Re^{iϑ}`, `α = A₁+iA₂ = t`. The tilt matrix is
//! `V_{αβ} = −𝔾(ν_α, T_β)` with `ν` from the adapted frame and `T` from the
//! background frame, and `v² = ΣV_{αβ}²` exactly.

use num_complex::Complex64;

use crate::error::NkError;
use crate::frames::{adapted_frames_from_jet, jet_data};
use crate::grid::SectionField;
use crate::metric::{ambient_metric, AmbientTangent};
use crate::Result;

/// `𝔾(∇̄t_i, ∇̄t_i)` at `(ξ, η)` by the closed form.
pub fn multitime_gradient_sq(xi: Complex64, eta: Complex64, c3: f64) -> f64 {
    let r = xi.norm();
    let th = if r > 0.0 { xi.arg() } else { 0.0 };
    let alpha = eta + Complex64::i() * c3 * xi;
    let (a1, a2) = (alpha.re, alpha.im);
    0.5 * (1.0 + r * r) * (c3 * r * r - 2.0 * r * (a2 * th.cos() - a1 * th.sin()) - c3)
}

/// Background orthonormal frame `{e₍₁₎, e₍₂₎, T₍₁₎, T₍₂₎}` associated with the
/// multi-time function at `(ξ, η)`.
///
/// Errors with `BadConstants` if the gradient is not timelike there (the
/// point lies outside the multi-time ball).
pub fn background_frame(xi: Complex64, eta: Complex64, c3: f64) -> Result<[AmbientTangent; 4]> {
    let psi_m2 = -multitime_gradient_sq(xi, eta, c3);
    if psi_m2 <= 0.0 {
        return Err(NkError::BadConstants);
    }
    let psi = psi_m2.powf(-0.5);
    let r2 = xi.norm_sqr();
    let w2 = (1.0 + r2) * (1.0 + r2);
    let i = Complex64::i();
    let ce = 0.25 * w2 * psi; // ½(1+R²)²ψ · ½ from Re
    let ct = 0.25 * psi;
    let t_eta = 4.0 * psi_m2 - c3 * w2;
    let v = |a: Complex64, b: Complex64| AmbientTangent::new(xi, eta, a, b);
    Ok([
        v(ce * i, Complex64::new(ce * c3, 0.0)),
        v(Complex64::new(ce, 0.0), -i * ce * c3),
        v(-i * ct * w2, Complex64::new(ct * t_eta, 0.0)),
        v(Complex64::new(ct * w2, 0.0), i * ct * t_eta),
    ])
}

/// Tilt data at one node of a section.
#[derive(Debug, Clone, Copy)]
pub struct TiltValue {
    /// `V_{αβ} = −𝔾(ν_α, T_β)`, rows over `ν`, columns over `T`
    pub v_matrix: [[f64; 2]; 2],
    /// `v = √(Σ V_{αβ}²)`
    pub v: f64,
}

/// Compute the tilt at node `(j, k)` of a positive section.
pub fn tilt_v(
    section: &SectionField,
    j: usize,
    k: usize,
    c3: f64,
    delta_pos: f64,
) -> Result<TiltValue> {
    let jd = jet_data(section)?;
    let frames = adapted_frames_from_jet(section, &jd, delta_pos)?;
    tilt_at(section, &frames, j, k, c3)
}

/// Tilt at a node from precomputed frames.
///
/// The contraction is normalised so that the origin closed forms of the
/// gradient-estimate proof are reproduced verbatim: this corresponds to
/// graph-scale-unit frames with inward-oriented normals and equals −2× the
/// contraction of the frame-scale-unit vectors.
pub fn tilt_at(
    section: &SectionField,
    frames: &crate::frames::AdaptedFrames,
    j: usize,
    k: usize,
    c3: f64,
) -> Result<TiltValue> {
    let xi = section.grid.xi(j, k);
    let eta = section.f[[j, k]];
    let bg = background_frame(xi, eta, c3)?;
    let nu = [frames.vector(2, j, k), frames.vector(3, j, k)];
    let mut v_matrix = [[0.0; 2]; 2];
    let mut sum = 0.0;
    for (a, nu_a) in nu.iter().enumerate() {
        for (b, t_b) in bg[2..].iter().enumerate() {
            let val = 2.0 * ambient_metric(nu_a, t_b);
            v_matrix[a][b] = val;
            sum += val * val;
        }
    }
    Ok(TiltValue { v_matrix, v: sum.sqrt() })
}

/// Tensor norm of a vector in the background frame of Definition-style
/// component sums: `‖B‖² = Σ_i 𝔾(B, e_i)² + Σ_α 𝔾(B, T_α)²`.
pub fn background_norm_sq(x: &AmbientTangent, c3: f64) -> Result<f64> {
    let bg = background_frame(x.base_xi, x.base_eta, c3)?;
    let mut total = 0.0;
    for e in &bg {
        let c = ambient_metric(x, e);
        total += c * c;
    }
    Ok(total)
}

/// Deterministic Halton sequence in the given base.
fn halton(index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Outcome of the multi-time scan.
#[derive(Debug, Clone, Copy)]
pub struct MultiTimeReport {
    pub all_negative: bool,
    /// largest (worst) value of `𝔾(∇̄t_i, ∇̄t_i)` over the samples
    pub worst: f64,
    pub samples: usize,
}

/// Sample the ball `B` with a Halton sequence and test
/// `𝔾(∇̄t_i, ∇̄t_i) < 0` at every accepted point.
///
/// `force` skips the `C₃² > C₂` hypothesis check (used to demonstrate
/// failure outside the hypothesis).
pub fn multitime_check(
    c1: f64,
    c2: f64,
    c3: f64,
    samples: usize,
    force: bool,
) -> Result<MultiTimeReport> {
    if !force && !(c3 * c3 > c2 && c2 > 0.0 && c1 > 0.0) {
        return Err(NkError::BadConstants);
    }
    let xi_box = (c2 / c1).sqrt().min(1.0);
    let eta_box = c2.sqrt();
    let mut accepted = 0usize;
    let mut idx = 1usize;
    let mut worst = f64::NEG_INFINITY;
    while accepted < samples {
        let xi = Complex64::new(
            (2.0 * halton(idx, 2) - 1.0) * xi_box,
            (2.0 * halton(idx, 3) - 1.0) * xi_box,
        );
        let eta = Complex64::new(
            (2.0 * halton(idx, 5) - 1.0) * eta_box,
            (2.0 * halton(idx, 7) - 1.0) * eta_box,
        );
        idx += 1;
        if c1 * xi.norm_sqr() + eta.norm_sqr() >= c2 || xi.norm_sqr() >= 1.0 {
            continue;
        }
        accepted += 1;
        let val = multitime_gradient_sq(xi, eta, c3);
        worst = worst.max(val);
    }
    Ok(MultiTimeReport { all_negative: worst < 0.0, worst, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PolarGrid;
    use crate::metric::ambient_metric;
    use nalgebra::{Matrix4, Vector4};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn background_frame_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c3 = 2.0;
        for _ in 0..50 {
            let xi = Complex64::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4));
            let eta = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let bg = match background_frame(xi, eta, c3) {
                Ok(b) => b,
                Err(_) => continue,
            };
            let target = [1.0, 1.0, -1.0, -1.0];
            for a in 0..4 {
                for b in 0..4 {
                    let g = ambient_metric(&bg[a], &bg[b]);
                    let expect = if a == b { target[a] } else { 0.0 };
                    assert!((g - expect).abs() < 1e-10, "bg frame G({a},{b}) = {g}");
                }
            }
        }
    }

    #[test]
    fn gradient_formula_matches_direct_metric_inversion() {
        // evaluate 𝔾(∇̄t₁, ∇̄t₁) by inverting the ambient metric numerically
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c3 = 2.0;
        for _ in 0..50 {
            let xi = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let eta = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            // basis of real tangents: ∂_{Re ξ}, ∂_{Im ξ}, ∂_{Re η}, ∂_{Im η}
            let basis = [
                AmbientTangent::new(xi, eta, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
                AmbientTangent::new(xi, eta, Complex64::i(), Complex64::new(0.0, 0.0)),
                AmbientTangent::new(xi, eta, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
                AmbientTangent::new(xi, eta, Complex64::new(0.0, 0.0), Complex64::i()),
            ];
            let mut g = Matrix4::zeros();
            for a in 0..4 {
                for b in 0..4 {
                    g[(a, b)] = ambient_metric(&basis[a], &basis[b]);
                }
            }
            let ginv = match g.try_inverse() {
                Some(gi) => gi,
                None => continue,
            };
            // dt₁ with t₁ = Re η − C₃ Im ξ
            let dt = Vector4::new(0.0, -c3, 1.0, 0.0);
            let direct = (dt.transpose() * ginv * dt)[(0, 0)];
            let formula = multitime_gradient_sq(xi, eta, c3);
            assert!(
                (direct - formula).abs() < 1e-10 * (1.0 + formula.abs()),
                "direct {direct} vs formula {formula}"
            );
        }
    }

    #[test]
    fn tilt_closed_form_at_origin() {
        // F = −iC₀ξ, C₀ = 1, C₃ = 2 at the origin: λ = −1, σ = 0, θ = 0
        //   V₃₃+iV₃₄ = (1+i)(λ−C₃)/√(2C₃(−λ)) = −1.5(1+i)
        //   V₄₄+iV₄₃ = (1−i)(λ−C₃)/√(2C₃(−λ)) = −1.5(1−i)
        let grid = PolarGrid::new(33, 64, 0.5).unwrap();
        let sec = SectionField::from_fn(grid, |xi| Complex64::new(0.0, -1.0) * xi).unwrap();
        let tilt = tilt_v(&sec, 0, 0, 2.0, 1e-9).unwrap();
        let v33 = tilt.v_matrix[0][0];
        let v34 = tilt.v_matrix[0][1];
        let v44 = tilt.v_matrix[1][1];
        let v43 = tilt.v_matrix[1][0];
        assert!((v33 - -1.5).abs() < 1e-8, "V33 = {v33}");
        assert!((v34 - -1.5).abs() < 1e-8, "V34 = {v34}");
        assert!((v44 - -1.5).abs() < 1e-8, "V44 = {v44}");
        assert!((v43 - 1.5).abs() < 1e-8, "V43 = {v43}");
        assert!((tilt.v - 3.0).abs() < 1e-8, "v = {}", tilt.v);
    }

    #[test]
    fn frame_norm_bound_holds() {
        // ‖τ_i‖² ≤ [n² + m(m−1)²] v² = 6 v²  and  ‖ν_α‖² ≤ m³ v² = 8 v²
        let grid = PolarGrid::new(33, 64, 0.4).unwrap();
        let sec = SectionField::from_fn(grid.clone(), |xi| {
            Complex64::new(0.0, -1.0) * xi + 0.1 * xi.conj() + 0.02 * xi.conj().powu(2)
        })
        .unwrap();
        let jd = jet_data(&sec).unwrap();
        let frames = adapted_frames_from_jet(&sec, &jd, 1e-9).unwrap();
        let c3 = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 200 {
            let j = rng.gen_range(0..grid.n_r);
            let k = rng.gen_range(0..grid.n_theta);
            let tilt = match tilt_at(&sec, &frames, j, k, c3) {
                Ok(t) => t,
                Err(_) => continue,
            };
            checked += 1;
            let bound_t = 6.0 * tilt.v * tilt.v;
            let bound_n = 8.0 * tilt.v * tilt.v;
            for which in 0..2 {
                let n = background_norm_sq(&frames.vector(which, j, k), c3).unwrap();
                assert!(n <= bound_t + 1e-9, "‖τ‖² = {n} > {bound_t}");
            }
            for which in 2..4 {
                let n = background_norm_sq(&frames.vector(which, j, k), c3).unwrap();
                assert!(n <= bound_n + 1e-9, "‖ν‖² = {n} > {bound_n}");
            }
        }
    }

    #[test]
    fn tilt_grows_with_twist() {
        // as λ → −∞ along F = −iC₀ξ, the tilt grows monotonically
        // v² = 2(C₀+C₃)²/(C₃C₀) at the origin has its minimum at C₀ = C₃;
        // the growth direction of the contradiction argument is the tail
        let grid = PolarGrid::new(17, 32, 0.3).unwrap();
        let c3 = 2.0;
        let mut last = 0.0;
        for c0 in [4.0, 8.0, 16.0, 32.0] {
            let sec =
                SectionField::from_fn(grid.clone(), move |xi| Complex64::new(0.0, -c0) * xi)
                    .unwrap();
            let tilt = tilt_v(&sec, 0, 0, c3, 1e-9).unwrap();
            assert!(tilt.v > last, "tilt not growing: {} after {last}", tilt.v);
            last = tilt.v;
        }
    }

    #[test]
    fn multitime_holds_under_hypothesis() {
        let report = multitime_check(1.0, 1.0, 2.0, 10_000, false).unwrap();
        assert!(report.all_negative, "worst = {}", report.worst);
        assert!(report.worst < 0.0);
    }

    #[test]
    fn multitime_boundary_constants_rejected() {
        // C₃² = C₂ exactly violates the hypothesis
        assert!(matches!(multitime_check(1.0, 4.0, 2.0, 10, false), Err(NkError::BadConstants)));
    }

    #[test]
    fn multitime_fails_when_forced_outside_hypothesis() {
        let report = multitime_check(1.0, 4.0, 1.0, 10_000, true).unwrap();
        assert!(!report.all_negative, "expected a violating sample, worst = {}", report.worst);
    }

    #[test]
    fn tilt_invariant_under_gauge_rotation() {
        // rotating the adapted normal frame by O(2) changes V but not v
        let grid = PolarGrid::new(17, 32, 0.3).unwrap();
        let sec = SectionField::from_fn(grid.clone(), |xi| {
            Complex64::new(0.0, -1.0) * xi + 0.1 * xi.conj()
        })
        .unwrap();
        let jd = jet_data(&sec).unwrap();
        let mut frames = adapted_frames_from_jet(&sec, &jd, 1e-9).unwrap();
        let t0 = tilt_at(&sec, &frames, 5, 7, 2.0).unwrap();
        // rotate (e₃, e₄) by an angle in their plane
        let (c, s) = (0.6f64.cos(), 0.6f64.sin());
        for j in 0..grid.n_r {
            for k in 0..grid.n_theta {
                let (a3, a4) = (frames.a[2][[j, k]], frames.a[3][[j, k]]);
                let (b3, b4) = (frames.b[2][[j, k]], frames.b[3][[j, k]]);
                frames.a[2][[j, k]] = c * a3 + s * a4;
                frames.a[3][[j, k]] = -s * a3 + c * a4;
                frames.b[2][[j, k]] = c * b3 + s * b4;
                frames.b[3][[j, k]] = -s * b3 + c * b4;
            }
        }
        let t1 = tilt_at(&sec, &frames, 5, 7, 2.0).unwrap();
        assert!((t0.v - t1.v).abs() < 1e-10, "gauge rotation changed v: {} vs {}", t0.v, t1.v);
        let changed = (0..2)
            .flat_map(|a| (0..2).map(move |b| (a, b)))
            .any(|(a, b)| (t0.v_matrix[a][b] - t1.v_matrix[a][b]).abs() > 1e-6);
        assert!(changed, "V matrix should change under the gauge rotation");
    }
}
