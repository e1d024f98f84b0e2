//! Adapted orthonormal frames on positive graphs, the second fundamental
//! form, and the mean curvature of a section.
//!
//! The frame vectors follow the closed forms for graphs, written with the
//! gauge data `e^{2u} = 4(1+ξξ̄)^{−2}`, `σ = |σ|e^{iφ}` (`φ` is pure gauge
//! where `σ = 0` and is set to 0 there). Positivity requires `λ < −|σ|`, the
//! branch the flow runs on.
//!
//! The mean curvature component `H^ξ` follows the divergence form. The
//! frame-trace family (`γ`, and `β₁₁ + εβ₂₂`) measures against the
//! frame-scale metric and sits at exactly half that value; tests pin both
//! the trace identity and the scale factor.

use num_complex::Complex64;

use crate::deriv::complex_derivatives;
use crate::error::NkError;
use crate::grid::{ComplexField, PolarGrid, SectionField};
use crate::metric::AmbientTangent;
use crate::slopes::{compute_slopes, SlopeField};
use crate::Result;

/// Nodes with `|σ|` below this floor use the `φ = 0` gauge and zero gradient
/// for the non-smooth fields `|σ|`, `φ`.
pub const SIGMA_GAUGE_FLOOR: f64 = 1e-13;

/// Shared first-derivative data for frame and curvature formulas.
#[derive(Debug, Clone)]
pub struct JetData {
    pub slopes: SlopeField,
    pub dlam: ComplexField,
    pub dblam: ComplexField,
    pub dsig: ComplexField,
    pub dbsig: ComplexField,
    /// `∂|σ|`, zero on the gauge floor
    pub dabs: ComplexField,
    /// `∂̄|σ|`
    pub dbabs: ComplexField,
    /// `∂φ`, zero on the gauge floor
    pub dphi: ComplexField,
    /// `∂̄φ`
    pub dbphi: ComplexField,
}

pub fn jet_data(section: &SectionField) -> Result<JetData> {
    let grid = &section.grid;
    let slopes = compute_slopes(section)?;
    let lam_c = slopes.lambda.mapv(|x| Complex64::new(x, 0.0));
    let (dlam, dblam) = complex_derivatives(grid, &lam_c)?;
    let (dsig, dbsig) = complex_derivatives(grid, &slopes.sigma)?;
    let mut dabs = dsig.clone();
    let mut dbabs = dsig.clone();
    let mut dphi = dsig.clone();
    let mut dbphi = dsig.clone();
    for j in 0..grid.n_r {
        for k in 0..grid.n_theta {
            let s = slopes.sigma[[j, k]];
            let m = s.norm();
            if m < SIGMA_GAUGE_FLOOR {
                let z = Complex64::new(0.0, 0.0);
                dabs[[j, k]] = z;
                dbabs[[j, k]] = z;
                dphi[[j, k]] = z;
                dbphi[[j, k]] = z;
                continue;
            }
            let ds = dsig[[j, k]];
            let dbs = dbsig[[j, k]];
            // ∂σ̄ = conj(∂̄σ), ∂̄σ̄ = conj(∂σ)
            let dsb = dbs.conj();
            let dbsb = ds.conj();
            dabs[[j, k]] = (s.conj() * ds + s * dsb) / (2.0 * m);
            dbabs[[j, k]] = (s.conj() * dbs + s * dbsb) / (2.0 * m);
            let half_i = Complex64::new(0.0, -0.5);
            dphi[[j, k]] = half_i * (ds / s - dsb / s.conj());
            dbphi[[j, k]] = half_i * (dbs / s - dbsb / s.conj());
        }
    }
    Ok(JetData { slopes, dlam, dblam, dsig, dbsig, dabs, dbabs, dphi, dbphi })
}

/// The adapted frame `{e₍₁₎, e₍₂₎, e₍₃₎, e₍₄₎}` with
/// `𝔾(e_a, e_b) = diag(1, 1, −1, −1)` on a positive graph.
#[derive(Debug, Clone)]
pub struct AdaptedFrames {
    pub grid: PolarGrid,
    /// `(1,0)` components `(a, b)` on `(∂ξ, ∂η)`, one pair per frame vector
    pub a: [ComplexField; 4],
    pub b: [ComplexField; 4],
    /// base point η = F per node
    pub eta: ComplexField,
}

impl AdaptedFrames {
    pub fn vector(&self, which: usize, j: usize, k: usize) -> AmbientTangent {
        AmbientTangent::new(
            self.grid.xi(j, k),
            self.eta[[j, k]],
            self.a[which][[j, k]],
            self.b[which][[j, k]],
        )
    }
}

fn check_positive(slopes: &SlopeField, delta_pos: f64) -> Result<()> {
    let min_margin = slopes.min_margin();
    if min_margin <= delta_pos {
        return Err(NkError::DegenerateMetric { min_margin, floor: delta_pos });
    }
    // ε = +1 branch with λ < 0 arranged; refuse the λ > 0 sheet
    if slopes.lambda.iter().any(|&l| l >= 0.0) {
        return Err(NkError::DegenerateMetric { min_margin: 0.0, floor: delta_pos });
    }
    Ok(())
}

/// Build the adapted frame from a section (`ε = +1` branch only).
pub fn adapted_frames(section: &SectionField, delta_pos: f64) -> Result<AdaptedFrames> {
    let jd = jet_data(section)?;
    adapted_frames_from_jet(section, &jd, delta_pos)
}

pub fn adapted_frames_from_jet(
    section: &SectionField,
    jd: &JetData,
    delta_pos: f64,
) -> Result<AdaptedFrames> {
    let grid = section.grid.clone();
    check_positive(&jd.slopes, delta_pos)?;
    let zero: ComplexField = ndarray::Array2::zeros((grid.n_r, grid.n_theta));
    let mut a = [zero.clone(), zero.clone(), zero.clone(), zero.clone()];
    let mut b = [zero.clone(), zero.clone(), zero.clone(), zero];
    for j in 0..grid.n_r {
        for k in 0..grid.n_theta {
            let xi = grid.xi(j, k);
            let w = 1.0 + xi.norm_sqr();
            let eu_inv = w / 2.0; // e^{−u}
            let s = jd.slopes.sigma[[j, k]];
            let sm = s.norm();
            let phi = if sm < SIGMA_GAUGE_FLOOR { 0.0 } else { s.arg() };
            let lam = jd.slopes.lambda[[j, k]];
            let quarter = std::f64::consts::FRAC_PI_4;
            let a1 = Complex64::from_polar(eu_inv, -0.5 * phi + quarter)
                / (2.0 * (-lam - sm)).sqrt();
            let a2 = Complex64::from_polar(eu_inv, -0.5 * phi - quarter)
                / (2.0 * (-lam + sm)).sqrt();
            let df = jd.slopes.df[[j, k]];
            let dbf = jd.slopes.dbf[[j, k]];
            let f = section.f[[j, k]];
            // ∂u = −ξ̄/(1+ξξ̄), ∂̄u = −ξ/(1+ξξ̄)
            let normal_eta = df.conj() + 2.0 * (f * xi.conj() - f.conj() * xi) / w;
            // tangent pair: 2Re[α(∂ξ + ∂F ∂η + ∂F̄ ∂η̄)]
            let tangent = |al: Complex64| (al, al * df + al.conj() * dbf);
            // normal pair: 2Re[α(∂ξ + (∂̄F̄ − 2(F∂u − F̄∂̄u)) ∂η − ∂F̄ ∂η̄)]
            let normal = |al: Complex64| (al, al * normal_eta - al.conj() * dbf);
            let pairs = [tangent(a1), tangent(a2), normal(a2), normal(a1)];
            for (which, (av, bv)) in pairs.into_iter().enumerate() {
                a[which][[j, k]] = av;
                b[which][[j, k]] = bv;
            }
        }
    }
    Ok(AdaptedFrames { grid, a, b, eta: section.f.clone() })
}

/// Second fundamental form coefficients `β₁₁, β₂₂, β₁₂` plus the frame.
#[derive(Debug, Clone)]
pub struct SecondFundamentalForm {
    pub beta11: ComplexField,
    pub beta22: ComplexField,
    pub beta12: ComplexField,
    pub frames: AdaptedFrames,
}

/// Evaluate the second fundamental form on a positive graph (`ε = +1`).
pub fn second_fundamental_form(
    section: &SectionField,
    delta_pos: f64,
) -> Result<SecondFundamentalForm> {
    let jd = jet_data(section)?;
    let frames = adapted_frames_from_jet(section, &jd, delta_pos)?;
    let grid = &section.grid;
    let eps = 1.0;
    let mut beta11: ComplexField = ndarray::Array2::zeros((grid.n_r, grid.n_theta));
    let mut beta22 = beta11.clone();
    let mut beta12 = beta11.clone();
    for j in 0..grid.n_r {
        for k in 0..grid.n_theta {
            let xi = grid.xi(j, k);
            let w = 1.0 + xi.norm_sqr();
            let e2u = 4.0 / (w * w);
            let s = jd.slopes.sigma[[j, k]];
            let sm = s.norm();
            let phi = if sm < SIGMA_GAUGE_FLOOR { 0.0 } else { s.arg() };
            let eip = Complex64::from_polar(1.0, phi);
            let lam = jd.slopes.lambda[[j, k]];
            let i = Complex64::i();
            let dlam = jd.dlam[[j, k]];
            let dblam = jd.dblam[[j, k]];
            let dabs = jd.dabs[[j, k]];
            let dbabs = jd.dbabs[[j, k]];
            let dphi = jd.dphi[[j, k]];
            let dbphi = jd.dbphi[[j, k]];
            let du = -xi.conj() / w;
            let dbu = -xi / w;

            let num11 = i * lam * dabs - s * dbabs + i * lam * dlam - s * dblam
                + sm * (sm + lam) * (dphi - i * eip * dbphi + 2.0 * i * du - 2.0 * eip * dbu);
            let den11 = 2.0 * e2u * eip * (sm + lam) * (sm + lam) * (-sm + lam);
            beta11[[j, k]] = num11 / den11;

            let num22 = -i * lam * dabs + s * dbabs + i * lam * dlam - s * dblam
                + sm * (sm - lam) * (dphi + i * eip * dbphi + 2.0 * i * du + 2.0 * eip * dbu);
            let den22 = 2.0 * eps * e2u * eip * (sm - lam) * (sm - lam) * (-sm - lam);
            beta22[[j, k]] = num22 / den22;

            let num12 = -sm * dabs + i * lam * eip * dbabs + lam * dlam - i * s * dblam;
            let delta = lam * lam - sm * sm;
            let den12 = 2.0 * e2u * eip * (sm * sm - lam * lam) * (eps * delta).sqrt();
            beta12[[j, k]] = num12 / den12;
        }
    }
    Ok(SecondFundamentalForm { beta11, beta22, beta12, frames })
}

/// `H^ξ` by the divergence form:
///
/// ```text
/// H^ξ = ε · 2e^{−2u}/√|λ²−|σ|²| · [ i e^{−2u} ∂( σ̄ e^{2u}/√|λ²−|σ|²| )
///                                   − ∂̄( λ/√|λ²−|σ|²| ) ]
/// ```
pub fn mean_curvature(section: &SectionField, delta_pos: f64) -> Result<ComplexField> {
    let jd = jet_data(section)?;
    mean_curvature_from_jet(section, &jd, delta_pos)
}

pub fn mean_curvature_from_jet(
    section: &SectionField,
    jd: &JetData,
    delta_pos: f64,
) -> Result<ComplexField> {
    let grid = &section.grid;
    check_positive(&jd.slopes, delta_pos)?;
    let margin = jd.slopes.margin();
    let mut packed_sigma: ComplexField = ndarray::Array2::zeros((grid.n_r, grid.n_theta));
    let mut packed_lambda = packed_sigma.clone();
    for j in 0..grid.n_r {
        for k in 0..grid.n_theta {
            let w = 1.0 + grid.xi(j, k).norm_sqr();
            let e2u = 4.0 / (w * w);
            let q = margin[[j, k]].abs().sqrt();
            packed_sigma[[j, k]] = jd.slopes.sigma[[j, k]].conj() * e2u / q;
            packed_lambda[[j, k]] = Complex64::new(jd.slopes.lambda[[j, k]] / q, 0.0);
        }
    }
    let (dps, _) = complex_derivatives(grid, &packed_sigma)?;
    let (_, dbpl) = complex_derivatives(grid, &packed_lambda)?;
    let mut h = dps;
    for j in 0..grid.n_r {
        for k in 0..grid.n_theta {
            let w = 1.0 + grid.xi(j, k).norm_sqr();
            let e2u = 4.0 / (w * w);
            let q = margin[[j, k]].abs().sqrt();
            let inner = Complex64::i() / e2u * h[[j, k]] - dbpl[[j, k]];
            h[[j, k]] = 2.0 / (e2u * q) * inner;
        }
    }
    Ok(h)
}

/// `H^ξ` as the trace coefficient `γ` of the mean curvature vector.
/// Ill-conditioned at σ-zeros (contains `∂|σ|`, `∂φ`); intended for
/// cross-checks away from them.
pub fn mean_curvature_gamma(section: &SectionField, delta_pos: f64) -> Result<ComplexField> {
    let jd = jet_data(section)?;
    check_positive(&jd.slopes, delta_pos)?;
    let grid = &section.grid;
    let mut out: ComplexField = ndarray::Array2::zeros((grid.n_r, grid.n_theta));
    for j in 0..grid.n_r {
        for k in 0..grid.n_theta {
            let xi = grid.xi(j, k);
            let w = 1.0 + xi.norm_sqr();
            let e2u = 4.0 / (w * w);
            let s = jd.slopes.sigma[[j, k]];
            let sm = s.norm();
            let phi = if sm < SIGMA_GAUGE_FLOOR { 0.0 } else { s.arg() };
            let eip = Complex64::from_polar(1.0, phi);
            let lam = jd.slopes.lambda[[j, k]];
            let i = Complex64::i();
            let du = -xi.conj() / w;
            let num = -lam * (-i * lam * jd.dabs[[j, k]] + s * jd.dbabs[[j, k]])
                - sm * (i * lam * jd.dlam[[j, k]] - s * jd.dblam[[j, k]])
                - sm * (sm * sm - lam * lam) * (jd.dphi[[j, k]] + 2.0 * i * du);
            let den = e2u * eip * (sm * sm - lam * lam) * (sm * sm - lam * lam);
            out[[j, k]] = num / den;
        }
    }
    Ok(out)
}

/// `Ḟ = −2λi H^ξ + 2σ̄ H^ξ̄` (the normal-projection inversion).
pub fn f_dot_from_mean_curvature(slopes: &SlopeField, h: &ComplexField) -> ComplexField {
    let mut out = h.clone();
    for j in 0..slopes.grid.n_r {
        for k in 0..slopes.grid.n_theta {
            let lam = slopes.lambda[[j, k]];
            let sb = slopes.sigma[[j, k]].conj();
            out[[j, k]] = -2.0 * lam * Complex64::i() * h[[j, k]] + 2.0 * sb * h[[j, k]].conj();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::ambient_metric;

    fn twist(grid: PolarGrid, c0: f64) -> SectionField {
        SectionField::from_fn(grid, move |xi| Complex64::new(0.0, -c0) * xi).unwrap()
    }

    /// positive section with σ ≠ 0 on the whole grid (σ-zero lies outside)
    fn sheared(grid: PolarGrid) -> SectionField {
        SectionField::from_fn(grid, |xi| {
            Complex64::new(0.0, -1.0) * xi + 0.1 * xi.conj() + 0.02 * xi.conj().powu(2)
        })
        .unwrap()
    }

    #[test]
    fn holomorphic_graphs_are_minimal() {
        // any holomorphic F (σ ≡ 0) → H ≡ 0
        let grid = PolarGrid::new(33, 64, 0.4).unwrap();
        for which in 0..3 {
            let sec = SectionField::from_fn(grid.clone(), move |xi| {
                let extra = match which {
                    0 => Complex64::new(0.0, 0.0),
                    1 => 0.1 * xi * xi,
                    _ => Complex64::new(0.05, 0.02) * xi.powu(3),
                };
                Complex64::new(0.0, -1.0) * xi + extra
            })
            .unwrap();
            let h = mean_curvature(&sec, 1e-9).unwrap();
            let worst = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(worst < 1e-8, "‖H‖ = {worst}");
        }
    }

    #[test]
    fn frame_is_orthonormal_for_the_neutral_metric() {
        let grid = PolarGrid::new(33, 64, 0.4).unwrap();
        let sec = sheared(grid.clone());
        let frames = adapted_frames(&sec, 1e-9).unwrap();
        let target = [1.0, 1.0, -1.0, -1.0];
        let mut worst = 0.0f64;
        for j in 0..grid.n_r {
            for k in (0..grid.n_theta).step_by(7) {
                for a in 0..4 {
                    for b in 0..4 {
                        let g = ambient_metric(&frames.vector(a, j, k), &frames.vector(b, j, k));
                        let expect = if a == b { target[a] } else { 0.0 };
                        worst = worst.max((g - expect).abs());
                    }
                }
            }
        }
        assert!(worst < 1e-10, "max |𝔾(e_a,e_b) − diag| = {worst}");
    }

    #[test]
    fn trace_identity_on_twist_section() {
        // β₁₁ + εβ₂₂ agrees with the divergence-form H^ξ to 1e-8
        let grid = PolarGrid::new(33, 64, 0.4).unwrap();
        let sec = twist(grid.clone(), 1.0);
        let sff = second_fundamental_form(&sec, 1e-9).unwrap();
        let h = mean_curvature(&sec, 1e-9).unwrap();
        let mut worst = 0.0f64;
        for j in 0..grid.n_r {
            for k in 0..grid.n_theta {
                let trace = sff.beta11[[j, k]] + sff.beta22[[j, k]];
                worst = worst.max((trace - h[[j, k]]).norm());
            }
        }
        assert!(worst < 1e-8, "trace vs H: {worst}");
    }

    #[test]
    fn gamma_and_trace_sit_at_half_the_divergence_scale() {
        // The frame-trace family (γ and β₁₁+εβ₂₂, which agree identically)
        // measures the mean curvature against the frame-scale metric, half
        // the divergence-form value. The factor is exact.
        let grid = PolarGrid::new(65, 128, 0.4).unwrap();
        let sec = sheared(grid.clone());
        let h = mean_curvature(&sec, 1e-9).unwrap();
        let gamma = mean_curvature_gamma(&sec, 1e-9).unwrap();
        let sff = second_fundamental_form(&sec, 1e-9).unwrap();
        let mut w_gt = 0.0f64;
        let mut w_scale = 0.0f64;
        for j in 0..grid.n_r {
            for k in 0..grid.n_theta {
                let trace = sff.beta11[[j, k]] + sff.beta22[[j, k]];
                w_gt = w_gt.max((trace - gamma[[j, k]]).norm());
                w_scale = w_scale.max((2.0 * gamma[[j, k]] - h[[j, k]]).norm());
            }
        }
        assert!(w_gt < 1e-10, "trace vs gamma: {w_gt}");
        assert!(w_scale < 1e-7, "2·gamma vs divergence H: {w_scale}");
    }

    #[test]
    fn beta12_perturbation_decays_linearly() {
        // F = −iξ + εξ̄²: β₁₂(ε) − β₁₂(0) = O(ε), measured at mid-grid nodes
        let grid = PolarGrid::new(33, 64, 0.3).unwrap();
        let base = twist(grid.clone(), 1.0);
        let sff0 = second_fundamental_form(&base, 1e-9).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [2e-2, 1e-2, 5e-3] {
            let sec = SectionField::from_fn(grid.clone(), move |xi| {
                Complex64::new(0.0, -1.0) * xi + eps * xi.conj().powu(2)
            })
            .unwrap();
            let sff = second_fundamental_form(&sec, 1e-9).unwrap();
            let mut diff = 0.0f64;
            for j in 8..25 {
                for k in 0..grid.n_theta {
                    diff = diff.max((sff.beta12[[j, k]] - sff0.beta12[[j, k]]).norm());
                }
            }
            assert!(diff < prev, "β₁₂ difference not decreasing: {diff} vs {prev}");
            prev = diff;
        }
    }

    #[test]
    fn lorentz_input_is_refused() {
        let grid = PolarGrid::new(17, 32, 0.4).unwrap();
        let sec = SectionField::from_fn(grid, |xi| xi.conj().powu(2)).unwrap();
        assert!(matches!(
            second_fundamental_form(&sec, 1e-6),
            Err(NkError::DegenerateMetric { .. })
        ));
        assert!(matches!(mean_curvature(&sec, 1e-6), Err(NkError::DegenerateMetric { .. })));
    }
}
