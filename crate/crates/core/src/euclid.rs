//! Euclidean bridge: surface patches in ℝ³, their oriented normal line
//! congruences as sections of TS², umbilic detection, and the half-integer
//! index of the principal foliation.
//!
//! Directions are encoded by stereographic projection from the south pole,
//! `ξ = (n₁+in₂)/(1+n₃)`, and a line with direction `ξ` through the point
//! `(z, t) ∈ ℂ×ℝ` has fibre coordinate
//!
//! ```text
//! η = ½ (z − 2tξ − z̄ξ²)
//! ```
//!
//! which is constant along the line. The formula is validated purely through
//! the line round-trip oracle and the Lagrangian property of normal
//! congruences, both of which are exercised in tests.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use num_complex::Complex64;

use crate::error::NkError;
use crate::grid::{PolarGrid, SectionField};
use crate::Result;

/// Stereographic image (from the south pole) of a unit direction.
pub fn stereo(n: Vector3<f64>) -> Result<Complex64> {
    if n.z <= -1.0 + 1e-9 {
        return Err(NkError::SouthPoleHit);
    }
    Ok(Complex64::new(n.x, n.y) / (1.0 + n.z))
}

/// Unit direction from its stereographic image.
pub fn inv_stereo(xi: Complex64) -> Vector3<f64> {
    let r2 = xi.norm_sqr();
    Vector3::new(2.0 * xi.re, 2.0 * xi.im, 1.0 - r2) / (1.0 + r2)
}

/// An oriented affine line of ℝ³ in TS² coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedLine {
    pub xi: Complex64,
    pub eta: Complex64,
}

impl OrientedLine {
    /// Fibre coordinate of the line with direction `xi` through `(z, t)`.
    pub fn through(xi: Complex64, z: Complex64, t: f64) -> Self {
        let eta = 0.5 * (z - 2.0 * t * xi - z.conj() * xi * xi);
        Self { xi, eta }
    }
}

/// `(closest point to the origin, unit direction)` of a line.
///
/// Inverts the incidence formula together with the orthogonality condition
/// `p·n = 0` (a 3×3 linear system).
pub fn line_reconstruct(line: &OrientedLine) -> (Vector3<f64>, Vector3<f64>) {
    let xi = line.xi;
    let n = inv_stereo(xi);
    let xi2 = xi * xi;
    let m = Matrix3::new(
        0.5 - 0.5 * xi2.re,
        -0.5 * xi2.im,
        -xi.re,
        -0.5 * xi2.im,
        0.5 + 0.5 * xi2.re,
        -xi.im,
        n.x,
        n.y,
        n.z,
    );
    let rhs = Vector3::new(line.eta.re, line.eta.im, 0.0);
    let p = m.lu().solve(&rhs).unwrap_or_else(Vector3::zeros);
    (p, n)
}

/// Second-order jet of a parametrised surface at `(u, v)`.
#[derive(Debug, Clone, Copy)]
pub struct Jet2 {
    pub p: Vector3<f64>,
    pub pu: Vector3<f64>,
    pub pv: Vector3<f64>,
    pub puu: Vector3<f64>,
    pub puv: Vector3<f64>,
    pub pvv: Vector3<f64>,
}

/// Parameter domain of a patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Disc { radius: f64 },
    Rect { u0: f64, u1: f64, v0: f64, v1: f64 },
}

impl Domain {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        match *self {
            Domain::Disc { radius } => u * u + v * v <= radius * radius,
            Domain::Rect { u0, u1, v0, v1 } => u >= u0 && u <= u1 && v >= v0 && v <= v1,
        }
    }

    fn sample_box(&self) -> (f64, f64, f64, f64) {
        match *self {
            Domain::Disc { radius } => (-radius, radius, -radius, radius),
            Domain::Rect { u0, u1, v0, v1 } => (u0, u1, v0, v1),
        }
    }
}

/// A C²-sampled surface patch in Euclidean 3-space.
#[derive(Debug, Clone)]
pub enum SurfacePatch {
    /// graph `z = Σ c_{ij} uⁱ vʲ` over the parameter plane
    PolyGraph { coeffs: Vec<(u32, u32, f64)>, domain: Domain, resolution: usize },
    /// chart `x(u,v) = p0 + u e₁ + v e₂ + w(u,v) n` on the quadric
    /// `(x−c)ᵀ A (x−c) = 1`, with the `w → 0` branch at the base point
    Quadric {
        a: Matrix3<f64>,
        center: Vector3<f64>,
        p0: Vector3<f64>,
        e1: Vector3<f64>,
        e2: Vector3<f64>,
        normal: Vector3<f64>,
        domain: Domain,
        resolution: usize,
    },
    /// sampled lattice of positions, local biquadratic fits for jets
    Sampled {
        u0: f64,
        v0: f64,
        du: f64,
        dv: f64,
        points: ndarray::Array2<Vector3<f64>>,
        resolution: usize,
    },
}

impl SurfacePatch {
    pub fn poly_graph(coeffs: Vec<(u32, u32, f64)>, domain: Domain, resolution: usize) -> Self {
        SurfacePatch::PolyGraph { coeffs, domain, resolution }
    }

    /// Rotationally symmetric bump `z = (u²+v²)/2 + a(u²+v²)²`.
    pub fn rotational_bump(quartic: f64, radius: f64, resolution: usize) -> Self {
        Self::poly_graph(
            vec![
                (2, 0, 0.5),
                (0, 2, 0.5),
                (4, 0, quartic),
                (2, 2, 2.0 * quartic),
                (0, 4, quartic),
            ],
            Domain::Disc { radius },
            resolution,
        )
    }

    /// Monkey-saddle-type patch `z = Re((u+iv)³) + (u²+v²)`, convex for
    /// `u²+v² < 1/9`.
    pub fn monkey_saddle(radius: f64, resolution: usize) -> Self {
        Self::poly_graph(
            vec![(3, 0, 1.0), (1, 2, -3.0), (2, 0, 1.0), (0, 2, 1.0)],
            Domain::Disc { radius },
            resolution,
        )
    }

    /// Sphere of the given radius about `center`, chart based at the north
    /// pole of the sphere.
    pub fn sphere(radius: f64, center: Vector3<f64>, chart_radius: f64, resolution: usize) -> Self {
        let p0 = center + Vector3::new(0.0, 0.0, radius);
        SurfacePatch::Quadric {
            a: Matrix3::identity() / (radius * radius),
            center,
            p0,
            e1: Vector3::x(),
            e2: Vector3::y(),
            normal: Vector3::z(),
            domain: Domain::Disc { radius: chart_radius },
            resolution,
        }
    }

    /// Ellipsoid `x²/a² + y²/b² + z²/c² = 1` charted around a base point,
    /// rotated so the outward normal at the base point becomes `+ẑ` (the
    /// normal congruence then sits around `ξ = 0`).
    pub fn ellipsoid_chart(
        semi_axes_sq: Vector3<f64>,
        p0: Vector3<f64>,
        chart_radius: f64,
        resolution: usize,
    ) -> Self {
        let a = Matrix3::from_diagonal(&Vector3::new(
            1.0 / semi_axes_sq.x,
            1.0 / semi_axes_sq.y,
            1.0 / semi_axes_sq.z,
        ));
        let normal = (a * p0).normalize();
        // rotation sending the base normal to +ẑ
        let rot = nalgebra::Rotation3::rotation_between(&normal, &Vector3::z())
            .unwrap_or_else(nalgebra::Rotation3::identity);
        let r = rot.matrix().into_owned();
        let a_rot = r * a * r.transpose();
        let p0_rot = r * p0;
        let e1 = Vector3::x();
        let e2 = Vector3::y();
        SurfacePatch::Quadric {
            a: a_rot,
            center: Vector3::zeros(),
            p0: p0_rot,
            e1,
            e2,
            normal: Vector3::z(),
            domain: Domain::Disc { radius: chart_radius },
            resolution,
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            SurfacePatch::PolyGraph { domain, .. } | SurfacePatch::Quadric { domain, .. } => *domain,
            SurfacePatch::Sampled { u0, v0, du, dv, points, .. } => {
                let (nu, nv) = points.dim();
                // interior cells only; the boundary ring feeds the stencils
                Domain::Rect {
                    u0: u0 + du,
                    u1: u0 + du * (nu as f64 - 2.0),
                    v0: v0 + dv,
                    v1: v0 + dv * (nv as f64 - 2.0),
                }
            }
        }
    }

    pub fn resolution(&self) -> usize {
        match self {
            SurfacePatch::PolyGraph { resolution, .. }
            | SurfacePatch::Quadric { resolution, .. }
            | SurfacePatch::Sampled { resolution, .. } => (*resolution).max(16),
        }
    }

    /// Second-order jet at `(u, v)`.
    pub fn jet2(&self, u: f64, v: f64) -> Jet2 {
        match self {
            SurfacePatch::PolyGraph { coeffs, .. } => {
                let mut h = 0.0;
                let mut hu = 0.0;
                let mut hv = 0.0;
                let mut huu = 0.0;
                let mut huv = 0.0;
                let mut hvv = 0.0;
                for &(i, j, c) in coeffs {
                    let (fi, fj) = (i as f64, j as f64);
                    let pui = |p: u32, x: f64| if p == 0 { 1.0 } else { x.powi(p as i32) };
                    let base = c * pui(i, u) * pui(j, v);
                    h += base;
                    if i >= 1 {
                        hu += c * fi * pui(i - 1, u) * pui(j, v);
                    }
                    if j >= 1 {
                        hv += c * fj * pui(i, u) * pui(j - 1, v);
                    }
                    if i >= 2 {
                        huu += c * fi * (fi - 1.0) * pui(i - 2, u) * pui(j, v);
                    }
                    if i >= 1 && j >= 1 {
                        huv += c * fi * fj * pui(i - 1, u) * pui(j - 1, v);
                    }
                    if j >= 2 {
                        hvv += c * fj * (fj - 1.0) * pui(i, u) * pui(j - 2, v);
                    }
                }
                Jet2 {
                    p: Vector3::new(u, v, h),
                    pu: Vector3::new(1.0, 0.0, hu),
                    pv: Vector3::new(0.0, 1.0, hv),
                    puu: Vector3::new(0.0, 0.0, huu),
                    puv: Vector3::new(0.0, 0.0, huv),
                    pvv: Vector3::new(0.0, 0.0, hvv),
                }
            }
            SurfacePatch::Quadric { a, center, p0, e1, e2, normal, .. } => {
                let base = p0 + e1 * u + e2 * v - center;
                // w solves the quadratic (base + w n)ᵀA(base + w n) = 1 with w(0,0) = 0
                let qa = (normal.transpose() * a * normal)[(0, 0)];
                let qb = 2.0 * (normal.transpose() * a * base)[(0, 0)];
                let qc = (base.transpose() * a * base)[(0, 0)] - 1.0;
                let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
                let w = if qb >= 0.0 { -2.0 * qc / (qb + disc) } else { 2.0 * qc / (disc - qb) };
                let x = base + normal * w;
                let ax = a * x;
                let gw = normal.dot(&ax);
                let wu = -e1.dot(&ax) / gw;
                let wv = -e2.dot(&ax) / gw;
                let su = e1 + normal * wu;
                let sv = e2 + normal * wv;
                let quad = |l: &Vector3<f64>, r: &Vector3<f64>| (l.transpose() * a * r)[(0, 0)];
                let wuu = -quad(&su, &su) / gw;
                let wuv = -quad(&su, &sv) / gw;
                let wvv = -quad(&sv, &sv) / gw;
                Jet2 {
                    p: center + x,
                    pu: su,
                    pv: sv,
                    puu: normal * wuu,
                    puv: normal * wuv,
                    pvv: normal * wvv,
                }
            }
            SurfacePatch::Sampled { u0, v0, du, dv, points, .. } => {
                let (nu, nv) = points.dim();
                let fi = ((u - u0) / du).round().clamp(1.0, nu as f64 - 2.0) as usize;
                let fj = ((v - v0) / dv).round().clamp(1.0, nv as f64 - 2.0) as usize;
                // biquadratic fit on the 3×3 neighbourhood (exact for quadratics)
                let lu = (u - (u0 + fi as f64 * du)) / du;
                let lv = (v - (v0 + fj as f64 * dv)) / dv;
                let mut c = [[Vector3::zeros(); 3]; 3];
                for (di, row) in c.iter_mut().enumerate() {
                    for (dj, val) in row.iter_mut().enumerate() {
                        *val = points[[fi + di - 1, fj + dj - 1]];
                    }
                }
                // 1-d quadratic interpolation weights at offset x ∈ [−1,1]
                let wq = |x: f64| [0.5 * x * (x - 1.0), 1.0 - x * x, 0.5 * x * (x + 1.0)];
                let wqd = |x: f64| [x - 0.5, -2.0 * x, x + 0.5];
                let wqdd = [1.0, -2.0, 1.0];
                let (au, adu) = (wq(lu), wqd(lu));
                let (av, adv_) = (wq(lv), wqd(lv));
                let mut p = Vector3::zeros();
                let mut pu = Vector3::zeros();
                let mut pv = Vector3::zeros();
                let mut puu = Vector3::zeros();
                let mut puv = Vector3::zeros();
                let mut pvv = Vector3::zeros();
                for i in 0..3 {
                    for j in 0..3 {
                        let q = c[i][j];
                        p += q * (au[i] * av[j]);
                        pu += q * (adu[i] * av[j]);
                        pv += q * (au[i] * adv_[j]);
                        puu += q * (wqdd[i] * av[j]);
                        puv += q * (adu[i] * adv_[j]);
                        pvv += q * (au[i] * wqdd[j]);
                    }
                }
                Jet2 {
                    p,
                    pu: pu / *du,
                    pv: pv / *dv,
                    puu: puu / (du * du),
                    puv: puv / (du * dv),
                    pvv: pvv / (dv * dv),
                }
            }
        }
    }

    /// Oriented unit normal: upward for graphs, outward for quadrics.
    pub fn unit_normal(&self, u: f64, v: f64) -> Vector3<f64> {
        let jet = self.jet2(u, v);
        let mut n = jet.pu.cross(&jet.pv).normalize();
        if let SurfacePatch::Quadric { a, center, .. } = self {
            let grad = a * (jet.p - center);
            if n.dot(&grad) < 0.0 {
                n = -n;
            }
        } else if n.z < 0.0 {
            n = -n;
        }
        n
    }

    /// Shape operator data at `(u, v)`.
    pub fn shape(&self, u: f64, v: f64) -> ShapeData {
        let jet = self.jet2(u, v);
        let n = self.unit_normal(u, v);
        let e = jet.pu.dot(&jet.pu);
        let f = jet.pu.dot(&jet.pv);
        let g = jet.pv.dot(&jet.pv);
        let l = n.dot(&jet.puu);
        let m = n.dot(&jet.puv);
        let q = n.dot(&jet.pvv);
        let first = Matrix2::new(e, f, f, g);
        let second = Matrix2::new(l, m, m, q);
        let weingarten = first.try_inverse().unwrap_or_else(Matrix2::zeros) * second;
        // orthonormal tangent frame by Gram–Schmidt on (pu, pv)
        let t1 = jet.pu / e.sqrt();
        let pv_perp = jet.pv - t1 * jet.pv.dot(&t1);
        let t2 = pv_perp.normalize();
        // II in the orthonormal frame: t1 = a pu, t2 = b pu + c pv
        let a = 1.0 / e.sqrt();
        let bc = -f / (e * pv_perp.norm());
        let cc = 1.0 / pv_perp.norm();
        let s11 = a * a * l;
        let s12 = a * (bc * l + cc * m);
        let s22 = bc * bc * l + 2.0 * bc * cc * m + cc * cc * q;
        let _ = t2;
        ShapeData {
            weingarten,
            deviator: Complex64::new(0.5 * (s11 - s22), s12),
            mean: 0.5 * (s11 + s22),
        }
    }

    /// Maximum absolute principal curvature over a coarse scan (sets the
    /// umbilic detection threshold).
    pub fn curvature_scale(&self) -> f64 {
        let (u0, u1, v0, v1) = self.domain().sample_box();
        let n = 24;
        let mut worst = 0.0f64;
        for i in 0..=n {
            for j in 0..=n {
                let u = u0 + (u1 - u0) * i as f64 / n as f64;
                let v = v0 + (v1 - v0) * j as f64 / n as f64;
                if !self.domain().contains(u, v) {
                    continue;
                }
                let sd = self.shape(u, v);
                worst = worst.max(sd.mean.abs() + sd.deviator.norm());
            }
        }
        worst
    }
}

/// Pointwise curvature data.
#[derive(Debug, Clone, Copy)]
pub struct ShapeData {
    /// shape operator in the `(∂u, ∂v)` basis
    pub weingarten: Matrix2<f64>,
    /// trace-free part of the shape operator in an orthonormal tangent frame,
    /// as the complex value `(S₁₁−S₂₂)/2 + i S₁₂` (gauge phase irrelevant for
    /// zeros and magnitudes)
    pub deviator: Complex64,
    /// mean curvature `(κ₁+κ₂)/2`
    pub mean: f64,
}

/// Normal line congruence of a patch, resampled onto a polar grid in ξ.
///
/// For each node the Gauss map is inverted by a damped Newton iteration with
/// ring-by-ring warm starts; the patch must be graph-like over its direction
/// image (convex in the flow direction).
pub fn normal_congruence(
    patch: &SurfacePatch,
    grid: &PolarGrid,
) -> Result<(SectionField, ndarray::Array2<OrientedLine>)> {
    let mut f = ndarray::Array2::from_elem((grid.n_r, grid.n_theta), Complex64::new(0.0, 0.0));
    let mut lines = ndarray::Array2::from_elem(
        (grid.n_r, grid.n_theta),
        OrientedLine { xi: Complex64::new(0.0, 0.0), eta: Complex64::new(0.0, 0.0) },
    );
    let mut prev_ring: Vec<Vector2<f64>> = vec![Vector2::zeros(); grid.n_theta];
    for j in 0..grid.n_r {
        for k in 0..grid.n_theta {
            let target = grid.xi(j, k);
            let start = if j == 0 { Vector2::zeros() } else { prev_ring[k] };
            let uv = invert_gauss_map(patch, target, start)?;
            prev_ring[k] = uv;
            let jet = patch.jet2(uv.x, uv.y);
            let line =
                OrientedLine::through(target, Complex64::new(jet.p.x, jet.p.y), jet.p.z);
            lines[[j, k]] = line;
            f[[j, k]] = line.eta;
        }
        if j == 0 {
            // all angular samples share the origin solution
            let p0 = prev_ring[0];
            for slot in prev_ring.iter_mut() {
                *slot = p0;
            }
            let eta0 = f[[0, 0]];
            for k in 0..grid.n_theta {
                f[[0, k]] = eta0;
            }
        }
    }
    let section = SectionField::new(grid.clone(), f)?;
    Ok((section, lines))
}

fn invert_gauss_map(
    patch: &SurfacePatch,
    target: Complex64,
    start: Vector2<f64>,
) -> Result<Vector2<f64>> {
    let mut uv = start;
    let h = 1e-7;
    let eval = |uv: Vector2<f64>| -> Result<Complex64> {
        stereo(patch.unit_normal(uv.x, uv.y))
    };
    for _ in 0..60 {
        let fval = eval(uv)? - target;
        if fval.norm() < 1e-13 {
            return Ok(uv);
        }
        let fu = (eval(uv + Vector2::new(h, 0.0))? - eval(uv - Vector2::new(h, 0.0))?) / (2.0 * h);
        let fv = (eval(uv + Vector2::new(0.0, h))? - eval(uv - Vector2::new(0.0, h))?) / (2.0 * h);
        let jac = Matrix2::new(fu.re, fv.re, fu.im, fv.im);
        let step = jac
            .try_inverse()
            .ok_or(NkError::GaussMapDegenerate { u: uv.x, v: uv.y })?
            * Vector2::new(fval.re, fval.im);
        if !step.x.is_finite() || !step.y.is_finite() {
            return Err(NkError::GaussMapDegenerate { u: uv.x, v: uv.y });
        }
        // damp long steps to stay inside the chart
        let len = step.norm();
        let damp = if len > 0.2 { 0.2 / len } else { 1.0 };
        uv -= step * damp;
    }
    let fval = eval(uv)? - target;
    if fval.norm() < 1e-10 {
        Ok(uv)
    } else {
        Err(NkError::GaussMapDegenerate { u: uv.x, v: uv.y })
    }
}

/// One detected umbilic.
#[derive(Debug, Clone, Copy)]
pub struct UmbilicReport {
    pub u: f64,
    pub v: f64,
    /// deviator magnitude at the refined location
    pub deviator_norm: f64,
    /// half-integer index when computed
    pub index: Option<f64>,
    pub loop_radius: f64,
}

/// Result of an umbilic scan.
#[derive(Debug, Clone)]
pub struct UmbilicScan {
    pub reports: Vec<UmbilicReport>,
    /// true when the deviator vanishes on a region (totally umbilic patch)
    pub non_isolated: bool,
    pub threshold: f64,
}

/// Locate zeros of the shape-operator deviator by sign-change cells plus
/// Newton refinement.
pub fn detect_umbilics(patch: &SurfacePatch) -> Result<UmbilicScan> {
    let res = patch.resolution();
    let threshold = 1e-3 * patch.curvature_scale();
    let (u0, u1, v0, v1) = patch.domain().sample_box();
    let mut dev = ndarray::Array2::from_elem((res + 1, res + 1), Complex64::new(0.0, 0.0));
    let mut inside = ndarray::Array2::from_elem((res + 1, res + 1), false);
    let du = (u1 - u0) / res as f64;
    let dv = (v1 - v0) / res as f64;
    let mut small = 0usize;
    let mut total = 0usize;
    for i in 0..=res {
        for j in 0..=res {
            let u = u0 + du * i as f64;
            let v = v0 + dv * j as f64;
            if !patch.domain().contains(u, v) {
                continue;
            }
            inside[[i, j]] = true;
            dev[[i, j]] = patch.shape(u, v).deviator;
            total += 1;
            if dev[[i, j]].norm() < threshold {
                small += 1;
            }
        }
    }
    if total > 0 && small * 2 > total {
        return Ok(UmbilicScan { reports: Vec::new(), non_isolated: true, threshold });
    }

    let mut reports: Vec<UmbilicReport> = Vec::new();
    for i in 0..res {
        for j in 0..res {
            if !(inside[[i, j]] && inside[[i + 1, j]] && inside[[i, j + 1]] && inside[[i + 1, j + 1]])
            {
                continue;
            }
            let corners =
                [dev[[i, j]], dev[[i + 1, j]], dev[[i + 1, j + 1]], dev[[i, j + 1]]];
            let re_change = corners.iter().any(|c| c.re > 0.0) && corners.iter().any(|c| c.re < 0.0);
            let im_change = corners.iter().any(|c| c.im > 0.0) && corners.iter().any(|c| c.im < 0.0);
            let near_zero = corners.iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min)
                < 10.0 * threshold;
            if !((re_change && im_change) || near_zero) {
                continue;
            }
            let cu = u0 + du * (i as f64 + 0.5);
            let cv = v0 + dv * (j as f64 + 0.5);
            if let Some((ru, rv)) = refine_umbilic(patch, cu, cv) {
                let dnorm = patch.shape(ru, rv).deviator.norm();
                if dnorm > threshold || !patch.domain().contains(ru, rv) {
                    continue;
                }
                let dominates = reports
                    .iter()
                    .any(|r| ((r.u - ru).powi(2) + (r.v - rv).powi(2)).sqrt() < 2.0 * du.max(dv));
                if !dominates {
                    reports.push(UmbilicReport {
                        u: ru,
                        v: rv,
                        deviator_norm: dnorm,
                        index: None,
                        loop_radius: 0.0,
                    });
                }
            }
        }
    }
    Ok(UmbilicScan { reports, non_isolated: false, threshold })
}

/// Newton refinement of a deviator zero to 1e-8 in parameter space.
fn refine_umbilic(patch: &SurfacePatch, u: f64, v: f64) -> Option<(f64, f64)> {
    let mut uv = Vector2::new(u, v);
    let h = 1e-6;
    for _ in 0..50 {
        let f0 = patch.shape(uv.x, uv.y).deviator;
        if f0.norm() == 0.0 {
            return Some((uv.x, uv.y));
        }
        let fu = (patch.shape(uv.x + h, uv.y).deviator - patch.shape(uv.x - h, uv.y).deviator)
            / (2.0 * h);
        let fv = (patch.shape(uv.x, uv.y + h).deviator - patch.shape(uv.x, uv.y - h).deviator)
            / (2.0 * h);
        let jac = Matrix2::new(fu.re, fv.re, fu.im, fv.im);
        let step = jac.try_inverse()? * Vector2::new(f0.re, f0.im);
        uv -= step;
        if step.norm() < 1e-9 {
            return Some((uv.x, uv.y));
        }
    }
    None
}

/// Winding number of the principal foliation about `(center_u, center_v)`,
/// by transporting the doubled direction angle around the loop.
pub fn principal_index(
    patch: &SurfacePatch,
    center_u: f64,
    center_v: f64,
    loop_radius: f64,
) -> Result<f64> {
    let samples = 720;
    let threshold = 1e-3 * patch.curvature_scale();
    let mut prev_omega: Option<f64> = None;
    let mut total = 0.0;
    for s in 0..=samples {
        let phi = std::f64::consts::TAU * s as f64 / samples as f64;
        let u = center_u + loop_radius * phi.cos();
        let v = center_v + loop_radius * phi.sin();
        let sd = patch.shape(u, v);
        if sd.deviator.norm() < threshold {
            return Err(NkError::UmbilicOnLoop);
        }
        // principal direction of the larger eigenvalue in (u, v) components
        let w = sd.weingarten;
        let tr = w[(0, 0)] + w[(1, 1)];
        let det = w[(0, 0)] * w[(1, 1)] - w[(0, 1)] * w[(1, 0)];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let kappa1 = tr / 2.0 + disc;
        // eigenvector: pick the better-conditioned row
        let cand1 = Vector2::new(w[(0, 1)], kappa1 - w[(0, 0)]);
        let cand2 = Vector2::new(kappa1 - w[(1, 1)], w[(1, 0)]);
        let dir = if cand1.norm() > cand2.norm() { cand1 } else { cand2 };
        let omega = 2.0 * dir.y.atan2(dir.x);
        if let Some(prev) = prev_omega {
            let mut delta = omega - prev;
            while delta > std::f64::consts::PI {
                delta -= std::f64::consts::TAU;
            }
            while delta < -std::f64::consts::PI {
                delta += std::f64::consts::TAU;
            }
            total += delta;
        }
        prev_omega = Some(omega);
    }
    let index = total / (2.0 * std::f64::consts::TAU);
    let snapped = (index * 2.0).round() / 2.0;
    if (index - snapped).abs() > 0.1 {
        return Err(NkError::IndexUnresolved { value: index });
    }
    Ok(snapped)
}

/// Umbilic locations of the ellipsoid `x²/a² + y²/b² + z²/c² = 1` with
/// `a > b > c` (classical closed form, in the x–z plane).
pub fn ellipsoid_umbilics(a2: f64, b2: f64, c2: f64) -> [Vector3<f64>; 4] {
    let x = (a2 * (a2 - b2) / (a2 - c2)).sqrt();
    let z = (c2 * (b2 - c2) / (a2 - c2)).sqrt();
    [
        Vector3::new(x, 0.0, z),
        Vector3::new(-x, 0.0, z),
        Vector3::new(x, 0.0, -z),
        Vector3::new(-x, 0.0, -z),
    ]
}
