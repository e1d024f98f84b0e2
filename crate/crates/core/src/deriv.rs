//! Complex derivatives `∂ = ∂/∂ξ`, `∂̄ = ∂/∂ξ̄` on the polar grid.
//!
//! In polar coordinates `ξ = r e^{iθ}`:
//!
//! ```text
//! ∂  = e^{-iθ}/2 · (∂_r − (i/r) ∂_θ)
//! ∂̄  = e^{+iθ}/2 · (∂_r + (i/r) ∂_θ)
//! ```
//!
//! θ-differentiation is spectral (FFT per ring). The radial derivative acts
//! per angular mode with 7-point stencils; across the origin each mode `k` is
//! extended by its parity, `f_k(−r) = (−1)^k f_k(r)`, which closes the
//! stencils without one-sided bias. At the outer edge biased 7-point stencils
//! (Fornberg weights) keep sixth order.
//!
//! Sixth-order stencils are used instead of the nominal fourth order so that
//! low-degree polynomial sections (the calibration oracles) differentiate to
//! round-off.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::NkError;
use crate::grid::{ComplexField, PolarGrid};
use crate::Result;

const STENCIL: usize = 7;
const HALF: usize = STENCIL / 2;
/// wider one-sided windows at the outer edge keep composed derivatives sharp
const EDGE_STENCIL: usize = 8;

thread_local! {
    static FFT_CACHE: RefCell<HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>> =
        RefCell::new(HashMap::new());
}

fn with_ffts<T>(n: usize, f: impl FnOnce(&Arc<dyn Fft<f64>>, &Arc<dyn Fft<f64>>) -> T) -> T {
    FFT_CACHE.with(|cache| {
        let mut cache = cache.borrow_mut();
        let (fwd, inv) = cache.entry(n).or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        });
        f(fwd, inv)
    })
}

/// Signed frequency of FFT bin `idx` for transform length `n`.
fn freq(idx: usize, n: usize) -> i64 {
    if idx <= n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// Fornberg finite-difference weights for the `m`-th derivative at `z`
/// from the nodes `x`.
fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Radial stencil table for one grid: centered interior weights plus the
/// biased rows used at the outer edge.
#[derive(Debug, Clone)]
struct RadialStencils {
    centered: [f64; STENCIL],
    /// weights for evaluation at j = n_r−3, n_r−2, n_r−1 on the trailing window
    edge: [Vec<f64>; HALF],
    edge_len: usize,
    n_r: usize,
}

impl RadialStencils {
    fn new(grid: &PolarGrid, order: usize) -> Self {
        let h = grid.dr();
        let nodes: Vec<f64> = (0..STENCIL).map(|i| i as f64 * h).collect();
        let centered_v = fd_weights(nodes[HALF], &nodes, order);
        let mut centered = [0.0; STENCIL];
        centered.copy_from_slice(&centered_v);

        let edge_len = EDGE_STENCIL.min(grid.n_r);
        let edge_nodes: Vec<f64> = (0..edge_len).map(|i| i as f64 * h).collect();
        let mut edge: [Vec<f64>; HALF] = Default::default();
        for (row, e) in edge.iter_mut().enumerate() {
            // evaluation point counted from the start of the trailing window
            let z = (edge_len - HALF + row) as f64 * h;
            *e = fd_weights(z, &edge_nodes, order);
        }
        Self { centered, edge, edge_len, n_r: grid.n_r }
    }

    /// Differentiate one angular mode radially, extending by parity at the
    /// origin: `f(−r) = sign · f(r)`.
    ///
    /// Stencil dot products are accumulated with Neumaier compensation: the
    /// weights scale like `1/Δr` and the terms cancel, so naive summation
    /// leaves `ε/Δr`-sized round-off that later derivative stages amplify.
    fn apply(&self, f: &[Complex64], sign: f64, out: &mut [Complex64]) {
        let n = self.n_r;
        let val = |idx: i64| -> Complex64 {
            if idx >= 0 {
                f[idx as usize]
            } else {
                f[(-idx) as usize] * sign
            }
        };
        for j in 0..n {
            let acc = if j + HALF < n {
                let mut acc = CompensatedC::default();
                for (m, w) in self.centered.iter().enumerate() {
                    acc.add(val(j as i64 + m as i64 - HALF as i64) * *w);
                }
                acc.total()
            } else {
                let row = &self.edge[j + HALF - n];
                let base = n - self.edge_len;
                let mut acc = CompensatedC::default();
                for (m, w) in row.iter().enumerate() {
                    acc.add(f[base + m] * *w);
                }
                acc.total()
            };
            out[j] = acc;
        }
    }
}

/// Neumaier-compensated complex accumulator.
#[derive(Default)]
struct CompensatedC {
    sum_re: f64,
    c_re: f64,
    sum_im: f64,
    c_im: f64,
}

impl CompensatedC {
    #[inline]
    fn add(&mut self, z: Complex64) {
        let t = self.sum_re + z.re;
        if self.sum_re.abs() >= z.re.abs() {
            self.c_re += (self.sum_re - t) + z.re;
        } else {
            self.c_re += (z.re - t) + self.sum_re;
        }
        self.sum_re = t;
        let t = self.sum_im + z.im;
        if self.sum_im.abs() >= z.im.abs() {
            self.c_im += (self.sum_im - t) + z.im;
        } else {
            self.c_im += (z.im - t) + self.sum_im;
        }
        self.sum_im = t;
    }

    #[inline]
    fn total(&self) -> Complex64 {
        Complex64::new(self.sum_re + self.c_re, self.sum_im + self.c_im)
    }
}

thread_local! {
    static STENCIL_CACHE: RefCell<HashMap<(usize, u64, usize), RadialStencils>> =
        RefCell::new(HashMap::new());
}

fn stencils(grid: &PolarGrid, order: usize) -> RadialStencils {
    let key = (grid.n_r, grid.dr().to_bits(), order);
    STENCIL_CACHE.with(|cache| {
        let mut cache = cache.borrow_mut();
        cache.entry(key).or_insert_with(|| RadialStencils::new(grid, order)).clone()
    })
}

/// FFT all rings of a field. Returns mode coefficients normalised by `1/n`.
fn analyze(grid: &PolarGrid, f: &ComplexField) -> Array2<Complex64> {
    let n = grid.n_theta;
    let mut modes = f.clone();
    with_ffts(n, |fwd, _| {
        for mut row in modes.rows_mut() {
            let slice = row.as_slice_mut().expect("contiguous row");
            fwd.process(slice);
        }
    });
    modes.mapv_inplace(|z| z / n as f64);
    modes
}

/// Inverse FFT all rings of a mode array (coefficients normalised by `1/n`).
fn synthesize(grid: &PolarGrid, modes: &mut Array2<Complex64>) {
    let n = grid.n_theta;
    with_ffts(n, |_, inv| {
        for mut row in modes.rows_mut() {
            let slice = row.as_slice_mut().expect("contiguous row");
            inv.process(slice);
        }
    });
}

/// Ring-wise angular mode cap from the Cauchy bound: a field analytic on the
/// disc has mode-`k` content at radius `r` bounded by `M (r/R)^{|k|}`, so
/// modes with `(r_j/R)^{|k|} < 1e-18` are round-off and are dropped before
/// the `k/r` factor can amplify them near the axis.
fn cauchy_cap(j: usize, n_r: usize) -> i64 {
    if j == 0 {
        return 0;
    }
    let ratio = (n_r - 1) as f64 / j as f64;
    if ratio <= 1.0 {
        return i64::MAX;
    }
    let cap = 18.0 * std::f64::consts::LN_10 / ratio.ln();
    if cap >= i64::MAX as f64 {
        i64::MAX
    } else {
        cap.floor() as i64
    }
}

/// Both complex derivatives `(∂f, ∂̄f)` of a field on the grid.
pub fn complex_derivatives(grid: &PolarGrid, f: &ComplexField) -> Result<(ComplexField, ComplexField)> {
    if f.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(NkError::NonFiniteInput);
    }
    let n_r = grid.n_r;
    let n_t = grid.n_theta;
    let mut modes = analyze(grid, f);
    for j in 0..n_r {
        let cap = cauchy_cap(j, n_r);
        for idx in 0..n_t {
            if freq(idx, n_t).abs() > cap {
                modes[[j, idx]] = Complex64::new(0.0, 0.0);
            }
        }
    }

    let mut plus: Array2<Complex64> = Array2::zeros((n_r, n_t));
    let mut minus: Array2<Complex64> = Array2::zeros((n_r, n_t));

    {
        let st = stencils(grid, 1);
        let mut col = vec![Complex64::new(0.0, 0.0); n_r];
        let mut der = vec![Complex64::new(0.0, 0.0); n_r];
        for idx in 0..n_t {
            let k = freq(idx, n_t);
            let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            for j in 0..n_r {
                col[j] = modes[[j, idx]];
            }
            st.apply(&col, sign, &mut der);
            for j in 0..n_r {
                let (p, m) = if j == 0 {
                    if k == 0 {
                        (0.5 * der[0], 0.5 * der[0])
                    } else {
                        (
                            0.5 * (1.0 + k as f64) * der[0],
                            0.5 * (1.0 - k as f64) * der[0],
                        )
                    }
                } else {
                    let kr = k as f64 / grid.r(j) * col[j];
                    (0.5 * (der[j] + kr), 0.5 * (der[j] - kr))
                };
                plus[[j, idx]] = p;
                minus[[j, idx]] = m;
            }
        }
    }

    synthesize(grid, &mut plus);
    synthesize(grid, &mut minus);

    // mode-shift twiddles: ∂ carries e^{-iθ}, ∂̄ carries e^{+iθ}
    for j in 0..n_r {
        for k in 0..n_t {
            let th = grid.theta(k);
            let em = Complex64::from_polar(1.0, -th);
            plus[[j, k]] *= em;
            minus[[j, k]] *= em.conj();
        }
    }
    // origin row: average angular samples back to a single value
    for field in [&mut plus, &mut minus] {
        let mean = field.row(0).iter().sum::<Complex64>() / n_t as f64;
        field.row_mut(0).fill(mean);
    }
    Ok((plus, minus))
}

/// Direct second derivatives `(∂∂̄f, ∂²f, ∂̄²f)`.
///
/// Evaluated in mode space with radial first- and second-derivative stencils:
///
/// ```text
/// ∂∂̄f = ¼ Σ [f_k'' + f_k'/r − k² f_k/r²]              e^{ikθ}
/// ∂²f  = ¼ Σ [f_k'' + (2k−1) f_k'/r + k(k−2) f_k/r²]  e^{i(k−2)θ}
/// ∂̄²f  = ¼ Σ [f_k'' − (2k+1) f_k'/r + k(k+2) f_k/r²]  e^{i(k+2)θ}
/// ```
///
/// Composing two first-derivative passes instead would differentiate the
/// first pass's edge error and lose two orders at the outer ring.
pub fn second_derivatives(
    grid: &PolarGrid,
    f: &ComplexField,
) -> Result<(ComplexField, ComplexField, ComplexField)> {
    if f.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(NkError::NonFiniteInput);
    }
    let n_r = grid.n_r;
    let n_t = grid.n_theta;
    let mut modes = analyze(grid, f);
    for j in 0..n_r {
        let cap = cauchy_cap(j, n_r);
        for idx in 0..n_t {
            if freq(idx, n_t).abs() > cap {
                modes[[j, idx]] = Complex64::new(0.0, 0.0);
            }
        }
    }

    let mut mix: Array2<Complex64> = Array2::zeros((n_r, n_t));
    let mut dd: Array2<Complex64> = Array2::zeros((n_r, n_t));
    let mut dbdb: Array2<Complex64> = Array2::zeros((n_r, n_t));

    {
        let st1 = stencils(grid, 1);
        let st2 = stencils(grid, 2);
        {
            let mut col = vec![Complex64::new(0.0, 0.0); n_r];
            let mut d1 = vec![Complex64::new(0.0, 0.0); n_r];
            let mut d2 = vec![Complex64::new(0.0, 0.0); n_r];
            for idx in 0..n_t {
                let k = freq(idx, n_t);
                let kf = k as f64;
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                for j in 0..n_r {
                    col[j] = modes[[j, idx]];
                }
                st1.apply(&col, sign, &mut d1);
                st2.apply(&col, sign, &mut d2);
                for j in 1..n_r {
                    let r = grid.r(j);
                    let fr = col[j] / r;
                    let d1r = d1[j] / r;
                    mix[[j, idx]] = 0.25 * (d2[j] + d1r - kf * kf * fr / r);
                    dd[[j, idx]] = 0.25 * (d2[j] + (2.0 * kf - 1.0) * d1r + kf * (kf - 2.0) * fr / r);
                    dbdb[[j, idx]] =
                        0.25 * (d2[j] - (2.0 * kf + 1.0) * d1r + kf * (kf + 2.0) * fr / r);
                }
                // origin limits: only the mode aligning with e^{i·0·θ} after the
                // twiddle survives, with f_k ~ c r^{|k|}
                if k == 0 {
                    mix[[0, idx]] = 0.5 * d2[0];
                }
                if k == 2 {
                    dd[[0, idx]] = d2[0];
                }
                if k == -2 {
                    dbdb[[0, idx]] = d2[0];
                }
            }
        }
    }

    synthesize(grid, &mut mix);
    synthesize(grid, &mut dd);
    synthesize(grid, &mut dbdb);
    for j in 0..n_r {
        for k in 0..n_t {
            let tw = Complex64::from_polar(1.0, -2.0 * grid.theta(k));
            dd[[j, k]] *= tw;
            dbdb[[j, k]] *= tw.conj();
        }
    }
    for field in [&mut mix, &mut dd, &mut dbdb] {
        let mean = field.row(0).iter().sum::<Complex64>() / n_t as f64;
        field.row_mut(0).fill(mean);
    }
    Ok((mix, dd, dbdb))
}

/// `∂f` only.
pub fn d(grid: &PolarGrid, f: &ComplexField) -> Result<ComplexField> {
    Ok(complex_derivatives(grid, f)?.0)
}

/// `∂̄f` only.
pub fn db(grid: &PolarGrid, f: &ComplexField) -> Result<ComplexField> {
    Ok(complex_derivatives(grid, f)?.1)
}

/// Derivatives of a real field.
pub fn complex_derivatives_real(
    grid: &PolarGrid,
    f: &crate::grid::RealField,
) -> Result<(ComplexField, ComplexField)> {
    let c = f.mapv(|x| Complex64::new(x, 0.0));
    complex_derivatives(grid, &c)
}

/// Smooth polar cap filter used by the flow stepper.
///
/// Zeroes angular mode `k` on ring `j` when `|k| > max(4, 2j)`. Smooth fields
/// carry `O(r^{|k|})` mode content near the axis, so the filter acts at
/// round-off level while removing the `(k/r)²` stiffness that would otherwise
/// set the explicit step size from the innermost ring.
pub fn pole_filter(grid: &PolarGrid, f: &mut ComplexField) {
    let n_t = grid.n_theta;
    let mut modes = analyze(grid, f);
    for j in 0..grid.n_r {
        let cap = (2 * j).max(4) as i64;
        for idx in 0..n_t {
            if freq(idx, n_t).abs() > cap {
                modes[[j, idx]] = Complex64::new(0.0, 0.0);
            }
        }
    }
    synthesize(grid, &mut modes);
    f.assign(&modes);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SectionField;

    fn max_err(a: &ComplexField, b: &ComplexField) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn holomorphic_monomial() {
        // f = ξ → ∂f = 1, ∂̄f = 0
        let grid = PolarGrid::new(17, 16, 0.5).unwrap();
        let f = grid.sample(|xi| xi);
        let (dp, dm) = complex_derivatives(&grid, &f).unwrap();
        let one = grid.sample(|_| Complex64::new(1.0, 0.0));
        let zero = grid.sample(|_| Complex64::new(0.0, 0.0));
        assert!(max_err(&dp, &one) < 1e-12);
        assert!(max_err(&dm, &zero) < 1e-12);
    }

    #[test]
    fn product_rule_xi_xibar() {
        // f = ξξ̄ → ∂f = ξ̄, ∂̄f = ξ
        let grid = PolarGrid::new(17, 16, 0.5).unwrap();
        let f = grid.sample(|xi| xi * xi.conj());
        let (dp, dm) = complex_derivatives(&grid, &f).unwrap();
        let xb = grid.sample(|xi| xi.conj());
        let x = grid.sample(|xi| xi);
        assert!(max_err(&dp, &xb) < 1e-12);
        assert!(max_err(&dm, &x) < 1e-12);
    }

    #[test]
    fn mixed_monomial_below_1e8() {
        // f = ξ²ξ̄³ on 33×64, R = 0.5 → max error vs ∂f = 2ξξ̄³ below 1e-8
        let grid = PolarGrid::new(33, 64, 0.5).unwrap();
        let f = grid.sample(|xi| xi * xi * xi.conj().powu(3));
        let (dp, dm) = complex_derivatives(&grid, &f).unwrap();
        let exact_p = grid.sample(|xi| 2.0 * xi * xi.conj().powu(3));
        let exact_m = grid.sample(|xi| 3.0 * xi * xi * xi.conj() * xi.conj());
        assert!(max_err(&dp, &exact_p) < 1e-8, "∂ err {}", max_err(&dp, &exact_p));
        assert!(max_err(&dm, &exact_m) < 1e-8, "∂̄ err {}", max_err(&dm, &exact_m));
    }

    #[test]
    fn transcendental_converges_at_order() {
        // non-polynomial section: error drops by ≥ 3.5 orders of 2 per n_r doubling
        let f = |xi: Complex64| (xi * xi.conj() * 3.0).exp() * xi.conj().powu(2);
        let exact = |xi: Complex64| {
            // ∂[e^{3ξξ̄} ξ̄²] = 3ξ̄·e^{3ξξ̄}·ξ̄² = 3ξ̄³ e^{3ξξ̄}
            3.0 * xi.conj().powu(3) * (3.0 * xi * xi.conj()).exp()
        };
        let mut errs = Vec::new();
        for n_r in [17usize, 33, 65] {
            let grid = PolarGrid::new(n_r, 64, 0.5).unwrap();
            let field = grid.sample(f);
            let (dp, _) = complex_derivatives(&grid, &field).unwrap();
            let ex = grid.sample(exact);
            errs.push(max_err(&dp, &ex));
        }
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        assert!(o1 > 3.5 && o2 > 3.5, "orders {o1:.2} {o2:.2}, errs {errs:?}");
    }

    #[test]
    fn second_derivatives_on_monomials() {
        let grid = PolarGrid::new(33, 64, 0.5).unwrap();
        // f = ξ²ξ̄³: ∂∂̄f = 6ξξ̄², ∂²f = 2ξ̄³, ∂̄²f = 6ξ²ξ̄
        let f = grid.sample(|xi| xi * xi * xi.conj().powu(3));
        let (mix, dd, dbdb) = second_derivatives(&grid, &f).unwrap();
        let mix_e = grid.sample(|xi| 6.0 * xi * xi.conj() * xi.conj());
        let dd_e = grid.sample(|xi| 2.0 * xi.conj().powu(3));
        let dbdb_e = grid.sample(|xi| 6.0 * xi * xi * xi.conj());
        assert!(max_err(&mix, &mix_e) < 1e-9, "mix {}", max_err(&mix, &mix_e));
        assert!(max_err(&dd, &dd_e) < 1e-9, "dd {}", max_err(&dd, &dd_e));
        assert!(max_err(&dbdb, &dbdb_e) < 1e-9, "dbdb {}", max_err(&dbdb, &dbdb_e));
    }

    #[test]
    fn second_derivatives_match_composition_inside() {
        let grid = PolarGrid::new(33, 64, 0.5).unwrap();
        let f = grid.sample(|xi| (xi * xi.conj() * 2.0).exp() * xi + 0.3 * xi.conj());
        let (mix, _, _) = second_derivatives(&grid, &f).unwrap();
        let (df, _) = complex_derivatives(&grid, &f).unwrap();
        let (_, dbdf) = complex_derivatives(&grid, &df).unwrap();
        // compare away from the outer edge where composition loses accuracy
        let mut worst = 0.0f64;
        for j in 0..grid.n_r - 4 {
            for k in 0..grid.n_theta {
                worst = worst.max((mix[[j, k]] - dbdf[[j, k]]).norm());
            }
        }
        assert!(worst < 1e-7, "mix vs composed {worst}");
    }

    #[test]
    fn rejects_non_finite() {
        let grid = PolarGrid::new(9, 16, 0.5).unwrap();
        let mut f = grid.sample(|xi| xi);
        f[[3, 4]] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(complex_derivatives(&grid, &f), Err(NkError::NonFiniteInput)));
    }

    #[test]
    fn pole_filter_is_roundoff_on_smooth_fields() {
        let grid = PolarGrid::new(33, 64, 0.5).unwrap();
        let sec = SectionField::from_fn(grid.clone(), |xi| {
            Complex64::new(0.0, -1.0) * xi + 0.1 * xi.conj().powu(2)
        })
        .unwrap();
        let mut filtered = sec.f.clone();
        pole_filter(&grid, &mut filtered);
        let err = max_err(&filtered, &sec.f);
        assert!(err < 1e-9, "filter distortion {err}");
    }
}
