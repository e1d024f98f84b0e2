//! The pseudo-orthogonal group O(n,m): membership test and the gauge normal
//! form.
//!
//! A frame-transition matrix is stored in the block layout
//!
//! ```text
//! M = [  X   W ]      X: n×n   W: n×m
//!     [ −U  −V ]      U: m×n   V: m×m
//! ```
//!
//! and O(n,m) membership reads `XᵀX = Iₙ + UᵀU`, `VᵀV = Iₘ + WᵀW`,
//! `UᵀV = XᵀW`. The normal form executes the gauge-reduction proof:
//! symmetrise `X` by its polar factor, diagonalise by two-sided rotations,
//! reorder to split off the `I_{n−m}` block, do the same for `V`, and read
//! off the diagonal factors `D₁…D₄` with `D₁² = I + D₃²`, `D₂² = I + D₄²`
//! and `|D₁|² = |D₂|²`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::NkError;
use crate::Result;

/// Tolerance for O(n,m) membership residuals.
pub const ONM_TOL: f64 = 1e-10;

/// An element of O(n,m) in the `[[X, W], [−U, −V]]` block layout.
#[derive(Debug, Clone)]
pub struct PseudoOrthogonalMatrix {
    pub n: usize,
    pub m: usize,
    pub entries: DMatrix<f64>,
}

impl PseudoOrthogonalMatrix {
    pub fn new(n: usize, m: usize, entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != n + m || entries.ncols() != n + m {
            return Err(NkError::DimensionMismatch { expected: n + m, got: entries.nrows() });
        }
        Ok(Self { n, m, entries })
    }

    pub fn block_x(&self) -> DMatrix<f64> {
        self.entries.view((0, 0), (self.n, self.n)).into()
    }
    pub fn block_w(&self) -> DMatrix<f64> {
        self.entries.view((0, self.n), (self.n, self.m)).into()
    }
    pub fn block_u(&self) -> DMatrix<f64> {
        -DMatrix::from(self.entries.view((self.n, 0), (self.m, self.n)))
    }
    pub fn block_v(&self) -> DMatrix<f64> {
        -DMatrix::from(self.entries.view((self.n, self.n), (self.m, self.m)))
    }
}

/// The three block-identity residual norms `(XᵀX−I−UᵀU, VᵀV−I−WᵀW, UᵀV−XᵀW)`.
pub fn onm_residuals(mat: &PseudoOrthogonalMatrix) -> [f64; 3] {
    let x = mat.block_x();
    let w = mat.block_w();
    let u = mat.block_u();
    let v = mat.block_v();
    let r1 = (x.transpose() * &x - DMatrix::identity(mat.n, mat.n) - u.transpose() * &u).norm();
    let r2 = (v.transpose() * &v - DMatrix::identity(mat.m, mat.m) - w.transpose() * &w).norm();
    let r3 = (u.transpose() * &v - x.transpose() * &w).norm();
    [r1, r2, r3]
}

/// O(n,m) membership check: true iff all three block identities hold to
/// [`ONM_TOL`]. Residual norms are always returned.
pub fn check_onm(entries: &DMatrix<f64>, n: usize, m: usize) -> Result<(bool, [f64; 3])> {
    let mat = PseudoOrthogonalMatrix::new(n, m, entries.clone())?;
    let res = onm_residuals(&mat);
    Ok((res.iter().all(|&r| r < ONM_TOL), res))
}

/// Result of the gauge reduction.
#[derive(Debug, Clone)]
pub struct NormalForm {
    /// diagonal factors, each of length m
    pub d1: DVector<f64>,
    pub d2: DVector<f64>,
    pub d3: DVector<f64>,
    pub d4: DVector<f64>,
    /// signed transposition factors with `U₁ = D₃A`, `W₁ = D₄B`
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// the fully reduced matrix (block pattern of the normal form)
    pub reduced: DMatrix<f64>,
    /// accumulated frame rotations: `original = leftᵀ · reduced · right`
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    /// deviation of `A` from a signed permutation (diagnostic)
    pub transposition_residual: f64,
}

impl NormalForm {
    /// `leftᵀ · reduced · right`, which must reproduce the input.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.left.transpose() * &self.reduced * &self.right
    }

    /// Frobenius norms `(|D₁|², |D₂|²)`.
    pub fn d_norms(&self) -> (f64, f64) {
        (self.d1.iter().map(|x| x * x).sum(), self.d2.iter().map(|x| x * x).sum())
    }
}

/// Symmetric square root of a positive-definite matrix by eigendecomposition,
/// with eigenvalue floor 1e-12 (the O(n,m) identities guarantee eigenvalues
/// at or above 1).
fn sym_sqrt(s: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = s.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|x| x.max(1e-12).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (na, nb) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(na + nb, na + nb);
    out.view_mut((0, 0), (na, na)).copy_from(a);
    out.view_mut((na, na), (nb, nb)).copy_from(b);
    out
}

/// Execute the gauge-reduction construction for `n ≥ m`.
pub fn onm_normal_form(mat: &PseudoOrthogonalMatrix) -> Result<NormalForm> {
    let (n, m) = (mat.n, mat.m);
    if n < m {
        return Err(NkError::NotImplementedForNLessM { n, m });
    }
    let res = onm_residuals(mat);
    if res.iter().any(|&r| r >= ONM_TOL) {
        return Err(NkError::NotPseudoOrthogonal {
            residual: res.iter().fold(0.0f64, |a, &b| a.max(b)),
        });
    }

    let total = n + m;
    let mut work = mat.entries.clone();
    let mut left = DMatrix::identity(total, total);
    let mut right = DMatrix::identity(total, total);
    let mut apply = |work: &mut DMatrix<f64>,
                     left: &mut DMatrix<f64>,
                     right: &mut DMatrix<f64>,
                     al: &DMatrix<f64>,
                     ar: &DMatrix<f64>| {
        *work = &*al * &*work * ar.transpose();
        *left = &*al * &*left;
        *right = &*ar * &*right;
    };

    // 1) symmetrise X by its polar factor  A = √(XᵀX)·X⁻¹ ∈ O(n)
    let x = DMatrix::from(work.view((0, 0), (n, n)));
    let s = sym_sqrt(&(x.transpose() * &x));
    let x_inv = x.clone().try_inverse().ok_or(NkError::NotPseudoOrthogonal { residual: f64::MAX })?;
    let pol = &s * &x_inv;
    let al = block_diag(&pol, &DMatrix::identity(m, m));
    let ar = DMatrix::identity(total, total);
    apply(&mut work, &mut left, &mut right, &al, &ar);

    // 2) diagonalise the symmetric X by a two-sided rotation
    let x = DMatrix::from(work.view((0, 0), (n, n)));
    let eig = x.symmetric_eigen();
    let q_t = eig.eigenvectors.transpose();
    let rot = block_diag(&q_t, &DMatrix::identity(m, m));
    apply(&mut work, &mut left, &mut right, &rot.clone(), &rot);

    // 3) reorder so the n−m unit entries of X come first
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| work[(i, i)].partial_cmp(&work[(j, j)]).unwrap());
    let mut perm = DMatrix::zeros(n, n);
    for (row, &col) in idx.iter().enumerate() {
        perm[(row, col)] = 1.0;
    }
    let permb = block_diag(&perm, &DMatrix::identity(m, m));
    apply(&mut work, &mut left, &mut right, &permb.clone(), &permb);

    // 4) symmetrise and diagonalise V the same way (acting on ν and T frames)
    let v = -DMatrix::from(work.view((n, n), (m, m)));
    let sv = sym_sqrt(&(v.transpose() * &v));
    let v_inv = v.clone().try_inverse().ok_or(NkError::NotPseudoOrthogonal { residual: f64::MAX })?;
    let polv = &sv * &v_inv;
    let al = block_diag(&DMatrix::identity(n, n), &polv);
    let ar = DMatrix::identity(total, total);
    apply(&mut work, &mut left, &mut right, &al, &ar);
    let v = -DMatrix::from(work.view((n, n), (m, m)));
    let eigv = v.symmetric_eigen();
    let qv_t = eigv.eigenvectors.transpose();
    let rotv = block_diag(&DMatrix::identity(n, n), &qv_t);
    apply(&mut work, &mut left, &mut right, &rotv.clone(), &rotv);

    // 5) read off the factors from the reduced blocks
    let reduced = PseudoOrthogonalMatrix::new(n, m, work.clone())?;
    let x = reduced.block_x();
    let v = reduced.block_v();
    let u = reduced.block_u();
    let w = reduced.block_w();
    let d1 = DVector::from_iterator(m, (n - m..n).map(|i| x[(i, i)]));
    let d2 = DVector::from_iterator(m, (0..m).map(|i| v[(i, i)]));
    let u1 = DMatrix::from(u.view((0, n - m), (m, m)));
    let w1 = DMatrix::from(w.view((n - m, 0), (m, m)));

    // rows of U₁ = D₃·A with A a signed transposition; sign choice puts the
    // magnitudes in D₃ (non-negative) and the signs in A
    let mut d3 = DVector::zeros(m);
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        let norm = u1.row(i).norm();
        d3[i] = norm;
        if norm > 1e-12 {
            for jj in 0..m {
                a[(i, jj)] = u1[(i, jj)] / norm;
            }
        } else {
            a[(i, i)] = 1.0;
        }
    }
    let mut d4 = DVector::zeros(m);
    let mut b = DMatrix::zeros(m, m);
    for i in 0..m {
        let norm = w1.row(i).norm();
        d4[i] = norm;
        if norm > 1e-12 {
            for jj in 0..m {
                b[(i, jj)] = w1[(i, jj)] / norm;
            }
        } else {
            b[(i, i)] = 1.0;
        }
    }
    // how far A is from a signed permutation
    let mut transposition_residual = 0.0f64;
    for i in 0..m {
        for jj in 0..m {
            let v = a[(i, jj)].abs();
            transposition_residual = transposition_residual.max(v.min((v - 1.0).abs()));
        }
    }

    Ok(NormalForm { d1, d2, d3, d4, a, b, reduced: work, left, right, transposition_residual })
}

/// Elementary boost in the `(e_i, T_α)` plane.
pub fn boost(n: usize, m: usize, i: usize, alpha: usize, t: f64) -> DMatrix<f64> {
    let mut g = DMatrix::identity(n + m, n + m);
    g[(i, i)] = t.cosh();
    g[(n + alpha, n + alpha)] = t.cosh();
    g[(i, n + alpha)] = t.sinh();
    g[(n + alpha, i)] = t.sinh();
    g
}

/// Elementary rotation inside the spacelike block (`which = 0`) or the
/// timelike block (`which = 1`).
pub fn rotation(n: usize, m: usize, which: usize, i: usize, j: usize, th: f64) -> DMatrix<f64> {
    let off = if which == 0 { 0 } else { n };
    let mut g = DMatrix::identity(n + m, n + m);
    g[(off + i, off + i)] = th.cos();
    g[(off + j, off + j)] = th.cos();
    g[(off + i, off + j)] = -th.sin();
    g[(off + j, off + i)] = th.sin();
    g
}

/// Random O(n,m) element: a product of seeded elementary boosts and
/// rotations. Deterministic for a fixed generator state.
pub fn random_onm(n: usize, m: usize, rng: &mut impl Rng) -> PseudoOrthogonalMatrix {
    let mut mat = DMatrix::identity(n + m, n + m);
    for _ in 0..6 {
        let i = rng.gen_range(0..n);
        let alpha = rng.gen_range(0..m);
        mat = boost(n, m, i, alpha, rng.gen_range(-1.2..1.2)) * mat;
        if n > 1 {
            let (p, q) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if p != q {
                mat = rotation(n, m, 0, p, q, rng.gen_range(0.0..6.28)) * mat;
            }
        }
        if m > 1 {
            let (p, q) = (rng.gen_range(0..m), rng.gen_range(0..m));
            if p != q {
                mat = rotation(n, m, 1, p, q, rng.gen_range(0.0..6.28)) * mat;
            }
        }
    }
    PseudoOrthogonalMatrix { n, m, entries: mat }
}
