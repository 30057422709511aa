//! Strong rank-revealing QR and the row interpolative decomposition built on it.
//!
//! The column-selection engine works on column-major storage. A row ID of
//! `A` is a column ID of `Aᵀ`, and the columns of `Aᵀ` are exactly the rows
//! of the row-major `A`, so [`id_rows`] factors `A`'s buffer without copying
//! it into a transposed layout.
//!
//! Selection starts with Householder QR with column pivoting. At a fixed
//! rank `k` the swap phase then exchanges a selected column `i` with an
//! unselected column `j` whenever that multiplies |det R11| by more than `f`;
//! the gain of such a swap is `sqrt(B_ij² + (γ_j / ω_i)²)` with
//! `B = R11⁻¹ R12`, `γ_j` the column norms of `R22` and `1/ω_i` the row norms
//! of `R11⁻¹`. On exit every |B_ij| ≤ f.

use crate::error::{Error, Result};
use crate::matrix::{gemm, norm2, DenseMatrix, MatRef};

/// Swap gains must exceed `f·(1 + SWAP_SLACK)`, so rounding cannot cycle.
const SWAP_SLACK: f64 = 1e-10;

/// Output of [`srrqr`]: `A Π = Q [R11 R12; 0 R22]` with `|R11⁻¹R12| ≤ f`.
#[derive(Clone, Debug)]
pub struct SrrqrFactors {
    /// Column order Π; the first `k` entries are the selected columns.
    pub permutation: Vec<usize>,
    pub r11: DenseMatrix,
    pub r12: DenseMatrix,
    pub r22: DenseMatrix,
    /// `R11⁻¹ R12`, the interpolation coefficients of the unselected columns.
    pub interpolation: DenseMatrix,
    /// Number of swaps performed after the pivoted QR.
    pub swaps: usize,
}

impl SrrqrFactors {
    pub fn rank(&self) -> usize {
        self.r11.n_rows()
    }

    pub fn selected(&self) -> &[usize] {
        &self.permutation[..self.rank()]
    }
}

/// Row ID `A ≈ U · A[skeleton, :]`.
#[derive(Clone, Debug)]
pub struct IdFactors {
    pub skeleton: Vec<usize>,
    /// n × k; rows at skeleton positions form the identity.
    pub projection: DenseMatrix,
    pub entry_bound: f64,
    /// 2-norm of every row of `A − U · A_J`, computed explicitly.
    pub row_residuals: Vec<f64>,
    pub swaps: usize,
}

impl IdFactors {
    pub fn rank(&self) -> usize {
        self.skeleton.len()
    }

    pub fn max_residual(&self) -> f64 {
        self.row_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_abs_projection(&self) -> f64 {
        self.projection.max_abs()
    }
}

/// Householder QR with column pivoting on column-major data, advanced one
/// step at a time so the caller decides when to stop.
struct PivotedQr<'a> {
    source: &'a [f64],
    m: usize,
    n: usize,
    work: Vec<f64>,
    perm: Vec<usize>,
    tau: Vec<f64>,
    norms: Vec<f64>,
    ref_norms: Vec<f64>,
    steps: usize,
}

impl<'a> PivotedQr<'a> {
    fn new(source: &'a [f64], m: usize, n: usize) -> Self {
        let mut qr = Self {
            source,
            m,
            n,
            work: Vec::new(),
            perm: (0..n).collect(),
            tau: Vec::new(),
            norms: Vec::new(),
            ref_norms: Vec::new(),
            steps: 0,
        };
        qr.reset();
        qr
    }

    /// Restarts from the original columns in the order of `self.perm`.
    fn reset(&mut self) {
        let m = self.m;
        self.work.clear();
        self.work.reserve(m * self.n);
        for &p in &self.perm {
            self.work.extend_from_slice(&self.source[p * m..(p + 1) * m]);
        }
        self.norms = (0..self.n).map(|j| norm2(self.col(j))).collect();
        self.ref_norms = self.norms.clone();
        self.tau.clear();
        self.steps = 0;
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.work[j * self.m..(j + 1) * self.m]
    }

    fn max_steps(&self) -> usize {
        self.m.min(self.n)
    }

    /// Largest trailing column norm among unselected columns (0 if none).
    fn max_trailing_norm(&self) -> f64 {
        self.norms[self.steps..].iter().copied().fold(0.0, f64::max)
    }

    fn swap_columns(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let m = self.m;
        let (lo, hi) = (a.min(b), a.max(b));
        let (head, tail) = self.work.split_at_mut(hi * m);
        head[lo * m..(lo + 1) * m].swap_with_slice(&mut tail[..m]);
        self.perm.swap(a, b);
        self.norms.swap(a, b);
        self.ref_norms.swap(a, b);
    }

    /// One Householder step. Pivots on the largest trailing norm unless
    /// `pivoting` is false, in which case column `steps` is taken as is.
    fn step(&mut self, pivoting: bool) {
        let (m, s) = (self.m, self.steps);
        debug_assert!(s < self.max_steps());
        if pivoting {
            let mut best = s;
            for j in s + 1..self.n {
                if self.norms[j] > self.norms[best] {
                    best = j;
                }
            }
            self.swap_columns(s, best);
        }

        let (head, tail) = self.work.split_at_mut((s + 1) * m);
        let v = &mut head[s * m + s..(s + 1) * m];
        let alpha = norm2(v);
        let tau = if alpha == 0.0 {
            0.0
        } else {
            let v0 = v[0];
            let beta = if v0 >= 0.0 { -alpha } else { alpha };
            let scale = 1.0 / (v0 - beta);
            for x in &mut v[1..] {
                *x *= scale;
            }
            v[0] = beta;
            (beta - v0) / beta
        };
        self.tau.push(tau);

        let w_tail = &v[1..];
        for (jj, col) in tail.chunks_exact_mut(m).enumerate() {
            let j = s + 1 + jj;
            let c = &mut col[s..];
            if tau != 0.0 {
                let d = tau * (c[0] + c[1..].iter().zip(w_tail).map(|(a, b)| a * b).sum::<f64>());
                c[0] -= d;
                for (x, w) in c[1..].iter_mut().zip(w_tail) {
                    *x -= d * w;
                }
            }
            // norm downdating with recomputation when cancellation gets severe
            let nj = self.norms[j];
            if nj != 0.0 {
                let t = (c[0] / nj).abs();
                let t = (1.0 - t * t).max(0.0);
                let ratio = nj / self.ref_norms[j];
                if t * ratio * ratio <= f64::EPSILON.sqrt() {
                    let fresh = norm2(&c[1..]);
                    self.norms[j] = fresh;
                    self.ref_norms[j] = fresh;
                } else {
                    self.norms[j] = nj * t.sqrt();
                }
            }
        }
        self.norms[s] = 0.0;
        self.steps += 1;
    }

    /// Upper-triangular R entry (i, j) in the current column order, i ≤ steps.
    fn r(&self, i: usize, j: usize) -> f64 {
        if i > j && j < self.steps {
            0.0
        } else {
            self.work[j * self.m + i]
        }
    }

    fn r11(&self) -> DenseMatrix {
        let k = self.steps;
        DenseMatrix::from_fn(k, k, |i, j| if i <= j { self.r(i, j) } else { 0.0 })
    }

    fn r12(&self) -> DenseMatrix {
        let k = self.steps;
        DenseMatrix::from_fn(k, self.n - k, |i, j| self.r(i, k + j))
    }

    fn r22(&self) -> DenseMatrix {
        let k = self.steps;
        DenseMatrix::from_fn(self.m - k, self.n - k, |i, j| self.work[(k + j) * self.m + k + i])
    }

    fn trailing_column_norms(&self) -> Vec<f64> {
        let k = self.steps;
        (k..self.n).map(|j| norm2(&self.col(j)[k..])).collect()
    }

    /// Refactors with the current column order and no pivoting for `k` steps.
    fn refactor(&mut self, k: usize) {
        self.reset();
        for _ in 0..k {
            self.step(false);
        }
    }

    /// Swap phase at the current rank. Returns the number of swaps.
    fn enforce_entry_bound(&mut self, f: f64) -> usize {
        let k = self.steps;
        if k == 0 || k == self.n {
            return 0;
        }
        let mut swaps = 0;
        loop {
            let r11 = self.r11();
            if (0..k).any(|i| r11.get(i, i) == 0.0) {
                // exactly rank deficient: the trailing block is zero
                return swaps;
            }
            let inv = upper_triangular_inverse(&r11);
            let b = triangular_solve(&r11, &self.r12());
            let gamma = self.trailing_column_norms();
            let inv_row_norms: Vec<f64> = inv.rows().map(norm2).collect();

            let mut best = (0.0, 0, 0);
            for (i, &wi) in inv_row_norms.iter().enumerate() {
                for (j, (&bij, &gj)) in b.row(i).iter().zip(&gamma).enumerate() {
                    let gain = bij * bij + (gj * wi) * (gj * wi);
                    if gain > best.0 {
                        best = (gain, i, j);
                    }
                }
            }
            let threshold = f * (1.0 + SWAP_SLACK);
            if best.0.sqrt() <= threshold {
                return swaps;
            }
            let (_, i, j) = best;
            self.perm.swap(i, k + j);
            self.refactor(k);
            swaps += 1;
        }
    }

    fn interpolation(&self) -> DenseMatrix {
        triangular_solve(&self.r11(), &self.r12())
    }
}

/// Inverse of an upper-triangular matrix with nonzero diagonal.
fn upper_triangular_inverse(r: &DenseMatrix) -> DenseMatrix {
    let k = r.n_rows();
    let mut inv = DenseMatrix::zeros(k, k);
    for col in 0..k {
        // solve R x = e_col; x is zero below `col`
        for i in (0..=col).rev() {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for p in i + 1..=col {
                s -= r.get(i, p) * inv.get(p, col);
            }
            inv.set(i, col, s / r.get(i, i));
        }
    }
    inv
}

/// Solves `R X = B` by back substitution. Rows with a zero pivot get zero,
/// which is the right answer when the matching rows of `B` are zero.
fn triangular_solve(r: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (k, n) = b.shape();
    let mut x = b.clone();
    for i in (0..k).rev() {
        let pivot = r.get(i, i);
        for p in i + 1..k {
            let rip = r.get(i, p);
            if rip != 0.0 {
                let (upper, lower) = x.as_mut_slice().split_at_mut(p * n);
                let xi = &mut upper[i * n..(i + 1) * n];
                for (a, b) in xi.iter_mut().zip(&lower[..n]) {
                    *a -= rip * b;
                }
            }
        }
        let xi = x.row_mut(i);
        if pivot == 0.0 {
            xi.fill(0.0);
        } else {
            for a in xi.iter_mut() {
                *a /= pivot;
            }
        }
    }
    x
}

fn check_f(f: f64) -> Result<()> {
    if !(f.is_finite() && f >= 1.0) {
        return Err(Error::InvalidArgument(format!("entry bound f must be >= 1, got {f}")));
    }
    Ok(())
}

/// Strong rank-revealing QR of `a` at rank `k`, selecting columns.
pub fn srrqr(a: &DenseMatrix, k: usize, f: f64) -> Result<SrrqrFactors> {
    check_f(f)?;
    let (m, n) = a.shape();
    if k == 0 || k > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "rank {k} outside 1..={} for a {m}x{n} matrix",
            m.min(n)
        )));
    }
    let columns = a.transpose();
    let mut qr = PivotedQr::new(columns.as_slice(), m, n);
    for _ in 0..k {
        qr.step(true);
    }
    let swaps = qr.enforce_entry_bound(f);
    Ok(SrrqrFactors {
        permutation: qr.perm.clone(),
        r11: qr.r11(),
        r12: qr.r12(),
        r22: qr.r22(),
        interpolation: qr.interpolation(),
        swaps,
    })
}

/// Row ID of `a` with every row residual ‖(A − U A_J)_i‖₂ ≤ `tol` and every
/// |U_ij| ≤ `f`, at the smallest rank the pivoted QR reaches.
pub fn id_rows(a: &DenseMatrix, tol: f64, f: f64) -> Result<IdFactors> {
    check_f(f)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be > 0, got {tol}")));
    }
    let (n, m) = a.shape();
    // columns of Aᵀ are the rows of A
    let mut qr = PivotedQr::new(a.as_slice(), m, n);
    let mut swaps = 0;
    loop {
        while qr.steps < qr.max_steps() && qr.max_trailing_norm() > tol {
            qr.step(true);
        }
        swaps += qr.enforce_entry_bound(f);
        let k = qr.steps;
        let skeleton: Vec<usize> = qr.perm[..k].to_vec();
        let projection = assemble_projection(n, &qr.perm, &qr.interpolation());
        let row_residuals = explicit_row_residuals(a, &projection, &skeleton);
        let worst = row_residuals.iter().copied().fold(0.0, f64::max);
        if worst <= tol || k == qr.max_steps() {
            return Ok(IdFactors { skeleton, projection, entry_bound: f, row_residuals, swaps });
        }
        // swaps or rounding left a row above tolerance: grow the rank
        qr.step(true);
    }
}

fn assemble_projection(n: usize, perm: &[usize], interp: &DenseMatrix) -> DenseMatrix {
    let k = interp.n_rows();
    let mut u = DenseMatrix::zeros(n, k);
    for (p, &row) in perm[..k].iter().enumerate() {
        u.set(row, p, 1.0);
    }
    for (j, &row) in perm[k..].iter().enumerate() {
        for p in 0..k {
            u.set(row, p, interp.get(p, j));
        }
    }
    u
}

/// ‖A_i − U_i A_J‖₂ for every row i.
pub fn explicit_row_residuals(a: &DenseMatrix, u: &DenseMatrix, skeleton: &[usize]) -> Vec<f64> {
    let (n, m) = a.shape();
    let k = skeleton.len();
    let a_j = a.select_rows(skeleton);
    let mut resid = a.as_slice().to_vec();
    gemm(
        -1.0,
        MatRef::row_major(u.as_slice(), n, k),
        MatRef::row_major(a_j.as_slice(), k, m),
        1.0,
        &mut resid,
        m,
    );
    if m == 0 {
        return vec![0.0; n];
    }
    resid.chunks_exact(m).map(norm2).collect()
}
