use alloc::vec;
use alloc::vec::Vec;

use super::DenseMatrix;
use crate::error::{Error, Result};
use crate::math;

/// Householder reflectors `H_k = I - 2 v_k v_k^T` acting on rows `k..`.
#[derive(Debug, Clone)]
struct Reflectors {
    vs: Vec<Vec<f64>>,
}

impl Reflectors {
    /// `x <- H_{last} ... H_0 x` (that is, `Q^T x`).
    fn apply_qt(&self, x: &mut [f64]) {
        for (k, v) in self.vs.iter().enumerate() {
            reflect(v, &mut x[k..]);
        }
    }

    /// `x <- H_0 ... H_{last} x` (that is, `Q x`).
    fn apply_q(&self, x: &mut [f64]) {
        for (k, v) in self.vs.iter().enumerate().rev() {
            reflect(v, &mut x[k..]);
        }
    }
}

#[inline]
fn reflect(v: &[f64], x: &mut [f64]) {
    let c = 2.0 * math::dot(v, x);
    if c != 0.0 {
        math::axpy(-c, v, x);
    }
}

/// Unit Householder vector mapping `x` onto `alpha e_0`; returns `(v, alpha)`.
/// `None` when `x` is already zero.
fn householder(x: &[f64]) -> Option<(Vec<f64>, f64)> {
    let nrm = math::norm2(x);
    if nrm == 0.0 {
        return None;
    }
    let alpha = if x[0] >= 0.0 { -nrm } else { nrm };
    let mut v = x.to_vec();
    v[0] -= alpha;
    let vn = math::norm2(&v);
    if vn == 0.0 {
        return None;
    }
    v.iter_mut().for_each(|e| *e /= vn);
    Some((v, alpha))
}

/// Householder QR of the columns `cols` (each of length `len`), optionally
/// with column pivoting. Returns reflectors, the `rank x ncols` upper
/// trapezoidal factor (row-major), the column permutation and the rank.
fn qr(
    mut cols: Vec<Vec<f64>>,
    len: usize,
    pivot: bool,
) -> (Reflectors, Vec<Vec<f64>>, Vec<usize>, usize) {
    let ncols = cols.len();
    let steps = len.min(ncols);
    let mut perm: Vec<usize> = (0..ncols).collect();
    let mut vs = Vec::with_capacity(steps);
    let mut r_rows: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let tol_factor = (len.max(ncols) as f64) * f64::EPSILON;
    let mut r00 = 0.0;
    let mut rank = 0;

    for k in 0..steps {
        if pivot {
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..ncols {
                let nrm = math::dot(&cols[j][k..], &cols[j][k..]);
                if nrm > best_norm {
                    best_norm = nrm;
                    best = j;
                }
            }
            cols.swap(k, best);
            perm.swap(k, best);
        }
        let Some((v, alpha)) = householder(&cols[k][k..]) else {
            break;
        };
        if k == 0 {
            r00 = math::abs(alpha);
        } else if math::abs(alpha) <= tol_factor * r00 {
            break;
        }
        cols[k][k] = alpha;
        for x in cols[k][k + 1..].iter_mut() {
            *x = 0.0;
        }
        for j in k + 1..ncols {
            reflect(&v, &mut cols[j][k..]);
        }
        vs.push(v);
        rank = k + 1;
    }
    for i in 0..rank {
        r_rows.push((0..ncols).map(|j| if j < i { 0.0 } else { cols[j][i] }).collect());
    }
    (Reflectors { vs }, r_rows, perm, rank)
}

/// Minimum-norm least-squares operator `A^+` of a dense matrix, kept in
/// factored form.
///
/// Column-pivoted QR `A P = Q1 R1` reveals the rank `r`. When `r` equals the
/// column count, `A^+ = P R1^{-1} Q1^T`. Otherwise the trapezoidal `R1` is
/// reduced once more, `R1^T = Z S`, giving the complete orthogonal
/// decomposition `A P = Q1 S^T Z^T` and `A^+ = P Z S^{-T} Q1^T`.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    rows: usize,
    cols: usize,
    rank: usize,
    q1: Reflectors,
    perm: Vec<usize>,
    /// `rank x rank` triangular core `T` with `A P = Q1 T Z^T`.
    core: Vec<Vec<f64>>,
    core_lower: bool,
    z: Option<Reflectors>,
}

impl PseudoInverse {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::NonFinite("matrix"));
        }
        let (m, n) = a.shape();
        let cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
        let (q1, r_rows, perm, rank) = qr(cols, m, true);

        let (core, core_lower, z) = if rank == n {
            let core = r_rows.iter().map(|row| row[..rank].to_vec()).collect();
            (core, false, None)
        } else {
            // Columns of R1^T are the rows of R1.
            let (z, s_rows, _, zrank) = qr(r_rows, n, false);
            debug_assert_eq!(zrank, rank);
            // core = S^T, lower triangular.
            let mut core = vec![vec![0.0; rank]; rank];
            for i in 0..rank.min(zrank) {
                for j in i..rank {
                    core[j][i] = s_rows[i][j];
                }
            }
            (core, true, Some(z))
        };

        Ok(PseudoInverse {
            rows: m,
            cols: n,
            rank,
            q1,
            perm,
            core,
            core_lower,
            z,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Column count of the factored matrix (output length of [`apply`](Self::apply)).
    pub fn source_cols(&self) -> usize {
        self.cols
    }

    /// Row count of the factored matrix.
    pub fn source_rows(&self) -> usize {
        self.rows
    }

    /// `out = A^+ b`
    pub fn apply(&self, b: &[f64], out: &mut [f64]) {
        debug_assert_eq!(b.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        let mut c = b.to_vec();
        self.q1.apply_qt(&mut c);
        let w = solve_triangular(&self.core, self.core_lower, false, &c[..self.rank]);
        let mut zvec = vec![0.0; self.cols];
        zvec[..self.rank].copy_from_slice(&w);
        if let Some(z) = &self.z {
            z.apply_q(&mut zvec);
        }
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = zvec[i];
        }
    }

    /// `out = (A^+)^T v`
    pub fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        let mut t: Vec<f64> = self.perm.iter().map(|&p| v[p]).collect();
        if let Some(z) = &self.z {
            z.apply_qt(&mut t);
        }
        let w = solve_triangular(&self.core, self.core_lower, true, &t[..self.rank]);
        let mut u = vec![0.0; self.rows];
        u[..self.rank].copy_from_slice(&w);
        self.q1.apply_q(&mut u);
        out.copy_from_slice(&u);
    }
}

/// Solve `T w = c` (or `T^T w = c` when `transpose`), `T` triangular.
fn solve_triangular(t: &[Vec<f64>], lower: bool, transpose: bool, c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut w = c.to_vec();
    let at = |i: usize, j: usize| if transpose { t[j][i] } else { t[i][j] };
    // Effective orientation of the system matrix.
    if lower != transpose {
        for i in 0..n {
            let mut s = w[i];
            for j in 0..i {
                s -= at(i, j) * w[j];
            }
            w[i] = s / at(i, i);
        }
    } else {
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in i + 1..n {
                s -= at(i, j) * w[j];
            }
            w[i] = s / at(i, i);
        }
    }
    w
}
