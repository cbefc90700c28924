use alloc::vec::Vec;

use super::DenseMatrix;
use crate::math;

const MAX_SWEEPS: usize = 80;

/// Eigenvalues of a symmetric matrix, descending (cyclic Jacobi).
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let total = m.frobenius_norm();
    if total == 0.0 {
        return alloc::vec![0.0; n];
    }
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if math::sqrt(2.0 * off) <= 1e-15 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if math::abs(apq) <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + math::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + math::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                let tau = s / (1.0 + c);
                m[(p, p)] -= t * apq;
                m[(q, q)] += t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let g = m[(r, p)];
                    let h = m[(r, q)];
                    let new_rp = g - s * (h + g * tau);
                    let new_rq = h + s * (g - h * tau);
                    m[(r, p)] = new_rp;
                    m[(p, r)] = new_rp;
                    m[(r, q)] = new_rq;
                    m[(q, r)] = new_rq;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// All `min(rows, cols)` singular values, descending (one-sided Jacobi).
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    // Work on the columns of the tall orientation, stored contiguously.
    let tall = if a.nrows() >= a.ncols() {
        a.transpose()
    } else {
        a.clone()
    };
    // `tall` here holds one column of the tall matrix per row.
    let k = tall.nrows();
    let len = tall.ncols();
    let mut cols: Vec<Vec<f64>> = (0..k).map(|i| tall.row(i).to_vec()).collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha = math::dot(&cols[p], &cols[p]);
                let beta = math::dot(&cols[q], &cols[q]);
                let gamma = math::dot(&cols[p], &cols[q]);
                if gamma == 0.0 || math::abs(gamma) <= 1e-15 * math::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + math::sqrt(1.0 + zeta * zeta))
                } else {
                    -1.0 / (-zeta + math::sqrt(1.0 + zeta * zeta))
                };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                let up = &mut left[p];
                let uq = &mut right[0];
                for i in 0..len {
                    let x = up[i];
                    let y = uq[i];
                    up[i] = c * x - s * y;
                    uq[i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| math::norm2(c)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}
