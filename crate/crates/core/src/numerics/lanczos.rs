use alloc::vec;
use alloc::vec::Vec;

use super::LinearOperator;
use crate::keystream::{BitStream, Seed};
use crate::math;

/// Stopping rules for [`top_singular_value`].
#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Relative change of the Ritz value below which it counts as settled.
    pub tol: f64,
    /// Hard cap on bidiagonalization steps.
    pub max_steps: usize,
    /// Seed of the random start vector.
    pub seed: Seed,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: 1e-13,
            max_steps: 10_000,
            seed: Seed(0x5EED_1A2C_205D_0001),
        }
    }
}

/// Largest singular value of a matrix-free operator.
///
/// Golub–Kahan–Lanczos bidiagonalization from a random start with full
/// (twice repeated) reorthogonalization. The estimate is the largest
/// singular value of the projected bidiagonal; iteration stops once it has
/// changed by less than `tol` (relative) on two consecutive steps, on
/// breakdown, or when the Krylov space is exhausted.
pub fn top_singular_value<Op: LinearOperator + ?Sized>(op: &Op, opts: &LanczosOptions) -> f64 {
    let (m, n) = (op.nrows(), op.ncols());
    if m == 0 || n == 0 {
        return 0.0;
    }
    let kmax = m.min(n).min(opts.max_steps.max(1));

    let mut stream = BitStream::new(opts.seed);
    let mut u_next = vec![0.0; m];
    let mut v = Vec::new();
    let mut alpha = 0.0;
    // A start vector in the null space is vanishingly unlikely; retry a few
    // times before declaring the operator zero.
    for _ in 0..4 {
        let mut start = stream.normal_vec(n);
        let nrm = math::norm2(&start);
        start.iter_mut().for_each(|x| *x /= nrm);
        op.apply(&start, &mut u_next);
        alpha = math::norm2(&u_next);
        v = start;
        if alpha > 0.0 {
            break;
        }
    }
    if alpha == 0.0 || !alpha.is_finite() {
        return 0.0;
    }
    u_next.iter_mut().for_each(|x| *x /= alpha);

    let mut vs: Vec<Vec<f64>> = vec![v];
    let mut us: Vec<Vec<f64>> = vec![u_next];
    let mut alphas = vec![alpha];
    let mut betas: Vec<f64> = Vec::new();
    let mut prev = alpha;
    let mut settled = 0;
    let mut scale = alpha;

    for j in 0..kmax.saturating_sub(1) {
        let mut w = vec![0.0; n];
        op.apply_transpose(&us[j], &mut w);
        math::axpy(-alphas[j], &vs[j], &mut w);
        reorthogonalize(&mut w, &vs);
        let beta = math::norm2(&w);
        if beta <= 1e-14 * scale {
            break;
        }
        w.iter_mut().for_each(|x| *x /= beta);
        betas.push(beta);
        scale = scale.max(beta);

        let mut p = vec![0.0; m];
        op.apply(&w, &mut p);
        math::axpy(-beta, &us[j], &mut p);
        vs.push(w);
        reorthogonalize(&mut p, &us);
        let a = math::norm2(&p);
        if a <= 1e-14 * scale {
            alphas.push(0.0);
            break;
        }
        p.iter_mut().for_each(|x| *x /= a);
        alphas.push(a);
        us.push(p);
        scale = scale.max(a);

        let est = bidiagonal_top_singular_value(&alphas, &betas);
        if math::abs(est - prev) <= opts.tol * est {
            settled += 1;
            if settled >= 2 {
                return est;
            }
        } else {
            settled = 0;
        }
        prev = est;
    }
    bidiagonal_top_singular_value(&alphas, &betas)
}

/// Classical Gram–Schmidt against `basis`, applied twice.
fn reorthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = math::dot(w, b);
            math::axpy(-c, b, w);
        }
    }
}

/// Largest singular value of the upper bidiagonal matrix with diagonal
/// `alphas` and superdiagonal `betas`, via bisection on `B^T B`.
fn bidiagonal_top_singular_value(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    let mut d = vec![0.0; k];
    let mut e = vec![0.0; k.saturating_sub(1)];
    for i in 0..k {
        let b_prev = if i > 0 { betas[i - 1] } else { 0.0 };
        d[i] = alphas[i] * alphas[i] + b_prev * b_prev;
        if i + 1 < k {
            e[i] = alphas[i] * betas.get(i).copied().unwrap_or(0.0);
        }
    }
    let mut hi: f64 = 0.0;
    for i in 0..k {
        let left = if i > 0 { math::abs(e[i - 1]) } else { 0.0 };
        let right = if i + 1 < k { math::abs(e[i]) } else { 0.0 };
        hi = hi.max(d[i] + left + right);
    }
    if hi == 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    // Count of eigenvalues below x is k when x is above the spectrum.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count_below(&d, &e, mid) == k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    math::sqrt(hi)
}

fn sturm_count_below(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off = if i > 0 { e[i - 1] * e[i - 1] / q } else { 0.0 };
        q = d[i] - x - off;
        if q == 0.0 {
            q = -1e-300;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}
