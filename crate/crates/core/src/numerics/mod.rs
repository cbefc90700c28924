//! Dense linear algebra used by the bounds and recovery code.
//!
//! Only what the rest of the crate needs: extreme singular values (full
//! Jacobi SVD for small matrices, Lanczos bidiagonalization for the largest
//! one at scale) and minimum-norm least squares through a complete
//! orthogonal decomposition. The pseudoinverse is never formed.

mod dense;
mod lanczos;
mod pinv;
mod svd;

pub use dense::DenseMatrix;
pub use lanczos::{top_singular_value, LanczosOptions};
pub use pinv::PseudoInverse;
pub use svd::{singular_values, symmetric_eigenvalues};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A real linear map applied matrix-free.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `out = self * x`
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = self^T * y`
    fn apply_transpose(&self, y: &[f64], out: &mut [f64]);
}

/// Largest singular value of `a`.
///
/// Golub–Kahan–Lanczos with full reorthogonalization; relative accuracy
/// better than `1e-10` on the sizes this crate uses.
pub fn sigma_max(a: &DenseMatrix) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::domain("sigma_max of an empty matrix"));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("matrix"));
    }
    Ok(top_singular_value(a, &LanczosOptions::default()))
}

/// Extreme singular values `(min, max)` of the columns of `a` listed in `support`.
pub fn sigma_minmax_submatrix(a: &DenseMatrix, support: &[usize]) -> Result<(f64, f64)> {
    if support.is_empty() {
        return Err(Error::domain("empty support"));
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= a.ncols()) {
        return Err(Error::domain(alloc::format!(
            "support column {bad} out of range for {} columns",
            a.ncols()
        )));
    }
    let sub = a.select_columns(support);
    if !sub.is_finite() {
        return Err(Error::NonFinite("matrix"));
    }
    let sv = singular_values(&sub);
    // A tall m x k block has k singular values; a wide one has zeros beyond m.
    let min = if support.len() > a.nrows() {
        0.0
    } else {
        sv.last().copied().unwrap_or(0.0)
    };
    Ok((min, sv[0]))
}

/// Minimum-norm least-squares solution of `a x ≈ b`.
pub fn lstsq(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.nrows() {
        return Err(Error::ShapeMismatch {
            expected: (a.nrows(), 1),
            found: (b.len(), 1),
        });
    }
    if !crate::math::all_finite(b) {
        return Err(Error::NonFinite("right-hand side"));
    }
    let pinv = PseudoInverse::new(a)?;
    let mut x = vec![0.0; a.ncols()];
    pinv.apply(b, &mut x);
    Ok(x)
}

/// `v -> A0^+ (dA v)` without materializing the pseudoinverse.
struct PinvProduct<'a, P: LinearOperator> {
    pinv: &'a PseudoInverse,
    da: &'a P,
}

impl<P: LinearOperator> LinearOperator for PinvProduct<'_, P> {
    fn nrows(&self) -> usize {
        self.pinv.source_cols()
    }
    fn ncols(&self) -> usize {
        self.da.ncols()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; self.da.nrows()];
        self.da.apply(x, &mut tmp);
        self.pinv.apply(&tmp, out);
    }
    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; self.da.nrows()];
        self.pinv.apply_transpose(y, &mut tmp);
        self.da.apply_transpose(&tmp, out);
    }
}

/// `sigma_max((A0)^+ dA)`, each pseudoinverse application going through the
/// least-squares factorization of `a0`.
///
/// `a0` must have full row rank (true almost surely for wide ±1 matrices).
pub fn sigma_max_pinv_product<P: LinearOperator>(a0: &DenseMatrix, da: &P) -> Result<f64> {
    if a0.nrows() != da.nrows() || a0.ncols() != da.ncols() {
        return Err(Error::ShapeMismatch {
            expected: (a0.nrows(), a0.ncols()),
            found: (da.nrows(), da.ncols()),
        });
    }
    let pinv = PseudoInverse::new(a0)?;
    if pinv.rank() < a0.nrows() {
        return Err(Error::RankDeficient {
            rank: pinv.rank(),
            required: a0.nrows(),
        });
    }
    Ok(sigma_max_with_pinv(&pinv, da))
}

/// Same as [`sigma_max_pinv_product`] with an existing factorization of `A0`.
pub fn sigma_max_with_pinv<P: LinearOperator>(pinv: &PseudoInverse, da: &P) -> f64 {
    let op = PinvProduct { pinv, da };
    top_singular_value(&op, &LanczosOptions::default())
}

#[cfg(test)]
mod tests;
